//! Lifted results against the ground model for n = 2 and n = 3.

use rfmdp::epidemic;
use rfmdp::oracle::check_model;

fn main() -> rfmdp::Result<()> {
    for n in [2, 3] {
        let r = check_model(&epidemic(n))?;
        println!("n = {n}: passed = {}", r.passed());
        println!("{}", serde_json::to_string_pretty(&r).unwrap());
    }
    Ok(())
}
