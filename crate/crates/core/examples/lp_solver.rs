//! The simplex solver on a small production problem, with export and reimport.

use rfmdp::lp::{export, import, solve, ExportFormat, LinearProgram, Sense};

fn main() -> rfmdp::Result<()> {
    // maximize 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18
    let mut lp = LinearProgram::new("wyndor");
    let x = lp.add_var("x", 0.0, f64::INFINITY);
    let y = lp.add_var("y", 0.0, f64::INFINITY);
    lp.objective = vec![(x, -3.0), (y, -5.0)];
    lp.add_constraint(vec![(x, 1.0)], Sense::Le, 4.0);
    lp.add_constraint(vec![(y, 2.0)], Sense::Le, 12.0);
    lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);

    let sol = solve(&lp)?;
    println!("{} objective {} at {:?}", sol.status, -sol.objective, sol.values);
    let text = export(&lp, ExportFormat::Sectioned);
    println!("{text}");
    let again = solve(&import(&text)?)?;
    assert_eq!(again.values, sol.values);
    Ok(())
}
