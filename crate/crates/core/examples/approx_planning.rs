//! Basis weights from the approximate LP, compared with exact values on a
//! small population and timed on a large one.

use std::time::Instant;

use rfmdp::planner_approx::{approx_value, default_alpha, plan_approx};
use rfmdp::planner_exact::{plan_exact, Alpha};
use rfmdp::{epidemic, LiftedModel};

fn main() -> rfmdp::Result<()> {
    let lm = LiftedModel::compile(&epidemic(3))?;
    let w = plan_approx(&lm, &default_alpha(&lm))?;
    println!("weights {:?} = {:?}", w.names, w.weights);
    let vf = plan_exact(&lm, &Alpha::Uniform)?;
    for s in lm.states().step_by(5) {
        println!("{}  exact {:8.4}  approx {:8.4}", lm.state_to_json(&s), vf.value(&lm, &s), approx_value(&lm, &w.weights, &s));
    }

    let t = Instant::now();
    let big = LiftedModel::compile(&epidemic(100))?;
    let w = plan_approx(&big, &default_alpha(&big))?;
    println!("\nn = 100: {:?} in {:.2?}", w.weights, t.elapsed());
    println!("{}", serde_json::to_string_pretty(&w.diagnostics).unwrap());
    Ok(())
}
