//! Exact planning over the lifted state space and the greedy policy.

use rfmdp::planner_exact::{greedy_policy, plan_exact, Alpha};
use rfmdp::{epidemic, LiftedModel};

fn main() -> rfmdp::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let lm = LiftedModel::compile(&epidemic(n))?;
    let vf = plan_exact(&lm, &Alpha::Uniform)?;
    println!("{}", serde_json::to_string_pretty(&vf.diagnostics).unwrap());
    let policy = greedy_policy(&lm, &vf);
    for (s, a) in lm.states().zip(&policy.actions).take(12) {
        println!("V = {:9.4}  {}  ->  {}", vf.value(&lm, &s), lm.state_to_json(&s), lm.action_to_json(a));
    }
    Ok(())
}
