//! Which restrictions keep at least half of the town healthy next step with
//! probability 0.5, and what do they cost in expected reward.

use rfmdp::planner_approx::{default_alpha, plan_approx};
use rfmdp::planner_exact::{plan_exact, Alpha};
use rfmdp::queries::{conditional_action_query, Plan, RestrictionPredicate};
use rfmdp::{epidemic, LiftedModel};
use serde_json::json;

fn main() -> rfmdp::Result<()> {
    let lm = LiftedModel::compile(&epidemic(6))?;
    let s = lm.state_from_json(&json!({"Sick": [3, 3], "Travel": [2, 4], "Epidemic": true}))?;
    let pred = RestrictionPredicate::parse(&lm, "count(Sick,false) >= half")?;
    let plans = [Plan::Exact(plan_exact(&lm, &Alpha::Uniform)?), Plan::Approx(plan_approx(&lm, &default_alpha(&lm))?)];
    for plan in &plans {
        for (t, p) in [(f64::NEG_INFINITY, 0.0), (f64::NEG_INFINITY, 0.5), (30.0, 0.5)] {
            let r = conditional_action_query(&lm, plan, &s, t, &pred, p)?;
            println!("{} t={t} p={p}: {} of {} actions", r.mode, r.actions.len(), lm.num_actions(&s));
            for qa in r.actions.iter().take(4) {
                println!("    Q {:8.4}  P {:.4}  {}", qa.q, qa.probability, lm.action_to_json(&qa.action));
            }
        }
    }
    Ok(())
}
