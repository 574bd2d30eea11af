//! Next-state distribution of one lifted state under two actions, and a
//! sampled trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfmdp::transition::{next_state_distribution, sample_next_with};
use rfmdp::{epidemic, LiftedModel};
use serde_json::json;

fn main() -> rfmdp::Result<()> {
    let lm = LiftedModel::compile(&epidemic(3))?;
    let s = lm.state_from_json(&json!({"Sick": [2, 1], "Travel": [1, 2], "Epidemic": true}))?;
    for a in [lm.noop(), lm.action_from_json(&json!({"Restrict": {"ft": 1, "tt": 1}}))?] {
        println!("action {}", lm.action_to_json(&a));
        let dist = next_state_distribution(&lm, &s, &a)?;
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        for (next, p) in dist.iter().filter(|(_, p)| *p > 0.02) {
            println!("  {:.4}  {}", p, lm.state_to_json(next));
        }
        println!("  total mass {total}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s = lm.all_false_state();
    for t in 0..6 {
        println!("t={t} {}", lm.state_to_json(&s));
        s = sample_next_with(&lm, &s, &lm.noop(), &mut rng)?;
    }
    Ok(())
}
