//! Lifted states and admissible action histograms, with closed-form counts.

use rfmdp::counting::{num_histograms, state_space};
use rfmdp::{epidemic, LiftedModel};

fn main() -> rfmdp::Result<()> {
    let lm = LiftedModel::compile(&epidemic(2))?;
    println!("{} lifted states", lm.num_states());
    for s in state_space(&lm) {
        let actions = lm.actions(&s);
        println!("{}  |A| = {}", lm.state_to_json(&s), actions.len());
        for a in &actions {
            println!("    {}", lm.action_to_json(a));
        }
    }

    for n in [10u64, 100, 1000] {
        let lm = LiftedModel::compile(&epidemic(n))?;
        println!("n = {n}: {} states; ground would have 2^{}", lm.num_states(), 2 * n + 1);
    }
    println!("histograms of 5 objects over 4 buckets: {}", num_histograms(4, 5));
    Ok(())
}
