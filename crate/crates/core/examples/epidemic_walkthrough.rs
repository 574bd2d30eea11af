//! Backprojections and the restrict-nobody max-constraint of the epidemic
//! with three persons.

use rfmdp::lp::{export, ExportFormat};
use rfmdp::planner_approx::{block_spec, eliminate_max};
use rfmdp::rewards::Backprojections;
use rfmdp::{epidemic, LiftedModel};

fn main() -> rfmdp::Result<()> {
    let lm = LiftedModel::compile(&epidemic(3))?;
    let bps = Backprojections::new(&lm)?;

    let g1 = &bps.items[1];
    println!("g1(Sick=t, Epidemic=t) = {}", g1.propositional(1, 0, &[true]));
    println!("g1(Sick=t, Epidemic=f) = {}", g1.propositional(1, 0, &[false]));
    println!("g1(Sick=f, Epidemic=t) = {}", g1.propositional(0, 0, &[true]));
    println!("g1(Sick=f, Epidemic=f) = {}", g1.propositional(0, 0, &[false]));
    let g2 = &bps.items[2];
    for (label, bucket, restricted) in [("t, free", 1, 0), ("f, free", 0, 0), ("t, restricted", 1, 1), ("f, restricted", 0, 1)] {
        println!("g2(Travel={label}) = {}", g2.propositional(bucket, restricted, &[]));
    }
    println!("g0 = {}", bps.items[0].propositional(0, 0, &[]));

    let spec = block_spec(&lm, &bps, &lm.noop())?;
    println!("\nelimination order: {:?}", spec.order.iter().map(|&v| &spec.vars[v].name).collect::<Vec<_>>());
    let e = eliminate_max(&spec)?;
    println!("{}", export(&e.lp, ExportFormat::Human));
    println!("{:?}", e.stats);
    Ok(())
}
