//! Bench CSV for exact and approximate planning, n = 2..8.

use std::time::Duration;

use rfmdp::bench::{run_bench, Algorithm, BenchConfig};

fn main() -> rfmdp::Result<()> {
    let cfg = BenchConfig {
        n_min: 2,
        n_max: 8,
        algorithms: vec![Algorithm::Exact, Algorithm::Approx, Algorithm::GroundAlp],
        time_limit: Duration::from_secs(60),
        ..Default::default()
    };
    run_bench(&cfg, &mut std::io::stdout())?;
    Ok(())
}
