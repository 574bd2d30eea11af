//! Scaling runs over a model family, written as CSV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifted::LiftedModel;
use crate::lp::{self, LpStatus, SolveOptions};
use crate::model::RfMdpModel;
use crate::oracle::{self, GroundModel};
use crate::planner_approx::{self, build_alp};
use crate::planner_exact::{self, build_exact_lp, exact_constraint_count, Alpha};

pub const CSV_HEADER: &str = "family,n,algorithm,phase,seconds,states,actions,lp_variables,lp_constraints,status";

pub fn family_model(family: &str, n: u64) -> Result<RfMdpModel> {
    match family {
        "epidemic" => crate::model::epidemic_model(n, Default::default()),
        other => Err(Error::Precondition(format!("unknown model family {other}"))),
    }
}

pub const FAMILIES: &[&str] = &["epidemic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "approx")]
    Approx,
    #[serde(rename = "ground-vi")]
    GroundVi,
    #[serde(rename = "ground-alp")]
    GroundAlp,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Exact => "exact",
            Algorithm::Approx => "approx",
            Algorithm::GroundVi => "ground-vi",
            Algorithm::GroundAlp => "ground-alp",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Algorithm::Exact),
            "approx" => Ok(Algorithm::Approx),
            "ground-vi" => Ok(Algorithm::GroundVi),
            "ground-alp" => Ok(Algorithm::GroundAlp),
            _ => Err(Error::Precondition(format!("unknown algorithm {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Build,
    Solve,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "timeout")]
    Timeout,
    #[serde(rename = "oom-guard")]
    OomGuard,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub family: String,
    pub n: u64,
    pub algorithm: Algorithm,
    pub phase: Phase,
    pub seconds: f64,
    pub states: u128,
    /// Lifted (state, action) pairs, or ground actions for the ground runs.
    pub actions: u128,
    pub lp_variables: usize,
    pub lp_constraints: usize,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub family: String,
    pub n_min: u64,
    pub n_max: u64,
    pub algorithms: Vec<Algorithm>,
    pub time_limit: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            family: "epidemic".into(),
            n_min: 2,
            n_max: 10,
            algorithms: vec![Algorithm::Exact, Algorithm::Approx],
            time_limit: Duration::from_secs(600),
        }
    }
}

struct Run {
    build: f64,
    solve: f64,
    states: u128,
    actions: u128,
    lp_variables: usize,
    lp_constraints: usize,
    status: Status,
}

fn run_one(model: &RfMdpModel, algorithm: Algorithm, limit: Duration) -> Result<Run> {
    let t0 = Instant::now();
    let deadline = t0 + limit;
    let opts = SolveOptions { deadline: Some(deadline), ..Default::default() };
    let mut run = Run { build: 0.0, solve: 0.0, states: 0, actions: 0, lp_variables: 0, lp_constraints: 0, status: Status::Ok };
    let solved = |run: &mut Run, r: Result<()>| -> Result<()> {
        match r {
            Ok(()) => Ok(()),
            Err(Error::Timeout) => {
                run.status = Status::Timeout;
                Ok(())
            }
            Err(Error::Guard(_)) => {
                run.status = Status::OomGuard;
                Ok(())
            }
            Err(e) => Err(e),
        }
    };
    match algorithm {
        Algorithm::Exact | Algorithm::Approx => {
            let lm = LiftedModel::compile(model)?;
            run.states = lm.num_states();
            run.actions = exact_constraint_count(&lm);
            let lp = if algorithm == Algorithm::Exact {
                if planner_exact::exact_guard(&lm).is_err() {
                    run.status = Status::OomGuard;
                    return Ok(run);
                }
                build_exact_lp(&lm, &Alpha::Uniform)?
            } else {
                build_alp(&lm, &planner_approx::default_alpha(&lm))?.lp
            };
            run.build = t0.elapsed().as_secs_f64();
            run.lp_variables = lp.num_vars();
            run.lp_constraints = lp.num_constraints();
            if Instant::now() >= deadline {
                run.status = Status::Timeout;
                return Ok(run);
            }
            let t1 = Instant::now();
            let r = lp::solve_with(&lp, &opts).and_then(|s| match s.status {
                LpStatus::Optimal => Ok(()),
                other => Err(Error::LpStatus(other)),
            });
            run.solve = t1.elapsed().as_secs_f64();
            solved(&mut run, r)?;
        }
        Algorithm::GroundVi | Algorithm::GroundAlp => {
            let g = match GroundModel::new(model) {
                Ok(g) => g,
                Err(Error::Guard(_)) => {
                    run.status = Status::OomGuard;
                    return Ok(run);
                }
                Err(e) => return Err(e),
            };
            run.states = g.num_states() as u128;
            run.actions = g.num_actions() as u128;
            run.build = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let r = if algorithm == Algorithm::GroundVi {
                oracle::ground_value_iteration(&g, 1e-8).map(|_| ())
            } else {
                oracle::ground_alp(&g, &vec![1.0; g.basis.len()]).map(|s| {
                    run.lp_variables = s.lp_variables;
                    run.lp_constraints = s.lp_constraints;
                })
            };
            run.solve = t1.elapsed().as_secs_f64();
            solved(&mut run, r)?;
        }
    }
    Ok(run)
}

/// Runs every algorithm over `n_min..=n_max`, writing CSV rows as they
/// finish. A series stops after its first timeout or guard refusal.
pub fn run_bench(cfg: &BenchConfig, out: &mut dyn Write) -> Result<Vec<BenchRecord>> {
    let mut writer = csv::Writer::from_writer(out);
    let mut records = Vec::new();
    let mut stopped = vec![false; cfg.algorithms.len()];
    for n in cfg.n_min..=cfg.n_max {
        let model = family_model(&cfg.family, n)?;
        for (k, &algorithm) in cfg.algorithms.iter().enumerate() {
            if stopped[k] {
                continue;
            }
            let run = run_one(&model, algorithm, cfg.time_limit)?;
            for (phase, seconds) in [(Phase::Build, run.build), (Phase::Solve, run.solve), (Phase::Total, run.build + run.solve)] {
                let rec = BenchRecord {
                    family: cfg.family.clone(),
                    n,
                    algorithm,
                    phase,
                    seconds,
                    states: run.states,
                    actions: run.actions,
                    lp_variables: run.lp_variables,
                    lp_constraints: run.lp_constraints,
                    status: run.status,
                };
                writer.serialize(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
                records.push(rec);
            }
            writer.flush()?;
            stopped[k] = run.status != Status::Ok;
        }
    }
    if records.is_empty() {
        writer.write_record(CSV_HEADER.split(',')).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer.flush()?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::epidemic;

    #[test]
    fn header_and_rows() {
        let cfg = BenchConfig { n_min: 2, n_max: 3, ..Default::default() };
        let mut buf = Vec::new();
        let recs = run_bench(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(recs.len(), 2 * 2 * 3);
        assert!(text.contains("epidemic,3,exact,total,"));
        let lm = LiftedModel::compile(&epidemic(3)).unwrap();
        let exact = recs.iter().find(|r| r.n == 3 && r.algorithm == Algorithm::Exact).unwrap();
        assert_eq!(exact.lp_constraints as u128, exact_constraint_count(&lm));
    }

    #[test]
    fn guard_stops_ground_series() {
        let cfg = BenchConfig { n_min: 3, n_max: 8, algorithms: vec![Algorithm::GroundAlp], ..Default::default() };
        let mut buf = Vec::new();
        let recs = run_bench(&cfg, &mut buf).unwrap();
        assert_eq!(recs.last().unwrap().status, Status::OomGuard);
        assert_eq!(recs.last().unwrap().n, 6);
        assert_eq!(recs.len(), 4 * 3);
    }

    #[test]
    fn unknown_family() {
        assert!(family_model("traffic", 3).is_err());
        assert_eq!("ground-alp".parse::<Algorithm>().unwrap(), Algorithm::GroundAlp);
        assert_eq!(Algorithm::GroundVi.to_string(), "ground-vi");
    }
}
