//! Command-line front end. `run` takes argv and two writers so it can be
//! driven from tests; exit codes are 0 on success, 1 on a domain error and
//! 2 on a usage error.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::bench::{self, Algorithm, BenchConfig};
use crate::error::{Error, Result};
use crate::lifted::LiftedModel;
use crate::model::{parse_model, RfMdpModel};
use crate::oracle::{self, GroundModel};
use crate::planner_approx::{default_alpha, plan_approx};
use crate::planner_exact::{plan_exact, Alpha};
use crate::queries::{conditional_action_query, parse_threshold_str, Plan, RestrictionPredicate};
use crate::service::{self, Service};

#[derive(Debug, Parser)]
#[command(name = "rfmdp", version, about = "Lifted planning for relational factored MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Where the model comes from: a JSON document or a built-in family.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model document (JSON).
    #[arg(long, value_name = "M", conflicts_with = "family")]
    pub model: Option<PathBuf>,
    /// Built-in model family.
    #[arg(long, value_parser = ["epidemic"], requires = "n")]
    pub family: Option<String>,
    /// Population size for --family.
    #[arg(long)]
    pub n: Option<u64>,
}

impl ModelArgs {
    fn present(&self) -> bool {
        self.model.is_some() || self.family.is_some()
    }

    pub fn load(&self) -> Result<RfMdpModel> {
        match (&self.model, &self.family, self.n) {
            (Some(path), _, _) => parse_model(&read(path)?),
            (None, Some(f), Some(n)) => bench::family_model(f, n),
            _ => Err(Error::Precondition("give --model M or --family F --n N".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the relational cost graph cliques and width bounds.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the model document.
    Model {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Solve for a value function or basis weights.
    Plan {
        #[command(subcommand)]
        which: PlanCommand,
    },
    /// Actions meeting a reward threshold and a restriction probability.
    Query {
        #[command(flatten)]
        model: ModelArgs,
        /// V.json or W.json from `plan`.
        #[arg(long, value_name = "P")]
        plan: PathBuf,
        /// State document, or inline JSON.
        #[arg(long, value_name = "S")]
        state: String,
        /// Threshold t on Q; a number or -inf.
        #[arg(long, default_value = "-inf", allow_hyphen_values = true, value_name = "T")]
        min_reward: String,
        /// Restriction predicate, e.g. "count(Sick,false) >= half".
        #[arg(long, default_value = "true", value_name = "PRED")]
        restrict: String,
        /// Threshold p on the restriction probability.
        #[arg(long, default_value_t = 0.0, value_name = "p")]
        min_prob: f64,
        /// Required plan kind; defaults to the kind of --plan.
        #[arg(long, value_parser = ["exact", "approx"])]
        mode: Option<String>,
    },
    /// Compare against the ground model.
    Check {
        #[command(subcommand)]
        which: CheckCommand,
    },
    /// Time the planners over a range of n and write CSV.
    Bench {
        #[arg(long, default_value = "epidemic", value_parser = ["epidemic"])]
        family: String,
        #[arg(long, default_value_t = 2)]
        n_min: u64,
        #[arg(long, default_value_t = 10)]
        n_max: u64,
        /// Comma list of exact, approx, ground-vi, ground-alp.
        #[arg(long, default_value = "exact,approx", value_delimiter = ',')]
        algorithms: Vec<String>,
        /// Seconds per run.
        #[arg(long, default_value_t = 600.0)]
        time_limit: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the HTTP session service.
    Serve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum PlanCommand {
    /// Exact LP over the lifted state space (V.json).
    Exact {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// `uniform` or a comma list with one weight per lifted state.
        #[arg(long, default_value = "uniform")]
        alpha: String,
    },
    /// Approximate LP over the basis functions (W.json).
    Approx {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Basis set; `default` is the one in the model document.
        #[arg(long, default_value = "default", value_parser = ["default"])]
        basis: String,
        /// Comma list with one state-relevance weight per basis function;
        /// defaults to the grounding counts.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Lifted results against brute force on the ground model.
    Ground {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// JSON description of the cost graph analysis.
pub fn analyze_json(model: &RfMdpModel) -> Result<Value> {
    let lm = LiftedModel::compile(model)?;
    let r = &lm.report;
    Ok(json!({
        "c": r.c,
        "w": r.w,
        "cliques": r.clique_names(&lm.graph),
        "induced_width": r.greedy_induced_width,
        "edges": lm.graph.edge_names(),
        "histograms": lm.hists.iter().map(|h| json!({
            "name": h.name,
            "n": h.n,
            "buckets": (0..h.buckets).map(|b| h.bucket_label(b)).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "propositional": lm.props.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        "lifted_states": lm.num_states().to_string(),
        "exact_constraints": crate::planner_exact::exact_constraint_count(&lm).to_string(),
    }))
}

fn parse_alpha(text: &str) -> Result<Alpha> {
    if text == "uniform" {
        return Ok(Alpha::Uniform);
    }
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Precondition(format!("bad alpha entry {x:?}"))))
        .collect::<Result<Vec<_>>>()
        .map(Alpha::PerState)
}

fn state_arg(lm: &LiftedModel, arg: &str) -> Result<crate::CountingState> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read(Path::new(arg))? };
    lm.state_from_json(&serde_json::from_str(&text)?)
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Analyze { model } => {
            out.write_all(pretty(&analyze_json(&model.load()?)?).as_bytes())?;
        }
        Command::Model { model, out: path } => {
            let m = model.load()?;
            emit(out, path.as_deref(), &(m.to_json() + "\n"))?;
        }
        Command::Plan { which: PlanCommand::Exact { model, out: path, alpha } } => {
            let lm = LiftedModel::compile(&model.load()?)?;
            let vf = plan_exact(&lm, &parse_alpha(&alpha)?)?;
            emit(out, path.as_deref(), &pretty(&vf.to_json(&lm)))?;
        }
        Command::Plan { which: PlanCommand::Approx { model, out: path, basis: _, alpha } } => {
            let lm = LiftedModel::compile(&model.load()?)?;
            let alpha = alpha.unwrap_or_else(|| default_alpha(&lm));
            let w = plan_approx(&lm, &alpha)?;
            emit(out, path.as_deref(), &pretty(&w.to_json()))?;
        }
        Command::Query { model, plan, state, min_reward, restrict, min_prob, mode } => {
            let lm = LiftedModel::compile(&model.load()?)?;
            let plan = Plan::from_json(&lm, &serde_json::from_str(&read(&plan)?)?)?;
            if let Some(m) = mode {
                if m != plan.mode() {
                    return Err(Error::Precondition(format!("--mode {m} but the plan is {}", plan.mode())));
                }
            }
            let s = state_arg(&lm, &state)?;
            let pred = RestrictionPredicate::parse(&lm, &restrict)?;
            let t = parse_threshold_str(&min_reward)?;
            let result = conditional_action_query(&lm, &plan, &s, t, &pred, min_prob)?;
            out.write_all(pretty(&result.to_json(&lm)).as_bytes())?;
        }
        Command::Check { which: CheckCommand::Ground { model, tol } } => {
            let m = model.load()?;
            let g = GroundModel::new(&m)?;
            let lm = LiftedModel::compile(&m)?;
            let report = oracle::check_equivalence(&lm, &g)?;
            let passed = report.max_value_error <= tol
                && report.max_transition_error <= tol
                && report.max_weight_error <= tol
                && report.policy_mismatches == 0
                && report.query_mismatches == 0;
            let mut v = serde_json::to_value(&report)?;
            v["tolerance"] = json!(tol);
            v["passed"] = json!(passed);
            out.write_all(pretty(&v).as_bytes())?;
            return Ok(if passed { 0 } else { 1 });
        }
        Command::Bench { family, n_min, n_max, algorithms, time_limit, out: path } => {
            if !(time_limit > 0.0) {
                return Err(Error::Precondition("--time-limit must be positive".into()));
            }
            let cfg = BenchConfig {
                family,
                n_min,
                n_max,
                algorithms: algorithms.iter().map(|a| a.trim().parse()).collect::<Result<Vec<Algorithm>>>()?,
                time_limit: Duration::from_secs_f64(time_limit),
            };
            match path {
                Some(p) => {
                    let mut f = fs::File::create(&p)?;
                    bench::run_bench(&cfg, &mut f)?;
                }
                None => {
                    bench::run_bench(&cfg, out)?;
                }
            }
        }
        Command::Serve { model, port, host } => {
            let default = if model.present() { Some(model.load()?) } else { None };
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|_| Error::Precondition(format!("bad address {host}:{port}")))?;
            let svc = Arc::new(Service::new(default));
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                writeln!(out, "listening on http://{}", listener.local_addr()?)?;
                out.flush()?;
                service::serve(svc, listener).await
            })?;
        }
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
