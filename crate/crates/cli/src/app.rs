use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tandem_core::simnet::MessageKind;

use crate::config::{self, parse_count, size_regimes, Plan};
use crate::montecarlo::{
    run_experiment_on, thread_pool, Experiment, ExperimentReport, ProfileSpec, Scheme,
};
use crate::report;
use crate::tasks::{BoundsTask, ConverseTask, FrontsTask, LppTask, ThresholdTask};

#[derive(Debug, Parser)]
#[command(
    name = "tandem-iv",
    version,
    about = "Information velocity experiments on tandem erasure lines"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo runs; writes results.csv and summary.txt
    Simulate(SimulateArgs),
    /// Achievability bounds; writes bounds.csv
    Bounds(BoundsArgs),
    /// Converse g table with Fano floors; writes converse.csv
    Converse(ConverseArgs),
    /// g at the decode slot of each velocity; writes threshold_scan.csv
    ThresholdScan(ScanArgs),
    /// Last-passage delays; writes lpp_trials.csv and lpp_summary.csv
    Lpp(LppArgs),
    /// Joins results with bounds; writes compare.csv
    Compare(CompareArgs),
    /// Coupled wave-front traces; writes fronts.csv
    Fronts(FrontsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Ftlr,
    Bitsep,
    Gsi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MessageArg {
    Uniform,
    Alternating,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum XArg {
    K,
    M,
    C,
    DeltaSep,
}

fn count_arg(s: &str) -> Result<u64, String> {
    parse_count(s)
}

fn size_arg(s: &str) -> Result<usize, String> {
    parse_count(s).map(|x| x as usize)
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    /// Erasure probability of every hop
    #[arg(long, conflicts_with = "eps_list")]
    pub eps: Option<f64>,
    /// Erasure pattern repeated along the line, e.g. 0.2,0.4
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
}

impl ProfileArgs {
    fn spec(&self) -> Result<Option<ProfileSpec>> {
        Ok(match (&self.eps, &self.eps_list) {
            (Some(e), None) => Some(ProfileSpec::Homogeneous(*e)),
            (None, Some(p)) => Some(ProfileSpec::Periodic(p.clone())),
            (None, None) => None,
            _ => bail!("give only one of --eps and --eps-list"),
        })
    }

    fn require(&self) -> Result<ProfileSpec> {
        self.spec()?
            .context("an erasure profile is required (--eps or --eps-list)")
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML config; runs every block it contains
    #[arg(long, conflicts_with_all = ["scheme", "eps", "eps_list", "k", "m", "rho", "alpha", "c", "delta_sep", "trials", "message", "deadline"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Line lengths, e.g. 1e3,1e4
    #[arg(long, value_delimiter = ',', value_parser = size_arg)]
    pub k: Vec<usize>,
    /// Constant message sizes
    #[arg(long, value_delimiter = ',', value_parser = size_arg, conflicts_with_all = ["rho", "alpha"])]
    pub m: Vec<usize>,
    /// Polynomial sizes m = round(k^rho)
    #[arg(long, value_delimiter = ',', conflicts_with = "alpha")]
    pub rho: Vec<f64>,
    /// Linear sizes m = round(alpha k)
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub c: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub delta_sep: Vec<f64>,
    #[arg(long, value_parser = count_arg)]
    pub trials: Option<u64>,
    /// Master seed [default: 0, or the config's master_seed]
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub message: Option<MessageArg>,
    /// GSI deadline in slots
    #[arg(long)]
    pub deadline: Option<u64>,
    /// Output directory [default: the config's out_dir, or "out"]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit with status 2 if any verdict fails
    #[arg(long)]
    pub tripwire: bool,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, required = true, value_delimiter = ',', value_parser = size_arg)]
    pub k: Vec<usize>,
    #[arg(long, required = true, value_delimiter = ',', value_parser = size_arg)]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub c: Vec<f64>,
    #[arg(long, required = true, value_delimiter = ',')]
    pub delta_sep: Vec<f64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConverseArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub i_max: usize,
    #[arg(long)]
    pub n_max: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, required = true, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Scan nodes, e.g. 25,50,100
    #[arg(long, required = true, value_delimiter = ',', value_parser = size_arg)]
    pub i: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LppArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long, required = true, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, required = true, value_delimiter = ',', value_parser = size_arg)]
    pub k: Vec<usize>,
    #[arg(long, value_parser = count_arg, default_value = "100")]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "k")]
    pub x: XArg,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FrontsArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_parser = size_arg)]
    pub k: usize,
    #[arg(long, value_parser = size_arg, default_value = "2")]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.25)]
    pub delta_sep: f64,
    #[arg(long, value_parser = count_arg, default_value = "1")]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn out_dir(path: &Path) -> Result<&Path> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path)
}

fn inline_experiment(a: &SimulateArgs) -> Result<Experiment> {
    let scheme = match a.scheme.context("--scheme is required without --config")? {
        SchemeArg::Ftlr => Scheme::Ftlr,
        SchemeArg::Bitsep => Scheme::Bitsep,
        SchemeArg::Gsi => Scheme::Gsi,
    };
    if a.k.is_empty() {
        bail!("--k is required without --config");
    }
    let mut exp = Experiment::new(scheme, a.profile.require()?, a.k.clone());
    let some = |v: &Vec<f64>| (!v.is_empty()).then(|| v.clone());
    exp.sizes = size_regimes(
        (!a.m.is_empty()).then(|| a.m.clone()),
        some(&a.rho),
        some(&a.alpha),
    )
    .map_err(anyhow::Error::msg)?;
    if !a.c.is_empty() {
        exp.c = a.c.clone();
    }
    exp.delta_sep = a.delta_sep.clone();
    if let Some(t) = a.trials {
        exp.trials = t;
    }
    exp.master_seed = a.seed.unwrap_or(0);
    exp.message = match a.message {
        Some(MessageArg::Alternating) => MessageKind::Alternating,
        _ => MessageKind::Uniform,
    };
    exp.deadline = a.deadline;
    Ok(exp)
}

fn simulate(a: &SimulateArgs) -> Result<ExitCode> {
    let plan = match &a.config {
        Some(path) => {
            let mut cfg = config::load(path)?;
            if let Some(seed) = a.seed {
                cfg.master_seed = seed;
            }
            cfg.plan()?
        }
        None => Plan {
            out_dir: None,
            experiments: vec![inline_experiment(a)?],
            bounds: Vec::new(),
            converse: Vec::new(),
            scans: Vec::new(),
            lpp: Vec::new(),
        },
    };
    let dir = a
        .out
        .clone()
        .or(plan.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = out_dir(&dir)?;
    let pool = thread_pool()?;

    let mut reports: Vec<ExperimentReport> = Vec::new();
    for exp in &plan.experiments {
        reports.push(run_experiment_on(exp, &pool)?);
    }
    for w in reports.iter().flat_map(|r| &r.warnings) {
        eprintln!("warning: {w}");
    }
    let rows: Vec<_> = reports
        .iter()
        .flat_map(|r| r.rows.iter().cloned())
        .collect();
    report::write_results(&dir.join("results.csv"), &rows)?;
    report::write_summary(&dir.join("summary.txt"), &reports)?;

    if !plan.bounds.is_empty() {
        let mut b = Vec::new();
        for task in &plan.bounds {
            b.extend(task.run()?);
        }
        report::write_bounds(&dir.join("bounds.csv"), &b)?;
    }
    if !plan.converse.is_empty() {
        let mut c = Vec::new();
        for task in &plan.converse {
            c.extend(task.run()?);
        }
        report::write_converse(&dir.join("converse.csv"), &c)?;
    }
    if !plan.scans.is_empty() {
        let mut s = Vec::new();
        for task in &plan.scans {
            s.extend(task.run()?);
        }
        report::write_scan(&dir.join("threshold_scan.csv"), &s)?;
    }
    if !plan.lpp.is_empty() {
        let (mut t, mut s) = (Vec::new(), Vec::new());
        for task in &plan.lpp {
            let (a, b) = task.run(&pool)?;
            t.extend(a);
            s.extend(b);
        }
        report::write_lpp(dir, &t, &s)?;
    }

    print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
    let failures: usize = reports.iter().map(ExperimentReport::failures).sum();
    if a.tripwire && failures > 0 {
        eprintln!("tripwire: {failures} verdict failures");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate(a) => return simulate(&a),
        Command::Bounds(a) => {
            let task = BoundsTask {
                profile: a.profile.require()?,
                k: a.k,
                m: a.m,
                c: a.c,
                delta_sep: a.delta_sep,
            };
            let rows = task.run()?;
            for r in rows.iter().filter(|r| r.j == 0) {
                println!(
                    "k={} m={} eps={} c={} delta_sep={}: success_lb {}{}",
                    r.k,
                    r.m,
                    r.eps_spec,
                    r.c,
                    r.delta_sep,
                    r.success_lb,
                    if r.vacuous { " (vacuous)" } else { "" }
                );
            }
            report::write_bounds(&out_dir(&a.out)?.join("bounds.csv"), &rows)?;
        }
        Command::Converse(a) => {
            let task = ConverseTask {
                profile: a.profile.require()?,
                i_max: a.i_max,
                n_max: a.n_max,
            };
            let rows = task.run()?;
            println!(
                "{} entries, identity holds to {:e}",
                rows.len(),
                crate::tasks::IDENTITY_TOLERANCE
            );
            report::write_converse(&out_dir(&a.out)?.join("converse.csv"), &rows)?;
        }
        Command::ThresholdScan(a) => {
            let task = ThresholdTask {
                profile: a.profile.require()?,
                alpha: a.alpha,
                i: a.i,
            };
            let rows = task.run()?;
            report::write_scan(&out_dir(&a.out)?.join("threshold_scan.csv"), &rows)?;
        }
        Command::Lpp(a) => {
            let task = LppTask {
                eps: a.eps,
                k: a.k,
                alpha: a.alpha,
                trials: a.trials,
                seed: a.seed,
            };
            let (trials, summary) = task.run(&thread_pool()?)?;
            for s in &summary {
                println!(
                    "k={} alpha={} eps={}: mean delay per hop {} (prediction {})",
                    s.k, s.alpha, s.eps, s.mean_delay_per_hop, s.prediction
                );
            }
            report::write_lpp(out_dir(&a.out)?, &trials, &summary)?;
        }
        Command::Compare(a) => {
            let x = match a.x {
                XArg::K => report::XVar::K,
                XArg::M => report::XVar::M,
                XArg::C => report::XVar::C,
                XArg::DeltaSep => report::XVar::DeltaSep,
            };
            let rows = report::compare(&a.results, a.bounds.as_deref(), x)?;
            report::write_compare(&out_dir(&a.out)?.join("compare.csv"), &rows)?;
        }
        Command::Fronts(a) => {
            let task = FrontsTask {
                profile: a.profile.require()?,
                k: a.k,
                m: a.m,
                c: a.c,
                delta_sep: a.delta_sep,
                trials: a.trials,
                seed: a.seed,
            };
            let rows = task.run(&thread_pool()?)?;
            report::write_fronts(&out_dir(&a.out)?.join("fronts.csv"), &rows)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Entry point: 0 on success, 1 on any error, 2 on a tripwire failure.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are config errors; help and version are not errors
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
