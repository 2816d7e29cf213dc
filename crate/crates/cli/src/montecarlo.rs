//! Experiment grids, parallel trial fan-out and estimator aggregation.
//!
//! Trial `t` at grid point `p` draws everything from
//! `RandomnessSpec::new(point_seed(master_seed, p), t)`, trials are collected
//! in index order and reduced sequentially, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use tandem_core::bounds::{success_bound_het, success_bound_hom};
use tandem_core::converse::geometric_sum_cdf;
use tandem_core::lpp::linear_regime_prediction;
use tandem_core::model::{generate_states, MAX_SLOT};
use tandem_core::simnet::{
    default_gsi_deadline, ftlr_deadline, message_bits, run_bit_separation_blocks,
    run_ftlr_single_bit, run_gsi_control, GsiOptions, MessageKind, RecordOptions,
};
use tandem_core::{ErasureProfile, RandomnessSpec, Schedule};
use thiserror::Error;

/// Environment variable that fixes the worker-thread count.
pub const THREADS_ENV: &str = "TANDEM_IV_THREADS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] tandem_core::Error),
    #[error("incompatible experiment: {0}")]
    Incompatible(String),
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("invalid {0}: {1}")]
    Invalid(&'static str, String),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Ftlr,
    Bitsep,
    Gsi,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ftlr => "ftlr",
            Scheme::Bitsep => "bitsep",
            Scheme::Gsi => "gsi",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Homogeneous(f64),
    /// Repeated along the line.
    Periodic(Vec<f64>),
    /// One entry per hop; fixes `k`.
    Explicit(Vec<f64>),
}

impl ProfileSpec {
    pub fn build(&self, k: usize) -> Result<ErasureProfile> {
        Ok(match self {
            ProfileSpec::Homogeneous(e) => ErasureProfile::homogeneous(k, *e)?,
            ProfileSpec::Periodic(p) => ErasureProfile::periodic(k, p)?,
            ProfileSpec::Explicit(e) => {
                if e.len() != k {
                    return Err(ExperimentError::Invalid(
                        "k",
                        format!("explicit profile has {} hops, grid asks for {k}", e.len()),
                    ));
                }
                ErasureProfile::explicit(e.clone())?
            }
        })
    }

    pub fn fixed_k(&self) -> Option<usize> {
        match self {
            ProfileSpec::Explicit(e) => Some(e.len()),
            _ => None,
        }
    }

    /// Value of the `eps_spec` CSV column.
    pub fn label(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        match self {
            ProfileSpec::Homogeneous(e) => e.to_string(),
            ProfileSpec::Periodic(p) => format!("periodic:{}", join(p)),
            ProfileSpec::Explicit(e) => format!("explicit:{}", join(e)),
        }
    }
}

/// How the message size scales with `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeRegime {
    Const(usize),
    /// `m = round(k^rho)`.
    Poly(f64),
    /// `m = round(alpha k)`.
    Linear(f64),
}

/// Message size for `k` hops, at least 1.
pub fn regime_schedule(k: usize, regime: SizeRegime) -> Result<usize> {
    let m = match regime {
        SizeRegime::Const(m) => m,
        SizeRegime::Poly(rho) => {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(ExperimentError::Invalid(
                    "rho",
                    format!("{rho} must be positive"),
                ));
            }
            (k as f64).powf(rho).round() as usize
        }
        SizeRegime::Linear(alpha) => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(ExperimentError::Invalid(
                    "alpha",
                    format!("{alpha} must be positive"),
                ));
            }
            (alpha * k as f64).round() as usize
        }
    };
    if m == 0 {
        return Err(ExperimentError::Invalid(
            "m",
            format!("message size rounds to 0 at k = {k}"),
        ));
    }
    Ok(m)
}

/// `delta_sep` used when the grid does not give one.
pub fn default_delta_sep(scheme: Scheme, regime: SizeRegime) -> f64 {
    match (scheme, regime) {
        (_, SizeRegime::Poly(rho)) if rho < 0.5 => (0.5 - rho) / 2.0,
        (Scheme::Ftlr, _) => 0.2,
        _ => 0.25,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub scheme: Scheme,
    pub profile: ProfileSpec,
    pub k: Vec<usize>,
    pub sizes: Vec<SizeRegime>,
    pub c: Vec<f64>,
    /// Empty means "default per point".
    pub delta_sep: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    /// Index of the first grid point; keeps seeds distinct across blocks
    /// sharing a master seed.
    pub first_point: u64,
    pub message: MessageKind,
    /// GSI deadline; the linear-regime default applies when `None`.
    pub deadline: Option<u64>,
}

impl Experiment {
    pub fn new(scheme: Scheme, profile: ProfileSpec, k: Vec<usize>) -> Self {
        Self {
            scheme,
            profile,
            k,
            sizes: vec![SizeRegime::Const(1)],
            c: vec![1.0],
            delta_sep: Vec::new(),
            trials: 100,
            master_seed: 0,
            first_point: 0,
            message: MessageKind::Uniform,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: u64,
    pub k: usize,
    pub m: usize,
    /// `None` for GSI, which has no spacing parameters.
    pub c: Option<f64>,
    pub delta_sep: Option<f64>,
}

/// Checks the experiment and lists its grid points. Returns warnings for
/// combinations that run but fall outside the proven regime.
pub fn plan(exp: &Experiment) -> Result<(Vec<GridPoint>, Vec<String>)> {
    let mut warnings = Vec::new();
    if exp.k.is_empty() {
        return Err(ExperimentError::EmptyGrid("k"));
    }
    if exp.sizes.is_empty() {
        return Err(ExperimentError::EmptyGrid("message size"));
    }
    if exp.trials == 0 {
        return Err(ExperimentError::Invalid(
            "trials",
            "must be at least 1".into(),
        ));
    }
    if exp.scheme != Scheme::Gsi && exp.c.is_empty() {
        return Err(ExperimentError::EmptyGrid("c"));
    }
    if let Some(k) = exp.profile.fixed_k() {
        if let Some(bad) = exp.k.iter().find(|&&x| x != k) {
            return Err(ExperimentError::Invalid(
                "k",
                format!("explicit profile has {k} hops, grid asks for {bad}"),
            ));
        }
    }
    for &size in &exp.sizes {
        match (exp.scheme, size) {
            (Scheme::Ftlr, SizeRegime::Const(1)) => {}
            (Scheme::Ftlr, _) => {
                return Err(ExperimentError::Incompatible(
                    "ftlr carries a single bit; use m = 1".into(),
                ))
            }
            (Scheme::Bitsep, SizeRegime::Poly(rho)) if rho >= 0.5 => warnings.push(format!(
                "rho = {rho} >= 1/2 is outside the bit-separation achievability range"
            )),
            (Scheme::Bitsep, SizeRegime::Linear(alpha)) => warnings.push(format!(
                "linear message size (alpha = {alpha}) is outside the bit-separation achievability range"
            )),
            _ => {}
        }
    }
    if exp.scheme == Scheme::Gsi && !matches!(exp.profile, ProfileSpec::Homogeneous(_)) {
        warnings.push(
            "gsi over a heterogeneous profile: outside the linear-regime prediction, no analytic column"
                .into(),
        );
    }

    let mut points = Vec::new();
    for &k in &exp.k {
        if k == 0 {
            return Err(ExperimentError::Invalid("k", "must be at least 1".into()));
        }
        for &size in &exp.sizes {
            let m = regime_schedule(k, size)?;
            if exp.scheme == Scheme::Gsi {
                let index = exp.first_point + points.len() as u64;
                points.push(GridPoint {
                    index,
                    k,
                    m,
                    c: None,
                    delta_sep: None,
                });
                continue;
            }
            let deltas = if exp.delta_sep.is_empty() {
                vec![default_delta_sep(exp.scheme, size)]
            } else {
                exp.delta_sep.clone()
            };
            for &c in &exp.c {
                for &d in &deltas {
                    points.push(GridPoint {
                        index: exp.first_point + points.len() as u64,
                        k,
                        m,
                        c: Some(c),
                        delta_sep: Some(d),
                    });
                }
            }
        }
    }
    Ok((points, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
        }
    }
}

/// What the `analytic` column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticKind {
    /// Exact success probability (FTLR).
    Exact,
    /// Lower bound on the success probability (bit separation).
    SuccessLowerBound,
    /// Predicted mean completion slot (GSI, homogeneous).
    Prediction,
    None,
}

impl AnalyticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalyticKind::Exact => "exact",
            AnalyticKind::SuccessLowerBound => "success_lb",
            AnalyticKind::Prediction => "prediction",
            AnalyticKind::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub scheme: Scheme,
    pub point: GridPoint,
    pub eps_spec: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical: f64,
    pub empirical_se: f64,
    pub analytic: Option<f64>,
    pub analytic_kind: AnalyticKind,
    pub verdict: Verdict,
    /// Bit separation: frequency of the wave-front success event.
    pub event_rate: Option<f64>,
    /// FTLR: arrival slot; bit separation: first arrival of the last bit;
    /// GSI: completion slot. Over trials where it happened.
    pub mean_delay: Option<f64>,
    pub delay_se: Option<f64>,
    pub p50: Option<u64>,
    pub p90: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<EstimateRow>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Fail)
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    success: bool,
    event: Option<bool>,
    delay: Option<u64>,
}

/// Thread pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| ExperimentError::Invalid("thread count", format!("{THREADS_ENV}={v}")))?;
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

/// Runs `f(0..trials)` on the pool and returns the results in trial order.
pub fn fan_out<T, F>(pool: &rayon::ThreadPool, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    pool.install(|| (0..trials).into_par_iter().map(&f).collect())
}

struct PointPlan {
    profile: ErasureProfile,
    ftlr_tau: u64,
    schedule: Option<Schedule>,
    gsi_deadline: u64,
}

fn prepare_point(exp: &Experiment, pt: &GridPoint) -> Result<PointPlan> {
    let profile = exp.profile.build(pt.k)?;
    let (c, d) = (pt.c.unwrap_or(1.0), pt.delta_sep.unwrap_or(0.25));
    let ftlr_tau = match exp.scheme {
        Scheme::Ftlr => ftlr_deadline(&profile, c, d),
        _ => 0,
    };
    let schedule = match exp.scheme {
        Scheme::Bitsep => Some(Schedule::new(&profile, pt.m, c, d)?),
        _ => None,
    };
    let gsi_deadline = exp
        .deadline
        .unwrap_or_else(|| default_gsi_deadline(pt.k, pt.m, 1.0 - profile.v_min()));
    Ok(PointPlan {
        profile,
        ftlr_tau,
        schedule,
        gsi_deadline,
    })
}

fn run_trial(
    exp: &Experiment,
    pt: &GridPoint,
    plan: &PointPlan,
    trial: u64,
) -> Result<TrialOutcome> {
    let point_seed = RandomnessSpec::point_seed(exp.master_seed, pt.index);
    let spec = RandomnessSpec::new(point_seed, trial);
    let mut rng = spec.rng();
    let bits = message_bits(exp.message, pt.m, &mut rng);
    let p = &plan.profile;
    Ok(match exp.scheme {
        Scheme::Ftlr => {
            let states = generate_states(p, MAX_SLOT, &spec)?;
            let out = run_ftlr_single_bit(p, bits[0], plan.ftlr_tau, &states)?;
            TrialOutcome {
                success: out.correct,
                event: None,
                delay: out.arrival_time,
            }
        }
        Scheme::Bitsep => {
            let s = plan.schedule.as_ref().expect("bitsep plan has a schedule");
            let states = generate_states(p, s.horizon(), &spec)?;
            let rec = run_bit_separation_blocks(p, &bits, s, &states, RecordOptions::default())?;
            TrialOutcome {
                success: rec.all_correct(),
                event: Some(rec.success_event_held()),
                delay: rec.delivery_time[pt.m - 1],
            }
        }
        Scheme::Gsi => {
            let states = generate_states(p, plan.gsi_deadline.max(1), &spec)?;
            let opts = GsiOptions {
                deadline: Some(plan.gsi_deadline),
                ..Default::default()
            };
            let rec = run_gsi_control(p, &bits, &states, opts)?;
            TrialOutcome {
                success: rec.deadline_met == Some(true),
                event: None,
                delay: rec.completion_time,
            }
        }
    })
}

fn analytic(
    exp: &Experiment,
    pt: &GridPoint,
    plan: &PointPlan,
) -> Result<(Option<f64>, AnalyticKind)> {
    let p = &plan.profile;
    Ok(match exp.scheme {
        Scheme::Ftlr => {
            let arrive = geometric_sum_cdf(p, pt.k, plan.ftlr_tau + 1)?;
            let success = match exp.message {
                MessageKind::Alternating => arrive,
                // a 0 is decoded correctly even if nothing arrived
                MessageKind::Uniform => arrive + 0.5 * (1.0 - arrive),
            };
            (Some(success), AnalyticKind::Exact)
        }
        Scheme::Bitsep => {
            let s = plan.schedule.as_ref().expect("bitsep plan has a schedule");
            let report = if p.is_homogeneous() {
                success_bound_hom(pt.k, pt.m, p.eps_at(0), s.c(), s.delta_sep())?
            } else {
                success_bound_het(p, s, pt.m)?
            };
            (
                Some(report.success_lower_bound),
                AnalyticKind::SuccessLowerBound,
            )
        }
        Scheme::Gsi => {
            if p.is_homogeneous() {
                let alpha = pt.m as f64 / pt.k as f64;
                let pred = linear_regime_prediction(p.eps_at(0), alpha)?;
                (
                    Some(pred.delay_per_hop * pt.k as f64),
                    AnalyticKind::Prediction,
                )
            } else {
                (None, AnalyticKind::None)
            }
        }
    })
}

fn verdict(kind: AnalyticKind, analytic: Option<f64>, empirical: f64, se: f64, n: u64) -> Verdict {
    match (kind, analytic) {
        (AnalyticKind::SuccessLowerBound, Some(b)) => {
            if empirical >= b - 3.0 * se {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        (AnalyticKind::Exact, Some(p)) => {
            let exact_se = (p * (1.0 - p) / n as f64).sqrt();
            if (empirical - p).abs() <= 3.0 * exact_se + 1e-12 {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        _ => Verdict::NotApplicable,
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[u64], q: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

fn aggregate(
    exp: &Experiment,
    pt: &GridPoint,
    outcomes: &[TrialOutcome],
    analytic: (Option<f64>, AnalyticKind),
) -> EstimateRow {
    let n = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let empirical = successes as f64 / n as f64;
    let empirical_se = (empirical * (1.0 - empirical) / n as f64).sqrt();
    let event_rate = (exp.scheme == Scheme::Bitsep)
        .then(|| outcomes.iter().filter(|o| o.event == Some(true)).count() as f64 / n as f64);
    let mut delays: Vec<u64> = outcomes.iter().filter_map(|o| o.delay).collect();
    delays.sort_unstable();
    let (mean_delay, delay_se) = if delays.is_empty() {
        (None, None)
    } else {
        let c = delays.len() as f64;
        let mean = delays.iter().map(|&d| d as f64).sum::<f64>() / c;
        let se = if delays.len() > 1 {
            let var = delays
                .iter()
                .map(|&d| (d as f64 - mean).powi(2))
                .sum::<f64>()
                / (c - 1.0);
            Some((var / c).sqrt())
        } else {
            None
        };
        (Some(mean), se)
    };
    EstimateRow {
        scheme: exp.scheme,
        point: pt.clone(),
        eps_spec: exp.profile.label(),
        trials: n,
        successes,
        empirical,
        empirical_se,
        analytic: analytic.0,
        analytic_kind: analytic.1,
        verdict: verdict(analytic.1, analytic.0, empirical, empirical_se, n),
        event_rate,
        mean_delay,
        delay_se,
        p50: percentile(&delays, 0.5),
        p90: percentile(&delays, 0.9),
    }
}

pub fn run_experiment(exp: &Experiment) -> Result<ExperimentReport> {
    let pool = thread_pool()?;
    run_experiment_on(exp, &pool)
}

pub fn run_experiment_on(exp: &Experiment, pool: &rayon::ThreadPool) -> Result<ExperimentReport> {
    let (points, warnings) = plan(exp)?;
    let mut rows = Vec::with_capacity(points.len());
    for pt in &points {
        let plan = prepare_point(exp, pt)?;
        let outcomes = fan_out(pool, exp.trials, |t| run_trial(exp, pt, &plan, t))?;
        rows.push(aggregate(exp, pt, &outcomes, analytic(exp, pt, &plan)?));
    }
    Ok(ExperimentReport { rows, warnings })
}
