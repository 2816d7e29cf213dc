//! Bound tables, converse tables, LPP runs and front traces.

use tandem_core::bounds::{success_bound_het, success_bound_hom};
use tandem_core::converse::{
    g_table, geometric_sum_distribution, inverse_binary_entropy, velocity_threshold_scan,
};
use tandem_core::lpp::{geometric_weights, linear_regime_prediction, lpp_last_passage};
use tandem_core::model::generate_states;
use tandem_core::wavefront::simulate_fronts_coupled;
use tandem_core::{RandomnessSpec, Schedule};

use crate::montecarlo::{
    fan_out, regime_schedule, ExperimentError, ProfileSpec, Result, SizeRegime,
};

/// Largest tolerated gap between the g table and the convolution.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTask {
    pub profile: ProfileSpec,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub c: Vec<f64>,
    pub delta_sep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub k: usize,
    pub m: usize,
    pub eps_spec: String,
    pub c: f64,
    pub delta_sep: f64,
    pub j: usize,
    pub log_escape: f64,
    pub success_lb: f64,
    pub vacuous: bool,
}

fn nonempty<T>(v: &[T], name: &str) -> Result<(), String> {
    if v.is_empty() {
        Err(format!("`{name}` is empty"))
    } else {
        Ok(())
    }
}

fn check_k(profile: &ProfileSpec, k: &[usize]) -> Result<(), String> {
    nonempty(k, "k")?;
    for &x in k {
        if x == 0 {
            return Err("`k` must be at least 1".into());
        }
        if let Some(fixed) = profile.fixed_k() {
            if x != fixed {
                return Err(format!("explicit profile has {fixed} hops, `k` = {x}"));
            }
        }
    }
    Ok(())
}

impl BoundsTask {
    pub fn validate(&self) -> Result<(), String> {
        check_k(&self.profile, &self.k)?;
        nonempty(&self.m, "m")?;
        nonempty(&self.c, "c")?;
        nonempty(&self.delta_sep, "delta_sep")?;
        if self.m.contains(&0) {
            return Err("`m` must be at least 1".into());
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Vec<BoundRow>> {
        self.validate()
            .map_err(|e| ExperimentError::Invalid("bounds", e))?;
        let eps_spec = self.profile.label();
        let mut rows = Vec::new();
        for &k in &self.k {
            let profile = self.profile.build(k)?;
            for &m in &self.m {
                for &c in &self.c {
                    for &d in &self.delta_sep {
                        let report = if profile.is_homogeneous() {
                            success_bound_hom(k, m, profile.eps_at(0), c, d)?
                        } else {
                            let schedule = Schedule::new(&profile, m, c, d)?;
                            success_bound_het(&profile, &schedule, m)?
                        };
                        for (j, &log_escape) in report.log_escape_bound.iter().enumerate() {
                            rows.push(BoundRow {
                                k,
                                m,
                                eps_spec: eps_spec.clone(),
                                c,
                                delta_sep: d,
                                j,
                                log_escape,
                                success_lb: report.success_lower_bound,
                                vacuous: report.vacuous,
                            });
                        }
                    }
                }
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverseTask {
    pub profile: ProfileSpec,
    pub i_max: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseRow {
    pub i: usize,
    pub n: usize,
    pub g: f64,
    /// `P(S_i < i + n)` from the convolution.
    pub cdf: f64,
    pub error_floor: f64,
}

impl ConverseTask {
    pub fn validate(&self) -> Result<(), String> {
        if self.i_max == 0 {
            return Err("`i_max` must be at least 1".into());
        }
        if let Some(k) = self.profile.fixed_k() {
            if self.i_max > k {
                return Err(format!(
                    "`i_max` = {} exceeds the profile's {k} hops",
                    self.i_max
                ));
            }
        }
        Ok(())
    }

    fn hops(&self) -> usize {
        self.profile.fixed_k().unwrap_or(self.i_max)
    }

    /// Rows for `1 <= i <= i_max`, `0 <= n <= n_max`. Fails if the table and
    /// the convolution disagree anywhere by more than [`IDENTITY_TOLERANCE`].
    pub fn run(&self) -> Result<Vec<ConverseRow>> {
        self.validate()
            .map_err(|e| ExperimentError::Invalid("converse", e))?;
        let profile = self.profile.build(self.hops())?;
        let table = g_table(&profile, self.i_max, self.n_max)?;
        let mut rows = Vec::with_capacity(self.i_max * (self.n_max + 1));
        for i in 1..=self.i_max {
            let law = geometric_sum_distribution(&profile, i, (i + self.n_max) as u64)?;
            for n in 0..=self.n_max {
                let g = table.get(i, n).expect("inside the table");
                let cdf = law.cdf_below((i + n) as u64);
                if (g - cdf).abs() > IDENTITY_TOLERANCE {
                    return Err(ExperimentError::Invalid(
                        "converse",
                        format!("g({i}, {n}) = {g} but the convolution gives {cdf}"),
                    ));
                }
                let error_floor = inverse_binary_entropy((1.0 - g).max(0.0));
                rows.push(ConverseRow {
                    i,
                    n,
                    g,
                    cdf,
                    error_floor,
                });
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTask {
    pub profile: ProfileSpec,
    pub alpha: Vec<f64>,
    pub i: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub alpha: f64,
    pub i: usize,
    pub n: u64,
    pub g: f64,
}

impl ThresholdTask {
    pub fn validate(&self) -> Result<(), String> {
        nonempty(&self.alpha, "alpha")?;
        nonempty(&self.i, "i")?;
        if self.alpha.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err("`alpha` must lie in (0, 1]".into());
        }
        let top = self.i.iter().copied().max().unwrap_or(0);
        if let Some(k) = self.profile.fixed_k() {
            if top > k {
                return Err(format!("scan node {top} exceeds the profile's {k} hops"));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Vec<ScanRow>> {
        self.validate()
            .map_err(|e| ExperimentError::Invalid("threshold-scan", e))?;
        let top = self.i.iter().copied().max().unwrap_or(1).max(1);
        let profile = self.profile.build(self.profile.fixed_k().unwrap_or(top))?;
        let scan = velocity_threshold_scan(&profile, &self.alpha, &self.i)?;
        Ok(scan
            .points
            .iter()
            .map(|p| ScanRow {
                alpha: p.alpha,
                i: p.i,
                n: p.n,
                g: p.g,
            })
            .collect())
    }
}

/// Last-passage times with i.i.d. `Geom(1 - eps)` weights on a `k x round(alpha k)`
/// grid, the law of the GSI-control completion time.
#[derive(Debug, Clone, PartialEq)]
pub struct LppTask {
    pub eps: f64,
    pub k: Vec<usize>,
    pub alpha: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LppTrialRow {
    pub k: usize,
    pub m: usize,
    pub eps: f64,
    pub trial: u64,
    pub g_km: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LppSummaryRow {
    pub k: usize,
    pub alpha: f64,
    pub eps: f64,
    pub trials: u64,
    pub mean_delay_per_hop: f64,
    pub prediction: f64,
}

impl LppTask {
    pub fn validate(&self) -> Result<(), String> {
        check_k(&ProfileSpec::Homogeneous(self.eps), &self.k)?;
        nonempty(&self.alpha, "alpha")?;
        if self.trials == 0 {
            return Err("`trials` must be at least 1".into());
        }
        linear_regime_prediction(self.eps, 1.0).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn run(&self, pool: &rayon::ThreadPool) -> Result<(Vec<LppTrialRow>, Vec<LppSummaryRow>)> {
        self.validate()
            .map_err(|e| ExperimentError::Invalid("lpp", e))?;
        let mut trials = Vec::new();
        let mut summary = Vec::new();
        let mut point = 0u64;
        for &k in &self.k {
            for &alpha in &self.alpha {
                let m = regime_schedule(k, SizeRegime::Linear(alpha))?;
                let prediction = linear_regime_prediction(self.eps, alpha)?.delay_per_hop;
                let seed = RandomnessSpec::point_seed(self.seed, point);
                point += 1;
                let g = fan_out(pool, self.trials, |t| {
                    let mut rng = RandomnessSpec::new(seed, t).rng();
                    let w = geometric_weights(k, m, self.eps, &mut rng)?;
                    Ok(lpp_last_passage(&w)?)
                })?;
                let mean = g.iter().map(|&x| x as f64).sum::<f64>() / g.len() as f64;
                summary.push(LppSummaryRow {
                    k,
                    alpha,
                    eps: self.eps,
                    trials: self.trials,
                    mean_delay_per_hop: mean / k as f64,
                    prediction,
                });
                trials.extend(g.into_iter().enumerate().map(|(t, g_km)| LppTrialRow {
                    k,
                    m,
                    eps: self.eps,
                    trial: t as u64,
                    g_km,
                }));
            }
        }
        Ok((trials, summary))
    }
}

/// Coupled wave-front trajectories of bit separation, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontsTask {
    pub profile: ProfileSpec,
    pub k: usize,
    pub m: usize,
    pub c: f64,
    pub delta_sep: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontRow {
    pub trial: u64,
    pub j: usize,
    pub n: u64,
    pub position: u32,
}

impl FrontsTask {
    pub fn run(&self, pool: &rayon::ThreadPool) -> Result<Vec<FrontRow>> {
        if self.trials == 0 || self.m == 0 {
            return Err(ExperimentError::Invalid(
                "fronts",
                "`trials` and `m` must be at least 1".into(),
            ));
        }
        let profile = self.profile.build(self.k)?;
        let schedule = Schedule::new(&profile, self.m, self.c, self.delta_sep)?;
        let seed = RandomnessSpec::point_seed(self.seed, 0);
        let per_trial = fan_out(pool, self.trials, |t| {
            let states =
                generate_states(&profile, schedule.horizon(), &RandomnessSpec::new(seed, t))?;
            let fronts = simulate_fronts_coupled(&profile, &schedule, &states)?;
            let mut rows = Vec::new();
            for (j, f) in fronts.iter().enumerate() {
                for (x, &position) in f.positions.iter().enumerate() {
                    rows.push(FrontRow {
                        trial: t,
                        j,
                        n: f.start + x as u64,
                        position,
                    });
                }
            }
            Ok(rows)
        })?;
        Ok(per_trial.into_iter().flatten().collect())
    }
}
