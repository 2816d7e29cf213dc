//! Closed-form achievability bounds for the bit-separation scheme.
//!
//! Everything is evaluated in the natural-log domain. A bound whose value is
//! at least one is returned as-is and flagged vacuous rather than clipped.
//!
//! The bounds use the real-valued spacing `l = c * k^(0.5 + delta_sep)`; the
//! simulators use its rounded integer counterpart from [`Schedule`].

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use libm::{ceil, exp, floor, log, pow};

use crate::model::ErasureProfile;
use crate::simnet::{Regime, Schedule};
use crate::{Error, Result};

/// Natural log of a probability bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBound {
    pub ln: f64,
}

impl LogBound {
    pub fn value(self) -> f64 {
        exp(self.ln)
    }

    /// The bound carries no information (it is at least one).
    pub fn vacuous(self) -> bool {
        self.ln >= 0.0
    }
}

/// Which formula produced [`BoundReport::success_lower_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSource {
    /// The displayed homogeneous or heterogeneous proposition.
    Proposition,
    /// `1 - sum_j P(E_j)` with the per-bit escape lemma.
    UnionOfEscapes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Per-bit `ln` of the escape-probability bound.
    pub log_escape_bound: Vec<f64>,
    /// `ln` of the total failure mass behind `success_lower_bound`.
    pub log_failure_bound: f64,
    /// `1 - exp(log_failure_bound)`, not clipped.
    pub raw_success: f64,
    /// `raw_success` clipped to `[0, 1]`.
    pub success_lower_bound: f64,
    pub vacuous: bool,
    /// `c'` (homogeneous) or `c''` (heterogeneous).
    pub constant: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub l_sep: f64,
    pub source: BoundSource,
    /// Heterogeneous only: the clipped success bound of the formula that was
    /// not selected.
    pub alternative: Option<f64>,
}

fn check_common(k: usize, c: f64, delta_sep: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::EmptyProfile);
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", "must be positive"));
    }
    if !(delta_sep > 0.0 && delta_sep.is_finite()) {
        return Err(Error::param("delta_sep", "must be positive"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && (0.0..1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidErasure { hop: 0, value: eps })
    }
}

/// Real-valued spacing `c * k^(0.5 + delta_sep)`.
pub fn spacing(k: usize, c: f64, delta_sep: f64) -> f64 {
    c * pow(k as f64, 0.5 + delta_sep)
}

fn success_from_log_failure(log_failure: f64) -> (f64, f64) {
    let raw = 1.0 - exp(log_failure);
    (raw, raw.clamp(0.0, 1.0))
}

/// Escape bound for one bit in the homogeneous case:
/// `2 exp(-(l(1-eps)/2)^2 / (2 (k/(1-eps) + l/2)))`.
pub fn escape_bound_hom(k: usize, eps: f64, c: f64, delta_sep: f64) -> Result<LogBound> {
    check_common(k, c, delta_sep)?;
    check_eps(eps)?;
    let l = spacing(k, c, delta_sep);
    let v = 1.0 - eps;
    let margin = 0.5 * l * v;
    let steps = k as f64 / v + 0.5 * l;
    Ok(LogBound {
        ln: LN_2 - margin * margin / (2.0 * steps),
    })
}

/// Homogeneous success bound
/// `1 - 2m exp(-c' k^(2 delta) / (1 + (1-eps) c k^(delta - 1/2) / 2))`
/// with `c' = (1-eps)^3 c^2 / 8`.
pub fn success_bound_hom(
    k: usize,
    m: usize,
    eps: f64,
    c: f64,
    delta_sep: f64,
) -> Result<BoundReport> {
    check_common(k, c, delta_sep)?;
    check_eps(eps)?;
    let v = 1.0 - eps;
    let kf = k as f64;
    let c_prime = v * v * v * c * c / 8.0;
    let exponent =
        c_prime * pow(kf, 2.0 * delta_sep) / (1.0 + 0.5 * v * c * pow(kf, delta_sep - 0.5));
    let log_escape = LN_2 - exponent;
    let log_failure = if m == 0 {
        f64::NEG_INFINITY
    } else {
        log(2.0 * m as f64) - exponent
    };
    let (raw, clipped) = success_from_log_failure(log_failure);
    Ok(BoundReport {
        log_escape_bound: alloc::vec![log_escape; m],
        log_failure_bound: log_failure,
        raw_success: raw,
        success_lower_bound: clipped,
        vacuous: log_failure >= 0.0,
        constant: c_prime,
        v_min: v,
        v_max: v,
        l_sep: spacing(k, c, delta_sep),
        source: BoundSource::Proposition,
        alternative: None,
    })
}

fn het_increment_bound(v_min: f64) -> f64 {
    (1.0 / v_min - 1.0).max(1.0)
}

/// Heterogeneous escape bound for bit `j`:
/// `2 exp(-(v_min l / (5 v_max))^2 / (2 (tau_j - j l) max(1/v_min - 1, 1)^2))`
/// with `tau_j - j l = sum 1/(1-eps_i) + l/4` in real arithmetic, which does
/// not depend on `j`.
pub fn escape_bound_het(
    profile: &ErasureProfile,
    schedule: &Schedule,
    j: usize,
) -> Result<LogBound> {
    check_schedule(profile, schedule)?;
    if j >= schedule.m() {
        return Err(Error::param("j", "bit index beyond the message"));
    }
    Ok(escape_bound_het_raw(
        profile,
        schedule.c(),
        schedule.delta_sep(),
    ))
}

fn escape_bound_het_raw(profile: &ErasureProfile, c: f64, delta_sep: f64) -> LogBound {
    let l = spacing(profile.hops(), c, delta_sep);
    let (v_min, v_max) = (profile.v_min(), profile.v_max());
    let margin = v_min * l / (5.0 * v_max);
    let steps = profile.expected_crossing_time() + 0.25 * l;
    let d = het_increment_bound(v_min);
    LogBound {
        ln: LN_2 - margin * margin / (2.0 * steps * d * d),
    }
}

/// Heterogeneous success bound. Both the displayed proposition
/// `1 - 2m exp(-c'' k^(2 delta) / (1 + (c/4) v_min max(1/v_min-1,1)^2 k^(delta-1/2)))`,
/// `c'' = (c^2/50) v_min^3 / v_max^2`, and the union of the per-bit escape
/// bounds are evaluated; the larger (tighter) success bound is reported and
/// the other is kept in `alternative`.
pub fn success_bound_het(
    profile: &ErasureProfile,
    schedule: &Schedule,
    m: usize,
) -> Result<BoundReport> {
    check_schedule(profile, schedule)?;
    let (c, delta) = (schedule.c(), schedule.delta_sep());
    let kf = profile.hops() as f64;
    let (v_min, v_max) = (profile.v_min(), profile.v_max());
    let d = het_increment_bound(v_min);
    let c_second = c * c / 50.0 * v_min * v_min * v_min / (v_max * v_max);
    let exponent =
        c_second * pow(kf, 2.0 * delta) / (1.0 + 0.25 * c * v_min * d * d * pow(kf, delta - 0.5));

    let escape = escape_bound_het_raw(profile, c, delta);
    let (log_prop, log_union) = if m == 0 {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    } else {
        let lm = log(m as f64);
        (LN_2 + lm - exponent, lm + escape.ln)
    };
    let (prop_raw, prop) = success_from_log_failure(log_prop);
    let (union_raw, union) = success_from_log_failure(log_union);
    let (source, log_failure, raw, clipped, alternative) = if union_raw > prop_raw {
        (
            BoundSource::UnionOfEscapes,
            log_union,
            union_raw,
            union,
            prop,
        )
    } else {
        (BoundSource::Proposition, log_prop, prop_raw, prop, union)
    };
    Ok(BoundReport {
        log_escape_bound: alloc::vec![escape.ln; m],
        log_failure_bound: log_failure,
        raw_success: raw,
        success_lower_bound: clipped,
        vacuous: log_failure >= 0.0,
        constant: c_second,
        v_min,
        v_max,
        l_sep: spacing(profile.hops(), c, delta),
        source,
        alternative: Some(alternative),
    })
}

fn check_schedule(profile: &ErasureProfile, schedule: &Schedule) -> Result<()> {
    if schedule.k() != profile.hops() {
        return Err(Error::ScheduleMismatch {
            schedule: schedule.k(),
            profile: profile.hops(),
        });
    }
    Ok(())
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Relative slack used when comparing `T(i)` with a time; covers rounding in
/// the prefix sums so that exact ties resolve to the larger index.
const T_TOL: f64 = 1e-12;

pub(crate) fn tolerance(t: f64) -> f64 {
    T_TOL * t.abs().max(1.0)
}

/// `T(i) = sum_{l < i} 1/(1 - eps_l)`, with virtual hops `i >= k` costing
/// `1/v_min` each.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTransform {
    prefix: Vec<f64>,
    tail_cost: f64,
}

impl TimeTransform {
    pub fn new(profile: &ErasureProfile) -> Self {
        let mut acc = CompensatedSum::default();
        let mut prefix = Vec::with_capacity(profile.hops() + 1);
        prefix.push(0.0);
        for &e in profile.eps() {
            acc.add(1.0 / (1.0 - e));
            prefix.push(acc.value());
        }
        Self {
            prefix,
            tail_cost: 1.0 / profile.v_min(),
        }
    }

    fn hops(&self) -> u64 {
        (self.prefix.len() - 1) as u64
    }

    pub fn at(&self, i: u64) -> f64 {
        let k = self.hops();
        if i <= k {
            self.prefix[i as usize]
        } else {
            self.prefix[k as usize] + (i - k) as f64 * self.tail_cost
        }
    }

    /// `sup { i : T(i) <= t }` for `t >= 0`.
    pub fn inverse(&self, t: f64) -> u64 {
        let limit = t + tolerance(t);
        let k = self.hops();
        if self.prefix[k as usize] <= limit {
            let over = (limit - self.prefix[k as usize]) / self.tail_cost;
            let mut i = k + floor(over) as u64;
            while self.at(i + 1) <= limit {
                i += 1;
            }
            while i > k && self.at(i) > limit {
                i -= 1;
            }
            i
        } else {
            (self.prefix.partition_point(|&p| p <= limit) - 1) as u64
        }
    }
}

pub fn time_transform(profile: &ErasureProfile, i: u64) -> f64 {
    TimeTransform::new(profile).at(i)
}

/// Centre of bit `j`'s wave front at slot `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    /// Homogeneous: the mean position `(n - j l)(1 - eps)`.
    Real(f64),
    /// Heterogeneous: `sup { i : T(i) <= n - j l }`.
    Index(u64),
}

impl Kappa {
    pub fn as_f64(self) -> f64 {
        match self {
            Kappa::Real(x) => x,
            Kappa::Index(i) => i as f64,
        }
    }
}

/// Evaluates `kappa_{j,n}` on demand for one schedule.
#[derive(Debug, Clone)]
pub struct KappaTable {
    regime: Regime,
    velocity: f64,
    l_sep: u64,
    transform: TimeTransform,
}

impl KappaTable {
    pub fn new(profile: &ErasureProfile, schedule: &Schedule) -> Result<Self> {
        check_schedule(profile, schedule)?;
        Ok(Self {
            regime: schedule.regime(),
            velocity: 1.0 - profile.eps_at(0),
            l_sep: schedule.l_sep(),
            transform: TimeTransform::new(profile),
        })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn transform(&self) -> &TimeTransform {
        &self.transform
    }

    pub fn get(&self, j: usize, n: u64) -> Result<Kappa> {
        let start = j as u64 * self.l_sep;
        if n < start {
            return Err(Error::BeforeStart {
                bit: j,
                slot: n,
                start,
            });
        }
        let t = n - start;
        Ok(match self.regime {
            Regime::Homogeneous => Kappa::Real(t as f64 * self.velocity),
            Regime::Heterogeneous => Kappa::Index(self.transform.inverse(t as f64)),
        })
    }
}

pub fn kappa(profile: &ErasureProfile, schedule: &Schedule, j: usize, n: u64) -> Result<Kappa> {
    KappaTable::new(profile, schedule)?.get(j, n)
}

/// Outcome of scanning `|kappa_{j,n} - kappa_{j-1,n}|` over a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Smallest gap found; `+inf` when the message has a single bit.
    pub min_gap: f64,
    /// `(j, n)` attaining the minimum.
    pub argmin: Option<(usize, u64)>,
    /// `v_min * l_sep / 2`.
    pub threshold: f64,
    /// Every scanned gap strictly exceeded the threshold.
    pub holds: bool,
    pub evaluated: u64,
}

/// Scans `1 <= j <= m-1`, `j l < n <= tau_{m-1}` for the closest pair of
/// consecutive centres. `stride = 1` is exhaustive; larger strides sample
/// every `stride`-th slot (always including the last one).
pub fn check_kappa_separation(
    profile: &ErasureProfile,
    schedule: &Schedule,
    stride: u64,
) -> Result<SeparationReport> {
    if stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    let table = KappaTable::new(profile, schedule)?;
    let l = schedule.l_sep();
    let last = schedule.tau(schedule.m() - 1);
    let mut min_gap = f64::INFINITY;
    let mut argmin = None;
    let mut evaluated = 0;
    for j in 1..schedule.m() {
        let first = j as u64 * l + 1;
        let mut n = first;
        while n <= last {
            let gap = (table.get(j - 1, n)?.as_f64() - table.get(j, n)?.as_f64()).abs();
            evaluated += 1;
            if gap < min_gap {
                min_gap = gap;
                argmin = Some((j, n));
            }
            if n == last {
                break;
            }
            n = (n + stride).min(last);
        }
    }
    let threshold = 0.5 * profile.v_min() * l as f64;
    Ok(SeparationReport {
        min_gap,
        argmin,
        threshold,
        holds: min_gap > threshold,
        evaluated,
    })
}

/// Ceiling that absorbs floating-point noise just above an integer.
pub(crate) fn ceil_slot(x: f64) -> u64 {
    ceil(x - 1e-9).max(0.0) as u64
}
