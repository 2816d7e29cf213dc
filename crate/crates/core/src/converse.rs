//! Converse-side computations for single-bit transmission.
//!
//! `g(i, n)` bounds the mutual information between the message and what
//! node `i` has seen by slot `i + n - 1`. It satisfies
//!
//! ```text
//! g(0, n) = 1 (n >= 1),  g(i, 0) = 0 (i >= 1),
//! g(i, n) = (1 - eps_{i-1}) g(i-1, n) + eps_{i-1} g(i, n-1),
//! ```
//!
//! and equals `P(G_0 + ... + G_{i-1} < i + n)` for independent
//! `G_l ~ Geom(1 - eps_l)` on `{1, 2, ...}`. By Fano's inequality the 1-bit
//! error probability at node `i` is at least `h2^{-1}(1 - g)`.
//!
//! The mutual-information bounds themselves are not computed; only `g`.

use alloc::vec;
use alloc::vec::Vec;

use libm::log2;

use crate::bounds::ceil_slot;
use crate::model::ErasureProfile;
use crate::{Error, Result};

/// `g(i, n)` for `0 <= i <= I`, `0 <= n <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    max_i: usize,
    max_n: usize,
    values: Vec<f64>,
}

impl GTable {
    pub fn max_i(&self) -> usize {
        self.max_i
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// `None` at `(0, 0)`, where `g` is undefined, and outside the table.
    pub fn get(&self, i: usize, n: usize) -> Option<f64> {
        if (i == 0 && n == 0) || i > self.max_i || n > self.max_n {
            None
        } else {
            Some(self.values[i * (self.max_n + 1) + n])
        }
    }
}

fn check_hops(profile: &ErasureProfile, i: usize) -> Result<()> {
    if i > profile.hops() {
        Err(Error::TooManyHops {
            hops: profile.hops(),
            requested: i,
        })
    } else {
        Ok(())
    }
}

/// Advances a row `g(i-1, 0..=N)` to `g(i, 0..=N)` in place.
fn next_row(row: &mut [f64], eps: f64) {
    let mut prev = 0.0; // g(i, 0)
    row[0] = 0.0;
    for g in row.iter_mut().skip(1) {
        prev = (1.0 - eps) * *g + eps * prev;
        *g = prev;
    }
}

fn first_row(n_max: usize) -> Vec<f64> {
    let mut row = vec![1.0; n_max + 1];
    // g(0, 0) is outside the domain; 0 keeps next_row's n = 0 case uniform
    row[0] = 0.0;
    row
}

pub fn g_table(profile: &ErasureProfile, max_i: usize, max_n: usize) -> Result<GTable> {
    check_hops(profile, max_i)?;
    let width = max_n + 1;
    let mut values = Vec::with_capacity((max_i + 1) * width);
    let mut row = first_row(max_n);
    values.extend_from_slice(&row);
    for i in 1..=max_i {
        next_row(&mut row, profile.eps_at(i - 1));
        values.extend_from_slice(&row);
    }
    Ok(GTable {
        max_i,
        max_n,
        values,
    })
}

/// Single value `g(i, n)` with `O(n)` memory.
pub fn g_value(profile: &ErasureProfile, i: usize, n: usize) -> Result<f64> {
    check_hops(profile, i)?;
    if i == 0 && n == 0 {
        return Err(Error::param("(i, n)", "g is undefined at (0, 0)"));
    }
    if i == 0 {
        return Ok(1.0);
    }
    let mut row = first_row(n);
    for h in 0..i {
        next_row(&mut row, profile.eps_at(h));
    }
    Ok(row[n])
}

/// Law of `S_i = G_0 + ... + G_{i-1}` on `i ..= cap`, plus `P(S_i > cap)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumDistribution {
    pub hops: usize,
    pub cap: u64,
    /// `pmf[t - hops] = P(S_i = t)`.
    pub pmf: Vec<f64>,
    pub tail: f64,
}

impl SumDistribution {
    /// `P(S_i = t)`; exact for `t <= cap`.
    pub fn prob(&self, t: u64) -> f64 {
        if t < self.hops as u64 || t > self.cap {
            0.0
        } else {
            self.pmf[(t - self.hops as u64) as usize]
        }
    }

    /// `P(S_i < t)`; exact for `t <= cap + 1`.
    pub fn cdf_below(&self, t: u64) -> f64 {
        let lo = self.hops as u64;
        if t <= lo {
            return 0.0;
        }
        let upto = (t.min(self.cap + 1).saturating_sub(lo) as usize).min(self.pmf.len());
        let mut acc = 0.0;
        for &p in &self.pmf[..upto] {
            acc += p;
        }
        acc
    }
}

/// Exact convolution over `0 ..= cap` using
/// `q'(t) = (1-p) q'(t-1) + p q(t-1)` per added hop. The tail is tracked
/// separately so that `sum(pmf) + tail = 1` checks the arithmetic.
pub fn geometric_sum_distribution(
    profile: &ErasureProfile,
    hops: usize,
    cap: u64,
) -> Result<SumDistribution> {
    check_hops(profile, hops)?;
    let len = cap as usize + 1;
    let mut q = vec![0.0; len];
    q[0] = 1.0;
    let mut tail = 0.0;
    let mut next = vec![0.0; len];
    for h in 0..hops {
        let eps = profile.eps_at(h);
        let p = 1.0 - eps;
        // carry = sum_{s < t} q(s) eps^(t-1-s)
        let mut carry = 0.0;
        next[0] = 0.0;
        for t in 1..len {
            carry = eps * carry + q[t - 1];
            next[t] = p * carry;
        }
        // mass at or below cap that lands above it
        let spill = eps * carry + q[len - 1];
        tail += spill;
        core::mem::swap(&mut q, &mut next);
    }
    let lo = hops.min(len);
    Ok(SumDistribution {
        hops,
        cap,
        pmf: q.split_off(lo),
        tail,
    })
}

/// `P(S_i < t)`. Returns 0 below the support (`t <= i`).
pub fn geometric_sum_cdf(profile: &ErasureProfile, hops: usize, t: u64) -> Result<f64> {
    if hops == 0 {
        return Err(Error::param("i", "needs at least one hop"));
    }
    check_hops(profile, hops)?;
    if t <= hops as u64 {
        return Ok(0.0);
    }
    let mean = profile.eps()[..hops]
        .iter()
        .map(|e| 1.0 / (1.0 - e))
        .sum::<f64>();
    let cap = t.max(ceil_slot(20.0 * mean));
    Ok(geometric_sum_distribution(profile, hops, cap)?.cdf_below(t))
}

/// `h2(p)` in bits, with `h2(0) = h2(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * log2(p) - (1.0 - p) * log2(1.0 - p)
    }
}

/// The `p` in `[0, 1/2]` with `h2(p) = h`, by bisection to `1e-10`.
pub fn inverse_binary_entropy(h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 1.0 {
        return 0.5;
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Fano lower bound on the 1-bit error probability at node `i` decoding in
/// slot `decode_slot`.
///
/// Node `i` has seen slots `1 ..= decode_slot`, which is `g(i, n)` with
/// `n = decode_slot - i + 1` (`g(i, 0) = 0` if it cannot have heard
/// anything yet).
pub fn fano_error_floor(profile: &ErasureProfile, i: usize, decode_slot: u64) -> Result<f64> {
    let g = if i == 0 {
        1.0
    } else {
        let n = (decode_slot + 1).saturating_sub(i as u64) as usize;
        g_value(profile, i, n)?
    };
    Ok(inverse_binary_entropy((1.0 - g).max(0.0)))
}

/// `n = ceil((1 - alpha)/alpha * i) + 1`, the decode offset for velocity
/// `alpha` at node `i`.
pub fn slots_for_velocity(alpha: f64, i: usize) -> u64 {
    ceil_slot((1.0 - alpha) / alpha * i as f64) + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub alpha: f64,
    pub i: usize,
    pub n: u64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanTrend {
    pub alpha: f64,
    /// `alpha > 1/zeta`, where `g` should tend to 0.
    pub above_threshold: bool,
    /// Values are nonincreasing along the `i` grid.
    pub nonincreasing: bool,
    /// Values are nondecreasing along the `i` grid.
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScan {
    pub points: Vec<ScanPoint>,
    pub trends: Vec<ScanTrend>,
    pub inverse_zeta: f64,
}

/// `g(i, ceil((1-alpha)/alpha i) + 1)` for every `alpha` and every `i` in
/// `i_grid` (each `i <= k`).
pub fn velocity_threshold_scan(
    profile: &ErasureProfile,
    alphas: &[f64],
    i_grid: &[usize],
) -> Result<ThresholdScan> {
    for &a in alphas {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1]"));
        }
    }
    let max_i = i_grid.iter().copied().max().unwrap_or(0);
    check_hops(profile, max_i)?;
    let inverse_zeta = 1.0 / profile.zeta();
    let mut points = Vec::with_capacity(alphas.len() * i_grid.len());
    let mut trends = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let max_n = i_grid
            .iter()
            .map(|&i| slots_for_velocity(alpha, i))
            .max()
            .unwrap_or(1);
        let mut row = first_row(max_n as usize);
        let mut at = 0;
        let mut values = Vec::with_capacity(i_grid.len());
        let mut order: Vec<usize> = (0..i_grid.len()).collect();
        order.sort_by_key(|&x| i_grid[x]);
        let mut by_grid = vec![0.0; i_grid.len()];
        for &x in &order {
            let i = i_grid[x];
            while at < i {
                next_row(&mut row, profile.eps_at(at));
                at += 1;
            }
            let n = slots_for_velocity(alpha, i);
            by_grid[x] = if i == 0 { 1.0 } else { row[n as usize] };
        }
        for (x, &i) in i_grid.iter().enumerate() {
            let g = by_grid[x];
            values.push(g);
            points.push(ScanPoint {
                alpha,
                i,
                n: slots_for_velocity(alpha, i),
                g,
            });
        }
        trends.push(ScanTrend {
            alpha,
            above_threshold: alpha > inverse_zeta,
            nonincreasing: values.windows(2).all(|w| w[1] <= w[0]),
            nondecreasing: values.windows(2).all(|w| w[1] >= w[0]),
        });
    }
    Ok(ThresholdScan {
        points,
        trends,
        inverse_zeta,
    })
}
