//! Network description, channel states and the randomness contract.
//!
//! Channel states are counter-based: whether hop `i` is clear in slot `n` is a
//! keyed hash of `(i, n)`, so a [`StateMatrix`] is never materialized. Any
//! simulator can query any cell in O(1), two simulators handed the same matrix
//! see exactly the same channel realization, and large horizons cost no
//! memory.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::{Error, Result};

/// How a profile was specified. Periodic profiles are expanded to an explicit
/// per-hop list at construction; the tag and pattern only survive for labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Homogeneous,
    Explicit,
    Periodic,
}

/// Per-hop erasure probabilities `eps_0 .. eps_{k-1}`, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureProfile {
    kind: ProfileKind,
    eps: Vec<f64>,
    pattern: Vec<f64>,
}

/// `v_min = 1 - max eps`, `v_max = 1 - min eps` and the finite-`k` value of
/// `zeta = (1/k) * sum 1/(1 - eps_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocities {
    pub v_min: f64,
    pub v_max: f64,
    pub zeta: f64,
}

fn check_eps(hop: usize, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidErasure { hop, value })
    }
}

impl ErasureProfile {
    pub fn homogeneous(hops: usize, eps: f64) -> Result<Self> {
        if hops == 0 {
            return Err(Error::EmptyProfile);
        }
        check_eps(0, eps)?;
        Ok(Self {
            kind: ProfileKind::Homogeneous,
            eps: alloc::vec![eps; hops],
            pattern: alloc::vec![eps],
        })
    }

    pub fn explicit(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (hop, &e) in eps.iter().enumerate() {
            check_eps(hop, e)?;
        }
        Ok(Self {
            kind: ProfileKind::Explicit,
            pattern: eps.clone(),
            eps,
        })
    }

    /// Repeats `pattern` cyclically over `hops` hops.
    pub fn periodic(hops: usize, pattern: &[f64]) -> Result<Self> {
        if hops == 0 || pattern.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (hop, &e) in pattern.iter().enumerate() {
            check_eps(hop, e)?;
        }
        Ok(Self {
            kind: ProfileKind::Periodic,
            eps: pattern.iter().copied().cycle().take(hops).collect(),
            pattern: pattern.to_vec(),
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn hops(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// Erasure probability of hop `i`. Hops at or beyond `k` are virtual and
    /// use the worst real hop, `1 - v_min`, so that wave fronts and centres
    /// can be continued past the destination.
    pub fn eps_at(&self, hop: usize) -> f64 {
        match self.eps.get(hop) {
            Some(&e) => e,
            None => self.max_eps(),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.eps.windows(2).all(|w| w[0] == w[1])
    }

    fn max_eps(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }

    fn min_eps(&self) -> f64 {
        self.eps.iter().copied().fold(1.0, f64::min)
    }

    pub fn v_min(&self) -> f64 {
        1.0 - self.max_eps()
    }

    pub fn v_max(&self) -> f64 {
        1.0 - self.min_eps()
    }

    /// `sum_{i<k} 1/(1 - eps_i)`, the expected single-bit crossing time.
    pub fn expected_crossing_time(&self) -> f64 {
        self.eps.iter().map(|e| 1.0 / (1.0 - e)).sum()
    }

    pub fn zeta(&self) -> f64 {
        self.expected_crossing_time() / self.hops() as f64
    }

    pub fn derived_velocities(&self) -> Velocities {
        Velocities {
            v_min: self.v_min(),
            v_max: self.v_max(),
            zeta: self.zeta(),
        }
    }

    /// The pattern the profile was built from (the single value for a
    /// homogeneous profile, the whole list for an explicit one).
    pub fn pattern(&self) -> &[f64] {
        &self.pattern
    }
}

/// Identifies one trial's random stream: a pure function of
/// `(master_seed, trial_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomnessSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STATE_DOMAIN: u64 = 0x5354_4154_4553_4d58;
const POINT_DOMAIN: u64 = 0x504f_494e_5453_4545;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RandomnessSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self {
            master_seed,
            trial_index,
        }
    }

    /// Master seed for grid point `point` of an experiment rooted at
    /// `master_seed`.
    pub fn point_seed(master_seed: u64, point: u64) -> u64 {
        mix64(mix64(master_seed ^ POINT_DOMAIN).wrapping_add(point.wrapping_mul(GOLDEN)))
    }

    /// General-purpose generator for this trial (message bits, service
    /// times). Trials share the ChaCha key and differ by stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial_index);
        rng
    }

    fn state_key(&self) -> u64 {
        mix64(mix64(self.master_seed ^ STATE_DOMAIN) ^ mix64(self.trial_index.wrapping_add(GOLDEN)))
    }
}

/// Realized channel states `S_i[n]` for one trial.
///
/// Entry `(i, n)` is clear with probability `1 - eps_i`, independently over
/// cells. Hops `i >= k` are virtual (see [`ErasureProfile::eps_at`]).
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    hops: usize,
    horizon: u64,
    key: u64,
    thresholds: Vec<u64>,
    virtual_threshold: u64,
}

/// Largest slot index representable by the cell hash.
pub const MAX_SLOT: u64 = u32::MAX as u64;

fn clear_threshold(eps: f64) -> u64 {
    // clear iff a uniform 53-bit integer falls below (1 - eps) * 2^53
    ((1.0 - eps) * (1u64 << 53) as f64) as u64
}

pub fn generate_states(
    profile: &ErasureProfile,
    horizon: u64,
    rng: &RandomnessSpec,
) -> Result<StateMatrix> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    if horizon > MAX_SLOT {
        return Err(Error::param("horizon", "exceeds 2^32 - 1 slots"));
    }
    Ok(StateMatrix {
        hops: profile.hops(),
        horizon,
        key: rng.state_key(),
        thresholds: profile.eps().iter().map(|&e| clear_threshold(e)).collect(),
        virtual_threshold: clear_threshold(profile.eps_at(profile.hops())),
    })
}

impl StateMatrix {
    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Same realization, longer nominal horizon. Cells inside the old horizon
    /// are unchanged.
    pub fn extended(&self, horizon: u64) -> Result<StateMatrix> {
        if horizon > MAX_SLOT {
            return Err(Error::param("horizon", "exceeds 2^32 - 1 slots"));
        }
        let mut out = self.clone();
        out.horizon = out.horizon.max(horizon);
        Ok(out)
    }

    pub(crate) fn require(&self, slot: u64) -> Result<()> {
        if slot > self.horizon {
            Err(Error::HorizonTooShort {
                horizon: self.horizon,
                required: slot,
            })
        } else {
            Ok(())
        }
    }

    /// `true` iff hop `hop` delivers its symbol in slot `slot` (`slot >= 1`).
    #[inline]
    pub fn is_clear(&self, hop: usize, slot: u64) -> bool {
        let cell = ((hop as u64) << 32) | (slot & MAX_SLOT);
        let h = mix64(self.key ^ mix64(cell.wrapping_add(GOLDEN)));
        let threshold = match self.thresholds.get(hop) {
            Some(&t) => t,
            None => self.virtual_threshold,
        };
        (h >> 11) < threshold
    }

    /// First clear slot of `hop` strictly after `slot`.
    pub fn next_clear_after(&self, hop: usize, slot: u64) -> u64 {
        let mut n = slot + 1;
        while !self.is_clear(hop, n) {
            n += 1;
        }
        n
    }

    /// Slots `1..=horizon` of one hop.
    pub fn row(&self, hop: usize) -> Vec<bool> {
        (1..=self.horizon).map(|n| self.is_clear(hop, n)).collect()
    }
}

/// Draws `g >= 1` with `P(g = t) = p (1 - p)^(t - 1)`: the slot count up to
/// and including the first success.
pub fn geometric_gap<R: Rng + ?Sized>(rng: &mut R, p: f64) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability(p));
    }
    let failures = Geometric::new(p)
        .map_err(|_| Error::InvalidProbability(p))?
        .sample(rng);
    Ok(failures + 1)
}
