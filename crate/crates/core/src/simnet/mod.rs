//! Slot-by-slot simulation of the three transmission schemes over a realized
//! [`StateMatrix`](crate::StateMatrix).
//!
//! Slot `n` proceeds as follows: every node puts one symbol on its outgoing
//! hop (the source its current message bit, a relay its last non-erased
//! reception or `0`, a GSI node the head of its queue), hop `i` delivers iff
//! it is clear in slot `n`, and deliveries take effect at the end of the
//! slot. A symbol received in slot `n` is first forwarded in slot `n + 1`.

use alloc::vec::Vec;

use libm::{floor, pow};
use rand::Rng;

use crate::bounds::ceil_slot;
use crate::model::ErasureProfile;
use crate::{Error, Result};

mod bitsep;
mod ftlr;
mod gsi;

pub use bitsep::{run_bit_separation, run_bit_separation_blocks, RecordOptions, TrialRecord};
pub use ftlr::{ftlr_deadline, run_ftlr_single_bit, FtlrOutcome};
pub use gsi::{
    default_gsi_deadline, run_gsi_control, run_gsi_local, verify_departure_recursion, GsiOptions,
    GsiTrialRecord, RecursionViolation,
};

/// Which decode-time formula a schedule follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `tau_j = ceil(k/(1-eps) + (j + 1/2) l_sep)`.
    Homogeneous,
    /// `tau_j = ceil(sum 1/(1-eps_i) + (j + 1/4) l_sep)`.
    Heterogeneous,
}

/// Bit-separation timing: spacing `l_sep` and decode slots `tau_j`.
///
/// Bit `j` is sent by the source during slots `(j l_sep, (j+1) l_sep]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    k: usize,
    m: usize,
    c: f64,
    delta_sep: f64,
    l_sep: u64,
    tau: Vec<u64>,
    regime: Regime,
}

/// `round(c * k^(0.5 + delta_sep))`, halves rounded up, at least 1.
pub fn rounded_spacing(k: usize, c: f64, delta_sep: f64) -> u64 {
    let real = c * pow(k as f64, 0.5 + delta_sep);
    (floor(real + 0.5) as u64).max(1)
}

impl Schedule {
    /// Regime follows the profile: homogeneous profiles use the homogeneous
    /// decode times.
    pub fn new(profile: &ErasureProfile, m: usize, c: f64, delta_sep: f64) -> Result<Self> {
        let regime = if profile.is_homogeneous() {
            Regime::Homogeneous
        } else {
            Regime::Heterogeneous
        };
        Self::with_regime(profile, m, c, delta_sep, regime)
    }

    pub fn with_regime(
        profile: &ErasureProfile,
        m: usize,
        c: f64,
        delta_sep: f64,
        regime: Regime,
    ) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", "must be positive"));
        }
        if !(delta_sep > 0.0 && delta_sep.is_finite()) {
            return Err(Error::param("delta_sep", "must be positive"));
        }
        let l_sep = rounded_spacing(profile.hops(), c, delta_sep);
        Self::with_l_sep(profile, m, c, delta_sep, l_sep, regime)
    }

    /// Explicit integer spacing, bypassing the rounding rule.
    pub fn with_l_sep(
        profile: &ErasureProfile,
        m: usize,
        c: f64,
        delta_sep: f64,
        l_sep: u64,
        regime: Regime,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m", "message needs at least one bit"));
        }
        if l_sep == 0 {
            return Err(Error::param("l_sep", "must be at least 1"));
        }
        let (base, offset) = match regime {
            Regime::Homogeneous => {
                if !profile.is_homogeneous() {
                    return Err(Error::param(
                        "regime",
                        "homogeneous decode times need a homogeneous profile",
                    ));
                }
                (profile.hops() as f64 / (1.0 - profile.eps_at(0)), 0.5)
            }
            Regime::Heterogeneous => (profile.expected_crossing_time(), 0.25),
        };
        let tau = (0..m)
            .map(|j| ceil_slot(base + (j as f64 + offset) * l_sep as f64))
            .collect();
        Ok(Self {
            k: profile.hops(),
            m,
            c,
            delta_sep,
            l_sep,
            tau,
            regime,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn delta_sep(&self) -> f64 {
        self.delta_sep
    }

    pub fn l_sep(&self) -> u64 {
        self.l_sep
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn taus(&self) -> &[u64] {
        &self.tau
    }

    pub fn tau(&self, j: usize) -> u64 {
        self.tau[j]
    }

    /// Slot `j * l_sep`, after which the source sends bit `j`.
    pub fn start(&self, j: usize) -> u64 {
        j as u64 * self.l_sep
    }

    /// Bit the source sends in slot `n >= 1`; after its string is exhausted
    /// it keeps repeating the last bit.
    pub fn source_bit(&self, n: u64) -> usize {
        (((n - 1) / self.l_sep) as usize).min(self.m - 1)
    }

    /// Last slot any bit-separation quantity depends on.
    pub fn horizon(&self) -> u64 {
        self.tau[self.m - 1]
    }

    pub(crate) fn check(&self, profile: &ErasureProfile) -> Result<()> {
        if self.k != profile.hops() {
            return Err(Error::ScheduleMismatch {
                schedule: self.k,
                profile: profile.hops(),
            });
        }
        Ok(())
    }
}

/// Distribution of message bits for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Independent fair bits.
    Uniform,
    /// `1, 0, 1, 0, ...`: every overwrite by a neighbouring bit is an error,
    /// and the first bit differs from the relays' default `0`.
    Alternating,
}

pub fn message_bits<R: Rng + ?Sized>(kind: MessageKind, m: usize, rng: &mut R) -> Vec<u8> {
    match kind {
        MessageKind::Uniform => (0..m).map(|_| rng.random::<bool>() as u8).collect(),
        MessageKind::Alternating => (0..m).map(|j| ((j + 1) % 2) as u8).collect(),
    }
}

pub(crate) fn check_bits(bits: &[u8], expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::MessageLength {
            expected,
            actual: bits.len(),
        });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::param("bits", "message bits must be 0 or 1"));
    }
    Ok(())
}
