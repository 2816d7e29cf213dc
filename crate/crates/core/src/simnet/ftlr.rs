use alloc::vec;

use libm::pow;

use crate::bounds::ceil_slot;
use crate::model::{ErasureProfile, StateMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FtlrOutcome {
    /// Destination's last non-erased reception at the decode slot, `0` if it
    /// never received anything.
    pub decoded_bit: u8,
    pub correct: bool,
    /// First slot at which the source's bit reaches node `k`, if it does
    /// within the matrix horizon.
    pub arrival_time: Option<u64>,
}

/// `ceil(sum 1/(1-eps_i) + c k^(0.5 + delta))`: a single-bit decode slot with
/// slack between `sqrt(k)` and `k`.
pub fn ftlr_deadline(profile: &ErasureProfile, c: f64, delta: f64) -> u64 {
    ceil_slot(profile.expected_crossing_time() + c * pow(profile.hops() as f64, 0.5 + delta))
}

/// Single-bit forward-the-last-received relaying.
///
/// Every node is simulated every slot. After the decode slot the run
/// continues (up to the matrix horizon) only to find the arrival time.
pub fn run_ftlr_single_bit(
    profile: &ErasureProfile,
    bit: u8,
    tau: u64,
    states: &StateMatrix,
) -> Result<FtlrOutcome> {
    if bit > 1 {
        return Err(Error::param("bit", "must be 0 or 1"));
    }
    if states.hops() != profile.hops() {
        return Err(Error::ScheduleMismatch {
            schedule: states.hops(),
            profile: profile.hops(),
        });
    }
    states.require(tau)?;
    let k = profile.hops();
    let mut value = vec![0u8; k + 1];
    let mut reached = vec![false; k + 1];
    value[0] = bit;
    reached[0] = true;

    let mut decoded_bit = 0;
    let mut arrival_time = None;
    let mut n = 0;
    while n < states.horizon() && (n < tau || arrival_time.is_none()) {
        n += 1;
        // descending so node i+1 copies node i's start-of-slot symbol
        for i in (0..k).rev() {
            if states.is_clear(i, n) {
                value[i + 1] = value[i];
                reached[i + 1] = reached[i];
            }
        }
        if arrival_time.is_none() && reached[k] {
            arrival_time = Some(n);
        }
        if n == tau {
            decoded_bit = value[k];
        }
    }
    Ok(FtlrOutcome {
        decoded_bit,
        correct: decoded_bit == bit,
        arrival_time,
    })
}
