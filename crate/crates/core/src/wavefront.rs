//! Wave fronts: the Markov chains `I_{j,n}` that track how far bit `j` has
//! travelled, coupled to the network through the shared [`StateMatrix`].
//!
//! Front `j` starts at position `0` in slot `j l_sep` and advances in slot
//! `n` iff the hop at its current position is clear in slot `n`. Positions
//! `>= k` use the virtual hops of [`ErasureProfile::eps_at`]. Fronts are
//! clipped at `k + 2 l_sep`, which is far enough past every `kappa_{j,n}`
//! that clipping never changes an event.

use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{tolerance, KappaTable, TimeTransform};
use crate::model::{ErasureProfile, StateMatrix};
use crate::simnet::{Regime, Schedule, TrialRecord};
use crate::Result;

/// Positions `I_{j,n}` for `n` in `start ..= tau_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontTrajectory {
    pub bit: usize,
    /// `j l_sep`; `positions[0]` is the front at this slot and is always 0.
    pub start: u64,
    pub positions: Vec<u32>,
}

impl FrontTrajectory {
    /// Last slot covered.
    pub fn end(&self) -> u64 {
        self.start + self.positions.len() as u64 - 1
    }

    pub fn get(&self, n: u64) -> Option<u32> {
        n.checked_sub(self.start)
            .and_then(|t| self.positions.get(t as usize).copied())
    }

    /// # Panics
    /// If `n` lies outside `start ..= end()`.
    pub fn at(&self, n: u64) -> u32 {
        self.get(n).expect("slot outside the trajectory")
    }
}

/// Per-bit success (`A_j`) and escape (`E_j`) events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessEvents {
    pub a: Vec<bool>,
    pub escape: Vec<bool>,
    /// `∩ A_j`.
    pub overall: bool,
}

/// Largest position a front is tracked to.
pub fn front_clip(schedule: &Schedule) -> u64 {
    schedule.k() as u64 + 2 * schedule.l_sep()
}

/// `l_sep (1 - eps) / 2` (homogeneous) or `v_min l_sep / 4` (heterogeneous).
pub fn escape_threshold(profile: &ErasureProfile, schedule: &Schedule) -> f64 {
    let l = schedule.l_sep() as f64;
    match schedule.regime() {
        Regime::Homogeneous => 0.5 * l * (1.0 - profile.eps_at(0)),
        Regime::Heterogeneous => 0.25 * profile.v_min() * l,
    }
}

fn prepare(profile: &ErasureProfile, schedule: &Schedule, states: &StateMatrix) -> Result<()> {
    schedule.check(profile)?;
    states.require(schedule.horizon())
}

/// Runs every front on `states` over its own window `j l_sep ..= tau_j`.
pub fn simulate_fronts_coupled(
    profile: &ErasureProfile,
    schedule: &Schedule,
    states: &StateMatrix,
) -> Result<Vec<FrontTrajectory>> {
    prepare(profile, schedule, states)?;
    let clip = front_clip(schedule);
    Ok((0..schedule.m())
        .map(|j| {
            let start = schedule.start(j);
            let tau = schedule.tau(j);
            let mut positions = Vec::with_capacity((tau - start + 1) as usize);
            let mut pos = 0u64;
            positions.push(0);
            for n in start + 1..=tau {
                if pos < clip && states.is_clear(pos as usize, n) {
                    pos += 1;
                }
                positions.push(pos as u32);
            }
            FrontTrajectory {
                bit: j,
                start,
                positions,
            }
        })
        .collect())
}

/// Event bookkeeping fed one `(j, n)` observation at a time.
struct EventTracker<'a> {
    schedule: &'a Schedule,
    k: u64,
    threshold: f64,
    a: Vec<bool>,
    escape: Vec<bool>,
}

impl<'a> EventTracker<'a> {
    fn new(profile: &ErasureProfile, schedule: &'a Schedule) -> Self {
        let m = schedule.m();
        Self {
            schedule,
            k: schedule.k() as u64,
            threshold: escape_threshold(profile, schedule),
            a: vec![true; m],
            escape: vec![false; m],
        }
    }

    /// `own = I_{j,n}`, `next = I_{j+1,n}` (0 before front `j+1` starts),
    /// for `j l_sep < n <= tau_j`.
    fn observe(&mut self, j: usize, n: u64, own: u64, next: u64, kappa: f64) {
        if (own as f64 - kappa).abs() >= self.threshold {
            self.escape[j] = true;
        }
        let has_next = j + 1 < self.schedule.m();
        let tau = self.schedule.tau(j);
        if n < tau {
            if has_next && n >= self.schedule.start(j + 1) && next >= own {
                self.a[j] = false;
            }
        } else if own < self.k || (has_next && next >= self.k) {
            self.a[j] = false;
        }
    }

    fn finish(self) -> SuccessEvents {
        let overall = self.a.iter().all(|&x| x);
        SuccessEvents {
            a: self.a,
            escape: self.escape,
            overall,
        }
    }
}

/// Evaluates `A_j`, `∩ A_j` and `E_j` on stored trajectories. Requires
/// `fronts[j]` to cover `j l_sep ..= tau_j`.
///
/// # Panics
/// If a trajectory is shorter than its window.
pub fn detect_events(
    fronts: &[FrontTrajectory],
    schedule: &Schedule,
    profile: &ErasureProfile,
) -> Result<SuccessEvents> {
    schedule.check(profile)?;
    let table = KappaTable::new(profile, schedule)?;
    let mut tracker = EventTracker::new(profile, schedule);
    for j in 0..schedule.m() {
        for n in schedule.start(j) + 1..=schedule.tau(j) {
            let own = fronts[j].at(n) as u64;
            let next = match fronts.get(j + 1) {
                Some(f) if n >= f.start => f.at(n) as u64,
                _ => 0,
            };
            tracker.observe(j, n, own, next, table.get(j, n)?.as_f64());
        }
    }
    Ok(tracker.finish())
}

/// `sup { i : T(i) <= t }` maintained for nondecreasing `t`.
struct KappaCursor<'a> {
    transform: &'a TimeTransform,
    index: u64,
}

impl KappaCursor<'_> {
    fn advance_to(&mut self, t: f64) -> u64 {
        let limit = t + tolerance(t);
        while self.transform.at(self.index + 1) <= limit {
            self.index += 1;
        }
        self.index
    }
}

/// Same events as `detect_events(simulate_fronts_coupled(..))`, computed in
/// one pass without storing trajectories (`O(m)` memory).
pub fn stream_events(
    profile: &ErasureProfile,
    schedule: &Schedule,
    states: &StateMatrix,
) -> Result<SuccessEvents> {
    prepare(profile, schedule, states)?;
    let m = schedule.m();
    let l = schedule.l_sep();
    let clip = front_clip(schedule);
    let velocity = 1.0 - profile.eps_at(0);
    let transform = TimeTransform::new(profile);
    let mut cursors: Vec<KappaCursor> = (0..m)
        .map(|_| KappaCursor {
            transform: &transform,
            index: 0,
        })
        .collect();
    let mut pos = vec![0u64; m];
    let mut tracker = EventTracker::new(profile, schedule);
    let mut lo = 0;

    for n in 1..=schedule.horizon() {
        while schedule.tau(lo) < n {
            lo += 1;
        }
        let hi = (((n - 1) / l) as usize).min(m - 1);
        if lo > hi {
            continue;
        }
        for p in &mut pos[lo..=hi] {
            if *p < clip && states.is_clear(*p as usize, n) {
                *p += 1;
            }
        }
        for j in lo..=hi {
            let next = if j < hi { pos[j + 1] } else { 0 };
            let t = n - schedule.start(j);
            let kappa = match schedule.regime() {
                Regime::Homogeneous => t as f64 * velocity,
                Regime::Heterogeneous => cursors[j].advance_to(t as f64) as f64,
            };
            tracker.observe(j, n, pos[j], next, kappa);
        }
    }
    Ok(tracker.finish())
}

/// Network fronts of a bit-separation run recorded with
/// [`RecordOptions::fronts`](crate::simnet::RecordOptions): per bit, the
/// largest node index that has held it. `None` if fronts were not recorded.
pub fn extract_fronts_from_network(
    record: &TrialRecord,
    schedule: &Schedule,
) -> Option<Vec<FrontTrajectory>> {
    let fronts = record.network_fronts.as_ref()?;
    Some(
        fronts
            .iter()
            .enumerate()
            .map(|(j, positions)| FrontTrajectory {
                bit: j,
                start: schedule.start(j),
                positions: positions.clone(),
            })
            .collect(),
    )
}

/// First slot where a network front differs from its coupled front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontDivergence {
    pub bit: usize,
    pub slot: u64,
    pub network: u32,
    /// Coupled position capped at `k` (the network cannot pass the
    /// destination).
    pub coupled: u32,
}

/// Compares network fronts with `min(coupled, k)` slot by slot over the
/// common window. `None` means they agree everywhere.
pub fn compare_fronts(
    network: &[FrontTrajectory],
    coupled: &[FrontTrajectory],
    k: usize,
) -> Option<FrontDivergence> {
    for (net, cpl) in network.iter().zip(coupled) {
        let first = net.start.max(cpl.start);
        let last = net.end().min(cpl.end());
        for n in first..=last {
            let a = net.at(n);
            let b = cpl.at(n).min(k as u32);
            if a != b {
                return Some(FrontDivergence {
                    bit: net.bit,
                    slot: n,
                    network: a,
                    coupled: b,
                });
            }
        }
    }
    None
}

/// One-step conditional law of the centred front `Delta = I - kappa`
/// (homogeneous) or `Delta = T(I) - (n - j l_sep)` (heterogeneous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleStep {
    /// Probability the hop at the current position erases.
    pub p_stay: f64,
    pub stay: f64,
    pub p_advance: f64,
    pub advance: f64,
}

impl MartingaleStep {
    pub fn mean(&self) -> f64 {
        self.p_stay * self.stay + self.p_advance * self.advance
    }

    pub fn max_abs(&self) -> f64 {
        self.stay.abs().max(self.advance.abs())
    }
}

/// Increment law from a front at `position`; the advance probability is
/// that of the hop being crossed, `1 - eps_position`.
pub fn martingale_step(profile: &ErasureProfile, regime: Regime, position: u64) -> MartingaleStep {
    let eps = profile.eps_at(position as usize);
    match regime {
        Regime::Homogeneous => MartingaleStep {
            p_stay: eps,
            stay: -(1.0 - eps),
            p_advance: 1.0 - eps,
            advance: eps,
        },
        Regime::Heterogeneous => MartingaleStep {
            p_stay: eps,
            stay: -1.0,
            p_advance: 1.0 - eps,
            advance: 1.0 / (1.0 - eps) - 1.0,
        },
    }
}
