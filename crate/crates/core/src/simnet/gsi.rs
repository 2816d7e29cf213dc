use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, sqrt};

use super::check_bits;
use crate::model::{ErasureProfile, StateMatrix, MAX_SLOT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GsiOptions {
    /// Completion slot to judge success against.
    pub deadline: Option<u64>,
    /// Record `Count_i[n]` for every node and slot.
    pub trace_counts: bool,
    /// Stop after this many slots even if bits are still in flight. `None`
    /// runs to completion, extending the matrix horizon as needed.
    pub max_slots: Option<u64>,
}

/// Outcome of one GSI-control trial.
#[derive(Debug, Clone, PartialEq)]
pub struct GsiTrialRecord {
    hops: usize,
    bits: usize,
    /// Hop-major `k x m`; entry `(i-1, j-1)` is `D(i, j)`, the slot in which
    /// bit `j` crossed hop `i` (both 1-indexed). `0` if it never did.
    departure: Vec<u64>,
    /// `D(k, m)` once every bit reached the destination.
    pub completion_time: Option<u64>,
    pub deadline_met: Option<bool>,
    /// Per slot, `Count_i[n]` for nodes `0..=k` (the destination's count is
    /// the number of delivered bits).
    pub counts: Option<Vec<Vec<u32>>>,
    /// Bit values in the order the destination stored them.
    pub delivered: Vec<u8>,
    /// Message index of each stored bit (instrumentation only).
    pub delivered_order: Vec<u32>,
    /// `false` for heterogeneous profiles, where the linear-regime delay
    /// prediction does not apply.
    pub within_prediction_scope: bool,
    pub slots_run: u64,
}

impl GsiTrialRecord {
    fn new(profile: &ErasureProfile, m: usize, trace: bool) -> Self {
        Self {
            hops: profile.hops(),
            bits: m,
            departure: vec![0; profile.hops() * m],
            completion_time: None,
            deadline_met: None,
            counts: trace.then(Vec::new),
            delivered: Vec::with_capacity(m),
            delivered_order: Vec::with_capacity(m),
            within_prediction_scope: profile.is_homogeneous(),
            slots_run: 0,
        }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// `D(i, j)` with 1-indexed hop and bit; `D(0, j) = D(i, 0) = 0`.
    pub fn departure(&self, hop: usize, bit: usize) -> u64 {
        if hop == 0 || bit == 0 {
            0
        } else {
            self.departure[(hop - 1) * self.bits + bit - 1]
        }
    }

    pub fn complete(&self) -> bool {
        self.completion_time.is_some()
    }

    fn set_departure(&mut self, hop: usize, bit: usize, slot: u64) {
        self.departure[(hop - 1) * self.bits + bit - 1] = slot;
    }

    fn finish(&mut self, n: u64, deadline: Option<u64>) {
        self.slots_run = n;
        if self.delivered.len() == self.bits {
            self.completion_time = Some(self.departure(self.hops, self.bits));
        }
        self.deadline_met = deadline.map(|d| self.completion_time.is_some_and(|c| c <= d));
    }
}

/// `ceil(1.1 k (1 + 2 sqrt(alpha eps) + alpha) / (1 - eps))` with
/// `alpha = m / k`.
pub fn default_gsi_deadline(k: usize, m: usize, eps: f64) -> u64 {
    let alpha = m as f64 / k as f64;
    ceil(1.1 * k as f64 * (1.0 + 2.0 * sqrt(alpha * eps) + alpha) / (1.0 - eps)) as u64
}

fn slot_limit(opts: &GsiOptions) -> u64 {
    opts.max_slots.unwrap_or(MAX_SLOT).min(MAX_SLOT)
}

fn check(profile: &ErasureProfile, bits: &[u8], states: &StateMatrix) -> Result<()> {
    check_bits(bits, bits.len())?;
    if bits.is_empty() {
        return Err(Error::param("m", "message needs at least one bit"));
    }
    if states.hops() != profile.hops() {
        return Err(Error::ScheduleMismatch {
            schedule: states.hops(),
            profile: profile.hops(),
        });
    }
    Ok(())
}

/// GSI-control queueing, simulated with a global view of every queue.
///
/// Each node with a non-empty queue sends its head; a clear hop moves the
/// head into the successor's queue at the end of the slot. Relays never
/// store a symbol sent by an empty predecessor.
pub fn run_gsi_control(
    profile: &ErasureProfile,
    bits: &[u8],
    states: &StateMatrix,
    opts: GsiOptions,
) -> Result<GsiTrialRecord> {
    check(profile, bits, states)?;
    let k = profile.hops();
    let m = bits.len();
    let mut record = GsiTrialRecord::new(profile, m, opts.trace_counts);
    let mut queues: Vec<VecDeque<u32>> = vec![VecDeque::new(); k + 1];
    queues[0].extend(0..m as u32);
    let limit = slot_limit(&opts);

    let mut n = 0;
    while record.delivered.len() < m && n < limit {
        n += 1;
        // descending: node i+1 sends from its start-of-slot queue before
        // node i's delivery lands in it
        for i in (0..k).rev() {
            if !queues[i].is_empty() && states.is_clear(i, n) {
                let bit = queues[i].pop_front().unwrap_or_default();
                record.set_departure(i + 1, bit as usize + 1, n);
                queues[i + 1].push_back(bit);
            }
        }
        while let Some(bit) = queues[k].pop_front() {
            record.delivered.push(bits[bit as usize]);
            record.delivered_order.push(bit);
        }
        if let Some(counts) = record.counts.as_mut() {
            let mut row: Vec<u32> = queues[..k].iter().map(|q| q.len() as u32).collect();
            row.push(record.delivered.len() as u32);
            counts.push(row);
        }
    }
    record.finish(n, opts.deadline);
    Ok(record)
}

/// A symbol on the wire. The provenance index is instrumentation carried
/// alongside the value; relays never read it.
#[derive(Debug, Clone, Copy)]
struct Symbol {
    value: u8,
    provenance: u32,
}

/// One relay (or the destination) seeing only local information: its own
/// queue, the predecessor's published counter from the previous slot, the
/// incoming symbol, and the one-bit feedback on its own outgoing hop.
#[derive(Debug, Default)]
struct LocalNode {
    queue: VecDeque<Symbol>,
    count: u32,
}

impl LocalNode {
    fn outgoing(&self) -> Symbol {
        self.queue.front().copied().unwrap_or(Symbol {
            value: 0,
            provenance: u32::MAX,
        })
    }

    /// Returns the symbol that left this node, if any.
    fn step(
        &mut self,
        incoming: Option<Symbol>,
        predecessor_count: u32,
        delivered: bool,
    ) -> Option<Symbol> {
        let sent = if delivered {
            self.queue.pop_front()
        } else {
            None
        };
        if let Some(sym) = incoming {
            if predecessor_count > 0 {
                self.queue.push_back(sym);
            }
        }
        self.count = self.queue.len() as u32;
        sent
    }
}

/// GSI-control realized with per-node state only, following the counter
/// update `Count_i[n] <- (Count_{i-1}[n-1], Y_{i-1}[n], S_i[n])`. Produces
/// the same record as [`run_gsi_control`].
pub fn run_gsi_local(
    profile: &ErasureProfile,
    bits: &[u8],
    states: &StateMatrix,
    opts: GsiOptions,
) -> Result<GsiTrialRecord> {
    check(profile, bits, states)?;
    let k = profile.hops();
    let m = bits.len();
    let mut record = GsiTrialRecord::new(profile, m, opts.trace_counts);
    let mut nodes: Vec<LocalNode> = (0..=k).map(|_| LocalNode::default()).collect();
    nodes[0]
        .queue
        .extend(bits.iter().enumerate().map(|(j, &value)| Symbol {
            value,
            provenance: j as u32,
        }));
    nodes[0].count = m as u32;
    let limit = slot_limit(&opts);
    let mut wire: Vec<Option<Symbol>> = vec![None; k];
    let mut published: Vec<u32> = vec![0; k + 1];

    let mut n = 0;
    while (nodes[k].count as usize) < m && n < limit {
        n += 1;
        for (i, slot) in wire.iter_mut().enumerate() {
            *slot = states.is_clear(i, n).then(|| nodes[i].outgoing());
        }
        for (i, p) in published.iter_mut().enumerate() {
            *p = nodes[i].count;
        }
        for i in 0..=k {
            let incoming = if i == 0 { None } else { wire[i - 1] };
            let predecessor = if i == 0 { 0 } else { published[i - 1] };
            let feedback = i < k && wire[i].is_some();
            if let Some(sym) = nodes[i].step(incoming, predecessor, feedback) {
                record.set_departure(i + 1, sym.provenance as usize + 1, n);
            }
        }
        if let Some(counts) = record.counts.as_mut() {
            counts.push(nodes.iter().map(|x| x.count).collect());
        }
    }
    for sym in &nodes[k].queue {
        record.delivered.push(sym.value);
        record.delivered_order.push(sym.provenance);
    }
    record.finish(n, opts.deadline);
    Ok(record)
}

/// A departure that does not equal the next clear slot after the bit became
/// eligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecursionViolation {
    pub hop: usize,
    pub bit: usize,
    pub expected: u64,
    pub actual: u64,
}

/// Checks `D(i, j) = min { n > max(D(i-1, j), D(i, j-1)) : hop i-1 clear in n }`
/// for every hop and bit of a complete record.
pub fn verify_departure_recursion(
    record: &GsiTrialRecord,
    states: &StateMatrix,
) -> core::result::Result<(), RecursionViolation> {
    for hop in 1..=record.hops() {
        for bit in 1..=record.bits() {
            let ready = record
                .departure(hop - 1, bit)
                .max(record.departure(hop, bit - 1));
            let expected = states.next_clear_after(hop - 1, ready);
            let actual = record.departure(hop, bit);
            if expected != actual {
                return Err(RecursionViolation {
                    hop,
                    bit,
                    expected,
                    actual,
                });
            }
        }
    }
    Ok(())
}
