use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_bits, Schedule};
use crate::model::{ErasureProfile, StateMatrix};
use crate::wavefront::{stream_events, SuccessEvents};
use crate::Result;

/// Extra instrumentation to keep in a [`TrialRecord`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    /// Keep per-slot network front positions (memory `O(m * tau)`).
    pub fronts: bool,
}

/// Outcome of one bit-separation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// `b̂_j`: the destination's last non-erased reception at `tau_j`.
    pub decoded_bits: Vec<u8>,
    /// `b̂_j == b_j`.
    pub decoded: Vec<bool>,
    /// First slot at which a symbol carrying bit `j` reaches node `k`.
    pub delivery_time: Vec<Option<u64>>,
    /// Success and escape events of the coupled wave fronts on the same
    /// channel realization.
    pub events: SuccessEvents,
    /// Some bit disappeared from the network at or before its decode slot.
    pub collision_detected: bool,
    /// Slot at which no node held bit `j` any more.
    pub lost_at: Vec<Option<u64>>,
    /// `tau_{m-1}`, the slot at which the last bit is decoded.
    pub completion_time: u64,
    /// Per bit, the largest node index that has held that bit, for slots
    /// `j l_sep ..= tau_j`. Only with [`RecordOptions::fronts`].
    pub network_fronts: Option<Vec<Vec<u32>>>,
}

impl TrialRecord {
    pub fn all_correct(&self) -> bool {
        self.decoded.iter().all(|&d| d)
    }

    /// `∩ A_j` held on the coupled fronts.
    pub fn success_event_held(&self) -> bool {
        self.events.overall
    }

    pub fn escape_events(&self) -> &[bool] {
        &self.events.escape
    }
}

const NONE: u32 = u32::MAX;

/// Provenance bookkeeping shared by both engines. Tags identify which
/// message bit a symbol was copied from; decoding never looks at them.
struct Recorder<'a> {
    schedule: &'a Schedule,
    bits: &'a [u8],
    hops: u32,
    reached: Vec<u32>,
    lost_at: Vec<Option<u64>>,
    delivery: Vec<Option<u64>>,
    decoded_bits: Vec<u8>,
    fronts: Option<Vec<Vec<u32>>>,
}

impl<'a> Recorder<'a> {
    fn new(schedule: &'a Schedule, bits: &'a [u8], opts: RecordOptions) -> Self {
        let m = schedule.m();
        let fronts = opts.fronts.then(|| {
            (0..m)
                .map(|j| {
                    let len = (schedule.tau(j) - schedule.start(j) + 1) as usize;
                    let mut v = Vec::with_capacity(len);
                    v.push(0);
                    v
                })
                .collect()
        });
        Self {
            schedule,
            bits,
            hops: schedule.k() as u32,
            reached: vec![0; m],
            lost_at: vec![None; m],
            delivery: vec![None; m],
            decoded_bits: vec![0; m],
            fronts,
        }
    }

    /// `furthest[j]` is the largest node currently holding bit `j`, `NONE` if
    /// absent, for every `j <= source`.
    fn end_slot(&mut self, n: u64, source: usize, furthest: &[u32], dest_value: u8) {
        for j in 0..=source {
            let pos = furthest[j];
            if pos == NONE {
                if self.lost_at[j].is_none() {
                    self.lost_at[j] = Some(n);
                }
            } else {
                self.reached[j] = self.reached[j].max(pos);
                if pos == self.hops && self.delivery[j].is_none() {
                    self.delivery[j] = Some(n);
                }
            }
            if let Some(fronts) = self.fronts.as_mut() {
                if n <= self.schedule.tau(j) {
                    fronts[j].push(self.reached[j]);
                }
            }
        }
        for j in 0..self.schedule.m() {
            if self.schedule.tau(j) == n {
                self.decoded_bits[j] = dest_value;
            }
        }
    }

    fn finish(self, events: SuccessEvents) -> TrialRecord {
        let decoded = self
            .decoded_bits
            .iter()
            .zip(self.bits)
            .map(|(a, b)| a == b)
            .collect();
        let collision_detected = self
            .lost_at
            .iter()
            .enumerate()
            .any(|(j, lost)| lost.is_some_and(|n| n <= self.schedule.tau(j)));
        TrialRecord {
            decoded_bits: self.decoded_bits,
            decoded,
            delivery_time: self.delivery,
            events,
            collision_detected,
            lost_at: self.lost_at,
            completion_time: self.schedule.horizon(),
            network_fronts: self.fronts,
        }
    }
}

fn prepare(
    profile: &ErasureProfile,
    bits: &[u8],
    schedule: &Schedule,
    states: &StateMatrix,
) -> Result<()> {
    schedule.check(profile)?;
    check_bits(bits, schedule.m())?;
    states.require(schedule.horizon())
}

/// Bit-separation scheme with forward-the-last-received relays, simulated
/// node by node (`O(k)` per slot).
pub fn run_bit_separation(
    profile: &ErasureProfile,
    bits: &[u8],
    schedule: &Schedule,
    states: &StateMatrix,
    opts: RecordOptions,
) -> Result<TrialRecord> {
    prepare(profile, bits, schedule, states)?;
    let k = profile.hops();
    let mut value = vec![0u8; k + 1];
    let mut tag = vec![NONE; k + 1];
    let mut furthest = vec![NONE; schedule.m()];
    let mut rec = Recorder::new(schedule, bits, opts);

    for n in 1..=schedule.horizon() {
        let source = schedule.source_bit(n);
        value[0] = bits[source];
        tag[0] = source as u32;
        for i in (0..k).rev() {
            if states.is_clear(i, n) {
                value[i + 1] = value[i];
                tag[i + 1] = tag[i];
            }
        }
        furthest[..=source].fill(NONE);
        for (node, &t) in tag.iter().enumerate() {
            if t != NONE {
                furthest[t as usize] = node as u32;
            }
        }
        rec.end_slot(n, source, &furthest, value[k]);
    }
    Ok(rec.finish(stream_events(profile, schedule, states)?))
}

#[derive(Debug, Clone, Copy)]
struct Block {
    tag: u32,
    value: u8,
    /// Last node of the block; blocks tile `0..=k` from the source outward.
    end: u32,
}

/// Same scheme, simulated on the run-length form of the node states.
///
/// Relays copy their predecessor, so node contents form contiguous blocks of
/// equal provenance. Within a block a reception changes nothing; only the
/// node just past a block's end can change, and it does so exactly when the
/// hop leaving the block's end is clear. The result is identical to
/// [`run_bit_separation`] at `O(m)` cost per slot.
pub fn run_bit_separation_blocks(
    profile: &ErasureProfile,
    bits: &[u8],
    schedule: &Schedule,
    states: &StateMatrix,
    opts: RecordOptions,
) -> Result<TrialRecord> {
    prepare(profile, bits, schedule, states)?;
    let k = profile.hops() as u32;
    let mut blocks: VecDeque<Block> = VecDeque::with_capacity(schedule.m() + 1);
    blocks.push_back(Block {
        tag: 0,
        value: bits[0],
        end: 0,
    });
    blocks.push_back(Block {
        tag: NONE,
        value: 0,
        end: k,
    });
    let mut moves: Vec<bool> = Vec::with_capacity(schedule.m() + 1);
    let mut furthest = vec![NONE; schedule.m()];
    let mut rec = Recorder::new(schedule, bits, opts);

    for n in 1..=schedule.horizon() {
        let source = schedule.source_bit(n);
        if blocks[0].tag != source as u32 {
            // the source node switches; the old head block loses node 0
            if blocks[0].end == 0 {
                blocks.pop_front();
            }
            blocks.push_front(Block {
                tag: source as u32,
                value: bits[source],
                end: 0,
            });
        }
        moves.clear();
        moves.extend(
            blocks
                .iter()
                .take(blocks.len() - 1)
                .map(|b| states.is_clear(b.end as usize, n)),
        );
        for (b, &mv) in blocks.iter_mut().zip(&moves) {
            b.end += mv as u32;
        }
        let mut prev_end = blocks[0].end;
        let mut idx = 1;
        while idx < blocks.len() {
            if blocks[idx].end == prev_end {
                blocks.remove(idx);
            } else {
                prev_end = blocks[idx].end;
                idx += 1;
            }
        }

        furthest[..=source].fill(NONE);
        for b in &blocks {
            if b.tag != NONE {
                furthest[b.tag as usize] = b.end;
            }
        }
        let dest = blocks[blocks.len() - 1];
        rec.end_slot(n, source, &furthest, dest.value);
    }
    Ok(rec.finish(stream_events(profile, schedule, states)?))
}
