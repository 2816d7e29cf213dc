//! Last-passage percolation on the `(hop, bit)` grid.
//!
//! With service times `w(i, j) >= 1`, the passage times
//! `G(i, j) = max(G(i-1, j), G(i, j-1)) + w(i, j)` (zero on the boundary)
//! are the departure times of `m` customers through `k` FIFO stations. Under
//! GSI-control the service time of bit `j` at hop `i` is the wait for the
//! next clear slot, which is `Geom(1 - eps_i)`.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use libm::sqrt;
use rand::Rng;

use crate::model::geometric_gap;
use crate::simnet::GsiTrialRecord;
use crate::{Error, Result};

/// A `k x m` integer matrix indexed from 1 in both axes; row `i` is hop `i`,
/// column `j` is bit `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    hops: usize,
    bits: usize,
    cells: Vec<u64>,
}

impl Grid {
    pub fn new(hops: usize, bits: usize, cells: Vec<u64>) -> Result<Self> {
        if hops == 0 || bits == 0 {
            return Err(Error::param("grid", "needs at least one hop and one bit"));
        }
        if cells.len() != hops * bits {
            return Err(Error::param("grid", "cell count must equal hops * bits"));
        }
        Ok(Self { hops, bits, cells })
    }

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let bits = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != bits) {
            return Err(Error::param("grid", "rows must have equal length"));
        }
        Self::new(rows.len(), bits, rows.concat())
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Entry `(i, j)`, 1-indexed; `0` on the boundary `i = 0` or `j = 0`.
    pub fn get(&self, i: usize, j: usize) -> u64 {
        if i == 0 || j == 0 {
            0
        } else {
            self.cells[(i - 1) * self.bits + j - 1]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: u64) {
        self.cells[(i - 1) * self.bits + j - 1] = v;
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    /// Bottom-right entry.
    pub fn last(&self) -> u64 {
        self.get(self.hops, self.bits)
    }
}

fn check_weights(w: &Grid) -> Result<()> {
    if w.cells.contains(&0) {
        Err(Error::param("weights", "service times must be at least 1"))
    } else {
        Ok(())
    }
}

/// Full passage-time matrix.
pub fn lpp_passage(weights: &Grid) -> Result<Grid> {
    check_weights(weights)?;
    let mut g = weights.clone();
    for i in 1..=weights.hops {
        for j in 1..=weights.bits {
            let v = g.get(i - 1, j).max(g.get(i, j - 1)) + weights.get(i, j);
            g.set(i, j, v);
        }
    }
    Ok(g)
}

/// `G(k, m)` with one row of memory.
pub fn lpp_last_passage(weights: &Grid) -> Result<u64> {
    check_weights(weights)?;
    let mut row = vec![0u64; weights.bits + 1];
    for i in 1..=weights.hops {
        for j in 1..=weights.bits {
            row[j] = row[j].max(row[j - 1]) + weights.get(i, j);
        }
    }
    Ok(row[weights.bits])
}

/// Tandem of `k` single-server FIFO stations fed by `m` customers waiting at
/// the first, simulated by processing departures in time order. Returns the
/// departure matrix `D(i, j)`.
pub fn queue_from_services(weights: &Grid) -> Result<Grid> {
    check_weights(weights)?;
    let (k, m) = (weights.hops, weights.bits);
    let mut departures = Grid {
        hops: k,
        bits: m,
        cells: vec![0; k * m],
    };
    let mut waiting: Vec<VecDeque<usize>> = vec![VecDeque::new(); k + 1];
    let mut busy = vec![false; k + 1];
    // (time, station, customer)
    let mut events: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();

    waiting[1].extend(1..=m);
    let start = |station: usize,
                 now: u64,
                 waiting: &mut Vec<VecDeque<usize>>,
                 busy: &mut Vec<bool>,
                 events: &mut BinaryHeap<Reverse<(u64, usize, usize)>>| {
        if busy[station] {
            return;
        }
        if let Some(c) = waiting[station].pop_front() {
            busy[station] = true;
            events.push(Reverse((now + weights.get(station, c), station, c)));
        }
    };
    start(1, 0, &mut waiting, &mut busy, &mut events);

    while let Some(Reverse((t, station, customer))) = events.pop() {
        departures.set(station, customer, t);
        busy[station] = false;
        start(station, t, &mut waiting, &mut busy, &mut events);
        if station < k {
            waiting[station + 1].push_back(customer);
            start(station + 1, t, &mut waiting, &mut busy, &mut events);
        }
    }
    Ok(departures)
}

/// Independent `Geom(1 - eps)` service times.
pub fn geometric_weights<R: Rng + ?Sized>(
    hops: usize,
    bits: usize,
    eps: f64,
    rng: &mut R,
) -> Result<Grid> {
    let cells = (0..hops * bits)
        .map(|_| geometric_gap(rng, 1.0 - eps))
        .collect::<Result<Vec<_>>>()?;
    Grid::new(hops, bits, cells)
}

/// Service times realized by a GSI-control trial:
/// `w(i, j) = D(i, j) - max(D(i-1, j), D(i, j-1))`.
pub fn gsi_service_weights(record: &GsiTrialRecord) -> Result<Grid> {
    if !record.complete() {
        return Err(Error::param(
            "record",
            "GSI trial did not deliver every bit",
        ));
    }
    let (k, m) = (record.hops(), record.bits());
    let mut w = Grid {
        hops: k,
        bits: m,
        cells: vec![0; k * m],
    };
    for i in 1..=k {
        for j in 1..=m {
            let ready = record.departure(i - 1, j).max(record.departure(i, j - 1));
            w.set(i, j, record.departure(i, j) - ready);
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPrediction {
    /// `(1 + 2 sqrt(alpha eps) + alpha) / (1 - eps)`.
    pub delay_per_hop: f64,
    pub velocity: f64,
}

/// Delay per hop of GSI-control with `m = alpha k` bits as `k` grows.
pub fn linear_regime_prediction(eps: f64, alpha: f64) -> Result<LinearPrediction> {
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::InvalidErasure { hop: 0, value: eps });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be positive"));
    }
    let delay = (1.0 + 2.0 * sqrt(alpha * eps) + alpha) / (1.0 - eps);
    Ok(LinearPrediction {
        delay_per_hop: delay,
        velocity: 1.0 / delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RandomnessSpec;

    #[test]
    fn unit_weights_form_a_pipeline() {
        let w = Grid::new(4, 3, vec![1; 12]).unwrap();
        let g = lpp_passage(&w).unwrap();
        for i in 1..=4 {
            for j in 1..=3 {
                assert_eq!(g.get(i, j), (i + j - 1) as u64);
            }
        }
        let d = queue_from_services(&Grid::new(3, 2, vec![1; 6]).unwrap()).unwrap();
        assert_eq!(d.get(3, 2), 4);
    }

    #[test]
    fn two_by_two_by_hand() {
        let w = Grid::from_rows(&[&[1, 2], &[3, 1]]).unwrap();
        let g = lpp_passage(&w).unwrap();
        assert_eq!(g.cells(), &[1, 3, 4, 5]);
        assert_eq!(lpp_last_passage(&w).unwrap(), 5);
        assert_eq!(queue_from_services(&w).unwrap(), g);
    }

    #[test]
    fn queue_matches_recursion_on_random_grids() {
        let mut rng = RandomnessSpec::new(21, 0).rng();
        for _ in 0..300 {
            let k = rng.random_range(1..=8);
            let m = rng.random_range(1..=8);
            let w = geometric_weights(k, m, 0.6, &mut rng).unwrap();
            let g = lpp_passage(&w).unwrap();
            assert_eq!(queue_from_services(&w).unwrap(), g);
            assert_eq!(lpp_last_passage(&w).unwrap(), g.last());
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 1, vec![]).is_err());
        assert!(Grid::new(2, 2, vec![1; 3]).is_err());
        assert!(Grid::from_rows(&[&[1, 2], &[1]]).is_err());
        assert!(lpp_passage(&Grid::new(1, 2, vec![1, 0]).unwrap()).is_err());
    }

    #[test]
    fn predictions() {
        assert_eq!(
            linear_regime_prediction(0.5, 0.5).unwrap().delay_per_hop,
            5.0
        );
        assert_eq!(
            linear_regime_prediction(0.0, 0.25).unwrap().delay_per_hop,
            1.25
        );
        let small = linear_regime_prediction(0.3, 1e-12).unwrap();
        assert!((small.delay_per_hop - 1.0 / 0.7).abs() < 1e-5);
        assert!(linear_regime_prediction(1.0, 0.5).is_err());
        assert!(linear_regime_prediction(0.5, 0.0).is_err());
    }
}
