//! Adaptive tensor-cell integration over a chart's parameter box.
//!
//! Each cell carries a Gauss value and an error estimate obtained by
//! comparing it against the sum over its 2^d children. Refinement is driven
//! by a worst-cell heap, with one override: cells whose image touches a
//! declared singular point are split unconditionally until their physical
//! radius drops below the grading floor. Midpoint splitting therefore builds
//! the geometric annuli that resolve power-law and log singularities.
//!
//! The whole engine is sequential and allocation-conscious; results are
//! bit-reproducible for a fixed spec because the final value is a pairwise
//! sum over leaf cells in creation order.

use smallvec::SmallVec;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::chart::Chart;
use super::{QuadratureError, QuadratureSpec};
use crate::trialfn::Support;
use crate::util::{gauss_legendre, pairwise_sum};

pub(crate) struct EngineOutput {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
}

struct HeapItem {
    priority: f64,
    id: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority && self.id == other.id
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Cell {
    lo: SmallVec<[f64; 3]>,
    hi: SmallVec<[f64; 3]>,
    value: f64,
    err: f64,
    child_values: SmallVec<[f64; 8]>,
    must_split: bool,
    alive: bool,
    zero: bool,
}

pub(crate) struct Engine<'a> {
    chart: &'a Chart,
    f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    graded: &'a [Vec<f64>],
    support: &'a Support,
    spec: &'a QuadratureSpec,
    nodes: std::sync::Arc<(Vec<f64>, Vec<f64>)>,
    dim: usize,
    evals: std::cell::Cell<usize>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        chart: &'a Chart,
        f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        graded: &'a [Vec<f64>],
        support: &'a Support,
        spec: &'a QuadratureSpec,
    ) -> Self {
        let dim = chart.dim();
        let order = if dim <= 2 { 8 } else { 6 };
        Engine {
            chart,
            f,
            graded,
            support,
            spec,
            nodes: gauss_legendre(order),
            dim,
            evals: std::cell::Cell::new(0),
        }
    }

    /// Tensor Gauss rule over one parameter sub-box.
    fn gauss_cell(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let (xs, ws) = &*self.nodes;
        let p = xs.len();
        let d = self.dim;
        let mut param: SmallVec<[f64; 3]> = smallvec::smallvec![0.0; d];
        let mut x: SmallVec<[f64; 3]> = smallvec::smallvec![0.0; d];
        let mut half: SmallVec<[f64; 3]> = smallvec::smallvec![0.0; d];
        let mut mid: SmallVec<[f64; 3]> = smallvec::smallvec![0.0; d];
        let mut vol_scale = 1.0;
        for k in 0..d {
            half[k] = 0.5 * (hi[k] - lo[k]);
            mid[k] = 0.5 * (hi[k] + lo[k]);
            vol_scale *= half[k];
        }
        let total_points = p.pow(d as u32);
        let mut acc = 0.0;
        for flat in 0..total_points {
            let mut rest = flat;
            let mut w = 1.0;
            for k in 0..d {
                let i = rest % p;
                rest /= p;
                param[k] = mid[k] + half[k] * xs[i];
                w *= ws[i];
            }
            self.chart.map(&param, &mut x);
            let mut v = (self.f)(&x) * self.chart.weight(&param);
            // a node landing exactly on an integrable singularity produces a
            // non-finite sample on a measure-zero set; drop it
            if !v.is_finite() {
                v = 0.0;
            }
            acc += w * v;
        }
        self.evals.set(self.evals.get() + total_points);
        acc * vol_scale
    }

    fn is_zero_cell(&self, lo: &[f64], hi: &[f64]) -> bool {
        let (center, radius) = self.chart.enclosing_ball(lo, hi);
        if let Some(balls) = &self.support.within {
            let misses_all = balls
                .iter()
                .all(|(c, r)| crate::util::dist(&center, c) > radius + *r);
            if misses_all {
                return true;
            }
        }
        self.support
            .zero_on
            .iter()
            .any(|(c, r)| crate::util::dist(&center, c) + radius <= *r)
    }

    fn make_cell(&self, lo: SmallVec<[f64; 3]>, hi: SmallVec<[f64; 3]>, coarse: Option<f64>) -> Cell {
        if self.is_zero_cell(&lo, &hi) {
            return Cell {
                lo,
                hi,
                value: 0.0,
                err: 0.0,
                child_values: SmallVec::new(),
                must_split: false,
                alive: true,
                zero: true,
            };
        }
        let coarse = coarse.unwrap_or_else(|| self.gauss_cell(&lo, &hi));
        let mut child_values: SmallVec<[f64; 8]> = SmallVec::new();
        let mut fine = 0.0;
        for child in 0..(1usize << self.dim) {
            let (clo, chi) = child_box(&lo, &hi, child);
            let v = self.gauss_cell(&clo, &chi);
            fine += v;
            child_values.push(v);
        }
        let err = (fine - coarse).abs();
        let (center, radius) = self.chart.enclosing_ball(&lo, &hi);
        let mut must_split = false;
        if radius > self.spec.inner_radius {
            for g in self.graded {
                if crate::util::dist(&center, g) <= 2.0 * radius {
                    // stop forcing once the cell resolves a declared zero hole
                    let hole = self.support.hole_radius_at(g).unwrap_or(0.0);
                    if radius > 0.25 * hole.max(self.spec.inner_radius) {
                        must_split = true;
                    }
                    break;
                }
            }
        }
        Cell {
            lo,
            hi,
            value: fine,
            err,
            child_values,
            must_split,
            alive: true,
            zero: false,
        }
    }

    pub(crate) fn run(&self) -> Result<EngineOutput, QuadratureError> {
        let (lo, hi) = self.chart.param_box();
        let breaks = self.chart.initial_breaks(self.graded, self.spec.grading_ratio);

        // initial tensor grid from the seed breaks
        let mut axis_points: Vec<Vec<f64>> = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let mut pts = vec![lo[k]];
            pts.extend(breaks[k].iter().copied());
            pts.push(hi[k]);
            axis_points.push(pts);
        }
        let mut cells: Vec<Cell> = Vec::new();
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        let mut index: SmallVec<[usize; 3]> = smallvec::smallvec![0; self.dim];
        'outer: loop {
            let mut clo: SmallVec<[f64; 3]> = SmallVec::new();
            let mut chi: SmallVec<[f64; 3]> = SmallVec::new();
            for k in 0..self.dim {
                clo.push(axis_points[k][index[k]]);
                chi.push(axis_points[k][index[k] + 1]);
            }
            let cell = self.make_cell(clo, chi, None);
            push_heap_entry(&mut heap, &cell, cells.len());
            cells.push(cell);
            // advance the mixed-radix counter
            for k in 0..self.dim {
                index[k] += 1;
                if index[k] + 1 < axis_points[k].len() {
                    continue 'outer;
                }
                index[k] = 0;
            }
            break;
        }

        let mut total_value: f64 = cells.iter().map(|c| c.value).sum();
        let mut total_err: f64 = cells.iter().map(|c| c.err).sum();
        let mut total_mass: f64 = cells.iter().map(|c| c.value.abs()).sum();
        let mut pending_forced = cells.iter().filter(|c| c.must_split).count();

        let min_width = 1e-13;
        // stall guard: integrals that cancel to roundoff can never meet a
        // relative target, so give up once refinement stops paying
        let mut best_err = f64::INFINITY;
        let mut stalled = 0usize;
        loop {
            // the mass term keeps heavily cancelling integrands from spinning:
            // beyond a 10^3 cancellation factor the mass sets the scale
            let target = (self.spec.rel_tol * total_value.abs())
                .max(self.spec.rel_tol * 1e-3 * total_mass)
                .max(1e-300);
            if pending_forced == 0 && total_err <= target {
                break;
            }
            if pending_forced == 0 {
                if total_err < best_err * 0.99 {
                    best_err = total_err;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled > 800 {
                        break;
                    }
                }
            }
            let Some(top) = heap.pop() else {
                break; // nothing left to refine; report the honest error
            };
            let id = top.id;
            if !cells[id].alive {
                continue;
            }
            if !cells[id].must_split && cells[id].err <= 0.0 {
                continue;
            }
            if cells.len() + (1 << self.dim) > self.spec.max_cells {
                return Err(QuadratureError::BudgetExceeded {
                    value: total_value,
                    error: total_err,
                    cells: cells.len(),
                });
            }
            // refuse to split sub-atomic cells; their error stays counted
            let too_small = cells[id]
                .lo
                .iter()
                .zip(&cells[id].hi)
                .zip(lo.iter().zip(&hi))
                .all(|((a, b), (bl, bh))| (b - a) < min_width * (bh - bl));
            if too_small {
                if cells[id].must_split {
                    cells[id].must_split = false;
                    pending_forced -= 1;
                }
                continue;
            }

            // split
            cells[id].alive = false;
            if cells[id].must_split {
                pending_forced -= 1;
            }
            total_value -= cells[id].value;
            total_err -= cells[id].err;
            total_mass -= cells[id].value.abs();
            let parent_lo = cells[id].lo.clone();
            let parent_hi = cells[id].hi.clone();
            let child_values = cells[id].child_values.clone();
            for child in 0..(1usize << self.dim) {
                let (clo, chi) = child_box(&parent_lo, &parent_hi, child);
                let coarse = child_values.get(child).copied();
                let cell = self.make_cell(clo, chi, coarse);
                total_value += cell.value;
                total_err += cell.err;
                total_mass += cell.value.abs();
                if cell.must_split {
                    pending_forced += 1;
                }
                push_heap_entry(&mut heap, &cell, cells.len());
                cells.push(cell);
            }
        }

        // deterministic final reduction over leaves in creation order
        let leaf_values: Vec<f64> = cells
            .iter()
            .filter(|c| c.alive)
            .map(|c| c.value)
            .collect();
        let leaf_errors: Vec<f64> = cells.iter().filter(|c| c.alive).map(|c| c.err).collect();
        Ok(EngineOutput {
            value: pairwise_sum(&leaf_values),
            error: pairwise_sum(&leaf_errors),
            cells: leaf_values.len(),
        })
    }
}

fn push_heap_entry(heap: &mut BinaryHeap<HeapItem>, cell: &Cell, id: usize) {
    if cell.zero {
        return;
    }
    let priority = if cell.must_split {
        f64::INFINITY
    } else if cell.err > 0.0 {
        cell.err
    } else {
        return;
    };
    heap.push(HeapItem { priority, id });
}

fn child_box(
    lo: &[f64],
    hi: &[f64],
    child: usize,
) -> (SmallVec<[f64; 3]>, SmallVec<[f64; 3]>) {
    let mut clo: SmallVec<[f64; 3]> = SmallVec::new();
    let mut chi: SmallVec<[f64; 3]> = SmallVec::new();
    for k in 0..lo.len() {
        let mid = 0.5 * (lo[k] + hi[k]);
        if child & (1 << k) == 0 {
            clo.push(lo[k]);
            chi.push(mid);
        } else {
            clo.push(mid);
            chi.push(hi[k]);
        }
    }
    (clo, chi)
}
