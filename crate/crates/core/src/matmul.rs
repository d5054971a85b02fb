//! 3D-style matrix multiplication that starts and ends in a 2D cyclic
//! distribution.
//!
//! The grid of p ranks is treated as p1 x p1 x p2 (p = p1^2 * p2): the left
//! operand is replicated into p1 x p1 cyclic panels (one allgather over p2
//! ranks), the right operand is reshuffled into row-class/column-group
//! panels replicated over the first axis (two transposes plus an allgather
//! over p1 ranks), every rank multiplies its panel pair, and the partial
//! products are combined with a scatter-reduce over p1 ranks and a final
//! transpose back to the cyclic layout.
//!
//! Charges are the closed-form per-participant costs of those supersteps;
//! they depend on dimensions and shapes only, never on values. A
//! lower-triangular left operand moves and multiplies only its nonzero
//! staircase, which makes the replication and flop charges differ by
//! whether a panel's row class is at least its column class.

use crate::costs;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::layout::{DistMatrix, Layout, MatShape};
use crate::machine::CostVector;
use crate::matrix::Matrix;
use crate::sim::Simulator;

/// Validated multiplication parameters on a 2D grid.
#[derive(Debug, Clone, Copy)]
pub struct MmPlan {
    pub p: usize,
    pub p1: usize,
    pub p2: usize,
    /// Transpose-group size: the larger grid dimension (sqrt(p) on squares).
    pub tgroup: usize,
}

impl MmPlan {
    pub fn new(grid: &Grid, p1: usize) -> Result<Self> {
        let dims = grid.dims();
        if dims.len() != 2 {
            return Err(Error::Config(format!("mm needs a 2D grid, got {dims:?}")));
        }
        let (gr, gc) = (dims[0], dims[1]);
        let p = gr * gc;
        if p1 == 0 || gr % p1 != 0 || gc % p1 != 0 {
            return Err(Error::Config(format!(
                "mm parameter p1={p1} must divide both grid dimensions {gr}x{gc}"
            )));
        }
        if p % (p1 * p1) != 0 {
            return Err(Error::Config(format!(
                "mm needs p1^2 | p, got p1={p1}, p={p}"
            )));
        }
        Ok(Self { p, p1, p2: p / (p1 * p1), tgroup: gr.max(gc) })
    }
}

/// Indices `< extent` congruent to `cls` modulo `classes`.
pub fn class_indices(extent: usize, classes: usize, cls: usize) -> Vec<usize> {
    (cls..extent).step_by(classes).collect()
}

/// B = A * X with both operands cyclic on the same 2D grid; the result is
/// dense, in X's layout. `scale` multiplies every output entry (the
/// recursive inversion calls with -1).
pub fn mm(
    sim: &mut Simulator,
    a: &DistMatrix,
    x: &DistMatrix,
    p1: usize,
    scale: f64,
) -> Result<DistMatrix> {
    if a.cols() != x.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let grid = a.layout().owner().clone();
    if grid.ranks() != x.layout().owner().ranks() || grid.dims() != x.layout().owner().dims() {
        return Err(Error::Config("mm operands must share one grid".into()));
    }
    let plan = MmPlan::new(&grid, p1)?;
    let (na, ma, k) = (a.rows(), a.cols(), x.cols());
    let a_tri = a.shape() == MatShape::LowerTriangular;

    // Line 2: replicate A into p1 x p1 cyclic panels, allgather over p2.
    let mut a_panels: Vec<Matrix> = Vec::with_capacity(plan.p1 * plan.p1);
    for x1 in 0..plan.p1 {
        for y1 in 0..plan.p1 {
            let rows = class_indices(na, plan.p1, x1);
            let cols = class_indices(ma, plan.p1, y1);
            let mut panel = Matrix::zeros(rows.len(), cols.len());
            for (li, &i) in rows.iter().enumerate() {
                for (lj, &j) in cols.iter().enumerate() {
                    panel.set(li, lj, a.get(i, j));
                }
            }
            a_panels.push(panel);
            let words = a_panel_words(na, ma, plan.p1, x1, y1, a_tri);
            sim.charge_ranks(
                group_ranks(&grid, plan.p1, x1, y1),
                costs::allgather(words, plan.p2),
            )?;
        }
    }

    // Lines 3-5: reshuffle X into (row-class, column-group) panels
    // replicated over the first grid axis. Charged as the rectangular-grid
    // transpose, the square transpose, and the allgather over p1.
    let xw = ma as f64 * k as f64;
    sim.charge_grid(&grid, costs::alltoall(xw / plan.p as f64, plan.tgroup))?;
    sim.charge_grid(&grid, costs::pairwise(xw / plan.p as f64, plan.p1 > 1))?;
    sim.charge_grid(
        &grid,
        costs::allgather(xw / (plan.p1 * plan.p2) as f64, plan.p1),
    )?;
    let mut x_panels: Vec<Matrix> = Vec::with_capacity(plan.p1 * plan.p2);
    for y1 in 0..plan.p1 {
        for g in 0..plan.p2 {
            let rows = class_indices(ma, plan.p1, y1);
            let cols = class_indices(k, plan.p2, g);
            let mut panel = Matrix::zeros(rows.len(), cols.len());
            for (li, &i) in rows.iter().enumerate() {
                for (lj, &j) in cols.iter().enumerate() {
                    panel.set(li, lj, x.get(i, j));
                }
            }
            x_panels.push(panel);
        }
    }

    // Line 6: local panel products; flops follow the left operand's stored
    // nonzeros. Partials for output row-class x1 and column group g, one per
    // contraction class y1.
    let kf = k as f64;
    for x1 in 0..plan.p1 {
        for y1 in 0..plan.p1 {
            let nz = a_panel_words(na, ma, plan.p1, x1, y1, a_tri);
            sim.charge_ranks(
                group_ranks(&grid, plan.p1, x1, y1),
                CostVector::new(0.0, 0.0, nz * kf / plan.p2 as f64),
            )?;
        }
    }
    let mut sums: Vec<Matrix> = Vec::with_capacity(plan.p1 * plan.p2);
    for x1 in 0..plan.p1 {
        for g in 0..plan.p2 {
            let rows = class_indices(na, plan.p1, x1).len();
            let cols = class_indices(k, plan.p2, g).len();
            let mut acc = Matrix::zeros(rows, cols);
            for y1 in 0..plan.p1 {
                let pa = &a_panels[x1 * plan.p1 + y1];
                let px = &x_panels[y1 * plan.p2 + g];
                for i in 0..rows {
                    for t in 0..pa.cols() {
                        let av = pa.get(i, t);
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..cols {
                            acc.set(i, j, acc.get(i, j) + av * px.get(t, j));
                        }
                    }
                }
            }
            sums.push(acc);
        }
    }

    // Line 7: scatter-reduce of the partials over p1 ranks.
    let bw = na as f64 * kf;
    sim.charge_grid(
        &grid,
        costs::reduce_scatter(bw / (plan.p1 * plan.p2) as f64, plan.p1),
    )?;
    // Line 8: transpose back to the cyclic layout.
    sim.charge_grid(&grid, costs::alltoall(bw / plan.p as f64, plan.tgroup))?;

    let layout = Layout::cyclic(grid.clone())?;
    let mut b = DistMatrix::zeros(na, k, MatShape::Dense, layout)?;
    for i in 0..na {
        let x1 = i % plan.p1;
        let li = i / plan.p1;
        for j in 0..k {
            let g = j % plan.p2;
            let lj = j / plan.p2;
            let v = sums[x1 * plan.p2 + g].get(li, lj);
            b.set(i, j, if scale == 1.0 { v } else { scale * v });
        }
    }
    Ok(b)
}

/// Words of the replicated left-operand panel for row class x1, column
/// class y1.
pub fn a_panel_words(na: usize, ma: usize, p1: usize, x1: usize, y1: usize, tri: bool) -> f64 {
    if tri {
        if x1 >= y1 {
            costs::tri_tile_words_hi(na as f64, p1)
        } else {
            costs::tri_tile_words_lo(na as f64, p1)
        }
    } else {
        (na as f64 / p1 as f64) * (ma as f64 / p1 as f64)
    }
}

/// Ranks of a 2D grid whose coordinates are congruent to the given classes
/// modulo p1.
fn group_ranks(grid: &Grid, p1: usize, row_cls: usize, col_cls: usize) -> Vec<crate::machine::Rank> {
    let (gr, gc) = (grid.dims()[0], grid.dims()[1]);
    let rows = class_indices(gr, p1, row_cls);
    let cols = class_indices(gc, p1, col_cls);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            out.push(grid.rank_at(&[r, c]));
        }
    }
    out
}

/// Picks the feasible p1 for a grid closest (in log scale) to the ideal
/// real value; ties prefer the smaller candidate.
pub fn round_p1(grid_rows: usize, grid_cols: usize, ideal: f64) -> usize {
    let p = grid_rows * grid_cols;
    let mut best: Option<(f64, usize)> = None;
    for d in 1..=grid_rows.min(grid_cols) {
        if grid_rows % d != 0 || grid_cols % d != 0 || p % (d * d) != 0 {
            continue;
        }
        let dist = ((d as f64).ln() - ideal.max(1.0).ln()).abs();
        let better = match best {
            None => true,
            Some((bd, bv)) => dist < bd - 1e-12 || (dist < bd + 1e-12 && d < bv),
        };
        if better {
            best = Some((dist, d));
        }
    }
    best.map(|(_, d)| d).unwrap_or(1)
}
