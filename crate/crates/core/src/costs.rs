//! Closed-form per-participant costs of the collective operations.
//!
//! Both the simulator (when it charges a superstep) and the analytic model
//! (when it unrolls a recurrence) evaluate these same functions, so agreement
//! between the two is an identity over the shared constants rather than an
//! approximate calibration.
//!
//! `n` is the total payload in words unless noted; `p` is the participant
//! count. Butterfly schedules give `log2 p` rounds for power-of-two `p`;
//! other counts charge `ceil(log2 p)` rounds.

use crate::machine::{step, CostVector};

/// ceil(log2 p) as f64; 0 for p <= 1.
pub fn ceil_log2(p: usize) -> f64 {
    if p <= 1 {
        0.0
    } else {
        (usize::BITS - (p - 1).leading_zeros()) as f64
    }
}

fn step_p(p: usize) -> f64 {
    step(p as f64)
}

/// Allgather of `n` total words among `p` ranks.
pub fn allgather(n: f64, p: usize) -> CostVector {
    CostVector::new(ceil_log2(p), n * step_p(p), 0.0)
}

/// Scatter of `n` total words from a root to `p` ranks.
pub fn scatter(n: f64, p: usize) -> CostVector {
    CostVector::new(ceil_log2(p), n * step_p(p), 0.0)
}

/// Gather of `n` total words onto a root from `p` ranks.
pub fn gather(n: f64, p: usize) -> CostVector {
    CostVector::new(ceil_log2(p), n * step_p(p), 0.0)
}

/// Reduce-scatter over per-rank buffers of `n` words.
pub fn reduce_scatter(n: f64, p: usize) -> CostVector {
    CostVector::new(ceil_log2(p), n * step_p(p), n * step_p(p))
}

/// Broadcast of `n` words from a root to `p` ranks (scatter + allgather).
pub fn bcast(n: f64, p: usize) -> CostVector {
    CostVector::new(2.0 * ceil_log2(p), 2.0 * n * step_p(p), 0.0)
}

/// Reduction of per-rank buffers of `n` words onto a root.
pub fn reduce(n: f64, p: usize) -> CostVector {
    CostVector::new(2.0 * ceil_log2(p), 2.0 * n * step_p(p), n * step_p(p))
}

/// Allreduce of per-rank buffers of `n` words.
pub fn allreduce(n: f64, p: usize) -> CostVector {
    CostVector::new(2.0 * ceil_log2(p), 2.0 * n * step_p(p), n * step_p(p))
}

/// All-to-all where every rank holds `n` words (p blocks of n/p).
pub fn alltoall(n: f64, p: usize) -> CostVector {
    let l = ceil_log2(p);
    CostVector::new(l, n * l / 2.0, 0.0)
}

/// One send and one receive of `words`, as in a square-grid block transpose.
/// `active` is false on the diagonal, where nothing moves.
pub fn pairwise(words: f64, active: bool) -> CostVector {
    if active {
        CostVector::new(1.0, words, 0.0)
    } else {
        CostVector::ZERO
    }
}

/// Dense word count of an r x c block.
pub fn dense_words(r: f64, c: f64) -> f64 {
    r * c
}

/// Nonzero count of an n x n lower-triangular matrix.
pub fn tri_words(n: f64) -> f64 {
    n * (n + 1.0) / 2.0
}

/// Nonzero count of the cyclic tile of an n x n lower-triangular matrix on a
/// q x q class grid, for a tile whose row class is >= its column class (the
/// largest tiles; row class 0, column class 0 is one of them).
pub fn tri_tile_words_hi(n: f64, q: usize) -> f64 {
    let m = n / q as f64;
    m * (m + 1.0) / 2.0
}

/// Same, for tiles with row class < column class.
pub fn tri_tile_words_lo(n: f64, q: usize) -> f64 {
    let m = n / q as f64;
    m * (m - 1.0) / 2.0
}
