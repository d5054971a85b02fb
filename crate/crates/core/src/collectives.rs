//! Simulated collectives over grid slices: each operation moves real buffer
//! data between the participants (in slice order) and charges every
//! participant the closed-form butterfly cost from [`crate::costs`].
//!
//! Reductions sum in ascending participant order so float64 results are
//! deterministic; the butterfly schedule is a cost model, not the arithmetic
//! order.

use crate::costs;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sim::Simulator;

fn check_group(group: &Grid, buffers: usize) -> Result<()> {
    if group.size() != buffers {
        return Err(Error::Config(format!(
            "{buffers} buffers for a group of {} ranks",
            group.size()
        )));
    }
    Ok(())
}

fn equal_sizes(bufs: &[Vec<f64>]) -> Result<usize> {
    let len = bufs.first().map_or(0, Vec::len);
    if bufs.iter().any(|b| b.len() != len) {
        return Err(Error::Config("contribution sizes unequal".into()));
    }
    Ok(len)
}

/// Every rank contributes an equal slice; every rank ends with the
/// concatenation in group rank order.
pub fn allgather(sim: &mut Simulator, group: &Grid, contributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_group(group, contributions.len())?;
    let piece = equal_sizes(contributions)?;
    let total = piece * group.size();
    sim.charge_grid(group, costs::allgather(total as f64, group.size()))?;
    let mut out = Vec::with_capacity(total);
    for c in contributions {
        out.extend_from_slice(c);
    }
    Ok(out)
}

/// Root's buffer is split into equal consecutive pieces, one per rank.
pub fn scatter(sim: &mut Simulator, group: &Grid, data: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = group.size();
    if data.len() % p != 0 {
        return Err(Error::Config(format!(
            "cannot scatter {} words over {p} ranks evenly",
            data.len()
        )));
    }
    sim.charge_grid(group, costs::scatter(data.len() as f64, p))?;
    let piece = data.len() / p;
    Ok(data.chunks(piece).map(|c| c.to_vec()).collect())
}

/// Inverse of scatter: equal pieces concatenate onto the root.
pub fn gather(sim: &mut Simulator, group: &Grid, pieces: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_group(group, pieces.len())?;
    let piece = equal_sizes(pieces)?;
    sim.charge_grid(group, costs::gather((piece * group.size()) as f64, group.size()))?;
    let mut out = Vec::with_capacity(piece * group.size());
    for c in pieces {
        out.extend_from_slice(c);
    }
    Ok(out)
}

/// Elementwise sum of equal per-rank buffers; rank i keeps segment i.
pub fn reduce_scatter(
    sim: &mut Simulator,
    group: &Grid,
    contributions: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    check_group(group, contributions.len())?;
    let n = equal_sizes(contributions)?;
    let p = group.size();
    if n % p != 0 {
        return Err(Error::Config(format!(
            "reduce-scatter buffer of {n} words not divisible by {p} ranks"
        )));
    }
    sim.charge_grid(group, costs::reduce_scatter(n as f64, p))?;
    let sum = sum_in_rank_order(contributions, n);
    let piece = n / p;
    Ok(sum.chunks(piece).map(|c| c.to_vec()).collect())
}

/// Root's buffer lands on every rank bit-exactly.
pub fn bcast(sim: &mut Simulator, group: &Grid, data: &[f64]) -> Result<Vec<Vec<f64>>> {
    sim.charge_grid(group, costs::bcast(data.len() as f64, group.size()))?;
    Ok(vec![data.to_vec(); group.size()])
}

/// Elementwise sum on every rank.
pub fn allreduce(
    sim: &mut Simulator,
    group: &Grid,
    contributions: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_group(group, contributions.len())?;
    let n = equal_sizes(contributions)?;
    sim.charge_grid(group, costs::allreduce(n as f64, group.size()))?;
    Ok(sum_in_rank_order(contributions, n))
}

/// Elementwise sum onto the root only; same cost shape as allreduce.
pub fn reduce(sim: &mut Simulator, group: &Grid, contributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_group(group, contributions.len())?;
    let n = equal_sizes(contributions)?;
    sim.charge_grid(group, costs::reduce(n as f64, group.size()))?;
    Ok(sum_in_rank_order(contributions, n))
}

fn sum_in_rank_order(contributions: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for c in contributions {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
    }
    acc
}

/// `blocks[i][j]` is rank i's block addressed to rank j; the result holds
/// block (i -> j) at position `[j][i]`: the transposition of the block
/// matrix of buffers.
pub fn alltoall(
    sim: &mut Simulator,
    group: &Grid,
    blocks: &[Vec<Vec<f64>>],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let p = group.size();
    check_group(group, blocks.len())?;
    if blocks.iter().any(|row| row.len() != p) {
        return Err(Error::Config("all-to-all needs one block per destination".into()));
    }
    let per_rank: usize = blocks[0].iter().map(Vec::len).sum();
    sim.charge_grid(group, costs::alltoall(per_rank as f64, p))?;
    let mut out = vec![vec![Vec::new(); p]; p];
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            out[j][i] = b.clone();
        }
    }
    Ok(out)
}

/// Block transpose on a square a x a slice: ranks (i, j) and (j, i) swap
/// blocks with one send and receive each; diagonal ranks move nothing and
/// charge nothing.
pub fn pairwise_transpose(
    sim: &mut Simulator,
    square: &Grid,
    blocks: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let dims = square.dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(Error::Config(format!(
            "pairwise transpose needs a square slice, got {dims:?}"
        )));
    }
    let a = dims[0];
    check_group(square, blocks.len())?;
    let mut out = blocks.to_vec();
    for i in 0..a {
        for j in 0..a {
            if i == j {
                continue;
            }
            let here = square.linear(&[i, j]);
            let there = square.linear(&[j, i]);
            if blocks[here].len() != blocks[there].len() {
                return Err(Error::Config("transposed blocks differ in size".into()));
            }
            out[here] = blocks[there].clone();
            let rank = square.ranks()[here];
            sim.charge_ranks([rank], costs::pairwise(blocks[here].len() as f64, true))?;
        }
    }
    Ok(out)
}

/// Block permutation on a rectangular a x b slice, charged as an all-to-all
/// among its a*b ranks: position (i, j) receives the block whose row-major
/// index equals the column-major index of (i, j). On a square slice this is
/// exactly the pairwise transpose permutation.
pub fn rect_transpose(
    sim: &mut Simulator,
    slice: &Grid,
    blocks: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let dims = slice.dims();
    if dims.len() != 2 {
        return Err(Error::Config(format!("rectangular transpose needs a 2D slice, got {dims:?}")));
    }
    let (a, b) = (dims[0], dims[1]);
    check_group(slice, blocks.len())?;
    let words = equal_sizes(blocks)?;
    sim.charge_grid(slice, costs::alltoall(words as f64, a * b))?;
    let mut out = vec![Vec::new(); a * b];
    for i in 0..a {
        for j in 0..b {
            // column-major index of (i, j) names the source block
            let src = j * a + i;
            out[i * b + j] = blocks[src].clone();
        }
    }
    Ok(out)
}
