//! The two end-to-end triangular solvers.
//!
//! Rec-TRSM first replicates L across column groups of a rectangular grid
//! when there are more grid columns than rows, then recursively halves L on
//! the square grid, updating the remaining right-hand sides with a 3D
//! multiplication per level and finishing with gathered local solves.
//!
//! It-Inv-TRSM inverts the n0 x n0 diagonal blocks up front (one disjoint
//! subgrid per block), then walks the block rows iteratively: each step is
//! a local multiply by an inverted block, an allreduce of the solution
//! panel over the first grid axis, a broadcast of the trailing L panel over
//! the third axis, a local update multiply, and an allreduce over the
//! second axis that both combines the update and hands every layer the next
//! right-hand-side panel.

use crate::costs;
use crate::error::{Error, Result};
use crate::grid::{AxisSel, Grid};
use crate::layout::{col_class_ids, DistMatrix, Layout, MatShape};
use crate::machine::CostVector;
use crate::matmul::{a_panel_words, mm, round_p1};
use crate::matrix::Matrix;
use crate::sim::Simulator;
use crate::triinv::{diagonal_inverter, InversionPlan};

/// Sequential column-wise forward substitution; the correctness oracle for
/// both parallel solvers. No ledger involvement.
pub fn forward_substitution(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    if l.rows() != l.cols() || l.rows() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot solve {}x{} against {}x{}",
            l.rows(),
            l.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = l.rows();
    for i in 0..n {
        if l.get(i, i) == 0.0 {
            return Err(Error::Singular { index: i, block: None });
        }
    }
    let mut x = Matrix::zeros(n, b.cols());
    for j in 0..b.cols() {
        for i in 0..n {
            let mut acc = b.get(i, j);
            for t in 0..i {
                acc -= l.get(i, t) * x.get(t, j);
            }
            x.set(i, j, acc / l.get(i, i));
        }
    }
    Ok(x)
}

/// Feasible grid shape for Rec-TRSM: the divisor pc of p with pr = p/pc
/// dividing pc, closest in log scale to max(sqrt(p), min(p, sqrt(p*k/n)));
/// ties prefer the wider (more column-parallel) grid.
pub fn rec_trsm_grid(p: usize, n: usize, k: usize) -> (usize, usize) {
    let pf = p as f64;
    let ideal = (pf.sqrt()).max(pf.min((pf * k as f64 / n as f64).sqrt()));
    let mut best: Option<(f64, usize)> = None;
    for pc in 1..=p {
        if p % pc != 0 {
            continue;
        }
        let pr = p / pc;
        if pc % pr != 0 {
            continue;
        }
        let dist = ((pc as f64).ln() - ideal.ln()).abs();
        let better = match best {
            None => true,
            Some((bd, bv)) => dist < bd - 1e-12 || (dist < bd + 1e-12 && pc > bv),
        };
        if better {
            best = Some((dist, pc));
        }
    }
    let pc = best.map(|(_, v)| v).unwrap_or(p);
    (p / pc, pc)
}

/// Divisor of n closest to the ideal in log scale; ties prefer the larger.
pub fn nearest_divisor(n: usize, ideal: f64) -> usize {
    let ideal = ideal.clamp(1.0, n as f64);
    let mut best: Option<(f64, usize)> = None;
    for d in 1..=n {
        if n % d != 0 {
            continue;
        }
        let dist = ((d as f64).ln() - ideal.ln()).abs();
        let better = match best {
            None => true,
            Some((bd, bv)) => dist < bd - 1e-12 || (dist < bd + 1e-12 && d > bv),
        };
        if better {
            best = Some((dist, d));
        }
    }
    best.map(|(_, v)| v).unwrap_or(n)
}

/// Default recursion cutoff for Rec-TRSM, per regime, rounded to a divisor
/// of n: sqrt(p) vs n log(p)/sqrt(p) when L dominates, the flop-balanced
/// n^(1/3) (k/pr^2)^(2/3) in the cubic regime, and n itself when the
/// right-hand side dominates (the column partition already finished the
/// job).
pub fn rec_trsm_default_n0(n: usize, k: usize, p: usize, pr: usize) -> usize {
    if p <= 1 {
        return n;
    }
    let (nf, kf, pf) = (n as f64, k as f64, p as f64);
    let ideal = if nf < kf / pf {
        nf
    } else if nf > kf * pf.sqrt() {
        pf.sqrt().max(nf * pf.log2() / pf.sqrt())
    } else {
        nf.cbrt() * (kf / (pr * pr) as f64).powf(2.0 / 3.0)
    };
    nearest_divisor(n, ideal)
}

/// Recursive TRSM on a pr x pc cyclic grid (pc a multiple of pr). Returns X
/// in B's layout.
pub fn rec_trsm(
    sim: &mut Simulator,
    l: &DistMatrix,
    b: &DistMatrix,
    n0: usize,
) -> Result<DistMatrix> {
    if l.shape() != MatShape::LowerTriangular {
        return Err(Error::Config("rec-trsm needs a lower-triangular L".into()));
    }
    if l.rows() != b.rows() {
        return Err(Error::Shape(format!(
            "L is {}x{} but B has {} rows",
            l.rows(),
            l.cols(),
            b.rows()
        )));
    }
    let grid = l.layout().owner().clone();
    if grid.ranks() != b.layout().owner().ranks() {
        return Err(Error::Config("rec-trsm operands must share one grid".into()));
    }
    let (pr, pc) = (grid.dims()[0], grid.dims()[1]);
    if pc < pr {
        return Err(Error::Config(format!(
            "rec-trsm needs at least as many grid columns as rows, got {pr}x{pc}"
        )));
    }
    if pc == pr {
        return rec_square(sim, l, b, n0);
    }
    if pc % pr != 0 {
        return Err(Error::Config(format!(
            "grid columns {pc} must be a multiple of grid rows {pr}"
        )));
    }

    // replicate L into each pr x pr column band and solve the bands'
    // right-hand-side columns independently
    sim.begin_phase("partition-columns");
    let q = pc / pr;
    let n = l.rows();
    let tri = l.shape() == MatShape::LowerTriangular;
    for x in 0..pr {
        for y in 0..pr {
            let words = a_panel_words(n, n, pr, x, y, tri);
            let ranks: Vec<_> = (0..q).map(|z| grid.rank_at(&[x, y + pr * z])).collect();
            sim.charge_ranks(ranks, costs::allgather(words, q))?;
        }
    }

    let lg = l.collect();
    let mut out = DistMatrix::zeros(n, b.cols(), MatShape::Dense, b.layout().clone())?;
    for z in 0..q {
        let band = grid.slice(&[
            AxisSel::All,
            AxisSel::Range { start: pr * z, step: 1, end: pr * (z + 1) },
        ])?;
        let l_z = DistMatrix::distribute(
            &lg,
            MatShape::LowerTriangular,
            Layout::cyclic(band.clone())?,
        )?;
        let b_z = b.subview_col_classes(pr * z, pr * (z + 1), band)?;
        let x_z = rec_square(sim, &l_z, &b_z, n0)?;
        let cols = col_class_ids(b.cols(), pc, pr * z, pr * (z + 1));
        for (cj, &c) in cols.iter().enumerate() {
            for i in 0..n {
                out.set(i, c, x_z.get(i, cj));
            }
        }
    }
    Ok(out)
}

/// Recursion cutoff shared with the cost model.
pub fn rec_base_case(n: usize, n0: usize, p: usize, gr: usize, gc: usize) -> bool {
    n <= n0 || p == 1 || n < 2 * crate::triinv::plan::align(gr, gc)
}

fn rec_square(sim: &mut Simulator, l: &DistMatrix, b: &DistMatrix, n0: usize) -> Result<DistMatrix> {
    let grid = l.layout().owner().clone();
    let (gr, gc) = (grid.dims()[0], grid.dims()[1]);
    let p = grid.size();
    let n = l.rows();
    let k = b.cols();
    let (nf, kf, pf) = (n as f64, k as f64, p as f64);

    if rec_base_case(n, n0, p, gr, gc) {
        sim.begin_phase("base-solves");
        // gather L everywhere, spread the columns over all ranks with an
        // all-to-all per grid column, solve locally, and restore the layout
        sim.charge_grid(&grid, costs::allgather(costs::tri_words(nf), p))?;
        sim.charge_grid(&grid, costs::alltoall(nf * kf / pf, gr))?;
        let x = forward_substitution(&l.collect(), &b.collect())?;
        sim.charge_grid(&grid, CostVector::new(0.0, 0.0, costs::tri_words(nf) * kf / pf))?;
        sim.charge_grid(&grid, costs::alltoall(nf * kf / pf, gr))?;
        return DistMatrix::distribute(&x, MatShape::Dense, b.layout().clone());
    }

    let n1 = crate::triinv::plan::split_rows(n, gr, gc);
    let n2 = n - n1;

    let l11 = l.subview(0, n1, 0, n1, MatShape::LowerTriangular)?;
    let b1 = b.subview(0, n1, 0, k, MatShape::Dense)?;
    let x1 = rec_square(sim, &l11, &b1, n0)?;

    sim.begin_phase("updates");
    let l21 = l.subview(n1, n2, 0, n1, MatShape::Dense)?;
    let p1 = round_p1(gr, gc, (pf * nf / kf).cbrt());
    let delta = mm(sim, &l21, &x1, p1, 1.0)?;
    let mut b2 = b.subview(n1, n2, 0, k, MatShape::Dense)?;
    b2.sub_assign(&delta)?;

    let l22 = l.subview(n1, n2, n1, n2, MatShape::LowerTriangular)?;
    let x2 = rec_square(sim, &l22, &b2, n0)?;

    let mut out = DistMatrix::zeros(n, k, MatShape::Dense, b.layout().clone())?;
    out.write_block(0, 0, &x1)?;
    out.write_block(n1, 0, &x2)?;
    Ok(out)
}

/// Parameters of the iterative inversion-based solver on a p1 x p1 x p2
/// grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItInvParams {
    pub p1: usize,
    pub p2: usize,
    pub n0: usize,
    pub r1: usize,
    pub r2: usize,
}

/// The layouts It-Inv-TRSM expects: L cyclic on the first z-layer, B with
/// cyclic rows and blocked columns on the first y-plane.
pub fn it_inv_layouts(world: &Grid, k: usize) -> Result<(Layout, Layout)> {
    let dims = world.dims();
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(Error::Config(format!(
            "iterative solver needs a p1 x p1 x p2 grid, got {dims:?}"
        )));
    }
    let layer = world.slice(&[AxisSel::All, AxisSel::All, AxisSel::At(0)])?;
    let plane = world.slice(&[AxisSel::All, AxisSel::At(0), AxisSel::All])?;
    let col_block = k.div_ceil(dims[2]).max(1);
    Ok((
        Layout::cyclic(layer)?,
        Layout::blocked(plane, 1, col_block)?,
    ))
}

/// Iterative TRSM with selective diagonal-block inversion. Returns X with
/// B's layout shape (cyclic rows over p1, blocked columns over p2) on a
/// plane of the grid.
pub fn it_inv_trsm(
    sim: &mut Simulator,
    l: &DistMatrix,
    b: &DistMatrix,
    world: &Grid,
    params: &ItInvParams,
) -> Result<DistMatrix> {
    let dims = world.dims().to_vec();
    if dims.len() != 3 || dims[0] != dims[1] || dims[0] != params.p1 || dims[2] != params.p2 {
        return Err(Error::Config(format!(
            "world grid {dims:?} does not match parameters {params:?}"
        )));
    }
    let (p1, p2) = (params.p1, params.p2);
    let p = world.size();
    let n = l.rows();
    let k = b.cols();
    let n0 = params.n0;
    if n % n0 != 0 {
        return Err(Error::Config(format!("block size n0={n0} must divide n={n}")));
    }
    if l.rows() != l.cols() || b.rows() != n {
        return Err(Error::Shape("operand dimensions disagree".into()));
    }
    let plan = InversionPlan::new(n, n0, p)?.with_split(params.r1, params.r2)?;

    sim.begin_phase("inversion");
    let ltil = diagonal_inverter(sim, l, world, &plan)?;

    let rounds = n / n0;
    let (n0f, kf) = (n0 as f64, k as f64);
    let (p1f, p2f) = (p1 as f64, p2 as f64);
    let panel_words = n0f * kf / (p1f * p2f);

    // column groups (blocked over p2) and row classes (cyclic over p1)
    let col_block = b.layout().blocks().1;
    let cols_of_z: Vec<Vec<usize>> = (0..p2)
        .map(|z| {
            (0..k)
                .filter(|j| (j / col_block) % p2 == z)
                .collect()
        })
        .collect();
    let class_rows = |lo: usize, hi: usize, cls: usize| -> Vec<usize> {
        (lo..hi).filter(|r| r % p1 == cls).collect()
    };

    // replicated right-hand-side panels for the current block row, indexed
    // by (row class, column group); identical across the second grid axis
    sim.begin_phase("solve");
    sim.charge_grid(world, costs::bcast(panel_words, p1))?;
    let mut bpanel: Vec<Vec<Matrix>> = (0..p1)
        .map(|x| {
            (0..p2)
                .map(|z| {
                    let rows = class_rows(0, n0, x);
                    let mut m = Matrix::zeros(rows.len(), cols_of_z[z].len());
                    for (li, &r) in rows.iter().enumerate() {
                        for (lj, &c) in cols_of_z[z].iter().enumerate() {
                            m.set(li, lj, b.get(r, c));
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();

    // lazy update accumulators per (row class, contraction class, column
    // group); entries for a block row are consumed by the allreduce that
    // finishes it and zeroed afterwards
    let mut acc: Vec<Matrix> = (0..p1 * p1 * p2)
        .map(|idx| {
            let x = idx / (p1 * p2);
            let z = idx % p2;
            Matrix::zeros(class_rows(0, n, x).len(), cols_of_z[z].len())
        })
        .collect();

    // solution panels per (row class, column group)
    let mut xout: Vec<Matrix> = (0..p1 * p2)
        .map(|idx| {
            let y = idx / p2;
            let z = idx % p2;
            Matrix::zeros(class_rows(0, n, y).len(), cols_of_z[z].len())
        })
        .collect();

    for i in 0..rounds {
        let lo = i * n0;
        let hi = lo + n0;

        sim.begin_phase("solve");
        // replicate the inverted diagonal block's pieces over the third
        // axis, multiply locally, and allreduce the solution panel over the
        // first axis
        sim.charge_grid(world, costs::allgather(n0f * n0f / (p1f * p1f), p2))?;
        sim.charge_grid(
            world,
            CostVector::new(0.0, 0.0, n0f * n0f * kf / (p1f * p1f * p2f)),
        )?;
        sim.charge_grid(world, costs::allreduce(panel_words, p1))?;
        for y in 0..p1 {
            let out_rows = class_rows(lo, hi, y);
            for z in 0..p2 {
                let mut panel = Matrix::zeros(out_rows.len(), cols_of_z[z].len());
                for x in 0..p1 {
                    let in_rows = class_rows(lo, hi, x);
                    let bp = &bpanel[x][z];
                    for (li, &r) in out_rows.iter().enumerate() {
                        for (lt, &t) in in_rows.iter().enumerate() {
                            let lv = ltil.get(r, t);
                            if lv == 0.0 {
                                continue;
                            }
                            for lj in 0..bp.cols() {
                                panel.set(li, lj, panel.get(li, lj) + lv * bp.get(lt, lj));
                            }
                        }
                    }
                }
                for (li, &r) in out_rows.iter().enumerate() {
                    for lj in 0..panel.cols() {
                        xout[y * p2 + z].set(r / p1, lj, panel.get(li, lj));
                    }
                }
            }
        }

        if i + 1 == rounds {
            break;
        }

        sim.begin_phase("update");
        let trailing = (n - hi) as f64;
        // broadcast the trailing L panel over the third axis, accumulate
        // the local update products, then allreduce the next block row over
        // the second axis; seeding the reduction with the held right-hand
        // side hands every layer the updated panel directly
        sim.charge_grid(world, costs::bcast(trailing * n0f / (p1f * p1f), p2))?;
        sim.charge_grid(
            world,
            CostVector::new(0.0, 0.0, trailing * n0f * kf / (p1f * p1f * p2f)),
        )?;
        sim.charge_grid(world, costs::allreduce(panel_words, p1))?;

        for x in 0..p1 {
            let upd_rows = class_rows(hi, n, x);
            for y in 0..p1 {
                let src_rows = class_rows(lo, hi, y);
                for z in 0..p2 {
                    let xo = &xout[y * p2 + z];
                    let a = &mut acc[(x * p1 + y) * p2 + z];
                    for &r in &upd_rows {
                        for &t in &src_rows {
                            let lv = ltil.get(r, t);
                            if lv == 0.0 {
                                continue;
                            }
                            for lj in 0..a.cols() {
                                let add = lv * xo.get(t / p1, lj);
                                a.set(r / p1, lj, a.get(r / p1, lj) + add);
                            }
                        }
                    }
                }
            }
        }

        // consume the accumulators for the next block row
        for x in 0..p1 {
            let next_rows = class_rows(hi, hi + n0, x);
            for z in 0..p2 {
                let mut m = Matrix::zeros(next_rows.len(), cols_of_z[z].len());
                for (li, &r) in next_rows.iter().enumerate() {
                    for lj in 0..m.cols() {
                        let mut v = b.get(r, cols_of_z[z][lj]);
                        for y in 0..p1 {
                            v -= acc[(x * p1 + y) * p2 + z].get(r / p1, lj);
                        }
                        m.set(li, lj, v);
                    }
                }
                for y in 0..p1 {
                    let a = &mut acc[(x * p1 + y) * p2 + z];
                    for &r in &next_rows {
                        for lj in 0..cols_of_z[z].len() {
                            a.set(r / p1, lj, 0.0);
                        }
                    }
                }
                bpanel[x][z] = m;
            }
        }
    }

    // assemble X on a plane of the grid, in B's layout shape
    let xplane = world.slice(&[AxisSel::At(0), AxisSel::All, AxisSel::All])?;
    let xlayout = Layout::blocked(xplane, 1, col_block)?;
    let mut out = DistMatrix::zeros(n, k, MatShape::Dense, xlayout)?;
    for y in 0..p1 {
        for z in 0..p2 {
            let xo = &xout[y * p2 + z];
            for (lj, &c) in cols_of_z[z].iter().enumerate() {
                let rows = class_rows(0, n, y);
                for (li, &r) in rows.iter().enumerate() {
                    out.set(r, c, xo.get(li, lj));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_rhs, well_conditioned_lower};
    use crate::matrix::relative_residual;
    use crate::triinv::inversion_split;

    fn tri_on(g: &Matrix, grid: &Grid) -> DistMatrix {
        DistMatrix::distribute(g, MatShape::LowerTriangular, Layout::cyclic(grid.clone()).unwrap())
            .unwrap()
    }

    fn dense_on(g: &Matrix, grid: &Grid) -> DistMatrix {
        DistMatrix::distribute(g, MatShape::Dense, Layout::cyclic(grid.clone()).unwrap()).unwrap()
    }

    #[test]
    fn forward_substitution_known_values() {
        let l = Matrix::identity(3);
        let b = random_rhs(3, 2, 1);
        assert_eq!(forward_substitution(&l, &b).unwrap(), b);

        let l = Matrix::from_rows(&[&[1.0, 0.0], &[2.0, 3.0]]);
        let b = Matrix::from_rows(&[&[1.0], &[5.0]]);
        let x = forward_substitution(&l, &b).unwrap();
        assert_eq!(x.data(), &[1.0, 1.0]);

        let singular = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(
            forward_substitution(&singular, &b),
            Err(Error::Singular { index: 0, .. })
        ));
    }

    #[test]
    fn forward_substitution_residual_self_check() {
        let l = well_conditioned_lower(32, 3);
        let b = random_rhs(32, 8, 3);
        let x = forward_substitution(&l, &b).unwrap();
        let r = l.matmul(&x).unwrap().sub(&b).unwrap().frobenius() / b.frobenius();
        assert!(r <= 1e-13, "residual {r}");
    }

    #[test]
    fn rec_trsm_square_grid_matches_oracle() {
        let n = 64;
        let k = 64;
        let grid = Grid::new(&[4, 4]).unwrap();
        let lg = well_conditioned_lower(n, 21);
        let bg = random_rhs(n, k, 21);
        let mut sim = Simulator::new(16);
        let l = tri_on(&lg, &grid);
        let b = dense_on(&bg, &grid);
        let x = rec_trsm(&mut sim, &l, &b, 16).unwrap();
        let r = relative_residual(&lg, &x.collect(), &bg).unwrap();
        assert!(r <= 1e-12, "residual {r}");
        assert!(sim.total().s > 0.0);
    }

    #[test]
    fn rec_trsm_rectangular_grid_partitions_columns() {
        let n = 32;
        let k = 64;
        let grid = Grid::new(&[2, 8]).unwrap();
        let lg = well_conditioned_lower(n, 22);
        let bg = random_rhs(n, k, 22);
        let mut sim = Simulator::new(16);
        let l = tri_on(&lg, &grid);
        let b = dense_on(&bg, &grid);
        let x = rec_trsm(&mut sim, &l, &b, 8).unwrap();
        let r = relative_residual(&lg, &x.collect(), &bg).unwrap();
        assert!(r <= 1e-12, "residual {r}");
        let phases = sim.phase_totals();
        assert_eq!(phases[0].0, "partition-columns");
    }

    #[test]
    fn rec_trsm_one_dimensional_regime_communicates_once() {
        // pr = 1: the partitioning allgather is the only communication
        let n = 8;
        let k = 64;
        let grid = Grid::new(&[1, 4]).unwrap();
        let lg = well_conditioned_lower(n, 5);
        let bg = random_rhs(n, k, 5);
        let mut sim = Simulator::new(4);
        let l = tri_on(&lg, &grid);
        let b = dense_on(&bg, &grid);
        let x = rec_trsm(&mut sim, &l, &b, n).unwrap();
        let r = relative_residual(&lg, &x.collect(), &bg).unwrap();
        assert!(r <= 1e-12);
        let c = sim.total();
        // S = log2(4) from the replication; the 1x1 base charges nothing
        assert_eq!(c.s, 2.0);
        assert_eq!(c.w, costs::tri_words(n as f64));
    }

    #[test]
    fn rec_trsm_single_rank_is_local() {
        let n = 16;
        let grid = Grid::new(&[1, 1]).unwrap();
        let lg = well_conditioned_lower(n, 6);
        let bg = random_rhs(n, 4, 6);
        let mut sim = Simulator::new(1);
        let x = rec_trsm(&mut sim, &tri_on(&lg, &grid), &dense_on(&bg, &grid), 4).unwrap();
        let r = relative_residual(&lg, &x.collect(), &bg).unwrap();
        assert!(r <= 1e-13);
        assert_eq!(sim.total().s, 0.0);
        assert_eq!(sim.total().w, 0.0);
        assert!(sim.total().f > 0.0);
    }

    fn run_it_inv(
        n: usize,
        k: usize,
        p1: usize,
        p2: usize,
        n0: usize,
        seed: u64,
    ) -> (f64, Simulator) {
        let world = Grid::new(&[p1, p1, p2]).unwrap();
        let (ll, bl) = it_inv_layouts(&world, k).unwrap();
        let lg = well_conditioned_lower(n, seed);
        let bg = random_rhs(n, k, seed);
        let l = DistMatrix::distribute(&lg, MatShape::LowerTriangular, ll).unwrap();
        let b = DistMatrix::distribute(&bg, MatShape::Dense, bl).unwrap();
        let mut sim = Simulator::new(world.size());
        let q = p1 * p1 * p2 * n0 / n;
        let (r1, r2) = inversion_split(q);
        let params = ItInvParams { p1, p2, n0, r1, r2 };
        let x = it_inv_trsm(&mut sim, &l, &b, &world, &params).unwrap();
        let r = relative_residual(&lg, &x.collect(), &bg).unwrap();
        (r, sim)
    }

    #[test]
    fn it_inv_identity_keeps_rhs() {
        let n = 16;
        let k = 8;
        let world = Grid::new(&[2, 2, 2]).unwrap();
        let (ll, bl) = it_inv_layouts(&world, k).unwrap();
        let lg = Matrix::identity(n);
        let bg = random_rhs(n, k, 9);
        let l = DistMatrix::distribute(&lg, MatShape::LowerTriangular, ll).unwrap();
        let b = DistMatrix::distribute(&bg, MatShape::Dense, bl).unwrap();
        let mut sim = Simulator::new(8);
        let params = ItInvParams { p1: 2, p2: 2, n0: 4, r1: 1, r2: 2 };
        let x = it_inv_trsm(&mut sim, &l, &b, &world, &params).unwrap();
        assert_eq!(x.collect(), bg);
    }

    #[test]
    fn it_inv_matches_oracle_across_small_lattice() {
        for (n, k, p1, p2, n0) in [
            (32usize, 8usize, 1usize, 4usize, 8usize),
            (32, 8, 2, 2, 16),
            (64, 64, 2, 4, 16),
            (64, 1, 2, 2, 32),
        ] {
            let (r, _) = run_it_inv(n, k, p1, p2, n0, 31 + n as u64);
            assert!(r <= 1e-12, "n={n} k={k} p1={p1} p2={p2} n0={n0}: residual {r}");
        }
    }

    #[test]
    fn it_inv_single_block_skips_updates() {
        let (r, sim) = run_it_inv(32, 16, 2, 2, 32, 77);
        assert!(r <= 1e-12);
        let phases = sim.phase_totals();
        assert!(phases.iter().all(|(name, _)| name != "update"));
    }

    #[test]
    fn it_inv_charges_are_value_independent() {
        let (_, sim1) = run_it_inv(32, 8, 2, 2, 8, 1);
        let (_, sim2) = run_it_inv(32, 8, 2, 2, 8, 2);
        assert_eq!(sim1.total(), sim2.total());
        assert_eq!(sim1.phase_totals(), sim2.phase_totals());
    }
}
