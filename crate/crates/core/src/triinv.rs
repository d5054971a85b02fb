//! Triangular inversion: the sequential base kernel, the recursive parallel
//! inversion over shrinking half-grids, and the block-diagonal inverter
//! that prepares the iterative solver.
//!
//! The recursion halves the matrix and the rank set together: the two
//! half-problems run on disjoint half-grids (their ledger charges overlap
//! nowhere, so the critical path takes their maximum), and two full-grid
//! multiplications complete the off-diagonal block. Redistributions to and
//! from the half-grids are charged as fused all-to-all / scatter-hop /
//! all-to-all supersteps.

use crate::costs;
use crate::error::{Error, Result};
use crate::grid::{grid_shape_2d, Grid};
use crate::layout::{DistMatrix, Layout, MatShape};
use crate::machine::CostVector;
use crate::matmul::mm;
use crate::matrix::Matrix;
use crate::sim::Simulator;

/// Exact inversion of a lower-triangular matrix by column-wise forward
/// substitution. Used both as the redundant base-case kernel (each base
/// rank charges n^3 flops for it) and as the dense test oracle.
pub fn sequential_tri_inv(l: &Matrix) -> Result<Matrix> {
    if l.rows() != l.cols() {
        return Err(Error::Shape(format!(
            "cannot invert a {}x{} matrix",
            l.rows(),
            l.cols()
        )));
    }
    let n = l.rows();
    for i in 0..n {
        if l.get(i, i) == 0.0 {
            return Err(Error::Singular { index: i, block: None });
        }
    }
    let mut inv = Matrix::zeros(n, n);
    // column j of the inverse solves L x = e_j
    for j in 0..n {
        inv.set(j, j, 1.0 / l.get(j, j));
        for i in (j + 1)..n {
            let mut acc = 0.0;
            for t in j..i {
                acc += l.get(i, t) * inv.get(t, j);
            }
            inv.set(i, j, -acc / l.get(i, i));
        }
    }
    Ok(inv)
}

/// Structural decisions of one recursion level, shared with the cost model
/// so the analytic unrolling follows the simulator exactly.
pub mod plan {
    /// Alignment unit for row splits on a grid (splits must keep every
    /// element on its rank).
    pub fn align(gr: usize, gc: usize) -> usize {
        lcm(gr, gc)
    }

    fn lcm(a: usize, b: usize) -> usize {
        a / gcd(a, b) * b
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    /// True when the recursion bottoms out: a one-dimensional parameter
    /// grid, too few ranks to split, or a block too small to halve on this
    /// grid.
    pub fn base_case(n: usize, p1: usize, p: usize, gr: usize, gc: usize) -> bool {
        p1 <= 1 || p < 2 || p % 2 != 0 || n < 2 * align(gr, gc)
    }

    /// Row split point: the multiple of the alignment unit closest to n/2,
    /// clamped so both halves are nonempty.
    pub fn split_rows(n: usize, gr: usize, gc: usize) -> usize {
        let a = align(gr, gc);
        let half = n as f64 / 2.0;
        let mut n1 = ((half / a as f64).round() as usize) * a;
        n1 = n1.clamp(a, n - a);
        n1
    }

    /// Parameters of the half-problems: p1 shrinks by the ideal factor
    /// 2^(1/3), rounded to the nearest feasible divisor of the half-grid.
    pub fn half_params(p1: usize, half_shape: (usize, usize)) -> (usize, usize) {
        let (a, b) = half_shape;
        let p = a * b;
        let ideal = p1 as f64 / 2f64.powf(1.0 / 3.0);
        let d = round_p1_constrained(a, b, ideal);
        (d, p / (d * d))
    }

    /// Like matmul::round_p1 but also requires p / d^2 >= d (the recursion
    /// keeps the third grid dimension at least as large as the others).
    fn round_p1_constrained(a: usize, b: usize, ideal: f64) -> usize {
        let p = a * b;
        let mut best: Option<(f64, usize)> = None;
        for d in 1..=a.min(b) {
            if a % d != 0 || b % d != 0 || p % (d * d) != 0 || p / (d * d) < d {
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
}

/// Inverts a lower-triangular matrix distributed cyclically on a 2D grid.
/// `p1` is the grid-shape parameter with p = p1^2 * p2 and p2 >= p1.
pub fn rec_tri_inv(sim: &mut Simulator, l: &DistMatrix, p1: usize) -> Result<DistMatrix> {
    if l.shape() != MatShape::LowerTriangular {
        return Err(Error::Config("recursive inversion needs a lower-triangular matrix".into()));
    }
    let p = l.layout().owner().size();
    if p1 == 0 || p % (p1 * p1) != 0 {
        return Err(Error::Config(format!("inversion needs p1^2 | p, got p1={p1}, p={p}")));
    }
    if p / (p1 * p1) < p1 {
        return Err(Error::Config(format!(
            "inversion needs p2 >= p1, got p1={p1}, p2={}",
            p / (p1 * p1)
        )));
    }
    rec_tri_inv_inner(sim, l, p1)
}

fn rec_tri_inv_inner(sim: &mut Simulator, l: &DistMatrix, p1: usize) -> Result<DistMatrix> {
    let grid = l.layout().owner().clone();
    let (gr, gc) = (grid.dims()[0], grid.dims()[1]);
    let p = grid.size();
    let n = l.rows();

    if plan::base_case(n, p1, p, gr, gc) {
        // gather the whole block everywhere, invert redundantly
        sim.charge_grid(&grid, costs::allgather(costs::tri_words(n as f64), p))?;
        let inv = sequential_tri_inv(&l.collect())?;
        sim.charge_grid(&grid, CostVector::new(0.0, 0.0, (n as f64).powi(3)))?;
        return DistMatrix::distribute(&inv, MatShape::LowerTriangular, l.layout().clone());
    }

    let n1 = plan::split_rows(n, gr, gc);
    let n2 = n - n1;
    let half_shape = grid_shape_2d(p / 2);
    let g1 = grid.half(0, &[half_shape.0, half_shape.1])?;
    let g2 = grid.half(1, &[half_shape.0, half_shape.1])?;
    let (p1_half, _) = plan::half_params(p1, half_shape);

    let w1 = costs::tri_words(n1 as f64);
    let w2 = costs::tri_words(n2 as f64);
    let ph = p / 2;

    // forward redistribution of both halves, fused into one superstep:
    // all-to-all out of the full grid, a constant-fanout hop, and an
    // all-to-all inside each half-grid (those two run on disjoint ranks)
    sim.charge_grid(&grid, costs::alltoall((w1 + w2) / p as f64, p))?;
    sim.charge_grid(&grid, CostVector::new(2.0, w1.max(w2) / ph as f64, 0.0))?;
    sim.charge_grid(&g1, costs::alltoall(w1 / ph as f64, ph))?;
    sim.charge_grid(&g2, costs::alltoall(w2 / ph as f64, ph))?;

    let l11 = l.subview(0, n1, 0, n1, MatShape::LowerTriangular)?;
    let l22 = l.subview(n1, n2, n1, n2, MatShape::LowerTriangular)?;
    let l11h = DistMatrix::distribute(
        &l11.collect(),
        MatShape::LowerTriangular,
        Layout::cyclic(g1.clone())?,
    )?;
    let l22h = DistMatrix::distribute(
        &l22.collect(),
        MatShape::LowerTriangular,
        Layout::cyclic(g2.clone())?,
    )?;

    // the two half-inversions run in parallel on disjoint rank sets
    let inv11h = rec_tri_inv_inner(sim, &l11h, p1_half)?;
    let inv22h = rec_tri_inv_inner(sim, &l22h, p1_half)?;

    // reverse redistribution back onto the full grid, fused the same way
    sim.charge_grid(&g1, costs::alltoall(w1 / ph as f64, ph))?;
    sim.charge_grid(&g2, costs::alltoall(w2 / ph as f64, ph))?;
    sim.charge_grid(&grid, CostVector::new(2.0, (w1 + w2) / p as f64, 0.0))?;
    sim.charge_grid(&grid, costs::alltoall((w1 + w2) / p as f64, p))?;

    let inv11 = DistMatrix::distribute(
        &inv11h.collect(),
        MatShape::LowerTriangular,
        Layout::cyclic(grid.clone())?,
    )?;
    let inv22 = DistMatrix::distribute(
        &inv22h.collect(),
        MatShape::LowerTriangular,
        Layout::cyclic(grid.clone())?,
    )?;

    // off-diagonal block: -inv(L22) * L21 * inv(L11), two sequential
    // full-grid multiplications
    let l21 = l.subview(n1, n2, 0, n1, MatShape::Dense)?;
    let neg = mm(sim, &inv22, &l21, p1, -1.0)?;
    let inv21 = mm(sim, &neg, &inv11, p1, 1.0)?;

    let mut out = DistMatrix::zeros(n, n, MatShape::LowerTriangular, l.layout().clone())?;
    out.write_block(0, 0, &inv11)?;
    out.write_block(n1, n1, &inv22)?;
    out.write_block(n1, 0, &inv21)?;
    Ok(out)
}

/// Block sizing of the diagonal inverter: r = n/n0 diagonal blocks, each
/// inverted by q = p*n0/n ranks shaped r1 x r1 x r2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionPlan {
    pub n0: usize,
    pub r: usize,
    pub q: usize,
    pub r1: usize,
    pub r2: usize,
}

impl InversionPlan {
    pub fn new(n: usize, n0: usize, p: usize) -> Result<Self> {
        if n0 == 0 || n % n0 != 0 {
            return Err(Error::Config(format!("block size n0={n0} must divide n={n}")));
        }
        let r = n / n0;
        if p % r != 0 {
            return Err(Error::Config(format!(
                "diagonal blocks need equal rank shares: r={r} blocks must divide p={p}"
            )));
        }
        let q = p / r;
        if n0 * n0 < q {
            return Err(Error::Config(format!(
                "block size n0={n0} too small for its subgrid of q={q} ranks (needs n0 >= sqrt(q))"
            )));
        }
        let (r1, r2) = inversion_split(q);
        Ok(Self { n0, r, q, r1, r2 })
    }

    pub fn with_split(mut self, r1: usize, r2: usize) -> Result<Self> {
        if r1 * r1 * r2 != self.q {
            return Err(Error::Config(format!(
                "inversion subgrid {r1}x{r1}x{r2} does not use q={} ranks",
                self.q
            )));
        }
        if r2 <= r1 && self.q > 1 {
            return Err(Error::Config(format!(
                "inversion subgrid needs r2 > r1, got r1={r1}, r2={r2}"
            )));
        }
        self.r1 = r1;
        self.r2 = r2;
        Ok(self)
    }
}

/// Feasible (r1, r2) with r1^2 * r2 = q and r2 > r1 (both 1 when q = 1),
/// minimizing the inversion bandwidth 1/(8 r1^2) + 1/(2 r1 r2); ties prefer
/// the smaller r1.
pub fn inversion_split(q: usize) -> (usize, usize) {
    if q <= 1 {
        return (1, 1);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    let mut r1 = 1;
    while r1 * r1 <= q {
        if q % (r1 * r1) == 0 {
            let r2 = q / (r1 * r1);
            if r2 > r1 {
                let w = 1.0 / (8.0 * (r1 * r1) as f64) + 1.0 / (2.0 * (r1 * r2) as f64);
                let better = match best {
                    None => true,
                    Some((bw, br1, _)) => w < bw - 1e-15 || (w < bw + 1e-15 && r1 < br1),
                };
                if better {
                    best = Some((w, r1, r2));
                }
            }
        }
        r1 += 1;
    }
    best.map(|(_, a, b)| (a, b)).unwrap_or((1, q))
}

/// Inverts the n0 x n0 triangular blocks along the diagonal of L, leaving
/// everything off-diagonal untouched. L is cyclic on the first layer of the
/// p1 x p1 x p2 world grid; each block is inverted by a disjoint set of q
/// ranks after a scatter over the third axis and an all-to-all into the
/// inversion subgrids (and back).
pub fn diagonal_inverter(
    sim: &mut Simulator,
    l: &DistMatrix,
    world: &Grid,
    plan: &InversionPlan,
) -> Result<DistMatrix> {
    if l.shape() != MatShape::LowerTriangular {
        return Err(Error::Config("diagonal inverter needs a lower-triangular matrix".into()));
    }
    let dims = world.dims();
    if dims.len() != 3 || dims[0] != dims[1] {
        return Err(Error::Config(format!(
            "diagonal inverter needs a p1 x p1 x p2 grid, got {dims:?}"
        )));
    }
    let (p1, p2) = (dims[0], dims[2]);
    let p = world.size();
    let n = l.rows();
    let n0 = plan.n0;
    if n / n0 != plan.r || p1 * p1 * p2 != plan.r * plan.q {
        return Err(Error::Config("inversion plan does not match the matrix and grid".into()));
    }

    let nf = n as f64;
    let n0f = n0 as f64;
    let p1f = p1 as f64;

    // move the diagonal blocks toward their inversion subgrids: a scatter
    // over the third axis and an all-to-all across block subgrids
    sim.charge_grid(world, costs::scatter(nf * n0f / (2.0 * p1f * p1f), p2))?;
    sim.charge_grid(world, costs::alltoall(nf * n0f / (2.0 * p as f64), plan.r))?;

    let mut ltil = l.clone();
    let sub_shape = grid_shape_2d(plan.q);
    for b in 0..plan.r {
        let sub = world.chunk(b, plan.r, &[sub_shape.0, sub_shape.1])?;
        let block = l.block_values(b * n0, n0, b * n0, n0);
        let block_dm = DistMatrix::distribute(
            &block,
            MatShape::LowerTriangular,
            Layout::cyclic(sub)?,
        )?;
        let inv = rec_tri_inv(sim, &block_dm, plan.r1).map_err(|e| match e {
            Error::Singular { index, .. } => Error::Singular {
                index: b * n0 + index,
                block: Some(b),
            },
            other => other,
        })?;
        let invg = inv.collect();
        for i in 0..n0 {
            for j in 0..=i {
                ltil.set(b * n0 + i, b * n0 + j, invg.get(i, j));
            }
        }
    }

    // return trip: all-to-all out of the subgrids, gather onto the layer
    sim.charge_grid(world, costs::alltoall(nf * n0f / (2.0 * p as f64), plan.r))?;
    sim.charge_grid(world, costs::gather(nf * n0f / (2.0 * p1f * p1f), p2))?;

    Ok(ltil)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::well_conditioned_lower;
    use crate::machine::MachineParams;

    fn dist_tri(g: &Matrix, grid: &Grid) -> DistMatrix {
        DistMatrix::distribute(g, MatShape::LowerTriangular, Layout::cyclic(grid.clone()).unwrap())
            .unwrap()
    }

    #[test]
    fn sequential_inverse_known_values() {
        let l = Matrix::identity(5);
        assert_eq!(sequential_tri_inv(&l).unwrap(), l);

        let l = Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 4.0]]);
        let inv = sequential_tri_inv(&l).unwrap();
        assert_eq!(inv.data(), &[0.5, 0.0, -0.125, 0.25]);

        let singular = Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            sequential_tri_inv(&singular),
            Err(Error::Singular { index: 1, block: None })
        ));
    }

    #[test]
    fn sequential_inverse_residual() {
        let l = well_conditioned_lower(16, 4);
        let inv = sequential_tri_inv(&l).unwrap();
        let resid = l.matmul(&inv).unwrap().sub(&Matrix::identity(16)).unwrap().max_abs();
        assert!(resid <= 1e-12, "residual {resid}");
    }

    #[test]
    fn scaled_identity_inverts_on_any_grid() {
        let mut l = Matrix::identity(8);
        for i in 0..8 {
            l.set(i, i, 2.0);
        }
        let grid = Grid::new(&[2, 2]).unwrap();
        let mut sim = Simulator::new(4);
        let dm = dist_tri(&l, &grid);
        let inv = rec_tri_inv(&mut sim, &dm, 1).unwrap();
        let got = inv.collect();
        for i in 0..8 {
            assert_eq!(got.get(i, i), 0.5);
        }
    }

    #[test]
    fn recursive_inversion_matches_dense_oracle() {
        let n = 32;
        let lg = well_conditioned_lower(n, 9);
        // p = 4, smallest feasible p1 = 1 bases immediately; force a split
        // with p = 16, p1 = 2, p2 = 4
        let grid = Grid::new(&[4, 4]).unwrap();
        let mut sim = Simulator::new(16);
        let dm = dist_tri(&lg, &grid);
        let inv = rec_tri_inv(&mut sim, &dm, 2).unwrap();
        let resid = lg
            .matmul(&inv.collect())
            .unwrap()
            .sub(&Matrix::identity(n))
            .unwrap()
            .frobenius();
        assert!(resid <= 1e-12 * n as f64, "residual {resid}");
        // a split actually happened: parallel branches charge disjoint
        // ranks, so rank 0 and rank 15 both saw work
        assert!(sim.ledger().get(crate::machine::Rank(15)).unwrap().f > 0.0);
    }

    #[test]
    fn inversion_split_prefers_wide_third_axis() {
        assert_eq!(inversion_split(1), (1, 1));
        assert_eq!(inversion_split(2), (1, 2));
        assert_eq!(inversion_split(4), (1, 4));
        assert_eq!(inversion_split(16), (2, 4));
        assert_eq!(inversion_split(64), (2, 16));
        assert_eq!(inversion_split(512), (4, 32));
    }

    #[test]
    fn diagonal_inverter_identity_leaves_matrix_alone() {
        let world = Grid::new(&[1, 1, 4]).unwrap();
        let layer = world.slice(&[crate::grid::AxisSel::All, crate::grid::AxisSel::All, crate::grid::AxisSel::At(0)]).unwrap();
        // layer is 1x1 after dropping: reshape to 2D
        let layer2 = Grid::from_ranks(&[1, 1], layer.ranks().to_vec()).unwrap();
        let l = Matrix::identity(16);
        let dm = DistMatrix::distribute(&l, MatShape::LowerTriangular, Layout::cyclic(layer2).unwrap()).unwrap();
        let plan = InversionPlan::new(16, 4, 4).unwrap();
        let mut sim = Simulator::new(4);
        let ltil = diagonal_inverter(&mut sim, &dm, &world, &plan).unwrap();
        assert_eq!(ltil.collect(), l);
    }

    #[test]
    fn diagonal_inverter_inverts_blocks_only() {
        let n = 64;
        let n0 = 16;
        let lg = well_conditioned_lower(n, 13);
        let world = Grid::new(&[1, 1, 4]).unwrap();
        let layer = Grid::from_ranks(&[1, 1], vec![crate::machine::Rank(0)]).unwrap();
        let dm = DistMatrix::distribute(
            &lg,
            MatShape::LowerTriangular,
            Layout::cyclic(layer).unwrap(),
        )
        .unwrap();
        let plan = InversionPlan::new(n, n0, 4).unwrap();
        let mut sim = Simulator::new(4);
        let ltil = diagonal_inverter(&mut sim, &dm, &world, &plan).unwrap();
        let got = ltil.collect();
        for b in 0..(n / n0) {
            let ids: Vec<usize> = (b * n0..(b + 1) * n0).collect();
            let block = lg.submatrix(&ids, &ids);
            let inv_block = got.submatrix(&ids, &ids);
            let resid = block
                .matmul(&inv_block)
                .unwrap()
                .sub(&Matrix::identity(n0))
                .unwrap()
                .frobenius();
            assert!(resid <= 1e-12 * n0 as f64, "block {b} residual {resid}");
        }
        // off-diagonal entries untouched
        assert_eq!(got.get(20, 3), lg.get(20, 3));
        // scatter/gather charge the pinned words: n*n0/(2 p1^2) each over p2
        let w = sim.total().w;
        assert!(w >= 2.0 * (n as f64 * n0 as f64 / 2.0));
    }

    #[test]
    fn singular_block_reports_block_index() {
        let n = 8;
        let n0 = 4;
        let mut lg = well_conditioned_lower(n, 2);
        lg.set(5, 5, 0.0);
        let world = Grid::new(&[1, 1, 2]).unwrap();
        let layer = Grid::from_ranks(&[1, 1], vec![crate::machine::Rank(0)]).unwrap();
        let dm = DistMatrix::distribute(
            &lg,
            MatShape::LowerTriangular,
            Layout::cyclic(layer).unwrap(),
        )
        .unwrap();
        let plan = InversionPlan::new(n, n0, 2).unwrap();
        let mut sim = Simulator::new(2);
        let err = diagonal_inverter(&mut sim, &dm, &world, &plan).unwrap_err();
        assert_eq!(err, Error::Singular { index: 5, block: Some(1) });
    }

    #[test]
    fn latency_grows_at_most_log_squared() {
        // S(p) <= c log2(p)^2 with one constant across the fit points
        let n = 128;
        let mut ratios = Vec::new();
        for (p, shape, p1) in [(4usize, (2usize, 2usize), 1usize), (16, (4, 4), 2), (64, (8, 8), 2), (256, (16, 16), 4)] {
            let lg = well_conditioned_lower(n, p as u64);
            let grid = Grid::new(&[shape.0, shape.1]).unwrap();
            let mut sim = Simulator::new(p);
            let dm = dist_tri(&lg, &grid);
            rec_tri_inv(&mut sim, &dm, p1).unwrap();
            let (s, _, _) = sim.critical_path(&MachineParams::latency_only()).unwrap();
            let logp = (p as f64).log2();
            ratios.push(s / (logp * logp));
        }
        let c = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(c <= 8.0, "latency/log^2 ratios {ratios:?}");
    }
}
