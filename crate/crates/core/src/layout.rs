//! Distributed matrices: a global dense or lower-triangular matrix mapped to
//! per-rank tiles by a cyclic or blocked (block-cyclic) layout over a 2D
//! grid slice, plus the charged redistribution between layouts.

use crate::costs;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::machine::{CostVector, Rank};
use crate::matrix::Matrix;
use crate::sim::Simulator;

/// Whether a distributed matrix is dense or lower-triangular. Triangular
/// matrices move only their nonzero count through the network, so the shape
/// participates in cost formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatShape {
    Dense,
    LowerTriangular,
}

impl MatShape {
    /// Words moved when transferring a whole r x c matrix of this shape.
    pub fn words(&self, r: usize, c: usize) -> f64 {
        match self {
            MatShape::Dense => costs::dense_words(r as f64, c as f64),
            MatShape::LowerTriangular => costs::tri_words(r as f64),
        }
    }
}

/// Element-to-rank map: axis index `i` with block size `b` over `e` owners
/// goes to owner `(i / b) % e`. Block size 1 is the cyclic layout; larger
/// blocks give the blocked panel layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    owner: Grid,
    row_block: usize,
    col_block: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    Cyclic,
    Blocked,
}

impl Layout {
    pub fn cyclic(owner: Grid) -> Result<Self> {
        Self::blocked(owner, 1, 1)
    }

    pub fn blocked(owner: Grid, row_block: usize, col_block: usize) -> Result<Self> {
        if owner.dims().len() != 2 {
            return Err(Error::Config(format!(
                "matrix layouts need a 2D owner slice, got {:?}",
                owner.dims()
            )));
        }
        if row_block == 0 || col_block == 0 {
            return Err(Error::Config("layout block sizes must be positive".into()));
        }
        Ok(Self { owner, row_block, col_block })
    }

    pub fn kind(&self) -> LayoutKind {
        if self.row_block == 1 && self.col_block == 1 {
            LayoutKind::Cyclic
        } else {
            LayoutKind::Blocked
        }
    }

    pub fn owner(&self) -> &Grid {
        &self.owner
    }

    pub fn grid_rows(&self) -> usize {
        self.owner.dims()[0]
    }

    pub fn grid_cols(&self) -> usize {
        self.owner.dims()[1]
    }

    pub fn blocks(&self) -> (usize, usize) {
        (self.row_block, self.col_block)
    }

    /// Owner coordinate of global element (i, j).
    pub fn owner_coord(&self, i: usize, j: usize) -> (usize, usize) {
        (
            (i / self.row_block) % self.grid_rows(),
            (j / self.col_block) % self.grid_cols(),
        )
    }

    /// Local tile position of global element (i, j).
    pub fn local_index(&self, i: usize, j: usize) -> (usize, usize) {
        let li = (i / self.row_block / self.grid_rows()) * self.row_block + i % self.row_block;
        let lj = (j / self.col_block / self.grid_cols()) * self.col_block + j % self.col_block;
        (li, lj)
    }

    fn axis_tile_len(&self, extent: usize, block: usize, owners: usize, which: usize) -> usize {
        // count of indices i in [0, extent) with (i/block) % owners == which
        let full_rounds = extent / (block * owners);
        let rem = extent - full_rounds * block * owners;
        let rem_here = rem.saturating_sub(which * block).min(block);
        full_rounds * block + rem_here
    }

    /// Tile dimensions at owner coordinate (x, y) for an n x m matrix.
    pub fn tile_dims(&self, n: usize, m: usize, x: usize, y: usize) -> (usize, usize) {
        (
            self.axis_tile_len(n, self.row_block, self.grid_rows(), x),
            self.axis_tile_len(m, self.col_block, self.grid_cols(), y),
        )
    }

    /// Checks the exactness constraints the blocked panel layouts assume and
    /// names the violated one.
    pub fn check_divisibility(&self, n: usize, m: usize) -> Result<()> {
        if self.row_block > 1 && n % self.row_block != 0 {
            return Err(Error::Config(format!(
                "row block {} does not divide matrix rows {n}",
                self.row_block
            )));
        }
        if self.col_block > 1 && m % self.col_block != 0 {
            return Err(Error::Config(format!(
                "column block {} does not divide matrix columns {m}",
                self.col_block
            )));
        }
        Ok(())
    }

    fn same_placement(&self, other: &Layout) -> bool {
        self.row_block == other.row_block
            && self.col_block == other.col_block
            && self.owner.dims() == other.owner.dims()
            && self.owner.ranks() == other.owner.ranks()
    }
}

/// A global matrix held as per-rank tiles. Reassembling the tiles per the
/// layout reproduces the global matrix bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    rows: usize,
    cols: usize,
    shape: MatShape,
    layout: Layout,
    tiles: Vec<Matrix>,
}

impl DistMatrix {
    /// Splits a global matrix into tiles; an initial condition, so it
    /// charges nothing.
    pub fn distribute(global: &Matrix, shape: MatShape, layout: Layout) -> Result<Self> {
        layout.check_divisibility(global.rows(), global.cols())?;
        if shape == MatShape::LowerTriangular && global.rows() != global.cols() {
            return Err(Error::Shape(format!(
                "lower-triangular matrices must be square, got {}x{}",
                global.rows(),
                global.cols()
            )));
        }
        let (gr, gc) = (layout.grid_rows(), layout.grid_cols());
        let mut tiles = Vec::with_capacity(gr * gc);
        for x in 0..gr {
            for y in 0..gc {
                let (tr, tc) = layout.tile_dims(global.rows(), global.cols(), x, y);
                tiles.push(Matrix::zeros(tr, tc));
            }
        }
        let mut dm = Self {
            rows: global.rows(),
            cols: global.cols(),
            shape,
            layout,
            tiles,
        };
        for i in 0..global.rows() {
            for j in 0..global.cols() {
                dm.set(i, j, global.get(i, j));
            }
        }
        Ok(dm)
    }

    /// Empty (all-zero) distributed matrix.
    pub fn zeros(rows: usize, cols: usize, shape: MatShape, layout: Layout) -> Result<Self> {
        DistMatrix::distribute(&Matrix::zeros(rows, cols), shape, layout)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> MatShape {
        self.shape
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn tile(&self, x: usize, y: usize) -> &Matrix {
        &self.tiles[x * self.layout.grid_cols() + y]
    }

    /// Rank owning global element (i, j).
    pub fn owner_rank(&self, i: usize, j: usize) -> Rank {
        let (x, y) = self.layout.owner_coord(i, j);
        self.layout.owner.rank_at(&[x, y])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (x, y) = self.layout.owner_coord(i, j);
        let (li, lj) = self.layout.local_index(i, j);
        self.tiles[x * self.layout.grid_cols() + y].get(li, lj)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (x, y) = self.layout.owner_coord(i, j);
        let (li, lj) = self.layout.local_index(i, j);
        self.tiles[x * self.layout.grid_cols() + y].set(li, lj, v);
    }

    /// Total words a transfer of this matrix moves (exact nonzero count for
    /// triangular shapes).
    pub fn transfer_words(&self) -> f64 {
        self.shape.words(self.rows, self.cols)
    }

    /// Reassembles the unique global matrix consistent with all tiles.
    /// Verification only; charges nothing.
    pub fn collect(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Contiguous sub-matrix re-indexed from zero, still cyclic on the same
    /// grid. Offsets must be multiples of the grid extents so that every
    /// element keeps its owning rank; this is index bookkeeping, not data
    /// movement.
    pub fn subview(
        &self,
        row_off: usize,
        rows: usize,
        col_off: usize,
        cols: usize,
        shape: MatShape,
    ) -> Result<DistMatrix> {
        if self.layout.kind() != LayoutKind::Cyclic {
            return Err(Error::Config("sub-views need a cyclic layout".into()));
        }
        let (gr, gc) = (self.layout.grid_rows(), self.layout.grid_cols());
        if row_off % gr != 0 || col_off % gc != 0 {
            return Err(Error::Config(format!(
                "sub-view offset ({row_off}, {col_off}) misaligned with grid {gr}x{gc}"
            )));
        }
        if row_off + rows > self.rows || col_off + cols > self.cols {
            return Err(Error::Shape("sub-view exceeds matrix bounds".into()));
        }
        let mut out = DistMatrix::zeros(rows, cols, shape, self.layout.clone())?;
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(row_off + i, col_off + j));
            }
        }
        Ok(out)
    }

    /// Sub-matrix of the columns whose cyclic class is in `[class_lo,
    /// class_hi)`, re-indexed and placed cyclically on `sub_grid` (the
    /// corresponding column band of the parent grid). Every element keeps
    /// its owning rank.
    pub fn subview_col_classes(
        &self,
        class_lo: usize,
        class_hi: usize,
        sub_grid: Grid,
    ) -> Result<DistMatrix> {
        if self.layout.kind() != LayoutKind::Cyclic {
            return Err(Error::Config("sub-views need a cyclic layout".into()));
        }
        let pc = self.layout.grid_cols();
        let width = class_hi - class_lo;
        if sub_grid.dims().len() != 2
            || sub_grid.dims()[0] != self.layout.grid_rows()
            || sub_grid.dims()[1] != width
        {
            return Err(Error::Config(format!(
                "column-class sub-grid must be {}x{width}, got {:?}",
                self.layout.grid_rows(),
                sub_grid.dims()
            )));
        }
        let col_ids = col_class_ids(self.cols, pc, class_lo, class_hi);
        let layout = Layout::cyclic(sub_grid)?;
        let mut out = DistMatrix::zeros(self.rows, col_ids.len(), self.shape, layout)?;
        for i in 0..self.rows {
            for (cj, &j) in col_ids.iter().enumerate() {
                out.set(i, cj, self.get(i, j));
            }
        }
        Ok(out)
    }

    /// Elementwise subtraction of a matrix in the same layout; purely local.
    pub fn sub_assign(&mut self, rhs: &DistMatrix) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape("subtraction of unequal shapes".into()));
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j) - rhs.get(i, j);
                self.set(i, j, v);
            }
        }
        Ok(())
    }

    /// Reads a contiguous block of global values without any placement
    /// bookkeeping. Callers charge the movement themselves.
    pub fn block_values(&self, row_off: usize, rows: usize, col_off: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(row_off + i, col_off + j));
            }
        }
        out
    }

    /// Copies a block back from a re-indexed sub-matrix; inverse of
    /// [`DistMatrix::subview`] with the same alignment requirement.
    pub fn write_block(&mut self, row_off: usize, col_off: usize, block: &DistMatrix) -> Result<()> {
        let (gr, gc) = (self.layout.grid_rows(), self.layout.grid_cols());
        if row_off % gr != 0 || col_off % gc != 0 {
            return Err(Error::Config(format!(
                "block offset ({row_off}, {col_off}) misaligned with grid {gr}x{gc}"
            )));
        }
        for i in 0..block.rows() {
            for j in 0..block.cols() {
                self.set(row_off + i, col_off + j, block.get(i, j));
            }
        }
        Ok(())
    }
}

/// Global column indices whose class modulo `pc` lies in `[lo, hi)`.
pub fn col_class_ids(cols: usize, pc: usize, lo: usize, hi: usize) -> Vec<usize> {
    (0..cols).filter(|c| (c % pc) >= lo && (c % pc) < hi).collect()
}

/// Moves a distributed matrix into a new layout, charging the all-to-all /
/// scatter / all-to-all sequence: an all-to-all on the source slice into a
/// blocked intermediate, a constant-fanout scatter hop toward the target
/// ranks, and an all-to-all on the target slice back to its layout. Source
/// and target identical means no movement and no cost.
pub fn redistribute(sim: &mut Simulator, dm: &DistMatrix, target: Layout) -> Result<DistMatrix> {
    if target.same_placement(&dm.layout) {
        return Ok(dm.clone());
    }
    let cost = redistribute_cost(
        dm.transfer_words(),
        dm.layout.owner().size(),
        target.owner().size(),
    );
    sim.charge_grid(dm.layout.owner(), cost.source)?;
    sim.charge_ranks(
        union_ranks(dm.layout.owner(), target.owner()),
        cost.middle,
    )?;
    sim.charge_grid(target.owner(), cost.target)?;
    DistMatrix::distribute(&dm.collect(), dm.shape, target)
}

/// The three per-participant charges of a redistribution of `words` total
/// words from `p_src` ranks to `p_tgt` ranks.
pub struct RedistCost {
    pub source: CostVector,
    pub middle: CostVector,
    pub target: CostVector,
}

impl RedistCost {
    pub fn total(&self) -> CostVector {
        self.source + self.middle + self.target
    }
}

pub fn redistribute_cost(words: f64, p_src: usize, p_tgt: usize) -> RedistCost {
    RedistCost {
        source: costs::alltoall(words / p_src as f64, p_src),
        middle: CostVector::new(2.0, words / p_tgt as f64, 0.0),
        target: costs::alltoall(words / p_tgt as f64, p_tgt),
    }
}

pub fn union_ranks(a: &Grid, b: &Grid) -> Vec<Rank> {
    let mut ranks: Vec<Rank> = a.ranks().iter().chain(b.ranks()).copied().collect();
    ranks.sort_unstable();
    ranks.dedup();
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::well_conditioned_lower;
    use crate::grid::grid_shape_2d;
    use crate::machine::MachineParams;

    fn cyclic_on(p_rows: usize, p_cols: usize) -> Layout {
        let g = Grid::new(&[p_rows, p_cols]).unwrap();
        Layout::cyclic(g).unwrap()
    }

    #[test]
    fn cyclic_ownership_matches_mod_arithmetic() {
        let mut global = Matrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                global.set(i, j, (10 * i + j) as f64);
            }
        }
        let dm = DistMatrix::distribute(&global, MatShape::Dense, cyclic_on(2, 2)).unwrap();
        // rank (0,0) holds elements (0,0),(0,2),(2,0),(2,2)
        let t = dm.tile(0, 0);
        assert_eq!(t.data(), &[0.0, 2.0, 20.0, 22.0]);
        assert_eq!(dm.owner_rank(1, 3), Rank(3));
        assert_eq!(dm.get(3, 1), 31.0);
    }

    #[test]
    fn single_rank_owns_everything() {
        let global = well_conditioned_lower(6, 3);
        let dm =
            DistMatrix::distribute(&global, MatShape::LowerTriangular, cyclic_on(1, 1)).unwrap();
        assert_eq!(dm.tile(0, 0), &global);
    }

    #[test]
    fn blocked_panels_follow_block_cyclic_rule() {
        // 8x8 on a 2x2 grid with 2x4 blocks: row blocks cycle over grid rows,
        // the two column blocks land one per grid column
        let mut global = Matrix::zeros(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                global.set(i, j, (i * 8 + j) as f64);
            }
        }
        let g = Grid::new(&[2, 2]).unwrap();
        let layout = Layout::blocked(g, 2, 4).unwrap();
        let dm = DistMatrix::distribute(&global, MatShape::Dense, layout).unwrap();
        assert_eq!(dm.layout().owner_coord(0, 0), (0, 0));
        assert_eq!(dm.layout().owner_coord(2, 0), (1, 0));
        assert_eq!(dm.layout().owner_coord(4, 5), (0, 1));
        let t = dm.tile(0, 0);
        assert_eq!((t.rows(), t.cols()), (4, 4));
        assert_eq!(t.row(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.row(2), &[32.0, 33.0, 34.0, 35.0]); // global row 4

        let bad = Layout::blocked(Grid::new(&[2, 2]).unwrap(), 3, 4).unwrap();
        let err = DistMatrix::distribute(&global, MatShape::Dense, bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn round_trip_over_layout_lattice() {
        for n in [4usize, 8, 12] {
            let global = well_conditioned_lower(n, n as u64);
            for p in [1usize, 2, 4] {
                let (a, b) = grid_shape_2d(p);
                let dm = DistMatrix::distribute(
                    &global,
                    MatShape::LowerTriangular,
                    cyclic_on(a, b),
                )
                .unwrap();
                assert_eq!(dm.collect(), global, "cyclic {a}x{b}, n={n}");
            }
            let g = Grid::new(&[2, 2]).unwrap();
            if n % 2 == 0 {
                let layout = Layout::blocked(g, 2, n / 2).unwrap();
                let dm = DistMatrix::distribute(&global, MatShape::Dense, layout).unwrap();
                assert_eq!(dm.collect(), global, "blocked, n={n}");
            }
        }
    }

    #[test]
    fn ownership_partitions_every_element() {
        let g = Grid::new(&[2, 3]).unwrap();
        let layout = Layout::cyclic(g).unwrap();
        let dm = DistMatrix::zeros(5, 7, MatShape::Dense, layout).unwrap();
        let mut counts = vec![0usize; 6];
        for i in 0..5 {
            for j in 0..7 {
                let (x, y) = dm.layout().owner_coord(i, j);
                counts[x * 3 + y] += 1;
            }
        }
        assert_eq!(counts.iter().sum::<usize>(), 35);
        let tile_total: usize = (0..2)
            .flat_map(|x| (0..3).map(move |y| (x, y)))
            .map(|(x, y)| dm.tile(x, y).rows() * dm.tile(x, y).cols())
            .sum();
        assert_eq!(tile_total, 35);
    }

    #[test]
    fn redistribute_preserves_values_and_charges() {
        let global = well_conditioned_lower(8, 11);
        let world = Grid::new(&[2, 2]).unwrap();
        let mut sim = Simulator::new(4);
        let dm =
            DistMatrix::distribute(&global, MatShape::LowerTriangular, cyclic_on(2, 2)).unwrap();

        // identity redistribution: zero cost
        let same = redistribute(&mut sim, &dm, cyclic_on(2, 2)).unwrap();
        assert!(sim.total().is_zero());
        assert_eq!(same.collect(), global);

        // shrink to the first half of the world
        let half = world.half(0, &[1, 2]).unwrap();
        let target = Layout::cyclic(half).unwrap();
        let out = redistribute(&mut sim, &dm, target).unwrap();
        assert_eq!(out.collect(), global);
        let total = sim.total();
        assert!(total.s > 0.0 && total.w > 0.0);
        // words scale like (matrix words / ranks) * log factors
        let words = costs::tri_words(8.0);
        let expect = redistribute_cost(words, 4, 2).total();
        let (_, r, c) = sim.critical_path(&MachineParams::bandwidth_only()).unwrap();
        assert_eq!(r, Rank(0));
        assert_eq!(c.w, expect.w);
    }
}
