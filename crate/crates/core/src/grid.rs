//! Virtual processor grids: multi-dimensional arrangements of world ranks,
//! with slicing (single index, full axis, strided range) and zero-cost
//! reshaped views given an explicit coordinate identification.

use crate::error::{Error, Result};
use crate::machine::Rank;

/// Per-axis selector for [`Grid::slice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisSel {
    /// Fix the axis at one index; the axis is dropped from the slice.
    At(usize),
    /// Keep the whole axis.
    All,
    /// Strided range `start, start+step, ...` while `< end`.
    Range { start: usize, step: usize, end: usize },
}

/// A grid of virtual processor ranks. The world grid maps coordinates to
/// ranks row-major (last axis fastest); views and slices carry their own
/// rank tables, so a coordinate lookup is always a table read.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    ranks: Vec<Rank>,
}

impl Grid {
    /// World grid over ranks `0..dims.product()`, row-major.
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("grid needs at least one dimension".into()));
        }
        if let Some(_) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::Config(format!("grid extent must be positive, got {dims:?}")));
        }
        let size: usize = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            ranks: (0..size).map(Rank).collect(),
        })
    }

    /// Grid over an explicit rank table in row-major coordinate order.
    pub fn from_ranks(dims: &[usize], ranks: Vec<Rank>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.iter().any(|&d| d == 0) || size != ranks.len() {
            return Err(Error::Config(format!(
                "rank table of {} entries does not fill grid {dims:?}",
                ranks.len()
            )));
        }
        Ok(Self { dims: dims.to_vec(), ranks })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn size(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[Rank] {
        &self.ranks
    }

    pub fn linear(&self, coord: &[usize]) -> usize {
        debug_assert_eq!(coord.len(), self.dims.len());
        let mut idx = 0;
        for (c, d) in coord.iter().zip(&self.dims) {
            debug_assert!(c < d);
            idx = idx * d + c;
        }
        idx
    }

    pub fn rank_at(&self, coord: &[usize]) -> Rank {
        self.ranks[self.linear(coord)]
    }

    pub fn coord_of(&self, mut linear: usize) -> Vec<usize> {
        let mut coord = vec![0; self.dims.len()];
        for (i, d) in self.dims.iter().enumerate().rev() {
            coord[i] = linear % d;
            linear /= d;
        }
        coord
    }

    /// Sub-grid selected per axis. `At` drops its axis, so slicing a 3D grid
    /// with `(At(x), All, At(z))` yields the 1D fiber over the middle axis.
    /// Selecting every axis with `At` leaves a zero-dimensional single-rank
    /// grid, reported with dims `[1]`.
    pub fn slice(&self, sel: &[AxisSel]) -> Result<Grid> {
        if sel.len() != self.dims.len() {
            return Err(Error::Config(format!(
                "slice has {} selectors for {} axes",
                sel.len(),
                self.dims.len()
            )));
        }
        let mut axis_indices: Vec<Vec<usize>> = Vec::with_capacity(sel.len());
        let mut out_dims = Vec::new();
        for (s, &d) in sel.iter().zip(&self.dims) {
            let idxs = match *s {
                AxisSel::At(i) => {
                    if i >= d {
                        return Err(Error::Config(format!("index {i} out of bounds for axis of extent {d}")));
                    }
                    vec![i]
                }
                AxisSel::All => (0..d).collect(),
                AxisSel::Range { start, step, end } => {
                    if step == 0 {
                        return Err(Error::Config("slice stride must be positive".into()));
                    }
                    let end = end.min(d);
                    let v: Vec<usize> = (start..end).step_by(step).collect();
                    if v.is_empty() {
                        return Err(Error::Config(format!(
                            "empty slice {start}:{step}:{end} on axis of extent {d}"
                        )));
                    }
                    v
                }
            };
            if !matches!(s, AxisSel::At(_)) {
                out_dims.push(idxs.len());
            }
            axis_indices.push(idxs);
        }
        if out_dims.is_empty() {
            out_dims.push(1);
        }
        let mut ranks = Vec::with_capacity(out_dims.iter().product());
        let mut coord = vec![0; self.dims.len()];
        collect_ranks(self, &axis_indices, 0, &mut coord, &mut ranks);
        Grid::from_ranks(&out_dims, ranks)
    }

    /// The same ranks under new coordinates. `map` takes a coordinate of the
    /// view to a coordinate of `self`; it must be a bijection onto the grid,
    /// otherwise this is a configuration error.
    pub fn reshape<F>(&self, new_dims: &[usize], map: F) -> Result<Grid>
    where
        F: Fn(&[usize]) -> Vec<usize>,
    {
        let size: usize = new_dims.iter().product();
        if size != self.size() {
            return Err(Error::Config(format!(
                "reshape to {new_dims:?} ({size} ranks) does not match grid of {} ranks",
                self.size()
            )));
        }
        let mut seen = vec![false; self.size()];
        let mut ranks = Vec::with_capacity(size);
        let view = Grid::new(new_dims)?;
        for i in 0..size {
            let nc = view.coord_of(i);
            let oc = map(&nc);
            if oc.len() != self.dims.len() || oc.iter().zip(&self.dims).any(|(c, d)| c >= d) {
                return Err(Error::Config(format!(
                    "coordinate identification maps {nc:?} outside the grid: {oc:?}"
                )));
            }
            let lin = self.linear(&oc);
            if seen[lin] {
                return Err(Error::Config(format!(
                    "coordinate identification is not a bijection: {oc:?} hit twice"
                )));
            }
            seen[lin] = true;
            ranks.push(self.ranks[lin]);
        }
        Grid::from_ranks(new_dims, ranks)
    }

    /// Consecutive chunk `i` of `count` equal pieces of the rank list, shaped
    /// `dims`. Used to hand disjoint sub-grids to parallel sub-problems.
    pub fn chunk(&self, i: usize, count: usize, dims: &[usize]) -> Result<Grid> {
        let size: usize = dims.iter().product();
        if count == 0 || self.size() % count != 0 || self.size() / count != size || i >= count {
            return Err(Error::Config(format!(
                "cannot take chunk {i} of {count} shaped {dims:?} from grid of {} ranks",
                self.size()
            )));
        }
        let ranks = self.ranks[i * size..(i + 1) * size].to_vec();
        Grid::from_ranks(dims, ranks)
    }

    /// First/second half of the rank list, shaped `dims`.
    pub fn half(&self, which: usize, dims: &[usize]) -> Result<Grid> {
        self.chunk(which, 2, dims)
    }
}

fn collect_ranks(
    grid: &Grid,
    axis_indices: &[Vec<usize>],
    axis: usize,
    coord: &mut Vec<usize>,
    out: &mut Vec<Rank>,
) {
    if axis == axis_indices.len() {
        out.push(grid.rank_at(coord));
        return;
    }
    for &i in &axis_indices[axis] {
        coord[axis] = i;
        collect_ranks(grid, axis_indices, axis + 1, coord, out);
    }
}

/// Near-square 2D shape `(a, b)` with `a * b = p` and `a <= b`: `a` is the
/// largest divisor of `p` at most `sqrt(p)`.
pub fn grid_shape_2d(p: usize) -> (usize, usize) {
    if p == 0 {
        return (0, 0);
    }
    let mut a = 1;
    let mut d = 1;
    while d * d <= p {
        if p % d == 0 {
            a = d;
        }
        d += 1;
    }
    (a, p / a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_sizes() {
        assert_eq!(Grid::new(&[2, 2, 4]).unwrap().size(), 16);
        assert_eq!(Grid::new(&[1]).unwrap().size(), 1);
        // the 3D solver grid shape
        let g = Grid::new(&[2, 2, 4]).unwrap();
        assert_eq!(g.dims(), &[2, 2, 4]);
        assert!(Grid::new(&[2, 0]).is_err());
    }

    #[test]
    fn row_major_rank_map() {
        let g = Grid::new(&[2, 3]).unwrap();
        assert_eq!(g.rank_at(&[0, 0]), Rank(0));
        assert_eq!(g.rank_at(&[0, 2]), Rank(2));
        assert_eq!(g.rank_at(&[1, 0]), Rank(3));
        assert_eq!(g.coord_of(5), vec![1, 2]);
    }

    #[test]
    fn slice_fiber_and_stride() {
        let g = Grid::new(&[2, 3, 2]).unwrap();
        let fiber = g.slice(&[AxisSel::At(1), AxisSel::All, AxisSel::At(0)]).unwrap();
        assert_eq!(fiber.dims(), &[3]);
        assert_eq!(fiber.ranks(), &[Rank(6), Rank(8), Rank(10)]);

        let strided = g
            .slice(&[AxisSel::All, AxisSel::Range { start: 0, step: 2, end: 3 }, AxisSel::At(1)])
            .unwrap();
        assert_eq!(strided.dims(), &[2, 2]);
        assert_eq!(strided.ranks(), &[Rank(1), Rank(5), Rank(7), Rank(11)]);

        let single = g.slice(&[AxisSel::At(0), AxisSel::At(0), AxisSel::At(0)]).unwrap();
        assert_eq!(single.dims(), &[1]);
        assert_eq!(single.ranks(), &[Rank(0)]);

        assert!(g.slice(&[AxisSel::At(2), AxisSel::All, AxisSel::All]).is_err());
    }

    #[test]
    fn slice_ranks_subset_of_parent() {
        let g = Grid::new(&[4, 4]).unwrap();
        let s = g
            .slice(&[AxisSel::Range { start: 1, step: 2, end: 4 }, AxisSel::All])
            .unwrap();
        for r in s.ranks() {
            assert!(g.ranks().contains(r));
        }
    }

    #[test]
    fn reshape_4d_view_of_square_grid() {
        // 4x4 grid viewed as p1 x sqrt(p2) x p1 x sqrt(p2) = 2x2x2x2 with
        // (x1,x2,y1,y2) -> (x1 + p1*x2, y1 + p1*y2)
        let p1 = 2usize;
        let g = Grid::new(&[4, 4]).unwrap();
        let v = g
            .reshape(&[2, 2, 2, 2], |c| vec![c[0] + p1 * c[1], c[2] + p1 * c[3]])
            .unwrap();
        assert_eq!(v.size(), 16);
        assert_eq!(v.rank_at(&[1, 1, 0, 1]), g.rank_at(&[3, 2]));

        // identity reshape keeps coordinates
        let id = g.reshape(&[4, 4], |c| c.to_vec()).unwrap();
        assert_eq!(id, g);
    }

    #[test]
    fn reshape_inversion_view() {
        // sqrt(p) x sqrt(p) -> sqrt(q) x sqrt(q) x sqrt(r) x sqrt(r) with
        // (u1,u2,v1,v2) -> (u1 + sqrt(q)*v1, u2 + sqrt(q)*v2); p=16, q=r=4
        let g = Grid::new(&[4, 4]).unwrap();
        let sq = 2usize;
        let v = g
            .reshape(&[2, 2, 2, 2], |c| vec![c[0] + sq * c[2], c[1] + sq * c[3]])
            .unwrap();
        assert_eq!(v.rank_at(&[0, 1, 1, 0]), g.rank_at(&[2, 1]));
    }

    #[test]
    fn reshape_rejects_non_bijections() {
        let g = Grid::new(&[4]).unwrap();
        assert!(g.reshape(&[4], |_| vec![0]).is_err());
        assert!(g.reshape(&[2], |c| c.to_vec()).is_err());
    }

    #[test]
    fn chunks_are_disjoint_and_ordered() {
        let g = Grid::new(&[4, 4]).unwrap();
        let c0 = g.chunk(0, 4, &[2, 2]).unwrap();
        let c3 = g.chunk(3, 4, &[2, 2]).unwrap();
        assert_eq!(c0.ranks(), &[Rank(0), Rank(1), Rank(2), Rank(3)]);
        assert_eq!(c3.ranks(), &[Rank(12), Rank(13), Rank(14), Rank(15)]);
    }

    #[test]
    fn near_square_shapes() {
        assert_eq!(grid_shape_2d(16), (4, 4));
        assert_eq!(grid_shape_2d(8), (2, 4));
        assert_eq!(grid_shape_2d(2), (1, 2));
        assert_eq!(grid_shape_2d(1), (1, 1));
        assert_eq!(grid_shape_2d(12), (3, 4));
    }
}
