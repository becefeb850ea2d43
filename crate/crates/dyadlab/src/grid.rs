//! Dyadic grids, cubes, lattice boxes, and piecewise-constant functions.
//!
//! A [`DyadicGrid`] is a half-open root box in dimension 1 or 2 together
//! with `depth` levels of dyadic refinement. Functions are piecewise
//! constant on the finest cells, so every average and mass below is an
//! exact finite sum over the representation (computed with compensated
//! summation for reproducibility).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ksum::Ksum;
use crate::{Error, Result};

/// A bounded dyadic grid: a half-open root box with `depth` levels of
/// refinement. Level-`k` cubes tile the root with `2^(k d)` congruent cubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicGrid {
    origin: [f64; 2],
    side: f64,
    dimension: usize,
    depth: u32,
}

impl DyadicGrid {
    pub fn new_1d(origin: f64, side: f64, depth: u32) -> Result<Arc<Self>> {
        Self::new([origin, 0.0], side, 1, depth)
    }

    pub fn new_2d(origin: [f64; 2], side: f64, depth: u32) -> Result<Arc<Self>> {
        Self::new(origin, side, 2, depth)
    }

    pub fn new(origin: [f64; 2], side: f64, dimension: usize, depth: u32) -> Result<Arc<Self>> {
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::Contract(format!("dimension must be 1 or 2, got {dimension}")));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::Contract(format!("root side must be positive, got {side}")));
        }
        if depth < 1 || depth > 26 {
            return Err(Error::Contract(format!("depth must be in 1..=26, got {depth}")));
        }
        if dimension == 2 && depth > 13 {
            return Err(Error::Contract(format!("2-d depth must be <= 13, got {depth}")));
        }
        Ok(Arc::new(Self { origin, side, dimension, depth }))
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Cells per axis at the finest level: `2^depth`.
    pub fn cells_per_side(&self) -> u32 {
        1u32 << self.depth
    }

    /// Total number of finest cells.
    pub fn num_cells(&self) -> usize {
        let n = self.cells_per_side() as usize;
        if self.dimension == 1 { n } else { n * n }
    }

    /// Side length of a finest cell.
    pub fn cell_width(&self) -> f64 {
        self.side / self.cells_per_side() as f64
    }

    /// Volume of a finest cell.
    pub fn cell_volume(&self) -> f64 {
        let h = self.cell_width();
        if self.dimension == 1 { h } else { h * h }
    }

    /// Side length of a level-`k` cube.
    pub fn level_side(&self, level: u32) -> f64 {
        self.side / (1u64 << level) as f64
    }

    /// Center coordinates of a finest cell given by axis indices.
    pub fn cell_center(&self, ix: u32, iy: u32) -> [f64; 2] {
        let h = self.cell_width();
        [
            self.origin[0] + (ix as f64 + 0.5) * h,
            if self.dimension == 2 { self.origin[1] + (iy as f64 + 0.5) * h } else { 0.0 },
        ]
    }

    /// Flat row-major index of a finest cell.
    pub fn cell_index(&self, ix: u32, iy: u32) -> usize {
        debug_assert!(ix < self.cells_per_side());
        if self.dimension == 1 {
            ix as usize
        } else {
            debug_assert!(iy < self.cells_per_side());
            iy as usize * self.cells_per_side() as usize + ix as usize
        }
    }

    /// The root cube.
    pub fn root(&self) -> Cube {
        Cube { level: 0, index: [0, 0] }
    }

    /// All dyadic cubes of the grid, coarse to fine.
    pub fn dyadic_cubes(&self) -> Vec<Cube> {
        let mut out = Vec::new();
        for level in 0..=self.depth {
            let n = 1u32 << level;
            for iy in 0..(if self.dimension == 2 { n } else { 1 }) {
                for ix in 0..n {
                    out.push(Cube { level, index: [ix, iy] });
                }
            }
        }
        out
    }

    /// Dyadic cubes contained in `root`, i.e. the family `D(root)`.
    pub fn dyadic_cubes_within(&self, root: &Cube) -> Vec<Cube> {
        let mut out = Vec::new();
        for level in root.level..=self.depth {
            let shift = level - root.level;
            let lo = [root.index[0] << shift, root.index[1] << shift];
            let n = 1u32 << shift;
            for iy in 0..(if self.dimension == 2 { n } else { 1 }) {
                for ix in 0..n {
                    out.push(Cube { level, index: [lo[0] + ix, lo[1] + iy] });
                }
            }
        }
        out
    }

    /// Every half-open lattice interval `[i*h, j*h)` of a one-dimensional
    /// grid, `i < j`. There are `n(n+1)/2` of them for `n` cells.
    pub fn enumerate_boxes_1d(&self) -> Result<impl Iterator<Item = LatticeBox> + '_> {
        if self.dimension != 1 {
            return Err(Error::Unsupported(
                "exhaustive interval enumeration is defined only in dimension 1".into(),
            ));
        }
        let n = self.cells_per_side();
        Ok((0..n).flat_map(move |i| {
            (i + 1..=n).map(move |j| LatticeBox { lo: [i, 0], hi: [j, 1] })
        }))
    }
}

/// A dyadic cube addressed by `(level, index)`; coordinates of the index
/// each lie in `[0, 2^level)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    level: u32,
    index: [u32; 2],
}

impl Cube {
    pub fn new(grid: &DyadicGrid, level: u32, index: [u32; 2]) -> Result<Self> {
        if level > grid.depth() {
            return Err(Error::Domain(format!(
                "cube level {level} exceeds grid depth {}",
                grid.depth()
            )));
        }
        let n = 1u32 << level;
        if index[0] >= n || (grid.dimension() == 2 && index[1] >= n) {
            return Err(Error::Domain(format!("cube index {index:?} out of range at level {level}")));
        }
        let index = if grid.dimension() == 1 { [index[0], 0] } else { index };
        Ok(Self { level, index })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> [u32; 2] {
        self.index
    }

    /// Side length within `grid`.
    pub fn side(&self, grid: &DyadicGrid) -> f64 {
        grid.level_side(self.level)
    }

    /// Volume within `grid`.
    pub fn volume(&self, grid: &DyadicGrid) -> f64 {
        let s = self.side(grid);
        if grid.dimension() == 1 { s } else { s * s }
    }

    /// Center coordinates within `grid`.
    pub fn center(&self, grid: &DyadicGrid) -> [f64; 2] {
        let s = self.side(grid);
        [
            grid.origin()[0] + (self.index[0] as f64 + 0.5) * s,
            if grid.dimension() == 2 {
                grid.origin()[1] + (self.index[1] as f64 + 0.5) * s
            } else {
                0.0
            },
        ]
    }

    pub fn parent(&self) -> Option<Cube> {
        if self.level == 0 {
            None
        } else {
            Some(Cube { level: self.level - 1, index: [self.index[0] / 2, self.index[1] / 2] })
        }
    }

    /// The `2^d` children, or an empty vector at the finest level.
    pub fn children(&self, grid: &DyadicGrid) -> Vec<Cube> {
        if self.level >= grid.depth() {
            return Vec::new();
        }
        let base = [self.index[0] * 2, self.index[1] * 2];
        let mut out = Vec::with_capacity(1 << grid.dimension());
        for dy in 0..(if grid.dimension() == 2 { 2 } else { 1 }) {
            for dx in 0..2 {
                out.push(Cube { level: self.level + 1, index: [base[0] + dx, base[1] + dy] });
            }
        }
        out
    }

    pub fn contains(&self, other: &Cube) -> bool {
        if other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        other.index[0] >> shift == self.index[0] && other.index[1] >> shift == self.index[1]
    }

    /// The finest-cell range covered by this cube.
    pub fn to_box(&self, grid: &DyadicGrid) -> LatticeBox {
        let shift = grid.depth() - self.level;
        let lo = [self.index[0] << shift, self.index[1] << shift];
        let w = 1u32 << shift;
        LatticeBox {
            lo,
            hi: [lo[0] + w, if grid.dimension() == 2 { lo[1] + w } else { 1 }],
        }
    }
}

/// A half-open product of lattice-aligned intervals at the finest
/// resolution. In dimension 1 the second axis is fixed to `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    lo: [u32; 2],
    hi: [u32; 2],
}

impl LatticeBox {
    pub fn new(grid: &DyadicGrid, lo: [u32; 2], hi: [u32; 2]) -> Result<Self> {
        let (lo, hi) = if grid.dimension() == 1 {
            ([lo[0], 0], [hi[0], 1])
        } else {
            (lo, hi)
        };
        let n = grid.cells_per_side();
        let ok_axis = |l: u32, h: u32, n: u32| l < h && h <= n;
        if !ok_axis(lo[0], hi[0], n) || !ok_axis(lo[1], hi[1], if grid.dimension() == 2 { n } else { 1 }) {
            return Err(Error::Domain(format!("box {lo:?}..{hi:?} outside grid or empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> [u32; 2] {
        self.lo
    }

    pub fn hi(&self) -> [u32; 2] {
        self.hi
    }

    /// Number of finest cells covered.
    pub fn num_cells(&self) -> usize {
        (self.hi[0] - self.lo[0]) as usize * (self.hi[1] - self.lo[1]) as usize
    }

    pub fn volume(&self, grid: &DyadicGrid) -> f64 {
        self.num_cells() as f64 * grid.cell_volume()
    }

    pub fn contains_cell(&self, ix: u32, iy: u32) -> bool {
        ix >= self.lo[0] && ix < self.hi[0] && iy >= self.lo[1] && iy < self.hi[1]
    }

    pub fn intersect(&self, other: &LatticeBox) -> Option<LatticeBox> {
        let lo = [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])];
        let hi = [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])];
        if lo[0] < hi[0] && lo[1] < hi[1] {
            Some(LatticeBox { lo, hi })
        } else {
            None
        }
    }

    /// Row-major flat indices of the covered cells.
    pub fn cells<'a>(&'a self, grid: &'a DyadicGrid) -> impl Iterator<Item = usize> + 'a {
        let n = grid.cells_per_side() as usize;
        let dim1 = grid.dimension() == 1;
        (self.lo[1]..self.hi[1]).flat_map(move |iy| {
            (self.lo[0]..self.hi[0])
                .map(move |ix| if dim1 { ix as usize } else { iy as usize * n + ix as usize })
        })
    }

    /// Geometric bounds `[lo, hi)` of the box in physical coordinates.
    pub fn bounds(&self, grid: &DyadicGrid) -> ([f64; 2], [f64; 2]) {
        let h = grid.cell_width();
        let o = grid.origin();
        (
            [o[0] + self.lo[0] as f64 * h, o[1] + self.lo[1] as f64 * h],
            [o[0] + self.hi[0] as f64 * h, o[1] + self.hi[1] as f64 * h],
        )
    }
}

/// A region of the grid over which averages can be taken: a dyadic cube or
/// a general lattice-aligned box.
pub trait GridRegion {
    fn region_box(&self, grid: &DyadicGrid) -> LatticeBox;
}

impl GridRegion for Cube {
    fn region_box(&self, grid: &DyadicGrid) -> LatticeBox {
        self.to_box(grid)
    }
}

impl GridRegion for LatticeBox {
    fn region_box(&self, _grid: &DyadicGrid) -> LatticeBox {
        *self
    }
}

/// The exponent in an average `<f>_{q,E}`: the signed mean, a power mean
/// with exponent `q` of `|f|`, or the essential supremum of `|f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AvgExponent {
    Linear,
    Lq(f64),
    Sup,
}

/// A real-valued, piecewise-constant function on the finest cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<DyadicGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(grid: Arc<DyadicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Contract(format!(
                "expected {} cell values, got {}",
                grid.num_cells(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite cell value {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<DyadicGrid>, c: f64) -> Self {
        let n = grid.num_cells();
        Self { grid, values: vec![c; n] }
    }

    /// Sample a function of the cell center into a grid function.
    pub fn sample(grid: Arc<DyadicGrid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let n = grid.cells_per_side();
        let mut values = Vec::with_capacity(grid.num_cells());
        for iy in 0..(if grid.dimension() == 2 { n } else { 1 }) {
            for ix in 0..n {
                values.push(f(grid.cell_center(ix, iy)));
            }
        }
        Self::from_values(grid, values)
    }

    /// Indicator of a lattice box.
    pub fn indicator(grid: Arc<DyadicGrid>, b: &LatticeBox) -> Self {
        let mut values = vec![0.0; grid.num_cells()];
        for c in b.cells(&grid) {
            values[c] = 1.0;
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<DyadicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Pointwise map, preserving the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Contract("grid mismatch in zip_with".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid.clone(), values)
    }

    /// Represent the same piecewise-constant function on a grid refined by
    /// `extra` levels (each cell value is replicated into its subcells).
    pub fn refine(&self, extra: u32) -> Result<Self> {
        let g = &self.grid;
        let fine = DyadicGrid::new(g.origin(), g.side(), g.dimension(), g.depth() + extra)?;
        let scale = 1u32 << extra;
        let n_f = fine.cells_per_side();
        let mut values = Vec::with_capacity(fine.num_cells());
        for iy in 0..(if g.dimension() == 2 { n_f } else { 1 }) {
            for ix in 0..n_f {
                values.push(self.values[g.cell_index(ix / scale, if g.dimension() == 2 { iy / scale } else { 0 })]);
            }
        }
        Self::from_values(fine, values)
    }

    /// Integral over the whole root box.
    pub fn integral(&self) -> f64 {
        let mut acc = Ksum::new();
        for &v in &self.values {
            acc.add(v);
        }
        acc.total() * self.grid.cell_volume()
    }

    /// Integral of `f` over a region (signed).
    pub fn integral_over(&self, region: &impl GridRegion) -> f64 {
        let b = region.region_box(&self.grid);
        let mut acc = Ksum::new();
        for c in b.cells(&self.grid) {
            acc.add(self.values[c]);
        }
        acc.total() * self.grid.cell_volume()
    }

    /// The average `<f>_{q,E}`: for finite `q` the exact power mean of
    /// `|f|` over the region, for [`AvgExponent::Sup`] the maximum of `|f|`
    /// over its cells, and for [`AvgExponent::Linear`] the signed mean.
    pub fn average(&self, region: &impl GridRegion, q: AvgExponent) -> Result<f64> {
        let b = region.region_box(&self.grid);
        self.check_box(&b)?;
        match q {
            AvgExponent::Linear => {
                let mut acc = Ksum::new();
                for c in b.cells(&self.grid) {
                    acc.add(self.values[c]);
                }
                Ok(acc.total() / b.num_cells() as f64)
            }
            AvgExponent::Sup => {
                let mut m = 0.0f64;
                for c in b.cells(&self.grid) {
                    m = m.max(self.values[c].abs());
                }
                Ok(m)
            }
            AvgExponent::Lq(q) => {
                if !(q > 0.0) {
                    return Err(Error::Contract(format!("average exponent must be positive, got {q}")));
                }
                let mut acc = Ksum::new();
                for c in b.cells(&self.grid) {
                    acc.add(self.values[c].abs().powf(q));
                }
                Ok((acc.total() / b.num_cells() as f64).powf(1.0 / q))
            }
        }
    }

    /// `w(E) = ∫_E w dx` for a nonnegative weight function.
    pub fn weight_mass(&self, region: &impl GridRegion) -> Result<f64> {
        let b = region.region_box(&self.grid);
        self.check_box(&b)?;
        let mut acc = Ksum::new();
        for c in b.cells(&self.grid) {
            let v = self.values[c];
            if v < 0.0 {
                return Err(Error::Contract(format!("weight_mass requires w >= 0, found {v}")));
            }
            acc.add(v);
        }
        Ok(acc.total() * self.grid.cell_volume())
    }

    fn check_box(&self, b: &LatticeBox) -> Result<()> {
        let n = self.grid.cells_per_side();
        let ny = if self.grid.dimension() == 2 { n } else { 1 };
        if b.hi[0] > n || b.hi[1] > ny || b.lo[0] >= b.hi[0] || b.lo[1] >= b.hi[1] {
            return Err(Error::Domain(format!("box {:?}..{:?} outside grid", b.lo, b.hi)));
        }
        Ok(())
    }
}

/// Serialized form of a grid function: grid geometry plus row-major values
/// at the finest level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunctionJson {
    pub origin: Vec<f64>,
    pub side: f64,
    pub dimension: usize,
    pub depth: u32,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn to_json(&self) -> GridFunctionJson {
        let g = &self.grid;
        GridFunctionJson {
            origin: g.origin()[..g.dimension()].to_vec(),
            side: g.side(),
            dimension: g.dimension(),
            depth: g.depth(),
            values: self.values.clone(),
        }
    }

    pub fn from_json(j: &GridFunctionJson) -> Result<Self> {
        let mut origin = [0.0; 2];
        for (i, &v) in j.origin.iter().take(2).enumerate() {
            origin[i] = v;
        }
        let grid = DyadicGrid::new(origin, j.side, j.dimension, j.depth)?;
        Self::from_values(grid, j.values.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(depth: u32) -> Arc<DyadicGrid> {
        DyadicGrid::new_1d(0.0, 1.0, depth).unwrap()
    }

    fn half_indicator(depth: u32) -> GridFunction {
        let g = unit_grid(depth);
        let half = g.cells_per_side() / 2;
        let b = LatticeBox::new(&g, [0, 0], [half, 1]).unwrap();
        GridFunction::indicator(g, &b)
    }

    #[test]
    fn constant_average_is_one() {
        let g = unit_grid(3);
        let f = GridFunction::constant(g.clone(), 1.0);
        let root = g.root();
        assert_eq!(f.average(&root, AvgExponent::Lq(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn indicator_mass_is_half() {
        let f = half_indicator(4);
        let root = f.grid().root();
        assert_eq!(f.average(&root, AvgExponent::Lq(1.0)).unwrap(), 0.5);
    }

    #[test]
    fn l2_average_of_indicator() {
        // Direct integral of f^2 over cells: f^2 = f for an indicator, so
        // the oracle is sqrt(mass/|Q|) = sqrt(1/2).
        let f = half_indicator(5);
        let root = f.grid().root();
        let direct: f64 = {
            let mass: f64 = f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_volume();
            mass.sqrt()
        };
        let got = f.average(&root, AvgExponent::Lq(2.0)).unwrap();
        assert!((got - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((got - direct).abs() < 1e-15);
    }

    #[test]
    fn weight_mass_on_quarter() {
        let g = unit_grid(4);
        let w = GridFunction::constant(g.clone(), 1.0);
        let quarter = LatticeBox::new(&g, [0, 0], [4, 1]).unwrap();
        assert_eq!(w.weight_mass(&quarter).unwrap(), 0.25);
    }

    #[test]
    fn weight_mass_matches_midpoint_rule() {
        // w(x) = x^{-1/2} sampled at cell midpoints; independent plain-loop sum.
        let g = unit_grid(10);
        let w = GridFunction::sample(g.clone(), |x| x[0].powf(-0.5)).unwrap();
        let got = w.weight_mass(&g.root()).unwrap();
        let h = g.cell_width();
        let mut expect = 0.0;
        for i in 0..g.cells_per_side() {
            expect += ((i as f64 + 0.5) * h).powf(-0.5) * h;
        }
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn weight_mass_disjoint_support() {
        let g = unit_grid(1);
        let left = LatticeBox::new(&g, [0, 0], [1, 1]).unwrap();
        let right = LatticeBox::new(&g, [1, 0], [2, 1]).unwrap();
        let w = GridFunction::indicator(g, &left).map(|v| 2.0 * v).unwrap();
        assert_eq!(w.weight_mass(&right).unwrap(), 0.0);
    }

    #[test]
    fn negative_weight_rejected() {
        let g = unit_grid(1);
        let w = GridFunction::from_values(g.clone(), vec![1.0, -0.5]).unwrap();
        assert!(matches!(w.weight_mass(&g.root()), Err(Error::Contract(_))));
    }

    #[test]
    fn box_outside_grid_rejected() {
        let g = unit_grid(2);
        assert!(LatticeBox::new(&g, [0, 0], [5, 1]).is_err());
        assert!(LatticeBox::new(&g, [2, 0], [2, 1]).is_err());
    }

    #[test]
    fn enumerate_boxes_counts() {
        let g1 = unit_grid(1);
        let boxes: Vec<_> = g1.enumerate_boxes_1d().unwrap().collect();
        assert_eq!(boxes.len(), 3);
        let g2 = unit_grid(2);
        assert_eq!(g2.enumerate_boxes_1d().unwrap().count(), 10);
        let g10 = unit_grid(10);
        // n(n+1)/2 for n = 1024
        assert_eq!(g10.enumerate_boxes_1d().unwrap().count(), 524_800);
    }

    #[test]
    fn enumerate_boxes_unsupported_in_2d() {
        let g = DyadicGrid::new_2d([0.0, 0.0], 1.0, 3).unwrap();
        assert!(g.enumerate_boxes_1d().is_err());
    }

    #[test]
    fn partition_additivity() {
        let g = DyadicGrid::new_2d([0.0, 0.0], 2.0, 4).unwrap();
        let f = GridFunction::sample(g.clone(), |x| (7.3 * x[0]).sin() + x[1] * x[1]).unwrap();
        for q in g.dyadic_cubes() {
            let kids = q.children(&g);
            if kids.is_empty() {
                continue;
            }
            let mut lhs = Ksum::new();
            for k in &kids {
                lhs.add(k.volume(&g) * f.average(k, AvgExponent::Linear).unwrap());
            }
            let rhs = q.volume(&g) * f.average(&q, AvgExponent::Linear).unwrap();
            assert!(
                (lhs.total() - rhs).abs() <= 1e-13 * rhs.abs().max(1.0),
                "additivity failed on {q:?}"
            );
        }
    }

    #[test]
    fn sup_average_is_max_cell_value() {
        let g = unit_grid(5);
        let f = GridFunction::sample(g.clone(), |x| (13.0 * x[0]).cos() - 0.3).unwrap();
        for b in g.enumerate_boxes_1d().unwrap().step_by(17) {
            let sup = f.average(&b, AvgExponent::Sup).unwrap();
            let direct = b.cells(&g).map(|c| f.value(c).abs()).fold(0.0f64, f64::max);
            assert_eq!(sup, direct);
        }
    }

    #[test]
    fn holder_monotonicity_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let g = unit_grid(6);
        let n = g.cells_per_side();
        for _ in 0..1000 {
            let f = GridFunction::from_values(
                g.clone(),
                (0..g.num_cells()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(i + 1..=n);
            let b = LatticeBox::new(&g, [i, 0], [j, 1]).unwrap();
            let q1 = rng.gen_range(0.3..2.0);
            let q2 = q1 + rng.gen_range(0.0..2.0);
            let a1 = f.average(&b, AvgExponent::Lq(q1)).unwrap();
            let a2 = f.average(&b, AvgExponent::Lq(q2)).unwrap();
            let asup = f.average(&b, AvgExponent::Sup).unwrap();
            assert!(a1 <= a2 * (1.0 + 1e-12));
            assert!(a2 <= asup * (1.0 + 1e-12));
        }
    }

    #[test]
    fn json_round_trip() {
        let g = DyadicGrid::new_2d([-1.0, 0.5], 2.0, 3).unwrap();
        let f = GridFunction::sample(g, |x| x[0] + 10.0 * x[1]).unwrap();
        let j = serde_json::to_string(&f.to_json()).unwrap();
        let back: GridFunctionJson = serde_json::from_str(&j).unwrap();
        let f2 = GridFunction::from_json(&back).unwrap();
        assert_eq!(f, f2);
    }

    #[test]
    fn cube_geometry() {
        let g = DyadicGrid::new_1d(-1.0, 2.0, 3).unwrap();
        let q = Cube::new(&g, 2, [1, 0]).unwrap();
        assert_eq!(q.side(&g), 0.5);
        assert_eq!(q.volume(&g), 0.5);
        assert_eq!(q.center(&g)[0], -0.25);
        let kids = q.children(&g);
        assert_eq!(kids.len(), 2);
        assert!(kids.iter().all(|k| k.parent() == Some(q)));
        assert!(kids.iter().all(|k| q.contains(k)));
    }
}
