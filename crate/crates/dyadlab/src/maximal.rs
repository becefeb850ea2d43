//! Maximal-type operators over configurable cube families.
//!
//! The same family abstraction backs the Hardy-Littlewood maximal function,
//! the sharp maximal function, its weak and median variants, and every
//! supremum-over-cubes quantity in the weights and BMO modules. Families
//! are realized as finite collections of lattice boxes:
//!
//! - `Dyadic`: all dyadic cubes of the grid;
//! - `Full1d`: every lattice interval of a one-dimensional grid (the
//!   exhaustive realization of "all cubes" at desk scale);
//! - `ShiftedDyadic`: dyadic cubes of the base grid plus the one-third
//!   shifted grids, rounded to the lattice (the standard surrogate for all
//!   axis-parallel cubes, and the non-dyadic family of record in
//!   dimension 2);
//! - `LocalizedDyadic(Q0)`: dyadic cubes contained in `Q0`.
//!
//! Brute force is preferred throughout; at the grid sizes this crate
//! targets, transparency beats asymptotics.

use crate::grid::{AvgExponent, Cube, DyadicGrid, GridFunction, GridRegion, LatticeBox};
use crate::ksum::Ksum;
use crate::{Error, Result};

/// The cube family over which a supremum is taken.
#[derive(Debug, Clone, PartialEq)]
pub enum MaximalFlavor {
    Dyadic,
    Full1d,
    ShiftedDyadic,
    LocalizedDyadic(Cube),
}

/// Default level-set fraction in median oscillations: `2^{-d-2}`.
pub fn default_lambda(dimension: usize) -> f64 {
    0.25 / (1u32 << dimension) as f64
}

/// Materialize the boxes of a cube family.
pub fn family_boxes(grid: &DyadicGrid, flavor: &MaximalFlavor) -> Result<Vec<LatticeBox>> {
    match flavor {
        MaximalFlavor::Dyadic => Ok(grid.dyadic_cubes().iter().map(|q| q.to_box(grid)).collect()),
        MaximalFlavor::LocalizedDyadic(q0) => {
            Ok(grid.dyadic_cubes_within(q0).iter().map(|q| q.to_box(grid)).collect())
        }
        MaximalFlavor::Full1d => Ok(grid.enumerate_boxes_1d()?.collect()),
        MaximalFlavor::ShiftedDyadic => Ok(shifted_dyadic_boxes(grid)),
    }
}

/// Dyadic cubes of the base grid plus the 3^d one-third-shift family,
/// with shifts rounded to the finest lattice and boxes clipped to the root.
pub fn shifted_dyadic_boxes(grid: &DyadicGrid) -> Vec<LatticeBox> {
    let n = grid.cells_per_side();
    let shifts_y: &[u32] = if grid.dimension() == 2 { &[0, 1, 2] } else { &[0] };
    let mut out = Vec::new();
    for level in 0..=grid.depth() {
        let w = 1u32 << (grid.depth() - level); // cells per cube side
        for &sy in shifts_y {
            for sx in 0..3u32 {
                // lattice-rounded one-third shifts of the level grid
                let ox = (sx * w) / 3;
                let oy = (sy * w) / 3;
                if (ox == 0) != (sx == 0) || (oy == 0) != (sy == 0) {
                    continue; // shift collapsed onto the unshifted grid
                }
                let mut y = oy;
                loop {
                    let hi_y = if grid.dimension() == 2 { y + w } else { 1 };
                    if hi_y > n && grid.dimension() == 2 {
                        break;
                    }
                    let mut x = ox;
                    while x + w <= n {
                        out.push(LatticeBox::new(grid, [x, y], [x + w, hi_y]).expect("in range"));
                        x += w;
                    }
                    if grid.dimension() == 1 {
                        break;
                    }
                    y += w;
                }
            }
        }
    }
    out.sort_by_key(|b| (b.lo(), b.hi()));
    out.dedup();
    out
}

/// Mean of `|f|` over a box.
fn abs_mean(f: &GridFunction, b: &LatticeBox) -> f64 {
    let mut acc = Ksum::new();
    for c in b.cells(f.grid()) {
        acc.add(f.value(c).abs());
    }
    acc.total() / b.num_cells() as f64
}

/// Mean oscillation `<|f - <f>_Q|>_Q` over a box.
pub fn mean_oscillation(f: &GridFunction, region: &impl GridRegion) -> f64 {
    let b = region.region_box(f.grid());
    let mean = f.average(&b, AvgExponent::Linear).expect("box in grid");
    let mut acc = Ksum::new();
    for c in b.cells(f.grid()) {
        acc.add((f.value(c) - mean).abs());
    }
    acc.total() / b.num_cells() as f64
}

/// Paint `per-box value -> pointwise supremum` over all boxes of a family.
fn paint_sup(
    f: &GridFunction,
    flavor: &MaximalFlavor,
    box_value: impl Fn(&LatticeBox) -> f64 + Sync,
) -> Result<GridFunction> {
    let grid = f.grid().clone();
    let boxes = family_boxes(&grid, flavor)?;
    let mut out = vec![0.0f64; grid.num_cells()];
    for b in &boxes {
        let v = box_value(b);
        for c in b.cells(&grid) {
            if v > out[c] {
                out[c] = v;
            }
        }
    }
    GridFunction::from_values(grid, out)
}

/// The Hardy-Littlewood maximal function of `f` over the family: per cell,
/// the supremum of `<|f|>_Q` over member boxes containing the cell.
pub fn maximal(f: &GridFunction, flavor: &MaximalFlavor) -> Result<GridFunction> {
    paint_sup(f, flavor, |b| abs_mean(f, b))
}

/// The sharp maximal function: per cell, the supremum of the mean
/// oscillation over member boxes containing the cell.
pub fn sharp_maximal(f: &GridFunction, flavor: &MaximalFlavor) -> Result<GridFunction> {
    paint_sup(f, flavor, |b| mean_oscillation(f, b))
}

/// The weak sharp maximal function: per cell, the supremum over member
/// boxes of `inf_c |Q|^{-1} ||(f - c) 1_Q||_{L^{1,infty}(Q)}`.
pub fn weak_sharp_maximal(f: &GridFunction, flavor: &MaximalFlavor) -> Result<GridFunction> {
    paint_sup(f, flavor, |b| weak_oscillation(f, b))
}

/// The median sharp maximal function `M^sharp_lambda`: per cell, the
/// supremum of `omega_lambda(f; Q)` over member boxes containing the cell.
pub fn median_sharp_maximal(
    f: &GridFunction,
    lambda: f64,
    flavor: &MaximalFlavor,
) -> Result<GridFunction> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Contract(format!("lambda must lie in (0,1), got {lambda}")));
    }
    paint_sup(f, flavor, |b| median_oscillation_box(f, b, lambda))
}

/// Candidate recentering constants for `inf_c` quantities on a box: the
/// cell values of `f` together with midpoints of consecutive sorted values.
pub fn candidate_centers(f: &GridFunction, b: &LatticeBox) -> Vec<f64> {
    let mut vals: Vec<f64> = b.cells(f.grid()).map(|c| f.value(c)).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let mut out = vals.clone();
    for w in vals.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    out.sort_by(f64::total_cmp);
    out
}

/// `L^{1,infty}` quasinorm of `g` restricted to a list of cells with equal
/// volume `cell_vol`: `sup_t t |{|g| > t}|`. For a step function the
/// supremum equals `max_v v * |{|g| >= v}|` over the distinct values `v`.
pub fn weak_l1_quasinorm(values: &mut Vec<f64>, cell_vol: f64) -> f64 {
    for v in values.iter_mut() {
        *v = v.abs();
    }
    values.sort_by(f64::total_cmp);
    // mass(|g| >= v) for v descending, accumulated from the top
    let mut best = 0.0f64;
    let n = values.len();
    let mut i = n;
    while i > 0 {
        // step over a run of equal values
        let v = values[i - 1];
        let mut j = i;
        while j > 0 && values[j - 1] == v {
            j -= 1;
        }
        let mass_ge = (n - j) as f64 * cell_vol;
        best = best.max(v * mass_ge);
        i = j;
    }
    best
}

/// `inf_c |Q|^{-1} ||(f - c) 1_Q||_{L^{1,infty}}` with `c` ranging over the
/// breakpoint candidate set.
pub fn weak_oscillation(f: &GridFunction, region: &impl GridRegion) -> f64 {
    let b = region.region_box(f.grid());
    let grid = f.grid();
    let vol = b.volume(grid);
    let cell_vol = grid.cell_volume();
    let mut best = f64::INFINITY;
    for c in candidate_centers(f, &b) {
        let mut vals: Vec<f64> = b.cells(grid).map(|i| f.value(i) - c).collect();
        let q = weak_l1_quasinorm(&mut vals, cell_vol);
        if q < best {
            best = q;
        }
    }
    best / vol
}

/// The closed interval of valid medians of `f` over a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianSet {
    pub lo: f64,
    pub hi: f64,
}

/// All constants `m` with `|{f > m}| <= |Q|/2` and `|{f < m}| <= |Q|/2`,
/// computed from sorted cell values (equal cell volumes).
pub fn median(f: &GridFunction, region: &impl GridRegion) -> MedianSet {
    let b = region.region_box(f.grid());
    let mut vals: Vec<f64> = b.cells(f.grid()).map(|c| f.value(c)).collect();
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    let half = n as f64 / 2.0;
    // lo: smallest distinct value v with |{f > v}| <= half
    let mut lo = vals[n - 1];
    for (i, &v) in vals.iter().enumerate() {
        let above = vals[i..].iter().filter(|&&u| u > v).count();
        if (above as f64) <= half {
            lo = v;
            break;
        }
    }
    // hi: largest distinct value v with |{f < v}| <= half
    let mut hi = vals[0];
    for (i, &v) in vals.iter().enumerate().rev() {
        let below = vals[..=i].iter().filter(|&&u| u < v).count();
        if (below as f64) <= half {
            hi = v;
            break;
        }
    }
    MedianSet { lo, hi }
}

/// `omega_lambda(f;Q)` on an explicit box; the inner infimum over `t` is
/// realized at a breakpoint of the level-set mass function, the outer
/// infimum over the finite candidate set.
pub fn median_oscillation_box(f: &GridFunction, b: &LatticeBox, lambda: f64) -> f64 {
    let n = b.num_cells();
    let allowed = lambda * n as f64;
    let mut best = f64::INFINITY;
    for c in candidate_centers(f, b) {
        let mut dists: Vec<f64> = b.cells(f.grid()).map(|i| (f.value(i) - c).abs()).collect();
        dists.sort_by(f64::total_cmp);
        // smallest breakpoint u (a distinct value of |f-c| or zero) with
        // |{|f-c| > u}| <= lambda |Q|
        let mut t_star = dists[n - 1];
        let mut cands = vec![0.0];
        cands.extend_from_slice(&dists);
        for &u in &cands {
            let above = dists.iter().filter(|&&d| d > u).count();
            if (above as f64) <= allowed {
                t_star = u;
                break;
            }
        }
        if t_star < best {
            best = t_star;
        }
    }
    best
}

/// `omega_lambda(f;Q)` over a cube or box region.
pub fn median_oscillation(f: &GridFunction, region: &impl GridRegion, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Contract(format!("lambda must lie in (0,1), got {lambda}")));
    }
    let b = region.region_box(f.grid());
    Ok(median_oscillation_box(f, &b, lambda))
}

/// The optimal candidate center realizing `omega_lambda(f;Q)` (smallest c
/// on ties) together with the oscillation value and the cells exceeding it.
pub(crate) fn median_oscillation_witness(
    f: &GridFunction,
    b: &LatticeBox,
    lambda: f64,
) -> (f64, f64, Vec<usize>) {
    let n = b.num_cells();
    let allowed = lambda * n as f64;
    let mut best_c = f64::NAN;
    let mut best_t = f64::INFINITY;
    for c in candidate_centers(f, b) {
        let mut dists: Vec<f64> = b.cells(f.grid()).map(|i| (f.value(i) - c).abs()).collect();
        dists.sort_by(f64::total_cmp);
        let mut cands = vec![0.0];
        cands.extend_from_slice(&dists);
        for &u in &cands {
            let above = dists.iter().filter(|&&d| d > u).count();
            if (above as f64) <= allowed {
                if u < best_t {
                    best_t = u;
                    best_c = c;
                }
                break;
            }
        }
    }
    let exceed: Vec<usize> = b
        .cells(f.grid())
        .filter(|&i| (f.value(i) - best_c).abs() > best_t)
        .collect();
    debug_assert!(exceed.len() as f64 <= allowed);
    (best_c, best_t, exceed)
}
