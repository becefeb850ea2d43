//! Stock weights and seeded test banks.
//!
//! The stock family spans the regimes the suites need: the identity, step
//! weights, midpoint-sampled power weights `|x|^delta` for delta in
//! {-3/4, -1/2, -1/4, 1/4, 1/2}, and a lacunary weight constant on dyadic
//! shells. Power weights with negative exponents are finite on the grid
//! because cell midpoints never hit the origin.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{DyadicGrid, GridFunction, LatticeBox};
use crate::weights::{Weight, WeightForm};
use crate::{Error, Result};

/// JSON description of a weight, used by run configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    Identity,
    /// `w(x) = |x|^exponent` sampled at cell midpoints.
    Power { exponent: f64 },
    /// Piecewise-constant in equal blocks of cells.
    Step { values: Vec<f64> },
    /// Explicit per-cell values, row-major.
    Table { values: Vec<f64> },
    /// `2^{-k}` on the k-th dyadic shell around the origin.
    Lacunary,
}

impl WeightSpec {
    pub fn build(&self, grid: &Arc<DyadicGrid>) -> Result<Weight> {
        match self {
            WeightSpec::Identity => {
                Weight::with_form(GridFunction::constant(grid.clone(), 1.0), Some(WeightForm::Identity))
            }
            WeightSpec::Power { exponent } => power_weight(grid, *exponent),
            WeightSpec::Step { values } => {
                if values.is_empty() {
                    return Err(Error::Contract("step weight needs at least one value".into()));
                }
                let blocks = values.len();
                let ncells = grid.num_cells();
                let f = GridFunction::from_values(
                    grid.clone(),
                    (0..ncells).map(|i| values[i * blocks / ncells]).collect(),
                )?;
                Weight::with_form(f, Some(WeightForm::Step))
            }
            WeightSpec::Table { values } => {
                Weight::new(GridFunction::from_values(grid.clone(), values.clone())?)
            }
            WeightSpec::Lacunary => lacunary_weight(grid),
        }
    }
}

/// `w(x) = |x|^delta` at cell midpoints.
pub fn power_weight(grid: &Arc<DyadicGrid>, delta: f64) -> Result<Weight> {
    let f = GridFunction::sample(grid.clone(), |x| {
        let r = if grid.dimension() == 1 {
            x[0].abs()
        } else {
            (x[0] * x[0] + x[1] * x[1]).sqrt()
        };
        r.powf(delta)
    })?;
    Weight::with_form(f, Some(WeightForm::Power { delta }))
}

/// `2^{-k}` on the k-th dyadic shell: shell `k` collects the points whose
/// distance from the origin, relative to the largest in the root box, lies
/// in `(2^{-k-1}, 2^{-k}]`.
pub fn lacunary_weight(grid: &Arc<DyadicGrid>) -> Result<Weight> {
    let o = grid.origin();
    let s = grid.side();
    let far_x = (-o[0]).abs().max((o[0] + s).abs());
    let far = if grid.dimension() == 1 {
        far_x
    } else {
        let far_y = (-o[1]).abs().max((o[1] + s).abs());
        (far_x * far_x + far_y * far_y).sqrt()
    };
    let f = GridFunction::sample(grid.clone(), |x| {
        let r = if grid.dimension() == 1 {
            x[0].abs()
        } else {
            (x[0] * x[0] + x[1] * x[1]).sqrt()
        };
        let rel = (r / far).max(f64::MIN_POSITIVE);
        let k = (-rel.log2()).floor().clamp(0.0, 40.0);
        2f64.powf(-k)
    })?;
    Weight::with_form(f, Some(WeightForm::Lacunary))
}

/// Two-block step weight `2 1_{left half} + 1 1_{right half}`.
pub fn step_weight(grid: &Arc<DyadicGrid>) -> Result<Weight> {
    WeightSpec::Step { values: vec![2.0, 1.0] }.build(grid)
}

/// The stock weight family on a grid.
pub fn stock_weights(grid: &Arc<DyadicGrid>) -> Result<Vec<(String, Weight)>> {
    let mut out = vec![
        ("identity".to_string(), WeightSpec::Identity.build(grid)?),
        ("step-2-1".to_string(), step_weight(grid)?),
        ("step-4-1-2-1".to_string(), WeightSpec::Step { values: vec![4.0, 1.0, 2.0, 1.0] }.build(grid)?),
        ("lacunary".to_string(), lacunary_weight(grid)?),
    ];
    for delta in [-0.75, -0.5, -0.25, 0.25, 0.5] {
        out.push((format!("power{delta}"), power_weight(grid, delta)?));
    }
    Ok(out)
}

/// The subset of the stock family whose reciprocal has a moderate `A_1`
/// characteristic, as weights `w` with `w^{-1}` in `A_1`.
pub fn stock_a1_inverse_weights(grid: &Arc<DyadicGrid>) -> Result<Vec<(String, Weight)>> {
    let mut out = vec![("identity".to_string(), WeightSpec::Identity.build(grid)?)];
    // w = |x|^{-delta} with delta in (0,1): w^{-1} = |x|^{delta} is A_1
    for delta in [0.25, 0.5] {
        out.push((format!("power-inv{delta}"), power_weight(grid, -delta)?));
    }
    out.push(("step-1-2".to_string(), WeightSpec::Step { values: vec![1.0, 2.0] }.build(grid)?));
    Ok(out)
}

/// Seeded bank of random step functions, signed or nonnegative, supported
/// on a sub-box of the grid.
pub fn random_functions(
    grid: &Arc<DyadicGrid>,
    count: usize,
    seed: u64,
    nonnegative: bool,
) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.cells_per_side();
    (0..count)
        .map(|_| {
            let mut values = vec![0.0f64; grid.num_cells()];
            // a few random constant blocks
            let blocks = rng.gen_range(2..8);
            for _ in 0..blocks {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(i + 1..=n);
                let v = if nonnegative { rng.gen_range(0.0..3.0) } else { rng.gen_range(-3.0..3.0) };
                let (lo_y, hi_y) = if grid.dimension() == 2 {
                    let iy = rng.gen_range(0..n);
                    let jy = rng.gen_range(iy + 1..=n);
                    (iy, jy)
                } else {
                    (0, 1)
                };
                let b = LatticeBox::new(grid, [i, lo_y], [j, hi_y]).expect("in range");
                for c in b.cells(grid) {
                    values[c] += v;
                }
            }
            if nonnegative {
                for v in values.iter_mut() {
                    *v = v.abs();
                }
            }
            GridFunction::from_values(grid.clone(), values).expect("finite values")
        })
        .collect()
}

/// Seeded bank of random positive weights (bounded oscillation).
pub fn random_weights(grid: &Arc<DyadicGrid>, count: usize, seed: u64) -> Vec<Weight> {
    random_functions(grid, count, seed, false)
        .into_iter()
        .map(|f| {
            let w = f.map(|v| 0.5 + v.abs()).expect("finite");
            Weight::new(w).expect("positive")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stock_weights_are_positive_and_named() {
        let g = DyadicGrid::new_1d(-1.0, 2.0, 6).unwrap();
        let fam = stock_weights(&g).unwrap();
        assert!(fam.len() >= 8);
        for (name, w) in fam {
            assert!(!name.is_empty());
            assert!(w.func().values().iter().all(|&v| v > 0.0), "{name}");
        }
    }

    #[test]
    fn weight_spec_round_trip() {
        let spec = WeightSpec::Power { exponent: -0.5 };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<WeightSpec>(&s).unwrap(), spec);
        let g = DyadicGrid::new_1d(0.0, 1.0, 4).unwrap();
        assert!(spec.build(&g).is_ok());
    }

    #[test]
    fn random_banks_are_deterministic() {
        let g = DyadicGrid::new_1d(0.0, 1.0, 5).unwrap();
        let a = random_functions(&g, 5, 42, false);
        let b = random_functions(&g, 5, 42, false);
        assert_eq!(a, b);
        let c = random_functions(&g, 5, 43, false);
        assert_ne!(a, c);
    }

    #[test]
    fn nonnegative_bank_is_nonnegative() {
        let g = DyadicGrid::new_1d(0.0, 1.0, 5).unwrap();
        for f in random_functions(&g, 10, 7, true) {
            assert!(f.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn lacunary_weight_values_are_dyadic() {
        let g = DyadicGrid::new_1d(-1.0, 2.0, 6).unwrap();
        let w = lacunary_weight(&g).unwrap();
        for &v in w.func().values() {
            assert!(v > 0.0 && v <= 1.0);
            assert_eq!(v.log2().fract(), 0.0);
        }
    }
}
