#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qfock::sampling::random_function;
use qfock::testfn::indicator;
use qfock::{Grid, Operator, StepFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn grid(cells: usize) -> Arc<Grid> {
    Grid::uniform(cells).unwrap().into_shared()
}

/// Seeded complex pairs with cell values in the disk of radius `amp`.
pub fn random_pairs(grid: &Arc<Grid>, count: usize, amp: f64, seed: u64) -> Vec<(StepFunction, StepFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                random_function(&mut rng, grid, amp, false),
                random_function(&mut rng, grid, amp, false),
            )
        })
        .collect()
}

/// `2^{-1/2}(χ_0 + χ_1)` projection on a unit-volume grid.
pub fn rank_one_ab(grid: &Arc<Grid>) -> Operator {
    Operator::rank_one(indicator(grid, &[0, 1]).unwrap().scale_real(FRAC_1_SQRT_2)).unwrap()
}

/// Multiplication operators and matrices that are not characteristic multiplications.
pub fn counterexample_zoo(grid: &Arc<Grid>) -> Vec<(&'static str, Operator)> {
    let n = grid.len();
    let half = Operator::Multiplication(StepFunction::constant(Arc::clone(grid), Complex64::new(0.5, 0.0)));
    let phase = Operator::Multiplication(indicator(grid, &[0, 2]).unwrap().scale(Complex64::new(0.0, 1.0)));
    // upper bidiagonal, row sums 0.9: a non-normal ∞-contraction
    let shift = DMatrix::from_fn(n, n, |j, k| {
        if k == j {
            Complex64::new(0.5, 0.0)
        } else if k == j + 1 {
            Complex64::new(0.4, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    vec![
        ("rank-one projection", rank_one_ab(grid)),
        ("non-idempotent multiplication", half),
        ("complex-symbol multiplication", phase),
        ("dense non-normal contraction", Operator::dense(Arc::clone(grid), shift).unwrap()),
    ]
}

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
