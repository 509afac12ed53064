#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sslib::{linalg, StateSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random stable system with spectral abscissa at most `-margin`.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize, margin: f64) -> StateSpace {
    let mut a = randn(rng, n, n) * 2.0;
    let abscissa = linalg::eigenvalues(&a).unwrap().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let shift = abscissa + margin + rng.gen_range(0.0..0.5);
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let d = if rng.gen_bool(0.5) { randn(rng, p, m) } else { DMatrix::zeros(p, m) };
    StateSpace::new(a, randn(rng, n, m), randn(rng, p, n), d).unwrap()
}

/// Dense-grid oracle for the H-infinity norm.
pub fn grid_norm(g: &StateSpace) -> f64 {
    sslib::grid_peak(g, &sslib::verification_grid())
}

pub fn tf1(num: f64, pole: f64) -> StateSpace {
    // num / (s - pole)
    StateSpace::new(
        DMatrix::from_element(1, 1, pole),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, num),
        DMatrix::zeros(1, 1),
    )
    .unwrap()
}
