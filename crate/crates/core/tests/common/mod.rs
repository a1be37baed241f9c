//! Chain and model builders shared by the integration tests.
#![allow(dead_code)]

use monodual::generator::{LevyKernel, LevyModel, Support};
use monodual::qmatrix::{check_monotone, Boundary, RateMatrix};
use rand::Rng;

pub const BOUNDARIES: [Boundary; 3] = [Boundary::Absorb, Boundary::Reflect, Boundary::Kill];

pub fn birth_death(lo: i64, hi: i64, up: f64, down: f64, boundary: Boundary) -> RateMatrix {
    RateMatrix::from_fn(lo, hi, boundary, |_| [(1, up), (-1, down)]).unwrap()
}

/// Rates on a few dyadic levels so that many draws tie and both verdicts of
/// the monotonicity criterion occur.
fn level<R: Rng>(rng: &mut R) -> f64 {
    [0.0, 0.25, 0.5, 1.0, 2.0][rng.random_range(0..5)]
}

/// A chain with at most `max_states` states and jumps of length at most
/// `max_band`.
pub fn random_chain<R: Rng>(rng: &mut R, max_states: i64, max_band: i64) -> RateMatrix {
    let lo = rng.random_range(-5..=5);
    let hi = lo + rng.random_range(1..max_states);
    let band = rng.random_range(1..=max_band);
    let boundary = BOUNDARIES[rng.random_range(0..3)];
    // a shared row makes the chain nearly translation invariant
    let shared: Vec<f64> = (0..2 * band).map(|_| level(rng)).collect();
    let perturb = rng.random_bool(0.5);
    RateMatrix::from_fn(lo, hi, boundary, |_| {
        let offsets = (-band..=band).filter(|&m| m != 0);
        offsets
            .enumerate()
            .map(|(i, m)| {
                let r = if perturb && rng.random_bool(0.3) { level(rng) } else { shared[i] };
                (m, r)
            })
            .collect::<Vec<_>>()
    })
    .unwrap()
}

/// A monotone chain drawn by rejection from a family biased towards
/// monotonicity: right jumps longer than one grow with the state, left jumps
/// shrink, nearest-neighbour rates are arbitrary.
pub fn random_monotone_chain<R: Rng>(rng: &mut R, max_states: i64, max_band: i64, boundaries: &[Boundary]) -> RateMatrix {
    loop {
        let lo = rng.random_range(-5..=5);
        let hi = lo + rng.random_range(1..max_states);
        let band = rng.random_range(1..=max_band);
        let boundary = boundaries[rng.random_range(0..boundaries.len())];
        let right: Vec<f64> = (0..band).map(|_| rng.random_range(0.0..2.0)).collect();
        let left: Vec<f64> = (0..band).map(|_| rng.random_range(0.0..2.0)).collect();
        let slope = rng.random_range(0.0..0.3);
        let q = RateMatrix::from_fn(lo, hi, boundary, |n| {
            let s = (n - lo) as f64 * slope;
            let mut row = vec![(1, rng.random_range(0.0..3.0)), (-1, rng.random_range(0.0..3.0))];
            for k in 2..=band {
                let i = (k - 1) as usize;
                row.push((k, right[i] * (1.0 + s)));
                row.push((-k, left[i] / (1.0 + s)));
            }
            row
        })
        .unwrap();
        if check_monotone(&q).monotone {
            return q;
        }
    }
}

/// Three bounded models whose kernels have monotone tails.
pub fn monotone_models() -> Vec<(&'static str, LevyModel)> {
    vec![
        (
            "symmetric exponential jumps, varying diffusion and drift",
            LevyModel::zero()
                .with_g(|x: f64| 1.0 + 0.5 * x.sin())
                .with_b(|x: f64| x.cos())
                .with_nu(LevyKernel::density(|_, y: f64| (-y.abs()).exp())),
        ),
        (
            "one-sided jumps with increasing intensity",
            LevyModel::zero()
                .with_g(|_| 0.5)
                .with_nu(LevyKernel::decomposable(|x: f64| 1.0 + x.tanh(), |y: f64| (-y).exp()).with_support(Support::Positive)),
        ),
        (
            "left density with decreasing intensity plus right atoms",
            LevyModel::zero()
                .with_b(|x: f64| -0.5 * x.tanh())
                .with_nu(
                    LevyKernel::density(|x: f64, y: f64| (1.0 - 0.5 * x.tanh()) * (2.0 * y).exp())
                        .with_support(Support::Negative),
                )
                .with_mu(LevyKernel::atoms(|x: f64| 1.5 + x.tanh(), vec![(0.5, 1.0), (1.25, 0.5)])),
        ),
    ]
}
