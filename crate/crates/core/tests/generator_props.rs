mod common;

use monodual::generator::{
    check_levy_monotone, cutoff_model, discretize, jump_intensity, Lattice, LevyKernel, LevyModel, Support,
    LEVY_MONO_TOL,
};
use monodual::qmatrix::{check_monotone, Boundary, RateMatrix};
use proptest::prelude::*;

fn bump(x: f64) -> f64 {
    (-x * x).exp()
}

fn bump_d1(x: f64) -> f64 {
    -2.0 * x * bump(x)
}

fn bump_d2(x: f64) -> f64 {
    (4.0 * x * x - 2.0) * bump(x)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// `(Q f)(x_n)` for the lattice chain, with `f` sampled on the lattice.
fn apply(q: &RateMatrix, lat: &Lattice, f: fn(f64) -> f64, n: i64) -> f64 {
    let fx = f(lat.x(n));
    q.row(n).iter().map(|&(m, r)| r * (f(lat.x(n + m)) - fx)).sum()
}

/// Max error of the lattice generator against `exact` at interior points,
/// for each mesh.
fn errors(m: &LevyModel, hs: &[f64], exact: impl Fn(f64) -> f64) -> Vec<f64> {
    let xs = [-1.0, -0.5, 0.0, 0.5, 1.0];
    hs.iter()
        .map(|&h| {
            let lat = Lattice::covering(h, -30.0, 30.0, Boundary::Reflect).unwrap();
            let q = discretize(m, &lat).unwrap();
            xs.iter()
                .map(|&x| (apply(&q, &lat, bump, lat.state(x)) - exact(x)).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

fn orders(e: &[f64], hs: &[f64]) -> Vec<f64> {
    e.windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

const HS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

#[test]
fn pure_diffusion_is_second_order() {
    let m = LevyModel::zero().with_g(|_| 1.0);
    let e = errors(&m, &HS, |x| 0.5 * bump_d2(x));
    let p = orders(&e, &HS);
    println!("diffusion errors {e:?}, orders {p:?}");
    assert!(p.iter().all(|&p| p > 1.8), "{p:?}");
}

#[test]
fn pure_drift_is_first_order() {
    let m = LevyModel::zero().with_b(|_| 1.0);
    let e = errors(&m, &HS, bump_d1);
    let p = orders(&e, &HS);
    println!("drift errors {e:?}, orders {p:?}");
    assert!(p.iter().all(|&p| p > 0.9), "{p:?}");
}

#[test]
fn compound_poisson_converges() {
    let m = LevyModel::zero().with_mu(LevyKernel::density(|_, y: f64| (-y).exp()).with_support(Support::Positive));
    let exact = |x: f64| simpson(|y| (bump(x + y) - bump(x)) * (-y).exp(), 0.0, 40.0, 20_000);
    let e = errors(&m, &HS, exact);
    let p = orders(&e, &HS);
    println!("compound Poisson errors {e:?}, orders {p:?}");
    assert!(e.windows(2).all(|w| w[1] < w[0]));
    assert!(p.last().unwrap() > &0.8, "{p:?}");
}

#[test]
fn compensated_small_jumps_converge() {
    // ν = y^{-3/2} e^{-y} on y > 0: infinite activity, finite small second moment
    let m = LevyModel::zero()
        .with_nu(LevyKernel::density(|_, y: f64| y.powf(-1.5) * (-y).exp()).with_support(Support::Positive));
    let integrand = |x: f64, y: f64| {
        let comp = if y <= 1.0 { bump_d1(x) * y } else { 0.0 };
        (bump(x + y) - bump(x) - comp) * y.powf(-1.5) * (-y).exp()
    };
    // substitute y = s² to remove the singularity at the origin
    let exact = |x: f64| simpson(|s| if s == 0.0 { 0.0 } else { 2.0 * s * integrand(x, s * s) }, 0.0, 6.5, 40_000);
    let e = errors(&m, &HS, exact);
    println!("compensated kernel errors {e:?}, orders {:?}", orders(&e, &HS));
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn bin_masses_are_conserved() {
    let a = |x: f64| 1.0 + 0.5 * x.sin();
    let m = LevyModel::zero().with_mu(LevyKernel::decomposable(a, |y: f64| 2.0 * (-2.0 * y.abs()).exp()));
    for h in [0.3, 0.1] {
        let lat = Lattice::covering(h, -40.0, 40.0, Boundary::Reflect).unwrap();
        let q = discretize(&m, &lat).unwrap();
        for x in [-2.0, 0.0, 1.7] {
            let n = lat.state(x);
            let total: f64 = q.row(n).iter().map(|&(_, r)| r).sum();
            // right bins start at h; the first left bin is (-h, 0]
            let want = a(lat.x(n)) * ((-2.0 * h).exp() + 1.0);
            assert!((total - want).abs() < 1e-10 * want, "h = {h}, x = {x}: {total} vs {want}");
        }
    }
}

#[test]
fn exponential_rate_in_x_violates_the_tail_condition() {
    let m = LevyModel::zero().with_nu(LevyKernel::density(|x, y: f64| (-x * y).exp()).with_support(Support::Positive));
    let grid: Vec<f64> = (5..=30).map(|i| i as f64 * 0.1).collect();
    let r = check_levy_monotone(&m, &grid, &[0.5, 1.0], LEVY_MONO_TOL).unwrap();
    assert!(!r.monotone);
    // the tail e^{-xa}/x is decreasing, so every adjacent pair fails
    assert_eq!(r.violations.len(), r.checked_pairs);
}

#[test]
fn x_independent_kernel_is_monotone_with_equality() {
    let m = LevyModel::zero().with_nu(LevyKernel::density(|_, y: f64| (-y.abs()).exp()));
    let grid: Vec<f64> = (-10..=10).map(|i| i as f64 * 0.3).collect();
    let r = check_levy_monotone(&m, &grid, &[0.1, 1.0, 3.0], LEVY_MONO_TOL).unwrap();
    assert!(r.monotone);
}

fn stable_like() -> LevyModel {
    LevyModel::zero().with_nu(LevyKernel::density(|x: f64, y: f64| {
        (1.0 + 0.5 * x.tanh()) * y.abs().powf(-1.7) * (-y.abs()).exp()
    }))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn cutoff_intensity_is_nonincreasing_in_h(h1 in 0.01..1.0f64, dh in 0.0..1.0f64, x in -3.0..3.0f64) {
        let m = stable_like();
        let small = jump_intensity(&cutoff_model(&m, h1), x).unwrap();
        let large = jump_intensity(&cutoff_model(&m, h1 + dh), x).unwrap();
        prop_assert!(large <= small * (1.0 + 1e-12), "{large} > {small}");
        prop_assert!(small.is_finite());
    }

    #[test]
    fn monotone_kernels_give_monotone_chains(
        s in 0.0..1.0f64,
        lambda in 0.5..3.0f64,
        g0 in 0.0..2.0f64,
        b0 in -1.0..1.0f64,
        h in prop_oneof![Just(0.25), Just(0.2), Just(0.1)],
    ) {
        let m = LevyModel::zero()
            .with_g(move |x: f64| g0 * (1.0 + 0.5 * x.cos()))
            .with_b(move |x: f64| b0 * x.sin())
            .with_nu(
                LevyKernel::decomposable(move |x: f64| 1.0 + s * x.tanh(), move |y: f64| (-lambda * y.abs()).exp())
                    .with_support(Support::Positive),
            )
            .with_mu(
                LevyKernel::density(move |x: f64, y: f64| (1.0 - 0.5 * s * x.tanh()) * (lambda * y).exp())
                    .with_support(Support::Negative),
            );
        let grid: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
        let thresholds: Vec<f64> = (1..=20).map(|i| i as f64 * 0.15).collect();
        let levy = check_levy_monotone(&m, &grid, &thresholds, LEVY_MONO_TOL).unwrap();
        prop_assert!(levy.monotone);
        let lat = Lattice::covering(h, -3.0, 3.0, Boundary::Reflect).unwrap();
        let q = discretize(&m, &lat).unwrap();
        let r = check_monotone(&q);
        prop_assert!(r.monotone, "{:?}", r.violations.first());
    }
}

#[test]
fn shared_models_are_tail_monotone() {
    let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.2).collect();
    for (name, m) in common::monotone_models() {
        let r = check_levy_monotone(&m, &grid, &[0.2, 0.5, 1.0, 2.0], LEVY_MONO_TOL).unwrap();
        assert!(r.monotone, "{name}");
    }
}
