mod common;

use approx::assert_relative_eq;
use monodual::qmatrix::{
    check_monotone, check_monotone_omega, check_stochastic_dominance, dual_qmatrix, transition_matrix, validate_qmatrix,
    verify_duality, Boundary, RateMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Absorb), Just(Boundary::Reflect), Just(Boundary::Kill)]
}

/// Rates drawn from a few levels (ties are common) or uniformly.
fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0..2.0]
}

/// Arbitrary banded chain: `(lo, states, band, boundary)` and one rate per
/// `(row, offset)`.
fn chain(max_states: i64, max_band: i64) -> impl Strategy<Value = RateMatrix> {
    (-5i64..=5, 2i64..=max_states, 1i64..=max_band, boundary()).prop_flat_map(|(lo, len, band, b)| {
        let k = (len * 2 * band) as usize;
        proptest::collection::vec(rate(), k).prop_map(move |rates| build(lo, len, band, b, &rates))
    })
}

fn build(lo: i64, len: i64, band: i64, b: Boundary, rates: &[f64]) -> RateMatrix {
    let offsets: Vec<i64> = (-band..=band).filter(|&m| m != 0).collect();
    RateMatrix::from_fn(lo, lo + len - 1, b, |n| {
        let i = (n - lo) as usize * offsets.len();
        offsets.iter().enumerate().map(move |(j, &m)| (m, rates[i + j])).collect::<Vec<_>>()
    })
    .unwrap()
}

/// Chains satisfying the simple split conditions: nearest-neighbour rates
/// arbitrary, right tails of jumps ≥ 2 nondecreasing in n, left tails
/// nonincreasing.
fn split_condition_chain(states: std::ops::RangeInclusive<i64>) -> impl Strategy<Value = RateMatrix> {
    (-5i64..=5, states, 2i64..=4, boundary()).prop_flat_map(|(lo, len, band, b)| {
        (
            proptest::collection::vec((0.0..3.0, 0.0..3.0), len as usize),
            proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), (band - 1) as usize),
            proptest::collection::vec((0.0..0.5f64, 0.0..0.5f64), len as usize),
        )
            .prop_map(move |(nn, base, inc)| {
                // cumulative increments keep every right rate nondecreasing and
                // every left rate nonincreasing in n
                let mut grow = vec![0.0; len as usize];
                let mut shrink = vec![0.0; len as usize];
                for i in 1..len as usize {
                    grow[i] = grow[i - 1] + inc[i].0;
                    shrink[i] = shrink[i - 1] + inc[i].1;
                }
                let total_shrink = shrink[len as usize - 1];
                RateMatrix::from_fn(lo, lo + len - 1, b, |n| {
                    let i = (n - lo) as usize;
                    let mut row = vec![(1, nn[i].0), (-1, nn[i].1)];
                    for (k, &(r, l)) in base.iter().enumerate() {
                        let m = k as i64 + 2;
                        row.push((m, r + grow[i]));
                        row.push((-m, l + total_shrink - shrink[i]));
                    }
                    row
                })
                .unwrap()
            })
    })
}

fn monotone_chain() -> impl Strategy<Value = RateMatrix> {
    prop_oneof![
        split_condition_chain(2..=12),
        chain(12, 1),
        chain(10, 3).prop_filter("monotone", |q| check_monotone(q).monotone),
    ]
}

/// `Q̃(n, j) = Σ_{l≥n} (Q(j, l) − Q(j−1, l))` summed directly over the raw
/// rates, for rows whose jumps all stay in the window.
fn dual_rate_direct(q: &RateMatrix, n: i64, j: i64) -> f64 {
    let q_full = |a: i64, b: i64| if a == b { -q.exit_rate(a) } else { q.rate(a, b - a) };
    let reach = q.bandwidth();
    (n..=n + 2 * reach + (j - n).abs() + 1).map(|l| q_full(j, l) - q_full(j - 1, l)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(256) })]

    #[test]
    fn criterion_forms_agree(q in chain(12, 4)) {
        let a = check_monotone(&q);
        let b = check_monotone_omega(&q);
        prop_assert_eq!(a.monotone, b.monotone, "{}", q.to_json());
    }

    #[test]
    fn split_conditions_are_sufficient(q in split_condition_chain(2..=12)) {
        let r = check_monotone(&q);
        prop_assert!(r.monotone, "{:?}", r.violations);
    }

    #[test]
    fn dual_of_monotone_chain_is_valid(q in monotone_chain().prop_map(|q| {
        // upper-edge killing has no dual; compare reflected copies instead
        if q.boundary() == Boundary::Kill { q.with_boundary(Boundary::Reflect) } else { q }
    })) {
        let d = dual_qmatrix(&q).unwrap();
        prop_assert_eq!(d.boundary(), Boundary::Kill);
        prop_assert!(d.entries().all(|e| e.rate >= 0.0));
        let report = validate_qmatrix(&d).unwrap();
        prop_assert!(report.killing.iter().all(|&(n, _)| n > q.hi() - q.bandwidth()));
    }

    #[test]
    fn dual_matches_direct_sum_in_the_interior(q in split_condition_chain(20..=30).prop_map(|q| q.with_boundary(Boundary::Reflect))) {
        let d = dual_qmatrix(&q).unwrap();
        let band = q.bandwidth();
        prop_assert!(q.lo() + 2 * band + 1 < q.hi() - 2 * band);
        for n in (q.lo() + 2 * band + 1)..=(q.hi() - 2 * band - 1) {
            for j in (n - band - 1)..=(n + band + 1) {
                if j == n || !q.contains(j) || !q.contains(j - 1) {
                    continue;
                }
                let want = dual_rate_direct(&q, n, j);
                prop_assert!((d.rate(n, j - n) - want).abs() < 1e-12, "({n}, {j}): {} vs {want}", d.rate(n, j - n));
            }
        }
    }

    #[test]
    fn semigroup_of_monotone_chain_is_dominant(q in monotone_chain(), t in 0.05..5.0f64) {
        let p = transition_matrix(&q.with_cemeteries(), t, 1e-13).unwrap();
        let r = check_stochastic_dominance(&p, 1e-10);
        prop_assert!(r.dominant, "{:?}", r.violations.first());
    }

    #[test]
    fn uniformization_matches_pade_expm(q in chain(10, 3), t in 0.0..3.0f64) {
        let p = transition_matrix(&q, t, 1e-14).unwrap();
        let dense = q.effective().dense();
        let m = DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[[i, j]] * t);
        let oracle = m.exp();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                prop_assert!((p.p[[i, j]] - oracle[(i, j)]).abs() < 1e-10, "({i}, {j})");
            }
        }
    }
}

#[test]
fn nearest_neighbour_duality_over_time() {
    let q = RateMatrix::from_fn(0, 30, Boundary::Reflect, |n| [(1, 1.0 + 0.05 * n as f64), (-1, 2.0)]).unwrap();
    for t in [0.1, 0.5, 2.0] {
        let r = verify_duality(&q, t, 1e-10).unwrap();
        assert!(r.holds, "{r:?}");
    }
}

#[test]
fn semigroup_rows_sum_to_one_without_killing() {
    let q = common::birth_death(-10, 10, 1.0, 0.7, Boundary::Reflect);
    let p = transition_matrix(&q, 2.0, 1e-13).unwrap();
    for row in p.p.rows() {
        assert_relative_eq!(row.sum(), 1.0, epsilon = 1e-12);
    }
    assert!(p.defect.iter().all(|&d| d.abs() < 1e-12));
}
