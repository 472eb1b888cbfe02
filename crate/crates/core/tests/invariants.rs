//! Randomized invariants of the numerical kernels.

use adaptrack::engine::dedup;
use adaptrack::linalg::{self, CMatrix, CVector, C64};
use adaptrack::randomize::{self, leverage_order};
use adaptrack::tracker::{truncation_test, Truncation};
use adaptrack::{ParamPolySystem, Poly, Term, VarGroup, VarStructure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gauss(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn gauss_matrix(seed: u64, r: usize, k: usize) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(r, k, |_, _| gauss(&mut rng))
}

fn gauss_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| gauss(rng))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random homogeneous polynomials of degree `deg` on one projective group of size `n`.
fn homogeneous_system(seed: u64, n: usize, deg: u32, rows: usize) -> ParamPolySystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys = (0..rows)
        .map(|_| {
            let terms = (0..5)
                .map(|_| {
                    let mut exps = vec![0u32; n];
                    for _ in 0..deg {
                        exps[rng.random_range(0..n)] += 1;
                    }
                    Term { coeff: gauss(&mut rng), exps }
                })
                .collect();
            Poly::from_terms(n, terms)
        })
        .collect();
    let s = VarStructure::new(vec![VarGroup::projective(n)], 0).unwrap();
    ParamPolySystem::new(s, polys).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leverage_scores_sum_to_rank(seed in any::<u64>(), rows in 4usize..9, cols in 1usize..4) {
        let m = gauss_matrix(seed, rows, cols);
        let scores = linalg::leverage_scores(&m).unwrap();
        prop_assert!(scores.iter().all(|&s| (-1e-12..=1.0 + 1e-12).contains(&s)));
        prop_assert!((scores.iter().sum::<f64>() - cols as f64).abs() < 1e-10);
    }

    #[test]
    fn leverage_scores_ignore_column_basis(seed in any::<u64>()) {
        let m = gauss_matrix(seed, 6, 3);
        let t = gauss_matrix(seed ^ 0x5eed, 3, 3);
        let a = linalg::leverage_scores(&m).unwrap();
        let b = linalg::leverage_scores(&(&m * t)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn leverage_selection_is_unit_rowed_and_full_rank(seed in any::<u64>(), rows in 4usize..9) {
        let m = gauss_matrix(seed, rows, 3);
        let a = randomize::leverage_randomizer(&m).unwrap().matrix() * &m;
        prop_assert_eq!(a.shape(), (3, 3));
        for r in a.row_iter() {
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(linalg::cond2(&a).is_finite());
    }

    #[test]
    fn leverage_order_is_descending_permutation(scores in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let order = leverage_order(&scores);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..scores.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            prop_assert!(scores[w[0]] >= scores[w[1]] - 1e-12);
        }
    }

    #[test]
    fn pseudoinverse_is_left_inverse(seed in any::<u64>(), rows in 3usize..8) {
        let m = gauss_matrix(seed, rows, 3);
        let p = linalg::pseudoinverse(&m).unwrap();
        prop_assert!(max_abs(&(p * &m - CMatrix::identity(3, 3))) < 1e-11);
    }

    #[test]
    fn factorizations_reconstruct(seed in any::<u64>(), rows in 3usize..8, cols in 1usize..4) {
        let m = gauss_matrix(seed, rows, cols);
        let scale = m.norm();
        prop_assert!((linalg::svd(&m).reconstruct() - &m).norm() <= 1e-12 * scale);
        prop_assert!((linalg::qr_column_pivoted(&m).reconstruct() - &m).norm() <= 1e-12 * scale);
    }

    #[test]
    fn randomizers_are_linear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let jg = gauss_matrix(seed, 6, 4);
        let m1 = gauss_matrix(seed ^ 1, 6, 2);
        let m2 = gauss_matrix(seed ^ 2, 6, 2);
        let k = C64::new(s, 0.5);
        let mut ops = 0;
        for r in [
            randomize::pinv_randomizer(&jg).unwrap(),
            randomize::fixed_randomizer(4, 6, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap(),
            randomize::leverage_randomizer(&jg).unwrap(),
        ] {
            let pick = |m: &CMatrix| match r.needed_rows() {
                Some(rows) => CMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]),
                None => m.clone(),
            };
            let lhs = r.apply(&pick(&(&m1 * k + &m2)), &mut ops).unwrap();
            let rhs = r.apply(&pick(&m1), &mut ops).unwrap() * k + r.apply(&pick(&m2), &mut ops).unwrap();
            prop_assert!(max_abs(&(&lhs - &rhs)) < 1e-10);
            // the stored form agrees with the dense matrix
            prop_assert!(max_abs(&(r.apply(&pick(&m1), &mut ops).unwrap() - r.matrix() * &m1)) < 1e-12);
        }
    }

    #[test]
    fn euler_identity_holds(seed in any::<u64>(), deg in 1u32..5) {
        let f = homogeneous_system(seed, 4, deg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let x = gauss_vector(&mut rng, 4);
        let p = CVector::zeros(0);
        let v = f.evaluate(&x, &p).unwrap();
        let jx = f.jacobian_x(&x, &p).unwrap() * &x;
        let scale = 1.0 + v.norm() * deg as f64 + jx.norm();
        prop_assert!((jx - v * C64::new(deg as f64, 0.0)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn projective_distance_ignores_scaling(seed in any::<u64>(), re in 0.1f64..5.0, im in -5.0f64..5.0) {
        let s = VarStructure::new(vec![VarGroup::projective(4), VarGroup::affine(2)], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gauss_vector(&mut rng, 6);
        let mut y = x.clone();
        for j in 0..4 {
            y[j] *= C64::new(re, im);
        }
        prop_assert!(s.distance(&x, &y) < 1e-12);
        prop_assert!((s.unit_representative(&y).rows(0, 4).norm() - 1.0).abs() < 1e-12);
        let (a, b) = (s.phase_normalized(&x), s.phase_normalized(&y));
        prop_assert!((a - b).norm() < 1e-10);
        prop_assert_eq!(dedup(&s, &[x.clone(), y], 1e-6), vec![0]);
    }

    #[test]
    fn truncation_waits_for_small_t(samples in prop::collection::vec((0.3f64..1.0, 0.0f64..5.0), 0..10)) {
        prop_assert_eq!(truncation_test(&samples, 0.3, 5.0 * std::f64::consts::PI / 6.0), Truncation::Keep);
    }

    #[test]
    fn truncation_keeps_straight_descent(slope in 0.01f64..10.0, t1 in 0.05f64..0.29, frac in 0.1f64..0.9) {
        let t2 = t1 * frac;
        let h = [(t1, slope * t1), (t2, slope * t2)];
        prop_assert_eq!(truncation_test(&h, 0.3, 5.0 * std::f64::consts::PI / 6.0), Truncation::Keep);
    }
}
