use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thprs_core::channel::{draw_channel, DrawSeed};
use thprs_core::linalg::{
    dominant_right_singular_vector, lower_triangular_inverse, lq_decompose, pseudo_inverse, ComplexMatrix,
};
use thprs_core::{Error, C64};

fn to_na(a: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)])
}

fn fro_dist(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).frobenius_norm()
}

/// Row-wise modified Gram-Schmidt: the unique LQ factorization with a
/// positive real diagonal, computed without Householder reflections.
fn gram_schmidt_lq(a: &ComplexMatrix) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let (k, n) = (a.rows(), a.cols());
    let mut q: Vec<Vec<C64>> = Vec::new();
    let mut l = vec![vec![C64::new(0.0, 0.0); k]; k];
    for r in 0..k {
        let mut v = a.row(r).to_vec();
        for (j, qj) in q.iter().enumerate() {
            let coef: C64 = v.iter().zip(qj).map(|(x, y)| x * y.conj()).sum();
            l[r][j] += coef;
            for i in 0..n {
                v[i] -= coef * qj[i];
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        l[r][r] = C64::new(norm, 0.0);
        q.push(v.iter().map(|z| z / norm).collect());
    }
    (l, q)
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / norm).collect()
}

#[test]
fn lq_matches_gram_schmidt_entrywise() {
    for ch in 0..50 {
        for (k, nt) in [(4, 4), (2, 4), (3, 5)] {
            let a = draw_channel(k, nt, DrawSeed::new(17, ch)).unwrap();
            let f = lq_decompose(&a).unwrap();
            let (l, q) = gram_schmidt_lq(&a);
            for r in 0..k {
                for c in 0..k {
                    assert!((f.l[(r, c)] - l[r][c]).norm() < 1e-10, "L[{r},{c}] channel {ch}");
                }
                for c in 0..nt {
                    assert!((f.q[(r, c)] - q[r][c]).norm() < 1e-10, "Q[{r},{c}] channel {ch}");
                }
            }
        }
    }
}

#[test]
fn lq_invariants_over_1000_channels() {
    for ch in 0..1000 {
        let a = draw_channel(4, 4, DrawSeed::new(99, ch)).unwrap();
        let f = lq_decompose(&a).unwrap();
        assert!(fro_dist(&f.l.matmul(&f.q), &a) / a.frobenius_norm() < 1e-10);
        assert!(fro_dist(&f.q.matmul(&f.q.conj_transpose()), &ComplexMatrix::identity(4)) < 1e-10);
        assert!(f.l.max_abs_upper() < 1e-12);
        for k in 0..4 {
            assert!(f.l[(k, k)].re > 0.0 && f.l[(k, k)].im.abs() < 1e-12);
            assert_eq!(f.diag[k], f.l[(k, k)].re);
        }
    }
}

#[test]
fn lq_is_bitwise_deterministic() {
    let a = draw_channel(4, 4, DrawSeed::new(5, 5)).unwrap();
    assert_eq!(lq_decompose(&a).unwrap(), lq_decompose(&a).unwrap());
}

#[test]
fn lq_diagonal_matches_svd_volume() {
    // |det A| = Π l_kk = Π σ_k for square A.
    for ch in 0..20 {
        let a = draw_channel(4, 4, DrawSeed::new(8, ch)).unwrap();
        let f = lq_decompose(&a).unwrap();
        let sv = to_na(&a).svd(false, false).singular_values;
        let prod_l: f64 = f.diag.iter().product();
        let prod_s: f64 = sv.iter().product();
        assert!((prod_l - prod_s).abs() < 1e-10 * prod_s);
    }
}

#[test]
fn lq_errors() {
    let wide = ComplexMatrix::zeros(3, 2);
    assert!(matches!(lq_decompose(&wide), Err(Error::DimensionMismatch(_))));
    let rank1 = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
    assert_eq!(lq_decompose(&rank1), Err(Error::RankDeficient));
    assert_eq!(lq_decompose(&ComplexMatrix::zeros(2, 2)), Err(Error::RankDeficient));
}

#[test]
fn pseudo_inverse_residual_and_oracle() {
    for ch in 0..200 {
        for (k, nt) in [(4, 4), (2, 4)] {
            let a = draw_channel(k, nt, DrawSeed::new(21, ch)).unwrap();
            let sv = to_na(&a).svd(false, false).singular_values;
            let cond = sv.max() / sv.min();
            if cond >= 1e6 {
                continue;
            }
            let p = pseudo_inverse(&a).unwrap();
            assert!(
                fro_dist(&a.matmul(&p), &ComplexMatrix::identity(k)) < 1e-9,
                "channel {ch}, cond {cond}"
            );
            let oracle = to_na(&a).pseudo_inverse(1e-14).unwrap();
            for r in 0..nt {
                for c in 0..k {
                    assert!((p[(r, c)] - oracle[(r, c)]).norm() < 1e-8 * cond);
                }
            }
        }
    }
}

#[test]
fn lower_triangular_inverse_roundtrip() {
    let a = draw_channel(4, 4, DrawSeed::new(2, 2)).unwrap();
    let l = lq_decompose(&a).unwrap().l;
    let inv = lower_triangular_inverse(&l).unwrap();
    assert!(fro_dist(&l.matmul(&inv), &ComplexMatrix::identity(4)) < 1e-10);
    assert!(inv.max_abs_upper() == 0.0);
}

#[test]
fn dominant_vector_against_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD0);
    for ch in 0..100 {
        let a = draw_channel(4, 4, DrawSeed::new(31, ch)).unwrap();
        let v = dominant_right_singular_vector(&a).unwrap();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let first = v.iter().find(|z| z.norm() > 1e-12).unwrap();
        assert!(first.re > 0.0 && first.im == 0.0);

        let gain = |u: &[C64]| a.mul_vec(u).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let sigma_max = to_na(&a).svd(false, false).singular_values.max();
        assert!((gain(&v) - sigma_max).abs() < 1e-8, "channel {ch}");
        for _ in 0..100 {
            let u = random_unit(4, &mut rng);
            assert!(gain(&v) >= gain(&u) - 1e-8);
        }
    }
}

#[test]
fn dominant_vector_wide_matrix_and_zero() {
    let a = draw_channel(2, 4, DrawSeed::new(3, 0)).unwrap();
    let v = dominant_right_singular_vector(&a).unwrap();
    assert_eq!(v.len(), 4);
    let gain = a.mul_vec(&v).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!((gain - to_na(&a).svd(false, false).singular_values.max()).abs() < 1e-8);
    assert_eq!(
        dominant_right_singular_vector(&ComplexMatrix::zeros(2, 2)),
        Err(Error::ZeroMatrix)
    );
}

fn arb_matrix(k: usize, n: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), k * n)
        .prop_map(move |v| ComplexMatrix::new(k, n, v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap())
}

proptest! {
    #[test]
    fn lq_reconstructs_arbitrary_matrices(a in arb_matrix(3, 4)) {
        match lq_decompose(&a) {
            Ok(f) => {
                prop_assert!(fro_dist(&f.l.matmul(&f.q), &a) <= 1e-10 * a.frobenius_norm());
                prop_assert!(f.diag.iter().all(|d| *d > 0.0));
            }
            Err(e) => prop_assert_eq!(e, Error::RankDeficient),
        }
    }

    #[test]
    fn dominant_vector_beats_any_unit_direction(a in arb_matrix(4, 4), seed in any::<u64>()) {
        prop_assume!(a.frobenius_norm() > 1e-6);
        let v = dominant_right_singular_vector(&a).unwrap();
        let sigma = to_na(&a).svd(false, false).singular_values;
        // Power iteration converges slowly when the top two singular values nearly tie.
        prop_assume!(sigma[0] - sigma[1] > 1e-3 * sigma[0]);
        let gain = |u: &[C64]| a.mul_vec(u).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unit(4, &mut rng);
        prop_assert!(gain(&v) >= gain(&u) - 1e-8 * sigma[0].max(1.0));
        prop_assert!((gain(&v) - sigma.max()).abs() <= 1e-8 * sigma[0].max(1.0));
    }
}
