//! Principal components against a Jacobi eigensolver.

use kgrefine::pca::pca_project;
use kgrefine::rng::seeded;
use kgrefine::Matrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
fn jacobi_eigenvalues(mut a: Matrix) -> Vec<f64> {
    let n = a.rows();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn sample_covariance(x: &Matrix) -> Matrix {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let mut c = Matrix::zeros(d, d);
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]) / (n - 1) as f64;
            }
        }
    }
    c
}

fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect())
}

#[test]
fn planar_data_is_reconstructed() {
    let mut rng = seeded(51);
    let basis = gaussian(2, 5, 52);
    let offset: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let coef = gaussian(40, 2, 53);
    let x = coef.matmul(&basis);
    let x = Matrix::from_vec(40, 5, x.data().iter().enumerate().map(|(i, v)| v + offset[i % 5]).collect());
    let p = pca_project(&x, 2).unwrap();
    let recon = p.coords.matmul(&p.components);
    let mut err: f64 = 0.0;
    for i in 0..40 {
        for j in 0..5 {
            err = err.max((recon[(i, j)] + p.mean[j] - x[(i, j)]).abs());
        }
    }
    assert!(err <= 1e-8, "{err}");
    assert!((p.explained_ratio.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
}

#[test]
fn variances_match_jacobi_eigenvalues() {
    for (seed, d) in [(54, 5), (55, 8)] {
        let x = gaussian(300, d, seed);
        let p = pca_project(&x, 3).unwrap();
        let ev = jacobi_eigenvalues(sample_covariance(&x));
        for k in 0..3 {
            assert!((p.variance[k] - ev[k]).abs() <= 1e-8 * ev[k].max(1.0), "{} vs {}", p.variance[k], ev[k]);
        }
        let total: f64 = ev.iter().sum();
        assert!((p.explained_ratio[0] - ev[0] / total).abs() <= 1e-8);
    }
}

#[test]
fn isotropic_shares_near_two_over_d() {
    let d = 10;
    let x = gaussian(4000, d, 56);
    let p = pca_project(&x, 2).unwrap();
    let share: f64 = p.explained_ratio.iter().sum();
    // Top-2 sample eigenvalues sit a few standard errors above 1.
    assert!((share - 2.0 / d as f64).abs() < 0.05, "{share}");
}

#[test]
fn row_permutation_only_permutes_coordinates() {
    let x = gaussian(30, 4, 57);
    let mut perm: Vec<usize> = (0..30).collect();
    perm.shuffle(&mut seeded(58));
    let px = x.select_rows(&perm);
    let a = pca_project(&x, 2).unwrap();
    let b = pca_project(&px, 2).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        for k in 0..2 {
            assert!((a.coords[(old, k)] - b.coords[(new, k)]).abs() <= 1e-8);
        }
    }
    assert!(a.components.max_abs_diff(&b.components) <= 1e-8);
}

#[test]
fn components_follow_sign_convention() {
    let p = pca_project(&gaussian(50, 6, 59), 3).unwrap();
    for row in p.components.iter_rows() {
        let first = row.iter().find(|v| v.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
}
