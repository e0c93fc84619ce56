//! Principal component projection by power iteration with deflation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, l2_norm, Matrix};
use crate::rng::seeded;

pub const PCA_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k×d`, one unit principal direction per row.
    pub components: Matrix,
    /// Sample-covariance eigenvalue of each component.
    pub variance: Vec<f64>,
    /// Share of the total variance per component.
    pub explained_ratio: Vec<f64>,
    /// `n×k` projected coordinates.
    pub coords: Matrix,
}

/// Mean-centred projection onto the top `k` principal directions. Each
/// direction is flipped so that its first nonzero loading is positive.
pub fn pca_project(x: &Matrix, k: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::invalid("pca needs at least two rows"));
    }
    if k == 0 || k > d {
        return Err(Error::invalid(format!("cannot take {k} components of {d} columns")));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut centred = x.clone();
    for i in 0..n {
        for (v, m) in centred.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let mut cov = centred.t_matmul(&centred);
    cov.scale(1.0 / (n - 1) as f64);
    let total: f64 = (0..d).map(|j| cov[(j, j)]).sum();

    let mut start = Matrix::uniform(1, d, 1.0, &mut seeded(0));
    let norm = l2_norm(start.row(0));
    start.scale(1.0 / norm);
    let mut components = Matrix::zeros(k, d);
    let mut variance = Vec::with_capacity(k);
    for c in 0..k {
        let mut v = start.row(0).to_vec();
        let mut lambda = 0.0;
        for _ in 0..MAX_ITERATIONS {
            let w: Vec<f64> = cov.iter_rows().map(|r| dot(r, &v)).collect();
            let norm = l2_norm(&w);
            if norm <= f64::EPSILON * total.max(f64::MIN_POSITIVE) {
                v.iter_mut().for_each(|x| *x = 0.0);
                lambda = 0.0;
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            v = next;
            lambda = norm;
            if delta < PCA_TOLERANCE {
                break;
            }
        }
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] -= lambda * v[i] * v[j];
            }
        }
        components.row_mut(c).copy_from_slice(&v);
        variance.push(lambda);
    }
    let explained_ratio = variance
        .iter()
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    let coords = centred.matmul_t(&components);
    Ok(Pca {
        mean,
        components,
        variance,
        explained_ratio,
        coords,
    })
}
