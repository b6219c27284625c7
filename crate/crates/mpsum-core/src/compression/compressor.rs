//! Fit spectral clustering over pair embeddings and map any embedding to
//! its vector of Poincare distances to the cluster centroids.

use serde::{Deserialize, Serialize};

use crate::compression::affinity::rbf_affinity;
use crate::compression::ball::{fit_ball_scaler, poincare_distance, BallScaler, MAX_RADIUS};
use crate::compression::kmeans::kmeans;
use crate::compression::spectral::spectral_embed;
use crate::error::{Error, Result};
use crate::numerics::rng_derive;

/// Distances to the centroids, one nonnegative entry per cluster.
pub type FeatureVector = Vec<f64>;

const SUBSAMPLE_CAP: usize = 512;
/// Below this distance the arcosh derivative is effectively unbounded;
/// the backward pass zeroes that centroid's contribution.
const SINGULARITY_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareCompressor {
    pub scaler: BallScaler,
    /// Cluster centroids inside the open unit ball, same dimension as the
    /// pair embeddings.
    pub centroids: Vec<Vec<f64>>,
}

impl PoincareCompressor {
    pub fn n_clusters(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

fn clamp_into_ball(mut v: Vec<f64>) -> Vec<f64> {
    let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > MAX_RADIUS {
        let shrink = MAX_RADIUS / n;
        for x in &mut v {
            *x *= shrink;
        }
    }
    v
}

/// Fit: ball scaler over all embeddings, spectral clustering of a
/// (capped) subsample, centroids as original-space cluster means.
pub fn fit_compressor(
    pair_embeddings: &[Vec<f64>],
    n_clusters: usize,
    seed: u64,
) -> Result<PoincareCompressor> {
    if n_clusters < 2 {
        return Err(Error::DegenerateInput(
            "compressor needs at least 2 clusters".into(),
        ));
    }
    if pair_embeddings.len() < n_clusters {
        return Err(Error::DegenerateInput(format!(
            "{} embeddings cannot form {} clusters",
            pair_embeddings.len(),
            n_clusters
        )));
    }
    let scaler = fit_ball_scaler(pair_embeddings)?;
    let mut rng = rng_derive(seed, "cluster");

    let m = pair_embeddings.len();
    let indices: Vec<usize> = if m <= SUBSAMPLE_CAP {
        (0..m).collect()
    } else {
        let mut all: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut all);
        let mut picked: Vec<usize> = all[..SUBSAMPLE_CAP].to_vec();
        picked.sort_unstable();
        picked
    };

    let scaled: Vec<Vec<f64>> = indices
        .iter()
        .map(|&i| scaler.project(&pair_embeddings[i]))
        .collect();

    let affinity = rbf_affinity(&scaled)?;
    let spectral = spectral_embed(&affinity, n_clusters)?;
    let (assignments, spectral_means) = kmeans(&spectral, n_clusters, &mut rng, 100)?;

    // Centroids live in the original (scaled) space: mean of each
    // cluster's members, clamped into the ball.
    let dim = scaled[0].len();
    let mut centroids = Vec::with_capacity(n_clusters);
    for j in 0..n_clusters {
        let members: Vec<&Vec<f64>> = scaled
            .iter()
            .zip(&assignments)
            .filter(|(_, &a)| a == j)
            .map(|(p, _)| p)
            .collect();
        let centroid = if members.is_empty() {
            // Spectral-space fallback mirrors the k-means reseed rule: use
            // the member whose spectral row sits farthest from its mean.
            let far = spectral
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let mean = &spectral_means[assignments[i]];
                    let d: f64 = row.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                    (i, d)
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            scaled[far].clone()
        } else {
            let mut mean = vec![0.0; dim];
            for p in &members {
                for (m, v) in mean.iter_mut().zip(p.iter()) {
                    *m += v;
                }
            }
            for v in &mut mean {
                *v /= members.len() as f64;
            }
            mean
        };
        centroids.push(clamp_into_ball(centroid));
    }

    Ok(PoincareCompressor { scaler, centroids })
}

/// F[j] = poincare_distance(project(H_rs), c_j).
pub fn compress(h_rs: &[f64], compressor: &PoincareCompressor) -> Result<FeatureVector> {
    if h_rs.len() != compressor.dim() {
        return Err(Error::Shape(format!(
            "embedding of length {} vs centroids of dimension {}",
            h_rs.len(),
            compressor.dim()
        )));
    }
    let p = compressor.scaler.project(h_rs);
    compressor
        .centroids
        .iter()
        .map(|c| poincare_distance(&p, c))
        .collect()
}

/// Gradient of `upstream . compress(h)` with respect to `h`, treating the
/// centroids and scaler as constants. Near-coincident centroids (distance
/// below 1e-7) contribute nothing: the arcosh derivative is unbounded
/// there.
pub fn compress_backward(
    h_rs: &[f64],
    compressor: &PoincareCompressor,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if h_rs.len() != compressor.dim() {
        return Err(Error::Shape(format!(
            "embedding of length {} vs centroids of dimension {}",
            h_rs.len(),
            compressor.dim()
        )));
    }
    if upstream.len() != compressor.n_clusters() {
        return Err(Error::Shape(format!(
            "upstream of length {} vs {} clusters",
            upstream.len(),
            compressor.n_clusters()
        )));
    }
    let dim = h_rs.len();
    let p = compressor.scaler.project(h_rs);
    let p_norm2: f64 = p.iter().map(|x| x * x).sum();
    let p_term = 1.0 - p_norm2;

    // Gradient with respect to the projected point.
    let mut g_p = vec![0.0; dim];
    for (j, c) in compressor.centroids.iter().enumerate() {
        let g = upstream[j];
        if g == 0.0 {
            continue;
        }
        let c_norm2: f64 = c.iter().map(|x| x * x).sum();
        let c_term = 1.0 - c_norm2;
        let diff2: f64 = p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = 1.0 + 2.0 * diff2 / (p_term * c_term);
        let d = poincare_distance(&p, c)?;
        if d < SINGULARITY_EPS {
            continue;
        }
        // d/dv arcosh(v) = 1 / sqrt(v^2 - 1)
        let dd_dv = 1.0 / (v * v - 1.0).sqrt();
        let coeff_diff = 4.0 / (p_term * c_term);
        let coeff_p = 4.0 * diff2 / (p_term * p_term * c_term);
        for i in 0..dim {
            let dv_dpi = coeff_diff * (p[i] - c[i]) + coeff_p * p[i];
            g_p[i] += g * dd_dv * dv_dpi;
        }
    }

    // Through the scaler: plain scaling inside the ball, the radial
    // projection's (symmetric) Jacobian in the clamp region.
    let s = compressor.scaler.scale;
    if !compressor.scaler.clamps(h_rs) {
        Ok(g_p.iter().map(|g| g * s).collect())
    } else {
        let y: Vec<f64> = h_rs.iter().map(|x| x * s).collect();
        let rho2: f64 = y.iter().map(|x| x * x).sum();
        let rho = rho2.sqrt();
        let dot: f64 = y.iter().zip(&g_p).map(|(a, b)| a * b).sum();
        Ok((0..dim)
            .map(|i| s * MAX_RADIUS / rho * (g_p[i] - y[i] * dot / rho2))
            .collect())
    }
}
