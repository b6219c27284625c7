//! Lloyd's k-means with k-means++ seeding and deterministic tie-breaking.

use crate::error::{Error, Result};
use crate::numerics::RngStream;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest mean, ties broken by lowest cluster index.
fn assign_one(point: &[f64], means: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(point, &means[0]);
    for (j, mean) in means.iter().enumerate().skip(1) {
        let d = sq_dist(point, mean);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn kmeans_pp_seeds(points: &[Vec<f64>], k: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.below(n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.uniform() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            // All remaining mass is zero (duplicate points); take the first
            // index not already chosen.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.iter().map(|&i| points[i].clone()).collect()
}

/// Returns (assignments, means). Empty clusters are reseeded to the point
/// farthest from its currently assigned mean.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut RngStream,
    max_iter: usize,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let n = points.len();
    if k > n {
        return Err(Error::InvalidK { k, n });
    }
    if k == 0 {
        return Err(Error::InvalidK { k, n });
    }
    let dim = points[0].len();

    let mut means = kmeans_pp_seeds(points, k, rng);
    let mut assignments: Vec<usize> = points.iter().map(|p| assign_one(p, &means)).collect();

    for _ in 0..max_iter {
        // Recompute means.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for s in &mut sums[j] {
                    *s /= counts[j] as f64;
                }
                means[j] = sums[j].clone();
            }
        }
        // Reseed empty clusters to the point farthest from its own mean.
        for j in 0..k {
            if counts[j] == 0 {
                let mut far_idx = 0;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    let d = sq_dist(p, &means[assignments[i]]);
                    if d > far_d {
                        far_d = d;
                        far_idx = i;
                    }
                }
                means[j] = points[far_idx].clone();
            }
        }

        let next: Vec<usize> = points.iter().map(|p| assign_one(p, &means)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }

    Ok((assignments, means))
}
