//! Seeded Lloyd's k-means with k-means++ seeding over row-major points.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ initialization (Arthur & Vassilvitskii, 2007).
fn plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let count = points.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..count);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);

    let mut dist: Vec<f64> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();
    for _ in 1..k {
        let pick = match WeightedIndex::new(&dist) {
            Ok(sampler) => sampler.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..count),
        };
        let new = points[pick * dim..(pick + 1) * dim].to_vec();
        for (d, p) in dist.iter_mut().zip(points.chunks_exact(dim)) {
            *d = d.min(sq_dist(p, &new));
        }
        centroids.extend_from_slice(&new);
    }
    centroids
}

/// Returns `k × dim` centroids. Empty clusters are reseeded to the point
/// farthest from its current centroid.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64) -> Vec<f64> {
    assert!(dim > 0 && k > 0 && points.len().is_multiple_of(dim));
    let count = points.len() / dim;
    assert!(k <= count, "k = {k} exceeds {count} points");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, dim, k, &mut rng);
    let mut assignment = vec![0usize; count];
    let mut dists = vec![0.0f64; count];

    for _ in 0..MAX_ITERATIONS {
        for (p, point) in points.chunks_exact(dim).enumerate() {
            let (c, d) = nearest(point, &centroids, dim);
            assignment[p] = c;
            dists[p] = d;
        }

        let mut sums = vec![0.0f64; k * dim];
        let mut sizes = vec![0usize; k];
        for (p, point) in points.chunks_exact(dim).enumerate() {
            let c = assignment[p];
            sizes[c] += 1;
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(point) {
                *s += x;
            }
        }

        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..count)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap();
                sums[c * dim..(c + 1) * dim].copy_from_slice(&points[far * dim..(far + 1) * dim]);
                sizes[c] = 1;
                sizes[assignment[far]] -= 1;
                let old = assignment[far];
                for (s, x) in sums[old * dim..(old + 1) * dim]
                    .iter_mut()
                    .zip(&points[far * dim..(far + 1) * dim])
                {
                    *s -= x;
                }
                assignment[far] = c;
                dists[far] = 0.0;
            }
        }

        let mut shift = 0.0f64;
        for c in 0..k {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            let old = &mut centroids[c * dim..(c + 1) * dim];
            let mut moved = 0.0;
            for (o, s) in old.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let new = s * inv;
                moved += (new - *o) * (new - *o);
                *o = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    centroids
}
