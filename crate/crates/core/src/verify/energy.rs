//! Two-sample energy-distance test with permutation p-values.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{ModelSpace, Point};
use crate::rng::{domain, stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub permutations: usize,
}

fn distance_matrix(space: &ModelSpace, pts: &[Point]) -> Vec<f64> {
    let n = pts.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j > i { space.distance(&pts[i], &pts[j]) } else { 0.0 }).collect())
        .collect();
    rows.concat()
}

/// `2E|X−Y| − E|X−X'| − E|Y−Y'|` for the labelling `is_x`.
fn statistic(d: &[f64], n: usize, is_x: &[bool], nx: usize, ny: usize) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        for j in i + 1..n {
            match (is_x[i], is_x[j]) {
                (true, true) => xx += row[j],
                (false, false) => yy += row[j],
                _ => xy += row[j],
            }
        }
    }
    let (nx, ny) = (nx as f64, ny as f64);
    2.0 * xy / (nx * ny) - 2.0 * xx / (nx * nx) - 2.0 * yy / (ny * ny)
}

/// Energy distance between two samples under the space's distance.
pub fn energy_distance(space: &ModelSpace, x: &[Point], y: &[Point]) -> f64 {
    let pts: Vec<Point> = x.iter().chain(y).cloned().collect();
    let d = distance_matrix(space, &pts);
    let labels: Vec<bool> = (0..pts.len()).map(|i| i < x.len()).collect();
    statistic(&d, pts.len(), &labels, x.len(), y.len())
}

/// Permutation test of equal laws; permutation `k` draws from its own stream.
pub fn energy_test(
    space: &ModelSpace,
    x: &[Point],
    y: &[Point],
    permutations: usize,
    seed: u64,
) -> EnergyTest {
    assert!(!x.is_empty() && !y.is_empty(), "samples must be non-empty");
    let pts: Vec<Point> = x.iter().chain(y).cloned().collect();
    let n = pts.len();
    let d = distance_matrix(space, &pts);
    let labels: Vec<bool> = (0..n).map(|i| i < x.len()).collect();
    let observed = statistic(&d, n, &labels, x.len(), y.len());
    let exceed: usize = (0..permutations as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, domain::PERMUTATION + k);
            let mut l = labels.clone();
            l.shuffle(&mut rng);
            usize::from(statistic(&d, n, &l, x.len(), y.len()) >= observed)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    EnergyTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        n_x: x.len(),
        n_y: y.len(),
        permutations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<Point> {
        let mut rng = stream(seed, 0);
        (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Point::new(&[a + shift, b, 0.0])
            })
            .collect()
    }

    #[test]
    fn detects_shift_and_accepts_equal_laws() {
        let space = ModelSpace::HEISENBERG3;
        let same = energy_test(&space, &normals(1, 150, 0.0), &normals(2, 150, 0.0), 200, 3);
        assert!(same.p_value > 0.01);
        let shifted = energy_test(&space, &normals(1, 150, 0.0), &normals(2, 150, 0.8), 200, 3);
        assert!(shifted.p_value < 0.01);
        assert!(shifted.statistic > same.statistic);
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let space = ModelSpace::HEISENBERG3;
        let a = normals(4, 40, 0.0);
        assert!(energy_distance(&space, &a, &a).abs() < 1e-12);
    }
}
