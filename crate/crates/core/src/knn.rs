//! Exact k-nearest-neighbor search.
//!
//! Brute force over all pairs with a per-row partial selection. Ties at equal
//! distance go to the smaller index, so the result is a deterministic
//! function of the input and matches a full pairwise sort exactly.

use std::cmp::Ordering;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Directed k-NN relation: row `i` lists the `k` nearest other points,
/// nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl KnnGraph {
    /// Builds a graph from precomputed rows, checking the row invariants.
    pub fn from_rows(k: usize, indices: Vec<Vec<usize>>, distances: Vec<Vec<f64>>) -> Result<Self> {
        let n = indices.len();
        if distances.len() != n || k == 0 {
            return Err(Error::Config("malformed k-NN rows".into()));
        }
        for (i, (idx, dist)) in indices.iter().zip(&distances).enumerate() {
            if idx.len() != k || dist.len() != k {
                return Err(Error::Config(format!(
                    "row {i} does not have k={k} entries"
                )));
            }
            if idx.iter().any(|&j| j == i || j >= n) {
                return Err(Error::Config(format!("row {i} has an invalid neighbor id")));
            }
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != k {
                return Err(Error::Config(format!("row {i} repeats a neighbor")));
            }
            if dist.iter().any(|d| !(d.is_finite() && *d >= 0.0))
                || dist.windows(2).any(|w| w[0] > w[1])
            {
                return Err(Error::Config(format!(
                    "row {i} distances not sorted nonnegative"
                )));
            }
        }
        Ok(Self {
            k,
            indices: indices.into_iter().flatten().collect(),
            distances: distances.into_iter().flatten().collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.indices.len() / self.k
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

pub fn knn_search(x: &DataMatrix, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = x.n();
    if k < 1 || k >= n {
        return Err(Error::Config(format!(
            "k must satisfy 1 <= k <= n-1 (k={k}, n={n})"
        )));
    }
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        let xi = x.row(i);
        row.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (metric.distance(xi, x.row(j)), j)),
        );
        if k < row.len() {
            row.select_nth_unstable_by(k - 1, by_distance_then_index);
            row.truncate(k);
        }
        row.sort_unstable_by(by_distance_then_index);
        for &(d, j) in row.iter() {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(KnnGraph {
        k,
        indices,
        distances,
    })
}
