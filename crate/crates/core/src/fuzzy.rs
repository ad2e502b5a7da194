//! The fuzzy similarity graph: per-point (rho, sigma) calibration, directed
//! exponential memberships, and fuzzy-union symmetrization.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::knn::KnnGraph;

/// Number of bisection steps for sigma.
pub const SIGMA_ITERATIONS: usize = 64;
/// Bracket for sigma, as multiples of the row's mean positive gap.
pub const SIGMA_BRACKET: (f64, f64) = (1e-8, 1e4);
/// Largest calibration residual accepted for an unflagged row.
pub const SIGMA_TOLERANCE: f64 = 1e-5;

/// Per-point local connectivity (`rho`) and bandwidth (`sigma`).
///
/// `flagged[i]` is set when the calibration equation has no root inside the
/// bracket for row `i`; sigma is then clamped to the bracket edge where the
/// membership sum comes closest to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothKnnParams {
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl SmoothKnnParams {
    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

fn membership_sum(gaps: &[f64], sigma: f64) -> f64 {
    gaps.iter().map(|g| (-g / sigma).exp()).sum()
}

/// |sum_j exp(-max(0, d_ij - rho)/sigma) - log2 k| for one row.
pub fn calibration_residual(distances: &[f64], rho: f64, sigma: f64) -> f64 {
    let gaps: Vec<f64> = distances.iter().map(|d| (d - rho).max(0.0)).collect();
    (membership_sum(&gaps, sigma) - (distances.len() as f64).log2()).abs()
}

fn calibrate_row(distances: &[f64]) -> (f64, f64, bool) {
    let rho = distances.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let gaps: Vec<f64> = distances.iter().map(|d| (d - rho).max(0.0)).collect();
    let target = (distances.len() as f64).log2();

    let positive: Vec<f64> = gaps.iter().copied().filter(|&g| g > 0.0).collect();
    let scale = if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    };
    let mut lo = SIGMA_BRACKET.0 * scale;
    let mut hi = SIGMA_BRACKET.1 * scale;

    // The sum is nondecreasing in sigma; a root pinned at either edge is
    // not an interior root and the row is flagged.
    if membership_sum(&gaps, lo) >= target {
        return (rho, lo, true);
    }
    if membership_sum(&gaps, hi) < target {
        return (rho, hi, true);
    }
    for _ in 0..SIGMA_ITERATIONS {
        let mid = (lo * hi).sqrt();
        if membership_sum(&gaps, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = if (membership_sum(&gaps, lo) - target).abs()
        <= (membership_sum(&gaps, hi) - target).abs()
    {
        lo
    } else {
        hi
    };
    let flagged = (membership_sum(&gaps, sigma) - target).abs() > SIGMA_TOLERANCE;
    (rho, sigma, flagged)
}

/// Solves the log2(k) calibration for every row by geometric bisection.
pub fn smooth_knn_params(knn: &KnnGraph) -> Result<SmoothKnnParams> {
    if knn.k() < 2 {
        return Err(Error::Config(format!(
            "smooth kNN calibration needs k >= 2, got {}",
            knn.k()
        )));
    }
    let n = knn.n();
    let mut params = SmoothKnnParams {
        rho: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        flagged: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (rho, sigma, flagged) = calibrate_row(knn.distances(i));
        params.rho.push(rho);
        params.sigma.push(sigma);
        params.flagged.push(flagged);
    }
    Ok(params)
}

/// Directed memberships `v_{j|i}` stored row by row in k-NN order.
/// Entries that underflow to zero are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedWeights {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl DirectedWeights {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n || j == i || !(v > 0.0 && v <= 1.0) {
                    return Err(Error::Config(format!(
                        "invalid directed weight ({i}, {j}, {v})"
                    )));
                }
            }
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }
}

pub fn membership(distance: f64, rho: f64, sigma: f64) -> f64 {
    (-(distance - rho).max(0.0) / sigma).exp()
}

pub fn directed_weights(knn: &KnnGraph, params: &SmoothKnnParams) -> Result<DirectedWeights> {
    let n = knn.n();
    if params.rho.len() != n || params.sigma.len() != n {
        return Err(Error::Config(
            "calibration does not match k-NN graph".into(),
        ));
    }
    let rows = (0..n)
        .map(|i| {
            knn.indices(i)
                .iter()
                .zip(knn.distances(i))
                .map(|(&j, &d)| (j, membership(d, params.rho[i], params.sigma[i])))
                .filter(|&(_, v)| v > 0.0)
                .collect()
        })
        .collect();
    Ok(DirectedWeights { n, rows })
}

/// Probabilistic t-conorm `a + b - ab`, evaluated as `hi + lo (1 - hi)` so
/// that it is commutative bit for bit, never rounds below `max(a, b)`, and
/// keeps 0 and 1 as exact identity and absorbing elements.
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + lo * (1.0 - hi)
}

/// Sparse symmetric weight matrix with zero diagonal.
///
/// Each undirected edge is stored once in `edges` (`i < j`) and the CSR
/// adjacency is filled from that single value, so both orientations agree
/// bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SimilarityGraph {
    /// Builds a graph from undirected edges given in either orientation.
    /// Zero weights are dropped; repeated pairs and self-loops are rejected.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::Config(format!(
                    "edge ({i}, {j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::Config(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(Error::Config(format!(
                    "edge ({i}, {j}) weight {w} outside [0, 1]"
                )));
            }
            if w > 0.0 {
                list.push((i.min(j), i.max(j), w));
            }
        }
        list.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = list
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::Config(format!(
                "edge ({}, {}) given twice",
                w[0].0, w[0].1
            )));
        }
        Ok(Self::assemble(n, list))
    }

    fn assemble(n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j, _) in &edges {
            counts[i] += 1;
            counts[j] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let mut fill = row_ptr[..n].to_vec();
        let mut col = vec![0usize; row_ptr[n]];
        let mut val = vec![0f64; row_ptr[n]];
        for &(i, j, w) in &edges {
            col[fill[i]] = j;
            val[fill[i]] = w;
            fill[i] += 1;
            col[fill[j]] = i;
            val[fill[j]] = w;
            fill[j] += 1;
        }
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            let mut pairs: Vec<(usize, f64)> = col[s..e]
                .iter()
                .copied()
                .zip(val[s..e].iter().copied())
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (off, (c, v)) in pairs.into_iter().enumerate() {
                col[s + off] = c;
                val[s + off] = v;
            }
        }
        Self {
            n,
            edges,
            row_ptr,
            col,
            val,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Undirected edges `(i, j, v_ij)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbors of `i` with weights, sorted by neighbor id.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col[s..e]
            .iter()
            .copied()
            .zip(self.val[s..e].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col[s..e].binary_search(&j) {
            Ok(pos) => self.val[s + pos],
            Err(_) => 0.0,
        }
    }

    /// Stored nonzeros counting both orientations.
    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.neighbors(i).fold(0.0, |acc, (_, w)| acc + w))
            .collect()
    }

    /// Dense copy, for oracles and small eigenproblems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.edges {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        m
    }

    /// Connected components as a label per vertex plus the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if label[u] == usize::MAX {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// One `i j v_ij` line per edge with 17 significant digits.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for &(i, j, v) in &self.edges {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(n: usize, r: R) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |column: usize, message: &str| Error::Parse {
                row: lineno + 1,
                column,
                message: message.to_string(),
            };
            if parts.len() != 3 {
                return Err(bad(0, "expected `i j v`"));
            }
            let i = parts[0]
                .parse::<usize>()
                .map_err(|_| bad(1, "bad vertex id"))?;
            let j = parts[1]
                .parse::<usize>()
                .map_err(|_| bad(2, "bad vertex id"))?;
            let v = parts[2].parse::<f64>().map_err(|_| bad(3, "bad weight"))?;
            edges.push((i, j, v));
        }
        Self::from_edges(n, edges)
    }
}

/// Merges both directions of every k-NN edge with the fuzzy union; a missing
/// direction counts as zero.
pub fn symmetrize(directed: &DirectedWeights) -> SimilarityGraph {
    let mut entries: Vec<(usize, usize, f64, bool)> = Vec::new();
    for i in 0..directed.n() {
        for &(j, v) in directed.row(i) {
            // `forward` marks v_{j|i} with i < j.
            entries.push((i.min(j), i.max(j), v, i < j));
        }
    }
    entries.sort_by_key(|e| (e.0, e.1, !e.3));

    let mut edges = Vec::with_capacity(entries.len());
    let mut idx = 0;
    while idx < entries.len() {
        let (i, j, _, _) = entries[idx];
        let (mut fwd, mut bwd) = (0.0, 0.0);
        while idx < entries.len() && (entries[idx].0, entries[idx].1) == (i, j) {
            if entries[idx].3 {
                fwd = entries[idx].2;
            } else {
                bwd = entries[idx].2;
            }
            idx += 1;
        }
        edges.push((i, j, fuzzy_union(fwd, bwd)));
    }
    SimilarityGraph::assemble(directed.n(), edges)
}

/// k-NN graph to symmetric fuzzy graph in one call.
pub fn fuzzy_graph(knn: &KnnGraph) -> Result<(SimilarityGraph, SmoothKnnParams)> {
    let params = smooth_knn_params(knn)?;
    let directed = directed_weights(knn, &params)?;
    Ok((symmetrize(&directed), params))
}
