//! Graph Laplacians, their quadratic form, the spectral initialization and
//! the normalized cut.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fuzzy::SimilarityGraph;

/// Eigenvalues at or below this magnitude count as the null space.
pub const NULL_THRESHOLD: f64 = 1e-8;

/// Sparse symmetric matrix in row-list form (diagonal included).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Degrees with the combinatorial `L = D - V` and normalized
/// `D^{-1/2} L D^{-1/2}` Laplacians.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    pub degree: Vec<f64>,
    pub combinatorial: SparseSym,
    pub normalized: SparseSym,
}

pub fn build_laplacians(v: &SimilarityGraph) -> Result<LaplacianPair> {
    let degree = v.degrees();
    if let Some(vertex) = degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedVertex { vertex });
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut comb = Vec::with_capacity(v.n());
    let mut norm = Vec::with_capacity(v.n());
    for i in 0..v.n() {
        let mut c = vec![(i, degree[i])];
        let mut m = vec![(i, 1.0)];
        for (j, w) in v.neighbors(i) {
            c.push((j, -w));
            m.push((j, -w * inv_sqrt[i] * inv_sqrt[j]));
        }
        c.sort_by_key(|e| e.0);
        m.sort_by_key(|e| e.0);
        comb.push(c);
        norm.push(m);
    }
    Ok(LaplacianPair {
        degree,
        combinatorial: SparseSym { rows: comb },
        normalized: SparseSym { rows: norm },
    })
}

/// `tr(Z^T L Z)` as the edge sum `1/2 sum_ij v_ij |Z_i - Z_j|^2`; `z` is
/// row-major `n x dim`.
pub fn laplacian_quadratic(v: &SimilarityGraph, z: &[f64], dim: usize) -> Result<f64> {
    if z.len() != v.n() * dim {
        return Err(Error::Config(format!(
            "embedding has {} values, expected {}x{dim}",
            z.len(),
            v.n()
        )));
    }
    Ok(v.edges()
        .iter()
        .map(|&(i, j, w)| {
            let zi = &z[i * dim..(i + 1) * dim];
            let zj = &z[j * dim..(j + 1) * dim];
            w * zi
                .iter()
                .zip(zj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum())
}

/// Bottom non-null eigenvectors of the normalized Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    /// `n x d`, one eigenvector per column.
    pub vectors: DMatrix<f64>,
    /// Eigenvalues of the columns, ascending.
    pub values: Vec<f64>,
    /// Number of eigenvalues at or below [`NULL_THRESHOLD`].
    pub n_null: usize,
    /// Full ascending spectrum of the normalized Laplacian.
    pub spectrum: Vec<f64>,
}

/// Largest-magnitude entry positive, first index on ties. Magnitudes within
/// a relative 1e-12 count as tied so rounding noise cannot flip the choice.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dense symmetric eigendecomposition, ascending.
pub fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn spectral_init(v: &SimilarityGraph, d: usize) -> Result<SpectralSolution> {
    if d < 1 {
        return Err(Error::Config("target dimension must be at least 1".into()));
    }
    let lap = build_laplacians(v)?;
    let n = v.n();
    let (_, components) = v.components();
    if d + components > n {
        return Err(Error::DimensionTooLarge {
            requested: d,
            available: n.saturating_sub(components),
        });
    }
    let (values, vectors) = sorted_eigen(lap.normalized.to_dense());
    let n_null = values
        .iter()
        .take_while(|&&l| l.abs() <= NULL_THRESHOLD)
        .count();
    let available = n - n_null;
    if d > available {
        return Err(Error::DimensionTooLarge {
            requested: d,
            available,
        });
    }
    let mut out = DMatrix::zeros(n, d);
    for c in 0..d {
        let mut col: Vec<f64> = vectors.column(n_null + c).iter().copied().collect();
        fix_sign(&mut col);
        out.set_column(c, &DVector::from_vec(col));
    }
    Ok(SpectralSolution {
        vectors: out,
        values: values[n_null..n_null + d].to_vec(),
        n_null,
        spectrum: values,
    })
}

/// `tr(Y^T M Y)` for a dense symmetric `M`.
pub fn rayleigh_trace(m: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (y.transpose() * m * y).trace()
}

/// Two-way split of the vertex set; `true` marks membership in `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignment: Vec<bool>,
}

impl Partition {
    pub fn new(assignment: Vec<bool>) -> Result<Self> {
        if assignment.iter().all(|&s| s) || assignment.iter().all(|&s| !s) {
            return Err(Error::Config(
                "both sides of a partition must be nonempty".into(),
            ));
        }
        Ok(Self { assignment })
    }
}

/// `cut/vol(S) + cut/vol(S^c)`.
pub fn ncut(v: &SimilarityGraph, p: &Partition) -> Result<f64> {
    if p.assignment.len() != v.n() {
        return Err(Error::Config("partition size does not match graph".into()));
    }
    let degree = v.degrees();
    let mut vol = [0.0f64; 2];
    for (i, &side) in p.assignment.iter().enumerate() {
        vol[side as usize] += degree[i];
    }
    if vol[0] <= 0.0 || vol[1] <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    let cut: f64 = v
        .edges()
        .iter()
        .filter(|&&(i, j, _)| p.assignment[i] != p.assignment[j])
        .fold(0.0, |acc, e| acc + e.2);
    Ok(cut / vol[1] + cut / vol[0])
}

/// Outcome of solving the relaxed cut both as a generalized `(L, D)`
/// eigenproblem and through the normalized Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationCheck {
    pub normalized_values: Vec<f64>,
    pub generalized_values: Vec<f64>,
    pub max_value_diff: f64,
    /// Largest principal angle (radians) between `span(U)` and
    /// `span(D^{1/2} Z)`.
    pub max_principal_angle: f64,
    /// Largest `|L z - lambda D z| / |D z|` over the generalized vectors.
    pub max_generalized_residual: f64,
}

fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Largest principal angle between the column spans of two orthonormal bases.
pub fn max_principal_angle(u: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let residual = w - u * (u.transpose() * w);
    let sin = residual.singular_values().max().min(1.0);
    sin.asin()
}

/// Solves `L z = lambda D z` independently of the normalized Laplacian: the
/// spectrum comes from a real Schur decomposition of `D^{-1} L`, each vector
/// from the null space of `L - lambda D`.
pub fn generalized_bottom_eigen(v: &SimilarityGraph, d: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let lap = build_laplacians(v)?;
    let n = v.n();
    let l = lap.combinatorial.to_dense();
    let dinv_l = DMatrix::from_fn(n, n, |r, c| l[(r, c)] / lap.degree[r]);
    let mut values: Vec<f64> = dinv_l.complex_eigenvalues().iter().map(|z| z.re).collect();
    values.sort_by(f64::total_cmp);
    let n_null = values
        .iter()
        .take_while(|&&x| x.abs() <= NULL_THRESHOLD)
        .count();
    if n_null + d > n {
        return Err(Error::DimensionTooLarge {
            requested: d,
            available: n - n_null,
        });
    }
    let chosen = values[n_null..n_null + d].to_vec();
    let mut z = DMatrix::zeros(n, d);
    for (c, &lambda) in chosen.iter().enumerate() {
        let shifted = DMatrix::from_fn(n, n, |r, k| {
            l[(r, k)] - if r == k { lambda * lap.degree[r] } else { 0.0 }
        });
        let svd = shifted.svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Eigen("SVD returned no right vectors".into()))?;
        let idx = svd.singular_values.imin();
        let vec: DVector<f64> = v_t.row(idx).transpose();
        z.set_column(c, &vec);
    }
    Ok((chosen, z))
}

pub fn ncut_relaxation_check(v: &SimilarityGraph, d: usize) -> Result<RelaxationCheck> {
    let (_, components) = v.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let sol = spectral_init(v, d)?;
    let (gen_values, z) = generalized_bottom_eigen(v, d)?;
    let degree = v.degrees();
    let l = build_laplacians(v)?.combinatorial.to_dense();

    let mut max_res = 0.0f64;
    for (c, &lambda) in gen_values.iter().enumerate() {
        let zc = z.column(c).into_owned();
        let dz = DVector::from_fn(v.n(), |r, _| degree[r] * zc[r]);
        let res = (&l * &zc - &dz * lambda).norm() / dz.norm();
        max_res = max_res.max(res);
    }

    let mapped = DMatrix::from_fn(v.n(), d, |r, c| degree[r].sqrt() * z[(r, c)]);
    let angle = max_principal_angle(&sol.vectors, &orthonormal_columns(&mapped));
    let max_value_diff = sol
        .values
        .iter()
        .zip(&gen_values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(RelaxationCheck {
        normalized_values: sol.values,
        generalized_values: gen_values,
        max_value_diff,
        max_principal_angle: angle,
        max_generalized_residual: max_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k2() -> SimilarityGraph {
        SimilarityGraph::from_edges(2, vec![(0, 1, 1.0)]).unwrap()
    }

    fn p3() -> SimilarityGraph {
        SimilarityGraph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn two_cliques() -> SimilarityGraph {
        SimilarityGraph::from_edges(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn k2_laplacians() {
        let lap = build_laplacians(&k2()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(lap.combinatorial.to_dense(), expected);
        assert_eq!(lap.normalized.to_dense(), expected);
    }

    #[test]
    fn p3_spectrum() {
        let lap = build_laplacians(&p3()).unwrap();
        assert_eq!(lap.degree, vec![1.0, 2.0, 1.0]);
        let (values, _) = sorted_eigen(lap.normalized.to_dense());
        // 1 - cos(pi k / 2), k = 0, 1, 2
        for (k, v) in values.iter().enumerate() {
            let closed = 1.0 - (std::f64::consts::PI * k as f64 / 2.0).cos();
            assert_abs_diff_eq!(*v, closed, epsilon = 1e-12);
        }
        let ones = lap.combinatorial.mul_vec(&[1.0; 3]);
        assert!(ones.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn isolated_vertex_named() {
        let g = SimilarityGraph::from_edges(3, vec![(0, 1, 0.5)]).unwrap();
        assert!(matches!(
            build_laplacians(&g),
            Err(Error::IsolatedVertex { vertex: 2 })
        ));
    }

    #[test]
    fn quadratic_two_point() {
        let q = laplacian_quadratic(&k2(), &[0.0, 1.0], 1).unwrap();
        assert_eq!(q, 1.0);
        let l = build_laplacians(&k2()).unwrap().combinatorial.to_dense();
        let z = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(rayleigh_trace(&l, &z), 1.0);
        assert_eq!(
            laplacian_quadratic(&p3(), &[2.0, -1.0, 2.0, -1.0, 2.0, -1.0], 2).unwrap(),
            0.0
        );
        assert!(laplacian_quadratic(&p3(), &[0.0; 5], 2).is_err());
    }

    #[test]
    fn p3_spectral_init() {
        let sol = spectral_init(&p3(), 1).unwrap();
        assert_eq!(sol.n_null, 1);
        assert_abs_diff_eq!(sol.values[0], 1.0, epsilon = 1e-12);
        let lap = build_laplacians(&p3()).unwrap().normalized.to_dense();
        assert_abs_diff_eq!(rayleigh_trace(&lap, &sol.vectors), 1.0, epsilon = 1e-8);
        // Eigenvector for lambda = 1 is (1, 0, -1)/sqrt(2) up to sign; the
        // convention makes the first of the tied maxima positive.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(sol.vectors[(0, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.vectors[(1, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.vectors[(2, 0)], -s, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_null_space_reported() {
        let sol = spectral_init(&two_cliques(), 1).unwrap();
        assert_eq!(sol.n_null, 2);
        assert_abs_diff_eq!(sol.values[0], 2.0, epsilon = 1e-12);
        assert!(matches!(
            spectral_init(&two_cliques(), 3),
            Err(Error::DimensionTooLarge { .. })
        ));
        assert!(spectral_init(&p3(), 0).is_err());
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.5, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.5, -0.5]);
    }

    #[test]
    fn ncut_examples() {
        let split = Partition::new(vec![true, true, false, false]).unwrap();
        assert_eq!(ncut(&two_cliques(), &split).unwrap(), 0.0);
        let k2_split = Partition::new(vec![true, false]).unwrap();
        assert_eq!(ncut(&k2(), &k2_split).unwrap(), 2.0);
        assert!(Partition::new(vec![true, true]).is_err());
        let g = SimilarityGraph::from_edges(3, vec![(0, 1, 0.5)]).unwrap();
        let p = Partition::new(vec![true, true, false]).unwrap();
        assert!(matches!(ncut(&g, &p), Err(Error::ZeroVolume)));
    }

    #[test]
    fn relaxation_small_graphs() {
        let r = ncut_relaxation_check(&p3(), 1).unwrap();
        assert_abs_diff_eq!(r.normalized_values[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.generalized_values[0], 1.0, epsilon = 1e-8);
        assert!(r.max_principal_angle <= 1e-6);
        let r = ncut_relaxation_check(&k2(), 1).unwrap();
        assert_abs_diff_eq!(r.generalized_values[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.normalized_values[0], 2.0, epsilon = 1e-8);
        assert!(matches!(
            ncut_relaxation_check(&two_cliques(), 1),
            Err(Error::Disconnected { components: 2 })
        ));
    }
}
