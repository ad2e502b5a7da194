//! Synthetic fixtures and CSV ingestion.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (Ziggurat method)
//! driven by a ChaCha8 stream seeded from the caller's `u64`. Outputs are
//! stable for a given build of this crate; bit-compatibility with other
//! implementations is not attempted.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `n` points in `dim` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    dim: usize,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Config(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, n, dim)
    }

    pub fn from_flat(values: Vec<f64>, n: usize, dim: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 points, got {n}")));
        }
        if dim < 1 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if values.len() != n * dim {
            return Err(Error::Config(format!(
                "buffer of length {} does not hold {n}x{dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite coordinate at point {}, dimension {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { values, n, dim })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Data plus ground-truth class ids. Labels are for evaluation and plotting
/// only; nothing in graph construction reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<i64>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != data.n() {
            return Err(Error::Config(format!(
                "{} labels for {} points",
                labels.len(),
                data.n()
            )));
        }
        Ok(Self { data, labels })
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Isotropic Gaussian blobs, `n_per_cluster` samples around each center.
/// Label `c` marks samples of `centers[c]`.
pub fn gen_blobs(
    n_per_cluster: usize,
    centers: &[Vec<f64>],
    std: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if centers.is_empty() {
        return Err(Error::Config("gen_blobs needs at least one center".into()));
    }
    if n_per_cluster < 1 {
        return Err(Error::Config("n_per_cluster must be at least 1".into()));
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::Config(format!("std must be positive, got {std}")));
    }
    let dim = centers[0].len();
    if dim == 0 || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::Config(
            "centers must share a nonzero dimension".into(),
        ));
    }

    let mut rng = rng_for(seed);
    let n = n_per_cluster * centers.len();
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            for &c in center {
                let z: f64 = rng.sample(StandardNormal);
                values.push(c + std * z);
            }
            labels.push(label as i64);
        }
    }
    // A single sample is a valid fixture, so bypass the n >= 2 check.
    let data = if n < 2 {
        DataMatrix { values, n, dim }
    } else {
        DataMatrix::from_flat(values, n, dim)?
    };
    LabeledDataset::new(data, labels)
}

/// Centers of the two-blob fixture, four standard deviations apart: close
/// enough for a connected 15-NN graph, far enough that the clusters stay
/// distinguishable.
pub const TWO_BLOB_CENTERS: [[f64; 2]; 2] = [[0.0, 0.0], [4.0, 0.0]];

/// Two unit-variance planar blobs of `n_per_cluster` points each.
pub fn two_blob_fixture(n_per_cluster: usize, seed: u64) -> Result<LabeledDataset> {
    let centers: Vec<Vec<f64>> = TWO_BLOB_CENTERS.iter().map(|c| c.to_vec()).collect();
    gen_blobs(n_per_cluster, &centers, 1.0, seed)
}

/// Two interleaved unit half-circles: the upper one centred at the origin
/// (label 0) and the lower one centred at (1, 0.5) (label 1), each point
/// perturbed by isotropic Gaussian noise of standard deviation `noise`.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::Config(format!("two moons needs n >= 2, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Config(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let angles = |count: usize| -> Vec<f64> {
        if count == 1 {
            vec![0.0]
        } else {
            (0..count)
                .map(|i| std::f64::consts::PI * i as f64 / (count - 1) as f64)
                .collect()
        }
    };

    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for t in angles(n_outer) {
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for t in angles(n_inner) {
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }

    let mut rng = rng_for(seed);
    let mut values = Vec::with_capacity(2 * n);
    for p in points {
        for c in p {
            let z: f64 = rng.sample(StandardNormal);
            values.push(c + noise * z);
        }
    }
    LabeledDataset::new(DataMatrix::from_flat(values, n, 2)?, labels)
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a comma-separated numeric table. A first row containing any
/// non-numeric cell is treated as a header. With `has_labels`, the last
/// column holds integer class ids. Row numbers in errors are 1-based file
/// lines.
pub fn read_csv<R: Read>(reader: R, has_labels: bool) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0usize;

    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if idx == 0 && record.iter().any(|c| parse_cell(c).is_none()) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(w) + 1,
                    message: format!("ragged row: {} cells, expected {w}", record.len()),
                });
            }
            Some(_) => {}
        }
        let coord_cols = if has_labels {
            record
                .len()
                .checked_sub(1)
                .filter(|&c| c > 0)
                .ok_or(Error::Parse {
                    row: line,
                    column: 1,
                    message: "label column requires at least one coordinate column".into(),
                })?
        } else {
            record.len()
        };
        for (col, cell) in record.iter().enumerate() {
            if col < coord_cols {
                let v = parse_cell(cell)
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row: line,
                        column: col + 1,
                        message: format!("not a finite number: {cell:?}"),
                    })?;
                values.push(v);
            } else {
                let label = cell.parse::<i64>().map_err(|_| Error::Parse {
                    row: line,
                    column: col + 1,
                    message: format!("not an integer label: {cell:?}"),
                })?;
                labels.push(label);
            }
        }
        n += 1;
    }

    let dim = width.map_or(0, |w| if has_labels { w - 1 } else { w });
    if n < 2 {
        return Err(Error::Parse {
            row: n + 1,
            column: 0,
            message: format!("need at least 2 data rows, found {n}"),
        });
    }
    if !has_labels {
        labels = vec![0; n];
    }
    LabeledDataset::new(DataMatrix::from_flat(values, n, dim)?, labels)
}

pub fn load_csv(path: &Path, has_labels: bool) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), has_labels)
}

/// Writes one row per point; `labels`, when given, become a trailing column.
/// Floats use Rust's shortest round-trip formatting, so reading the file back
/// reproduces every coordinate exactly.
pub fn write_csv<W: Write>(
    mut writer: W,
    coords: &[f64],
    dim: usize,
    labels: Option<&[i64]>,
) -> Result<()> {
    for (i, row) in coords.chunks_exact(dim).enumerate() {
        let mut line = row
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(labels) = labels {
            line.push(',');
            line.push_str(&labels[i].to_string());
        }
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn save_csv(path: &Path, dataset: &LabeledDataset, with_labels: bool) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(
        &mut w,
        dataset.data.as_slice(),
        dataset.data.dim(),
        with_labels.then_some(dataset.labels.as_slice()),
    )?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_blob_sample() {
        let ds = gen_blobs(1, &[vec![0.0, 0.0]], 1.0, 7).unwrap();
        assert_eq!(ds.data.n(), 1);
        assert_eq!(ds.labels, vec![0]);
    }

    #[test]
    fn blob_means_near_centers() {
        let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        let ds = gen_blobs(50, &centers, 0.5, 42).unwrap();
        assert_eq!(ds.data.n(), 100);
        let tol = 3.0 * 0.5 / 50f64.sqrt();
        for (label, center) in centers.iter().enumerate() {
            let members: Vec<&[f64]> = ds
                .data
                .rows()
                .zip(&ds.labels)
                .filter(|(_, &l)| l == label as i64)
                .map(|(r, _)| r)
                .collect();
            assert_eq!(members.len(), 50);
            for (dim, &c) in center.iter().enumerate() {
                let mean = members.iter().map(|r| r[dim]).sum::<f64>() / 50.0;
                assert!((mean - c).abs() <= tol, "cluster {label} dim {dim}: {mean}");
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let c = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        assert_eq!(
            gen_blobs(50, &c, 0.5, 42).unwrap(),
            gen_blobs(50, &c, 0.5, 42).unwrap()
        );
        assert_eq!(
            gen_two_moons(200, 0.05, 1).unwrap(),
            gen_two_moons(200, 0.05, 1).unwrap()
        );
        assert_ne!(
            gen_two_moons(200, 0.05, 1).unwrap(),
            gen_two_moons(200, 0.05, 2).unwrap()
        );
    }

    #[test]
    fn empty_centers_rejected() {
        assert!(matches!(gen_blobs(5, &[], 1.0, 0), Err(Error::Config(_))));
        assert!(gen_blobs(5, &[vec![0.0]], 0.0, 0).is_err());
    }

    fn dist_to_moons(p: &[f64]) -> f64 {
        // Distance to the upper unit half-circle at the origin and the lower
        // one at (1, 0.5); each arc's endpoints handle the off-arc region.
        let arc = |cx: f64, cy: f64, upper: bool| {
            let (dx, dy) = (p[0] - cx, p[1] - cy);
            let on_side = if upper { dy >= 0.0 } else { dy <= 0.0 };
            if on_side {
                ((dx * dx + dy * dy).sqrt() - 1.0).abs()
            } else {
                let e1 = ((dx - 1.0).powi(2) + dy * dy).sqrt();
                let e2 = ((dx + 1.0).powi(2) + dy * dy).sqrt();
                e1.min(e2)
            }
        };
        arc(0.0, 0.0, true).min(arc(1.0, 0.5, false))
    }

    #[test]
    fn noiseless_moons_lie_on_curves() {
        let ds = gen_two_moons(2, 0.0, 0).unwrap();
        for p in ds.data.rows() {
            assert!(dist_to_moons(p) < 1e-12, "{p:?}");
        }
        let ds = gen_two_moons(51, 0.0, 3).unwrap();
        assert!(ds.data.rows().all(|p| dist_to_moons(p) < 1e-12));
    }

    #[test]
    fn noisy_moons_within_six_sigma() {
        let ds = gen_two_moons(200, 0.05, 1).unwrap();
        assert_eq!(ds.data.n(), 200);
        for p in ds.data.rows() {
            assert!(dist_to_moons(p) <= 0.3, "{p:?}");
        }
    }

    #[test]
    fn reads_plain_table() {
        let ds = read_csv("1,2\n3,4\n5,6\n".as_bytes(), false).unwrap();
        assert_eq!((ds.data.n(), ds.data.dim()), (3, 2));
        assert_eq!(ds.labels, vec![0, 0, 0]);
        assert_eq!(ds.data.row(2), &[5.0, 6.0]);
    }

    #[test]
    fn header_and_labels() {
        let ds = read_csv("x,y,label\n1,2,0\n3,4,1\n".as_bytes(), true).unwrap();
        assert_eq!(ds.data.dim(), 2);
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn non_numeric_cell_names_row() {
        let err = read_csv("1,2\nx,4\n5,6\n".as_bytes(), false).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_short_inputs() {
        assert!(matches!(
            read_csv("1,2\n3\n".as_bytes(), false),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_csv("1,2\n".as_bytes(), false),
            Err(Error::Parse { .. })
        ));
        assert!(read_csv("1,2,0.5\n3,4,1\n".as_bytes(), true).is_err());
    }

    #[test]
    fn blob_round_trip() {
        let ds = gen_blobs(20, &[vec![0.0, 1.0, 2.0], vec![5.0, 5.0, 5.0]], 0.7, 9).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, ds.data.as_slice(), 3, Some(&ds.labels)).unwrap();
        let back = read_csv(buf.as_slice(), true).unwrap();
        assert_eq!(back, ds);
    }
}
