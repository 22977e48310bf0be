//! k-NN Gaussian similarity graphs and graph Laplacians from tabular data.

use crate::error::{Result, RimError};
use crate::matrix::DenseMatrix;
use std::path::Path;

/// Samples as rows of a feature matrix, with optional ground-truth labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: DenseMatrix,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(points: DenseMatrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.rows() {
                return Err(RimError::ShapeMismatch {
                    expected: format!("{} labels", points.rows()),
                    got: format!("{}", l.len()),
                    context: "Dataset::new",
                });
            }
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Load a headerless CSV, one row per sample. When `label_column` is
    /// true the final column holds integer class labels.
    pub fn from_csv(path: &Path, label_column: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let mut row: Vec<f64> = Vec::with_capacity(record.len());
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    RimError::InvalidValue(format!("not a number in CSV: {field:?}"))
                })?;
                row.push(v);
            }
            if label_column {
                let raw = row.pop().ok_or_else(|| {
                    RimError::InvalidValue("empty CSV row".into())
                })?;
                if raw < 0.0 || raw.fract() != 0.0 {
                    return Err(RimError::InvalidValue(format!(
                        "label column must hold nonnegative integers, got {raw}"
                    )));
                }
                labels.push(raw as usize);
            }
            rows.push(row);
        }
        let points = DenseMatrix::from_rows(&rows)?;
        Dataset::new(points, label_column.then_some(labels))
    }
}

/// All pairwise Euclidean distances, parallelized over rows when the
/// `parallel` feature is enabled.
pub fn pairwise_distances(z: &DenseMatrix) -> DenseMatrix {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let n = z.rows();
        let mut out = DenseMatrix::zeros(n, n);
        out.data_mut()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = euclidean(z.row(i), z.row(j));
                }
            });
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairwise_distances_serial(z)
    }
}

/// Sequential reference path for `pairwise_distances`.
pub fn pairwise_distances_serial(z: &DenseMatrix) -> DenseMatrix {
    let n = z.rows();
    DenseMatrix::from_fn(n, n, |i, j| euclidean(z.row(i), z.row(j)))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Gaussian kernel on the union-symmetrized k-nearest-neighbor graph:
/// `S_ij = exp(-||z_i - z_j||^2 / (2 sigma^2))` when `j` is among `i`'s
/// `k` nearest neighbors or vice versa, with `sigma` the mean pairwise
/// distance and a zero diagonal.
pub fn knn_gaussian_similarity(data: &Dataset, k: usize) -> Result<DenseMatrix> {
    let n = data.len();
    if n < 2 {
        return Err(RimError::InvalidValue(
            "need at least two samples for a similarity graph".into(),
        ));
    }
    if k == 0 || k >= n {
        return Err(RimError::InvalidValue(format!(
            "need 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let dist = pairwise_distances(data.points());

    // mean over the n(n-1)/2 unordered pairs
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += dist.get(i, j);
        }
    }
    let sigma = total / (n * (n - 1) / 2) as f64;
    if sigma <= 0.0 {
        return Err(RimError::InvalidValue(
            "all samples are identical; the kernel width is zero".into(),
        ));
    }

    let mut s = DenseMatrix::zeros(n, n);
    let denom = 2.0 * sigma * sigma;
    for i in 0..n {
        // k nearest neighbors of i (excluding i itself)
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist.get(i, a).partial_cmp(&dist.get(i, b)).unwrap());
        for &j in order.iter().take(k) {
            let w = (-dist.get(i, j).powi(2) / denom).exp();
            s.set(i, j, w);
            s.set(j, i, w); // union symmetrization
        }
    }
    Ok(s)
}

/// Unnormalized graph Laplacian `L = D - S` with `D = diag(S 1_n)`.
pub fn laplacian(s: &DenseMatrix) -> Result<DenseMatrix> {
    if !s.is_symmetric(1e-10) {
        return Err(RimError::InvalidValue(
            "similarity matrix must be symmetric".into(),
        ));
    }
    if s.min_entry() < 0.0 {
        return Err(RimError::InvalidValue(
            "similarity matrix must be nonnegative".into(),
        ));
    }
    let n = s.rows();
    let degrees = s.row_sums();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            degrees[i] - s.get(i, i)
        } else {
            -s.get(i, j)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[Vec<f64>]) -> Dataset {
        Dataset::new(DenseMatrix::from_rows(rows).unwrap(), None).unwrap()
    }

    #[test]
    fn collinear_equispaced_points() {
        let d = 2.0;
        let data = dataset(&[vec![0.0], vec![d], vec![2.0 * d]]);
        let s = knn_gaussian_similarity(&data, 1).unwrap();
        // sigma = (d + d + 2d)/3 = 4d/3; S_12 = exp(-d^2/(2 (4d/3)^2)) = exp(-9/32)
        let expect = (-9.0_f64 / 32.0).exp();
        assert_relative_eq!(s.get(0, 1), expect, epsilon = 1e-12);
        assert_relative_eq!(s.get(1, 2), expect, epsilon = 1e-12);
        // the endpoints are not each other's nearest neighbor
        assert_eq!(s.get(0, 2), 0.0);
    }

    #[test]
    fn two_far_clusters_stay_separated() {
        let data = dataset(&[
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![100.0, 0.0],
            vec![100.1, 0.0],
        ]);
        let s = knn_gaussian_similarity(&data, 1).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(s.get(i, j), 0.0);
                assert_eq!(s.get(j, i), 0.0);
            }
        }
        assert!(s.get(0, 1) > 0.0);
        assert!(s.get(2, 3) > 0.0);
    }

    #[test]
    fn similarity_shape_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let data = dataset(&rows);
        let s = knn_gaussian_similarity(&data, 3).unwrap();
        assert!(s.is_symmetric(1e-12));
        for i in 0..12 {
            assert_eq!(s.get(i, i), 0.0);
        }
        assert!(s.min_entry() >= 0.0);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let data = dataset(&[vec![1.0], vec![1.0], vec![1.0]]);
        assert!(knn_gaussian_similarity(&data, 1).is_err());
        let data = dataset(&[vec![0.0], vec![1.0]]);
        assert!(knn_gaussian_similarity(&data, 0).is_err());
        assert!(knn_gaussian_similarity(&data, 2).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let s = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let l = laplacian(&s).unwrap();
        assert_eq!(
            l,
            DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
        );
        let asym = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(laplacian(&asym).is_err());
    }

    #[test]
    fn laplacian_zero_row_sums_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 9;
        let mut s = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(0.0..1.0);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let l = laplacian(&s).unwrap();
        let ones = vec![1.0; n];
        for v in l.matvec(&ones).unwrap() {
            assert!(v.abs() < 1e-10);
        }
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lx = l.matvec(&x).unwrap();
            let quad: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
            assert!(quad >= -1e-10, "x^T L x = {quad}");
        }
    }

    #[test]
    fn zero_eigenvalues_count_components() {
        // two disjoint triangles, then three disjoint edges
        for (blocks, block_size) in [(2usize, 3usize), (3, 2)] {
            let n = blocks * block_size;
            let mut s = DenseMatrix::zeros(n, n);
            for b in 0..blocks {
                let base = b * block_size;
                for i in 0..block_size {
                    for j in 0..block_size {
                        if i != j {
                            s.set(base + i, base + j, 1.0);
                        }
                    }
                }
            }
            let l = laplacian(&s).unwrap();
            let eigs = l.to_na().symmetric_eigen().eigenvalues;
            let zeros = eigs.iter().filter(|&&e| e.abs() < 1e-9).count();
            assert_eq!(zeros, blocks);
        }
    }

    #[test]
    fn distances_match_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = DenseMatrix::from_fn(10, 4, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(pairwise_distances(&z), pairwise_distances_serial(&z));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = std::env::temp_dir().join("rim_graph_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("data.csv");
        std::fs::write(&path, "0.5,1.5,0\n-1.0,2.0,1\n0.0,0.0,1\n").unwrap();
        let data = Dataset::from_csv(&path, true).unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.points().cols(), 2);
        assert_eq!(data.labels().unwrap(), &[0, 1, 1]);
        let no_labels = Dataset::from_csv(&path, false).unwrap();
        assert_eq!(no_labels.points().cols(), 3);
        assert!(no_labels.labels().is_none());
    }
}
