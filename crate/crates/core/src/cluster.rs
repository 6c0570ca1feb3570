//! Node and subject clustering.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, smallest_eigenpairs};
use crate::scalar::Scalar;

/// Hard labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} is not below k = {k}")));
        }
        Ok(Self { k, labels })
    }

    /// Takes `k` as one past the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self { k, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps only the positions in `keep`.
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self { k: self.k, labels: keep.iter().map(|&i| self.labels[i]).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    #[default]
    KMeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub init: KMeansInit,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 20, max_iters: 300, seed: 0, init: KMeansInit::KMeansPlusPlus }
    }
}

impl KMeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub assignment: ClusterAssignment,
    pub centroids: Array2<T>,
    /// Within-cluster sum of squares of the returned fit.
    pub wcss: T,
    /// WCSS after each Lloyd step of the winning restart.
    pub history: Vec<T>,
}

fn sq_dist<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(p: ArrayView1<'_, T>, centroids: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(p, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn init_centroids<T: Scalar>(points: ArrayView2<'_, T>, k: usize, init: KMeansInit, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = points.nrows();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    match init {
        KMeansInit::Random => {
            chosen = rand::seq::index::sample(rng, n, k).into_vec();
        }
        KMeansInit::KMeansPlusPlus => {
            chosen.push(rng.random_range(0..n));
            let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0])).as_f64()).collect();
            while chosen.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut target = rng.random::<f64>() * total;
                    let mut pick = n - 1;
                    for (i, &w) in d2.iter().enumerate() {
                        if w > 0.0 && target < w {
                            pick = i;
                            break;
                        }
                        target -= w;
                    }
                    pick
                } else {
                    // All remaining mass is on already-chosen duplicates.
                    let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                    free[rng.random_range(0..free.len())]
                };
                chosen.push(next);
                for (i, d) in d2.iter_mut().enumerate() {
                    *d = d.min(sq_dist(points.row(i), points.row(next)).as_f64());
                }
            }
        }
    }
    let mut centroids = Array2::zeros((k, points.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(i));
    }
    centroids
}

fn lloyd<T: Scalar>(points: ArrayView2<'_, T>, k: usize, config: &KMeansConfig, restart: usize) -> KMeansFit<T> {
    let n = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let mut centroids = init_centroids(points, k, config.init, &mut rng);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();

    for _ in 0..config.max_iters.max(1) {
        let mut changed = false;
        let mut dists = vec![T::zero(); n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        // Re-seed empty clusters from the point farthest from its centroid.
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                sizes[labels[i]] -= 1;
                labels[i] = c;
                sizes[c] = 1;
                dists[i] = T::zero();
                centroids.row_mut(c).assign(&points.row(i));
                changed = true;
            }
        }
        let mut sums = Array2::<T>::zeros(centroids.dim());
        for i in 0..n {
            let mut row = sums.row_mut(labels[i]);
            row += &points.row(i);
        }
        for c in 0..k {
            if sizes[c] > 0 {
                let inv = T::one() / T::lit(sizes[c] as f64);
                centroids.row_mut(c).assign(&(&sums.row(c) * inv));
            }
        }
        let wcss: T = (0..n).map(|i| sq_dist(points.row(i), centroids.row(labels[i]))).sum();
        history.push(wcss);
        if !changed {
            break;
        }
    }
    let wcss = *history.last().expect("at least one Lloyd step");
    KMeansFit { assignment: ClusterAssignment { k, labels }, centroids, wcss, history }
}

// Renumbers clusters by first appearance so equal partitions print equally.
fn canonicalize<T: Scalar>(mut fit: KMeansFit<T>) -> KMeansFit<T> {
    let k = fit.assignment.k;
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &fit.assignment.labels {
        if remap[l] == usize::MAX {
            remap[l] = next;
            next += 1;
        }
    }
    for slot in remap.iter_mut().filter(|r| **r == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let mut centroids = fit.centroids.clone();
    for (old, &new) in remap.iter().enumerate() {
        centroids.row_mut(new).assign(&fit.centroids.row(old));
    }
    fit.assignment.labels.iter_mut().for_each(|l| *l = remap[*l]);
    fit.centroids = centroids;
    fit
}

/// Lloyd's k-means, best of `config.restarts` seeded runs by WCSS.
pub fn kmeans_fit<T: Scalar>(points: ArrayView2<'_, T>, k: usize, config: &KMeansConfig) -> Result<KMeansFit<T>> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} points")));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("k-means needs at least one restart".into()));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("k-means input has non-finite entries".into()));
    }
    let fits: Vec<KMeansFit<T>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| lloyd(points, k, config, r))
        .collect();
    // Lowest WCSS wins; earlier restart wins ties.
    let best = fits
        .into_iter()
        .reduce(|best, fit| if fit.wcss < best.wcss { fit } else { best })
        .expect("restarts >= 1");
    Ok(canonicalize(best))
}

pub fn kmeans<T: Scalar>(points: ArrayView2<'_, T>, k: usize, config: &KMeansConfig) -> Result<ClusterAssignment> {
    kmeans_fit(points, k, config).map(|f| f.assignment)
}

/// k-means on the rows of an embedding.
pub fn node_clusters<T: Scalar>(embedding: &Embedding<T>, k: usize, config: &KMeansConfig) -> Result<ClusterAssignment> {
    kmeans(embedding.matrix(), k, config)
}

/// `s_ij = -||F_i - F_j||_F` for every pair of embeddings.
pub fn pairwise_similarity<T: Scalar>(embeddings: &[Embedding<T>]) -> Result<Array2<T>> {
    let n = embeddings.len();
    if let Some(first) = embeddings.first() {
        let shape = first.matrix().dim();
        if let Some(bad) = embeddings.iter().find(|e| e.matrix().dim() != shape) {
            return Err(Error::DimensionMismatch(format!(
                "embedding shapes {:?} and {:?}",
                bad.matrix().dim(),
                shape
            )));
        }
    }
    let mut s = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &embeddings[i].matrix() - &embeddings[j].matrix();
            let v = -frobenius_norm(diff.view());
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    Ok(s)
}

fn median<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) * T::lit(0.5)
    }
}

/// Gaussian affinity on embedding distances with the median distance as
/// bandwidth; zero diagonal.
pub fn subject_affinity<T: Scalar>(embeddings: &[Embedding<T>]) -> Result<Array2<T>> {
    let s = pairwise_similarity(embeddings)?;
    let n = s.nrows();
    let off: Vec<T> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| -s[[i, j]]).collect();
    if off.is_empty() {
        return Err(Error::InvalidArgument("need at least two subjects".into()));
    }
    let sigma = median(off);
    if !(sigma > T::zero()) {
        return Err(Error::Degenerate("median embedding distance is zero".into()));
    }
    let denom = T::lit(2.0) * sigma * sigma;
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            T::zero()
        } else {
            (-(s[[i, j]] * s[[i, j]]) / denom).exp()
        }
    }))
}

/// Normalized spectral clustering of a nonnegative affinity matrix:
/// `k` smallest eigenvectors of `I - D^{-1/2} W D^{-1/2}`, rows scaled to unit
/// length, then k-means.
pub fn spectral_clustering<T: Scalar>(w: ArrayView2<'_, T>, k: usize, config: &KMeansConfig) -> Result<ClusterAssignment> {
    let n = w.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} items")));
    }
    let inv_sqrt: Array1<T> = w
        .rows()
        .into_iter()
        .map(|r| {
            let d = r.sum();
            if d > T::zero() {
                T::one() / d.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let lsym = Array2::from_shape_fn((n, n), |(i, j)| {
        let id = if i == j { T::one() } else { T::zero() };
        id - inv_sqrt[i] * w[[i, j]] * inv_sqrt[j]
    });
    let mut u = smallest_eigenpairs(lsym.view(), k)?.eigenvectors;
    for mut row in u.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > T::zero() {
            row.mapv_inplace(|v| v / norm);
        }
    }
    kmeans(u.view(), k, config)
}

/// Clusters subjects by the distances between their embeddings.
pub fn cluster_subjects<T: Scalar>(
    embeddings: &[Embedding<T>],
    k: usize,
    config: &KMeansConfig,
) -> Result<ClusterAssignment> {
    if embeddings.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} subjects cannot form {k} clusters",
            embeddings.len()
        )));
    }
    let w = subject_affinity(embeddings)?;
    spectral_clustering(w.view(), k, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separated_points_split() {
        let pts = array![[0.0], [0.1], [10.0], [10.1]];
        let a = kmeans(pts.view(), 2, &KMeansConfig::default()).unwrap();
        assert_eq!(a.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn identical_points_one_cluster() {
        let pts = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let fit = kmeans_fit(pts.view(), 1, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.assignment.labels, vec![0, 0, 0]);
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]];
        let fit = kmeans_fit(pts.view(), 4, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.assignment.labels, vec![0, 1, 2, 3]);
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn duplicates_with_more_clusters_than_distinct_points() {
        let pts = array![[0.0], [0.0], [0.0], [1.0]];
        let fit = kmeans_fit(pts.view(), 3, &KMeansConfig::default()).unwrap();
        let mut sizes = [0; 3];
        fit.assignment.labels.iter().for_each(|&l| sizes[l] += 1);
        assert!(sizes.iter().all(|&s| s > 0));
        assert_eq!(fit.wcss, 0.0);
    }

    #[test]
    fn kmeans_errors() {
        let pts = array![[0.0], [1.0]];
        assert!(kmeans(pts.view(), 3, &KMeansConfig::default()).is_err());
        assert!(kmeans(pts.view(), 0, &KMeansConfig::default()).is_err());
        let cfg = KMeansConfig { restarts: 0, ..KMeansConfig::default() };
        assert!(kmeans(pts.view(), 1, &cfg).is_err());
    }

    #[test]
    fn similarity_examples() {
        let s3 = 3f64.sqrt() / 2.0;
        let fi = Embedding::new(array![[0.5, 0.0], [0.0, 0.5], [s3, 0.0], [0.0, s3]]).unwrap();
        let fj = Embedding::new(array![[-0.5, 0.0], [0.0, -0.5], [s3, 0.0], [0.0, s3]]).unwrap();
        let s = pairwise_similarity(&[fi.clone(), fj, fi]).unwrap();
        assert!((s[[0, 1]] + 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[[0, 2]], 0.0);
        assert_eq!(s[[1, 1]], 0.0);
        assert_eq!(s, s.t());
    }

    #[test]
    fn similarity_shape_mismatch() {
        let a = Embedding::new(Array2::<f64>::eye(3).slice(ndarray::s![.., ..2]).to_owned()).unwrap();
        let b = Embedding::new(Array2::<f64>::eye(3)).unwrap();
        assert!(pairwise_similarity(&[a, b]).is_err());
    }

    fn basis(n: usize, cols: &[usize]) -> Embedding<f64> {
        let mut f = Array2::zeros((n, cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            f[[c, j]] = 1.0;
        }
        Embedding::new(f).unwrap()
    }

    #[test]
    fn subjects_in_two_identical_groups() {
        let a = basis(4, &[0, 1]);
        let b = basis(4, &[2, 3]);
        let subjects = vec![a.clone(), b.clone(), a, b];
        let got = cluster_subjects(&subjects, 2, &KMeansConfig::default()).unwrap();
        assert_eq!(got.labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn subjects_n_equals_k() {
        let got = cluster_subjects(&[basis(3, &[0]), basis(3, &[1])], 2, &KMeansConfig::default()).unwrap();
        assert_eq!(got.labels, vec![0, 1]);
    }

    #[test]
    fn subjects_degenerate_inputs() {
        let a = basis(3, &[0]);
        assert!(matches!(
            cluster_subjects(&[a.clone(), a.clone(), a.clone()], 2, &KMeansConfig::default()),
            Err(Error::Degenerate(_))
        ));
        assert!(cluster_subjects(&[a], 2, &KMeansConfig::default()).is_err());
    }
}
