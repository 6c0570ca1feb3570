//! Multi-view graph representation.
//!
//! Each view is a dense, symmetric, nonnegative affinity matrix with a zero
//! diagonal. Views are loaded from a JSON manifest that lists headerless CSV
//! matrix files, one per view.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance used for the symmetry check on load.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// How negative input weights are turned into affinities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeTransform {
    #[default]
    Reject,
    Abs,
    Clamp0,
}

/// What to do with zero-degree nodes when row-normalizing a view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolatedPolicy {
    #[default]
    Error,
    /// Give each zero-degree node a unit self-loop before normalizing.
    SelfLoop,
}

/// Validated square, symmetric, nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix<T> {
    data: Array2<T>,
}

impl<T: Scalar> AffinityMatrix<T> {
    /// Validates `data` as-is. Negative entries are rejected and a nonzero
    /// diagonal is an error; use [`AffinityMatrix::from_raw`] for
    /// transform-on-load semantics.
    pub fn new(data: Array2<T>) -> Result<Self> {
        Self::check_shape_and_values(&data)?;
        for i in 0..data.nrows() {
            if data[[i, i]] != T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry ({i}, {i}) must be zero"
                )));
            }
        }
        for ((i, j), &v) in data.indexed_iter() {
            if v < T::zero() {
                return Err(Error::NegativeEntry { row: i, col: j, value: v.as_f64() });
            }
        }
        Ok(Self { data })
    }

    /// Applies `transform` to negative entries and strips self-loops
    /// (with a warning) before validating.
    pub fn from_raw(mut data: Array2<T>, transform: NegativeTransform) -> Result<Self> {
        Self::check_shape_and_values(&data)?;
        for ((i, j), v) in data.indexed_iter_mut() {
            if *v < T::zero() {
                match transform {
                    NegativeTransform::Reject => {
                        return Err(Error::NegativeEntry { row: i, col: j, value: v.as_f64() })
                    }
                    NegativeTransform::Abs => *v = v.abs(),
                    NegativeTransform::Clamp0 => *v = T::zero(),
                }
            }
        }
        let mut stripped = 0usize;
        for i in 0..data.nrows() {
            if data[[i, i]] != T::zero() {
                data[[i, i]] = T::zero();
                stripped += 1;
            }
        }
        if stripped > 0 {
            warn!("stripped {stripped} self-loop(s) from affinity matrix");
        }
        Ok(Self { data })
    }

    fn check_shape_and_values(data: &Array2<T>) -> Result<()> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("affinity matrix is {r}x{c}")));
        }
        for ((i, j), v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        let tol = T::tol(SYMMETRY_TOL);
        for i in 0..r {
            for j in (i + 1)..r {
                let diff = (data[[i, j]] - data[[j, i]]).abs();
                if diff > tol {
                    return Err(Error::Asymmetric { row: i, col: j, diff: diff.as_f64() });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<T> {
        self.data
    }

    /// Returns a copy with every entry multiplied by `c > 0`.
    pub fn scaled(&self, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidArgument("scale factor must be positive".into()));
        }
        Ok(Self { data: &self.data * c })
    }
}

/// `n` nodes observed through `m >= 1` affinity views.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewGraph<T> {
    views: Vec<AffinityMatrix<T>>,
    node_names: Option<Vec<String>>,
}

impl<T: Scalar> MultiViewGraph<T> {
    pub fn new(views: Vec<AffinityMatrix<T>>, node_names: Option<Vec<String>>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::InvalidArgument("a graph needs at least one view".into()))?;
        let n = first.n();
        for (v, view) in views.iter().enumerate() {
            if view.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has {} nodes, view 0 has {n}",
                    view.n()
                )));
            }
        }
        if let Some(names) = &node_names {
            if names.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} node names for {n} nodes",
                    names.len()
                )));
            }
        }
        Ok(Self { views, node_names })
    }

    pub fn single(view: AffinityMatrix<T>) -> Self {
        Self { views: vec![view], node_names: None }
    }

    pub fn n(&self) -> usize {
        self.views[0].n()
    }

    pub fn m(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[AffinityMatrix<T>] {
        &self.views
    }

    pub fn node_names(&self) -> Option<&[String]> {
        self.node_names.as_deref()
    }

    /// Replaces view `v` with a copy scaled by `c`.
    pub fn with_scaled_view(&self, v: usize, c: T) -> Result<Self> {
        let mut views = self.views.clone();
        let slot = views.get_mut(v).ok_or(Error::OutOfRange { index: v, len: self.m() })?;
        *slot = slot.scaled(c)?;
        Ok(Self { views, node_names: self.node_names.clone() })
    }
}

/// Weighted node degrees `d_i = sum_j a_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector<T>(pub Array1<T>);

impl<T: Scalar> DegreeVector<T> {
    pub fn values(&self) -> &Array1<T> {
        &self.0
    }
}

pub fn degree<T: Scalar>(view: &AffinityMatrix<T>) -> DegreeVector<T> {
    DegreeVector(view.data.sum_axis(Axis(1)))
}

/// Row-normalized transition matrix `D^{-1} A`.
pub fn random_walk_matrix<T: Scalar>(
    view: &AffinityMatrix<T>,
    policy: IsolatedPolicy,
) -> Result<Array2<T>> {
    let mut w = view.data.clone();
    let deg = degree(view);
    for (i, &d) in deg.0.iter().enumerate() {
        let mut row = w.row_mut(i);
        if d > T::zero() {
            row.mapv_inplace(|a| a / d);
        } else {
            match policy {
                IsolatedPolicy::Error => return Err(Error::IsolatedNode(i)),
                IsolatedPolicy::SelfLoop => row[i] = T::one(),
            }
        }
    }
    Ok(w)
}

/// On-disk manifest describing a multi-view graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub views: Vec<PathBuf>,
    #[serde(default)]
    pub transform: NegativeTransform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_names: Option<Vec<String>>,
}

/// Reads a headerless CSV of numbers into a dense matrix.
pub fn read_matrix_csv<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<T>().map_err(|_| Error::Parse {
                    path: path.into(),
                    message: format!("row {r}, column {c}: cannot parse {field:?}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != ncols) {
        return Err(Error::Parse {
            path: path.into(),
            message: format!("row {r} has {} columns, expected {ncols}", row.len()),
        });
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
}

/// Writes a matrix as headerless CSV using the shortest round-trip decimal form.
pub fn write_matrix_csv<T: Scalar>(path: &Path, m: ArrayView2<'_, T>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 8);
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Loads and validates the graph described by a manifest file. Relative view
/// paths resolve against the manifest's directory.
pub fn load_multiview<T: Scalar>(manifest_path: &Path) -> Result<MultiViewGraph<T>> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.into(),
        message: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let views = manifest
        .views
        .iter()
        .map(|p| {
            let full = if p.is_absolute() { p.clone() } else { base.join(p) };
            AffinityMatrix::from_raw(read_matrix_csv(&full)?, manifest.transform)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiViewGraph::new(views, manifest.node_names)
}

/// Writes `graph` as `dir/graph.json` plus `dir/view_<v>.csv`, returning the
/// manifest path.
pub fn save_multiview<T: Scalar>(graph: &MultiViewGraph<T>, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(graph.m());
    for (v, view) in graph.views().iter().enumerate() {
        let name = PathBuf::from(format!("view_{v}.csv"));
        write_matrix_csv(&dir.join(&name), view.view())?;
        files.push(name);
    }
    let manifest = Manifest {
        views: files,
        transform: NegativeTransform::Reject,
        node_names: graph.node_names.clone(),
    };
    let path = dir.join("graph.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn degree_is_row_sum() {
        let a = AffinityMatrix::new(array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(degree(&a).0, array![2.0, 2.0]);
        let b = AffinityMatrix::new(array![[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(degree(&b).0, array![2.0, 1.0, 1.0]);
        let z = AffinityMatrix::new(Array2::<f64>::zeros((2, 2))).unwrap();
        assert_eq!(degree(&z).0, array![0.0, 0.0]);
    }

    #[test]
    fn random_walk_normalizes_rows() {
        let a = AffinityMatrix::new(array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        let w = random_walk_matrix(&a, IsolatedPolicy::Error).unwrap();
        assert_eq!(w, array![[0.0, 1.0], [1.0, 0.0]]);

        let k3 = AffinityMatrix::new(array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        let w = random_walk_matrix(&k3, IsolatedPolicy::Error).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w[[i, j]], if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn isolated_node_policies() {
        let z = AffinityMatrix::new(Array2::<f64>::zeros((2, 2))).unwrap();
        assert!(matches!(random_walk_matrix(&z, IsolatedPolicy::Error), Err(Error::IsolatedNode(0))));
        let w = random_walk_matrix(&z, IsolatedPolicy::SelfLoop).unwrap();
        assert_eq!(w, Array2::<f64>::eye(2));
    }

    #[test]
    fn raw_transforms() {
        let raw = array![[0.0, -0.4], [-0.4, 0.0]];
        let abs = AffinityMatrix::from_raw(raw.clone(), NegativeTransform::Abs).unwrap();
        assert_eq!(abs.as_array()[[0, 1]], 0.4);
        let clamp = AffinityMatrix::from_raw(raw.clone(), NegativeTransform::Clamp0).unwrap();
        assert_eq!(clamp.as_array()[[0, 1]], 0.0);
        assert!(matches!(
            AffinityMatrix::from_raw(raw, NegativeTransform::Reject),
            Err(Error::NegativeEntry { .. })
        ));
    }

    #[test]
    fn self_loops_are_stripped_on_load() {
        let a = AffinityMatrix::from_raw(array![[1.0, 0.5], [0.5, 3.0]], NegativeTransform::Reject).unwrap();
        assert_eq!(a.as_array(), &array![[0.0, 0.5], [0.5, 0.0]]);
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(matches!(
            AffinityMatrix::new(array![[0.0, 1.0], [1.1, 0.0]]),
            Err(Error::Asymmetric { .. })
        ));
        assert!(matches!(
            AffinityMatrix::new(array![[0.0, f64::NAN], [f64::NAN, 0.0]]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            AffinityMatrix::new(Array2::<f64>::zeros((2, 3))),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn views_must_agree_on_size() {
        let a = AffinityMatrix::new(Array2::<f64>::zeros((3, 3))).unwrap();
        let b = AffinityMatrix::new(Array2::<f64>::zeros((4, 4))).unwrap();
        assert!(matches!(MultiViewGraph::new(vec![a, b], None), Err(Error::DimensionMismatch(_))));
        assert!(MultiViewGraph::<f64>::new(vec![], None).is_err());
    }
}
