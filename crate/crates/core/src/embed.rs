//! Auto-weighted multi-view embedding with hub-aware row sparsity.
//!
//! For every view the residual `P = F - D^{-1} A F` is penalized through its
//! smoothed l2,1 norm `sum_j sqrt(|p_j|^2 + eps)`. Each iteration linearizes
//! that penalty with the reweighting `q_j = 1 / (2 sqrt(|p_j|^2 + eps))`,
//! which turns it into the quadratic form `Tr(F^T L F) + c` with
//! `L = (I - D^{-1}A)^T diag(q) (I - D^{-1}A)` and the constant
//! `c = sum_j (q_j eps + 1 / (4 q_j))`. The view cost `Tr(F^T L F) + c`
//! equals the smoothed l2,1 norm when `q` was computed from `F` itself.
//!
//! In auto mode the views are combined through `sum_v sqrt(cost_v)`, whose
//! linearization gives the weights `alpha_v = 1 / (2 sqrt(cost_v))`. The new
//! embedding is spanned by the eigenvectors of `sum_v alpha_v L_v` for the
//! 2nd through (k+1)-th smallest eigenvalues. Every `L_v` annihilates the
//! constant vector, so the skipped eigenvector is the constant direction.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{random_walk_matrix, AffinityMatrix, IsolatedPolicy, MultiViewGraph};
use crate::linalg::{orthogonality_error, symmetric_eigen, trace_form};
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_ALPHA_GUARD: f64 = 1e-12;
/// Tolerance for the orthonormality invariant of an [`Embedding`].
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Trace forms below this are treated as a broken PSD invariant.
pub const NEGATIVE_TRACE_TOL: f64 = 1e-10;

/// How the per-view weights are chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum WeightMode<T> {
    /// Re-derive the weights from the current embedding every iteration.
    #[default]
    Auto,
    /// Keep the given weights for the whole run.
    Fixed(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig<T> {
    /// Embedding dimension; needs `k + 1 <= n`.
    pub k: usize,
    pub epsilon: T,
    pub max_iters: usize,
    /// Stop once every view's cost changes by less than this, relatively.
    pub rel_tol: T,
    pub weight_mode: WeightMode<T>,
    pub isolated_policy: IsolatedPolicy,
    /// Reweight-and-solve passes per weight update.
    pub inner_iters: usize,
    /// Floor on the view cost inside the weight update.
    pub alpha_guard: T,
}

impl<T: Scalar> EmbedConfig<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            epsilon: T::lit(DEFAULT_EPSILON),
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: T::lit(DEFAULT_REL_TOL),
            weight_mode: WeightMode::Auto,
            isolated_policy: IsolatedPolicy::Error,
            inner_iters: 1,
            alpha_guard: T::lit(DEFAULT_ALPHA_GUARD),
        }
    }

    pub fn with_fixed_weights(mut self, alphas: Vec<T>) -> Self {
        self.weight_mode = WeightMode::Fixed(alphas);
        self
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("embedding dimension k must be at least 1".into()));
        }
        if self.k + 1 > n {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension k = {} needs at least {} nodes, graph has {n}",
                self.k,
                self.k + 1
            )));
        }
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.rel_tol >= T::zero()) {
            return Err(Error::InvalidArgument("rel_tol must be nonnegative".into()));
        }
        if !(self.alpha_guard > T::zero()) {
            return Err(Error::InvalidArgument("alpha guard must be positive".into()));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidArgument("inner_iters must be at least 1".into()));
        }
        if let WeightMode::Fixed(alphas) = &self.weight_mode {
            if alphas.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} fixed weights for {m} views",
                    alphas.len()
                )));
            }
            ViewWeights::new(alphas.clone())?;
        }
        Ok(())
    }
}

/// Orthonormal `n x k` node embedding; row `i` embeds node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    f: Array2<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(f: Array2<T>) -> Result<Self> {
        if f.ncols() == 0 || f.ncols() > f.nrows() {
            return Err(Error::DimensionMismatch(format!("embedding shape {:?}", f.dim())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        let err = orthogonality_error(f.view());
        if err > T::tol(ORTHONORMAL_TOL) {
            return Err(Error::Invariant(format!("embedding columns not orthonormal (error {err})")));
        }
        Ok(Self { f })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn k(&self) -> usize {
        self.f.ncols()
    }

    pub fn matrix(&self) -> ArrayView2<'_, T> {
        self.f.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.f
    }
}

/// Positive finite per-view weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewWeights<T> {
    pub alphas: Vec<T>,
}

impl<T: Scalar> ViewWeights<T> {
    pub fn new(alphas: Vec<T>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidArgument("no view weights".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidArgument(format!("view weight {a} is not positive and finite")));
        }
        Ok(Self { alphas })
    }

    pub fn uniform(m: usize) -> Self {
        Self { alphas: vec![T::one() / T::lit(m as f64); m] }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace<T> {
    /// Objective at the initial embedding and after every update.
    pub objectives: Vec<T>,
    /// Weights used for each embedding update.
    pub alpha_history: Vec<ViewWeights<T>>,
    /// `max |F^T F - I|` for the initial embedding and after every update.
    pub orthogonality: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> SolveTrace<T> {
    /// Largest increase between consecutive objective values (zero if none).
    pub fn max_increase(&self) -> T {
        self.objectives
            .windows(2)
            .fold(T::zero(), |acc, w| acc.max(w[1] - w[0]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub embedding: Embedding<T>,
    pub weights: ViewWeights<T>,
    pub trace: SolveTrace<T>,
}

/// A reweighted view: the quadratic form `matrix` plus the constant that
/// completes it to the smoothed l2,1 value.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewLaplacian<T> {
    pub matrix: Array2<T>,
    pub offset: T,
}

impl<T: Scalar> ViewLaplacian<T> {
    /// A bare quadratic form with no offset.
    pub fn from_matrix(matrix: Array2<T>) -> Self {
        Self { matrix, offset: T::zero() }
    }
}

fn check_rows<T: Scalar>(f: ArrayView2<'_, T>, n: usize) -> Result<()> {
    if f.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows, view has {n} nodes",
            f.nrows()
        )));
    }
    Ok(())
}

// `I - D^{-1} A`
fn residual_operator<T: Scalar>(view: &AffinityMatrix<T>, policy: IsolatedPolicy) -> Result<Array2<T>> {
    let w = random_walk_matrix(view, policy)?;
    Ok(Array2::eye(view.n()) - w)
}

/// `P = F - D^{-1} A F`.
pub fn residual_p<T: Scalar>(
    f: ArrayView2<'_, T>,
    view: &AffinityMatrix<T>,
    policy: IsolatedPolicy,
) -> Result<Array2<T>> {
    check_rows(f, view.n())?;
    Ok(residual_operator(view, policy)?.dot(&f))
}

/// `q_j = 1 / (2 sqrt(|p_j|^2 + eps))`.
pub fn reweight_q<T: Scalar>(p: ArrayView2<'_, T>, epsilon: T) -> Result<Array1<T>> {
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let two = T::lit(2.0);
    Ok(p.rows()
        .into_iter()
        .map(|r| T::one() / (two * (r.dot(&r) + epsilon).sqrt()))
        .collect())
}

fn quadratic_form<T: Scalar>(op: &Array2<T>, q: ArrayView1<'_, T>) -> Array2<T> {
    let weighted = op * &q.insert_axis(Axis(1));
    let mut l = op.t().dot(&weighted);
    symmetrize(&mut l);
    l
}

fn symmetrize<T: Scalar>(m: &mut Array2<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]]) * half;
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
}

fn check_q<T: Scalar>(q: ArrayView1<'_, T>, n: usize) -> Result<()> {
    if q.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} nodes", q.len())));
    }
    if q.iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidArgument("reweighting vector must be positive".into()));
    }
    Ok(())
}

/// `L = (I - D^{-1}A)^T diag(q) (I - D^{-1}A)`.
pub fn view_laplacian<T: Scalar>(
    view: &AffinityMatrix<T>,
    q: ArrayView1<'_, T>,
    policy: IsolatedPolicy,
) -> Result<Array2<T>> {
    check_q(q, view.n())?;
    Ok(quadratic_form(&residual_operator(view, policy)?, q))
}

/// `sum_j (q_j eps + 1 / (4 q_j))`; equals `sum_j sqrt(|p_j|^2 + eps) - Tr(P^T Q P)`
/// when `q` was computed from `P`.
pub fn half_quadratic_offset<T: Scalar>(q: ArrayView1<'_, T>, epsilon: T) -> T {
    let four = T::lit(4.0);
    q.iter().map(|&qj| qj * epsilon + T::one() / (four * qj)).sum()
}

fn reweight_with_operator<T: Scalar>(op: &Array2<T>, f: ArrayView2<'_, T>, epsilon: T) -> Result<ViewLaplacian<T>> {
    let p = op.dot(&f);
    let q = reweight_q(p.view(), epsilon)?;
    Ok(ViewLaplacian { matrix: quadratic_form(op, q.view()), offset: half_quadratic_offset(q.view(), epsilon) })
}

/// Reweights `view` at the embedding `f`.
pub fn reweighted_view<T: Scalar>(
    f: ArrayView2<'_, T>,
    view: &AffinityMatrix<T>,
    epsilon: T,
    policy: IsolatedPolicy,
) -> Result<ViewLaplacian<T>> {
    check_rows(f, view.n())?;
    reweight_with_operator(&residual_operator(view, policy)?, f, epsilon)
}

/// `sum_v alpha_v L_v`.
pub fn combined_laplacian<T: Scalar>(laplacians: &[Array2<T>], alphas: &ViewWeights<T>) -> Result<Array2<T>> {
    if laplacians.len() != alphas.len() || laplacians.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} laplacians for {} weights",
            laplacians.len(),
            alphas.len()
        )));
    }
    let dim = laplacians[0].dim();
    let mut out = Array2::zeros(dim);
    for (l, &a) in laplacians.iter().zip(&alphas.alphas) {
        if l.dim() != dim {
            return Err(Error::DimensionMismatch(format!("laplacian shapes {:?} and {dim:?}", l.dim())));
        }
        out.scaled_add(a, l);
    }
    Ok(out)
}

/// `Tr(F^T L F) + offset`, clamped at zero within [`NEGATIVE_TRACE_TOL`].
pub fn view_cost<T: Scalar>(f: ArrayView2<'_, T>, view: &ViewLaplacian<T>) -> Result<T> {
    let c = trace_form(f, view.matrix.view())? + view.offset;
    if c < -T::lit(NEGATIVE_TRACE_TOL) {
        return Err(Error::Invariant(format!("negative view cost {c}; laplacian is not PSD")));
    }
    Ok(c.max(T::zero()))
}

/// `alpha_v = 1 / (2 sqrt(max(cost_v, guard)))`.
pub fn update_alpha<T: Scalar>(f: ArrayView2<'_, T>, views: &[ViewLaplacian<T>], guard: T) -> Result<ViewWeights<T>> {
    let two = T::lit(2.0);
    let alphas = views
        .iter()
        .map(|v| Ok(T::one() / (two * view_cost(f, v)?.max(guard).sqrt())))
        .collect::<Result<Vec<_>>>()?;
    ViewWeights::new(alphas)
}

/// `sum_v sqrt(cost_v)`.
pub fn objective<T: Scalar>(f: ArrayView2<'_, T>, views: &[ViewLaplacian<T>]) -> Result<T> {
    views.iter().map(|v| Ok(view_cost(f, v)?.sqrt())).sum()
}

/// `sum_v alpha_v cost_v`, the quantity fixed-weight runs decrease.
pub fn weighted_objective<T: Scalar>(
    f: ArrayView2<'_, T>,
    views: &[ViewLaplacian<T>],
    alphas: &ViewWeights<T>,
) -> Result<T> {
    views
        .iter()
        .zip(&alphas.alphas)
        .map(|(v, &a)| Ok(a * view_cost(f, v)?))
        .sum()
}

/// Eigenvectors 2..=k+1 of `l`.
///
/// When the smallest eigenvalue is repeated, the basis of that eigenspace is
/// rotated so that the constant vector comes first and is the one skipped.
pub fn spectral_update<T: Scalar>(l: ArrayView2<'_, T>, k: usize) -> Result<Array2<T>> {
    let n = l.nrows();
    if k + 1 > n {
        return Err(Error::InvalidArgument(format!("k + 1 = {} exceeds n = {n}", k + 1)));
    }
    let eig = symmetric_eigen(l)?;
    let mut vectors = eig.eigenvectors;
    let values = eig.eigenvalues;

    let spread = values.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let cluster_tol = T::tol(1e-9) * spread;
    let cluster = values.iter().take_while(|&&v| v - values[0] <= cluster_tol).count();
    if cluster > 1 {
        rotate_constant_first(&mut vectors, cluster);
    }
    Ok(vectors.slice(ndarray::s![.., 1..=k]).to_owned())
}

fn rotate_constant_first<T: Scalar>(vectors: &mut Array2<T>, cluster: usize) {
    let n = vectors.nrows();
    let u = Array1::from_elem(n, T::one() / T::lit(n as f64).sqrt());
    let coeffs: Vec<T> = (0..cluster).map(|j| vectors.column(j).dot(&u)).collect();
    let captured: T = coeffs.iter().map(|&c| c * c).sum::<T>().sqrt();
    if captured < T::one() - T::tol(1e-6) {
        return;
    }
    // Gram-Schmidt the eigenspace against `u`, visiting the vectors least
    // aligned with `u` first and keeping cluster - 1 of them.
    let mut order: Vec<usize> = (0..cluster).collect();
    order.sort_by(|&a, &b| coeffs[a].abs().partial_cmp(&coeffs[b].abs()).unwrap().then(a.cmp(&b)));
    let mut basis: Vec<Array1<T>> = vec![u];
    for &j in &order {
        if basis.len() == cluster {
            break;
        }
        let mut w = vectors.column(j).to_owned();
        for b in &basis {
            let c = w.dot(b);
            w.scaled_add(-c, b);
        }
        let norm = w.dot(&w).sqrt();
        if norm > T::tol(1e-6) {
            basis.push(w / norm);
        }
    }
    if basis.len() < cluster {
        return;
    }
    for (j, b) in basis.into_iter().enumerate() {
        vectors.column_mut(j).assign(&b);
    }
    let mut head = vectors.slice_mut(ndarray::s![.., 0..cluster]).to_owned();
    crate::linalg::apply_sign_convention(&mut head);
    vectors.slice_mut(ndarray::s![.., 0..cluster]).assign(&head);
}

/// Runs the alternating optimization on `graph`.
pub fn solve<T: Scalar>(graph: &MultiViewGraph<T>, config: &EmbedConfig<T>) -> Result<Solution<T>> {
    let n = graph.n();
    let m = graph.m();
    config.validate(n, m)?;
    let ops = graph
        .views()
        .iter()
        .map(|v| residual_operator(v, config.isolated_policy))
        .collect::<Result<Vec<_>>>()?;

    let fixed = match &config.weight_mode {
        WeightMode::Auto => None,
        WeightMode::Fixed(a) => Some(ViewWeights::new(a.clone())?),
    };
    let init_alphas = fixed.clone().unwrap_or_else(|| ViewWeights::uniform(m));
    let ones = Array1::from_elem(n, T::one());
    let plain: Vec<Array2<T>> = ops.iter().map(|op| quadratic_form(op, ones.view())).collect();
    let mut f = spectral_update(combined_laplacian(&plain, &init_alphas)?.view(), config.k)?;

    let reweight_all = |f: &Array2<T>| -> Result<Vec<ViewLaplacian<T>>> {
        ops.iter().map(|op| reweight_with_operator(op, f.view(), config.epsilon)).collect()
    };
    let score = |f: &Array2<T>, views: &[ViewLaplacian<T>]| -> Result<T> {
        match &fixed {
            None => objective(f.view(), views),
            Some(a) => weighted_objective(f.view(), views, a),
        }
    };

    let mut trace = SolveTrace {
        objectives: Vec::new(),
        alpha_history: Vec::new(),
        orthogonality: vec![orthogonality_error(f.view())],
        iterations: 0,
        converged: false,
    };
    let mut views = reweight_all(&f)?;
    trace.objectives.push(score(&f, &views)?);
    let costs = |f: &Array2<T>, views: &[ViewLaplacian<T>]| -> Result<Vec<T>> {
        views.iter().map(|v| view_cost(f.view(), v)).collect()
    };
    let mut prev_costs = costs(&f, &views)?;
    let mut weights = init_alphas;

    while trace.iterations < config.max_iters {
        weights = match &fixed {
            None => update_alpha(f.view(), &views, config.alpha_guard)?,
            Some(a) => a.clone(),
        };
        for pass in 0..config.inner_iters {
            if pass > 0 {
                views = reweight_all(&f)?;
            }
            let mats: Vec<Array2<T>> = views.iter().map(|v| v.matrix.clone()).collect();
            f = spectral_update(combined_laplacian(&mats, &weights)?.view(), config.k)?;
        }
        trace.iterations += 1;
        trace.alpha_history.push(weights.clone());
        trace.orthogonality.push(orthogonality_error(f.view()));
        views = reweight_all(&f)?;
        trace.objectives.push(score(&f, &views)?);
        // Judged per view so the rule does not depend on how views are combined.
        let now = costs(&f, &views)?;
        let rel = now
            .iter()
            .zip(&prev_costs)
            .fold(T::zero(), |acc, (&c, &p)| acc.max((p - c).abs() / p.max(T::lit(1e-12))));
        prev_costs = now;
        if rel < config.rel_tol {
            trace.converged = true;
            break;
        }
    }

    // Final weights reflect the returned embedding in auto mode.
    if fixed.is_none() && trace.iterations > 0 {
        weights = update_alpha(f.view(), &views, config.alpha_guard)?;
    }
    Ok(Solution { embedding: Embedding::new(f)?, weights, trace })
}

/// Single-view variant: minimizes the smoothed l2,1 residual of one view.
pub fn solve_single_view<T: Scalar>(
    view: &AffinityMatrix<T>,
    config: &EmbedConfig<T>,
) -> Result<(Embedding<T>, SolveTrace<T>)> {
    let graph = MultiViewGraph::single(view.clone());
    let config = EmbedConfig { weight_mode: WeightMode::Fixed(vec![T::one()]), ..config.clone() };
    let s = solve(&graph, &config)?;
    Ok((s.embedding, s.trace))
}

/// Solves every graph independently, in parallel, preserving input order.
pub fn solve_all<T: Scalar>(graphs: &[MultiViewGraph<T>], config: &EmbedConfig<T>) -> Vec<Result<Solution<T>>> {
    graphs.par_iter().map(|g| solve(g, config)).collect()
}
