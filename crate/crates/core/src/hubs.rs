//! Hub scoring.
//!
//! The l2,1 penalty drives the embedding rows of boundary-spanning nodes
//! toward zero, so a small row norm marks a hub. Betweenness centrality is
//! provided as the classic baseline, together with the edge-removal step that
//! disconnects detected hubs.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embed::Embedding;
use crate::error::{Error, Result};
use crate::graph::{AffinityMatrix, MultiViewGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HubMethod {
    /// Embedding row norm; smaller is more hub-like.
    RowNorm,
    /// Shortest-path betweenness; larger is more hub-like.
    Betweenness,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HubSelection<T> {
    /// The `t` most hub-like nodes.
    TopT(usize),
    /// Every node at least as hub-like as the threshold.
    Threshold(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubReport<T> {
    pub method: HubMethod,
    pub scores: Vec<T>,
    /// All nodes, most hub-like first.
    pub ranking: Vec<usize>,
    pub selected: Vec<usize>,
}

impl<T: Scalar> HubReport<T> {
    pub fn from_scores(scores: Vec<T>, method: HubMethod, selection: HubSelection<T>) -> Result<Self> {
        // Betweenness ranks descending; flip the sign so one code path serves both.
        let keyed: Vec<T> = match method {
            HubMethod::RowNorm => scores.clone(),
            HubMethod::Betweenness => scores.iter().map(|&s| -s).collect(),
        };
        let selection = match (method, selection) {
            (HubMethod::Betweenness, HubSelection::Threshold(t)) => HubSelection::Threshold(-t),
            (_, s) => s,
        };
        let ranking = rank_ascending(&keyed);
        let selected = select_hubs(&keyed, selection)?;
        Ok(Self { method, scores, ranking, selected })
    }
}

fn rank_ascending<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Euclidean norm of each embedding row.
pub fn hub_scores<T: Scalar>(embedding: &Embedding<T>) -> Vec<T> {
    embedding
        .matrix()
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .collect()
}

/// Picks hub indices from ascending-is-more-hub-like scores.
///
/// `TopT` returns the `t` smallest scores in rank order (lower index wins
/// ties); `Threshold(tau)` returns `{i : score_i <= tau}` in index order.
pub fn select_hubs<T: Scalar>(scores: &[T], selection: HubSelection<T>) -> Result<Vec<usize>> {
    match selection {
        HubSelection::TopT(t) => {
            if t > scores.len() {
                return Err(Error::InvalidArgument(format!(
                    "cannot select {t} hubs from {} nodes",
                    scores.len()
                )));
            }
            Ok(rank_ascending(scores).into_iter().take(t).collect())
        }
        HubSelection::Threshold(tau) => {
            Ok((0..scores.len()).filter(|&i| scores[i] <= tau).collect())
        }
    }
}

/// Unnormalized shortest-path betweenness of every node.
///
/// Edge `(i, j)` has length `1 / a_ij` when `a_ij > 0`. Each unordered pair
/// of nodes spreads one unit of credit evenly over its shortest paths;
/// disconnected pairs contribute nothing. Path lengths within a relative
/// `1e-12` of each other count as ties.
pub fn betweenness<T: Scalar>(view: &AffinityMatrix<T>) -> Vec<T> {
    let a = view.as_array();
    let n = view.n();
    let inf = T::infinity();
    let rel_tie = T::tol(1e-12);
    let mut centrality = vec![T::zero(); n];

    let mut dist = vec![inf; n];
    let mut sigma = vec![T::zero(); n];
    let mut delta = vec![T::zero(); n];
    let mut done = vec![false; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order: Vec<usize> = Vec::with_capacity(n);

    for s in 0..n {
        dist.iter_mut().for_each(|d| *d = inf);
        sigma.iter_mut().for_each(|x| *x = T::zero());
        delta.iter_mut().for_each(|x| *x = T::zero());
        done.iter_mut().for_each(|x| *x = false);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        dist[s] = T::zero();
        sigma[s] = T::one();

        // Dense Dijkstra: the graphs are small and fully stored.
        loop {
            let mut u = None;
            for v in 0..n {
                if !done[v] && dist[v] < inf && u.is_none_or(|w: usize| dist[v] < dist[w]) {
                    u = Some(v);
                }
            }
            let Some(u) = u else { break };
            done[u] = true;
            order.push(u);
            for w in 0..n {
                let weight = a[[u, w]];
                if w == u || done[w] || weight <= T::zero() {
                    continue;
                }
                let alt = dist[u] + T::one() / weight;
                let slack = rel_tie * alt;
                if alt < dist[w] - slack {
                    dist[w] = alt;
                    sigma[w] = sigma[u];
                    preds[w].clear();
                    preds[w].push(u);
                } else if (alt - dist[w]).abs() <= slack {
                    let su = sigma[u];
                    sigma[w] += su;
                    preds[w].push(u);
                }
            }
        }

        for &w in order.iter().rev() {
            for &v in &preds[w] {
                let share = sigma[v] / sigma[w] * (T::one() + delta[w]);
                delta[v] += share;
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    // Every unordered pair was visited from both ends.
    let half = T::lit(0.5);
    centrality.iter_mut().for_each(|c| *c *= half);
    centrality
}

/// Zeroes the rows and columns of `hubs` in every view.
pub fn remove_hub_edges<T: Scalar>(graph: &MultiViewGraph<T>, hubs: &[usize]) -> Result<MultiViewGraph<T>> {
    let n = graph.n();
    if let Some(&bad) = hubs.iter().find(|&&h| h >= n) {
        return Err(Error::OutOfRange { index: bad, len: n });
    }
    let views = graph
        .views()
        .iter()
        .map(|v| {
            let mut data: Array2<T> = v.as_array().clone();
            for &h in hubs {
                data.row_mut(h).fill(T::zero());
                data.column_mut(h).fill(T::zero());
            }
            AffinityMatrix::new(data)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiViewGraph::new(views, graph.node_names().map(<[String]>::to_vec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_rows_score_zero() {
        let f = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let s = hub_scores(&Embedding::new(f).unwrap());
        assert_eq!(s, vec![1.0, 1.0, 0.0, 0.0]);
        let r = HubReport::from_scores(s, HubMethod::RowNorm, HubSelection::TopT(2)).unwrap();
        assert_eq!(r.selected, vec![2, 3]);
    }

    #[test]
    fn equal_norm_rows() {
        let h = 0.5f64;
        let f = array![[h, h], [h, -h], [-h, h], [-h, -h]];
        let s = hub_scores(&Embedding::new(f).unwrap());
        assert!(s.iter().all(|&v| (v - s[0]).abs() < 1e-15));
    }

    #[test]
    fn selection_strategies() {
        let s = [0.1, 0.9, 0.8, 0.05];
        assert_eq!(select_hubs(&s, HubSelection::TopT(2)).unwrap(), vec![3, 0]);
        assert_eq!(select_hubs(&[0.5, 0.5], HubSelection::TopT(1)).unwrap(), vec![0]);
        assert_eq!(select_hubs(&s, HubSelection::Threshold(0.2)).unwrap(), vec![0, 3]);
        assert!(select_hubs(&s, HubSelection::TopT(5)).is_err());
    }

    #[test]
    fn betweenness_small_graphs() {
        let path = AffinityMatrix::new(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(betweenness(&path), vec![0.0, 1.0, 0.0]);
        let tri = AffinityMatrix::new(array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(betweenness(&tri), vec![0.0, 0.0, 0.0]);
        // square: each opposite pair has two shortest paths
        let sq = AffinityMatrix::new(array![
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0]
        ])
        .unwrap();
        assert_eq!(betweenness(&sq), vec![0.5; 4]);
    }

    #[test]
    fn betweenness_ranks_descending() {
        let path = AffinityMatrix::new(array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = HubReport::from_scores(betweenness(&path), HubMethod::Betweenness, HubSelection::TopT(1)).unwrap();
        assert_eq!(r.selected, vec![1]);
        assert_eq!(r.ranking[0], 1);
        let r = HubReport::from_scores(betweenness(&path), HubMethod::Betweenness, HubSelection::Threshold(0.5)).unwrap();
        assert_eq!(r.selected, vec![1]);
    }

    #[test]
    fn hub_edge_removal() {
        let g = MultiViewGraph::single(AffinityMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap());
        let out = remove_hub_edges(&g, &[0]).unwrap();
        assert_eq!(out.views()[0].as_array(), &Array2::<f64>::zeros((2, 2)));
        assert_eq!(remove_hub_edges(&g, &[]).unwrap(), g);
        assert!(matches!(remove_hub_edges(&g, &[2]), Err(Error::OutOfRange { .. })));

        let tri = MultiViewGraph::single(
            AffinityMatrix::new(array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]).unwrap(),
        );
        let out = remove_hub_edges(&tri, &[1]).unwrap();
        assert_eq!(out.views()[0].as_array(), &array![[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }
}
