//! Seeded multi-view graphs with planted modules and hubs, and two-cohort
//! subject datasets built from them.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{load_multiview, save_multiview, AffinityMatrix, MultiViewGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSpec {
    pub n: usize,
    pub clusters: usize,
    pub hubs: usize,
    pub views: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub noise_sigma: f64,
    /// Per-view structure strength in `[0, 1]`; empty means all ones. At 0
    /// a view carries no module signal.
    pub view_quality: Vec<f64>,
    /// Module `c` gets a share of nodes proportional to `1 + size_skew * c`.
    pub size_skew: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n: 100,
            clusters: 4,
            hubs: 5,
            views: 2,
            p_intra: 0.8,
            p_inter: 0.01,
            noise_sigma: 0.03,
            view_quality: Vec::new(),
            size_skew: 0.0,
            seed: 0,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.clusters == 0 || self.views == 0 {
            return bad("clusters and views must be positive".into());
        }
        if self.hubs + self.clusters > self.n {
            return bad(format!(
                "{} hubs and {} modules do not fit in {} nodes",
                self.hubs, self.clusters, self.n
            ));
        }
        if self.hubs > 0 && self.clusters < 2 {
            return bad("hubs need at least two modules to span".into());
        }
        if !(0.0 <= self.p_inter && self.p_inter < self.p_intra && self.p_intra <= 1.0) {
            return bad(format!("need 0 <= p_inter < p_intra <= 1, got {} and {}", self.p_inter, self.p_intra));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be a nonnegative number, got {}", self.noise_sigma));
        }
        if !(self.size_skew >= 0.0 && self.size_skew.is_finite()) {
            return bad(format!("size_skew must be a nonnegative number, got {}", self.size_skew));
        }
        if !self.view_quality.is_empty() && self.view_quality.len() != self.views {
            return bad(format!("{} view qualities for {} views", self.view_quality.len(), self.views));
        }
        if let Some(q) = self.view_quality.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return bad(format!("view quality {q} is outside [0, 1]"));
        }
        Ok(())
    }

    fn quality(&self, v: usize) -> f64 {
        self.view_quality.get(v).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub labels: Vec<usize>,
    pub hub_set: Vec<usize>,
}

impl PlantedTruth {
    pub fn is_hub(&self, i: usize) -> bool {
        self.hub_set.contains(&i)
    }

    /// Indices of nodes that are not planted hubs.
    pub fn non_hubs(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| !self.is_hub(i)).collect()
    }
}

fn module_sizes(total: usize, clusters: usize, skew: f64) -> Vec<usize> {
    // One node per module up front so heavy skew never empties a module.
    let spare = total - clusters;
    let w: Vec<f64> = (0..clusters).map(|c| 1.0 + skew * c as f64).collect();
    let sum: f64 = w.iter().sum();
    let mut sizes: Vec<usize> = w.iter().map(|x| 1 + (x / sum * spare as f64).floor() as usize).collect();
    let used: usize = sizes.iter().sum();
    sizes[clusters - 1] += total - used;
    sizes
}

/// Expected weights before noise, one matrix per view.
fn planted_means(spec: &PlantedSpec, rng: &mut ChaCha8Rng) -> (Vec<Array2<f64>>, PlantedTruth) {
    let n = spec.n;
    let c = spec.clusters;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);

    let mut labels = vec![0usize; n];
    let mut hub_set: Vec<usize> = perm[..spec.hubs].to_vec();
    for (r, &h) in hub_set.iter().enumerate() {
        labels[h] = r % c;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    let mut rest = perm[spec.hubs..].iter();
    for (module, size) in module_sizes(n - spec.hubs, c, spec.size_skew).into_iter().enumerate() {
        for &i in rest.by_ref().take(size) {
            labels[i] = module;
            members[module].push(i);
        }
    }

    // Each hub links to the same number of nodes in every module.
    let per_module = ((n - spec.hubs) as f64 / (c * c) as f64).round().max(1.0) as usize;
    let mut hub_links: Vec<Vec<usize>> = Vec::with_capacity(spec.hubs);
    for _ in &hub_set {
        let mut links = Vec::new();
        for m in &members {
            links.extend(m.choose_multiple(rng, per_module.min(m.len())).copied());
        }
        hub_links.push(links);
    }

    let is_hub = {
        let mut flag = vec![false; n];
        hub_set.iter().for_each(|&h| flag[h] = true);
        flag
    };
    let means = (0..spec.views)
        .map(|v| {
            let strong = spec.p_inter + spec.quality(v) * (spec.p_intra - spec.p_inter);
            let mut mean = Array2::from_shape_fn((n, n), |(i, j)| {
                if !is_hub[i] && !is_hub[j] && labels[i] == labels[j] {
                    strong
                } else {
                    spec.p_inter
                }
            });
            for (&h, links) in hub_set.iter().zip(&hub_links) {
                for &j in links {
                    mean[[h, j]] = strong;
                    mean[[j, h]] = strong;
                }
            }
            mean
        })
        .collect();
    hub_set.sort_unstable();
    (means, PlantedTruth { labels, hub_set })
}

fn noisy_view<T: Scalar>(mean: &Array2<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Result<AffinityMatrix<T>> {
    let n = mean.nrows();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut a = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let w = T::lit((mean[[i, j]] + normal.sample(rng)).clamp(0.0, 1.0));
            a[[i, j]] = w;
            a[[j, i]] = w;
        }
    }
    AffinityMatrix::new(a)
}

fn generate_with_stream<T: Scalar>(spec: &PlantedSpec, stream: u64) -> Result<(MultiViewGraph<T>, PlantedTruth)> {
    spec.validate()?;
    let mut structure = ChaCha8Rng::seed_from_u64(spec.seed);
    let (means, truth) = planted_means(spec, &mut structure);
    let mut noise = ChaCha8Rng::seed_from_u64(spec.seed);
    noise.set_stream(stream);
    let views = means
        .iter()
        .map(|m| noisy_view(m, spec.noise_sigma, &mut noise))
        .collect::<Result<Vec<_>>>()?;
    Ok((MultiViewGraph::new(views, None)?, truth))
}

/// Draws one multi-view graph. Output is a pure function of `spec`.
pub fn generate_multiview<T: Scalar>(spec: &PlantedSpec) -> Result<(MultiViewGraph<T>, PlantedTruth)> {
    generate_with_stream(spec, 1)
}

/// Draws `count_a` subjects from `spec_a` then `count_b` from `spec_b`.
///
/// Within a cohort the planted structure is fixed by the spec's seed and
/// subjects differ by noise; subject `i` uses noise stream `i + 2`, so even
/// identical specs give distinct subjects. Returns graphs and cohort labels.
pub fn generate_cohort<T: Scalar>(
    spec_a: &PlantedSpec,
    spec_b: &PlantedSpec,
    count_a: usize,
    count_b: usize,
) -> Result<(Vec<MultiViewGraph<T>>, Vec<usize>)> {
    if spec_a.n != spec_b.n || spec_a.views != spec_b.views {
        return Err(Error::DimensionMismatch(format!(
            "cohort specs disagree: n {} vs {}, views {} vs {}",
            spec_a.n, spec_b.n, spec_a.views, spec_b.views
        )));
    }
    let labels: Vec<usize> = std::iter::repeat_n(0, count_a).chain(std::iter::repeat_n(1, count_b)).collect();
    let graphs = labels
        .par_iter()
        .enumerate()
        .map(|(i, &cohort)| {
            let spec = if cohort == 0 { spec_a } else { spec_b };
            generate_with_stream(spec, i as u64 + 2).map(|(g, _)| g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((graphs, labels))
}

/// On-disk index of a subject dataset: one graph manifest per subject, plus
/// optional cohort labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub subjects: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes `subject_{i}/` graph directories and `cohort.json` under `dir`.
pub fn save_cohort<T: Scalar>(graphs: &[MultiViewGraph<T>], labels: Option<&[usize]>, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut subjects = Vec::with_capacity(graphs.len());
    for (i, g) in graphs.iter().enumerate() {
        let name = format!("subject_{i}");
        save_multiview(g, &dir.join(&name))?;
        subjects.push(PathBuf::from(name).join("graph.json"));
    }
    let manifest = CohortManifest { subjects, labels: labels.map(<[usize]>::to_vec) };
    let path = dir.join("cohort.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads every subject listed in a cohort manifest; relative paths resolve
/// against the manifest's directory.
pub fn load_cohort<T: Scalar>(path: &Path) -> Result<(Vec<MultiViewGraph<T>>, Option<Vec<usize>>)> {
    let manifest: CohortManifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let graphs = manifest
        .subjects
        .iter()
        .map(|p| load_multiview(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(labels) = &manifest.labels {
        if labels.len() != graphs.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("{} labels for {} subjects", labels.len(), graphs.len()),
            });
        }
    }
    Ok((graphs, manifest.labels))
}
