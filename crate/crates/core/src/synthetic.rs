//! Synthetic dataset generators: a stochastic block model for node
//! classification and a class-conditioned SBM family for graph
//! classification. Both are deterministic for a fixed seed and stand in for
//! the published benchmark datasets at desk scale.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmParams {
    pub n: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default = "default_feat_dim")]
    pub feat_dim: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_feat_dim() -> usize {
    8
}

fn default_noise() -> f64 {
    0.5
}

impl SbmParams {
    pub fn generate(&self) -> Result<Graph> {
        synthetic_sbm(
            self.n,
            self.classes,
            self.p_in,
            self.p_out,
            self.feat_dim,
            self.noise,
            self.seed,
        )
    }
}

/// Stochastic block model with contiguous blocks, class-indicator features
/// plus Gaussian noise, block-id labels, and a stratified 60/20/20
/// train/val/test split.
pub fn synthetic_sbm(
    n: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Graph> {
    if classes == 0 || classes > n {
        return Err(Error::Validation(format!(
            "{classes} classes for {n} nodes"
        )));
    }
    if feat_dim == 0 {
        return Err(Error::Validation("feat_dim must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p_out) || !(0.0..=1.0).contains(&p_in) || p_out > p_in {
        return Err(Error::Validation(format!(
            "edge probabilities must satisfy 0 <= p_out <= p_in <= 1, got p_in={p_in} p_out={p_out}"
        )));
    }

    // Contiguous blocks; the remainder spreads one extra node over the
    // leading blocks.
    let base = n / classes;
    let extra = n % classes;
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let size = base + usize::from(c < extra);
        labels.extend(std::iter::repeat(c).take(size));
    }

    let mut edge_rng = rng::seeded(rng::mix(seed, 1));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if edge_rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut feat_rng = rng::seeded(rng::mix(seed, 2));
    let mut features = DenseMatrix::zeros(n, feat_dim);
    for i in 0..n {
        let hot = labels[i] % feat_dim;
        for j in 0..feat_dim {
            let base = if j == hot { 1.0 } else { 0.0 };
            let jitter: f64 = StandardNormal.sample(&mut feat_rng);
            features.set(i, j, base + noise * jitter);
        }
    }

    let mut mask_rng = rng::seeded(rng::mix(seed, 3));
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut mask_rng);
        let m = members.len();
        let n_train = (m * 6) / 10;
        let n_val = (m * 2) / 10;
        for (rank, &i) in members.iter().enumerate() {
            if rank < n_train {
                train[i] = true;
            } else if rank < n_train + n_val {
                val[i] = true;
            } else {
                test[i] = true;
            }
        }
    }

    Graph::new(n, edges, features)?
        .with_labels(labels)?
        .with_masks(train, val, test)
}

/// One labeled graph of a graph-classification dataset.
#[derive(Clone, Debug)]
pub struct GraphSample {
    pub graph: Graph,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDatasetParams {
    pub num_graphs: usize,
    #[serde(default = "default_nodes_min")]
    pub nodes_min: usize,
    #[serde(default = "default_nodes_max")]
    pub nodes_max: usize,
    /// Within-block edge probability per class; the class label of a graph
    /// selects its entry.
    #[serde(default = "default_class_p_in")]
    pub class_p_in: Vec<f64>,
    #[serde(default = "default_graph_p_out")]
    pub p_out: f64,
    #[serde(default = "default_graph_feat_dim")]
    pub feat_dim: usize,
    #[serde(default = "default_graph_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_nodes_min() -> usize {
    10
}
fn default_nodes_max() -> usize {
    20
}
fn default_class_p_in() -> Vec<f64> {
    vec![0.2, 0.55]
}
fn default_graph_p_out() -> f64 {
    0.05
}
fn default_graph_feat_dim() -> usize {
    8
}
fn default_graph_noise() -> f64 {
    0.1
}

impl GraphDatasetParams {
    pub fn generate(&self) -> Result<Vec<GraphSample>> {
        synthetic_graph_dataset(self)
    }
}

/// Binary (or k-ary) graph-classification dataset: graph `g` gets label
/// `g mod classes`, and its two-block SBM uses the class's within-block
/// probability. Node features are a capped-degree one-hot plus Gaussian
/// noise (the usual stand-in when graphs carry no attributes), so the
/// class-dependent density shows up as a feature distribution rather than
/// a pure magnitude. Node labels all carry the graph label so a directory
/// of graph-json files keeps the class information.
pub fn synthetic_graph_dataset(params: &GraphDatasetParams) -> Result<Vec<GraphSample>> {
    let classes = params.class_p_in.len();
    if classes < 2 {
        return Err(Error::Validation(
            "class_p_in needs at least two classes".into(),
        ));
    }
    if params.nodes_min < 4 || params.nodes_min > params.nodes_max {
        return Err(Error::Validation(format!(
            "invalid node range {}..={}",
            params.nodes_min, params.nodes_max
        )));
    }
    for &p in &params.class_p_in {
        if !(0.0..=1.0).contains(&p) || p < params.p_out {
            return Err(Error::Validation(format!(
                "class p_in {p} must lie in [p_out, 1]"
            )));
        }
    }

    let mut samples = Vec::with_capacity(params.num_graphs);
    for idx in 0..params.num_graphs {
        let label = idx % classes;
        let g_seed = rng::mix(params.seed, idx as u64);
        let mut size_rng = rng::seeded(rng::mix(g_seed, 0));
        let n = size_rng.gen_range(params.nodes_min..=params.nodes_max);

        let mut edge_rng = rng::seeded(rng::mix(g_seed, 1));
        let half = n / 2;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                let same_block = (u < half) == (v < half);
                let p = if same_block {
                    params.class_p_in[label]
                } else {
                    params.p_out
                };
                if edge_rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }

        let mut degrees = vec![0usize; n];
        for &(u, v) in &edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut feat_rng = rng::seeded(rng::mix(g_seed, 2));
        let mut features = DenseMatrix::zeros(n, params.feat_dim);
        for i in 0..n {
            let hot = degrees[i].min(params.feat_dim - 1);
            for j in 0..params.feat_dim {
                let base = if j == hot { 1.0 } else { 0.0 };
                let jitter: f64 = StandardNormal.sample(&mut feat_rng);
                features.set(i, j, base + params.noise * jitter);
            }
        }

        let graph = Graph::new(n, edges, features)?.with_labels(vec![label; n])?;
        samples.push(GraphSample { graph, label });
    }
    Ok(samples)
}
