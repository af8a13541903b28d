//! Contrastive pipeline: two augmented views per graph, a shared GIN
//! encoder with mean readout and an MLP projection head, NT-Xent agreement
//! across the batch, and linear evaluation on frozen embeddings.

use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::augment::{sample_pair_specs, apply_with_seed, AugmenterSpec};
use crate::error::{Error, Result};
use crate::graph::{adjacency_matrix, Graph};
use crate::matrix::DenseMatrix;
use crate::models::train::{argmax_row, metrics_from_predictions};
use crate::models::gin_layer_forward;
use crate::rng;
use crate::synthetic::GraphSample;
use crate::tensor::adam::{AdamConfig, AdamState};
use crate::tensor::checkpoint::ParamSet;
use crate::tensor::ops::{self, Act};
use crate::tensor::{backward, Tape, Variable};

/// Concatenation of several graphs into one block-diagonal graph, plus the
/// node-to-graph assignment needed for readout.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub graphs: Vec<Graph>,
    pub labels: Vec<usize>,
    pub assignment: Vec<usize>,
    pub total_nodes: usize,
}

impl GraphBatch {
    pub fn new(samples: &[&GraphSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("empty graph batch".into()));
        }
        let mut assignment = Vec::new();
        for (gi, s) in samples.iter().enumerate() {
            if s.graph.num_nodes() == 0 {
                return Err(Error::Validation(format!("graph {gi} has zero nodes")));
            }
            assignment.extend(std::iter::repeat(gi).take(s.graph.num_nodes()));
        }
        Ok(GraphBatch {
            graphs: samples.iter().map(|s| s.graph.clone()).collect(),
            labels: samples.iter().map(|s| s.label).collect(),
            total_nodes: assignment.len(),
            assignment,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    /// Stacked feature matrix of all member graphs.
    pub fn features(&self) -> DenseMatrix {
        let cols = self.graphs[0].feature_dim();
        let mut out = DenseMatrix::zeros(self.total_nodes, cols);
        let mut offset = 0;
        for g in &self.graphs {
            for i in 0..g.num_nodes() {
                out.row_mut(offset + i).copy_from_slice(g.features().row(i));
            }
            offset += g.num_nodes();
        }
        out
    }

    /// Block-diagonal plain adjacency of all member graphs.
    pub fn block_adjacency(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.total_nodes, self.total_nodes);
        let mut offset = 0;
        for g in &self.graphs {
            let a = adjacency_matrix(g, false);
            for i in 0..g.num_nodes() {
                for j in 0..g.num_nodes() {
                    if a.get(i, j) != 0.0 {
                        out.set(offset + i, offset + j, 1.0);
                    }
                }
            }
            offset += g.num_nodes();
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Mean,
    Sum,
}

/// Pools node embeddings into per-graph rows along the assignment vector.
pub fn readout_pool(
    node_embs: &Variable,
    assignment: &[usize],
    num_graphs: usize,
    kind: Readout,
) -> Result<Variable> {
    if node_embs.rows() != assignment.len() {
        return Err(Error::Shape(format!(
            "{} embedding rows vs {} assignments",
            node_embs.rows(),
            assignment.len()
        )));
    }
    let mut counts = vec![0usize; num_graphs];
    for &g in assignment {
        if g >= num_graphs {
            return Err(Error::Index {
                what: "graph assignment",
                index: g,
                size: num_graphs,
            });
        }
        counts[g] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Validation(
            "readout over a graph with zero nodes".into(),
        ));
    }
    // Pooling as a constant operator keeps readout differentiable through
    // plain matmul.
    let mut pool = DenseMatrix::zeros(num_graphs, assignment.len());
    for (node, &g) in assignment.iter().enumerate() {
        let w = match kind {
            Readout::Mean => 1.0 / counts[g] as f64,
            Readout::Sum => 1.0,
        };
        pool.set(g, node, w);
    }
    let pool = node_embs.tape().constant(pool);
    ops::matmul(&pool, node_embs)
}

/// Normalized-temperature cross-entropy over a batch of positive pairs.
/// Row `r` of `z_i` and row `r` of `z_j` are the two views of one graph;
/// all other `2B - 2` embeddings serve as negatives. Cosine similarity via
/// internal L2 normalization.
pub fn nt_xent_loss(z_i: &Variable, z_j: &Variable, tau: f64) -> Result<Variable> {
    if tau <= 0.0 {
        return Err(Error::Validation(format!("temperature {tau} must be positive")));
    }
    let b = z_i.rows();
    if b < 2 {
        return Err(Error::Validation(
            "nt-xent needs a batch of at least 2 pairs (no negatives otherwise)".into(),
        ));
    }
    if z_i.shape() != z_j.shape() {
        return Err(Error::Shape(format!(
            "view shapes {:?} and {:?} differ",
            z_i.shape(),
            z_j.shape()
        )));
    }
    let zi = ops::normalize_rows_l2(z_i)?;
    let zj = ops::normalize_rows_l2(z_j)?;
    let stacked = ops::concat_rows(&zi, &zj)?;
    let sims = ops::matmul(&stacked, &ops::transpose(&stacked)?)?;
    let logits = ops::scale(&sims, 1.0 / tau)?;
    ops::nt_xent_from_sims(&logits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "default_encoder_layers")]
    pub layers: usize,
    #[serde(default = "default_encoder_hidden")]
    pub hidden: usize,
}

fn default_encoder_layers() -> usize {
    3
}
fn default_encoder_hidden() -> usize {
    32
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: default_encoder_layers(),
            hidden: default_encoder_hidden(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastiveConfig {
    pub pool: Vec<AugmenterSpec>,
    #[serde(default = "default_tau")]
    pub temperature: f64,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default = "default_projection_dim")]
    pub projection_dim: usize,
    #[serde(default = "default_c_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_tau() -> f64 {
    0.5
}
fn default_projection_dim() -> usize {
    32
}
fn default_c_epochs() -> usize {
    30
}
fn default_batch_size() -> usize {
    16
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool.is_empty() {
            return Err(Error::Config("augmentation pool is empty".into()));
        }
        for spec in &self.pool {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.temperature <= 0.0 {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.encoder.layers == 0 || self.encoder.hidden == 0 || self.projection_dim == 0 {
            return Err(Error::Config("encoder dims must be positive".into()));
        }
        Ok(())
    }
}

/// GIN encoder weights plus the projection head, in tape order. The head is
/// the final four matrices; `encoder_only` strips it for evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveModel {
    pub encoder: EncoderConfig,
    pub feat_dim: usize,
    pub params: ParamSet,
}

#[derive(Clone, Debug)]
pub struct ContrastiveOutcome {
    pub model: ContrastiveModel,
    /// Mean NT-Xent loss per epoch.
    pub loss_trace: Vec<f64>,
}

const PARAMS_PER_GIN_LAYER: usize = 4;

fn encoder_param_shapes(feat_dim: usize, enc: &EncoderConfig) -> Vec<(String, (usize, usize))> {
    let mut shapes = Vec::new();
    let mut in_dim = feat_dim;
    for l in 0..enc.layers {
        shapes.push((format!("gin{l}.w1"), (in_dim, enc.hidden)));
        shapes.push((format!("gin{l}.b1"), (1, enc.hidden)));
        shapes.push((format!("gin{l}.w2"), (enc.hidden, enc.hidden)));
        shapes.push((format!("gin{l}.b2"), (1, enc.hidden)));
        in_dim = enc.hidden;
    }
    shapes
}

fn projection_param_shapes(hidden: usize, proj_dim: usize) -> Vec<(String, (usize, usize))> {
    vec![
        ("proj.w1".into(), (hidden, hidden)),
        ("proj.w2".into(), (hidden, proj_dim)),
    ]
}

fn init_contrastive_params(feat_dim: usize, cfg: &ContrastiveConfig, seed: u64) -> ParamSet {
    let mut stream = rng::seeded(rng::mix(seed, 0xC0DE));
    let mut set = ParamSet::new();
    let mut shapes = encoder_param_shapes(feat_dim, &cfg.encoder);
    shapes.extend(projection_param_shapes(cfg.encoder.hidden, cfg.projection_dim));
    for (name, (rows, cols)) in shapes {
        set.push(name, crate::models::init_matrix(rows, cols, &mut stream));
    }
    set
}

/// Runs the shared GIN encoder over a batch and mean-pools to graph level.
/// `param_vars` holds the encoder leaves in shape order (eps fixed at 0).
fn encode_batch(
    batch: &GraphBatch,
    enc: &EncoderConfig,
    param_vars: &[Variable],
    tape: &Tape,
) -> Result<Variable> {
    let mut h = tape.constant(batch.features());
    let adj = batch.block_adjacency();
    for l in 0..enc.layers {
        let base = PARAMS_PER_GIN_LAYER * l;
        let mlp = crate::models::GinMlp {
            w1: &param_vars[base],
            b1: &param_vars[base + 1],
            w2: &param_vars[base + 2],
            b2: &param_vars[base + 3],
        };
        h = gin_layer_forward(&h, &adj, &mlp, 0.0)?;
    }
    readout_pool(&h, &batch.assignment, batch.num_graphs(), Readout::Mean)
}

// A plain relu hidden layer can zero an entire projected row (all hidden
// units dead for one graph), which makes cosine similarity undefined; the
// small leak keeps rows nonzero.
fn project(z: &Variable, w1: &Variable, w2: &Variable) -> Result<Variable> {
    let hidden = ops::activation(&ops::matmul(z, w1)?, Act::LeakyRelu(0.01))?;
    ops::matmul(&hidden, w2)
}

/// Trains encoder + projection head with NT-Xent over per-graph view pairs.
/// Both views of a batch run through the same parameter leaves, so the
/// encoder is shared by construction.
pub fn train_contrastive(
    dataset: &[GraphSample],
    cfg: &ContrastiveConfig,
) -> Result<ContrastiveOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Validation("empty contrastive dataset".into()));
    }
    let feat_dim = dataset[0].graph.feature_dim();
    let mut params = init_contrastive_params(feat_dim, cfg, cfg.seed);
    let mut adam = AdamState::new(
        AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        },
        &params.shapes(),
    );

    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng::seeded(rng::mix_all(cfg.seed, &[0xE0, epoch as u64])));

        let mut epoch_loss = 0.0;
        let mut num_batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue; // no negatives in a singleton remainder
            }
            let mut views_i = Vec::with_capacity(chunk.len());
            let mut views_j = Vec::with_capacity(chunk.len());
            for (slot, &idx) in chunk.iter().enumerate() {
                let pair_seed =
                    rng::mix_all(cfg.seed, &[0xA0, epoch as u64, batch_idx as u64, slot as u64]);
                let (spec_i, spec_j) = sample_pair_specs(&cfg.pool, pair_seed)?;
                let g = &dataset[idx].graph;
                views_i.push(GraphSample {
                    graph: apply_with_seed(&spec_i, g, rng::mix(pair_seed, 1))?,
                    label: dataset[idx].label,
                });
                views_j.push(GraphSample {
                    graph: apply_with_seed(&spec_j, g, rng::mix(pair_seed, 2))?,
                    label: dataset[idx].label,
                });
            }
            let batch_i = GraphBatch::new(&views_i.iter().collect::<Vec<_>>())?;
            let batch_j = GraphBatch::new(&views_j.iter().collect::<Vec<_>>())?;

            let tape = Tape::new();
            let param_vars: Vec<Variable> = params
                .matrices()
                .map(|m| tape.var(m.clone(), true))
                .collect();
            let enc_vars = &param_vars[..param_vars.len() - 2];
            let w1 = &param_vars[param_vars.len() - 2];
            let w2 = &param_vars[param_vars.len() - 1];

            let emb_i = encode_batch(&batch_i, &cfg.encoder, enc_vars, &tape)?;
            let emb_j = encode_batch(&batch_j, &cfg.encoder, enc_vars, &tape)?;
            let z_i = project(&emb_i, w1, w2)?;
            let z_j = project(&emb_j, w1, w2)?;
            let loss = nt_xent_loss(&z_i, &z_j, cfg.temperature)?;
            epoch_loss += loss.value().get(0, 0);
            num_batches += 1;

            backward(&loss)?;
            adam.step_vars(&param_vars)?;
            params.set_all(param_vars.iter().map(Variable::value).collect())?;
        }
        loss_trace.push(epoch_loss / num_batches.max(1) as f64);
    }

    // The projection head is discarded for evaluation.
    let mut encoder_params = ParamSet::new();
    for (name, m) in params.iter().take(PARAMS_PER_GIN_LAYER * cfg.encoder.layers) {
        encoder_params.push(name, m.clone());
    }
    Ok(ContrastiveOutcome {
        model: ContrastiveModel {
            encoder: cfg.encoder.clone(),
            feat_dim,
            params: encoder_params,
        },
        loss_trace,
    })
}

/// Frozen graph-level embeddings of a dataset under a trained encoder.
pub fn embed_dataset(model: &ContrastiveModel, dataset: &[GraphSample]) -> Result<DenseMatrix> {
    let refs: Vec<&GraphSample> = dataset.iter().collect();
    let batch = GraphBatch::new(&refs)?;
    let tape = Tape::new();
    let param_vars: Vec<Variable> = model
        .params
        .matrices()
        .map(|m| tape.var(m.clone(), false))
        .collect();
    let emb = encode_batch(&batch, &model.encoder, &param_vars, &tape)?;
    Ok(emb.value())
}

/// Trains a multinomial logistic probe (Adam, 100 epochs) on a stratified
/// 80/20 split of frozen embeddings; returns macro-F1 on the held-out part.
pub fn linear_eval_f1(
    model: &ContrastiveModel,
    dataset: &[GraphSample],
    seed: u64,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Validation("empty evaluation dataset".into()));
    }
    let embeddings = embed_dataset(model, dataset)?;
    let labels: Vec<usize> = dataset.iter().map(|s| s.label).collect();
    let classes = labels.iter().max().unwrap() + 1;

    let (train_idx, test_idx) = stratified_split(&labels, 0.8, seed)?;
    for c in 0..classes {
        if !train_idx.iter().any(|&i| labels[i] == c) {
            return Err(Error::Validation(format!(
                "class {c} absent from the training split"
            )));
        }
    }

    // Standardize per dimension with train-split statistics; raw GIN
    // embeddings can span orders of magnitude, which stalls the probe.
    let cols = embeddings.cols();
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    for &i in &train_idx {
        for c in 0..cols {
            mean[c] += embeddings.get(i, c);
        }
    }
    for m in &mut mean {
        *m /= train_idx.len() as f64;
    }
    for &i in &train_idx {
        for c in 0..cols {
            std[c] += (embeddings.get(i, c) - mean[c]).powi(2);
        }
    }
    for s in &mut std {
        *s = (*s / train_idx.len() as f64).sqrt();
        if *s < 1e-9 {
            *s = 1.0;
        }
    }

    // Bias via an appended constant-one column.
    let dim = cols + 1;
    let with_bias = |rows: &[usize]| {
        DenseMatrix::from_fn(rows.len(), dim, |r, c| {
            if c < cols {
                (embeddings.get(rows[r], c) - mean[c]) / std[c]
            } else {
                1.0
            }
        })
    };
    let x_train = with_bias(&train_idx);
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let all_true = vec![true; train_idx.len()];

    let mut stream = rng::seeded(rng::mix(seed, 0x11F));
    let limit = (6.0 / (dim + classes) as f64).sqrt();
    let mut weights = DenseMatrix::from_fn(dim, classes, |_, _| stream.gen_range(-limit..limit));
    let mut adam = AdamState::new(
        AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        },
        &[(dim, classes)],
    );
    for _ in 0..100 {
        let tape = Tape::new();
        let x = tape.constant(x_train.clone());
        let w = tape.var(weights.clone(), true);
        let logits = ops::matmul(&x, &w)?;
        let loss = ops::cross_entropy_masked(&logits, &train_labels, &all_true)?;
        backward(&loss)?;
        adam.step_vars(&[w.clone()])?;
        weights = w.value();
    }

    let x_test = with_bias(&test_idx);
    let logits = x_test.matmul(&weights)?;
    let predictions: Vec<usize> = (0..test_idx.len())
        .map(|r| argmax_row(logits.row(r)))
        .collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    let mask = vec![true; test_idx.len()];
    Ok(metrics_from_predictions(&predictions, &test_labels, &mask, classes).macro_f1)
}

/// Stratified index split: `ratio` of each class to the first bucket.
pub fn stratified_split(
    labels: &[usize],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Validation(format!("split ratio {ratio} outside (0,1)")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut stream = rng::seeded(rng::mix(seed, 0x59117));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut stream);
        // Keep at least one member on each side when the class allows it.
        let mut cut = ((members.len() as f64) * ratio).round() as usize;
        if !members.is_empty() {
            cut = cut.max(1).min(members.len() - usize::from(members.len() > 1));
        }
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{synthetic_graph_dataset, GraphDatasetParams};

    fn tiny_dataset(n: usize) -> Vec<GraphSample> {
        synthetic_graph_dataset(&GraphDatasetParams {
            num_graphs: n,
            nodes_min: 6,
            nodes_max: 10,
            class_p_in: vec![0.2, 0.6],
            p_out: 0.05,
            feat_dim: 3,
            noise: 0.1,
            seed: 77,
        })
        .unwrap()
    }

    #[test]
    fn readout_mean_matches_groupby() {
        let samples = tiny_dataset(4);
        let refs: Vec<&GraphSample> = samples.iter().collect();
        let batch = GraphBatch::new(&refs).unwrap();
        let tape = Tape::new();
        let embs = tape.constant(batch.features());
        let pooled = readout_pool(&embs, &batch.assignment, batch.num_graphs(), Readout::Mean)
            .unwrap()
            .value();

        let feats = batch.features();
        for g in 0..batch.num_graphs() {
            let members: Vec<usize> = (0..batch.total_nodes)
                .filter(|&i| batch.assignment[i] == g)
                .collect();
            for c in 0..feats.cols() {
                let mean: f64 =
                    members.iter().map(|&i| feats.get(i, c)).sum::<f64>() / members.len() as f64;
                assert!((pooled.get(g, c) - mean).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn readout_single_node_graphs_pass_through() {
        let g1 = Graph::new(1, Vec::<(usize, usize)>::new(), DenseMatrix::filled(1, 2, 3.0))
            .unwrap();
        let g2 = Graph::new(1, Vec::<(usize, usize)>::new(), DenseMatrix::filled(1, 2, -1.0))
            .unwrap();
        let s1 = GraphSample { graph: g1, label: 0 };
        let s2 = GraphSample { graph: g2, label: 1 };
        let batch = GraphBatch::new(&[&s1, &s2]).unwrap();
        let tape = Tape::new();
        let embs = tape.constant(batch.features());
        let pooled = readout_pool(&embs, &batch.assignment, 2, Readout::Mean)
            .unwrap()
            .value();
        assert_eq!(pooled.to_rows(), vec![vec![3.0, 3.0], vec![-1.0, -1.0]]);
    }

    #[test]
    fn nt_xent_closed_form_b2() {
        // Identical positives, orthogonal otherwise, tau = 0.5: every anchor
        // sees positive e^2 against two e^0 negatives.
        let tape = Tape::new();
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let z_i = tape.var(z.clone(), true);
        let z_j = tape.var(z, true);
        let loss = nt_xent_loss(&z_i, &z_j, 0.5).unwrap().value().get(0, 0);
        let e2 = 2.0f64.exp();
        let expect = -(e2 / (e2 + 2.0)).ln();
        assert!((loss - expect).abs() <= 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn nt_xent_invariances() {
        let tape = Tape::new();
        let zi = DenseMatrix::from_fn(4, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin() + 0.1);
        let zj = DenseMatrix::from_fn(4, 3, |i, j| ((i * 5 + j) as f64 * 0.3).cos() - 0.2);
        let a = nt_xent_loss(&tape.var(zi.clone(), false), &tape.var(zj.clone(), false), 0.5)
            .unwrap()
            .value()
            .get(0, 0);

        // Permuting the pair order leaves the loss unchanged.
        let perm = [2usize, 0, 3, 1];
        let zi_p = DenseMatrix::from_fn(4, 3, |i, j| zi.get(perm[i], j));
        let zj_p = DenseMatrix::from_fn(4, 3, |i, j| zj.get(perm[i], j));
        let b = nt_xent_loss(&tape.var(zi_p, false), &tape.var(zj_p, false), 0.5)
            .unwrap()
            .value()
            .get(0, 0);
        assert!((a - b).abs() <= 1e-10);

        // Global positive scaling is absorbed by cosine normalization.
        let c = nt_xent_loss(
            &tape.var(zi.scale(10.0), false),
            &tape.var(zj.scale(10.0), false),
            0.5,
        )
        .unwrap()
        .value()
        .get(0, 0);
        assert!((a - c).abs() <= 1e-10);
    }

    #[test]
    fn nt_xent_flat_softmax_limit_at_huge_tau() {
        // tau -> infinity: all logits flatten and the loss approaches
        // ln(2B - 1).
        let tape = Tape::new();
        let zi = DenseMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) as f64 * 0.41).sin());
        let zj = DenseMatrix::from_fn(6, 4, |i, j| ((i * 11 + j * 5) as f64 * 0.29).cos());
        let loss = nt_xent_loss(&tape.var(zi, false), &tape.var(zj, false), 1e6)
            .unwrap()
            .value()
            .get(0, 0);
        let floor = (11.0f64).ln();
        assert!((loss - floor).abs() <= 1e-6, "{loss} vs {floor}");
    }

    #[test]
    fn nt_xent_rejects_tiny_batches_and_zero_rows() {
        let tape = Tape::new();
        let one = tape.var(DenseMatrix::filled(1, 2, 1.0), false);
        assert!(matches!(
            nt_xent_loss(&one, &one, 0.5),
            Err(Error::Validation(_))
        ));
        let zeros = tape.var(DenseMatrix::zeros(2, 2), false);
        let ok = tape.var(DenseMatrix::filled(2, 2, 1.0), false);
        assert!(matches!(
            nt_xent_loss(&zeros, &ok, 0.5),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn positive_similarity_increase_lowers_loss() {
        let tape = Tape::new();
        let zi = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let zj_far = DenseMatrix::from_rows(&[vec![0.6, 0.8], vec![0.8, 0.6]]).unwrap();
        let zj_near = DenseMatrix::from_rows(&[vec![0.9, 0.43589], vec![0.43589, 0.9]]).unwrap();
        let far = nt_xent_loss(&tape.var(zi.clone(), false), &tape.var(zj_far, false), 0.5)
            .unwrap()
            .value()
            .get(0, 0);
        let near = nt_xent_loss(&tape.var(zi, false), &tape.var(zj_near, false), 0.5)
            .unwrap()
            .value()
            .get(0, 0);
        assert!(near < far);
    }

    #[test]
    fn contrastive_training_is_deterministic() {
        let data = tiny_dataset(12);
        let cfg = ContrastiveConfig {
            pool: vec![
                AugmenterSpec::EdgeRemove { p: 0.2, seed: 0 },
                AugmenterSpec::FeatureMask { p: 0.2, seed: 0 },
            ],
            temperature: 0.5,
            encoder: EncoderConfig { layers: 2, hidden: 8 },
            projection_dim: 8,
            epochs: 3,
            batch_size: 4,
            seed: 13,
        };
        let a = train_contrastive(&data, &cfg).unwrap();
        let b = train_contrastive(&data, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn identity_pool_loss_still_decreases() {
        // Full-batch reference run: with every graph in one batch the
        // negatives mix is fixed, so per-epoch losses are comparable.
        let data = tiny_dataset(16);
        let cfg = ContrastiveConfig {
            pool: vec![AugmenterSpec::Identity, AugmenterSpec::Identity],
            temperature: 0.5,
            encoder: EncoderConfig { layers: 2, hidden: 8 },
            projection_dim: 8,
            epochs: 10,
            batch_size: 16,
            seed: 3,
        };
        let out = train_contrastive(&data, &cfg).unwrap();
        // Mostly monotone decrease over the first 10 epochs, allowing two
        // non-monotone steps.
        let violations = out
            .loss_trace
            .windows(2)
            .filter(|w| w[1] > w[0] + 1e-9)
            .count();
        assert!(
            violations <= 2,
            "loss trace not mostly decreasing: {:?}",
            out.loss_trace
        );
        assert!(out.loss_trace.last().unwrap() < out.loss_trace.first().unwrap());
    }

    #[test]
    fn linear_eval_perfect_and_majority_cases() {
        // Embeddings identical to one-hot labels: F1 = 1.
        let model_dim = 2;
        let data = tiny_dataset(20);
        let labels: Vec<usize> = data.iter().map(|s| s.label).collect();
        let one_hot =
            DenseMatrix::from_fn(20, model_dim, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
        let f1 = linear_probe_f1(&one_hot, &labels, 5).unwrap();
        assert_eq!(f1, 1.0);

        // Constant embeddings can do no better than the majority baseline.
        let constant = DenseMatrix::filled(20, model_dim, 1.0);
        let f1 = linear_probe_f1(&constant, &labels, 5).unwrap();
        let (train_idx, test_idx) = stratified_split(&labels, 0.8, 5).unwrap();
        let majority = majority_baseline_f1(&labels, &train_idx, &test_idx);
        assert!((f1 - majority).abs() <= 1e-12);
    }

    /// Linear evaluation over explicit embeddings (test-side shortcut that
    /// bypasses the encoder).
    fn linear_probe_f1(embeddings: &DenseMatrix, labels: &[usize], seed: u64) -> Result<f64> {
        let samples: Vec<GraphSample> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| GraphSample {
                graph: Graph::new(
                    1,
                    Vec::<(usize, usize)>::new(),
                    DenseMatrix::from_fn(1, embeddings.cols(), |_, c| embeddings.get(i, c)),
                )
                .unwrap(),
                label,
            })
            .collect();
        // A zero-layer encoder is not allowed, so emulate one: a single GIN
        // layer with identity weights on isolated single-node graphs acts as
        // relu(x) * w2; instead evaluate the probe on raw features by using
        // mean readout over single-node graphs and a hand-rolled identity
        // encoder.
        let model = ContrastiveModel {
            encoder: EncoderConfig { layers: 1, hidden: embeddings.cols() },
            feat_dim: embeddings.cols(),
            params: {
                let mut set = ParamSet::new();
                set.push("gin0.w1", DenseMatrix::identity(embeddings.cols()));
                set.push("gin0.b1", DenseMatrix::zeros(1, embeddings.cols()));
                set.push("gin0.w2", DenseMatrix::identity(embeddings.cols()));
                set.push("gin0.b2", DenseMatrix::zeros(1, embeddings.cols()));
                set
            },
        };
        // relu passes the nonnegative test embeddings through unchanged.
        linear_eval_f1(&model, &samples, seed)
    }

    pub(super) fn majority_baseline_f1(
        labels: &[usize],
        train_idx: &[usize],
        test_idx: &[usize],
    ) -> f64 {
        let classes = labels.iter().max().unwrap() + 1;
        let mut counts = vec![0usize; classes];
        for &i in train_idx {
            counts[labels[i]] += 1;
        }
        let majority = (0..classes).max_by_key(|&c| (counts[c], classes - c)).unwrap();
        let predictions: Vec<usize> = vec![majority; labels.len()];
        let mut mask = vec![false; labels.len()];
        for &i in test_idx {
            mask[i] = true;
        }
        metrics_from_predictions(&predictions, labels, &mask, classes).macro_f1
    }

    #[test]
    fn linear_eval_is_deterministic() {
        let data = tiny_dataset(16);
        let cfg = ContrastiveConfig {
            pool: vec![AugmenterSpec::Identity],
            temperature: 0.5,
            encoder: EncoderConfig { layers: 2, hidden: 8 },
            projection_dim: 8,
            epochs: 2,
            batch_size: 4,
            seed: 1,
        };
        let out = train_contrastive(&data, &cfg).unwrap();
        let a = linear_eval_f1(&out.model, &data, 9).unwrap();
        let b = linear_eval_f1(&out.model, &data, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encoder_sharing_is_by_handle() {
        // Both views flow through the same parameter leaves: verified by
        // handle equality on a miniature forward.
        let data = tiny_dataset(4);
        let refs: Vec<&GraphSample> = data.iter().collect();
        let batch = GraphBatch::new(&refs).unwrap();
        let tape = Tape::new();
        let enc = EncoderConfig { layers: 1, hidden: 4 };
        let params = init_contrastive_params(
            3,
            &ContrastiveConfig {
                pool: vec![AugmenterSpec::Identity],
                temperature: 0.5,
                encoder: enc.clone(),
                projection_dim: 4,
                epochs: 1,
                batch_size: 2,
                seed: 0,
            },
            0,
        );
        let vars: Vec<Variable> = params.matrices().map(|m| tape.var(m.clone(), true)).collect();
        let enc_vars = &vars[..PARAMS_PER_GIN_LAYER];
        let a = encode_batch(&batch, &enc, enc_vars, &tape).unwrap();
        let b = encode_batch(&batch, &enc, enc_vars, &tape).unwrap();
        // Different forward nodes, same parameter handles.
        assert!(!a.same_node(&b));
        assert!(enc_vars[0].same_node(&enc_vars[0].clone()));
    }

    use crate::graph::Graph;
}
