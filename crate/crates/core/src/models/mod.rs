//! The four architectures: GCN, GraphSAGE, GAT, and GIN.
//!
//! Layer forwards are free functions over tape variables so each can be
//! oracle-tested in isolation; `model_forward` stacks them according to a
//! `ModelConfig`. All layers are bias-free.

pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{adjacency_matrix, normalized_adjacency_with_self_loops, Graph};
use crate::matrix::{BoolMatrix, DenseMatrix};
use crate::rng;
use crate::tensor::checkpoint::ParamSet;
use crate::tensor::ops::{self, Act};
use crate::tensor::{Tape, Variable};

use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    GraphSage,
    Gat,
    Gin,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SageAggregator {
    #[default]
    Mean,
    MaxPool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Input dim, hidden dims, output classes. For GAT the hidden entries
    /// are per-head widths. May be left empty in experiment configs and
    /// inferred from the dataset.
    #[serde(default)]
    pub layer_dims: Vec<usize>,
    #[serde(default = "default_sage_k")]
    pub sage_k: usize,
    #[serde(default)]
    pub sage_aggregator: SageAggregator,
    #[serde(default = "default_gat_heads")]
    pub gat_heads: usize,
    #[serde(default = "default_gat_slope")]
    pub gat_slope: f64,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    /// Per-layer activation override; per-arch defaults otherwise.
    #[serde(default)]
    pub activations: Option<Vec<Act>>,
}

fn default_sage_k() -> usize {
    5
}
fn default_gat_heads() -> usize {
    8
}
fn default_gat_slope() -> f64 {
    0.2
}
fn default_dropout() -> f64 {
    0.5
}

impl ModelConfig {
    /// Two-layer defaults: hidden 16 for GCN/GraphSAGE/GIN, 8 per head for
    /// GAT (8 heads).
    pub fn defaults_for(arch: Arch, in_dim: usize, classes: usize) -> ModelConfig {
        let hidden = match arch {
            Arch::Gat => 8,
            _ => 16,
        };
        ModelConfig {
            arch,
            layer_dims: vec![in_dim, hidden, classes],
            sage_k: default_sage_k(),
            sage_aggregator: SageAggregator::default(),
            gat_heads: default_gat_heads(),
            gat_slope: default_gat_slope(),
            dropout: default_dropout(),
            activations: None,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::Config(format!(
                "layer_dims needs at least input and output dims, got {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("layer_dims entries must be positive".into()));
        }
        if self.sage_k == 0 {
            return Err(Error::Config("sage_k must be at least 1".into()));
        }
        if self.gat_heads == 0 {
            return Err(Error::Config("gat_heads must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0,1)",
                self.dropout
            )));
        }
        if let Some(acts) = &self.activations {
            if acts.len() != self.num_layers() {
                return Err(Error::Config(format!(
                    "{} activations for {} layers",
                    acts.len(),
                    self.num_layers()
                )));
            }
        }
        Ok(())
    }

    /// Effective input width of layer `l`; accounts for multi-head
    /// concatenation on GAT hidden layers.
    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.layer_dims[0]
        } else if self.arch == Arch::Gat {
            self.layer_dims[l] * self.gat_heads
        } else {
            self.layer_dims[l]
        }
    }

    fn activation_for(&self, l: usize) -> Act {
        if let Some(acts) = &self.activations {
            return acts[l];
        }
        let last = l + 1 == self.num_layers();
        if last {
            Act::Identity
        } else {
            match self.arch {
                Arch::Gcn | Arch::GraphSage => Act::Relu,
                Arch::Gat => Act::Elu,
                Arch::Gin => Act::Identity,
            }
        }
    }

    /// Named parameter shapes in construction order.
    pub fn param_shapes(&self) -> Result<Vec<(String, (usize, usize))>> {
        self.validate()?;
        let mut shapes = Vec::new();
        for l in 0..self.num_layers() {
            let in_dim = self.layer_in(l);
            let out_dim = self.layer_dims[l + 1];
            match self.arch {
                Arch::Gcn => shapes.push((format!("layer{l}.w"), (in_dim, out_dim))),
                Arch::GraphSage => {
                    if self.sage_aggregator == SageAggregator::MaxPool {
                        shapes.push((format!("layer{l}.w_pool"), (in_dim, in_dim)));
                    }
                    shapes.push((format!("layer{l}.w"), (2 * in_dim, out_dim)));
                }
                Arch::Gat => {
                    for h in 0..self.gat_heads {
                        shapes.push((format!("layer{l}.head{h}.w"), (in_dim, out_dim)));
                        shapes.push((format!("layer{l}.head{h}.a"), (2 * out_dim, 1)));
                    }
                }
                Arch::Gin => {
                    shapes.push((format!("layer{l}.mlp.w1"), (in_dim, out_dim)));
                    shapes.push((format!("layer{l}.mlp.b1"), (1, out_dim)));
                    shapes.push((format!("layer{l}.mlp.w2"), (out_dim, out_dim)));
                    shapes.push((format!("layer{l}.mlp.b2"), (1, out_dim)));
                }
            }
        }
        Ok(shapes)
    }
}

/// Glorot-uniform initialization for weights, `U(±1/sqrt(fan))` for bias
/// rows, seeded.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
    let mut stream = rng::seeded(rng::mix(seed, 0x1217));
    let mut set = ParamSet::new();
    for (name, (rows, cols)) in cfg.param_shapes()? {
        set.push(name, init_matrix(rows, cols, &mut stream));
    }
    Ok(set)
}

pub(crate) fn init_matrix(
    rows: usize,
    cols: usize,
    stream: &mut rand_chacha::ChaCha8Rng,
) -> DenseMatrix {
    let limit = if rows == 1 {
        1.0 / (cols as f64).sqrt()
    } else {
        (6.0 / (rows + cols) as f64).sqrt()
    };
    DenseMatrix::from_fn(rows, cols, |_, _| stream.gen_range(-limit..limit))
}

/// One GCN convolution: `act(A_hat H W)` with `A_hat` the precomputed
/// symmetric-normalized adjacency with self-loops. Associated as
/// `A_hat (H W)` so wide feature matrices are projected before propagation.
pub fn gcn_layer_forward(
    h: &Variable,
    a_hat: &DenseMatrix,
    w: &Variable,
    act: Act,
) -> Result<Variable> {
    let tape_const = record_constant(h, a_hat.clone());
    let projected = ops::matmul(h, w)?;
    let propagated = ops::matmul(&tape_const, &projected)?;
    ops::activation(&propagated, act)
}

// Constants created on an operand's tape so layer functions do not need a
// Tape argument.
fn record_constant(on: &Variable, value: DenseMatrix) -> Variable {
    on.tape().constant(value)
}

/// Fixed-size neighbor sample of node `v`: `k` distinct neighbors when the
/// degree allows it, otherwise `k` uniform draws with replacement. Isolated
/// nodes fall back to `k` copies of `v` itself.
pub fn sage_sample_neighbors(g: &Graph, v: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    let nbrs = g.neighbors(v)?;
    let mut stream = rng::seeded(seed);
    if nbrs.is_empty() {
        return Ok(vec![v; k]);
    }
    if nbrs.len() >= k {
        // Partial Fisher-Yates over a copy: first k entries are the sample.
        let mut pool = nbrs.to_vec();
        for i in 0..k {
            let j = stream.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(k);
        Ok(pool)
    } else {
        Ok((0..k).map(|_| nbrs[stream.gen_range(0..nbrs.len())]).collect())
    }
}

/// Deterministic eval-time neighbor set: the full neighborhood when it has
/// at most `k` members, otherwise `k` distinct neighbors drawn with the
/// given (fixed) seed.
pub fn sage_eval_neighbors(g: &Graph, v: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    let nbrs = g.neighbors(v)?;
    if nbrs.is_empty() {
        return Ok(vec![v]);
    }
    if nbrs.len() <= k {
        Ok(nbrs.to_vec())
    } else {
        sage_sample_neighbors(g, v, k, seed)
    }
}

/// One GraphSAGE layer: aggregate each node's sampled neighbor rows,
/// concatenate with the node's own row, then project and activate. Mean
/// aggregation averages previous-layer rows; max-pooling takes the
/// elementwise max of relu-transformed rows and needs `pool_w`.
pub fn sage_layer_forward(
    h_prev: &Variable,
    samples: &[Vec<usize>],
    w: &Variable,
    aggregator: SageAggregator,
    pool_w: Option<&Variable>,
    act: Act,
) -> Result<Variable> {
    let n = h_prev.rows();
    if samples.len() != n {
        return Err(Error::Shape(format!(
            "{} sample sets for {n} nodes",
            samples.len()
        )));
    }
    let aggregated = match aggregator {
        SageAggregator::Mean => {
            // Multiset mean as a constant row-averaging operator.
            let mut op = DenseMatrix::zeros(n, n);
            for (v, sample) in samples.iter().enumerate() {
                if sample.is_empty() {
                    return Err(Error::Validation(format!("empty sample set for node {v}")));
                }
                let share = 1.0 / sample.len() as f64;
                for &u in sample {
                    op.set(v, u, op.get(v, u) + share);
                }
            }
            let op = record_constant(h_prev, op);
            ops::matmul(&op, h_prev)?
        }
        SageAggregator::MaxPool => {
            let pool_w = pool_w.ok_or_else(|| {
                Error::Validation("max-pool aggregation needs pool weights".into())
            })?;
            let transformed = ops::activation(&ops::matmul(h_prev, pool_w)?, Act::Relu)?;
            ops::rows_max_gather(&transformed, samples)?
        }
    };
    let joined = ops::concat_cols(h_prev, &aggregated)?;
    let projected = ops::matmul(&joined, w)?;
    ops::activation(&projected, act)
}

/// Attention coefficients of one GAT head: for every target `v` and source
/// `u` in `N(v) ∪ {v}`, softmax over `leaky_relu(aᵀ [W h_v || W h_u])`.
/// Rows index targets; each row sums to one over its neighborhood.
pub fn gat_attention_coeffs(
    h_prev: &Variable,
    w: &Variable,
    a: &Variable,
    g: &Graph,
    slope: f64,
) -> Result<Variable> {
    let n = g.num_nodes();
    if h_prev.rows() != n {
        return Err(Error::Shape(format!(
            "{} feature rows for {n} nodes",
            h_prev.rows()
        )));
    }
    let out_dim = w.cols();
    if a.shape() != (2 * out_dim, 1) {
        return Err(Error::Shape(format!(
            "attention vector {:?}, expected {:?}",
            a.shape(),
            (2 * out_dim, 1)
        )));
    }
    let hw = ops::matmul(h_prev, w)?;
    let a_self = ops::slice_rows(a, 0, out_dim)?;
    let a_nbr = ops::slice_rows(a, out_dim, 2 * out_dim)?;
    // Score of (target v, source u) splits as a_selfᵀ(Wh_v) + a_nbrᵀ(Wh_u).
    let target_part = ops::matmul(&hw, &a_self)?;
    let source_part = ops::matmul(&hw, &a_nbr)?;
    let scores = ops::pairwise_sum(&target_part, &source_part)?;
    let scores = ops::activation(&scores, Act::LeakyRelu(slope))?;

    let mut mask = BoolMatrix::filled(n, n, false);
    for v in 0..n {
        mask.set(v, v, true);
        for &u in g.neighbors(v)? {
            mask.set(v, u, true);
        }
    }
    ops::softmax_rows(&scores, Some(&mask))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadCombine {
    /// Activate each head then concatenate columns (hidden layers).
    Concat,
    /// Average head outputs then activate (output layer).
    Average,
}

/// One (multi-head) GAT layer over precomputed per-head attention
/// coefficients: `h_v = act(Σ_u α_{uv} W h_u)` per head, heads combined per
/// `combine`.
pub fn gat_layer_forward(
    h_prev: &Variable,
    heads: &[(Variable, Variable)],
    act: Act,
    combine: HeadCombine,
) -> Result<Variable> {
    if heads.is_empty() {
        return Err(Error::Validation("gat layer needs at least one head".into()));
    }
    let mut outputs = Vec::with_capacity(heads.len());
    for (coeffs, w) in heads {
        let hw = ops::matmul(h_prev, w)?;
        outputs.push(ops::matmul(coeffs, &hw)?);
    }
    match combine {
        HeadCombine::Concat => {
            let mut acc: Option<Variable> = None;
            for out in &outputs {
                let activated = ops::activation(out, act)?;
                acc = Some(match acc {
                    None => activated,
                    Some(prev) => ops::concat_cols(&prev, &activated)?,
                });
            }
            Ok(acc.expect("at least one head"))
        }
        HeadCombine::Average => {
            let mut acc = outputs[0].clone();
            for out in &outputs[1..] {
                acc = ops::add(&acc, out)?;
            }
            let mean = ops::scale(&acc, 1.0 / outputs.len() as f64)?;
            ops::activation(&mean, act)
        }
    }
}

/// Two affine layers with a relu between; the GIN update MLP. Biases keep
/// all-zero feature rows (a legal FeatureMask output) from collapsing to
/// exactly-zero embeddings.
pub struct GinMlp<'a> {
    pub w1: &'a Variable,
    pub b1: &'a Variable,
    pub w2: &'a Variable,
    pub b2: &'a Variable,
}

/// One GIN layer: `MLP((1 + eps) h_v + Σ_{u∈N(v)} h_u)`. `a_plain` is the
/// raw 0/1 adjacency without self-loops.
pub fn gin_layer_forward(
    h_prev: &Variable,
    a_plain: &DenseMatrix,
    mlp: &GinMlp<'_>,
    eps: f64,
) -> Result<Variable> {
    let adj = record_constant(h_prev, a_plain.clone());
    let neighbor_sum = ops::matmul(&adj, h_prev)?;
    let self_term = ops::scale(h_prev, 1.0 + eps)?;
    let pre = ops::add(&self_term, &neighbor_sum)?;
    let hidden = ops::add_bias(&ops::matmul(&pre, mlp.w1)?, mlp.b1)?;
    let hidden = ops::activation(&hidden, Act::Relu)?;
    ops::add_bias(&ops::matmul(&hidden, mlp.w2)?, mlp.b2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A complete forward pass: the logits plus the leaf variables of every
/// parameter, in `ParamSet` order, for optimizer write-back.
pub struct ForwardPass {
    pub logits: Variable,
    pub param_vars: Vec<Variable>,
}

/// Stacks layers per the config. Dropout applies to each layer's input in
/// train mode only; GraphSAGE resamples neighborhoods per forward in train
/// mode and uses capped full neighborhoods with a fixed stream in eval mode.
pub fn model_forward(
    cfg: &ModelConfig,
    params: &ParamSet,
    g: &Graph,
    mode: Mode,
    seed: u64,
) -> Result<ForwardPass> {
    cfg.validate()?;
    let expected = cfg.param_shapes()?;
    if params.len() != expected.len() || params.shapes() != expected.iter().map(|e| e.1).collect::<Vec<_>>() {
        return Err(Error::Validation(format!(
            "parameter set does not match config: expected {:?}, got {:?}",
            expected,
            params.names().zip(params.shapes()).collect::<Vec<_>>()
        )));
    }
    if cfg.layer_dims[0] != g.feature_dim() {
        return Err(Error::Validation(format!(
            "model expects {} input features, graph has {}",
            cfg.layer_dims[0],
            g.feature_dim()
        )));
    }

    let tape = Tape::new();
    let requires_grad = mode == Mode::Train;
    let param_vars: Vec<Variable> = params
        .matrices()
        .map(|m| tape.var(m.clone(), requires_grad))
        .collect();
    let mut next_param = 0usize;
    let mut take_param = || {
        let v = param_vars[next_param].clone();
        next_param += 1;
        v
    };

    // Graph-level constants, built once per forward.
    let a_hat = match cfg.arch {
        Arch::Gcn => Some(normalized_adjacency_with_self_loops(g)),
        _ => None,
    };
    let a_plain = match cfg.arch {
        Arch::Gin => Some(adjacency_matrix(g, false)),
        _ => None,
    };

    let mut h = tape.constant(g.features().clone());
    for l in 0..cfg.num_layers() {
        if mode == Mode::Train && cfg.dropout > 0.0 {
            h = apply_dropout(&h, cfg.dropout, rng::mix_all(seed, &[0xD0, l as u64]))?;
        }
        let act = cfg.activation_for(l);
        h = match cfg.arch {
            Arch::Gcn => {
                let w = take_param();
                gcn_layer_forward(&h, a_hat.as_ref().expect("gcn constant"), &w, act)?
            }
            Arch::GraphSage => {
                let pool_w = (cfg.sage_aggregator == SageAggregator::MaxPool)
                    .then(&mut take_param);
                let w = take_param();
                let samples = sample_all_neighbors(g, cfg.sage_k, mode, seed, l)?;
                sage_layer_forward(&h, &samples, &w, cfg.sage_aggregator, pool_w.as_ref(), act)?
            }
            Arch::Gat => {
                let mut heads = Vec::with_capacity(cfg.gat_heads);
                for _ in 0..cfg.gat_heads {
                    let w = take_param();
                    let a = take_param();
                    let coeffs = gat_attention_coeffs(&h, &w, &a, g, cfg.gat_slope)?;
                    heads.push((coeffs, w));
                }
                let combine = if l + 1 == cfg.num_layers() {
                    HeadCombine::Average
                } else {
                    HeadCombine::Concat
                };
                gat_layer_forward(&h, &heads, act, combine)?
            }
            Arch::Gin => {
                let w1 = take_param();
                let b1 = take_param();
                let w2 = take_param();
                let b2 = take_param();
                let mlp = GinMlp {
                    w1: &w1,
                    b1: &b1,
                    w2: &w2,
                    b2: &b2,
                };
                let out =
                    gin_layer_forward(&h, a_plain.as_ref().expect("gin constant"), &mlp, 0.0)?;
                ops::activation(&out, act)?
            }
        };
    }
    Ok(ForwardPass {
        logits: h,
        param_vars,
    })
}

fn sample_all_neighbors(
    g: &Graph,
    k: usize,
    mode: Mode,
    seed: u64,
    layer: usize,
) -> Result<Vec<Vec<usize>>> {
    (0..g.num_nodes())
        .map(|v| {
            let node_seed = rng::mix_all(seed, &[0x5A, layer as u64, v as u64]);
            match mode {
                Mode::Train => sage_sample_neighbors(g, v, k, node_seed),
                Mode::Eval => sage_eval_neighbors(g, v, k, node_seed),
            }
        })
        .collect()
}

/// Inverted dropout: entries survive with probability `1 - p` and are
/// scaled by `1/(1-p)`.
fn apply_dropout(h: &Variable, p: f64, seed: u64) -> Result<Variable> {
    let (rows, cols) = h.shape();
    let mut stream = rng::seeded(seed);
    let keep = 1.0 - p;
    let mask = DenseMatrix::from_fn(rows, cols, |_, _| {
        if stream.gen::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    });
    ops::mul_mask(h, &mask)
}
