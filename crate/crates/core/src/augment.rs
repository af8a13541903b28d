//! Graph data augmentations.
//!
//! Six augmentations share one contract: they take a graph and return a new
//! graph with the same node count and the same label/mask vectors, so that
//! downstream training can keep using the original index space.
//!
//! * `fdm` scales each node's feature row by `d_i * sigmoid(alpha * d_i)`,
//!   with degrees taken from the plain adjacency (no self-loops).
//! * `fana` replaces feature rows by their symmetric-normalized neighborhood
//!   aggregate, either per-row with probability `p` (stochastic) or as the
//!   exact convex combination `p*A_hat*X + (1-p)*X` (expected).
//! * `edge_remove`, `feature_mask`, `node_drop`, `random_walk_sample` are
//!   the conventional stochastic baselines.
//!
//! All stochastic augmentations are pure functions of
//! `(graph, hyperparameters, seed)`.

use rand::Rng;
use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency_with_self_loops, Graph};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanaMode {
    Stochastic,
    Expected,
}

/// Serializable description of one augmentation: the pool entries of the
/// contrastive pipeline and the `--spec` argument of the CLI.
#[derive(Clone, Debug, PartialEq)]
pub enum AugmenterSpec {
    Identity,
    EdgeRemove { p: f64, seed: u64 },
    FeatureMask { p: f64, seed: u64 },
    NodeDrop { p: f64, seed: u64 },
    RandomWalkSample { keep_ratio: f64, seed: u64 },
    Fdm { alpha: f64 },
    Fana { p: f64, mode: FanaMode, seed: u64 },
}

impl AugmenterSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AugmenterSpec::Identity => "identity",
            AugmenterSpec::EdgeRemove { .. } => "edge_remove",
            AugmenterSpec::FeatureMask { .. } => "feature_mask",
            AugmenterSpec::NodeDrop { .. } => "node_drop",
            AugmenterSpec::RandomWalkSample { .. } => "random_walk_sample",
            AugmenterSpec::Fdm { .. } => "fdm",
            AugmenterSpec::Fana { .. } => "fana",
        }
    }

    /// True when repeated applications with the same inputs draw no random
    /// numbers at all.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self,
            AugmenterSpec::Identity
                | AugmenterSpec::Fdm { .. }
                | AugmenterSpec::Fana {
                    mode: FanaMode::Expected,
                    ..
                }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        match *self {
            AugmenterSpec::Identity => Ok(()),
            AugmenterSpec::EdgeRemove { p, .. }
            | AugmenterSpec::FeatureMask { p, .. }
            | AugmenterSpec::NodeDrop { p, .. } => {
                if prob_ok(p) {
                    Ok(())
                } else {
                    Err(Error::Validation(format!("probability {p} outside [0,1]")))
                }
            }
            AugmenterSpec::RandomWalkSample { keep_ratio, .. } => {
                if keep_ratio > 0.0 && keep_ratio <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "keep_ratio {keep_ratio} outside (0,1]"
                    )))
                }
            }
            AugmenterSpec::Fdm { alpha } => {
                if alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Validation("alpha must be finite".into()))
                }
            }
            AugmenterSpec::Fana { p, .. } => {
                if prob_ok(p) {
                    Ok(())
                } else {
                    Err(Error::Validation(format!("probability {p} outside [0,1]")))
                }
            }
        }
    }

    /// Copy of this spec with its seed replaced; deterministic kinds are
    /// returned unchanged.
    pub fn with_seed(&self, seed: u64) -> AugmenterSpec {
        let mut spec = self.clone();
        match &mut spec {
            AugmenterSpec::EdgeRemove { seed: s, .. }
            | AugmenterSpec::FeatureMask { seed: s, .. }
            | AugmenterSpec::NodeDrop { seed: s, .. }
            | AugmenterSpec::RandomWalkSample { seed: s, .. }
            | AugmenterSpec::Fana { seed: s, .. } => *s = seed,
            AugmenterSpec::Identity | AugmenterSpec::Fdm { .. } => {}
        }
        spec
    }
}

// AugmenterSpec serializes as a flat tagged object, e.g.
// {"kind": "fana", "p": 0.5, "mode": "stochastic", "seed": 7}.
// Hand-rolled so unknown fields and hyperparameters on the wrong kind are
// rejected, which `serde(tag = ...)` cannot enforce.
impl Serialize for AugmenterSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            AugmenterSpec::Identity => {
                let mut st = serializer.serialize_struct("AugmenterSpec", 1)?;
                st.serialize_field("kind", "identity")?;
                st.end()
            }
            AugmenterSpec::EdgeRemove { p, seed }
            | AugmenterSpec::FeatureMask { p, seed }
            | AugmenterSpec::NodeDrop { p, seed } => {
                let mut st = serializer.serialize_struct("AugmenterSpec", 3)?;
                st.serialize_field("kind", self.kind_name())?;
                st.serialize_field("p", &p)?;
                st.serialize_field("seed", &seed)?;
                st.end()
            }
            AugmenterSpec::RandomWalkSample { keep_ratio, seed } => {
                let mut st = serializer.serialize_struct("AugmenterSpec", 3)?;
                st.serialize_field("kind", "random_walk_sample")?;
                st.serialize_field("keep_ratio", &keep_ratio)?;
                st.serialize_field("seed", &seed)?;
                st.end()
            }
            AugmenterSpec::Fdm { alpha } => {
                let mut st = serializer.serialize_struct("AugmenterSpec", 2)?;
                st.serialize_field("kind", "fdm")?;
                st.serialize_field("alpha", &alpha)?;
                st.end()
            }
            AugmenterSpec::Fana { p, mode, seed } => {
                let mut st = serializer.serialize_struct("AugmenterSpec", 4)?;
                st.serialize_field("kind", "fana")?;
                st.serialize_field("p", &p)?;
                st.serialize_field("mode", &mode)?;
                st.serialize_field("seed", &seed)?;
                st.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRaw {
    kind: String,
    alpha: Option<f64>,
    p: Option<f64>,
    keep_ratio: Option<f64>,
    mode: Option<FanaMode>,
    seed: Option<u64>,
}

impl<'de> Deserialize<'de> for AugmenterSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = SpecRaw::deserialize(deserializer)?;
        let reject_extras = |allowed: &[&str]| -> std::result::Result<(), D::Error> {
            for (name, present) in [
                ("alpha", raw.alpha.is_some()),
                ("p", raw.p.is_some()),
                ("keep_ratio", raw.keep_ratio.is_some()),
                ("mode", raw.mode.is_some()),
                ("seed", raw.seed.is_some()),
            ] {
                if present && !allowed.contains(&name) {
                    return Err(D::Error::custom(format!(
                        "field `{name}` is not valid for kind `{}`",
                        raw.kind
                    )));
                }
            }
            Ok(())
        };
        let need_p = || raw.p.ok_or_else(|| D::Error::missing_field("p"));
        let seed = raw.seed.unwrap_or(0);
        let spec = match raw.kind.as_str() {
            "identity" => {
                reject_extras(&[])?;
                AugmenterSpec::Identity
            }
            "edge_remove" => {
                reject_extras(&["p", "seed"])?;
                AugmenterSpec::EdgeRemove { p: need_p()?, seed }
            }
            "feature_mask" => {
                reject_extras(&["p", "seed"])?;
                AugmenterSpec::FeatureMask { p: need_p()?, seed }
            }
            "node_drop" => {
                reject_extras(&["p", "seed"])?;
                AugmenterSpec::NodeDrop { p: need_p()?, seed }
            }
            "random_walk_sample" => {
                reject_extras(&["keep_ratio", "seed"])?;
                AugmenterSpec::RandomWalkSample {
                    keep_ratio: raw
                        .keep_ratio
                        .ok_or_else(|| D::Error::missing_field("keep_ratio"))?,
                    seed,
                }
            }
            "fdm" => {
                reject_extras(&["alpha"])?;
                AugmenterSpec::Fdm {
                    alpha: raw.alpha.ok_or_else(|| D::Error::missing_field("alpha"))?,
                }
            }
            "fana" => {
                reject_extras(&["p", "mode", "seed"])?;
                AugmenterSpec::Fana {
                    p: need_p()?,
                    mode: raw.mode.unwrap_or(FanaMode::Stochastic),
                    seed,
                }
            }
            other => {
                return Err(D::Error::custom(format!("unknown augmentation kind `{other}`")))
            }
        };
        spec.validate().map_err(|e| D::Error::custom(e.to_string()))?;
        Ok(spec)
    }
}

/// Per-node degrees and their sigmoid multipliers, exposed for inspection
/// and oracle tests.
#[derive(Clone, Debug, PartialEq)]
pub struct FdmMultipliers {
    pub degrees: Vec<f64>,
    pub multipliers: Vec<f64>,
}

pub fn fdm_multipliers(g: &Graph, alpha: f64) -> FdmMultipliers {
    let degrees: Vec<f64> = (0..g.num_nodes()).map(|v| g.degree(v) as f64).collect();
    let multipliers = degrees
        .iter()
        .map(|&d| 1.0 / (1.0 + (-alpha * d).exp()))
        .collect();
    FdmMultipliers {
        degrees,
        multipliers,
    }
}

/// Feature augmentation with degree multiplication:
/// `x'_ij = x_ij * d_i * sigmoid(alpha * d_i)`. Deterministic; topology,
/// labels, and masks are untouched. Isolated nodes end up with zero rows.
pub fn fdm(g: &Graph, alpha: f64) -> Result<Graph> {
    if !alpha.is_finite() {
        return Err(Error::Validation("alpha must be finite".into()));
    }
    let m = fdm_multipliers(g, alpha);
    let mut features = g.features().clone();
    for i in 0..g.num_nodes() {
        let scale = m.degrees[i] * m.multipliers[i];
        for v in features.row_mut(i) {
            *v *= scale;
        }
    }
    g.replace_features(features)
}

/// Feature aggregation with normalized adjacency. Both modes share
/// `A_hat = D^{-1/2}(A+I)D^{-1/2}` with `D` the degree matrix of `A+I`.
/// Stochastic mode replaces row `i` by `(A_hat X)_i` when the i-th draw of
/// the seeded stream falls below `p`; expected mode returns
/// `p*A_hat*X + (1-p)*X` exactly.
pub fn fana(g: &Graph, p: f64, mode: FanaMode, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0,1]")));
    }
    let a_hat = normalized_adjacency_with_self_loops(g);
    let aggregated = a_hat.matmul(g.features())?;
    let features = match mode {
        FanaMode::Expected => aggregated
            .scale(p)
            .add(&g.features().scale(1.0 - p))
            .expect("same shape"),
        FanaMode::Stochastic => {
            let mut stream = rng::seeded(seed);
            let mut out = g.features().clone();
            for i in 0..g.num_nodes() {
                let r: f64 = stream.gen();
                if r < p {
                    out.row_mut(i).copy_from_slice(aggregated.row(i));
                }
            }
            out
        }
    };
    g.replace_features(features)
}

/// Deletes each edge independently with probability `p`.
pub fn edge_remove(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0,1]")));
    }
    let mut stream = rng::seeded(seed);
    let kept: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| stream.gen::<f64>() >= p)
        .collect();
    g.replace_edges(kept)
}

/// Zeroes each feature column independently with probability `p`.
pub fn feature_mask(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0,1]")));
    }
    let mut stream = rng::seeded(seed);
    let mut features = g.features().clone();
    for j in 0..features.cols() {
        if stream.gen::<f64>() < p {
            for i in 0..features.rows() {
                features.set(i, j, 0.0);
            }
        }
    }
    g.replace_features(features)
}

/// Per-entry variant of feature masking, kept for sensitivity checks.
pub fn feature_mask_per_entry(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0,1]")));
    }
    let mut stream = rng::seeded(seed);
    let features = g.features().map(|v| {
        if stream.gen::<f64>() < p {
            0.0
        } else {
            v
        }
    });
    g.replace_features(features)
}

/// Marks each node dropped with probability `p`; dropped nodes lose their
/// feature rows (zeroed) and incident edges, but the index space is
/// preserved. Nodes in any train/val/test mask are never dropped.
pub fn node_drop(g: &Graph, p: f64, seed: u64) -> Result<Graph> {
    node_drop_with(g, p, seed, true)
}

/// `node_drop` with the mask-protection rule made explicit.
pub fn node_drop_with(g: &Graph, p: f64, seed: u64, protect_masked: bool) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0,1]")));
    }
    let mut stream = rng::seeded(seed);
    let mut dropped = vec![false; g.num_nodes()];
    for flag in dropped.iter_mut() {
        // Draw unconditionally so the stream does not depend on masks.
        let r: f64 = stream.gen();
        *flag = r < p;
    }
    if protect_masked {
        for (v, flag) in dropped.iter_mut().enumerate() {
            if g.in_any_mask(v) {
                *flag = false;
            }
        }
    }
    zero_out_nodes(g, &dropped)
}

/// Seeded random walk until `ceil(keep_ratio * N)` distinct nodes are
/// visited or `10 * N` steps elapse; dead ends restart at a fresh uniform
/// node. Non-visited nodes are treated as dropped.
pub fn random_walk_sample(g: &Graph, keep_ratio: f64, seed: u64) -> Result<Graph> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::Validation(format!(
            "keep_ratio {keep_ratio} outside (0,1]"
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::Validation(
            "random walk sampling needs at least one edge".into(),
        ));
    }
    let n = g.num_nodes();
    let target = (keep_ratio * n as f64).ceil() as usize;
    let mut stream = rng::seeded(seed);
    let mut visited = vec![false; n];
    let mut num_visited = 1usize;
    let mut cur = stream.gen_range(0..n);
    visited[cur] = true;
    let mut steps = 0usize;
    while num_visited < target && steps < 10 * n {
        steps += 1;
        let nbrs = g.neighbors(cur)?;
        cur = if nbrs.is_empty() {
            stream.gen_range(0..n)
        } else {
            nbrs[stream.gen_range(0..nbrs.len())]
        };
        if !visited[cur] {
            visited[cur] = true;
            num_visited += 1;
        }
    }
    let dropped: Vec<bool> = visited.iter().map(|&v| !v).collect();
    zero_out_nodes(g, &dropped)
}

fn zero_out_nodes(g: &Graph, dropped: &[bool]) -> Result<Graph> {
    let mut features = g.features().clone();
    for (v, &is_dropped) in dropped.iter().enumerate() {
        if is_dropped {
            features.row_mut(v).fill(0.0);
        }
    }
    let kept_edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|&(u, v)| !dropped[u] && !dropped[v])
        .collect();
    g.replace_edges(kept_edges)?.replace_features(features)
}

/// Dispatches a spec to its augmentation.
pub fn apply(spec: &AugmenterSpec, g: &Graph) -> Result<Graph> {
    spec.validate()?;
    match *spec {
        AugmenterSpec::Identity => Ok(g.clone()),
        AugmenterSpec::EdgeRemove { p, seed } => edge_remove(g, p, seed),
        AugmenterSpec::FeatureMask { p, seed } => feature_mask(g, p, seed),
        AugmenterSpec::NodeDrop { p, seed } => node_drop(g, p, seed),
        AugmenterSpec::RandomWalkSample { keep_ratio, seed } => {
            random_walk_sample(g, keep_ratio, seed)
        }
        AugmenterSpec::Fdm { alpha } => fdm(g, alpha),
        AugmenterSpec::Fana { p, mode, seed } => fana(g, p, mode, seed),
    }
}

/// `apply` with the spec's own seed replaced by `seed`; used by the
/// per-epoch training protocol and by pool sampling.
pub fn apply_with_seed(spec: &AugmenterSpec, g: &Graph, seed: u64) -> Result<Graph> {
    apply(&spec.with_seed(seed), g)
}

/// Draws two specs uniformly (with replacement, so identical pairs are
/// possible) from the pool and applies each with a derived sub-seed.
pub fn sample_pair_from_pool(
    pool: &[AugmenterSpec],
    g: &Graph,
    seed: u64,
) -> Result<(Graph, Graph)> {
    let (spec_i, spec_j) = sample_pair_specs(pool, seed)?;
    let view_i = apply_with_seed(&spec_i, g, rng::mix(seed, 1))?;
    let view_j = apply_with_seed(&spec_j, g, rng::mix(seed, 2))?;
    Ok((view_i, view_j))
}

/// The spec choices underlying `sample_pair_from_pool`, exposed so callers
/// can log which pair was drawn.
pub fn sample_pair_specs(
    pool: &[AugmenterSpec],
    seed: u64,
) -> Result<(AugmenterSpec, AugmenterSpec)> {
    if pool.is_empty() {
        return Err(Error::Validation("augmentation pool is empty".into()));
    }
    let mut stream = rng::seeded(rng::mix(seed, 0));
    let i = stream.gen_range(0..pool.len());
    let j = stream.gen_range(0..pool.len());
    Ok((pool[i].clone(), pool[j].clone()))
}
