//! Undirected graph representation and its derived matrices.
//!
//! Graphs are simple and undirected: edges are stored once in canonical
//! `(min, max)` order, self-loop edges are permitted. The node feature
//! matrix always has one row per node, and optional label/mask vectors stay
//! aligned with node indices across every augmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    labels: Option<Vec<usize>>,
    train_mask: Option<Vec<bool>>,
    val_mask: Option<Vec<bool>>,
    test_mask: Option<Vec<bool>>,
    /// Sorted neighbor lists, rebuilt on construction.
    adj: Vec<Vec<usize>>,
}

/// Per-dataset summary used to cross-check loaded files against published
/// statistics. Mismatches are reported as warnings, never errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetStats {
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    pub classes: usize,
    #[serde(default)]
    pub category: String,
}

impl DatasetStats {
    /// Human-readable diff against expected statistics, `None` when they agree.
    pub fn mismatch(&self, expected: &DatasetStats) -> Option<String> {
        let mut diffs = Vec::new();
        for (name, got, want) in [
            ("nodes", self.nodes, expected.nodes),
            ("edges", self.edges, expected.edges),
            ("features", self.features, expected.features),
            ("classes", self.classes, expected.classes),
        ] {
            if got != want {
                diffs.push(format!("{name}: file has {got}, expected {want}"));
            }
        }
        if diffs.is_empty() {
            None
        } else {
            Some(diffs.join("; "))
        }
    }
}

impl Graph {
    /// Builds a graph from raw undirected edges. Edges are canonicalized to
    /// `(min, max)` order and deduplicated; endpoints are range-checked.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                num_nodes
            )));
        }
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        let adj = build_adjacency(num_nodes, &canon);
        Ok(Graph {
            num_nodes,
            edges: canon,
            features,
            labels: None,
            train_mask: None,
            val_mask: None,
            test_mask: None,
            adj,
        })
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::Validation(format!(
                "label vector of length {} for {} nodes",
                labels.len(),
                self.num_nodes
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches train/val/test masks; they must be pairwise disjoint.
    pub fn with_masks(
        mut self,
        train: Vec<bool>,
        val: Vec<bool>,
        test: Vec<bool>,
    ) -> Result<Self> {
        for (name, m) in [("train", &train), ("val", &val), ("test", &test)] {
            if m.len() != self.num_nodes {
                return Err(Error::Validation(format!(
                    "{name} mask of length {} for {} nodes",
                    m.len(),
                    self.num_nodes
                )));
            }
        }
        for i in 0..self.num_nodes {
            let hits = train[i] as u8 + val[i] as u8 + test[i] as u8;
            if hits > 1 {
                return Err(Error::Validation(format!(
                    "node {i} appears in more than one of train/val/test masks"
                )));
            }
        }
        self.train_mask = Some(train);
        self.val_mask = Some(val);
        self.test_mask = Some(test);
        Ok(self)
    }

    /// Same topology and metadata, different features. The replacement must
    /// keep the row count.
    pub fn replace_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes || features.cols() != self.features.cols() {
            return Err(Error::Shape(format!(
                "replacement features {}x{} for graph with {}x{}",
                features.rows(),
                features.cols(),
                self.num_nodes,
                self.features.cols()
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    /// Same nodes, features, and metadata, different edge set.
    pub fn replace_edges(&self, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut g = Graph::new(self.num_nodes, edges, self.features.clone())?;
        g.labels = self.labels.clone();
        g.train_mask = self.train_mask.clone();
        g.val_mask = self.val_mask.clone();
        g.test_mask = self.test_mask.clone();
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn train_mask(&self) -> Option<&[bool]> {
        self.train_mask.as_deref()
    }

    pub fn val_mask(&self) -> Option<&[bool]> {
        self.val_mask.as_deref()
    }

    pub fn test_mask(&self) -> Option<&[bool]> {
        self.test_mask.as_deref()
    }

    /// True when `v` is in any of the train/val/test masks.
    pub fn in_any_mask(&self, v: usize) -> bool {
        [&self.train_mask, &self.val_mask, &self.test_mask]
            .into_iter()
            .flatten()
            .any(|m| m[v])
    }

    /// Sorted neighbor set of `v`. Excludes `v` itself unless a self-loop
    /// edge is stored.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.adj.get(v).map(Vec::as_slice).ok_or(Error::Index {
            what: "node",
            index: v,
            size: self.num_nodes,
        })
    }

    /// Row-sum degree of `v` in the self-loop-free sense: a stored self-loop
    /// contributes one, matching the adjacency-matrix row sum.
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn stats(&self) -> DatasetStats {
        let classes = self.labels.as_ref().map_or(0, |ls| {
            let mut seen: Vec<usize> = ls.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        });
        DatasetStats {
            nodes: self.num_nodes,
            edges: self.edges.len(),
            features: self.features.cols(),
            classes,
            category: String::new(),
        }
    }
}

fn build_adjacency(num_nodes: usize, canon_edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(u, v) in canon_edges {
        adj[u].push(v);
        if u != v {
            adj[v].push(u);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

/// Dense 0/1 adjacency matrix. With `self_loops` the whole diagonal is set
/// to one (the "adjacency matrix with added self-connections").
pub fn adjacency_matrix(g: &Graph, self_loops: bool) -> DenseMatrix {
    let n = g.num_nodes();
    let mut a = DenseMatrix::zeros(n, n);
    for &(u, v) in g.edges() {
        a.set(u, v, 1.0);
        a.set(v, u, 1.0);
    }
    if self_loops {
        for i in 0..n {
            a.set(i, i, 1.0);
        }
    }
    a
}

/// Diagonal degree matrix with `D[i][i] = Σ_j A[i][j]`.
pub fn degree_matrix(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::Shape(format!(
            "degree matrix needs a square input, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut d = DenseMatrix::zeros(n, n);
    for i in 0..n {
        d.set(i, i, a.row(i).iter().sum());
    }
    Ok(d)
}

/// Symmetric normalization `D^{-1/2} A D^{-1/2}`. Zero-degree rows map to
/// zero rows (convention 0^{-1/2}·0 := 0) so isolated nodes created by
/// edge removal or node dropping stay representable.
pub fn sym_normalize(a: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() || d.rows() != d.cols() || a.rows() != d.rows() {
        return Err(Error::Shape(format!(
            "sym_normalize on A {}x{} and D {}x{}",
            a.rows(),
            a.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let n = a.rows();
    let mut degrees = vec![0.0; n];
    for i in 0..n {
        let deg = d.get(i, i);
        if deg < 0.0 {
            return Err(Error::Validation(format!(
                "negative degree {deg} at diagonal entry {i}"
            )));
        }
        degrees[i] = deg;
    }
    // Entrywise a_ij / sqrt(d_i d_j): one square root per entry keeps the
    // result exact whenever d_i * d_j is a perfect square.
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            if v != 0.0 {
                let denom = (degrees[i] * degrees[j]).sqrt();
                if denom > 0.0 {
                    out.set(i, j, v / denom);
                }
            }
        }
    }
    Ok(out)
}

/// The normalized adjacency with self-loops used by GCN and FANA:
/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency_with_self_loops(g: &Graph) -> DenseMatrix {
    let a = adjacency_matrix(g, true);
    let d = degree_matrix(&a).expect("adjacency matrix is square");
    sym_normalize(&a, &d).expect("degrees of A+I are positive")
}
