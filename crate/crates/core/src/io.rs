//! Graph file formats.
//!
//! Two formats are supported:
//!
//! * `graph-json` — a single UTF-8 JSON object carrying nodes, edges,
//!   features, and optional labels/masks. Lossless for every `Graph`.
//! * `edge-list+csv` — a whitespace-delimited edge file (`u v` per line)
//!   next to a CSV whose row `i` holds node `i`'s features, with an
//!   optional final `label` column. The pair is addressed by a common stem:
//!   `<stem>.edges` and `<stem>.csv`. Masks are not representable here.
//!
//! All writes use `\n` line endings and shortest-round-trip float
//! formatting, so `load(save(g))` reproduces `g` bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum GraphFormat {
    #[default]
    GraphJson,
    EdgeListCsv,
}

/// A loaded graph plus any non-fatal warnings (directed duplicates
/// symmetrized, dataset statistics mismatches, and the like).
#[derive(Debug)]
pub struct Loaded {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    num_nodes: usize,
    edges: Vec<[usize; 2]>,
    features: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    train_mask: Option<Vec<bool>>,
    val_mask: Option<Vec<bool>>,
    test_mask: Option<Vec<bool>>,
}

pub fn load_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<Loaded> {
    match format {
        GraphFormat::GraphJson => load_graph_json(path.as_ref()),
        GraphFormat::EdgeListCsv => load_edge_list_csv(path.as_ref()),
    }
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>, format: GraphFormat) -> Result<()> {
    match format {
        GraphFormat::GraphJson => save_graph_json(g, path.as_ref()),
        GraphFormat::EdgeListCsv => save_edge_list_csv(g, path.as_ref()),
    }
}

fn load_graph_json(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let raw: GraphJson = serde_json::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let mut warnings = Vec::new();

    let features = DenseMatrix::from_rows(&raw.features)?;
    let raw_edges: Vec<(usize, usize)> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
    let mut graph = Graph::new(raw.num_nodes, raw_edges.iter().copied(), features)?;
    if graph.num_edges() < raw_edges.len() {
        warnings.push(format!(
            "{} directed/duplicate edge entries symmetrized into {} undirected edges",
            raw_edges.len(),
            graph.num_edges()
        ));
    }
    if let Some(labels) = raw.labels {
        graph = graph.with_labels(labels)?;
    }
    match (raw.train_mask, raw.val_mask, raw.test_mask) {
        (None, None, None) => {}
        (Some(tr), Some(va), Some(te)) => graph = graph.with_masks(tr, va, te)?,
        _ => {
            return Err(Error::Validation(
                "train/val/test masks must be given together or not at all".into(),
            ))
        }
    }
    Ok(Loaded { graph, warnings })
}

fn save_graph_json(g: &Graph, path: &Path) -> Result<()> {
    let raw = GraphJson {
        num_nodes: g.num_nodes(),
        edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        features: g.features().to_rows(),
        labels: g.labels().map(<[usize]>::to_vec),
        train_mask: g.train_mask().map(<[bool]>::to_vec),
        val_mask: g.val_mask().map(<[bool]>::to_vec),
        test_mask: g.test_mask().map(<[bool]>::to_vec),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("graph serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Resolves the `<stem>.edges` / `<stem>.csv` pair from a user-supplied path
/// that may be the stem or either member of the pair.
fn csv_pair(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("edges") | Some("csv") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    (stem.with_extension("edges"), stem.with_extension("csv"))
}

fn load_edge_list_csv(path: &Path) -> Result<Loaded> {
    let (edge_path, csv_path) = csv_pair(path);
    let csv_text = fs::read_to_string(&csv_path)
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let mut lines = csv_text.lines().enumerate().peekable();
    // Header detection: a first line with any non-numeric field is a header;
    // a trailing "label" column marks per-node labels.
    let mut has_labels = false;
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split(',').map(str::trim).collect();
        if fields.iter().any(|f| f.parse::<f64>().is_err()) {
            has_labels = fields.last() == Some(&"label");
            lines.next();
        }
    }

    let mut feature_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if has_labels {
            let raw = fields.pop().ok_or_else(|| {
                Error::format(
                    csv_path.display().to_string(),
                    format!("line {}: missing label column", lineno + 1),
                )
            })?;
            labels.push(raw.parse::<usize>().map_err(|_| {
                Error::format(
                    csv_path.display().to_string(),
                    format!("line {}: label `{raw}` is not a nonnegative integer", lineno + 1),
                )
            })?);
        }
        let row: Vec<f64> = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::format(
                        csv_path.display().to_string(),
                        format!("line {}: `{f}` is not a number", lineno + 1),
                    )
                })
            })
            .collect::<Result<_>>()?;
        feature_rows.push(row);
    }
    let num_nodes = feature_rows.len();
    let features = DenseMatrix::from_rows(&feature_rows)?;

    let edge_text = fs::read_to_string(&edge_path)
        .map_err(|e| Error::io(edge_path.display().to_string(), e))?;
    let mut raw_edges = Vec::new();
    for (lineno, line) in edge_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            let tok = tok.ok_or_else(|| {
                Error::format(
                    edge_path.display().to_string(),
                    format!("line {}: expected `u v`", lineno + 1),
                )
            })?;
            tok.parse::<usize>().map_err(|_| {
                Error::format(
                    edge_path.display().to_string(),
                    format!("line {}: `{tok}` is not a node index", lineno + 1),
                )
            })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        raw_edges.push((u, v));
    }

    let mut warnings = Vec::new();
    let mut graph = Graph::new(num_nodes, raw_edges.iter().copied(), features)?;
    if graph.num_edges() < raw_edges.len() {
        warnings.push(format!(
            "{} directed/duplicate edge entries symmetrized into {} undirected edges",
            raw_edges.len(),
            graph.num_edges()
        ));
    }
    if has_labels {
        graph = graph.with_labels(labels)?;
    }
    Ok(Loaded { graph, warnings })
}

fn save_edge_list_csv(g: &Graph, path: &Path) -> Result<()> {
    if g.train_mask().is_some() {
        return Err(Error::Validation(
            "edge-list+csv cannot represent train/val/test masks; use graph-json".into(),
        ));
    }
    let (edge_path, csv_path) = csv_pair(path);

    let mut edge_text = String::new();
    for &(u, v) in g.edges() {
        edge_text.push_str(&format!("{u} {v}\n"));
    }
    fs::write(&edge_path, edge_text).map_err(|e| Error::io(edge_path.display().to_string(), e))?;

    let mut csv_text = String::new();
    let header: Vec<String> = (0..g.feature_dim()).map(|j| format!("f{j}")).collect();
    csv_text.push_str(&header.join(","));
    if g.labels().is_some() {
        csv_text.push_str(",label");
    }
    csv_text.push('\n');
    for i in 0..g.num_nodes() {
        let row: Vec<String> = g.features().row(i).iter().map(|v| format!("{v}")).collect();
        csv_text.push_str(&row.join(","));
        if let Some(labels) = g.labels() {
            csv_text.push_str(&format!(",{}", labels[i]));
        }
        csv_text.push('\n');
    }
    fs::write(&csv_path, csv_text).map_err(|e| Error::io(csv_path.display().to_string(), e))
}
