//! Differentiable operations. Each forward captures what its backward rule
//! needs by value, so backward never re-reads the tape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BoolMatrix, DenseMatrix};
use crate::tensor::{record, Variable};

/// Elementwise activation kinds. The leaky-relu slope defaults to 0.2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Act {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Elu,
    Identity,
}

impl Act {
    pub fn leaky_default() -> Act {
        Act::LeakyRelu(0.2)
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            Act::Relu => x.max(0.0),
            Act::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Act::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Act::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Act::Identity => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Act::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Act::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Act::Sigmoid => {
                let y = 1.0 / (1.0 + (-x).exp());
                y * (1.0 - y)
            }
            Act::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Act::Identity => 1.0,
        }
    }
}

fn needs(v: &Variable) -> bool {
    v.requires_grad()
}

/// `a @ b` with the usual rules `dA = G Bᵀ`, `dB = Aᵀ G`.
pub fn matmul(a: &Variable, b: &Variable) -> Result<Variable> {
    let av = a.value();
    let bv = b.value();
    let value = av.matmul(&bv)?;
    let (na, nb) = (needs(a), needs(b));
    record(
        &[a, b],
        value,
        Box::new(move |g| {
            vec![
                na.then(|| g.matmul(&bv.transpose()).expect("matmul backward dA")),
                nb.then(|| av.transpose().matmul(g).expect("matmul backward dB")),
            ]
        }),
    )
}

pub fn add(a: &Variable, b: &Variable) -> Result<Variable> {
    let value = a.value().add(&b.value())?;
    let (na, nb) = (needs(a), needs(b));
    record(
        &[a, b],
        value,
        Box::new(move |g| vec![na.then(|| g.clone()), nb.then(|| g.clone())]),
    )
}

pub fn scale(x: &Variable, c: f64) -> Result<Variable> {
    let value = x.value().scale(c);
    record(&[x], value, Box::new(move |g| vec![Some(g.scale(c))]))
}

/// Elementwise product with a constant matrix (dropout masks and the like).
pub fn mul_mask(x: &Variable, mask: &DenseMatrix) -> Result<Variable> {
    let value = x.value().hadamard(mask)?;
    let mask = mask.clone();
    record(
        &[x],
        value,
        Box::new(move |g| vec![Some(g.hadamard(&mask).expect("mask shape"))]),
    )
}

/// Adds a `1 x F` bias row to every row of `x`.
pub fn add_bias(x: &Variable, bias: &Variable) -> Result<Variable> {
    let xv = x.value();
    let bv = bias.value();
    if bv.rows() != 1 || bv.cols() != xv.cols() {
        return Err(Error::Shape(format!(
            "bias {:?} for input {:?}",
            bv.shape(),
            xv.shape()
        )));
    }
    let (rows, cols) = xv.shape();
    let value = DenseMatrix::from_fn(rows, cols, |i, j| xv.get(i, j) + bv.get(0, j));
    let (nx, nb) = (needs(x), needs(bias));
    record(
        &[x, bias],
        value,
        Box::new(move |g| {
            let gx = nx.then(|| g.clone());
            let gb = nb.then(|| {
                DenseMatrix::from_fn(1, cols, |_, j| (0..rows).map(|i| g.get(i, j)).sum())
            });
            vec![gx, gb]
        }),
    )
}

pub fn activation(x: &Variable, kind: Act) -> Result<Variable> {
    let xv = x.value();
    let value = xv.map(|v| kind.eval(v));
    record(
        &[x],
        value,
        Box::new(move |g| {
            let mut out = g.clone();
            for (o, &xi) in out.data_mut().iter_mut().zip(xv.data()) {
                *o *= kind.derivative(xi);
            }
            vec![Some(out)]
        }),
    )
}

/// Numerically stable per-row softmax. With a mask, only `true` positions
/// participate; masked outputs are exactly zero. A row with every position
/// masked is an error.
pub fn softmax_rows(x: &Variable, mask: Option<&BoolMatrix>) -> Result<Variable> {
    let xv = x.value();
    if let Some(m) = mask {
        if m.shape() != xv.shape() {
            return Err(Error::Shape(format!(
                "softmax mask {:?} for input {:?}",
                m.shape(),
                xv.shape()
            )));
        }
    }
    let (rows, cols) = xv.shape();
    let mut y = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        let allowed = |j: usize| mask.map_or(true, |m| m.get(i, j));
        let mut max = f64::NEG_INFINITY;
        for j in 0..cols {
            if allowed(j) {
                max = max.max(xv.get(i, j));
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateRow { row: i });
        }
        let mut sum = 0.0;
        for j in 0..cols {
            if allowed(j) {
                let e = (xv.get(i, j) - max).exp();
                y.set(i, j, e);
                sum += e;
            }
        }
        for j in 0..cols {
            if allowed(j) {
                y.set(i, j, y.get(i, j) / sum);
            }
        }
    }
    let y_saved = y.clone();
    record(
        &[x],
        y,
        Box::new(move |g| {
            // dx_j = y_j (g_j − Σ_k g_k y_k); masked positions have y_j = 0.
            let (rows, cols) = y_saved.shape();
            let mut dx = DenseMatrix::zeros(rows, cols);
            for i in 0..rows {
                let dot: f64 = (0..cols).map(|j| g.get(i, j) * y_saved.get(i, j)).sum();
                for j in 0..cols {
                    dx.set(i, j, y_saved.get(i, j) * (g.get(i, j) - dot));
                }
            }
            vec![Some(dx)]
        }),
    )
}

/// `[a | b]` column concatenation.
pub fn concat_cols(a: &Variable, b: &Variable) -> Result<Variable> {
    let av = a.value();
    let bv = b.value();
    if av.rows() != bv.rows() {
        return Err(Error::Shape(format!(
            "concat_cols on {}x{} and {}x{}",
            av.rows(),
            av.cols(),
            bv.rows(),
            bv.cols()
        )));
    }
    let (rows, ac, bc) = (av.rows(), av.cols(), bv.cols());
    let mut value = DenseMatrix::zeros(rows, ac + bc);
    for i in 0..rows {
        value.row_mut(i)[..ac].copy_from_slice(av.row(i));
        value.row_mut(i)[ac..].copy_from_slice(bv.row(i));
    }
    let (na, nb) = (needs(a), needs(b));
    record(
        &[a, b],
        value,
        Box::new(move |g| {
            let ga = na.then(|| {
                let mut m = DenseMatrix::zeros(rows, ac);
                for i in 0..rows {
                    m.row_mut(i).copy_from_slice(&g.row(i)[..ac]);
                }
                m
            });
            let gb = nb.then(|| {
                let mut m = DenseMatrix::zeros(rows, bc);
                for i in 0..rows {
                    m.row_mut(i).copy_from_slice(&g.row(i)[ac..]);
                }
                m
            });
            vec![ga, gb]
        }),
    )
}

/// `[a; b]` row concatenation.
pub fn concat_rows(a: &Variable, b: &Variable) -> Result<Variable> {
    let av = a.value();
    let bv = b.value();
    if av.cols() != bv.cols() {
        return Err(Error::Shape(format!(
            "concat_rows on {}x{} and {}x{}",
            av.rows(),
            av.cols(),
            bv.rows(),
            bv.cols()
        )));
    }
    let (ar, br, cols) = (av.rows(), bv.rows(), av.cols());
    let mut data = Vec::with_capacity((ar + br) * cols);
    data.extend_from_slice(av.data());
    data.extend_from_slice(bv.data());
    let value = DenseMatrix::from_vec(ar + br, cols, data)?;
    let (na, nb) = (needs(a), needs(b));
    record(
        &[a, b],
        value,
        Box::new(move |g| {
            let ga = na.then(|| {
                DenseMatrix::from_vec(ar, cols, g.data()[..ar * cols].to_vec())
                    .expect("top slice")
            });
            let gb = nb.then(|| {
                DenseMatrix::from_vec(br, cols, g.data()[ar * cols..].to_vec())
                    .expect("bottom slice")
            });
            vec![ga, gb]
        }),
    )
}

pub fn transpose(x: &Variable) -> Result<Variable> {
    let value = x.value().transpose();
    record(&[x], value, Box::new(|g| vec![Some(g.transpose())]))
}

/// Rows `start..end` of `x`; the gradient scatters back into place.
pub fn slice_rows(x: &Variable, start: usize, end: usize) -> Result<Variable> {
    let xv = x.value();
    if start >= end || end > xv.rows() {
        return Err(Error::Shape(format!(
            "slice_rows {start}..{end} of {} rows",
            xv.rows()
        )));
    }
    let cols = xv.cols();
    let full_rows = xv.rows();
    let value = DenseMatrix::from_vec(
        end - start,
        cols,
        xv.data()[start * cols..end * cols].to_vec(),
    )?;
    record(
        &[x],
        value,
        Box::new(move |g| {
            let mut dx = DenseMatrix::zeros(full_rows, cols);
            dx.data_mut()[start * cols..end * cols].copy_from_slice(g.data());
            vec![Some(dx)]
        }),
    )
}

/// Outer sum of two column vectors: `S[i][j] = p[i] + q[j]`.
pub fn pairwise_sum(p: &Variable, q: &Variable) -> Result<Variable> {
    let pv = p.value();
    let qv = q.value();
    if pv.cols() != 1 || qv.cols() != 1 {
        return Err(Error::Shape(format!(
            "pairwise_sum needs column vectors, got {:?} and {:?}",
            pv.shape(),
            qv.shape()
        )));
    }
    let (n, m) = (pv.rows(), qv.rows());
    let value = DenseMatrix::from_fn(n, m, |i, j| pv.get(i, 0) + qv.get(j, 0));
    let (np, nq) = (needs(p), needs(q));
    record(
        &[p, q],
        value,
        Box::new(move |g| {
            let gp = np.then(|| {
                DenseMatrix::from_fn(n, 1, |i, _| (0..m).map(|j| g.get(i, j)).sum())
            });
            let gq = nq.then(|| {
                DenseMatrix::from_fn(m, 1, |j, _| (0..n).map(|i| g.get(i, j)).sum())
            });
            vec![gp, gq]
        }),
    )
}

/// Per-group elementwise maximum over selected rows of `x`; gradient flows
/// to the first row attaining each maximum.
pub fn rows_max_gather(x: &Variable, groups: &[Vec<usize>]) -> Result<Variable> {
    let xv = x.value();
    let cols = xv.cols();
    let mut value = DenseMatrix::zeros(groups.len(), cols);
    let mut winners = vec![0usize; groups.len() * cols];
    for (gi, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::Validation(format!("gather group {gi} is empty")));
        }
        for &r in group {
            if r >= xv.rows() {
                return Err(Error::Index {
                    what: "gather row",
                    index: r,
                    size: xv.rows(),
                });
            }
        }
        for c in 0..cols {
            let mut best = f64::NEG_INFINITY;
            let mut best_row = group[0];
            for &r in group {
                let v = xv.get(r, c);
                if v > best {
                    best = v;
                    best_row = r;
                }
            }
            value.set(gi, c, best);
            winners[gi * cols + c] = best_row;
        }
    }
    let x_rows = xv.rows();
    record(
        &[x],
        value,
        Box::new(move |g| {
            let mut dx = DenseMatrix::zeros(x_rows, cols);
            for gi in 0..g.rows() {
                for c in 0..cols {
                    let r = winners[gi * cols + c];
                    dx.set(r, c, dx.get(r, c) + g.get(gi, c));
                }
            }
            vec![Some(dx)]
        }),
    )
}

pub fn sum_all(x: &Variable) -> Result<Variable> {
    let xv = x.value();
    let (rows, cols) = xv.shape();
    let value = DenseMatrix::filled(1, 1, xv.sum());
    record(
        &[x],
        value,
        Box::new(move |g| vec![Some(DenseMatrix::filled(rows, cols, g.get(0, 0)))]),
    )
}

/// Divides each row by its L2 norm. Zero rows are rejected.
pub fn normalize_rows_l2(x: &Variable) -> Result<Variable> {
    let xv = x.value();
    let (rows, cols) = xv.shape();
    let mut norms = vec![0.0; rows];
    let mut value = DenseMatrix::zeros(rows, cols);
    for i in 0..rows {
        let n = xv.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Validation(format!(
                "cannot L2-normalize zero row {i}"
            )));
        }
        norms[i] = n;
        for j in 0..cols {
            value.set(i, j, xv.get(i, j) / n);
        }
    }
    let y = value.clone();
    record(
        &[x],
        value,
        Box::new(move |g| {
            // dX_r = (G_r − y_r (y_r · G_r)) / ||x_r||
            let mut dx = DenseMatrix::zeros(rows, cols);
            for i in 0..rows {
                let dot: f64 = (0..cols).map(|j| y.get(i, j) * g.get(i, j)).sum();
                for j in 0..cols {
                    dx.set(i, j, (g.get(i, j) - y.get(i, j) * dot) / norms[i]);
                }
            }
            vec![Some(dx)]
        }),
    )
}

/// Mean over masked nodes of `−log softmax(logits)[i][labels[i]]`, computed
/// with a log-sum-exp that stays finite for logits up to ±1e3 and beyond.
pub fn cross_entropy_masked(
    logits: &Variable,
    labels: &[usize],
    mask: &[bool],
) -> Result<Variable> {
    let lv = logits.value();
    let (n, c) = lv.shape();
    if labels.len() != n || mask.len() != n {
        return Err(Error::Shape(format!(
            "labels/mask of lengths {}/{} for {} logit rows",
            labels.len(),
            mask.len(),
            n
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::Validation("cross-entropy mask selects no nodes".into()));
    }
    for i in 0..n {
        if mask[i] && labels[i] >= c {
            return Err(Error::Validation(format!(
                "label {} at node {i} out of range for {c} classes",
                labels[i]
            )));
        }
    }

    let mut total = 0.0;
    // Softmax rows for masked nodes only; unmasked rows stay zero and
    // contribute nothing to the gradient.
    let mut probs = DenseMatrix::zeros(n, c);
    for i in 0..n {
        if !mask[i] {
            continue;
        }
        let row = lv.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[labels[i]];
        for j in 0..c {
            probs.set(i, j, (row[j] - max).exp() / sum);
        }
    }
    let value = DenseMatrix::filled(1, 1, total / count as f64);
    let labels = labels.to_vec();
    let mask = mask.to_vec();
    record(
        &[logits],
        value,
        Box::new(move |g| {
            let scale = g.get(0, 0) / count as f64;
            let mut dl = DenseMatrix::zeros(n, c);
            for i in 0..n {
                if !mask[i] {
                    continue;
                }
                for j in 0..c {
                    let indicator = if j == labels[i] { 1.0 } else { 0.0 };
                    dl.set(i, j, scale * (probs.get(i, j) - indicator));
                }
            }
            vec![Some(dl)]
        }),
    )
}

/// Contrastive cross-entropy over a `2B x 2B` similarity-logit matrix whose
/// first `B` rows are one view and last `B` rows the other. Row `r`'s
/// positive is row `(r + B) mod 2B`; the diagonal (self-similarity) is
/// excluded from the normalization.
pub fn nt_xent_from_sims(sims: &Variable) -> Result<Variable> {
    let sv = sims.value();
    let (n, m) = sv.shape();
    if n != m || n < 4 || n % 2 != 0 {
        return Err(Error::Validation(format!(
            "nt-xent needs a square 2Bx2B similarity matrix with B >= 2, got {n}x{m}"
        )));
    }
    let b = n / 2;
    let mut total = 0.0;
    let mut probs = DenseMatrix::zeros(n, n);
    for r in 0..n {
        let partner = (r + b) % n;
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if j != r {
                max = max.max(sv.get(r, j));
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            if j != r {
                sum += (sv.get(r, j) - max).exp();
            }
        }
        let lse = max + sum.ln();
        total += lse - sv.get(r, partner);
        for j in 0..n {
            if j != r {
                probs.set(r, j, (sv.get(r, j) - max).exp() / sum);
            }
        }
    }
    let value = DenseMatrix::filled(1, 1, total / n as f64);
    record(
        &[sims],
        value,
        Box::new(move |g| {
            let scale = g.get(0, 0) / n as f64;
            let mut ds = DenseMatrix::zeros(n, n);
            for r in 0..n {
                let partner = (r + b) % n;
                for j in 0..n {
                    if j == r {
                        continue;
                    }
                    let indicator = if j == partner { 1.0 } else { 0.0 };
                    ds.set(r, j, scale * (probs.get(r, j) - indicator));
                }
            }
            vec![Some(ds)]
        }),
    )
}
