//! Shared test helpers: the central finite-difference gradient oracle and
//! seeded random instance generators.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use graphaug::matrix::DenseMatrix;
use graphaug::tensor::{backward, Tape, Variable};
use graphaug::Graph;

pub const FD_EPSILON: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Central finite differences against the tape's analytic gradients.
/// `forward` must build a scalar loss from leaf variables created in input
/// order. Returns the worst relative error `|analytic - fd| / max(1, |analytic|)`.
pub fn grad_check(
    inputs: &[DenseMatrix],
    forward: &dyn Fn(&Tape, &[Variable]) -> Variable,
) -> f64 {
    let tape = Tape::new();
    let vars: Vec<Variable> = inputs.iter().map(|m| tape.var(m.clone(), true)).collect();
    let loss = forward(&tape, &vars);
    assert_eq!(loss.shape(), (1, 1), "grad_check needs a scalar loss");
    backward(&loss).expect("backward succeeds");
    let analytic: Vec<DenseMatrix> = vars
        .iter()
        .map(|v| v.grad().expect("gradient populated"))
        .collect();

    let eval = |xs: &[DenseMatrix]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<Variable> = xs.iter().map(|m| tape.var(m.clone(), false)).collect();
        forward(&tape, &vars).value().get(0, 0)
    };

    let mut worst = 0.0f64;
    for (idx, input) in inputs.iter().enumerate() {
        for i in 0..input.rows() {
            for j in 0..input.cols() {
                let base = input.get(i, j);
                let mut plus = inputs.to_vec();
                plus[idx].set(i, j, base + FD_EPSILON);
                let mut minus = inputs.to_vec();
                minus[idx].set(i, j, base - FD_EPSILON);
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_EPSILON);
                let a = analytic[idx].get(i, j);
                let rel = (a - fd).abs() / a.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Contracts a matrix-valued output to a scalar with a fixed random linear
/// functional, so gradient checks see every output entry.
pub fn random_functional(tape: &Tape, out: &Variable, rng: &mut ChaCha8Rng) -> Variable {
    let (r, c) = out.shape();
    let probe = DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(0.2..1.0) * sign(rng));
    let _ = tape;
    let weighted = graphaug::tensor::ops::mul_mask(out, &probe).expect("probe shape");
    graphaug::tensor::ops::sum_all(&weighted).expect("sum")
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Random matrix with entries bounded away from zero (keeps relu-family
/// kinks farther than the FD step).
pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0.05..2.0) * sign(rng))
}

/// Random small graph for oracle tests.
pub fn rand_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_feats: usize) -> Graph {
    let n = rng.gen_range(2..=max_nodes.max(2));
    let f = rng.gen_range(1..=max_feats.max(1));
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < 0.4 {
                edges.push((u, v));
            }
        }
    }
    // Bounded-away-from-zero features keep multiplicative oracles exact-ish.
    let features = DenseMatrix::from_fn(n, f, |_, _| rng.gen_range(0.05..2.0) * sign(rng));
    Graph::new(n, edges, features).expect("random graph is valid")
}

/// Strips volatile wall-time metadata so reports can be compared bytewise.
pub fn normalize_report_json(text: &str) -> String {
    let mut value: serde_json::Value = serde_json::from_str(text).expect("report parses");
    if let Some(meta) = value.get_mut("metadata") {
        if let Some(obj) = meta.as_object_mut() {
            obj.insert("wall_time_secs".into(), serde_json::json!(0.0));
        }
    }
    serde_json::to_string_pretty(&value).expect("report re-serializes")
}

// ---------------------------------------------------------------------------
// Gradient-check registry: one entry per differentiable operation or layer.
// Each case maps an instance seed to the worst relative error of analytic
// gradients against central finite differences. Shared by the `gradients`
// suite and acceptance criterion 3.

use graphaug::graph::{adjacency_matrix, normalized_adjacency_with_self_loops};
use graphaug::matrix::BoolMatrix;
use graphaug::models::{
    gat_attention_coeffs, gat_layer_forward, gcn_layer_forward, gin_layer_forward,
    sage_layer_forward, sage_sample_neighbors, GinMlp, HeadCombine, SageAggregator,
};
use graphaug::rng::seeded;
use graphaug::tensor::ops::{self, Act};

pub struct GradCase {
    pub name: &'static str,
    pub run: fn(u64) -> f64,
}

pub fn gradient_cases() -> Vec<GradCase> {
    vec![
        GradCase { name: "matmul", run: case_matmul },
        GradCase { name: "add_scale", run: case_add_scale },
        GradCase { name: "add_bias", run: case_add_bias },
        GradCase { name: "mul_mask", run: case_mul_mask },
        GradCase { name: "activation_relu", run: case_act_relu },
        GradCase { name: "activation_leaky_relu", run: case_act_leaky },
        GradCase { name: "activation_sigmoid", run: case_act_sigmoid },
        GradCase { name: "activation_elu", run: case_act_elu },
        GradCase { name: "activation_identity", run: case_act_identity },
        GradCase { name: "softmax_rows", run: case_softmax },
        GradCase { name: "softmax_rows_masked", run: case_softmax_masked },
        GradCase { name: "concat_cols", run: case_concat_cols },
        GradCase { name: "concat_rows_transpose", run: case_concat_rows_transpose },
        GradCase { name: "slice_rows", run: case_slice_rows },
        GradCase { name: "pairwise_sum", run: case_pairwise_sum },
        GradCase { name: "rows_max_gather", run: case_rows_max_gather },
        GradCase { name: "normalize_rows_l2", run: case_normalize_rows },
        GradCase { name: "cross_entropy_masked", run: case_cross_entropy },
        GradCase { name: "nt_xent_from_sims", run: case_nt_xent_sims },
        GradCase { name: "gcn_layer", run: case_gcn_layer },
        GradCase { name: "sage_layer_mean", run: case_sage_mean },
        GradCase { name: "sage_layer_maxpool", run: case_sage_maxpool },
        GradCase { name: "gat_layer_joint", run: case_gat_joint },
        GradCase { name: "gin_layer", run: case_gin_layer },
        GradCase { name: "nt_xent_composition", run: case_nt_xent_composition },
        GradCase { name: "model_forward_gcn", run: case_model_gcn },
        GradCase { name: "model_forward_graphsage", run: case_model_sage },
        GradCase { name: "model_forward_gat", run: case_model_gat },
        GradCase { name: "model_forward_gin", run: case_model_gin },
    ]
}

fn case_matmul(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, k, n) = (rng.gen_range(2..6), rng.gen_range(2..5), rng.gen_range(2..5));
    let inputs = vec![rand_matrix(&mut rng, m, k), rand_matrix(&mut rng, k, n)];
    let probe_rng = seeded(7);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::matmul(&vars[0], &vars[1]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_add_scale(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, m, n), rand_matrix(&mut rng, m, n)];
    let c = rng.gen_range(-2.0..2.0);
    let probe_rng = seeded(8);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::add(&ops::scale(&vars[0], c).unwrap(), &vars[1]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_add_bias(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, m, n), rand_matrix(&mut rng, 1, n)];
    let probe_rng = seeded(11);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::add_bias(&vars[0], &vars[1]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_mul_mask(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let mask = DenseMatrix::from_fn(m, n, |_, _| if rng.gen::<f64>() < 0.4 { 0.0 } else { 2.0 });
    let probe_rng = seeded(9);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::mul_mask(&vars[0], &mask).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_activation(seed: u64, kind: Act) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let probe_rng = seeded(10);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::activation(&vars[0], kind).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_act_relu(seed: u64) -> f64 {
    case_activation(seed, Act::Relu)
}
fn case_act_leaky(seed: u64) -> f64 {
    case_activation(seed, Act::LeakyRelu(0.2))
}
fn case_act_sigmoid(seed: u64) -> f64 {
    case_activation(seed, Act::Sigmoid)
}
fn case_act_elu(seed: u64) -> f64 {
    case_activation(seed, Act::Elu)
}
fn case_act_identity(seed: u64) -> f64 {
    case_activation(seed, Act::Identity)
}

fn case_softmax(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let probe_rng = seeded(12);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::softmax_rows(&vars[0], None).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_softmax_masked(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(3..6));
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let mut mask = BoolMatrix::filled(m, n, false);
    for i in 0..m {
        mask.set(i, rng.gen_range(0..n), true);
        for j in 0..n {
            if rng.gen::<f64>() < 0.5 {
                mask.set(i, j, true);
            }
        }
    }
    let probe_rng = seeded(13);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::softmax_rows(&vars[0], Some(&mask)).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_concat_cols(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let m = rng.gen_range(2..6);
    let (ca, cb) = (rng.gen_range(1..4), rng.gen_range(1..4));
    let inputs = vec![rand_matrix(&mut rng, m, ca), rand_matrix(&mut rng, m, cb)];
    let probe_rng = seeded(14);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::concat_cols(&vars[0], &vars[1]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_concat_rows_transpose(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let n = rng.gen_range(2..5);
    let (ra, rb) = (rng.gen_range(1..4), rng.gen_range(1..4));
    let inputs = vec![rand_matrix(&mut rng, ra, n), rand_matrix(&mut rng, rb, n)];
    let probe_rng = seeded(15);
    grad_check(&inputs, &|tape, vars| {
        let stacked = ops::concat_rows(&vars[0], &vars[1]).unwrap();
        let out = ops::transpose(&stacked).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_slice_rows(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let m = rng.gen_range(3..7);
    let n = rng.gen_range(2..5);
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let start = rng.gen_range(0..m - 1);
    let end = rng.gen_range(start + 1..=m);
    let probe_rng = seeded(16);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::slice_rows(&vars[0], start, end).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_pairwise_sum(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (n, m) = (rng.gen_range(2..6), rng.gen_range(2..6));
    let inputs = vec![rand_matrix(&mut rng, n, 1), rand_matrix(&mut rng, m, 1)];
    let probe_rng = seeded(17);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::pairwise_sum(&vars[0], &vars[1]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_rows_max_gather(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let rows = rng.gen_range(4..8);
    let cols = rng.gen_range(2..5);
    // Continuous draws keep the per-column maxima tie-free, so the FD step
    // cannot flip a winner.
    let x = DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-10.0..10.0));
    let groups: Vec<Vec<usize>> = (0..3)
        .map(|_| {
            let len = rng.gen_range(1..=rows);
            (0..len).map(|_| rng.gen_range(0..rows)).collect()
        })
        .collect();
    let probe_rng = seeded(18);
    grad_check(&[x], &|tape, vars| {
        let out = ops::rows_max_gather(&vars[0], &groups).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_normalize_rows(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (m, n) = (rng.gen_range(2..6), rng.gen_range(2..5));
    let inputs = vec![rand_matrix(&mut rng, m, n)];
    let probe_rng = seeded(19);
    grad_check(&inputs, &|tape, vars| {
        let out = ops::normalize_rows_l2(&vars[0]).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_cross_entropy(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (n, c) = (rng.gen_range(3..8), rng.gen_range(2..5));
    let inputs = vec![rand_matrix(&mut rng, n, c)];
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.7).collect();
    mask[0] = true;
    grad_check(&inputs, &|_tape, vars| {
        ops::cross_entropy_masked(&vars[0], &labels, &mask).unwrap()
    })
}

fn case_nt_xent_sims(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let b = rng.gen_range(2..5);
    let inputs = vec![rand_matrix(&mut rng, 2 * b, 2 * b)];
    grad_check(&inputs, &|_tape, vars| {
        ops::nt_xent_from_sims(&vars[0]).unwrap()
    })
}

fn case_gcn_layer(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 7, 4);
    let a_hat = normalized_adjacency_with_self_loops(&g);
    let f_out = rng.gen_range(2..4);
    let inputs = vec![
        g.features().clone(),
        rand_matrix(&mut rng, g.feature_dim(), f_out),
    ];
    let probe_rng = seeded(20);
    grad_check(&inputs, &|tape, vars| {
        let out = gcn_layer_forward(&vars[0], &a_hat, &vars[1], Act::Elu).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_sage_mean(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 6, 3);
    let f_in = g.feature_dim();
    let f_out = rng.gen_range(2..4);
    let k = rng.gen_range(1..4);
    let samples: Vec<Vec<usize>> = (0..g.num_nodes())
        .map(|v| sage_sample_neighbors(&g, v, k, v as u64).unwrap())
        .collect();
    let inputs = vec![g.features().clone(), rand_matrix(&mut rng, 2 * f_in, f_out)];
    let probe_rng = seeded(21);
    grad_check(&inputs, &|tape, vars| {
        let out = sage_layer_forward(
            &vars[0],
            &samples,
            &vars[1],
            SageAggregator::Mean,
            None,
            Act::Sigmoid,
        )
        .unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_sage_maxpool(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 6, 3);
    let f_in = g.feature_dim();
    let f_out = rng.gen_range(2..4);
    let k = rng.gen_range(1..4);
    let samples: Vec<Vec<usize>> = (0..g.num_nodes())
        .map(|v| sage_sample_neighbors(&g, v, k, 31 + v as u64).unwrap())
        .collect();
    let inputs = vec![
        g.features().clone(),
        rand_matrix(&mut rng, 2 * f_in, f_out),
        rand_matrix(&mut rng, f_in, f_in),
    ];
    let probe_rng = seeded(22);
    grad_check(&inputs, &|tape, vars| {
        let out = sage_layer_forward(
            &vars[0],
            &samples,
            &vars[1],
            SageAggregator::MaxPool,
            Some(&vars[2]),
            Act::Sigmoid,
        )
        .unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_gat_joint(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 6, 3);
    let f_in = g.feature_dim();
    let f_out = rng.gen_range(2..4);
    let inputs = vec![
        g.features().clone(),
        rand_matrix(&mut rng, f_in, f_out),
        rand_matrix(&mut rng, 2 * f_out, 1),
    ];
    let graph = g.clone();
    let probe_rng = seeded(23);
    grad_check(&inputs, &|tape, vars| {
        let coeffs = gat_attention_coeffs(&vars[0], &vars[1], &vars[2], &graph, 0.2).unwrap();
        let out = gat_layer_forward(
            &vars[0],
            &[(coeffs, vars[1].clone())],
            Act::Elu,
            HeadCombine::Average,
        )
        .unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_gin_layer(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 6, 3);
    let a = adjacency_matrix(&g, false);
    let f_in = g.feature_dim();
    let hidden = rng.gen_range(2..4);
    let inputs = vec![
        g.features().clone(),
        rand_matrix(&mut rng, f_in, hidden),
        rand_matrix(&mut rng, 1, hidden),
        rand_matrix(&mut rng, hidden, hidden),
        rand_matrix(&mut rng, 1, hidden),
    ];
    let probe_rng = seeded(24);
    grad_check(&inputs, &|tape, vars| {
        let mlp = GinMlp {
            w1: &vars[1],
            b1: &vars[2],
            w2: &vars[3],
            b2: &vars[4],
        };
        let out = gin_layer_forward(&vars[0], &a, &mlp, 0.3).unwrap();
        random_functional(tape, &out, &mut probe_rng.clone())
    })
}

fn case_nt_xent_composition(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    // nt_xent ∘ projection ∘ readout ∘ GIN on a 2-graph batch, checked
    // against finite differences jointly over features and all weights.
    let g1 = rand_graph(&mut rng, 4, 3);
    let g2 = loop {
        let g = rand_graph(&mut rng, 4, 3);
        if g.feature_dim() == g1.feature_dim() {
            break g;
        }
    };
    let f = g1.feature_dim();
    let hidden = 3;
    let n1 = g1.num_nodes();
    let n_total = n1 + g2.num_nodes();
    let assignment: Vec<usize> = (0..n_total).map(|i| usize::from(i >= n1)).collect();

    let mut stacked_feats = DenseMatrix::zeros(n_total, f);
    for i in 0..n1 {
        stacked_feats.row_mut(i).copy_from_slice(g1.features().row(i));
    }
    for i in 0..g2.num_nodes() {
        stacked_feats
            .row_mut(n1 + i)
            .copy_from_slice(g2.features().row(i));
    }
    let mut adj = DenseMatrix::zeros(n_total, n_total);
    for &(u, v) in g1.edges() {
        adj.set(u, v, 1.0);
        adj.set(v, u, 1.0);
    }
    for &(u, v) in g2.edges() {
        adj.set(n1 + u, n1 + v, 1.0);
        adj.set(n1 + v, n1 + u, 1.0);
    }

    let inputs = vec![
        stacked_feats.clone(),
        stacked_feats.map(|v| v * 0.9 + 0.05), // second view, slightly shifted
        rand_matrix(&mut rng, f, hidden),
        rand_matrix(&mut rng, 1, hidden),
        rand_matrix(&mut rng, hidden, hidden),
        rand_matrix(&mut rng, 1, hidden),
        rand_matrix(&mut rng, hidden, hidden),
        rand_matrix(&mut rng, hidden, 2),
    ];
    grad_check(&inputs, &|_tape, vars| {
        let mlp = GinMlp {
            w1: &vars[2],
            b1: &vars[3],
            w2: &vars[4],
            b2: &vars[5],
        };
        let encode = |feats: &Variable| {
            let h = gin_layer_forward(feats, &adj, &mlp, 0.0).unwrap();
            graphaug::contrastive::readout_pool(
                &h,
                &assignment,
                2,
                graphaug::contrastive::Readout::Mean,
            )
            .unwrap()
        };
        let project = |z: &Variable| {
            let hid = ops::activation(&ops::matmul(z, &vars[6]).unwrap(), Act::Sigmoid).unwrap();
            ops::matmul(&hid, &vars[7]).unwrap()
        };
        let z_i = project(&encode(&vars[0]));
        let z_j = project(&encode(&vars[1]));
        graphaug::contrastive::nt_xent_loss(&z_i, &z_j, 0.5).unwrap()
    })
}

fn case_model_forward(arch: graphaug::models::Arch, seed: u64) -> f64 {
    use graphaug::models::{init_params, model_forward, Mode, ModelConfig};
    use graphaug::tensor::ops::cross_entropy_masked;

    let mut rng = seeded(seed);
    let g = rand_graph(&mut rng, 6, 3);
    let cfg = ModelConfig {
        layer_dims: vec![g.feature_dim(), 3, 2],
        dropout: 0.0,
        gat_heads: 2,
        ..ModelConfig::defaults_for(arch, g.feature_dim(), 2)
    };
    let params = init_params(&cfg, seed).unwrap();
    let labels: Vec<usize> = (0..g.num_nodes()).map(|i| i % 2).collect();
    let mask: Vec<bool> = vec![true; g.num_nodes()];

    let fp = model_forward(&cfg, &params, &g, Mode::Train, 11).unwrap();
    let loss = cross_entropy_masked(&fp.logits, &labels, &mask).unwrap();
    backward(&loss).unwrap();
    let analytic: Vec<DenseMatrix> = fp.param_vars.iter().map(|v| v.grad().unwrap()).collect();

    let matrices: Vec<DenseMatrix> = params.matrices().cloned().collect();
    let eval = |perturbed: &[DenseMatrix]| -> f64 {
        let mut pset = params.clone();
        pset.set_all(perturbed.to_vec()).unwrap();
        let fp = model_forward(&cfg, &pset, &g, Mode::Train, 11).unwrap();
        cross_entropy_masked(&fp.logits, &labels, &mask)
            .unwrap()
            .value()
            .get(0, 0)
    };
    let mut worst = 0.0f64;
    for (pi, m) in matrices.iter().enumerate() {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let mut plus = matrices.clone();
                plus[pi].set(i, j, m.get(i, j) + FD_EPSILON);
                let mut minus = matrices.clone();
                minus[pi].set(i, j, m.get(i, j) - FD_EPSILON);
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * FD_EPSILON);
                let a = analytic[pi].get(i, j);
                worst = worst.max((a - fd).abs() / a.abs().max(1.0));
            }
        }
    }
    worst
}

fn case_model_gcn(seed: u64) -> f64 {
    case_model_forward(graphaug::models::Arch::Gcn, seed)
}
fn case_model_sage(seed: u64) -> f64 {
    case_model_forward(graphaug::models::Arch::GraphSage, seed)
}
fn case_model_gat(seed: u64) -> f64 {
    case_model_forward(graphaug::models::Arch::Gat, seed)
}
fn case_model_gin(seed: u64) -> f64 {
    case_model_forward(graphaug::models::Arch::Gin, seed)
}
