//! Optimizers. Adam with bias correction is the default; plain SGD is kept
//! as a configuration alternative. Weight decay is folded into the gradient
//! (`g + wd * theta`) before the moment updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::tensor::Variable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
}

fn default_lr() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_weight_decay() -> f64 {
    5e-4
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            weight_decay: default_weight_decay(),
        }
    }
}

/// Per-parameter first and second moments plus the shared step counter.
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            cfg,
            step: 0,
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update over raw matrices.
    pub fn step(&mut self, params: &mut [DenseMatrix], grads: &[DenseMatrix]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Validation(format!(
                "optimizer tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for (i, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            if param.shape() != grad.shape() || param.shape() != self.m[i].shape() {
                return Err(Error::Shape(format!(
                    "parameter {i}: param {:?}, grad {:?}, moment {:?}",
                    param.shape(),
                    grad.shape(),
                    self.m[i].shape()
                )));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = param.data_mut();
            for k in 0..p.len() {
                let g = grad.data()[k] + self.cfg.weight_decay * p[k];
                m[k] = self.cfg.beta1 * m[k] + (1.0 - self.cfg.beta1) * g;
                v[k] = self.cfg.beta2 * v[k] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.cfg.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }

    /// One Adam update over tape leaves: reads each variable's gradient,
    /// writes the updated value back, and zeroes the gradients. A missing
    /// gradient is an error.
    pub fn step_vars(&mut self, vars: &[Variable]) -> Result<()> {
        let mut params = Vec::with_capacity(vars.len());
        let mut grads = Vec::with_capacity(vars.len());
        for (i, var) in vars.iter().enumerate() {
            let grad = var.grad().ok_or_else(|| {
                Error::Validation(format!("parameter {i} has no gradient; run backward first"))
            })?;
            params.push(var.value());
            grads.push(grad);
        }
        self.step(&mut params, &grads)?;
        for (var, updated) in vars.iter().zip(params) {
            var.set_value(updated)?;
            var.zero_grad();
        }
        Ok(())
    }
}

/// Plain SGD (momentum 0), sharing the weight-decay convention with Adam.
pub struct SgdState {
    pub lr: f64,
    pub weight_decay: f64,
}

impl SgdState {
    pub fn step(&self, params: &mut [DenseMatrix], grads: &[DenseMatrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Validation(
                "sgd: params and grads length mismatch".into(),
            ));
        }
        for (param, grad) in params.iter_mut().zip(grads) {
            if param.shape() != grad.shape() {
                return Err(Error::Shape("sgd: parameter/gradient shape mismatch".into()));
            }
            let p = param.data_mut();
            for k in 0..p.len() {
                p[k] -= self.lr * (grad.data()[k] + self.weight_decay * p[k]);
            }
        }
        Ok(())
    }
}
