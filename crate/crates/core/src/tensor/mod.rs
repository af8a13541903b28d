//! Reverse-mode differentiation over dense matrices.
//!
//! A `Tape` records every operation of one forward pass; `backward` walks
//! the record once in reverse and accumulates gradients into every
//! `Variable` that requires them. Tapes are single-use: a second `backward`
//! call is rejected, and training loops rebuild the graph each epoch.
//!
//! `Variable`s are cheap handles (shared pointer + index) into their tape,
//! so layer code can clone them freely; two handles compare equal as
//! parameters exactly when they designate the same tape slot.

pub mod adam;
pub mod checkpoint;
pub mod ops;

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

type BackwardRule = Box<dyn Fn(&DenseMatrix) -> Vec<Option<DenseMatrix>>>;

struct Node {
    value: DenseMatrix,
    grad: Option<DenseMatrix>,
    requires_grad: bool,
    parents: Vec<usize>,
    /// `None` for leaves and for nodes that cannot influence any gradient.
    rule: Option<BackwardRule>,
}

pub(crate) struct TapeInner {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Recording context for one forward/backward pass.
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                consumed: false,
            })),
        }
    }

    /// Records a leaf. Parameters use `requires_grad = true`; graph-derived
    /// matrices (normalized adjacency, pooling operators) are constants.
    pub fn var(&self, value: DenseMatrix, requires_grad: bool) -> Variable {
        let mut inner = self.inner.borrow_mut();
        let index = inner.nodes.len();
        inner.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            parents: Vec::new(),
            rule: None,
        });
        Variable {
            inner: Rc::clone(&self.inner),
            index,
        }
    }

    pub fn constant(&self, value: DenseMatrix) -> Variable {
        self.var(value, false)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone)]
pub struct Variable {
    inner: Rc<RefCell<TapeInner>>,
    index: usize,
}

impl Variable {
    pub fn value(&self) -> DenseMatrix {
        self.inner.borrow().nodes[self.index].value.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.borrow().nodes[self.index].value.shape()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    pub fn grad(&self) -> Option<DenseMatrix> {
        self.inner.borrow().nodes[self.index].grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().nodes[self.index].requires_grad
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().nodes[self.index].grad = None;
    }

    /// Overwrites a leaf's value in place (optimizer write-back). Rejected
    /// for derived nodes and on shape changes.
    pub fn set_value(&self, value: DenseMatrix) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        let node = &mut inner.nodes[self.index];
        if node.rule.is_some() || !node.parents.is_empty() {
            return Err(Error::Validation(
                "set_value is only valid on leaf variables".into(),
            ));
        }
        if node.value.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "set_value shape {:?} does not match {:?}",
                value.shape(),
                node.value.shape()
            )));
        }
        node.value = value;
        Ok(())
    }

    /// The tape this variable lives on.
    pub fn tape(&self) -> Tape {
        Tape {
            inner: Rc::clone(&self.inner),
        }
    }

    /// True when both handles designate the same slot of the same tape —
    /// the notion of "same parameter" used by weight sharing checks.
    pub fn same_node(&self, other: &Variable) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner) && self.index == other.index
    }

    pub(crate) fn same_tape(&self, other: &Variable) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn tape_handle(&self) -> Rc<RefCell<TapeInner>> {
        Rc::clone(&self.inner)
    }
}

impl std::fmt::Debug for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (r, c) = self.shape();
        write!(f, "Variable#{}({}x{})", self.index, r, c)
    }
}

/// Records a derived node. All parents must live on the same tape; the rule
/// receives the upstream gradient and returns per-parent contributions
/// (`None` for parents that do not require gradients).
pub(crate) fn record(
    parents: &[&Variable],
    value: DenseMatrix,
    rule: BackwardRule,
) -> Result<Variable> {
    let first = parents.first().expect("operations have at least one input");
    for p in &parents[1..] {
        if !first.same_tape(p) {
            return Err(Error::Validation(
                "operands belong to different tapes".into(),
            ));
        }
    }
    let inner_rc = first.tape_handle();
    let mut inner = inner_rc.borrow_mut();
    let requires_grad = parents
        .iter()
        .any(|p| inner.nodes[p.index].requires_grad);
    let index = inner.nodes.len();
    inner.nodes.push(Node {
        value,
        grad: None,
        requires_grad,
        parents: parents.iter().map(|p| p.index).collect(),
        rule: requires_grad.then_some(rule),
    });
    drop(inner);
    Ok(Variable {
        inner: inner_rc,
        index,
    })
}

/// Reverse sweep from a scalar loss. Populates `grad` on every
/// `requires_grad` variable of the tape; variables the loss does not reach
/// get exact zeros. Consumes the tape: a second call is an error.
pub fn backward(loss: &Variable) -> Result<()> {
    if loss.shape() != (1, 1) {
        return Err(Error::Shape(format!(
            "backward needs a 1x1 loss, got {:?}",
            loss.shape()
        )));
    }
    let inner_rc = loss.tape_handle();
    let mut inner = inner_rc.borrow_mut();
    if inner.consumed {
        return Err(Error::Validation(
            "tape already consumed by a previous backward pass".into(),
        ));
    }
    inner.consumed = true;

    let n = inner.nodes.len();
    let mut grads: Vec<Option<DenseMatrix>> = vec![None; n];
    grads[loss.index] = Some(DenseMatrix::filled(1, 1, 1.0));

    for idx in (0..=loss.index).rev() {
        if !inner.nodes[idx].requires_grad {
            continue;
        }
        let Some(g) = grads[idx].take() else {
            continue;
        };
        if let Some(rule) = &inner.nodes[idx].rule {
            let contributions = rule(&g);
            let parents = inner.nodes[idx].parents.clone();
            debug_assert_eq!(contributions.len(), parents.len());
            for (parent, contrib) in parents.into_iter().zip(contributions) {
                let Some(c) = contrib else { continue };
                if !inner.nodes[parent].requires_grad {
                    continue;
                }
                match &mut grads[parent] {
                    Some(acc) => *acc = acc.add(&c)?,
                    slot @ None => *slot = Some(c),
                }
            }
        }
        inner.nodes[idx].grad = Some(g);
    }

    // Unreached variables get zero gradients by contract.
    for node in inner.nodes.iter_mut() {
        if node.requires_grad && node.grad.is_none() {
            node.grad = Some(DenseMatrix::zeros(node.value.rows(), node.value.cols()));
        }
    }
    Ok(())
}
