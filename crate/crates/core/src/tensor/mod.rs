//! Dense row-major `f64` tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable, reference-counted buffer plus a shape.
//! Operations on tensors that require gradients record a node holding
//! their inputs and a backward closure; [`Tensor::backward`] collects the
//! reachable nodes into a [`GradTape`] and replays it in reverse
//! topological order, accumulating `dLoss/dLeaf` into each leaf that was
//! created with [`Tensor::requires_grad`].
//!
//! Broadcasting is deliberately narrow: binary ops accept equal shapes, a
//! single-element operand, or operands of equal rank whose differing axes
//! have extent 1 in one of them. Anything else must be reshaped explicitly.
//!
//! Convolutions use the cross-correlation convention (the kernel is not
//! flipped).

mod autograd;
mod conv;
mod gemm;
mod linalg;
mod ops;
mod shape_ops;

pub use autograd::{grad_enabled, no_grad, GradTape, NoGradGuard};
pub use conv::PaddingMode;
pub(crate) use gemm::gemm;

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn invalid<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Invalid {
        op,
        msg: msg.into(),
    })
}

/// Arguments handed to a backward closure.
pub struct BackwardArgs<'a> {
    /// Gradient of the loss with respect to this node's output.
    pub grad: &'a [f64],
    /// The node's forward output.
    pub out: &'a [f64],
    /// Which inputs need a gradient; closures may skip the others.
    pub needs: &'a [bool],
}

/// Backward rule: returns one gradient per input (`None` when not needed).
pub type BackwardFn = Box<dyn Fn(&BackwardArgs<'_>) -> Vec<Option<Vec<f64>>>>;

pub(crate) struct Node {
    pub(crate) op: &'static str,
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) backward: BackwardFn,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: Option<Node>,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn next_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f64> = self.0.data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Builds a tensor, checking that `data` fills `shape` exactly.
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != data.len() {
            return invalid(
                "new",
                format!("shape {:?} needs {} values, got {}", shape, numel_of(shape), data.len()),
            );
        }
        Ok(Self::raw(data, shape.to_vec()))
    }

    pub(crate) fn raw(data: Vec<f64>, shape: Vec<usize>) -> Tensor {
        debug_assert_eq!(numel_of(&shape), data.len());
        Tensor(Rc::new(Inner {
            id: next_id(),
            shape,
            data,
            requires_grad: false,
            grad: RefCell::new(None),
            node: None,
        }))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Self::raw(vec![0.0; numel_of(shape)], shape.to_vec())
    }

    pub fn full(shape: &[usize], value: f64) -> Tensor {
        Self::raw(vec![value; numel_of(shape)], shape.to_vec())
    }

    /// A rank-0 tensor.
    pub fn scalar(value: f64) -> Tensor {
        Self::raw(vec![value], Vec::new())
    }

    pub fn from_slice(values: &[f64]) -> Tensor {
        Self::raw(values.to_vec(), vec![values.len()])
    }

    /// Returns a gradient-tracking leaf sharing this tensor's values.
    pub fn requires_grad(self) -> Tensor {
        let (data, shape) = match Rc::try_unwrap(self.0) {
            Ok(inner) => (inner.data, inner.shape),
            Err(rc) => (rc.data.clone(), rc.shape.clone()),
        };
        Tensor(Rc::new(Inner {
            id: next_id(),
            shape,
            data,
            requires_grad: true,
            grad: RefCell::new(None),
            node: None,
        }))
    }

    /// Leaf constructor used by parameter stores.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != data.len() {
            return invalid(
                "param",
                format!("shape {:?} needs {} values, got {}", shape, numel_of(shape), data.len()),
            );
        }
        Ok(Tensor(Rc::new(Inner {
            id: next_id(),
            shape: shape.to_vec(),
            data,
            requires_grad: true,
            grad: RefCell::new(None),
            node: None,
        })))
    }

    /// Records the result of a differentiable operation.
    ///
    /// When gradient recording is disabled, or no input requires a
    /// gradient, the result is a plain constant and `backward` is dropped.
    pub fn from_op(
        op: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        inputs: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Tensor {
        debug_assert_eq!(numel_of(&shape), data.len(), "{op}");
        let track = grad_enabled() && inputs.iter().any(|t| t.0.requires_grad);
        if !track {
            return Self::raw(data, shape);
        }
        Tensor(Rc::new(Inner {
            id: next_id(),
            shape,
            data,
            requires_grad: true,
            grad: RefCell::new(None),
            node: Some(Node {
                op,
                inputs,
                backward,
            }),
        }))
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.clone()
    }

    pub fn is_tracked(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    pub(crate) fn id(&self) -> u64 {
        self.0.id
    }

    pub(crate) fn node(&self) -> Option<&Node> {
        self.0.node.as_ref()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return invalid("item", format!("tensor of shape {:?} is not a scalar", self.shape()));
        }
        Ok(self.0.data[0])
    }

    /// Accumulated gradient of a tracked leaf, if `backward` has reached it.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    /// A constant copy cut off from the graph.
    pub fn detach(&self) -> Tensor {
        Self::raw(self.0.data.clone(), self.0.shape.clone())
    }

    /// Backpropagates from this scalar into every reachable tracked leaf.
    ///
    /// Gradients accumulate across calls; use [`Tensor::zero_grad`] on the
    /// leaves (or build fresh leaves) to reset. Calling this on an
    /// untracked scalar is a no-op.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::NotScalar(self.shape().to_vec()));
        }
        if !self.is_tracked() {
            return Ok(());
        }
        GradTape::record(self).replay(self, vec![1.0]);
        Ok(())
    }
}
