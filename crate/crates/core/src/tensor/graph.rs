//! Tape-based reverse-mode autodiff.
//!
//! A [`Graph`] records every differentiable op executed through it together
//! with whatever the op saved for its backward rule. [`Graph::backward`]
//! replays the tape once in reverse. Graphs are single-use: build one per
//! forward/backward step.

use std::cell::{Cell, Ref, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};

use super::array::{Array, Float};
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// Backward rule of one recorded op.
pub trait Backward<T: Float> {
    fn name(&self) -> &'static str;

    /// Gradients for each input, in input order. `None` means "no gradient"
    /// (e.g. integer targets or inputs that do not require one).
    fn backward(&self, inputs: &[&Array<T>], output: &Array<T>, grad: &Array<T>)
        -> Vec<Option<Array<T>>>;
}

struct Node<T: Float> {
    value: Array<T>,
    inputs: Vec<usize>,
    op: Option<Box<dyn Backward<T>>>,
    requires_grad: bool,
}

pub struct Graph<T: Float> {
    id: u64,
    nodes: RefCell<Vec<Node<T>>>,
    consumed: Cell<bool>,
    fault: Cell<Option<f64>>,
    check_finite: Cell<bool>,
}

impl<T: Float> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Float> Graph<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            consumed: Cell::new(false),
            fault: Cell::new(None),
            check_finite: Cell::new(true),
        }
    }

    /// Scales every backward contribution by `factor`. Debug-only negative
    /// control for the gradient checker.
    pub fn inject_gradient_fault(&self, factor: f64) {
        self.fault.set(Some(factor));
    }

    /// Disables the per-op finiteness check (used by stability probes that
    /// want to inspect raw outputs).
    pub fn set_check_finite(&self, on: bool) {
        self.check_finite.set(on);
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&self, value: Array<T>) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf without gradient.
    pub fn constant(&self, value: Array<T>) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&self, value: Array<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            inputs: Vec::new(),
            op: None,
            requires_grad,
        });
        Var {
            graph: self.id,
            index: nodes.len() - 1,
        }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.graph != self.id {
            return Err(Error::ForeignVar);
        }
        Ok(v.index)
    }

    /// Borrow the value behind `v`.
    pub fn value(&self, v: Var) -> Ref<'_, Array<T>> {
        assert_eq!(v.graph, self.id, "variable belongs to a different graph");
        Ref::map(self.nodes.borrow(), |n| &n[v.index].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.value(v).shape().to_vec()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.index].requires_grad
    }

    /// Runs `forward` on the input values and records the result.
    pub(crate) fn record<B, F>(&self, inputs: &[Var], forward: F) -> Result<Var>
    where
        B: Backward<T> + 'static,
        F: FnOnce(&[&Array<T>]) -> Result<(Array<T>, B)>,
    {
        let mut idx = Vec::with_capacity(inputs.len());
        for &v in inputs {
            idx.push(self.check(v)?);
        }
        let (value, op, requires_grad) = {
            let nodes = self.nodes.borrow();
            let vals: Vec<&Array<T>> = idx.iter().map(|&i| &nodes[i].value).collect();
            let (value, op) = forward(&vals)?;
            let rg = idx.iter().any(|&i| nodes[i].requires_grad);
            (value, op, rg)
        };
        if self.check_finite.get() && !value.is_finite() {
            return Err(Error::NonFinite {
                op: op.name().to_string(),
            });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            inputs: idx,
            op: requires_grad.then(|| Box::new(op) as Box<dyn Backward<T>>),
            requires_grad,
        });
        Ok(Var {
            graph: self.id,
            index: nodes.len() - 1,
        })
    }

    /// Reverse pass from a scalar `loss`. Can run only once per graph.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let li = self.check(loss)?;
        if self.consumed.replace(true) {
            return Err(Error::BackwardAlreadyRun);
        }
        let nodes = self.nodes.borrow();
        if nodes[li].value.len() != 1 {
            self.consumed.set(false);
            return Err(Error::NonScalarLoss(nodes[li].value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[li] = Some(Array::full(nodes[li].value.shape(), T::one()));
        let fault = self.fault.get().map(T::from_f);
        for i in (0..=li).rev() {
            let node = &nodes[i];
            let Some(op) = &node.op else { continue };
            let Some(g) = grads[i].take() else { continue };
            let inputs: Vec<&Array<T>> = node.inputs.iter().map(|&j| &nodes[j].value).collect();
            let input_grads = op.backward(&inputs, &node.value, &g);
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", op.name());
            for (&j, ig) in node.inputs.iter().zip(input_grads) {
                let Some(mut ig) = ig else { continue };
                if !nodes[j].requires_grad {
                    continue;
                }
                debug_assert_eq!(ig.shape(), nodes[j].value.shape(), "{}", op.name());
                if let Some(f) = fault {
                    ig.data_mut().iter_mut().for_each(|v| *v *= f);
                }
                match &mut grads[j] {
                    Some(acc) => acc.add_assign(&ig),
                    slot @ None => *slot = Some(ig),
                }
            }
            // keep leaf gradients; interior ones were consumed by `take`
        }
        let leaf_grads = nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| {
                if n.op.is_none() && n.requires_grad {
                    Some(g.unwrap_or_else(|| Array::zeros(n.value.shape())))
                } else {
                    None
                }
            })
            .collect();
        Ok(Gradients {
            graph: self.id,
            grads: leaf_grads,
        })
    }
}

/// Gradients of the loss with respect to every tracked leaf.
pub struct Gradients<T: Float> {
    graph: u64,
    grads: Vec<Option<Array<T>>>,
}

impl<T: Float> Gradients<T> {
    /// Gradient for leaf `v`; leaves that did not influence the loss get zeros.
    pub fn wrt(&self, v: Var) -> Option<&Array<T>> {
        if v.graph != self.graph {
            return None;
        }
        self.grads.get(v.index).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Array<T>> {
        if v.graph != self.graph {
            return None;
        }
        self.grads.get_mut(v.index).and_then(Option::take)
    }
}
