//! Reverse-mode differentiation over a linear record of tensor operations.
//!
//! Nodes are appended in evaluation order, so walking the record backwards is a reverse
//! topological traversal. Nodes whose parents are all constants keep no backward closure,
//! which makes inference on a tape nearly free of bookkeeping.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of one recorded op. Receives the upstream gradient and a
/// per-parent flag saying whether that parent needs a gradient; returns one entry per parent.
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Rc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    kinks: Option<u64>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            kinks: None,
        }
    }

    /// Starts hashing the branch pattern of every piecewise op (ReLU masks) recorded from now on.
    pub fn track_kinks(&mut self) {
        self.kinks = Some(0xcbf2_9ce4_8422_2325);
    }

    /// Hash of the branch pattern so far; equal signatures mean the same linear piece.
    pub fn kink_signature(&self) -> Option<u64> {
        self.kinks
    }

    pub(crate) fn note_branches(&mut self, branches: impl Iterator<Item = bool>) {
        if let Some(h) = self.kinks.as_mut() {
            for b in branches {
                *h = (*h ^ (b as u64 + 1)).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, node: Node<T>) -> Var {
        self.nodes.push(node);
        Var(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient (data, fixed operands).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: false,
        })
    }

    /// A leaf whose gradient is collected by [`Tape::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            requires_grad: true,
        })
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shared(&self, v: Var) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes[v.0].value)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records an op result. `backward` is dropped when no parent needs a gradient.
    pub fn record(
        &mut self,
        value: Tensor<T>,
        parents: &[Var],
        backward: impl Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>> + 'static,
    ) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.0).collect(),
            backward: if requires_grad {
                Some(Box::new(backward))
            } else {
                None
            },
            requires_grad,
        })
    }

    /// Back-propagates from `output`, seeding its gradient with ones (so a non-scalar output
    /// behaves like its sum).
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(output.0 + 1);
        grads.resize_with(output.0 + 1, || None);
        grads[output.0] = Some(Tensor::full(self.nodes[output.0].value.shape(), T::one()));
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = &node.backward else {
                continue;
            };
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| self.nodes[p].requires_grad)
                .collect();
            let parent_grads = backward(&upstream, &needs);
            if parent_grads.len() != node.parents.len() {
                return Err(Error::invalid(
                    "backward",
                    format!(
                        "node {i} returned {} gradients for {} parents",
                        parent_grads.len(),
                        node.parents.len()
                    ),
                ));
            }
            for (&p, g) in node.parents.iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[p].requires_grad {
                    continue;
                }
                if g.shape() != self.nodes[p].value.shape() {
                    return Err(Error::shape(
                        "backward",
                        self.nodes[p].value.shape(),
                        g.shape(),
                    ));
                }
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&g),
                    slot => *slot = Some(g),
                }
            }
        }
        let shapes = self.nodes[..=output.0]
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }
}

/// Gradients produced by one backward pass.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of a leaf `v`; exactly zero when `v` did not influence the output.
    /// Intermediate gradients are consumed during the pass and read back as zero.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match self.grads.get(v.0) {
            Some(Some(g)) => g.clone(),
            Some(None) => Tensor::zeros(&self.shapes[v.0]),
            None => panic!("variable {v:?} was recorded after the differentiated output"),
        }
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
