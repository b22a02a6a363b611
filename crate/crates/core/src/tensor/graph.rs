use std::sync::Arc;

use super::ops::{self, Op};
use super::Tensor;
use crate::error::{contract, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Node {
    value: Arc<Tensor>,
    /// `None` for leaves and for outputs whose inputs need no gradient.
    op: Option<Op>,
    inputs: Vec<usize>,
    requires_grad: bool,
}

/// Append-only computation tape. Node ids are topologically ordered by
/// construction, so backward is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.shared_leaf(Arc::new(value), requires_grad)
    }

    /// Leaf backed by a shared buffer, so frozen weights are not copied.
    pub fn shared_leaf(&mut self, value: Arc<Tensor>, requires_grad: bool) -> Var {
        self.push(Node { value, op: None, inputs: Vec::new(), requires_grad })
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, node: Node) -> Var {
        self.nodes.push(node);
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn apply(&mut self, op: Op, inputs: &[Var]) -> Result<Var> {
        if let Some(bad) = inputs.iter().find(|v| v.0 >= self.nodes.len()) {
            return Err(contract!("{}: unknown node {}", op.name(), bad.0));
        }
        let values: Vec<&Tensor> = inputs.iter().map(|v| &*self.nodes[v.0].value).collect();
        let value = Arc::new(ops::apply(&op, &values)?);
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let node = if requires_grad {
            Node { value, op: Some(op), inputs: inputs.iter().map(|v| v.0).collect(), requires_grad }
        } else {
            Node { value, op: None, inputs: Vec::new(), requires_grad: false }
        };
        Ok(self.push(node))
    }

    /// Accumulates `d loss / d node` for every node that requires a gradient.
    /// Earlier gradients are discarded first.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(contract!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            ));
        }
        self.reset();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let loss_shape = self.nodes[loss.0].value.shape().to_vec();
        self.grads[loss.0] = Some(Tensor::full(&loss_shape, 1.0));
        for id in (0..=loss.0).rev() {
            let Some(op) = &self.nodes[id].op else { continue };
            let Some(grad) = self.grads[id].take() else { continue };
            let node = &self.nodes[id];
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|&i| &*self.nodes[i].value).collect();
            let input_grads = ops::vjp(op, &inputs, &node.value, &grad)?;
            for (&i, g) in node.inputs.iter().zip(input_grads) {
                if !self.nodes[i].requires_grad {
                    continue;
                }
                match &mut self.grads[i] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
            self.grads[id] = Some(grad);
        }
        Ok(())
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Drops all gradient buffers.
    pub fn reset(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(Op::Scale(s), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Transpose, &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::SoftmaxRows, &[a])
    }

    pub fn layernorm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        self.apply(Op::LayerNorm { eps }, &[x, gain, bias])
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Gelu, &[a])
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Mse, &[a, b])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.apply(Op::Concat { axis }, parts)
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        self.apply(Op::Slice { axis, start, end }, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(Op::Mean, &[a])
    }

    /// `x @ w + b` with `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add(y, b)
    }
}
