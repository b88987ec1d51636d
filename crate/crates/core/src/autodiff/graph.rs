use std::collections::BTreeMap;

use super::ops::{self, Primitive};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Value {
    Param(ParamId),
    Owned(Tensor),
}

#[derive(Debug)]
enum Source {
    Param(ParamId),
    Constant,
    /// Free leaf that receives a gradient but is not a stored parameter.
    Variable,
    Op(Primitive, Vec<Var>),
}

#[derive(Debug)]
struct Node {
    source: Source,
    value: Value,
    requires_grad: bool,
}

/// Append-only computation tape over a borrowed parameter store.
///
/// Nodes are pushed in evaluation order, so every node's parents precede it.
/// [`Graph::backward`] does not consume or mutate the tape: calling it again
/// on the same loss returns identical gradients.
#[derive(Debug)]
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
    track_params: bool,
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<Tensor>,
    variables: BTreeMap<Var, Tensor>,
    nodes_visited: usize,
}

impl Gradients {
    /// Gradient for a parameter; all zeros when the loss does not depend on it.
    pub fn param(&self, id: ParamId) -> &Tensor {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    /// Gradient for a free variable leaf, if the loss reaches it.
    pub fn variable(&self, var: Var) -> Option<&Tensor> {
        self.variables.get(&var)
    }

    /// Number of tape nodes processed during the reverse sweep.
    pub fn nodes_visited(&self) -> usize {
        self.nodes_visited
    }

    pub fn global_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|t| t.values())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl<'p> Graph<'p> {
    /// Tape whose parameter leaves receive gradients.
    pub fn new(params: &'p ParamStore) -> Self {
        Self::with_tracking(params, true)
    }

    /// Tape over frozen parameters: only [`Graph::variable`] leaves get gradients.
    pub fn frozen(params: &'p ParamStore) -> Self {
        Self::with_tracking(params, false)
    }

    fn with_tracking(params: &'p ParamStore, track_params: bool) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            track_params,
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Parents of a node, in argument order.
    pub fn parents(&self, var: Var) -> &[Var] {
        match &self.nodes[var.0].source {
            Source::Op(_, parents) => parents,
            _ => &[],
        }
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn value(&self, var: Var) -> &Tensor {
        match &self.nodes[var.0].value {
            Value::Param(id) => self.params.get(*id),
            Value::Owned(t) => t,
        }
    }

    /// Value of a one-element node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.value(var).item()
    }

    fn push(&mut self, source: Source, value: Value, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            source,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(var) = self.param_nodes[id.0] {
            return var;
        }
        let var = self.push(Source::Param(id), Value::Param(id), self.track_params);
        self.param_nodes[id.0] = Some(var);
        var
    }

    /// Leaf for a parameter looked up by name.
    pub fn param_named(&mut self, name: &str) -> Result<Var> {
        let id = self
            .params
            .id(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{name}`")))?;
        Ok(self.param(id))
    }

    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.push(Source::Constant, Value::Owned(tensor.with_requires_grad(false)), false)
    }

    /// Free leaf that receives a gradient (e.g. per-instance attention logits).
    pub fn variable(&mut self, tensor: Tensor) -> Var {
        self.push(Source::Variable, Value::Owned(tensor.with_requires_grad(true)), true)
    }

    /// Evaluates a primitive and records it on the tape.
    pub fn apply(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
        let requires_grad = inputs.iter().any(|&v| self.nodes[v.0].requires_grad);
        let out = ops::forward(&prim, &values)?.with_requires_grad(requires_grad);
        Ok(self.push(Source::Op(prim, inputs.to_vec()), Value::Owned(out), requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(Primitive::Scale(c), &[a])
    }
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(Primitive::AddScalar(c), &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sigmoid, &[a])
    }
    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Exp, &[a])
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Log, &[a])
    }
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Abs, &[a])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Relu, &[a])
    }
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Softplus, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sum, &[a])
    }
    pub fn max(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Max, &[a])
    }
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        self.apply(Primitive::Concat { axis }, parts)
    }
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        self.apply(Primitive::Stack, rows)
    }
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        self.apply(Primitive::Slice { start, len }, &[a])
    }
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.apply(Primitive::Softmax { axis }, &[a])
    }
    pub fn index_select(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.apply(Primitive::IndexSelect(ids.to_vec()), &[table])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                "scalar loss",
                format!("{:?}", loss_value.shape()),
            ));
        }
        let mut params: Vec<Tensor> = self
            .params
            .iter()
            .map(|(_, _, t)| Tensor::from_parts(t.shape().to_vec(), vec![0.0; t.numel()]))
            .collect();
        let mut variables = BTreeMap::new();
        let mut visited = 0;
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients {
                params,
                variables,
                nodes_visited: visited,
            });
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            visited += 1;
            let node = &self.nodes[idx];
            match &node.source {
                Source::Param(id) => {
                    for (acc, g) in params[id.0].values_mut().iter_mut().zip(&grad) {
                        *acc += g;
                    }
                }
                Source::Variable => {
                    let t = self.value(Var(idx));
                    variables.insert(Var(idx), Tensor::from_parts(t.shape().to_vec(), grad));
                }
                Source::Constant => {}
                Source::Op(prim, parents) => {
                    let inputs: Vec<&Tensor> = parents.iter().map(|&p| self.value(p)).collect();
                    let needs: Vec<bool> = parents.iter().map(|p| self.nodes[p.0].requires_grad).collect();
                    let output = self.value(Var(idx));
                    let input_grads = ops::backward(prim, &inputs, output, &grad, &needs);
                    for ((parent, need), g) in parents.iter().zip(&needs).zip(input_grads) {
                        if !need {
                            continue;
                        }
                        let Some(g) = g else { continue };
                        match &mut grads[parent.0] {
                            Some(acc) => {
                                for (a, v) in acc.iter_mut().zip(&g) {
                                    *a += v;
                                }
                            }
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Ok(Gradients {
            params,
            variables,
            nodes_visited: visited,
        })
    }
}
