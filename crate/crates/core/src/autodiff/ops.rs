//! Primitive operations: shape rules, forward kernels and vector-Jacobian products.
//!
//! Broadcasting is limited to matrix-plus-row-vector and scalar-with-tensor.

use super::Tensor;
use crate::error::{Error, Result};

/// A recordable primitive and its static attributes.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `[m,k]x[k,n]`, `[m,k]x[k]`, `[k]x[k,n]` or `[k]x[k]` (dot product).
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    AddScalar(f64),
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Abs,
    Relu,
    /// `ln(1 + e^x)`, evaluated without overflow.
    Softplus,
    /// Sum of all elements.
    Sum,
    /// Maximum over all elements.
    Max,
    Concat { axis: usize },
    /// Stacks equal-length vectors as rows of a matrix.
    Stack,
    /// Contiguous slice of the flattened input.
    Slice { start: usize, len: usize },
    Softmax { axis: usize },
    /// Row gather from a matrix.
    IndexSelect(Vec<usize>),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale(_) => "scale",
            Primitive::AddScalar(_) => "add_scalar",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Abs => "abs",
            Primitive::Relu => "relu",
            Primitive::Softplus => "softplus",
            Primitive::Sum => "sum",
            Primitive::Max => "max",
            Primitive::Concat { .. } => "concat",
            Primitive::Stack => "stack",
            Primitive::Slice { .. } => "slice",
            Primitive::Softmax { .. } => "softmax",
            Primitive::IndexSelect(_) => "index_select",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Primitive::MatMul | Primitive::Add | Primitive::Sub | Primitive::Mul => Some(2),
            Primitive::Concat { .. } | Primitive::Stack => None,
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    /// Left is `[m,n]`, right is `[n]`.
    RowRight,
    /// Left is `[n]`, right is `[m,n]`.
    RowLeft,
    ScalarRight,
    ScalarLeft,
}

fn broadcast(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        return Ok(Broadcast::Same);
    }
    if b.is_scalar() && b.rank() == 1 {
        return Ok(Broadcast::ScalarRight);
    }
    if a.is_scalar() && a.rank() == 1 {
        return Ok(Broadcast::ScalarLeft);
    }
    match (a.shape(), b.shape()) {
        ([_, n], [k]) if n == k => Ok(Broadcast::RowRight),
        ([k], [_, n]) if n == k => Ok(Broadcast::RowLeft),
        _ => Err(Error::shape(
            op,
            format!("shape compatible with {:?}", a.shape()),
            format!("{:?}", b.shape()),
        )),
    }
}

fn binary_elementwise(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    let mode = broadcast(op, a, b)?;
    let (av, bv) = (a.values(), b.values());
    let (shape, values) = match mode {
        Broadcast::Same => (
            a.shape().to_vec(),
            av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect(),
        ),
        Broadcast::ScalarRight => (a.shape().to_vec(), av.iter().map(|&x| f(x, bv[0])).collect()),
        Broadcast::ScalarLeft => (b.shape().to_vec(), bv.iter().map(|&y| f(av[0], y)).collect()),
        Broadcast::RowRight => {
            let n = bv.len();
            (
                a.shape().to_vec(),
                av.iter().enumerate().map(|(i, &x)| f(x, bv[i % n])).collect(),
            )
        }
        Broadcast::RowLeft => {
            let n = av.len();
            (
                b.shape().to_vec(),
                bv.iter().enumerate().map(|(i, &y)| f(av[i % n], y)).collect(),
            )
        }
    };
    Ok(Tensor::from_parts(shape, values))
}

/// Reduces a full-size gradient back onto a broadcast operand.
fn reduce_broadcast(mode: Broadcast, full: Vec<f64>, left: bool, operand_len: usize) -> Vec<f64> {
    let reduce_scalar = |g: Vec<f64>| vec![g.iter().sum()];
    let reduce_row = |g: Vec<f64>| {
        let mut out = vec![0.0; operand_len];
        for (i, v) in g.into_iter().enumerate() {
            out[i % operand_len] += v;
        }
        out
    };
    match (mode, left) {
        (Broadcast::Same, _) => full,
        (Broadcast::ScalarRight, false) | (Broadcast::ScalarLeft, true) => reduce_scalar(full),
        (Broadcast::RowRight, false) | (Broadcast::RowLeft, true) => reduce_row(full),
        _ => full,
    }
}

/// `(m, k, n)` for a matmul, viewing a left vector as `[1,k]` and a right vector as `[k,1]`.
fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, Vec<usize>)> {
    let (m, k, a_vec) = match a.shape() {
        [k] => (1, *k, true),
        [m, k] => (*m, *k, false),
        _ => unreachable!(),
    };
    let (k2, n, b_vec) = match b.shape() {
        [k] => (*k, 1, true),
        [k, n] => (*k, *n, false),
        _ => unreachable!(),
    };
    if k != k2 {
        return Err(Error::shape(
            "matmul",
            format!("inner dimension {k} (left {:?})", a.shape()),
            format!("right {:?}", b.shape()),
        ));
    }
    let shape = match (a_vec, b_vec) {
        (false, false) => vec![m, n],
        (false, true) => vec![m],
        (true, false) => vec![n],
        (true, true) => vec![1],
    };
    Ok((m, k, n, shape))
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Iterates over the `(offset, stride, len)` lanes that a softmax along `axis` normalizes.
fn softmax_lanes(shape: &[usize], axis: usize) -> Result<Vec<(usize, usize, usize)>> {
    match (shape, axis) {
        ([n], 0) => Ok(vec![(0, 1, *n)]),
        ([r, c], 1) => Ok((0..*r).map(|i| (i * c, 1, *c)).collect()),
        ([r, c], 0) => Ok((0..*c).map(|j| (j, *c, *r)).collect()),
        _ => Err(Error::shape(
            "softmax",
            format!("axis < rank for {shape:?}"),
            format!("axis {axis}"),
        )),
    }
}

fn check_arity(prim: &Primitive, inputs: &[&Tensor]) -> Result<()> {
    match prim.arity() {
        Some(n) if n != inputs.len() => Err(Error::shape(
            prim.name(),
            format!("{n} inputs"),
            format!("{} inputs", inputs.len()),
        )),
        None if inputs.is_empty() => Err(Error::shape(prim.name(), "at least one input", "none")),
        _ => Ok(()),
    }
}

/// Evaluates `prim` on `inputs`.
pub fn forward(prim: &Primitive, inputs: &[&Tensor]) -> Result<Tensor> {
    check_arity(prim, inputs)?;
    let x = inputs[0];
    let unary = |f: fn(f64) -> f64| Tensor::from_parts(x.shape().to_vec(), x.values().iter().map(|&v| f(v)).collect());
    Ok(match prim {
        Primitive::MatMul => {
            let (m, k, n, shape) = matmul_dims(inputs[0], inputs[1])?;
            Tensor::from_parts(shape, matmul_raw(inputs[0].values(), inputs[1].values(), m, k, n))
        }
        Primitive::Add => binary_elementwise("add", inputs[0], inputs[1], |a, b| a + b)?,
        Primitive::Sub => binary_elementwise("sub", inputs[0], inputs[1], |a, b| a - b)?,
        Primitive::Mul => binary_elementwise("mul", inputs[0], inputs[1], |a, b| a * b)?,
        Primitive::Scale(c) => Tensor::from_parts(x.shape().to_vec(), x.values().iter().map(|v| v * c).collect()),
        Primitive::AddScalar(c) => Tensor::from_parts(x.shape().to_vec(), x.values().iter().map(|v| v + c).collect()),
        Primitive::Tanh => unary(f64::tanh),
        Primitive::Sigmoid => unary(sigmoid),
        Primitive::Exp => unary(f64::exp),
        Primitive::Log => unary(f64::ln),
        Primitive::Abs => unary(f64::abs),
        Primitive::Relu => unary(|v| v.max(0.0)),
        Primitive::Softplus => unary(softplus),
        Primitive::Sum => Tensor::scalar(x.values().iter().sum()),
        Primitive::Max => Tensor::scalar(x.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        Primitive::Concat { axis } => concat(inputs, *axis)?,
        Primitive::Stack => {
            let len = x.numel();
            if let Some(bad) = inputs.iter().find(|t| t.rank() != 1 || t.numel() != len) {
                return Err(Error::shape("stack", format!("vectors of length {len}"), format!("{:?}", bad.shape())));
            }
            let values = inputs.iter().flat_map(|t| t.values().iter().copied()).collect();
            Tensor::from_parts(vec![inputs.len(), len], values)
        }
        Primitive::Slice { start, len } => {
            if *len == 0 || start + len > x.numel() {
                return Err(Error::shape(
                    "slice",
                    format!("range within {} elements", x.numel()),
                    format!("{start}..{}", start + len),
                ));
            }
            Tensor::from_parts(vec![*len], x.values()[*start..start + len].to_vec())
        }
        Primitive::Softmax { axis } => {
            let mut out = x.values().to_vec();
            for (off, stride, len) in softmax_lanes(x.shape(), *axis)? {
                let max = (0..len).map(|i| out[off + i * stride]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for i in 0..len {
                    let e = (out[off + i * stride] - max).exp();
                    out[off + i * stride] = e;
                    total += e;
                }
                for i in 0..len {
                    out[off + i * stride] /= total;
                }
            }
            Tensor::from_parts(x.shape().to_vec(), out)
        }
        Primitive::IndexSelect(ids) => {
            let [rows, cols] = x.shape() else {
                return Err(Error::shape("index_select", "matrix table", format!("{:?}", x.shape())));
            };
            if ids.is_empty() {
                return Err(Error::shape("index_select", "at least one index", "none"));
            }
            let mut values = Vec::with_capacity(ids.len() * cols);
            for &id in ids {
                if id >= *rows {
                    return Err(Error::shape("index_select", format!("index < {rows}"), format!("index {id}")));
                }
                values.extend_from_slice(x.row(id));
            }
            Tensor::from_parts(vec![ids.len(), *cols], values)
        }
    })
}

fn concat(inputs: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = inputs[0];
    match (first.rank(), axis) {
        (1, 0) => {
            if let Some(bad) = inputs.iter().find(|t| t.rank() != 1) {
                return Err(Error::shape("concat", "vectors", format!("{:?}", bad.shape())));
            }
            let values: Vec<f64> = inputs.iter().flat_map(|t| t.values().iter().copied()).collect();
            Ok(Tensor::from_parts(vec![values.len()], values))
        }
        (2, 0) => {
            let cols = first.shape()[1];
            if let Some(bad) = inputs.iter().find(|t| t.rank() != 2 || t.shape()[1] != cols) {
                return Err(Error::shape("concat", format!("matrices with {cols} columns"), format!("{:?}", bad.shape())));
            }
            let values: Vec<f64> = inputs.iter().flat_map(|t| t.values().iter().copied()).collect();
            Ok(Tensor::from_parts(vec![values.len() / cols, cols], values))
        }
        (2, 1) => {
            let rows = first.shape()[0];
            if let Some(bad) = inputs.iter().find(|t| t.rank() != 2 || t.shape()[0] != rows) {
                return Err(Error::shape("concat", format!("matrices with {rows} rows"), format!("{:?}", bad.shape())));
            }
            let cols: usize = inputs.iter().map(|t| t.shape()[1]).sum();
            let mut values = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for t in inputs {
                    values.extend_from_slice(t.row(r));
                }
            }
            Ok(Tensor::from_parts(vec![rows, cols], values))
        }
        _ => Err(Error::shape(
            "concat",
            format!("axis < rank {}", first.rank()),
            format!("axis {axis}"),
        )),
    }
}

/// Vector-Jacobian product: gradients with respect to each input that `needs` one.
pub(crate) fn backward(
    prim: &Primitive,
    inputs: &[&Tensor],
    output: &Tensor,
    grad: &[f64],
    needs: &[bool],
) -> Vec<Option<Vec<f64>>> {
    let x = inputs[0];
    let elementwise = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Option<Vec<f64>>> {
        // f(input, output) -> local derivative
        vec![Some(
            x.values()
                .iter()
                .zip(output.values())
                .zip(grad)
                .map(|((&xi, &yi), &g)| g * f(xi, yi))
                .collect(),
        )]
    };
    match prim {
        Primitive::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (m, k, n, _) = matmul_dims(a, b).expect("validated in forward");
            let ga = needs[0].then(|| {
                // dA[i,p] = sum_j dC[i,j] * B[p,j]
                let mut out = vec![0.0; m * k];
                let bv = b.values();
                for i in 0..m {
                    let grow = &grad[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bv[p * n..(p + 1) * n];
                        out[i * k + p] = grow.iter().zip(brow).map(|(g, b)| g * b).sum();
                    }
                }
                out
            });
            let gb = needs[1].then(|| {
                // dB[p,j] = sum_i A[i,p] * dC[i,j]
                let mut out = vec![0.0; k * n];
                let av = a.values();
                for i in 0..m {
                    let grow = &grad[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for (o, g) in out[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += aip * g;
                        }
                    }
                }
                out
            });
            vec![ga, gb]
        }
        Primitive::Add | Primitive::Sub | Primitive::Mul => {
            let (a, b) = (inputs[0], inputs[1]);
            let mode = broadcast("binary", a, b).expect("validated in forward");
            let full_len = output.numel();
            let expand = |t: &Tensor, left: bool| -> Vec<f64> {
                // operand value at each output position
                let v = t.values();
                match (mode, left) {
                    (Broadcast::Same, _) => v.to_vec(),
                    (Broadcast::ScalarRight, false) | (Broadcast::ScalarLeft, true) => vec![v[0]; full_len],
                    (Broadcast::RowRight, false) | (Broadcast::RowLeft, true) => {
                        (0..full_len).map(|i| v[i % v.len()]).collect()
                    }
                    _ => v.to_vec(),
                }
            };
            let (ga, gb): (Option<Vec<f64>>, Option<Vec<f64>>) = match prim {
                Primitive::Add => (
                    needs[0].then(|| grad.to_vec()),
                    needs[1].then(|| grad.to_vec()),
                ),
                Primitive::Sub => (
                    needs[0].then(|| grad.to_vec()),
                    needs[1].then(|| grad.iter().map(|g| -g).collect()),
                ),
                _ => {
                    let ga = needs[0].then(|| {
                        let bf = expand(b, false);
                        grad.iter().zip(bf).map(|(g, bv)| g * bv).collect()
                    });
                    let gb = needs[1].then(|| {
                        let af = expand(a, true);
                        grad.iter().zip(af).map(|(g, av)| g * av).collect()
                    });
                    (ga, gb)
                }
            };
            vec![
                ga.map(|g| reduce_broadcast(mode, g, true, a.numel())),
                gb.map(|g| reduce_broadcast(mode, g, false, b.numel())),
            ]
        }
        Primitive::Scale(c) => vec![Some(grad.iter().map(|g| g * c).collect())],
        Primitive::AddScalar(_) => vec![Some(grad.to_vec())],
        Primitive::Tanh => elementwise(&|_, y| 1.0 - y * y),
        Primitive::Sigmoid => elementwise(&|_, y| y * (1.0 - y)),
        Primitive::Exp => elementwise(&|_, y| y),
        Primitive::Log => elementwise(&|x, _| 1.0 / x),
        Primitive::Abs => elementwise(&|x, _| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }),
        Primitive::Relu => elementwise(&|x, _| if x > 0.0 { 1.0 } else { 0.0 }),
        Primitive::Softplus => elementwise(&|x, _| sigmoid(x)),
        Primitive::Sum => vec![Some(vec![grad[0]; x.numel()])],
        Primitive::Max => {
            let max = output.item();
            let arg = x.values().iter().position(|&v| v == max).unwrap_or(0);
            let mut g = vec![0.0; x.numel()];
            g[arg] = grad[0];
            vec![Some(g)]
        }
        Primitive::Concat { axis } => {
            let mut out: Vec<Option<Vec<f64>>> = Vec::with_capacity(inputs.len());
            if x.rank() == 2 && *axis == 1 {
                let rows = x.shape()[0];
                let total_cols = output.shape()[1];
                let mut col_off = 0;
                for (t, &need) in inputs.iter().zip(needs) {
                    let cols = t.shape()[1];
                    out.push(need.then(|| {
                        let mut g = Vec::with_capacity(rows * cols);
                        for r in 0..rows {
                            let start = r * total_cols + col_off;
                            g.extend_from_slice(&grad[start..start + cols]);
                        }
                        g
                    }));
                    col_off += cols;
                }
            } else {
                let mut off = 0;
                for (t, &need) in inputs.iter().zip(needs) {
                    let len = t.numel();
                    out.push(need.then(|| grad[off..off + len].to_vec()));
                    off += len;
                }
            }
            out
        }
        Primitive::Stack => {
            let len = x.numel();
            needs
                .iter()
                .enumerate()
                .map(|(i, &need)| need.then(|| grad[i * len..(i + 1) * len].to_vec()))
                .collect()
        }
        Primitive::Slice { start, len } => {
            let mut g = vec![0.0; x.numel()];
            g[*start..start + len].copy_from_slice(grad);
            vec![Some(g)]
        }
        Primitive::Softmax { axis } => {
            let y = output.values();
            let mut g = vec![0.0; y.len()];
            for (off, stride, len) in softmax_lanes(output.shape(), *axis).expect("validated in forward") {
                let dot: f64 = (0..len).map(|i| grad[off + i * stride] * y[off + i * stride]).sum();
                for i in 0..len {
                    let idx = off + i * stride;
                    g[idx] = y[idx] * (grad[idx] - dot);
                }
            }
            vec![Some(g)]
        }
        Primitive::IndexSelect(ids) => {
            let cols = x.shape()[1];
            let mut g = vec![0.0; x.numel()];
            for (r, &id) in ids.iter().enumerate() {
                for (o, gv) in g[id * cols..(id + 1) * cols].iter_mut().zip(&grad[r * cols..(r + 1) * cols]) {
                    *o += gv;
                }
            }
            vec![Some(g)]
        }
    }
}
