use std::cell::RefCell;

use rand::Rng;

use super::tensor::{Params, Tensor};
use super::AutodiffError;

/// Handle to a node on a [`Tape`]. Cheap to copy; only meaningful together
/// with the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    /// Elementwise multiply by a scalar node, broadcast over the left operand.
    ScaleBy(usize, usize),
    Scale(usize, f64),
    // the shift is applied eagerly at forward time; backward is identity
    AddScalar(usize),
    Matmul(usize, usize),
    /// `[n, d] + [d]`, broadcast over rows.
    AddBias(usize, usize),
    /// `[c, t] + [c]`, broadcast over columns.
    AddChanBias(usize, usize),
    Relu(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Mish(usize),
    SoftmaxRows(usize),
    LogSoftmaxRows(usize),
    Sum(usize),
    Mean(usize),
    Concat1d(Vec<usize>),
    Slice1d(usize, usize, usize),
    Row(usize, usize),
    Transpose(usize),
    StackRows(Vec<usize>),
    /// Dilated causal 1-D convolution: input `[c_in, t]`, weight
    /// `[c_out, c_in, k]`, implicit left zero padding of `(k-1)*dilation`.
    Conv1d { input: usize, weight: usize, dilation: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode tape over dense tensors.
///
/// Nodes are recorded in topological order during the forward pass and
/// visited once in reverse by [`Tape::backward`]. Gradients accumulate across
/// repeated backward calls until [`Tape::zero_grads`].
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Vec<f64>>>,
    param_leaves: RefCell<Vec<(usize, String)>>,
}

// softplus with an overflow guard: exact identity for large x, exp(x) for
// very negative x.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn mish_scalar(x: f64) -> f64 {
    x * softplus(x).tanh()
}

fn mish_derivative(x: f64) -> f64 {
    let sp = softplus(x);
    let t = sp.tanh();
    t + x * (1.0 - t * t) * sigmoid(x)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Value {
        let mut nodes = self.nodes.borrow_mut();
        let numel = value.numel();
        nodes.push(Node { value, op, requires_grad });
        self.grads.borrow_mut().push(vec![0.0; numel]);
        Value(nodes.len() - 1)
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    pub fn shape_of(&self, v: Value) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape.clone()
    }

    pub fn value_of(&self, v: Value) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn item(&self, v: Value) -> f64 {
        let nodes = self.nodes.borrow();
        debug_assert!(nodes[v.0].value.is_scalar());
        nodes[v.0].value.data[0]
    }

    /// Gradient accumulated at a node since the last [`Tape::zero_grads`].
    pub fn grad_of(&self, v: Value) -> Vec<f64> {
        self.grads.borrow()[v.0].clone()
    }

    pub fn zero_grads(&self) {
        for g in self.grads.borrow_mut().iter_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    // ── Leaves ──────────────────────────────────────────────────────────

    pub fn constant(&self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, false)
    }

    pub fn constant_scalar(&self, x: f64) -> Value {
        self.constant(Tensor::scalar(x))
    }

    pub fn constant_vector(&self, data: Vec<f64>) -> Value {
        self.constant(Tensor::vector(data))
    }

    /// Differentiable leaf that is not a named parameter (e.g. a phase-space
    /// input whose gradient is read back directly).
    pub fn leaf(&self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, true)
    }

    /// Differentiable leaf bound to a named entry in a [`Params`] store.
    pub fn param(&self, params: &Params, name: &str) -> Result<Value, AutodiffError> {
        let t = params.get(name)?.clone();
        let v = self.push(t, Op::Leaf, true);
        self.param_leaves.borrow_mut().push((v.0, name.to_string()));
        Ok(v)
    }

    // ── Elementwise and arithmetic primitives ───────────────────────────

    fn binary_same_shape(&self, a: Value, b: Value, op_name: &str) -> Result<(), AutodiffError> {
        let nodes = self.nodes.borrow();
        let (sa, sb) = (&nodes[a.0].value.shape, &nodes[b.0].value.shape);
        if sa != sb {
            return Err(AutodiffError::Shape(format!(
                "{op_name}: operand shapes differ ({sa:?} vs {sb:?})"
            )));
        }
        Ok(())
    }

    pub fn add(&self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        self.binary_same_shape(a, b, "add")?;
        let out = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(b.0);
        Ok(self.push(out, Op::Add(a.0, b.0), rg))
    }

    pub fn sub(&self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        self.binary_same_shape(a, b, "sub")?;
        let out = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x - y).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(b.0);
        Ok(self.push(out, Op::Sub(a.0, b.0), rg))
    }

    pub fn mul(&self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        self.binary_same_shape(a, b, "mul")?;
        let out = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(b.0);
        Ok(self.push(out, Op::Mul(a.0, b.0), rg))
    }

    /// Multiply every element of `a` by the scalar node `s`.
    pub fn scale_by(&self, a: Value, s: Value) -> Result<Value, AutodiffError> {
        {
            let nodes = self.nodes.borrow();
            if !nodes[s.0].value.is_scalar() {
                return Err(AutodiffError::Shape(format!(
                    "scale_by: scale operand must be scalar, got {:?}",
                    nodes[s.0].value.shape
                )));
            }
        }
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let c = nodes[s.0].value.data[0];
            let data = ta.data.iter().map(|x| x * c).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(s.0);
        Ok(self.push(out, Op::ScaleBy(a.0, s.0), rg))
    }

    pub fn scale(&self, a: Value, c: f64) -> Value {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let data = ta.data.iter().map(|x| x * c).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        self.push(out, Op::Scale(a.0, c), rg)
    }

    pub fn add_scalar(&self, a: Value, c: f64) -> Value {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let data = ta.data.iter().map(|x| x + c).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        self.push(out, Op::AddScalar(a.0), rg)
    }

    pub fn neg(&self, a: Value) -> Value {
        self.scale(a, -1.0)
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    /// 2-D matrix product. A 1-D left operand is treated as a single row and
    /// yields a 1-D result.
    pub fn matmul(&self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        let (an, ak, vec_lhs, bk, bm) = {
            let nodes = self.nodes.borrow();
            let (sa, sb) = (&nodes[a.0].value.shape, &nodes[b.0].value.shape);
            let (an, ak, vec_lhs) = match sa.len() {
                1 => (1, sa[0], true),
                2 => (sa[0], sa[1], false),
                _ => {
                    return Err(AutodiffError::Shape(format!(
                        "matmul: left operand must be 1-D or 2-D, got {sa:?}"
                    )))
                }
            };
            if sb.len() != 2 {
                return Err(AutodiffError::Shape(format!(
                    "matmul: right operand must be 2-D, got {sb:?}"
                )));
            }
            (an, ak, vec_lhs, sb[0], sb[1])
        };
        if ak != bk {
            return Err(AutodiffError::Shape(format!(
                "matmul: inner dimensions differ ({ak} vs {bk})"
            )));
        }
        let out = {
            let nodes = self.nodes.borrow();
            let (da, db) = (&nodes[a.0].value.data, &nodes[b.0].value.data);
            let mut data = vec![0.0; an * bm];
            for i in 0..an {
                for k in 0..ak {
                    let aik = da[i * ak + k];
                    if aik == 0.0 {
                        continue;
                    }
                    let brow = &db[k * bm..(k + 1) * bm];
                    let orow = &mut data[i * bm..(i + 1) * bm];
                    for (o, bv) in orow.iter_mut().zip(brow) {
                        *o += aik * bv;
                    }
                }
            }
            let shape = if vec_lhs { vec![bm] } else { vec![an, bm] };
            Tensor { shape, data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(b.0);
        Ok(self.push(out, Op::Matmul(a.0, b.0), rg))
    }

    /// Add a bias row vector `[d]` to every row of `[n, d]` (or to a bare
    /// `[d]` vector).
    pub fn add_bias(&self, a: Value, bias: Value) -> Result<Value, AutodiffError> {
        let (rows, cols) = {
            let nodes = self.nodes.borrow();
            let sa = &nodes[a.0].value.shape;
            let sb = &nodes[bias.0].value.shape;
            let (rows, cols) = match sa.len() {
                1 => (1, sa[0]),
                2 => (sa[0], sa[1]),
                _ => {
                    return Err(AutodiffError::Shape(format!(
                        "add_bias: expected 1-D or 2-D input, got {sa:?}"
                    )))
                }
            };
            if sb.len() != 1 || sb[0] != cols {
                return Err(AutodiffError::Shape(format!(
                    "add_bias: bias {sb:?} does not match row width {cols}"
                )));
            }
            (rows, cols)
        };
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let db = &nodes[bias.0].value.data;
            let mut data = ta.data.clone();
            for r in 0..rows {
                for c in 0..cols {
                    data[r * cols + c] += db[c];
                }
            }
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(bias.0);
        Ok(self.push(out, Op::AddBias(a.0, bias.0), rg))
    }

    /// Add a per-channel bias `[c]` to every column of `[c, t]`.
    pub fn add_chan_bias(&self, a: Value, bias: Value) -> Result<Value, AutodiffError> {
        let (chans, t) = {
            let nodes = self.nodes.borrow();
            let sa = &nodes[a.0].value.shape;
            let sb = &nodes[bias.0].value.shape;
            if sa.len() != 2 {
                return Err(AutodiffError::Shape(format!(
                    "add_chan_bias: expected 2-D input, got {sa:?}"
                )));
            }
            if sb.len() != 1 || sb[0] != sa[0] {
                return Err(AutodiffError::Shape(format!(
                    "add_chan_bias: bias {sb:?} does not match channel count {}",
                    sa[0]
                )));
            }
            (sa[0], sa[1])
        };
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let db = &nodes[bias.0].value.data;
            let mut data = ta.data.clone();
            for c in 0..chans {
                for i in 0..t {
                    data[c * t + i] += db[c];
                }
            }
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0) || self.requires(bias.0);
        Ok(self.push(out, Op::AddChanBias(a.0, bias.0), rg))
    }

    pub fn transpose(&self, a: Value) -> Result<Value, AutodiffError> {
        let (rows, cols) = {
            let nodes = self.nodes.borrow();
            let sa = &nodes[a.0].value.shape;
            if sa.len() != 2 {
                return Err(AutodiffError::Shape(format!(
                    "transpose: expected 2-D input, got {sa:?}"
                )));
            }
            (sa[0], sa[1])
        };
        let out = {
            let nodes = self.nodes.borrow();
            let da = &nodes[a.0].value.data;
            let mut data = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    data[c * rows + r] = da[r * cols + c];
                }
            }
            Tensor { shape: vec![cols, rows], data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        Ok(self.push(out, Op::Transpose(a.0), rg))
    }

    // ── Activations ─────────────────────────────────────────────────────

    fn unary(&self, a: Value, f: impl Fn(f64) -> f64, op: Op) -> Value {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let data = ta.data.iter().map(|&x| f(x)).collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        self.push(out, op, rg)
    }

    pub fn relu(&self, a: Value) -> Value {
        self.unary(a, |x| x.max(0.0), Op::Relu(a.0))
    }

    pub fn tanh(&self, a: Value) -> Value {
        self.unary(a, f64::tanh, Op::Tanh(a.0))
    }

    pub fn exp(&self, a: Value) -> Value {
        self.unary(a, f64::exp, Op::Exp(a.0))
    }

    pub fn log(&self, a: Value) -> Value {
        self.unary(a, f64::ln, Op::Log(a.0))
    }

    /// x · tanh(softplus(x)), with the softplus overflow guard.
    pub fn mish(&self, a: Value) -> Value {
        self.unary(a, mish_scalar, Op::Mish(a.0))
    }

    fn softmax_rows_data(shape: &[usize], data: &[f64], log: bool) -> Vec<f64> {
        let cols = *shape.last().unwrap_or(&1);
        let rows = data.len() / cols.max(1);
        let mut out = vec![0.0; data.len()];
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&x| (x - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for c in 0..cols {
                out[r * cols + c] = if log {
                    (row[c] - m) - z.ln()
                } else {
                    exps[c] / z
                };
            }
        }
        out
    }

    /// Softmax over the last axis (a 1-D input is a single row).
    pub fn softmax(&self, a: Value) -> Result<Value, AutodiffError> {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape.is_empty() || ta.data.is_empty() {
                return Err(AutodiffError::Shape("softmax: empty input".into()));
            }
            let data = Self::softmax_rows_data(&ta.shape, &ta.data, false);
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        Ok(self.push(out, Op::SoftmaxRows(a.0), rg))
    }

    pub fn log_softmax(&self, a: Value) -> Result<Value, AutodiffError> {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape.is_empty() || ta.data.is_empty() {
                return Err(AutodiffError::Shape("log_softmax: empty input".into()));
            }
            let data = Self::softmax_rows_data(&ta.shape, &ta.data, true);
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let rg = self.requires(a.0);
        Ok(self.push(out, Op::LogSoftmaxRows(a.0), rg))
    }

    // ── Reductions ──────────────────────────────────────────────────────

    pub fn sum(&self, a: Value) -> Value {
        let out = {
            let nodes = self.nodes.borrow();
            Tensor::scalar(nodes[a.0].value.data.iter().sum())
        };
        let rg = self.requires(a.0);
        self.push(out, Op::Sum(a.0), rg)
    }

    pub fn mean(&self, a: Value) -> Value {
        let out = {
            let nodes = self.nodes.borrow();
            let d = &nodes[a.0].value.data;
            Tensor::scalar(d.iter().sum::<f64>() / d.len() as f64)
        };
        let rg = self.requires(a.0);
        self.push(out, Op::Mean(a.0), rg)
    }

    // ── Structure ───────────────────────────────────────────────────────

    /// Concatenate 1-D vectors (scalars count as length-1) into one vector.
    pub fn concat(&self, parts: &[Value]) -> Result<Value, AutodiffError> {
        if parts.is_empty() {
            return Err(AutodiffError::Shape("concat: no operands".into()));
        }
        let out = {
            let nodes = self.nodes.borrow();
            let mut data = Vec::new();
            for p in parts {
                let t = &nodes[p.0].value;
                if t.shape.len() > 1 {
                    return Err(AutodiffError::Shape(format!(
                        "concat: expected 1-D or scalar operands, got {:?}",
                        t.shape
                    )));
                }
                data.extend_from_slice(&t.data);
            }
            Tensor::vector(data)
        };
        let rg = parts.iter().any(|p| self.requires(p.0));
        Ok(self.push(out, Op::Concat1d(parts.iter().map(|p| p.0).collect()), rg))
    }

    pub fn slice(&self, a: Value, start: usize, len: usize) -> Result<Value, AutodiffError> {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape.len() > 1 {
                return Err(AutodiffError::Shape(format!(
                    "slice: expected 1-D input, got {:?}",
                    ta.shape
                )));
            }
            if start + len > ta.data.len() {
                return Err(AutodiffError::Shape(format!(
                    "slice: range {}..{} out of bounds for length {}",
                    start,
                    start + len,
                    ta.data.len()
                )));
            }
            Tensor::vector(ta.data[start..start + len].to_vec())
        };
        let rg = self.requires(a.0);
        Ok(self.push(out, Op::Slice1d(a.0, start, len), rg))
    }

    /// Extract row `r` of a 2-D tensor as a vector.
    pub fn row(&self, a: Value, r: usize) -> Result<Value, AutodiffError> {
        let out = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            if ta.shape.len() != 2 {
                return Err(AutodiffError::Shape(format!(
                    "row: expected 2-D input, got {:?}",
                    ta.shape
                )));
            }
            let (rows, cols) = (ta.shape[0], ta.shape[1]);
            if r >= rows {
                return Err(AutodiffError::Shape(format!(
                    "row: index {r} out of bounds for {rows} rows"
                )));
            }
            Tensor::vector(ta.data[r * cols..(r + 1) * cols].to_vec())
        };
        let rg = self.requires(a.0);
        Ok(self.push(out, Op::Row(a.0, r), rg))
    }

    /// Stack equal-length 1-D vectors into a 2-D tensor, one per row.
    pub fn stack_rows(&self, rows: &[Value]) -> Result<Value, AutodiffError> {
        if rows.is_empty() {
            return Err(AutodiffError::Shape("stack_rows: no operands".into()));
        }
        let out = {
            let nodes = self.nodes.borrow();
            let width = nodes[rows[0].0].value.data.len();
            let mut data = Vec::with_capacity(rows.len() * width);
            for p in rows {
                let t = &nodes[p.0].value;
                if t.shape.len() != 1 || t.data.len() != width {
                    return Err(AutodiffError::Shape(format!(
                        "stack_rows: expected 1-D rows of width {width}, got {:?}",
                        t.shape
                    )));
                }
                data.extend_from_slice(&t.data);
            }
            Tensor { shape: vec![rows.len(), width], data, requires_grad: false, grad: None }
        };
        let rg = rows.iter().any(|p| self.requires(p.0));
        Ok(self.push(out, Op::StackRows(rows.iter().map(|p| p.0).collect()), rg))
    }

    /// Dilated causal 1-D convolution. Input `[c_in, t]`, weight
    /// `[c_out, c_in, k]`; output `[c_out, t]`. Causality comes from an
    /// implicit left zero pad of `(k - 1) * dilation`.
    pub fn conv1d_causal(
        &self,
        input: Value,
        weight: Value,
        dilation: usize,
    ) -> Result<Value, AutodiffError> {
        if dilation == 0 {
            return Err(AutodiffError::Shape("conv1d: dilation must be >= 1".into()));
        }
        let (c_in, t, c_out, k) = {
            let nodes = self.nodes.borrow();
            let si = &nodes[input.0].value.shape;
            let sw = &nodes[weight.0].value.shape;
            if si.len() != 2 {
                return Err(AutodiffError::Shape(format!(
                    "conv1d: expected 2-D input [c_in, t], got {si:?}"
                )));
            }
            if sw.len() != 3 {
                return Err(AutodiffError::Shape(format!(
                    "conv1d: expected 3-D weight [c_out, c_in, k], got {sw:?}"
                )));
            }
            if sw[1] != si[0] {
                return Err(AutodiffError::Shape(format!(
                    "conv1d: weight expects {} input channels, input has {}",
                    sw[1], si[0]
                )));
            }
            (si[0], si[1], sw[0], sw[2])
        };
        let out = {
            let nodes = self.nodes.borrow();
            let x = &nodes[input.0].value.data;
            let w = &nodes[weight.0].value.data;
            let mut data = vec![0.0; c_out * t];
            for co in 0..c_out {
                for ci in 0..c_in {
                    for kk in 0..k {
                        let wv = w[(co * c_in + ci) * k + kk];
                        if wv == 0.0 {
                            continue;
                        }
                        let shift = (k - 1 - kk) * dilation;
                        for ti in shift..t {
                            data[co * t + ti] += wv * x[ci * t + (ti - shift)];
                        }
                    }
                }
            }
            Tensor { shape: vec![c_out, t], data, requires_grad: false, grad: None }
        };
        let rg = self.requires(input.0) || self.requires(weight.0);
        Ok(self.push(out, Op::Conv1d { input: input.0, weight: weight.0, dilation }, rg))
    }

    // ── Convenience composites ──────────────────────────────────────────

    pub fn dot(&self, a: Value, b: Value) -> Result<Value, AutodiffError> {
        let m = self.mul(a, b)?;
        Ok(self.sum(m))
    }

    pub fn sum_squares(&self, a: Value) -> Result<Value, AutodiffError> {
        let m = self.mul(a, a)?;
        Ok(self.sum(m))
    }

    /// Inverted-dropout mask applied as a constant; a rate of zero is the
    /// identity.
    pub fn dropout<R: Rng>(&self, a: Value, rate: f64, rng: &mut R) -> Result<Value, AutodiffError> {
        if rate == 0.0 {
            return Ok(a);
        }
        if !(0.0..1.0).contains(&rate) {
            return Err(AutodiffError::Shape(format!("dropout: invalid rate {rate}")));
        }
        let mask = {
            let nodes = self.nodes.borrow();
            let ta = &nodes[a.0].value;
            let keep = 1.0 - rate;
            let data = ta
                .data
                .iter()
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            Tensor { shape: ta.shape.clone(), data, requires_grad: false, grad: None }
        };
        let m = self.constant(mask);
        self.mul(a, m)
    }

    // ── Backward pass ───────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Gradients add into the tape's
    /// accumulators; calling twice without `zero_grads` doubles them.
    pub fn backward(&self, loss: Value) -> Result<(), AutodiffError> {
        {
            let nodes = self.nodes.borrow();
            if !nodes[loss.0].value.is_scalar() {
                return Err(AutodiffError::NonScalarLoss(nodes[loss.0].value.shape.clone()));
            }
        }
        let nodes = self.nodes.borrow();
        let n = nodes.len();
        // Local seed buffer for this sweep; merged into the persistent
        // accumulators as we go so repeated sweeps add up.
        let mut local: Vec<Vec<f64>> = nodes.iter().map(|nd| vec![0.0; nd.value.numel()]).collect();
        local[loss.0][0] = 1.0;
        let mut persistent = self.grads.borrow_mut();
        for id in (0..n).rev() {
            if !nodes[id].requires_grad {
                continue;
            }
            let g = std::mem::take(&mut local[id]);
            if g.iter().all(|&x| x == 0.0) {
                local[id] = g;
                continue;
            }
            for (p, gi) in persistent[id].iter_mut().zip(&g) {
                *p += gi;
            }
            match &nodes[id].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi;
                        local[*b][i] += gi;
                    }
                }
                Op::Sub(a, b) => {
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi;
                        local[*b][i] -= gi;
                    }
                }
                Op::Mul(a, b) => {
                    let da = &nodes[*a].value.data;
                    let db = &nodes[*b].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * db[i];
                        local[*b][i] += gi * da[i];
                    }
                }
                Op::ScaleBy(a, s) => {
                    let da = &nodes[*a].value.data;
                    let c = nodes[*s].value.data[0];
                    let mut gs = 0.0;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * c;
                        gs += gi * da[i];
                    }
                    local[*s][0] += gs;
                }
                Op::Scale(a, c) => {
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * c;
                    }
                }
                Op::AddScalar(a) => {
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi;
                    }
                }
                Op::Matmul(a, b) => {
                    let sa = &nodes[*a].value.shape;
                    let sb = &nodes[*b].value.shape;
                    let (an, ak) = if sa.len() == 1 { (1, sa[0]) } else { (sa[0], sa[1]) };
                    let bm = sb[1];
                    let da = &nodes[*a].value.data;
                    let db = &nodes[*b].value.data;
                    // dA = dC · Bᵀ
                    for i in 0..an {
                        for k in 0..ak {
                            let mut acc = 0.0;
                            for j in 0..bm {
                                acc += g[i * bm + j] * db[k * bm + j];
                            }
                            local[*a][i * ak + k] += acc;
                        }
                    }
                    // dB = Aᵀ · dC
                    for k in 0..ak {
                        for j in 0..bm {
                            let mut acc = 0.0;
                            for i in 0..an {
                                acc += da[i * ak + k] * g[i * bm + j];
                            }
                            local[*b][k * bm + j] += acc;
                        }
                    }
                }
                Op::AddBias(a, bias) => {
                    let cols = nodes[*bias].value.data.len();
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi;
                        local[*bias][i % cols] += gi;
                    }
                }
                Op::AddChanBias(a, bias) => {
                    let sa = &nodes[*a].value.shape;
                    let t = sa[1];
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi;
                        local[*bias][i / t] += gi;
                    }
                }
                Op::Relu(a) => {
                    let da = &nodes[*a].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        if da[i] > 0.0 {
                            local[*a][i] += gi;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let out = &nodes[id].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * (1.0 - out[i] * out[i]);
                    }
                }
                Op::Exp(a) => {
                    let out = &nodes[id].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * out[i];
                    }
                }
                Op::Log(a) => {
                    let da = &nodes[*a].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi / da[i];
                    }
                }
                Op::Mish(a) => {
                    let da = &nodes[*a].value.data;
                    for (i, gi) in g.iter().enumerate() {
                        local[*a][i] += gi * mish_derivative(da[i]);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let out = &nodes[id].value.data;
                    let cols = *nodes[id].value.shape.last().unwrap();
                    let rows = out.len() / cols;
                    for r in 0..rows {
                        let o = &out[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let dot: f64 = o.iter().zip(gr).map(|(oi, gi)| oi * gi).sum();
                        for c in 0..cols {
                            local[*a][r * cols + c] += o[c] * (gr[c] - dot);
                        }
                    }
                }
                Op::LogSoftmaxRows(a) => {
                    let out = &nodes[id].value.data;
                    let cols = *nodes[id].value.shape.last().unwrap();
                    let rows = out.len() / cols;
                    for r in 0..rows {
                        let o = &out[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let gsum: f64 = gr.iter().sum();
                        for c in 0..cols {
                            local[*a][r * cols + c] += gr[c] - o[c].exp() * gsum;
                        }
                    }
                }
                Op::Sum(a) => {
                    let gi = g[0];
                    for x in local[*a].iter_mut() {
                        *x += gi;
                    }
                }
                Op::Mean(a) => {
                    let n = nodes[*a].value.numel() as f64;
                    let gi = g[0] / n;
                    for x in local[*a].iter_mut() {
                        *x += gi;
                    }
                }
                Op::Concat1d(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = nodes[*p].value.numel();
                        for i in 0..len {
                            local[*p][i] += g[off + i];
                        }
                        off += len;
                    }
                }
                Op::Slice1d(a, start, len) => {
                    for i in 0..*len {
                        local[*a][start + i] += g[i];
                    }
                }
                Op::Row(a, r) => {
                    let cols = nodes[id].value.numel();
                    for i in 0..cols {
                        local[*a][r * cols + i] += g[i];
                    }
                }
                Op::Transpose(a) => {
                    let sa = &nodes[*a].value.shape;
                    let (rows, cols) = (sa[0], sa[1]);
                    for r in 0..rows {
                        for c in 0..cols {
                            local[*a][r * cols + c] += g[c * rows + r];
                        }
                    }
                }
                Op::StackRows(parts) => {
                    let width = nodes[parts[0]].value.numel();
                    for (r, p) in parts.iter().enumerate() {
                        for i in 0..width {
                            local[*p][i] += g[r * width + i];
                        }
                    }
                }
                Op::Conv1d { input, weight, dilation } => {
                    let si = &nodes[*input].value.shape;
                    let sw = &nodes[*weight].value.shape;
                    let (c_in, t) = (si[0], si[1]);
                    let (c_out, k) = (sw[0], sw[2]);
                    let x = &nodes[*input].value.data;
                    let w = &nodes[*weight].value.data;
                    for co in 0..c_out {
                        for ci in 0..c_in {
                            for kk in 0..k {
                                let shift = (k - 1 - kk) * dilation;
                                let widx = (co * c_in + ci) * k + kk;
                                let wv = w[widx];
                                let mut gw = 0.0;
                                for ti in shift..t {
                                    let gy = g[co * t + ti];
                                    gw += gy * x[ci * t + (ti - shift)];
                                    local[*input][ci * t + (ti - shift)] += gy * wv;
                                }
                                local[*weight][widx] += gw;
                            }
                        }
                    }
                }
            }
            local[id] = Vec::new();
        }
        Ok(())
    }

    /// Add the gradients of every named parameter leaf into the store.
    pub fn accumulate_param_grads(&self, params: &mut Params) -> Result<(), AutodiffError> {
        let grads = self.grads.borrow();
        for (node, name) in self.param_leaves.borrow().iter() {
            let t = params.get_mut(name)?;
            let g = &grads[*node];
            match &mut t.grad {
                Some(acc) => {
                    for (a, gi) in acc.iter_mut().zip(g) {
                        *a += gi;
                    }
                }
                None => t.grad = Some(g.clone()),
            }
        }
        Ok(())
    }
}
