use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamId, ParameterStore};
use super::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Probabilities are clamped to this value before `-log` is taken.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The differentiable kernels a graph can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Matmul,
    Affine,
    Concat,
    Stack,
    Add,
    Hadamard,
    ScaleShift,
    ScalarMul,
    Tanh,
    Sigmoid,
    ReduceSum,
    Minimum,
    EmbeddingLookup,
    Gather,
    ScatterAdd,
    MaskedSoftmax,
    NegLogPick,
}

impl Primitive {
    pub const ALL: [Primitive; 17] = [
        Primitive::Matmul,
        Primitive::Affine,
        Primitive::Concat,
        Primitive::Stack,
        Primitive::Add,
        Primitive::Hadamard,
        Primitive::ScaleShift,
        Primitive::ScalarMul,
        Primitive::Tanh,
        Primitive::Sigmoid,
        Primitive::ReduceSum,
        Primitive::Minimum,
        Primitive::EmbeddingLookup,
        Primitive::Gather,
        Primitive::ScatterAdd,
        Primitive::MaskedSoftmax,
        Primitive::NegLogPick,
    ];
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Matmul(Var, Var),
    Affine(Var, Var, Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Add(Var, Var),
    Hadamard(Var, Var),
    ScaleShift(Var, f64),
    ScalarMul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    ReduceSum(Var),
    Minimum(Var, Var),
    Embedding(Var, usize),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<Option<usize>>),
    MaskedSoftmax(Var),
    NegLogPick(Var, usize),
}

impl Op {
    fn primitive(&self) -> Option<Primitive> {
        Some(match self {
            Op::Constant | Op::Param(_) => return None,
            Op::Matmul(..) => Primitive::Matmul,
            Op::Affine(..) => Primitive::Affine,
            Op::Concat(_) => Primitive::Concat,
            Op::Stack(_) => Primitive::Stack,
            Op::Add(..) => Primitive::Add,
            Op::Hadamard(..) => Primitive::Hadamard,
            Op::ScaleShift(..) => Primitive::ScaleShift,
            Op::ScalarMul(..) => Primitive::ScalarMul,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Sigmoid(_) => Primitive::Sigmoid,
            Op::ReduceSum(_) => Primitive::ReduceSum,
            Op::Minimum(..) => Primitive::Minimum,
            Op::Embedding(..) => Primitive::EmbeddingLookup,
            Op::Gather(..) => Primitive::Gather,
            Op::ScatterAdd(..) => Primitive::ScatterAdd,
            Op::MaskedSoftmax(_) => Primitive::MaskedSoftmax,
            Op::NegLogPick(..) => Primitive::NegLogPick,
        })
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    // `None` for parameters, whose values stay in the store.
    value: Option<Tensor>,
}

/// Per-parameter gradients, indexed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Gradients {
            grads: store.iter().map(|p| vec![0.0; p.value().len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Adds `other` scaled by `weight` into `self`.
    pub fn accumulate(&mut self, other: &Gradients, weight: f64) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += weight * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|x| x.is_finite())
    }
}

/// Append-only computation record over a read-only parameter snapshot.
#[derive(Debug)]
pub struct Graph<'p> {
    store: &'p ParameterStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn shape_err<T>(msg: alloc::string::String) -> Result<T> {
    Err(Error::Shape(msg))
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParameterStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParameterStore {
        self.store
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Kind of primitive that produced `v`; `None` for constants and parameters.
    pub fn primitive(&self, v: Var) -> Option<Primitive> {
        self.nodes[v.0].op.primitive()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Tensor::scalar(x))
    }

    /// The node for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let out = match (sa.as_slice(), sb.as_slice()) {
            (&[m, k], &[k2, n]) if k == k2 => {
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for p in 0..k {
                        let x = va[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        let row = &vb[p * n..(p + 1) * n];
                        for (o, y) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                            *o += x * y;
                        }
                    }
                }
                Tensor::new(vec![m, n], out)?
            }
            (&[m, k], &[k2]) if k == k2 => {
                let out = (0..m)
                    .map(|i| dot(&va[i * k..(i + 1) * k], vb))
                    .collect::<Vec<_>>();
                Tensor::new(vec![m], out)?
            }
            (&[k], &[k2, n]) if k == k2 => {
                let mut out = vec![0.0; n];
                for (p, &x) in va.iter().enumerate() {
                    for (o, y) in out.iter_mut().zip(&vb[p * n..(p + 1) * n]) {
                        *o += x * y;
                    }
                }
                Tensor::new(vec![n], out)?
            }
            _ => return shape_err(format!("matmul of {sa:?} and {sb:?}")),
        };
        Ok(self.push(Op::Matmul(a, b), out))
    }

    /// `w · x + b` for a matrix `w` and vectors `x`, `b`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let (sw, sx, sb) = (self.shape(w), self.shape(x), self.shape(b));
        let (m, k) = match (sw, sx, sb) {
            (&[m, k], &[k2], &[m2]) if k == k2 && m == m2 => (m, k),
            _ => return shape_err(format!("affine with W {sw:?}, x {sx:?}, b {sb:?}")),
        };
        let (vw, vx, vb) = (
            self.value(w).data(),
            self.value(x).data(),
            self.value(b).data(),
        );
        let out = (0..m)
            .map(|i| dot(&vw[i * k..(i + 1) * k], vx) + vb[i])
            .collect::<Vec<_>>();
        Ok(self.push(Op::Affine(w, x, b), Tensor::vector(out)))
    }

    /// Concatenates 1-D tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return shape_err("concat of nothing".into());
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return shape_err(format!("concat of non-vector {:?}", self.shape(p)));
            }
            out.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(out)))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return shape_err("stack of nothing".into());
        };
        let n = match self.shape(first) {
            &[n] => n,
            s => return shape_err(format!("stack of non-vector {s:?}")),
        };
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if self.shape(r) != [n] {
                return shape_err(format!("stack of {:?} with [{n}]", self.shape(r)));
            }
            out.extend_from_slice(self.value(r).data());
        }
        let t = Tensor::new(vec![rows.len(), n], out)?;
        Ok(self.push(Op::Stack(rows.to_vec()), t))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!(
                "{what} of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            ));
        }
        Ok(())
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor {
            shape: ta.shape().to_vec(),
            data,
        }
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let ta = self.value(a);
        Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let t = self.zip_map(a, b, |x, y| x + y);
        Ok(self.push(Op::Add(a, b), t))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "hadamard")?;
        let t = self.zip_map(a, b, |x, y| x * y);
        Ok(self.push(Op::Hadamard(a, b), t))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "minimum")?;
        let t = self.zip_map(a, b, |x, y| if x <= y { x } else { y });
        Ok(self.push(Op::Minimum(a, b), t))
    }

    /// `scale * x + shift` with constant `scale` and `shift`.
    pub fn scale_shift(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let t = self.map(x, |v| scale * v + shift);
        self.push(Op::ScaleShift(x, scale), t)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.scale_shift(x, factor, 0.0)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.scale_shift(x, -1.0, 1.0)
    }

    /// Multiplies every entry of `x` by the scalar `s` (shape `[1]`).
    pub fn scalar_mul(&mut self, s: Var, x: Var) -> Result<Var> {
        if self.shape(s) != [1] {
            return shape_err(format!("scalar_mul by {:?}", self.shape(s)));
        }
        let k = self.value(s).item();
        let t = self.map(x, |v| k * v);
        Ok(self.push(Op::ScalarMul(s, x), t))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.map(x, math::tanh);
        self.push(Op::Tanh(x), t)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.map(x, math::sigmoid);
        self.push(Op::Sigmoid(x), t)
    }

    pub fn reduce_sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::ReduceSum(x), Tensor::scalar(s))
    }

    /// Row `index` of a `[rows, dim]` table.
    pub fn embedding(&mut self, table: Var, index: usize) -> Result<Var> {
        let (rows, dim) = match self.shape(table) {
            &[r, d] => (r, d),
            s => return shape_err(format!("embedding table of shape {s:?}")),
        };
        if index >= rows {
            return Err(Error::Index { index, len: rows });
        }
        let row = self.value(table).data()[index * dim..(index + 1) * dim].to_vec();
        Ok(self.push(Op::Embedding(table, index), Tensor::vector(row)))
    }

    /// Selects entries of a vector.
    pub fn gather(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let n = match self.shape(x) {
            &[n] => n,
            s => return shape_err(format!("gather from {s:?}")),
        };
        if indices.is_empty() {
            return shape_err("gather of no indices".into());
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index: bad, len: n });
        }
        let data = self.value(x).data();
        let out = indices.iter().map(|&i| data[i]).collect();
        Ok(self.push(Op::Gather(x, indices.to_vec()), Tensor::vector(out)))
    }

    /// Adds entry `k` of `x` into position `targets[k]` of a zero vector of
    /// length `out_len`; `None` targets are dropped.
    pub fn scatter_add(&mut self, x: Var, targets: &[Option<usize>], out_len: usize) -> Result<Var> {
        if self.shape(x) != [targets.len()] {
            return shape_err(format!(
                "scatter_add of {:?} with {} targets",
                self.shape(x),
                targets.len()
            ));
        }
        if out_len == 0 {
            return shape_err("scatter_add into empty output".into());
        }
        let mut out = vec![0.0; out_len];
        for (&v, t) in self.value(x).data().iter().zip(targets) {
            if let Some(t) = *t {
                if t >= out_len {
                    return Err(Error::Index {
                        index: t,
                        len: out_len,
                    });
                }
                out[t] += v;
            }
        }
        Ok(self.push(Op::ScatterAdd(x, targets.to_vec()), Tensor::vector(out)))
    }

    /// Softmax over the entries where `mask` is true; zero elsewhere.
    pub fn masked_softmax(&mut self, logits: Var, mask: &[bool]) -> Result<Var> {
        let t = masked_softmax_values(self.value(logits), mask)?;
        Ok(self.push(Op::MaskedSoftmax(logits), t))
    }

    /// Plain softmax over a vector.
    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        let n = self.value(logits).len();
        self.masked_softmax(logits, &vec![true; n])
    }

    /// `-log(max(p[index], LOG_CLAMP))`.
    pub fn neg_log_pick(&mut self, p: Var, index: usize) -> Result<Var> {
        let n = match self.shape(p) {
            &[n] => n,
            s => return shape_err(format!("neg_log_pick from {s:?}")),
        };
        if index >= n {
            return Err(Error::Index { index, len: n });
        }
        let x = self.value(p).data()[index].max(LOG_CLAMP);
        Ok(self.push(Op::NegLogPick(p, index), Tensor::scalar(-math::ln(x))))
    }

    /// Sums scalars or equal-shaped tensors.
    pub fn sum(&mut self, xs: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = xs.split_first() else {
            return shape_err("sum of nothing".into());
        };
        let mut acc = first;
        for &x in rest {
            acc = self.add(acc, x)?;
        }
        Ok(acc)
    }

    /// Reverse pass from a scalar `loss`; every parameter of the store gets a
    /// gradient (zero when it is not on any path to `loss`).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != [1] {
            return shape_err(format!("loss must be scalar, got {:?}", self.shape(loss)));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(self.store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    for (o, x) in out.grads[id.0].iter_mut().zip(&g) {
                        *o += x;
                    }
                }
                Op::Matmul(a, b) => self.back_matmul(&mut grads, *a, *b, &g),
                Op::Affine(w, x, b) => {
                    let (vw, vx) = (self.value(*w).data(), self.value(*x).data());
                    let k = vx.len();
                    acc(&mut grads, *w, vw.len(), |gw| {
                        for (i, &gi) in g.iter().enumerate() {
                            if gi == 0.0 {
                                continue;
                            }
                            for (o, &xj) in gw[i * k..(i + 1) * k].iter_mut().zip(vx) {
                                *o += gi * xj;
                            }
                        }
                    });
                    acc(&mut grads, *x, k, |gx| {
                        for (i, &gi) in g.iter().enumerate() {
                            if gi == 0.0 {
                                continue;
                            }
                            for (o, &wij) in gx.iter_mut().zip(&vw[i * k..(i + 1) * k]) {
                                *o += gi * wij;
                            }
                        }
                    });
                    acc(&mut grads, *b, g.len(), |gb| add_into(gb, &g));
                }
                Op::Concat(parts) | Op::Stack(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        acc(&mut grads, p, n, |gp| add_into(gp, &g[offset..offset + n]));
                        offset += n;
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.len(), |ga| add_into(ga, &g));
                    acc(&mut grads, *b, g.len(), |gb| add_into(gb, &g));
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    acc(&mut grads, *a, g.len(), |ga| {
                        for ((o, &gi), &y) in ga.iter_mut().zip(&g).zip(vb) {
                            *o += gi * y;
                        }
                    });
                    acc(&mut grads, *b, g.len(), |gb| {
                        for ((o, &gi), &x) in gb.iter_mut().zip(&g).zip(va) {
                            *o += gi * x;
                        }
                    });
                }
                Op::ScaleShift(x, s) => {
                    acc(&mut grads, *x, g.len(), |gx| {
                        for (o, &gi) in gx.iter_mut().zip(&g) {
                            *o += s * gi;
                        }
                    });
                }
                Op::ScalarMul(s, x) => {
                    let (k, vx) = (self.value(*s).item(), self.value(*x).data());
                    let gs: f64 = g.iter().zip(vx).map(|(a, b)| a * b).sum();
                    acc(&mut grads, *s, 1, |o| o[0] += gs);
                    acc(&mut grads, *x, g.len(), |gx| {
                        for (o, &gi) in gx.iter_mut().zip(&g) {
                            *o += k * gi;
                        }
                    });
                }
                Op::Tanh(x) => {
                    let y = node.value.as_ref().unwrap().data();
                    acc(&mut grads, *x, g.len(), |gx| {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(&g).zip(y) {
                            *o += gi * (1.0 - yi * yi);
                        }
                    });
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().unwrap().data();
                    acc(&mut grads, *x, g.len(), |gx| {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(&g).zip(y) {
                            *o += gi * yi * (1.0 - yi);
                        }
                    });
                }
                Op::ReduceSum(x) => {
                    let n = self.value(*x).len();
                    acc(&mut grads, *x, n, |gx| {
                        for o in gx.iter_mut() {
                            *o += g[0];
                        }
                    });
                }
                Op::Minimum(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    acc(&mut grads, *a, g.len(), |ga| {
                        for i in 0..g.len() {
                            if va[i] <= vb[i] {
                                ga[i] += g[i];
                            }
                        }
                    });
                    acc(&mut grads, *b, g.len(), |gb| {
                        for i in 0..g.len() {
                            if va[i] > vb[i] {
                                gb[i] += g[i];
                            }
                        }
                    });
                }
                Op::Embedding(table, row) => {
                    let n = self.value(*table).len();
                    let d = g.len();
                    acc(&mut grads, *table, n, |gt| {
                        add_into(&mut gt[row * d..(row + 1) * d], &g)
                    });
                }
                Op::Gather(x, indices) => {
                    let n = self.value(*x).len();
                    acc(&mut grads, *x, n, |gx| {
                        for (&i, &gi) in indices.iter().zip(&g) {
                            gx[i] += gi;
                        }
                    });
                }
                Op::ScatterAdd(x, targets) => {
                    acc(&mut grads, *x, targets.len(), |gx| {
                        for (o, t) in gx.iter_mut().zip(targets) {
                            if let Some(t) = *t {
                                *o += g[t];
                            }
                        }
                    });
                }
                Op::MaskedSoftmax(x) => {
                    let y = node.value.as_ref().unwrap().data();
                    let dot_gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    acc(&mut grads, *x, g.len(), |gx| {
                        for ((o, &gi), &yi) in gx.iter_mut().zip(&g).zip(y) {
                            *o += yi * (gi - dot_gy);
                        }
                    });
                }
                Op::NegLogPick(p, index) => {
                    let vp = self.value(*p).data();
                    let n = vp.len();
                    let x = vp[*index];
                    if x > LOG_CLAMP {
                        acc(&mut grads, *p, n, |gp| gp[*index] -= g[0] / x);
                    }
                }
            }
        }
        Ok(out)
    }

    fn back_matmul(&self, grads: &mut [Option<Vec<f64>>], a: Var, b: Var, g: &[f64]) {
        let (ta, tb) = (self.value(a), self.value(b));
        let (va, vb) = (ta.data(), tb.data());
        match (ta.shape(), tb.shape()) {
            (&[m, k], &[_, n]) => {
                // ga = g · bᵀ, gb = aᵀ · g
                acc(grads, a, m * k, |ga| {
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] += dot(&g[i * n..(i + 1) * n], &vb[p * n..(p + 1) * n]);
                        }
                    }
                });
                acc(grads, b, k * n, |gb| {
                    for i in 0..m {
                        for p in 0..k {
                            let x = va[i * k + p];
                            for (o, &gi) in gb[p * n..(p + 1) * n].iter_mut().zip(&g[i * n..(i + 1) * n]) {
                                *o += x * gi;
                            }
                        }
                    }
                });
            }
            (&[m, k], &[_]) => {
                acc(grads, a, m * k, |ga| {
                    for i in 0..m {
                        for (o, &bj) in ga[i * k..(i + 1) * k].iter_mut().zip(vb) {
                            *o += g[i] * bj;
                        }
                    }
                });
                acc(grads, b, k, |gb| {
                    for i in 0..m {
                        for (o, &aij) in gb.iter_mut().zip(&va[i * k..(i + 1) * k]) {
                            *o += g[i] * aij;
                        }
                    }
                });
            }
            (&[k], &[_, n]) => {
                acc(grads, a, k, |ga| {
                    for (p, o) in ga.iter_mut().enumerate() {
                        *o += dot(&vb[p * n..(p + 1) * n], g);
                    }
                });
                acc(grads, b, k * n, |gb| {
                    for (p, &x) in va.iter().enumerate() {
                        for (o, &gj) in gb[p * n..(p + 1) * n].iter_mut().zip(g) {
                            *o += x * gj;
                        }
                    }
                });
            }
            _ => unreachable!("matmul shapes validated in forward"),
        }
    }
}

pub(crate) fn masked_softmax_values(logits: &Tensor, mask: &[bool]) -> Result<Tensor> {
    if logits.shape().len() != 1 || logits.len() != mask.len() {
        return shape_err(format!(
            "masked_softmax of {:?} with mask of length {}",
            logits.shape(),
            mask.len()
        ));
    }
    let x = logits.data();
    let max = x
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Mask);
    }
    let mut out: Vec<f64> = x
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { math::exp(v - max) } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    for o in &mut out {
        *o /= z;
    }
    Ok(Tensor::vector(out))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}
