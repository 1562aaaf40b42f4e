//! Differentiable ops recorded on a [`Graph`].

use super::array::{check_permutation, inverse_permutation, numel, Array, Float};
use super::graph::{Backward, Graph, Var};
use super::kernels::{self, ConvGeom, ConvSaved};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

/// Elementwise binary op; one side may be a single-element tensor.
struct Binary {
    kind: BinaryKind,
}

fn bcast_value<T: Float>(a: &Array<T>, i: usize) -> T {
    if a.len() == 1 {
        a.data()[0]
    } else {
        a.data()[i]
    }
}

fn reduce_to<T: Float>(g: Array<T>, like: &Array<T>) -> Array<T> {
    if like.len() == 1 && g.len() != 1 {
        Array::full(like.shape(), g.sum())
    } else {
        g
    }
}

impl<T: Float> Backward<T> for Binary {
    fn name(&self) -> &'static str {
        match self.kind {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
        }
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let (ga, gb) = match self.kind {
            BinaryKind::Add => (grad.clone(), grad.clone()),
            BinaryKind::Sub => (grad.clone(), grad.map(|v| -v)),
            BinaryKind::Mul => {
                let ga = Array::from_fn(grad.shape(), |i| grad.data()[i] * bcast_value(b, i));
                let gb = Array::from_fn(grad.shape(), |i| grad.data()[i] * bcast_value(a, i));
                (ga, gb)
            }
        };
        vec![Some(reduce_to(ga, a)), Some(reduce_to(gb, b))]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum UnaryKind {
    Sigmoid,
    Silu,
    Exp,
    LeakyRelu(f64),
    MaxScalar(f64),
    Scale(f64),
    AddScalar(f64),
}

struct Unary {
    kind: UnaryKind,
}

fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl UnaryKind {
    fn apply<T: Float>(self, x: T) -> T {
        match self {
            UnaryKind::Sigmoid => sigmoid(x),
            UnaryKind::Silu => x * sigmoid(x),
            UnaryKind::Exp => x.exp(),
            UnaryKind::LeakyRelu(s) => {
                if x > T::zero() {
                    x
                } else {
                    x * T::from_f(s)
                }
            }
            UnaryKind::MaxScalar(c) => x.max(T::from_f(c)),
            UnaryKind::Scale(c) => x * T::from_f(c),
            UnaryKind::AddScalar(c) => x + T::from_f(c),
        }
    }

    fn derivative<T: Float>(self, x: T, y: T) -> T {
        match self {
            UnaryKind::Sigmoid => y * (T::one() - y),
            UnaryKind::Silu => {
                let s = sigmoid(x);
                s * (T::one() + x * (T::one() - s))
            }
            UnaryKind::Exp => y,
            UnaryKind::LeakyRelu(s) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::from_f(s)
                }
            }
            UnaryKind::MaxScalar(c) => {
                if x >= T::from_f(c) {
                    T::one()
                } else {
                    T::zero()
                }
            }
            UnaryKind::Scale(c) => T::from_f(c),
            UnaryKind::AddScalar(_) => T::one(),
        }
    }
}

impl<T: Float> Backward<T> for Unary {
    fn name(&self) -> &'static str {
        match self.kind {
            UnaryKind::Sigmoid => "sigmoid",
            UnaryKind::Silu => "silu",
            UnaryKind::Exp => "exp",
            UnaryKind::LeakyRelu(_) => "leaky_relu",
            UnaryKind::MaxScalar(_) => "max_scalar",
            UnaryKind::Scale(_) => "scale",
            UnaryKind::AddScalar(_) => "add_scalar",
        }
    }

    fn backward(&self, inputs: &[&Array<T>], output: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let x = inputs[0];
        let g = Array::from_fn(x.shape(), |i| {
            grad.data()[i] * self.kind.derivative(x.data()[i], output.data()[i])
        });
        vec![Some(g)]
    }
}

struct SumAll;

impl<T: Float> Backward<T> for SumAll {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        vec![Some(Array::full(inputs[0].shape(), grad.data()[0]))]
    }
}

struct MatMul;

impl<T: Float> Backward<T> for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut da = vec![T::zero(); m * k];
        kernels::gemm_nt(m, n, k, grad.data(), b.data(), &mut da);
        let mut db = vec![T::zero(); k * n];
        kernels::gemm_tn(k, m, n, a.data(), grad.data(), &mut db);
        vec![
            Some(Array::new(a.shape(), da).expect("da")),
            Some(Array::new(b.shape(), db).expect("db")),
        ]
    }
}

/// `x[..., in] · w[in, out] (+ b[out])`.
struct Linear {
    has_bias: bool,
}

impl<T: Float> Backward<T> for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (k, n) = (w.shape()[0], w.shape()[1]);
        let m = x.len() / k;
        let mut dx = vec![T::zero(); m * k];
        kernels::gemm_nt(m, n, k, grad.data(), w.data(), &mut dx);
        let mut dw = vec![T::zero(); k * n];
        kernels::gemm_tn(k, m, n, x.data(), grad.data(), &mut dw);
        let mut out = vec![
            Some(Array::new(x.shape(), dx).expect("dx")),
            Some(Array::new(w.shape(), dw).expect("dw")),
        ];
        if self.has_bias {
            let mut db = vec![T::zero(); n];
            for row in grad.data().chunks(n) {
                for (d, &g) in db.iter_mut().zip(row) {
                    *d += g;
                }
            }
            out.push(Some(Array::new(&[n], db).expect("db")));
        }
        out
    }
}

/// `x[..., E] ⊙ v[E]`.
struct MulLast;

impl<T: Float> Backward<T> for MulLast {
    fn name(&self) -> &'static str {
        "mul_last"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (x, v) = (inputs[0], inputs[1]);
        let e = v.len();
        let dx = Array::from_fn(x.shape(), |i| grad.data()[i] * v.data()[i % e]);
        let mut dv = vec![T::zero(); e];
        for (row_g, row_x) in grad.data().chunks(e).zip(x.data().chunks(e)) {
            for c in 0..e {
                dv[c] += row_g[c] * row_x[c];
            }
        }
        vec![Some(dx), Some(Array::new(v.shape(), dv).expect("dv"))]
    }
}

/// Permute then reshape.
struct ReshapePermute {
    order: Vec<usize>,
    permuted_shape: Vec<usize>,
}

impl<T: Float> Backward<T> for ReshapePermute {
    fn name(&self) -> &'static str {
        "reshape_permute"
    }

    fn backward(&self, _: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let g = grad
            .reshape(&self.permuted_shape)
            .expect("reshape back")
            .permute(&inverse_permutation(&self.order))
            .expect("inverse permute");
        vec![Some(g)]
    }
}

struct Flip {
    axis: usize,
}

impl<T: Float> Backward<T> for Flip {
    fn name(&self) -> &'static str {
        "flip"
    }

    fn backward(&self, _: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        vec![Some(grad.flip(self.axis).expect("flip"))]
    }
}

/// Contiguous slice `[start, start+len)` of the last axis.
struct SliceLast {
    start: usize,
}

impl<T: Float> Backward<T> for SliceLast {
    fn name(&self) -> &'static str {
        "slice_last"
    }

    fn backward(&self, inputs: &[&Array<T>], output: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let x = inputs[0];
        let full = *x.shape().last().unwrap();
        let part = *output.shape().last().unwrap();
        let mut dx = Array::zeros(x.shape());
        for (row_dst, row_g) in dx.data_mut().chunks_mut(full).zip(grad.data().chunks(part)) {
            row_dst[self.start..self.start + part].copy_from_slice(row_g);
        }
        vec![Some(dx)]
    }
}

struct Concat {
    axis: usize,
}

impl<T: Float> Backward<T> for Concat {
    fn name(&self) -> &'static str {
        "concat"
    }

    fn backward(&self, inputs: &[&Array<T>], output: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let outer = numel(&output.shape()[..self.axis]);
        let out_block = numel(&output.shape()[self.axis..]);
        let mut offset = 0;
        inputs
            .iter()
            .map(|x| {
                let block = numel(&x.shape()[self.axis..]);
                let mut d = Vec::with_capacity(x.len());
                for o in 0..outer {
                    let base = o * out_block + offset;
                    d.extend_from_slice(&grad.data()[base..base + block]);
                }
                offset += block;
                Some(Array::new(x.shape(), d).expect("concat grad"))
            })
            .collect()
    }
}

struct Conv<T> {
    saved: ConvSaved<T>,
}

impl<T: Float> Backward<T> for Conv<T> {
    fn name(&self) -> &'static str {
        "conv_nd"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (dx, dw, db) = kernels::conv_nd_backward(grad, inputs[1], inputs[0].shape(), &self.saved);
        vec![Some(dx), Some(dw), Some(db)]
    }
}

struct ConvTranspose {
    geom: ConvGeom,
}

impl<T: Float> Backward<T> for ConvTranspose {
    fn name(&self) -> &'static str {
        "conv_transpose_nd"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (dx, dw, db) = kernels::conv_transpose_nd_backward(grad, inputs[0], inputs[1], &self.geom);
        vec![Some(dx), Some(dw), Some(db)]
    }
}

/// Shared normalization backward. `channel_of(i)` maps a flat index to its
/// affine parameter index.
struct Norm<T> {
    name: &'static str,
    group_len: usize,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    per_channel_groups: Option<usize>,
}

impl<T: Float> Norm<T> {
    fn affine_index(&self, i: usize) -> usize {
        match self.per_channel_groups {
            // instance norm: one affine pair per (b, c) group, indexed by c
            Some(channels) => (i / self.group_len) % channels,
            // layer norm: one affine pair per position in the row
            None => i % self.group_len,
        }
    }
}

impl<T: Float> Backward<T> for Norm<T> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (x, gamma) = (inputs[0], inputs[1]);
        let mut dgamma = vec![T::zero(); gamma.len()];
        let mut dbeta = vec![T::zero(); gamma.len()];
        let mut dxhat = vec![T::zero(); x.len()];
        for i in 0..x.len() {
            let c = self.affine_index(i);
            let g = grad.data()[i];
            dgamma[c] += g * self.xhat[i];
            dbeta[c] += g;
            dxhat[i] = g * gamma.data()[c];
        }
        let dx = kernels::normalize_groups_backward(&dxhat, &self.xhat, &self.inv_std, self.group_len);
        vec![
            Some(Array::new(x.shape(), dx).expect("dx")),
            Some(Array::new(gamma.shape(), dgamma).expect("dgamma")),
            Some(Array::new(gamma.shape(), dbeta).expect("dbeta")),
        ]
    }
}

struct Softmax {
    axis: usize,
}

impl<T: Float> Backward<T> for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn backward(&self, _: &[&Array<T>], output: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        vec![Some(kernels::softmax_backward(output, grad, self.axis))]
    }
}

struct CausalConv1d;

impl<T: Float> Backward<T> for CausalConv1d {
    fn name(&self) -> &'static str {
        "causal_conv1d"
    }

    fn backward(&self, inputs: &[&Array<T>], _: &Array<T>, grad: &Array<T>) -> Vec<Option<Array<T>>> {
        let (dx, dw, db) = kernels::causal_conv1d_backward(grad, inputs[0], inputs[1]);
        vec![Some(dx), Some(dw), Some(db)]
    }
}

fn same_or_scalar(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let na = numel(a);
    let nb = numel(b);
    if a == b || nb == 1 {
        Ok(a.to_vec())
    } else if na == 1 {
        Ok(b.to_vec())
    } else {
        Err(Error::shape(
            op,
            format!("incompatible shapes {a:?} and {b:?} (only scalar or exact-shape broadcasting)"),
        ))
    }
}

impl<T: Float> Graph<T> {
    fn binary(&self, a: Var, b: Var, kind: BinaryKind) -> Result<Var> {
        let name = match kind {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
        };
        self.record(&[a, b], |v| {
            let shape = same_or_scalar(name, v[0].shape(), v[1].shape())?;
            let out = Array::from_fn(&shape, |i| {
                let (x, y) = (bcast_value(v[0], i), bcast_value(v[1], i));
                match kind {
                    BinaryKind::Add => x + y,
                    BinaryKind::Sub => x - y,
                    BinaryKind::Mul => x * y,
                }
            });
            Ok((out, Binary { kind }))
        })
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Add)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Sub)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, BinaryKind::Mul)
    }

    fn unary(&self, a: Var, kind: UnaryKind) -> Result<Var> {
        self.record(&[a], |v| Ok((v[0].map(|x| kind.apply(x)), Unary { kind })))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Sigmoid)
    }

    pub fn silu(&self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Silu)
    }

    pub fn exp(&self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::Exp)
    }

    pub fn relu(&self, a: Var) -> Result<Var> {
        self.unary(a, UnaryKind::LeakyRelu(0.0))
    }

    pub fn leaky_relu(&self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, UnaryKind::LeakyRelu(slope))
    }

    pub fn max_scalar(&self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, UnaryKind::MaxScalar(c))
    }

    pub fn scale(&self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, UnaryKind::Scale(c))
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, UnaryKind::AddScalar(c))
    }

    pub fn sum(&self, a: Var) -> Result<Var> {
        self.record(&[a], |v| Ok((Array::scalar(v[0].sum()), SumAll)))
    }

    pub fn mean(&self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        self.record(&[a, b], |v| Ok((kernels::matmul(v[0], v[1])?, MatMul)))
    }

    /// Applies `w: [in,out]` (and optional `b: [out]`) to the last axis of `x`.
    pub fn linear(&self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.record(&inputs, |v| {
            let (x, w) = (v[0], v[1]);
            let k = *x.shape().last().unwrap();
            if w.ndim() != 2 || w.shape()[0] != k {
                return Err(Error::shape(
                    "linear",
                    format!("input {:?} vs weight {:?}", x.shape(), w.shape()),
                ));
            }
            let n = w.shape()[1];
            let m = x.len() / k;
            let mut out = vec![T::zero(); m * n];
            if let Some(bias) = v.get(2) {
                if bias.shape() != [n] {
                    return Err(Error::shape(
                        "linear",
                        format!("bias {:?} vs {n} outputs", bias.shape()),
                    ));
                }
                for row in out.chunks_mut(n) {
                    row.copy_from_slice(bias.data());
                }
            }
            kernels::gemm(m, k, n, x.data(), w.data(), &mut out);
            let mut shape = x.shape().to_vec();
            *shape.last_mut().unwrap() = n;
            Ok((Array::new(&shape, out)?, Linear { has_bias: v.len() == 3 }))
        })
    }

    /// Scales the last axis of `x` by the vector `v`.
    pub fn mul_last(&self, x: Var, v: Var) -> Result<Var> {
        self.record(&[x, v], |vals| {
            let (x, v) = (vals[0], vals[1]);
            let e = v.len();
            if v.ndim() != 1 || x.shape().last() != Some(&e) {
                return Err(Error::shape(
                    "mul_last",
                    format!("{:?} vs {:?}", x.shape(), v.shape()),
                ));
            }
            let out = Array::from_fn(x.shape(), |i| x.data()[i] * v.data()[i % e]);
            Ok((out, MulLast))
        })
    }

    /// Permutes axes by `order`, then reshapes to `new_shape`.
    pub fn reshape_permute(&self, x: Var, new_shape: &[usize], order: &[usize]) -> Result<Var> {
        self.record(&[x], |v| {
            let x = v[0];
            check_permutation(order, x.ndim())?;
            if numel(new_shape) != x.len() {
                return Err(Error::shape(
                    "reshape_permute",
                    format!("cannot view {:?} as {:?}", x.shape(), new_shape),
                ));
            }
            let p = x.permute(order)?;
            let permuted_shape = p.shape().to_vec();
            let out = p.reshape(new_shape)?;
            Ok((
                out,
                ReshapePermute {
                    order: order.to_vec(),
                    permuted_shape,
                },
            ))
        })
    }

    pub fn reshape(&self, x: Var, new_shape: &[usize]) -> Result<Var> {
        let rank = self.value(x).ndim();
        let identity: Vec<usize> = (0..rank).collect();
        self.reshape_permute(x, new_shape, &identity)
    }

    pub fn permute(&self, x: Var, order: &[usize]) -> Result<Var> {
        let shape = self.shape(x);
        if order.len() != shape.len() {
            return Err(Error::shape(
                "permute",
                format!("order {order:?} for shape {shape:?}"),
            ));
        }
        let new_shape: Vec<usize> = order
            .iter()
            .map(|&a| shape.get(a).copied().unwrap_or(0))
            .collect();
        self.reshape_permute(x, &new_shape, order)
    }

    pub fn flip(&self, x: Var, axis: usize) -> Result<Var> {
        self.record(&[x], |v| Ok((v[0].flip(axis)?, Flip { axis })))
    }

    /// Slice of the last axis.
    pub fn slice_last(&self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.record(&[x], |v| {
            let x = v[0];
            let full = *x.shape().last().unwrap();
            if len == 0 || start + len > full {
                return Err(Error::shape(
                    "slice_last",
                    format!("[{start}, {}) out of range for {:?}", start + len, x.shape()),
                ));
            }
            let mut data = Vec::with_capacity(x.len() / full * len);
            for row in x.data().chunks(full) {
                data.extend_from_slice(&row[start..start + len]);
            }
            let mut shape = x.shape().to_vec();
            *shape.last_mut().unwrap() = len;
            Ok((Array::new(&shape, data)?, SliceLast { start }))
        })
    }

    pub fn concat(&self, xs: &[Var], axis: usize) -> Result<Var> {
        self.record(xs, |v| {
            let first = v[0].shape();
            if axis >= first.len() {
                return Err(Error::InvalidArgument(format!("concat axis {axis} for {first:?}")));
            }
            for x in &v[1..] {
                let s = x.shape();
                if s.len() != first.len()
                    || s[..axis] != first[..axis]
                    || s[axis + 1..] != first[axis + 1..]
                {
                    return Err(Error::shape(
                        "concat",
                        format!("{first:?} and {s:?} differ off axis {axis}"),
                    ));
                }
            }
            let outer = numel(&first[..axis]);
            let mut shape = first.to_vec();
            shape[axis] = v.iter().map(|x| x.shape()[axis]).sum();
            let mut data = Vec::with_capacity(numel(&shape));
            for o in 0..outer {
                for x in v {
                    let block = numel(&x.shape()[axis..]);
                    data.extend_from_slice(&x.data()[o * block..(o + 1) * block]);
                }
            }
            Ok((Array::new(&shape, data)?, Concat { axis }))
        })
    }

    pub fn conv_nd(&self, x: Var, w: Var, bias: Var, stride: &[usize], padding: &[usize]) -> Result<Var> {
        self.record(&[x, w, bias], |v| {
            let (y, saved) = kernels::conv_nd(v[0], v[1], v[2], stride, padding)?;
            Ok((y, Conv { saved }))
        })
    }

    pub fn conv_transpose_nd(
        &self,
        x: Var,
        w: Var,
        bias: Var,
        stride: &[usize],
        padding: &[usize],
    ) -> Result<Var> {
        self.record(&[x, w, bias], |v| {
            let (y, geom) = kernels::conv_transpose_nd(v[0], v[1], v[2], stride, padding)?;
            Ok((y, ConvTranspose { geom }))
        })
    }

    /// Per-(batch, channel) normalization of `x: [B,C,*sp]` with affine `gamma, beta: [C]`.
    pub fn instance_norm(&self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        self.record(&[x, gamma, beta], |v| {
            let (x, gamma, beta) = (v[0], v[1], v[2]);
            if x.ndim() < 3 || gamma.shape() != [x.shape()[1]] || beta.shape() != gamma.shape() {
                return Err(Error::shape(
                    "instance_norm",
                    format!(
                        "input {:?}, gamma {:?}, beta {:?}",
                        x.shape(),
                        gamma.shape(),
                        beta.shape()
                    ),
                ));
            }
            let channels = x.shape()[1];
            let group_len = numel(&x.shape()[2..]);
            let (xhat, inv_std) = kernels::normalize_groups(x.data(), group_len, T::from_f(eps));
            let out = Array::from_fn(x.shape(), |i| {
                let c = (i / group_len) % channels;
                xhat[i] * gamma.data()[c] + beta.data()[c]
            });
            Ok((
                out,
                Norm {
                    name: "instance_norm",
                    group_len,
                    xhat,
                    inv_std,
                    per_channel_groups: Some(channels),
                },
            ))
        })
    }

    /// Normalization over the last axis with affine `gamma, beta: [D]`.
    pub fn layer_norm(&self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        self.record(&[x, gamma, beta], |v| {
            let (x, gamma, beta) = (v[0], v[1], v[2]);
            let d = *x.shape().last().unwrap();
            if gamma.shape() != [d] || beta.shape() != [d] {
                return Err(Error::shape(
                    "layer_norm",
                    format!(
                        "input {:?}, gamma {:?}, beta {:?}",
                        x.shape(),
                        gamma.shape(),
                        beta.shape()
                    ),
                ));
            }
            let (xhat, inv_std) = kernels::normalize_groups(x.data(), d, T::from_f(eps));
            let out = Array::from_fn(x.shape(), |i| {
                xhat[i] * gamma.data()[i % d] + beta.data()[i % d]
            });
            Ok((
                out,
                Norm {
                    name: "layer_norm",
                    group_len: d,
                    xhat,
                    inv_std,
                    per_channel_groups: None,
                },
            ))
        })
    }

    pub fn softmax(&self, x: Var, axis: usize) -> Result<Var> {
        self.record(&[x], |v| Ok((kernels::softmax(v[0], axis)?, Softmax { axis })))
    }

    pub fn causal_conv1d(&self, x: Var, w: Var, bias: Var) -> Result<Var> {
        self.record(&[x, w, bias], |v| {
            Ok((kernels::causal_conv1d(v[0], v[1], v[2])?, CausalConv1d))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], v: &[f64]) -> Array<f64> {
        Array::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let g = Graph::<f64>::new();
        let x = g.param(arr(&[3], &[1., 2., 3.]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[1., 1., 1.]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let g = Graph::<f64>::new();
        let x = g.param(arr(&[3], &[1., 2., 3.]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[2., 4., 6.]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let g = Graph::<f64>::new();
        let x = g.param(arr(&[2], &[1., 2.]));
        let unused = g.param(arr(&[2, 2], &[1., 2., 3., 4.]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(unused).unwrap().data(), &[0.; 4]);
    }

    #[test]
    fn backward_twice_is_an_error() {
        let g = Graph::<f64>::new();
        let x = g.param(arr(&[2], &[1., 2.]));
        let s = g.sum(x).unwrap();
        g.backward(s).unwrap();
        assert!(matches!(g.backward(s), Err(Error::BackwardAlreadyRun)));
    }

    #[test]
    fn backward_needs_scalar() {
        let g = Graph::<f64>::new();
        let x = g.param(arr(&[2], &[1., 2.]));
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn foreign_var_rejected() {
        let g1 = Graph::<f64>::new();
        let g2 = Graph::<f64>::new();
        let x = g1.param(arr(&[1], &[1.]));
        assert!(matches!(g2.sum(x), Err(Error::ForeignVar)));
    }

    #[test]
    fn broadcast_is_scalar_or_exact() {
        let g = Graph::<f64>::new();
        let a = g.constant(arr(&[2, 2], &[1., 2., 3., 4.]));
        let s = g.constant(arr(&[1], &[10.]));
        let v = g.constant(arr(&[2], &[1., 1.]));
        assert_eq!(g.value(g.add(a, s).unwrap()).data(), &[11., 12., 13., 14.]);
        assert!(g.add(a, v).is_err());
    }

    #[test]
    fn pointwise_constants() {
        let g = Graph::<f64>::new();
        let z = g.constant(arr(&[1], &[0.]));
        let one = g.constant(arr(&[1], &[1.]));
        assert_eq!(g.value(g.sigmoid(z).unwrap()).data()[0], 0.5);
        assert_eq!(g.value(g.silu(z).unwrap()).data()[0], 0.0);
        let e = g.value(g.exp(one).unwrap()).data()[0];
        assert!((e - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        let g = Graph::<f32>::new();
        let x = g.constant(Array::new(&[1], vec![100.0f32]).unwrap());
        assert!(matches!(g.exp(x), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn concat_and_slice_are_inverse() {
        let g = Graph::<f64>::new();
        let a = g.constant(Array::from_fn(&[2, 3], |i| i as f64));
        let b = g.constant(Array::from_fn(&[2, 2], |i| 10.0 + i as f64));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.shape(c), vec![2, 5]);
        let back = g.slice_last(c, 3, 2).unwrap();
        assert_eq!(*g.value(back), *g.value(b));
    }
}
