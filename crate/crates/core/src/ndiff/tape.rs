use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

/// Identifies a trainable parameter tensor across tapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Gather { param: ParamId, row: usize },
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Abs(Var),
    Concat(Vec<Var>),
    Tanh(Var),
    Sigmoid(Var),
    Affine { x: Var, scale: T },
    BinaryCrossEntropy { p: Var, label: T },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Receives parameter gradients during [`Tape::backward_into`].
pub trait GradSink<T> {
    /// Gradient for a whole parameter tensor (row-major, same length as the parameter).
    fn dense(&mut self, id: ParamId, grad: &[T]);
    /// Gradient for a single row of a matrix parameter.
    fn row(&mut self, id: ParamId, row: usize, grad: &[T]);
}

/// Dense gradients keyed by parameter, one entry for every parameter registered on the tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    grads: BTreeMap<ParamId, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.grads.iter().map(|(&id, t)| (id, t))
    }
}

impl<T: Scalar> GradSink<T> for Gradients<T> {
    fn dense(&mut self, id: ParamId, grad: &[T]) {
        let t = self.grads.get_mut(&id).expect("parameter registered on tape");
        for (a, &g) in t.data_mut().iter_mut().zip(grad) {
            *a = *a + g;
        }
    }

    fn row(&mut self, id: ParamId, row: usize, grad: &[T]) {
        let t = self.grads.get_mut(&id).expect("parameter registered on tape");
        let cols = t.shape()[1];
        let dst = &mut t.data_mut()[row * cols..(row + 1) * cols];
        for (a, &g) in dst.iter_mut().zip(grad) {
            *a = *a + g;
        }
    }
}

/// Records primitive operations for reverse-mode differentiation.
///
/// A tape is built for one forward pass and discarded after `backward`.
/// Every op checks its operand shapes and rejects non-finite results.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: BTreeMap<ParamId, Vec<usize>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn register(&mut self, id: ParamId, shape: &[usize]) -> Result<()> {
        match self.params.get(&id) {
            Some(existing) if existing.as_slice() != shape => {
                Err(Error::shape("param", existing, shape))
            }
            Some(_) => Ok(()),
            None => {
                self.params.insert(id, shape.to_vec());
                Ok(())
            }
        }
    }

    /// A constant with no gradient.
    pub fn input(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push("input", value, Op::Input)
    }

    /// Records a copy of a parameter tensor.
    pub fn param(&mut self, id: ParamId, value: &Tensor<T>) -> Result<Var> {
        self.register(id, value.shape())?;
        self.push("param", value.clone(), Op::Param(id))
    }

    /// Records row `row` of a matrix parameter (embedding lookup).
    pub fn gather(&mut self, id: ParamId, table: &Tensor<T>, row: usize) -> Result<Var> {
        if table.shape().len() != 2 {
            return Err(Error::shape("gather", table.shape(), &[row]));
        }
        let rows = table.shape()[0];
        if row >= rows {
            return Err(Error::IdOutOfRange { id: row, rows });
        }
        self.register(id, table.shape())?;
        let value = Tensor::vector(table.row(row).to_vec());
        self.push("gather", value, Op::Gather { param: id, row })
    }

    /// Matrix product. Supports `[m,n]x[n,p]`, `[m,n]x[n]` and the inner product `[n]x[n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let value = match (sa, sb) {
            (&[m, n], &[n2, p]) if n == n2 => {
                let (x, y) = (self.value(a).data(), self.value(b).data());
                let mut out = vec![T::zero(); m * p];
                for i in 0..m {
                    for k in 0..n {
                        let xik = x[i * n + k];
                        let yrow = &y[k * p..(k + 1) * p];
                        let orow = &mut out[i * p..(i + 1) * p];
                        for (o, &yv) in orow.iter_mut().zip(yrow) {
                            *o = *o + xik * yv;
                        }
                    }
                }
                Tensor::matrix(m, p, out)?
            }
            (&[m, n], &[n2]) if n == n2 => {
                let (x, y) = (self.value(a).data(), self.value(b).data());
                let out = (0..m).map(|i| dot(&x[i * n..(i + 1) * n], y)).collect();
                Tensor::vector(out)
            }
            (&[n], &[n2]) if n == n2 => {
                Tensor::scalar(dot(self.value(a).data(), self.value(b).data()))
            }
            _ => return Err(Error::shape("matmul", sa, sb)),
        };
        self.push("matmul", value, Op::MatMul(a, b))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(name, ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(name, value, op)
    }

    fn map(&mut self, name: &'static str, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var> {
        let ta = self.value(a);
        let value = Tensor::new(ta.shape().to_vec(), ta.data().iter().map(|&x| f(x)).collect())?;
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("hadamard", a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.map("abs", a, |x| x.abs(), Op::Abs(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map("tanh", a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    /// `scale * x + shift`, element-wise.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Result<Var> {
        self.map("affine", x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 {
                return Err(Error::shape("concat", t.shape(), &[]));
            }
            data.extend_from_slice(t.data());
        }
        self.push("concat", Tensor::vector(data), Op::Concat(parts.to_vec()))
    }

    /// Cross entropy of a probability against a 0/1 label, with `p` clamped to
    /// `[eps, 1 - eps]` before the logarithm. The gradient is zero where the clamp is active.
    pub fn binary_cross_entropy(&mut self, p: Var, label: T) -> Result<Var> {
        let tp = self.value(p);
        let Some(prob) = tp.item().filter(|_| tp.is_scalar()) else {
            return Err(Error::shape("binary_cross_entropy", tp.shape(), &[]));
        };
        let value = Tensor::scalar(cross_entropy(prob, label));
        self.push(
            "binary_cross_entropy",
            value,
            Op::BinaryCrossEntropy { p, label },
        )
    }

    /// Gradients of the scalar `loss` for every parameter recorded on this tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let mut grads = Gradients {
            grads: self
                .params
                .iter()
                .map(|(&id, shape)| (id, Tensor::zeros(shape)))
                .collect(),
        };
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    /// Replays the tape in reverse from `loss`, streaming parameter gradients into `sink`.
    pub fn backward_into(&self, loss: Var, sink: &mut impl GradSink<T>) -> Result<()> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => sink.dense(*id, &g),
                Op::Gather { param, row } => sink.row(*param, *row, &g),
                Op::MatMul(a, b) => self.matmul_backward(*a, *b, &g, &mut adj),
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.iter().copied());
                    accumulate(&mut adj, *b, g.iter().copied());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *a, g.iter().copied());
                    accumulate(&mut adj, *b, g.iter().map(|&v| -v));
                }
                Op::Hadamard(a, b) => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    accumulate(&mut adj, *a, g.iter().zip(vb).map(|(&gi, &y)| gi * y));
                    accumulate(&mut adj, *b, g.iter().zip(va).map(|(&gi, &x)| gi * x));
                }
                Op::Abs(a) => {
                    let va = self.value(*a).data();
                    accumulate(&mut adj, *a, g.iter().zip(va).map(|(&gi, &x)| gi * sign(x)));
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let it = g.iter().zip(y).map(|(&gi, &yi)| gi * (T::one() - yi * yi));
                    accumulate(&mut adj, *a, it);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.data();
                    let it = g.iter().zip(y).map(|(&gi, &yi)| gi * yi * (T::one() - yi));
                    accumulate(&mut adj, *a, it);
                }
                Op::Affine { x, scale } => {
                    accumulate(&mut adj, *x, g.iter().map(|&gi| gi * *scale));
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        accumulate(&mut adj, p, g[offset..offset + n].iter().copied());
                        offset += n;
                    }
                }
                Op::BinaryCrossEntropy { p, label } => {
                    let prob = self.value(*p).data()[0];
                    let d = cross_entropy_grad(prob, *label);
                    accumulate(&mut adj, *p, std::iter::once(g[0] * d));
                }
            }
        }
        Ok(())
    }

    fn matmul_backward(&self, a: Var, b: Var, g: &[T], adj: &mut [Option<Vec<T>>]) {
        let (ta, tb) = (self.value(a), self.value(b));
        let (x, y) = (ta.data(), tb.data());
        match (ta.shape(), tb.shape()) {
            (&[m, n], &[_, p]) => {
                // dA = G B^T, dB = A^T G
                let mut da = vec![T::zero(); m * n];
                let mut db = vec![T::zero(); n * p];
                for i in 0..m {
                    for k in 0..n {
                        let mut acc = T::zero();
                        for j in 0..p {
                            acc = acc + g[i * p + j] * y[k * p + j];
                            db[k * p + j] = db[k * p + j] + x[i * n + k] * g[i * p + j];
                        }
                        da[i * n + k] = acc;
                    }
                }
                accumulate(adj, a, da.into_iter());
                accumulate(adj, b, db.into_iter());
            }
            (&[m, n], &[_]) => {
                let mut da = vec![T::zero(); m * n];
                let mut db = vec![T::zero(); n];
                for i in 0..m {
                    let gi = g[i];
                    let row = &x[i * n..(i + 1) * n];
                    for k in 0..n {
                        da[i * n + k] = gi * y[k];
                        db[k] = db[k] + row[k] * gi;
                    }
                }
                accumulate(adj, a, da.into_iter());
                accumulate(adj, b, db.into_iter());
            }
            _ => {
                let g0 = g[0];
                accumulate(adj, a, y.iter().map(|&v| g0 * v));
                accumulate(adj, b, x.iter().map(|&v| g0 * v));
            }
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Vec<T>>], v: Var, grad: impl Iterator<Item = T>) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (a, g) in existing.iter_mut().zip(grad) {
                *a = *a + g;
            }
        }
        slot @ None => *slot = Some(grad.collect()),
    }
}

/// Clamp bound for probabilities entering a logarithm: `1e-12`, or the type's
/// machine epsilon when that is coarser (so `1 - eps < 1` holds in `f32`).
pub fn probability_epsilon<T: Scalar>() -> T {
    T::of(1e-12).max(T::epsilon())
}

pub(crate) fn cross_entropy<T: Scalar>(p: T, label: T) -> T {
    let eps = probability_epsilon::<T>();
    let pc = p.max(eps).min(T::one() - eps);
    -(label * pc.ln() + (T::one() - label) * (T::one() - pc).ln())
}

fn cross_entropy_grad<T: Scalar>(p: T, label: T) -> T {
    let eps = probability_epsilon::<T>();
    if p < eps || p > T::one() - eps {
        return T::zero();
    }
    -label / p + (T::one() - label) / (T::one() - p)
}
