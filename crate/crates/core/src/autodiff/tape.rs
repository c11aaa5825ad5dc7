use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::params::{ParamId, ParamStore};
use super::tensor::Shape;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    ParamRow(ParamId, usize),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Abs(Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Shape,
    value: Vec<f64>,
    op: Op,
}

/// Operation record for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Shape, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(shape.numel(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    /// Value of a one-element variable.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        match self.shape(v) {
            Shape::SCALAR => Ok(self.nodes[v.0].value[0]),
            s => Err(Error::NotScalar(s)),
        }
    }

    /// A constant; no gradient flows into it.
    pub fn input(&mut self, shape: Shape, values: Vec<f64>) -> Result<Var> {
        if values.len() != shape.numel() {
            return Err(Error::ShapeMismatch {
                op: "input",
                left: shape,
                right: Shape::Vector(values.len()),
            });
        }
        Ok(self.push(shape, values, Op::Input))
    }

    /// Records the whole parameter once per tape; repeated calls reuse it.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let v = self.push(t.shape(), t.values().to_vec(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    /// One row of a matrix parameter (an embedding lookup).
    pub fn param_row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<Var> {
        let t = store.get(id);
        match t.shape() {
            Shape::Matrix(r, c) if row < r => {
                let value = t.values()[row * c..(row + 1) * c].to_vec();
                Ok(self.push(Shape::Vector(c), value, Op::ParamRow(id, row)))
            }
            s => Err(Error::ShapeMismatch {
                op: "param_row",
                left: s,
                right: Shape::Vector(row + 1),
            }),
        }
    }

    fn vector_len(&self, op: &'static str, v: Var) -> Result<usize> {
        match self.shape(v) {
            Shape::Vector(n) => Ok(n),
            s => Err(Error::ShapeMismatch {
                op,
                left: s,
                right: Shape::Vector(0),
            }),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(sa)
    }

    fn zip_with(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var> {
        let shape = self.same_shape(op, a, b)?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(self.push(shape, value, rec))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, rec: Op) -> Var {
        let shape = self.shape(a);
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        self.push(shape, value, rec)
    }

    /// `W x` for `W: [m x n]`, `x: [n]`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (sw, sx) = (self.shape(w), self.shape(x));
        let (m, n) = match (sw, sx) {
            (Shape::Matrix(m, n), Shape::Vector(k)) if n == k => (m, n),
            _ => {
                return Err(Error::ShapeMismatch {
                    op: "matvec",
                    left: sw,
                    right: sx,
                })
            }
        };
        let mut out = vec![0.0; m];
        kernels::matvec(self.value(w), self.value(x), &mut out);
        debug_assert_eq!(self.value(x).len(), n);
        Ok(self.push(Shape::Vector(m), out, Op::MatVec(w, x)))
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

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, libm::fabs, Op::Abs(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, kernels::sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, kernels::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, kernels::relu, Op::Relu(a))
    }

    /// Elementwise `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, kernels::softplus, Op::Softplus(a))
    }

    /// Concatenation of vectors, in argument order.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut value = Vec::new();
        for &p in parts {
            self.vector_len("concat", p)?;
            value.extend_from_slice(self.value(p));
        }
        if value.is_empty() {
            return Err(Error::ShapeMismatch {
                op: "concat",
                left: Shape::Vector(0),
                right: Shape::Vector(0),
            });
        }
        Ok(self.push(Shape::Vector(value.len()), value, Op::Concat(parts.to_vec())))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(Shape::SCALAR, vec![s], Op::Sum(a))
    }

    /// Accumulates `d loss / d p` into every store parameter `p` reachable
    /// from `loss`. Gradients add up: a second call doubles them.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let shape = self.shape(loss);
        if shape != Shape::SCALAR {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    if let Some(dst) = store.get_mut(*id).grad_mut() {
                        dst.iter_mut().zip(&g).for_each(|(d, x)| *d += x);
                    }
                }
                Op::ParamRow(id, row) => {
                    let t = store.get_mut(*id);
                    let c = g.len();
                    if let Some(dst) = t.grad_mut() {
                        dst[row * c..(row + 1) * c]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(d, x)| *d += x);
                    }
                }
                Op::MatVec(w, x) => {
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    let n = xv.len();
                    {
                        let dw = slot(&mut grads, *w, wv.len());
                        for (gi, row) in g.iter().zip(dw.chunks_exact_mut(n)) {
                            kernels::axpy(*gi, xv, row);
                        }
                    }
                    let dx = slot(&mut grads, *x, n);
                    for (gi, row) in g.iter().zip(wv.chunks_exact(n)) {
                        kernels::axpy(*gi, row, dx);
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, _| x, &[]);
                    add_into(slot(&mut grads, *b, g.len()), &g, |x, _| x, &[]);
                }
                Op::Sub(a, b) => {
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, _| x, &[]);
                    add_into(slot(&mut grads, *b, g.len()), &g, |x, _| -x, &[]);
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, y| x * y, bv);
                    add_into(slot(&mut grads, *b, g.len()), &g, |x, y| x * y, av);
                }
                Op::Abs(a) => {
                    let av = self.value(*a);
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, y| x * sign(y), av);
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, _| x * c, &[]);
                }
                Op::Sigmoid(a) => {
                    let out = &node.value;
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, s| x * s * (1.0 - s), out);
                }
                Op::Tanh(a) => {
                    let out = &node.value;
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, t| x * (1.0 - t * t), out);
                }
                Op::Relu(a) => {
                    let av = self.value(*a);
                    add_into(
                        slot(&mut grads, *a, g.len()),
                        &g,
                        |x, y| if y > 0.0 { x } else { 0.0 },
                        av,
                    );
                }
                Op::Softplus(a) => {
                    let av = self.value(*a);
                    add_into(slot(&mut grads, *a, g.len()), &g, |x, y| x * kernels::sigmoid(y), av);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        let dst = slot(&mut grads, *p, n);
                        dst.iter_mut().zip(&g[off..off + n]).for_each(|(d, x)| *d += x);
                        off += n;
                    }
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    let dst = slot(&mut grads, *a, n);
                    dst.iter_mut().for_each(|d| *d += g[0]);
                }
            }
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

/// `dst[i] += f(g[i], aux[i])`; `aux` may be empty when unused.
#[inline]
fn add_into(dst: &mut [f64], g: &[f64], f: impl Fn(f64, f64) -> f64, aux: &[f64]) {
    if aux.is_empty() {
        dst.iter_mut().zip(g).for_each(|(d, &x)| *d += f(x, 0.0));
    } else {
        dst.iter_mut()
            .zip(g)
            .zip(aux)
            .for_each(|((d, &x), &y)| *d += f(x, y));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn store_with(values: &[f64]) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::new(Shape::Vector(values.len()), values.to_vec()).unwrap());
        (s, id)
    }

    #[test]
    fn relu_and_identity_hadamard() {
        let mut t = Tape::new();
        let a = t.input(Shape::Vector(3), vec![-1.0, 0.0, 2.0]).unwrap();
        let r = t.relu(a);
        assert_eq!(t.value(r), &[0.0, 0.0, 2.0]);
        let ones = t.input(Shape::Vector(3), vec![1.0; 3]).unwrap();
        let h = t.hadamard(a, ones).unwrap();
        assert_eq!(t.value(h), t.value(a));
    }

    #[test]
    fn sum_of_squares_gradient() {
        let (mut s, id) = store_with(&[1.0, 2.0]);
        let mut t = Tape::new();
        let x = t.param(&s, id);
        let sq = t.hadamard(x, x).unwrap();
        let loss = t.sum(sq);
        t.backward(loss, &mut s).unwrap();
        assert_eq!(s.get(id).grad().unwrap(), &[2.0, 4.0]);
        t.backward(loss, &mut s).unwrap();
        assert_eq!(s.get(id).grad().unwrap(), &[4.0, 8.0]);
    }

    #[test]
    fn constant_loss_gives_zero_grads() {
        let (mut s, id) = store_with(&[1.0, 2.0]);
        let mut t = Tape::new();
        let _x = t.param(&s, id);
        let c = t.input(Shape::SCALAR, vec![3.0]).unwrap();
        t.backward(c, &mut s).unwrap();
        assert_eq!(s.get(id).grad().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn errors_name_both_shapes() {
        let mut t = Tape::new();
        let a = t.input(Shape::Vector(2), vec![0.0; 2]).unwrap();
        let b = t.input(Shape::Vector(3), vec![0.0; 3]).unwrap();
        let e = t.add(a, b).unwrap_err();
        assert_eq!(alloc::format!("{e}"), "shape mismatch in add: [2] vs [3]");
        let w = t.input(Shape::Matrix(2, 2), vec![0.0; 4]).unwrap();
        assert!(t.matvec(w, b).is_err());
        let (mut s, _) = store_with(&[1.0]);
        assert_eq!(t.backward(a, &mut s), Err(Error::NotScalar(Shape::Vector(2))));
    }

    #[test]
    fn add_and_hadamard_commute_bitwise() {
        let mut t = Tape::new();
        let a = t.input(Shape::Vector(4), vec![0.1, -3.7, 1e-9, 2.5e10]).unwrap();
        let b = t.input(Shape::Vector(4), vec![0.7, 1.3, -4e-3, 3.3]).unwrap();
        let ab = t.add(a, b).unwrap();
        let ba = t.add(b, a).unwrap();
        assert_eq!(t.value(ab), t.value(ba));
        let ab = t.hadamard(a, b).unwrap();
        let ba = t.hadamard(b, a).unwrap();
        assert_eq!(t.value(ab), t.value(ba));
    }
}
