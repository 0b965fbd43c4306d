//! Reverse-mode differentiation over small dense vectors and matrices.
//!
//! A [`Tape`] is an append-only record of primitive operations. Every
//! operation evaluates eagerly, so forward values are always available, and
//! [`Tape::backward`] sweeps the record once in reverse to accumulate
//! adjoints. Operands always precede their consumers, which is what makes the
//! single reverse sweep correct.
//!
//! Shapes are `(rows, cols)` with row-major storage; column vectors are
//! `(n, 1)` and scalars `(1, 1)`. A shape mismatch is a programming error and
//! panics at construction. Non-finite forward values do not panic: the tape
//! remembers the first offending node and [`Tape::value_of`] /
//! [`Tape::backward`] report it as [`Error::NonFinite`].

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Constant,
    Param,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    /// scalar node times a tensor node
    ScalarMul(usize, usize),
    MatVec(usize, usize),
    Tanh(usize),
    Square(usize),
    Sqrt(usize),
    Recip(usize),
    Max0(usize),
    Sum(usize),
    NormSq(usize),
    Dot(usize, usize),
    Slice(usize, usize),
    Concat(usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::ScalarMul(..) => "scalar_mul",
            Op::MatVec(..) => "matvec",
            Op::Tanh(..) => "tanh",
            Op::Square(..) => "square",
            Op::Sqrt(..) => "sqrt",
            Op::Recip(..) => "recip",
            Op::Max0(..) => "max0",
            Op::Sum(..) => "sum",
            Op::NormSq(..) => "norm_sq",
            Op::Dot(..) => "dot",
            Op::Slice(..) => "slice",
            Op::Concat(..) => "concat",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    offset: usize,
    len: usize,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    values: Vec<f64>,
    first_non_finite: Option<usize>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            values: Vec::new(),
            first_non_finite: None,
        }
    }

    pub fn with_capacity(nodes: usize, values: usize) -> Self {
        let mut tape = Self::new();
        tape.nodes.reserve(nodes);
        tape.values.reserve(values);
        tape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First node whose forward value was NaN or infinite, if any.
    pub fn non_finite(&self) -> Option<Error> {
        self.first_non_finite.map(|node| Error::NonFinite {
            node,
            op: self.nodes[node].op.name(),
        })
    }

    fn check_owner(&self, v: Var) {
        assert_eq!(v.tape, self.id, "variable belongs to a different tape");
    }

    fn slot(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.index];
        (n.offset, n.len)
    }

    /// Append a node whose values were just pushed onto `self.values`.
    fn finish(&mut self, op: Op, offset: usize, rows: usize, cols: usize) -> Var {
        let len = rows * cols;
        debug_assert_eq!(self.values.len(), offset + len);
        let index = self.nodes.len();
        if self.first_non_finite.is_none() && self.values[offset..].iter().any(|x| !x.is_finite()) {
            self.first_non_finite = Some(index);
        }
        self.nodes.push(Node { op, offset, len });
        Var {
            tape: self.id,
            index,
            rows,
            cols,
        }
    }

    fn leaf(&mut self, op: Op, values: &[f64], rows: usize, cols: usize) -> Var {
        assert_eq!(values.len(), rows * cols, "leaf data does not match shape");
        let offset = self.values.len();
        self.values.extend_from_slice(values);
        self.finish(op, offset, rows, cols)
    }

    pub fn constant(&mut self, values: &[f64], rows: usize, cols: usize) -> Var {
        self.leaf(Op::Constant, values, rows, cols)
    }

    pub fn vector(&mut self, values: &[f64]) -> Var {
        self.leaf(Op::Constant, values, values.len(), 1)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.leaf(Op::Constant, &[value], 1, 1)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        let offset = self.values.len();
        self.values.resize(offset + rows * cols, 0.0);
        self.finish(Op::Constant, offset, rows, cols)
    }

    /// Register a differentiable leaf.
    pub fn param(&mut self, values: &[f64], rows: usize, cols: usize) -> Var {
        self.leaf(Op::Param, values, rows, cols)
    }

    /// Reinterprets the storage of `v` with a new shape of equal size.
    pub fn reshape(&self, v: Var, rows: usize, cols: usize) -> Var {
        self.check_owner(v);
        assert_eq!(v.len(), rows * cols, "reshape must preserve size");
        Var { rows, cols, ..v }
    }

    pub fn values(&self, v: Var) -> &[f64] {
        self.check_owner(v);
        let (off, len) = self.slot(v);
        &self.values[off..off + len]
    }

    /// Forward value of a scalar expression.
    pub fn value_of(&self, v: Var) -> Result<f64> {
        self.check_owner(v);
        if !v.is_scalar() {
            return Err(Error::NotScalar {
                rows: v.rows,
                cols: v.cols,
            });
        }
        if let Some(err) = self.non_finite() {
            return Err(err);
        }
        Ok(self.values(v)[0])
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        self.check_owner(a);
        let (off, len) = self.slot(a);
        let out = self.values.len();
        for i in 0..len {
            let y = f(self.values[off + i]);
            self.values.push(y);
        }
        self.finish(op, out, a.rows, a.cols)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        self.check_owner(a);
        self.check_owner(b);
        assert_eq!(a.shape(), b.shape(), "shape mismatch in `{}`", op.name());
        let (oa, len) = self.slot(a);
        let (ob, _) = self.slot(b);
        let out = self.values.len();
        for i in 0..len {
            let y = f(self.values[oa + i], self.values[ob + i]);
            self.values.push(y);
        }
        self.finish(op, out, a.rows, a.cols)
    }

    fn reduce(&mut self, a: Var, op: Op, f: impl Fn(&[f64]) -> f64) -> Var {
        self.check_owner(a);
        let (off, len) = self.slot(a);
        let y = f(&self.values[off..off + len]);
        let out = self.values.len();
        self.values.push(y);
        self.finish(op, out, 1, 1)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a.index, b.index), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a.index, b.index), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a.index, b.index), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a.index, c), |x| c * x)
    }

    /// Adds a constant to every entry.
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Offset(a.index), |x| x + c)
    }

    /// Broadcasts the scalar `s` over `a`.
    pub fn scalar_mul(&mut self, s: Var, a: Var) -> Var {
        self.check_owner(s);
        self.check_owner(a);
        assert!(s.is_scalar(), "scalar_mul expects a scalar multiplier");
        let c = self.values(s)[0];
        let (off, len) = self.slot(a);
        let out = self.values.len();
        for i in 0..len {
            let y = c * self.values[off + i];
            self.values.push(y);
        }
        self.finish(Op::ScalarMul(s.index, a.index), out, a.rows, a.cols)
    }

    pub fn matvec(&mut self, m: Var, v: Var) -> Var {
        self.check_owner(m);
        self.check_owner(v);
        assert!(
            v.cols == 1 && m.cols == v.rows,
            "matvec shape mismatch: {:?} x {:?}",
            m.shape(),
            v.shape()
        );
        let (om, _) = self.slot(m);
        let (ov, _) = self.slot(v);
        let out = self.values.len();
        for i in 0..m.rows {
            let row = om + i * m.cols;
            let mut acc = 0.0;
            for j in 0..m.cols {
                acc += self.values[row + j] * self.values[ov + j];
            }
            self.values.push(acc);
        }
        self.finish(Op::MatVec(m.index, v.index), out, m.rows, 1)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a.index), f64::tanh)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a.index), |x| x * x)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a.index), f64::sqrt)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, Op::Recip(a.index), |x| 1.0 / x)
    }

    /// Elementwise `max(0, x)`; the subgradient at exactly zero is zero.
    pub fn max0(&mut self, a: Var) -> Var {
        self.unary(a, Op::Max0(a.index), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(a, Op::Sum(a.index), |xs| xs.iter().sum())
    }

    pub fn norm_sq(&mut self, a: Var) -> Var {
        self.reduce(a, Op::NormSq(a.index), |xs| xs.iter().map(|x| x * x).sum())
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        self.check_owner(a);
        self.check_owner(b);
        assert_eq!(a.len(), b.len(), "dot length mismatch");
        let (oa, len) = self.slot(a);
        let (ob, _) = self.slot(b);
        let mut acc = 0.0;
        for i in 0..len {
            acc += self.values[oa + i] * self.values[ob + i];
        }
        let out = self.values.len();
        self.values.push(acc);
        self.finish(Op::Dot(a.index, b.index), out, 1, 1)
    }

    /// Contiguous sub-vector `a[start..start + len]`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        self.check_owner(a);
        assert!(a.cols == 1 && start + len <= a.rows, "slice out of range");
        let (off, _) = self.slot(a);
        let out = self.values.len();
        for i in 0..len {
            let y = self.values[off + start + i];
            self.values.push(y);
        }
        self.finish(Op::Slice(a.index, start), out, len, 1)
    }

    /// Stacks two column vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        self.check_owner(a);
        self.check_owner(b);
        assert!(a.cols == 1 && b.cols == 1, "concat expects column vectors");
        let (oa, la) = self.slot(a);
        let (ob, lb) = self.slot(b);
        let out = self.values.len();
        for i in 0..la {
            let y = self.values[oa + i];
            self.values.push(y);
        }
        for i in 0..lb {
            let y = self.values[ob + i];
            self.values.push(y);
        }
        self.finish(Op::Concat(a.index, b.index), out, la + lb, 1)
    }

    /// Gradient of the scalar `loss` with respect to each of `wrt`,
    /// concatenated in the order given. The tape itself is not modified, so
    /// repeated calls return identical results.
    pub fn backward(&self, loss: Var, wrt: &[Var]) -> Result<Vec<f64>> {
        self.check_owner(loss);
        if !loss.is_scalar() {
            return Err(Error::NotScalar {
                rows: loss.rows,
                cols: loss.cols,
            });
        }
        for p in wrt {
            if p.tape != self.id || p.index >= self.nodes.len() || !matches!(self.nodes[p.index].op, Op::Param) {
                return Err(Error::UnknownParameter { node: p.index });
            }
        }
        if let Some(err) = self.non_finite() {
            return Err(err);
        }

        let mut grad = vec![0.0; self.values.len()];
        grad[self.nodes[loss.index].offset] = 1.0;
        let vals = &self.values;

        for idx in (0..=loss.index).rev() {
            let node = self.nodes[idx];
            let (go, n) = (node.offset, node.len);
            if grad[go..go + n].iter().all(|g| *g == 0.0) {
                continue;
            }
            let off = |i: usize| self.nodes[i].offset;
            match node.op {
                Op::Constant | Op::Param => {}
                Op::Add(a, b) => {
                    let (oa, ob) = (off(a), off(b));
                    for k in 0..n {
                        let g = grad[go + k];
                        grad[oa + k] += g;
                        grad[ob + k] += g;
                    }
                }
                Op::Sub(a, b) => {
                    let (oa, ob) = (off(a), off(b));
                    for k in 0..n {
                        let g = grad[go + k];
                        grad[oa + k] += g;
                        grad[ob + k] -= g;
                    }
                }
                Op::Mul(a, b) => {
                    let (oa, ob) = (off(a), off(b));
                    for k in 0..n {
                        let g = grad[go + k];
                        grad[oa + k] += g * vals[ob + k];
                        grad[ob + k] += g * vals[oa + k];
                    }
                }
                Op::Scale(a, c) => {
                    let oa = off(a);
                    for k in 0..n {
                        grad[oa + k] += c * grad[go + k];
                    }
                }
                Op::Offset(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        grad[oa + k] += grad[go + k];
                    }
                }
                Op::ScalarMul(s, a) => {
                    let (os, oa) = (off(s), off(a));
                    let c = vals[os];
                    let mut gs = 0.0;
                    for k in 0..n {
                        let g = grad[go + k];
                        gs += g * vals[oa + k];
                        grad[oa + k] += c * g;
                    }
                    grad[os] += gs;
                }
                Op::MatVec(m, v) => {
                    let (om, ov) = (off(m), off(v));
                    let cols = self.nodes[v].len;
                    for i in 0..n {
                        let g = grad[go + i];
                        if g == 0.0 {
                            continue;
                        }
                        let row = om + i * cols;
                        for j in 0..cols {
                            grad[row + j] += g * vals[ov + j];
                            grad[ov + j] += g * vals[row + j];
                        }
                    }
                }
                Op::Tanh(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        let y = vals[go + k];
                        grad[oa + k] += grad[go + k] * (1.0 - y * y);
                    }
                }
                Op::Square(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        grad[oa + k] += 2.0 * vals[oa + k] * grad[go + k];
                    }
                }
                Op::Sqrt(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        let y = vals[go + k];
                        if y > 0.0 {
                            grad[oa + k] += grad[go + k] / (2.0 * y);
                        }
                    }
                }
                Op::Recip(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        let y = vals[go + k];
                        grad[oa + k] -= grad[go + k] * y * y;
                    }
                }
                Op::Max0(a) => {
                    let oa = off(a);
                    for k in 0..n {
                        if vals[oa + k] > 0.0 {
                            grad[oa + k] += grad[go + k];
                        }
                    }
                }
                Op::Sum(a) => {
                    let (oa, la) = (off(a), self.nodes[a].len);
                    let g = grad[go];
                    for k in 0..la {
                        grad[oa + k] += g;
                    }
                }
                Op::NormSq(a) => {
                    let (oa, la) = (off(a), self.nodes[a].len);
                    let g = grad[go];
                    for k in 0..la {
                        grad[oa + k] += 2.0 * g * vals[oa + k];
                    }
                }
                Op::Dot(a, b) => {
                    let (oa, ob, la) = (off(a), off(b), self.nodes[a].len);
                    let g = grad[go];
                    for k in 0..la {
                        grad[oa + k] += g * vals[ob + k];
                        grad[ob + k] += g * vals[oa + k];
                    }
                }
                Op::Slice(a, start) => {
                    let oa = off(a) + start;
                    for k in 0..n {
                        grad[oa + k] += grad[go + k];
                    }
                }
                Op::Concat(a, b) => {
                    let (oa, la) = (off(a), self.nodes[a].len);
                    let ob = off(b);
                    for k in 0..la {
                        grad[oa + k] += grad[go + k];
                    }
                    for k in la..n {
                        grad[ob + k - la] += grad[go + k];
                    }
                }
            }
        }

        let mut out = Vec::with_capacity(wrt.iter().map(|p| p.len()).sum());
        for p in wrt {
            let (off, len) = self.slot(*p);
            out.extend_from_slice(&grad[off..off + len]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Central differences of a scalar function built fresh on each call.
    fn finite_diff(x: &[f64], h: f64, f: impl Fn(&mut Tape, Var) -> Var) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let eval = |delta: f64| {
                    let mut xs = x.to_vec();
                    xs[i] += delta;
                    let mut t = Tape::new();
                    let p = t.param(&xs, xs.len(), 1);
                    let y = f(&mut t, p);
                    t.value_of(y).unwrap()
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect()
    }

    fn reverse(x: &[f64], f: impl Fn(&mut Tape, Var) -> Var) -> Vec<f64> {
        let mut t = Tape::new();
        let p = t.param(x, x.len(), 1);
        let y = f(&mut t, p);
        t.backward(y, &[p]).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            let scale = x.abs().max(y.abs()).max(1.0);
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn forward_examples() {
        let mut t = Tape::new();
        let z = t.vector(&[0.0, 0.0]);
        let th = t.tanh(z);
        let s = t.sum(th);
        assert_eq!(t.value_of(s).unwrap(), 0.0);

        let v = t.vector(&[3.0, 4.0]);
        let n = t.norm_sq(v);
        assert_eq!(t.value_of(n).unwrap(), 25.0);

        let neg = t.scalar(-0.1);
        let m = t.max0(neg);
        assert_eq!(t.value_of(m).unwrap(), 0.0);
    }

    #[test]
    fn max0_values_and_subgradient() {
        for (x, y, g) in [(0.3, 0.3, 1.0), (-0.3, 0.0, 0.0), (0.0, 0.0, 0.0)] {
            let mut t = Tape::new();
            let p = t.param(&[x], 1, 1);
            let m = t.max0(p);
            assert_eq!(t.value_of(m).unwrap(), y);
            assert_eq!(t.backward(m, &[p]).unwrap(), vec![g]);
        }
    }

    #[test]
    fn backward_examples() {
        let mut t = Tape::new();
        let p = t.param(&[3.0], 1, 1);
        let sq = t.mul(p, p);
        assert_eq!(t.backward(sq, &[p]).unwrap(), vec![6.0]);

        let mut t = Tape::new();
        let p = t.param(&[0.0], 1, 1);
        let th = t.tanh(p);
        assert_eq!(t.backward(th, &[p]).unwrap(), vec![1.0]);
    }

    #[test]
    fn non_scalar_and_foreign_errors() {
        let mut t = Tape::new();
        let v = t.vector(&[1.0, 2.0]);
        assert!(matches!(t.value_of(v), Err(Error::NotScalar { .. })));
        let s = t.sum(v);
        // constants are not parameters
        assert!(matches!(t.backward(s, &[v]), Err(Error::UnknownParameter { .. })));

        let mut other = Tape::new();
        let q = other.param(&[1.0], 1, 1);
        assert!(matches!(t.backward(s, &[q]), Err(Error::UnknownParameter { .. })));
    }

    #[test]
    fn non_finite_is_reported() {
        let mut t = Tape::new();
        let p = t.param(&[0.0], 1, 1);
        let r = t.recip(p);
        let s = t.sum(r);
        assert!(matches!(t.value_of(s), Err(Error::NonFinite { op: "recip", .. })));
        assert!(matches!(t.backward(s, &[p]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn backward_is_repeatable() {
        let mut t = Tape::new();
        let p = t.param(&[0.3, -1.2, 2.0], 3, 1);
        let th = t.tanh(p);
        let sq = t.mul(th, p);
        let y = t.norm_sq(sq);
        let g1 = t.backward(y, &[p]).unwrap();
        let g2 = t.backward(y, &[p]).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn matvec_and_structural_ops_match_finite_differences() {
        let x = [0.4, -0.7, 1.1, 0.2, -0.3, 0.9, 0.5, -1.4];
        let f = |t: &mut Tape, p: Var| {
            // first six entries form a 2x3 matrix; entries 5..8 double as a vector
            let m_vals = t.slice(p, 0, 6);
            let m = t.reshape(m_vals, 2, 3);
            let v = t.slice(p, 5, 3);
            let mv = t.matvec(m, v);
            let head = t.slice(p, 0, 2);
            let c = t.concat(mv, head);
            let pos = t_abs_plus(t, c);
            let s = t.sqrt(pos);
            let shifted = t.offset(s, 2.0);
            let r = t.recip(shifted);
            let sc = t.scale(r, 3.0);
            let sum = t.sum(sc);
            let k = t.sum(c);
            let scalar = t.square(k);
            let prod = t.scalar_mul(scalar, c);
            let d = t.dot(prod, c);
            t.add(sum, d)
        };
        fn t_abs_plus(t: &mut Tape, v: Var) -> Var {
            let sq = t.square(v);
            t.offset(sq, 1.0)
        }
        assert_close(&reverse(&x, f), &finite_diff(&x, 1e-6, f), 1e-6);
    }

    proptest! {
        #[test]
        fn elementwise_primitives_match_finite_differences(
            xs in proptest::collection::vec(-2.0f64..2.0, 1..6),
            ys in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let n = xs.len();
            let ys = ys[..n].to_vec();
            let f = move |t: &mut Tape, p: Var| {
                let c = t.vector(&ys);
                let a = t.add(p, c);
                let b = t.sub(a, p);
                let m = t.mul(p, a);
                let th = t.tanh(m);
                let sq = t.square(th);
                let nb = t.mul(b, p);
                let h = t.max0(nb);
                let u = t.add(sq, h);
                let s = t.norm_sq(u);
                let q = t.sum(th);
                t.add(s, q)
            };
            let g = reverse(&xs, &f);
            let fd = finite_diff(&xs, 1e-6, &f);
            for (a, b) in g.iter().zip(&fd) {
                let scale = a.abs().max(b.abs()).max(1.0);
                prop_assert!((a - b).abs() <= 1e-5 * scale, "{} vs {}", a, b);
            }
        }

        #[test]
        fn gradient_of_sum_is_sum_of_gradients(
            xs in proptest::collection::vec(-1.5f64..1.5, 3),
            ws in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let part = |which: usize| {
                let ws = ws.clone();
                move |t: &mut Tape, p: Var| {
                    let w = t.vector(&ws);
                    let m = t.mul(p, w);
                    if which == 0 { let th = t.tanh(m); t.norm_sq(th) } else { t.dot(m, p) }
                }
            };
            let ga = reverse(&xs, part(0));
            let gb = reverse(&xs, part(1));
            let both = {
                let (fa, fb) = (part(0), part(1));
                move |t: &mut Tape, p: Var| { let a = fa(t, p); let b = fb(t, p); t.add(a, b) }
            };
            let g = reverse(&xs, both);
            for i in 0..3 {
                prop_assert!((g[i] - (ga[i] + gb[i])).abs() <= 1e-12 * (1.0 + g[i].abs()));
            }
        }
    }
}
