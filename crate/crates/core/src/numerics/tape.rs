//! A recording tape of matrix operations for reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the nodes in reverse and accumulates the gradient of a scalar loss
//! into the [`ParameterStore`] entries the loss depends on.

use alloc::vec::Vec;

use super::math;
use super::{Matrix, ParamId, ParameterStore};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(NodeId, NodeId),
    Slice { src: NodeId, start: usize },
    Gather { table: NodeId, rows: Vec<usize> },
    Scale(NodeId, f64),
    Sum(NodeId),
    CrossEntropy {
        logits: NodeId,
        targets: Vec<Option<usize>>,
        probs: Matrix,
    },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> NodeId {
        debug_assert!(value.is_finite(), "non-finite value recorded on tape: {op:?}");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Records a copy of a parameter value; `backward` accumulates into it.
    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> NodeId {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape(), "add shape mismatch");
        v.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Add(a, b), rg)
    }

    /// Adds the `1 x n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        let b = self.value(bias);
        assert_eq!((1, v.cols()), b.shape(), "bias shape mismatch");
        for r in 0..v.rows() {
            for (x, y) in v.row_mut(r).iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        self.push(v, Op::AddRow(a, bias), rg)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape(), "mul shape mismatch");
        for (x, y) in v.data_mut().iter_mut().zip(self.value(b).data()) {
            *x *= y;
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(math::sigmoid);
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(math::tanh);
        let rg = self.rg(a);
        self.push(v, Op::Tanh(a), rg)
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.rows(), vb.rows(), "concat row mismatch");
        let mut v = Matrix::zeros(va.rows(), va.cols() + vb.cols());
        for r in 0..va.rows() {
            let row = v.row_mut(r);
            row[..va.cols()].copy_from_slice(va.row(r));
            row[va.cols()..].copy_from_slice(vb.row(r));
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(v, Op::Concat(a, b), rg)
    }

    /// Columns `start .. start + width` of `src`.
    pub fn slice_cols(&mut self, src: NodeId, start: usize, width: usize) -> NodeId {
        let s = self.value(src);
        assert!(start + width <= s.cols(), "slice out of range");
        let mut v = Matrix::zeros(s.rows(), width);
        for r in 0..s.rows() {
            v.row_mut(r).copy_from_slice(&s.row(r)[start..start + width]);
        }
        let rg = self.rg(src);
        self.push(v, Op::Slice { src, start }, rg)
    }

    /// Row lookup: output row `i` is `table[rows[i]]`.
    pub fn gather(&mut self, table: NodeId, rows: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut v = Matrix::zeros(rows.len(), t.cols());
        for (i, &r) in rows.iter().enumerate() {
            v.row_mut(i).copy_from_slice(t.row(r));
        }
        let rg = self.rg(table);
        self.push(
            v,
            Op::Gather {
                table,
                rows: rows.to_vec(),
            },
            rg,
        )
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, s), rg)
    }

    /// Sum of all entries, as a 1x1 node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(v, Op::Sum(a), rg)
    }

    /// Summed softmax cross-entropy over the rows of `logits` whose target is
    /// `Some`. Rows with `None` contribute nothing.
    pub fn cross_entropy_sum(&mut self, logits: NodeId, targets: &[Option<usize>]) -> NodeId {
        let l = self.value(logits);
        assert_eq!(l.rows(), targets.len(), "one target per logits row");
        let mut probs = Matrix::zeros(l.rows(), l.cols());
        let mut total = 0.0;
        for (r, target) in targets.iter().enumerate() {
            let row = l.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (p, &x) in probs.row_mut(r).iter_mut().zip(row) {
                *p = math::exp(x - max);
                z += *p;
            }
            for p in probs.row_mut(r) {
                *p /= z;
            }
            if let Some(t) = *target {
                total += -(row[t] - max - math::ln(z));
            }
        }
        let rg = self.rg(logits);
        self.push(
            Matrix::scalar(total),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        )
    }

    /// Accumulates `d loss / d param` into `store` for every parameter the
    /// 1x1 node `loss` depends on.
    pub fn backward(&self, loss: NodeId, store: &mut ParameterStore) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::State("backward called before any forward computation".into()));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(invalid("backward requires a scalar loss node"));
        }
        let mut grads: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => store.accumulate_grad(*pid, &g),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.matmul_transpose_b(self.value(*b));
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).transpose_a_matmul(&g);
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::AddRow(a, bias) => {
                    if self.rg(*bias) {
                        let mut gb = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (x, y) in gb.data_mut().iter_mut().zip(g.row(r)) {
                                *x += y;
                            }
                        }
                        accumulate(&mut grads, *bias, gb);
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        let mut ga = g.clone();
                        for (x, y) in ga.data_mut().iter_mut().zip(self.value(*b).data()) {
                            *x *= y;
                        }
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let mut gb = g;
                        for (x, y) in gb.data_mut().iter_mut().zip(self.value(*a).data()) {
                            *x *= y;
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    for (x, s) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *x *= s * (1.0 - s);
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    for (x, t) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *x *= 1.0 - t * t;
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Concat(a, b) => {
                    let wa = self.value(*a).cols();
                    let wb = self.value(*b).cols();
                    if self.rg(*a) {
                        let mut ga = Matrix::zeros(g.rows(), wa);
                        for r in 0..g.rows() {
                            ga.row_mut(r).copy_from_slice(&g.row(r)[..wa]);
                        }
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let mut gb = Matrix::zeros(g.rows(), wb);
                        for r in 0..g.rows() {
                            gb.row_mut(r).copy_from_slice(&g.row(r)[wa..]);
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Slice { src, start } => {
                    let s = self.value(*src);
                    let slot = grads[src.0].get_or_insert_with(|| Matrix::zeros(s.rows(), s.cols()));
                    for r in 0..g.rows() {
                        let dst = &mut slot.row_mut(r)[*start..*start + g.cols()];
                        for (x, y) in dst.iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                }
                Op::Gather { table, rows } => {
                    let t = self.value(*table);
                    let slot = grads[table.0].get_or_insert_with(|| Matrix::zeros(t.rows(), t.cols()));
                    for (i, &r) in rows.iter().enumerate() {
                        for (x, y) in slot.row_mut(r).iter_mut().zip(g.row(i)) {
                            *x += y;
                        }
                    }
                }
                Op::Scale(a, s) => {
                    let mut ga = g;
                    ga.scale(*s);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.as_scalar()));
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let upstream = g.as_scalar();
                    let mut gl = Matrix::zeros(probs.rows(), probs.cols());
                    for (r, target) in targets.iter().enumerate() {
                        if let Some(t) = *target {
                            let row = gl.row_mut(r);
                            row.copy_from_slice(probs.row(r));
                            row[t] -= 1.0;
                            for x in row.iter_mut() {
                                *x *= upstream;
                            }
                        }
                    }
                    accumulate(&mut grads, *logits, gl);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, g: Matrix) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn store_with(name: &str, m: Matrix) -> (ParameterStore, ParamId) {
        let mut store = ParameterStore::new();
        let id = store.insert(name, m).unwrap();
        (store, id)
    }

    #[test]
    fn sum_gives_all_ones() {
        let (mut store, id) = store_with("w", Matrix::from_vec(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap());
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let loss = tape.sum(w);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id).data(), &[1.0; 4]);
    }

    #[test]
    fn half_squared_norm_gives_value() {
        let w0 = Matrix::from_vec(1, 3, vec![0.3, -1.5, 2.0]).unwrap();
        let (mut store, id) = store_with("w", w0.clone());
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.mul(w, w);
        let s = tape.sum(sq);
        let loss = tape.scale(s, 0.5);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(id), &w0);
    }

    #[test]
    fn repeated_backward_doubles_exactly() {
        let (mut store, id) = store_with("w", Matrix::from_vec(2, 3, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).unwrap());
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let t = tape.tanh(w);
        let x = tape.constant(Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = tape.matmul(t, x);
        let loss = tape.cross_entropy_sum(y, &[Some(1), Some(0)]);
        tape.backward(loss, &mut store).unwrap();
        let once = store.grad(id).clone();
        tape.backward(loss, &mut store).unwrap();
        for (a, b) in store.grad(id).data().iter().zip(once.data()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let mut store = ParameterStore::new();
        let tape = Tape::new();
        let err = tape.backward(NodeId(0), &mut store).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn unused_parameters_keep_zero_gradient() {
        let mut store = ParameterStore::new();
        let a = store.insert("a", Matrix::filled(1, 2, 1.0)).unwrap();
        let b = store.insert("b", Matrix::filled(1, 2, 1.0)).unwrap();
        let mut tape = Tape::new();
        let na = tape.param(&store, a);
        let _nb = tape.param(&store, b);
        let loss = tape.sum(na);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(b).data(), &[0.0, 0.0]);
    }
}
