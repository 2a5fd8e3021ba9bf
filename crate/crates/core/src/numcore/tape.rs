//! Reverse-mode differentiation over a recorded list of operations.
//!
//! Every op evaluates eagerly and appends a node; [`Tape::backward`] walks
//! the nodes in reverse creation order. Parameter leaves borrow their values
//! from the [`ParamStore`] the tape was opened on.

use super::{Gradients, NumError, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Row {
        param: ParamId,
        row: usize,
    },
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Tanh(Var),
    Sigmoid(Var),
    /// Elementwise max over same-shaped inputs; stores the winning input per
    /// element (first on ties).
    MaxOver(Vec<Var>, Vec<usize>),
    Softmax(Var),
    CrossEntropy {
        probs: Var,
        target: usize,
    },
    SumScalars(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Option<Tensor>,
    op: Op,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> NumError {
    NumError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Tape {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Option<Tensor>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Some(t), Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(None, Op::Param(id))
    }

    /// Row `row` of matrix parameter `id`, as a vector.
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<Var, NumError> {
        let table = self.store.value(id);
        if table.shape().len() != 2 || row >= table.shape()[0] {
            return Err(NumError::RowOutOfRange {
                row,
                shape: table.shape().to_vec(),
            });
        }
        let t = Tensor::vector(table.row(row).to_vec());
        Ok(self.push(Some(t), Op::Row { param: id, row }))
    }

    /// `[m, k] x [k, n] -> [m, n]` or `[m, k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.is_empty() || sb.len() > 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k) = (sa[0], sa[1]);
        let n = if sb.len() == 2 { sb[1] } else { 1 };
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &ad[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (j, &aij) in arow.iter().enumerate() {
                if aij == 0.0 {
                    continue;
                }
                let brow = &bd[j * n..(j + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += aij * b;
                }
            }
        }
        let shape = if sb.len() == 2 { vec![m, n] } else { vec![m] };
        let t = Tensor::new(shape, out)?;
        Ok(self.push(Some(t), Op::MatMul(a, b)))
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let t = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(Some(t), Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let t = self.zip_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Some(t), Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| c * x);
        self.push(Some(t), Op::Scale(a, c))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 1 {
                return Err(NumError::ShapeMismatch {
                    op: "concat",
                    left: t.shape().to_vec(),
                    right: vec![],
                });
            }
            data.extend_from_slice(t.data());
        }
        if data.is_empty() {
            return Err(NumError::EmptyInput("concat"));
        }
        let t = Tensor::vector(data);
        Ok(self.push(Some(t), Op::Concat(parts.to_vec())))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(f64::tanh);
        self.push(Some(t), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(Some(t), Op::Sigmoid(a))
    }

    /// Elementwise maximum across a sequence of same-shaped tensors.
    pub fn max_over(&mut self, items: &[Var]) -> Result<Var, NumError> {
        let first = *items.first().ok_or(NumError::EmptyInput("max_over"))?;
        let mut best = self.value(first).clone();
        let mut arg = vec![0usize; best.len()];
        for (k, &v) in items.iter().enumerate().skip(1) {
            let t = self.value(v);
            if t.shape() != best.shape() {
                return Err(mismatch("max_over", &best, t));
            }
            for (j, &x) in t.data().iter().enumerate() {
                if x > best.data()[j] {
                    best.data_mut()[j] = x;
                    arg[j] = k;
                }
            }
        }
        Ok(self.push(Some(best), Op::MaxOver(items.to_vec(), arg)))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, NumError> {
        let ta = self.value(a);
        if ta.shape().len() != 1 {
            return Err(NumError::ShapeMismatch {
                op: "softmax",
                left: ta.shape().to_vec(),
                right: vec![],
            });
        }
        let t = Tensor::vector(softmax(ta.data()));
        Ok(self.push(Some(t), Op::Softmax(a)))
    }

    /// `-ln probs[target]` for a probability vector.
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var, NumError> {
        let tp = self.value(probs);
        if tp.shape().len() != 1 || target >= tp.len() {
            return Err(NumError::TargetOutOfRange { target, len: tp.len() });
        }
        let p = tp.data()[target].max(f64::MIN_POSITIVE);
        let t = Tensor::scalar(-p.ln());
        Ok(self.push(Some(t), Op::CrossEntropy { probs, target }))
    }

    /// Sum of one-element tensors.
    pub fn sum_scalars(&mut self, items: &[Var]) -> Result<Var, NumError> {
        let mut total = 0.0;
        for &v in items {
            let t = self.value(v);
            if !t.is_scalar() {
                return Err(NumError::NonScalarLoss(t.shape().to_vec()));
            }
            total += t.item();
        }
        Ok(self.push(Some(Tensor::scalar(total)), Op::SumScalars(items.to_vec())))
    }

    /// Gradients of scalar `loss` with respect to every parameter leaf
    /// reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumError> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(NumError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.as_ref();
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.add_dense(*id, &g),
                Op::Row { param, row } => out.add_row(*param, *row, g.data()),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = (ta.shape()[0], ta.shape()[1]);
                    let n = if tb.shape().len() == 2 { tb.shape()[1] } else { 1 };
                    let (ad, bd, gd) = (ta.data(), tb.data(), g.data());
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &gd[i * n..(i + 1) * n];
                        for j in 0..k {
                            let brow = &bd[j * n..(j + 1) * n];
                            ga[i * k + j] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                            let aij = ad[i * k + j];
                            for (acc, &gv) in gb[j * n..(j + 1) * n].iter_mut().zip(grow) {
                                *acc += aij * gv;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, Tensor::new(ta.shape().to_vec(), ga)?);
                    accumulate(&mut grads, *b, Tensor::new(tb.shape().to_vec(), gb)?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = zip(&g, tb, |gv, bv| gv * bv);
                    let gb = zip(&g, ta, |gv, av| gv * av);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.map(|x| c * x)),
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        let piece = Tensor::vector(g.data()[offset..offset + len].to_vec());
                        offset += len;
                        accumulate(&mut grads, p, piece);
                    }
                }
                Op::Tanh(a) => {
                    let y = y.expect("owned");
                    accumulate(&mut grads, *a, zip(&g, y, |gv, yv| gv * (1.0 - yv * yv)));
                }
                Op::Sigmoid(a) => {
                    let y = y.expect("owned");
                    accumulate(&mut grads, *a, zip(&g, y, |gv, yv| gv * yv * (1.0 - yv)));
                }
                Op::MaxOver(items, arg) => {
                    let shape = g.shape().to_vec();
                    let mut pieces: Vec<Option<Vec<f64>>> = vec![None; items.len()];
                    for (j, (&k, &gv)) in arg.iter().zip(g.data()).enumerate() {
                        let piece = pieces[k].get_or_insert_with(|| vec![0.0; g.len()]);
                        piece[j] = gv;
                    }
                    for (k, piece) in pieces.into_iter().enumerate() {
                        if let Some(data) = piece {
                            accumulate(&mut grads, items[k], Tensor::new(shape.clone(), data)?);
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = y.expect("owned");
                    let dot: f64 = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * yv).sum();
                    accumulate(&mut grads, *a, zip(&g, y, |gv, yv| yv * (gv - dot)));
                }
                Op::CrossEntropy { probs, target } => {
                    let tp = self.value(*probs);
                    let p = tp.data()[*target].max(f64::MIN_POSITIVE);
                    let mut gp = Tensor::zeros(tp.shape());
                    gp.data_mut()[*target] = -g.item() / p;
                    accumulate(&mut grads, *probs, gp);
                }
                Op::SumScalars(items) => {
                    for &v in items {
                        accumulate(&mut grads, v, g.clone());
                    }
                }
            }
        }
        Ok(out)
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
