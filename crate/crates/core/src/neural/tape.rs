//! Reverse-mode differentiation over a recorded sequence of vector ops.
//!
//! Every op records its output value; [`Tape::backward`] walks the record in
//! reverse and accumulates parameter gradients. Parameters never connected to
//! the loss receive a zero gradient.

use super::params::{Gradients, ParamId, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatVec { w: ParamId, x: Var },
    Add(Var, Var),
    Sum(Vec<Var>),
    Mul(Var, Var),
    Scale { v: Var, s: Var },
    ScaleConst { v: Var, c: f64 },
    Sigmoid(Var),
    Tanh(Var),
    Slice { a: Var, start: usize },
    MaxPool { inputs: Vec<Var>, winner: Vec<usize> },
    Concat(Vec<Var>),
    Softmax(Var),
    Dot(Var, Var),
    Bce { p: Var, label: f64, clamped: bool },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub const BCE_EPS: f64 = 1e-7;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy with the prediction clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).data.clone();
        self.push(value, Op::Param(id))
    }

    /// `W · x` for a parameter matrix of shape `[rows, cols]`.
    pub fn matvec(&mut self, w: ParamId, x: Var) -> Var {
        let t = self.params.get(w);
        let (rows, cols) = (t.rows(), t.cols());
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), cols, "matvec {}: input width", t.name);
        let mut out = vec![0.0; rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &t.data[r * cols..(r + 1) * cols];
            *o = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        self.push(out, Op::MatVec { w, x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "add: length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x + y).collect();
        self.push(out, Op::Add(a, b))
    }

    pub fn sum(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "sum of nothing");
        let mut out = self.value(vars[0]).to_vec();
        for v in &vars[1..] {
            let vv = self.value(*v);
            assert_eq!(vv.len(), out.len(), "sum: length mismatch");
            out.iter_mut().zip(vv).for_each(|(o, x)| *o += x);
        }
        self.push(out, Op::Sum(vars.to_vec()))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "mul: length mismatch");
        let out = av.iter().zip(bv).map(|(x, y)| x * y).collect();
        self.push(out, Op::Mul(a, b))
    }

    /// Vector `v` times the scalar held in `s`.
    pub fn scale(&mut self, v: Var, s: Var) -> Var {
        let k = self.scalar(s);
        let out = self.value(v).iter().map(|x| x * k).collect();
        self.push(out, Op::Scale { v, s })
    }

    pub fn scale_const(&mut self, v: Var, c: f64) -> Var {
        let out = self.value(v).iter().map(|x| x * c).collect();
        self.push(out, Op::ScaleConst { v, c })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(out, Op::Tanh(a))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a)[start..start + len].to_vec();
        self.push(out, Op::Slice { a, start })
    }

    /// Coordinate-wise max; on ties the earliest input wins the gradient.
    pub fn max_pool(&mut self, inputs: &[Var]) -> Var {
        assert!(!inputs.is_empty(), "max_pool over empty set");
        let width = self.value(inputs[0]).len();
        let mut out = self.value(inputs[0]).to_vec();
        let mut winner = vec![0usize; width];
        for (k, v) in inputs.iter().enumerate().skip(1) {
            let vv = self.value(*v);
            assert_eq!(vv.len(), width, "max_pool: width mismatch");
            for j in 0..width {
                if vv[j] > out[j] {
                    out[j] = vv[j];
                    winner[j] = k;
                }
            }
        }
        self.push(
            out,
            Op::MaxPool {
                inputs: inputs.to_vec(),
                winner,
            },
        )
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out = parts.iter().flat_map(|p| self.value(*p).iter().copied()).collect();
        self.push(out, Op::Concat(parts.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let out = exps.into_iter().map(|e| e / z).collect();
        self.push(out, Op::Softmax(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.len(), bv.len(), "dot: length mismatch");
        let out = vec![av.iter().zip(bv).map(|(x, y)| x * y).sum()];
        self.push(out, Op::Dot(a, b))
    }

    /// Scalar element `i` of `a`.
    pub fn index(&mut self, a: Var, i: usize) -> Var {
        self.slice(a, i, 1)
    }

    pub fn bce(&mut self, p: Var, label: f64) -> Var {
        let raw = self.scalar(p);
        let clamped = !(BCE_EPS..=1.0 - BCE_EPS).contains(&raw);
        self.push(vec![bce_loss(raw, label)], Op::Bce { p, label, clamped })
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads = self.params.zeros_like();
        self.backward_into(loss, &mut grads);
        grads
    }

    /// Accumulates d`loss`/dθ into `out`.
    pub fn backward_into(&self, loss: Var, out: &mut Gradients) {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "loss must be a scalar");
        let mut g: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        g.resize_with(loss.0 + 1, || None);
        g[loss.0] = Some(vec![1.0]);

        fn acc<'a>(g: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
            g[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
        }

        for i in (0..=loss.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let nodes = &self.nodes;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.values[id.0]
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(a, b)| *a += b);
                }
                Op::MatVec { w, x } => {
                    let t = self.params.get(*w);
                    let cols = t.cols();
                    let xv = &nodes[x.0].value;
                    let gw = &mut out.values[w.0];
                    for (r, d) in dy.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        gw[r * cols..(r + 1) * cols]
                            .iter_mut()
                            .zip(xv)
                            .for_each(|(a, b)| *a += d * b);
                    }
                    let gx = acc(&mut g, nodes, *x);
                    for (r, d) in dy.iter().enumerate() {
                        if *d == 0.0 {
                            continue;
                        }
                        gx.iter_mut()
                            .zip(&t.data[r * cols..(r + 1) * cols])
                            .for_each(|(a, b)| *a += d * b);
                    }
                }
                Op::Add(a, b) => {
                    for v in [a, b] {
                        acc(&mut g, nodes, *v)
                            .iter_mut()
                            .zip(&dy)
                            .for_each(|(x, d)| *x += d);
                    }
                }
                Op::Sum(vars) => {
                    for v in vars {
                        acc(&mut g, nodes, *v)
                            .iter_mut()
                            .zip(&dy)
                            .for_each(|(x, d)| *x += d);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    let ga = acc(&mut g, nodes, *a);
                    for j in 0..dy.len() {
                        ga[j] += dy[j] * bv[j];
                    }
                    let gb = acc(&mut g, nodes, *b);
                    for j in 0..dy.len() {
                        gb[j] += dy[j] * av[j];
                    }
                }
                Op::Scale { v, s } => {
                    let k = nodes[s.0].value[0];
                    let vv = &nodes[v.0].value;
                    let ds: f64 = dy.iter().zip(vv).map(|(d, x)| d * x).sum();
                    acc(&mut g, nodes, *v)
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(x, d)| *x += k * d);
                    acc(&mut g, nodes, *s)[0] += ds;
                }
                Op::ScaleConst { v, c } => {
                    acc(&mut g, nodes, *v)
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(x, d)| *x += c * d);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = acc(&mut g, nodes, *a);
                    for j in 0..dy.len() {
                        ga[j] += dy[j] * y[j] * (1.0 - y[j]);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = acc(&mut g, nodes, *a);
                    for j in 0..dy.len() {
                        ga[j] += dy[j] * (1.0 - y[j] * y[j]);
                    }
                }
                Op::Slice { a, start } => {
                    let ga = acc(&mut g, nodes, *a);
                    ga[*start..*start + dy.len()]
                        .iter_mut()
                        .zip(&dy)
                        .for_each(|(x, d)| *x += d);
                }
                Op::MaxPool { inputs, winner } => {
                    for (j, d) in dy.iter().enumerate() {
                        acc(&mut g, nodes, inputs[winner[j]])[j] += d;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = nodes[p.0].value.len();
                        acc(&mut g, nodes, *p)
                            .iter_mut()
                            .zip(&dy[off..off + n])
                            .for_each(|(x, d)| *x += d);
                        off += n;
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let inner: f64 = dy.iter().zip(y).map(|(d, yv)| d * yv).sum();
                    let ga = acc(&mut g, nodes, *a);
                    for j in 0..dy.len() {
                        ga[j] += y[j] * (dy[j] - inner);
                    }
                }
                Op::Dot(a, b) => {
                    let d = dy[0];
                    let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                    acc(&mut g, nodes, *a)
                        .iter_mut()
                        .zip(bv)
                        .for_each(|(x, y)| *x += d * y);
                    acc(&mut g, nodes, *b)
                        .iter_mut()
                        .zip(av)
                        .for_each(|(x, y)| *x += d * y);
                }
                Op::Bce { p, label, clamped } => {
                    if !clamped {
                        let pv = nodes[p.0].value[0];
                        let d = dy[0] * (-label / pv + (1.0 - label) / (1.0 - pv));
                        acc(&mut g, nodes, *p)[0] += d;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_values() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.9, 0.0) - 10f64.ln()).abs() < 1e-12);
        assert!(bce_loss(1.0, 1.0) < 1e-6);
        assert!(bce_loss(0.0, 0.0) < 1e-6);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn identity_gradient_is_one() {
        let mut ps = ParamSet::new();
        let p = ps.add("p", vec![1], vec![0.3]);
        let mut tape = Tape::new(&ps);
        let v = tape.param(p);
        let g = tape.backward(v);
        assert_eq!(g.get(p), &[1.0]);
    }

    #[test]
    fn half_squared_norm_gradient_is_w() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", vec![4], vec![1.0, -2.0, 0.5, 3.0]);
        let mut tape = Tape::new(&ps);
        let v = tape.param(w);
        let sq = tape.dot(v, v);
        let loss = tape.scale_const(sq, 0.5);
        let g = tape.backward(loss);
        assert_eq!(g.get(w), &[1.0, -2.0, 0.5, 3.0]);
    }

    #[test]
    fn detached_parameter_gets_zero() {
        let mut ps = ParamSet::new();
        let a = ps.add("a", vec![1], vec![2.0]);
        let b = ps.add("b", vec![1], vec![5.0]);
        let mut tape = Tape::new(&ps);
        let va = tape.param(a);
        let _unused = tape.param(b);
        let loss = tape.mul(va, va);
        let g = tape.backward(loss);
        assert_eq!(g.get(a), &[4.0]);
        assert_eq!(g.get(b), &[0.0]);
    }

    #[test]
    fn max_pool_tie_goes_to_first() {
        let mut ps = ParamSet::new();
        let px = ps.add("x", vec![2], vec![1.0, 2.0]);
        let py = ps.add("y", vec![2], vec![1.0, 3.0]);
        let mut tape = Tape::new(&ps);
        let (vx, vy) = (tape.param(px), tape.param(py));
        let m = tape.max_pool(&[vx, vy]);
        assert_eq!(tape.value(m), &[1.0, 3.0]);
        let ones = tape.input(vec![1.0, 1.0]);
        let loss = tape.dot(m, ones);
        let g = tape.backward(loss);
        assert_eq!(g.get(px), &[1.0, 0.0]);
        assert_eq!(g.get(py), &[0.0, 1.0]);
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let a = tape.input(vec![1.0, 2.0, 3.0]);
        let b = tape.input(vec![1001.0, 1002.0, 1003.0]);
        let sa = tape.softmax(a);
        let sb = tape.softmax(b);
        let (va, vb) = (tape.value(sa).to_vec(), tape.value(sb).to_vec());
        assert!((va.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (x, y) in va.iter().zip(&vb) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
