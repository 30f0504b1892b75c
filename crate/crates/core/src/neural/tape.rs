//! Reverse-mode automatic differentiation over dense `f64` vectors.
//!
//! A [`Tape`] records every operation of one forward pass. Nodes hold
//! vectors (scalars are vectors of length one, matrices are row-major
//! parameter copies). [`Tape::backward`] walks the tape once in reverse
//! and returns the adjoint of every node.

use super::{Grads, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatVec { w: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MulConst(Var, Vec<f64>),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Expm1(Var),
    Dot(Var, Var),
    Sum(Var),
    Slice(Var, usize),
    Concat(Vec<Var>),
    MaxPool(Vec<Var>, Vec<usize>),
    LogSoftmax(Var),
    Pick(Var, usize),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
    // (rows, cols) for matrix parameters
    dims: (usize, usize),
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node of a tape, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Adjoints(Vec<Vec<f64>>);

impl Adjoints {
    pub fn get(&self, v: Var) -> &[f64] {
        &self.0[v.0]
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

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        let n = value.len();
        self.nodes.push(Node {
            value,
            op,
            dims: (n, 1),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.push(vec![value], Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        let dims = p.dims();
        self.nodes.push(Node {
            value: p.values.clone(),
            op: Op::Param(id),
            dims,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (rows, cols) = self.nodes[w.0].dims;
        let xv = &self.nodes[x.0].value;
        assert_eq!(cols, xv.len(), "matvec: matrix has {cols} columns, vector has {}", xv.len());
        let wv = &self.nodes[w.0].value;
        let out = (0..rows)
            .map(|r| wv[r * cols..(r + 1) * cols].iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(out, Op::MatVec { w, x })
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "elementwise op on lengths {} and {}", av.len(), bv.len());
        let out = av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect();
        self.push(out, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| x * k, Op::Scale(a, k))
    }

    pub fn offset(&mut self, a: Var, k: f64) -> Var {
        self.map(a, |x| x + k, Op::Offset(a))
    }

    pub fn mul_const(&mut self, a: Var, k: Vec<f64>) -> Var {
        let av = &self.nodes[a.0].value;
        assert_eq!(av.len(), k.len());
        let out = av.iter().zip(&k).map(|(x, y)| x * y).collect();
        self.push(out, Op::MulConst(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, f64::exp, Op::Exp(a))
    }

    pub fn expm1(&mut self, a: Var) -> Var {
        self.map(a, f64::exp_m1, Op::Expm1(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len());
        let s = av.iter().zip(bv).map(|(x, y)| x * y).sum();
        self.push(vec![s], Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(vec![s], Op::Sum(a))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.nodes[a.0].value[start..start + len].to_vec();
        self.push(out, Op::Slice(a, start))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.iter().copied())
            .collect();
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Element-wise maximum across equally sized vectors; ties go to the
    /// first input.
    pub fn max_pool(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "max_pool over no inputs");
        let n = self.nodes[parts[0].0].value.len();
        let mut out = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0; n];
        for (k, p) in parts.iter().enumerate() {
            let v = &self.nodes[p.0].value;
            assert_eq!(v.len(), n);
            for i in 0..n {
                if v[i] > out[i] {
                    out[i] = v[i];
                    arg[i] = k;
                }
            }
        }
        self.push(out, Op::MaxPool(parts.to_vec(), arg))
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let v = &self.nodes[a.0].value;
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        let out = v.iter().map(|x| x - lse).collect();
        self.push(out, Op::LogSoftmax(a))
    }

    pub fn pick(&mut self, a: Var, index: usize) -> Var {
        let x = self.nodes[a.0].value[index];
        self.push(vec![x], Op::Pick(a, index))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Adjoints {
        assert_eq!(self.nodes[root.0].value.len(), 1, "backward needs a scalar root");
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); root.0 + 1];
        adj[root.0] = vec![1.0];

        fn acc(adj: &mut [Vec<f64>], v: Var, len: usize) -> &mut Vec<f64> {
            let slot = &mut adj[v.0];
            if slot.is_empty() {
                *slot = vec![0.0; len];
            }
            slot
        }

        for i in (0..=root.0).rev() {
            if adj[i].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param(_) => {}
                Op::MatVec { w, x } => {
                    let (rows, cols) = self.nodes[w.0].dims;
                    let wv = &self.nodes[w.0].value;
                    let xv = &self.nodes[x.0].value;
                    {
                        let gw = acc(&mut adj, *w, rows * cols);
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for (c, xc) in xv.iter().enumerate() {
                                    gw[r * cols + c] += gr * xc;
                                }
                            }
                        }
                    }
                    let gx = acc(&mut adj, *x, cols);
                    for r in 0..rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (c, wc) in wv[r * cols..(r + 1) * cols].iter().enumerate() {
                                gx[c] += gr * wc;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut adj, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut adj, *b, g.len()), &g, 1.0);
                }
                Op::Sub(a, b) => {
                    add_into(acc(&mut adj, *a, g.len()), &g, 1.0);
                    add_into(acc(&mut adj, *b, g.len()), &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * bv[k];
                    }
                    let gb = acc(&mut adj, *b, g.len());
                    for k in 0..g.len() {
                        gb[k] += g[k] * av[k];
                    }
                }
                Op::Div(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] / bv[k];
                    }
                    let gb = acc(&mut adj, *b, g.len());
                    for k in 0..g.len() {
                        gb[k] -= g[k] * av[k] / (bv[k] * bv[k]);
                    }
                }
                Op::Scale(a, k) => add_into(acc(&mut adj, *a, g.len()), &g, *k),
                Op::Offset(a) => add_into(acc(&mut adj, *a, g.len()), &g, 1.0),
                Op::MulConst(a, k) => {
                    let ga = acc(&mut adj, *a, g.len());
                    for j in 0..g.len() {
                        ga[j] += g[j] * k[j];
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                }
                Op::Exp(a) => {
                    let y = &node.value;
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * y[k];
                    }
                }
                Op::Expm1(a) => {
                    let y = &node.value;
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * (y[k] + 1.0);
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let n = av.len();
                    add_into(acc(&mut adj, *a, n), bv, g[0]);
                    add_into(acc(&mut adj, *b, n), av, g[0]);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = acc(&mut adj, *a, n);
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
                Op::Slice(a, start) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = acc(&mut adj, *a, n);
                    for (k, gk) in g.iter().enumerate() {
                        ga[start + k] += gk;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        add_into(acc(&mut adj, *p, n), &g[offset..offset + n], 1.0);
                        offset += n;
                    }
                }
                Op::MaxPool(parts, arg) => {
                    for (k, &winner) in arg.iter().enumerate() {
                        let p = parts[winner];
                        let n = self.nodes[p.0].value.len();
                        acc(&mut adj, p, n)[k] += g[k];
                    }
                }
                Op::LogSoftmax(a) => {
                    // y = x − lse(x): ∂/∂x_i = g_i − softmax_i Σ g
                    let y = &node.value;
                    let total: f64 = g.iter().sum();
                    let ga = acc(&mut adj, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] - y[k].exp() * total;
                    }
                }
                Op::Pick(a, index) => {
                    let n = self.nodes[a.0].value.len();
                    acc(&mut adj, *a, n)[*index] += g[0];
                }
            }
            adj[i] = g;
        }
        adj.resize(self.nodes.len(), Vec::new());
        Adjoints(adj)
    }

    /// Gathers adjoints of parameter nodes into store-aligned buffers.
    pub fn param_grads(&self, adjoints: &Adjoints, store: &ParamStore) -> Grads {
        let mut grads = store.zero_grads();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let a = &adjoints.0[i];
                if !a.is_empty() {
                    add_into(&mut grads.0[id.0], a, 1.0);
                }
            }
        }
        grads
    }
}

fn add_into(dst: &mut [f64], src: &[f64], k: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6;
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    // exercises every op once in a composite scalar function
    fn composite(tape: &mut Tape, x: Var) -> Var {
        let a = tape.slice(x, 0, 3);
        let b = tape.slice(x, 3, 3);
        let s = tape.sigmoid(a);
        let t = tape.tanh(b);
        let m = tape.mul(s, t);
        let d = tape.div(m, s);
        let e = tape.exp(d);
        let em = tape.expm1(t);
        let sum = tape.add(e, em);
        let diff = tape.sub(sum, a);
        let sc = tape.scale(diff, 0.7);
        let off = tape.offset(sc, -0.2);
        let mc = tape.mul_const(off, vec![1.0, -2.0, 0.5]);
        let pool = tape.max_pool(&[mc, a, b]);
        let cat = tape.concat(&[pool, t]);
        let ls = tape.log_softmax(cat);
        let p = tape.pick(ls, 2);
        let dt = tape.dot(cat, cat);
        let su = tape.sum(mc);
        let w = tape.constant(vec![0.3, -0.1, 0.2, 0.5, 0.4, -0.6]);
        let dd = tape.dot(w, x);
        let r = tape.add(p, dt);
        let r = tape.add(r, su);
        tape.add(r, dd)
    }

    #[test]
    fn composite_gradient_matches_finite_differences() {
        let x0 = vec![0.3, -0.4, 0.9, 0.1, -0.7, 0.25];
        let f = |x: &[f64]| {
            let mut t = Tape::new();
            let v = t.constant(x.to_vec());
            let r = composite(&mut t, v);
            t.scalar_value(r)
        };
        let mut t = Tape::new();
        let v = t.constant(x0.clone());
        let r = composite(&mut t, v);
        let adj = t.backward(r);
        let num = fd(f, &x0);
        for (a, n) in adj.get(v).iter().zip(&num) {
            assert!((a - n).abs() < 1e-7, "{a} vs {n}");
        }
    }

    #[test]
    fn matvec_gradients() {
        let mut store = ParamStore::new(0);
        let id = store
            .register("w", &[2, 3], super::super::Init::Uniform(1.0))
            .unwrap();
        let x0 = vec![0.5, -1.0, 2.0];
        let mut t = Tape::new();
        let w = t.param(&store, id);
        let x = t.constant(x0.clone());
        let y = t.matvec(w, x);
        let y2 = t.mul(y, y);
        let r = t.sum(y2);
        let adj = t.backward(r);
        let grads = t.param_grads(&adj, &store);
        let wv = store.get(id).values.clone();
        let f = |w: &[f64]| {
            (0..2)
                .map(|r| (0..3).map(|c| w[r * 3 + c] * x0[c]).sum::<f64>().powi(2))
                .sum::<f64>()
        };
        let num = fd(f, &wv);
        for (a, n) in grads.get(id).iter().zip(&num) {
            assert!((a - n).abs() < 1e-7);
        }
    }

    #[test]
    fn max_pool_ties_go_to_first() {
        let mut t = Tape::new();
        let a = t.constant(vec![1.0, 3.0]);
        let b = t.constant(vec![1.0, 0.0]);
        let p = t.max_pool(&[a, b]);
        assert_eq!(t.value(p), &[1.0, 3.0]);
        let s = t.sum(p);
        let adj = t.backward(s);
        assert_eq!(adj.get(a), &[1.0, 1.0]);
        assert!(adj.get(b).is_empty() || adj.get(b) == [0.0, 0.0]);
    }
}
