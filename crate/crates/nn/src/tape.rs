//! Wengert-list reverse-mode autodiff.
//!
//! A [`Tape`] records every primitive applied during one forward pass. Each
//! recorded node owns its output value; [`Tape::backward`] walks the list in
//! reverse (recording order is a topological order) and accumulates
//! vector-Jacobian products into the leaves. A tape is consumed by its
//! backward pass; a new forward pass needs a new tape.

use crate::error::{dim_err, NnError, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding of `(k - 1) / 2` on each side.
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Dense { x: usize, w: usize, b: usize },
    MatMul { a: usize, b: usize },
    BatchMatVec { a: usize, x: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    AddScalar { a: usize, s: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    Relu { a: usize },
    Conv2d { x: usize, k: usize, b: usize, g: ConvGeom },
    MaxPool2 { a: usize, argmax: Vec<usize> },
    Upsample2 { a: usize },
    SpatialMean { a: usize },
    Reshape { a: usize },
    Sum { a: usize },
    Mean { a: usize },
    Mse { a: usize, target: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_of(t: &Tensor) -> &[usize] {
    t.shape()
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

    /// Records a leaf. Its gradient is tracked when `t.requires_grad` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad;
        self.push(Op::Leaf, t, needs_grad)
    }

    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_grad())
    }

    pub fn constant(&mut self, mut t: Tensor) -> Var {
        t.requires_grad = false;
        self.leaf(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn open(&self) -> Result<()> {
        if self.consumed {
            return Err(NnError::Contract(
                "tape already consumed by backward; record a new forward pass".into(),
            ));
        }
        Ok(())
    }

    fn ng(&self, vars: &[usize]) -> bool {
        vars.iter().any(|&i| self.nodes[i].needs_grad)
    }

    fn make(&self, shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).expect("internal shape bookkeeping")
    }

    /// `y = x W + b` for `x: [batch, in]`, `W: [in, out]`, `b: [out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.open()?;
        let (xs, ws, bs) = (
            shape_of(self.value(x)),
            shape_of(self.value(w)),
            shape_of(self.value(b)),
        );
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || bs[0] != ws[1] {
            return dim_err(format!("dense: x {xs:?}, W {ws:?}, b {bs:?}"));
        }
        let (batch, nin, nout) = (xs[0], xs[1], ws[1]);
        let (xd, wd, bd) = (
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let mut out = Vec::with_capacity(batch * nout);
        for r in 0..batch {
            out.extend_from_slice(bd);
            let row = &mut out[r * nout..(r + 1) * nout];
            for (i, &xv) in xd[r * nin..(r + 1) * nin].iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (o, &wv) in row.iter_mut().zip(&wd[i * nout..(i + 1) * nout]) {
                    *o += xv * wv;
                }
            }
        }
        let t = self.make(vec![batch, nout], out);
        let ng = self.ng(&[x.0, w.0, b.0]);
        Ok(self.push(
            Op::Dense {
                x: x.0,
                w: w.0,
                b: b.0,
            },
            t,
            ng,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.open()?;
        let (as_, bs) = (shape_of(self.value(a)), shape_of(self.value(b)));
        if as_.len() != 2 || bs.len() != 2 || as_[1] != bs[0] {
            return dim_err(format!("matmul: {as_:?} x {bs:?}"));
        }
        let (m, k, n) = (as_[0], as_[1], bs[1]);
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let t = self.make(vec![m, n], out);
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::MatMul { a: a.0, b: b.0 }, t, ng))
    }

    /// Batched matrix-vector product: `[N, T, K] x [N, K] -> [N, T]`.
    pub fn batch_matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        self.open()?;
        let (as_, xs) = (shape_of(self.value(a)), shape_of(self.value(x)));
        if as_.len() != 3 || xs.len() != 2 || as_[0] != xs[0] || as_[2] != xs[1] {
            return dim_err(format!("batch_matvec: {as_:?} x {xs:?}"));
        }
        let (n, t, k) = (as_[0], as_[1], as_[2]);
        let (ad, xd) = (self.value(a).data(), self.value(x).data());
        let mut out = Vec::with_capacity(n * t);
        for ni in 0..n {
            let xv = &xd[ni * k..(ni + 1) * k];
            for ti in 0..t {
                let row = (ni * t + ti) * k;
                out.push(dot(&ad[row..row + k], xv));
            }
        }
        let tt = self.make(vec![n, t], out);
        let ng = self.ng(&[a.0, x.0]);
        Ok(self.push(Op::BatchMatVec { a: a.0, x: x.0 }, tt, ng))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let s = shape_of(self.value(a));
        if s.len() != 2 {
            return dim_err(format!("transpose needs rank 2, got {s:?}"));
        }
        let (m, n) = (s[0], s[1]);
        let d = self.value(a).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = d[i * n + j];
            }
        }
        let t = self.make(vec![n, m], out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Transpose { a: a.0 }, t, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.open()?;
        if !self.value(a).same_shape(self.value(b)) {
            return dim_err(format!(
                "add: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = self.make(self.value(a).shape().to_vec(), out);
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::Add { a: a.0, b: b.0 }, t, ng))
    }

    /// Adds a single-element tensor `s` to every entry of `a`.
    pub fn add_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        self.open()?;
        let sv = match self.value(s).item() {
            Some(v) => v,
            None => return dim_err("add_scalar: scalar operand must hold one value"),
        };
        let out = self.value(a).data().iter().map(|x| x + sv).collect();
        let t = self.make(self.value(a).shape().to_vec(), out);
        let ng = self.ng(&[a.0, s.0]);
        Ok(self.push(Op::AddScalar { a: a.0, s: s.0 }, t, ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.open()?;
        if !self.value(a).same_shape(self.value(b)) {
            return dim_err(format!(
                "mul: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = self.make(self.value(a).shape().to_vec(), out);
        let ng = self.ng(&[a.0, b.0]);
        Ok(self.push(Op::Mul { a: a.0, b: b.0 }, t, ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.open()?;
        let out = self.value(a).data().iter().map(|x| x * c).collect();
        let t = self.make(self.value(a).shape().to_vec(), out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Scale { a: a.0, c }, t, ng))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let out = self.value(a).data().iter().map(|&x| x.max(0.0)).collect();
        let t = self.make(self.value(a).shape().to_vec(), out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Relu { a: a.0 }, t, ng))
    }

    /// Cross-correlation of `x: [N, H, W, Cin]` with `k: [K, K, Cin, Cout]`
    /// plus bias `b: [Cout]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        k: Var,
        b: Var,
        stride: usize,
        padding: Padding,
    ) -> Result<Var> {
        self.open()?;
        let (xs, ks, bs) = (
            shape_of(self.value(x)),
            shape_of(self.value(k)),
            shape_of(self.value(b)),
        );
        if xs.len() != 4 || ks.len() != 4 || bs.len() != 1 {
            return dim_err(format!("conv2d: x {xs:?}, K {ks:?}, b {bs:?}"));
        }
        if ks[0] != ks[1] || ks[0] % 2 == 0 {
            return dim_err(format!("conv2d: kernel must be square and odd, got {ks:?}"));
        }
        if xs[3] != ks[2] {
            return dim_err(format!(
                "conv2d: input has {} channels, kernel expects {}",
                xs[3], ks[2]
            ));
        }
        if bs[0] != ks[3] {
            return dim_err(format!("conv2d: bias {bs:?} vs {} output channels", ks[3]));
        }
        if stride == 0 {
            return dim_err("conv2d: stride must be positive");
        }
        let kk = ks[0];
        let pad = match padding {
            Padding::Same => (kk - 1) / 2,
            Padding::Valid => 0,
        };
        if xs[1] + 2 * pad < kk || xs[2] + 2 * pad < kk {
            return dim_err(format!("conv2d: input {xs:?} smaller than kernel {kk}"));
        }
        let g = ConvGeom {
            n: xs[0],
            h: xs[1],
            w: xs[2],
            cin: xs[3],
            cout: ks[3],
            k: kk,
            stride,
            pad,
            oh: (xs[1] + 2 * pad - kk) / stride + 1,
            ow: (xs[2] + 2 * pad - kk) / stride + 1,
        };
        let out = conv2d_raw(
            self.value(x).data(),
            self.value(k).data(),
            self.value(b).data(),
            &g,
        );
        let t = self.make(vec![g.n, g.oh, g.ow, g.cout], out);
        let ng = self.ng(&[x.0, k.0, b.0]);
        Ok(self.push(
            Op::Conv2d {
                x: x.0,
                k: k.0,
                b: b.0,
                g,
            },
            t,
            ng,
        ))
    }

    /// 2x2 max pooling with stride 2 over `[N, H, W, C]`.
    pub fn max_pool2(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let s = shape_of(self.value(a)).to_vec();
        if s.len() != 4 || s[1] % 2 != 0 || s[2] % 2 != 0 {
            return dim_err(format!("max_pool2 needs [N,H,W,C] with even H,W, got {s:?}"));
        }
        let (n, h, w, c) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = (h / 2, w / 2);
        let d = self.value(a).data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut argmax = Vec::with_capacity(n * oh * ow * c);
        for ni in 0..n {
            for y in 0..oh {
                for x in 0..ow {
                    for ci in 0..c {
                        let mut best = usize::MAX;
                        let mut bv = f64::NEG_INFINITY;
                        for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let idx = ((ni * h + 2 * y + dy) * w + 2 * x + dx) * c + ci;
                            if d[idx] > bv || best == usize::MAX {
                                bv = d[idx];
                                best = idx;
                            }
                        }
                        out.push(bv);
                        argmax.push(best);
                    }
                }
            }
        }
        let t = self.make(vec![n, oh, ow, c], out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::MaxPool2 { a: a.0, argmax }, t, ng))
    }

    /// Nearest-neighbour 2x enlargement of `[N, H, W, C]`.
    pub fn upsample_nearest2(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let s = shape_of(self.value(a)).to_vec();
        if s.len() != 4 {
            return dim_err(format!("upsample_nearest2 needs [N,H,W,C], got {s:?}"));
        }
        let (n, h, w, c) = (s[0], s[1], s[2], s[3]);
        let d = self.value(a).data();
        let mut out = vec![0.0; n * 4 * h * w * c];
        for ni in 0..n {
            for y in 0..2 * h {
                for x in 0..2 * w {
                    let src = ((ni * h + y / 2) * w + x / 2) * c;
                    let dst = ((ni * 2 * h + y) * 2 * w + x) * c;
                    out[dst..dst + c].copy_from_slice(&d[src..src + c]);
                }
            }
        }
        let t = self.make(vec![n, 2 * h, 2 * w, c], out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Upsample2 { a: a.0 }, t, ng))
    }

    /// Mean over the two spatial axes: `[N, H, W, C] -> [N, C]`.
    pub fn spatial_mean(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let s = shape_of(self.value(a)).to_vec();
        if s.len() != 4 {
            return dim_err(format!("spatial_mean needs [N,H,W,C], got {s:?}"));
        }
        let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
        let d = self.value(a).data();
        let mut out = vec![0.0; n * c];
        for ni in 0..n {
            let acc = &mut out[ni * c..(ni + 1) * c];
            for p in 0..hw {
                let src = &d[(ni * hw + p) * c..(ni * hw + p + 1) * c];
                for (o, v) in acc.iter_mut().zip(src) {
                    *o += v;
                }
            }
            let inv = 1.0 / hw as f64;
            acc.iter_mut().for_each(|v| *v *= inv);
        }
        let t = self.make(vec![n, c], out);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::SpatialMean { a: a.0 }, t, ng))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.open()?;
        let t = Tensor::new(shape.to_vec(), self.value(a).data().to_vec())?;
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Reshape { a: a.0 }, t, ng))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let t = Tensor::scalar(self.value(a).sum());
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Sum { a: a.0 }, t, ng))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.open()?;
        let v = self.value(a);
        if v.is_empty() {
            return dim_err("mean of empty tensor");
        }
        let t = Tensor::scalar(v.sum() / v.len() as f64);
        let ng = self.ng(&[a.0]);
        Ok(self.push(Op::Mean { a: a.0 }, t, ng))
    }

    /// Mean squared error against a constant target of the same shape.
    pub fn mse(&mut self, a: Var, target: &Tensor) -> Result<Var> {
        self.open()?;
        let v = self.value(a);
        if v.shape() != target.shape() {
            return dim_err(format!(
                "mse: prediction {:?} vs target {:?}",
                v.shape(),
                target.shape()
            ));
        }
        if v.is_empty() {
            return dim_err("mse of empty tensor");
        }
        let s: f64 = v
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let t = Tensor::scalar(s / v.len() as f64);
        let ng = self.ng(&[a.0]);
        Ok(self.push(
            Op::Mse {
                a: a.0,
                target: target.data().to_vec(),
            },
            t,
            ng,
        ))
    }

    /// Sign pattern (`input > 0`) of every relu input on the tape, in
    /// recording order. Two forward passes whose signatures agree lie on the
    /// same linear piece of every relu.
    pub fn relu_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            if let Op::Relu { a } = node.op {
                sig.extend(self.nodes[a].value.data().iter().map(|&x| x > 0.0));
            }
        }
        sig
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        self.open()?;
        if loss.0 >= self.nodes.len() {
            return Err(NnError::Contract("loss is not on this tape".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NnError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let nodes = &self.nodes;

        for i in (0..=loss.0).rev() {
            if !nodes[i].needs_grad {
                continue;
            }
            let g = match &nodes[i].op {
                Op::Leaf => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            let val = |j: usize| nodes[j].value.data();
            let ng = |j: usize| nodes[j].needs_grad;
            match &nodes[i].op {
                Op::Leaf => unreachable!(),
                Op::Dense { x, w, b } => {
                    let ws = nodes[*w].value.shape();
                    let (nin, nout) = (ws[0], ws[1]);
                    let batch = g.len() / nout;
                    if ng(*x) {
                        let wd = val(*w);
                        let dx = acc(&mut grads, nodes, *x);
                        for r in 0..batch {
                            let gr = &g[r * nout..(r + 1) * nout];
                            for i2 in 0..nin {
                                let wr = &wd[i2 * nout..(i2 + 1) * nout];
                                dx[r * nin + i2] += dot(gr, wr);
                            }
                        }
                    }
                    if ng(*w) {
                        let xd = val(*x);
                        let dw = acc(&mut grads, nodes, *w);
                        for r in 0..batch {
                            let gr = &g[r * nout..(r + 1) * nout];
                            for i2 in 0..nin {
                                let xv = xd[r * nin + i2];
                                if xv == 0.0 {
                                    continue;
                                }
                                for (d, gv) in dw[i2 * nout..(i2 + 1) * nout].iter_mut().zip(gr) {
                                    *d += xv * gv;
                                }
                            }
                        }
                    }
                    if ng(*b) {
                        let db = acc(&mut grads, nodes, *b);
                        for r in 0..batch {
                            for (d, gv) in db.iter_mut().zip(&g[r * nout..(r + 1) * nout]) {
                                *d += gv;
                            }
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (m, k) = (nodes[*a].value.shape()[0], nodes[*a].value.shape()[1]);
                    let n = nodes[*b].value.shape()[1];
                    if ng(*a) {
                        let bd = val(*b);
                        let da = acc(&mut grads, nodes, *a);
                        for i2 in 0..m {
                            for p in 0..k {
                                da[i2 * k + p] += dot(&g[i2 * n..(i2 + 1) * n], &bd[p * n..(p + 1) * n]);
                            }
                        }
                    }
                    if ng(*b) {
                        let ad = val(*a);
                        let db = acc(&mut grads, nodes, *b);
                        for i2 in 0..m {
                            for p in 0..k {
                                let av = ad[i2 * k + p];
                                for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(&g[i2 * n..(i2 + 1) * n]) {
                                    *d += av * gv;
                                }
                            }
                        }
                    }
                }
                Op::BatchMatVec { a, x } => {
                    let s = nodes[*a].value.shape();
                    let (n, t, k) = (s[0], s[1], s[2]);
                    if ng(*a) {
                        let xd = val(*x);
                        let da = acc(&mut grads, nodes, *a);
                        for ni in 0..n {
                            for ti in 0..t {
                                let gv = g[ni * t + ti];
                                let row = (ni * t + ti) * k;
                                for (d, xv) in da[row..row + k].iter_mut().zip(&xd[ni * k..(ni + 1) * k]) {
                                    *d += gv * xv;
                                }
                            }
                        }
                    }
                    if ng(*x) {
                        let ad = val(*a);
                        let dx = acc(&mut grads, nodes, *x);
                        for ni in 0..n {
                            for ti in 0..t {
                                let gv = g[ni * t + ti];
                                let row = (ni * t + ti) * k;
                                for (d, av) in dx[ni * k..(ni + 1) * k].iter_mut().zip(&ad[row..row + k]) {
                                    *d += gv * av;
                                }
                            }
                        }
                    }
                }
                Op::Transpose { a } => {
                    if ng(*a) {
                        let s = nodes[*a].value.shape();
                        let (m, n) = (s[0], s[1]);
                        let da = acc(&mut grads, nodes, *a);
                        for i2 in 0..m {
                            for j in 0..n {
                                da[i2 * n + j] += g[j * m + i2];
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    for v in [*a, *b] {
                        if ng(v) {
                            add_into(acc(&mut grads, nodes, v), &g);
                        }
                    }
                }
                Op::AddScalar { a, s } => {
                    if ng(*a) {
                        add_into(acc(&mut grads, nodes, *a), &g);
                    }
                    if ng(*s) {
                        acc(&mut grads, nodes, *s)[0] += g.iter().sum::<f64>();
                    }
                }
                Op::Mul { a, b } => {
                    if ng(*a) {
                        let bd = val(*b);
                        let da = acc(&mut grads, nodes, *a);
                        for ((d, gv), bv) in da.iter_mut().zip(&g).zip(bd) {
                            *d += gv * bv;
                        }
                    }
                    if ng(*b) {
                        let ad = val(*a);
                        let db = acc(&mut grads, nodes, *b);
                        for ((d, gv), av) in db.iter_mut().zip(&g).zip(ad) {
                            *d += gv * av;
                        }
                    }
                }
                Op::Scale { a, c } => {
                    if ng(*a) {
                        let da = acc(&mut grads, nodes, *a);
                        for (d, gv) in da.iter_mut().zip(&g) {
                            *d += c * gv;
                        }
                    }
                }
                Op::Relu { a } => {
                    if ng(*a) {
                        let ad = val(*a);
                        let da = acc(&mut grads, nodes, *a);
                        for ((d, gv), av) in da.iter_mut().zip(&g).zip(ad) {
                            if *av > 0.0 {
                                *d += gv;
                            }
                        }
                    }
                }
                Op::Conv2d { x, k, b, g: geom } => {
                    conv2d_backward(&mut grads, nodes, *x, *k, *b, geom, &g);
                }
                Op::MaxPool2 { a, argmax } => {
                    if ng(*a) {
                        let da = acc(&mut grads, nodes, *a);
                        for (&src, gv) in argmax.iter().zip(&g) {
                            da[src] += gv;
                        }
                    }
                }
                Op::Upsample2 { a } => {
                    if ng(*a) {
                        let s = nodes[*a].value.shape();
                        let (n, h, w, c) = (s[0], s[1], s[2], s[3]);
                        let da = acc(&mut grads, nodes, *a);
                        for ni in 0..n {
                            for y in 0..2 * h {
                                for x in 0..2 * w {
                                    let src = ((ni * h + y / 2) * w + x / 2) * c;
                                    let dst = ((ni * 2 * h + y) * 2 * w + x) * c;
                                    add_into(&mut da[src..src + c], &g[dst..dst + c]);
                                }
                            }
                        }
                    }
                }
                Op::SpatialMean { a } => {
                    if ng(*a) {
                        let s = nodes[*a].value.shape();
                        let (n, hw, c) = (s[0], s[1] * s[2], s[3]);
                        let inv = 1.0 / hw as f64;
                        let da = acc(&mut grads, nodes, *a);
                        for ni in 0..n {
                            let gn = &g[ni * c..(ni + 1) * c];
                            for p in 0..hw {
                                for (d, gv) in da[(ni * hw + p) * c..(ni * hw + p + 1) * c].iter_mut().zip(gn) {
                                    *d += gv * inv;
                                }
                            }
                        }
                    }
                }
                Op::Reshape { a } => {
                    if ng(*a) {
                        add_into(acc(&mut grads, nodes, *a), &g);
                    }
                }
                Op::Sum { a } => {
                    if ng(*a) {
                        acc(&mut grads, nodes, *a).iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::Mean { a } => {
                    if ng(*a) {
                        let da = acc(&mut grads, nodes, *a);
                        let s = g[0] / da.len() as f64;
                        da.iter_mut().for_each(|d| *d += s);
                    }
                }
                Op::Mse { a, target } => {
                    if ng(*a) {
                        let ad = val(*a);
                        let scale = 2.0 * g[0] / ad.len() as f64;
                        let da = acc(&mut grads, nodes, *a);
                        for ((d, p), t) in da.iter_mut().zip(ad).zip(target) {
                            *d += scale * (p - t);
                        }
                    }
                }
            }
        }

        let grads = grads
            .into_iter()
            .zip(nodes)
            .map(|(g, node)| match (&node.op, g) {
                (Op::Leaf, Some(g)) if node.needs_grad => {
                    Some(Tensor::new(node.value.shape().to_vec(), g).expect("grad shape"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], i: usize) -> &'a mut [f64] {
    grads[i].get_or_insert_with(|| vec![0.0; nodes[i].value.len()])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

impl ConvGeom {
    fn ph(&self) -> usize {
        self.h + 2 * self.pad
    }

    fn pw(&self) -> usize {
        self.w + 2 * self.pad
    }

    /// NHWC input to zero-padded NCHW planes.
    fn pad_planes(&self, x: &[f64]) -> Vec<f64> {
        let (ph, pw) = (self.ph(), self.pw());
        let mut out = vec![0.0; self.n * self.cin * ph * pw];
        for ni in 0..self.n {
            for y in 0..self.h {
                for xx in 0..self.w {
                    let src = ((ni * self.h + y) * self.w + xx) * self.cin;
                    for ci in 0..self.cin {
                        out[((ni * self.cin + ci) * ph + y + self.pad) * pw + xx + self.pad] = x[src + ci];
                    }
                }
            }
        }
        out
    }

    /// Inverse of `pad_planes` for gradients, dropping the padding.
    fn unpad_into(&self, planes: &[f64], dx: &mut [f64]) {
        let (ph, pw) = (self.ph(), self.pw());
        for ni in 0..self.n {
            for y in 0..self.h {
                for xx in 0..self.w {
                    let dst = ((ni * self.h + y) * self.w + xx) * self.cin;
                    for ci in 0..self.cin {
                        dx[dst + ci] += planes[((ni * self.cin + ci) * ph + y + self.pad) * pw + xx + self.pad];
                    }
                }
            }
        }
    }
}

// Convolutions run on zero-padded NCHW planes. Output planes use the padded
// row pitch, so at stride 1 each kernel tap is one contiguous multiply-add
// over the whole plane; the extra columns are dropped afterwards.
impl ConvGeom {
    fn pitch(&self) -> usize {
        if self.stride == 1 {
            self.pw()
        } else {
            self.ow
        }
    }

    /// Length of a pitched output plane that covers every valid entry.
    fn span(&self) -> usize {
        (self.oh - 1) * self.pitch() + self.ow
    }

    /// `out[p] += kv * in[p]` over a pitched plane for tap (ky, kx).
    fn tap_axpy(&self, out: &mut [f64], plane: &[f64], ky: usize, kx: usize, kv: f64) {
        let pw = self.pw();
        if self.stride == 1 {
            let off = ky * pw + kx;
            for (o, x) in out[..self.span()].iter_mut().zip(&plane[off..off + self.span()]) {
                *o += kv * x;
            }
        } else {
            for oy in 0..self.oh {
                let row = &plane[(oy * self.stride + ky) * pw + kx..];
                for (ox, o) in out[oy * self.ow..(oy + 1) * self.ow].iter_mut().enumerate() {
                    *o += kv * row[ox * self.stride];
                }
            }
        }
    }

    /// `Σ_p g[p] * in[p]` over a pitched plane for tap (ky, kx).
    fn tap_dot(&self, g: &[f64], plane: &[f64], ky: usize, kx: usize) -> f64 {
        let pw = self.pw();
        if self.stride == 1 {
            let off = ky * pw + kx;
            dot(&g[..self.span()], &plane[off..off + self.span()])
        } else {
            let mut acc = 0.0;
            for oy in 0..self.oh {
                let row = &plane[(oy * self.stride + ky) * pw + kx..];
                for (ox, gv) in g[oy * self.ow..(oy + 1) * self.ow].iter().enumerate() {
                    acc += gv * row[ox * self.stride];
                }
            }
            acc
        }
    }

    /// `in[p] += kv * g[p]` over a pitched plane for tap (ky, kx).
    fn tap_scatter(&self, plane: &mut [f64], g: &[f64], ky: usize, kx: usize, kv: f64) {
        let pw = self.pw();
        if self.stride == 1 {
            let off = ky * pw + kx;
            for (d, gv) in plane[off..off + self.span()].iter_mut().zip(&g[..self.span()]) {
                *d += kv * gv;
            }
        } else {
            for oy in 0..self.oh {
                let base = (oy * self.stride + ky) * pw + kx;
                for (ox, gv) in g[oy * self.ow..(oy + 1) * self.ow].iter().enumerate() {
                    plane[base + ox * self.stride] += kv * gv;
                }
            }
        }
    }
}

fn conv2d_raw(x: &[f64], k: &[f64], b: &[f64], g: &ConvGeom) -> Vec<f64> {
    let xp = g.pad_planes(x);
    let in_plane = g.ph() * g.pw();
    let out_plane = g.oh * g.pitch();
    let mut o = vec![0.0; out_plane];
    let mut out = vec![0.0; g.n * g.oh * g.ow * g.cout];
    for ni in 0..g.n {
        for co in 0..g.cout {
            o.iter_mut().for_each(|v| *v = b[co]);
            for ky in 0..g.k {
                for kx in 0..g.k {
                    for ci in 0..g.cin {
                        let kv = k[((ky * g.k + kx) * g.cin + ci) * g.cout + co];
                        let plane = &xp[(ni * g.cin + ci) * in_plane..(ni * g.cin + ci + 1) * in_plane];
                        g.tap_axpy(&mut o, plane, ky, kx, kv);
                    }
                }
            }
            for oy in 0..g.oh {
                for ox in 0..g.ow {
                    out[((ni * g.oh + oy) * g.ow + ox) * g.cout + co] = o[oy * g.pitch() + ox];
                }
            }
        }
    }
    out
}

fn conv2d_backward(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    x: usize,
    k: usize,
    b: usize,
    g: &ConvGeom,
    dy: &[f64],
) {
    let xd = nodes[x].value.data();
    let kd = nodes[k].value.data();
    if nodes[b].needs_grad {
        let db = acc(grads, nodes, b);
        for chunk in dy.chunks_exact(g.cout) {
            add_into(db, chunk);
        }
    }
    let want_x = nodes[x].needs_grad;
    let want_k = nodes[k].needs_grad;
    if !want_x && !want_k {
        return;
    }
    let in_plane = g.ph() * g.pw();
    let out_plane = g.oh * g.pitch();
    // Pitched output gradients with zeros in the unused columns.
    let mut gp = vec![0.0; g.n * g.cout * out_plane];
    for ni in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                for co in 0..g.cout {
                    gp[(ni * g.cout + co) * out_plane + oy * g.pitch() + ox] = dy[((ni * g.oh + oy) * g.ow + ox) * g.cout + co];
                }
            }
        }
    }
    let xp = g.pad_planes(xd);
    let mut dxp = if want_x { vec![0.0; xp.len()] } else { Vec::new() };
    let mut dk = if want_k { grads[k].take().unwrap_or_else(|| vec![0.0; kd.len()]) } else { Vec::new() };
    for ni in 0..g.n {
        for co in 0..g.cout {
            let gpl = &gp[(ni * g.cout + co) * out_plane..(ni * g.cout + co + 1) * out_plane];
            for ky in 0..g.k {
                for kx in 0..g.k {
                    for ci in 0..g.cin {
                        let ki = ((ky * g.k + kx) * g.cin + ci) * g.cout + co;
                        let range = (ni * g.cin + ci) * in_plane..(ni * g.cin + ci + 1) * in_plane;
                        if want_k {
                            dk[ki] += g.tap_dot(gpl, &xp[range.clone()], ky, kx);
                        }
                        if want_x {
                            g.tap_scatter(&mut dxp[range], gpl, ky, kx, kd[ki]);
                        }
                    }
                }
            }
        }
    }
    if want_x {
        let mut dx = grads[x].take().unwrap_or_else(|| vec![0.0; xd.len()]);
        g.unpad_into(&dxp, &mut dx);
        grads[x] = Some(dx);
    }
    if want_k {
        grads[k] = Some(dk);
    }
}
