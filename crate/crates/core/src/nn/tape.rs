//! Reverse-mode automatic differentiation over a linear tape of 2D tensors.
//!
//! Every operation evaluates eagerly and records what its backward pass
//! needs. [`Tape::backward`] walks the tape once in reverse.

use std::rc::Rc;

use super::params::ParamStore;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Geometry of a stride-1, zero-padded ("same") convolution over NHWC rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    fn positions(&self) -> usize {
        self.batch * self.height * self.width
    }

    fn patch(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    /// Rows `[B·H·W, kh·kw·cin]`: the zero-padded receptive field of every
    /// output position, ordered (di, dj, channel).
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (h, w, cin) = (self.height, self.width, self.cin);
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        let patch = self.patch();
        let mut cols = vec![0.0; self.positions() * patch];
        for b in 0..self.batch {
            for i in 0..h {
                for j in 0..w {
                    let row = &mut cols[((b * h + i) * w + j) * patch..][..patch];
                    for di in 0..self.kh {
                        let ii = i + di;
                        if ii < ph || ii - ph >= h {
                            continue;
                        }
                        for dj in 0..self.kw {
                            let jj = j + dj;
                            if jj < pw || jj - pw >= w {
                                continue;
                            }
                            let src = ((b * h + ii - ph) * w + jj - pw) * cin;
                            let dst = (di * self.kw + dj) * cin;
                            row[dst..dst + cin].copy_from_slice(&x[src..src + cin]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Self::im2col`]: scatters column gradients back onto the input.
    fn col2im(&self, cols: &[f64], gx: &mut [f64]) {
        let (h, w, cin) = (self.height, self.width, self.cin);
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        let patch = self.patch();
        for b in 0..self.batch {
            for i in 0..h {
                for j in 0..w {
                    let row = &cols[((b * h + i) * w + j) * patch..][..patch];
                    for di in 0..self.kh {
                        let ii = i + di;
                        if ii < ph || ii - ph >= h {
                            continue;
                        }
                        for dj in 0..self.kw {
                            let jj = j + dj;
                            if jj < pw || jj - pw >= w {
                                continue;
                            }
                            let dst = ((b * h + ii - ph) * w + jj - pw) * cin;
                            let src = (di * self.kw + dj) * cin;
                            for c in 0..cin {
                                gx[dst + c] += row[src + c];
                            }
                        }
                    }
                }
            }
        }
    }
}

enum Op {
    Leaf,
    Param(usize),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    AddRow { a: Var, bias: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: f64 },
    OnePlusScale { x: Var, s: Var },
    LeakyRelu { a: Var, slope: f64 },
    Conv { x: Var, w: Var, geom: ConvGeom },
    BatchNormTrain { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    BatchNormEval { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    MeanBlocks { a: Var, block: usize },
    Gather { a: Var, idx: Rc<Vec<usize>> },
    ScatterAdd { a: Var, idx: Rc<Vec<usize>> },
    SegmentMax { a: Var, arg: Vec<usize> },
    ConcatCols { a: Var, b: Var },
    Sum { a: Var },
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    RowNormalize { a: Var, norms: Vec<f64> },
    AddConst { a: Var },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Per-channel batch statistics produced by a training-mode batch norm.
pub struct BatchStats {
    pub mean: Vec<f64>,
    /// Unbiased variance (divides by n − 1), as used for running estimates.
    pub var_unbiased: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape, b.shape)));
    }
    Ok(())
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.value(v).dims2()
    }

    /// Constant or input; gradients are still available via [`Gradients::of`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: usize) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, b, false, false)
    }

    /// `op(a) · op(b)` with optional transposes.
    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        let (m, k) = if ta { (da.1, da.0) } else { da };
        let (k2, n) = if tb { (db.1, db.0) } else { db };
        if k != k2 {
            return Err(Error::Shape(format!("matmul inner dims {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        gemm(&self.value(a).data, da, ta, &self.value(b).data, db, tb, &mut out, false);
        Ok(self.push(Tensor::matrix(m, n, out), Op::MatMul { a, b, ta, tb }))
    }

    /// Adds a `[1, c]` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.dims(bias) != (1, c) {
            return Err(Error::Shape(format!("bias {:?} for {c} columns", self.value(bias).shape)));
        }
        let bv = &self.value(bias).data;
        let mut out = self.value(a).data.clone();
        for row in out.chunks_mut(c) {
            row.iter_mut().zip(bv).for_each(|(x, b)| *x += b);
        }
        Ok(self.push(Tensor::matrix(r, c, out), Op::AddRow { a, bias }))
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        same_shape(self.value(a), self.value(b), what)?;
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| f(*x, *y)).collect();
        Ok(Tensor { shape: self.value(a).shape.clone(), data })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|x| x * c).collect() };
        self.push(t, Op::Scale { a, c })
    }

    /// `(1 + s) · x` for a learnable scalar `s`.
    pub fn one_plus_scale(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::Shape("scale must be a scalar".into()));
        }
        let k = 1.0 + self.value(s).item();
        let v = self.value(x);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|x| x * k).collect() };
        Ok(self.push(t, Op::OnePlusScale { x, s }))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let v = self.value(a);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&x| if x > 0.0 { x } else { slope * x }).collect() };
        self.push(t, Op::LeakyRelu { a, slope })
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.leaky_relu(a, 0.0)
    }

    /// Same-padded convolution. `x` is `[B·H·W, cin]` (NHWC rows) and `w` is
    /// `[kh·kw·cin, cout]`; no bias.
    pub fn conv(&mut self, x: Var, w: Var, geom: ConvGeom) -> Result<Var> {
        if geom.kh.is_multiple_of(2) || geom.kw.is_multiple_of(2) {
            return Err(Error::Shape(format!("kernel {}x{} must have odd size", geom.kh, geom.kw)));
        }
        if self.dims(x) != (geom.positions(), geom.cin) {
            return Err(Error::Shape(format!(
                "conv input {:?}, expected [{}, {}]",
                self.value(x).shape,
                geom.positions(),
                geom.cin
            )));
        }
        if self.dims(w) != (geom.patch(), geom.cout) {
            return Err(Error::Shape(format!(
                "conv kernel {:?}, expected [{}, {}]",
                self.value(w).shape,
                geom.patch(),
                geom.cout
            )));
        }
        let cols = geom.im2col(&self.value(x).data);
        let mut out = vec![0.0; geom.positions() * geom.cout];
        gemm(&cols, (geom.positions(), geom.patch()), false, &self.value(w).data, self.dims(w), false, &mut out, false);
        Ok(self.push(Tensor::matrix(geom.positions(), geom.cout, out), Op::Conv { x, w, geom }))
    }

    /// Training-mode batch norm over rows; returns the output and the batch
    /// statistics for running-average updates.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats)> {
        let (n, c) = self.dims(x);
        if n == 0 {
            return Err(Error::Shape("batch norm over an empty batch".into()));
        }
        let xv = &self.value(x).data;
        let mut mean = vec![0.0; c];
        for row in xv.chunks(c) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; c];
        for row in xv.chunks(c) {
            for ch in 0..c {
                let d = row[ch] - mean[ch];
                ss[ch] += d * d;
            }
        }
        let inv_std: Vec<f64> = ss.iter().map(|s| 1.0 / (s / n as f64 + eps).sqrt()).collect();
        let var_unbiased = ss.iter().map(|s| if n > 1 { s / (n - 1) as f64 } else { 0.0 }).collect();
        let (t, xhat) = self.normalize_affine(x, gamma, beta, &mean, &inv_std)?;
        let v = self.push(t, Op::BatchNormTrain { x, gamma, beta, xhat, inv_std });
        Ok((v, BatchStats { mean, var_unbiased }))
    }

    /// Inference-mode batch norm with fixed statistics.
    pub fn batch_norm_eval(&mut self, x: Var, gamma: Var, beta: Var, mean: &[f64], var: &[f64], eps: f64) -> Result<Var> {
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (t, xhat) = self.normalize_affine(x, gamma, beta, mean, &inv_std)?;
        Ok(self.push(t, Op::BatchNormEval { x, gamma, beta, xhat, inv_std }))
    }

    fn normalize_affine(&self, x: Var, gamma: Var, beta: Var, mean: &[f64], inv_std: &[f64]) -> Result<(Tensor, Vec<f64>)> {
        let (n, c) = self.dims(x);
        if self.dims(gamma) != (1, c) || self.dims(beta) != (1, c) || mean.len() != c || inv_std.len() != c {
            return Err(Error::Shape(format!("batch norm parameters do not match {c} channels")));
        }
        let (g, b) = (&self.value(gamma).data, &self.value(beta).data);
        let mut xhat = self.value(x).data.clone();
        let mut out = vec![0.0; n * c];
        for (xr, or) in xhat.chunks_mut(c).zip(out.chunks_mut(c)) {
            for ch in 0..c {
                xr[ch] = (xr[ch] - mean[ch]) * inv_std[ch];
                or[ch] = g[ch] * xr[ch] + b[ch];
            }
        }
        Ok((Tensor::matrix(n, c, out), xhat))
    }

    /// Mean over consecutive blocks of `block` rows: `[B·block, c] → [B, c]`.
    pub fn mean_blocks(&mut self, a: Var, block: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if block == 0 || r % block != 0 {
            return Err(Error::Shape(format!("{r} rows do not split into blocks of {block}")));
        }
        let groups = r / block;
        let mut out = vec![0.0; groups * c];
        for (i, row) in self.value(a).data.chunks(c).enumerate() {
            let o = &mut out[(i / block) * c..][..c];
            o.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|v| *v /= block as f64);
        Ok(self.push(Tensor::matrix(groups, c, out), Op::MeanBlocks { a, block }))
    }

    /// Rows `a[idx[i]]`.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var> {
        let (r, c) = self.dims(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::Shape(format!("row index {bad} out of {r}")));
        }
        let src = &self.value(a).data;
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx.iter() {
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        Ok(self.push(Tensor::matrix(idx.len(), c, out), Op::Gather { a, idx }))
    }

    /// `out[idx[i]] += a[i]` into `n` zero rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: Rc<Vec<usize>>, n: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if idx.len() != r || idx.iter().any(|&i| i >= n) {
            return Err(Error::Shape("scatter indices do not match".into()));
        }
        let src = &self.value(a).data;
        let mut out = vec![0.0; n * c];
        for (k, &i) in idx.iter().enumerate() {
            out[i * c..(i + 1) * c].iter_mut().zip(&src[k * c..(k + 1) * c]).for_each(|(o, v)| *o += v);
        }
        Ok(self.push(Tensor::matrix(n, c, out), Op::ScatterAdd { a, idx }))
    }

    /// Column-wise max over the rows of each segment; `seg[i]` names the
    /// segment of row `i`. Every segment must be nonempty.
    pub fn segment_max(&mut self, a: Var, seg: &[usize], count: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if seg.len() != r || seg.iter().any(|&s| s >= count) {
            return Err(Error::Shape("segment ids do not match".into()));
        }
        let src = &self.value(a).data;
        let mut out = vec![f64::NEG_INFINITY; count * c];
        let mut arg = vec![usize::MAX; count * c];
        for (i, &s) in seg.iter().enumerate() {
            for ch in 0..c {
                let v = src[i * c + ch];
                if arg[s * c + ch] == usize::MAX || v > out[s * c + ch] {
                    out[s * c + ch] = v;
                    arg[s * c + ch] = i;
                }
            }
        }
        if arg.contains(&usize::MAX) && c > 0 {
            return Err(Error::Contract("max over an empty segment".into()));
        }
        Ok(self.push(Tensor::matrix(count, c, out), Op::SegmentMax { a, arg }))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((ra, ca), (rb, cb)) = (self.dims(a), self.dims(b));
        if ra != rb {
            return Err(Error::Shape(format!("concat rows {ra} vs {rb}")));
        }
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            out.extend_from_slice(self.value(a).row(i));
            out.extend_from_slice(self.value(b).row(i));
        }
        Ok(self.push(Tensor::matrix(ra, ca + cb, out), Op::ConcatCols { a, b }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { a })
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean over rows of `−log softmax(logits)[label]`, stabilized by
    /// subtracting each row's max.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (b, c) = self.dims(logits);
        if labels.len() != b {
            return Err(Error::Shape(format!("{} labels for {b} rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Label { label: bad, classes: c });
        }
        let lv = &self.value(logits).data;
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        for i in 0..b {
            let row = &lv[i * c..(i + 1) * c];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - mx).exp()).sum();
            for k in 0..c {
                probs[i * c + k] = (row[k] - mx).exp() / z;
            }
            loss += z.ln() + mx - row[labels[i]];
        }
        let t = Tensor::scalar(loss / b as f64);
        Ok(self.push(t, Op::CrossEntropy { logits, labels: labels.to_vec(), probs }))
    }

    /// Scales each row to unit Euclidean length.
    pub fn row_normalize(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let src = &self.value(a).data;
        let norms: Vec<f64> = src.chunks(c).map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12)).collect();
        let out = src.chunks(c).zip(&norms).flat_map(|(row, n)| row.iter().map(move |x| x / n)).collect();
        self.push(Tensor::matrix(r, c, out), Op::RowNormalize { a, norms })
    }

    /// Adds a constant tensor (no gradient flows to it).
    pub fn add_const(&mut self, a: Var, k: &Tensor) -> Result<Var> {
        same_shape(self.value(a), k, "add_const")?;
        let data = self.value(a).data.iter().zip(&k.data).map(|(x, y)| x + y).collect();
        let t = Tensor { shape: k.shape.clone(), data };
        Ok(self.push(t, Op::AddConst { a }))
    }

    /// Reverse pass from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            return Err(Error::Contract(format!("backward root must be scalar, got {:?}", self.value(root).shape)));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let n = self.nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
            f(slot);
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul { a, b, ta, tb } => {
                let (da, db) = (self.dims(*a), self.dims(*b));
                let dc = node.value.dims2();
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                // C = op(A) op(B): dA = g op(B)ᵀ (transposed back if ta), dB likewise.
                acc(*a, &mut |ga| {
                    if *ta {
                        gemm(bv, db, *tb, g, dc, true, ga, true);
                    } else {
                        gemm(g, dc, false, bv, db, !*tb, ga, true);
                    }
                });
                acc(*b, &mut |gb| {
                    if *tb {
                        gemm(g, dc, true, av, da, *ta, gb, true);
                    } else {
                        gemm(av, da, !*ta, g, dc, false, gb, true);
                    }
                });
            }
            Op::AddRow { a, bias } => {
                let c = node.value.cols();
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*bias, &mut |gb| {
                    for row in g.chunks(c) {
                        gb.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Add { a, b } => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::Sub { a, b } => {
                acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul { a, b } => {
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                acc(*a, &mut |ga| (0..g.len()).for_each(|k| ga[k] += g[k] * bv[k]));
                acc(*b, &mut |gb| (0..g.len()).for_each(|k| gb[k] += g[k] * av[k]));
            }
            Op::Scale { a, c } => acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y)),
            Op::OnePlusScale { x, s } => {
                let k = 1.0 + self.value(*s).item();
                let xv = &self.value(*x).data;
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(a, b)| *a += k * b));
                let gs: f64 = g.iter().zip(xv).map(|(a, b)| a * b).sum();
                acc(*s, &mut |gsv| gsv[0] += gs);
            }
            Op::LeakyRelu { a, slope } => {
                let av = &self.value(*a).data;
                acc(*a, &mut |ga| {
                    for k in 0..g.len() {
                        ga[k] += if av[k] > 0.0 { g[k] } else { slope * g[k] };
                    }
                });
            }
            Op::Conv { x, w, geom } => {
                let cols = geom.im2col(&self.value(*x).data);
                let pc = (geom.positions(), geom.patch());
                let dc = (geom.positions(), geom.cout);
                acc(*w, &mut |gw| gemm(&cols, pc, true, g, dc, false, gw, true));
                let mut gcols = vec![0.0; pc.0 * pc.1];
                gemm(g, dc, false, &self.value(*w).data, self.dims(*w), true, &mut gcols, false);
                acc(*x, &mut |gx| geom.col2im(&gcols, gx));
            }
            Op::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                let c = inv_std.len();
                let n = g.len() / c;
                let gv = &self.value(*gamma).data;
                let mut sg = vec![0.0; c];
                let mut sgx = vec![0.0; c];
                for (gr, xr) in g.chunks(c).zip(xhat.chunks(c)) {
                    for ch in 0..c {
                        sg[ch] += gr[ch];
                        sgx[ch] += gr[ch] * xr[ch];
                    }
                }
                acc(*beta, &mut |gb| gb.iter_mut().zip(&sg).for_each(|(a, b)| *a += b));
                acc(*gamma, &mut |gg| gg.iter_mut().zip(&sgx).for_each(|(a, b)| *a += b));
                let nf = n as f64;
                acc(*x, &mut |gx| {
                    for ((gxr, gr), xr) in gx.chunks_mut(c).zip(g.chunks(c)).zip(xhat.chunks(c)) {
                        for ch in 0..c {
                            let k = gv[ch] * inv_std[ch] / nf;
                            gxr[ch] += k * (nf * gr[ch] - sg[ch] - xr[ch] * sgx[ch]);
                        }
                    }
                });
            }
            Op::BatchNormEval { x, gamma, beta, xhat, inv_std } => {
                let c = inv_std.len();
                let gv = &self.value(*gamma).data;
                acc(*beta, &mut |gb| {
                    for gr in g.chunks(c) {
                        gb.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
                    }
                });
                acc(*gamma, &mut |gg| {
                    for (gr, xr) in g.chunks(c).zip(xhat.chunks(c)) {
                        for ch in 0..c {
                            gg[ch] += gr[ch] * xr[ch];
                        }
                    }
                });
                acc(*x, &mut |gx| {
                    for (gxr, gr) in gx.chunks_mut(c).zip(g.chunks(c)) {
                        for ch in 0..c {
                            gxr[ch] += gr[ch] * gv[ch] * inv_std[ch];
                        }
                    }
                });
            }
            Op::MeanBlocks { a, block } => {
                let c = node.value.cols();
                let inv = 1.0 / *block as f64;
                acc(*a, &mut |ga| {
                    for (i, row) in ga.chunks_mut(c).enumerate() {
                        let gr = &g[(i / block) * c..][..c];
                        row.iter_mut().zip(gr).for_each(|(x, y)| *x += y * inv);
                    }
                });
            }
            Op::Gather { a, idx } => {
                let c = node.value.cols();
                acc(*a, &mut |ga| {
                    for (k, &i) in idx.iter().enumerate() {
                        ga[i * c..(i + 1) * c].iter_mut().zip(&g[k * c..(k + 1) * c]).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::ScatterAdd { a, idx } => {
                let c = node.value.cols();
                acc(*a, &mut |ga| {
                    for (k, &i) in idx.iter().enumerate() {
                        ga[k * c..(k + 1) * c].iter_mut().zip(&g[i * c..(i + 1) * c]).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SegmentMax { a, arg } => {
                let c = node.value.cols();
                acc(*a, &mut |ga| {
                    for (k, &row) in arg.iter().enumerate() {
                        ga[row * c + k % c] += g[k];
                    }
                });
            }
            Op::ConcatCols { a, b } => {
                let (ca, cb) = (self.dims(*a).1, self.dims(*b).1);
                let c = ca + cb;
                acc(*a, &mut |ga| {
                    for (gr, src) in ga.chunks_mut(ca.max(1)).zip(g.chunks(c)) {
                        gr.iter_mut().zip(&src[..ca]).for_each(|(x, y)| *x += y);
                    }
                });
                acc(*b, &mut |gb| {
                    for (gr, src) in gb.chunks_mut(cb.max(1)).zip(g.chunks(c)) {
                        gr.iter_mut().zip(&src[ca..]).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Sum { a } => acc(*a, &mut |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            Op::CrossEntropy { logits, labels, probs } => {
                let b = labels.len();
                let c = probs.len() / b;
                let k = g[0] / b as f64;
                acc(*logits, &mut |gl| {
                    for i in 0..b {
                        for j in 0..c {
                            let target = if j == labels[i] { 1.0 } else { 0.0 };
                            gl[i * c + j] += k * (probs[i * c + j] - target);
                        }
                    }
                });
            }
            Op::RowNormalize { a, norms } => {
                let c = node.value.cols();
                let y = &node.value.data;
                acc(*a, &mut |ga| {
                    for (r, n) in norms.iter().enumerate() {
                        let (yr, gr) = (&y[r * c..(r + 1) * c], &g[r * c..(r + 1) * c]);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for k in 0..c {
                            ga[r * c + k] += (gr[k] - yr[k] * dot) / n;
                        }
                    }
                });
            }
            Op::AddConst { a } => acc(*a, &mut |ga| ga.iter_mut().zip(g).for_each(|(x, y)| *x += y)),
        }
    }

    /// Parameter ids recorded on this tape, in order of first use.
    pub fn param_ids(&self) -> Vec<usize> {
        let mut ids = Vec::new();
        for n in &self.nodes {
            if let Op::Param(id) = n.op {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids
    }

    /// Gradient of every parameter in `store`, summed over its uses; unused
    /// parameters get zeros.
    pub fn param_grads(&self, grads: &Gradients, store: &ParamStore) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..store.len()).map(|id| vec![0.0; store.value(id).len()]).collect();
        for (i, n) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&n.op, &grads.grads[i]) {
                out[*id].iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
        out
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v` (zeros if `v` does not affect the root).
    pub fn of(&self, v: Var, tape: &Tape) -> Vec<f64> {
        self.grads[v.0].clone().unwrap_or_else(|| vec![0.0; tape.value(v).len()])
    }
}
