//! A small reverse-mode tape over dense matrices.
//!
//! Every operation evaluates eagerly and records enough to replay its
//! derivative. The tape is built once per forward pass and discarded
//! afterwards; parameters enter as leaves.

use crate::error::{Error, Result};
use crate::tensor::{self, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Mat),
    Sin(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    MaskedSoftmax(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    VectorLoss {
        pred: Var,
        diff: Mat,
        norms: Vec<f64>,
        valid: Vec<bool>,
        denom: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients indexed by [`Var`]; `None` where nothing flowed.
pub struct Grads(Vec<Option<Mat>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.0[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.0[v.0].take()
    }
}

fn accumulate(slot: &mut Option<Mat>, g: Mat) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(Error::DimensionMismatch(format!(
                "matmul {:?} x {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let out = tensor::matmul(va, vb);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() {
            return Err(Error::DimensionMismatch(format!(
                "matmul_nt {:?} x {:?}ᵀ",
                va.shape(),
                vb.shape()
            )));
        }
        let out = tensor::matmul_nt(va, vb);
        Ok(self.push(out, Op::MatMulNT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::DimensionMismatch(format!(
                "add {:?} + {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a `1 × cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(Error::DimensionMismatch(format!(
                "row broadcast {:?} + {:?}",
                vx.shape(),
                vb.shape()
            )));
        }
        let mut out = vx.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::Scale(x, s))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, x: Var, m: Mat) -> Result<Var> {
        let vx = self.value(x);
        if vx.shape() != m.shape() {
            return Err(Error::DimensionMismatch("mul_const shape".into()));
        }
        let mut out = vx.clone();
        for (o, k) in out.data_mut().iter_mut().zip(m.data()) {
            *o *= k;
        }
        Ok(self.push(out, Op::MulConst(x, m)))
    }

    /// `sin(omega * x)`
    pub fn sin(&mut self, x: Var, omega: f64) -> Var {
        let out = self.value(x).map(|v| (omega * v).sin());
        self.push(out, Op::Sin(x, omega))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu);
        self.push(out, Op::Gelu(x))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let vx = self.value(x);
        let (n, d) = vx.shape();
        let (g, b) = (self.value(gamma), self.value(beta));
        if g.shape() != (1, d) || b.shape() != (1, d) {
            return Err(Error::DimensionMismatch("layer norm affine shape".into()));
        }
        let mut xhat = Mat::zeros(n, d);
        let mut inv_std = Vec::with_capacity(n);
        let mut out = Mat::zeros(n, d);
        for r in 0..n {
            let row = vx.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..d {
                let h = (row[c] - mean) * is;
                xhat[(r, c)] = h;
                out[(r, c)] = h * g.data()[c] + b.data()[c];
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    /// Row-wise softmax over the keys marked valid. Masked keys get a score
    /// of −∞ and therefore exactly zero weight.
    pub fn masked_softmax(&mut self, x: Var, key_valid: &[bool]) -> Result<Var> {
        let vx = self.value(x);
        if key_valid.len() != vx.cols() {
            return Err(Error::DimensionMismatch(format!(
                "mask of length {} for {} keys",
                key_valid.len(),
                vx.cols()
            )));
        }
        if !key_valid.iter().any(|&v| v) {
            return Err(Error::AllKeysMasked { row: 0 });
        }
        let mut out = Mat::zeros(vx.rows(), vx.cols());
        for r in 0..vx.rows() {
            let row = vx.row(r);
            let max = row
                .iter()
                .zip(key_valid)
                .filter(|(_, &ok)| ok)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let o = out.row_mut(r);
            let mut sum = 0.0;
            for c in 0..row.len() {
                if key_valid[c] {
                    let e = (row[c] - max).exp();
                    o[c] = e;
                    sum += e;
                }
            }
            for v in o.iter_mut() {
                *v /= sum;
            }
        }
        Ok(self.push(out, Op::MaskedSoftmax(x)))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let vx = self.value(x);
        if start + width > vx.cols() {
            return Err(Error::DimensionMismatch("column slice out of range".into()));
        }
        let mut out = Mat::zeros(vx.rows(), width);
        for r in 0..vx.rows() {
            out.row_mut(r).copy_from_slice(&vx.row(r)[start..start + width]);
        }
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::DimensionMismatch("concat row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
            }
            off += v.cols();
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    /// `Σ_valid ‖pred_r − truth_r‖₂ / denom` as a 1×1 node. The subgradient
    /// at a zero-length error vector is taken as zero.
    pub fn vector_loss(&mut self, pred: Var, truth: &Mat, valid: &[bool], denom: f64) -> Result<Var> {
        let vp = self.value(pred);
        if vp.shape() != truth.shape() || valid.len() != vp.rows() {
            return Err(Error::DimensionMismatch("loss inputs".into()));
        }
        let mut diff = Mat::zeros(vp.rows(), vp.cols());
        let mut norms = vec![0.0; vp.rows()];
        let mut total = 0.0;
        for r in 0..vp.rows() {
            if !valid[r] {
                continue;
            }
            let mut s = 0.0;
            for c in 0..vp.cols() {
                let d = vp[(r, c)] - truth[(r, c)];
                diff[(r, c)] = d;
                s += d * d;
            }
            norms[r] = s.sqrt();
            total += norms[r];
        }
        let out = Mat::from_vec(1, 1, vec![total / denom])?;
        Ok(self.push(
            out,
            Op::VectorLoss {
                pred,
                diff,
                norms,
                valid: valid.to_vec(),
                denom,
            },
        ))
    }

    /// Backpropagates from `output` seeded with `seed` (same shape).
    pub fn backward_with(&self, output: Var, seed: Mat) -> Grads {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows(), va.cols());
                    tensor::matmul_nt_acc(&g, vb, &mut ga);
                    let mut gb = Mat::zeros(vb.rows(), vb.cols());
                    tensor::matmul_tn_acc(va, &g, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MatMulNT(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = Mat::zeros(va.rows(), va.cols());
                    tensor::matmul_acc(&g, vb, &mut ga);
                    let mut gb = Mat::zeros(vb.rows(), vb.cols());
                    tensor::matmul_tn_acc(&g, va, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::AddRow(x, b) => {
                    let gb = Mat::from_vec(1, g.cols(), g.col_sums()).expect("shape");
                    accumulate(&mut grads[b.0], gb);
                    accumulate(&mut grads[x.0], g);
                }
                Op::Scale(x, s) => {
                    let s = *s;
                    accumulate(&mut grads[x.0], g.map(|v| v * s));
                }
                Op::MulConst(x, m) => {
                    let mut gx = g;
                    for (o, k) in gx.data_mut().iter_mut().zip(m.data()) {
                        *o *= k;
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sin(x, omega) => {
                    let vx = self.value(*x);
                    let mut gx = g;
                    for (o, &v) in gx.data_mut().iter_mut().zip(vx.data()) {
                        *o *= omega * (omega * v).cos();
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Gelu(x) => {
                    let vx = self.value(*x);
                    let mut gx = g;
                    for (o, &v) in gx.data_mut().iter_mut().zip(vx.data()) {
                        *o *= gelu_grad(v);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gam = self.value(*gamma);
                    let (n, d) = xhat.shape();
                    let mut gg = Mat::zeros(1, d);
                    let mut gbeta = Mat::zeros(1, d);
                    let mut gx = Mat::zeros(n, d);
                    let mut dxh = vec![0.0; d];
                    for r in 0..n {
                        let gr = g.row(r);
                        let xr = xhat.row(r);
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for c in 0..d {
                            gg.data_mut()[c] += gr[c] * xr[c];
                            gbeta.data_mut()[c] += gr[c];
                            dxh[c] = gr[c] * gam.data()[c];
                            s1 += dxh[c];
                            s2 += dxh[c] * xr[c];
                        }
                        let k = inv_std[r] / d as f64;
                        let o = gx.row_mut(r);
                        for c in 0..d {
                            o[c] = k * (d as f64 * dxh[c] - s1 - xr[c] * s2);
                        }
                    }
                    accumulate(&mut grads[gamma.0], gg);
                    accumulate(&mut grads[beta.0], gbeta);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::MaskedSoftmax(x) => {
                    let p = &node.value;
                    let mut gx = Mat::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let (pr, gr) = (p.row(r), g.row(r));
                        let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (c, o) in gx.row_mut(r).iter_mut().enumerate() {
                            *o = pr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::SliceCols(x, start) => {
                    let vx = self.value(*x);
                    let mut gx = Mat::zeros(vx.rows(), vx.cols());
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.value(*p).cols();
                        let mut gp = Mat::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut grads[p.0], gp);
                    }
                }
                Op::VectorLoss {
                    pred,
                    diff,
                    norms,
                    valid,
                    denom,
                } => {
                    let seed = g[(0, 0)];
                    let mut gp = Mat::zeros(diff.rows(), diff.cols());
                    for r in 0..diff.rows() {
                        if valid[r] && norms[r] > 0.0 {
                            let k = seed / (norms[r] * denom);
                            for c in 0..diff.cols() {
                                gp[(r, c)] = k * diff[(r, c)];
                            }
                        }
                    }
                    accumulate(&mut grads[pred.0], gp);
                }
            }
        }
        Grads(grads)
    }

    /// Backpropagates from a scalar (1×1) node.
    pub fn backward(&self, output: Var) -> Grads {
        self.backward_with(output, Mat::from_vec(1, 1, vec![1.0]).expect("1x1"))
    }
}
