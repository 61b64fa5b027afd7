//! Masked scaled-dot-product attention and the pre-norm transformer blocks
//! built from it.
//!
//! Parameter structs are generic over their handle type: `Mat` for owned
//! weights, [`Var`] once placed on a tape, `usize` for indices into a
//! parameter store.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Which keys each query may attend to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    key_valid: Vec<bool>,
}

impl AttentionMask {
    pub fn new(key_valid: Vec<bool>) -> Result<Self> {
        if !key_valid.iter().any(|&v| v) {
            return Err(Error::AllKeysMasked { row: 0 });
        }
        Ok(AttentionMask { key_valid })
    }

    pub fn all_valid(n: usize) -> Self {
        AttentionMask {
            key_valid: vec![true; n],
        }
    }

    pub fn key_valid(&self) -> &[bool] {
        &self.key_valid
    }

    pub fn len(&self) -> usize {
        self.key_valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.key_valid.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.key_valid.iter().filter(|&&v| v).count()
    }
}

/// Inverted dropout; only constructed for training passes.
#[derive(Debug)]
pub struct Dropout {
    pub rate: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let (r, c) = tape.value(x).shape();
        let keep = 1.0 / (1.0 - self.rate);
        let data = (0..r * c)
            .map(|_| if self.rng.gen::<f64>() < self.rate { 0.0 } else { keep })
            .collect();
        tape.mul_const(x, Mat::from_vec(r, c, data)?)
    }
}

fn maybe_dropout(tape: &mut Tape, x: Var, dropout: &mut Option<&mut Dropout>) -> Result<Var> {
    match dropout {
        Some(d) => d.apply(tape, x),
        None => Ok(x),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T = Mat> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<T = Mat> {
    pub gamma: T,
    pub beta: T,
}

/// Per-head projections stored side by side: head `i` owns columns
/// `i·d_k .. (i+1)·d_k` of `wq`, `wk`, `wv`, and rows of `wo` likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadProjections<T = Mat> {
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
    pub heads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward<T = Mat> {
    pub inner: Linear<T>,
    pub outer: Linear<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock<T = Mat> {
    pub ln_attn: LayerNormParams<T>,
    pub attn: HeadProjections<T>,
    pub ln_ff: LayerNormParams<T>,
    pub ff: FeedForward<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock<T = Mat> {
    pub ln_self: LayerNormParams<T>,
    pub self_attn: HeadProjections<T>,
    pub ln_cross: LayerNormParams<T>,
    pub cross_attn: HeadProjections<T>,
    pub ln_ff: LayerNormParams<T>,
    pub ff: FeedForward<T>,
}

/// How target tokens interact inside a decoder block's self-attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMixing {
    /// Each target attends only to itself, so every target's output is
    /// independent of which other targets share the query.
    Isolated,
    /// Targets attend to all valid targets.
    Full,
}

impl<T> Linear<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Linear<U> {
        Linear {
            weight: f(&self.weight),
            bias: f(&self.bias),
        }
    }
}

impl<T> LayerNormParams<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> LayerNormParams<U> {
        LayerNormParams {
            gamma: f(&self.gamma),
            beta: f(&self.beta),
        }
    }
}

impl<T> HeadProjections<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> HeadProjections<U> {
        HeadProjections {
            wq: f(&self.wq),
            wk: f(&self.wk),
            wv: f(&self.wv),
            wo: f(&self.wo),
            heads: self.heads,
        }
    }
}

impl<T> FeedForward<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> FeedForward<U> {
        FeedForward {
            inner: self.inner.map(f),
            outer: self.outer.map(f),
        }
    }
}

impl<T> EncoderBlock<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> EncoderBlock<U> {
        EncoderBlock {
            ln_attn: self.ln_attn.map(f),
            attn: self.attn.map(f),
            ln_ff: self.ln_ff.map(f),
            ff: self.ff.map(f),
        }
    }
}

impl<T> DecoderBlock<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> DecoderBlock<U> {
        DecoderBlock {
            ln_self: self.ln_self.map(f),
            self_attn: self.self_attn.map(f),
            ln_cross: self.ln_cross.map(f),
            cross_attn: self.cross_attn.map(f),
            ln_ff: self.ln_ff.map(f),
            ff: self.ff.map(f),
        }
    }
}

pub fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect())
        .expect("shape")
}

impl Linear<Mat> {
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            weight: xavier(fan_in, fan_out, rng),
            bias: Mat::zeros(1, fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Mat::zeros(fan_in, fan_out),
            bias: Mat::zeros(1, fan_out),
        }
    }
}

impl LayerNormParams<Mat> {
    pub fn init(dim: usize) -> Self {
        LayerNormParams {
            gamma: Mat::from_vec(1, dim, vec![1.0; dim]).expect("shape"),
            beta: Mat::zeros(1, dim),
        }
    }
}

impl HeadProjections<Mat> {
    pub fn init(dim: usize, heads: usize, rng: &mut impl Rng) -> Self {
        HeadProjections {
            wq: xavier(dim, dim, rng),
            wk: xavier(dim, dim, rng),
            wv: xavier(dim, dim, rng),
            wo: xavier(dim, dim, rng),
            heads,
        }
    }

    pub fn identity(dim: usize) -> Self {
        HeadProjections {
            wq: Mat::identity(dim),
            wk: Mat::identity(dim),
            wv: Mat::identity(dim),
            wo: Mat::identity(dim),
            heads: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.heads == 0 || d % self.heads != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} heads do not divide hidden dim {d}",
                self.heads
            )));
        }
        for m in [&self.wq, &self.wk, &self.wv, &self.wo] {
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch(format!(
                    "projection {:?}, expected ({d}, {d})",
                    m.shape()
                )));
            }
            if !m.all_finite() {
                return Err(Error::NonFinite("head projection".into()));
            }
        }
        Ok(())
    }
}

impl FeedForward<Mat> {
    pub fn init(dim: usize, mult: usize, rng: &mut impl Rng) -> Self {
        FeedForward {
            inner: Linear::init(dim, dim * mult, rng),
            outer: Linear::init(dim * mult, dim, rng),
        }
    }
}

impl EncoderBlock<Mat> {
    pub fn init(dim: usize, heads: usize, ff_mult: usize, rng: &mut impl Rng) -> Self {
        EncoderBlock {
            ln_attn: LayerNormParams::init(dim),
            attn: HeadProjections::init(dim, heads, rng),
            ln_ff: LayerNormParams::init(dim),
            ff: FeedForward::init(dim, ff_mult, rng),
        }
    }

    pub fn leaves(&self, tape: &mut Tape) -> EncoderBlock<Var> {
        self.map(&mut |m| tape.leaf(m.clone()))
    }
}

impl DecoderBlock<Mat> {
    pub fn init(dim: usize, heads: usize, ff_mult: usize, rng: &mut impl Rng) -> Self {
        DecoderBlock {
            ln_self: LayerNormParams::init(dim),
            self_attn: HeadProjections::init(dim, heads, rng),
            ln_cross: LayerNormParams::init(dim),
            cross_attn: HeadProjections::init(dim, heads, rng),
            ln_ff: LayerNormParams::init(dim),
            ff: FeedForward::init(dim, ff_mult, rng),
        }
    }

    pub fn leaves(&self, tape: &mut Tape) -> DecoderBlock<Var> {
        self.map(&mut |m| tape.leaf(m.clone()))
    }
}

pub fn linear(tape: &mut Tape, x: Var, p: &Linear<Var>) -> Result<Var> {
    let y = tape.matmul(x, p.weight)?;
    tape.add_row(y, p.bias)
}

pub fn layer_norm(tape: &mut Tape, x: Var, p: &LayerNormParams<Var>) -> Result<Var> {
    tape.layer_norm(x, p.gamma, p.beta)
}

/// `softmax(Q·Kᵀ/√d_k) · V` with masked keys excluded.
pub fn attend(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    mask: &AttentionMask,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var> {
    let dk = tape.value(q).cols();
    if tape.value(k).rows() != mask.len() || tape.value(v).rows() != mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} keys, {} values, mask of {}",
            tape.value(k).rows(),
            tape.value(v).rows(),
            mask.len()
        )));
    }
    let scores = tape.matmul_nt(q, k)?;
    let scores = tape.scale(scores, 1.0 / (dk as f64).sqrt());
    let weights = tape.masked_softmax(scores, mask.key_valid())?;
    let weights = maybe_dropout(tape, weights, dropout)?;
    tape.matmul(weights, v)
}

/// Multi-head attention of `x_query` rows over `x_kv` rows. Self-attention
/// is the case `x_query == x_kv`.
pub fn multi_head(
    tape: &mut Tape,
    x_query: Var,
    x_kv: Var,
    mask: &AttentionMask,
    proj: &HeadProjections<Var>,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var> {
    let dim = tape.value(proj.wq).rows();
    if tape.value(x_query).cols() != dim || tape.value(x_kv).cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "token width {} / {} against projections for {dim}",
            tape.value(x_query).cols(),
            tape.value(x_kv).cols()
        )));
    }
    if proj.heads == 0 || dim % proj.heads != 0 {
        return Err(Error::DimensionMismatch(format!("{} heads for dim {dim}", proj.heads)));
    }
    let dk = dim / proj.heads;
    let q = tape.matmul(x_query, proj.wq)?;
    let k = tape.matmul(x_kv, proj.wk)?;
    let v = tape.matmul(x_kv, proj.wv)?;
    let mut heads = Vec::with_capacity(proj.heads);
    for h in 0..proj.heads {
        let (qh, kh, vh) = if proj.heads == 1 {
            (q, k, v)
        } else {
            (
                tape.slice_cols(q, h * dk, dk)?,
                tape.slice_cols(k, h * dk, dk)?,
                tape.slice_cols(v, h * dk, dk)?,
            )
        };
        heads.push(attend(tape, qh, kh, vh, mask, dropout)?);
    }
    let cat = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    tape.matmul(cat, proj.wo)
}

/// Self-attention where each token's only admissible key is itself. The
/// singleton softmax weight is exactly 1, so this reduces to `x·W_V·W_O`.
pub fn isolated_self_attention(tape: &mut Tape, x: Var, proj: &HeadProjections<Var>) -> Result<Var> {
    let v = tape.matmul(x, proj.wv)?;
    tape.matmul(v, proj.wo)
}

fn feed_forward(
    tape: &mut Tape,
    x: Var,
    ff: &FeedForward<Var>,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var> {
    let h = linear(tape, x, &ff.inner)?;
    let h = tape.gelu(h);
    let h = linear(tape, h, &ff.outer)?;
    maybe_dropout(tape, h, dropout)
}

/// Pre-norm MHSA + residual, then pre-norm feed-forward + residual.
pub fn encoder_block(
    tape: &mut Tape,
    x: Var,
    mask: &AttentionMask,
    block: &EncoderBlock<Var>,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var> {
    let n = layer_norm(tape, x, &block.ln_attn)?;
    let a = multi_head(tape, n, n, mask, &block.attn, dropout)?;
    let x = tape.add(x, a)?;
    let n = layer_norm(tape, x, &block.ln_ff)?;
    let f = feed_forward(tape, n, &block.ff, dropout)?;
    tape.add(x, f)
}

/// Pre-norm self-attention over targets, pre-norm cross-attention to the
/// encoded observations, pre-norm feed-forward; each with a residual.
#[allow(clippy::too_many_arguments)]
pub fn decoder_block(
    tape: &mut Tape,
    targets: Var,
    encoded: Var,
    target_mask: &AttentionMask,
    obs_mask: &AttentionMask,
    mixing: TargetMixing,
    block: &DecoderBlock<Var>,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var> {
    let n = layer_norm(tape, targets, &block.ln_self)?;
    let s = match mixing {
        TargetMixing::Isolated => isolated_self_attention(tape, n, &block.self_attn)?,
        TargetMixing::Full => multi_head(tape, n, n, target_mask, &block.self_attn, dropout)?,
    };
    let t = tape.add(targets, s)?;
    let n = layer_norm(tape, t, &block.ln_cross)?;
    let c = multi_head(tape, n, encoded, obs_mask, &block.cross_attn, dropout)?;
    let t = tape.add(t, c)?;
    let n = layer_norm(tape, t, &block.ln_ff)?;
    let f = feed_forward(tape, n, &block.ff, dropout)?;
    tape.add(t, f)
}

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Single-head attention on plain matrices.
pub fn scaled_dot_attention(q: &Mat, k: &Mat, v: &Mat, mask: &AttentionMask) -> Result<Mat> {
    if q.cols() != k.cols() || k.rows() != v.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Q {:?}, K {:?}, V {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let mut tape = Tape::new();
    let (qv, kv, vv) = (tape.leaf(q.clone()), tape.leaf(k.clone()), tape.leaf(v.clone()));
    let out = attend(&mut tape, qv, kv, vv, mask, &mut None)?;
    Ok(tape.value(out).clone())
}

/// Attention weights (rows sum to one over valid keys).
pub fn attention_weights(q: &Mat, k: &Mat, mask: &AttentionMask) -> Result<Mat> {
    let mut tape = Tape::new();
    let (qv, kv) = (tape.leaf(q.clone()), tape.leaf(k.clone()));
    let s = tape.matmul_nt(qv, kv)?;
    let s = tape.scale(s, 1.0 / (q.cols() as f64).sqrt());
    let w = tape.masked_softmax(s, mask.key_valid())?;
    Ok(tape.value(w).clone())
}

pub fn mhsa(x: &Mat, mask: &AttentionMask, proj: &HeadProjections) -> Result<Mat> {
    proj.validate()?;
    check_finite(x, "self-attention input")?;
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let p = proj.map(&mut |m| tape.leaf(m.clone()));
    let out = multi_head(&mut tape, xv, xv, mask, &p, &mut None)?;
    Ok(tape.value(out).clone())
}

pub fn cross_attention(query_src: &Mat, kv_src: &Mat, mask: &AttentionMask, proj: &HeadProjections) -> Result<Mat> {
    proj.validate()?;
    check_finite(query_src, "cross-attention queries")?;
    check_finite(kv_src, "cross-attention keys")?;
    let mut tape = Tape::new();
    let q = tape.leaf(query_src.clone());
    let kv = tape.leaf(kv_src.clone());
    let p = proj.map(&mut |m| tape.leaf(m.clone()));
    let out = multi_head(&mut tape, q, kv, mask, &p, &mut None)?;
    Ok(tape.value(out).clone())
}

pub fn apply_encoder_block(x: &Mat, mask: &AttentionMask, block: &EncoderBlock) -> Result<Mat> {
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let b = block.leaves(&mut tape);
    let out = encoder_block(&mut tape, xv, mask, &b, &mut None)?;
    Ok(tape.value(out).clone())
}

pub fn apply_decoder_block(
    targets: &Mat,
    encoded: &Mat,
    target_mask: &AttentionMask,
    obs_mask: &AttentionMask,
    mixing: TargetMixing,
    block: &DecoderBlock,
) -> Result<Mat> {
    let mut tape = Tape::new();
    let t = tape.leaf(targets.clone());
    let e = tape.leaf(encoded.clone());
    let b = block.leaves(&mut tape);
    let out = decoder_block(&mut tape, t, e, target_mask, obs_mask, mixing, &b, &mut None)?;
    Ok(tape.value(out).clone())
}
