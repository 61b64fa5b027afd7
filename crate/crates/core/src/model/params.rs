use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::attention::{DecoderBlock, EncoderBlock, FeedForward, HeadProjections, LayerNormParams, Linear};
use crate::encodings::{LocationEncoderParams, SirenLayer, SirenVars};
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Every learned tensor of the corrector, generic over the handle type.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub obs_in: Linear<T>,
    pub target_in: Linear<T>,
    /// Sine layers of the location encoder as `(weight, bias)` pairs.
    pub location: Vec<Linear<T>>,
    pub encoder: Vec<EncoderBlock<T>>,
    pub encoder_norm: LayerNormParams<T>,
    pub decoder: Vec<DecoderBlock<T>>,
    pub decoder_norm: LayerNormParams<T>,
    pub skip: Option<Linear<T>>,
    pub head: Linear<T>,
}

fn visit_linear<'a, T>(p: &str, l: &'a Linear<T>, f: &mut dyn FnMut(String, &'a T)) {
    f(format!("{p}.weight"), &l.weight);
    f(format!("{p}.bias"), &l.bias);
}

fn visit_norm<'a, T>(p: &str, l: &'a LayerNormParams<T>, f: &mut dyn FnMut(String, &'a T)) {
    f(format!("{p}.gamma"), &l.gamma);
    f(format!("{p}.beta"), &l.beta);
}

fn visit_heads<'a, T>(p: &str, h: &'a HeadProjections<T>, f: &mut dyn FnMut(String, &'a T)) {
    f(format!("{p}.wq"), &h.wq);
    f(format!("{p}.wk"), &h.wk);
    f(format!("{p}.wv"), &h.wv);
    f(format!("{p}.wo"), &h.wo);
}

fn visit_ff<'a, T>(p: &str, ff: &'a FeedForward<T>, f: &mut dyn FnMut(String, &'a T)) {
    visit_linear(&format!("{p}.inner"), &ff.inner, f);
    visit_linear(&format!("{p}.outer"), &ff.outer, f);
}

impl<T> Weights<T> {
    /// Visits every tensor with a stable dotted name, in a fixed order.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a T)) {
        visit_linear("obs_in", &self.obs_in, f);
        visit_linear("target_in", &self.target_in, f);
        for (i, l) in self.location.iter().enumerate() {
            visit_linear(&format!("location.{i}"), l, f);
        }
        for (i, b) in self.encoder.iter().enumerate() {
            let p = format!("encoder.{i}");
            visit_norm(&format!("{p}.ln_attn"), &b.ln_attn, f);
            visit_heads(&format!("{p}.attn"), &b.attn, f);
            visit_norm(&format!("{p}.ln_ff"), &b.ln_ff, f);
            visit_ff(&format!("{p}.ff"), &b.ff, f);
        }
        visit_norm("encoder_norm", &self.encoder_norm, f);
        for (i, b) in self.decoder.iter().enumerate() {
            let p = format!("decoder.{i}");
            visit_norm(&format!("{p}.ln_self"), &b.ln_self, f);
            visit_heads(&format!("{p}.self_attn"), &b.self_attn, f);
            visit_norm(&format!("{p}.ln_cross"), &b.ln_cross, f);
            visit_heads(&format!("{p}.cross_attn"), &b.cross_attn, f);
            visit_norm(&format!("{p}.ln_ff"), &b.ln_ff, f);
            visit_ff(&format!("{p}.ff"), &b.ff, f);
        }
        visit_norm("decoder_norm", &self.decoder_norm, f);
        if let Some(s) = &self.skip {
            visit_linear("skip", s, f);
        }
        visit_linear("head", &self.head, f);
    }

    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> Weights<U> {
        Weights {
            obs_in: self.obs_in.map(f),
            target_in: self.target_in.map(f),
            location: self.location.iter().map(|l| l.map(f)).collect(),
            encoder: self.encoder.iter().map(|b| b.map(f)).collect(),
            encoder_norm: self.encoder_norm.map(f),
            decoder: self.decoder.iter().map(|b| b.map(f)).collect(),
            decoder_norm: self.decoder_norm.map(f),
            skip: self.skip.as_ref().map(|s| s.map(f)),
            head: self.head.map(f),
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |n, _| out.push(n));
        out
    }

    pub fn flat(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit(&mut |_, t| out.push(t));
        out
    }
}

impl<T: Clone> Weights<T> {
    /// Rebuilds a structure from values listed in [`Weights::visit`] order.
    pub fn from_flat<U>(template: &Weights<U>, values: Vec<T>) -> Result<Weights<T>> {
        let n = template.flat().len();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!("{} tensors, expected {n}", values.len())));
        }
        let mut slots: Weights<Option<T>> = template.map(&mut |_| None);
        let mut it = values.into_iter();
        slots.visit_mut(&mut |s| *s = it.next());
        Ok(slots.map(&mut |s| s.clone().expect("filled")))
    }
}

/// Tensor shapes implied by a configuration.
pub fn shape_layout(cfg: &ModelConfig) -> Weights<(usize, usize)> {
    let d = cfg.hidden_dim;
    let ff = d * cfg.ff_mult;
    let lin = |i: usize, o: usize| Linear {
        weight: (i, o),
        bias: (1, o),
    };
    let norm = || LayerNormParams {
        gamma: (1, d),
        beta: (1, d),
    };
    let heads = || HeadProjections {
        wq: (d, d),
        wk: (d, d),
        wv: (d, d),
        wo: (d, d),
        heads: cfg.heads,
    };
    let ffn = || FeedForward {
        inner: lin(d, ff),
        outer: lin(ff, d),
    };
    Weights {
        obs_in: lin(cfg.obs_feature_dim(), d),
        target_in: lin(cfg.target_feature_dim(), d),
        location: vec![
            lin(cfg.basis_dim(), cfg.siren_hidden),
            lin(cfg.siren_hidden, cfg.siren_hidden),
            lin(cfg.siren_hidden, d),
        ],
        encoder: (0..cfg.encoder_layers)
            .map(|_| EncoderBlock {
                ln_attn: norm(),
                attn: heads(),
                ln_ff: norm(),
                ff: ffn(),
            })
            .collect(),
        encoder_norm: norm(),
        decoder: (0..cfg.decoder_layers)
            .map(|_| DecoderBlock {
                ln_self: norm(),
                self_attn: heads(),
                ln_cross: norm(),
                cross_attn: heads(),
                ln_ff: norm(),
                ff: ffn(),
            })
            .collect(),
        decoder_norm: norm(),
        skip: cfg.gfs_skip.then(|| lin(2, d)),
        head: lin(d, 2),
    }
}

/// Named tensor shapes implied by a configuration, in visit order.
pub fn expected_shapes(cfg: &ModelConfig) -> Vec<(String, (usize, usize))> {
    let mut out = Vec::new();
    shape_layout(cfg).visit(&mut |n, s| out.push((n, *s)));
    out
}

/// Learned weights plus the hyperparameters that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub weights: Weights<Mat>,
}

/// Rounds every value to the nearest `f32`. Parameters are kept on this
/// lattice so that the 32-bit checkpoint format stores them exactly.
pub fn snap_to_f32(m: &mut Mat) {
    for x in m.data_mut() {
        *x = *x as f32 as f64;
    }
}

impl ModelParameters {
    /// Seeded initialisation. The output head starts at zero, so a fresh
    /// model returns the NWP baseline unchanged.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        let siren = LocationEncoderParams::init(
            config.basis_dim(),
            config.siren_hidden,
            d,
            config.siren_first_omega,
            config.siren_omega,
            &mut rng,
        );
        let obs_in = Linear::init(config.obs_feature_dim(), d, &mut rng);
        let target_in = Linear::init(config.target_feature_dim(), d, &mut rng);
        let encoder = (0..config.encoder_layers)
            .map(|_| EncoderBlock::init(d, config.heads, config.ff_mult, &mut rng))
            .collect();
        let decoder = (0..config.decoder_layers)
            .map(|_| DecoderBlock::init(d, config.heads, config.ff_mult, &mut rng))
            .collect();
        let skip = config.gfs_skip.then(|| Linear::init(2, d, &mut rng));
        let mut weights = Weights {
            obs_in,
            target_in,
            location: siren
                .layers
                .into_iter()
                .map(|l| Linear {
                    weight: l.weight,
                    bias: l.bias,
                })
                .collect(),
            encoder,
            encoder_norm: LayerNormParams::init(d),
            decoder,
            decoder_norm: LayerNormParams::init(d),
            skip,
            head: Linear::zeros(d, 2),
        };
        for m in weights.flat_mut() {
            snap_to_f32(m);
        }
        Ok(ModelParameters { config, weights })
    }

    /// Checks tensor count, shapes and finiteness against the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = expected_shapes(&self.config);
        let mut actual = Vec::new();
        self.weights.visit(&mut |n, m| actual.push((n, m.shape(), m.all_finite())));
        if expected.len() != actual.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tensors, configuration implies {}",
                actual.len(),
                expected.len()
            )));
        }
        for ((en, es), (an, ashape, finite)) in expected.iter().zip(&actual) {
            if en != an || es != ashape {
                return Err(Error::DimensionMismatch(format!("{an} {ashape:?}, expected {en} {es:?}")));
            }
            if !finite {
                return Err(Error::NonFinite(an.clone()));
            }
        }
        for b in &self.weights.encoder {
            b.attn.validate()?;
        }
        for b in &self.weights.decoder {
            b.self_attn.validate()?;
            b.cross_attn.validate()?;
        }
        Ok(())
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.flat().iter().map(|m| m.data().len()).sum()
    }

    /// The location encoder as a standalone network.
    pub fn location_encoder(&self) -> LocationEncoderParams {
        let omegas = self.location_omegas();
        LocationEncoderParams {
            layers: self
                .weights
                .location
                .iter()
                .zip(omegas)
                .map(|(l, omega)| SirenLayer {
                    weight: l.weight.clone(),
                    bias: l.bias.clone(),
                    omega,
                })
                .collect(),
        }
    }

    pub(crate) fn location_omegas(&self) -> Vec<f64> {
        (0..self.weights.location.len())
            .map(|i| {
                if i == 0 {
                    self.config.siren_first_omega
                } else {
                    self.config.siren_omega
                }
            })
            .collect()
    }

    pub(crate) fn siren_vars(&self, w: &Weights<crate::autodiff::Var>) -> SirenVars {
        SirenVars {
            layers: w
                .location
                .iter()
                .zip(self.location_omegas())
                .map(|(l, o)| (l.weight, l.bias, o))
                .collect(),
        }
    }

    /// Zeroes the output head so corrections vanish.
    pub fn zero_head(&mut self) {
        self.weights.head = Linear::zeros(self.config.hidden_dim, 2);
    }
}

fn lin_mut<'a, T>(l: &'a mut Linear<T>, f: &mut dyn FnMut(&'a mut T)) {
    f(&mut l.weight);
    f(&mut l.bias);
}

fn norm_mut<'a, T>(l: &'a mut LayerNormParams<T>, f: &mut dyn FnMut(&'a mut T)) {
    f(&mut l.gamma);
    f(&mut l.beta);
}

fn heads_mut<'a, T>(h: &'a mut HeadProjections<T>, f: &mut dyn FnMut(&'a mut T)) {
    f(&mut h.wq);
    f(&mut h.wk);
    f(&mut h.wv);
    f(&mut h.wo);
}

impl<T> Weights<T> {
    /// Mutable traversal in the same order as [`Weights::visit`].
    pub fn visit_mut<'a>(&'a mut self, f: &mut dyn FnMut(&'a mut T)) {
        lin_mut(&mut self.obs_in, f);
        lin_mut(&mut self.target_in, f);
        for l in &mut self.location {
            lin_mut(l, f);
        }
        for b in &mut self.encoder {
            norm_mut(&mut b.ln_attn, f);
            heads_mut(&mut b.attn, f);
            norm_mut(&mut b.ln_ff, f);
            lin_mut(&mut b.ff.inner, f);
            lin_mut(&mut b.ff.outer, f);
        }
        norm_mut(&mut self.encoder_norm, f);
        for b in &mut self.decoder {
            norm_mut(&mut b.ln_self, f);
            heads_mut(&mut b.self_attn, f);
            norm_mut(&mut b.ln_cross, f);
            heads_mut(&mut b.cross_attn, f);
            norm_mut(&mut b.ln_ff, f);
            lin_mut(&mut b.ff.inner, f);
            lin_mut(&mut b.ff.outer, f);
        }
        norm_mut(&mut self.decoder_norm, f);
        if let Some(s) = &mut self.skip {
            lin_mut(s, f);
        }
        lin_mut(&mut self.head, f);
    }

    pub fn flat_mut(&mut self) -> Vec<&mut T> {
        let mut out = Vec::new();
        self.visit_mut(&mut |t| out.push(t));
        out
    }
}
