use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ModelParameters, Weights};
use super::tokens::{
    observation_features, order_embedding, target_features, AssembledTokens, ObservationToken, Sample,
    TargetToken, TokenFeatures,
};
use crate::attention::{decoder_block, encoder_block, layer_norm, linear, AttentionMask, Dropout, TargetMixing};
use crate::autodiff::{Tape, Var};
use crate::encodings::siren_forward;
use crate::error::{Error, Result};
use crate::tensor::Mat;
use crate::wind::WindVector;

/// Default number of target tokens decoded per pass.
pub const DEFAULT_CHUNK: usize = 1024;

/// Encoder output for one set of observations, reusable across any number
/// of target queries.
#[derive(Debug, Clone)]
pub struct EncodedObservations {
    pub encoded: Mat,
    pub mask: AttentionMask,
}

/// Corrected winds for a target list, or the NWP baseline when no
/// observations were available.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub winds: Vec<WindVector>,
    pub fallback: bool,
}

struct Pass<'p> {
    params: &'p ModelParameters,
    tape: Tape,
    w: Weights<Var>,
    dropout: Option<Dropout>,
}

impl<'p> Pass<'p> {
    fn new(params: &'p ModelParameters, dropout_seed: Option<u64>) -> Self {
        let mut tape = Tape::new();
        let w = params.weights.map(&mut |m| tape.leaf(m.clone()));
        let dropout = dropout_seed
            .filter(|_| params.config.dropout > 0.0)
            .map(|seed| Dropout {
                rate: params.config.dropout,
                rng: ChaCha8Rng::seed_from_u64(seed),
            });
        Pass {
            params,
            tape,
            w,
            dropout,
        }
    }

    fn embed(&mut self, f: &TokenFeatures, proj: &crate::attention::Linear<Var>) -> Result<Var> {
        let x = self.tape.leaf(f.features.clone());
        let x = linear(&mut self.tape, x, proj)?;
        let basis = self.tape.leaf(f.basis.clone());
        let siren = self.params.siren_vars(&self.w);
        let loc = siren_forward(&mut self.tape, basis, &siren)?;
        self.tape.add(x, loc)
    }

    fn embed_obs(&mut self, f: &TokenFeatures) -> Result<Var> {
        let proj = self.w.obs_in.clone();
        let mut x = self.embed(f, &proj)?;
        if self.params.config.obs_order_embedding {
            let pe = self.tape.leaf(order_embedding(f.features.rows(), self.params.config.hidden_dim));
            x = self.tape.add(x, pe)?;
        }
        Ok(x)
    }

    fn encode(&mut self, f: &TokenFeatures, mask: &AttentionMask) -> Result<Var> {
        let mut x = self.embed_obs(f)?;
        let mut dropout = self.dropout.as_mut();
        for b in &self.w.encoder {
            x = encoder_block(&mut self.tape, x, mask, b, &mut dropout)?;
        }
        layer_norm(&mut self.tape, x, &self.w.encoder_norm)
    }

    /// Corrections in m/s, one row per target.
    fn decode(&mut self, encoded: Var, obs_mask: &AttentionMask, f: &TokenFeatures) -> Result<Var> {
        let proj = self.w.target_in.clone();
        let mut t = self.embed(f, &proj)?;
        let target_mask = match self.params.config.target_mixing {
            TargetMixing::Full => AttentionMask::new(f.valid.clone())?,
            TargetMixing::Isolated => AttentionMask::all_valid(f.valid.len()),
        };
        let mixing = self.params.config.target_mixing;
        let mut dropout = self.dropout.as_mut();
        for b in &self.w.decoder {
            t = decoder_block(&mut self.tape, t, encoded, &target_mask, obs_mask, mixing, b, &mut dropout)?;
        }
        if let Some(skip) = &self.w.skip {
            let nwp = self.tape.leaf(f.features.clone());
            let nwp = self.tape.slice_cols(nwp, 0, 2)?;
            let s = linear(&mut self.tape, nwp, skip)?;
            t = self.tape.add(t, s)?;
        }
        let t = layer_norm(&mut self.tape, t, &self.w.decoder_norm)?;
        let delta = linear(&mut self.tape, t, &self.w.head)?;
        Ok(self.tape.scale(delta, self.params.config.wind_scale))
    }
}

fn obs_mask(f: &TokenFeatures) -> Result<AttentionMask> {
    AttentionMask::new(f.valid.clone()).map_err(|_| Error::NoObservations)
}

fn finite(m: &Mat, what: &str) -> Result<()> {
    if m.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn rows_to_winds(m: &Mat) -> Vec<WindVector> {
    (0..m.rows())
        .map(|r| WindVector {
            u: m[(r, 0)],
            v: m[(r, 1)],
        })
        .collect()
}

impl ModelParameters {
    /// Projected and embedded encoder/decoder inputs for a sample.
    pub fn assemble_tokens(&self, sample: &Sample) -> Result<AssembledTokens> {
        let of = observation_features(&sample.obs, &self.config)?;
        let mask = obs_mask(&of)?;
        let tf = target_features(&sample.targets, &self.config)?;
        let mut pass = Pass::new(self, None);
        let e = pass.embed_obs(&of)?;
        let proj = pass.w.target_in.clone();
        let d = pass.embed(&tf, &proj)?;
        Ok(AssembledTokens {
            encoder_input: pass.tape.value(e).clone(),
            decoder_input: pass.tape.value(d).clone(),
            obs_mask: mask,
            target_valid: tf.valid,
        })
    }

    /// Runs the encoder once. Fails with [`Error::NoObservations`] when every
    /// token is masked.
    pub fn encode(&self, obs: &[ObservationToken]) -> Result<EncodedObservations> {
        let f = observation_features(obs, &self.config)?;
        let mask = obs_mask(&f)?;
        let mut pass = Pass::new(self, None);
        let e = pass.encode(&f, &mask)?;
        let encoded = pass.tape.value(e).clone();
        finite(&encoded, "encoder output")?;
        Ok(EncodedObservations { encoded, mask })
    }

    /// Predicted corrections for every target token, in input order.
    /// Targets are decoded `chunk` at a time against one encoder output;
    /// with full target mixing they are decoded in a single pass.
    pub fn decode(&self, enc: &EncodedObservations, targets: &[TargetToken], chunk: usize) -> Result<Vec<WindVector>> {
        if chunk == 0 {
            return Err(Error::InvalidArgument("chunk size must be positive".into()));
        }
        let chunk = match self.config.target_mixing {
            TargetMixing::Isolated => chunk,
            TargetMixing::Full => targets.len().max(1),
        };
        let mut out = Vec::with_capacity(targets.len());
        for part in targets.chunks(chunk) {
            let f = target_features(part, &self.config)?;
            let mut pass = Pass::new(self, None);
            let e = pass.tape.leaf(enc.encoded.clone());
            let delta = pass.decode(e, &enc.mask, &f)?;
            let delta = pass.tape.value(delta);
            finite(delta, "decoder output")?;
            out.extend(rows_to_winds(delta));
        }
        Ok(out)
    }

    /// NWP plus predicted correction for every target. Without any valid
    /// observation the NWP values are returned unchanged and flagged.
    pub fn correct(&self, obs: &[ObservationToken], targets: &[TargetToken], chunk: usize) -> Result<Correction> {
        let enc = match self.encode(obs) {
            Ok(e) => e,
            Err(Error::NoObservations) => {
                return Ok(Correction {
                    winds: targets.iter().map(|t| t.nwp_wind).collect(),
                    fallback: true,
                })
            }
            Err(e) => return Err(e),
        };
        let delta = self.decode(&enc, targets, chunk)?;
        Ok(Correction {
            winds: targets.iter().zip(delta).map(|(t, d)| t.nwp_wind.add(&d)).collect(),
            fallback: false,
        })
    }

    /// Corrected wind for each valid target of `sample`, in order.
    pub fn forward(&self, sample: &Sample) -> Result<Vec<WindVector>> {
        if sample.n_valid_obs() == 0 {
            return Err(Error::NoObservations);
        }
        let c = self.correct(&sample.obs, &sample.targets, DEFAULT_CHUNK)?;
        Ok(sample
            .targets
            .iter()
            .zip(c.winds)
            .filter(|(t, _)| t.valid)
            .map(|(_, w)| w)
            .collect())
    }

    fn loss_pass(&self, sample: &Sample, denom: f64, dropout_seed: Option<u64>) -> Result<(Pass<'_>, Var)> {
        sample.check_trainable()?;
        let truth = sample.truth.as_ref().expect("checked");
        let of = observation_features(&sample.obs, &self.config)?;
        let mask = obs_mask(&of)?;
        let tf = target_features(&sample.targets, &self.config)?;
        let mut residual = Mat::zeros(sample.targets.len(), 2);
        for (r, (t, w)) in sample.targets.iter().zip(truth).enumerate() {
            if t.valid {
                let d = w.sub(&t.nwp_wind);
                if !d.u.is_finite() || !d.v.is_finite() {
                    return Err(Error::NonFinite("target truth".into()));
                }
                residual[(r, 0)] = d.u;
                residual[(r, 1)] = d.v;
            }
        }
        let mut pass = Pass::new(self, dropout_seed);
        let e = pass.encode(&of, &mask)?;
        let delta = pass.decode(e, &mask, &tf)?;
        let loss = pass.tape.vector_loss(delta, &residual, &tf.valid, denom)?;
        Ok((pass, loss))
    }

    /// Sum of vector-magnitude errors over valid targets divided by `denom`.
    pub fn loss(&self, sample: &Sample, denom: f64) -> Result<f64> {
        let (pass, l) = self.loss_pass(sample, denom, None)?;
        Ok(pass.tape.value(l)[(0, 0)])
    }

    /// Loss and its gradient for every parameter tensor, in
    /// [`Weights::visit`] order. `dropout_seed` enables dropout.
    pub fn loss_and_grads(&self, sample: &Sample, denom: f64, dropout_seed: Option<u64>) -> Result<(f64, Vec<Mat>)> {
        let (pass, l) = self.loss_pass(sample, denom, dropout_seed)?;
        let loss = pass.tape.value(l)[(0, 0)];
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let mut grads = pass.tape.backward(l);
        let grads = pass
            .w
            .flat()
            .into_iter()
            .map(|&v| {
                grads.take(v).unwrap_or_else(|| {
                    let (r, c) = pass.tape.value(v).shape();
                    Mat::zeros(r, c)
                })
            })
            .collect();
        Ok((loss, grads))
    }
}
