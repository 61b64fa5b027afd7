//! Sinusoidal coordinate network mapping harmonic features to an embedding.

use rand::Rng;

use super::harmonics::HarmonicBasis;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// One `x ↦ sin(ω·(x·W + b))` layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenLayer {
    pub weight: Mat,
    pub bias: Mat,
    pub omega: f64,
}

impl SirenLayer {
    /// Weights and biases uniform in ±√(6/fan_in)/ω.
    pub fn init(fan_in: usize, fan_out: usize, omega: f64, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt() / omega;
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..=bound)).collect::<Vec<_>>();
        SirenLayer {
            weight: Mat::from_vec(fan_in, fan_out, draw(fan_in * fan_out)).expect("shape"),
            bias: Mat::from_vec(1, fan_out, draw(fan_out)).expect("shape"),
            omega,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationEncoderParams {
    pub layers: Vec<SirenLayer>,
}

impl LocationEncoderParams {
    /// Two hidden sine layers then a sine output layer; the first layer uses
    /// `first_omega`, the rest `omega`.
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        first_omega: f64,
        omega: f64,
        rng: &mut impl Rng,
    ) -> Self {
        LocationEncoderParams {
            layers: vec![
                SirenLayer::init(input_dim, hidden_dim, first_omega, rng),
                SirenLayer::init(hidden_dim, hidden_dim, omega, rng),
                SirenLayer::init(hidden_dim, output_dim, omega, rng),
            ],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.cols())
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.rows() != prev || l.bias.shape() != (1, l.weight.cols()) {
                return Err(Error::DimensionMismatch(format!("siren layer {i} shape")));
            }
            if !l.weight.all_finite() || !l.bias.all_finite() || !l.omega.is_finite() {
                return Err(Error::NonFinite(format!("siren layer {i}")));
            }
            prev = l.weight.cols();
        }
        Ok(())
    }

    pub fn leaves(&self, tape: &mut Tape) -> SirenVars {
        SirenVars {
            layers: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone()), l.omega))
                .collect(),
        }
    }
}

/// Tape handles for the layers of a location encoder.
#[derive(Debug, Clone)]
pub struct SirenVars {
    pub layers: Vec<(Var, Var, f64)>,
}

/// Applies the network row-wise to `input` (one harmonic basis per row).
pub fn siren_forward(tape: &mut Tape, input: Var, vars: &SirenVars) -> Result<Var> {
    let mut h = input;
    for &(w, b, omega) in &vars.layers {
        let z = tape.matmul(h, w)?;
        let z = tape.add_row(z, b)?;
        h = tape.sin(z, omega);
    }
    Ok(h)
}

pub fn location_embedding(params: &LocationEncoderParams, basis: &HarmonicBasis) -> Result<Vec<f64>> {
    let coeffs = basis.coefficients();
    if coeffs.len() != params.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} values, encoder expects {}",
            coeffs.len(),
            params.input_dim()
        )));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(Mat::from_vec(1, coeffs.len(), coeffs.to_vec())?);
    let vars = params.leaves(&mut tape);
    let out = siren_forward(&mut tape, x, &vars)?;
    Ok(tape.value(out).data().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::harmonic_basis;
    use crate::geo::GeoCoord;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(seed: u64) -> LocationEncoderParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LocationEncoderParams::init(16, 8, 4, 30.0, 1.0, &mut rng)
    }

    /// Straight-line evaluation with explicit loops, independent of the tape.
    fn reference(p: &LocationEncoderParams, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in &p.layers {
            let mut next = vec![0.0; l.weight.cols()];
            for (j, o) in next.iter_mut().enumerate() {
                let mut z = l.bias[(0, j)];
                for (i, hi) in h.iter().enumerate() {
                    z += hi * l.weight[(i, j)];
                }
                *o = (l.omega * z).sin();
            }
            h = next;
        }
        h
    }

    #[test]
    fn zero_weights_give_zero_embedding() {
        let mut p = params(1);
        for l in &mut p.layers {
            l.weight = Mat::zeros(l.weight.rows(), l.weight.cols());
            l.bias = Mat::zeros(1, l.bias.cols());
        }
        let b = harmonic_basis(&GeoCoord::new(10.0, 20.0).unwrap(), 3).unwrap();
        assert_eq!(location_embedding(&p, &b).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn deterministic() {
        let p = params(7);
        let b = harmonic_basis(&GeoCoord::new(-33.0, 151.0).unwrap(), 3).unwrap();
        let a = location_embedding(&p, &b).unwrap();
        let c = location_embedding(&p, &b).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn pole_regression_against_reference_pass() {
        let p = params(42);
        let b = harmonic_basis(&GeoCoord::new(90.0, 0.0).unwrap(), 3).unwrap();
        let got = location_embedding(&p, &b).unwrap();
        let want = reference(&p, b.coefficients());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
        // Init bounds: the first layer spans ±√(6/16)/30.
        let bound = (6.0f64 / 16.0).sqrt() / 30.0;
        assert!(p.layers[0].weight.data().iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn dimension_mismatch() {
        let p = params(3);
        let b = harmonic_basis(&GeoCoord::new(0.0, 0.0).unwrap(), 2).unwrap();
        assert!(matches!(location_embedding(&p, &b), Err(Error::DimensionMismatch(_))));
    }
}
