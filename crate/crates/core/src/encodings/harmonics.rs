//! Real orthonormal spherical harmonics without the Condon–Shortley phase.
//!
//! Colatitude θ = 90° − latitude, azimuth φ = longitude. Values are ordered
//! by (l, m) ascending, so `Y_l^m` sits at index `l² + l + m`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::geo::GeoCoord;
use crate::tensor::Mat;

pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    degree: usize,
    coefficients: Vec<f64>,
}

impl HarmonicBasis {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

pub const fn basis_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "spherical harmonic degree {degree} outside [0, {MAX_DEGREE}]"
        )));
    }
    Ok(())
}

/// Normalisation `sqrt((2l+1)/4π · (l−m)!/(l+m)!)`.
fn norm(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// Writes all `Y_l^m` up to `degree` into `out`.
fn eval_into(cos_t: f64, sin_t: f64, phi: f64, degree: usize, out: &mut [f64]) {
    let n = degree + 1;
    // Associated Legendre P_l^m(cos θ) without the (−1)^m phase.
    let mut p = vec![0.0; n * n];
    let idx = |l: usize, m: usize| l * n + m;
    p[idx(0, 0)] = 1.0;
    for m in 1..n {
        p[idx(m, m)] = p[idx(m - 1, m - 1)] * (2 * m - 1) as f64 * sin_t;
    }
    for m in 0..n {
        if m + 1 < n {
            p[idx(m + 1, m)] = cos_t * (2 * m + 1) as f64 * p[idx(m, m)];
        }
        for l in (m + 2)..n {
            p[idx(l, m)] = ((2 * l - 1) as f64 * cos_t * p[idx(l - 1, m)]
                - (l + m - 1) as f64 * p[idx(l - 2, m)])
                / (l - m) as f64;
        }
    }
    for l in 0..n {
        let base = l * l + l;
        out[base] = norm(l, 0) * p[idx(l, 0)];
        for m in 1..=l {
            let k = std::f64::consts::SQRT_2 * norm(l, m) * p[idx(l, m)];
            let (s, c) = (m as f64 * phi).sin_cos();
            out[base + m] = k * c;
            out[base - m] = k * s;
        }
    }
}

fn angles(coord: &GeoCoord) -> (f64, f64, f64) {
    let theta = (90.0 - coord.lat()).to_radians();
    (theta.cos(), theta.sin(), coord.lon().to_radians())
}

pub fn harmonic_basis(coord: &GeoCoord, degree: usize) -> Result<HarmonicBasis> {
    check_degree(degree)?;
    let mut coefficients = vec![0.0; basis_len(degree)];
    let (c, s, phi) = angles(coord);
    eval_into(c, s, phi, degree, &mut coefficients);
    Ok(HarmonicBasis {
        degree,
        coefficients,
    })
}

/// One basis row per coordinate.
pub fn harmonic_matrix(coords: &[GeoCoord], degree: usize) -> Result<Mat> {
    check_degree(degree)?;
    let len = basis_len(degree);
    let mut m = Mat::zeros(coords.len(), len);
    for (r, coord) in coords.iter().enumerate() {
        let (c, s, phi) = angles(coord);
        eval_into(c, s, phi, degree, m.row_mut(r));
    }
    Ok(m)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gram matrix `∫ Y_i Y_j dΩ` by Gauss–Legendre in cos θ times a uniform
/// azimuth rule. Exact (to rounding) when `n_theta > degree` and
/// `n_phi > 2·degree`.
pub fn gram_matrix_quadrature(degree: usize, n_theta: usize, n_phi: usize) -> Result<Mat> {
    check_degree(degree)?;
    let len = basis_len(degree);
    let (xs, ws) = gauss_legendre(n_theta);
    let mut gram = Mat::zeros(len, len);
    let mut y = vec![0.0; len];
    let dphi = TAU / n_phi as f64;
    for (&x, &w) in xs.iter().zip(&ws) {
        let s = (1.0 - x * x).max(0.0).sqrt();
        for b in 0..n_phi {
            eval_into(x, s, b as f64 * dphi, degree, &mut y);
            let wt = w * dphi;
            for i in 0..len {
                for j in 0..len {
                    gram[(i, j)] += wt * y[i] * y[j];
                }
            }
        }
    }
    Ok(gram)
}

/// Monte-Carlo Gram matrix from `n_points` uniform points on the sphere.
/// Points are generated in fixed-size chunks with per-chunk seeds, so the
/// result does not depend on the execution mode.
pub fn gram_matrix_monte_carlo(degree: usize, n_points: usize, seed: u64, mode: ExecMode) -> Result<Mat> {
    check_degree(degree)?;
    const CHUNK: usize = 1 << 14;
    let len = basis_len(degree);
    let n_chunks = n_points.div_ceil(CHUNK);
    let partials = exec::map_range(mode, n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let count = CHUNK.min(n_points - c * CHUNK);
        let mut acc = vec![0.0; len * len];
        let mut y = vec![0.0; len];
        for _ in 0..count {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..TAU);
            eval_into(z, (1.0 - z * z).sqrt(), phi, degree, &mut y);
            for i in 0..len {
                for j in 0..len {
                    acc[i * len + j] += y[i] * y[j];
                }
            }
        }
        acc
    });
    let mut gram = Mat::zeros(len, len);
    for p in partials {
        for (g, v) in gram.data_mut().iter_mut().zip(p) {
            *g += v;
        }
    }
    let scale = 4.0 * PI / n_points as f64;
    Ok(gram.map(|v| v * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroth_degree_is_constant() {
        for (lat, lon) in [(0.0, 0.0), (-45.0, 120.0), (89.0, -179.5)] {
            let b = harmonic_basis(&GeoCoord::new(lat, lon).unwrap(), 0).unwrap();
            assert_eq!(b.coefficients().len(), 1);
            assert!((b.coefficients()[0] - 0.28209479177387814).abs() < 1e-15);
        }
    }

    #[test]
    fn north_pole_degree_one() {
        let b = harmonic_basis(&GeoCoord::new(90.0, 37.0).unwrap(), 1).unwrap();
        let c = b.coefficients();
        assert!(c[1].abs() < 1e-15);
        assert!((c[2] - 0.4886025119029199).abs() < 1e-15);
        assert!(c[3].abs() < 1e-15);
    }

    #[test]
    fn frozen_reference_lat30_lon45() {
        // Complex harmonics from an independent library, converted to the
        // real phase-free convention.
        let expected = [
            0.28209479177387814,
            0.2992067103010745,
            0.24430125595146002,
            0.29920671030107454,
            0.4097056614720297,
            0.33452327177864466,
            -0.07884789131312986,
            0.3345232717786447,
            2.5087236345713513e-17,
        ];
        let b = harmonic_basis(&GeoCoord::new(30.0, 45.0).unwrap(), 2).unwrap();
        for (k, (a, e)) in b.coefficients().iter().zip(expected).enumerate() {
            assert!((a - e).abs() < 1e-14, "index {k}: {a} vs {e}");
        }
    }

    #[test]
    fn degree_out_of_range() {
        let c = GeoCoord::new(0.0, 0.0).unwrap();
        assert!(harmonic_basis(&c, 11).is_err());
        assert_eq!(harmonic_basis(&c, 10).unwrap().coefficients().len(), 121);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let sum_w: f64 = w.iter().sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        let int_x10: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((int_x10 - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_gram_is_identity_to_degree_10() {
        let g = gram_matrix_quadrature(10, 12, 24).unwrap();
        assert!(g.max_abs_diff(&Mat::identity(121)) < 1e-9);
    }

    #[test]
    fn harmonic_matrix_matches_single_points() {
        let coords = [GeoCoord::new(12.0, -40.0).unwrap(), GeoCoord::new(-3.5, 170.0).unwrap()];
        let m = harmonic_matrix(&coords, 3).unwrap();
        for (r, c) in coords.iter().enumerate() {
            assert_eq!(m.row(r), harmonic_basis(c, 3).unwrap().coefficients());
        }
    }
}
