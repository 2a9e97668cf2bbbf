//! Generalized-analytic feature bank over latent complex points.
//!
//! For each latent point `z` and bank frequency `omega_k`, let
//! `a = Re(z * conj(omega_k)) = z_re * omega_re + z_im * omega_im` and
//! `m = |z|`. A feature row is the concatenation
//! `[sin(a_k) | cos(a_k) | m sin(a_k) | m cos(a_k)]`, each block `K` wide,
//! for a total width of `4K`. The magnitude-scaled terms extend the plain
//! Fourier dictionary with first-order Vekua-Taylor growth in `|z|`.

use rand::Rng;

use crate::error::{Result, VekuaError};
use crate::mat::{self, Mat};
use crate::rng::{self, Domain};
use crate::warp::LatentPoints;

/// A bank of `K` complex spectral frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBank {
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
}

impl FrequencyBank {
    /// Number of frequencies.
    pub fn k(&self) -> usize {
        self.omega_re.len()
    }

    /// Feature width produced by this bank.
    pub fn width(&self) -> usize {
        4 * self.k()
    }
}

/// Basis evaluation: the feature matrix plus the point magnitudes needed by
/// the backward pass.
#[derive(Debug, Clone)]
pub struct BasisEval {
    /// `N x 4K` feature matrix.
    pub phi: Mat,
    /// `|z|` per point.
    pub m: Vec<f64>,
}

/// Gradients with respect to the bank frequencies (only produced when
/// frequency training is enabled).
#[derive(Debug, Clone)]
pub struct FreqGrads {
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
}

/// Draw a bank of `k` frequencies: magnitudes uniform in
/// `[freq_scale/2, 1.5 freq_scale]` and phases uniform in `[0, 2pi)`, from
/// independent streams.
pub fn init_frequencies(seed: u64, k: usize, freq_scale: f64) -> Result<FrequencyBank> {
    if k == 0 {
        return Err(VekuaError::InvalidSize(
            "frequency bank size K must be positive".into(),
        ));
    }
    if !(freq_scale > 0.0) {
        return Err(VekuaError::InvalidParameter(format!(
            "freq_scale must be positive, got {freq_scale}"
        )));
    }
    let mut mag = rng::stream(seed, Domain::FreqMagnitude, 0);
    let mut phase = rng::stream(seed, Domain::FreqPhase, 0);
    let mut omega_re = Vec::with_capacity(k);
    let mut omega_im = Vec::with_capacity(k);
    for _ in 0..k {
        let r: f64 = mag.random_range(freq_scale / 2.0..freq_scale * 1.5);
        let theta: f64 = phase.random_range(0.0..std::f64::consts::TAU);
        let (s, c) = theta.sin_cos();
        omega_re.push(r * c);
        omega_im.push(r * s);
    }
    Ok(FrequencyBank { omega_re, omega_im })
}

/// Evaluate the feature matrix and keep the magnitudes for the backward pass.
pub fn basis_eval(bank: &FrequencyBank, z: &LatentPoints) -> Result<BasisEval> {
    if z.z_re.len() != z.z_im.len() {
        return Err(VekuaError::ShapeMismatch(
            "latent real/imaginary parts differ in length".into(),
        ));
    }
    let n = z.len();
    let k = bank.k();
    let width = 4 * k;
    let mut phi = Mat::zeros(n, width);
    let mut m = vec![0.0f64; n];
    mat::fill_zip2(
        phi.as_mut_slice(),
        width,
        &mut m,
        1,
        true,
        |first, rows, ms| {
            for (r, (row, mv)) in rows.chunks_mut(width).zip(ms.iter_mut()).enumerate() {
                let i = first + r;
                let (zre, zim) = (z.z_re[i], z.z_im[i]);
                let mag = zre.hypot(zim);
                *mv = mag;
                let (sin_b, rest) = row.split_at_mut(k);
                let (cos_b, rest) = rest.split_at_mut(k);
                let (msin_b, mcos_b) = rest.split_at_mut(k);
                for j in 0..k {
                    let a = zre * bank.omega_re[j] + zim * bank.omega_im[j];
                    let (s, c) = a.sin_cos();
                    sin_b[j] = s;
                    cos_b[j] = c;
                    msin_b[j] = mag * s;
                    mcos_b[j] = mag * c;
                }
            }
        },
    );
    Ok(BasisEval { phi, m })
}

/// Evaluate only the feature matrix.
pub fn basis_features(bank: &FrequencyBank, z: &LatentPoints) -> Result<Mat> {
    Ok(basis_eval(bank, z)?.phi)
}

/// Exact reverse-mode gradient of [`basis_eval`] w.r.t. the latent points,
/// and optionally w.r.t. the bank frequencies.
///
/// At `m = |z| = 0` the magnitude-term gradient is defined as 0 (isolated
/// nondifferentiable point; the zero subgradient keeps optimization stable).
pub fn basis_backward(
    bank: &FrequencyBank,
    z: &LatentPoints,
    eval: &BasisEval,
    upstream: &Mat,
    want_freq_grads: bool,
) -> Result<(Vec<f64>, Vec<f64>, Option<FreqGrads>)> {
    let n = z.len();
    let k = bank.k();
    if upstream.rows != n || upstream.cols != 4 * k || eval.phi.rows != n {
        return Err(VekuaError::ShapeMismatch(format!(
            "basis backward expects {}x{} upstream, got {}x{}",
            n,
            4 * k,
            upstream.rows,
            upstream.cols
        )));
    }

    let mut gz_re = vec![0.0f64; n];
    let mut gz_im = vec![0.0f64; n];
    mat::fill_zip2(&mut gz_re, 1, &mut gz_im, 1, true, |first, gre, gim| {
        for (r, (gr, gi)) in gre.iter_mut().zip(gim.iter_mut()).enumerate() {
            let i = first + r;
            let mag = eval.m[i];
            let row = eval.phi.row(i);
            let up = upstream.row(i);
            let (mut are, mut aim, mut gm) = (0.0f64, 0.0f64, 0.0f64);
            for j in 0..k {
                let (s, c) = (row[j], row[k + j]);
                let gs = up[j] + mag * up[2 * k + j];
                let gc = up[k + j] + mag * up[3 * k + j];
                let ga = gs * c - gc * s;
                are += ga * bank.omega_re[j];
                aim += ga * bank.omega_im[j];
                gm += up[2 * k + j] * s + up[3 * k + j] * c;
            }
            if mag > 0.0 {
                are += gm * z.z_re[i] / mag;
                aim += gm * z.z_im[i] / mag;
            }
            *gr = are;
            *gi = aim;
        }
    });

    let freq_grads = if want_freq_grads {
        let partials = mat::chunked_partials(n, true, |range| {
            let mut acc = vec![0.0f64; 2 * k];
            for i in range {
                let mag = eval.m[i];
                let row = eval.phi.row(i);
                let up = upstream.row(i);
                for j in 0..k {
                    let (s, c) = (row[j], row[k + j]);
                    let gs = up[j] + mag * up[2 * k + j];
                    let gc = up[k + j] + mag * up[3 * k + j];
                    let ga = gs * c - gc * s;
                    acc[j] += ga * z.z_re[i];
                    acc[k + j] += ga * z.z_im[i];
                }
            }
            acc
        });
        let mut acc = vec![0.0f64; 2 * k];
        for p in &partials {
            for (a, &s) in acc.iter_mut().zip(p) {
                *a += s;
            }
        }
        let omega_im = acc.split_off(k);
        Some(FreqGrads {
            omega_re: acc,
            omega_im,
        })
    } else {
        None
    };

    Ok((gz_re, gz_im, freq_grads))
}
