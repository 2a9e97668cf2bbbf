//! Learnable coordinate warp: a shallow sine MLP mapping physical
//! coordinates into a latent complex plane.
//!
//! Forward map: `h = sin(X W + b)`, `uv = h W_out`. For inputs with d >= 2
//! the warp is a residual correction to the identity embedding of the first
//! two coordinates, `z = (x_1 + uv_1) + i (x_2 + uv_2)`; for d = 1 the latent
//! point is the raw network output `z = uv_1 + i uv_2` with no residual term.
//! Higher coordinates (d >= 3) influence z only through the network.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, VekuaError};
use crate::mat::{self, Mat};
use crate::rng::{self, Domain};

/// Hidden width of the warp MLP. Fixed so the parameter accounting stays
/// auditable.
pub const HIDDEN: usize = 32;

/// Weights of one block's warp network.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpParams {
    /// Input layer, `in_dim x 32`.
    pub w: Mat,
    /// Hidden bias, length 32.
    pub b: Vec<f64>,
    /// Output layer, `32 x 2`.
    pub w_out: Mat,
    pub in_dim: usize,
}

/// Latent complex points, split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPoints {
    pub z_re: Vec<f64>,
    pub z_im: Vec<f64>,
}

impl LatentPoints {
    pub fn len(&self) -> usize {
        self.z_re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_re.is_empty()
    }
}

/// Forward activations kept for the backward pass: `h = sin(pre)` and
/// `cos(pre)`, both `N x 32`.
#[derive(Debug, Clone)]
pub struct WarpCache {
    h: Mat,
    h_cos: Mat,
}

/// Parameter gradients produced by [`warp_backward`].
#[derive(Debug, Clone)]
pub struct WarpGrads {
    pub w: Mat,
    pub b: Vec<f64>,
    pub w_out: Mat,
}

/// Initialize warp weights: `W` and `W_out` entries are i.i.d. normal scaled
/// by 1e-5 for the first block (near-identity start) or 0.1 for later blocks;
/// `b` starts at zero. Draw order is `W` row-major then `W_out` row-major
/// from one seeded stream.
pub fn init_warp(seed: u64, in_dim: usize, is_first: bool) -> Result<WarpParams> {
    if in_dim == 0 {
        return Err(VekuaError::InvalidDimension(
            "warp input dimension must be at least 1".into(),
        ));
    }
    let scale = if is_first { 1e-5 } else { 0.1 };
    let mut stream = rng::stream(seed, Domain::WarpInit, 0);
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| scale * stream.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let w = Mat::from_vec(in_dim, HIDDEN, draw(in_dim * HIDDEN))?;
    let w_out = Mat::from_vec(HIDDEN, 2, draw(HIDDEN * 2))?;
    Ok(WarpParams {
        w,
        b: vec![0.0; HIDDEN],
        w_out,
        in_dim,
    })
}

fn check_input(p: &WarpParams, x: &Mat) -> Result<()> {
    if x.cols != p.in_dim {
        return Err(VekuaError::ShapeMismatch(format!(
            "warp expects {} input columns, got {}",
            p.in_dim, x.cols
        )));
    }
    Ok(())
}

/// Apply the warp and keep the activations needed by [`warp_backward`].
pub fn warp_forward_cached(p: &WarpParams, x: &Mat) -> Result<(LatentPoints, WarpCache)> {
    check_input(p, x)?;
    let n = x.rows;
    let pre = mat::matmul_bias(x, &p.w, &p.b);

    let mut h = Mat::zeros(n, HIDDEN);
    let mut h_cos = Mat::zeros(n, HIDDEN);
    mat::fill_zip2(
        h.as_mut_slice(),
        HIDDEN,
        h_cos.as_mut_slice(),
        HIDDEN,
        true,
        |first, hs, hcs| {
            let src = &pre.as_slice()[first * HIDDEN..first * HIDDEN + hs.len()];
            for ((s, c), &v) in hs.iter_mut().zip(hcs.iter_mut()).zip(src) {
                let (sv, cv) = v.sin_cos();
                *s = sv;
                *c = cv;
            }
        },
    );

    let uv = mat::matmul(&h, &p.w_out);
    let mut z_re = vec![0.0; n];
    let mut z_im = vec![0.0; n];
    let residual = p.in_dim >= 2;
    mat::fill_zip2(&mut z_re, 1, &mut z_im, 1, true, |first, zr, zi| {
        for (r, (zre, zim)) in zr.iter_mut().zip(zi.iter_mut()).enumerate() {
            let i = first + r;
            if residual {
                *zre = x.at(i, 0) + uv.at(i, 0);
                *zim = x.at(i, 1) + uv.at(i, 1);
            } else {
                *zre = uv.at(i, 0);
                *zim = uv.at(i, 1);
            }
        }
    });

    Ok((LatentPoints { z_re, z_im }, WarpCache { h, h_cos }))
}

/// Apply the warp without retaining activations.
pub fn warp_forward(p: &WarpParams, x: &Mat) -> Result<LatentPoints> {
    Ok(warp_forward_cached(p, x)?.0)
}

/// Exact reverse-mode gradients of [`warp_forward_cached`] with respect to
/// the parameters, given the upstream gradient of the loss w.r.t.
/// `(z_re, z_im)`. In both the residual and the 1-D branch,
/// `d loss / d uv = d loss / d z` elementwise.
pub fn warp_backward(
    p: &WarpParams,
    x: &Mat,
    cache: &WarpCache,
    gz_re: &[f64],
    gz_im: &[f64],
) -> Result<WarpGrads> {
    check_input(p, x)?;
    if gz_re.len() != x.rows || gz_im.len() != x.rows {
        return Err(VekuaError::ShapeMismatch(format!(
            "upstream gradient length {} does not match {} points",
            gz_re.len(),
            x.rows
        )));
    }
    let d = p.in_dim;

    struct Partial {
        w: Vec<f64>,
        b: Vec<f64>,
        w_out: Vec<f64>,
    }

    let partials = mat::chunked_partials(x.rows, true, |range| {
        let mut acc = Partial {
            w: vec![0.0; d * HIDDEN],
            b: vec![0.0; HIDDEN],
            w_out: vec![0.0; HIDDEN * 2],
        };
        let mut gpre = [0.0f64; HIDDEN];
        for n in range {
            let (gu, gv) = (gz_re[n], gz_im[n]);
            let hrow = cache.h.row(n);
            let hcrow = cache.h_cos.row(n);
            for j in 0..HIDDEN {
                let gh = gu * p.w_out.at(j, 0) + gv * p.w_out.at(j, 1);
                gpre[j] = gh * hcrow[j];
                acc.w_out[2 * j] += hrow[j] * gu;
                acc.w_out[2 * j + 1] += hrow[j] * gv;
                acc.b[j] += gpre[j];
            }
            let xrow = x.row(n);
            for (i, &xv) in xrow.iter().enumerate() {
                let dst = &mut acc.w[i * HIDDEN..(i + 1) * HIDDEN];
                for (dw, &gp) in dst.iter_mut().zip(gpre.iter()) {
                    *dw += xv * gp;
                }
            }
        }
        acc
    });

    let mut gw = vec![0.0; d * HIDDEN];
    let mut gb = vec![0.0; HIDDEN];
    let mut gwo = vec![0.0; HIDDEN * 2];
    for part in &partials {
        for (a, &s) in gw.iter_mut().zip(&part.w) {
            *a += s;
        }
        for (a, &s) in gb.iter_mut().zip(&part.b) {
            *a += s;
        }
        for (a, &s) in gwo.iter_mut().zip(&part.w_out) {
            *a += s;
        }
    }
    Ok(WarpGrads {
        w: Mat::from_vec(d, HIDDEN, gw)?,
        b: gb,
        w_out: Mat::from_vec(HIDDEN, 2, gwo)?,
    })
}
