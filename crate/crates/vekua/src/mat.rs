//! Flat row-major matrices and the data-parallel kernels built on them.
//!
//! Every kernel comes in two flavors: the default entry point, which runs on
//! rayon when the `parallel` feature is enabled, and a `*_sequential` twin
//! that always runs on one thread. Both produce bit-identical results: work
//! is split into fixed-size point chunks, each chunk computes its partial
//! independently, and partials are reduced in chunk order. That keeps
//! floating-point summation order independent of thread scheduling, so a
//! fitted model is reproducible within one build regardless of thread count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Result, VekuaError};

/// Number of points (matrix rows) per work chunk. Large enough to amortize
/// scheduling, small enough that per-chunk partial Gram buffers stay cache
/// resident.
pub(crate) const CHUNK: usize = 1024;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(VekuaError::ShapeMismatch(format!(
                "buffer of {} values cannot form a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Split `0..n` into `CHUNK`-sized ranges, map each to a partial result, and
/// return the partials in chunk order. `par` selects the rayon path when the
/// feature is compiled in; otherwise it is ignored.
pub(crate) fn chunked_partials<P, F>(n: usize, par: bool, make: F) -> Vec<P>
where
    P: Send,
    F: Fn(Range<usize>) -> P + Sync + Send,
{
    let ranges: Vec<Range<usize>> = (0..n)
        .step_by(CHUNK.max(1))
        .map(|s| s..(s + CHUNK).min(n))
        .collect();
    #[cfg(feature = "parallel")]
    if par {
        return ranges.into_par_iter().map(make).collect();
    }
    let _ = par;
    ranges.into_iter().map(make).collect()
}

/// Fill the rows of `out` by chunks: `fill(first_row, rows_slice)` receives a
/// contiguous block of `out` starting at `first_row`.
pub(crate) fn fill_rows<F>(out: &mut Mat, par: bool, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let width = out.cols;
    let step = CHUNK * width;
    #[cfg(feature = "parallel")]
    if par {
        out.data
            .par_chunks_mut(step.max(1))
            .enumerate()
            .for_each(|(ci, block)| fill(ci * CHUNK, block));
        return;
    }
    let _ = par;
    out.data
        .chunks_mut(step.max(1))
        .enumerate()
        .for_each(|(ci, block)| fill(ci * CHUNK, block));
}

/// Fill two per-point output slices in lockstep chunks. `wa`/`wb` are the
/// per-point widths of `a` and `b`; `fill` gets the first point index of the
/// chunk and the matching sub-slices.
pub(crate) fn fill_zip2<F>(a: &mut [f64], wa: usize, b: &mut [f64], wb: usize, par: bool, fill: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let (ca, cb) = (CHUNK * wa, CHUNK * wb);
    #[cfg(feature = "parallel")]
    if par {
        a.par_chunks_mut(ca.max(1))
            .zip_eq(b.par_chunks_mut(cb.max(1)))
            .enumerate()
            .for_each(|(ci, (sa, sb))| fill(ci * CHUNK, sa, sb));
        return;
    }
    let _ = par;
    a.chunks_mut(ca.max(1))
        .zip(b.chunks_mut(cb.max(1)))
        .enumerate()
        .for_each(|(ci, (sa, sb))| fill(ci * CHUNK, sa, sb));
}

fn gram_impl(phi: &Mat, lambda: f64, par: bool) -> Mat {
    let m = phi.cols;
    let partials = chunked_partials(phi.rows, par, |range| {
        // Upper triangle of the chunk's contribution, stored in a full m x m
        // buffer so the inner loop is a contiguous fused multiply-add sweep.
        let mut acc = vec![0.0f64; m * m];
        for i in range {
            let row = phi.row(i);
            for (j, &xj) in row.iter().enumerate() {
                let dst = &mut acc[j * m + j..(j + 1) * m];
                for (d, &s) in dst.iter_mut().zip(&row[j..]) {
                    *d += xj * s;
                }
            }
        }
        acc
    });

    let mut a = Mat::zeros(m, m);
    for p in &partials {
        for (d, &s) in a.data.iter_mut().zip(p) {
            *d += s;
        }
    }
    // Mirror the upper triangle and add the ridge term on the diagonal.
    for j in 0..m {
        *a.at_mut(j, j) += lambda;
        for i in j + 1..m {
            *a.at_mut(i, j) = a.at(j, i);
        }
    }
    a
}

/// `Phi^T Phi + lambda I`, exploiting symmetry (only the upper triangle is
/// accumulated, then mirrored).
pub fn gram(phi: &Mat, lambda: f64) -> Mat {
    gram_impl(phi, lambda, true)
}

/// Single-threaded twin of [`gram`]; bit-identical output.
pub fn gram_sequential(phi: &Mat, lambda: f64) -> Mat {
    gram_impl(phi, lambda, false)
}

/// Fill one per-point output slice in chunks; `w` is the per-point width.
pub(crate) fn fill_chunks<F>(out: &mut [f64], w: usize, par: bool, fill: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let step = (CHUNK * w).max(1);
    #[cfg(feature = "parallel")]
    if par {
        out.par_chunks_mut(step)
            .enumerate()
            .for_each(|(ci, s)| fill(ci * CHUNK, s));
        return;
    }
    let _ = par;
    out.chunks_mut(step)
        .enumerate()
        .for_each(|(ci, s)| fill(ci * CHUNK, s));
}

fn matvec_impl(a: &Mat, x: &[f64], par: bool) -> Vec<f64> {
    assert_eq!(a.cols, x.len(), "matvec shape mismatch");
    let mut out = vec![0.0f64; a.rows];
    fill_chunks(&mut out, 1, par, |first, ys| {
        for (r, y) in ys.iter_mut().enumerate() {
            let row = a.row(first + r);
            *y = row.iter().zip(x).map(|(&p, &q)| p * q).sum();
        }
    });
    out
}

/// `A x` over rows.
pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    matvec_impl(a, x, true)
}

/// Single-threaded twin of [`matvec`].
pub fn matvec_sequential(a: &Mat, x: &[f64]) -> Vec<f64> {
    matvec_impl(a, x, false)
}

fn matvec_t_impl(a: &Mat, v: &[f64], par: bool) -> Vec<f64> {
    assert_eq!(a.rows, v.len(), "matvec_t shape mismatch");
    let m = a.cols;
    let partials = chunked_partials(a.rows, par, |range| {
        let mut acc = vec![0.0f64; m];
        for i in range {
            let vi = v[i];
            for (d, &p) in acc.iter_mut().zip(a.row(i)) {
                *d += vi * p;
            }
        }
        acc
    });
    let mut out = vec![0.0f64; m];
    for p in &partials {
        for (d, &s) in out.iter_mut().zip(p) {
            *d += s;
        }
    }
    out
}

/// `A^T v` accumulated over rows.
pub fn matvec_t(a: &Mat, v: &[f64]) -> Vec<f64> {
    matvec_t_impl(a, v, true)
}

/// Single-threaded twin of [`matvec_t`].
pub fn matvec_t_sequential(a: &Mat, v: &[f64]) -> Vec<f64> {
    matvec_t_impl(a, v, false)
}

fn matmul_bias_impl(x: &Mat, w: &Mat, b: Option<&[f64]>, par: bool) -> Mat {
    assert_eq!(x.cols, w.rows, "matmul shape mismatch");
    if let Some(bias) = b {
        assert_eq!(bias.len(), w.cols, "bias shape mismatch");
    }
    let mut out = Mat::zeros(x.rows, w.cols);
    let h = w.cols;
    fill_rows(&mut out, par, |first, block| {
        for (r, orow) in block.chunks_mut(h).enumerate() {
            match b {
                Some(bias) => orow.copy_from_slice(bias),
                None => orow.fill(0.0),
            }
            for (k, &xv) in x.row(first + r).iter().enumerate() {
                for (o, &wv) in orow.iter_mut().zip(w.row(k)) {
                    *o += xv * wv;
                }
            }
        }
    });
    out
}

/// `X W + b` with the bias broadcast over rows.
pub fn matmul_bias(x: &Mat, w: &Mat, b: &[f64]) -> Mat {
    matmul_bias_impl(x, w, Some(b), true)
}

/// `X W`.
pub fn matmul(x: &Mat, w: &Mat) -> Mat {
    matmul_bias_impl(x, w, None, true)
}

/// Mean of squared entries.
pub fn mean_sq(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|&x| x * x).sum::<f64>() / v.len() as f64
}
