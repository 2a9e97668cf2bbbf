//! Benchmark task generators, evaluation metrics, and the inverse-diffusion
//! recovery procedure.
//!
//! Five field-fitting problems, each produced deterministically from a seed:
//!
//! - **A** noisy multi-scale Helmholtz-style field on `[-1,1]^2`,
//! - **B** Shepp-Logan phantom sampled at a small pixel fraction,
//! - **C** 1-D inverse diffusion: recover `k(x)` from noisy `u(x)`,
//! - **D** noisy chirp with linearly increasing frequency on `[0,1]`,
//! - **E** Taylor-Green vortex x-velocity in 3-D space-time.
//!
//! Evaluation targets (`y_eval_clean`) are always noise-free.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, VekuaError};
use crate::mat::Mat;
use crate::rng::{self, Domain};

/// Benchmark identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskId {
    A,
    B,
    C,
    D,
    E,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [TaskId::A, TaskId::B, TaskId::C, TaskId::D, TaskId::E];

    fn ordinal(self) -> u64 {
        match self {
            TaskId::A => 0,
            TaskId::B => 1,
            TaskId::C => 2,
            TaskId::D => 3,
            TaskId::E => 4,
        }
    }
}

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskId::A => "A",
            TaskId::B => "B",
            TaskId::C => "C",
            TaskId::D => "D",
            TaskId::E => "E",
        })
    }
}

impl std::str::FromStr for TaskId {
    type Err = VekuaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(TaskId::A),
            "B" => Ok(TaskId::B),
            "C" => Ok(TaskId::C),
            "D" => Ok(TaskId::D),
            "E" => Ok(TaskId::E),
            other => Err(VekuaError::InvalidParameter(format!(
                "unknown task '{other}' (expected A, B, C, D, E, or all)"
            ))),
        }
    }
}

/// Task-specific side information.
#[derive(Debug, Clone, Default)]
pub struct TaskMeta {
    /// Standard deviation of the Gaussian noise added to train targets.
    pub noise_sigma: Option<f64>,
    /// Fraction of lattice points kept as training samples (task B).
    pub sample_frac: Option<f64>,
    /// Kinematic viscosity (task E).
    pub viscosity: Option<f64>,
    /// Boundary value `k(0)` of the diffusion coefficient (task C).
    pub k0: Option<f64>,
    /// Source term `f` on the eval grid (task C).
    pub f_eval: Option<Vec<f64>>,
    /// Ground-truth diffusion coefficient on the eval grid (task C).
    pub k_true: Option<Vec<f64>>,
    /// Raw per-dimension domain bounds before normalization (task E); the
    /// stored coordinates are affinely mapped from these onto `[-1,1]`.
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
}

/// A generated benchmark dataset.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub task_id: TaskId,
    /// Training coordinates, `N x d`.
    pub x_train: Mat,
    /// Training targets (noisy where the task says so).
    pub y_train: Vec<f64>,
    /// Dense evaluation coordinates.
    pub x_eval: Mat,
    /// Noise-free ground truth on the eval grid.
    pub y_eval_clean: Vec<f64>,
    pub meta: TaskMeta,
}

fn linspace(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Population standard deviation.
fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

fn add_noise(seed: u64, task: TaskId, sigma: f64, clean: &[f64]) -> Vec<f64> {
    let mut stream = rng::stream(seed, Domain::TaskNoise, task.ordinal());
    clean
        .iter()
        .map(|&c| c + sigma * stream.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Clean field of task A: two harmonics a factor 4 apart in frequency, so a
/// rising frequency schedule is exercised.
pub fn helmholtz_field(x: f64, y: f64) -> f64 {
    (20.0 * x).sin() * (20.0 * y).cos() + 0.5 * (5.0 * x).sin() * (5.0 * y).sin()
}

/// Task A: noisy two-scale field on the full `n_grid^2` lattice over
/// `[-1,1]^2`, with Gaussian noise of sigma `0.1 * std(u)`.
pub fn gen_helmholtz(seed: u64, n_grid: usize) -> Result<TaskData> {
    if n_grid < 32 {
        return Err(VekuaError::InvalidSize(format!(
            "helmholtz grid must be at least 32, got {n_grid}"
        )));
    }
    let axis = linspace(n_grid, -1.0, 1.0);
    let mut x = Mat::zeros(n_grid * n_grid, 2);
    let mut clean = Vec::with_capacity(n_grid * n_grid);
    for (i, &xi) in axis.iter().enumerate() {
        for (j, &yj) in axis.iter().enumerate() {
            let row = x.row_mut(i * n_grid + j);
            row[0] = xi;
            row[1] = yj;
            clean.push(helmholtz_field(xi, yj));
        }
    }
    let sigma = 0.1 * std_dev(&clean);
    let y_train = add_noise(seed, TaskId::A, sigma, &clean);
    Ok(TaskData {
        task_id: TaskId::A,
        x_train: x.clone(),
        y_train,
        x_eval: x,
        y_eval_clean: clean,
        meta: TaskMeta {
            noise_sigma: Some(sigma),
            ..TaskMeta::default()
        },
    })
}

/// One phantom ellipse: semi-axes, center, rotation, additive intensity.
struct Ellipse {
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi_deg: f64,
    value: f64,
}

/// Standard 10-ellipse head-phantom parameter table (Shepp & Logan 1974; as
/// tabulated in Kak & Slaney, "Principles of Computerized Tomographic
/// Imaging", IEEE Press 1988).
const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse {
        a: 0.69,
        b: 0.92,
        x0: 0.0,
        y0: 0.0,
        phi_deg: 0.0,
        value: 2.0,
    },
    Ellipse {
        a: 0.6624,
        b: 0.8740,
        x0: 0.0,
        y0: -0.0184,
        phi_deg: 0.0,
        value: -0.98,
    },
    Ellipse {
        a: 0.1100,
        b: 0.3100,
        x0: 0.22,
        y0: 0.0,
        phi_deg: -18.0,
        value: -0.02,
    },
    Ellipse {
        a: 0.1600,
        b: 0.4100,
        x0: -0.22,
        y0: 0.0,
        phi_deg: 18.0,
        value: -0.02,
    },
    Ellipse {
        a: 0.2100,
        b: 0.2500,
        x0: 0.0,
        y0: 0.35,
        phi_deg: 0.0,
        value: 0.01,
    },
    Ellipse {
        a: 0.0460,
        b: 0.0460,
        x0: 0.0,
        y0: 0.1,
        phi_deg: 0.0,
        value: 0.01,
    },
    Ellipse {
        a: 0.0460,
        b: 0.0460,
        x0: 0.0,
        y0: -0.1,
        phi_deg: 0.0,
        value: 0.01,
    },
    Ellipse {
        a: 0.0460,
        b: 0.0230,
        x0: -0.08,
        y0: -0.605,
        phi_deg: 0.0,
        value: 0.01,
    },
    Ellipse {
        a: 0.0230,
        b: 0.0230,
        x0: 0.0,
        y0: -0.606,
        phi_deg: 0.0,
        value: 0.01,
    },
    Ellipse {
        a: 0.0230,
        b: 0.0460,
        x0: 0.06,
        y0: -0.605,
        phi_deg: 0.0,
        value: 0.01,
    },
];

/// Analytic phantom intensity at a point: the sum of the intensities of all
/// ellipses containing it.
pub fn phantom_field(x: f64, y: f64) -> f64 {
    let mut v = 0.0;
    for e in &SHEPP_LOGAN {
        let (s, c) = e.phi_deg.to_radians().sin_cos();
        let (dx, dy) = (x - e.x0, y - e.y0);
        let xr = c * dx + s * dy;
        let yr = -s * dx + c * dy;
        if (xr / e.a).powi(2) + (yr / e.b).powi(2) <= 1.0 {
            v += e.value;
        }
    }
    v
}

/// Task B: noise-free phantom on `[-1,1]^2`, observed at a uniform
/// without-replacement sample of `ceil(sample_frac * n_grid^2)` lattice
/// points; evaluation is on the full lattice.
pub fn gen_phantom(seed: u64, n_grid: usize, sample_frac: f64) -> Result<TaskData> {
    if n_grid < 32 {
        return Err(VekuaError::InvalidSize(format!(
            "phantom grid must be at least 32, got {n_grid}"
        )));
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(VekuaError::InvalidParameter(format!(
            "sample_frac must lie in (0, 1], got {sample_frac}"
        )));
    }
    let axis = linspace(n_grid, -1.0, 1.0);
    let total = n_grid * n_grid;
    let mut x_eval = Mat::zeros(total, 2);
    let mut clean = Vec::with_capacity(total);
    for (i, &xi) in axis.iter().enumerate() {
        for (j, &yj) in axis.iter().enumerate() {
            let row = x_eval.row_mut(i * n_grid + j);
            row[0] = xi;
            row[1] = yj;
            clean.push(phantom_field(xi, yj));
        }
    }

    let count = (sample_frac * total as f64).ceil() as usize;
    let mut idx: Vec<usize> = (0..total).collect();
    let mut stream = rng::stream(seed, Domain::TaskSample, TaskId::B.ordinal());
    for i in 0..count {
        let j = stream.random_range(i..total);
        idx.swap(i, j);
    }
    let mut chosen = idx[..count].to_vec();
    chosen.sort_unstable();

    let mut x_train = Mat::zeros(count, 2);
    let mut y_train = Vec::with_capacity(count);
    for (r, &i) in chosen.iter().enumerate() {
        x_train.row_mut(r).copy_from_slice(x_eval.row(i));
        y_train.push(clean[i]);
    }
    Ok(TaskData {
        task_id: TaskId::B,
        x_train,
        y_train,
        x_eval,
        y_eval_clean: clean,
        meta: TaskMeta {
            sample_frac: Some(sample_frac),
            ..TaskMeta::default()
        },
    })
}

/// Clean field of task D: a chirp whose instantaneous frequency grows
/// linearly in `x`.
pub fn chirp_field(x: f64) -> f64 {
    (30.0 * x * x).sin()
}

/// Task D: noisy chirp on a uniform lattice over `[0,1]`, Gaussian noise of
/// sigma `0.1 * std(u)`.
pub fn gen_chirp(seed: u64, n_pts: usize) -> Result<TaskData> {
    if n_pts < 64 {
        return Err(VekuaError::InvalidSize(format!(
            "chirp sample count must be at least 64, got {n_pts}"
        )));
    }
    let xs = linspace(n_pts, 0.0, 1.0);
    let clean: Vec<f64> = xs.iter().map(|&x| chirp_field(x)).collect();
    let sigma = 0.1 * std_dev(&clean);
    let y_train = add_noise(seed, TaskId::D, sigma, &clean);
    let x = Mat::from_vec(n_pts, 1, xs)?;
    Ok(TaskData {
        task_id: TaskId::D,
        x_train: x.clone(),
        y_train,
        x_eval: x,
        y_eval_clean: clean,
        meta: TaskMeta {
            noise_sigma: Some(sigma),
            ..TaskMeta::default()
        },
    })
}

/// Taylor-Green vortex x-velocity in raw coordinates.
pub fn tgv_field(x: f64, y: f64, t: f64, viscosity: f64) -> f64 {
    x.cos() * y.sin() * (-2.0 * viscosity * t).exp()
}

/// Task E: noise-free Taylor-Green x-velocity on a `n_grid_xy^2 x n_t`
/// space-time lattice over `[0,2pi]^2 x [0,1]`, with coordinates affinely
/// normalized to `[-1,1]^3` (raw bounds recorded in meta).
pub fn gen_tgv(seed: u64, n_grid_xy: usize, n_t: usize, viscosity: f64) -> Result<TaskData> {
    let _ = seed; // the field is deterministic and noise-free
    if n_grid_xy < 16 || n_t < 4 {
        return Err(VekuaError::InvalidSize(format!(
            "vortex lattice needs n_grid_xy >= 16 and n_t >= 4, got {n_grid_xy} and {n_t}"
        )));
    }
    if !(viscosity > 0.0) {
        return Err(VekuaError::InvalidParameter(format!(
            "viscosity must be positive, got {viscosity}"
        )));
    }
    let tau = std::f64::consts::TAU;
    let (lo, hi) = ([0.0, 0.0, 0.0], [tau, tau, 1.0]);
    let xs = linspace(n_grid_xy, lo[0], hi[0]);
    let ts = linspace(n_t, lo[2], hi[2]);
    let total = n_grid_xy * n_grid_xy * n_t;
    let mut x = Mat::zeros(total, 3);
    let mut clean = Vec::with_capacity(total);
    let norm = |v: f64, lo: f64, hi: f64| 2.0 * (v - lo) / (hi - lo) - 1.0;
    let mut r = 0;
    for &xi in &xs {
        for &yj in &xs {
            for &tk in &ts {
                let row = x.row_mut(r);
                row[0] = norm(xi, lo[0], hi[0]);
                row[1] = norm(yj, lo[1], hi[1]);
                row[2] = norm(tk, lo[2], hi[2]);
                clean.push(tgv_field(xi, yj, tk, viscosity));
                r += 1;
            }
        }
    }
    Ok(TaskData {
        task_id: TaskId::E,
        x_train: x.clone(),
        y_train: clean.clone(),
        x_eval: x,
        y_eval_clean: clean,
        meta: TaskMeta {
            viscosity: Some(viscosity),
            domain_lo: lo.to_vec(),
            domain_hi: hi.to_vec(),
            ..TaskMeta::default()
        },
    })
}

/// Ground truth of task C at a point: `(k, u, u', f)` where
/// `k(x) = 1 + 0.5 sin(pi x)`, `u(x) = x + 0.1 sin(2 pi x)`, and
/// `f = -(k u')' = -(k' u' + k u'')`.
pub fn diffusion_truth(x: f64) -> (f64, f64, f64, f64) {
    let pi = std::f64::consts::PI;
    let k = 1.0 + 0.5 * (pi * x).sin();
    let kp = 0.5 * pi * (pi * x).cos();
    let u = x + 0.1 * (2.0 * pi * x).sin();
    let up = 1.0 + 0.2 * pi * (2.0 * pi * x).cos();
    let upp = -0.4 * pi * pi * (2.0 * pi * x).sin();
    let f = -(kp * up + k * upp);
    (k, u, up, f)
}

/// Number of points in the dense evaluation grid of task C. Chosen fine
/// enough that the trapezoidal flux integral contributes error well below
/// the recovery tolerance.
pub const DIFFUSION_EVAL_POINTS: usize = 4097;

/// Task C: noisy observations of `u` on a uniform `[0,1]` lattice
/// (sigma `0.01 * std(u)`); meta carries `k(0)`, the source term, and the
/// true coefficient on the eval grid.
pub fn gen_inverse_diffusion(seed: u64, n_pts: usize) -> Result<TaskData> {
    if n_pts < 64 {
        return Err(VekuaError::InvalidSize(format!(
            "diffusion sample count must be at least 64, got {n_pts}"
        )));
    }
    let xs = linspace(n_pts, 0.0, 1.0);
    let clean: Vec<f64> = xs.iter().map(|&x| diffusion_truth(x).1).collect();
    let sigma = 0.01 * std_dev(&clean);
    let y_train = add_noise(seed, TaskId::C, sigma, &clean);
    let x_train = Mat::from_vec(n_pts, 1, xs)?;

    let ex = linspace(DIFFUSION_EVAL_POINTS, 0.0, 1.0);
    let mut y_eval_clean = Vec::with_capacity(ex.len());
    let mut f_eval = Vec::with_capacity(ex.len());
    let mut k_true = Vec::with_capacity(ex.len());
    for &x in &ex {
        let (k, u, _, f) = diffusion_truth(x);
        y_eval_clean.push(u);
        f_eval.push(f);
        k_true.push(k);
    }
    let x_eval = Mat::from_vec(ex.len(), 1, ex)?;
    Ok(TaskData {
        task_id: TaskId::C,
        x_train,
        y_train,
        x_eval,
        y_eval_clean,
        meta: TaskMeta {
            noise_sigma: Some(sigma),
            k0: Some(1.0),
            f_eval: Some(f_eval),
            k_true: Some(k_true),
            ..TaskMeta::default()
        },
    })
}

/// Result of the inverse-diffusion recovery.
#[derive(Debug, Clone)]
pub struct DiffusionRecovery {
    /// Recovered coefficient on the task's eval grid.
    pub k_hat: Vec<f64>,
    /// RMS of the conservation-law residual `k' u' + k u'' + f` over interior
    /// eval points, evaluated with finite differences; a diagnostic that
    /// exercises the second derivative of the fitted field.
    pub pde_residual_rms: f64,
}

/// Recover the diffusion coefficient from a fitted field.
///
/// `predict` evaluates the fitted (smooth) field at arbitrary points; its
/// first derivative is taken by central differences with step `h`. The flux
/// `F(x) = k(0) u'(0) - integral_0^x f` follows from `(k u')' = -f`, and
/// `k_hat = F / u'`. Fails with a near-singular-derivative error naming the
/// first eval point where `|u'| < 1e-3`.
pub fn recover_diffusion(
    predict: impl Fn(&Mat) -> Result<Vec<f64>>,
    task: &TaskData,
    h: f64,
) -> Result<DiffusionRecovery> {
    let n = task.x_eval.rows;
    if task.x_eval.cols != 1 || n < 3 {
        return Err(VekuaError::InvalidInput(
            "recovery needs a 1-D eval grid with at least 3 points".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(VekuaError::InvalidParameter(format!(
            "step h must be positive, got {h}"
        )));
    }
    let (Some(k0), Some(f)) = (task.meta.k0, task.meta.f_eval.as_ref()) else {
        return Err(VekuaError::InvalidInput(
            "task metadata lacks k(0) and the source term".into(),
        ));
    };
    if f.len() != n {
        return Err(VekuaError::ShapeMismatch(
            "source-term sample count does not match the eval grid".into(),
        ));
    }

    let xs = |shift: f64| -> Result<Vec<f64>> {
        let mut m = Mat::zeros(n, 1);
        for i in 0..n {
            m.row_mut(i)[0] = task.x_eval.at(i, 0) + shift;
        }
        predict(&m)
    };
    let minus = xs(-h)?;
    let center = xs(0.0)?;
    let plus = xs(h)?;
    if minus.len() != n || center.len() != n || plus.len() != n {
        return Err(VekuaError::ShapeMismatch(
            "predictor returned a wrong-length field".into(),
        ));
    }

    let mut du = Vec::with_capacity(n);
    let mut ddu = Vec::with_capacity(n);
    for i in 0..n {
        du.push((plus[i] - minus[i]) / (2.0 * h));
        ddu.push((plus[i] - 2.0 * center[i] + minus[i]) / (h * h));
    }
    for (i, &d) in du.iter().enumerate() {
        if d.abs() < 1e-3 {
            return Err(VekuaError::NearSingularDerivative {
                x: task.x_eval.at(i, 0),
                value: d,
            });
        }
    }

    // Flux by trapezoidal integration of the source term.
    let mut flux = Vec::with_capacity(n);
    flux.push(k0 * du[0]);
    for i in 1..n {
        let dx = task.x_eval.at(i, 0) - task.x_eval.at(i - 1, 0);
        flux.push(flux[i - 1] - 0.5 * (f[i] + f[i - 1]) * dx);
    }
    let k_hat: Vec<f64> = flux.iter().zip(&du).map(|(&fl, &d)| fl / d).collect();

    // Conservation-law residual on interior points; k_hat' by grid stencil.
    let mut sum_sq = 0.0;
    for i in 1..n - 1 {
        let dx = task.x_eval.at(i + 1, 0) - task.x_eval.at(i - 1, 0);
        let kp = (k_hat[i + 1] - k_hat[i - 1]) / dx;
        let res = kp * du[i] + k_hat[i] * ddu[i] + f[i];
        sum_sq += res * res;
    }
    let pde_residual_rms = (sum_sq / (n - 2) as f64).sqrt();

    Ok(DiffusionRecovery {
        k_hat,
        pde_residual_rms,
    })
}

/// Mean squared error.
pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(VekuaError::InvalidInput("mse of empty vectors".into()));
    }
    if pred.len() != truth.len() {
        return Err(VekuaError::ShapeMismatch(format!(
            "mse length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}
