//! Residual cascade of warp + basis + ridge blocks.
//!
//! Blocks are trained greedily: block `l` fits the residual left by blocks
//! `1..l`, with its frequency bank drawn at the `l`-th entry of a rising
//! frequency schedule. Within a block, Adam adjusts the warp parameters (and
//! optionally the bank frequencies) while the output coefficients are
//! re-solved in closed form every step; after the last step one final ridge
//! solve freezes the coefficients, so prediction is exactly consistent with
//! the final training state.

use rand::Rng;

use crate::basis::{self, FrequencyBank};
use crate::error::{Result, VekuaError};
use crate::mat::{self, Mat};
use crate::rng::{self, Domain};
use crate::solver;
use crate::warp::{self, WarpParams, HIDDEN};

/// One trained cascade block.
#[derive(Debug, Clone)]
pub struct Block {
    pub warp: WarpParams,
    pub bank: FrequencyBank,
    /// Solved output coefficients, length `4K`.
    pub w: Vec<f64>,
    /// Regularization the block was solved with (after any jitter retries).
    pub lambda: f64,
}

/// An ordered sum of blocks. An empty model predicts zero everywhere.
#[derive(Debug, Clone)]
pub struct CascadeModel {
    pub blocks: Vec<Block>,
    pub in_dim: usize,
}

impl CascadeModel {
    pub fn new(in_dim: usize) -> Self {
        CascadeModel {
            blocks: Vec::new(),
            in_dim,
        }
    }
}

/// Training hyperparameters.
///
/// The number of blocks equals `freq_schedule.len()`. `batch_size = None`
/// trains full-batch (the default; the closed-form solve wants a
/// representative design matrix). When set, each Adam step samples that many
/// points with replacement from a dedicated deterministic stream; the final
/// freezing solve always uses the full batch.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub freq_schedule: Vec<f64>,
    pub iters_per_block: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Frequencies per block (feature width is 4x this).
    pub num_freqs: usize,
    /// Also train the bank frequencies (off: fixed random bank).
    pub train_freqs: bool,
    /// Freeze the warp at initialization (ablation: basis on raw coordinates).
    pub ablate_warp: bool,
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            freq_schedule: vec![5.0, 15.0, 30.0],
            iters_per_block: 2000,
            learning_rate: 1e-2,
            lambda: 1e-5,
            num_freqs: 24,
            train_freqs: false,
            ablate_warp: false,
            batch_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.freq_schedule.is_empty() || self.freq_schedule.iter().any(|&f| !(f > 0.0)) {
            return Err(VekuaError::InvalidParameter(
                "freq_schedule must be a non-empty list of positive scales".into(),
            ));
        }
        if self.iters_per_block == 0 {
            return Err(VekuaError::InvalidParameter(
                "iters_per_block must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.lambda > 0.0) {
            return Err(VekuaError::InvalidParameter(
                "learning_rate and lambda must be positive".into(),
            ));
        }
        if self.num_freqs == 0 {
            return Err(VekuaError::InvalidParameter(
                "num_freqs must be positive".into(),
            ));
        }
        if self.batch_size == Some(0) {
            return Err(VekuaError::InvalidParameter(
                "batch_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-block loss traces and the training-set MSE of the growing model.
#[derive(Debug, Clone)]
pub struct FitTrace {
    /// For each block: the fit loss at every Adam step, then one final entry
    /// from the freezing solve (`iters_per_block + 1` entries; a single entry
    /// if nothing was trainable).
    pub block_traces: Vec<Vec<f64>>,
    /// `mean((y - predict)^2)` on the training set after each block.
    pub train_mse_after_block: Vec<f64>,
}

/// Adam optimizer accumulators over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected).
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let c1 = 1.0 - B1.powi(state.t as i32);
    let c2 = 1.0 - B2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = B1 * state.m[i] + (1.0 - B1) * g;
        state.v[i] = B2 * state.v[i] + (1.0 - B2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (vhat.sqrt() + EPS);
    }
}

/// Which parameter groups the optimizer touches.
#[derive(Clone, Copy)]
struct Trainable {
    warp: bool,
    freqs: bool,
}

impl Trainable {
    fn any(self) -> bool {
        self.warp || self.freqs
    }

    fn len(self, in_dim: usize, k: usize) -> usize {
        let mut n = 0;
        if self.warp {
            n += in_dim * HIDDEN + HIDDEN + HIDDEN * 2;
        }
        if self.freqs {
            n += 2 * k;
        }
        n
    }
}

fn pack_params(warp: &WarpParams, bank: &FrequencyBank, which: Trainable, out: &mut Vec<f64>) {
    out.clear();
    if which.warp {
        out.extend_from_slice(warp.w.as_slice());
        out.extend_from_slice(&warp.b);
        out.extend_from_slice(warp.w_out.as_slice());
    }
    if which.freqs {
        out.extend_from_slice(&bank.omega_re);
        out.extend_from_slice(&bank.omega_im);
    }
}

fn unpack_params(buf: &[f64], warp: &mut WarpParams, bank: &mut FrequencyBank, which: Trainable) {
    let mut at = 0;
    let mut take = |dst: &mut [f64]| {
        dst.copy_from_slice(&buf[at..at + dst.len()]);
        at += dst.len();
    };
    if which.warp {
        take(warp.w.as_mut_slice());
        take(&mut warp.b);
        take(warp.w_out.as_mut_slice());
    }
    if which.freqs {
        take(&mut bank.omega_re);
        take(&mut bank.omega_im);
    }
}

fn pack_grads(
    wg: Option<&warp::WarpGrads>,
    fg: Option<&basis::FreqGrads>,
    which: Trainable,
    out: &mut Vec<f64>,
) {
    out.clear();
    if which.warp {
        let g = wg.expect("warp gradients requested");
        out.extend_from_slice(g.w.as_slice());
        out.extend_from_slice(&g.b);
        out.extend_from_slice(g.w_out.as_slice());
    }
    if which.freqs {
        let g = fg.expect("frequency gradients requested");
        out.extend_from_slice(&g.omega_re);
        out.extend_from_slice(&g.omega_im);
    }
}

fn check_data(x: &Mat, y: &[f64]) -> Result<()> {
    if x.rows == 0 || x.cols == 0 {
        return Err(VekuaError::InvalidSize(
            "training data must be non-empty".into(),
        ));
    }
    if y.len() != x.rows {
        return Err(VekuaError::ShapeMismatch(format!(
            "target length {} does not match {} sample rows",
            y.len(),
            x.rows
        )));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(VekuaError::InvalidInput("non-finite training data".into()));
    }
    Ok(())
}

fn gather_rows(x: &Mat, y: &[f64], idx: &[usize]) -> (Mat, Vec<f64>) {
    let mut xs = Mat::zeros(idx.len(), x.cols);
    let mut ys = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        xs.row_mut(r).copy_from_slice(x.row(i));
        ys.push(y[i]);
    }
    (xs, ys)
}

/// Train one block against residual targets `r`. `l` is the 1-based block
/// index: the first block starts from a near-identity warp, later blocks from
/// a larger-scale random warp, and the bank is drawn at `freq_schedule[l-1]`.
///
/// Returns the frozen block and its loss trace (one entry per Adam step plus
/// a final entry from the freezing solve).
pub fn train_block(x: &Mat, r: &[f64], cfg: &TrainConfig, l: usize) -> Result<(Block, Vec<f64>)> {
    cfg.validate()?;
    check_data(x, r)?;
    if l == 0 || l > cfg.freq_schedule.len() {
        return Err(VekuaError::InvalidParameter(format!(
            "block index {l} outside schedule of length {}",
            cfg.freq_schedule.len()
        )));
    }

    let bseed = rng::block_seed(cfg.seed, l);
    let mut wp = warp::init_warp(bseed, x.cols, l == 1)?;
    let mut bank = basis::init_frequencies(bseed, cfg.num_freqs, cfg.freq_schedule[l - 1])?;

    let which = Trainable {
        warp: !cfg.ablate_warp,
        freqs: cfg.train_freqs,
    };
    let mut trace = Vec::with_capacity(cfg.iters_per_block + 1);

    if which.any() {
        let mut batch_rng = rng::stream(bseed, Domain::Batch, 0);
        let mut params = Vec::with_capacity(which.len(x.cols, cfg.num_freqs));
        let mut grads = Vec::with_capacity(params.capacity());
        pack_params(&wp, &bank, which, &mut params);
        let mut adam = AdamState::new(params.len());

        for _ in 0..cfg.iters_per_block {
            let (bx, by);
            let (xs, ys): (&Mat, &[f64]) = match cfg.batch_size {
                Some(b) if b < x.rows => {
                    let idx: Vec<usize> =
                        (0..b).map(|_| batch_rng.random_range(0..x.rows)).collect();
                    (bx, by) = gather_rows(x, r, &idx);
                    (&bx, &by)
                }
                _ => (x, r),
            };

            let (z, wcache) = warp::warp_forward_cached(&wp, xs)?;
            let eval = basis::basis_eval(&bank, &z)?;
            let (loss, grad_phi, _sol) = solver::fit_loss_grad(&eval.phi, ys, cfg.lambda)?;
            trace.push(loss);

            let (gz_re, gz_im, fg) =
                basis::basis_backward(&bank, &z, &eval, &grad_phi, which.freqs)?;
            let wg = if which.warp {
                Some(warp::warp_backward(&wp, xs, &wcache, &gz_re, &gz_im)?)
            } else {
                None
            };
            pack_grads(wg.as_ref(), fg.as_ref(), which, &mut grads);
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate);
            unpack_params(&params, &mut wp, &mut bank, which);
        }
    }

    // Freeze: one final closed-form solve on the full batch.
    let z = warp::warp_forward(&wp, x)?;
    let phi = basis::basis_features(&bank, &z)?;
    let sol = solver::ridge_solve(&phi, r, cfg.lambda)?;
    trace.push(mat::mean_sq(&sol.residual));

    Ok((
        Block {
            warp: wp,
            bank,
            w: sol.w,
            lambda: sol.lambda,
        },
        trace,
    ))
}

/// Evaluate a single block at the given points.
pub fn block_forward(b: &Block, x: &Mat) -> Result<Vec<f64>> {
    let z = warp::warp_forward(&b.warp, x)?;
    let phi = basis::basis_features(&b.bank, &z)?;
    if b.w.len() != phi.cols {
        return Err(VekuaError::ShapeMismatch(format!(
            "block has {} coefficients for {} features",
            b.w.len(),
            phi.cols
        )));
    }
    Ok(mat::matvec(&phi, &b.w))
}

/// Evaluate the full cascade: the sum of its blocks.
pub fn predict(model: &CascadeModel, x: &Mat) -> Result<Vec<f64>> {
    if x.cols != model.in_dim {
        return Err(VekuaError::ShapeMismatch(format!(
            "model expects {} input columns, got {}",
            model.in_dim, x.cols
        )));
    }
    let mut out = vec![0.0f64; x.rows];
    for b in &model.blocks {
        let contrib = block_forward(b, x)?;
        for (o, c) in out.iter_mut().zip(contrib) {
            *o += c;
        }
    }
    Ok(out)
}

/// Greedy residual training of the full cascade, with loss traces.
pub fn fit_traced(x: &Mat, y: &[f64], cfg: &TrainConfig) -> Result<(CascadeModel, FitTrace)> {
    cfg.validate()?;
    check_data(x, y)?;
    let mut model = CascadeModel::new(x.cols);
    let mut trace = FitTrace {
        block_traces: Vec::new(),
        train_mse_after_block: Vec::new(),
    };
    let mut residual = y.to_vec();
    for l in 1..=cfg.freq_schedule.len() {
        let (block, block_trace) =
            train_block(x, &residual, cfg, l).map_err(|e| VekuaError::BlockFailed {
                block: l,
                source: Box::new(e),
            })?;
        model.blocks.push(block);
        let pred = predict(&model, x)?;
        residual = y.iter().zip(&pred).map(|(&t, &p)| t - p).collect();
        trace.block_traces.push(block_trace);
        trace.train_mse_after_block.push(mat::mean_sq(&residual));
    }
    Ok((model, trace))
}

/// Greedy residual training of the full cascade.
pub fn fit(x: &Mat, y: &[f64], cfg: &TrainConfig) -> Result<CascadeModel> {
    Ok(fit_traced(x, y, cfg)?.0)
}

/// Total number of real parameters held by the model: per block, the warp
/// weights (`in_dim*32 + 32 + 32*2`), the `2K` bank frequencies, and the `4K`
/// solved coefficients.
pub fn count_params(model: &CascadeModel) -> usize {
    model
        .blocks
        .iter()
        .map(|b| {
            b.warp.w.rows * b.warp.w.cols
                + b.warp.b.len()
                + b.warp.w_out.rows * b.warp.w_out.cols
                + b.bank.omega_re.len()
                + b.bank.omega_im.len()
                + b.w.len()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            freq_schedule: vec![3.0, 6.0],
            iters_per_block: 4,
            num_freqs: 3,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    fn smooth_target(x: &Mat) -> Vec<f64> {
        (0..x.rows)
            .map(|i| {
                let r = x.row(i);
                (2.0 * r[0]).sin()
                    + if x.cols > 1 {
                        (3.0 * r[1]).cos() * 0.5
                    } else {
                        0.0
                    }
            })
            .collect()
    }

    #[test]
    fn adam_zero_grad_keeps_params() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut st, 1e-2);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        // Bias correction makes the first step lr * g / (|g| + eps) for any g.
        for &g in &[7.0, -0.3, 1e-4] {
            let mut p = vec![1.0];
            let mut st = AdamState::new(1);
            adam_step(&mut p, &[g], &mut st, 1e-2);
            let step = 1.0 - p[0];
            assert!(
                (step - 1e-2 * g.signum()).abs() <= 1e-5,
                "step {step} for g={g}"
            );
        }
    }

    #[test]
    fn adam_descends_scalar_quadratic() {
        // f(p) = p^2, grad 2p, from p=1: 100 steps at lr 1e-2 must make progress.
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        for _ in 0..100 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut st, 1e-2);
        }
        assert!(p[0].abs() < 0.9, "p = {}", p[0]);
    }

    #[test]
    fn block_forward_zero_coefficients_zero_output() {
        let wp = warp::init_warp(1, 2, true).unwrap();
        let bank = basis::init_frequencies(1, 4, 3.0).unwrap();
        let b = Block {
            warp: wp,
            bank,
            w: vec![0.0; 16],
            lambda: 1e-5,
        };
        let x = testutil::random_mat(6, 2, 2, 1.0);
        assert!(block_forward(&b, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_forward_single_sin_column() {
        // Zero warp (identity residual path), omega = 1 + 0i, coefficients
        // selecting the sin column: output at x = (pi/2, 0) is sin(pi/2) = 1.
        let mut wp = warp::init_warp(0, 2, true).unwrap();
        wp.w.as_mut_slice().fill(0.0);
        wp.w_out.as_mut_slice().fill(0.0);
        let bank = FrequencyBank {
            omega_re: vec![1.0],
            omega_im: vec![0.0],
        };
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        let b = Block {
            warp: wp,
            bank,
            w,
            lambda: 1e-5,
        };
        let x = Mat::from_vec(1, 2, vec![std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        let out = block_forward(&b, &x).unwrap();
        assert!((out[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn block_forward_matches_manual_composition() {
        let wp = warp::init_warp(9, 2, false).unwrap();
        let bank = basis::init_frequencies(9, 5, 4.0).unwrap();
        let w: Vec<f64> = (0..20).map(|i| ((i as f64) * 0.31).sin()).collect();
        let b = Block {
            warp: wp.clone(),
            bank: bank.clone(),
            w: w.clone(),
            lambda: 1e-5,
        };
        let x = testutil::random_mat(5, 2, 3, 1.2);
        let direct = block_forward(&b, &x).unwrap();
        let z = warp::warp_forward(&wp, &x).unwrap();
        let phi = basis::basis_features(&bank, &z).unwrap();
        let manual = mat::matvec(&phi, &w);
        assert_eq!(direct, manual);
    }

    #[test]
    fn train_block_zero_target_gives_zero_block() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let (block, trace) = train_block(&x, &vec![0.0; 36], &tiny_cfg(), 1).unwrap();
        let wmax = block.w.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(wmax <= 1e-12, "coefficient magnitude {wmax}");
        assert!(*trace.last().unwrap() <= 1e-20);
    }

    #[test]
    fn trace_has_one_entry_per_step_plus_final() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = tiny_cfg();
        let (_, trace) = train_block(&x, &y, &cfg, 1).unwrap();
        assert_eq!(trace.len(), cfg.iters_per_block + 1);
        assert!(trace.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ablated_block_solves_once() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = TrainConfig {
            ablate_warp: true,
            ..tiny_cfg()
        };
        let (_, trace) = train_block(&x, &y, &cfg, 1).unwrap();
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn training_improves_loss_on_smooth_target() {
        // 1-D chirp-like target; the final (frozen) loss must not exceed the
        // loss at iteration 0.
        let mut x = Mat::zeros(128, 1);
        for i in 0..128 {
            x.row_mut(i)[0] = i as f64 / 127.0;
        }
        let y: Vec<f64> = (0..128).map(|i| (6.0 * (i as f64 / 127.0)).sin()).collect();
        let cfg = TrainConfig {
            freq_schedule: vec![4.0],
            iters_per_block: 40,
            num_freqs: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let (_, trace) = train_block(&x, &y, &cfg, 1).unwrap();
        assert!(trace.last().unwrap() <= trace.first().unwrap());
    }

    #[test]
    fn direct_solve_spans_low_harmonic() {
        // sin(5 x) cos(5 y) lies in the span of a frequency-5 bank on a
        // near-identity warp; a single frozen-warp solve already fits well.
        let x = testutil::grid2(48, -1.0, 1.0);
        let y: Vec<f64> = (0..x.rows)
            .map(|i| (5.0 * x.at(i, 0)).sin() * (5.0 * x.at(i, 1)).cos())
            .collect();
        let cfg = TrainConfig {
            freq_schedule: vec![5.0],
            ablate_warp: true,
            seed: 0,
            ..TrainConfig::default()
        };
        let (_, trace) = train_block(&x, &y, &cfg, 1).unwrap();
        assert!(
            *trace.last().unwrap() < 1e-3,
            "direct-solve MSE {}",
            trace.last().unwrap()
        );
    }

    #[test]
    fn fit_zero_target_is_zero_model() {
        let x = testutil::grid2(5, -1.0, 1.0);
        let (model, trace) = fit_traced(&x, &[0.0; 25], &tiny_cfg()).unwrap();
        assert!(*trace.train_mse_after_block.last().unwrap() <= 1e-20);
        let pred = predict(&model, &x).unwrap();
        assert!(pred.iter().all(|&v| v.abs() <= 1e-10));
    }

    #[test]
    fn fit_with_one_block_equals_train_block() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = TrainConfig {
            freq_schedule: vec![3.0],
            ..tiny_cfg()
        };
        let model = fit(&x, &y, &cfg).unwrap();
        let (block, _) = train_block(&x, &y, &cfg, 1).unwrap();
        assert_eq!(
            predict(&model, &x).unwrap(),
            block_forward(&block, &x).unwrap()
        );
    }

    #[test]
    fn fit_training_mse_is_monotone() {
        let x = testutil::grid2(7, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = TrainConfig {
            freq_schedule: vec![3.0, 6.0, 9.0],
            ..tiny_cfg()
        };
        let (_, trace) = fit_traced(&x, &y, &cfg).unwrap();
        let mse = &trace.train_mse_after_block;
        assert_eq!(mse.len(), 3);
        for pair in mse.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "MSE increased: {pair:?}");
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = tiny_cfg();
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        for (ba, bb) in a.blocks.iter().zip(&b.blocks) {
            assert_eq!(ba.w, bb.w);
            assert_eq!(ba.warp.w.as_slice(), bb.warp.w.as_slice());
        }
        assert_eq!(predict(&a, &x).unwrap(), predict(&b, &x).unwrap());
    }

    #[test]
    fn mini_batch_training_runs_deterministically() {
        let x = testutil::grid2(6, -1.0, 1.0);
        let y = smooth_target(&x);
        let cfg = TrainConfig {
            batch_size: Some(8),
            ..tiny_cfg()
        };
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        assert_eq!(predict(&a, &x).unwrap(), predict(&b, &x).unwrap());
    }

    #[test]
    fn predict_empty_model_is_zero_and_blocks_sum() {
        let x = testutil::random_mat(4, 2, 1, 1.0);
        let empty = CascadeModel::new(2);
        assert_eq!(predict(&empty, &x).unwrap(), vec![0.0; 4]);

        let mk = |seed: u64| {
            let wp = warp::init_warp(seed, 2, false).unwrap();
            let bank = basis::init_frequencies(seed, 3, 4.0).unwrap();
            let w: Vec<f64> = (0..12)
                .map(|i| ((seed as f64) + i as f64 * 0.2).cos())
                .collect();
            Block {
                warp: wp,
                bank,
                w,
                lambda: 1e-5,
            }
        };
        let (b1, b2) = (mk(4), mk(5));
        let model = CascadeModel {
            blocks: vec![b1.clone(), b2.clone()],
            in_dim: 2,
        };
        let sum: Vec<f64> = block_forward(&b1, &x)
            .unwrap()
            .iter()
            .zip(block_forward(&b2, &x).unwrap())
            .map(|(&a, b)| a + b)
            .collect();
        assert_eq!(predict(&model, &x).unwrap(), sum);
    }

    #[test]
    fn count_params_matches_shape_arithmetic() {
        assert_eq!(count_params(&CascadeModel::new(2)), 0);
        let mk = || {
            let wp = warp::init_warp(0, 2, false).unwrap();
            let bank = basis::init_frequencies(0, 24, 5.0).unwrap();
            Block {
                warp: wp,
                bank,
                w: vec![0.0; 96],
                lambda: 1e-5,
            }
        };
        let one = CascadeModel {
            blocks: vec![mk()],
            in_dim: 2,
        };
        assert_eq!(count_params(&one), 304);
        let three = CascadeModel {
            blocks: vec![mk(), mk(), mk()],
            in_dim: 2,
        };
        assert_eq!(count_params(&three), 912);
    }

    #[test]
    fn end_to_end_warp_gradient_matches_finite_differences() {
        // Chain fit_loss_grad -> basis_backward -> warp_backward and compare
        // against finite differences of the full pipeline loss w.r.t. every
        // warp parameter.
        let x = testutil::random_mat(16, 2, 31, 0.8);
        let y: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let wp0 = warp::init_warp(31, 2, false).unwrap();
        let bank = basis::init_frequencies(31, 2, 3.0).unwrap();
        let lambda = 1e-4;

        let loss_of = |wp: &WarpParams| {
            let z = warp::warp_forward(wp, &x).unwrap();
            let phi = basis::basis_features(&bank, &z).unwrap();
            solver::fit_loss_grad(&phi, &y, lambda).unwrap().0
        };

        let (z, wcache) = warp::warp_forward_cached(&wp0, &x).unwrap();
        let eval = basis::basis_eval(&bank, &z).unwrap();
        let (_, grad_phi, _) = solver::fit_loss_grad(&eval.phi, &y, lambda).unwrap();
        let (gz_re, gz_im, _) = basis::basis_backward(&bank, &z, &eval, &grad_phi, false).unwrap();
        let wg = warp::warp_backward(&wp0, &x, &wcache, &gz_re, &gz_im).unwrap();

        type Writer = fn(&mut WarpParams) -> &mut [f64];
        let tensors: [(&[f64], Writer); 3] = [
            (wg.w.as_slice(), |p| p.w.as_mut_slice()),
            (&wg.b, |p| &mut p.b),
            (wg.w_out.as_slice(), |p| p.w_out.as_mut_slice()),
        ];
        for (analytic, writer) in tensors {
            let fd = testutil::fd_grad(
                analytic.len(),
                |i, h| {
                    let mut wp = wp0.clone();
                    writer(&mut wp)[i] += h;
                    loss_of(&wp)
                },
                1e-6,
            );
            let rel = testutil::max_mixed_rel(analytic, &fd);
            assert!(rel <= 1e-5, "worst relative deviation {rel}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn residual_mse_never_increases(
                seed in 0u64..256,
                n in 4usize..7,
                amp in 0.2f64..2.0,
            ) {
                let x = testutil::grid2(n, -1.0, 1.0);
                let y: Vec<f64> = (0..x.rows)
                    .map(|i| amp * (3.0 * x.at(i, 0) + 1.7 * x.at(i, 1)).sin())
                    .collect();
                let cfg = TrainConfig {
                    freq_schedule: vec![2.0, 5.0],
                    iters_per_block: 2,
                    num_freqs: 2,
                    seed,
                    ..TrainConfig::default()
                };
                let (_, trace) = fit_traced(&x, &y, &cfg).unwrap();
                let mse = &trace.train_mse_after_block;
                prop_assert!(mse[1] <= mse[0] + 1e-12);
            }
        }
    }
}
