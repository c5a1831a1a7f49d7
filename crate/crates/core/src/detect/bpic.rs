//! Bayesian parallel interference cancellation with decision statistics
//! combining (B-PIC-DSC).
//!
//! Each iteration has three stages, applied to every symbol `q` in parallel
//! from the previous iteration's vector:
//!
//! 1. Observation: matched-filter PIC output
//!    `x_pic_q = h_q^H (y - H x_prev\q) / ||h_q||^2` with variance
//!    `Sigma_q = sigma^2 / ||h_q||^2`.
//! 2. Estimation: the Gaussian belief `N(x_pic_q, Sigma_q)` restricted to the
//!    alphabet gives posterior weights; their mean `x_hat_q` and variance
//!    `v_q` are the Bayesian estimate.
//! 3. Combining: with MRC residual errors
//!    `e_q = |h_q^H (y - H x_hat)|^2 / ||h_q||^4`, the decision statistic is
//!    `x_dsc_q = (1 - rho_q) x_hat_q^(t-1) + rho_q x_hat_q^(t)` where
//!    `rho_q = e_q^(t-1) / (e_q^(t) + e_q^(t-1))`.
//!
//! `x_dsc` is fed back as the next iteration's PIC input. The loop stops when
//! the Euclidean norm of the change in `x_dsc` falls to `zeta` or after
//! `t_max` iterations. The full-vector norm bounds every per-entry change, so
//! it is the stricter of the two readings of the stopping rule.

use super::{check_system, DetectionResult, DetectorConfig, InitMode};
use crate::constellation::Constellation;
use crate::detect::mmse::mmse_filter;
use crate::linalg::{column_energies, CMatrix, CVector};
use crate::{Error, Result, C64};

/// Snapshot of the detector after one iteration.
#[derive(Clone, Debug)]
pub struct DetectorState {
    pub t: usize,
    pub x_pic: CVector,
    pub sigma_pic: Vec<f64>,
    pub x_hat: CVector,
    pub v_hat: Vec<f64>,
    pub x_dsc: CVector,
    pub x_dsc_prev: CVector,
    pub e: Vec<f64>,
    pub e_prev: Vec<f64>,
    pub rho: Vec<f64>,
}

impl DetectorState {
    /// `||x_dsc - x_dsc_prev||`, the quantity tested against `zeta`.
    pub fn dsc_change(&self) -> f64 {
        (&self.x_dsc - &self.x_dsc_prev).norm()
    }
}

/// Posterior of one symbol under `N(x_pic, sigma)` with a uniform prior.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBelief {
    pub mean: C64,
    pub var: f64,
    /// Probability of each constellation point, by point index.
    pub posterior: Vec<f64>,
}

/// Energy of every column, failing on an all-zero column.
pub fn checked_column_energies(h: &CMatrix) -> Result<Vec<f64>> {
    let energies = column_energies(h);
    match energies.iter().position(|&e| e <= 0.0) {
        Some(q) => Err(Error::DegenerateColumn(q)),
        None => Ok(energies),
    }
}

/// Initial PIC input.
pub fn pic_init(y: &CVector, h: &CMatrix, sigma2: f64, mode: InitMode) -> Result<CVector> {
    match mode {
        InitMode::FullMmse => mmse_filter(y, h, sigma2),
        InitMode::ScalarMmse => {
            check_system(y, h)?;
            let energies = column_energies(h);
            let mf = h.ad_mul(y);
            let mut x = CVector::zeros(y.len());
            for q in 0..y.len() {
                let denom = energies[q] + sigma2;
                if denom <= 0.0 {
                    return Err(Error::Singular);
                }
                x[q] = mf[q] / denom;
            }
            Ok(x)
        }
    }
}

/// Matched-filter output for symbol `q` after cancelling every other symbol
/// of `x_prev`.
pub fn pic_step(y: &CVector, h: &CMatrix, x_prev: &CVector, q: usize) -> Result<C64> {
    check_system(y, h)?;
    let hq = h.column(q);
    let energy = hq.norm_squared();
    if energy <= 0.0 {
        return Err(Error::DegenerateColumn(q));
    }
    let mut masked = x_prev.clone();
    masked[q] = C64::new(0.0, 0.0);
    let resid = y - h * masked;
    Ok(hq.dotc(&resid) / energy)
}

/// [`pic_step`] for all `q` at once, sharing one residual:
/// `x_pic_q = x_prev_q + h_q^H (y - H x_prev) / ||h_q||^2`.
pub fn pic_pass(y: &CVector, h: &CMatrix, x_prev: &CVector, energies: &[f64]) -> CVector {
    let resid = y - h * x_prev;
    let corr = h.ad_mul(&resid);
    CVector::from_fn(y.len(), |q, _| x_prev[q] + corr[q] / energies[q])
}

/// `Sigma_q = sigma2 / ||h_q||^2`.
pub fn pic_variance(h: &CMatrix, sigma2: f64, q: usize) -> Result<f64> {
    let energy = h.column(q).norm_squared();
    if energy <= 0.0 {
        return Err(Error::DegenerateColumn(q));
    }
    Ok(sigma2 / energy)
}

/// Posterior mean, variance and weights of one symbol.
///
/// Weights are `exp(-|x_pic - a|^2 / sigma)` normalised over the alphabet,
/// evaluated with the largest exponent shifted to zero. `sigma == 0` is the
/// point mass on the nearest point.
pub fn bse(x_pic: C64, sigma: f64, c: &Constellation) -> SymbolBelief {
    let mut posterior = vec![0.0; c.order()];
    let (mean, var) = bse_into(x_pic, sigma, c, &mut posterior);
    SymbolBelief { mean, var, posterior }
}

fn bse_into(x_pic: C64, sigma: f64, c: &Constellation, weights: &mut [f64]) -> (C64, f64) {
    let points = c.points();
    if sigma <= 0.0 {
        let i = c.slice_index(x_pic);
        weights.iter_mut().for_each(|w| *w = 0.0);
        weights[i] = 1.0;
        return (points[i], 0.0);
    }
    let mut top = f64::NEG_INFINITY;
    for (w, a) in weights.iter_mut().zip(points) {
        *w = -(x_pic - a).norm_sqr() / sigma;
        top = top.max(*w);
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - top).exp();
        total += *w;
    }
    let mut mean = C64::new(0.0, 0.0);
    for (w, a) in weights.iter_mut().zip(points) {
        *w /= total;
        mean += a * *w;
    }
    let var = weights.iter().zip(points).map(|(w, a)| w * (a - mean).norm_sqr()).sum();
    (mean, var)
}

/// MRC residual error of symbol `q` for the full estimate `x_hat`.
pub fn dsc_error(y: &CVector, h: &CMatrix, x_hat: &CVector, q: usize) -> Result<f64> {
    check_system(y, h)?;
    let hq = h.column(q);
    let energy = hq.norm_squared();
    if energy <= 0.0 {
        return Err(Error::DegenerateColumn(q));
    }
    let resid = y - h * x_hat;
    Ok((hq.dotc(&resid) / energy).norm_sqr())
}

fn dsc_errors(y: &CVector, h: &CMatrix, x_hat: &CVector, energies: &[f64], out: &mut [f64]) {
    let resid = y - h * x_hat;
    let corr = h.ad_mul(&resid);
    for (q, e) in out.iter_mut().enumerate() {
        *e = corr[q].norm_sqr() / (energies[q] * energies[q]);
    }
}

/// Combines consecutive estimates; returns `(x_dsc, rho)`. When both errors
/// vanish the current estimate is kept (`rho = 1`).
pub fn dsc_combine(x_hat: C64, x_hat_prev: C64, e: f64, e_prev: f64) -> (C64, f64) {
    let total = e + e_prev;
    let rho = if total > 0.0 { e_prev / total } else { 1.0 };
    (x_hat_prev * (1.0 - rho) + x_hat * rho, rho)
}

pub fn bpic_dsc_detect(
    y: &CVector,
    h: &CMatrix,
    sigma2: f64,
    c: &Constellation,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    bpic_dsc_detect_observed(y, h, sigma2, c, cfg, |_| {})
}

/// [`bpic_dsc_detect`] that hands every iteration's state to `observer`.
pub fn bpic_dsc_detect_observed(
    y: &CVector,
    h: &CMatrix,
    sigma2: f64,
    c: &Constellation,
    cfg: &DetectorConfig,
    mut observer: impl FnMut(&DetectorState),
) -> Result<DetectionResult> {
    cfg.validate()?;
    check_system(y, h)?;
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {sigma2}")));
    }
    let n = y.len();
    let energies = checked_column_energies(h)?;
    let x_init = pic_init(y, h, sigma2, cfg.init_mode)?;
    if let Some(q) = first_non_finite(&x_init) {
        return Err(Error::NumericalFailure { iteration: 0, index: q });
    }

    let mut st = DetectorState {
        t: 0,
        x_pic: x_init.clone(),
        sigma_pic: energies.iter().map(|e| sigma2 / e).collect(),
        x_hat: CVector::zeros(n),
        v_hat: vec![0.0; n],
        x_dsc: x_init.clone(),
        x_dsc_prev: x_init,
        e: vec![0.0; n],
        e_prev: vec![0.0; n],
        rho: vec![1.0; n],
    };
    let mut x_hat_prev = CVector::zeros(n);
    let mut weights = vec![0.0; c.order()];

    for t in 1..=cfg.t_max {
        st.t = t;
        // x_pic^(t-1) <- x_dsc^(t-1)
        st.x_pic = pic_pass(y, h, &st.x_dsc, &energies);
        std::mem::swap(&mut x_hat_prev, &mut st.x_hat);
        for q in 0..n {
            let (m, v) = bse_into(st.x_pic[q], st.sigma_pic[q], c, &mut weights);
            st.x_hat[q] = m;
            st.v_hat[q] = v;
        }
        std::mem::swap(&mut st.e_prev, &mut st.e);
        dsc_errors(y, h, &st.x_hat, &energies, &mut st.e);
        std::mem::swap(&mut st.x_dsc_prev, &mut st.x_dsc);
        for q in 0..n {
            let (x, rho) = if t == 1 {
                // no earlier Bayesian estimate to combine with
                (st.x_hat[q], 1.0)
            } else {
                dsc_combine(st.x_hat[q], x_hat_prev[q], st.e[q], st.e_prev[q])
            };
            if !(x.re.is_finite() && x.im.is_finite()) {
                return Err(Error::NumericalFailure { iteration: t, index: q });
            }
            st.x_dsc[q] = x;
            st.rho[q] = rho;
        }
        observer(&st);
        if st.dsc_change() <= cfg.zeta {
            break;
        }
    }
    let t_last = st.t;
    Ok(DetectionResult::from_soft(c, st.x_dsc, st.v_hat, t_last))
}

fn first_non_finite(x: &CVector) -> Option<usize> {
    x.iter().position(|v| !(v.re.is_finite() && v.im.is_finite()))
}
