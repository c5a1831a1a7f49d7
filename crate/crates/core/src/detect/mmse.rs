//! Linear MMSE baseline.

use nalgebra::linalg::Cholesky;

use super::{check_system, DetectionResult};
use crate::constellation::Constellation;
use crate::linalg::{gram, CMatrix, CVector};
use crate::{Error, Result, C64};

/// Relative pivot size below which the normal equations count as singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// `(H^H H + sigma2 I)^{-1} H^H y`, solved by Cholesky factorisation.
pub fn mmse_filter(y: &CVector, h: &CMatrix, sigma2: f64) -> Result<CVector> {
    check_system(y, h)?;
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {sigma2}")));
    }
    let mut gram = gram(h);
    for i in 0..gram.nrows() {
        gram[(i, i)] += C64::new(sigma2, 0.0);
    }
    let scale = gram.diagonal().iter().map(|d| d.re).fold(0.0, f64::max);
    let chol = Cholesky::new(gram).ok_or(Error::Singular)?;
    let l = chol.l_dirty();
    if scale <= 0.0 || (0..l.nrows()).any(|i| l[(i, i)].re * l[(i, i)].re < PIVOT_FLOOR * scale) {
        return Err(Error::Singular);
    }
    let x = chol.solve(&h.ad_mul(y));
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x)
}

pub fn mmse_detect(y: &CVector, h: &CMatrix, sigma2: f64, c: &Constellation) -> Result<DetectionResult> {
    let x = mmse_filter(y, h, sigma2)?;
    let n = x.len();
    Ok(DetectionResult::from_soft(c, x, vec![0.0; n], 1))
}
