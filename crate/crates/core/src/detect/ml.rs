//! Exhaustive maximum-likelihood reference for small systems.

use super::{check_system, DetectionResult};
use crate::constellation::Constellation;
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

/// Largest candidate count the exhaustive search accepts.
pub const ML_SEARCH_LIMIT: f64 = (1u64 << 20) as f64;

/// `argmin_x ||y - H x||^2` over all `M^n` symbol vectors. Candidates are
/// visited in lexicographic order of their point indices (first entry most
/// significant) and the first minimiser wins.
pub fn ml_detect(y: &CVector, h: &CMatrix, c: &Constellation) -> Result<DetectionResult> {
    check_system(y, h)?;
    let n = y.len();
    let m = c.order();
    let size = (m as f64).powi(n as i32);
    if size > ML_SEARCH_LIMIT {
        return Err(Error::Capacity { size });
    }
    let points = c.points();
    let mut idx = vec![0usize; n];
    let mut x = CVector::from_element(n, points[0]);
    let mut best = x.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let cost = (y - h * &x).norm_squared();
        if cost < best_cost {
            best_cost = cost;
            best.copy_from(&x);
        }
        // odometer, last entry fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(DetectionResult::from_soft(c, best, vec![0.0; n], 1));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < m {
                x[pos] = points[idx[pos]];
                break;
            }
            idx[pos] = 0;
            x[pos] = points[0];
        }
    }
}
