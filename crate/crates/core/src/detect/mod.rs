//! Symbol detectors for the delay-Doppler model `y = H x + w`.
//!
//! All detectors take the effective channel as a dense square matrix and
//! return a [`DetectionResult`] with hard decisions, decoded bits and the
//! soft quantities that produced them.

use std::fmt;
use std::str::FromStr;

use crate::constellation::Constellation;
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result, C64};

pub mod bpic;
pub mod ml;
pub mod mmse;

pub use bpic::{bpic_dsc_detect, bpic_dsc_detect_observed, DetectorState};
pub use ml::ml_detect;
pub use mmse::{mmse_detect, mmse_filter};

/// Initial estimate fed to the first interference-cancellation pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Whole-matrix MMSE: `(H^H H + sigma^2 I)^{-1} H^H y`.
    FullMmse,
    /// Per-symbol filter `(h_q^H h_q + sigma^2)^{-1} h_q^H y` that ignores
    /// interference from the other columns.
    ScalarMmse,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_mmse" | "full-mmse" => Ok(InitMode::FullMmse),
            "scalar_mmse" | "scalar-mmse" => Ok(InitMode::ScalarMmse),
            _ => Err(Error::invalid(format!("unknown init mode {s:?} (full_mmse, scalar_mmse)"))),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::FullMmse => "full_mmse",
            InitMode::ScalarMmse => "scalar_mmse",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    pub t_max: usize,
    /// Stop once `||x_DSC^(t) - x_DSC^(t-1)||` drops to this value.
    pub zeta: f64,
    pub init_mode: InitMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { t_max: 10, zeta: 1e-4, init_mode: InitMode::FullMmse }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::invalid(format!("zeta must be positive, got {}", self.zeta)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    /// Nearest constellation point for every entry of `soft_mean`.
    pub hard: Vec<C64>,
    pub bits: Vec<bool>,
    pub soft_mean: CVector,
    /// Posterior variances; all zero for detectors that do not produce them.
    pub soft_var: Vec<f64>,
    /// Iterations actually run (`t_last`); 1 for one-shot detectors.
    pub iterations: usize,
}

impl DetectionResult {
    pub(crate) fn from_soft(
        c: &Constellation,
        soft_mean: CVector,
        soft_var: Vec<f64>,
        iterations: usize,
    ) -> Self {
        let mut hard = Vec::with_capacity(soft_mean.len());
        let mut bits = Vec::with_capacity(soft_mean.len() * c.bits_per_symbol());
        for &z in soft_mean.iter() {
            let i = c.slice_index(z);
            hard.push(c.points()[i]);
            bits.extend(c.label_bits(i));
        }
        DetectionResult { hard, bits, soft_mean, soft_var, iterations }
    }
}

/// Registry of detectors the simulator can run by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    BpicDsc,
    Mmse,
    Ml,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::BpicDsc, DetectorKind::Mmse, DetectorKind::Ml];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::BpicDsc => "bpic-dsc",
            DetectorKind::Mmse => "mmse",
            DetectorKind::Ml => "ml",
        }
    }

    pub fn detect(
        &self,
        y: &CVector,
        h: &CMatrix,
        sigma2: f64,
        c: &Constellation,
        cfg: &DetectorConfig,
    ) -> Result<DetectionResult> {
        match self {
            DetectorKind::BpicDsc => bpic_dsc_detect(y, h, sigma2, c, cfg),
            DetectorKind::Mmse => mmse_detect(y, h, sigma2, c),
            DetectorKind::Ml => ml_detect(y, h, c),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown detector {s:?} (bpic-dsc, mmse, ml)")))
    }
}

pub(crate) fn check_system(y: &CVector, h: &CMatrix) -> Result<()> {
    if !h.is_square() || h.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "need a square channel matching y: H is {:?}, y has {}",
            h.shape(),
            y.len()
        )));
    }
    Ok(())
}
