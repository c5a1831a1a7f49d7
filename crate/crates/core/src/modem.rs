//! OTFS transmitter and receiver.
//!
//! Delay-Doppler frames are `L x K` grids (`L` delay bins, `K` Doppler bins)
//! vectorised column by column, so entry `(l, k)` sits at `l + k * L`.
//!
//! Transmit: `X_TF = F_L X_DD F_K^H` (ISFFT) followed by the Heisenberg
//! transform `s = vec(G_tx F_L^H X_TF)`, which collapses to
//! `s = (F_K^H ⊗ G_tx) x_DD`. Receive: `Y_TF = F_L G_rx R` (Wigner) and
//! `Y_DD = F_L^H Y_TF F_K` (SFFT), i.e. `y_DD = (F_K ⊗ G_rx) r`.
//!
//! [`Modem::modulate`] and [`Modem::demodulate`] use the collapsed forms with
//! `K`-point transforms along each delay row. The staged transforms are kept
//! as separate methods so both paths can be checked against each other.

use std::f64::consts::PI;

use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result, C64};

/// Frame geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtfsGeometry {
    /// `L`: delay bins, which is also the number of subcarriers.
    pub delay_bins: usize,
    /// `K`: Doppler bins, which is also the number of time slots.
    pub doppler_bins: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Cyclic prefix length in samples, one prefix per frame.
    pub n_cp: usize,
}

impl OtfsGeometry {
    pub fn new(delay_bins: usize, doppler_bins: usize, delta_f: f64, n_cp: usize) -> Result<Self> {
        if delay_bins == 0 || doppler_bins == 0 {
            return Err(Error::invalid("frame needs at least one delay and one Doppler bin"));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(Error::invalid(format!("subcarrier spacing must be positive, got {delta_f}")));
        }
        if n_cp >= delay_bins {
            return Err(Error::invalid(format!(
                "cyclic prefix of {n_cp} samples must be shorter than {delay_bins} delay bins"
            )));
        }
        Ok(OtfsGeometry { delay_bins, doppler_bins, delta_f, n_cp })
    }

    /// 12 x 7 grid at 15 kHz with a 6-sample prefix.
    pub fn reference() -> Self {
        OtfsGeometry { delay_bins: 12, doppler_bins: 7, delta_f: 15e3, n_cp: 6 }
    }

    /// Symbols (and samples) per frame, `KL`.
    pub fn frame_len(&self) -> usize {
        self.delay_bins * self.doppler_bins
    }

    /// `T = 1 / delta_f`.
    pub fn slot_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    pub fn sample_period(&self) -> f64 {
        self.slot_duration() / self.delay_bins as f64
    }

    pub fn bandwidth(&self) -> f64 {
        self.delay_bins as f64 * self.delta_f
    }

    pub fn samples_with_cp(&self) -> usize {
        self.frame_len() + self.n_cp
    }

    /// `K T + N_cp T / L`.
    pub fn frame_duration(&self) -> f64 {
        self.doppler_bins as f64 * self.slot_duration() + self.n_cp as f64 * self.sample_period()
    }

    /// Information bits per transmitted sample, prefix included.
    pub fn spectral_efficiency(&self, bits_per_symbol: usize) -> f64 {
        (self.frame_len() * bits_per_symbol) as f64 / self.samples_with_cp() as f64
    }

    /// Delay of bin `l` in seconds.
    pub fn delay_of(&self, l: usize) -> f64 {
        l as f64 * self.sample_period()
    }

    /// Doppler shift of bin `k` in Hz.
    pub fn doppler_of(&self, k: i64) -> f64 {
        k as f64 * self.delta_f / self.doppler_bins as f64
    }
}

/// Sampled transmit and receive pulses, `g(n T / L)` for `n = 0..L`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseShape {
    pub tx_gains: Vec<f64>,
    pub rx_gains: Vec<f64>,
}

impl PulseShape {
    pub fn rectangular(delay_bins: usize) -> Self {
        PulseShape { tx_gains: vec![1.0; delay_bins], rx_gains: vec![1.0; delay_bins] }
    }
}

/// An `L x K` delay-Doppler grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DdFrame {
    grid: CMatrix,
}

impl DdFrame {
    pub fn from_grid(grid: CMatrix) -> Self {
        DdFrame { grid }
    }

    /// Builds the grid from its column-major vectorisation.
    pub fn from_vec(geom: &OtfsGeometry, vec: &[C64]) -> Result<Self> {
        if vec.len() != geom.frame_len() {
            return Err(Error::invalid(format!(
                "frame vector has {} entries, geometry needs {}",
                vec.len(),
                geom.frame_len()
            )));
        }
        Ok(DdFrame { grid: CMatrix::from_column_slice(geom.delay_bins, geom.doppler_bins, vec) })
    }

    pub fn grid(&self) -> &CMatrix {
        &self.grid
    }

    /// `vec(X_DD)`, entry `l + k L`.
    pub fn as_vec(&self) -> &[C64] {
        self.grid.as_slice()
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_column_slice(self.as_vec())
    }
}

/// Unitary `n`-point DFT matrix, entry `(p, q) = e^{-j 2 pi p q / n} / sqrt(n)`.
pub fn dft_matrix(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::invalid("DFT size must be at least 1"));
    }
    let norm = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |p, q| {
        // reduce the exponent first so large products keep full phase precision
        let e = ((p * q) % n) as f64;
        C64::from_polar(norm, -2.0 * PI * e / n as f64)
    }))
}

/// Modulator/demodulator for one geometry and pulse pair, with cached DFTs.
#[derive(Clone, Debug)]
pub struct Modem {
    geom: OtfsGeometry,
    pulse: PulseShape,
    f_l: CMatrix,
    f_k: CMatrix,
}

impl Modem {
    pub fn new(geom: OtfsGeometry, pulse: PulseShape) -> Result<Self> {
        if pulse.tx_gains.len() != geom.delay_bins || pulse.rx_gains.len() != geom.delay_bins {
            return Err(Error::invalid(format!(
                "pulse has {}/{} taps, geometry has {} delay bins",
                pulse.tx_gains.len(),
                pulse.rx_gains.len(),
                geom.delay_bins
            )));
        }
        let f_l = dft_matrix(geom.delay_bins)?;
        let f_k = dft_matrix(geom.doppler_bins)?;
        Ok(Modem { geom, pulse, f_l, f_k })
    }

    pub fn rectangular(geom: OtfsGeometry) -> Result<Self> {
        Self::new(geom, PulseShape::rectangular(geom.delay_bins))
    }

    pub fn geometry(&self) -> &OtfsGeometry {
        &self.geom
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn dft_l(&self) -> &CMatrix {
        &self.f_l
    }

    pub fn dft_k(&self) -> &CMatrix {
        &self.f_k
    }

    fn check_grid(&self, m: &CMatrix) -> Result<()> {
        let want = (self.geom.delay_bins, self.geom.doppler_bins);
        if m.shape() != want {
            return Err(Error::invalid(format!("grid is {:?}, geometry needs {:?}", m.shape(), want)));
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.geom.frame_len() {
            return Err(Error::invalid(format!(
                "signal has {len} samples, frame needs {}",
                self.geom.frame_len()
            )));
        }
        Ok(())
    }

    /// ISFFT: `X_TF = F_L X_DD F_K^H`.
    pub fn isfft(&self, x_dd: &DdFrame) -> Result<CMatrix> {
        self.check_grid(x_dd.grid())?;
        Ok(&self.f_l * x_dd.grid() * self.f_k.adjoint())
    }

    /// SFFT: `Y_DD = F_L^H Y_TF F_K`.
    pub fn sfft(&self, y_tf: &CMatrix) -> Result<DdFrame> {
        self.check_grid(y_tf)?;
        Ok(DdFrame::from_grid(self.f_l.adjoint() * y_tf * &self.f_k))
    }

    /// Heisenberg transform: `s = vec(G_tx F_L^H X_TF)`.
    pub fn heisenberg(&self, x_tf: &CMatrix) -> Result<CVector> {
        self.check_grid(x_tf)?;
        let mut t = self.f_l.adjoint() * x_tf;
        scale_rows(&mut t, &self.pulse.tx_gains);
        Ok(CVector::from_column_slice(t.as_slice()))
    }

    /// Wigner transform: `Y_TF = F_L G_rx R`, where column `k` of `R` is
    /// `r[kL .. (k+1)L]`.
    pub fn wigner(&self, r: &[C64]) -> Result<CMatrix> {
        self.check_len(r.len())?;
        let mut big_r = CMatrix::from_column_slice(self.geom.delay_bins, self.geom.doppler_bins, r);
        scale_rows(&mut big_r, &self.pulse.rx_gains);
        Ok(&self.f_l * big_r)
    }

    /// `s = (F_K^H ⊗ G_tx) x_DD`.
    pub fn modulate(&self, x_dd: &DdFrame) -> Result<CVector> {
        self.check_grid(x_dd.grid())?;
        let mut out = vec![C64::new(0.0, 0.0); self.geom.frame_len()];
        self.modulate_into(x_dd.as_vec(), &mut out);
        Ok(CVector::from_vec(out))
    }

    /// `y_DD = (F_K ⊗ G_rx) r`.
    pub fn demodulate(&self, r: &[C64]) -> Result<DdFrame> {
        self.check_len(r.len())?;
        let mut out = vec![C64::new(0.0, 0.0); self.geom.frame_len()];
        self.demodulate_into(r, &mut out);
        DdFrame::from_vec(&self.geom, &out)
    }

    fn modulate_into(&self, x: &[C64], out: &mut [C64]) {
        // F_K^H[k, k'] = conj(F_K[k, k'])
        row_transform(x, out, self.geom.delay_bins, &self.pulse.tx_gains, &self.f_k, true);
    }

    fn demodulate_into(&self, r: &[C64], out: &mut [C64]) {
        row_transform(r, out, self.geom.delay_bins, &self.pulse.rx_gains, &self.f_k, false);
    }

    /// `H_eff = (F_K ⊗ G_rx) H (F_K^H ⊗ G_tx)` for a time-domain channel `H`.
    ///
    /// `F_K` is symmetric and the pulse matrices are real diagonal, so
    /// `B = F_K^H ⊗ G_tx` satisfies `B^T = B` and each row of `H B` is the
    /// modulation of the matching row of `H`; the left factor is applied
    /// column by column as a demodulation.
    pub fn effective_channel(&self, h_time: &CMatrix) -> Result<CMatrix> {
        let n = self.geom.frame_len();
        if h_time.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "channel matrix is {:?}, frame needs {n}x{n}",
                h_time.shape()
            )));
        }
        let mut row = vec![C64::new(0.0, 0.0); n];
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        let mut hb = CMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in row.iter_mut().enumerate() {
                *v = h_time[(i, j)];
            }
            self.modulate_into(&row, &mut tmp);
            for (j, v) in tmp.iter().enumerate() {
                hb[(i, j)] = *v;
            }
        }
        let mut h_eff = CMatrix::zeros(n, n);
        for j in 0..n {
            self.demodulate_into(hb.column(j).as_slice(), &mut tmp);
            h_eff.column_mut(j).copy_from_slice(&tmp);
        }
        Ok(h_eff)
    }
}

fn scale_rows(m: &mut CMatrix, gains: &[f64]) {
    for (mut row, &g) in m.row_iter_mut().zip(gains) {
        row *= C64::new(g, 0.0);
    }
}

/// `out = vec(G X F)` with `X` the `l x (len / l)` reshape of `x` and `F`
/// either `fk` or its conjugate.
fn row_transform(x: &[C64], out: &mut [C64], l: usize, gains: &[f64], fk: &CMatrix, conjugate: bool) {
    let k = fk.nrows();
    for kp in 0..k {
        for li in 0..l {
            let mut acc = C64::new(0.0, 0.0);
            for ki in 0..k {
                let f = fk[(ki, kp)];
                let f = if conjugate { f.conj() } else { f };
                acc += x[li + ki * l] * f;
            }
            out[li + kp * l] = acc * gains[li];
        }
    }
}
