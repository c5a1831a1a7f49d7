//! Integer delay-Doppler multipath channels.
//!
//! A channel is a list of paths `(h_i, l_i, k_i)`. In the time domain, after
//! the cyclic prefix is dropped, it acts on one frame of `N = KL` samples as
//!
//! ```text
//! r(n) = sum_i h_i e^{j 2 pi k_i (n - l_i) / N} s([n - l_i]_N) + w(n)
//! ```
//!
//! which is the matrix `H = sum_i h_i Pi(l_i) Delta(k_i)` with `Pi(l)` the
//! identity with its columns circularly shifted by `l` and `Delta(k)` the
//! diagonal Doppler phase ramp. [`build_time_channel`] evaluates the matrix
//! factorisation and [`apply_channel_scalar`] the per-sample sum; they are
//! implemented independently so each can check the other.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector};
use crate::modem::OtfsGeometry;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelPath {
    pub gain: C64,
    pub delay: usize,
    pub doppler: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdChannel {
    paths: Vec<ChannelPath>,
    l_max: usize,
    k_max: usize,
}

impl DdChannel {
    pub fn new(paths: Vec<ChannelPath>, l_max: usize, k_max: usize) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::invalid("a channel needs at least one path"));
        }
        for (i, p) in paths.iter().enumerate() {
            if p.delay > l_max || p.doppler.unsigned_abs() as usize > k_max {
                return Err(Error::invalid(format!(
                    "path {i} (l={}, k={}) outside l_max={l_max}, k_max={k_max}",
                    p.delay, p.doppler
                )));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::invalid(format!("path {i} has a non-finite gain")));
            }
        }
        Ok(DdChannel { paths, l_max, k_max })
    }

    /// Channel with bounds taken from its own paths.
    pub fn from_paths(paths: Vec<ChannelPath>) -> Result<Self> {
        let l_max = paths.iter().map(|p| p.delay).max().unwrap_or(0);
        let k_max = paths.iter().map(|p| p.doppler.unsigned_abs() as usize).max().unwrap_or(0);
        Self::new(paths, l_max, k_max)
    }

    pub fn paths(&self) -> &[ChannelPath] {
        &self.paths
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Line-based text form: a `# l_max=.. k_max=..` header, then one
    /// `gain_re gain_im l k` line per path.
    pub fn to_record(&self) -> String {
        let mut out = format!("# l_max={} k_max={}\n", self.l_max, self.k_max);
        for p in &self.paths {
            let _ = writeln!(out, "{} {} {} {}", p.gain.re, p.gain.im, p.delay, p.doppler);
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut bounds = None;
        let mut paths = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix('#') {
                if let Some(b) = parse_bounds(header) {
                    bounds = Some(b);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let bad = || Error::invalid(format!("channel record line {}: {line:?}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            let re: f64 = fields[0].parse().map_err(|_| bad())?;
            let im: f64 = fields[1].parse().map_err(|_| bad())?;
            let delay: usize = fields[2].parse().map_err(|_| bad())?;
            let doppler: i64 = fields[3].parse().map_err(|_| bad())?;
            paths.push(ChannelPath { gain: C64::new(re, im), delay, doppler });
        }
        match bounds {
            Some((l_max, k_max)) => Self::new(paths, l_max, k_max),
            None => Self::from_paths(paths),
        }
    }
}

fn parse_bounds(header: &str) -> Option<(usize, usize)> {
    let mut l = None;
    let mut k = None;
    for tok in header.split_whitespace() {
        if let Some(v) = tok.strip_prefix("l_max=") {
            l = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("k_max=") {
            k = v.parse().ok();
        }
    }
    Some((l?, k?))
}

/// Random channel: path 0 at delay 0, the other `num_paths - 1` delays drawn
/// uniformly (with repetition) from `1..=l_max`, Doppler bins uniform on
/// `-k_max..=k_max`, gains i.i.d. `CN(0, 1 / num_paths)`.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    num_paths: usize,
    l_max: usize,
    k_max: usize,
) -> Result<DdChannel> {
    if num_paths == 0 {
        return Err(Error::invalid("number of paths must be at least 1"));
    }
    if l_max == 0 {
        return Err(Error::invalid("l_max must be at least 1"));
    }
    let k_max_i = k_max as i64;
    let std = (0.5 / num_paths as f64).sqrt();
    let paths = (0..num_paths)
        .map(|i| {
            let delay = if i == 0 { 0 } else { rng.random_range(1..=l_max) };
            let doppler = rng.random_range(-k_max_i..=k_max_i);
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            ChannelPath { gain: C64::new(re * std, im * std), delay, doppler }
        })
        .collect();
    DdChannel::new(paths, l_max, k_max)
}

/// `Pi(l)`: identity with columns circularly shifted so that `(Pi s)[n] = s[n - l]`.
pub fn delay_shift_matrix(n: usize, l: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for row in 0..n {
        m[(row, (row + n - l % n) % n)] = C64::new(1.0, 0.0);
    }
    m
}

fn doppler_phase(n: usize, k: i64, m: usize) -> C64 {
    let e = (k * m as i64).rem_euclid(n as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * e / n as f64)
}

/// `Delta(k) = diag(e^{j 2 pi k m / n})`, `m = 0..n`.
pub fn doppler_matrix(n: usize, k: i64) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(n, (0..n).map(|m| doppler_phase(n, k, m))))
}

/// `H = sum_i h_i Pi(l_i) Delta(k_i)`, evaluated without forming the factors:
/// row `n` of `Pi(l)` selects column `m = [n - l]_N` of `Delta(k)`.
pub fn build_time_channel(geom: &OtfsGeometry, ch: &DdChannel) -> Result<CMatrix> {
    let n = geom.frame_len();
    check_delays(n, ch)?;
    let mut h = CMatrix::zeros(n, n);
    for p in ch.paths() {
        for row in 0..n {
            let m = (row + n - p.delay) % n;
            h[(row, m)] += p.gain * doppler_phase(n, p.doppler, m);
        }
    }
    Ok(h)
}

fn check_delays(n: usize, ch: &DdChannel) -> Result<()> {
    if let Some(p) = ch.paths().iter().find(|p| p.delay >= n) {
        return Err(Error::invalid(format!("delay index {} not below frame length {n}", p.delay)));
    }
    Ok(())
}

/// Per-sample channel output plus `CN(0, sigma2)` noise.
///
/// The noise draws are consumed even when `sigma2 == 0`, so a given RNG
/// stream stays aligned across SNR points.
pub fn apply_channel_scalar<R: Rng + ?Sized>(
    geom: &OtfsGeometry,
    ch: &DdChannel,
    s: &[C64],
    rng: &mut R,
    sigma2: f64,
) -> Result<CVector> {
    let n = geom.frame_len();
    if s.len() != n {
        return Err(Error::invalid(format!("signal has {} samples, frame needs {n}", s.len())));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {sigma2}")));
    }
    check_delays(n, ch)?;
    let nf = n as f64;
    let noise_std = (sigma2 / 2.0).sqrt();
    let r = (0..n)
        .map(|t| {
            let mut acc = C64::new(0.0, 0.0);
            for p in ch.paths() {
                let lag = t as i64 - p.delay as i64;
                let phase = 2.0 * PI * p.doppler as f64 * lag as f64 / nf;
                acc += p.gain * C64::from_polar(1.0, phase) * s[lag.rem_euclid(n as i64) as usize];
            }
            let wr: f64 = rng.sample(StandardNormal);
            let wi: f64 = rng.sample(StandardNormal);
            acc + C64::new(wr, wi) * noise_std
        })
        .collect::<Vec<_>>();
    Ok(CVector::from_vec(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::rng::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_signal(n: usize, rng: &mut impl Rng) -> Vec<C64> {
        (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn sample_channel_layout() {
        let mut rng = trial_rng(1, 0);
        for _ in 0..200 {
            let ch = sample_channel(&mut rng, 6, 6, 1).unwrap();
            assert_eq!(ch.paths().len(), 6);
            assert_eq!(ch.paths()[0].delay, 0);
            for p in &ch.paths()[1..] {
                assert!((1..=6).contains(&p.delay));
            }
            for p in ch.paths() {
                assert!((-1..=1).contains(&p.doppler));
            }
        }
        let ch = sample_channel(&mut rng, 1, 1, 0).unwrap();
        assert_eq!(ch.paths().len(), 1);
        assert_eq!((ch.paths()[0].delay, ch.paths()[0].doppler), (0, 0));
        assert!(sample_channel(&mut rng, 0, 6, 1).is_err());
    }

    #[test]
    fn sample_channel_unit_mean_power() {
        let mut rng = trial_rng(2, 0);
        let draws = 100_000;
        let mean: f64 =
            (0..draws).map(|_| sample_channel(&mut rng, 6, 6, 3).unwrap().total_power()).sum::<f64>()
                / draws as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn sample_channel_covers_all_bins() {
        let mut rng = trial_rng(3, 0);
        let mut delays = [0usize; 7];
        let mut dopplers = [0usize; 7];
        for _ in 0..2000 {
            for p in sample_channel(&mut rng, 18, 6, 3).unwrap().paths() {
                delays[p.delay] += 1;
                dopplers[(p.doppler + 3) as usize] += 1;
            }
        }
        assert_eq!(delays[0], 2000);
        assert!(delays[1..].iter().all(|&d| d > 5000));
        assert!(dopplers.iter().all(|&d| d > 4500));
    }

    #[test]
    fn shift_matrix_matches_display() {
        let m = delay_shift_matrix(4, 1);
        let mut want = CMatrix::zeros(4, 4);
        for (r, col) in [(0, 3), (1, 0), (2, 1), (3, 2)] {
            want[(r, col)] = c(1.0, 0.0);
        }
        assert_eq!(m, want);
        assert_eq!(delay_shift_matrix(5, 0), CMatrix::identity(5, 5));
    }

    #[test]
    fn factor_identities() {
        let n = 84;
        for k in -3..=3 {
            let p = doppler_matrix(n, k) * doppler_matrix(n, -k);
            assert!(max_abs_diff(&p, &CMatrix::identity(n, n)) < 1e-12);
        }
        for l in 0..7 {
            let s = delay_shift_matrix(n, l);
            assert!(max_abs_diff(&(&s * s.transpose()), &CMatrix::identity(n, n)) < 1e-12);
        }
    }

    #[test]
    fn time_channel_examples() {
        let g = OtfsGeometry::new(2, 2, 15e3, 1).unwrap();
        let unit = |l, k| DdChannel::from_paths(vec![ChannelPath { gain: c(1.0, 0.0), delay: l, doppler: k }]).unwrap();
        assert!(max_abs_diff(&build_time_channel(&g, &unit(0, 0)).unwrap(), &CMatrix::identity(4, 4)) < 1e-15);
        let h = build_time_channel(&g, &unit(0, 1)).unwrap();
        let want = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]));
        assert!(max_abs_diff(&h, &want) < 1e-15);
        assert!(build_time_channel(&g, &unit(4, 0)).is_err());
    }

    #[test]
    fn time_channel_matches_dense_factorisation() {
        let g = OtfsGeometry::reference();
        let n = g.frame_len();
        let mut rng = trial_rng(4, 0);
        for _ in 0..5 {
            let ch = sample_channel(&mut rng, 10, 6, 3).unwrap();
            let mut dense = CMatrix::zeros(n, n);
            for p in ch.paths() {
                dense += delay_shift_matrix(n, p.delay) * doppler_matrix(n, p.doppler) * p.gain;
            }
            assert!(max_abs_diff(&build_time_channel(&g, &ch).unwrap(), &dense) < 1e-12);
        }
    }

    #[test]
    fn columns_have_at_most_p_nonzeros() {
        let g = OtfsGeometry::reference();
        let mut rng = trial_rng(5, 0);
        for p in [1, 6, 18] {
            let ch = sample_channel(&mut rng, p, 6, 3).unwrap();
            let h = build_time_channel(&g, &ch).unwrap();
            for col in h.column_iter() {
                assert!(col.iter().filter(|v| v.norm() > 0.0).count() <= p);
            }
        }
    }

    #[test]
    fn scalar_form_matches_matrix_form() {
        let g = OtfsGeometry::reference();
        let mut rng = trial_rng(6, 0);
        for i in 0..100 {
            let p = [1, 6, 18][i % 3];
            let ch = sample_channel(&mut rng, p, 6, 3).unwrap();
            let s = random_signal(g.frame_len(), &mut rng);
            let r = apply_channel_scalar(&g, &ch, &s, &mut rng, 0.0).unwrap();
            let hs = build_time_channel(&g, &ch).unwrap() * CVector::from_column_slice(&s);
            let sn = CVector::from_column_slice(&s).norm();
            assert!((r - hs).norm() <= 1e-10 * sn);
        }
    }

    #[test]
    fn identity_channel_noiseless() {
        let g = OtfsGeometry::reference();
        let ch = DdChannel::from_paths(vec![ChannelPath { gain: c(1.0, 0.0), delay: 0, doppler: 0 }]).unwrap();
        let mut rng = trial_rng(7, 0);
        let s = random_signal(84, &mut rng);
        let r = apply_channel_scalar(&g, &ch, &s, &mut rng, 0.0).unwrap();
        assert_eq!(r.as_slice(), &s[..]);
        assert!(apply_channel_scalar(&g, &ch, &s[..80], &mut rng, 0.0).is_err());
        assert!(apply_channel_scalar(&g, &ch, &s, &mut rng, -1.0).is_err());
    }

    #[test]
    fn noise_is_white_with_requested_variance() {
        let g = OtfsGeometry::reference();
        let ch = DdChannel::from_paths(vec![ChannelPath { gain: c(0.0, 0.0), delay: 0, doppler: 0 }]).unwrap();
        let mut rng = trial_rng(8, 0);
        let s = vec![c(0.0, 0.0); 84];
        let sigma2 = 0.37;
        let frames = 1200; // > 1e5 samples
        let mut acc = 0.0;
        let mut lag1 = c(0.0, 0.0);
        for _ in 0..frames {
            let w = apply_channel_scalar(&g, &ch, &s, &mut rng, sigma2).unwrap();
            acc += w.norm_squared();
            for t in 1..84 {
                lag1 += w[t] * w[t - 1].conj();
            }
        }
        let var = acc / (frames * 84) as f64;
        assert!((var / sigma2 - 1.0).abs() < 0.02, "{var}");
        assert!(lag1.norm() / (frames * 83) as f64 / sigma2 < 0.02);
    }

    #[test]
    fn record_rejects_garbage() {
        assert!(DdChannel::from_record("1 2 3").is_err());
        assert!(DdChannel::from_record("a b 0 0").is_err());
        assert!(DdChannel::from_record("# l_max=1 k_max=0\n1 0 2 0\n").is_err());
        assert!(DdChannel::from_record("").is_err());
    }

    proptest! {
        #[test]
        fn record_round_trip(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..7, -3i64..=3), 1..20)
        ) {
            let paths = raw.into_iter()
                .map(|(re, im, l, k)| ChannelPath { gain: C64::new(re, im), delay: l, doppler: k })
                .collect();
            let ch = DdChannel::new(paths, 6, 3).unwrap();
            prop_assert_eq!(DdChannel::from_record(&ch.to_record()).unwrap(), ch);
        }
    }
}
