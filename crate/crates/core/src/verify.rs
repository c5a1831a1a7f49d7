//! Self-checks behind `otfs verify`: transform unitarity, transceiver round
//! trip, the explicit Kronecker forms against the fast paths, scalar against
//! matrix channel application, and exhaustive ML against the other detectors.

use rand::Rng;

use crate::channel::{apply_channel_scalar, build_time_channel, sample_channel, ChannelPath, DdChannel};
use crate::constellation::Constellation;
use crate::detect::{bpic_dsc_detect, ml_detect, mmse_detect, DetectorConfig};
use crate::linalg::{kron, max_abs_diff, real_diag, CMatrix, CVector};
use crate::modem::{dft_matrix, DdFrame, Modem, OtfsGeometry};
use crate::rng::trial_rng;
use crate::{Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= tol, detail: format!("worst {worst:.3e} (tol {tol:.0e})") }
}

fn random_frame(geom: &OtfsGeometry, c: &Constellation, rng: &mut impl Rng) -> DdFrame {
    let symbols: Vec<C64> = (0..geom.frame_len()).map(|_| c.points()[rng.random_range(0..c.order())]).collect();
    DdFrame::from_vec(geom, &symbols).expect("frame length matches geometry")
}

fn dft_unitarity() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 4, 7, 12] {
        let f = dft_matrix(n)?;
        worst = worst.max(max_abs_diff(&(&f * f.adjoint()), &CMatrix::identity(n, n)));
    }
    Ok(outcome("dft-unitary", worst, 1e-12))
}

fn transceiver_round_trip() -> Result<CheckOutcome> {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom)?;
    let c = Constellation::qam(4)?;
    let mut rng = trial_rng(0x5eed, 1);
    let mut worst: f64 = 0.0;
    let mut bits_ok = true;
    for _ in 0..100 {
        let bits: Vec<bool> = (0..geom.frame_len() * 2).map(|_| rng.random()).collect();
        let x = DdFrame::from_vec(&geom, &c.map_bits(&bits)?)?;
        let y = modem.demodulate(modem.modulate(&x)?.as_slice())?;
        worst = worst.max((y.to_vector() - x.to_vector()).norm());
        bits_ok &= c.demap_hard(y.as_vec().iter().copied()) == bits;
    }
    let mut o = outcome("transceiver-round-trip", worst, 1e-10);
    o.passed &= bits_ok;
    Ok(o)
}

fn kronecker_forms() -> Result<CheckOutcome> {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom)?;
    let c = Constellation::qam(16)?;
    let fk = dft_matrix(geom.doppler_bins)?;
    let eye = real_diag(&modem.pulse().tx_gains);
    let tx = kron(&fk.adjoint(), &eye);
    let rx = kron(&fk, &eye);
    let mut rng = trial_rng(0x5eed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = random_frame(&geom, &c, &mut rng);
        let s = modem.modulate(&x)?;
        worst = worst.max((&s - &tx * x.to_vector()).norm());
        let staged = modem.sfft(&modem.wigner(s.as_slice())?)?.to_vector();
        worst = worst.max((&rx * &s - staged).norm());
    }
    Ok(outcome("kronecker-vs-fast-path", worst, 1e-12))
}

fn channel_forms() -> Result<CheckOutcome> {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom)?;
    let c = Constellation::qam(4)?;
    let mut rng = trial_rng(0x5eed, 3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let p = [1, 6, 18][i % 3];
        let ch = sample_channel(&mut rng, p, 6, 3)?;
        let x = random_frame(&geom, &c, &mut rng);
        let s = modem.modulate(&x)?;
        let h = build_time_channel(&geom, &ch)?;
        let r = apply_channel_scalar(&geom, &ch, s.as_slice(), &mut rng, 0.0)?;
        worst = worst.max((&r - &h * &s).norm() / s.norm());
        let h_eff = modem.effective_channel(&h)?;
        let y = modem.demodulate(r.as_slice())?.to_vector();
        worst = worst.max((y - h_eff * x.to_vector()).norm());
    }
    Ok(outcome("scalar-vs-matrix-channel", worst, 1e-10))
}

fn ml_optimality() -> Result<CheckOutcome> {
    let geom = OtfsGeometry::new(2, 2, 15e3, 1)?;
    let modem = Modem::rectangular(geom)?;
    let c = Constellation::qam(4)?;
    let cfg = DetectorConfig::default();
    let mut rng = trial_rng(0x5eed, 4);
    let sigma2 = 0.05;
    let mut violations = 0;
    for _ in 0..200 {
        let ch = sample_channel(&mut rng, 2, 1, 1)?;
        let x = random_frame(&geom, &c, &mut rng);
        let r = apply_channel_scalar(&geom, &ch, modem.modulate(&x)?.as_slice(), &mut rng, sigma2)?;
        let y = modem.demodulate(r.as_slice())?.to_vector();
        let h = modem.effective_channel(&build_time_channel(&geom, &ch)?)?;
        let cost = |v: &[C64]| (&y - &h * CVector::from_column_slice(v)).norm_squared();
        let ml = cost(&ml_detect(&y, &h, &c)?.hard);
        let others = [cost(&bpic_dsc_detect(&y, &h, sigma2, &c, &cfg)?.hard), cost(&mmse_detect(&y, &h, sigma2, &c)?.hard), cost(x.as_vec())];
        violations += others.iter().filter(|&&o| ml > o * (1.0 + 1e-12) + 1e-15).count();
    }
    Ok(CheckOutcome {
        name: "ml-is-optimal",
        passed: violations == 0,
        detail: format!("{violations} instances where another decision beat ML"),
    })
}

fn constellation_round_trip() -> Result<CheckOutcome> {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for m in [4, 16, 64] {
        let c = Constellation::qam(m)?;
        let e = c.points().iter().map(|a| a.norm_sqr()).sum::<f64>() / m as f64;
        worst = worst.max((e - 1.0).abs());
        for label in 0..m {
            let bits: Vec<bool> = c.label_bits(label).collect();
            ok &= c.demap_hard(c.map_bits(&bits)?) == bits;
        }
    }
    let mut o = outcome("qam-energy-and-labels", worst, 1e-12);
    o.passed &= ok;
    Ok(o)
}

fn identity_channel_is_transparent() -> Result<CheckOutcome> {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom)?;
    let ch = DdChannel::from_paths(vec![ChannelPath { gain: C64::new(1.0, 0.0), delay: 0, doppler: 0 }])?;
    let h_eff = modem.effective_channel(&build_time_channel(&geom, &ch)?)?;
    Ok(outcome("identity-effective-channel", max_abs_diff(&h_eff, &CMatrix::identity(84, 84)), 1e-12))
}

/// Runs every check; an `Err` means a check could not run at all.
pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        dft_unitarity()?,
        constellation_round_trip()?,
        transceiver_round_trip()?,
        kronecker_forms()?,
        identity_channel_is_transparent()?,
        channel_forms()?,
        ml_optimality()?,
    ])
}
