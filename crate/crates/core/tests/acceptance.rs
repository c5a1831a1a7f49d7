//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Run with `cargo test -p otfs --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;

use otfs::channel::{apply_channel_scalar, build_time_channel, sample_channel, ChannelPath, DdChannel};
use otfs::constellation::Constellation;
use otfs::detect::{DetectorKind, InitMode};
use otfs::modem::{DdFrame, Modem, OtfsGeometry};
use otfs::rng::trial_rng;
use otfs::sim::{run_sweep, BerRecord, ChannelProfile, SweepConfig};
use otfs::C64;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn run(id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let in_time = took <= budget;
    let passed = v.passed && in_time;
    println!(
        "[{}] {id} {title}: {} | runtime {:.2}s (limit {}s){}",
        if passed { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " EXCEEDED" }
    );
    passed
}

fn c1_transceiver_exactness() -> Verdict {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom).unwrap();
    let qam = Constellation::qam(4).unwrap();
    let identity = DdChannel::from_paths(vec![ChannelPath { gain: C64::new(1.0, 0.0), delay: 0, doppler: 0 }]).unwrap();
    let mut rng = trial_rng(101, 0);
    let mut worst: f64 = 0.0;
    let mut bit_mismatch = 0;
    for _ in 0..100 {
        let bits: Vec<bool> = (0..geom.frame_len() * qam.bits_per_symbol()).map(|_| rng.random()).collect();
        let x = DdFrame::from_vec(&geom, &qam.map_bits(&bits).unwrap()).unwrap();
        let s = modem.modulate(&x).unwrap();
        let r = apply_channel_scalar(&geom, &identity, s.as_slice(), &mut rng, 0.0).unwrap();
        let y = modem.demodulate(r.as_slice()).unwrap();
        worst = worst.max((y.to_vector() - x.to_vector()).norm());
        if qam.demap_hard(y.as_vec().iter().copied()) != bits {
            bit_mismatch += 1;
        }
    }
    verdict(
        worst <= 1e-10 && bit_mismatch == 0,
        format!("max ||y_DD - x_DD|| = {worst:.2e} (<= 1e-10), frames with bit errors = {bit_mismatch}"),
    )
}

fn c2_channel_equivalence() -> Verdict {
    let geom = OtfsGeometry::reference();
    let modem = Modem::rectangular(geom).unwrap();
    let qam = Constellation::qam(4).unwrap();
    let mut rng = trial_rng(102, 0);
    let mut worst_time: f64 = 0.0;
    let mut worst_dd: f64 = 0.0;
    for i in 0..100 {
        let p = [1, 6, 18][i % 3];
        let ch = sample_channel(&mut rng, p, 6, 3).unwrap();
        let symbols: Vec<C64> = (0..84).map(|_| qam.points()[rng.random_range(0..4)]).collect();
        let x = DdFrame::from_vec(&geom, &symbols).unwrap();
        let s = modem.modulate(&x).unwrap();
        let h = build_time_channel(&geom, &ch).unwrap();
        let r = apply_channel_scalar(&geom, &ch, s.as_slice(), &mut rng, 0.0).unwrap();
        worst_time = worst_time.max((&r - &h * &s).norm() / s.norm());
        let through = modem.demodulate((&h * &s).as_slice()).unwrap().to_vector();
        let h_eff = modem.effective_channel(&h).unwrap();
        worst_dd = worst_dd.max((through - h_eff * x.to_vector()).norm());
    }
    verdict(
        worst_time <= 1e-10 && worst_dd <= 1e-10,
        format!(
            "max ||r_scalar - H s|| / ||s|| = {worst_time:.2e}, max ||demod(H mod(x)) - H_eff x|| = {worst_dd:.2e} (both <= 1e-10)"
        ),
    )
}

fn find<'a>(records: &'a [BerRecord], det: DetectorKind, snr: f64) -> &'a BerRecord {
    records.iter().find(|r| r.detector == det.name() && r.snr_db == snr).expect("record present")
}

fn c3_ml_proximity() -> Verdict {
    let cfg = SweepConfig {
        geometry: OtfsGeometry::new(2, 2, 15e3, 1).unwrap(),
        order: 4,
        detectors: vec![DetectorKind::BpicDsc, DetectorKind::Mmse, DetectorKind::Ml],
        snr_db: vec![20.0],
        profile: ChannelProfile { paths: 2, l_max: 1, k_max: 1 },
        max_frames: 10_000,
        min_errors: u64::MAX,
        master_seed: 103,
        ..SweepConfig::reference(2, 1)
    };
    let rec = run_sweep(&cfg).unwrap();
    let b = find(&rec, DetectorKind::BpicDsc, 20.0);
    let m = find(&rec, DetectorKind::Mmse, 20.0);
    let ml = find(&rec, DetectorKind::Ml, 20.0);
    let same_frames = b.frames == 10_000 && m.frames == 10_000 && ml.frames == 10_000;
    verdict(
        same_frames && b.ber <= 2.0 * ml.ber && b.ber <= m.ber && ml.ber <= m.ber,
        format!(
            "BER b-pic-dsc {:.3e}, ml {:.3e}, mmse {:.3e} over {} shared frames; ratio b-pic-dsc/ml = {:.2} (<= 2)",
            b.ber,
            ml.ber,
            m.ber,
            b.frames,
            b.ber / ml.ber
        ),
    )
}

fn c4_reference_scale() -> Verdict {
    let mut cfg = SweepConfig::reference(14, 3);
    cfg.detectors = vec![DetectorKind::BpicDsc];
    cfg.snr_db = vec![16.0];
    cfg.max_frames = 20_000;
    cfg.min_errors = u64::MAX;
    cfg.master_seed = 104;
    assert_eq!(cfg.detector.t_max, 10);
    assert_eq!(cfg.detector.zeta, 1e-4);
    assert_eq!(cfg.detector.init_mode, InitMode::FullMmse);
    assert_eq!(cfg.geometry, OtfsGeometry::reference());
    let rec = run_sweep(&cfg).unwrap();
    let b = &rec[0];
    verdict(
        b.frames >= 20_000 && b.ber < 1e-4,
        format!(
            "P=14 k_max=3 @16 dB: {} errors / {} bits, BER {:.3e} (< 1e-4), mean iterations {:.2}",
            b.bit_errors, b.bits, b.ber, b.mean_iterations
        ),
    )
}

fn c5_sweep() -> Vec<(ChannelProfile, Vec<BerRecord>)> {
    let mut out = Vec::new();
    for (paths, k_max) in [(6, 1), (6, 3), (14, 1), (14, 3)] {
        let mut cfg = SweepConfig::reference(paths, k_max);
        cfg.snr_db = vec![8.0, 12.0, 16.0];
        cfg.min_errors = 400;
        cfg.max_frames = 50_000;
        cfg.master_seed = 105;
        out.push((cfg.profile, run_sweep(&cfg).unwrap()));
    }
    out
}

fn c5_ordering(sweep: &[(ChannelProfile, Vec<BerRecord>)]) -> Verdict {
    let mut ok = true;
    let mut cells = Vec::new();
    for (p, rec) in sweep {
        for snr in [8.0, 12.0, 16.0] {
            let b = find(rec, DetectorKind::BpicDsc, snr);
            let m = find(rec, DetectorKind::Mmse, snr);
            let stop_ok = |r: &BerRecord| r.bit_errors >= 400 || r.frames == 50_000;
            ok &= b.ber <= m.ber && stop_ok(b) && stop_ok(m);
            cells.push(format!("P{}k{}@{}: {:.1e}<={:.1e}", p.paths, p.k_max, snr, b.ber, m.ber));
        }
    }
    verdict(ok, format!("b-pic-dsc vs mmse BER per cell [{}]", cells.join(", ")))
}

fn c6_iterations(sweep: &[(ChannelProfile, Vec<BerRecord>)]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, rec) in sweep {
        ok &= rec.iter().all(|r| r.mean_iterations <= 10.0);
        let lo = find(rec, DetectorKind::BpicDsc, 8.0).mean_iterations;
        let hi = find(rec, DetectorKind::BpicDsc, 16.0).mean_iterations;
        ok &= hi < lo;
        parts.push(format!("P{}k{}: {:.2} @8dB -> {:.2} @16dB", p.paths, p.k_max, lo, hi));
    }
    verdict(ok, format!("mean iterations <= 10 everywhere; [{}]", parts.join(", ")))
}

fn c7_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run_cli = |workers: &str, sub: &str| -> Vec<(String, Vec<u8>)> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_otfs"))
            .args(["sweep", "--seed", "107", "--paths", "6,14", "--kmax", "1,3", "--snr", "4,10"])
            .args(["--frames", "400", "--min-errors", "200", "--output"])
            .arg(&out)
            .env("OTFS_WORKERS", workers)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let a = run_cli("1", "a");
    let b = run_cli("1", "b");
    let c = run_cli("8", "c");
    verdict(
        a.len() == 4 && a == b && a == c,
        format!("{} CSV files; repeat run identical: {}; 1 vs 8 workers identical: {}", a.len(), a == b, a == c),
    )
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let mut all = true;
    all &= run("C1", "transceiver exactness", s(1), c1_transceiver_exactness);
    all &= run("C2", "channel-model equivalence", s(5), c2_channel_equivalence);
    all &= run("C3", "small-instance ML proximity", s(60), c3_ml_proximity);
    all &= run("C4", "reference-scale BER (P=14, k_max=3, 16 dB)", s(600), c4_reference_scale);

    let mut sweep = Vec::new();
    all &= run("C5", "relative ordering b-pic-dsc <= mmse", s(1800), || {
        sweep = c5_sweep();
        c5_ordering(&sweep)
    });
    all &= run("C6", "iteration accounting", s(1), || c6_iterations(&sweep));
    all &= run("C7", "sweep determinism across runs and workers", s(120), c7_determinism);

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
