//! Monte Carlo BER engine.
//!
//! One trial is one OTFS frame: random bits, a fresh channel draw and fresh
//! noise, all taken from the trial's own RNG stream (see [`crate::rng`]).
//! Every detector in a cell sees the same realisations. Trials run on a rayon
//! pool in fixed-size batches; the stop rule is checked between batches, so
//! the set of trials behind each record depends only on the configuration and
//! the master seed, never on the worker count.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use tempfile::NamedTempFile;

use crate::channel::{apply_channel_scalar, build_time_channel, sample_channel};
use crate::constellation::Constellation;
use crate::detect::{bpic_dsc_detect_observed, DetectorConfig, DetectorKind, DetectorState};
use crate::linalg::{CMatrix, CVector};
use crate::modem::{DdFrame, Modem, OtfsGeometry};
use crate::rng::trial_rng;
use crate::{Error, Result};

pub mod config;

/// Trials evaluated between two stop-rule checks.
pub const BATCH_TRIALS: u64 = 200;

/// Largest tolerated fraction of failed trials in a cell.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Per-symbol SNR to noise variance for unit-energy symbols and unit mean
/// channel power.
pub fn snr_to_noise_var(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChannelProfile {
    pub paths: usize,
    pub l_max: usize,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub geometry: OtfsGeometry,
    pub order: usize,
    pub detectors: Vec<DetectorKind>,
    pub snr_db: Vec<f64>,
    pub profile: ChannelProfile,
    /// Frame cap per cell.
    pub max_frames: u64,
    /// A detector stops once it has accumulated this many bit errors.
    pub min_errors: u64,
    pub master_seed: u64,
    pub detector: DetectorConfig,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    /// Record detector wall time; off keeps the CSV byte-reproducible.
    pub timing: bool,
}

impl SweepConfig {
    /// 12 x 7 frame, 15 kHz, 4-QAM, delays up to 6 bins.
    pub fn reference(paths: usize, k_max: usize) -> Self {
        SweepConfig {
            geometry: OtfsGeometry::reference(),
            order: 4,
            detectors: vec![DetectorKind::BpicDsc, DetectorKind::Mmse],
            snr_db: vec![0.0, 4.0, 8.0, 12.0, 16.0],
            profile: ChannelProfile { paths, l_max: 6, k_max },
            max_frames: 50_000,
            min_errors: 400,
            master_seed: 0,
            detector: DetectorConfig::default(),
            workers: None,
            output: None,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_frames == 0 {
            return Err(Error::invalid("frames per point must be at least 1"));
        }
        if self.snr_db.is_empty() {
            return Err(Error::invalid("SNR list is empty"));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("SNR {s} dB is not finite")));
        }
        if self.detectors.is_empty() {
            return Err(Error::invalid("no detectors selected"));
        }
        if self.profile.paths == 0 || self.profile.l_max == 0 {
            return Err(Error::invalid("channel needs at least one path and l_max >= 1"));
        }
        if self.profile.l_max != self.geometry.n_cp {
            return Err(Error::invalid(format!(
                "cyclic prefix ({}) must equal the maximum delay index ({})",
                self.geometry.n_cp, self.profile.l_max
            )));
        }
        Constellation::qam(self.order)?;
        if self.workers == Some(0) {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        self.detector.validate()
    }

    pub fn noise_var(&self, snr_db: f64) -> f64 {
        snr_to_noise_var(snr_db)
    }
}

/// One `(detector, SNR)` measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct BerRecord {
    pub detector: String,
    pub snr_db: f64,
    /// Frames detected without failure.
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_iterations: f64,
    pub failed_trials: u64,
    pub wall_seconds: f64,
}

impl BerRecord {
    pub const CSV_HEADER: &'static str =
        "detector,snr_db,frames,bits,bit_errors,ber,mean_iterations,failed_trials,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6e},{:.4},{},{:.3}",
            self.detector,
            self.snr_db,
            self.frames,
            self.bits,
            self.bit_errors,
            self.ber,
            self.mean_iterations,
            self.failed_trials,
            self.wall_seconds
        )
    }
}

pub fn format_csv(records: &[BerRecord]) -> String {
    let mut out = String::from(BerRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Where a failed trial broke down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FailurePoint {
    pub trial: u64,
    pub iteration: usize,
    pub index: usize,
}

/// Result of one detector on one frame.
#[derive(Clone, Debug, PartialEq)]
pub enum FrameOutcome {
    Detected { bits: u64, bit_errors: u64, iterations: usize, seconds: f64 },
    Failed(FailurePoint),
}

#[derive(Clone, Debug, Default)]
struct CellTally {
    frames: u64,
    bits: u64,
    bit_errors: u64,
    iterations: u64,
    failed: u64,
    first_failure: Option<FailurePoint>,
    seconds: f64,
}

impl CellTally {
    fn add(&mut self, outcome: &FrameOutcome) {
        match *outcome {
            FrameOutcome::Detected { bits, bit_errors, iterations, seconds } => {
                self.frames += 1;
                self.bits += bits;
                self.bit_errors += bit_errors;
                self.iterations += iterations as u64;
                self.seconds += seconds;
            }
            FrameOutcome::Failed(p) => {
                self.failed += 1;
                self.first_failure = Some(self.first_failure.map_or(p, |q| q.min(p)));
            }
        }
    }

    fn merge(mut self, other: CellTally) -> CellTally {
        self.frames += other.frames;
        self.bits += other.bits;
        self.bit_errors += other.bit_errors;
        self.iterations += other.iterations;
        self.seconds += other.seconds;
        self.failed += other.failed;
        self.first_failure = match (self.first_failure, other.first_failure) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }

    fn record(&self, detector: DetectorKind, snr_db: f64, timing: bool) -> BerRecord {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        BerRecord {
            detector: detector.name().to_string(),
            snr_db,
            frames: self.frames,
            bits: self.bits,
            bit_errors: self.bit_errors,
            ber: ratio(self.bit_errors, self.bits),
            mean_iterations: ratio(self.iterations, self.frames),
            failed_trials: self.failed,
            wall_seconds: if timing { self.seconds } else { 0.0 },
        }
    }
}

/// Everything one frame needs after the transmitter and channel ran.
pub struct FrameRealisation {
    pub tx_bits: Vec<bool>,
    pub y: CVector,
    pub h_eff: CMatrix,
    pub sigma2: f64,
}

/// Monte Carlo runner for one configuration.
pub struct Simulator {
    cfg: SweepConfig,
    modem: Modem,
    constellation: Constellation,
}

impl Simulator {
    pub fn new(cfg: SweepConfig) -> Result<Self> {
        cfg.validate()?;
        let modem = Modem::rectangular(cfg.geometry)?;
        let constellation = Constellation::qam(cfg.order)?;
        Ok(Simulator { cfg, modem, constellation })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Transmits one random frame through one random channel.
    pub fn realise(&self, snr_db: f64, trial_index: u64) -> Result<FrameRealisation> {
        let geom = &self.cfg.geometry;
        let p = &self.cfg.profile;
        let mut rng = trial_rng(self.cfg.master_seed, trial_index);
        let nbits = geom.frame_len() * self.constellation.bits_per_symbol();
        let tx_bits: Vec<bool> = (0..nbits).map(|_| rng.random()).collect();
        let symbols = self.constellation.map_bits(&tx_bits)?;
        let s = self.modem.modulate(&DdFrame::from_vec(geom, &symbols)?)?;
        let ch = sample_channel(&mut rng, p.paths, p.l_max, p.k_max)?;
        let sigma2 = self.cfg.noise_var(snr_db);
        let r = apply_channel_scalar(geom, &ch, s.as_slice(), &mut rng, sigma2)?;
        let y = self.modem.demodulate(r.as_slice())?.to_vector();
        let h_eff = self.modem.effective_channel(&build_time_channel(geom, &ch)?)?;
        Ok(FrameRealisation { tx_bits, y, h_eff, sigma2 })
    }

    /// Runs every listed detector on trial `trial_index`.
    pub fn run_trial(&self, snr_db: f64, detectors: &[DetectorKind], trial_index: u64) -> Result<Vec<FrameOutcome>> {
        let f = self.realise(snr_db, trial_index)?;
        Ok(detectors
            .iter()
            .map(|d| {
                let start = Instant::now();
                let res = d.detect(&f.y, &f.h_eff, f.sigma2, &self.constellation, &self.cfg.detector);
                let seconds = start.elapsed().as_secs_f64();
                match res {
                    Ok(r) => FrameOutcome::Detected {
                        bits: f.tx_bits.len() as u64,
                        bit_errors: r.bits.iter().zip(&f.tx_bits).filter(|(a, b)| a != b).count() as u64,
                        iterations: r.iterations,
                        seconds,
                    },
                    Err(e) => {
                        let (iteration, index) = match e {
                            Error::NumericalFailure { iteration, index } => (iteration, index),
                            Error::DegenerateColumn(q) => (0, q),
                            _ => (0, 0),
                        };
                        FrameOutcome::Failed(FailurePoint { trial: trial_index, iteration, index })
                    }
                }
            })
            .collect())
    }

    /// Per-iteration B-PIC-DSC states for one trial.
    pub fn trace_trial(&self, snr_db: f64, trial_index: u64) -> Result<Vec<DetectorState>> {
        let f = self.realise(snr_db, trial_index)?;
        let mut states = Vec::new();
        bpic_dsc_detect_observed(&f.y, &f.h_eff, f.sigma2, &self.constellation, &self.cfg.detector, |s| {
            states.push(s.clone())
        })?;
        Ok(states)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }

    fn run_cell(&self, pool: &rayon::ThreadPool, snr_db: f64) -> Result<Vec<BerRecord>> {
        let all = &self.cfg.detectors;
        let mut tallies = vec![CellTally::default(); all.len()];
        let mut active: Vec<usize> = (0..all.len()).collect();
        let mut next = 0u64;
        while !active.is_empty() && next < self.cfg.max_frames {
            let end = (next + BATCH_TRIALS).min(self.cfg.max_frames);
            let kinds: Vec<DetectorKind> = active.iter().map(|&i| all[i]).collect();
            let zero = || vec![CellTally::default(); kinds.len()];
            let batch = pool.install(|| {
                (next..end)
                    .into_par_iter()
                    .map(|t| self.run_trial(snr_db, &kinds, t))
                    .try_fold(zero, |mut acc, outcomes| {
                        for (a, o) in acc.iter_mut().zip(&outcomes?) {
                            a.add(o);
                        }
                        Ok::<_, Error>(acc)
                    })
                    .try_reduce(zero, |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()))
            })?;
            for (&i, part) in active.iter().zip(batch) {
                tallies[i] = std::mem::take(&mut tallies[i]).merge(part);
            }
            active.retain(|&i| tallies[i].bit_errors < self.cfg.min_errors);
            next = end;
        }
        let mut records = Vec::with_capacity(all.len());
        for (d, t) in all.iter().zip(&tallies) {
            let attempted = t.frames + t.failed;
            if t.failed as f64 > MAX_FAILURE_RATE * attempted as f64 {
                let p = t.first_failure.expect("failures recorded");
                return Err(Error::TrialFailures {
                    detector: d.name().to_string(),
                    snr_db,
                    failed: t.failed,
                    trial: p.trial,
                    iteration: p.iteration,
                    index: p.index,
                });
            }
            records.push(t.record(*d, snr_db, self.cfg.timing));
        }
        Ok(records)
    }

    /// All `(detector, SNR)` cells, ordered by SNR then detector.
    pub fn run(&self) -> Result<Vec<BerRecord>> {
        let pool = self.pool()?;
        let mut out = Vec::new();
        for &snr in &self.cfg.snr_db {
            out.extend(self.run_cell(&pool, snr)?);
        }
        Ok(out)
    }
}

/// Runs the whole sweep and, if an output path is set, writes the CSV
/// atomically. The output location is opened before any trial runs.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>> {
    let pending = cfg.output.as_deref().map(PendingCsv::create).transpose()?;
    let records = Simulator::new(cfg.clone())?.run()?;
    if let Some(p) = pending {
        p.commit(&format_csv(&records))?;
    }
    Ok(records)
}

/// Temp file next to the destination, renamed into place on commit.
pub struct PendingCsv {
    tmp: NamedTempFile,
    dest: PathBuf,
}

impl PendingCsv {
    pub fn create(dest: &Path) -> Result<Self> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir)?;
        Ok(PendingCsv { tmp, dest: dest.to_path_buf() })
    }

    pub fn commit(mut self, content: &str) -> Result<()> {
        self.tmp.write_all(content.as_bytes())?;
        self.tmp.flush()?;
        self.tmp.persist(&self.dest).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

pub fn write_csv(path: &Path, records: &[BerRecord]) -> Result<()> {
    PendingCsv::create(path)?.commit(&format_csv(records))
}
