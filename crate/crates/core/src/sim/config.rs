//! Plain-text `key = value` configuration for the CLI.
//!
//! Lines are `key = value`; `#` starts a comment. Every key can also be given
//! on the command line as `--key` (underscores become dashes). List-valued
//! keys take comma-separated values.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use super::{ChannelProfile, SweepConfig};
use crate::detect::{DetectorConfig, DetectorKind, InitMode};
use crate::modem::OtfsGeometry;
use crate::{Error, Result};

/// Recognised keys.
pub const KEYS: &[&str] = &[
    "delay_bins",
    "doppler_bins",
    "delta_f",
    "order",
    "detectors",
    "snr",
    "paths",
    "lmax",
    "kmax",
    "frames",
    "min_errors",
    "seed",
    "t_max",
    "zeta",
    "init",
    "timing",
    "output",
];

/// Raw key/value pairs, later sources overriding earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            kv.set(k.trim(), v.trim())?;
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.0.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn override_with(&mut self, other: &KeyValues) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    fn scalar<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("bad value for {key}: {v:?}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>> {
        let raw = self.get(key).unwrap_or(default);
        let items: Result<Vec<T>> = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Config(format!("bad entry in {key}: {s:?}"))))
            .collect();
        let items = items?;
        if items.is_empty() {
            return Err(Error::Config(format!("{key} is empty")));
        }
        Ok(items)
    }
}

/// A sweep grid: one [`SweepConfig`] per channel profile.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub base: SweepConfig,
    pub paths: Vec<usize>,
    pub k_max: Vec<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl SweepPlan {
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        let l_max: usize = kv.scalar("lmax", 6)?;
        let geometry = OtfsGeometry::new(
            kv.scalar("delay_bins", 12)?,
            kv.scalar("doppler_bins", 7)?,
            kv.scalar("delta_f", 15e3)?,
            l_max,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let init = match kv.get("init") {
            None => InitMode::FullMmse,
            Some(v) => InitMode::from_str(v).map_err(|e| Error::Config(e.to_string()))?,
        };
        let detector = DetectorConfig {
            t_max: kv.scalar("t_max", 10)?,
            zeta: kv.scalar("zeta", 1e-4)?,
            init_mode: init,
        };
        let detectors = kv
            .list::<String>("detectors", "bpic-dsc,mmse")?
            .iter()
            .map(|s| DetectorKind::from_str(s).map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let paths: Vec<usize> = kv.list("paths", "14")?;
        let k_max: Vec<usize> = kv.list("kmax", "3")?;
        let seed = kv.get("seed").map(|_| kv.scalar("seed", 0u64)).transpose()?;
        let base = SweepConfig {
            geometry,
            order: kv.scalar("order", 4)?,
            detectors,
            snr_db: kv.list("snr", "0,4,8,12,16")?,
            profile: ChannelProfile { paths: paths[0], l_max, k_max: k_max[0] },
            max_frames: kv.scalar("frames", 50_000)?,
            min_errors: kv.scalar("min_errors", 400)?,
            master_seed: seed.unwrap_or(0),
            detector,
            workers: None,
            output: None,
            timing: kv.scalar("timing", false)?,
        };
        let plan = SweepPlan { base, paths, k_max, seed, output: kv.get("output").map(PathBuf::from) };
        for cfg in plan.configs() {
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(plan)
    }

    /// One configuration per `(paths, k_max)` pair, paths varying slowest.
    pub fn configs(&self) -> Vec<SweepConfig> {
        let mut out = Vec::new();
        for &p in &self.paths {
            for &k in &self.k_max {
                let mut c = self.base.clone();
                c.profile.paths = p;
                c.profile.k_max = k;
                out.push(c);
            }
        }
        out
    }
}

/// File name used by `sweep` for one channel profile.
pub fn profile_file_name(profile: &ChannelProfile) -> String {
    format!("ber_P{}_kmax{}.csv", profile.paths, profile.k_max)
}
