//! Disk cache for benchmark prices.
//!
//! Entries are keyed by the full benchmark identity (model, parameters,
//! perturbations, cell coordinates, oracle and its settings), hashed into a
//! file name; the plain-text key is stored inside the file and re-checked on
//! load so hash collisions cannot silently cross-feed values.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rhoseries::oracles::{BenchmarkPrice, BenchmarkSource};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    key: String,
    value: f64,
    stderr: f64,
    source: String,
}

fn source_from_str(s: &str) -> Option<BenchmarkSource> {
    match s {
        "analytic_cf" => Some(BenchmarkSource::AnalyticCf),
        "highres_mc" => Some(BenchmarkSource::HighresMc),
        "closed_form_bs" => Some(BenchmarkSource::ClosedFormBs),
        _ => None,
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// File-backed benchmark store. With `refresh` set, reads are skipped and
/// every benchmark is recomputed (and re-stored).
#[derive(Debug, Clone)]
pub struct BenchmarkCache {
    dir: PathBuf,
    refresh: bool,
}

impl BenchmarkCache {
    pub fn new(dir: PathBuf, refresh: bool) -> Result<Self> {
        fs::create_dir_all(&dir)
            .with_context(|| format!("cannot create cache dir {}", dir.display()))?;
        Ok(Self { dir, refresh })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{:016x}.json", fnv1a64(key)))
    }

    pub fn load(&self, key: &str) -> Option<BenchmarkPrice> {
        if self.refresh {
            return None;
        }
        let text = fs::read_to_string(self.path_for(key)).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        if entry.key != key {
            return None;
        }
        Some(BenchmarkPrice {
            value: entry.value,
            stderr: entry.stderr,
            source: source_from_str(&entry.source)?,
        })
    }

    pub fn store(&self, key: &str, price: &BenchmarkPrice) -> Result<()> {
        let entry = Entry {
            key: key.to_string(),
            value: price.value,
            stderr: price.stderr,
            source: price.source.as_str().to_string(),
        };
        let path = self.path_for(key);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string(&entry)?)
            .with_context(|| format!("cannot write cache entry {}", tmp.display()))?;
        fs::rename(&tmp, &path)
            .with_context(|| format!("cannot move cache entry into {}", path.display()))?;
        Ok(())
    }

    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<BenchmarkPrice>
    where
        F: FnOnce() -> Result<BenchmarkPrice>,
    {
        if let Some(hit) = self.load(key) {
            return Ok(hit);
        }
        let price = compute()?;
        self.store(key, &price)?;
        Ok(price)
    }
}
