//! Persistent simulation cache keyed by content digests.
//!
//! The on-disk form is an append-only text file with one entry per line:
//! `key<TAB>ddc-bits<TAB>failed`, where `ddc-bits` is the IEEE-754 bit
//! pattern in hex so values round-trip exactly.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use crate::catchment::Catchment;
use crate::error::{Error, Result};
use crate::flood::{Boundary, FloodParams};
use crate::genome::Genome;
use crate::risk::DamageCurves;
use crate::storm::DesignStorm;

const HEADER: &str = "# bluegreen simulation cache v1";

/// Incremental SHA-256 over typed fields.
#[derive(Default)]
pub struct ContentHasher(Sha256);

impl ContentHasher {
    pub fn new(domain: &str) -> Self {
        let mut h = ContentHasher(Sha256::new());
        h.str(domain);
        h
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.0.update(s.as_bytes());
        self
    }

    pub fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of everything that affects a simulated damage besides the storm and genome.
pub fn scenario_digest(catchment: &Catchment, curves: &DamageCurves, flood: &FloodParams) -> [u8; 32] {
    let mut h = ContentHasher::new("scenario");
    let g = &catchment.grid;
    h.u64(g.ncols as u64).u64(g.nrows as u64).f64(g.xll).f64(g.yll).f64(g.cellsize);
    for &z in &catchment.elevation {
        h.f64(z);
    }
    for &l in &catchment.land {
        h.u64(l as u64);
    }
    h.u64(catchment.buildings.len() as u64);
    for b in &catchment.buildings {
        h.str(&b.id).str(b.category.as_str()).f64(b.area);
        for ring in b.footprint.rings() {
            h.u64(ring.len() as u64);
            for p in ring {
                h.f64(p[0]).f64(p[1]);
            }
        }
    }
    h.u64(catchment.zones.len() as u64);
    for z in &catchment.zones {
        h.u64(z.index as u64).u64(z.cells.len() as u64);
        for &c in &z.cells {
            h.u64(c as u64);
        }
    }
    for curve in [&curves.residential, &curves.non_residential] {
        h.u64(curve.points().len() as u64);
        for &(d, v) in curve.points() {
            h.f64(d).f64(v);
        }
    }
    let f = flood;
    for v in [
        f.manning_impervious,
        f.manning_green,
        f.manning_permeable,
        f.infil_green,
        f.infil_permeable_active,
        f.infil_impervious,
        f.cfl_alpha,
        f.dt_min,
        f.dt_max,
        f.settle_time,
        f.min_flow_depth,
    ] {
        h.f64(v);
    }
    h.u64(match f.boundary {
        Boundary::Closed => 0,
        Boundary::OpenAtEdges => 1,
    });
    h.finish()
}

pub fn storm_digest(storm: &DesignStorm) -> [u8; 32] {
    let mut h = ContentHasher::new("storm");
    h.u64(storm.steps.len() as u64);
    for s in &storm.steps {
        h.f64(s.duration_s).f64(s.intensity_mm_hr);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(scenario: &[u8; 32], storm: &[u8; 32], genome: &Genome) -> Self {
        let mut h = ContentHasher::new("candidate");
        h.0.update(scenario);
        h.0.update(storm);
        h.u64(genome.len() as u64).str(&genome.to_hex());
        CacheKey(to_hex(&h.finish()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedOutcome {
    pub ddc: f64,
    pub failed: bool,
}

/// Thread-safe memo of simulated damages, optionally backed by a file.
pub struct SimCache {
    map: RwLock<HashMap<CacheKey, CachedOutcome>>,
    file: Option<(PathBuf, Mutex<File>)>,
    hits: AtomicUsize,
}

impl SimCache {
    pub fn in_memory() -> Self {
        SimCache {
            map: RwLock::new(HashMap::new()),
            file: None,
            hits: AtomicUsize::new(0),
        }
    }

    /// Loads existing entries from `path` and appends new ones to it.
    /// A truncated trailing line from an interrupted run is skipped.
    pub fn open(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        let existing = match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(path, e)),
        };
        if let Some(text) = &existing {
            for (i, line) in text.lines().enumerate() {
                if line.starts_with('#') || line.is_empty() {
                    continue;
                }
                match parse_line(line) {
                    Some((k, v)) => {
                        map.insert(k, v);
                    }
                    None => log::warn!("{}: skipping malformed cache line {}", path.display(), i + 1),
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        match &existing {
            None => writeln!(file, "{HEADER}").map_err(|e| Error::io(path, e))?,
            Some(t) if !t.is_empty() && !t.ends_with('\n') => writeln!(file).map_err(|e| Error::io(path, e))?,
            Some(_) => {}
        }
        log::info!("simulation cache {}: {} entries", path.display(), map.len());
        Ok(SimCache {
            map: RwLock::new(map),
            file: Some((path.to_path_buf(), Mutex::new(file))),
            hits: AtomicUsize::new(0),
        })
    }

    pub fn get(&self, key: &CacheKey) -> Option<CachedOutcome> {
        let v = self.map.read().unwrap().get(key).copied();
        if v.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        v
    }

    pub fn insert(&self, key: CacheKey, value: CachedOutcome) -> Result<()> {
        let mut map = self.map.write().unwrap();
        if map.contains_key(&key) {
            return Ok(());
        }
        if let Some((path, file)) = &self.file {
            let mut f = file.lock().unwrap();
            writeln!(f, "{}\t{:016x}\t{}", key.0, value.ddc.to_bits(), u8::from(value.failed))
                .map_err(|e| Error::io(path, e))?;
        }
        map.insert(key, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }
}

fn parse_line(line: &str) -> Option<(CacheKey, CachedOutcome)> {
    let mut it = line.split('\t');
    let key = it.next()?;
    let bits = u64::from_str_radix(it.next()?, 16).ok()?;
    let failed = match it.next()? {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    if it.next().is_some() || key.len() != 64 || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    Some((
        CacheKey(key.to_string()),
        CachedOutcome {
            ddc: f64::from_bits(bits),
            failed,
        },
    ))
}
