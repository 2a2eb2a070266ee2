//! Run configuration read from an INI-style text file.
//!
//! Sections are `[name]` lines; entries are `key = value`. Lines starting
//! with `#` or `;` are comments. Unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::economics::CostParams;
use crate::error::{Error, Result};
use crate::flood::{Boundary, FloodParams};
use crate::nsga2::GaConfig;
use crate::storm::{DdfDescriptors, ProfileParams};

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "paths",
        &[
            "dem",
            "green",
            "buildings",
            "zones",
            "residential_curve",
            "non_residential_curve",
            "output_dir",
        ],
    ),
    ("storm", &["c", "d1", "e", "f", "profile_a", "profile_b", "duration_min", "steps"]),
    (
        "flood",
        &[
            "manning_impervious",
            "manning_green",
            "manning_permeable",
            "infil_green",
            "infil_permeable_active",
            "infil_impervious",
            "cfl_alpha",
            "dt_min",
            "dt_max",
            "settle_time",
            "boundary",
            "min_flow_depth",
        ],
    ),
    (
        "costs",
        &[
            "capital_per_m2",
            "operational_per_m2_yr",
            "inflation",
            "inflate_years",
            "lifespan_years",
        ],
    ),
    ("ead", &["return_periods"]),
    ("uplift", &["levels"]),
    ("ga", &["population", "generations", "crossover_rate", "mutation_rate", "seed"]),
    ("run", &["workers", "cache"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PathsConfig {
    pub dem: PathBuf,
    pub green: Option<PathBuf>,
    pub buildings: PathBuf,
    pub zones: PathBuf,
    pub residential_curve: PathBuf,
    pub non_residential_curve: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StormConfig {
    pub ddf: DdfDescriptors,
    pub profile: ProfileParams,
    pub duration_min: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub storm: StormConfig,
    pub flood: FloodParams,
    pub costs: CostParams,
    pub return_periods: Vec<f64>,
    pub uplifts: Vec<f64>,
    pub ga: GaConfig,
    pub workers: usize,
    pub cache: bool,
}

struct Entry {
    value: String,
    line: usize,
}

struct Sections(BTreeMap<(String, String), Entry>);

fn parse_sections(text: &str) -> Result<Sections> {
    let mut map = BTreeMap::new();
    let mut section: Option<&'static (&'static str, &'static [&'static str])> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        if let Some(name) = t.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("malformed section header '{t}'"),
                })?
                .trim()
                .to_ascii_lowercase();
            section = Some(SCHEMA.iter().find(|(s, _)| *s == name).ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown section [{name}]"),
            })?);
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected 'key = value', found '{t}'"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let (sec, keys) = section.ok_or_else(|| Error::Parse {
            line,
            msg: format!("key '{key}' appears before any section"),
        })?;
        if !keys.contains(&key.as_str()) {
            return Err(Error::Parse {
                line,
                msg: format!("unknown key '{key}' in [{sec}]"),
            });
        }
        let entry = Entry {
            value: value.trim().to_string(),
            line,
        };
        if let Some(prev) = map.insert((sec.to_string(), key.clone()), entry) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key '{key}' in [{sec}] (first on line {})", prev.line),
            });
        }
    }
    Ok(Sections(map))
}

impl Sections {
    fn raw(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.0.get(&(sec.to_string(), key.to_string()))
    }

    fn required(&self, sec: &str, key: &str) -> Result<&Entry> {
        self.raw(sec, key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}' in [{sec}]")))
    }

    fn parse_entry<T: std::str::FromStr>(e: &Entry, sec: &str, key: &str) -> Result<T> {
        e.value.parse().map_err(|_| Error::Parse {
            line: e.line,
            msg: format!("invalid value '{}' for {sec}.{key}", e.value),
        })
    }

    fn get<T: std::str::FromStr>(&self, sec: &str, key: &str, default: T) -> Result<T> {
        match self.raw(sec, key) {
            Some(e) => Self::parse_entry(e, sec, key),
            None => Ok(default),
        }
    }

    fn need<T: std::str::FromStr>(&self, sec: &str, key: &str) -> Result<T> {
        Self::parse_entry(self.required(sec, key)?, sec, key)
    }

    fn list(&self, sec: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let Some(e) = self.raw(sec, key) else {
            return Ok(default.to_vec());
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: e.line,
                    msg: format!("invalid number '{}' in {sec}.{key}", s.trim()),
                })
            })
            .collect()
    }

    fn path(&self, base: &Path, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.raw("paths", key).map(|e| base.join(&e.value)))
    }
}

fn parse_bool(e: &Entry, key: &str) -> Result<bool> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        v => Err(Error::Parse {
            line: e.line,
            msg: format!("invalid boolean '{v}' for run.{key}"),
        }),
    }
}

pub const DEFAULT_RETURN_PERIODS: [f64; 5] = [10.0, 20.0, 30.0, 50.0, 100.0];
pub const DEFAULT_UPLIFTS: [f64; 3] = [0.15, 0.30, 0.45];

impl RunConfig {
    /// Parses `text`, resolving relative paths against `base_dir`. Files are not checked.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let s = parse_sections(text)?;
        let need_path = |key: &str| {
            s.path(base_dir, key)?
                .ok_or_else(|| Error::Config(format!("missing required key '{key}' in [paths]")))
        };
        let paths = PathsConfig {
            dem: need_path("dem")?,
            green: s.path(base_dir, "green")?,
            buildings: need_path("buildings")?,
            zones: need_path("zones")?,
            residential_curve: need_path("residential_curve")?,
            non_residential_curve: need_path("non_residential_curve")?,
            output_dir: s.path(base_dir, "output_dir")?.unwrap_or_else(|| base_dir.join("out")),
        };

        let storm = StormConfig {
            ddf: DdfDescriptors::new(
                s.need("storm", "c")?,
                s.need("storm", "d1")?,
                s.need("storm", "e")?,
                s.need("storm", "f")?,
            )?,
            profile: ProfileParams::new(s.need("storm", "profile_a")?, s.need("storm", "profile_b")?)?,
            duration_min: s.need("storm", "duration_min")?,
            steps: s.need("storm", "steps")?,
        };
        if !(storm.duration_min > 0.0) {
            return Err(Error::Config("storm.duration_min must be positive".into()));
        }
        if storm.steps < 2 || !storm.steps.is_multiple_of(2) {
            return Err(Error::Config(format!("storm.steps {} must be even and at least 2", storm.steps)));
        }

        let d = FloodParams::default();
        let boundary = match s.raw("flood", "boundary").map(|e| (e.value.to_ascii_lowercase(), e.line)) {
            None => d.boundary,
            Some((v, _)) if v == "closed" => Boundary::Closed,
            Some((v, _)) if v == "open" => Boundary::OpenAtEdges,
            Some((v, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("flood.boundary must be 'closed' or 'open', found '{v}'"),
                })
            }
        };
        let flood = FloodParams {
            manning_impervious: s.get("flood", "manning_impervious", d.manning_impervious)?,
            manning_green: s.get("flood", "manning_green", d.manning_green)?,
            manning_permeable: s.get("flood", "manning_permeable", d.manning_permeable)?,
            infil_green: s.get("flood", "infil_green", d.infil_green)?,
            infil_permeable_active: s.get("flood", "infil_permeable_active", d.infil_permeable_active)?,
            infil_impervious: s.get("flood", "infil_impervious", d.infil_impervious)?,
            cfl_alpha: s.get("flood", "cfl_alpha", d.cfl_alpha)?,
            dt_min: s.get("flood", "dt_min", d.dt_min)?,
            dt_max: s.get("flood", "dt_max", d.dt_max)?,
            settle_time: s.get("flood", "settle_time", d.settle_time)?,
            boundary,
            min_flow_depth: s.get("flood", "min_flow_depth", d.min_flow_depth)?,
        };
        flood.validate()?;

        let c = CostParams::default();
        let costs = CostParams {
            capital_per_m2: s.get("costs", "capital_per_m2", c.capital_per_m2)?,
            operational_per_m2_yr: s.get("costs", "operational_per_m2_yr", c.operational_per_m2_yr)?,
            inflation: s.get("costs", "inflation", c.inflation)?,
            inflate_years: s.get("costs", "inflate_years", c.inflate_years)?,
            lifespan_years: s.get("costs", "lifespan_years", c.lifespan_years)?,
        };
        costs.validate()?;

        let return_periods = s.list("ead", "return_periods", &DEFAULT_RETURN_PERIODS)?;
        if return_periods.is_empty() || return_periods.iter().any(|t| !(*t > 1.0)) {
            return Err(Error::Config("ead.return_periods must all exceed 1 year".into()));
        }
        if return_periods.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("ead.return_periods must be strictly ascending".into()));
        }
        let uplifts = s.list("uplift", "levels", &DEFAULT_UPLIFTS)?;
        if uplifts.iter().any(|u| !(*u > -1.0) || !u.is_finite()) {
            return Err(Error::Config("uplift.levels must be finite and above -1".into()));
        }

        let g = GaConfig::default();
        let mutation_rate = match s.raw("ga", "mutation_rate") {
            None => None,
            Some(e) if e.value.eq_ignore_ascii_case("auto") => None,
            Some(e) => Some(Sections::parse_entry(e, "ga", "mutation_rate")?),
        };
        let ga = GaConfig {
            population: s.get("ga", "population", g.population)?,
            generations: s.get("ga", "generations", g.generations)?,
            crossover_rate: s.get("ga", "crossover_rate", g.crossover_rate)?,
            mutation_rate,
            seed: s.get("ga", "seed", g.seed)?,
        };
        ga.validate()?;

        let workers: usize = s.get("run", "workers", 1)?;
        if workers == 0 {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        let cache = match s.raw("run", "cache") {
            Some(e) => parse_bool(e, "cache")?,
            None => true,
        };

        Ok(RunConfig {
            paths,
            storm,
            flood,
            costs,
            return_periods,
            uplifts,
            ga,
            workers,
            cache,
        })
    }

    /// Reads and parses `path`, then checks that every input file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.check_inputs()?;
        Ok(cfg)
    }

    pub fn check_inputs(&self) -> Result<()> {
        let p = &self.paths;
        let files = [
            Some(&p.dem),
            p.green.as_ref(),
            Some(&p.buildings),
            Some(&p.zones),
            Some(&p.residential_curve),
            Some(&p.non_residential_curve),
        ];
        for f in files.into_iter().flatten() {
            if !f.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", f.display())));
            }
        }
        Ok(())
    }

    /// Renders the configuration with paths written relative to `base_dir` where possible.
    pub fn to_ini(&self, base_dir: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base_dir).unwrap_or(p).display().to_string();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let p = &self.paths;
        let mut s = String::new();
        let _ = writeln!(s, "[paths]");
        let _ = writeln!(s, "dem = {}", rel(&p.dem));
        if let Some(g) = &p.green {
            let _ = writeln!(s, "green = {}", rel(g));
        }
        let _ = writeln!(s, "buildings = {}", rel(&p.buildings));
        let _ = writeln!(s, "zones = {}", rel(&p.zones));
        let _ = writeln!(s, "residential_curve = {}", rel(&p.residential_curve));
        let _ = writeln!(s, "non_residential_curve = {}", rel(&p.non_residential_curve));
        let _ = writeln!(s, "output_dir = {}", rel(&p.output_dir));
        let st = &self.storm;
        let _ = writeln!(s, "\n[storm]");
        let _ = writeln!(s, "c = {}\nd1 = {}\ne = {}\nf = {}", st.ddf.c, st.ddf.d1, st.ddf.e, st.ddf.f);
        let _ = writeln!(s, "profile_a = {}\nprofile_b = {}", st.profile.a, st.profile.b);
        let _ = writeln!(s, "duration_min = {}\nsteps = {}", st.duration_min, st.steps);
        let f = &self.flood;
        let _ = writeln!(s, "\n[flood]");
        let _ = writeln!(s, "manning_impervious = {}", f.manning_impervious);
        let _ = writeln!(s, "manning_green = {}", f.manning_green);
        let _ = writeln!(s, "manning_permeable = {}", f.manning_permeable);
        let _ = writeln!(s, "infil_green = {}", f.infil_green);
        let _ = writeln!(s, "infil_permeable_active = {}", f.infil_permeable_active);
        let _ = writeln!(s, "infil_impervious = {}", f.infil_impervious);
        let _ = writeln!(s, "cfl_alpha = {}", f.cfl_alpha);
        let _ = writeln!(s, "dt_min = {}\ndt_max = {}", f.dt_min, f.dt_max);
        let _ = writeln!(s, "settle_time = {}", f.settle_time);
        let b = match f.boundary {
            Boundary::Closed => "closed",
            Boundary::OpenAtEdges => "open",
        };
        let _ = writeln!(s, "boundary = {b}");
        let _ = writeln!(s, "min_flow_depth = {}", f.min_flow_depth);
        let c = &self.costs;
        let _ = writeln!(s, "\n[costs]");
        let _ = writeln!(s, "capital_per_m2 = {}", c.capital_per_m2);
        let _ = writeln!(s, "operational_per_m2_yr = {}", c.operational_per_m2_yr);
        let _ = writeln!(s, "inflation = {}", c.inflation);
        let _ = writeln!(s, "inflate_years = {}", c.inflate_years);
        let _ = writeln!(s, "lifespan_years = {}", c.lifespan_years);
        let _ = writeln!(s, "\n[ead]\nreturn_periods = {}", list(&self.return_periods));
        let _ = writeln!(s, "\n[uplift]\nlevels = {}", list(&self.uplifts));
        let g = &self.ga;
        let _ = writeln!(s, "\n[ga]");
        let _ = writeln!(s, "population = {}\ngenerations = {}", g.population, g.generations);
        let _ = writeln!(s, "crossover_rate = {}", g.crossover_rate);
        match g.mutation_rate {
            Some(m) => {
                let _ = writeln!(s, "mutation_rate = {m}");
            }
            None => {
                let _ = writeln!(s, "mutation_rate = auto");
            }
        }
        let _ = writeln!(s, "seed = {}", g.seed);
        let _ = writeln!(s, "\n[run]\nworkers = {}\ncache = {}", self.workers, self.cache);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# comment
[paths]
dem = dem.asc
buildings = b.geojson
zones = z.geojson
residential_curve = r.csv
non_residential_curve = n.csv

[storm]
c = -0.02
d1 = 0.35
e = 0.28
f = 2.2
profile_a = 0.1
profile_b = 0.8
duration_min = 60
steps = 12
";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.paths.dem, PathBuf::from("/data/dem.asc"));
        assert_eq!(cfg.paths.output_dir, PathBuf::from("/data/out"));
        assert!(cfg.paths.green.is_none());
        assert_eq!(cfg.return_periods, DEFAULT_RETURN_PERIODS.to_vec());
        assert_eq!(cfg.uplifts, DEFAULT_UPLIFTS.to_vec());
        assert_eq!(cfg.flood, FloodParams::default());
        assert_eq!(cfg.costs, CostParams::default());
        assert_eq!(cfg.ga, GaConfig::default());
        assert_eq!((cfg.workers, cfg.cache), (1, true));
        assert_eq!(cfg.storm.steps, 12);
    }

    #[test]
    fn round_trips_through_text() {
        let mut text = MINIMAL.to_string();
        text.push_str("[flood]\nboundary = open\nsettle_time = 600\n[ga]\nmutation_rate = 0.05\nseed = 9\n[run]\nworkers = 3\ncache = no\n[ead]\nreturn_periods = 2, 5.5, 10\n");
        let cfg = RunConfig::parse(&text, Path::new("/x")).unwrap();
        assert_eq!(cfg.flood.boundary, Boundary::OpenAtEdges);
        assert_eq!(cfg.ga.mutation_rate, Some(0.05));
        assert_eq!((cfg.workers, cfg.cache), (3, false));
        let again = RunConfig::parse(&cfg.to_ini(Path::new("/x")), Path::new("/x")).unwrap();
        assert_eq!(cfg, again);
    }

    fn err_of(extra: &str) -> String {
        RunConfig::parse(&format!("{MINIMAL}{extra}"), Path::new(".")).unwrap_err().to_string()
    }

    #[test]
    fn unknown_and_malformed_entries_rejected() {
        assert!(err_of("[storm]\nc = 1\n").contains("duplicate"));
        assert!(err_of("[flood]\nmanning = 0.1\n").contains("unknown key"));
        assert!(err_of("[weather]\n").contains("unknown section"));
        assert!(err_of("[flood]\njunk line\n").contains("key = value"));
        assert!(err_of("[flood]\ndt_max = fast\n").contains("line 19"));
        assert!(err_of("[flood]\nboundary = leaky\n").contains("boundary"));
        assert!(err_of("[ead]\nreturn_periods = 10, 5\n").contains("ascending"));
        assert!(err_of("[ead]\nreturn_periods = 1, 5\n").contains("exceed"));
        assert!(err_of("[ga]\npopulation = 7\n").contains("population"));
        assert!(err_of("[run]\nworkers = 0\n").contains("workers"));
        assert!(err_of("[run]\ncache = maybe\n").contains("boolean"));
        let missing = MINIMAL.replace("profile_a = 0.1\n", "");
        assert!(RunConfig::parse(&missing, Path::new(".")).unwrap_err().to_string().contains("profile_a"));
        let odd = MINIMAL.replace("steps = 12", "steps = 5");
        assert!(RunConfig::parse(&odd, Path::new(".")).is_err());
        assert!(RunConfig::parse("dem = x\n", Path::new(".")).is_err());
    }

    #[test]
    fn load_checks_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("config.ini");
        std::fs::write(&cfg_path, MINIMAL).unwrap();
        let err = RunConfig::load(&cfg_path).unwrap_err();
        assert!(err.to_string().contains("dem.asc"), "{err}");
        for f in ["dem.asc", "b.geojson", "z.geojson", "r.csv", "n.csv"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        assert!(RunConfig::load(&cfg_path).is_ok());
    }
}
