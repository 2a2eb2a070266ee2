//! CSV and GeoJSON exports, and readers for the files the CLI consumes.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so every
//! value read back is bit-identical to the value written.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use crate::catchment::{polygons_to_json, Zone};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::metrics::{FrontCurve, MetricsBundle};
use crate::nsga2::ParetoFront;
use crate::storm::{DesignStorm, StormStep};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} '{s}'"),
    })
}

fn period_label(t: f64) -> String {
    t.to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub solution_id: usize,
    pub lcc: f64,
    pub risk: f64,
    pub genome_hex: String,
    pub per_period: Vec<f64>,
}

/// A front as exported: one row per solution, optional per-period damage columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontTable {
    pub periods: Vec<f64>,
    pub rows: Vec<FrontRow>,
}

impl FrontTable {
    /// Rows in front order; `periods` must match each solution's per-period values (or be empty).
    pub fn from_front(front: &ParetoFront, periods: &[f64]) -> Result<Self> {
        let rows = front
            .solutions
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let per_period = if periods.is_empty() { Vec::new() } else { s.eval.per_period.clone() };
                if per_period.len() != periods.len() {
                    return Err(Error::Input(format!(
                        "solution {k} carries {} per-period values for {} periods",
                        per_period.len(),
                        periods.len()
                    )));
                }
                Ok(FrontRow {
                    solution_id: k,
                    lcc: s.eval.objectives.lcc,
                    risk: s.eval.objectives.risk,
                    genome_hex: s.genome.to_hex(),
                    per_period,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrontTable {
            periods: periods.to_vec(),
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("solution_id,lcc,risk,genome_hex");
        for t in &self.periods {
            let _ = write!(s, ",ddc_T{}", period_label(*t));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{}", r.solution_id, r.lcc, r.risk, r.genome_hex);
            for v in &r.per_period {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let fixed = ["solution_id", "lcc", "risk", "genome_hex"];
        if headers.len() < 4 || headers.iter().take(4).ne(fixed.iter().copied()) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("front header must start with {}", fixed.join(",")),
            });
        }
        let periods = headers
            .iter()
            .skip(4)
            .map(|h| {
                h.strip_prefix("ddc_T").and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
                    line: 1,
                    msg: format!("unexpected front column '{h}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let solution_id = rec[0].trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid solution_id '{}'", &rec[0]),
            })?;
            rows.push(FrontRow {
                solution_id,
                lcc: parse_f64(&rec[1], line, "lcc")?,
                risk: parse_f64(&rec[2], line, "risk")?,
                genome_hex: rec[3].trim().to_string(),
                per_period: (4..rec.len())
                    .map(|k| parse_f64(&rec[k], line, "damage"))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(FrontTable { periods, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn genomes(&self, n_zones: usize) -> Result<Vec<Genome>> {
        self.rows.iter().map(|r| Genome::from_hex(&r.genome_hex, n_zones)).collect()
    }

    pub fn curve(&self, label: &str) -> Result<FrontCurve> {
        FrontCurve::new(label, self.rows.iter().map(|r| (r.lcc, r.risk)))
    }

    /// Damage column for period `t`, if present.
    pub fn period_column(&self, t: f64) -> Option<Vec<f64>> {
        let k = self.periods.iter().position(|&p| p == t)?;
        Some(self.rows.iter().map(|r| r.per_period[k]).collect())
    }
}

/// `time_s,intensity_mm_per_hr` where `time_s` is the end of each interval.
pub fn storm_to_csv(storm: &DesignStorm) -> String {
    let mut s = String::from("time_s,intensity_mm_per_hr\n");
    let mut t = 0.0;
    for st in &storm.steps {
        t += st.duration_s;
        let _ = writeln!(s, "{t},{}", st.intensity_mm_hr);
    }
    s
}

pub fn storm_from_csv(text: &str) -> Result<DesignStorm> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(["time_s", "intensity_mm_per_hr"]) {
        return Err(Error::Parse {
            line: 1,
            msg: "storm header must be time_s,intensity_mm_per_hr".into(),
        });
    }
    let mut steps = Vec::new();
    let mut prev = 0.0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let t = parse_f64(&rec[0], line, "time")?;
        let i = parse_f64(&rec[1], line, "intensity")?;
        if !(t > prev) {
            return Err(Error::Parse {
                line,
                msg: format!("interval end times must increase, found {t} after {prev}"),
            });
        }
        steps.push(StormStep {
            duration_s: t - prev,
            intensity_mm_hr: i,
        });
        prev = t;
    }
    DesignStorm::from_steps(f64::NAN, steps)
}

/// One line of a `metric,return_period,value,percent` report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub return_period: String,
    pub value: f64,
    pub percent: Option<f64>,
}

impl MetricRow {
    pub fn new(metric: &str, return_period: impl ToString, value: f64, percent: Option<f64>) -> Self {
        MetricRow {
            metric: metric.to_string(),
            return_period: return_period.to_string(),
            value,
            percent,
        }
    }
}

/// The rows of one front comparison, all tagged with `target`.
pub fn metric_rows(bundle: &MetricsBundle, target: &str) -> Vec<MetricRow> {
    let b = bundle;
    vec![
        MetricRow::new("max_rd", target, b.max_rd, b.max_rd_pct),
        MetricRow::new("med_rd", target, b.med_rd, b.med_rd_pct),
        MetricRow::new("aupf_ref", target, b.aupf_ref, None),
        MetricRow::new("aupf_trial", target, b.aupf_trial, None),
        MetricRow::new("aupf_ref_raw", target, b.aupf_ref_raw, None),
        MetricRow::new("aupf_trial_raw", target, b.aupf_trial_raw, None),
        MetricRow::new("delta_aupf", target, b.delta_aupf, Some(b.delta_aupf_pct)),
    ]
}

pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("metric,return_period,value,percent\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.metric, r.return_period, r.value, opt(r.percent));
    }
    s
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let percent = match rec[3].trim() {
            "NA" => None,
            s => Some(parse_f64(s, line, "percent")?),
        };
        out.push(MetricRow {
            metric: rec[0].to_string(),
            return_period: rec[1].to_string(),
            value: parse_f64(&rec[2], line, "value")?,
            percent,
        });
    }
    Ok(out)
}

/// Zones as a FeatureCollection with `zone` and `contribution` properties.
pub fn zone_contribution_geojson(zones: &[Zone], contribution: &[f64]) -> Result<String> {
    if zones.len() != contribution.len() {
        return Err(Error::Input("one contribution value per zone is required".into()));
    }
    let features: Vec<_> = zones
        .iter()
        .zip(contribution)
        .map(|(z, &c)| {
            let mut props = json!({"zone": z.index, "contribution": c, "area_m2": z.area});
            if c == 0.0 {
                props["label"] = json!("no contribution");
            }
            json!({"type": "Feature", "properties": props, "geometry": polygons_to_json(&z.polygons)})
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    Ok(serde_json::to_string_pretty(&doc).expect("GeoJSON serialisation cannot fail"))
}

/// One solution under one climate scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct StressRow {
    pub uplift: f64,
    pub solution_id: usize,
    pub lcc: f64,
    pub ead: f64,
    /// `None` for the zero-cost baseline.
    pub benefit_cost: Option<f64>,
    pub per_period: Vec<f64>,
}

pub fn stress_to_csv(periods: &[f64], rows: &[StressRow]) -> String {
    let mut s = String::from("uplift,solution_id,lcc,ead,benefit_cost");
    for t in periods {
        let _ = write!(s, ",ddc_T{}", period_label(*t));
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{},{},{}", r.uplift, r.solution_id, r.lcc, r.ead, opt(r.benefit_cost));
        for v in &r.per_period {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// One solution's benefit-cost ratio against the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BcRow {
    pub solution_id: usize,
    pub lcc: f64,
    pub ead: f64,
    pub benefit_cost: Option<f64>,
}

pub fn bc_to_csv(ead_baseline: f64, rows: &[BcRow]) -> String {
    let mut s = String::from("solution_id,lcc,ead,ead_baseline,benefit_cost\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.solution_id, r.lcc, r.ead, ead_baseline, opt(r.benefit_cost));
    }
    s
}
