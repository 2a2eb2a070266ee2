//! Building flood risk: buffer sampling of maximum depths, the at-risk gate
//! and depth-damage costing.

use std::io::Write;
use std::path::Path;

use crate::catchment::{Building, BuildingCategory, Catchment, LandClass};
use crate::error::{Error, Result};
use crate::flood::DepthField;
use crate::geometry::{Point, Polygon};

/// Buffer distance as a multiple of the grid cell size.
pub const BUFFER_CELL_FACTOR: f64 = 1.5;
/// A building is safe only when the mean depth is below this (m) ...
pub const MEAN_DEPTH_THRESHOLD: f64 = 0.1;
/// ... and the 90th-percentile depth is below this (m).
pub const P90_DEPTH_THRESHOLD: f64 = 0.3;

/// Piecewise-linear depth-damage relation. Residential values are per
/// property, non-residential values per m² of footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageCurve {
    pub category: BuildingCategory,
    points: Vec<(f64, f64)>,
}

impl DamageCurve {
    pub fn new(category: BuildingCategory, points: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |m: String| Err(Error::Input(format!("{category} damage curve: {m}")));
        match points.first() {
            None => return bad("no points".into()),
            Some(&(d, v)) if d != 0.0 || v != 0.0 => {
                return bad(format!("must start at (0, 0), found ({d}, {v})"))
            }
            _ => {}
        }
        for w in points.windows(2) {
            let ((d0, v0), (d1, v1)) = (w[0], w[1]);
            if !(d1 > d0) {
                return bad(format!("depths must strictly increase ({d0} then {d1})"));
            }
            if !(v1 >= v0) || !v1.is_finite() {
                return bad(format!("damages must be non-decreasing ({v0} then {v1})"));
            }
        }
        Ok(Self { category, points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Reads a `depth_m,value` CSV.
    pub fn from_csv(category: BuildingCategory, text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["depth_m", "value"] {
            return Err(Error::Parse {
                line: 1,
                msg: format!("damage curve header must be depth_m,value, found {headers:?}"),
            });
        }
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let num = |k: usize| -> Result<f64> {
                rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("non-numeric field in {rec:?}"),
                })
            };
            points.push((num(0)?, num(1)?));
        }
        Self::new(category, points)
    }

    pub fn load(category: BuildingCategory, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(category, &text)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth_m,value\n");
        for (d, v) in &self.points {
            s.push_str(&format!("{d},{v}\n"));
        }
        s
    }
}

/// Linear interpolation over the curve, clamped to the last value.
pub fn damage_lookup(curve: &DamageCurve, depth: f64) -> f64 {
    let pts = &curve.points;
    if depth <= 0.0 {
        return pts[0].1;
    }
    let k = pts.partition_point(|&(d, _)| d <= depth);
    if k >= pts.len() {
        return pts[pts.len() - 1].1;
    }
    let (d0, v0) = pts[k - 1];
    let (d1, v1) = pts[k];
    v0 + (v1 - v0) * (depth - d0) / (d1 - d0)
}

#[derive(Debug, Clone)]
pub struct DamageCurves {
    pub residential: DamageCurve,
    pub non_residential: DamageCurve,
}

impl DamageCurves {
    pub fn new(residential: DamageCurve, non_residential: DamageCurve) -> Result<Self> {
        if residential.category != BuildingCategory::Residential
            || non_residential.category != BuildingCategory::NonResidential
        {
            return Err(Error::Config("damage curves supplied for the wrong categories".into()));
        }
        Ok(Self {
            residential,
            non_residential,
        })
    }

    pub fn for_category(&self, c: BuildingCategory) -> &DamageCurve {
        match c {
            BuildingCategory::Residential => &self.residential,
            BuildingCategory::NonResidential => &self.non_residential,
        }
    }
}

/// The footprint grown outward by a fixed distance with rounded corners:
/// every point within `distance` of the footprint.
#[derive(Debug, Clone)]
pub struct BuildingBuffer {
    pub footprint: Polygon,
    pub distance: f64,
}

impl BuildingBuffer {
    pub fn contains(&self, p: Point) -> bool {
        self.footprint.contains(p) || self.footprint.distance_to_boundary(p) <= self.distance
    }

    pub fn bbox(&self) -> (Point, Point) {
        let (min, max) = self.footprint.bbox();
        let d = self.distance;
        ([min[0] - d, min[1] - d], [max[0] + d, max[1] + d])
    }

    /// Sampled outline of the buffer boundary for a convex footprint.
    /// `arc_segments` vertices approximate each rounded corner.
    pub fn convex_outline(&self, arc_segments: usize) -> Result<Polygon> {
        let ring = self.footprint.exterior();
        let n = ring.len();
        let signed: f64 = (0..n)
            .map(|i| ring[i][0] * ring[(i + 1) % n][1] - ring[(i + 1) % n][0] * ring[i][1])
            .sum();
        let ccw = signed > 0.0;
        let mut out = Vec::new();
        for i in 0..n {
            let prev = ring[(i + n - 1) % n];
            let cur = ring[i];
            let next = ring[(i + 1) % n];
            let normal = |a: Point, b: Point| {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len = (dx * dx + dy * dy).sqrt();
                if ccw {
                    [dy / len, -dx / len]
                } else {
                    [-dy / len, dx / len]
                }
            };
            let n0 = normal(prev, cur);
            let n1 = normal(cur, next);
            let a0 = n0[1].atan2(n0[0]);
            let mut a1 = n1[1].atan2(n1[0]);
            if ccw {
                while a1 < a0 {
                    a1 += std::f64::consts::TAU;
                }
            } else {
                while a1 > a0 {
                    a1 -= std::f64::consts::TAU;
                }
            }
            let k = arc_segments.max(1);
            for s in 0..=k {
                let a = a0 + (a1 - a0) * s as f64 / k as f64;
                out.push([cur[0] + self.distance * a.cos(), cur[1] + self.distance * a.sin()]);
            }
        }
        Polygon::new(out)
    }
}

/// Buffer at 1.5 × the grid cell size around a footprint.
pub fn building_buffer(b: &Building, cellsize: f64) -> Result<BuildingBuffer> {
    if !(cellsize > 0.0) {
        return Err(Error::Input(format!("cellsize {cellsize} must be positive")));
    }
    if !(b.footprint.area() > 0.0) {
        return Err(Error::Input(format!("building {} has a degenerate footprint", b.id)));
    }
    Ok(BuildingBuffer {
        footprint: b.footprint.clone(),
        distance: BUFFER_CELL_FACTOR * cellsize,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthStats {
    pub mean: f64,
    pub p90: f64,
}

/// Percentile by linear interpolation at rank `q·(n−1)` of an ascending sample.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Mean and 90th percentile of a sample; `None` when empty.
pub fn sample_stats(values: &mut [f64]) -> Option<DepthStats> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some(DepthStats {
        mean,
        p90: percentile_linear(values, 0.9),
    })
}

/// Non-building cells whose centres fall in the buffer but outside the footprint.
pub fn buffer_cells(catchment: &Catchment, buffer: &BuildingBuffer) -> Vec<usize> {
    let grid = &catchment.grid;
    let (min, max) = buffer.bbox();
    let Some((r0, r1, c0, c1)) = grid.cells_in_bbox(min, max) else {
        return Vec::new();
    };
    let mut cells = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let i = grid.index(r, c);
            let p = grid.centre(r, c);
            if catchment.land[i] != LandClass::Building && !buffer.footprint.contains(p) && buffer.contains(p) {
                cells.push(i);
            }
        }
    }
    cells
}

/// Depth statistics of the maximum-depth field around one building.
pub fn depth_stats(field: &DepthField, catchment: &Catchment, buffer: &BuildingBuffer) -> Option<DepthStats> {
    let mut v: Vec<f64> = buffer_cells(catchment, buffer).iter().map(|&i| field.max_depth[i]).collect();
    sample_stats(&mut v)
}

/// Risk index: 0 when `d_m < 0.1` and `d_90th < 0.3`, otherwise 1.
pub fn classify_risk(d_mean: f64, d_p90: f64) -> u8 {
    if d_mean < MEAN_DEPTH_THRESHOLD && d_p90 < P90_DEPTH_THRESHOLD {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRisk {
    pub building_id: String,
    pub category: BuildingCategory,
    /// `None` when no cells could be sampled around the building.
    pub stats: Option<DepthStats>,
    pub risk_index: u8,
    pub ddc: f64,
}

#[derive(Debug, Clone)]
pub struct RiskAssessment {
    pub total_ddc: f64,
    pub buildings: Vec<BuildingRisk>,
}

fn building_ddc(b: &Building, stats: Option<DepthStats>, curves: &DamageCurves) -> (u8, f64) {
    let Some(s) = stats else {
        return (0, 0.0);
    };
    let idx = classify_risk(s.mean, s.p90);
    if idx == 0 {
        return (0, 0.0);
    }
    let unit = damage_lookup(curves.for_category(b.category), s.p90);
    let ddc = match b.category {
        BuildingCategory::Residential => unit,
        BuildingCategory::NonResidential => b.area * unit,
    };
    (1, ddc)
}

/// Precomputed buffer samples for repeated assessment of one catchment.
#[derive(Debug, Clone)]
pub struct RiskModel {
    curves: DamageCurves,
    samples: Vec<Vec<usize>>,
}

impl RiskModel {
    pub fn new(catchment: &Catchment, curves: DamageCurves) -> Result<Self> {
        let mut samples = Vec::with_capacity(catchment.buildings.len());
        for b in &catchment.buildings {
            let cells = buffer_cells(catchment, &building_buffer(b, catchment.grid.cellsize)?);
            if cells.is_empty() {
                log::warn!("building {} has no sampleable cells and is treated as not at risk", b.id);
            }
            samples.push(cells);
        }
        Ok(Self { curves, samples })
    }

    pub fn curves(&self) -> &DamageCurves {
        &self.curves
    }

    fn stats(&self, field: &DepthField, k: usize, scratch: &mut Vec<f64>) -> Option<DepthStats> {
        scratch.clear();
        scratch.extend(self.samples[k].iter().map(|&i| field.max_depth[i]));
        sample_stats(scratch)
    }

    pub fn total_ddc(&self, field: &DepthField, catchment: &Catchment) -> f64 {
        let mut scratch = Vec::new();
        catchment
            .buildings
            .iter()
            .enumerate()
            .fold(0.0, |acc, (k, b)| acc + building_ddc(b, self.stats(field, k, &mut scratch), &self.curves).1)
    }

    pub fn assess(&self, field: &DepthField, catchment: &Catchment) -> RiskAssessment {
        let mut scratch = Vec::new();
        let buildings: Vec<BuildingRisk> = catchment
            .buildings
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let stats = self.stats(field, k, &mut scratch);
                let (risk_index, ddc) = building_ddc(b, stats, &self.curves);
                BuildingRisk {
                    building_id: b.id.clone(),
                    category: b.category,
                    stats,
                    risk_index,
                    ddc,
                }
            })
            .collect();
        RiskAssessment {
            total_ddc: buildings.iter().fold(0.0, |acc, b| acc + b.ddc),
            buildings,
        }
    }
}

/// Total direct damage cost over all buildings for one depth field.
pub fn candidate_ddc(field: &DepthField, catchment: &Catchment, curves: &DamageCurves) -> Result<RiskAssessment> {
    Ok(RiskModel::new(catchment, curves.clone())?.assess(field, catchment))
}

pub fn write_building_risks(path: &Path, risks: &[BuildingRisk]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let mut body = String::from("building_id,category,d_mean,d_p90,at_risk,ddc\n");
    for r in risks {
        let (m, p) = match r.stats {
            Some(s) => (s.mean.to_string(), s.p90.to_string()),
            None => ("NA".into(), "NA".into()),
        };
        body.push_str(&format!("{},{},{},{},{},{}\n", r.building_id, r.category, m, p, r.risk_index, r.ddc));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
