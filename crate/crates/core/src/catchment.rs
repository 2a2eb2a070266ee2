//! Catchment assembly: DEM plus rasterised buildings, green space and
//! permeable intervention zones.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{rasterize_polygons, Polygon};
use crate::grid::{Grid, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuildingCategory {
    Residential,
    NonResidential,
}

impl BuildingCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            BuildingCategory::Residential => "residential",
            BuildingCategory::NonResidential => "non_residential",
        }
    }
}

impl fmt::Display for BuildingCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BuildingCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residential" => Ok(BuildingCategory::Residential),
            "non_residential" => Ok(BuildingCategory::NonResidential),
            other => Err(Error::Input(format!("unknown building category {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Building {
    pub id: String,
    pub category: BuildingCategory,
    pub footprint: Polygon,
    /// Footprint area in m², from the polygon geometry.
    pub area: f64,
}

impl Building {
    pub fn new(id: impl Into<String>, category: BuildingCategory, footprint: Polygon) -> Result<Self> {
        let id = id.into();
        let area = footprint.area();
        if !(area > 0.0) {
            return Err(Error::Input(format!("building {id} has zero area")));
        }
        if !footprint.is_simple() {
            return Err(Error::Input(format!("building {id} footprint self-intersects")));
        }
        Ok(Self {
            id,
            category,
            footprint,
            area,
        })
    }
}

/// Zone polygons as read from input, before rasterisation.
#[derive(Debug, Clone)]
pub struct ZoneInput {
    pub index: usize,
    pub polygons: Vec<Polygon>,
}

/// A permeable intervention zone; gene `index − 1` of a genome toggles it.
#[derive(Debug, Clone)]
pub struct Zone {
    pub index: usize,
    pub polygons: Vec<Polygon>,
    /// Rasterised area, `cells.len() × cellsize²`.
    pub area: f64,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LandClass {
    Building,
    Green,
    Impervious,
}

#[derive(Debug, Clone)]
pub struct Catchment {
    pub grid: Grid,
    pub elevation: Vec<f64>,
    pub land: Vec<LandClass>,
    pub buildings: Vec<Building>,
    /// Sorted by index; `zones[j].index == j + 1`.
    pub zones: Vec<Zone>,
    pub warnings: Vec<String>,
}

impl Catchment {
    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.land {
            counts[match l {
                LandClass::Building => 0,
                LandClass::Green => 1,
                LandClass::Impervious => 2,
            }] += 1;
        }
        counts
    }
}

fn check_extent(polys: &[Polygon], grid: &Grid, what: &str) -> Result<()> {
    let tol = 1e-6 * grid.cellsize;
    for p in polys {
        let (min, max) = p.bbox();
        if min[0] < grid.xll - tol || min[1] < grid.yll - tol || max[0] > grid.x_max() + tol || max[1] > grid.y_max() + tol {
            return Err(Error::Input(format!("{what} polygon extends beyond the DEM extent")));
        }
    }
    Ok(())
}

/// Rasterises all layers onto the DEM grid.
///
/// Labels follow the precedence building > green > impervious. Zone cells
/// that fall on buildings are dropped with a warning; a zone left with no
/// cells is an error.
pub fn assemble_catchment(
    dem: Raster,
    green: &[Polygon],
    buildings: Vec<Building>,
    zones: Vec<ZoneInput>,
) -> Result<Catchment> {
    let grid = dem.grid;
    let elevation = dem
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.filter(|z| z.is_finite()).ok_or_else(|| {
                let (r, c) = grid.row_col(i);
                Error::Input(format!("DEM has nodata or a non-finite value at row {r}, column {c}"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    check_extent(green, &grid, "green-area")?;
    let mut land = vec![LandClass::Impervious; grid.len()];
    for i in rasterize_polygons(green, &grid) {
        land[i] = LandClass::Green;
    }
    let mut ids = HashSet::new();
    for b in &buildings {
        if !ids.insert(b.id.as_str()) {
            return Err(Error::Input(format!("duplicate building id {}", b.id)));
        }
        check_extent(std::slice::from_ref(&b.footprint), &grid, "building")?;
        for i in rasterize_polygons(std::slice::from_ref(&b.footprint), &grid) {
            land[i] = LandClass::Building;
        }
    }

    let mut zones = zones;
    zones.sort_by_key(|z| z.index);
    let mut warnings = Vec::new();
    let mut owner = vec![0usize; grid.len()];
    let mut out = Vec::with_capacity(zones.len());
    for (j, z) in zones.into_iter().enumerate() {
        if z.index != j + 1 {
            return Err(Error::Input(format!(
                "zone indices must run 1..=n without gaps; expected {}, found {}",
                j + 1,
                z.index
            )));
        }
        check_extent(&z.polygons, &grid, &format!("zone {}", z.index))?;
        let raw = rasterize_polygons(&z.polygons, &grid);
        let cells: Vec<usize> = raw.iter().copied().filter(|&i| land[i] != LandClass::Building).collect();
        if cells.is_empty() {
            return Err(Error::Input(format!(
                "zone {} covers no non-building cells",
                z.index
            )));
        }
        if cells.len() < raw.len() {
            let msg = format!(
                "zone {}: {} cell(s) overlap buildings and were removed",
                z.index,
                raw.len() - cells.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        for &i in &cells {
            if owner[i] != 0 {
                return Err(Error::Input(format!(
                    "zones {} and {} overlap",
                    owner[i], z.index
                )));
            }
            owner[i] = z.index;
        }
        out.push(Zone {
            index: z.index,
            polygons: z.polygons,
            area: cells.len() as f64 * grid.cell_area(),
            cells,
        });
    }

    Ok(Catchment {
        grid,
        elevation,
        land,
        buildings,
        zones: out,
        warnings,
    })
}

// GeoJSON ----------------------------------------------------------------

fn ring_from_json(v: &Value) -> Result<Vec<[f64; 2]>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::Input("GeoJSON ring is not an array".into()))?;
    pts.iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?])) {
                Some(pt) => Ok(pt),
                None => Err(Error::Input(format!("invalid GeoJSON position {p}"))),
            }
        })
        .collect()
}

fn polygon_from_json(coords: &Value) -> Result<Polygon> {
    let rings = coords
        .as_array()
        .ok_or_else(|| Error::Input("GeoJSON polygon coordinates are not an array".into()))?;
    let mut rings = rings.iter().map(ring_from_json);
    let exterior = rings
        .next()
        .ok_or_else(|| Error::Input("GeoJSON polygon has no rings".into()))??;
    let holes = rings.collect::<Result<Vec<_>>>()?;
    Polygon::with_holes(exterior, holes)
}

fn geometry_polygons(geom: &Value) -> Result<Vec<Polygon>> {
    let coords = &geom["coordinates"];
    match geom["type"].as_str() {
        Some("Polygon") => Ok(vec![polygon_from_json(coords)?]),
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or_else(|| Error::Input("MultiPolygon coordinates are not an array".into()))?
            .iter()
            .map(polygon_from_json)
            .collect(),
        other => Err(Error::Input(format!("unsupported geometry type {other:?}"))),
    }
}

/// `(properties, polygons)` per feature of a FeatureCollection.
pub fn parse_features(text: &str) -> Result<Vec<(Value, Vec<Polygon>)>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if doc["type"] != "FeatureCollection" {
        return Err(Error::Input("GeoJSON document is not a FeatureCollection".into()));
    }
    let feats = doc["features"]
        .as_array()
        .ok_or_else(|| Error::Input("FeatureCollection has no features array".into()))?;
    feats
        .iter()
        .map(|f| Ok((f["properties"].clone(), geometry_polygons(&f["geometry"])?)))
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_buildings(text: &str) -> Result<Vec<Building>> {
    parse_features(text)?
        .into_iter()
        .enumerate()
        .map(|(k, (props, mut polys))| {
            let id = match &props["id"] {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                _ => return Err(Error::Input(format!("building feature {k} has no id"))),
            };
            let category: BuildingCategory = props["category"]
                .as_str()
                .ok_or_else(|| Error::Input(format!("building {id} has no category")))?
                .parse()?;
            if polys.len() != 1 {
                return Err(Error::Input(format!("building {id} must be a single polygon")));
            }
            Building::new(id, category, polys.remove(0))
        })
        .collect()
}

pub fn parse_zones(text: &str) -> Result<Vec<ZoneInput>> {
    parse_features(text)?
        .into_iter()
        .enumerate()
        .map(|(k, (props, polygons))| {
            let index = props["index"]
                .as_u64()
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::Input(format!("zone feature {k} needs an integer index >= 1")))?;
            Ok(ZoneInput {
                index: index as usize,
                polygons,
            })
        })
        .collect()
}

pub fn parse_green(text: &str) -> Result<Vec<Polygon>> {
    Ok(parse_features(text)?.into_iter().flat_map(|(_, p)| p).collect())
}

pub struct CatchmentPaths<'a> {
    pub dem: &'a Path,
    pub green: Option<&'a Path>,
    pub buildings: &'a Path,
    pub zones: &'a Path,
}

pub fn load_catchment(paths: &CatchmentPaths<'_>) -> Result<Catchment> {
    let dem = crate::grid::read_ascii_grid(paths.dem)?;
    let green = match paths.green {
        Some(p) => parse_green(&read_text(p)?)?,
        None => Vec::new(),
    };
    let buildings = parse_buildings(&read_text(paths.buildings)?)?;
    let zones = parse_zones(&read_text(paths.zones)?)?;
    assemble_catchment(dem, &green, buildings, zones)
}

/// Serialises polygons as a GeoJSON geometry value.
pub fn polygons_to_json(polys: &[Polygon]) -> Value {
    let poly_coords = |p: &Polygon| -> Value {
        Value::Array(
            p.rings()
                .iter()
                .map(|r| {
                    let mut pts: Vec<Value> = r.iter().map(|v| serde_json::json!([v[0], v[1]])).collect();
                    pts.push(serde_json::json!([r[0][0], r[0][1]]));
                    Value::Array(pts)
                })
                .collect(),
        )
    };
    if polys.len() == 1 {
        serde_json::json!({"type": "Polygon", "coordinates": poly_coords(&polys[0])})
    } else {
        serde_json::json!({
            "type": "MultiPolygon",
            "coordinates": polys.iter().map(poly_coords).collect::<Vec<_>>()
        })
    }
}
