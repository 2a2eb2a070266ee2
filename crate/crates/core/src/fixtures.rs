//! Deterministic synthetic catchments for tests, benchmarks and demos.
//!
//! The terrain falls from north-west to south-east, with a drainage channel
//! along the diagonal ending in a basin in the south-east corner. Houses sit
//! in shallow depressions at block corners; larger non-residential buildings
//! ring the basin. Each block of a regular layout holds one square zone.

use std::path::Path;

use serde_json::json;

use crate::config::{PathsConfig, RunConfig, StormConfig, DEFAULT_RETURN_PERIODS, DEFAULT_UPLIFTS};
use crate::economics::CostParams;
use crate::error::Result;
use crate::flood::FloodParams;
use crate::geometry::Polygon;
use crate::grid::{write_ascii_grid, Grid};
use crate::io::write_text;
use crate::nsga2::{GaConfig, GaRng};
use crate::storm::{DdfDescriptors, ProfileParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub size: usize,
    pub cellsize: f64,
    /// Zone layout as (rows, cols) of blocks.
    pub blocks: (usize, usize),
    /// Side of each square zone, in cells.
    pub zone_cells: usize,
    /// Fall from the north-west to the south-east corner, metres.
    pub slope_drop: f64,
    pub channel_depth: f64,
    /// Channel half-width as a fraction of the domain diagonal.
    pub channel_width: f64,
    pub basin_depth: f64,
    /// Basin radius as a fraction of the domain side.
    pub basin_radius: f64,
    pub depression_depth: f64,
    /// Depression spread, in cells.
    pub depression_sigma: f64,
    /// Probability that an eligible block corner gets a house.
    pub house_density: f64,
    /// Side of the non-residential buildings, in cells.
    pub big_building_cells: usize,
    pub seed: u64,
    pub ga: GaConfig,
    pub flood: FloodParams,
}

impl FixtureSpec {
    /// 24×24 cells, 12 zones; fast enough for exhaustive enumeration.
    pub fn small() -> Self {
        FixtureSpec {
            size: 24,
            cellsize: 5.0,
            blocks: (3, 4),
            zone_cells: 3,
            slope_drop: 2.0,
            channel_depth: 0.3,
            channel_width: 0.06,
            basin_depth: 0.3,
            basin_radius: 0.35,
            depression_depth: 1.2,
            depression_sigma: 2.0,
            house_density: 1.0,
            big_building_cells: 2,
            seed: 7,
            ga: GaConfig {
                population: 20,
                generations: 15,
                crossover_rate: 0.9,
                mutation_rate: None,
                seed: 2024,
            },
            flood: FloodParams {
                infil_permeable_active: 60.0,
                settle_time: 300.0,
                ..FloodParams::default()
            },
        }
    }

    /// 100×100 cells, 64 zones.
    pub fn standard() -> Self {
        FixtureSpec {
            size: 100,
            cellsize: 10.0,
            blocks: (8, 8),
            zone_cells: 6,
            slope_drop: 4.0,
            channel_depth: 0.6,
            channel_width: 0.04,
            basin_depth: 0.6,
            basin_radius: 0.18,
            depression_depth: 0.6,
            depression_sigma: 2.0,
            house_density: 0.6,
            big_building_cells: 4,
            seed: 11,
            ga: GaConfig {
                population: 16,
                generations: 8,
                crossover_rate: 0.9,
                mutation_rate: None,
                seed: 2024,
            },
            flood: FloodParams {
                infil_permeable_active: 60.0,
                settle_time: 300.0,
                ..FloodParams::default()
            },
        }
    }

    fn edges(&self, k: usize) -> Vec<usize> {
        (0..=k).map(|i| ((i * self.size) as f64 / k as f64).round() as usize).collect()
    }

    pub fn n_zones(&self) -> usize {
        self.blocks.0 * self.blocks.1
    }
}

/// Inputs for one synthetic catchment, in memory.
#[derive(Debug, Clone)]
pub struct FixtureData {
    pub grid: Grid,
    pub elevation: Vec<f64>,
    /// `(id, category, polygon)`.
    pub buildings: Vec<(String, &'static str, Polygon)>,
    /// Zone polygons in index order.
    pub zones: Vec<Polygon>,
    pub green: Vec<Polygon>,
}

/// Polygon covering cell rows `r0..r1` and columns `c0..c1`.
pub fn cell_rect(grid: &Grid, r0: usize, r1: usize, c0: usize, c1: usize) -> Polygon {
    let cs = grid.cellsize;
    let n = grid.nrows as f64;
    Polygon::rect(
        [grid.xll + c0 as f64 * cs, grid.yll + (n - r1 as f64) * cs],
        [grid.xll + c1 as f64 * cs, grid.yll + (n - r0 as f64) * cs],
    )
    .expect("non-empty cell rectangle")
}

pub fn generate(spec: &FixtureSpec) -> Result<FixtureData> {
    let n = spec.size;
    let grid = Grid::new(n, n, 0.0, 0.0, spec.cellsize)?;
    let (br, bc) = spec.blocks;
    let row_edges = spec.edges(br);
    let col_edges = spec.edges(bc);

    let mut rng = GaRng::new(spec.seed);
    let mut houses = Vec::new();
    let mut big = Vec::new();
    for &r in &row_edges[1..br] {
        for &c in &col_edges[1..bc] {
            let u = c as f64 / n as f64;
            let v = r as f64 / n as f64;
            let near_basin = ((1.0 - u).powi(2) + (1.0 - v).powi(2)).sqrt() < spec.basin_radius + 0.12;
            let on_channel = (u - v).abs() < 2.5 * spec.channel_width;
            let draw = rng.unit();
            if near_basin {
                big.push((r, c));
            } else if !on_channel && draw < spec.house_density {
                houses.push((r, c));
            }
        }
    }

    let dn = (n - 1) as f64;
    let mut elevation = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let u = c as f64 / dn;
            let v = r as f64 / dn;
            let mut z = 10.0 + spec.slope_drop * (1.0 - 0.5 * (u + v));
            let d = (u - v) / std::f64::consts::SQRT_2;
            z -= spec.channel_depth * (-d * d / (2.0 * spec.channel_width.powi(2))).exp();
            let rb = ((1.0 - u).powi(2) + (1.0 - v).powi(2)).sqrt() / spec.basin_radius;
            if rb < 1.0 {
                z -= spec.basin_depth * (1.0 - rb * rb);
            }
            for &(hr, hc) in &houses {
                let dr = r as f64 + 0.5 - hr as f64;
                let dc = c as f64 + 0.5 - hc as f64;
                let s2 = spec.depression_sigma.powi(2);
                z -= spec.depression_depth * (-(dr * dr + dc * dc) / (2.0 * s2)).exp();
            }
            elevation.push(z);
        }
    }

    let mut buildings = Vec::new();
    for (k, &(r, c)) in houses.iter().enumerate() {
        buildings.push((format!("R{:03}", k + 1), "residential", cell_rect(&grid, r - 1, r + 1, c - 1, c + 1)));
    }
    let h = spec.big_building_cells / 2;
    for (k, &(r, c)) in big.iter().enumerate() {
        buildings.push((
            format!("N{:03}", k + 1),
            "non_residential",
            cell_rect(&grid, r - h, r + h, c - h, c + h),
        ));
    }

    let mut zones = Vec::new();
    let zc = spec.zone_cells;
    for i in 0..br {
        for j in 0..bc {
            let rc = (row_edges[i] + row_edges[i + 1]) / 2;
            let cc = (col_edges[j] + col_edges[j + 1]) / 2;
            let r0 = rc - zc / 2;
            let c0 = cc - zc / 2;
            zones.push(cell_rect(&grid, r0, r0 + zc, c0, c0 + zc));
        }
    }

    let strip = (n / 12).max(1);
    let green = vec![cell_rect(&grid, 0, strip, 0, n / 2), cell_rect(&grid, strip, n / 2, 0, strip)];

    Ok(FixtureData {
        grid,
        elevation,
        buildings,
        zones,
        green,
    })
}

fn feature_collection(features: Vec<serde_json::Value>) -> String {
    serde_json::to_string_pretty(&json!({"type": "FeatureCollection", "features": features}))
        .expect("GeoJSON serialisation cannot fail")
}

fn polygon_json(p: &Polygon) -> serde_json::Value {
    crate::catchment::polygons_to_json(std::slice::from_ref(p))
}

/// Residential damage per property (currency) by depth.
pub const RESIDENTIAL_CURVE: &[(f64, f64)] = &[
    (0.0, 0.0),
    (0.1, 4000.0),
    (0.3, 18000.0),
    (0.6, 32000.0),
    (1.0, 45000.0),
    (2.0, 60000.0),
];

/// Non-residential damage per m² of footprint by depth.
pub const NON_RESIDENTIAL_CURVE: &[(f64, f64)] = &[
    (0.0, 0.0),
    (0.1, 60.0),
    (0.3, 220.0),
    (0.6, 420.0),
    (1.0, 600.0),
    (2.0, 850.0),
];

fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("depth_m,value\n");
    for (d, v) in points {
        s.push_str(&format!("{d},{v}\n"));
    }
    s
}

/// Writes every input file plus `config.ini` into `dir` and returns the parsed configuration.
pub fn write_fixture(spec: &FixtureSpec, dir: &Path) -> Result<RunConfig> {
    let data = generate(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    write_ascii_grid(&dir.join("dem.asc"), &data.grid, &data.elevation)?;
    let buildings = data
        .buildings
        .iter()
        .map(|(id, cat, p)| {
            json!({"type": "Feature", "properties": {"id": id, "category": cat}, "geometry": polygon_json(p)})
        })
        .collect();
    write_text(&dir.join("buildings.geojson"), &feature_collection(buildings))?;
    let zones = data
        .zones
        .iter()
        .enumerate()
        .map(|(k, p)| json!({"type": "Feature", "properties": {"index": k + 1}, "geometry": polygon_json(p)}))
        .collect();
    write_text(&dir.join("zones.geojson"), &feature_collection(zones))?;
    let green = data
        .green
        .iter()
        .map(|p| json!({"type": "Feature", "properties": {}, "geometry": polygon_json(p)}))
        .collect();
    write_text(&dir.join("green.geojson"), &feature_collection(green))?;
    write_text(&dir.join("residential_curve.csv"), &curve_csv(RESIDENTIAL_CURVE))?;
    write_text(&dir.join("non_residential_curve.csv"), &curve_csv(NON_RESIDENTIAL_CURVE))?;

    let cfg = RunConfig {
        paths: PathsConfig {
            dem: dir.join("dem.asc"),
            green: Some(dir.join("green.geojson")),
            buildings: dir.join("buildings.geojson"),
            zones: dir.join("zones.geojson"),
            residential_curve: dir.join("residential_curve.csv"),
            non_residential_curve: dir.join("non_residential_curve.csv"),
            output_dir: dir.join("out"),
        },
        storm: StormConfig {
            ddf: DdfDescriptors::new(-0.02, 0.35, 0.28, 2.2)?,
            profile: ProfileParams::new(0.1, 0.8)?,
            duration_min: 30.0,
            steps: 6,
        },
        flood: spec.flood.clone(),
        costs: CostParams::default(),
        return_periods: DEFAULT_RETURN_PERIODS.to_vec(),
        uplifts: DEFAULT_UPLIFTS.to_vec(),
        ga: spec.ga.clone(),
        workers: 1,
        cache: true,
    };
    write_text(&dir.join("config.ini"), &cfg.to_ini(dir))?;
    RunConfig::load(&dir.join("config.ini"))
}
