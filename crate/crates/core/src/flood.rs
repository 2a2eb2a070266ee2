//! Explicit local-inertial surface flood model on the DEM raster.
//!
//! Unit-width face discharges follow
//! `q ← (q − g·h_f·Δt·S) / (1 + g·Δt·n²·|q| / h_f^{7/3})`, where `h_f` is
//! the face flow depth (highest water surface minus highest bed of the two
//! cells) and `S` the water-surface slope across the face. Building cells
//! are walls; rain that lands on them is passed to the nearest non-building
//! cells. Infiltration is a constant rate per surface class.

use crate::catchment::{Catchment, LandClass};
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::grid::Grid;
use crate::storm::DesignStorm;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Closed,
    OpenAtEdges,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodParams {
    pub manning_impervious: f64,
    pub manning_green: f64,
    pub manning_permeable: f64,
    /// Infiltration rates in mm/hr.
    pub infil_green: f64,
    pub infil_permeable_active: f64,
    pub infil_impervious: f64,
    pub cfl_alpha: f64,
    /// Time-step floor and ceiling, seconds.
    pub dt_min: f64,
    pub dt_max: f64,
    /// Simulated time after the rain ends, seconds.
    pub settle_time: f64,
    pub boundary: Boundary,
    /// Faces shallower than this (m) carry no flow.
    pub min_flow_depth: f64,
}

impl Default for FloodParams {
    fn default() -> Self {
        Self {
            manning_impervious: 0.02,
            manning_green: 0.05,
            manning_permeable: 0.03,
            infil_green: 10.0,
            infil_permeable_active: 50.0,
            infil_impervious: 0.0,
            cfl_alpha: 0.7,
            dt_min: 0.01,
            dt_max: 10.0,
            settle_time: 1800.0,
            boundary: Boundary::Closed,
            min_flow_depth: 1e-3,
        }
    }
}

impl FloodParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("flood parameters: {m}")));
        for n in [self.manning_impervious, self.manning_green, self.manning_permeable] {
            if !(n > 0.0 && n.is_finite()) {
                return bad("Manning coefficients must be positive");
            }
        }
        for r in [self.infil_green, self.infil_permeable_active, self.infil_impervious] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad("infiltration rates must be >= 0");
            }
        }
        if !(self.cfl_alpha > 0.0 && self.cfl_alpha <= 1.0) {
            return bad("cfl_alpha must lie in (0, 1]");
        }
        if !(self.dt_min > 0.0 && self.dt_max >= self.dt_min && self.dt_max.is_finite()) {
            return bad("need 0 < dt_min <= dt_max");
        }
        if !(self.settle_time >= 0.0 && self.settle_time.is_finite()) {
            return bad("settle_time must be >= 0");
        }
        if !(self.min_flow_depth > 0.0) {
            return bad("min_flow_depth must be positive");
        }
        Ok(())
    }
}

/// Volumes in m³ accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MassReport {
    /// Water present before the first step.
    pub initial: f64,
    pub rain_in: f64,
    pub infiltrated: f64,
    pub outflow: f64,
    pub stored: f64,
}

#[derive(Debug, Clone)]
pub struct DepthField {
    pub grid: Grid,
    /// Running per-cell maximum depth in metres.
    pub max_depth: Vec<f64>,
    pub final_depth: Vec<f64>,
    pub mass: MassReport,
    pub steps: usize,
}

/// Relative mass-balance error of a finished run.
pub fn mass_balance(field: &DepthField) -> f64 {
    let m = &field.mass;
    let supplied = m.rain_in + m.initial;
    (supplied - m.infiltrated - m.outflow - m.stored).abs() / supplied.max(1e-12)
}

/// Rain-sharing weights: for every building cell, the nearest flow cells
/// by centre distance share its rain equally.
fn roof_routing(grid: &Grid, flow: &[bool]) -> Result<Vec<f64>> {
    let mut factor: Vec<f64> = flow.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    if !flow.iter().any(|&f| f) {
        return Err(Error::Input("catchment has no non-building cells".into()));
    }
    let (nr, nc) = (grid.nrows as i64, grid.ncols as i64);
    let max_radius = nr.max(nc);
    let mut targets = Vec::new();
    for idx in 0..grid.len() {
        if flow[idx] {
            continue;
        }
        let (r0, c0) = grid.row_col(idx);
        let (r0, c0) = (r0 as i64, c0 as i64);
        let mut best = i64::MAX;
        let mut limit = max_radius;
        let mut radius = 1;
        targets.clear();
        while radius <= limit {
            for dr in -radius..=radius {
                for dc in -radius..=radius {
                    if dr.abs() != radius && dc.abs() != radius {
                        continue;
                    }
                    let (r, c) = (r0 + dr, c0 + dc);
                    if r < 0 || c < 0 || r >= nr || c >= nc {
                        continue;
                    }
                    let j = (r * nc + c) as usize;
                    if !flow[j] {
                        continue;
                    }
                    let d2 = dr * dr + dc * dc;
                    if d2 < best {
                        best = d2;
                        targets.clear();
                    }
                    if d2 == best {
                        targets.push(j);
                    }
                }
            }
            if best != i64::MAX {
                // Cells in later rings are at least `radius + 1` away.
                limit = limit.min(((best as f64).sqrt().ceil()) as i64);
            }
            radius += 1;
        }
        let share = 1.0 / targets.len() as f64;
        for &j in &targets {
            factor[j] += share;
        }
    }
    Ok(factor)
}

/// `h^(-7/3)` for `h > 0`: an inverse cube root seeded from the bit pattern
/// and refined by four division-free Newton steps, accurate to a few ulp.
#[inline]
fn inv_pow_7_3(h: f64) -> f64 {
    let mut y = f64::from_bits(0x553e_f0ff_289d_d796u64.wrapping_sub(h.to_bits() / 3));
    for _ in 0..4 {
        y = y * (4.0 - h * y * y * y) * (1.0 / 3.0);
    }
    let y2 = y * y;
    y * y2 * y2 * y2
}

#[inline]
fn pos(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Per-step constants of the local-inertial face update.
struct Kernel {
    g_dt: f64,
    inv_dx: f64,
    min_depth: f64,
}

impl Kernel {
    /// New discharge per unit width across a face, positive from `a` to `b`.
    #[inline(always)]
    fn face(&self, q: f64, za: f64, ha: f64, zb: f64, hb: f64, n: f64) -> f64 {
        let (ea, eb) = (za + ha, zb + hb);
        let top = if ea > eb { ea } else { eb };
        let bed = if za > zb { za } else { zb };
        let h_flow = top - bed;
        if !(h_flow >= self.min_depth) {
            return 0.0;
        }
        let slope = (eb - ea) * self.inv_dx;
        (q - self.g_dt * h_flow * slope) / (1.0 + self.g_dt * n * n * q.abs() * inv_pow_7_3(h_flow))
    }

    /// Outflow magnitude through an open edge into a dry ghost cell with the same bed.
    #[inline(always)]
    fn edge(&self, q: f64, h: f64, n: f64) -> f64 {
        if !(h >= self.min_depth) {
            return 0.0;
        }
        let qa = q.abs();
        let slope = h * self.inv_dx;
        (qa + self.g_dt * h * slope) / (1.0 + self.g_dt * n * n * qa * inv_pow_7_3(h))
    }
}

/// Time-stepping state for one scenario.
pub struct FloodModel {
    grid: Grid,
    params: FloodParams,
    dx: f64,
    inv_dx: f64,
    z: Vec<f64>,
    flow: Vec<bool>,
    rain_factor: Vec<f64>,
    /// Infiltration capacity in m/s.
    infil: Vec<f64>,
    manning: Vec<f64>,
    h: Vec<f64>,
    /// West faces of each cell plus the east edge: `nrows × (ncols + 1)`; positive eastward.
    qx: Vec<f64>,
    /// North faces of each cell plus the south edge: `(nrows + 1) × ncols`; positive southward.
    qy: Vec<f64>,
    scale: Vec<f64>,
    max_depth: Vec<f64>,
    mass: MassReport,
    steps: usize,
}

impl FloodModel {
    pub fn new(catchment: &Catchment, active: &Genome, params: &FloodParams) -> Result<Self> {
        params.validate()?;
        if active.len() != catchment.n_zones() {
            return Err(Error::Input(format!(
                "zone bit vector has {} genes but the catchment has {} zones",
                active.len(),
                catchment.n_zones()
            )));
        }
        let grid = catchment.grid.clone();
        let n = grid.len();
        let flow: Vec<bool> = catchment.land.iter().map(|&l| l != LandClass::Building).collect();
        let mm_hr = 1.0 / 3.6e6;
        let mut infil = Vec::with_capacity(n);
        let mut manning = Vec::with_capacity(n);
        for &l in &catchment.land {
            let (rate, nm) = match l {
                LandClass::Building => (0.0, params.manning_impervious),
                LandClass::Green => (params.infil_green, params.manning_green),
                LandClass::Impervious => (params.infil_impervious, params.manning_impervious),
            };
            infil.push(rate * mm_hr);
            manning.push(nm);
        }
        for j in active.active_zones() {
            for &i in &catchment.zones[j].cells {
                infil[i] = params.infil_permeable_active * mm_hr;
                manning[i] = params.manning_permeable;
            }
        }
        let rain_factor = roof_routing(&grid, &flow)?;
        Ok(Self {
            dx: grid.cellsize,
            inv_dx: 1.0 / grid.cellsize,
            z: catchment.elevation.clone(),
            flow,
            rain_factor,
            infil,
            manning,
            h: vec![0.0; n],
            qx: vec![0.0; grid.nrows * (grid.ncols + 1)],
            qy: vec![0.0; (grid.nrows + 1) * grid.ncols],
            scale: vec![1.0; n],
            max_depth: vec![0.0; n],
            mass: MassReport::default(),
            steps: 0,
            params: params.clone(),
            grid,
        })
    }

    /// Replaces the water depths; intended for initial conditions.
    pub fn set_depths(&mut self, depths: &[f64]) -> Result<()> {
        if depths.len() != self.h.len() {
            return Err(Error::Input("depth vector length does not match grid".into()));
        }
        for (i, &d) in depths.iter().enumerate() {
            if !(d >= 0.0 && d.is_finite()) || (!self.flow[i] && d > 0.0) {
                return Err(Error::Input(format!("invalid initial depth {d} at cell {i}")));
            }
        }
        self.h.copy_from_slice(depths);
        let a = self.grid.cell_area();
        self.mass.initial = self.h.iter().sum::<f64>() * a;
        for (m, &d) in self.max_depth.iter_mut().zip(&self.h) {
            *m = m.max(d);
        }
        Ok(())
    }

    pub fn depths(&self) -> &[f64] {
        &self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// CFL-limited time step from the current deepest cell.
    pub fn stable_dt(&self) -> Result<f64> {
        let mut h_max = 0.0f64;
        let mut finite = true;
        for &v in &self.h {
            finite &= v.is_finite();
            h_max = h_max.max(v);
        }
        if !finite {
            return Err(Error::Numerical {
                step: self.steps,
                msg: "non-finite water depth".into(),
            });
        }
        let dt = if h_max > 0.0 {
            self.params.cfl_alpha * self.dx / (GRAVITY * h_max).sqrt()
        } else {
            self.params.dt_max
        };
        Ok(dt.clamp(self.params.dt_min, self.params.dt_max))
    }

    /// Advances the state by `dt` seconds under uniform rain `rain` (m/s).
    pub fn step(&mut self, rain: f64, dt: f64) -> Result<()> {
        let (nr, nc) = (self.grid.nrows, self.grid.ncols);
        let open = self.params.boundary == Boundary::OpenAtEdges;
        let wx = nc + 1;
        let k = Kernel {
            g_dt: GRAVITY * dt,
            inv_dx: self.inv_dx,
            min_depth: self.params.min_flow_depth,
        };

        // Momentum, x faces.
        for r in 0..nr {
            let o = r * nc;
            let (z, h) = (&self.z[o..o + nc], &self.h[o..o + nc]);
            let (m, fl) = (&self.manning[o..o + nc], &self.flow[o..o + nc]);
            let q = &mut self.qx[r * wx..(r + 1) * wx];
            for c in 1..nc {
                q[c] = if fl[c - 1] && fl[c] {
                    k.face(q[c], z[c - 1], h[c - 1], z[c], h[c], 0.5 * (m[c - 1] + m[c]))
                } else {
                    0.0
                };
            }
            q[0] = if open && fl[0] { -k.edge(q[0], h[0], m[0]) } else { 0.0 };
            q[nc] = if open && fl[nc - 1] { k.edge(q[nc], h[nc - 1], m[nc - 1]) } else { 0.0 };
        }
        // Momentum, y faces.
        for r in 1..nr {
            let (a, b) = ((r - 1) * nc, r * nc);
            let (za, zb) = (&self.z[a..a + nc], &self.z[b..b + nc]);
            let (ha, hb) = (&self.h[a..a + nc], &self.h[b..b + nc]);
            let (ma, mb) = (&self.manning[a..a + nc], &self.manning[b..b + nc]);
            let (fa, fb) = (&self.flow[a..a + nc], &self.flow[b..b + nc]);
            let q = &mut self.qy[r * nc..(r + 1) * nc];
            for c in 0..nc {
                q[c] = if fa[c] && fb[c] {
                    k.face(q[c], za[c], ha[c], zb[c], hb[c], 0.5 * (ma[c] + mb[c]))
                } else {
                    0.0
                };
            }
        }
        {
            let last = (nr - 1) * nc;
            for c in 0..nc {
                self.qy[c] = if open && self.flow[c] {
                    -k.edge(self.qy[c], self.h[c], self.manning[c])
                } else {
                    0.0
                };
                let f = nr * nc + c;
                self.qy[f] = if open && self.flow[last + c] {
                    k.edge(self.qy[f], self.h[last + c], self.manning[last + c])
                } else {
                    0.0
                };
            }
        }

        // Limit outflow so no cell is drained below zero.
        let kx = dt * self.inv_dx;
        for r in 0..nr {
            let qx = &self.qx[r * wx..(r + 1) * wx];
            let qn = &self.qy[r * nc..(r + 1) * nc];
            let qs = &self.qy[(r + 1) * nc..(r + 2) * nc];
            let h = &self.h[r * nc..(r + 1) * nc];
            let sc = &mut self.scale[r * nc..(r + 1) * nc];
            for c in 0..nc {
                let out = pos(qx[c + 1]) + pos(-qx[c]) + pos(qs[c]) + pos(-qn[c]);
                let out_depth = kx * out;
                sc[c] = if out_depth > h[c] { h[c] / out_depth } else { 1.0 };
            }
        }
        for r in 0..nr {
            let sc = &self.scale[r * nc..(r + 1) * nc];
            let q = &mut self.qx[r * wx..(r + 1) * wx];
            if q[0] < 0.0 {
                q[0] *= sc[0];
            }
            for c in 1..nc {
                let v = q[c];
                if v > 0.0 {
                    q[c] = v * sc[c - 1];
                } else if v < 0.0 {
                    q[c] = v * sc[c];
                }
            }
            if q[nc] > 0.0 {
                q[nc] *= sc[nc - 1];
            }
        }
        for c in 0..nc {
            if self.qy[c] < 0.0 {
                self.qy[c] *= self.scale[c];
            }
        }
        for r in 1..nr {
            let (sa, sb) = (&self.scale[(r - 1) * nc..r * nc], &self.scale[r * nc..(r + 1) * nc]);
            let q = &mut self.qy[r * nc..(r + 1) * nc];
            for c in 0..nc {
                let v = q[c];
                if v > 0.0 {
                    q[c] = v * sa[c];
                } else if v < 0.0 {
                    q[c] = v * sb[c];
                }
            }
        }
        for c in 0..nc {
            let f = nr * nc + c;
            if self.qy[f] > 0.0 {
                self.qy[f] *= self.scale[(nr - 1) * nc + c];
            }
        }

        // Continuity, rain and infiltration.
        let area = self.grid.cell_area();
        let mut outflow = 0.0;
        if open {
            for r in 0..nr {
                outflow += pos(-self.qx[r * wx]) + pos(self.qx[r * wx + nc]);
            }
            for c in 0..nc {
                outflow += pos(-self.qy[c]) + pos(self.qy[nr * nc + c]);
            }
        }
        self.mass.outflow += outflow * self.dx * dt;

        let rain_depth = rain * dt;
        let mut infiltrated = 0.0;
        for r in 0..nr {
            let o = r * nc;
            let qx = &self.qx[r * wx..(r + 1) * wx];
            let qn = &self.qy[o..o + nc];
            let qs = &self.qy[o + nc..o + 2 * nc];
            let fl = &self.flow[o..o + nc];
            let rf = &self.rain_factor[o..o + nc];
            let inf_rate = &self.infil[o..o + nc];
            let h = &mut self.h[o..o + nc];
            let hmax = &mut self.max_depth[o..o + nc];
            for c in 0..nc {
                if !fl[c] {
                    continue;
                }
                let div = qx[c] - qx[c + 1] + qn[c] - qs[c];
                let mut d = h[c] + kx * div;
                if d < 0.0 {
                    d = 0.0;
                }
                d += rain_depth * rf[c];
                let cap = inf_rate[c] * dt;
                let inf = if cap < d { cap } else { d };
                d -= inf;
                infiltrated += inf;
                h[c] = d;
                if d > hmax[c] {
                    hmax[c] = d;
                }
            }
        }
        self.mass.infiltrated += infiltrated * area;
        self.mass.rain_in += rain_depth * self.grid.len() as f64 * area;
        self.steps += 1;
        Ok(())
    }

    /// Steps through `duration` seconds at constant rain, landing exactly on the end.
    pub fn advance(&mut self, rain: f64, duration: f64) -> Result<()> {
        let mut remaining = duration;
        while remaining > 0.0 {
            let mut dt = self.stable_dt()?;
            if dt >= remaining - 1e-9 * duration.max(1.0) {
                dt = remaining;
            }
            self.step(rain, dt)?;
            remaining -= dt;
            if remaining < 1e-12 * duration {
                break;
            }
        }
        Ok(())
    }

    /// Runs the storm followed by the settle period.
    pub fn run(mut self, storm: &DesignStorm) -> Result<DepthField> {
        if storm.steps.is_empty() {
            return Err(Error::Input("storm has no steps".into()));
        }
        for s in &storm.steps {
            self.advance(s.intensity_mm_hr / 3.6e6, s.duration_s)?;
        }
        let settle = self.params.settle_time;
        self.advance(0.0, settle)?;
        self.finish()
    }

    pub fn finish(mut self) -> Result<DepthField> {
        if self.h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: self.steps,
                msg: "non-finite water depth".into(),
            });
        }
        self.mass.stored = self.h.iter().sum::<f64>() * self.grid.cell_area();
        Ok(DepthField {
            grid: self.grid,
            max_depth: self.max_depth,
            final_depth: self.h,
            mass: self.mass,
            steps: self.steps,
        })
    }
}

/// Simulates one storm on the catchment with the given zones activated.
pub fn simulate(
    catchment: &Catchment,
    storm: &DesignStorm,
    active: &Genome,
    params: &FloodParams,
) -> Result<DepthField> {
    FloodModel::new(catchment, active, params)?.run(storm)
}
