//! Design rainstorms: depth-duration-frequency totals, peak-centred
//! hyetographs and climate uplifts.

use crate::error::{Error, Result};

/// Catchment descriptors of the depth-duration-frequency relation
/// `ln R = (c·y + d1)·ln D + e·y + f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdfDescriptors {
    pub c: f64,
    pub d1: f64,
    pub e: f64,
    pub f: f64,
}

impl DdfDescriptors {
    pub fn new(c: f64, d1: f64, e: f64, f: f64) -> Result<Self> {
        if ![c, d1, e, f].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("DDF descriptors must be finite".into()));
        }
        Ok(Self { c, d1, e, f })
    }

    /// Sensitivity of `ln R` to the Gumbel variate at duration `hours`.
    pub fn variate_slope(&self, hours: f64) -> f64 {
        self.c * hours.ln() + self.e
    }
}

/// Shape parameters of the cumulative storm profile `(1 − a^z)/(1 − a)`, `z = x^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub a: f64,
    pub b: f64,
}

impl ProfileParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Config(format!("profile parameter a={a} must lie in (0,1)")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("profile parameter b={b} must be positive")));
        }
        Ok(Self { a, b })
    }
}

/// One constant-intensity interval of a hyetograph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StormStep {
    pub duration_s: f64,
    pub intensity_mm_hr: f64,
}

impl StormStep {
    pub fn depth_mm(&self) -> f64 {
        self.intensity_mm_hr * self.duration_s / 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignStorm {
    /// Return period in years. `NaN` for storms read from a file.
    pub return_period: f64,
    pub duration_min: f64,
    pub total_depth_mm: f64,
    pub steps: Vec<StormStep>,
}

impl DesignStorm {
    /// Builds a storm from explicit steps, e.g. one read back from CSV.
    pub fn from_steps(return_period: f64, steps: Vec<StormStep>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Input("storm has no steps".into()));
        }
        for s in &steps {
            if !(s.duration_s > 0.0) || !(s.intensity_mm_hr >= 0.0) || !s.intensity_mm_hr.is_finite() {
                return Err(Error::Input(format!("invalid storm step {s:?}")));
            }
        }
        let duration_min = steps.iter().map(|s| s.duration_s).sum::<f64>() / 60.0;
        let total_depth_mm = steps.iter().map(StormStep::depth_mm).sum();
        Ok(Self {
            return_period,
            duration_min,
            total_depth_mm,
            steps,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.steps.iter().map(|s| s.duration_s).sum()
    }

    /// Sum of step depths; equals `total_depth_mm` up to rounding.
    pub fn step_depth_mm(&self) -> f64 {
        self.steps.iter().map(StormStep::depth_mm).sum()
    }

    /// Scales every intensity and the total depth by `1 + u`.
    pub fn apply_uplift(&self, u: ClimateUplift) -> DesignStorm {
        let k = 1.0 + u.fraction();
        DesignStorm {
            return_period: self.return_period,
            duration_min: self.duration_min,
            total_depth_mm: self.total_depth_mm * k,
            steps: self
                .steps
                .iter()
                .map(|s| StormStep {
                    duration_s: s.duration_s,
                    intensity_mm_hr: s.intensity_mm_hr * k,
                })
                .collect(),
        }
    }
}

/// Fractional rainfall increase representing a future climate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ClimateUplift(f64);

impl ClimateUplift {
    pub const NONE: ClimateUplift = ClimateUplift(0.0);
    pub const LOW: ClimateUplift = ClimateUplift(0.15);
    pub const MEDIUM: ClimateUplift = ClimateUplift(0.30);
    pub const HIGH: ClimateUplift = ClimateUplift(0.45);

    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction >= 0.0 && fraction.is_finite()) {
            return Err(Error::Config(format!("uplift {fraction} must be a finite fraction >= 0")));
        }
        Ok(Self(fraction))
    }

    pub fn fraction(self) -> f64 {
        self.0
    }
}

/// `y = −ln(−ln(1 − 1/T))`.
pub fn gumbel_reduced_variate(t: f64) -> Result<f64> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(Error::Domain(format!("return period {t} must exceed 1 year")));
    }
    // ln(1 − 1/T) via ln_1p keeps precision for long return periods.
    Ok(-(-(-1.0 / t).ln_1p()).ln())
}

/// Total rainfall depth (mm) for return period `t` (years) and duration `hours`.
pub fn ddf_total_depth(t: f64, hours: f64, desc: &DdfDescriptors) -> Result<f64> {
    if !(hours > 0.0) || !hours.is_finite() {
        return Err(Error::Domain(format!("duration {hours} h must be positive")));
    }
    let y = gumbel_reduced_variate(t)?;
    Ok(((desc.c * y + desc.d1) * hours.ln() + desc.e * y + desc.f).exp())
}

/// Fraction of the storm depth falling in the central proportion `x` of its duration.
pub fn profile_fraction(x: f64, p: &ProfileParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("profile proportion {x} outside [0,1]")));
    }
    let z = x.powf(p.b);
    Ok((1.0 - p.a.powf(z)) / (1.0 - p.a))
}

/// Discretises a peak-centred hyetograph of depth `total_mm` into `n_steps`
/// equal intervals.
///
/// Window `k` (k = 1..n/2) is the central `2k` steps; the pair of steps added
/// by window `k` carries `total·(F(2k/n) − F(2(k−1)/n))`, split equally
/// between its two mirrored steps.
pub fn build_hyetograph(
    total_mm: f64,
    duration_min: f64,
    n_steps: usize,
    p: &ProfileParams,
) -> Result<Vec<StormStep>> {
    if n_steps < 2 || !n_steps.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "hyetograph step count {n_steps} must be even and at least 2"
        )));
    }
    if !(total_mm > 0.0) || !(duration_min > 0.0) {
        return Err(Error::Domain("storm depth and duration must be positive".into()));
    }
    let half = n_steps / 2;
    let step_s = duration_min * 60.0 / n_steps as f64;
    let mut steps = vec![
        StormStep {
            duration_s: step_s,
            intensity_mm_hr: 0.0,
        };
        n_steps
    ];
    let mut prev = 0.0;
    for k in 1..=half {
        let x = (2 * k) as f64 / n_steps as f64;
        let cum = if k == half { 1.0 } else { profile_fraction(x, p)? };
        let pair_depth = total_mm * (cum - prev);
        prev = cum;
        let intensity = 0.5 * pair_depth * 3600.0 / step_s;
        steps[half - k].intensity_mm_hr = intensity;
        steps[half + k - 1].intensity_mm_hr = intensity;
    }
    Ok(steps)
}

/// DDF total plus hyetograph for one return period.
pub fn design_storm(
    t: f64,
    duration_min: f64,
    n_steps: usize,
    desc: &DdfDescriptors,
    p: &ProfileParams,
) -> Result<DesignStorm> {
    let total = ddf_total_depth(t, duration_min / 60.0, desc)?;
    let steps = build_hyetograph(total, duration_min, n_steps, p)?;
    Ok(DesignStorm {
        return_period: t,
        duration_min,
        total_depth_mm: total,
        steps,
    })
}

/// Return period on the baseline DDF scale whose depth equals the uplifted
/// depth of `t_base`.
pub fn equivalent_return_period(
    t_base: f64,
    u: ClimateUplift,
    hours: f64,
    desc: &DdfDescriptors,
) -> Result<f64> {
    let slope = desc.variate_slope(hours);
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::Domain(
            "c·ln D + e is zero; uplift cannot be expressed as a return-period shift".into(),
        ));
    }
    let y = gumbel_reduced_variate(t_base)?;
    let y_eq = y + u.fraction().ln_1p() / slope;
    // 1 − exp(−exp(−y')) computed as −expm1(−exp(−y')).
    let p = -(-(-y_eq).exp()).exp_m1();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "uplift maps to a non-representable exceedance probability {p}"
        )));
    }
    Ok(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gumbel_variate_values() {
        assert!(close(gumbel_reduced_variate(2.0).unwrap(), -(2f64.ln().ln()), 1e-15));
        assert!(close(gumbel_reduced_variate(2.0).unwrap(), 0.36651, 1e-5));
        assert!(close(gumbel_reduced_variate(10.0).unwrap(), 2.25037, 1e-5));
        assert!(close(gumbel_reduced_variate(100.0).unwrap(), 4.60015, 1e-5));
        assert!(matches!(gumbel_reduced_variate(1.0), Err(Error::Domain(_))));
        assert!(gumbel_reduced_variate(0.5).is_err());
    }

    #[test]
    fn ddf_depth_examples() {
        let flat = DdfDescriptors::new(0.0, 0.4, 0.0, 2.0).unwrap();
        for t in [2.0, 10.0, 100.0] {
            assert!(close(ddf_total_depth(t, 1.0, &flat).unwrap(), 2f64.exp(), 1e-12));
        }
        let d = DdfDescriptors::new(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(close(ddf_total_depth(100.0, 1.0, &d).unwrap(), 99.50, 5e-3));
        let d = DdfDescriptors::new(0.0, 0.0, 1.0, 2.0).unwrap();
        assert!(close(ddf_total_depth(2.0, 1.0, &d).unwrap(), 10.661, 1e-3));
        assert!(ddf_total_depth(10.0, 0.0, &d).is_err());
    }

    #[test]
    fn profile_fraction_examples() {
        let p = ProfileParams::new(0.1, 0.8).unwrap();
        assert_eq!(profile_fraction(0.0, &p).unwrap(), 0.0);
        assert!(close(profile_fraction(1.0, &p).unwrap(), 1.0, 1e-15));
        assert!(close(profile_fraction(0.5, &p).unwrap(), 0.81502, 2e-5));
        assert!(profile_fraction(1.01, &p).is_err());
        assert!(profile_fraction(-0.1, &p).is_err());
        assert!(ProfileParams::new(1.0, 0.8).is_err());
    }

    #[test]
    fn two_step_hyetograph_is_split_evenly() {
        let p = ProfileParams::new(0.3, 1.5).unwrap();
        let steps = build_hyetograph(10.0, 30.0, 2, &p).unwrap();
        assert!(close(steps[0].depth_mm(), 5.0, 1e-12));
        assert!(close(steps[1].depth_mm(), 5.0, 1e-12));
    }

    #[test]
    fn four_step_hyetograph_central_pair() {
        let p = ProfileParams::new(0.1, 0.8).unwrap();
        let steps = build_hyetograph(10.0, 30.0, 4, &p).unwrap();
        let central = steps[1].depth_mm() + steps[2].depth_mm();
        let f_half = (1.0 - 0.1f64.powf(0.5f64.powf(0.8))) / 0.9;
        assert!(close(central, 10.0 * f_half, 1e-12));
        assert!(close(steps[0].depth_mm() + steps[3].depth_mm(), 10.0 * (1.0 - f_half), 1e-12));
        assert_eq!(steps[0], steps[3]);
        assert_eq!(steps[1], steps[2]);
    }

    #[test]
    fn odd_step_count_rejected() {
        let p = ProfileParams::new(0.1, 0.8).unwrap();
        assert!(matches!(build_hyetograph(10.0, 30.0, 3, &p), Err(Error::Config(_))));
        assert!(build_hyetograph(10.0, 30.0, 0, &p).is_err());
    }

    #[test]
    fn uplift_examples() {
        let p = ProfileParams::new(0.1, 0.8).unwrap();
        let steps = build_hyetograph(49.0, 120.0, 8, &p).unwrap();
        let storm = DesignStorm {
            return_period: 100.0,
            duration_min: 120.0,
            total_depth_mm: 49.0,
            steps,
        };
        assert_eq!(storm.apply_uplift(ClimateUplift::NONE), storm);
        let up = storm.apply_uplift(ClimateUplift::LOW);
        assert!(close(up.total_depth_mm, 56.35, 1e-9));
        assert!(close(up.step_depth_mm(), 56.35, 1e-9));
        assert_eq!(up.duration_s(), storm.duration_s());
        let mut s20 = storm.clone();
        s20.total_depth_mm = 20.0;
        assert!(close(s20.apply_uplift(ClimateUplift::HIGH).total_depth_mm, 29.0, 1e-12));
        assert!(ClimateUplift::new(-0.1).is_err());
    }

    #[test]
    fn equivalent_return_period_examples() {
        // c·ln D + e = 1 at D = 1 h.
        let d = DdfDescriptors::new(0.3, 0.2, 1.0, 1.5).unwrap();
        assert!(close(
            equivalent_return_period(100.0, ClimateUplift::NONE, 1.0, &d).unwrap(),
            100.0,
            1e-9
        ));
        let t_eq = equivalent_return_period(100.0, ClimateUplift::HIGH, 1.0, &d).unwrap();
        // Direct evaluation: y' = y(100) + ln 1.45, T = 1/(1 − exp(−exp(−y'))).
        let y = -(-(1.0f64 - 0.01).ln()).ln() + 1.45f64.ln();
        let oracle = 1.0 / (1.0 - (-(-y).exp()).exp());
        assert!(close(t_eq, oracle, 1e-9 * oracle));
        assert!((t_eq - 144.8).abs() < 0.2, "{t_eq}");
        let degenerate = DdfDescriptors::new(0.0, 0.3, 0.0, 1.0).unwrap();
        assert!(equivalent_return_period(100.0, ClimateUplift::LOW, 1.0, &degenerate).is_err());
    }

    proptest! {
        #[test]
        fn gumbel_is_increasing(a in 1.001f64..1e4, b in 1.001f64..1e4) {
            prop_assume!(a < b);
            prop_assert!(gumbel_reduced_variate(a).unwrap() < gumbel_reduced_variate(b).unwrap());
        }

        #[test]
        fn ddf_increasing_when_slope_positive(
            c in -0.05f64..0.05, d1 in 0.1f64..0.6, e in 0.2f64..0.4, f in 1.0f64..3.0,
            hours in 0.25f64..12.0, a in 1.5f64..500.0, b in 1.5f64..500.0,
        ) {
            let d = DdfDescriptors::new(c, d1, e, f).unwrap();
            prop_assume!(d.variate_slope(hours) > 0.0 && (a - b).abs() > 1e-3);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(ddf_total_depth(lo, hours, &d).unwrap() < ddf_total_depth(hi, hours, &d).unwrap());
        }

        #[test]
        fn profile_is_monotone_and_bounded(a in 0.01f64..0.99, b in 0.1f64..3.0, x in 0.0f64..1.0, dx in 0.0f64..1.0) {
            let p = ProfileParams::new(a, b).unwrap();
            let x2 = (x + dx).min(1.0);
            let y1 = profile_fraction(x, &p).unwrap();
            let y2 = profile_fraction(x2, &p).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&y1));
            prop_assert!(y2 >= y1 - 1e-15);
        }

        #[test]
        fn hyetograph_symmetric_and_conservative(
            a in 0.01f64..0.99, b in 0.1f64..3.0, r in 0.1f64..200.0, half in 1usize..40, dur in 5.0f64..720.0,
        ) {
            let p = ProfileParams::new(a, b).unwrap();
            let n = 2 * half;
            let steps = build_hyetograph(r, dur, n, &p).unwrap();
            for k in 0..n {
                prop_assert_eq!(steps[k], steps[n - 1 - k]);
                prop_assert!(steps[k].intensity_mm_hr >= 0.0);
            }
            let total: f64 = steps.iter().map(StormStep::depth_mm).sum();
            prop_assert!((total - r).abs() <= 1e-9 * r);
        }

        #[test]
        fn uplift_scales_depth(u in 0.0f64..1.0, r in 1.0f64..100.0) {
            let p = ProfileParams::new(0.1, 0.8).unwrap();
            let storm = DesignStorm::from_steps(10.0, build_hyetograph(r, 30.0, 10, &p).unwrap()).unwrap();
            let up = storm.apply_uplift(ClimateUplift::new(u).unwrap());
            prop_assert!((up.total_depth_mm - (1.0 + u) * storm.total_depth_mm).abs() <= 1e-12 * up.total_depth_mm);
        }

        #[test]
        fn equivalent_period_round_trips(u in 0.0f64..0.6, t in 2.0f64..200.0) {
            let d = DdfDescriptors::new(-0.02, 0.35, 0.28, 2.2).unwrap();
            let hours = 0.5;
            let t_eq = equivalent_return_period(t, ClimateUplift::new(u).unwrap(), hours, &d).unwrap();
            let ratio = ddf_total_depth(t_eq, hours, &d).unwrap() / ddf_total_depth(t, hours, &d).unwrap();
            prop_assert!((ratio - (1.0 + u)).abs() <= 1e-9);
        }
    }
}
