//! Life-cycle cost, expected annual damage and benefit-cost ratios.

use crate::catchment::Zone;
use crate::error::{Error, Result};
use crate::genome::Genome;

#[derive(Debug, Clone, PartialEq)]
pub struct CostParams {
    /// Capital cost per m² at the guideline base year.
    pub capital_per_m2: f64,
    /// Operational cost per m² per year at the base year.
    pub operational_per_m2_yr: f64,
    pub inflation: f64,
    /// Years from the guideline base year to the analysis year.
    pub inflate_years: u32,
    pub lifespan_years: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            capital_per_m2: 50.0,
            operational_per_m2_yr: 1.0,
            inflation: 0.029,
            inflate_years: 0,
            lifespan_years: 40.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.capital_per_m2, self.operational_per_m2_yr, self.inflation]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
            && self.lifespan_years >= 1.0
            && self.lifespan_years.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config("cost parameters must be >= 0 with lifespan >= 1 year".into()))
        }
    }

    /// Inflated lifetime cost of one square metre.
    pub fn unit_cost(&self) -> f64 {
        inflate(self.capital_per_m2, self.inflation, self.inflate_years)
            + inflate(self.operational_per_m2_yr, self.inflation, self.inflate_years) * self.lifespan_years
    }
}

/// `FV = BV·(1 + i)^n`.
pub fn inflate(base_value: f64, inflation: f64, years: u32) -> f64 {
    base_value * (1.0 + inflation).powi(years as i32)
}

pub fn zone_lcc(zone: &Zone, cp: &CostParams) -> f64 {
    cp.unit_cost() * zone.area
}

pub fn candidate_lcc(genome: &Genome, zones: &[Zone], cp: &CostParams) -> Result<f64> {
    if genome.len() != zones.len() {
        return Err(Error::Input(format!(
            "genome has {} genes for {} zones",
            genome.len(),
            zones.len()
        )));
    }
    Ok(genome.active_zones().fold(0.0, |acc, j| acc + zone_lcc(&zones[j], cp)))
}

/// Damage extrapolated beyond the longest return period from the last two,
/// floored at zero.
pub fn d_infin_between(t_prev: f64, ddc_prev: f64, t_last: f64, ddc_last: f64) -> f64 {
    let ratio = (1.0 / t_last) / (1.0 / t_prev - 1.0 / t_last);
    (ddc_last + (ddc_last - ddc_prev) * ratio).max(0.0)
}

/// Tail damage for the 50/100-year pair: `max(0, 2·DDC₁₀₀ − DDC₅₀)`.
pub fn d_infin(ddc_t100: f64, ddc_t50: f64) -> f64 {
    (2.0 * ddc_t100 - ddc_t50).max(0.0)
}

/// Direct damage costs keyed by strictly ascending return period.
#[derive(Debug, Clone, PartialEq)]
pub struct DdcByPeriod(Vec<(f64, f64)>);

impl DdcByPeriod {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Input("expected annual damage needs at least two return periods".into()));
        }
        for w in pairs.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Input("return periods must be strictly ascending".into()));
            }
        }
        if pairs.iter().any(|&(t, d)| !(t > 1.0) || !(d >= 0.0)) {
            return Err(Error::Input("return periods must exceed 1 and damages be >= 0".into()));
        }
        Ok(Self(pairs))
    }

    pub fn from_slices(periods: &[f64], ddc: &[f64]) -> Result<Self> {
        if periods.len() != ddc.len() {
            return Err(Error::Input("period and damage lists differ in length".into()));
        }
        Self::new(periods.iter().copied().zip(ddc.iter().copied()).collect())
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.0
    }
}

/// Trapezoidal expected annual damage over exceedance probability, with the
/// tail closed by [`d_infin_between`].
pub fn ead(ddc: &DdcByPeriod) -> f64 {
    let p = &ddc.0;
    let mut sum = 0.0;
    for w in p.windows(2) {
        let ((t0, d0), (t1, d1)) = (w[0], w[1]);
        sum += (d0 + d1) * (1.0 / t0 - 1.0 / t1);
    }
    let (t_prev, d_prev) = p[p.len() - 2];
    let (t_last, d_last) = p[p.len() - 1];
    sum += (d_last + d_infin_between(t_prev, d_prev, t_last, d_last)) * (1.0 / t_last);
    0.5 * sum
}

/// Lifetime benefit over cost; `None` when the cost is zero (the baseline).
pub fn benefit_cost(ead_baseline: f64, ead_bgi: f64, lifespan_years: f64, lcc: f64) -> Option<f64> {
    if lcc > 0.0 {
        Some((ead_baseline - ead_bgi) * lifespan_years / lcc)
    } else {
        None
    }
}
