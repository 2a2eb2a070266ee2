//! Comparison metrics between a reference and a trialled front.

use crate::error::{Error, Result};
use crate::genome::Genome;

/// Cost-risk points sorted by cost, one point per distinct cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontCurve {
    pub label: String,
    points: Vec<(f64, f64)>,
}

impl FrontCurve {
    /// Sorts by cost; where costs tie, the minimum risk is kept.
    pub fn new(label: impl Into<String>, points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        if pts.iter().any(|(c, r)| !c.is_finite() || !r.is_finite()) {
            return Err(Error::Input("front contains non-finite cost or risk".into()));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup_by(|later, first| later.0 == first.0);
        Ok(FrontCurve {
            label: label.into(),
            points: pts,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The same costs with each risk replaced by the running minimum.
    pub fn enveloped(&self) -> FrontCurve {
        let mut best = f64::INFINITY;
        let points = self
            .points
            .iter()
            .map(|&(c, r)| {
                best = best.min(r);
                (c, best)
            })
            .collect();
        FrontCurve {
            label: self.label.clone(),
            points,
        }
    }

    fn cost_span(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.0, self.points.last()?.0))
    }
}

/// Minimum risk over points costing at most `c`; `None` below the cheapest point.
pub fn envelope_risk(front: &FrontCurve, c: f64) -> Option<f64> {
    front
        .points
        .iter()
        .take_while(|p| p.0 <= c)
        .map(|p| p.1)
        .reduce(f64::min)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `(MaxRD, MedRD)` over the union of both fronts' costs within their common span.
pub fn risk_differences(reference: &FrontCurve, trial: &FrontCurve) -> Result<(f64, f64)> {
    let (Some((r0, r1)), Some((t0, t1))) = (reference.cost_span(), trial.cost_span()) else {
        return Err(Error::Input("risk differences need two non-empty fronts".into()));
    };
    let (lo, hi) = (r0.max(t0), r1.min(t1));
    let mut costs: Vec<f64> = reference
        .points
        .iter()
        .chain(&trial.points)
        .map(|p| p.0)
        .filter(|c| (lo..=hi).contains(c))
        .collect();
    costs.sort_by(f64::total_cmp);
    costs.dedup();
    if costs.is_empty() {
        return Err(Error::Input(format!(
            "fronts '{}' and '{}' share no cost range",
            reference.label, trial.label
        )));
    }
    let mut diffs: Vec<f64> = costs
        .iter()
        .map(|&c| {
            // Both envelopes are defined because c lies at or above both first costs.
            (envelope_risk(trial, c).unwrap() - envelope_risk(reference, c).unwrap()).abs()
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    Ok((*diffs.last().unwrap(), median(&diffs)))
}

/// Risk span between the baseline and the maximum intervention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRange {
    pub baseline_ddc: f64,
    pub max_intervention_ddc: f64,
}

impl RiskRange {
    pub fn new(baseline_ddc: f64, max_intervention_ddc: f64) -> Self {
        if baseline_ddc < max_intervention_ddc {
            log::warn!("baseline risk {baseline_ddc} is below maximum-intervention risk {max_intervention_ddc}");
        }
        Self {
            baseline_ddc,
            max_intervention_ddc,
        }
    }

    pub fn width(&self) -> f64 {
        self.baseline_ddc - self.max_intervention_ddc
    }
}

pub fn as_percent_of_range(value: f64, rr: &RiskRange) -> Result<f64> {
    let w = rr.width();
    if w == 0.0 {
        return Err(Error::Input("risk range has zero width".into()));
    }
    Ok(100.0 * value / w)
}

/// Trapezoidal area under the front's points.
pub fn aupf(front: &FrontCurve) -> Result<f64> {
    if front.len() < 2 {
        return Err(Error::Input(format!(
            "front '{}' needs at least two points for an area",
            front.label
        )));
    }
    Ok(front
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum())
}

/// `(trial − ref, 100·(trial − ref)/ref)`.
pub fn delta_aupf(ref_area: f64, trial_area: f64) -> Result<(f64, f64)> {
    if ref_area <= 0.0 || !ref_area.is_finite() {
        return Err(Error::Input(format!("reference area {ref_area} must be positive")));
    }
    let d = trial_area - ref_area;
    Ok((d, 100.0 * d / ref_area))
}

/// Fraction of non-baseline genomes with each zone installed.
pub fn zone_contribution(genomes: &[Genome]) -> Result<Vec<f64>> {
    let Some(first) = genomes.first() else {
        return Err(Error::Input("zone contribution of an empty front".into()));
    };
    let n = first.len();
    if genomes.iter().any(|g| g.len() != n) {
        return Err(Error::Input("front genomes differ in length".into()));
    }
    let mut counts = vec![0usize; n];
    let mut m = 0usize;
    for g in genomes.iter().filter(|g| !g.is_baseline()) {
        m += 1;
        for j in g.active_zones() {
            counts[j] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|k| if m == 0 { 0.0 } else { k as f64 / m as f64 })
        .collect())
}

/// All comparison figures for one trialled front against one reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsBundle {
    pub max_rd: f64,
    pub med_rd: f64,
    pub max_rd_pct: Option<f64>,
    pub med_rd_pct: Option<f64>,
    pub aupf_ref: f64,
    pub aupf_trial: f64,
    pub aupf_ref_raw: f64,
    pub aupf_trial_raw: f64,
    pub delta_aupf: f64,
    pub delta_aupf_pct: f64,
}

/// Differences, areas and percentages of `trial` against `reference`.
///
/// Areas use the enveloped fronts; the raw trapezoid areas are kept alongside.
pub fn compare_fronts(reference: &FrontCurve, trial: &FrontCurve, range: Option<&RiskRange>) -> Result<MetricsBundle> {
    let (max_rd, med_rd) = risk_differences(reference, trial)?;
    let pct = |v: f64| range.map(|r| as_percent_of_range(v, r)).transpose();
    let aupf_ref = aupf(&reference.enveloped())?;
    let aupf_trial = aupf(&trial.enveloped())?;
    let (d, dp) = delta_aupf(aupf_ref, aupf_trial)?;
    Ok(MetricsBundle {
        max_rd,
        med_rd,
        max_rd_pct: pct(max_rd)?,
        med_rd_pct: pct(med_rd)?,
        aupf_ref,
        aupf_trial,
        aupf_ref_raw: aupf(reference)?,
        aupf_trial_raw: aupf(trial)?,
        delta_aupf: d,
        delta_aupf_pct: dp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fc(pts: &[(f64, f64)]) -> FrontCurve {
        FrontCurve::new("t", pts.iter().copied()).unwrap()
    }

    #[test]
    fn ties_keep_minimum_risk() {
        let f = fc(&[(5.0, 4.0), (0.0, 10.0), (5.0, 3.0)]);
        assert_eq!(f.points(), &[(0.0, 10.0), (5.0, 3.0)]);
    }

    #[test]
    fn envelope_examples() {
        let f = fc(&[(0.0, 10.0), (5.0, 4.0)]);
        assert_eq!(envelope_risk(&f, 3.0), Some(10.0));
        assert_eq!(envelope_risk(&f, 5.0), Some(4.0));
        assert_eq!(envelope_risk(&f, 50.0), Some(4.0));
        assert_eq!(envelope_risk(&f, -1.0), None);
        let g = fc(&[(0.0, 10.0), (2.0, 4.0), (3.0, 6.0)]);
        assert_eq!(envelope_risk(&g, 3.0), Some(4.0));
    }

    #[test]
    fn risk_difference_examples() {
        let r = fc(&[(0.0, 10.0), (2.0, 6.0), (4.0, 3.0), (6.0, 1.0)]);
        assert_eq!(risk_differences(&r, &r).unwrap(), (0.0, 0.0));
        let shifted = fc(&[(0.0, 12.0), (2.0, 8.0), (4.0, 5.0), (6.0, 3.0)]);
        assert_eq!(risk_differences(&shifted, &r).unwrap(), (2.0, 2.0));

        let base: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 100.0 - k as f64)).collect();
        let mut bumped = base.clone();
        bumped[0].1 += 7.0;
        let (max, med) = risk_differences(&fc(&base), &fc(&bumped)).unwrap();
        assert_eq!((max, med), (7.0, 0.0));
    }

    #[test]
    fn even_count_median_is_mean_of_middle_pair() {
        let r = fc(&[(0.0, 10.0), (1.0, 8.0), (2.0, 6.0), (3.0, 4.0)]);
        let t = fc(&[(0.0, 10.0), (1.0, 9.0), (2.0, 9.0), (3.0, 9.0)]);
        // gaps: 0, 1, 3, 5
        assert_eq!(risk_differences(&r, &t).unwrap(), (5.0, 2.0));
    }

    #[test]
    fn costs_outside_overlap_are_clipped() {
        let r = fc(&[(0.0, 10.0), (10.0, 0.0)]);
        let t = fc(&[(0.0, 10.0), (4.0, 8.0)]);
        // C = {0, 4}; at 4 the reference envelope is still 10.
        assert_eq!(risk_differences(&r, &t).unwrap(), (2.0, 1.0));
        let far = fc(&[(20.0, 1.0), (30.0, 0.0)]);
        assert!(risk_differences(&r, &far).is_err());
    }

    #[test]
    fn percent_examples() {
        let rr = RiskRange::new(10.0, 0.0);
        assert_eq!(as_percent_of_range(0.0, &rr).unwrap(), 0.0);
        assert_eq!(as_percent_of_range(10.0, &rr).unwrap(), 100.0);
        assert!((as_percent_of_range(5.8, &rr).unwrap() - 58.0).abs() < 1e-12);
        assert!(as_percent_of_range(1.0, &RiskRange::new(3.0, 3.0)).is_err());
    }

    #[test]
    fn aupf_examples() {
        assert_eq!(aupf(&fc(&[(0.0, 10.0), (10.0, 0.0)])).unwrap(), 50.0);
        assert_eq!(aupf(&fc(&[(0.0, 3.0), (7.0, 3.0)])).unwrap(), 21.0);
        assert_eq!(aupf(&fc(&[(0.0, 10.0), (5.0, 5.0), (10.0, 0.0)])).unwrap(), 50.0);
        assert!(aupf(&fc(&[(0.0, 1.0)])).is_err());
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_aupf(50.0, 50.0).unwrap(), (0.0, 0.0));
        assert_eq!(delta_aupf(50.0, 87.5).unwrap(), (37.5, 75.0));
        assert!(delta_aupf(50.0, 40.0).unwrap().1 < 0.0);
        assert!(delta_aupf(0.0, 1.0).is_err());
    }

    #[test]
    fn contribution_examples() {
        let mut front = vec![Genome::zeros(3)];
        for k in 0..10 {
            front.push(Genome::from_bits(vec![true, false, k < 3]));
        }
        assert_eq!(zone_contribution(&front).unwrap(), vec![1.0, 0.0, 0.3]);
        assert_eq!(zone_contribution(&[Genome::zeros(2)]).unwrap(), vec![0.0, 0.0]);
        assert!(zone_contribution(&[]).is_err());
    }

    #[test]
    fn comparison_bundle_uses_envelopes() {
        let r = fc(&[(0.0, 10.0), (10.0, 0.0)]);
        let t = fc(&[(0.0, 10.0), (5.0, 12.0), (10.0, 5.0)]);
        let b = compare_fronts(&r, &t, Some(&RiskRange::new(10.0, 0.0))).unwrap();
        assert_eq!(b.aupf_ref, 50.0);
        assert_eq!(b.aupf_trial, 5.0 * 10.0 + 5.0 * 7.5);
        assert_eq!(b.aupf_trial_raw, 5.0 * 11.0 + 5.0 * 8.5);
        assert_eq!((b.delta_aupf, b.delta_aupf_pct), (37.5, 75.0));
        assert_eq!(b.max_rd_pct, Some(50.0));
    }

    fn arb_front() -> impl Strategy<Value = FrontCurve> {
        proptest::collection::vec((0u16..200, 0.0f64..100.0), 2..25)
            .prop_map(|v| FrontCurve::new("p", v.into_iter().map(|(c, r)| (c as f64, r))).unwrap())
            .prop_filter("needs two costs", |f| f.len() >= 2)
    }

    proptest! {
        #[test]
        fn max_at_least_median(a in arb_front(), b in arb_front()) {
            if let Ok((max, med)) = risk_differences(&a, &b) {
                prop_assert!(max >= med && med >= 0.0);
                prop_assert_eq!(risk_differences(&b, &a).unwrap(), (max, med));
            }
        }

        #[test]
        fn envelope_non_increasing(f in arb_front(), c in 0.0f64..200.0, dc in 0.0f64..50.0) {
            if let Some(r) = envelope_risk(&f, c) {
                prop_assert!(envelope_risk(&f, c + dc).unwrap() <= r);
            }
        }

        #[test]
        fn aupf_additive_and_collinear(f in arb_front(), t in 0.05f64..0.95, k in 0usize..24) {
            let pts = f.points();
            let i = k % (pts.len() - 1);
            let (a, b) = (pts[i], pts[i + 1]);
            let mid = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            let mut more = pts.to_vec();
            more.push(mid);
            let whole = aupf(&f).unwrap();
            prop_assert!((aupf(&fc(&more)).unwrap() - whole).abs() <= 1e-9 * whole.abs().max(1.0));
            let left = fc(&pts[..=i + 1]);
            let right = fc(&pts[i + 1..]);
            let split = aupf(&left).unwrap() + if right.len() >= 2 { aupf(&right).unwrap() } else { 0.0 };
            prop_assert!((split - whole).abs() <= 1e-9 * whole.abs().max(1.0));
        }
    }
}
