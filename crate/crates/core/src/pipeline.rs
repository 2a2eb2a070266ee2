//! End-to-end workflows: single-period and composite optimisation,
//! re-evaluation of a front under another storm, and climate stress tests.
//!
//! Candidate simulations run on a dedicated worker pool. Batches are
//! de-duplicated, evaluated in parallel, and merged back in submission
//! order, so results do not depend on the number of workers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::cache::{scenario_digest, storm_digest, CacheKey, CachedOutcome, SimCache};
use crate::catchment::{load_catchment, Catchment, CatchmentPaths};
use crate::config::{RunConfig, StormConfig};
use crate::economics::{benefit_cost, candidate_lcc, ead, CostParams, DdcByPeriod};
use crate::error::{Error, Result};
use crate::flood::{simulate, FloodParams};
use crate::genome::Genome;
use crate::io::{BcRow, FrontRow, FrontTable, StressRow};
use crate::metrics::{compare_fronts, zone_contribution, FrontCurve, MetricsBundle, RiskRange};
use crate::nsga2::{self, Evaluation, Evaluator, GaConfig, Individual, ParetoFront};
use crate::risk::{DamageCurve, DamageCurves, RiskAssessment, RiskModel};
use crate::storm::{design_storm, ClimateUplift, DesignStorm};
use crate::BuildingCategory;

/// File name of the persistent cache inside the output directory.
pub const CACHE_FILE: &str = "sim_cache.tsv";

/// A loaded catchment with everything needed to score a genome.
pub struct Scenario {
    pub catchment: Catchment,
    pub risk: RiskModel,
    pub flood: FloodParams,
    pub costs: CostParams,
    pub storm: StormConfig,
    digest: [u8; 32],
}

impl Scenario {
    pub fn new(
        catchment: Catchment,
        curves: DamageCurves,
        flood: FloodParams,
        costs: CostParams,
        storm: StormConfig,
    ) -> Result<Self> {
        flood.validate()?;
        costs.validate()?;
        let digest = scenario_digest(&catchment, &curves, &flood);
        let risk = RiskModel::new(&catchment, curves)?;
        Ok(Scenario {
            catchment,
            risk,
            flood,
            costs,
            storm,
            digest,
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let p = &cfg.paths;
        let catchment = load_catchment(&CatchmentPaths {
            dem: &p.dem,
            green: p.green.as_deref(),
            buildings: &p.buildings,
            zones: &p.zones,
        })?;
        let curves = DamageCurves::new(
            DamageCurve::load(BuildingCategory::Residential, &p.residential_curve)?,
            DamageCurve::load(BuildingCategory::NonResidential, &p.non_residential_curve)?,
        )?;
        Self::new(catchment, curves, cfg.flood.clone(), cfg.costs.clone(), cfg.storm.clone())
    }

    pub fn n_zones(&self) -> usize {
        self.catchment.n_zones()
    }

    /// Design storm for return period `t`, scaled by `1 + uplift`.
    pub fn design_storm(&self, t: f64, uplift: f64) -> Result<DesignStorm> {
        let s = &self.storm;
        let storm = design_storm(t, s.duration_min, s.steps, &s.ddf, &s.profile)?;
        Ok(if uplift == 0.0 {
            storm
        } else {
            storm.apply_uplift(ClimateUplift::new(uplift)?)
        })
    }

    pub fn lcc(&self, genome: &Genome) -> Result<f64> {
        candidate_lcc(genome, &self.catchment.zones, &self.costs)
    }
}

/// Cost and damage of one candidate under one storm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateResult {
    pub lcc: f64,
    pub ddc: f64,
    pub failed: bool,
}

/// Scenario plus cache and worker pool.
pub struct Engine {
    scenario: Scenario,
    cache: Option<SimCache>,
    pool: rayon::ThreadPool,
    simulations: AtomicUsize,
}

impl Engine {
    pub fn new(scenario: Scenario, cache: Option<SimCache>, workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("bluegreen-worker-{i}"))
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Engine {
            scenario,
            cache,
            pool,
            simulations: AtomicUsize::new(0),
        })
    }

    /// Loads the scenario and, when enabled, the on-disk cache in the output directory.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let scenario = Scenario::from_config(cfg)?;
        let cache = if cfg.cache {
            let dir = &cfg.paths.output_dir;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some(SimCache::open(&dir.join(CACHE_FILE))?)
        } else {
            None
        };
        Self::new(scenario, cache, cfg.workers)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cache(&self) -> Option<&SimCache> {
        self.cache.as_ref()
    }

    /// Flood simulations run so far by this engine.
    pub fn simulations(&self) -> usize {
        self.simulations.load(Ordering::Relaxed)
    }

    fn simulate_ddc(&self, genome: &Genome, storm: &DesignStorm) -> Result<CachedOutcome> {
        self.simulations.fetch_add(1, Ordering::Relaxed);
        let sc = &self.scenario;
        match simulate(&sc.catchment, storm, genome, &sc.flood) {
            Ok(field) => Ok(CachedOutcome {
                ddc: sc.risk.total_ddc(&field, &sc.catchment),
                failed: false,
            }),
            Err(e @ Error::Numerical { .. }) => {
                log::warn!("simulation failed for genome {}: {e}", genome.to_hex());
                Ok(CachedOutcome {
                    ddc: f64::INFINITY,
                    failed: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Damage of every genome under `storm`, in input order.
    ///
    /// Failed simulations yield an infinite damage and `failed = true`.
    pub fn ddc_batch(&self, genomes: &[Genome], storm: &DesignStorm) -> Result<Vec<CachedOutcome>> {
        let sd = storm_digest(storm);
        let keys: Vec<CacheKey> = genomes
            .iter()
            .map(|g| CacheKey::new(&self.scenario.digest, &sd, g))
            .collect();
        let mut known: HashMap<&CacheKey, CachedOutcome> = HashMap::new();
        let mut todo: Vec<usize> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            if known.contains_key(k) || todo.iter().any(|&j| keys[j] == *k) {
                continue;
            }
            match self.cache.as_ref().and_then(|c| c.get(k)) {
                Some(v) => {
                    known.insert(k, v);
                }
                None => todo.push(i),
            }
        }
        let fresh: Vec<Result<CachedOutcome>> = self
            .pool
            .install(|| todo.par_iter().map(|&i| self.simulate_ddc(&genomes[i], storm)).collect());
        for (&i, r) in todo.iter().zip(fresh) {
            let v = r?;
            if let Some(c) = &self.cache {
                c.insert(keys[i].clone(), v)?;
            }
            known.insert(&keys[i], v);
        }
        Ok(keys.iter().map(|k| known[k]).collect())
    }

    pub fn evaluate_candidate(&self, genome: &Genome, storm: &DesignStorm) -> Result<CandidateResult> {
        let out = self.ddc_batch(std::slice::from_ref(genome), storm)?[0];
        Ok(CandidateResult {
            lcc: self.scenario.lcc(genome)?,
            ddc: out.ddc,
            failed: out.failed,
        })
    }

    /// Per-building detail for one genome; always simulates.
    pub fn assess(&self, genome: &Genome, storm: &DesignStorm) -> Result<RiskAssessment> {
        let sc = &self.scenario;
        self.simulations.fetch_add(1, Ordering::Relaxed);
        let field = simulate(&sc.catchment, storm, genome, &sc.flood)?;
        Ok(sc.risk.assess(&field, &sc.catchment))
    }

    /// Cost and damage of each genome under `storm`.
    pub fn reevaluate(&self, genomes: &[Genome], storm: &DesignStorm) -> Result<Vec<CandidateResult>> {
        let ddc = self.ddc_batch(genomes, storm)?;
        genomes
            .iter()
            .zip(ddc)
            .map(|(g, o)| {
                Ok(CandidateResult {
                    lcc: self.scenario.lcc(g)?,
                    ddc: o.ddc,
                    failed: o.failed,
                })
            })
            .collect()
    }

    /// Per-period damages for each genome, one column per storm.
    fn period_matrix(&self, genomes: &[Genome], storms: &[DesignStorm]) -> Result<Vec<Vec<CachedOutcome>>> {
        let cols = storms
            .iter()
            .map(|s| self.ddc_batch(genomes, s))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..genomes.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    }
}

/// Risk is the damage at a single return period.
pub struct SinglePeriodEvaluator<'a> {
    pub engine: &'a Engine,
    pub storm: DesignStorm,
}

impl Evaluator for SinglePeriodEvaluator<'_> {
    fn evaluate(&self, genomes: &[Genome]) -> Result<Vec<Evaluation>> {
        Ok(self
            .engine
            .reevaluate(genomes, &self.storm)?
            .into_iter()
            .map(|r| Evaluation {
                failed: r.failed,
                ..Evaluation::new(r.lcc, r.ddc)
            })
            .collect())
    }
}

/// Risk is the expected annual damage over several return periods.
pub struct CompositeEvaluator<'a> {
    pub engine: &'a Engine,
    pub periods: Vec<f64>,
    pub storms: Vec<DesignStorm>,
}

impl<'a> CompositeEvaluator<'a> {
    pub fn new(engine: &'a Engine, periods: &[f64], uplift: f64) -> Result<Self> {
        if periods.len() < 2 {
            return Err(Error::Config("composite optimisation needs at least two return periods".into()));
        }
        let storms = periods
            .iter()
            .map(|&t| engine.scenario().design_storm(t, uplift))
            .collect::<Result<_>>()?;
        Ok(CompositeEvaluator {
            engine,
            periods: periods.to_vec(),
            storms,
        })
    }
}

impl Evaluator for CompositeEvaluator<'_> {
    fn evaluate(&self, genomes: &[Genome]) -> Result<Vec<Evaluation>> {
        let rows = self.engine.period_matrix(genomes, &self.storms)?;
        genomes
            .iter()
            .zip(rows)
            .map(|(g, row)| {
                let lcc = self.engine.scenario().lcc(g)?;
                let per_period: Vec<f64> = row.iter().map(|o| o.ddc).collect();
                let failed = row.iter().any(|o| o.failed);
                let risk = if failed {
                    f64::INFINITY
                } else {
                    ead(&DdcByPeriod::from_slices(&self.periods, &per_period)?)
                };
                Ok(Evaluation {
                    per_period,
                    failed,
                    ..Evaluation::new(lcc, risk)
                })
            })
            .collect()
    }
}

/// An optimised front and its zone-contribution map.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub front: ParetoFront,
    pub contribution: Vec<f64>,
    /// Return periods of the per-period damage columns; empty for single-period runs.
    pub periods: Vec<f64>,
}

impl OptimizeOutcome {
    fn new(front: ParetoFront, periods: Vec<f64>) -> Result<Self> {
        let genomes: Vec<Genome> = front.solutions.iter().map(|s| s.genome.clone()).collect();
        let contribution = zone_contribution(&genomes)?;
        Ok(OptimizeOutcome {
            front,
            contribution,
            periods,
        })
    }

    pub fn table(&self) -> Result<FrontTable> {
        FrontTable::from_front(&self.front, &self.periods)
    }

    pub fn genomes(&self) -> Vec<Genome> {
        self.front.solutions.iter().map(|s| s.genome.clone()).collect()
    }
}

pub type Observer<'o> = &'o mut dyn FnMut(usize, &[Individual]);

pub fn optimize_single(engine: &Engine, ga: &GaConfig, t: f64, observer: Observer<'_>) -> Result<OptimizeOutcome> {
    let ev = SinglePeriodEvaluator {
        engine,
        storm: engine.scenario().design_storm(t, 0.0)?,
    };
    let front = nsga2::run_with_observer(ga, engine.scenario().n_zones(), &ev, observer)?;
    OptimizeOutcome::new(front, Vec::new())
}

pub fn optimize_composite(
    engine: &Engine,
    ga: &GaConfig,
    periods: &[f64],
    observer: Observer<'_>,
) -> Result<OptimizeOutcome> {
    let ev = CompositeEvaluator::new(engine, periods, 0.0)?;
    let front = nsga2::run_with_observer(ga, engine.scenario().n_zones(), &ev, observer)?;
    OptimizeOutcome::new(front, periods.to_vec())
}

/// A front re-simulated under a target storm or storm set.
#[derive(Debug, Clone)]
pub struct FrontUnder {
    pub results: Vec<CandidateResult>,
    /// Per-period damages behind each composite risk; empty rows for a single storm.
    pub per_period: Vec<Vec<f64>>,
    pub periods: Vec<f64>,
    pub curve: FrontCurve,
    /// Baseline and maximum-intervention risk under the same target.
    pub range: RiskRange,
}

impl FrontUnder {
    /// The re-evaluated front in export form, rows in `genomes` order.
    pub fn table(&self, genomes: &[Genome]) -> FrontTable {
        let rows = self
            .results
            .iter()
            .zip(genomes)
            .zip(&self.per_period)
            .enumerate()
            .map(|(k, ((r, g), pp))| FrontRow {
                solution_id: k,
                lcc: r.lcc,
                risk: r.ddc,
                genome_hex: g.to_hex(),
                per_period: pp.clone(),
            })
            .collect();
        FrontTable {
            periods: self.periods.clone(),
            rows,
        }
    }
}

fn under_label(target: &str, uplift: f64) -> String {
    if uplift == 0.0 {
        target.to_string()
    } else {
        format!("{target}+{uplift}")
    }
}

pub fn evaluate_front_under(engine: &Engine, genomes: &[Genome], t: f64, uplift: f64) -> Result<FrontUnder> {
    let storm = engine.scenario().design_storm(t, uplift)?;
    let results = engine.reevaluate(genomes, &storm)?;
    let n = engine.scenario().n_zones();
    let ends = engine.ddc_batch(&[Genome::zeros(n), Genome::ones(n)], &storm)?;
    Ok(FrontUnder {
        curve: FrontCurve::new(under_label(&format!("T{t}"), uplift), results.iter().map(|r| (r.lcc, r.ddc)))?,
        per_period: vec![Vec::new(); results.len()],
        periods: Vec::new(),
        results,
        range: RiskRange::new(ends[0].ddc, ends[1].ddc),
    })
}

/// Re-evaluates `genomes` by expected annual damage over `periods` with uplifted storms.
pub fn evaluate_front_composite_under(
    engine: &Engine,
    genomes: &[Genome],
    periods: &[f64],
    uplift: f64,
) -> Result<FrontUnder> {
    let ev = CompositeEvaluator::new(engine, periods, uplift)?;
    let n = engine.scenario().n_zones();
    let ends = ev.evaluate(&[Genome::zeros(n), Genome::ones(n)])?;
    let evals = ev.evaluate(genomes)?;
    let results: Vec<CandidateResult> = evals
        .iter()
        .map(|e| CandidateResult {
            lcc: e.objectives.lcc,
            ddc: e.objectives.risk,
            failed: e.failed,
        })
        .collect();
    Ok(FrontUnder {
        curve: FrontCurve::new(under_label("EAD", uplift), results.iter().map(|r| (r.lcc, r.ddc)))?,
        per_period: evals.into_iter().map(|e| e.per_period).collect(),
        periods: periods.to_vec(),
        results,
        range: RiskRange::new(ends[0].objectives.risk, ends[1].objectives.risk),
    })
}

/// Re-simulates `genomes` under period `t` and compares against `reference`.
pub fn compare_under(
    engine: &Engine,
    reference: &FrontCurve,
    genomes: &[Genome],
    t: f64,
    uplift: f64,
) -> Result<(FrontUnder, MetricsBundle)> {
    let under = evaluate_front_under(engine, genomes, t, uplift)?;
    let bundle = compare_fronts(reference, &under.curve, Some(&under.range))?;
    Ok((under, bundle))
}

/// EAD and benefit-cost of each genome under each uplift; the zero uplift
/// control comes first. Rows follow `genomes` order within each uplift.
pub fn stress_test(engine: &Engine, genomes: &[Genome], periods: &[f64], uplifts: &[f64]) -> Result<Vec<StressRow>> {
    let mut levels = vec![0.0];
    levels.extend(uplifts.iter().copied().filter(|&u| u != 0.0));
    let n = engine.scenario().n_zones();
    let lifespan = engine.scenario().costs.lifespan_years;
    let mut rows = Vec::new();
    for u in levels {
        let ev = CompositeEvaluator::new(engine, periods, u)?;
        let base = ev.evaluate(&[Genome::zeros(n)])?.remove(0);
        let evals = ev.evaluate(genomes)?;
        for (k, e) in evals.into_iter().enumerate() {
            let lcc = e.objectives.lcc;
            rows.push(StressRow {
                uplift: u,
                solution_id: k,
                lcc,
                ead: e.objectives.risk,
                benefit_cost: benefit_cost(base.objectives.risk, e.objectives.risk, lifespan, lcc),
                per_period: e.per_period,
            });
        }
    }
    Ok(rows)
}

/// Benefit-cost ratios of an exported composite front, using its zero-cost
/// row as the baseline.
pub fn benefit_cost_table(table: &FrontTable, lifespan_years: f64) -> Result<(f64, Vec<BcRow>)> {
    let base = table
        .rows
        .iter()
        .find(|r| r.lcc == 0.0 && r.genome_hex.chars().all(|c| c == '0'))
        .ok_or_else(|| Error::Input("front has no baseline (zero-cost, no-zone) row".into()))?;
    let ead_base = base.risk;
    let rows = table
        .rows
        .iter()
        .map(|r| BcRow {
            solution_id: r.solution_id,
            lcc: r.lcc,
            ead: r.risk,
            benefit_cost: benefit_cost(ead_base, r.risk, lifespan_years, r.lcc),
        })
        .collect();
    Ok((ead_base, rows))
}

/// Writes the rank-0 members of `pop` as a front CSV.
pub fn write_snapshot(path: &Path, pop: &[Individual], periods: &[f64]) -> Result<()> {
    let front = ParetoFront::from_population(pop);
    FrontTable::from_front(&front, periods)?.write(path)
}
