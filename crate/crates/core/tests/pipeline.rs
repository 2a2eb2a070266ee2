use bluegreen::cache::SimCache;
use bluegreen::catchment::assemble_catchment;
use bluegreen::config::StormConfig;
use bluegreen::fixtures::{generate, write_fixture, FixtureSpec, NON_RESIDENTIAL_CURVE, RESIDENTIAL_CURVE};
use bluegreen::geometry::Polygon;
use bluegreen::io::FrontTable;
use bluegreen::metrics::compare_fronts;
use bluegreen::nsga2::{dominates, Objectives};
use bluegreen::pipeline::{
    benefit_cost_table, evaluate_front_under, optimize_composite, optimize_single, stress_test, CompositeEvaluator,
    Engine, Scenario, SinglePeriodEvaluator,
};
use bluegreen::storm::StormStep;
use bluegreen::{
    Building, BuildingCategory, CostParams, DamageCurve, DamageCurves, DdfDescriptors, DesignStorm, Evaluator,
    FloodParams, GaConfig, Genome, Grid, ProfileParams, Raster, RunConfig,
};

const PERIODS: [f64; 5] = [10.0, 20.0, 30.0, 50.0, 100.0];

fn small_config() -> (tempfile::TempDir, RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(&FixtureSpec::small(), dir.path()).unwrap();
    (dir, cfg)
}

fn engine(cfg: &RunConfig, cache: Option<SimCache>, workers: usize) -> Engine {
    Engine::new(Scenario::from_config(cfg).unwrap(), cache, workers).unwrap()
}

fn tiny_ga(seed: u64) -> GaConfig {
    GaConfig {
        population: 8,
        generations: 3,
        crossover_rate: 0.9,
        mutation_rate: None,
        seed,
    }
}

fn curves() -> DamageCurves {
    DamageCurves::new(
        DamageCurve::new(BuildingCategory::Residential, RESIDENTIAL_CURVE.to_vec()).unwrap(),
        DamageCurve::new(BuildingCategory::NonResidential, NON_RESIDENTIAL_CURVE.to_vec()).unwrap(),
    )
    .unwrap()
}

/// Flat closed catchment with one house and four corner zones; deeper rain
/// can only mean deeper water.
fn flat_scenario() -> Scenario {
    let n = 20;
    let grid = Grid::new(n, n, 0.0, 0.0, 5.0).unwrap();
    let dem = Raster {
        grid: grid.clone(),
        values: vec![Some(10.0); n * n],
    };
    let house = Building::new(
        "R001",
        BuildingCategory::Residential,
        Polygon::rect([45.0, 45.0], [55.0, 55.0]).unwrap(),
    )
    .unwrap();
    let zone = |x: f64, y: f64, k: usize| bluegreen::catchment::ZoneInput {
        index: k,
        polygons: vec![Polygon::rect([x, y], [x + 15.0, y + 15.0]).unwrap()],
    };
    let zones = vec![zone(5.0, 5.0, 1), zone(80.0, 5.0, 2), zone(5.0, 80.0, 3), zone(80.0, 80.0, 4)];
    let catchment = assemble_catchment(dem, &[], vec![house], zones).unwrap();
    let storm = StormConfig {
        ddf: DdfDescriptors::new(-0.02, 0.35, 0.28, 5.2).unwrap(),
        profile: ProfileParams::new(0.1, 0.8).unwrap(),
        duration_min: 30.0,
        steps: 6,
    };
    let flood = FloodParams {
        settle_time: 120.0,
        ..FloodParams::default()
    };
    Scenario::new(catchment, curves(), flood, CostParams::default(), storm).unwrap()
}

#[test]
fn second_evaluation_is_served_from_cache() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let storm = eng.scenario().design_storm(50.0, 0.0).unwrap();
    let g = Genome::from_hex("a5", 12).unwrap();
    let first = eng.evaluate_candidate(&g, &storm).unwrap();
    assert_eq!(eng.simulations(), 1);
    let again = eng.evaluate_candidate(&g, &storm).unwrap();
    assert_eq!(eng.simulations(), 1);
    assert_eq!(eng.cache().unwrap().hits(), 1);
    assert_eq!(first, again);
}

#[test]
fn baseline_costs_nothing() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, None, 1);
    let storm = eng.scenario().design_storm(100.0, 0.0).unwrap();
    let base = eng.evaluate_candidate(&Genome::zeros(12), &storm).unwrap();
    assert_eq!(base.lcc, 0.0);
    assert!(base.lcc.is_sign_positive());
    let a = eng.assess(&Genome::zeros(12), &storm).unwrap();
    assert_eq!(base.ddc, a.total_ddc);
    assert!(base.ddc > 0.0);
}

#[test]
fn per_period_loop_stores_five_entries() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let ev = CompositeEvaluator::new(&eng, &PERIODS, 0.0).unwrap();
    let out = ev.evaluate(&[Genome::from_hex("3", 12).unwrap()]).unwrap();
    assert_eq!(eng.cache().unwrap().len(), 5);
    assert_eq!(out[0].per_period.len(), 5);
}

#[test]
fn caching_does_not_change_results() {
    let (_d, cfg) = small_config();
    let ga = tiny_ga(9);
    let with = engine(&cfg, Some(SimCache::in_memory()), 1);
    let without = engine(&cfg, None, 1);
    let a = optimize_composite(&with, &ga, &PERIODS, &mut |_, _| {}).unwrap();
    let b = optimize_composite(&without, &ga, &PERIODS, &mut |_, _| {}).unwrap();
    assert_eq!(a.table().unwrap().to_csv(), b.table().unwrap().to_csv());
    assert!(with.simulations() < without.simulations());
    assert!(with.cache().unwrap().hits() > 0);
}

#[test]
fn worker_count_does_not_change_results() {
    let (_d, cfg) = small_config();
    let ga = tiny_ga(3);
    let one = engine(&cfg, None, 1);
    let three = engine(&cfg, None, 3);
    let a = optimize_single(&one, &ga, 100.0, &mut |_, _| {}).unwrap();
    let b = optimize_single(&three, &ga, 100.0, &mut |_, _| {}).unwrap();
    assert_eq!(a.table().unwrap().to_csv(), b.table().unwrap().to_csv());
    assert_eq!(a.contribution, b.contribution);
}

#[test]
fn disk_cache_resumes_without_simulating() {
    let (dir, cfg) = small_config();
    let path = dir.path().join("cache.tsv");
    let ga = tiny_ga(5);
    let first = engine(&cfg, Some(SimCache::open(&path).unwrap()), 1);
    let a = optimize_single(&first, &ga, 20.0, &mut |_, _| {}).unwrap();
    drop(first);
    let second = engine(&cfg, Some(SimCache::open(&path).unwrap()), 1);
    let b = optimize_single(&second, &ga, 20.0, &mut |_, _| {}).unwrap();
    assert_eq!(second.simulations(), 0);
    assert_eq!(a.table().unwrap().to_csv(), b.table().unwrap().to_csv());
}

#[test]
fn single_period_front_matches_exhaustive_enumeration() {
    let (_d, mut cfg) = small_config();
    // Shorter settling keeps the 4096 simulations quick.
    cfg.flood.settle_time = 60.0;
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let n = eng.scenario().n_zones();
    assert_eq!(n, 12);
    let storm = eng.scenario().design_storm(100.0, 0.0).unwrap();
    let all: Vec<Genome> = (0u32..1 << n)
        .map(|m| Genome::from_bits((0..n).map(|j| m >> j & 1 == 1).collect()))
        .collect();
    let results = eng.reevaluate(&all, &storm).unwrap();
    let objs: Vec<Objectives> = results
        .iter()
        .map(|r| Objectives {
            lcc: r.lcc,
            risk: r.ddc,
        })
        .collect();
    let is_optimal = |o: &Objectives| !objs.iter().any(|p| dominates(p, o));
    let mut truth: Vec<(f64, f64)> = objs.iter().filter(|o| is_optimal(o)).map(|o| (o.lcc, o.risk)).collect();
    truth.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    truth.dedup();

    // Every GA evaluation is a cache hit here, so a large run is cheap.
    let ga = GaConfig {
        population: 60,
        generations: 100,
        ..cfg.ga.clone()
    };
    let out = optimize_single(&eng, &ga, 100.0, &mut |_, _| {}).unwrap();
    assert_eq!(eng.simulations(), all.len());
    let found: Vec<(f64, f64)> = out
        .front
        .solutions
        .iter()
        .map(|s| (s.eval.objectives.lcc, s.eval.objectives.risk))
        .collect();
    for p in &found {
        assert!(truth.contains(p), "{p:?} is dominated in the exhaustive set");
    }
    eprintln!("front: {} of {} exhaustive optima", found.len(), truth.len());
    assert_eq!(found, truth);
    assert_eq!(found[0].0, 0.0);
}

#[test]
fn front_under_its_own_storm_has_no_gap() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let out = optimize_single(&eng, &tiny_ga(4), 100.0, &mut |_, _| {}).unwrap();
    let table = out.table().unwrap();
    let under = evaluate_front_under(&eng, &out.genomes(), 100.0, 0.0).unwrap();
    let b = compare_fronts(&table.curve("own").unwrap(), &under.curve, Some(&under.range)).unwrap();
    assert_eq!((b.max_rd, b.med_rd, b.delta_aupf), (0.0, 0.0, 0.0));
    // Risk strictly falls as cost rises along the exported front.
    for w in table.rows.windows(2) {
        assert!(w[1].lcc > w[0].lcc && w[1].risk < w[0].risk);
    }
}

#[test]
fn stress_control_matches_composite_front() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let out = optimize_composite(&eng, &tiny_ga(2), &PERIODS, &mut |_, _| {}).unwrap();
    let genomes = out.genomes();
    let rows = stress_test(&eng, &genomes, &PERIODS, &[0.15]).unwrap();
    assert_eq!(rows.len(), 2 * genomes.len());
    for (row, sol) in rows.iter().zip(&out.front.solutions) {
        assert_eq!(row.uplift, 0.0);
        assert_eq!(row.ead, sol.eval.objectives.risk);
        assert_eq!(row.per_period, sol.eval.per_period);
    }
    for row in &rows {
        assert_eq!(row.benefit_cost.is_none(), row.lcc == 0.0);
    }

    // The exported front carries its own baseline for the B/C table.
    let table = FrontTable::from_csv(&out.table().unwrap().to_csv()).unwrap();
    let (base, bc) = benefit_cost_table(&table, 40.0).unwrap();
    assert_eq!(base, rows[0].ead);
    assert_eq!(bc.len(), genomes.len());
    assert!(bc[0].benefit_cost.is_none());
    for (b, r) in bc.iter().zip(&rows) {
        assert_eq!(b.benefit_cost, r.benefit_cost);
    }
}

#[test]
fn uplift_never_lowers_ead_on_flat_catchment() {
    let eng = Engine::new(flat_scenario(), Some(SimCache::in_memory()), 1).unwrap();
    let genomes: Vec<Genome> = ["0", "1", "6", "f"].iter().map(|h| Genome::from_hex(h, 4).unwrap()).collect();
    let rows = stress_test(&eng, &genomes, &PERIODS, &[0.15, 0.30, 0.45]).unwrap();
    let control: Vec<f64> = rows[..4].iter().map(|r| r.ead).collect();
    assert!(control[0] > 0.0, "flat fixture should flood the house");
    for chunk in rows.chunks(4).skip(1) {
        for (r, &base) in chunk.iter().zip(&control) {
            assert!(r.ead >= base, "uplift {} lowered EAD: {} < {base}", r.uplift, r.ead);
        }
    }
}

#[test]
fn failed_simulation_is_flagged_not_fatal() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, Some(SimCache::in_memory()), 1);
    let storm = DesignStorm::from_steps(
        10.0,
        vec![StormStep {
            duration_s: 600.0,
            intensity_mm_hr: 1e305,
        }],
    )
    .unwrap();
    let ev = SinglePeriodEvaluator { engine: &eng, storm };
    let out = ev.evaluate(&[Genome::zeros(12), Genome::ones(12)]).unwrap();
    for e in &out {
        assert!(e.failed);
        assert_eq!(e.objectives.risk, f64::INFINITY);
    }
}

#[test]
fn exported_front_round_trips_and_is_nondominated() {
    let (_d, cfg) = small_config();
    let eng = engine(&cfg, None, 1);
    let out = optimize_composite(&eng, &tiny_ga(7), &PERIODS, &mut |_, _| {}).unwrap();
    let table = out.table().unwrap();
    let back = FrontTable::from_csv(&table.to_csv()).unwrap();
    assert_eq!(back, table);
    let objs: Vec<Objectives> = table
        .rows
        .iter()
        .map(|r| Objectives {
            lcc: r.lcc,
            risk: r.risk,
        })
        .collect();
    for a in &objs {
        assert!(!objs.iter().any(|b| dominates(b, a)));
    }
    assert_eq!(back.genomes(12).unwrap(), out.genomes());
    assert!(out.genomes()[0].is_baseline());
}

#[test]
fn fixture_generation_is_stable() {
    let a = generate(&FixtureSpec::standard()).unwrap();
    let b = generate(&FixtureSpec::standard()).unwrap();
    assert_eq!(a.elevation, b.elevation);
    assert_eq!(a.zones.len(), 64);
    assert_eq!(a.grid.len(), 100 * 100);
}
