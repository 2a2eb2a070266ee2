use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::info;

use bluegreen::fixtures::{write_fixture, FixtureSpec};
use bluegreen::flood::{mass_balance, simulate};
use bluegreen::grid::write_ascii_grid;
use bluegreen::io::{
    bc_to_csv, metric_rows, metrics_to_csv, read_text, storm_from_csv, storm_to_csv, stress_to_csv, write_text,
    zone_contribution_geojson, FrontTable,
};
use bluegreen::metrics::{compare_fronts, RiskRange};
use bluegreen::nsga2::Individual;
use bluegreen::pipeline::{
    benefit_cost_table, evaluate_front_composite_under, evaluate_front_under, optimize_composite, optimize_single,
    stress_test, write_snapshot, Engine, OptimizeOutcome, Scenario,
};
use bluegreen::risk::write_building_risks;
use bluegreen::storm::{design_storm, ClimateUplift};
use bluegreen::{Error, Genome, Result, RunConfig};

#[derive(Parser)]
#[command(name = "bluegreen", version, about = "Blue-green infrastructure placement under flood risk")]
struct Cli {
    /// Log progress (-v) or debug detail (-vv) to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the design-storm hyetograph for one return period as CSV.
    DesignStorm(DesignStormArgs),
    /// Run one flood simulation and write the max-depth raster.
    Simulate(SimulateArgs),
    /// Optimise zone selection for one return period or for expected annual damage.
    Optimize(OptimizeArgs),
    /// Re-simulate a front under another return period or climate uplift.
    EvaluateFront(EvaluateFrontArgs),
    /// Expected annual damage and benefit-cost of a front under each configured uplift.
    StressTest(StressTestArgs),
    /// Compare two exported fronts.
    Metrics(MetricsArgs),
    /// Benefit-cost ratios of an exported composite front.
    Bca(BcaArgs),
    /// Write a synthetic catchment and its config file.
    GenFixture(GenFixtureArgs),
}

/// Settings shared by commands that run simulations.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replaces the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep simulation results in memory only.
    #[arg(long)]
    no_cache: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(d) = &self.out_dir {
            cfg.paths.output_dir = d.clone();
        }
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::Config("--workers must be at least 1".into()));
            }
            cfg.workers = w;
        }
        if self.no_cache {
            cfg.cache = false;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DesignStormArgs {
    #[arg(long)]
    config: PathBuf,
    /// Return period in years.
    #[arg(long = "T", visible_alias = "return-period")]
    t: f64,
    /// Defaults to the configured duration.
    #[arg(long)]
    duration_min: Option<f64>,
    /// Defaults to the configured step count.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    uplift: f64,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Hyetograph CSV as written by `design-storm`.
    #[arg(long)]
    storm: PathBuf,
    /// Config file naming the catchment inputs.
    #[arg(long)]
    catchment: PathBuf,
    /// Active zones as a hex bitmask, zone 1 in the lowest bit.
    #[arg(long)]
    zones: String,
    #[arg(long, default_value = "max_depth.asc")]
    out: PathBuf,
    /// Also write per-building risk to this CSV.
    #[arg(long)]
    risk_out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).args(["return_period", "composite"])))]
struct OptimizeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Minimise damage at this return period.
    #[arg(long)]
    return_period: Option<f64>,
    /// Minimise expected annual damage over the configured return periods.
    #[arg(long)]
    composite: bool,
    /// Write the current front every g generations.
    #[arg(long, value_name = "G")]
    snapshot_every: Option<usize>,
    /// Write per-building risk for every final-front solution.
    #[arg(long)]
    building_risks: bool,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).multiple(true).args(["under_period", "under_uplift"])))]
struct EvaluateFrontArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    front: PathBuf,
    /// Target return period; without it the front is scored by expected annual damage.
    #[arg(long)]
    under_period: Option<f64>,
    /// Climate uplift applied to the target storms.
    #[arg(long)]
    under_uplift: Option<f64>,
    /// Front optimised for the target, to compare against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Re-evaluated front CSV; defaults to a file in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StressTestArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    front: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    trial: PathBuf,
    /// Baseline risk, for percentages of the risk range.
    #[arg(long, requires = "max_intervention_risk")]
    baseline_risk: Option<f64>,
    /// Risk with every zone installed.
    #[arg(long, requires = "baseline_risk")]
    max_intervention_risk: Option<f64>,
    /// Label for the return_period column.
    #[arg(long, default_value = "NA")]
    label: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BcaArgs {
    #[arg(long)]
    front: PathBuf,
    /// Read the lifespan from this config instead.
    #[arg(long, conflicts_with = "lifespan")]
    config: Option<PathBuf>,
    #[arg(long)]
    lifespan: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Small,
    Standard,
}

#[derive(Args)]
struct GenFixtureArgs {
    #[arg(long, value_enum, default_value_t = FixtureKind::Standard)]
    kind: FixtureKind,
    #[arg(long)]
    dir: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn period_tag(t: f64) -> String {
    format!("T{t}")
}

fn cmd_design_storm(a: &DesignStormArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let s = &cfg.storm;
    let storm = design_storm(
        a.t,
        a.duration_min.unwrap_or(s.duration_min),
        a.steps.unwrap_or(s.steps),
        &s.ddf,
        &s.profile,
    )?;
    let storm = if a.uplift == 0.0 {
        storm
    } else {
        storm.apply_uplift(ClimateUplift::new(a.uplift)?)
    };
    info!("T{} storm: {:.3} mm over {} min", a.t, storm.total_depth_mm, storm.duration_min);
    emit(a.out.as_deref(), &storm_to_csv(&storm))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.catchment)?;
    let scenario = Scenario::from_config(&cfg)?;
    let storm = storm_from_csv(&read_text(&a.storm)?)?;
    let genome = Genome::from_hex(&a.zones, scenario.n_zones())?;
    let field = simulate(&scenario.catchment, &storm, &genome, &scenario.flood)?;
    write_ascii_grid(&a.out, &field.grid, &field.max_depth)?;
    if let Some(p) = &a.risk_out {
        let assessment = scenario.risk.assess(&field, &scenario.catchment);
        write_building_risks(p, &assessment.buildings)?;
        info!("direct damage {:.2}", assessment.total_ddc);
    }
    let m = &field.mass;
    println!(
        "mass balance: rain_in={} infiltrated={} outflow={} stored={} relative_error={:e} steps={}",
        m.rain_in,
        m.infiltrated,
        m.outflow,
        m.stored,
        mass_balance(&field),
        field.steps
    );
    Ok(())
}

fn write_outcome(engine: &Engine, cfg: &RunConfig, tag: &str, outcome: &OptimizeOutcome, risks: bool) -> Result<()> {
    let dir = &cfg.paths.output_dir;
    let front_path = dir.join(format!("front_{tag}.csv"));
    outcome.table()?.write(&front_path)?;
    let zones = zone_contribution_geojson(&engine.scenario().catchment.zones, &outcome.contribution)?;
    write_text(&dir.join(format!("zones_{tag}.geojson")), &zones)?;
    if risks {
        let bdir = dir.join("buildings");
        std::fs::create_dir_all(&bdir).map_err(|e| Error::Io {
            context: bdir.display().to_string(),
            source: e,
        })?;
        let periods = if outcome.periods.is_empty() {
            vec![tag.trim_start_matches('T').parse::<f64>().unwrap_or(f64::NAN)]
        } else {
            outcome.periods.clone()
        };
        for (k, g) in outcome.genomes().iter().enumerate() {
            for &t in &periods {
                let storm = engine.scenario().design_storm(t, 0.0)?;
                let a = engine.assess(g, &storm)?;
                write_building_risks(&bdir.join(format!("{tag}_solution{k}_T{t}.csv")), &a.buildings)?;
            }
        }
    }
    println!("{} solutions written to {}", outcome.front.solutions.len(), front_path.display());
    Ok(())
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let mut cfg = a.run.load()?;
    if let Some(p) = a.population {
        cfg.ga.population = p;
    }
    if let Some(g) = a.generations {
        cfg.ga.generations = g;
    }
    if let Some(s) = a.seed {
        cfg.ga.seed = s;
    }
    cfg.ga.validate()?;
    let engine = Engine::from_config(&cfg)?;
    let tag = match a.return_period {
        Some(t) => period_tag(t),
        None => "composite".to_string(),
    };
    let periods = if a.composite { cfg.return_periods.clone() } else { Vec::new() };
    let snap_dir = cfg.paths.output_dir.join("snapshots");
    let mut snapshot_err = None;
    let mut observer = |gen: usize, pop: &[Individual]| {
        info!("generation {gen}: {} simulations so far", engine.simulations());
        if let Some(every) = a.snapshot_every.filter(|&e| e > 0) {
            if gen.is_multiple_of(every) && snapshot_err.is_none() {
                let path = snap_dir.join(format!("{tag}_gen{gen:04}.csv"));
                if let Err(e) = write_snapshot(&path, pop, &periods) {
                    snapshot_err = Some(e);
                }
            }
        }
    };
    let outcome = match a.return_period {
        Some(t) => optimize_single(&engine, &cfg.ga, t, &mut observer)?,
        None => optimize_composite(&engine, &cfg.ga, &cfg.return_periods, &mut observer)?,
    };
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    info!("{} simulations run", engine.simulations());
    write_outcome(&engine, &cfg, &tag, &outcome, a.building_risks)
}

fn cmd_evaluate_front(a: &EvaluateFrontArgs) -> Result<()> {
    let cfg = a.run.load()?;
    let engine = Engine::from_config(&cfg)?;
    let table = FrontTable::read(&a.front)?;
    let genomes = table.genomes(engine.scenario().n_zones())?;
    let uplift = a.under_uplift.unwrap_or(0.0);
    let under = match a.under_period {
        Some(t) => evaluate_front_under(&engine, &genomes, t, uplift)?,
        None => evaluate_front_composite_under(&engine, &genomes, &cfg.return_periods, uplift)?,
    };
    let label = under.curve.label.clone();
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join(format!("front_under_{label}.csv")));
    under.table(&genomes).write(&out)?;
    println!("re-evaluated front written to {}", out.display());
    if let Some(r) = &a.reference {
        let reference = FrontTable::read(r)?.curve("reference")?;
        let bundle = compare_fronts(&reference, &under.curve, Some(&under.range))?;
        let csv = metrics_to_csv(&metric_rows(&bundle, &label));
        let mpath = out.with_file_name(format!("metrics_{label}.csv"));
        write_text(&mpath, &csv)?;
        print!("{csv}");
    }
    Ok(())
}

fn cmd_stress_test(a: &StressTestArgs) -> Result<()> {
    let cfg = a.run.load()?;
    let engine = Engine::from_config(&cfg)?;
    let genomes = FrontTable::read(&a.front)?.genomes(engine.scenario().n_zones())?;
    let rows = stress_test(&engine, &genomes, &cfg.return_periods, &cfg.uplifts)?;
    let out = a.out.clone().unwrap_or_else(|| cfg.paths.output_dir.join("stress.csv"));
    write_text(&out, &stress_to_csv(&cfg.return_periods, &rows))?;
    println!("{} rows written to {}", rows.len(), out.display());
    Ok(())
}

fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let reference = FrontTable::read(&a.reference)?.curve("reference")?;
    let trial = FrontTable::read(&a.trial)?.curve("trial")?;
    let range = match (a.baseline_risk, a.max_intervention_risk) {
        (Some(b), Some(m)) => Some(RiskRange::new(b, m)),
        _ => None,
    };
    let bundle = compare_fronts(&reference, &trial, range.as_ref())?;
    emit(a.out.as_deref(), &metrics_to_csv(&metric_rows(&bundle, &a.label)))
}

fn cmd_bca(a: &BcaArgs) -> Result<()> {
    let lifespan = match (&a.config, a.lifespan) {
        (Some(c), _) => RunConfig::parse(&read_text(c)?, c.parent().unwrap_or(Path::new(".")))?
            .costs
            .lifespan_years,
        (None, Some(l)) => l,
        (None, None) => bluegreen::CostParams::default().lifespan_years,
    };
    let (base, rows) = benefit_cost_table(&FrontTable::read(&a.front)?, lifespan)?;
    emit(a.out.as_deref(), &bc_to_csv(base, &rows))
}

fn cmd_gen_fixture(a: &GenFixtureArgs) -> Result<()> {
    let spec = match a.kind {
        FixtureKind::Small => FixtureSpec::small(),
        FixtureKind::Standard => FixtureSpec::standard(),
    };
    write_fixture(&spec, &a.dir)?;
    println!("fixture written to {}", a.dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::DesignStorm(a) => cmd_design_storm(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::EvaluateFront(a) => cmd_evaluate_front(a),
        Command::StressTest(a) => cmd_stress_test(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Bca(a) => cmd_bca(a),
        Command::GenFixture(a) => cmd_gen_fixture(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are input errors; exit code 2 is reserved for numerical failures.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
