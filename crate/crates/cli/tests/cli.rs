use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bluegreen"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn small_config() -> PathBuf {
    fixture("small").join("config.ini")
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn design_storm_prints_symmetric_hyetograph() {
    let o = run(bin().args(["design-storm", "--T", "100", "--config"]).arg(small_config()));
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time_s,intensity_mm_per_hr");
    assert_eq!(lines.len(), 7);
    let rows: Vec<(f64, f64)> = lines[1..]
        .iter()
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0].0, 300.0);
    assert_eq!(rows[5].0, 1800.0);
    for k in 0..3 {
        assert_eq!(rows[k].1, rows[5 - k].1);
    }
    assert!(rows[2].1 > rows[1].1 && rows[1].1 > rows[0].1);
}

#[test]
fn simulate_writes_raster_and_mass_balance() {
    let dir = tempfile::tempdir().unwrap();
    let storm = dir.path().join("storm.csv");
    let grid = dir.path().join("depth.asc");
    let risk = dir.path().join("risk.csv");
    let o = run(bin()
        .args(["design-storm", "--T", "50", "--out"])
        .arg(&storm)
        .arg("--config")
        .arg(small_config()));
    assert!(o.status.success());
    let o = run(bin()
        .args(["simulate", "--zones", "fff", "--storm"])
        .arg(&storm)
        .arg("--catchment")
        .arg(small_config())
        .arg("--out")
        .arg(&grid)
        .arg("--risk-out")
        .arg(&risk));
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.starts_with("mass balance: rain_in="), "{line}");
    let err: f64 = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("relative_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-9);
    let asc = std::fs::read_to_string(&grid).unwrap();
    assert!(asc.starts_with("ncols 24\nnrows 24\n"));
    let risk = std::fs::read_to_string(&risk).unwrap();
    assert!(risk.starts_with("building_id,category,d_mean,d_p90,at_risk,ddc\n"));
}

#[test]
fn runaway_storm_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let storm = dir.path().join("storm.csv");
    std::fs::write(&storm, "time_s,intensity_mm_per_hr\n600,1e305\n").unwrap();
    let o = run(bin()
        .args(["simulate", "--zones", "0", "--storm"])
        .arg(&storm)
        .arg("--catchment")
        .arg(small_config())
        .arg("--out")
        .arg(dir.path().join("d.asc")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn input_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(small_config()).unwrap();
    let bad = dir.path().join("config.ini");
    std::fs::write(&bad, text.replace("[run]", "[run]\nturbo = yes")).unwrap();
    let o = run(bin().args(["design-storm", "--T", "10", "--config"]).arg(&bad));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("turbo"));

    let o = run(bin().args(["bca", "--front"]).arg(dir.path().join("missing.csv")));
    assert_eq!(o.status.code(), Some(1));
    let o = run(bin().args(["optimize", "--config"]).arg(small_config()));
    assert_eq!(o.status.code(), Some(1));
    let o = run(bin().args(["design-storm", "--T", "0.5", "--config"]).arg(small_config()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn workflows_chain_through_exported_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let base = |cmd: &str| {
        let mut c = bin();
        c.arg(cmd).arg("--config").arg(small_config()).arg("--out-dir").arg(out);
        c
    };
    let ga = ["--population", "8", "--generations", "2"];

    let o = run(base("optimize").args(["--composite", "--snapshot-every", "1"]).args(ga));
    assert!(o.status.success());
    let o = run(base("optimize").args(["--return-period", "10", "--building-risks"]).args(ga));
    assert!(o.status.success());
    let o = run(base("optimize").args(["--return-period", "100", "--no-cache"]).args(ga));
    assert!(o.status.success());
    for f in ["front_composite.csv", "zones_composite.geojson", "front_T10.csv", "front_T100.csv", "sim_cache.tsv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    for g in 0..=2 {
        assert!(out.join(format!("snapshots/composite_gen{g:04}.csv")).exists());
    }
    assert!(out.join("buildings/T10_solution0_T10.csv").exists());
    let front = std::fs::read_to_string(out.join("front_composite.csv")).unwrap();
    assert!(front.starts_with("solution_id,lcc,risk,genome_hex,ddc_T10,ddc_T20,ddc_T30,ddc_T50,ddc_T100\n"));
    let zones = std::fs::read_to_string(out.join("zones_composite.geojson")).unwrap();
    assert!(zones.contains("\"contribution\""));

    let o = run(base("evaluate-front")
        .arg("--front")
        .arg(out.join("front_T100.csv"))
        .args(["--under-period", "10", "--reference"])
        .arg(out.join("front_T10.csv")));
    assert!(o.status.success());
    assert!(stdout(&o).contains("med_rd,T10,"));
    assert!(out.join("front_under_T10.csv").exists());
    assert!(out.join("metrics_T10.csv").exists());

    let o = run(base("evaluate-front")
        .arg("--front")
        .arg(out.join("front_composite.csv"))
        .args(["--under-uplift", "0.3"]));
    assert!(o.status.success());
    let under = std::fs::read_to_string(out.join("front_under_EAD+0.3.csv")).unwrap();
    assert!(under.lines().next().unwrap().ends_with("ddc_T100"));

    let o = run(base("stress-test").arg("--front").arg(out.join("front_composite.csv")));
    assert!(o.status.success());
    let stress = std::fs::read_to_string(out.join("stress.csv")).unwrap();
    let uplifts: Vec<&str> = stress.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(uplifts.first(), Some(&"0"));
    assert!(uplifts.contains(&"0.45"));

    let o = run(bin()
        .arg("metrics")
        .arg("--ref")
        .arg(out.join("front_T10.csv"))
        .arg("--trial")
        .arg(out.join("front_T10.csv")));
    assert!(o.status.success());
    assert!(stdout(&o).contains("max_rd,NA,0,NA"));

    let o = run(bin().arg("bca").arg("--front").arg(out.join("front_composite.csv")));
    assert!(o.status.success());
    let bc = stdout(&o);
    assert!(bc.starts_with("solution_id,lcc,ead,ead_baseline,benefit_cost\n"));
    assert!(bc.lines().nth(1).unwrap().ends_with(",NA"));
}

#[test]
fn gen_fixture_reproduces_bundled_files() {
    for kind in ["small", "standard"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run(bin().args(["gen-fixture", "--kind", kind, "--dir"]).arg(dir.path()));
        assert!(o.status.success());
        for f in [
            "config.ini",
            "dem.asc",
            "buildings.geojson",
            "zones.geojson",
            "green.geojson",
            "residential_curve.csv",
            "non_residential_curve.csv",
        ] {
            let fresh = std::fs::read(dir.path().join(f)).unwrap();
            let bundled = std::fs::read(fixture(kind).join(f)).unwrap();
            assert!(fresh == bundled, "{kind}/{f} differs from the generator output");
        }
    }
}
