use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use switchcost::distributions::ValuationDistribution;
use switchcost::market::{MarketConfig, PriceProfile};
use switchcost::oracle::mc_demand;
use switchcost::regions::{region_grid, region_masses, DEFAULT_RESOLUTION};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn switchcost(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchcost"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn read(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn malformed_shares_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = switchcost(&["run", scenario("bad_shares.json").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("shares sum to 1.1"), "{err}");
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("broken.json");
    std::fs::write(
        &sc,
        "{\n  \"firms\": 2,\n  \"s\": 0.1,\n  \"distributions\": {\"family\": \"uniform\"},\n}\n",
    )
    .unwrap();
    let out = switchcost(&["run", sc.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn non_convergence_exits_with_one_and_flags_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("gap.json");
    std::fs::write(
        &sc,
        r#"{"firms": 2, "s": {"from": 0.3, "to": 0.55, "steps": 2}, "distributions": {"family": "uniform"},
            "solver": {"max_iter": 40}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = switchcost(&["run", sc.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(1));
    let (_, rows) = read(&out_dir.join("sweep.csv"));
    let converged: Vec<&str> = rows.iter().map(|r| r[10].as_str()).collect();
    assert_eq!(converged, ["true", "true", "false", "false"]);
    let (_, eq) = read(&out_dir.join("equilibrium.csv"));
    assert_eq!(eq[1].last().unwrap(), "equilibrium did not converge");
}

#[test]
fn sweep_table_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = switchcost(&["run", scenario("discriminatory.json").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let (headers, rows) = read(&dir.path().join("sweep.csv"));
    assert_eq!(
        headers,
        [
            "scenario_id",
            "s",
            "n",
            "firm",
            "price",
            "demand_total",
            "exit_mass",
            "dPds_fd",
            "dPds_ift",
            "stable",
            "converged"
        ]
    );
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[0] == "discriminatory"));
    let (_, deriv) = read(&dir.path().join("derivatives.csv"));
    // own price rises, switch price falls in s
    for r in &deriv {
        let fd: f64 = r[7].parse().unwrap();
        assert_eq!(fd > 0.0, r[4] == "own", "{r:?}");
    }
}

#[test]
fn monte_carlo_engine_reports_sampled_demand() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("mc.json");
    std::fs::write(
        &sc,
        r#"{"firms": 3, "s": 0.2, "distributions": {"family": "uniform"}, "mc_samples": 100000}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = switchcost(
        &["run", sc.to_str().unwrap(), "--engine", "mc", "--seed", "5"],
        &out_dir,
    );
    assert_eq!(out.status.code(), Some(0));
    let (_, mc) = read(&out_dir.join("mc.csv"));
    let (_, sweep) = read(&out_dir.join("sweep.csv"));
    assert_eq!(mc.len(), 4);
    for firm in 0..3 {
        assert_eq!(sweep[firm][5], mc[firm][7]);
        let z: f64 = mc[firm][9].parse().unwrap();
        assert!(z.abs() < 4.0);
    }
}

#[test]
fn figure_one_regions() {
    let dir = tempfile::tempdir().unwrap();
    let out = switchcost(
        &["run", scenario("fig1.json").to_str().unwrap(), "--regions"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));

    let (headers, cells) = read(&dir.path().join("regions_s0.2_X.csv"));
    assert_eq!(headers, ["vX", "vY", "label"]);
    assert_eq!(cells.len(), DEFAULT_RESOLUTION * DEFAULT_RESOLUTION);

    // vertices lie on the analytic boundaries of each panel
    let (_, lines) = read(&dir.path().join("polylines.csv"));
    let (px, py) = (0.6, 0.45);
    for r in &lines {
        let s: f64 = r[1].parse().unwrap();
        let (x, y): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        let residual = match (r[2].as_str(), r[3].as_str()) {
            ("X", "X") => x - px - (y - py - s).max(0.0),
            ("X", "Y") => y - py - s - (x - px).max(0.0),
            ("Y", "Y") => y - py - (x - px - s).max(0.0),
            ("Y", "X") => x - px - s - (y - py).max(0.0),
            other => panic!("{other:?}"),
        };
        assert!(residual.abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn region_masses_agree_with_sampling() {
    let h = 1.0 / DEFAULT_RESOLUTION as f64;
    for s in [0.1, 0.2] {
        let c = MarketConfig::symmetric(2, ValuationDistribution::uniform(), 0.0, s);
        let p = PriceProfile::Uniform(vec![0.6, 0.45]);
        let grid = region_grid(&c, &p, DEFAULT_RESOLUTION).unwrap();
        let m = region_masses(&c, &p, &grid).unwrap();
        let mc = mc_demand(&c, &p, 1_000_000, 11);
        let se = mc.std_err.unwrap();
        for panel in 0..2 {
            let mu = c.mu[panel];
            let rival = 1 - panel;
            let stay = (mc.firms[panel].initial / mu, se.firms[panel].initial / mu);
            let switch = (mc.firms[rival].switch_in / mu, se.firms[rival].switch_in / mu);
            for (grid_mass, (sampled, err)) in [(m.grid[panel].stay, stay), (m.grid[panel].switch, switch)] {
                assert!(
                    (grid_mass - sampled).abs() <= 3.0 * err + h * h,
                    "s {s} panel {panel}: {grid_mass} vs {sampled}"
                );
            }
        }
    }
}
