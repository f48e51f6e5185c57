//! Runs a scenario and writes its CSV tables.
//!
//! Files written to the output directory:
//!
//! | file | rows |
//! |---|---|
//! | `sweep.csv` | one per point and firm |
//! | `equilibrium.csv` | one per point |
//! | `derivatives.csv` | one per point and price slot |
//! | `diagnostics.csv` | one per point, firm and density condition |
//! | `mc.csv` | Monte Carlo check, engines `mc` and `both` |
//! | `regions_s{s}_{X,Y}.csv`, `polylines.csv`, `region_masses.csv` | with `regions` |
//!
//! All numbers use the shortest round-trip formatting, so equal results give
//! equal bytes regardless of the number of worker threads.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::demand::demand_all;
use crate::distributions::{Condition, ConditionReport};
use crate::error::{Error, Result};
use crate::market::{MarketConfig, PriceKind, PricePair, PriceProfile, PricingMode};
use crate::oracle::{mc_demand, DemandBreakdown};
use crate::regions::{region_grid, region_masses, RegionGrid, RegionMasses, DEFAULT_RESOLUTION};
use crate::scenario::{Point, Scenario, DEFAULT_MC_SAMPLES, DEFAULT_START};
use crate::solver::{
    comparative_statics, extremal_equilibria, jacobian_at, solve_equilibrium, uniqueness_diagnostic,
    ComparativeStaticsResult, EquilibriumResult, ExtremalEquilibria, SolverSettings, UniquenessReport,
};

/// Demand evaluation route for the reported tables. The equilibrium itself
/// is always solved on quadrature demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Engine {
    #[default]
    Quad,
    Mc,
    Both,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub engine: Engine,
    pub seed: u64,
    pub regions: bool,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            engine: Engine::Quad,
            seed: 0,
            regions: false,
            out_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario_id: String,
    pub points: usize,
    pub non_converged: usize,
    pub files: Vec<PathBuf>,
}

/// Everything computed at one point of a scenario.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: Point,
    pub equilibrium: EquilibriumResult,
    pub statics: Option<ComparativeStaticsResult>,
    /// Why `statics` is missing.
    pub statics_error: Option<String>,
    pub dfoc_ds: Option<Vec<f64>>,
    pub uniqueness: Option<UniquenessReport>,
    pub extremal: Option<ExtremalEquilibria>,
    pub quad: DemandBreakdown,
    pub mc: Option<DemandBreakdown>,
    pub regions: Option<(RegionGrid, RegionMasses)>,
}

fn start_profile(config: &MarketConfig, start: f64) -> PriceProfile {
    PriceProfile::constant(config, start)
}

pub fn solve_point(scenario: &Scenario, point: &Point, options: &RunOptions) -> Result<PointResult> {
    let config = &point.config;
    let settings: SolverSettings = scenario.settings();
    let start = start_profile(config, scenario.start.unwrap_or(DEFAULT_START));
    let mut equilibrium = solve_equilibrium(config, &start, &settings)?;

    let (mut statics, mut statics_error, mut dfoc_ds, mut uniqueness) = (None, None, None, None);
    if equilibrium.converged {
        match comparative_statics(config, &equilibrium.prices, &settings) {
            Ok(r) => statics = Some(r),
            Err(e) => statics_error = Some(e.to_string()),
        }
        dfoc_ds = jacobian_at(config, &equilibrium.prices)
            .ok()
            .map(|(_, d)| d.iter().copied().collect());
        uniqueness = uniqueness_diagnostic(config, &equilibrium.prices).ok();
    } else {
        statics_error = Some("equilibrium did not converge".into());
    }
    let extremal = if scenario.extremal {
        Some(extremal_equilibria(config, &settings)?)
    } else {
        None
    };
    if let Some(ex) = &extremal {
        equilibrium.extremal_gap = Some(ex.gap);
    }

    let quad = demand_all(config, &equilibrium.prices)?;
    let mc = match options.engine {
        Engine::Quad => None,
        Engine::Mc | Engine::Both => Some(mc_demand(
            config,
            &equilibrium.prices,
            scenario.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
            options.seed,
        )),
    };

    let regions = if options.regions && config.n == 2 {
        let prices = match &scenario.prices {
            Some(p) => PriceProfile::Uniform(p.clone()),
            None => equilibrium.prices.clone(),
        };
        let prices = match (config.pricing_mode, prices) {
            (PricingMode::Discriminatory, PriceProfile::Uniform(p)) => {
                PriceProfile::Discriminatory(p.iter().map(|&x| PricePair { own: x, switch: x }).collect())
            }
            (_, p) => p,
        };
        let grid = region_grid(config, &prices, scenario.resolution.unwrap_or(DEFAULT_RESOLUTION))?;
        let masses = region_masses(config, &prices, &grid)?;
        Some((grid, masses))
    } else {
        None
    };

    Ok(PointResult {
        point: point.clone(),
        equilibrium,
        statics,
        statics_error,
        dfoc_ds,
        uniqueness,
        extremal,
        quad,
        mc,
        regions,
    })
}

/// Solves every point of `scenario` on a pool of `options.jobs` threads.
pub fn solve_scenario(scenario: &Scenario, options: &RunOptions) -> Result<Vec<PointResult>> {
    let points = scenario.points()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = options.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
    pool.install(|| points.par_iter().map(|p| solve_point(scenario, p, options)).collect())
}

fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn panel_name(k: usize) -> &'static str {
    ["X", "Y"][k]
}

struct Tables<'a> {
    id: &'a str,
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Tables<'_> {
    fn write(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn sweep(&mut self, results: &[PointResult], engine: Engine) -> Result<()> {
        let mut rows = Vec::new();
        for r in results {
            let c = &r.point.config;
            let demand = match (engine, &r.mc) {
                (Engine::Mc, Some(mc)) => mc,
                _ => &r.quad,
            };
            for firm in 0..c.n {
                let slot = c.slot(firm, PriceKind::Own);
                rows.push(vec![
                    self.id.to_string(),
                    num(r.point.s),
                    r.point.n.to_string(),
                    firm.to_string(),
                    num(r.equilibrium.prices.own(firm)),
                    num(demand.firms[firm].total),
                    num(demand.exit),
                    opt(r.statics.as_ref().map(|s| s.dpds_fd[slot])),
                    opt(r.statics.as_ref().map(|s| s.dpds_ift[slot])),
                    r.equilibrium.stable.to_string(),
                    r.equilibrium.converged.to_string(),
                ]);
            }
        }
        self.write(
            "sweep.csv",
            &[
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
                "converged",
            ],
            rows,
        )
    }

    fn equilibrium(&mut self, results: &[PointResult]) -> Result<()> {
        let rows = results
            .iter()
            .map(|r| {
                let eq = &r.equilibrium;
                let st = eq.stability.as_ref();
                vec![
                    self.id.to_string(),
                    num(r.point.s),
                    r.point.n.to_string(),
                    eq.iterations.to_string(),
                    eq.converged.to_string(),
                    num(eq.residual),
                    eq.stable.to_string(),
                    st.map(|s| s.negative_semidefinite.to_string()).unwrap_or_default(),
                    opt(st.map(|s| s.br_spectral_radius)),
                    st.map(|s| s.criteria_agree.to_string()).unwrap_or_default(),
                    r.uniqueness
                        .as_ref()
                        .map(|u| u.all_hold().to_string())
                        .unwrap_or_default(),
                    opt(r.statics.as_ref().map(|s| s.agreement)),
                    opt(eq.extremal_gap),
                    r.extremal
                        .as_ref()
                        .map(|e| e.heuristic().to_string())
                        .unwrap_or_default(),
                    r.statics_error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        self.write(
            "equilibrium.csv",
            &[
                "scenario_id",
                "s",
                "n",
                "iterations",
                "converged",
                "residual",
                "stable",
                "negative_semidefinite",
                "br_spectral_radius",
                "criteria_agree",
                "dominant_diagonal",
                "ift_fd_gap",
                "extremal_gap",
                "heuristic",
                "note",
            ],
            rows,
        )
    }

    fn derivatives(&mut self, results: &[PointResult]) -> Result<()> {
        let mut rows = Vec::new();
        for r in results {
            let c = &r.point.config;
            let slots = r.equilibrium.prices.slots();
            for (slot, price) in slots.iter().enumerate() {
                let kind = match c.slot_kind(slot) {
                    PriceKind::Own => "own",
                    PriceKind::Switch => "switch",
                };
                rows.push(vec![
                    self.id.to_string(),
                    num(r.point.s),
                    r.point.n.to_string(),
                    c.slot_firm(slot).to_string(),
                    kind.to_string(),
                    num(*price),
                    opt(r.dfoc_ds.as_ref().map(|d| d[slot])),
                    opt(r.statics.as_ref().map(|s| s.dpds_fd[slot])),
                    opt(r.statics.as_ref().map(|s| s.dpds_ift[slot])),
                    opt(r.uniqueness.as_ref().map(|u| u.rows[slot].row_sum)),
                ]);
            }
        }
        self.write(
            "derivatives.csv",
            &[
                "scenario_id",
                "s",
                "n",
                "firm",
                "kind",
                "price",
                "dfoc_ds",
                "dPds_fd",
                "dPds_ift",
                "row_sum",
            ],
            rows,
        )
    }

    fn diagnostics(&mut self, results: &[PointResult]) -> Result<()> {
        let mut rows = Vec::new();
        for r in results {
            for (firm, report) in r.equilibrium.diagnostics.iter().enumerate() {
                for cond in Condition::ALL {
                    rows.push(condition_row(self.id, r, firm, report, cond));
                }
            }
        }
        self.write(
            "diagnostics.csv",
            &[
                "scenario_id",
                "s",
                "n",
                "firm",
                "condition",
                "holds",
                "margin",
                "worst_price",
                "worst_x",
                "kink",
            ],
            rows,
        )
    }

    fn mc(&mut self, results: &[PointResult], samples: u64, seed: u64) -> Result<()> {
        let mut rows = Vec::new();
        for r in results {
            let Some(mc) = &r.mc else { continue };
            let se = mc.std_err.as_ref();
            let mut push = |who: String, q: f64, m: f64, e: Option<f64>| {
                let z = e.filter(|&e| e > 0.0).map(|e| (m - q) / e);
                rows.push(vec![
                    self.id.to_string(),
                    num(r.point.s),
                    r.point.n.to_string(),
                    who,
                    samples.to_string(),
                    seed.to_string(),
                    num(q),
                    num(m),
                    opt(e),
                    opt(z),
                ]);
            };
            for firm in 0..r.point.n {
                push(
                    firm.to_string(),
                    r.quad.firms[firm].total,
                    mc.firms[firm].total,
                    se.map(|s| s.firms[firm].total),
                );
            }
            push("exit".into(), r.quad.exit, mc.exit, se.map(|s| s.exit));
        }
        self.write(
            "mc.csv",
            &[
                "scenario_id",
                "s",
                "n",
                "firm",
                "samples",
                "seed",
                "demand_quad",
                "demand_mc",
                "std_err",
                "z",
            ],
            rows,
        )
    }

    fn regions(&mut self, results: &[PointResult]) -> Result<()> {
        let mut lines = Vec::new();
        let mut masses = Vec::new();
        for r in results {
            let Some((grid, m)) = &r.regions else { continue };
            let s = num(r.point.s);
            for panel in 0..2 {
                let mut cells = Vec::with_capacity(grid.resolution * grid.resolution);
                for row in 0..grid.resolution {
                    for col in 0..grid.resolution {
                        let (x, y) = grid.cell_center(col, row);
                        cells.push(vec![num(x), num(y), grid.label(panel, col, row).as_str().to_string()]);
                    }
                }
                self.write(
                    &format!("regions_s{s}_{}.csv", panel_name(panel)),
                    &["vX", "vY", "label"],
                    cells,
                )?;
                let (g, a) = (m.grid[panel], m.analytic[panel]);
                let len = |firm: usize| opt(grid.polyline(panel, firm).map(|p| p.length()));
                masses.push(vec![
                    self.id.to_string(),
                    s.clone(),
                    num(grid.prices[0]),
                    num(grid.prices[1]),
                    panel_name(panel).to_string(),
                    num(g.stay),
                    num(g.switch),
                    num(g.exit),
                    num(a.stay),
                    num(a.switch),
                    num(a.exit),
                    len(0),
                    len(1),
                ]);
            }
            for line in &grid.polylines {
                for (k, (x, y)) in line.points.iter().enumerate() {
                    lines.push(vec![
                        self.id.to_string(),
                        s.clone(),
                        panel_name(line.panel).to_string(),
                        panel_name(line.firm).to_string(),
                        k.to_string(),
                        num(*x),
                        num(*y),
                    ]);
                }
            }
        }
        self.write(
            "polylines.csv",
            &["scenario_id", "s", "panel", "firm", "vertex", "vX", "vY"],
            lines,
        )?;
        self.write(
            "region_masses.csv",
            &[
                "scenario_id",
                "s",
                "PX",
                "PY",
                "panel",
                "stay",
                "switch",
                "exit",
                "stay_quad",
                "switch_quad",
                "exit_quad",
                "line_length_X",
                "line_length_Y",
            ],
            masses,
        )
    }
}

fn condition_row(id: &str, r: &PointResult, firm: usize, report: &ConditionReport, cond: Condition) -> Vec<String> {
    let e = report.get(cond);
    vec![
        id.to_string(),
        num(r.point.s),
        r.point.n.to_string(),
        firm.to_string(),
        cond.name().to_string(),
        e.holds.to_string(),
        num(e.margin),
        num(e.worst.0),
        num(e.worst.1),
        e.kink.to_string(),
    ]
}

/// Writes every table for already solved points.
pub fn write_tables(
    scenario: &Scenario,
    id: &str,
    results: &[PointResult],
    options: &RunOptions,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&options.out_dir)?;
    let mut t = Tables {
        id,
        dir: &options.out_dir,
        files: Vec::new(),
    };
    t.sweep(results, options.engine)?;
    t.equilibrium(results)?;
    t.derivatives(results)?;
    t.diagnostics(results)?;
    if options.engine != Engine::Quad {
        t.mc(results, scenario.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES), options.seed)?;
    }
    if options.regions {
        t.regions(results)?;
    }
    Ok(t.files)
}

pub fn run_scenario(scenario: &Scenario, id: &str, options: &RunOptions) -> Result<RunSummary> {
    let results = solve_scenario(scenario, options)?;
    let files = write_tables(scenario, id, &results, options)?;
    Ok(RunSummary {
        scenario_id: id.to_string(),
        points: results.len(),
        non_converged: results.iter().filter(|r| !r.equilibrium.converged).count(),
        files,
    })
}

/// Loads, solves and writes. The scenario id defaults to the file stem.
pub fn run(path: &Path, options: &RunOptions) -> Result<RunSummary> {
    let scenario = Scenario::load(path)?;
    let id = scenario.id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    run_scenario(&scenario, &id, options)
}

/// Process exit code for a run outcome.
pub fn exit_code(outcome: &Result<RunSummary>) -> i32 {
    match outcome {
        Ok(summary) if summary.non_converged == 0 => 0,
        Ok(_) => 1,
        Err(
            Error::Scenario(_)
            | Error::Config(_)
            | Error::Distribution(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Csv(_),
        ) => 2,
        Err(_) => 1,
    }
}
