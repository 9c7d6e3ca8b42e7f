//! The `mdpcg` command line: scenario validation, solving and report output.
//!
//! `solve` writes into its output directory:
//! - `report.json`: the full solve report plus run metadata;
//! - `series.csv`: one row per recorded iterate (potential, FW gap,
//!   congestion cost, max risk and each flight's max risk);
//! - `risks_initial.csv`, `risks_final.csv`: per-flight, per-interval risk;
//! - `flows_final.json`: each flight's final occupation measure and its
//!   expected trajectory (per-stage location marginals).
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 solver failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::airspace::{scenario_diagnostics, synthetic_crossing, AirspaceGame, AirspaceModel, Scenario};
use crate::congestion::per_player_risk;
use crate::error::Error;
use crate::mdp::FlowField;
use crate::solver::{frank_wolfe, initial_point, SolveReport, SolverOptions, StepRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Io = 2,
    Solver = 3,
}

/// A failed command: exit status and one line per diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub status: ExitStatus,
    pub diagnostics: Vec<String>,
}

impl Failure {
    fn new(status: ExitStatus, err: impl ToString) -> Self {
        Self {
            status,
            diagnostics: vec![err.to_string()],
        }
    }

    /// I/O errors map to [`ExitStatus::Io`], everything else to `fallback`.
    fn classify(err: Error, fallback: ExitStatus) -> Self {
        let status = match err {
            Error::Io { .. } => ExitStatus::Io,
            _ => fallback,
        };
        Self::new(status, err)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "mdpcg", about = "Collision-risk MDP congestion games solved by Frank-Wolfe")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a scenario and build every aircraft MDP.
    Validate { scenario: PathBuf },
    /// Solve a scenario and write report files.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-4)]
        gap_tol: f64,
        #[arg(long, default_value = "harmonic", value_parser = parse_step_rule)]
        step_rule: StepRule,
        /// Override the scenario's risk weight.
        #[arg(long = "k")]
        risk_weight: Option<f64>,
        #[arg(long)]
        enable_action_risk: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
    },
    /// Summarize a `report.json`.
    Report { report: PathBuf },
    /// Write a synthetic crossing scenario.
    GenCrossing {
        #[arg(long)]
        flights: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_step_rule(s: &str) -> std::result::Result<StepRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Settings for one `solve` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub options: SolverOptions,
    pub out_dir: PathBuf,
    pub use_action_risk: bool,
    pub risk_weight: Option<f64>,
}

/// What `report.json` holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub flight_ids: Vec<String>,
    pub risk_weight: f64,
    pub use_action_risk: bool,
    pub interval_starts: Vec<i64>,
    pub note: String,
    pub solve: SolveReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FlightFlow {
    pub id: String,
    pub timestamps: Vec<i64>,
    pub flow: FlowField,
    pub expected_trajectory: Vec<StageMarginal>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StageMarginal {
    pub timestamp: i64,
    pub locations: Vec<LocationMass>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LocationMass {
    pub waypoint: String,
    pub level: u32,
    pub probability: f64,
}

const STATIONARITY_NOTE: &str = "Frank-Wolfe certifies first-order stationarity \
(a Nash equilibrium of the game), not a global minimum of the potential.";

fn read_file(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::new(ExitStatus::Io, Error::io(path, e)))
}

/// Loads a scenario, reporting every plan violation.
pub fn load_scenario(path: &Path) -> CmdResult<Scenario> {
    let doc = read_file(path)?;
    scenario_diagnostics(&doc).map_err(|errs| Failure {
        status: ExitStatus::Validation,
        diagnostics: errs.iter().map(ToString::to_string).collect(),
    })
}

pub fn cmd_validate(path: &Path) -> CmdResult<String> {
    let scenario = load_scenario(path)?;
    let model = AirspaceModel::new(scenario.graph.clone(), scenario.params.clone())
        .map_err(|e| Failure::new(ExitStatus::Validation, e))?;
    let diagnostics: Vec<String> = scenario
        .flights
        .iter()
        .filter_map(|f| model.aircraft_mdp(f).err().map(|e| e.to_string()))
        .collect();
    if !diagnostics.is_empty() {
        return Err(Failure {
            status: ExitStatus::Validation,
            diagnostics,
        });
    }
    Ok(format!(
        "{}: {} flights, {} waypoints, {} states, {} actions: ok",
        path.display(),
        scenario.flights.len(),
        scenario.graph.num_waypoints(),
        model.index().num_states(),
        model.index().num_actions()
    ))
}

/// Runs `solve` and writes its output files; on failure nothing is left behind.
pub fn cmd_solve(config: &RunConfig) -> CmdResult<RunReport> {
    let scenario = load_scenario(&config.scenario)?;
    let mut params = scenario.params.clone();
    if let Some(k) = config.risk_weight {
        params.risk_weight = k;
    }
    config
        .options
        .validate()
        .map_err(|e| Failure::new(ExitStatus::Validation, e))?;
    let built = AirspaceGame::build(&scenario.graph, &scenario.flights, &params, config.use_action_risk)
        .map_err(|e| Failure::classify(e, ExitStatus::Validation))?;

    let solver_failure = |e| Failure::classify(e, ExitStatus::Solver);
    let initial = initial_point(&built.game).map_err(solver_failure)?;
    let solve = frank_wolfe(&built.game, &config.options).map_err(solver_failure)?;
    let report = RunReport {
        flight_ids: built.flight_ids.clone(),
        risk_weight: params.risk_weight,
        use_action_risk: config.use_action_risk,
        interval_starts: built.interval_starts.clone(),
        note: STATIONARITY_NOTE.into(),
        solve,
    };

    let mut writer = OutputWriter::new(&config.out_dir)?;
    let result = write_outputs(&mut writer, &built, &report, &initial);
    if let Err(f) = result {
        writer.discard();
        return Err(f);
    }
    Ok(report)
}

struct OutputWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputWriter {
    fn new(dir: &Path) -> CmdResult<Self> {
        fs::create_dir_all(dir).map_err(|e| Failure::new(ExitStatus::Io, Error::io(dir, e)))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CmdResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::new(ExitStatus::Io, Error::io(&path, e)))?;
        self.written.push(path);
        Ok(())
    }

    fn discard(self) {
        for p in self.written {
            let _ = fs::remove_file(p);
        }
    }
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> CmdResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::new(ExitStatus::Io, e);
    w.write_record(&header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner()
        .map_err(|e| Failure::new(ExitStatus::Io, e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> CmdResult<Vec<u8>> {
    serde_json::to_vec_pretty(value).map_err(|e| Failure::new(ExitStatus::Io, e))
}

fn write_outputs(
    out: &mut OutputWriter,
    built: &AirspaceGame,
    report: &RunReport,
    initial: &[FlowField],
) -> CmdResult<()> {
    out.write("report.json", &json_bytes(report)?)?;
    out.write("series.csv", &series_csv(report)?)?;
    out.write("risks_initial.csv", &risks_csv(built, initial)?)?;
    out.write("risks_final.csv", &risks_csv(built, &report.solve.final_flows)?)?;
    out.write("flows_final.json", &json_bytes(&flight_flows(built, &report.solve.final_flows))?)?;
    Ok(())
}

fn series_csv(report: &RunReport) -> CmdResult<Vec<u8>> {
    let mut header: Vec<String> = ["iteration", "potential", "fw_gap", "congestion_cost_sum", "max_risk"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(report.flight_ids.iter().map(|id| format!("max_risk_{id}")));
    let rows = report
        .solve
        .iterates
        .iter()
        .map(|r| {
            let mut row = vec![
                r.iteration.to_string(),
                r.potential.to_string(),
                r.fw_gap.to_string(),
                r.congestion_cost.to_string(),
                r.max_risk.to_string(),
            ];
            row.extend(r.player_max_risk.iter().map(f64::to_string));
            row
        })
        .collect();
    csv_bytes(header, rows)
}

fn risks_csv(built: &AirspaceGame, flows: &[FlowField]) -> CmdResult<Vec<u8>> {
    let risk = per_player_risk(&built.game, flows).map_err(|e| Failure::new(ExitStatus::Solver, e))?;
    let header = ["flight", "interval", "interval_start", "risk"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, id) in built.flight_ids.iter().enumerate() {
        for (slot, r) in risk.by_slot(built.game.coupling(), i).into_iter().enumerate() {
            rows.push(vec![
                id.clone(),
                slot.to_string(),
                built.interval_starts[slot].to_string(),
                r.to_string(),
            ]);
        }
    }
    csv_bytes(header, rows)
}

fn flight_flows(built: &AirspaceGame, flows: &[FlowField]) -> Vec<FlightFlow> {
    let idx = built.model.index();
    let graph = built.model.graph();
    built
        .flight_ids
        .iter()
        .zip(flows)
        .zip(&built.horizons)
        .map(|((id, x), stamps)| FlightFlow {
            id: id.clone(),
            timestamps: stamps.clone(),
            flow: x.clone(),
            expected_trajectory: stamps
                .iter()
                .enumerate()
                .map(|(t, &timestamp)| StageMarginal {
                    timestamp,
                    locations: x
                        .state_marginal(t)
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, p)| p > 0.0)
                        .filter_map(|(s, p)| {
                            idx.location(s).map(|(w, level)| LocationMass {
                                waypoint: graph.name(w).to_owned(),
                                level,
                                probability: p,
                            })
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect()
}

pub fn load_report(path: &Path) -> CmdResult<RunReport> {
    let doc = read_file(path)?;
    serde_json::from_str(&doc).map_err(|e| {
        Failure::new(
            ExitStatus::Validation,
            Error::Parse {
                location: format!("{} line {} column {}", path.display(), e.line(), e.column()),
                message: e.to_string(),
            },
        )
    })
}

fn top_flights(ids: &[String], risks: &[f64], n: usize) -> String {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| risks[b].total_cmp(&risks[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(n)
        .map(|i| format!("{} {:.4}", ids[i], risks[i]))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn cmd_report(path: &Path) -> CmdResult<String> {
    let report = load_report(path)?;
    let solve = &report.solve;
    let (Some(first), Some(last)) = (solve.first(), solve.last()) else {
        return Err(Failure::new(ExitStatus::Validation, "report has no recorded iterates"));
    };
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    let mut lines = vec![
        format!(
            "converged: {}, iterations: {}",
            yes_no(solve.converged),
            solve.iterations_run
        ),
        format!("step rule: {}, final fw gap: {:.3e}", solve.step_rule, solve.final_gap),
        format!("potential: {:.6} -> {:.6}", first.potential, last.potential),
        format!("max risk: {:.6} -> {:.6}", first.max_risk, last.max_risk),
    ];
    if first.max_risk > 0.0 {
        lines.push(format!(
            "risk reduction: {:.1}%",
            100.0 * (1.0 - last.max_risk / first.max_risk)
        ));
    }
    lines.push(format!(
        "riskiest flights before: {}",
        top_flights(&report.flight_ids, &first.player_max_risk, 5)
    ));
    lines.push(format!(
        "riskiest flights after: {}",
        top_flights(&report.flight_ids, &last.player_max_risk, 5)
    ));
    lines.push(format!(
        "nash certificate (eps {:.0e}): {} violations",
        solve.certificate_eps,
        solve.final_certificate.len()
    ));
    lines.push(report.note.clone());
    Ok(lines.join("\n"))
}

pub fn cmd_gen_crossing(flights: usize, seed: u64, out: &Path) -> CmdResult<String> {
    let scenario = synthetic_crossing(flights, seed).map_err(|e| Failure::new(ExitStatus::Validation, e))?;
    fs::write(out, scenario.to_json()).map_err(|e| Failure::new(ExitStatus::Io, Error::io(out, e)))?;
    Ok(format!("wrote {} flights to {}", flights, out.display()))
}

pub fn run(cli: Cli) -> CmdResult<String> {
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Solve {
            scenario,
            max_iters,
            gap_tol,
            step_rule,
            risk_weight,
            enable_action_risk,
            out,
            record_every,
        } => {
            let config = RunConfig {
                scenario,
                options: SolverOptions {
                    max_iters,
                    gap_tol,
                    step_rule,
                    record_every,
                },
                out_dir: out,
                use_action_risk: enable_action_risk,
                risk_weight,
            };
            let report = cmd_solve(&config)?;
            Ok(format!(
                "converged: {}, iterations: {}, outputs in {}",
                if report.solve.converged { "yes" } else { "no" },
                report.solve.iterations_run,
                config.out_dir.display()
            ))
        }
        Command::Report { report } => cmd_report(&report),
        Command::GenCrossing { flights, seed, out } => cmd_gen_crossing(flights, seed, &out),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    match run(Cli::parse()) {
        Ok(msg) => {
            // a closed pipe (e.g. `| head`) is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{msg}");
            ExitStatus::Success as i32
        }
        Err(f) => {
            for d in &f.diagnostics {
                eprintln!("error: {d}");
            }
            f.status as i32
        }
    }
}
