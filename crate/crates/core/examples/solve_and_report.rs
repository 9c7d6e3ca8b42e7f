//! Ten flights converging on one waypoint: solve the collision-risk game and
//! print the per-iteration risk series, then write the report files.
//!
//! cargo run --release --example solve_and_report [out_dir]

use std::path::PathBuf;

use mdp_congestion::airspace::{synthetic_crossing, AirspaceGame};
use mdp_congestion::cli::{cmd_report, cmd_solve, RunConfig};
use mdp_congestion::solver::{frank_wolfe, SolverOptions, StepRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = synthetic_crossing(10, 0)?;
    let built = AirspaceGame::build(&scenario.graph, &scenario.flights, &scenario.params, false)?;
    let opts = SolverOptions { max_iters: 51, step_rule: StepRule::Armijo, record_every: 5, ..Default::default() };
    let rep = frank_wolfe(&built.game, &opts)?;
    println!("iter  potential      fw gap   max risk");
    for r in &rep.iterates {
        println!("{:>4}  {:>11.3}  {:>9.3e}  {:.4}", r.iteration, r.potential, r.fw_gap, r.max_risk);
    }

    // the same run through the command-line layer, with its output files
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("mdpcg-demo"));
    let path = out.join("scenario.json");
    std::fs::create_dir_all(&out)?;
    std::fs::write(&path, scenario.to_json())?;
    let config = RunConfig { scenario: path, options: opts, out_dir: out.clone(), use_action_risk: false, risk_weight: None };
    cmd_solve(&config).map_err(|f| f.diagnostics.join("; "))?;
    println!("\n{}", cmd_report(&out.join("report.json")).map_err(|f| f.diagnostics.join("; "))?);
    println!("files written to {}", out.display());
    Ok(())
}
