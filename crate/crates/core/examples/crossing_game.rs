//! Two players choose between two equally cheap routes. Alone each would take
//! route 0; with collision risk priced in, Frank-Wolfe moves them to a split.
//! Compares the three step rules.
//!
//! cargo run --example crossing_game

use std::sync::Arc;

use mdp_congestion::congestion::{exploitability, CouplingMap, GameInstance};
use mdp_congestion::mdp::{HorizonMdp, Kernel};
use mdp_congestion::solver::{frank_wolfe, SolverOptions, StepRule};
use mdp_congestion::{Shape, StageTensor};

fn two_routes() -> mdp_congestion::Result<HorizonMdp> {
    // state 0 is the start, states 1 and 2 are the two routes
    let rows = (0..3)
        .flat_map(|s| (0..2).map(move |a| if s == 0 { vec![(1 + a, 1.0)] } else { vec![(s, 1.0)] }))
        .collect();
    let kernel = Kernel::from_rows(3, 2, rows)?;
    let costs = StageTensor::from_fn(Shape::new(2, 3, 2), |t, s, _| if t == 1 && s > 0 { 1.0 } else { 0.0 });
    HorizonMdp::new(vec![Arc::new(kernel)], costs, vec![1.0, 0.0, 0.0])
}

fn main() -> mdp_congestion::Result<()> {
    let players = vec![two_routes()?, two_routes()?];
    let game = GameInstance::new(players, 10.0, CouplingMap::identity(2, 2, 3), true, false)?;
    for rule in [StepRule::Harmonic, StepRule::Armijo, StepRule::Exact1d] {
        let opts = SolverOptions { step_rule: rule, gap_tol: 1e-6, max_iters: 1000, ..Default::default() };
        let rep = frank_wolfe(&game, &opts)?;
        let split = rep.final_flows[0].state_marginal(1);
        println!(
            "{rule:>8}: converged {} after {:>4} iterations, gap {:.1e}, route split {:.4}/{:.4}, exploitability {:.1e}",
            rep.converged,
            rep.iterations_run,
            rep.final_gap,
            split[1],
            split[2],
            exploitability(&game, &rep.final_flows)?
        );
    }
    Ok(())
}
