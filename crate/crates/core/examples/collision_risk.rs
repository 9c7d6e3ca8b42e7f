//! Collision risks for three players on one shared two-state, two-stage grid:
//! `D` is the chance that someone else is in my state, `G` that someone else
//! is in my state taking my action.
//!
//! cargo run --example collision_risk

use std::sync::Arc;

use mdp_congestion::congestion::{collision_risks, congestion_costs, per_player_risk, GameInstance};
use mdp_congestion::mdp::{FlowField, HorizonMdp, Kernel};
use mdp_congestion::{Shape, StageTensor};

fn main() -> mdp_congestion::Result<()> {
    let shape = Shape::new(2, 2, 2);
    // action a moves to state a
    let kernel = Kernel::from_rows(2, 2, vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]])?;
    let player = HorizonMdp::new(vec![Arc::new(kernel)], StageTensor::zeros(shape), vec![1.0, 0.0])?;
    let game = GameInstance::homogeneous(vec![player.clone(), player.clone(), player], 10.0)?;

    // each player heads to state 1 with a different probability
    let flows: Vec<FlowField> = [0.2, 0.5, 0.9]
        .iter()
        .map(|&p| {
            let mut x = StageTensor::zeros(shape);
            x.set(0, 0, 0, 1.0 - p);
            x.set(0, 0, 1, p);
            x.set(1, 0, 0, 1.0 - p);
            x.set(1, 1, 1, p);
            FlowField(x)
        })
        .collect();

    let field = collision_risks(&game, &flows)?;
    let risk = per_player_risk(&game, &flows)?;
    for i in 0..3 {
        // cell = t * S + s under the identity coupling
        println!(
            "player {i}: D at (t1,s0) = {:.3}, D at (t1,s1) = {:.3}, G at (t1,s1,a1) = {:.3}, risk at (t1,s1) = {:.3}",
            field.state_risk(i, 2),
            field.state_risk(i, 3),
            field.action_risk(i, 3, 1),
            risk.get(i, 3)
        );
    }
    let ell = congestion_costs(&game, &flows)?;
    println!("player 2's congestion cost at (t1,s1,a1): {:.3}", ell[2].get(1, 1, 1));
    Ok(())
}
