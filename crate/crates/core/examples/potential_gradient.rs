//! The potential's gradient is each player's congestion cost. This compares
//! `potential_gradient` against central finite differences on a random game.
//!
//! cargo run --example potential_gradient

use mdp_congestion::congestion::{potential, potential_gradient, GameInstance};
use mdp_congestion::mdp::{policy_flow, FlowField, HorizonMdp, Policy};
use mdp_congestion::{Shape, StageTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_player(rng: &mut impl Rng, s: usize, a: usize, horizon: usize) -> mdp_congestion::Result<HorizonMdp> {
    let mut dense = vec![0.0; horizon * s * s * a];
    for t in 0..horizon {
        for from in 0..s {
            for act in 0..a {
                let w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = w.iter().sum();
                for (next, v) in w.iter().enumerate() {
                    dense[((t * s + next) * s + from) * a + act] = v / total;
                }
            }
        }
    }
    let costs = StageTensor::from_fn(Shape::new(horizon + 1, s, a), |_, _, _| rng.gen_range(0.0..3.0));
    HorizonMdp::from_dense(&dense, costs, vec![1.0 / s as f64; s])
}

/// Average of every deterministic "constant action" flow: an interior point.
fn mixed_flow(mdp: &HorizonMdp) -> mdp_congestion::Result<FlowField> {
    let shape = mdp.shape();
    let mut acc = StageTensor::zeros(shape);
    for a in 0..shape.actions {
        let x = policy_flow(mdp, &Policy::constant(shape, a)?)?;
        acc.move_toward(&x.0, 1.0 / (a + 1) as f64)?;
    }
    Ok(FlowField(acc))
}

fn main() -> mdp_congestion::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let players = (0..3).map(|_| random_player(&mut rng, 3, 2, 3)).collect::<Result<Vec<_>, _>>()?;
    let game = GameInstance::homogeneous(players, 4.0)?;
    let x = game.players().iter().map(mixed_flow).collect::<Result<Vec<_>, _>>()?;

    let grad = potential_gradient(&game, &x)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..game.num_players() {
        for idx in 0..grad[i].as_slice().len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[i].0.as_mut_slice()[idx] += h;
            minus[i].0.as_mut_slice()[idx] -= h;
            let fd = (potential(&game, &plus)? - potential(&game, &minus)?) / (2.0 * h);
            worst = worst.max((fd - grad[i].as_slice()[idx]).abs());
        }
    }
    println!("potential {:.6}", potential(&game, &x)?);
    println!("largest |finite difference - gradient| = {worst:.2e}");
    Ok(())
}
