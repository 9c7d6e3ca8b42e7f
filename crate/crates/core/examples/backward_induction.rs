//! Backward induction on a three-state chain, then the occupation measure of
//! the greedy policy and a check that it lies in the flow polytope.
//!
//! cargo run --example backward_induction

use mdp_congestion::mdp::{backward_induction, flow_cost, greedy_policy, policy_flow, validate_flow, HorizonMdp};
use mdp_congestion::{Shape, StageTensor};

fn main() -> mdp_congestion::Result<()> {
    // states 0, 1, 2; action 0 = "advance", action 1 = "stay"
    // advancing succeeds with probability 0.9
    let (s, a, horizon) = (3, 2, 3);
    let mut dense = vec![0.0; horizon * s * s * a];
    let mut put = |t: usize, next: usize, from: usize, act: usize, p: f64| {
        dense[((t * s + next) * s + from) * a + act] += p;
    };
    for t in 0..horizon {
        for from in 0..s {
            let ahead = (from + 1).min(s - 1);
            put(t, ahead, from, 0, 0.9);
            put(t, from, from, 0, 0.1);
            put(t, from, from, 1, 1.0);
        }
    }
    // being away from state 2 costs 1 per stage, advancing costs 0.2 extra
    let costs = StageTensor::from_fn(Shape::new(horizon + 1, s, a), |_, st, act| {
        (st != 2) as u8 as f64 + if act == 0 { 0.2 } else { 0.0 }
    });
    let mdp = HorizonMdp::from_dense(&dense, costs.clone(), vec![1.0, 0.0, 0.0])?;

    let q = backward_induction(&mdp, &costs)?;
    let policy = greedy_policy(&q);
    for t in 0..=horizon {
        let row: Vec<String> = (0..s)
            .map(|st| format!("s{st}: Q=({:.3}, {:.3}) -> a{}", q.get(t, st, 0), q.get(t, st, 1), policy.action(t, st)))
            .collect();
        println!("t={t}  {}", row.join("  "));
    }

    let x = policy_flow(&mdp, &policy)?;
    for t in 0..=horizon {
        println!("stage {t} state marginal {:?}", x.state_marginal(t));
    }
    println!("expected cost {:.4} (value at start {:.4})", flow_cost(&x, &costs)?, q.min_at(0, 0));
    println!("polytope violations: {}", validate_flow(&mdp, &x)?.len());
    Ok(())
}
