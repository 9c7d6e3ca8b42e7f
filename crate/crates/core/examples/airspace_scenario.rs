//! Builds the aircraft MDP for one flight plan on a small waypoint graph and
//! prints the expected trajectory when nothing else is flying.
//!
//! cargo run --example airspace_scenario

use mdp_congestion::airspace::{parse_scenario, AirspaceModel};
use mdp_congestion::congestion::GameInstance;
use mdp_congestion::solver::initial_point;

const SCENARIO: &str = r#"{
  "graph": {
    "waypoints": ["LFPG", "RESMI", "NEVEK", "DIJON", "LFLL"],
    "edges": [["LFPG", "RESMI"], ["RESMI", "NEVEK"], ["RESMI", "DIJON"], ["NEVEK", "DIJON"], ["DIJON", "LFLL"]]
  },
  "flights": [
    { "id": "AF7640", "plan": [[0, "LFPG", 300], [240, "RESMI", 350], [480, "DIJON", 350], [720, "LFLL", 300]],
      "landing_time": 780 }
  ]
}"#;

fn main() -> mdp_congestion::Result<()> {
    let scenario = parse_scenario(SCENARIO)?;
    let flight = &scenario.flights[0];
    let model = AirspaceModel::new(scenario.graph.clone(), scenario.params.clone())?;
    let (mdp, stamps) = model.aircraft_mdp(flight)?;
    println!(
        "{}: {} stages, {} states, {} actions, beta {}",
        flight.flight_id,
        stamps.len(),
        mdp.num_states(),
        mdp.num_actions(),
        scenario.params.beta
    );

    let game = GameInstance::homogeneous(vec![mdp], 0.0)?;
    let x = &initial_point(&game)?[0];
    let idx = model.index();
    for (t, ts) in stamps.iter().enumerate() {
        let mut mass: Vec<(usize, f64)> = x.state_marginal(t).into_iter().enumerate().filter(|m| m.1 > 1e-4).collect();
        mass.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top: Vec<String> = mass
            .iter()
            .take(3)
            .map(|&(s, p)| match idx.location(s) {
                Some((w, level)) => format!("{}/FL{level} {p:.3}", scenario.graph.name(w)),
                None => format!("sink {p:.3}"),
            })
            .collect();
        println!("t={ts:>5}  {}", top.join(", "));
    }
    Ok(())
}
