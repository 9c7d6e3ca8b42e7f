//! Desk-scale crossing scenarios.
//!
//! Waypoints form a 7x7 grid with king-move adjacency. Every flight flies a
//! straight row or column through the central waypoint, entering at the
//! border and leaving at the opposite border, and is over the center at
//! stage 3. Headings are axis-aligned so that each plan has two one-hop
//! detours around the center (a diagonal plan would have none). Plans
//! are spaced `STAGE_SPACING` seconds apart with a per-flight offset below
//! one default congestion interval, so all flights cross the center within
//! the same interval.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AirspaceGraph, FlightPlan, ModelParams, PlanEntry, Scenario};
use crate::error::{Error, Result};

const RADIUS: i64 = 3;
const SIDE: i64 = 2 * RADIUS + 1;
/// Three default congestion intervals.
const STAGE_SPACING: i64 = 57;
const MAX_OFFSET: i64 = 19;
/// Flights cycle through these levels, four flights (one per heading) each.
const LEVELS: [u32; 3] = [300, 250, 350];
const HEADINGS: [(i64, i64); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];

fn name(r: i64, c: i64) -> String {
    format!("G{r}_{c}")
}

fn grid() -> AirspaceGraph {
    let mut names = Vec::new();
    let mut edges = Vec::new();
    for r in 0..SIDE {
        for c in 0..SIDE {
            names.push(name(r, c));
            for (dr, dc) in [(0, 1), (1, -1), (1, 0), (1, 1)] {
                let (r2, c2) = (r + dr, c + dc);
                if (0..SIDE).contains(&r2) && (0..SIDE).contains(&c2) {
                    edges.push((name(r, c), name(r2, c2)));
                }
            }
        }
    }
    AirspaceGraph::new(names, &edges).expect("grid is well formed")
}

/// `num_flights` straight-line flights crossing the grid center, with
/// default model parameters. Deterministic in `seed`.
pub fn synthetic_crossing(num_flights: usize, seed: u64) -> Result<Scenario> {
    if num_flights < 2 {
        return Err(Error::InvalidModel(format!(
            "a crossing scenario needs at least 2 flights, got {num_flights}"
        )));
    }
    let graph = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut headings = HEADINGS;
    headings.shuffle(&mut rng);

    let mut flights = Vec::with_capacity(num_flights);
    for f in 0..num_flights {
        let (dr, dc) = headings[f % HEADINGS.len()];
        let level = LEVELS[(f / HEADINGS.len()) % LEVELS.len()];
        let offset = rng.gen_range(0..MAX_OFFSET);
        let plan: Vec<PlanEntry> = (0..SIDE)
            .map(|m| {
                let step = m - RADIUS;
                let w = name(RADIUS + step * dr, RADIUS + step * dc);
                PlanEntry {
                    timestamp: m * STAGE_SPACING + offset,
                    waypoint: graph.lookup(&w).expect("grid waypoint"),
                    level,
                }
            })
            .collect();
        let landing_time = plan[plan.len() - 1].timestamp;
        flights.push(FlightPlan {
            flight_id: format!("SYN{f:03}"),
            plan,
            landing_time,
        });
    }
    Ok(Scenario {
        graph,
        flights,
        params: ModelParams::default(),
    })
}

/// Name of the shared central waypoint.
pub fn center_waypoint() -> String {
    name(RADIUS, RADIUS)
}
