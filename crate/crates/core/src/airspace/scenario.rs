//! The scenario file: one JSON document holding the waypoint graph, the
//! flight plans and optional parameter overrides.
//!
//! ```json
//! {
//!   "graph": { "waypoints": ["A", "B"], "edges": [["A", "B"]] },
//!   "flights": [
//!     { "id": "AF12", "plan": [[0, "A", 300], [60, "B", 300]], "landing_time": 60 }
//!   ],
//!   "params": { "beta": 0.9 }
//! }
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AirspaceGraph, FlightPlan, ModelParams, PlanEntry};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    graph: RawGraph,
    flights: Vec<RawFlight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<ModelParams>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    waypoints: Vec<String>,
    edges: Vec<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlight {
    id: String,
    plan: Vec<(i64, String, u32)>,
    landing_time: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: AirspaceGraph,
    pub flights: Vec<FlightPlan>,
    pub params: ModelParams,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        let raw = RawScenario {
            graph: RawGraph {
                waypoints: self.graph.waypoints().to_vec(),
                edges: self
                    .graph
                    .edges()
                    .into_iter()
                    .map(|(a, b)| (self.graph.name(a).to_owned(), self.graph.name(b).to_owned()))
                    .collect(),
            },
            flights: self
                .flights
                .iter()
                .map(|f| RawFlight {
                    id: f.flight_id.clone(),
                    plan: f
                        .plan
                        .iter()
                        .map(|e| (e.timestamp, self.graph.name(e.waypoint).to_owned(), e.level))
                        .collect(),
                    landing_time: f.landing_time,
                })
                .collect(),
            params: Some(self.params.clone()),
        };
        serde_json::to_string_pretty(&raw).expect("scenario serializes")
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    }
}

/// Parses and validates a scenario, collecting every plan violation.
///
/// A malformed document or graph yields a single error; otherwise each
/// flight is checked in full and all breaches are returned together.
pub fn scenario_diagnostics(document: &str) -> std::result::Result<Scenario, Vec<Error>> {
    let raw: RawScenario = serde_json::from_str(document).map_err(|e| vec![parse_error(e)])?;
    let params = raw.params.unwrap_or_default();
    let mut errors = Vec::new();
    if let Err(e) = params.validate() {
        errors.push(e);
    }
    let graph = AirspaceGraph::new(raw.graph.waypoints, &raw.graph.edges).map_err(|e| vec![e])?;

    let mut seen = HashSet::new();
    let mut flights = Vec::with_capacity(raw.flights.len());
    for f in raw.flights {
        if !seen.insert(f.id.clone()) {
            errors.push(Error::Validation {
                flight: f.id.clone(),
                message: "duplicate flight id".into(),
            });
        }
        let mut unknown = false;
        let mut plan = Vec::with_capacity(f.plan.len());
        for (i, (timestamp, name, level)) in f.plan.into_iter().enumerate() {
            let waypoint = graph.lookup(&name).unwrap_or_else(|| {
                unknown = true;
                errors.push(Error::Validation {
                    flight: f.id.clone(),
                    message: format!("entry {i}: unknown waypoint `{name}`"),
                });
                usize::MAX
            });
            plan.push(PlanEntry {
                timestamp,
                waypoint,
                level,
            });
        }
        let plan = FlightPlan {
            flight_id: f.id,
            plan,
            landing_time: f.landing_time,
        };
        if !unknown {
            errors.extend(plan.violations(&graph));
        }
        flights.push(plan);
    }
    if errors.is_empty() {
        Ok(Scenario {
            graph,
            flights,
            params,
        })
    } else {
        Err(errors)
    }
}

pub fn parse_scenario(document: &str) -> Result<Scenario> {
    scenario_diagnostics(document).map_err(|mut errs| errs.swap_remove(0))
}

pub fn parse_flight_plans(document: &str) -> Result<Vec<FlightPlan>> {
    parse_scenario(document).map(|s| s.flights)
}
