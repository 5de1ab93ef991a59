//! Maps, occupancy, priors, node sampling and search graphs.

mod agent;
mod graph;
mod map;
mod prior;
mod sampling;

pub use agent::{validate_profiles, AgentKind, AgentProfile, PreferredArea};
pub use graph::{
    agent_subgraph, build_graph, Edge, GraphFile, GraphNode, NodeId, SearchGraph,
    DEFAULT_NEIGHBORHOOD,
};
pub use map::{
    default_class_names, derive_occupancy, load_segmented_map, map_to_json, parse_segmented_map,
    OccupancyGrid, SegmentedMap, CLASS_COUNT, DEFAULT_CLASS_NAMES, DEFAULT_OBSTACLE_CLASSES,
};
pub(crate) use map::json_error;
pub use prior::{class_weight_prior, load_prior, parse_prior, ProbabilityGrid};
pub use sampling::{sample_nodes, SampledNode, DEFAULT_CLEARANCE, DEFAULT_GRID_DISTANCE};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Graph construction settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    pub grid_distance: f64,
    pub neighborhood: usize,
    pub clearance: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            grid_distance: DEFAULT_GRID_DISTANCE,
            neighborhood: DEFAULT_NEIGHBORHOOD,
            clearance: DEFAULT_CLEARANCE,
        }
    }
}

/// Samples nodes and builds the global search graph in one go.
pub fn sample_graph(occ: &OccupancyGrid, params: &GraphParams) -> Result<SearchGraph> {
    let nodes = sample_nodes(occ, params.grid_distance, params.clearance);
    build_graph(&nodes, occ, params.grid_distance, params.neighborhood)
}
