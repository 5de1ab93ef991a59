//! Per-agent planning graphs with cached sensor footprints.

use crate::error::{Error, Result};
use crate::grid_world::{
    agent_subgraph, validate_profiles, AgentProfile, NodeId, OccupancyGrid, SearchGraph,
    SegmentedMap,
};
use crate::sensing::node_visibility;

/// Everything the planner needs about the world, fixed for a planning run.
#[derive(Clone, Debug)]
pub struct SearchProblem {
    pub occupancy: OccupancyGrid,
    pub profiles: Vec<AgentProfile>,
    /// Agent subgraphs (restricted classes removed).
    pub graphs: Vec<SearchGraph>,
    /// Start node of each agent, as an index into its subgraph.
    pub start_nodes: Vec<usize>,
    /// `visibility[m][i]`: cells seen by agent `m` standing on node index `i`.
    pub visibility: Vec<Vec<Vec<u32>>>,
    /// Time between plan steps, seconds.
    pub dt: f64,
}

impl SearchProblem {
    pub fn new(
        map: &SegmentedMap,
        occupancy: OccupancyGrid,
        graph: &SearchGraph,
        profiles: Vec<AgentProfile>,
        dt: f64,
    ) -> Result<Self> {
        validate_profiles(&profiles)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("dt must be positive, got {dt}")));
        }
        let mut graphs = Vec::with_capacity(profiles.len());
        let mut start_nodes = Vec::with_capacity(profiles.len());
        let mut visibility = Vec::with_capacity(profiles.len());
        for agent in &profiles {
            if !occupancy.is_free_at(agent.start_position) {
                return Err(Error::InvalidPose {
                    x: agent.start_position.x,
                    y: agent.start_position.y,
                });
            }
            let sub = agent_subgraph(graph, agent, map)?;
            let start = sub
                .nearest_visible(&occupancy, agent.start_position)
                .ok_or_else(|| Error::EmptySubgraph {
                    agent: agent.id,
                    reason: "no node is visible from the start position".into(),
                })?;
            visibility.push(node_visibility(
                &occupancy,
                sub.nodes.iter().map(|n| n.position),
                agent.visibility_radius,
            ));
            start_nodes.push(start);
            graphs.push(sub);
        }
        Ok(SearchProblem {
            occupancy,
            profiles,
            graphs,
            start_nodes,
            visibility,
            dt,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.profiles.len()
    }

    /// Largest agent subgraph size.
    pub fn max_node_count(&self) -> usize {
        self.graphs.iter().map(SearchGraph::len).max().unwrap_or(0)
    }

    pub fn start_id(&self, agent: usize) -> NodeId {
        self.graphs[agent].nodes[self.start_nodes[agent]].id
    }

    /// Converts per-agent id paths to subgraph indices, checking that every
    /// node exists and consecutive nodes share an arc.
    pub fn path_indices(&self, paths: &[Vec<NodeId>]) -> Result<Vec<Vec<usize>>> {
        if paths.len() != self.agent_count() {
            return Err(Error::InvalidPlan(format!(
                "plan has {} paths for {} agents",
                paths.len(),
                self.agent_count()
            )));
        }
        paths
            .iter()
            .enumerate()
            .map(|(m, path)| {
                let g = &self.graphs[m];
                let idx = path
                    .iter()
                    .map(|&id| {
                        g.index_of(id).ok_or_else(|| {
                            Error::InvalidPlan(format!("node {id} is not in agent {m}'s graph"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(w) = idx.windows(2).find(|w| g.arc_length(w[0], w[1]).is_none()) {
                    return Err(Error::InvalidPlan(format!(
                        "agent {m}: nodes {} and {} are not connected",
                        g.nodes[w[0]].id, g.nodes[w[1]].id
                    )));
                }
                Ok(idx)
            })
            .collect()
    }

    pub fn path_distance(&self, agent: usize, path: &[usize]) -> f64 {
        let g = &self.graphs[agent];
        path.windows(2)
            .map(|w| g.nodes[w[0]].position.distance(g.nodes[w[1]].position))
            .sum()
    }
}
