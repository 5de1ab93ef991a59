use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::agent::AgentProfile;
use super::map::{OccupancyGrid, SegmentedMap};
use super::sampling::SampledNode;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Default sampling-square window for arcs.
pub const DEFAULT_NEIGHBORHOOD: usize = 7;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub position: Point,
    pub square: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Index into `SearchGraph::nodes` (not the node id).
    pub to: usize,
    pub length: f64,
}

/// Sampled nodes plus line-of-sight arcs. Nodes are kept sorted by id;
/// subgraphs keep the original ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchGraph {
    pub nodes: Vec<GraphNode>,
    pub adjacency: Vec<Vec<Edge>>,
    pub grid_distance: f64,
}

impl SearchGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn neighbors(&self, index: usize) -> &[Edge] {
        &self.adjacency[index]
    }

    pub fn arc_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Length of arc `a → b` (by index), if present.
    pub fn arc_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|e| e.to == b).map(|e| e.length)
    }

    /// Nearest node (by index) with line of sight to `p`.
    pub fn nearest_visible(&self, occ: &OccupancyGrid, p: Point) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| occ.line_of_sight(p, n.position))
            .min_by(|(_, a), (_, b)| {
                a.position
                    .distance(p)
                    .total_cmp(&b.position.distance(p))
                    .then(a.id.cmp(&b.id))
            })
            .map(|(i, _)| i)
    }

    /// Keeps nodes for which `keep` holds, dropping incident arcs.
    pub fn retain(&self, mut keep: impl FnMut(&GraphNode) -> bool) -> SearchGraph {
        let mut remap = vec![None; self.nodes.len()];
        let mut nodes = vec![];
        for (i, n) in self.nodes.iter().enumerate() {
            if keep(n) {
                remap[i] = Some(nodes.len());
                nodes.push(*n);
            }
        }
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .filter(|(i, _)| remap[*i].is_some())
            .map(|(_, edges)| {
                edges
                    .iter()
                    .filter_map(|e| remap[e.to].map(|to| Edge { to, length: e.length }))
                    .collect()
            })
            .collect();
        SearchGraph {
            nodes,
            adjacency,
            grid_distance: self.grid_distance,
        }
    }
}

/// Connects node pairs whose sampling squares lie within a
/// `neighborhood × neighborhood` window and whose straight segment crosses no
/// occupied cell. Node ids follow input order.
pub fn build_graph(
    nodes: &[SampledNode],
    occ: &OccupancyGrid,
    grid_distance: f64,
    neighborhood: usize,
) -> Result<SearchGraph> {
    if neighborhood < 3 || neighborhood.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "neighborhood must be odd and at least 3, got {neighborhood}"
        )));
    }
    let half = (neighborhood / 2) as i64;
    let by_square: HashMap<(usize, usize), Vec<usize>> =
        nodes.iter().enumerate().fold(HashMap::new(), |mut acc, (i, n)| {
            acc.entry(n.square).or_default().push(i);
            acc
        });

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for (i, a) in nodes.iter().enumerate() {
        let (ci, ri) = (a.square.0 as i64, a.square.1 as i64);
        for dr in -half..=half {
            for dc in -half..=half {
                let (c, r) = (ci + dc, ri + dr);
                if c < 0 || r < 0 {
                    continue;
                }
                let Some(candidates) = by_square.get(&(c as usize, r as usize)) else {
                    continue;
                };
                for &j in candidates {
                    if j <= i {
                        continue;
                    }
                    let b = &nodes[j];
                    let length = a.position.distance(b.position);
                    if length > 0.0 && occ.line_of_sight(a.position, b.position) {
                        adjacency[i].push(Edge { to: j, length });
                        adjacency[j].push(Edge { to: i, length });
                    }
                }
            }
        }
    }
    for edges in &mut adjacency {
        edges.sort_by_key(|e| e.to);
    }
    Ok(SearchGraph {
        nodes: nodes
            .iter()
            .enumerate()
            .map(|(id, n)| GraphNode {
                id,
                position: n.position,
                square: n.square,
            })
            .collect(),
        adjacency,
        grid_distance,
    })
}

/// Removes nodes standing on the agent's restricted classes.
pub fn agent_subgraph(
    graph: &SearchGraph,
    agent: &AgentProfile,
    map: &SegmentedMap,
) -> Result<SearchGraph> {
    let sub = graph.retain(|n| {
        map.class_at(n.position)
            .is_none_or(|c| !agent.restricted_classes.contains(&c))
    });
    if sub.is_empty() {
        return Err(Error::EmptySubgraph {
            agent: agent.id,
            reason: "every node lies on a restricted class".into(),
        });
    }
    Ok(sub)
}

/// On-disk graph form: node list plus undirected arc list by id.
#[derive(Serialize, Deserialize)]
pub struct GraphFile {
    pub grid_distance: f64,
    pub nodes: Vec<GraphNode>,
    pub arcs: Vec<(NodeId, NodeId, f64)>,
}

impl From<&SearchGraph> for GraphFile {
    fn from(g: &SearchGraph) -> Self {
        let arcs = g
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, edges)| {
                edges
                    .iter()
                    .filter(move |e| e.to > i)
                    .map(move |e| (g.nodes[i].id, g.nodes[e.to].id, e.length))
            })
            .collect();
        GraphFile {
            grid_distance: g.grid_distance,
            nodes: g.nodes.clone(),
            arcs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridShape;
    use crate::grid_world::map::default_class_names;
    use crate::grid_world::sampling::sample_nodes;

    fn node(x: f64, y: f64, g: f64) -> SampledNode {
        SampledNode {
            position: Point::new(x, y),
            square: ((x / g) as usize, (y / g) as usize),
        }
    }

    #[test]
    fn collinear_nodes_form_complete_graph() {
        let occ = OccupancyGrid::free(GridShape::new(30, 10, 0.5));
        let nodes = [node(1.75, 1.75, 3.5), node(5.25, 1.75, 3.5), node(8.75, 1.75, 3.5)];
        let g = build_graph(&nodes, &occ, 3.5, 7).unwrap();
        assert!(g.adjacency.iter().all(|e| e.len() == 2));
        assert_eq!(g.arc_count(), 3);
    }

    #[test]
    fn wall_blocks_arc() {
        let shape = GridShape::new(14, 7, 0.5);
        let mut occ = OccupancyGrid::free(shape);
        for r in 0..7 {
            occ.occupied[shape.index(7, r)] = true;
        }
        let nodes = [node(1.75, 1.75, 3.5), node(5.25, 1.75, 3.5)];
        let g = build_graph(&nodes, &occ, 3.5, 7).unwrap();
        assert_eq!(g.arc_count(), 0);
    }

    #[test]
    fn lattice_with_neighborhood_three() {
        let occ = OccupancyGrid::free(GridShape::new(21, 21, 0.5));
        let nodes = sample_nodes(&occ, 3.5, 0.4);
        let g = build_graph(&nodes, &occ, 3.5, 3).unwrap();
        let degree = |c: usize, r: usize| {
            let i = g.nodes.iter().position(|n| n.square == (c, r)).unwrap();
            g.adjacency[i].len()
        };
        assert_eq!(degree(0, 0), 3);
        assert_eq!(degree(2, 2), 3);
        assert_eq!(degree(1, 1), 8);
        assert_eq!(degree(1, 0), 5);
    }

    #[test]
    fn rejects_even_neighborhood() {
        let occ = OccupancyGrid::free(GridShape::new(4, 4, 1.0));
        assert!(build_graph(&[], &occ, 1.0, 4).is_err());
    }

    fn striped_map() -> (SegmentedMap, OccupancyGrid, SearchGraph) {
        let shape = GridShape::new(21, 21, 0.5);
        // column of squares at x ∈ [7, 10.5) is grass (class 8)
        let classes = (0..shape.len())
            .map(|i| {
                let p = shape.cell_center(i);
                if p.x >= 7.0 { 8 } else { 0 }
            })
            .collect();
        let map = SegmentedMap::new(shape, classes, default_class_names()).unwrap();
        let occ = OccupancyGrid::free(shape);
        let g = build_graph(&sample_nodes(&occ, 3.5, 0.4), &occ, 3.5, 7).unwrap();
        (map, occ, g)
    }

    #[test]
    fn subgraph_identity_without_restrictions() {
        let (map, _, g) = striped_map();
        let agent = AgentProfile::new(0, Point::new(1.0, 1.0), 2.5, 0.5);
        assert_eq!(agent_subgraph(&g, &agent, &map).unwrap(), g);
    }

    #[test]
    fn subgraph_drops_restricted_nodes_only() {
        let (map, _, g) = striped_map();
        let mut agent = AgentProfile::new(0, Point::new(1.0, 1.0), 2.5, 0.5);
        agent.restricted_classes.insert(8);
        let sub = agent_subgraph(&g, &agent, &map).unwrap();
        assert_eq!(sub.len(), 6);
        assert!(sub.nodes.iter().all(|n| n.square.0 < 2));
        for (i, n) in sub.nodes.iter().enumerate() {
            let orig = g.index_of(n.id).unwrap();
            let kept: Vec<_> = g.adjacency[orig]
                .iter()
                .filter(|e| g.nodes[e.to].square.0 < 2)
                .map(|e| g.nodes[e.to].id)
                .collect();
            let got: Vec<_> = sub.adjacency[i].iter().map(|e| sub.nodes[e.to].id).collect();
            assert_eq!(got, kept);
        }
    }

    #[test]
    fn subgraph_fully_restricted_is_error() {
        let (map, _, g) = striped_map();
        let mut agent = AgentProfile::new(0, Point::new(1.0, 1.0), 2.5, 0.5);
        agent.restricted_classes.extend([0, 8]);
        assert!(matches!(
            agent_subgraph(&g, &agent, &map),
            Err(Error::EmptySubgraph { .. })
        ));
    }
}
