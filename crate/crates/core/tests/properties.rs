use std::collections::BTreeSet;

use mts_core::aco::{MmasParams, Optimizer};
use mts_core::belief::{bayes_no_detection_update, split_sub_priors, BeliefState};
use mts_core::geometry::{GridShape, Point};
use mts_core::grid_world::{
    agent_subgraph, derive_occupancy, sample_graph, AgentProfile, GraphParams, PreferredArea,
    ProbabilityGrid, SegmentedMap, DEFAULT_OBSTACLE_CLASSES,
};
use mts_core::problem::SearchProblem;
use mts_core::sensing::visible_region;
use mts_core::sim::{percent_considered_areas, SimConfig};
use proptest::prelude::*;

const WALL: u8 = 3;

/// Random map: terrain classes 0, 7, 9 and 11 with a sprinkling of walls.
fn map_strategy(w: usize, h: usize) -> impl Strategy<Value = SegmentedMap> {
    prop::collection::vec(
        prop_oneof![4 => Just(0u8), 2 => Just(7u8), 2 => Just(9u8), 1 => Just(11u8), 1 => Just(WALL)],
        w * h,
    )
    .prop_map(move |classes| {
        SegmentedMap::new(GridShape::new(w, h, 0.5), classes, mts_core::grid_world::default_class_names())
            .unwrap()
    })
}

fn obstacles() -> BTreeSet<u8> {
    DEFAULT_OBSTACLE_CLASSES.into_iter().collect()
}

fn normalized(mass: Vec<f64>, shape: GridShape) -> ProbabilityGrid {
    let total: f64 = mass.iter().sum();
    ProbabilityGrid {
        shape,
        mass: mass.into_iter().map(|m| m / total).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_is_symmetric(map in map_strategy(24, 20)) {
        let occ = derive_occupancy(&map, &obstacles());
        let g = sample_graph(&occ, &GraphParams { grid_distance: 1.5, neighborhood: 5, clearance: 0.3 }).unwrap();
        for (i, edges) in g.adjacency.iter().enumerate() {
            for e in edges {
                prop_assert_ne!(e.to, i);
                prop_assert!(e.length > 0.0);
                let back = g.adjacency[e.to].iter().find(|b| b.to == i);
                prop_assert!(back.is_some_and(|b| b.length == e.length));
                let d = g.nodes[i].position.distance(g.nodes[e.to].position);
                prop_assert!((d - e.length).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn restriction_never_adds(map in map_strategy(24, 20), extra in prop::collection::btree_set(prop_oneof![Just(0u8), Just(7), Just(9), Just(11)], 0..3)) {
        let occ = derive_occupancy(&map, &obstacles());
        let g = sample_graph(&occ, &GraphParams { grid_distance: 1.5, neighborhood: 5, clearance: 0.3 }).unwrap();
        prop_assume!(!g.is_empty());
        let mut narrow = AgentProfile::new(0, Point::new(1.0, 1.0), 2.0, 1.0);
        narrow.restricted_classes.insert(9);
        let mut wide = narrow.clone();
        wide.restricted_classes.extend(extra);
        let a = agent_subgraph(&g, &narrow, &map);
        let b = agent_subgraph(&g, &wide, &map);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let ids_a: BTreeSet<usize> = a.nodes.iter().map(|n| n.id).collect();
                prop_assert!(b.nodes.iter().all(|n| ids_a.contains(&n.id)));
                prop_assert!(b.arc_count() <= a.arc_count());
                for (i, edges) in b.adjacency.iter().enumerate() {
                    let ia = a.index_of(b.nodes[i].id).unwrap();
                    for e in edges {
                        let to = b.nodes[e.to].id;
                        prop_assert!(a.adjacency[ia].iter().any(|x| a.nodes[x.to].id == to));
                    }
                }
            }
            (Err(_), b) => prop_assert!(b.is_err()),
            (Ok(_), Err(_)) => {}
        }
    }

    #[test]
    fn visibility_grows_with_radius(map in map_strategy(20, 20), cx in 0.0f64..10.0, cy in 0.0f64..10.0, r1 in 0.1f64..4.0, dr in 0.0f64..4.0) {
        let occ = derive_occupancy(&map, &obstacles());
        let c = Point::new(cx, cy);
        prop_assume!(occ.is_free_at(c));
        let small = visible_region(&occ, 0, c, r1).unwrap();
        let large = visible_region(&occ, 0, c, r1 + dr).unwrap();
        prop_assert!(small.visible_cells.iter().all(|&cell| large.contains(cell)));
        for &cell in &large.visible_cells {
            prop_assert!(!occ.occupied[cell]);
            let own = occ.shape.cell_of(c) == Some(cell);
            prop_assert!(own || occ.shape.cell_center(cell).distance(c) <= r1 + dr + 1e-9);
        }
    }

    #[test]
    fn split_ignores_area_order(
        mass in prop::collection::vec(0.0f64..1.0, 64),
        rects in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0, 0.5f64..4.0, 0.5f64..4.0, 0usize..3), 1..5),
        rot in 0usize..5,
    ) {
        let shape = GridShape::new(8, 8, 1.0);
        prop_assume!(mass.iter().sum::<f64>() > 0.1);
        let prior = normalized(mass, shape);
        let areas: Vec<PreferredArea> = rects
            .iter()
            .map(|&(x, y, w, h, owner)| PreferredArea { x_min: x, y_min: y, x_max: (x + w).min(8.0), y_max: (y + h).min(8.0), owner })
            .collect();
        let mut shuffled = areas.clone();
        shuffled.rotate_left(rot % areas.len());
        shuffled.reverse();
        let a = split_sub_priors(&prior, &areas, 3);
        let b = split_sub_priors(&prior, &shuffled, 3);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    for (p, q) in x.mass.iter().zip(&y.mass) {
                        prop_assert!((p - q).abs() < 1e-12);
                    }
                    prop_assert!((x.total() - 1.0 / 3.0).abs() < 1e-9);
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "order changed success"),
        }
    }

    #[test]
    fn considered_areas_grow_with_rectangles(
        pts in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 2..8),
        rects in prop::collection::vec((0.0f64..18.0, 0.0f64..18.0, 0.5f64..8.0, 0.5f64..8.0), 1..4),
    ) {
        let line: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let polylines = vec![line];
        let areas: Vec<PreferredArea> = rects
            .iter()
            .map(|&(x, y, w, h)| PreferredArea { x_min: x, y_min: y, x_max: x + w, y_max: y + h, owner: 0 })
            .collect();
        let mut last = percent_considered_areas(&polylines, &[]);
        for k in 1..=areas.len() {
            let now = percent_considered_areas(&polylines, &areas[..k]);
            prop_assert!(now + 1e-9 >= last);
            prop_assert!((0.0..=100.0 + 1e-9).contains(&now));
            last = now;
        }
    }
}

/// Mass bookkeeping: found plus remaining stays one under random sweeps, in
/// both attribution modes.
#[test]
fn mass_is_conserved_under_random_updates() {
    use rand::{Rng, SeedableRng};
    let shape = GridShape::new(10, 10, 1.0);
    let occ = mts_core::grid_world::OccupancyGrid::free(shape);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for seq in 0..200 {
        let mass: Vec<f64> = (0..shape.len()).map(|_| rng.gen::<f64>()).collect();
        let prior = normalized(mass, shape);
        let agents = rng.gen_range(1..4);
        let mut belief = if seq % 2 == 0 {
            BeliefState::shared(prior)
        } else {
            BeliefState::with_sub_priors(split_sub_priors(&prior, &[], agents).unwrap()).unwrap()
        };
        for _ in 0..rng.gen_range(1..30) {
            let regions: Vec<_> = (0..agents)
                .map(|m| {
                    let c = Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
                    visible_region(&occ, m, c, rng.gen_range(0.3..3.0)).unwrap()
                })
                .collect();
            belief = bayes_no_detection_update(&belief, &regions);
            assert!((belief.cumulative_found + belief.remaining() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn pheromones_stay_bounded() {
    let shape = GridShape::new(16, 16, 1.0);
    let map = SegmentedMap::filled(shape, 0).unwrap();
    let occ = derive_occupancy(&map, &obstacles());
    let graph = sample_graph(&occ, &GraphParams { grid_distance: 2.0, neighborhood: 3, clearance: 0.2 }).unwrap();
    let agents = vec![
        AgentProfile::new(0, Point::new(1.0, 1.0), 1.5, 1.0),
        AgentProfile::new(1, Point::new(15.0, 15.0), 1.5, 1.0),
    ];
    let problem = SearchProblem::new(&map, occ.clone(), &graph, agents, 2.0).unwrap();
    let prior = ProbabilityGrid::uniform(&occ).unwrap();
    let params = MmasParams {
        n_iterations: 60,
        rho: 0.2,
        seed: 5,
        ..MmasParams::default()
    };
    let belief = BeliefState::shared(prior);
    let mut opt = Optimizer::new(&problem, &belief, &params).unwrap();
    for _ in 0..params.n_iterations {
        opt.iterate().unwrap();
        assert!(opt.field().bounds_hold());
    }
}

#[test]
fn default_sim_config_has_no_timeout() {
    let c = SimConfig::default();
    assert!(c.timeout.is_none());
    assert!((c.tick - 0.1).abs() < 1e-12);
}
