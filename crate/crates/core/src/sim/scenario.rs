//! Scenario descriptions and their expansion into maps, priors and agents.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridShape, Point, Rect};
use crate::grid_world::{
    class_weight_prior, derive_occupancy, load_prior, load_segmented_map, sample_graph,
    AgentProfile, GraphParams, OccupancyGrid, ProbabilityGrid, SearchGraph, SegmentedMap,
    CLASS_COUNT, DEFAULT_OBSTACLE_CLASSES,
};
use crate::problem::SearchProblem;

/// Side length of the synthetic maps, meters.
pub const SYNTHETIC_EXTENT: f64 = 40.0;

const TERRAIN: u8 = 7;
const WALL: u8 = 3;
const BUILDING: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticMap {
    /// Open 40 m square, no obstacles.
    M1,
    /// 40 m square split into four rooms by walls with doorways, plus two
    /// building blocks.
    M2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSource {
    Synthetic {
        id: SyntheticMap,
        #[serde(default = "default_resolution")]
        resolution: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_resolution() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub center: Point,
    pub sigma: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    Uniform,
    GaussianMixture { components: Vec<GaussianComponent> },
    File { path: PathBuf },
    ClassWeights { weights: [f64; CLASS_COUNT] },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetPlacement {
    #[default]
    Sampled,
    /// Column and row of the target cell.
    Fixed { cell: (usize, usize) },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub map: MapSource,
    pub prior: PriorSpec,
    pub agents: Vec<AgentProfile>,
    #[serde(default)]
    pub target: TargetPlacement,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub graph: GraphParams,
    /// Obstacle classes; defaults to building, wall, fence and pole.
    #[serde(default)]
    pub obstacle_classes: Option<BTreeSet<u8>>,
    /// Speed used to turn plan steps into time; defaults to the slowest agent.
    #[serde(default)]
    pub planning_speed: Option<f64>,
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec: ScenarioSpec =
            serde_json::from_str(&text).map_err(|e| crate::grid_world::json_error(&e))?;
        spec.resolve_paths(path.parent().unwrap_or_else(|| Path::new(".")));
        Ok(spec)
    }

    /// Makes relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let MapSource::File { path } = &mut self.map {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let PriorSpec::File { path } = &mut self.prior {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn planning_speed(&self) -> f64 {
        self.planning_speed.unwrap_or_else(|| {
            self.agents
                .iter()
                .map(|a| a.speed)
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Checks everything that does not need the map.
    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidScenario("at least one agent is required".into()));
        }
        crate::grid_world::validate_profiles(&self.agents)?;
        let v = self.planning_speed();
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidScenario(format!("planning speed must be positive, got {v}")));
        }
        if let MapSource::Synthetic { resolution, .. } = self.map {
            if !(resolution > 0.0 && resolution <= 2.0) {
                return Err(Error::InvalidScenario(format!(
                    "synthetic resolution must be in (0, 2], got {resolution}"
                )));
            }
        }
        if let PriorSpec::GaussianMixture { components } = &self.prior {
            if components.is_empty() {
                return Err(Error::InvalidScenario("gaussian mixture has no components".into()));
            }
            for (k, c) in components.iter().enumerate() {
                if !(c.weight > 0.0 && c.weight.is_finite()) {
                    return Err(Error::InvalidScenario(format!("component {k}: weight must be positive")));
                }
                if !(c.sigma > 0.0 && c.sigma.is_finite()) {
                    return Err(Error::InvalidScenario(format!("component {k}: sigma must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// A scenario expanded into everything a planning or simulation run needs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub map: SegmentedMap,
    pub occupancy: OccupancyGrid,
    pub prior: ProbabilityGrid,
    /// Per-component pieces of a gaussian-mixture prior; they sum to `prior`.
    pub components: Vec<ProbabilityGrid>,
    pub profiles: Vec<AgentProfile>,
    pub graph: SearchGraph,
    pub target_cell: usize,
    pub dt: f64,
}

impl Scenario {
    pub fn problem(&self) -> Result<SearchProblem> {
        SearchProblem::new(
            &self.map,
            self.occupancy.clone(),
            &self.graph,
            self.profiles.clone(),
            self.dt,
        )
    }

    pub fn shape(&self) -> GridShape {
        self.map.shape
    }
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let map = match &spec.map {
        MapSource::Synthetic { id, resolution } => synthetic_map(*id, *resolution)?,
        MapSource::File { path } => load_segmented_map(path)?,
    };
    let obstacles: BTreeSet<u8> = spec
        .obstacle_classes
        .clone()
        .unwrap_or_else(|| DEFAULT_OBSTACLE_CLASSES.into_iter().collect());
    let occupancy = derive_occupancy(&map, &obstacles);
    let shape = map.shape;

    let mut components = Vec::new();
    let prior = match &spec.prior {
        PriorSpec::Uniform => ProbabilityGrid::uniform(&occupancy)?,
        PriorSpec::ClassWeights { weights } => class_weight_prior(&map, &occupancy, weights)?,
        PriorSpec::File { path } => {
            let mut p = load_prior(path)?;
            if p.shape != shape {
                return Err(Error::InvalidScenario("prior grid does not match the map".into()));
            }
            p.mask(&occupancy);
            p.normalize_to(1.0)?;
            p
        }
        PriorSpec::GaussianMixture { components: comps } => {
            let (w, h) = shape.extent();
            for (k, c) in comps.iter().enumerate() {
                if !(c.center.x >= 0.0 && c.center.x <= w && c.center.y >= 0.0 && c.center.y <= h) {
                    return Err(Error::InvalidScenario(format!("component {k}: center outside the map")));
                }
            }
            let pieces: Vec<ProbabilityGrid> = comps
                .iter()
                .map(|c| gaussian_grid(shape, &occupancy, c))
                .collect();
            let total: f64 = pieces.iter().map(ProbabilityGrid::total).sum();
            if !(total > 0.0) {
                return Err(Error::DegeneratePrior);
            }
            let mut sum = ProbabilityGrid::zeros(shape);
            for mut piece in pieces {
                piece.scale(1.0 / total);
                for (s, m) in sum.mass.iter_mut().zip(&piece.mass) {
                    *s += m;
                }
                components.push(piece);
            }
            sum
        }
    };

    for a in &spec.agents {
        if !occupancy.is_free_at(a.start_position) {
            return Err(Error::InvalidScenario(format!(
                "agent {} starts at ({}, {}), which is not free space",
                a.id, a.start_position.x, a.start_position.y
            )));
        }
    }

    let target_cell = match spec.target {
        TargetPlacement::Fixed { cell: (c, r) } => {
            if c >= shape.width || r >= shape.height {
                return Err(Error::InvalidScenario(format!("target cell ({c}, {r}) is outside the map")));
            }
            let i = shape.index(c, r);
            if occupancy.occupied[i] {
                return Err(Error::InvalidScenario(format!("target cell ({c}, {r}) is an obstacle")));
            }
            i
        }
        TargetPlacement::Sampled => sample_target(&prior, spec.seed)?,
    };

    let graph = sample_graph(&occupancy, &spec.graph)?;
    let dt = spec.graph.grid_distance / spec.planning_speed();
    Ok(Scenario {
        spec: spec.clone(),
        map,
        occupancy,
        prior,
        components,
        profiles: spec.agents.clone(),
        graph,
        target_cell,
        dt,
    })
}

/// Draws a target cell from the prior with a seeded generator.
pub fn sample_target(prior: &ProbabilityGrid, seed: u64) -> Result<usize> {
    let dist = WeightedIndex::new(&prior.mass).map_err(|_| Error::DegeneratePrior)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(dist.sample(&mut rng))
}

fn gaussian_grid(shape: GridShape, occ: &OccupancyGrid, c: &GaussianComponent) -> ProbabilityGrid {
    let norm = c.weight / (2.0 * std::f64::consts::PI * c.sigma * c.sigma);
    let two_var = 2.0 * c.sigma * c.sigma;
    ProbabilityGrid {
        shape,
        mass: (0..shape.len())
            .map(|i| {
                if occ.occupied[i] {
                    0.0
                } else {
                    let p = shape.cell_center(i);
                    let d2 = (p.x - c.center.x).powi(2) + (p.y - c.center.y).powi(2);
                    norm * (-d2 / two_var).exp()
                }
            })
            .collect(),
    }
}

/// Builds one of the built-in 40 m maps at the given cell size.
pub fn synthetic_map(id: SyntheticMap, resolution: f64) -> Result<SegmentedMap> {
    let n = (SYNTHETIC_EXTENT / resolution).round() as usize;
    let shape = GridShape::new(n, n, resolution);
    let mut classes = vec![TERRAIN; shape.len()];
    if id == SyntheticMap::M2 {
        let t = resolution.max(0.5);
        let walls = [
            // Horizontal wall with two doorways.
            (Rect::new(0.0, 20.0, 8.0, 20.0 + t), WALL),
            (Rect::new(10.0, 20.0, 28.0, 20.0 + t), WALL),
            (Rect::new(30.0, 20.0, 40.0, 20.0 + t), WALL),
            // Vertical wall with two doorways.
            (Rect::new(20.0, 0.0, 20.0 + t, 8.0), WALL),
            (Rect::new(20.0, 10.0, 20.0 + t, 30.0), WALL),
            (Rect::new(20.0, 32.0, 20.0 + t, 40.0), WALL),
            (Rect::new(6.0, 28.0, 12.0, 34.0), BUILDING),
            (Rect::new(28.0, 6.0, 34.0, 12.0), BUILDING),
        ];
        for (i, class) in classes.iter_mut().enumerate() {
            let p = shape.cell_center(i);
            if let Some((_, c)) = walls.iter().find(|(r, _)| r.contains(p)) {
                *class = *c;
            }
        }
    }
    SegmentedMap::new(shape, classes, crate::grid_world::default_class_names())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(prior: PriorSpec) -> ScenarioSpec {
        ScenarioSpec {
            map: MapSource::Synthetic {
                id: SyntheticMap::M1,
                resolution: 1.0,
            },
            prior,
            agents: vec![AgentProfile::new(0, Point::new(2.0, 2.0), 2.5, 1.0)],
            target: TargetPlacement::Sampled,
            seed: 3,
            graph: GraphParams::default(),
            obstacle_classes: None,
            planning_speed: None,
        }
    }

    #[test]
    fn uniform_prior_is_flat() {
        let s = generate_scenario(&spec(PriorSpec::Uniform)).unwrap();
        let v = 1.0 / 1600.0;
        assert!(s.prior.mass.iter().all(|m| (m - v).abs() < 1e-15));
        assert_eq!(s.dt, 3.5);
    }

    #[test]
    fn single_gaussian_follows_density() {
        let c = GaussianComponent {
            center: Point::new(20.0, 20.0),
            sigma: 5.0,
            weight: 2.0,
        };
        let s = generate_scenario(&spec(PriorSpec::GaussianMixture { components: vec![c] })).unwrap();
        let shape = s.shape();
        let density = |i: usize| {
            let p = shape.cell_center(i);
            (-((p.x - 20.0).powi(2) + (p.y - 20.0).powi(2)) / 50.0).exp()
        };
        let (a, b) = (shape.index(20, 20), shape.index(5, 31));
        let ratio = s.prior.mass[a] / s.prior.mass[b];
        assert!((ratio / (density(a) / density(b)) - 1.0).abs() < 1e-9);
        assert!((s.prior.total() - 1.0).abs() < 1e-12);
        assert_eq!(s.components.len(), 1);
    }

    #[test]
    fn target_is_deterministic() {
        let a = generate_scenario(&spec(PriorSpec::Uniform)).unwrap();
        let b = generate_scenario(&spec(PriorSpec::Uniform)).unwrap();
        assert_eq!(a.target_cell, b.target_cell);
    }

    #[test]
    fn fixed_target_on_obstacle_is_rejected() {
        let mut s = spec(PriorSpec::Uniform);
        s.map = MapSource::Synthetic {
            id: SyntheticMap::M2,
            resolution: 1.0,
        };
        s.target = TargetPlacement::Fixed { cell: (15, 20) };
        assert!(matches!(generate_scenario(&s), Err(Error::InvalidScenario(_))));
        s.target = TargetPlacement::Fixed { cell: (15, 21) };
        assert!(generate_scenario(&s).is_ok());
    }

    #[test]
    fn obstacles_carry_no_mass() {
        let mut s = spec(PriorSpec::GaussianMixture {
            components: vec![GaussianComponent {
                center: Point::new(20.0, 20.0),
                sigma: 6.0,
                weight: 1.0,
            }],
        });
        s.map = MapSource::Synthetic {
            id: SyntheticMap::M2,
            resolution: 0.5,
        };
        let sc = generate_scenario(&s).unwrap();
        assert!(sc
            .prior
            .mass
            .iter()
            .zip(&sc.occupancy.occupied)
            .all(|(m, &o)| !o || *m == 0.0));
        assert!(sc.occupancy.free_count() < sc.shape().len());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = spec(PriorSpec::Uniform);
        let text = serde_json::to_string(&s).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
    }
}
