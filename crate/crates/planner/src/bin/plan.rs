use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mts_core::aco::{optimize, ConvergenceTrace, HeuristicKind, MmasParams};
use mts_core::belief::{split_sub_priors, BeliefState};
use mts_core::grid_world::{
    derive_occupancy, load_segmented_map, sample_graph, AgentProfile, GraphFile, GraphParams,
    PreferredArea, DEFAULT_CLEARANCE, DEFAULT_OBSTACLE_CLASSES,
};
use mts_core::sim::{
    benchmark, generate_scenario, render_table, run_search, sub_prior_belief, summarize_runs,
    write_csv, BenchSpec, MapSource, Plan, PriorSpec, Scenario, ScenarioSpec, SimConfig,
    SubPriorMode, TargetPlacement,
};
use mts_planner::ServiceConfig;
use serde::{Deserialize, Serialize};

/// Multi-agent search planner.
#[derive(Parser)]
#[command(name = "plan", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample nodes on a segmented map and write the search graph.
    BuildGraph {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 3.5)]
        grid_distance: f64,
        #[arg(long, default_value_t = 7)]
        neighborhood: usize,
        #[arg(long, default_value_t = DEFAULT_CLEARANCE)]
        clearance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize agent paths.
    Optimize(OptimizeArgs),
    /// Run a benchmark grid and write a CSV of ET/CT/PD statistics.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a plan against sampled targets.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Target seed; the scenario seed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of runs, with consecutive target seeds.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long)]
        timeout: Option<f64>,
        /// JSON file with preferred areas, for the considered-areas metric.
        #[arg(long)]
        areas: Option<PathBuf>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// JSON file with default optimizer parameters.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Browser origin allowed to call the API; repeatable, `*` for any.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    /// Scenario file; alternatively give --map, --prior and --agents.
    #[arg(long, conflicts_with_all = ["map", "prior"])]
    scenario: Option<PathBuf>,
    #[arg(long, requires_all = ["prior", "agents"])]
    map: Option<PathBuf>,
    #[arg(long)]
    prior: Option<PathBuf>,
    /// JSON list of agent profiles; overrides the scenario's agents.
    #[arg(long)]
    agents: Option<PathBuf>,
    #[arg(long, default_value_t = 3.5)]
    grid_distance: f64,
    #[arg(long, default_value_t = 7)]
    neighborhood: usize,
    /// JSON file with optimizer parameters; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    residual: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    heuristic: Option<Heuristic>,
    #[arg(long, value_enum, default_value = "none")]
    subpriors: Mode,
    /// JSON list of preferred areas; replaces --subpriors.
    #[arg(long, conflicts_with = "subpriors")]
    areas: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Heuristic {
    Tsp,
    Mts,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    None,
    Equal,
    Nearest,
    Swapped,
}

impl From<Mode> for SubPriorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::None => SubPriorMode::None,
            Mode::Equal => SubPriorMode::Equal,
            Mode::Nearest => SubPriorMode::Nearest,
            Mode::Swapped => SubPriorMode::Swapped,
        }
    }
}

/// Contents of `plan.json`.
#[derive(Serialize, Deserialize)]
struct PlanFile {
    #[serde(flatten)]
    plan: Plan,
    /// Node positions of each path, meters.
    positions: Vec<Vec<[f64; 2]>>,
    params: MmasParams,
    areas: Vec<PreferredArea>,
    trace: ConvergenceTrace,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::BuildGraph {
            map,
            grid_distance,
            neighborhood,
            clearance,
            out,
        } => build_graph(&map, grid_distance, neighborhood, clearance, &out),
        Cmd::Optimize(args) => run_optimize(args),
        Cmd::Bench { spec, reps, out } => run_bench(&spec, reps, out.as_deref()),
        Cmd::Simulate {
            plan,
            scenario,
            seed,
            runs,
            timeout,
            areas,
        } => run_simulate(&plan, &scenario, seed, runs, timeout, areas.as_deref()),
        Cmd::Serve {
            host,
            port,
            params,
            cors_origins,
            snapshot_dir,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            let default_params = match params {
                Some(p) => read_json(&p)?,
                None => MmasParams::default(),
            };
            let config = ServiceConfig {
                host,
                port,
                default_params,
                cors_origins,
                snapshot_dir,
            };
            tokio::runtime::Runtime::new()?.block_on(mts_planner::serve(config))?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            serde_json::to_writer_pretty(&mut w, value)?;
            w.flush()?;
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn build_graph(map: &Path, grid_distance: f64, neighborhood: usize, clearance: f64, out: &Path) -> Result<()> {
    let map = load_segmented_map(map)?;
    let occ = derive_occupancy(&map, &DEFAULT_OBSTACLE_CLASSES.into_iter().collect());
    let graph = sample_graph(
        &occ,
        &GraphParams {
            grid_distance,
            neighborhood,
            clearance,
        },
    )?;
    write_json(&GraphFile::from(&graph), Some(out))?;
    eprintln!("{} nodes, {} arcs", graph.len(), graph.arc_count());
    Ok(())
}

fn scenario_spec(args: &OptimizeArgs) -> Result<ScenarioSpec> {
    let mut spec = match (&args.scenario, &args.map, &args.prior) {
        (Some(path), _, _) => ScenarioSpec::load(path)?,
        (None, Some(map), Some(prior)) => ScenarioSpec {
            map: MapSource::File { path: map.clone() },
            prior: PriorSpec::File { path: prior.clone() },
            agents: Vec::new(),
            target: TargetPlacement::Sampled,
            seed: 0,
            graph: GraphParams {
                grid_distance: args.grid_distance,
                neighborhood: args.neighborhood,
                clearance: DEFAULT_CLEARANCE,
            },
            obstacle_classes: None,
            planning_speed: None,
        },
        _ => bail!("give --scenario, or --map with --prior and --agents"),
    };
    if let Some(agents) = &args.agents {
        spec.agents = read_json::<Vec<AgentProfile>>(agents)?;
    }
    Ok(spec)
}

fn optimizer_params(args: &OptimizeArgs) -> Result<MmasParams> {
    let mut p = match &args.params {
        Some(path) => read_json(path)?,
        None => MmasParams::default(),
    };
    if let Some(v) = args.ants {
        p.n_ants = v;
    }
    if let Some(v) = args.iters {
        p.n_iterations = v;
    }
    if let Some(v) = args.alpha {
        p.alpha = v;
    }
    if let Some(v) = args.beta {
        p.beta = v;
    }
    if let Some(v) = args.rho {
        p.rho = v;
    }
    if let Some(v) = args.residual {
        p.residual_target = v;
    }
    if let Some(v) = args.seed {
        p.seed = v;
    }
    if let Some(h) = args.heuristic {
        p.heuristic = match h {
            Heuristic::Tsp => HeuristicKind::Tsp,
            Heuristic::Mts => HeuristicKind::Mts,
        };
    }
    p.validate()?;
    Ok(p)
}

fn planning_belief(scenario: &Scenario, mode: SubPriorMode, areas: &[PreferredArea]) -> Result<BeliefState> {
    if areas.is_empty() {
        return Ok(sub_prior_belief(scenario, mode)?);
    }
    let shape = scenario.shape();
    for a in areas {
        a.validate(&shape, scenario.profiles.len())?;
    }
    let layers = split_sub_priors(&scenario.prior, areas, scenario.profiles.len())?;
    Ok(BeliefState::with_sub_priors(layers)?)
}

fn run_optimize(args: OptimizeArgs) -> Result<()> {
    let spec = scenario_spec(&args)?;
    let params = optimizer_params(&args)?;
    let areas: Vec<PreferredArea> = match &args.areas {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let scenario = generate_scenario(&spec)?;
    let problem = scenario.problem()?;
    let belief = planning_belief(&scenario, args.subpriors.into(), &areas)?;
    let t0 = Instant::now();
    let result = optimize(&problem, &belief, &params)?;
    let plan = Plan::from_solution(&problem, &result.best, t0.elapsed().as_secs_f64());
    eprintln!(
        "EST {:.2} s, residual {:.4}{}, CT {:.2} s, PD {:.1} m",
        plan.est,
        plan.residual,
        if plan.complete { "" } else { " (incomplete)" },
        plan.computation_time,
        plan.path_distances.iter().sum::<f64>(),
    );
    let positions = result
        .best
        .paths
        .iter()
        .enumerate()
        .map(|(m, path)| {
            path.iter()
                .filter_map(|&id| problem.graphs[m].node(id))
                .map(|n| [n.position.x, n.position.y])
                .collect()
        })
        .collect();
    write_json(
        &PlanFile {
            plan,
            positions,
            params,
            areas,
            trace: result.trace,
        },
        args.out.as_deref(),
    )
}

fn run_bench(path: &Path, reps: Option<usize>, out: Option<&Path>) -> Result<()> {
    let mut spec: BenchSpec = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for s in &mut spec.scenarios {
        s.scenario.resolve_paths(base);
    }
    if let Some(r) = reps {
        spec.reps = r;
    }
    let rows = benchmark(&spec)?;
    match out {
        Some(path) => write_csv(&rows, File::create(path).with_context(|| format!("creating {}", path.display()))?)?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    eprintln!("{}", render_table(&rows));
    Ok(())
}

fn run_simulate(
    plan: &Path,
    scenario_path: &Path,
    seed: Option<u64>,
    runs: u64,
    timeout: Option<f64>,
    areas: Option<&Path>,
) -> Result<()> {
    let file: PlanFile = read_json(plan)?;
    let mut spec = ScenarioSpec::load(scenario_path)?;
    let areas = match areas {
        Some(p) => read_json(p)?,
        None => file.areas.clone(),
    };
    let first = seed.unwrap_or(spec.seed);
    let config = SimConfig {
        timeout,
        areas,
        ..SimConfig::default()
    };
    let mut results = Vec::new();
    for k in 0..runs.max(1) {
        spec.seed = first + k;
        let scenario = generate_scenario(&spec)?;
        if scenario.profiles.len() != file.plan.polylines.len() {
            bail!(
                "plan has {} agents, scenario has {}",
                file.plan.polylines.len(),
                scenario.profiles.len()
            );
        }
        results.push(run_search(&scenario, &file.plan, &config));
    }
    if results.len() == 1 {
        write_json(&results[0], None)
    } else {
        write_json(&summarize_runs(&results, &spec.agents), None)
    }
}
