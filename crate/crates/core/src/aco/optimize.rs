use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::construct::{construct_ant_solution, greedy_with, Context};
use super::params::MmasParams;
use super::pheromone::{init_pheromones, PheromoneField};
use super::AntSolution;
use crate::belief::BeliefState;
use crate::error::Result;
use crate::problem::SearchProblem;

/// Solution order: complete before incomplete, then lower residual among
/// incomplete ones, then lower EST.
pub fn compare_solutions(a: &AntSolution, b: &AntSolution) -> Ordering {
    b.complete
        .cmp(&a.complete)
        .then_with(|| {
            if a.complete {
                Ordering::Equal
            } else {
                a.residual.total_cmp(&b.residual)
            }
        })
        .then_with(|| a.est.total_cmp(&b.est))
}

/// Best solution after each iteration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub best_est: Vec<f64>,
    pub iteration_est: Vec<f64>,
}

/// Iterative MAX-MIN ant system over a fixed problem and belief.
pub struct Optimizer<'a> {
    ctx: Context<'a>,
    field: PheromoneField,
    seed: AntSolution,
    best: AntSolution,
    trace: ConvergenceTrace,
    iteration: usize,
    master: ChaCha8Rng,
}

impl<'a> Optimizer<'a> {
    pub fn new(problem: &'a SearchProblem, belief: &'a BeliefState, params: &'a MmasParams) -> Result<Self> {
        params.validate()?;
        let ctx = Context::new(problem, belief, params);
        let seed = greedy_with(&ctx)?;
        let field = init_pheromones(problem, &seed, params);
        let master = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Optimizer {
            ctx,
            field,
            best: seed.clone(),
            seed,
            trace: ConvergenceTrace::default(),
            iteration: 0,
            master,
        })
    }

    pub fn field(&self) -> &PheromoneField {
        &self.field
    }

    pub fn best(&self) -> &AntSolution {
        &self.best
    }

    /// The greedy solution used to scale the pheromone bounds.
    pub fn seed_solution(&self) -> &AntSolution {
        &self.seed
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    /// Runs one iteration: all ants construct, pheromone evaporates, then
    /// either the iteration best or the best-so-far deposits. Returns the
    /// iteration best.
    pub fn iterate(&mut self) -> Result<AntSolution> {
        let params = self.ctx.params;
        let n = params.n_ants as u64;
        let iter = self.iteration as u64;
        let ctx = &self.ctx;
        let field = &self.field;
        let mut ants: Vec<AntSolution> = (0..n)
            .into_par_iter()
            .map(|a| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(1 + iter * n + a);
                construct_ant_solution(ctx, field, &mut rng)
            })
            .collect::<Result<_>>()?;
        let mut winner = 0;
        for i in 1..ants.len() {
            if compare_solutions(&ants[i], &ants[winner]) == Ordering::Less {
                winner = i;
            }
        }
        let iteration_best = ants.swap_remove(winner);
        if compare_solutions(&iteration_best, &self.best) == Ordering::Less {
            self.best = iteration_best.clone();
        }
        self.field.evaporate(params.rho);
        let use_global = self.master.gen::<f64>() < params.best_so_far_prob;
        let depositor = if use_global { &self.best } else { &iteration_best };
        self.field.deposit(self.ctx.problem, depositor);
        self.trace.best_est.push(self.best.est);
        self.trace.iteration_est.push(iteration_best.est);
        self.iteration += 1;
        Ok(iteration_best)
    }

    /// Runs the remaining iterations.
    pub fn run(mut self) -> Result<OptimizeResult> {
        while self.iteration < self.ctx.params.n_iterations {
            self.iterate()?;
        }
        Ok(OptimizeResult {
            best: self.best,
            seed: self.seed,
            trace: self.trace,
            field: self.field,
        })
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub best: AntSolution,
    pub seed: AntSolution,
    pub trace: ConvergenceTrace,
    pub field: PheromoneField,
}

/// Runs the full optimization with `params.n_iterations` iterations.
pub fn optimize(problem: &SearchProblem, belief: &BeliefState, params: &MmasParams) -> Result<OptimizeResult> {
    Optimizer::new(problem, belief, params)?.run()
}
