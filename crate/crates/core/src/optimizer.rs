//! Real-coded genetic algorithm over physical parameters, maximising the
//! propagation fidelity at a target distance.
//!
//! Selection is by tournament, recombination by blend crossover (BLX-α),
//! mutation is Gaussian and clipped to the bounds, and the best `elitism`
//! individuals survive unchanged. Every random draw for child `i` of
//! generation `g` comes from its own stream seeded by `(seed, g, i)`, so
//! results do not depend on the order in which candidates are evaluated.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{make_ofw, Grid};
use crate::metrics::fidelity;
use crate::params::{angular_to_ghz, PhysicalParams};
use crate::propagator::{AbsorbingBoundary, KernelPart, Mode, PropagationConfig, SplitStep};
use crate::quadrature::QuadratureOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    /// Δ, rad·µs⁻¹
    Delta,
    /// N_a, µm⁻³
    Density,
    /// Ω_p0, rad·µs⁻¹
    ProbeRabi,
    /// Ω_c, rad·µs⁻¹
    CouplingRabi,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Delta => "delta",
            Parameter::Density => "n_a",
            Parameter::ProbeRabi => "omega_p0",
            Parameter::CouplingRabi => "omega_c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delta" => Some(Parameter::Delta),
            "n_a" => Some(Parameter::Density),
            "omega_p0" => Some(Parameter::ProbeRabi),
            "omega_c" => Some(Parameter::CouplingRabi),
            _ => None,
        }
    }

    pub fn apply(self, p: &PhysicalParams, value: f64) -> PhysicalParams {
        match self {
            Parameter::Delta => PhysicalParams { delta: value, ..p.clone() },
            Parameter::Density => p.with_density(value),
            Parameter::ProbeRabi => PhysicalParams { omega_p0: value, ..p.clone() },
            Parameter::CouplingRabi => PhysicalParams { omega_c: value, ..p.clone() },
        }
    }

    pub fn read(self, p: &PhysicalParams) -> f64 {
        match self {
            Parameter::Delta => p.delta,
            Parameter::Density => p.n_a,
            Parameter::ProbeRabi => p.omega_p0,
            Parameter::CouplingRabi => p.omega_c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub parameter: Parameter,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub bounds: Vec<Bound>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<Bound>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Optimizer("search space needs at least one parameter".into()));
        }
        for b in &bounds {
            if !(b.lower.is_finite() && b.upper.is_finite()) || b.lower > b.upper {
                return Err(Error::Optimizer(format!(
                    "bad bounds for {}: [{}, {}]",
                    b.parameter.name(),
                    b.lower,
                    b.upper
                )));
            }
        }
        for (i, b) in bounds.iter().enumerate() {
            if bounds[..i].iter().any(|o| o.parameter == b.parameter) {
                return Err(Error::Optimizer(format!("{} listed twice", b.parameter.name())));
            }
        }
        Ok(SearchSpace { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, c: &[f64]) -> bool {
        c.len() == self.dim() && self.bounds.iter().zip(c).all(|(b, &v)| v >= b.lower && v <= b.upper)
    }

    fn clip(&self, c: &mut [f64]) {
        for (b, v) in self.bounds.iter().zip(c.iter_mut()) {
            *v = v.clamp(b.lower, b.upper);
        }
    }

    pub fn apply(&self, base: &PhysicalParams, c: &[f64]) -> PhysicalParams {
        self.bounds.iter().zip(c).fold(base.clone(), |p, (b, &v)| b.parameter.apply(&p, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub blend_alpha: f64,
    pub mutation_rate: f64,
    /// Standard deviation as a fraction of each bound's range.
    pub mutation_scale: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 40,
            tournament_size: 3,
            crossover_rate: 0.9,
            blend_alpha: 0.5,
            mutation_rate: 0.2,
            mutation_scale: 0.1,
            elitism: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::Optimizer(format!("population must be >= 4, got {}", self.population)));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Optimizer(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        if !(self.mutation_scale >= 0.0 && self.blend_alpha >= 0.0) {
            return Err(Error::Optimizer("mutation_scale and blend_alpha must be >= 0".into()));
        }
        if self.elitism >= self.population {
            return Err(Error::Optimizer("elitism must be smaller than the population".into()));
        }
        if self.tournament_size == 0 {
            return Err(Error::Optimizer("tournament_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Physics of one fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub base: PhysicalParams,
    pub l1: i32,
    pub l2: i32,
    pub grid: Grid,
    pub z_target: f64,
    pub dz: f64,
    pub mode: Mode,
    pub absorbing_boundary: Option<AbsorbingBoundary>,
    pub kernel_part: KernelPart,
    pub quadrature: QuadratureOptions,
}

impl Scenario {
    /// Fidelity after propagating to `z_target`; errors mean "failed".
    pub fn try_evaluate(&self, p: &PhysicalParams) -> Result<f64> {
        let u0 = make_ofw(self.grid, p, self.l1, self.l2);
        if self.z_target == 0.0 {
            return fidelity(&u0, &u0);
        }
        let cfg = PropagationConfig {
            dz: self.dz,
            z_end: self.z_target,
            mode: self.mode,
            record_every: usize::MAX,
            absorbing_boundary: self.absorbing_boundary,
            kernel_part: self.kernel_part,
        }
        .fitted();
        let mut stepper = SplitStep::for_params(&self.grid, &cfg, p, &self.quadrature)?;
        let mut u = u0.clone();
        for _ in 0..cfg.steps() {
            stepper.step(&mut u)?;
        }
        fidelity(&u, &u0)
    }
}

/// Outcome of a single candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub failed: bool,
}

pub fn evaluate_params(p: &PhysicalParams, scenario: &Scenario) -> Evaluation {
    match scenario.try_evaluate(p) {
        Ok(j) => Evaluation { fitness: j, failed: false },
        Err(e) => {
            log::debug!("candidate failed: {e}");
            Evaluation { fitness: 0.0, failed: true }
        }
    }
}

/// Fitness of `candidate` (values in the order of `space.bounds`).
pub fn evaluate(candidate: &[f64], space: &SearchSpace, scenario: &Scenario) -> Evaluation {
    evaluate_params(&space.apply(&scenario.base, candidate), scenario)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_candidate: Vec<f64>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_candidate: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Final population, sorted best first.
    pub population: Vec<(Vec<f64>, f64)>,
    pub evaluations: usize,
}

fn stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    // splitmix64 finaliser over the triple
    let mut z = seed
        ^ (generation as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (index as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn key(c: &[f64]) -> Vec<u64> {
    c.iter().map(|v| v.to_bits()).collect()
}

/// Runs the GA with an arbitrary fitness function. `fitness` must be
/// deterministic; repeated genotypes are looked up rather than re-evaluated.
pub fn optimize_with<F>(space: &SearchSpace, ga: &GaConfig, fitness: F) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    ga.validate()?;
    let mut cache: HashMap<Vec<u64>, Evaluation> = HashMap::new();
    let mut evaluations = 0usize;
    let mut eval_batch = |cands: &[Vec<f64>], cache: &mut HashMap<Vec<u64>, Evaluation>| -> Vec<Evaluation> {
        let mut todo: Vec<&Vec<f64>> = Vec::new();
        for c in cands {
            if !cache.contains_key(&key(c)) && !todo.iter().any(|t| key(t) == key(c)) {
                todo.push(c);
            }
        }
        let fresh: Vec<Evaluation> = todo.par_iter().map(|c| fitness(c)).collect();
        evaluations += fresh.len();
        for (c, e) in todo.iter().zip(fresh) {
            cache.insert(key(c), e);
        }
        cands.iter().map(|c| cache[&key(c)]).collect()
    };

    let mut population: Vec<Vec<f64>> = (0..ga.population)
        .map(|i| {
            let mut rng = stream(ga.seed, 0, i);
            space.bounds.iter().map(|b| if b.upper > b.lower { rng.gen_range(b.lower..=b.upper) } else { b.lower }).collect()
        })
        .collect();
    let mut scores = eval_batch(&population, &mut cache);
    let mut history = Vec::with_capacity(ga.generations + 1);
    let mut best: (Vec<f64>, f64) = (population[0].clone(), f64::NEG_INFINITY);

    for generation in 0..=ga.generations {
        let failed = scores.iter().filter(|e| e.failed).count();
        if failed == scores.len() {
            return Err(Error::Optimizer(format!(
                "every candidate of generation {generation} failed to propagate; first candidate {:?}",
                population[0]
            )));
        }
        // best first; ties keep population order
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[b].fitness.total_cmp(&scores[a].fitness).then(a.cmp(&b)));
        population = order.iter().map(|&i| population[i].clone()).collect();
        scores = order.iter().map(|&i| scores[i]).collect();
        if scores[0].fitness > best.1 {
            best = (population[0].clone(), scores[0].fitness);
        }
        history.push(GenerationStats {
            generation,
            best_fitness: scores[0].fitness,
            mean_fitness: scores.iter().map(|e| e.fitness).sum::<f64>() / scores.len() as f64,
            best_candidate: population[0].clone(),
            failed,
        });
        log::info!("generation {generation}: best J = {:.6}, mean J = {:.6}", history[generation].best_fitness, history[generation].mean_fitness);
        if generation == ga.generations {
            break;
        }

        let next_gen = generation + 1;
        let mut next: Vec<Vec<f64>> = population[..ga.elitism].to_vec();
        for i in ga.elitism..ga.population {
            let mut rng = stream(ga.seed, next_gen, i);
            let tournament = |rng: &mut ChaCha8Rng| {
                (0..ga.tournament_size).map(|_| rng.gen_range(0..population.len())).min().expect("tournament_size >= 1")
            };
            let a = tournament(&mut rng);
            let b = tournament(&mut rng);
            let mut child = population[a].clone();
            if rng.gen::<f64>() < ga.crossover_rate {
                for (k, gene) in child.iter_mut().enumerate() {
                    let (lo, hi) = {
                        let (x, y) = (population[a][k], population[b][k]);
                        (x.min(y), x.max(y))
                    };
                    let spread = ga.blend_alpha * (hi - lo);
                    let (lo, hi) = (lo - spread, hi + spread);
                    *gene = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                }
            }
            for (gene, bound) in child.iter_mut().zip(&space.bounds) {
                let sigma = ga.mutation_scale * (bound.upper - bound.lower);
                if rng.gen::<f64>() < ga.mutation_rate && sigma > 0.0 {
                    *gene += Normal::new(0.0, sigma).expect("finite sigma").sample(&mut rng);
                }
            }
            space.clip(&mut child);
            next.push(child);
        }
        population = next;
        scores = eval_batch(&population, &mut cache);
    }

    let population = population.into_iter().zip(scores.iter().map(|e| e.fitness)).collect();
    Ok(OptimizationResult {
        best_candidate: best.0,
        best_fitness: best.1,
        history,
        population,
        evaluations,
    })
}

/// GA over `space` with fitness = fidelity of `scenario` at `z_target`.
pub fn optimize(space: &SearchSpace, ga: &GaConfig, scenario: &Scenario) -> Result<OptimizationResult> {
    optimize_with(space, ga, |c| evaluate(c, space, scenario))
}

/// Uniform `n^d` grid scan of the search box; all points, best first.
pub fn grid_scan<F>(space: &SearchSpace, n: usize, fitness: F) -> Vec<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let d = space.dim();
    let total = n.pow(d as u32);
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            space
                .bounds
                .iter()
                .map(|b| {
                    let k = idx % n;
                    idx /= n;
                    if n == 1 { 0.5 * (b.lower + b.upper) } else { b.lower + (b.upper - b.lower) * k as f64 / (n - 1) as f64 }
                })
                .collect()
        })
        .collect();
    let scores: Vec<f64> = points.par_iter().map(|c| fitness(c).fitness).collect();
    let mut scored: Vec<(Vec<f64>, f64)> = points.into_iter().zip(scores).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored
}

/// Re-scores the `top_k` best distinct candidates of `ranked` (best first)
/// with a more expensive fitness and returns the winner under it.
pub fn refine<F>(ranked: &[(Vec<f64>, f64)], top_k: usize, fitness: F) -> Option<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Evaluation + Sync,
{
    let mut picked: Vec<&Vec<f64>> = Vec::new();
    for (c, _) in ranked {
        if picked.len() == top_k {
            break;
        }
        if !picked.contains(&c) {
            picked.push(c);
        }
    }
    let scores: Vec<f64> = picked.par_iter().map(|c| fitness(c).fitness).collect();
    picked
        .into_iter()
        .zip(scores)
        .fold(None, |best: Option<(Vec<f64>, f64)>, (c, s)| match best {
            Some(b) if b.1 >= s => Some(b),
            _ => Some((c.clone(), s)),
        })
}

/// GA on a cheap `coarse` scenario, then the best `top_k` candidates of
/// the final population (plus the best ever seen) re-scored on `fine`.
pub fn optimize_two_stage(
    space: &SearchSpace,
    ga: &GaConfig,
    coarse: &Scenario,
    fine: &Scenario,
    top_k: usize,
) -> Result<(OptimizationResult, Vec<f64>, f64)> {
    let result = optimize(space, ga, coarse)?;
    let mut ranked = vec![(result.best_candidate.clone(), result.best_fitness)];
    ranked.extend(result.population.iter().cloned());
    let (best, j) = refine(&ranked, top_k.max(1), |c| evaluate(c, space, fine)).expect("population is non-empty");
    Ok((result, best, j))
}

/// Human-readable value for CSV/config output: Δ and Rabi frequencies as
/// `/2π` in GHz and MHz, density in µm⁻³.
pub fn display_value(parameter: Parameter, value: f64) -> (String, f64) {
    match parameter {
        Parameter::Delta => ("delta_over_2pi_ghz".into(), angular_to_ghz(value)),
        Parameter::Density => ("n_a_per_um3".into(), value),
        Parameter::ProbeRabi => ("omega_p0_over_2pi_mhz".into(), value / std::f64::consts::TAU),
        Parameter::CouplingRabi => ("omega_c_over_2pi_mhz".into(), value / std::f64::consts::TAU),
    }
}
