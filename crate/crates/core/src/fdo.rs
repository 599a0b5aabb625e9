//! Fitness Dependent Optimizer over box-constrained real vectors.
//!
//! Each scout bee carries a position, its objective value, and the last pace
//! that moved it to a better spot. Every iteration a scout draws a new pace
//! whose size depends on the fitness weight
//! `fw = |best_fitness / current_fitness| - wf`:
//!
//! - `fw` in the open interval (0, 1): the pace is `(x - best) * fw`, negated
//!   per dimension when that dimension's random draw `r` is negative;
//! - otherwise (`fw` of 0, 1, out of range, or the current fitness is 0):
//!   the pace is `x * r` with `r` uniform in [-1, 1] per dimension.
//!
//! A move is kept only if it strictly improves the scout. If it does not, the
//! stored pace is tried once more; failing that the scout stays put.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Error, Result};

/// A function to be minimized.
///
/// Implemented for every `Fn(&[f64]) -> f64 + Sync` closure.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Per-dimension search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    /// Degenerate dimensions (`lower == upper`) are allowed and pin the
    /// coordinate to a single value.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "upper bounds",
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::Config("bounds must have at least one dimension".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("dimension {i}: bounds must be finite")));
            }
            if lo > hi {
                return Err(Error::Config(format!(
                    "dimension {i}: lower bound {lo} exceeds upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dimension: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dimension], vec![upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| (*lo..=*hi).contains(v))
    }

    fn clamp_in_place(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

/// Projects `position` componentwise onto the box.
pub fn clamp_to_bounds(position: &[f64], bounds: &Bounds) -> Vec<f64> {
    debug_assert_eq!(position.len(), bounds.dimension());
    let mut out = position.to_vec();
    bounds.clamp_in_place(&mut out);
    out
}

#[derive(Debug, Clone)]
pub struct FdoConfig {
    /// Number of scout bees. Fewer than five hurts accuracy noticeably.
    pub population: usize,
    pub max_iterations: usize,
    /// `wf` in [0, 1]; 0 gives the most stable search.
    pub weight_factor: f64,
    pub bounds: Bounds,
    pub seed: u64,
    pub draws: DrawMode,
    /// Evaluate candidates on the rayon pool. Results are identical to the
    /// sequential schedule.
    pub parallel: bool,
}

/// Granularity of the random number `r` used to build a pace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawMode {
    /// One `r` per scout move, shared by every dimension.
    PerScout,
    /// A fresh `r` for every dimension.
    #[default]
    PerDimension,
}

impl std::str::FromStr for DrawMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "per-scout" => Ok(DrawMode::PerScout),
            "per-dimension" => Ok(DrawMode::PerDimension),
            other => Err(Error::Config(format!("unknown draw mode `{other}`"))),
        }
    }
}

impl FdoConfig {
    pub fn new(bounds: Bounds) -> Self {
        Self {
            population: 30,
            max_iterations: 500,
            weight_factor: 0.0,
            bounds,
            seed: crate::DEFAULT_SEED,
            draws: DrawMode::default(),
            parallel: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::Config("population must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.weight_factor) {
            return Err(Error::Config(format!(
                "weight factor {} outside [0, 1]",
                self.weight_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoutBee {
    pub position: Vec<f64>,
    pub fitness: f64,
    /// Last pace that produced an accepted move; zero until the first one.
    pub last_pace: Vec<f64>,
}

/// Per-iteration global-best fitness trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceCurve {
    values: Vec<f64>,
}

impl ConvergenceCurve {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// `iteration,best_mse` CSV, iterations numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,best_mse\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }
}

impl From<Vec<f64>> for ConvergenceCurve {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub curve: ConvergenceCurve,
    pub iterations_run: usize,
    pub evaluations: usize,
}

/// Outcome of the fitness-weight computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitnessWeight {
    Weight(f64),
    /// The current fitness is zero, so the ratio is undefined.
    RandomPace,
}

impl FitnessWeight {
    /// Whether the `x * r` random-walk pace applies.
    pub fn uses_random_pace(self) -> bool {
        match self {
            FitnessWeight::RandomPace => true,
            FitnessWeight::Weight(fw) => !(fw > 0.0 && fw < 1.0),
        }
    }
}

pub fn fitness_weight(current_fitness: f64, global_best_fitness: f64, wf: f64) -> FitnessWeight {
    if current_fitness == 0.0 {
        FitnessWeight::RandomPace
    } else {
        FitnessWeight::Weight((global_best_fitness / current_fitness).abs() - wf)
    }
}

/// Pace for one scout given the per-dimension draws `r` in [-1, 1].
pub fn pace_from_draws(position: &[f64], best: &[f64], fw: FitnessWeight, draws: &[f64]) -> Vec<f64> {
    match fw {
        FitnessWeight::Weight(w) if !fw.uses_random_pace() => position
            .iter()
            .zip(best)
            .zip(draws)
            .map(|((x, b), r)| {
                let toward = (x - b) * w;
                if *r < 0.0 {
                    -toward
                } else {
                    toward
                }
            })
            .collect(),
        _ => position.iter().zip(draws).map(|(x, r)| x * r).collect(),
    }
}

/// Draws `r` (once, or once per dimension) and builds the scout's next pace.
pub fn compute_pace<R: Rng + ?Sized>(
    scout: &ScoutBee,
    global_best: &ScoutBee,
    fw: FitnessWeight,
    draws: DrawMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = scout.position.len();
    if global_best.position.len() != d {
        return Err(Error::DimensionMismatch {
            what: "global best position",
            expected: d,
            actual: global_best.position.len(),
        });
    }
    let r: Vec<f64> = match draws {
        DrawMode::PerScout => vec![rng.random_range(-1.0..=1.0); d],
        DrawMode::PerDimension => (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    };
    Ok(pace_from_draws(&scout.position, &global_best.position, fw, &r))
}

fn checked(value: f64, position: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteObjective {
            value,
            position: position.to_vec(),
            iteration: None,
        })
    }
}

/// Evaluates every candidate, reporting the lowest-index failure.
fn evaluate_all<O: Objective + ?Sized>(
    objective: &O,
    candidates: &[Vec<f64>],
    parallel: bool,
) -> Result<Vec<f64>> {
    let raw: Vec<f64> = if parallel {
        candidates.par_iter().map(|c| objective.evaluate(c)).collect()
    } else {
        candidates.iter().map(|c| objective.evaluate(c)).collect()
    };
    raw.into_iter()
        .zip(candidates)
        .map(|(v, c)| checked(v, c))
        .collect()
}

/// Scout population together with the best solution found so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Swarm {
    pub scouts: Vec<ScoutBee>,
    pub best: ScoutBee,
    pub evaluations: usize,
}

/// Scatters `population` scouts uniformly over the box and evaluates them.
pub fn initialize_swarm<O, R>(config: &FdoConfig, objective: &O, rng: &mut R) -> Result<Swarm>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let d = config.dimension();
    let positions: Vec<Vec<f64>> = (0..config.population)
        .map(|_| config.bounds.sample(rng))
        .collect();
    let fitness = evaluate_all(objective, &positions, config.parallel)?;
    let scouts: Vec<ScoutBee> = positions
        .into_iter()
        .zip(fitness)
        .map(|(position, fitness)| ScoutBee {
            position,
            fitness,
            last_pace: vec![0.0; d],
        })
        .collect();
    let best = scouts[best_index(&scouts)].clone();
    Ok(Swarm {
        evaluations: scouts.len(),
        scouts,
        best,
    })
}

/// Index of the lowest fitness; the first one wins ties.
fn best_index(scouts: &[ScoutBee]) -> usize {
    let mut idx = 0;
    for (i, s) in scouts.iter().enumerate().skip(1) {
        if s.fitness < scouts[idx].fitness {
            idx = i;
        }
    }
    idx
}

impl Swarm {
    /// Moves every scout once and refreshes the global best.
    ///
    /// All random draws happen up front in scout order; evaluation may then
    /// run in parallel without changing the outcome. On error no scout is
    /// modified.
    pub fn step<O, R>(&mut self, objective: &O, config: &FdoConfig, rng: &mut R) -> Result<f64>
    where
        O: Objective + ?Sized,
        R: Rng + ?Sized,
    {
        let bounds = &config.bounds;
        let paces = self
            .scouts
            .iter()
            .map(|s| {
                let fw = fitness_weight(s.fitness, self.best.fitness, config.weight_factor);
                compute_pace(s, &self.best, fw, config.draws, rng)
            })
            .collect::<Result<Vec<_>>>()?;

        let candidates: Vec<Vec<f64>> = self
            .scouts
            .iter()
            .zip(&paces)
            .map(|(s, pace)| displaced(&s.position, pace, bounds))
            .collect();
        let candidate_fitness = evaluate_all(objective, &candidates, config.parallel)?;

        // Rejected moves fall back on the stored pace. A retry that lands on
        // the current position cannot improve and is not evaluated.
        let mut retry_index = Vec::new();
        let mut retries = Vec::new();
        for (i, s) in self.scouts.iter().enumerate() {
            if candidate_fitness[i] < s.fitness {
                continue;
            }
            let fallback = displaced(&s.position, &s.last_pace, bounds);
            if fallback != s.position {
                retry_index.push(i);
                retries.push(fallback);
            }
        }
        let retry_fitness = evaluate_all(objective, &retries, config.parallel)?;

        self.evaluations += candidates.len() + retries.len();
        for ((i, candidate), fitness) in candidates.into_iter().enumerate().zip(candidate_fitness) {
            let scout = &mut self.scouts[i];
            if fitness < scout.fitness {
                scout.position = candidate;
                scout.fitness = fitness;
                scout.last_pace = paces[i].clone();
            }
        }
        for ((i, fallback), fitness) in retry_index.into_iter().zip(retries).zip(retry_fitness) {
            let scout = &mut self.scouts[i];
            if fitness < scout.fitness {
                scout.position = fallback;
                scout.fitness = fitness;
            }
        }

        let idx = best_index(&self.scouts);
        if self.scouts[idx].fitness < self.best.fitness {
            self.best = self.scouts[idx].clone();
        }
        Ok(self.best.fitness)
    }
}

fn displaced(position: &[f64], pace: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut out: Vec<f64> = position.iter().zip(pace).map(|(x, p)| x + p).collect();
    bounds.clamp_in_place(&mut out);
    out
}

/// Runs a full optimization with the caller's random stream.
pub fn optimize<O, R>(objective: &O, config: &FdoConfig, rng: &mut R) -> Result<OptimizationResult>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    let mut swarm = initialize_swarm(config, objective, rng)?;
    let mut curve = ConvergenceCurve::new();
    for t in 0..config.max_iterations {
        let best = swarm
            .step(objective, config, rng)
            .map_err(|e| e.at_iteration(t + 1))?;
        curve.push(best);
    }
    Ok(OptimizationResult {
        best_position: swarm.best.position,
        best_fitness: swarm.best.fitness,
        iterations_run: curve.len(),
        curve,
        evaluations: swarm.evaluations,
    })
}

/// Like [`optimize`], seeding a ChaCha8 stream from `config.seed`.
pub fn minimize<O: Objective + ?Sized>(objective: &O, config: &FdoConfig) -> Result<OptimizationResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    optimize(objective, config, &mut rng)
}
