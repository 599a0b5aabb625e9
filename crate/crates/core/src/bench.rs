//! Classical test objectives for validating the optimizer on its own.

use std::f64::consts::PI;

use rand::Rng;

use crate::fdo::{Bounds, Objective};
use crate::{Error, Result};

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Config(format!(
            "rosenbrock needs at least 2 dimensions, got {}",
            x.len()
        )));
    }
    Ok(rosenbrock_unchecked(x))
}

fn rosenbrock_unchecked(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    name: &'static str,
    min_dimension: usize,
    known_minimum: f64,
    argmin_value: f64,
    default_bounds: (f64, f64),
    eval: fn(&[f64]) -> f64,
}

const REGISTRY: &[Entry] = &[
    Entry {
        name: "sphere",
        min_dimension: 1,
        known_minimum: 0.0,
        argmin_value: 0.0,
        default_bounds: (-100.0, 100.0),
        eval: sphere,
    },
    Entry {
        name: "rastrigin",
        min_dimension: 1,
        known_minimum: 0.0,
        argmin_value: 0.0,
        default_bounds: (-5.12, 5.12),
        eval: rastrigin,
    },
    Entry {
        name: "rosenbrock",
        min_dimension: 2,
        known_minimum: 0.0,
        argmin_value: 1.0,
        default_bounds: (-30.0, 30.0),
        eval: rosenbrock_unchecked,
    },
];

/// A named test function instantiated at a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkFunction {
    entry: Entry,
    dimension: usize,
}

impl BenchmarkFunction {
    pub fn lookup(name: &str, dimension: usize) -> Result<Self> {
        let entry = REGISTRY
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(name))
            .copied()
            .ok_or_else(|| Error::UnknownFunction(name.to_string()))?;
        if dimension < entry.min_dimension {
            return Err(Error::Config(format!(
                "{} needs at least {} dimensions, got {dimension}",
                entry.name, entry.min_dimension
            )));
        }
        Ok(Self { entry, dimension })
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        REGISTRY.iter().map(|e| e.name)
    }

    pub fn name(&self) -> &'static str {
        self.entry.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_minimum(&self) -> f64 {
        self.entry.known_minimum
    }

    pub fn argmin(&self) -> Vec<f64> {
        vec![self.entry.argmin_value; self.dimension]
    }

    pub fn default_bounds(&self) -> (f64, f64) {
        self.entry.default_bounds
    }

    pub fn bounds(&self) -> Bounds {
        let (lo, hi) = self.entry.default_bounds;
        Bounds::uniform(self.dimension, lo, hi).expect("registry bounds are well ordered")
    }
}

impl Objective for BenchmarkFunction {
    fn evaluate(&self, x: &[f64]) -> f64 {
        if x.len() != self.dimension {
            return f64::NAN;
        }
        (self.entry.eval)(x)
    }
}

/// Best of `evaluations` uniform samples from the box.
pub fn random_search<O, R>(
    objective: &O,
    bounds: &Bounds,
    evaluations: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    if evaluations == 0 {
        return Err(Error::Config("random search needs at least one evaluation".into()));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..evaluations {
        let x: Vec<f64> = bounds
            .lower()
            .iter()
            .zip(bounds.upper())
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        let v = objective.evaluate(&x);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective {
                value: v,
                position: x,
                iteration: None,
            });
        }
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((x, v));
        }
    }
    Ok(best.expect("at least one evaluation"))
}
