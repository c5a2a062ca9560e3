//! Population-level operators: expectation, fitness-proportional selection,
//! projection onto a theme space, the theme conditional, and the thematic
//! mean diagnostics built from them.
//!
//! All operators are pure: they borrow their inputs and return freshly
//! allocated outputs.

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::space::Partitioning;

/// Themes whose class mass falls below this are skipped by the uniformity
/// diagnostic.
pub const MIN_CLASS_MASS: f64 = 1e-12;

/// A strictly positive fitness table over a genome or theme space.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessFunction {
    values: Vec<f64>,
}

impl FitnessFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidFitness("empty table".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidFitness(format!(
                "value {i} is {v}; fitness must be finite and strictly positive"
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(size: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; size])
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

    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Exact class means of `self` (under the uniform distribution), as a
    /// fitness over the theme space of `beta`.
    pub fn class_means<P: Partitioning + ?Sized>(&self, beta: &P) -> Result<FitnessFunction> {
        check_len(beta.genome_count(), self.len())?;
        let mut sums = vec![0.0; beta.theme_count()];
        let mut counts = vec![0usize; beta.theme_count()];
        for (g, v) in self.values.iter().enumerate() {
            let k = beta.theme_of(g);
            sums[k] += v;
            counts[k] += 1;
        }
        FitnessFunction::new(sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect())
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// `Σ_x f(x) p(x)`; zero for the zero function.
pub fn expectation(f: &FitnessFunction, p: &Distribution) -> Result<f64> {
    check_len(f.len(), p.len())?;
    if p.is_zero() {
        return Ok(0.0);
    }
    Ok(f.values.iter().zip(p.weights()).map(|(a, b)| a * b).sum())
}

/// Fitness-proportional selection: `f(x) p(x) / E_f(p)`.
pub fn select(f: &FitnessFunction, p: &Distribution) -> Result<Distribution> {
    if p.is_zero() {
        return Err(Error::InvalidDistribution(
            "selection applied to the zero function".into(),
        ));
    }
    let mean = expectation(f, p)?;
    if mean <= 0.0 {
        return Err(Error::ZeroExpectation);
    }
    let out = f
        .values
        .iter()
        .zip(p.weights())
        .map(|(fx, px)| fx * px / mean)
        .collect();
    Distribution::from_operator_output(out)
}

/// Pushes `p` forward through the partitioning: the mass of each theme is the
/// total mass of its class.
pub fn project<P: Partitioning + ?Sized>(beta: &P, p: &Distribution) -> Result<Distribution> {
    check_len(beta.genome_count(), p.len())?;
    if p.is_zero() {
        return Ok(Distribution::zero(beta.theme_count()));
    }
    Distribution::from_operator_output(class_masses(beta, p.weights()))
}

pub(crate) fn class_masses<P: Partitioning + ?Sized>(beta: &P, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; beta.theme_count()];
    for (g, w) in weights.iter().enumerate() {
        out[beta.theme_of(g)] += w;
    }
    out
}

fn check_theme<P: Partitioning + ?Sized>(beta: &P, k: usize) -> Result<()> {
    if k >= beta.theme_count() {
        return Err(Error::ThemeOutOfRange {
            theme: k,
            count: beta.theme_count(),
        });
    }
    Ok(())
}

/// `p` conditioned on membership in the class of `k`, or the zero function
/// when that class carries no mass.
pub fn theme_conditional<P: Partitioning + ?Sized>(beta: &P, p: &Distribution, k: usize) -> Result<Distribution> {
    check_len(beta.genome_count(), p.len())?;
    check_theme(beta, k)?;
    let members = beta.class_members(k);
    let mass: f64 = members.iter().map(|&g| p.get(g)).sum();
    if mass == 0.0 {
        return Ok(Distribution::zero(p.len()));
    }
    let mut out = vec![0.0; p.len()];
    for g in members {
        out[g] = p.get(g) / mass;
    }
    Distribution::from_operator_output(out)
}

/// Average fitness of the class of `k` under `p`; zero for an empty class.
pub fn theme_mean_fitness<P: Partitioning + ?Sized>(
    f: &FitnessFunction,
    beta: &P,
    p: &Distribution,
    k: usize,
) -> Result<f64> {
    expectation(f, &theme_conditional(beta, p, k)?)
}

/// Mass and mean fitness of one theme class under a population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStat {
    pub mass: f64,
    /// `None` when the class has zero mass.
    pub mean_fitness: Option<f64>,
}

/// Per-theme mass and mean fitness in a single pass over the genomes.
pub fn class_stats<P: Partitioning + ?Sized>(
    f: &FitnessFunction,
    beta: &P,
    p: &Distribution,
) -> Result<Vec<ClassStat>> {
    check_len(beta.genome_count(), p.len())?;
    check_len(f.len(), p.len())?;
    let mut mass = vec![0.0; beta.theme_count()];
    let mut weighted = vec![0.0; beta.theme_count()];
    for (g, (&w, &fx)) in p.weights().iter().zip(f.values()).enumerate() {
        let k = beta.theme_of(g);
        mass[k] += w;
        weighted[k] += w * fx;
    }
    Ok(mass
        .into_iter()
        .zip(weighted)
        .map(|(m, s)| ClassStat {
            mass: m,
            mean_fitness: (m > 0.0).then(|| s / m),
        })
        .collect())
}

/// Largest `|E_f(C(p, k)) − f*(k)|` over the supplied populations and all
/// themes with nonzero mass. This is an empirical lower estimate of the
/// divergence bound over the whole turf the populations are drawn from.
pub fn thematic_mean_divergence<P: Partitioning + ?Sized>(
    f: &FitnessFunction,
    f_star: &FitnessFunction,
    beta: &P,
    populations: &[Distribution],
) -> Result<f64> {
    if populations.is_empty() {
        return Err(Error::InvalidDistribution(
            "divergence needs at least one population".into(),
        ));
    }
    check_len(beta.theme_count(), f_star.len())?;
    let mut worst: f64 = 0.0;
    for p in populations {
        for d in class_divergences(f, f_star, beta, p)?.into_iter().flatten() {
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Per theme, `|E_f(C(p, k)) − f*(k)|`, or `None` for an empty class. The
/// sum is centred on `f*(k)` so an invariant class gives exactly zero.
pub fn class_divergences<P: Partitioning + ?Sized>(
    f: &FitnessFunction,
    f_star: &FitnessFunction,
    beta: &P,
    p: &Distribution,
) -> Result<Vec<Option<f64>>> {
    check_len(beta.genome_count(), p.len())?;
    check_len(f.len(), p.len())?;
    check_len(beta.theme_count(), f_star.len())?;
    let mut mass = vec![0.0; beta.theme_count()];
    let mut centred = vec![0.0; beta.theme_count()];
    for (g, (&w, &fx)) in p.weights().iter().zip(f.values()).enumerate() {
        let k = beta.theme_of(g);
        mass[k] += w;
        centred[k] += w * (fx - f_star.get(k));
    }
    Ok(mass
        .into_iter()
        .zip(centred)
        .map(|(m, c)| (m > 0.0).then(|| (c / m).abs()))
        .collect())
}

/// Max over themes (class mass ≥ 1e-12) of the Manhattan distance between
/// the theme conditional and the uniform distribution on the class.
pub fn uniformity_deviation<P: Partitioning + ?Sized>(beta: &P, p: &Distribution) -> Result<f64> {
    check_len(beta.genome_count(), p.len())?;
    let mut mass = vec![0.0; beta.theme_count()];
    let mut count = vec![0usize; beta.theme_count()];
    for (g, &w) in p.weights().iter().enumerate() {
        let k = beta.theme_of(g);
        mass[k] += w;
        count[k] += 1;
    }
    let mut dev = vec![0.0; beta.theme_count()];
    for (g, &w) in p.weights().iter().enumerate() {
        let k = beta.theme_of(g);
        if mass[k] >= MIN_CLASS_MASS {
            dev[k] += (w / mass[k] - 1.0 / count[k] as f64).abs();
        }
    }
    Ok(dev.into_iter().fold(0.0, f64::max))
}
