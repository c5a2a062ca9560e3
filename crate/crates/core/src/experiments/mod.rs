//! Concrete constructions for fidelity experiments: schematically
//! distributed fitness, approximately schematically uniform populations, and
//! the driver that runs a configured comparison end to end.

pub mod config;
pub mod csv;
mod fitness;
mod population;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{
    AmbivalenceConfig, AmbivalenceModeConfig, BenchConfig, ExperimentConfig, FitnessConfig, NoiseConfig, Outputs,
    PopulationConfig, Seeds, TransmissionConfig, SCHEMA_VERSION,
};
pub use fitness::{gen_schematic_fitness, GeneratedFitness, NoiseKind, SchematicFitnessSpec, TRUNCATION_SIGMAS};
pub use population::{
    gen_population, max_marginal_departure, product_population, within_class_bit_marginals, PopulationSpec,
};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::fast_mix::{mixing_benchmark, BenchRow};
use crate::machine::{build_quotient, compare_trajectories_observed, EvolutionMachine, FidelityReport, Variation};
use crate::operators::{class_divergences, class_stats, project, FitnessFunction};
use crate::space::{Partitioning, SchemaPartitioning};
use crate::transmission::{
    AmbivalenceMode, AmbivalenceOptions, Crossover, MaskTable, Transmission, TransmissionSpec, TransmissionTable,
    EXHAUSTIVE_WORK_LIMIT,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Key/value lines written at the top of every CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub seed_fitness: u64,
    pub seed_population: u64,
    pub extra: Vec<(String, String)>,
}

impl Provenance {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        Self {
            version: VERSION.to_string(),
            config_sha256: hex::encode(Sha256::digest(config.canonical_json().as_bytes())),
            seed_fitness: config.seeds.fitness,
            seed_population: config.seeds.population,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("themegrain".to_string(), self.version.clone()),
            ("config_sha256".to_string(), self.config_sha256.clone()),
            ("seed_fitness".to_string(), self.seed_fitness.to_string()),
            ("seed_population".to_string(), self.seed_population.to_string()),
        ];
        out.extend(self.extra.iter().cloned());
        out
    }
}

/// The transmission function a config describes.
pub fn build_variation(config: &TransmissionConfig, length: u32) -> Result<Variation> {
    let spec = |crossover, mu| TransmissionSpec::new(length, crossover, mu).map(Variation::Spec);
    match config {
        TransmissionConfig::None { mutation_rate } => spec(Crossover::None, *mutation_rate),
        TransmissionConfig::Uniform { mutation_rate } => spec(Crossover::Uniform, *mutation_rate),
        TransmissionConfig::OnePoint { mutation_rate } => spec(Crossover::OnePoint, *mutation_rate),
        TransmissionConfig::Masks {
            mutation_rate,
            mask_table,
        } => spec(
            Crossover::Masks(MaskTable::new(length, mask_table.clone())?),
            *mutation_rate,
        ),
        TransmissionConfig::Table { arity, rows } => {
            TransmissionTable::from_rows(1usize << length, *arity, rows.clone()).map(Variation::Table)
        }
    }
}

/// Resolves `auto` to exhaustive when the exhaustive check fits the work
/// guard.
pub fn ambivalence_options<T: Transmission + ?Sized>(config: &AmbivalenceConfig, t: &T) -> AmbivalenceOptions {
    let sampled = AmbivalenceMode::Sampled {
        samples: config.samples,
        seed: config.seed,
    };
    let mode = match config.mode {
        AmbivalenceModeConfig::Exhaustive => AmbivalenceMode::Exhaustive,
        AmbivalenceModeConfig::Sampled => sampled,
        AmbivalenceModeConfig::Auto => {
            let work = (t.size() as u128).saturating_pow(t.arity() as u32 + 1);
            if work <= EXHAUSTIVE_WORK_LIMIT {
                AmbivalenceMode::Exhaustive
            } else {
                sampled
            }
        }
    };
    AmbivalenceOptions {
        mode,
        tolerance: config.tolerance,
    }
}

/// Everything a config describes, assembled.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub beta: SchemaPartitioning,
    pub machine: EvolutionMachine,
    pub f_star: FitnessFunction,
    pub p0: Distribution,
    /// Schematic draws raised to the floor.
    pub floor_clamped: usize,
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let beta = config.partitioning()?;
        let length = config.genome_length;

        let (fitness, f_star, floor_clamped) = match &config.fitness {
            FitnessConfig::Table { f_table, f_star } => {
                let f = FitnessFunction::new(f_table.clone())?;
                let f_star = match f_star {
                    Some(v) => FitnessFunction::new(v.clone())?,
                    None => f.class_means(&beta)?,
                };
                (f, f_star, 0)
            }
            FitnessConfig::Schematic { f_star, noise } => {
                let spec = SchematicFitnessSpec {
                    f_star: f_star.clone(),
                    noise: noise.kind,
                    sigma_rel: noise.sigma_rel,
                    floor: noise.floor,
                    seed: config.seeds.fitness,
                };
                let generated = spec.generate(&beta)?;
                (generated.fitness, spec.f_star_function()?, generated.clamped)
            }
        };

        let p0 = match &config.population {
            PopulationConfig::Uniform => Distribution::uniform(beta.genome_count()),
            PopulationConfig::Product { bit_probabilities } => product_population(bit_probabilities)?,
            PopulationConfig::Table { weights } => Distribution::new(weights.clone())?,
            PopulationConfig::Schematic { theme_marginal, eta } => {
                let theme_marginal = match theme_marginal {
                    Some(q) => Distribution::new(q.clone())?,
                    None => Distribution::uniform(beta.theme_count()),
                };
                gen_population(
                    &PopulationSpec {
                        theme_marginal,
                        eta: *eta,
                        seed: config.seeds.population,
                    },
                    &beta,
                )?
            }
        };

        let machine = EvolutionMachine::new(build_variation(&config.transmission, length)?, fitness)?;
        Ok(Self {
            config: config.clone(),
            beta,
            machine,
            f_star,
            p0,
            floor_clamped,
        })
    }

    pub fn provenance(&self) -> Provenance {
        let p = Provenance::for_config(&self.config);
        if matches!(self.config.fitness, FitnessConfig::Schematic { .. }) {
            p.with("floor_clamped", self.floor_clamped)
        } else {
            p
        }
    }
}

/// `Ξ_β pₜ` and `qₜ` at one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThemeStep {
    pub t: usize,
    pub projected: Vec<f64>,
    pub quotient: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: FidelityReport,
    pub provenance: Provenance,
    /// Filled only when the config asks for a trajectory CSV.
    pub theme_trajectory: Vec<ThemeStep>,
    /// Largest departure from one half of any within-class free-locus
    /// marginal right after selection, over all generations.
    pub selection_marginal_departure: f64,
    /// Smallest distribution mass and largest |total − 1| seen in any state.
    pub simplex_check: SimplexCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplexCheck {
    pub min_weight: f64,
    pub max_mass_error: f64,
}

impl Default for SimplexCheck {
    fn default() -> Self {
        Self {
            min_weight: f64::INFINITY,
            max_mass_error: 0.0,
        }
    }
}

impl SimplexCheck {
    pub fn observe(&mut self, p: &Distribution) {
        let min = p.weights().iter().copied().fold(f64::INFINITY, f64::min);
        self.min_weight = self.min_weight.min(min);
        self.max_mass_error = self.max_mass_error.max((p.total_mass() - 1.0).abs());
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.min_weight >= -tolerance && self.max_mass_error <= tolerance
    }
}

/// Builds the experiment, verifies ambivalence, and runs the lockstep
/// comparison for the configured number of generations.
pub fn run_fidelity_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let exp = Experiment::build(config)?;
    let options = ambivalence_options(&config.ambivalence, exp.machine.variation());
    let quotient = build_quotient(&exp.machine, &exp.beta, exp.f_star.clone(), Some(options))?;

    let keep_trajectory = config.outputs.trajectory_csv.is_some();
    let mut steps = Vec::new();
    let mut departure: f64 = 0.0;
    let mut simplex = SimplexCheck::default();
    let mut failure = None;
    let report = compare_trajectories_observed(
        &exp.machine,
        &quotient,
        &exp.beta,
        &exp.p0,
        config.generations,
        config.path,
        |obs| {
            simplex.observe(obs.fine);
            simplex.observe(obs.quotient);
            if let Some(s) = obs.selected {
                simplex.observe(s);
                match max_marginal_departure(&exp.beta, s) {
                    Ok(d) => departure = departure.max(d),
                    Err(e) => failure = Some(e),
                }
            }
            if keep_trajectory {
                match project(&exp.beta, obs.fine) {
                    Ok(proj) => steps.push(ThemeStep {
                        t: obs.t,
                        projected: proj.into_weights(),
                        quotient: obs.quotient.weights().to_vec(),
                    }),
                    Err(e) => failure = Some(e),
                }
            }
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut provenance = exp.provenance().with("path", report.path.as_str());
    if let Some(v) = &report.verification {
        provenance = provenance.with("ambivalence_max_deviation", csv::fmt_float(v.max_deviation));
    }
    Ok(ExperimentOutcome {
        report,
        provenance,
        theme_trajectory: steps,
        selection_marginal_departure: departure,
        simplex_check: simplex,
    })
}

/// Per-theme mass, mean fitness, and `|mean − f*|` under the initial
/// population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub theme: usize,
    pub class_size: usize,
    pub mass: f64,
    pub mean_fitness: Option<f64>,
    pub f_star: f64,
    pub divergence: Option<f64>,
}

/// `δ̂₀` and its per-theme breakdown.
pub fn divergence_breakdown(exp: &Experiment) -> Result<(f64, Vec<DivergenceRow>)> {
    let stats = class_stats(exp.machine.fitness(), &exp.beta, &exp.p0)?;
    let divergences = class_divergences(exp.machine.fitness(), &exp.f_star, &exp.beta, &exp.p0)?;
    let class_size = exp.beta.genome_count() / exp.beta.theme_count();
    let rows: Vec<DivergenceRow> = stats
        .iter()
        .zip(divergences)
        .enumerate()
        .map(|(k, (s, divergence))| DivergenceRow {
            theme: k,
            class_size,
            mass: s.mass,
            mean_fitness: s.mean_fitness,
            f_star: exp.f_star.get(k),
            divergence,
        })
        .collect();
    let delta = rows.iter().filter_map(|r| r.divergence).fold(0.0, f64::max);
    Ok((delta, rows))
}

/// Runs [`mixing_benchmark`] for every length in the configured range with
/// the configured crossover kind and mutation rate.
pub fn bench_sweep(config: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let bench = config.bench;
    if bench.max_length > crate::space::MAX_GENOME_LENGTH {
        return Err(Error::GenomeLength(bench.max_length));
    }
    let mut rows = Vec::new();
    for length in bench.min_length..=bench.max_length {
        let spec = match &config.transmission {
            TransmissionConfig::None { mutation_rate } => TransmissionSpec::mutation_only(length, *mutation_rate)?,
            TransmissionConfig::Uniform { mutation_rate } => TransmissionSpec::uniform(length, *mutation_rate)?,
            TransmissionConfig::OnePoint { mutation_rate } => TransmissionSpec::one_point(length, *mutation_rate)?,
            _ => {
                return Err(Error::UnsupportedKind(
                    "benchmarks need a crossover kind defined for every length (none, uniform, one_point)".into(),
                ))
            }
        };
        rows.extend(mixing_benchmark(&spec, bench.repetitions, config.seeds.population)?);
    }
    Ok(rows)
}
