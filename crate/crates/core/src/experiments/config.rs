use serde::{Deserialize, Serialize};

use super::fitness::NoiseKind;
use crate::error::{Error, Result};
use crate::machine::Path;
use crate::space::{Partitioning, SchemaPartitioning, MAX_GENOME_LENGTH};
use crate::transmission::DEFAULT_AMBIVALENCE_TOLERANCE;

pub const SCHEMA_VERSION: u32 = 1;

/// An experiment, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub genome_length: u32,
    pub defined_loci: Vec<u32>,
    pub transmission: TransmissionConfig,
    pub fitness: FitnessConfig,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub generations: usize,
    #[serde(default)]
    pub path: Path,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub ambivalence: AmbivalenceConfig,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransmissionConfig {
    None {
        #[serde(default)]
        mutation_rate: f64,
    },
    Uniform {
        #[serde(default)]
        mutation_rate: f64,
    },
    OnePoint {
        #[serde(default)]
        mutation_rate: f64,
    },
    /// Explicit crossover masks `[[mask, probability], …]`.
    Masks {
        #[serde(default)]
        mutation_rate: f64,
        mask_table: Vec<(usize, f64)>,
    },
    /// Dense `T(x | x₁…x_m)`, one row per parent tuple, first parent most
    /// significant.
    Table { arity: usize, rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitnessConfig {
    /// `f` given per genome. `f_star` defaults to the exact class means.
    Table {
        f_table: Vec<f64>,
        #[serde(default)]
        f_star: Option<Vec<f64>>,
    },
    Schematic {
        f_star: Vec<f64>,
        noise: NoiseConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    pub sigma_rel: f64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationConfig {
    #[default]
    Uniform,
    Product {
        bit_probabilities: Vec<f64>,
    },
    Table {
        weights: Vec<f64>,
    },
    /// Theme marginal (uniform when omitted) with within-class deviation `eta`.
    Schematic {
        #[serde(default)]
        theme_marginal: Option<Vec<f64>>,
        #[serde(default)]
        eta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default)]
    pub fitness: u64,
    #[serde(default)]
    pub population: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmbivalenceModeConfig {
    /// Exhaustive when within the work guard, sampled otherwise.
    #[default]
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbivalenceConfig {
    #[serde(default)]
    pub mode: AmbivalenceModeConfig,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_samples() -> usize {
    32
}

fn default_tolerance() -> f64 {
    DEFAULT_AMBIVALENCE_TOLERANCE
}

impl Default for AmbivalenceConfig {
    fn default() -> Self {
        Self {
            mode: AmbivalenceModeConfig::Auto,
            samples: default_samples(),
            seed: 0,
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub min_length: u32,
    pub max_length: u32,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

fn default_repetitions() -> usize {
    3
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            min_length: 2,
            max_length: 8,
            repetitions: default_repetitions(),
        }
    }
}

/// Output file names, relative to the output directory; `-` is stdout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_report")]
    pub report_csv: String,
    #[serde(default)]
    pub trajectory_csv: Option<String>,
    #[serde(default = "default_bench")]
    pub bench_csv: String,
    #[serde(default = "default_divergence")]
    pub divergence_csv: String,
    /// Record wall-clock times in the report. Off by default so reports
    /// are byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn default_report() -> String {
    "report.csv".into()
}

fn default_bench() -> String {
    "bench.csv".into()
}

fn default_divergence() -> String {
    "divergence.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            report_csv: default_report(),
            trajectory_csv: None,
            bench_csv: default_bench(),
            divergence_csv: default_divergence(),
            timing: false,
        }
    }
}

impl TransmissionConfig {
    pub fn mutation_rate(&self) -> Option<f64> {
        match self {
            TransmissionConfig::None { mutation_rate }
            | TransmissionConfig::Uniform { mutation_rate }
            | TransmissionConfig::OnePoint { mutation_rate }
            | TransmissionConfig::Masks { mutation_rate, .. } => Some(*mutation_rate),
            TransmissionConfig::Table { .. } => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical JSON (field order fixed by the struct), used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn partitioning(&self) -> Result<SchemaPartitioning> {
        SchemaPartitioning::new(self.genome_length, &self.defined_loci)
    }

    /// Cross-field checks beyond what the types enforce.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.genome_length == 0 || self.genome_length > MAX_GENOME_LENGTH {
            return Err(Error::GenomeLength(self.genome_length));
        }
        let beta = self.partitioning()?;
        let genomes = beta.genome_count();
        let themes = beta.theme_count();
        let sized = |what: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} has {found} entries, expected {expected}"
                )))
            }
        };
        if let Some(mu) = self.transmission.mutation_rate() {
            if !(0.0..=0.5).contains(&mu) {
                return Err(Error::Config(format!("mutation_rate {mu} outside [0, 0.5]")));
            }
        }
        if let TransmissionConfig::Table { arity, rows } = &self.transmission {
            let expected = genomes.checked_pow(*arity as u32).unwrap_or(usize::MAX);
            sized("transmission.rows", expected, rows.len())?;
        }
        match &self.fitness {
            FitnessConfig::Table { f_table, f_star } => {
                sized("fitness.f_table", genomes, f_table.len())?;
                if let Some(f_star) = f_star {
                    sized("fitness.f_star", themes, f_star.len())?;
                }
            }
            FitnessConfig::Schematic { f_star, noise } => {
                sized("fitness.f_star", themes, f_star.len())?;
                if noise.sigma_rel.is_nan() || noise.sigma_rel < 0.0 {
                    return Err(Error::Config("fitness.noise.sigma_rel must be ≥ 0".into()));
                }
            }
        }
        match &self.population {
            PopulationConfig::Uniform => {}
            PopulationConfig::Product { bit_probabilities } => sized(
                "population.bit_probabilities",
                self.genome_length as usize,
                bit_probabilities.len(),
            )?,
            PopulationConfig::Table { weights } => sized("population.weights", genomes, weights.len())?,
            PopulationConfig::Schematic { theme_marginal, eta } => {
                if let Some(q) = theme_marginal {
                    sized("population.theme_marginal", themes, q.len())?;
                }
                if !(0.0..1.0).contains(eta) {
                    return Err(Error::Config(format!("population.eta {eta} outside [0, 1)")));
                }
            }
        }
        if self.bench.min_length == 0 || self.bench.min_length > self.bench.max_length {
            return Err(Error::Config("bench length range is empty".into()));
        }
        if self.ambivalence.tolerance.is_nan() || self.ambivalence.tolerance < 0.0 {
            return Err(Error::Config("ambivalence.tolerance must be ≥ 0".into()));
        }
        Ok(())
    }
}
