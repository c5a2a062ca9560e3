//! Evolution machines `E = (G, T, f)`, their quotients, and the lockstep
//! fidelity comparison between `Ξ_β 𝒢ᵗ_E p` and `𝒢ᵗ_{E*} Ξ_β p`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::fast_mix::{vary_fast, MixPath};
use crate::operators::{project, select, thematic_mean_divergence, uniformity_deviation, FitnessFunction};
use crate::parallel;
use crate::space::Partitioning;
use crate::transmission::{
    check_ambivalence, theme_transmission, vary_naive, AmbivalenceMode, AmbivalenceOptions, AmbivalenceReport,
    ThemeTransmission, Transmission, TransmissionSpec, TransmissionTable,
};

/// `Auto` runs the naive path up to this genome length.
pub const AUTO_NAIVE_MAX_LENGTH: u32 = 8;

/// Samples per theme tuple when `build_quotient` has to fall back from an
/// infeasible exhaustive check.
pub const FALLBACK_AMBIVALENCE_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    Naive,
    Fast,
    #[default]
    Auto,
}

impl Path {
    pub fn resolve(self, length: u32) -> MixPath {
        match self {
            Path::Naive => MixPath::Naive,
            Path::Fast => MixPath::Fast,
            Path::Auto if length <= AUTO_NAIVE_MAX_LENGTH => MixPath::Naive,
            Path::Auto => MixPath::Fast,
        }
    }
}

impl std::str::FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Path::Naive),
            "fast" => Ok(Path::Fast),
            "auto" => Ok(Path::Auto),
            other => Err(Error::Config(format!("unknown path `{other}` (naive|fast|auto)"))),
        }
    }
}

/// A transmission function on the genome space: a mask-based spec or an
/// explicit table.
#[derive(Debug, Clone, PartialEq)]
pub enum Variation {
    Spec(TransmissionSpec),
    Table(TransmissionTable),
}

impl Variation {
    pub fn vary(&self, p: &Distribution, path: Path) -> Result<Distribution> {
        match self {
            Variation::Spec(spec) => match path.resolve(spec.length()) {
                MixPath::Naive => vary_naive(spec, p),
                MixPath::Fast => vary_fast(spec, p),
            },
            Variation::Table(table) => match path {
                Path::Fast => Err(Error::UnsupportedKind(
                    "explicit tables have no fast path; use the naive path".into(),
                )),
                _ => vary_naive(table, p),
            },
        }
    }
}

impl Transmission for Variation {
    fn size(&self) -> usize {
        match self {
            Variation::Spec(s) => s.size(),
            Variation::Table(t) => t.size(),
        }
    }

    fn arity(&self) -> usize {
        match self {
            Variation::Spec(s) => s.arity(),
            Variation::Table(t) => t.arity(),
        }
    }

    fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        match self {
            Variation::Spec(s) => s.prob(child, parents),
            Variation::Table(t) => t.prob(child, parents),
        }
    }

    fn child_distribution(&self, parents: &[usize]) -> Vec<f64> {
        match self {
            Variation::Spec(s) => s.child_distribution(parents),
            Variation::Table(t) => t.child_distribution(parents),
        }
    }
}

impl From<TransmissionSpec> for Variation {
    fn from(s: TransmissionSpec) -> Self {
        Variation::Spec(s)
    }
}

impl From<TransmissionTable> for Variation {
    fn from(t: TransmissionTable) -> Self {
        Variation::Table(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionMachine {
    variation: Variation,
    fitness: FitnessFunction,
}

impl EvolutionMachine {
    pub fn new(variation: impl Into<Variation>, fitness: FitnessFunction) -> Result<Self> {
        let variation = variation.into();
        if variation.size() != fitness.len() {
            return Err(Error::ShapeMismatch {
                expected: variation.size(),
                found: fitness.len(),
            });
        }
        Ok(Self { variation, fitness })
    }

    pub fn variation(&self) -> &Variation {
        &self.variation
    }

    pub fn fitness(&self) -> &FitnessFunction {
        &self.fitness
    }

    pub fn size(&self) -> usize {
        self.fitness.len()
    }

    /// `𝒢_E p = V_T(S_f p)`.
    pub fn epoch(&self, p: &Distribution, path: Path) -> Result<Distribution> {
        self.variation.vary(&select(&self.fitness, p)?, path)
    }
}

/// `E* = (K, T^→β, f*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMachine {
    transmission: ThemeTransmission,
    fitness: FitnessFunction,
    verification: Option<AmbivalenceReport>,
}

impl QuotientMachine {
    pub fn transmission(&self) -> &ThemeTransmission {
        &self.transmission
    }

    pub fn fitness(&self) -> &FitnessFunction {
        &self.fitness
    }

    /// The ambivalence report, when the quotient was built with verification.
    pub fn verification(&self) -> Option<&AmbivalenceReport> {
        self.verification.as_ref()
    }

    pub fn theme_count(&self) -> usize {
        self.fitness.len()
    }

    pub fn epoch(&self, q: &Distribution) -> Result<Distribution> {
        vary_naive(&self.transmission, &select(&self.fitness, q)?)
    }
}

/// Builds the quotient of `e` under `beta` with theme fitness `f_star`.
///
/// With `verify`, ambivalence is checked first and a failure is returned as
/// [`Error::NotAmbivalent`] carrying the witness. An exhaustive request that
/// exceeds the work guard is downgraded to a sampled check.
pub fn build_quotient<P: Partitioning + ?Sized>(
    e: &EvolutionMachine,
    beta: &P,
    f_star: FitnessFunction,
    verify: Option<AmbivalenceOptions>,
) -> Result<QuotientMachine> {
    if e.size() != beta.genome_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.genome_count(),
            found: e.size(),
        });
    }
    if f_star.len() != beta.theme_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.theme_count(),
            found: f_star.len(),
        });
    }
    let verification = match verify {
        None => None,
        Some(options) => {
            let report = match check_ambivalence(&e.variation, beta, options) {
                Err(Error::Infeasible { .. }) if options.mode == AmbivalenceMode::Exhaustive => {
                    let sampled = AmbivalenceOptions {
                        mode: AmbivalenceMode::Sampled {
                            samples: FALLBACK_AMBIVALENCE_SAMPLES,
                            seed: 0,
                        },
                        ..options
                    };
                    check_ambivalence(&e.variation, beta, sampled)?
                }
                other => other?,
            };
            if !report.ambivalent {
                return Err(Error::NotAmbivalent(Box::new(report)));
            }
            Some(report)
        }
    };
    Ok(QuotientMachine {
        transmission: theme_transmission(&e.variation, beta)?,
        fitness: f_star,
        verification,
    })
}

/// `[p₀, 𝒢p₀, …, 𝒢ᵗp₀]`.
pub fn run_trajectory(
    e: &EvolutionMachine,
    p0: &Distribution,
    generations: usize,
    path: Path,
) -> Result<Vec<Distribution>> {
    let mut out = Vec::with_capacity(generations + 1);
    out.push(p0.clone());
    for t in 0..generations {
        let next = e.epoch(&out[t], path)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityRow {
    pub t: usize,
    /// `d(Ξ_β pₜ, qₜ)`.
    pub error: f64,
    pub delta_hat: f64,
    pub uniformity_dev: f64,
    /// Uniformity deviation of `S_f pₜ₋₁`, before variation. `None` at t = 0.
    pub uniformity_after_selection: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub path: MixPath,
    pub rows: Vec<FidelityRow>,
    pub verification: Option<AmbivalenceReport>,
}

impl FidelityReport {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.error).fold(0.0, f64::max)
    }

    /// Fraction of generations whose post-epoch uniformity deviation does
    /// not exceed the deviation right after selection (plus `slack`).
    pub fn non_departure_fraction(&self, slack: f64) -> f64 {
        let steps: Vec<_> = self
            .rows
            .iter()
            .filter_map(|r| r.uniformity_after_selection.map(|s| r.uniformity_dev <= s + slack))
            .collect();
        if steps.is_empty() {
            return 1.0;
        }
        steps.iter().filter(|&&ok| ok).count() as f64 / steps.len() as f64
    }
}

/// The states seen at one generation of a comparison.
pub struct Observation<'a> {
    pub t: usize,
    pub fine: &'a Distribution,
    /// `S_f pₜ₋₁`; `None` at t = 0.
    pub selected: Option<&'a Distribution>,
    pub quotient: &'a Distribution,
}

/// Runs `e` from `p0` and `quotient` from `Ξ_β p0` in lockstep.
pub fn compare_trajectories<P: Partitioning + ?Sized>(
    e: &EvolutionMachine,
    quotient: &QuotientMachine,
    beta: &P,
    p0: &Distribution,
    generations: usize,
    path: Path,
) -> Result<FidelityReport> {
    compare_trajectories_observed(e, quotient, beta, p0, generations, path, |_| {})
}

/// As [`compare_trajectories`], calling `observe` on every generation.
pub fn compare_trajectories_observed<P, O>(
    e: &EvolutionMachine,
    quotient: &QuotientMachine,
    beta: &P,
    p0: &Distribution,
    generations: usize,
    path: Path,
    mut observe: O,
) -> Result<FidelityReport>
where
    P: Partitioning + ?Sized,
    O: FnMut(Observation<'_>),
{
    if quotient.theme_count() != beta.theme_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.theme_count(),
            found: quotient.theme_count(),
        });
    }
    let f_star = quotient.fitness();
    let row = |t, p: &Distribution, q: &Distribution, after_sel, wall_ms| -> Result<FidelityRow> {
        Ok(FidelityRow {
            t,
            error: project(beta, p)?.manhattan(q)?,
            delta_hat: thematic_mean_divergence(e.fitness(), f_star, beta, std::slice::from_ref(p))?,
            uniformity_dev: uniformity_deviation(beta, p)?,
            uniformity_after_selection: after_sel,
            wall_ms,
        })
    };

    let mut p = p0.clone();
    let mut q = project(beta, p0)?;
    let mut rows = Vec::with_capacity(generations + 1);
    rows.push(row(0, &p, &q, None, 0.0)?);
    observe(Observation {
        t: 0,
        fine: &p,
        selected: None,
        quotient: &q,
    });
    for t in 1..=generations {
        let start = Instant::now();
        let (fine, coarse) = parallel::join(
            || -> Result<_> {
                let s = select(e.fitness(), &p)?;
                let next = e.variation().vary(&s, path)?;
                Ok((s, next))
            },
            || quotient.epoch(&q),
        );
        let (selected, next_p) = fine?;
        let next_q = coarse?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let u_sel = uniformity_deviation(beta, &selected)?;
        p = next_p;
        q = next_q;
        rows.push(row(t, &p, &q, Some(u_sel), wall_ms)?);
        observe(Observation {
            t,
            fine: &p,
            selected: Some(&selected),
            quotient: &q,
        });
    }
    Ok(FidelityReport {
        path: path.resolve(e.variation().size().trailing_zeros()),
        rows,
        verification: quotient.verification.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{SchemaPartitioning, TablePartitioning};

    fn fitness(v: &[f64]) -> FitnessFunction {
        FitnessFunction::new(v.to_vec()).unwrap()
    }

    fn dist(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn identity(l: u32) -> TransmissionSpec {
        TransmissionSpec::mutation_only(l, 0.0).unwrap()
    }

    #[test]
    fn epoch_examples() {
        let e = EvolutionMachine::new(identity(1), fitness(&[1.0, 3.0])).unwrap();
        let out = e.epoch(&Distribution::uniform(2), Path::Naive).unwrap();
        assert!((out.get(0) - 0.25).abs() < 1e-15 && (out.get(1) - 0.75).abs() < 1e-15);

        let p = dist(&[0.1, 0.2, 0.3, 0.4]);
        let flat = EvolutionMachine::new(identity(2), FitnessFunction::constant(4, 2.0).unwrap()).unwrap();
        assert!(flat.epoch(&p, Path::Fast).unwrap().manhattan(&p).unwrap() < 1e-15);

        let t = TransmissionSpec::uniform(2, 0.1).unwrap();
        let flat = EvolutionMachine::new(t.clone(), FitnessFunction::constant(4, 2.0).unwrap()).unwrap();
        let direct = vary_naive(&t, &p).unwrap();
        assert!(flat.epoch(&p, Path::Naive).unwrap().manhattan(&direct).unwrap() < 1e-15);
    }

    #[test]
    fn trajectory_examples() {
        let e = EvolutionMachine::new(identity(1), fitness(&[1.0, 2.0])).unwrap();
        let p0 = Distribution::uniform(2);
        assert_eq!(run_trajectory(&e, &p0, 0, Path::Auto).unwrap(), vec![p0.clone()]);
        let traj = run_trajectory(&e, &p0, 2, Path::Auto).unwrap();
        let expected = [[0.5, 0.5], [1.0 / 3.0, 2.0 / 3.0], [0.2, 0.8]];
        for (d, want) in traj.iter().zip(expected) {
            assert!((d.get(0) - want[0]).abs() < 1e-15 && (d.get(1) - want[1]).abs() < 1e-15);
        }

        let flat = EvolutionMachine::new(identity(2), FitnessFunction::constant(4, 1.0).unwrap()).unwrap();
        let p0 = dist(&[0.1, 0.2, 0.3, 0.4]);
        assert!(run_trajectory(&flat, &p0, 5, Path::Auto)
            .unwrap()
            .iter()
            .all(|d| *d == p0));
    }

    #[test]
    fn auto_path_threshold() {
        assert_eq!(Path::Auto.resolve(8), MixPath::Naive);
        assert_eq!(Path::Auto.resolve(9), MixPath::Fast);
        assert_eq!("fast".parse::<Path>().unwrap(), Path::Fast);
        assert!("quick".parse::<Path>().is_err());
    }

    #[test]
    fn tables_have_no_fast_path() {
        let table = TransmissionTable::tabulate(&identity(2)).unwrap();
        let e = EvolutionMachine::new(table, FitnessFunction::constant(4, 1.0).unwrap()).unwrap();
        let p = Distribution::uniform(4);
        assert!(matches!(e.epoch(&p, Path::Fast), Err(Error::UnsupportedKind(_))));
        assert!(e.epoch(&p, Path::Auto).is_ok());
    }

    #[test]
    fn identity_partition_quotient_is_exact() {
        let t = TransmissionSpec::uniform(3, 0.05).unwrap();
        let f = fitness(&[1.0, 2.0, 3.0, 1.5, 0.5, 2.5, 1.2, 0.9]);
        let e = EvolutionMachine::new(t, f.clone()).unwrap();
        let beta = SchemaPartitioning::identity(3).unwrap();
        let quotient = build_quotient(&e, &beta, f, Some(AmbivalenceOptions::default())).unwrap();
        let p0 = dist(&[0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]);
        let report = compare_trajectories(&e, &quotient, &beta, &p0, 10, Path::Naive).unwrap();
        assert!(report.rows.iter().all(|r| r.error < 1e-14));
        assert_eq!(report.rows[0].error, 0.0);
    }

    #[test]
    fn thematically_invariant_fitness_is_shadowed() {
        let beta = SchemaPartitioning::new(6, &[0, 3]).unwrap();
        let f_star = fitness(&[1.0, 2.0, 0.5, 3.0]);
        let f = FitnessFunction::new((0..64).map(|g| f_star.get(beta.apply(g))).collect()).unwrap();
        let e = EvolutionMachine::new(TransmissionSpec::uniform(6, 0.01).unwrap(), f).unwrap();
        let quotient = build_quotient(&e, &beta, f_star, Some(AmbivalenceOptions::default())).unwrap();
        assert!(quotient.verification().unwrap().ambivalent);
        let raw: Vec<f64> = (0..64).map(|g| 1.0 + (g % 7) as f64).collect();
        let total: f64 = raw.iter().sum();
        let p0 = dist(&raw.iter().map(|w| w / total).collect::<Vec<_>>());
        for path in [Path::Naive, Path::Fast] {
            let report = compare_trajectories(&e, &quotient, &beta, &p0, 30, path).unwrap();
            assert_eq!(report.rows.len(), 31);
            assert!(report.max_error() < 1e-9, "{path:?}: {}", report.max_error());
            assert!(report.rows.iter().all(|r| r.delta_hat < 1e-12));
        }
    }

    #[test]
    fn rejects_non_ambivalent_table() {
        let table = TransmissionTable::from_rows(
            4,
            1,
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let e = EvolutionMachine::new(table, FitnessFunction::constant(4, 1.0).unwrap()).unwrap();
        let beta = SchemaPartitioning::new(2, &[0]).unwrap();
        let f_star = FitnessFunction::constant(2, 1.0).unwrap();
        match build_quotient(&e, &beta, f_star.clone(), Some(AmbivalenceOptions::default())) {
            Err(Error::NotAmbivalent(report)) => assert!(report.witness.is_some()),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(build_quotient(&e, &beta, f_star, None).is_ok());
    }

    #[test]
    fn falls_back_to_sampling_past_the_guard() {
        let beta = SchemaPartitioning::new(10, &[2, 7]).unwrap();
        let e = EvolutionMachine::new(
            TransmissionSpec::one_point(10, 0.02).unwrap(),
            FitnessFunction::constant(1024, 1.0).unwrap(),
        )
        .unwrap();
        let q = build_quotient(
            &e,
            &beta,
            FitnessFunction::constant(4, 1.0).unwrap(),
            Some(AmbivalenceOptions::default()),
        )
        .unwrap();
        let report = q.verification().unwrap();
        assert!(report.ambivalent && report.max_deviation < 1e-12);
    }

    #[test]
    fn works_with_table_partitionings() {
        let beta = TablePartitioning::new(vec![0, 1, 1, 2]).unwrap();
        let e = EvolutionMachine::new(
            TransmissionSpec::mutation_only(2, 0.1).unwrap(),
            fitness(&[1.0, 2.0, 2.0, 4.0]),
        )
        .unwrap();
        let q = build_quotient(
            &e,
            &beta,
            fitness(&[1.0, 2.0, 4.0]),
            Some(AmbivalenceOptions::default()),
        )
        .unwrap();
        let report = compare_trajectories(&e, &q, &beta, &dist(&[0.4, 0.1, 0.3, 0.2]), 10, Path::Naive).unwrap();
        assert!(report.max_error() < 1e-12);
    }

    #[test]
    fn shape_checks() {
        let e = EvolutionMachine::new(identity(2), FitnessFunction::constant(4, 1.0).unwrap()).unwrap();
        assert!(EvolutionMachine::new(identity(2), FitnessFunction::constant(3, 1.0).unwrap()).is_err());
        let beta = SchemaPartitioning::new(2, &[0]).unwrap();
        assert!(build_quotient(&e, &beta, FitnessFunction::constant(4, 1.0).unwrap(), None).is_err());
        let wrong = SchemaPartitioning::new(3, &[0]).unwrap();
        assert!(build_quotient(&e, &wrong, FitnessFunction::constant(2, 1.0).unwrap(), None).is_err());
    }
}
