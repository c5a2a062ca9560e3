use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::table::decode_tuple;
use super::Transmission;
use crate::error::{Error, Result};
use crate::operators::class_masses;
use crate::parallel;
use crate::space::Partitioning;

/// Separates floating-point noise from genuine violations, which are O(1).
pub const DEFAULT_AMBIVALENCE_TOLERANCE: f64 = 1e-9;

/// Exhaustive checking touches `size^(arity + 1)` transmission entries; this
/// caps it at 2^24 (ℓ ≤ 8 for two parents).
pub const EXHAUSTIVE_WORK_LIMIT: u128 = 1 << 24;

/// Above this many themes the pairwise spread falls back to the spread
/// around the minimum-representative tuple.
const MAX_EXACT_PAIRWISE_THEMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbivalenceMode {
    /// Every parent tuple of every theme tuple.
    Exhaustive,
    /// The minimum-representative tuple plus `samples` random tuples per
    /// theme tuple.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbivalenceOptions {
    pub mode: AmbivalenceMode,
    pub tolerance: f64,
}

impl Default for AmbivalenceOptions {
    fn default() -> Self {
        Self {
            mode: AmbivalenceMode::Exhaustive,
            tolerance: DEFAULT_AMBIVALENCE_TOLERANCE,
        }
    }
}

/// Two parent tuples from the same theme classes whose child class-sum
/// vectors differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub themes: Vec<usize>,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub first_class_sums: Vec<f64>,
    pub second_class_sums: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbivalenceReport {
    pub ambivalent: bool,
    /// Largest Manhattan distance between class-sum vectors of two parent
    /// tuples drawn from the same theme classes.
    pub max_deviation: f64,
    /// False when the theme space is too large for the exact pairwise
    /// maximum and the distance to the minimum representative was used.
    pub pairwise_exact: bool,
    pub tolerance: f64,
    pub theme_tuples: usize,
    pub parent_tuples: u64,
    /// Present iff the check failed.
    pub witness: Option<Witness>,
}

/// Tests whether the class sums of `T(· | x₁…x_m)` depend only on the theme
/// classes of the parents.
pub fn check_ambivalence<T, P>(t: &T, beta: &P, options: AmbivalenceOptions) -> Result<AmbivalenceReport>
where
    T: Transmission + ?Sized,
    P: Partitioning + ?Sized,
{
    if t.size() != beta.genome_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.genome_count(),
            found: t.size(),
        });
    }
    let arity = t.arity();
    let themes = beta.theme_count();
    if options.mode == AmbivalenceMode::Exhaustive {
        let work = (t.size() as u128).saturating_pow(arity as u32 + 1);
        if work > EXHAUSTIVE_WORK_LIMIT {
            return Err(Error::Infeasible {
                what: "exhaustive ambivalence check",
                detail: format!("{}^{} entries exceeds 2^24; use sampled mode", t.size(), arity + 1),
            });
        }
    }
    let theme_tuples = themes.checked_pow(arity as u32).ok_or_else(|| Error::Infeasible {
        what: "ambivalence check",
        detail: format!("{themes}^{arity} theme tuples"),
    })?;
    let classes: Vec<Vec<usize>> = (0..themes).map(|k| beta.class_members(k)).collect();
    let exact = themes <= MAX_EXACT_PAIRWISE_THEMES;

    let results = parallel::map_indices(theme_tuples, |r| {
        let mut tuple = vec![0usize; arity];
        decode_tuple(r, themes, &mut tuple);
        let mut spread = Spread::new(themes, exact);
        let mut parents = vec![0usize; arity];
        let mut visit = |parents: &[usize]| {
            let sums = class_masses(beta, &t.child_distribution(parents));
            spread.add(&sums, parents);
        };
        match options.mode {
            AmbivalenceMode::Exhaustive => {
                let mut idx = vec![0usize; arity];
                'outer: loop {
                    for (slot, (&k, &i)) in parents.iter_mut().zip(tuple.iter().zip(&idx)) {
                        *slot = classes[k][i];
                    }
                    visit(&parents);
                    let mut pos = arity;
                    loop {
                        if pos == 0 {
                            break 'outer;
                        }
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < classes[tuple[pos]].len() {
                            break;
                        }
                        idx[pos] = 0;
                    }
                }
            }
            AmbivalenceMode::Sampled { samples, seed } => {
                for (slot, &k) in parents.iter_mut().zip(&tuple) {
                    *slot = classes[k][0];
                }
                visit(&parents);
                let stream = seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                for _ in 0..samples {
                    for (slot, &k) in parents.iter_mut().zip(&tuple) {
                        *slot = classes[k][rng.random_range(0..classes[k].len())];
                    }
                    visit(&parents);
                }
            }
        }
        (tuple, spread.finish())
    });

    let parent_tuples = results.iter().map(|(_, s)| s.count).sum();
    let (worst_tuple, worst) = results
        .into_iter()
        .fold(None::<(Vec<usize>, SpreadResult)>, |best, (tuple, s)| match best {
            Some(b) if b.1.deviation >= s.deviation => Some(b),
            _ => Some((tuple, s)),
        })
        .expect("at least one theme tuple");
    let ambivalent = worst.deviation <= options.tolerance;
    let witness = (!ambivalent).then(|| Witness {
        first_class_sums: class_masses(beta, &t.child_distribution(&worst.first)),
        second_class_sums: class_masses(beta, &t.child_distribution(&worst.second)),
        themes: worst_tuple,
        first: worst.first,
        second: worst.second,
    });
    Ok(AmbivalenceReport {
        ambivalent,
        max_deviation: worst.deviation,
        pairwise_exact: exact,
        tolerance: options.tolerance,
        theme_tuples,
        parent_tuples,
        witness,
    })
}

struct SpreadResult {
    deviation: f64,
    first: Vec<usize>,
    second: Vec<usize>,
    count: u64,
}

/// Tracks the largest pairwise Manhattan distance in a stream of vectors.
///
/// For `d` dimensions, `max_{u,v} Σ|u_i − v_i| = max_s (max_u s·u − min_v s·v)`
/// over sign vectors `s ∈ {±1}^d`, so keeping the extremes of each signed sum
/// is enough. Half the signs are redundant by symmetry.
struct Spread {
    dims: usize,
    exact: bool,
    // per sign: (max, argmax, min, argmin)
    extremes: Vec<(f64, Vec<usize>, f64, Vec<usize>)>,
    reference: Option<(Vec<f64>, Vec<usize>)>,
    far: (f64, Vec<usize>),
    count: u64,
}

impl Spread {
    fn new(dims: usize, exact: bool) -> Self {
        let signs = if exact { 1usize << (dims - 1) } else { 0 };
        Self {
            dims,
            exact,
            extremes: vec![(f64::NEG_INFINITY, Vec::new(), f64::INFINITY, Vec::new()); signs],
            reference: None,
            far: (0.0, Vec::new()),
            count: 0,
        }
    }

    fn add(&mut self, v: &[f64], parents: &[usize]) {
        self.count += 1;
        if self.exact {
            for (s, e) in self.extremes.iter_mut().enumerate() {
                let mut dot = v[self.dims - 1];
                for (j, &x) in v[..self.dims - 1].iter().enumerate() {
                    dot += if s >> j & 1 == 1 { -x } else { x };
                }
                if dot > e.0 {
                    e.0 = dot;
                    e.1 = parents.to_vec();
                }
                if dot < e.2 {
                    e.2 = dot;
                    e.3 = parents.to_vec();
                }
            }
        } else {
            match &self.reference {
                None => {
                    self.reference = Some((v.to_vec(), parents.to_vec()));
                    self.far = (0.0, parents.to_vec());
                }
                Some((r, _)) => {
                    let d: f64 = r.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
                    if d > self.far.0 {
                        self.far = (d, parents.to_vec());
                    }
                }
            }
        }
    }

    fn finish(self) -> SpreadResult {
        if self.exact {
            let (max, hi, min, lo) = self
                .extremes
                .into_iter()
                .max_by(|a, b| (a.0 - a.2).total_cmp(&(b.0 - b.2)))
                .expect("at least one sign");
            SpreadResult {
                deviation: (max - min).max(0.0),
                first: hi,
                second: lo,
                count: self.count,
            }
        } else {
            let (_, first) = self.reference.expect("at least one tuple");
            SpreadResult {
                deviation: self.far.0,
                first,
                second: self.far.1,
                count: self.count,
            }
        }
    }
}
