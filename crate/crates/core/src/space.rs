//! Genome and theme spaces, and partitionings of one onto the other.
//!
//! Genomes are dense integer indices in `[0, 2^ℓ)` read as bitstrings with
//! bit 0 the least significant. A schema partitioning extracts the bits at
//! its defined loci and packs them, in locus order, into the low bits of the
//! theme index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported genome length. A dense distribution at this length is
/// 2^24 doubles (128 MiB).
pub const MAX_GENOME_LENGTH: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenomeSpace {
    length: u32,
}

impl GenomeSpace {
    pub fn new(length: u32) -> Result<Self> {
        if length == 0 || length > MAX_GENOME_LENGTH {
            return Err(Error::GenomeLength(length));
        }
        Ok(Self { length })
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn size(&self) -> usize {
        1usize << self.length
    }

    /// Bit mask with all `length` bits set.
    pub fn full_mask(&self) -> usize {
        self.size() - 1
    }
}

/// The space of themes of a schema partitioning: bitstrings of length `order`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThemeSpace {
    order: u32,
}

impl ThemeSpace {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn size(&self) -> usize {
        1usize << self.order
    }
}

/// A surjective map from a finite genome set onto a finite theme set.
///
/// Operators accept any implementation; schema partitionings are the common
/// case, and [`TablePartitioning`] covers arbitrary maps given as a lookup
/// table (used for counterexamples).
pub trait Partitioning: Sync {
    fn genome_count(&self) -> usize;

    fn theme_count(&self) -> usize;

    fn theme_of(&self, genome: usize) -> usize;

    /// Members of the theme class of `theme`, ascending.
    fn class_members(&self, theme: usize) -> Vec<usize> {
        (0..self.genome_count())
            .filter(|&g| self.theme_of(g) == theme)
            .collect()
    }

    fn class_size(&self, theme: usize) -> usize {
        self.class_members(theme).len()
    }

    /// The minimum-index genome of the class.
    fn representative(&self, theme: usize) -> usize {
        self.class_members(theme)[0]
    }
}

/// A schema partitioning of `𝔅_ℓ` defined by an increasing list of loci.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SchemaPartitioning {
    genome: GenomeSpace,
    loci: Vec<u32>,
    free_loci: Vec<u32>,
    defined_mask: usize,
}

impl SchemaPartitioning {
    pub fn new(length: u32, loci: &[u32]) -> Result<Self> {
        let genome = GenomeSpace::new(length)?;
        if loci.is_empty() || loci.len() > length as usize {
            return Err(Error::SchemaOrder {
                order: loci.len(),
                length,
            });
        }
        let mut defined_mask = 0usize;
        for (i, &locus) in loci.iter().enumerate() {
            if locus >= length {
                return Err(Error::LocusOutOfRange { locus, length });
            }
            if i > 0 && locus <= loci[i - 1] {
                return Err(Error::LocusOrder { locus });
            }
            defined_mask |= 1 << locus;
        }
        let free_loci = (0..length).filter(|l| defined_mask & (1 << l) == 0).collect();
        Ok(Self {
            genome,
            loci: loci.to_vec(),
            free_loci,
            defined_mask,
        })
    }

    /// The partitioning whose defined loci are every position.
    pub fn identity(length: u32) -> Result<Self> {
        let loci: Vec<u32> = (0..length).collect();
        Self::new(length, &loci)
    }

    pub fn genome_space(&self) -> GenomeSpace {
        self.genome
    }

    pub fn theme_space(&self) -> ThemeSpace {
        ThemeSpace {
            order: self.loci.len() as u32,
        }
    }

    pub fn loci(&self) -> &[u32] {
        &self.loci
    }

    pub fn free_loci(&self) -> &[u32] {
        &self.free_loci
    }

    pub fn defined_mask(&self) -> usize {
        self.defined_mask
    }

    pub fn order(&self) -> u32 {
        self.loci.len() as u32
    }

    pub fn apply(&self, genome: usize) -> usize {
        extract_bits(genome, &self.loci)
    }

    /// Scatter the bits of `theme` onto the defined loci.
    pub fn embed_theme(&self, theme: usize) -> usize {
        deposit_bits(theme, &self.loci)
    }

    /// Lazily enumerates the class of `theme` in ascending genome order.
    pub fn theme_class(&self, theme: usize) -> ThemeClass<'_> {
        assert!(theme < self.theme_space().size(), "theme {theme} out of range");
        ThemeClass {
            fixed: self.embed_theme(theme),
            free_loci: &self.free_loci,
            next: 0,
            end: 1usize << self.free_loci.len(),
        }
    }
}

impl Partitioning for SchemaPartitioning {
    fn genome_count(&self) -> usize {
        self.genome.size()
    }

    fn theme_count(&self) -> usize {
        self.theme_space().size()
    }

    fn theme_of(&self, genome: usize) -> usize {
        self.apply(genome)
    }

    fn class_members(&self, theme: usize) -> Vec<usize> {
        self.theme_class(theme).collect()
    }

    fn class_size(&self, _theme: usize) -> usize {
        1usize << self.free_loci.len()
    }

    fn representative(&self, theme: usize) -> usize {
        self.embed_theme(theme)
    }
}

/// Iterator over one theme class of a [`SchemaPartitioning`].
#[derive(Debug, Clone)]
pub struct ThemeClass<'a> {
    fixed: usize,
    free_loci: &'a [u32],
    next: usize,
    end: usize,
}

impl Iterator for ThemeClass<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next >= self.end {
            return None;
        }
        // deposit is monotone in the counter, so the order is ascending
        let g = self.fixed | deposit_bits(self.next, self.free_loci);
        self.next += 1;
        Some(g)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.end - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for ThemeClass<'_> {}

/// Pack the bits of `value` found at `positions` into the low bits.
pub fn extract_bits(value: usize, positions: &[u32]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> p) & 1) << i))
}

/// Inverse of [`extract_bits`]: spread the low bits of `value` onto `positions`.
pub fn deposit_bits(value: usize, positions: &[u32]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &p)| acc | (((value >> i) & 1) << p))
}

/// An arbitrary partitioning given as an explicit genome → theme table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TablePartitioning {
    map: Vec<usize>,
    themes: usize,
}

impl TablePartitioning {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Config("partition table is empty".into()));
        }
        let themes = map.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; themes];
        for &k in &map {
            seen[k] = true;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!(
                "partition table is not surjective: theme {k} has no genome"
            )));
        }
        Ok(Self { map, themes })
    }
}

impl Partitioning for TablePartitioning {
    fn genome_count(&self) -> usize {
        self.map.len()
    }

    fn theme_count(&self) -> usize {
        self.themes
    }

    fn theme_of(&self, genome: usize) -> usize {
        self.map[genome]
    }
}
