//! Exact infinite-population evolutionary dynamics over bitstring genomes,
//! with coarse-graining onto schema partitionings.
//!
//! Populations are dense probability vectors. An epoch applies
//! fitness-proportional selection and then variation through a transmission
//! function. When the transmission function is ambivalent under a schema
//! partitioning and fitness is (nearly) thematically mean invariant, the
//! projected dynamics are shadowed by a small quotient machine over the
//! themes; [`machine::compare_trajectories`] measures how closely.

pub mod distribution;
pub mod error;
pub mod experiments;
pub mod fast_mix;
pub mod machine;
pub mod operators;
pub mod parallel;
pub mod space;
pub mod transmission;

pub use distribution::{manhattan_distance, uniform_distribution, Distribution};
pub use error::{Error, Result};
pub use operators::FitnessFunction;
pub use space::{GenomeSpace, Partitioning, SchemaPartitioning, TablePartitioning, ThemeSpace};
pub use transmission::{Transmission, TransmissionSpec, TransmissionTable};
