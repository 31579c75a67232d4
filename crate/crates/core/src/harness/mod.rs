//! Configuration, statistics, acceptance checks and the command pipelines.

pub mod config;
pub mod criteria;
pub mod pipelines;
pub mod report;
pub mod stats;

use thiserror::Error;

use crate::birthdeath::BirthDeathError;
use crate::exact::ExactError;
use crate::field::FieldError;
use crate::lattice::LatticeError;
use crate::limitlaw::LimitError;
use crate::potentials::ModelError;

pub use config::{ConfigError, ExperimentConfig, ToleranceTable};
pub use report::{Flag, ReportError, StatReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{context}: {source}")]
    Lattice { context: String, source: LatticeError },
    #[error("{context}: {source}")]
    Exact { context: String, source: ExactError },
    #[error("{context}: {source}")]
    BirthDeath { context: String, source: BirthDeathError },
    #[error("{context}: {source}")]
    Limit { context: String, source: LimitError },
    #[error("{context}: {source}")]
    Field { context: String, source: FieldError },
    #[error("{context}: {source}")]
    Stats { context: String, source: stats::StatsError },
    #[error("{context}: {source}")]
    Model { context: String, source: ModelError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Invalid(String),
}

/// Attach a context string to module errors.
pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, HarnessError>;
}

macro_rules! impl_context {
    ($err:ty, $variant:ident) => {
        impl<T> Context<T> for Result<T, $err> {
            fn context(self, what: impl Into<String>) -> Result<T, HarnessError> {
                self.map_err(|source| HarnessError::$variant {
                    context: what.into(),
                    source,
                })
            }
        }
    };
}

impl_context!(LatticeError, Lattice);
impl_context!(ExactError, Exact);
impl_context!(BirthDeathError, BirthDeath);
impl_context!(LimitError, Limit);
impl_context!(FieldError, Field);
impl_context!(stats::StatsError, Stats);
impl_context!(ModelError, Model);

/// Run `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder.build().expect("thread pool").install(f)
}

/// Seed for a numbered criterion derived from the experiment seed.
pub fn criterion_seed(seed: u64, criterion: u8) -> u64 {
    seed ^ (criterion as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
