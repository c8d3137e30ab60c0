use thiserror::Error;

use crate::kernel::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration (lattice shape, kernel parameters, generators).
    #[error("configuration error: {0}")]
    Config(String),

    /// An enumeration would exceed one of its hard caps.
    #[error("cap exceeded: {what} ({actual} > {limit})")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    /// A kernel failed one of the axioms.
    #[error("kernel rejected: {0}")]
    KernelRejected(Box<ValidationReport>),

    /// Non-positive frozen partition function for some block-spin configuration.
    #[error(
        "non-positive frozen partition function W = {value:e} at block spins {block_spins:#b}"
    )]
    NonPositivePartition { block_spins: u64, value: f64 },

    /// A linearization needs a Jacobian entry that was not computed.
    #[error("jacobian table has no entry for Z = {z:?}, W = {w:?}")]
    MissingJacobian { z: Vec<usize>, w: Vec<usize> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
