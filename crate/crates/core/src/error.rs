use thiserror::Error;

use crate::params::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },

    #[error("inadmissible parameters: {}", format_violations(.0))]
    Inadmissible(Vec<Violation>),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step {dt} violates the CFL bound {max_dt} (c_cfl = {c_cfl}, h = {h})")]
    Cfl { dt: f64, max_dt: f64, c_cfl: f64, h: f64 },

    #[error("noise path covers [{t_min}, {t_max}] but [{from}, {to}] was requested")]
    Coverage { t_min: f64, t_max: f64, from: f64, to: f64 },

    #[error("time {t} is not aligned to the noise grid (spacing {spacing})")]
    Misaligned { t: f64, spacing: f64 },

    #[error("simulation diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("empty state cloud")]
    EmptyCloud,

    #[error("pointwise convergence fails at cell {cell}: |f_m - f| = {deviation}")]
    PointwiseConvergence { cell: u64, deviation: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
