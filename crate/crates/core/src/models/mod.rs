//! Model spaces, vector-field systems, Lie brackets and Hörmander levels.

mod bracket;
mod expr;
mod field;
mod point;
mod space;
pub mod su2;
mod system;

pub use bracket::{
    eval_word_fd, hormander_level, hormander_level_with, lie_bracket, lie_bracket_with_step,
    numerical_rank, words_up_to, BracketTable, BracketWord, HormanderLevel, RANK_TOLERANCE,
};
pub use expr::Expr;
pub use field::{fd_bracket, fd_divergence, fd_step, VectorField, FD_BASE_STEP};
pub use point::{Point, MAX_DIM};
pub use space::{heisenberg_inv, heisenberg_mul, ModelSpace, SpaceKind};
pub use system::{adjoint_system, divergence, Backend, VectorFieldSystem};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (expected torus-grushin, torus-elliptic, heisenberg or su2)")]
    UnknownModel(String),
    #[error("non-finite field value near {at}")]
    NonFinite { at: Point },
    #[error("density is not strictly positive: m{at} = {value}")]
    NonPositiveDensity { at: Point, value: f64 },
    #[error("field index {0} out of range (system has {1} diffusion fields)")]
    FieldIndex(usize, usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
