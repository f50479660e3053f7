use thiserror::Error;

use crate::mdp::StateId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("cannot step from terminal state {0}")]
    StepFromTerminal(StateId),

    #[error("solver did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("trajectory from state {state} did not terminate within horizon {horizon}")]
    UnterminatedTrajectory { state: StateId, horizon: usize },

    #[error("invalid maze: {0}")]
    InvalidMaze(String),

    #[error("maze parse error at line {line}: {msg}")]
    MazeParse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ragged episode matrix: maze {maze} has {got} episodes, expected {expected}")]
    RaggedCurves { maze: usize, got: usize, expected: usize },

    #[error("malformed undo matrix: {0}")]
    UndoMatrixParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
