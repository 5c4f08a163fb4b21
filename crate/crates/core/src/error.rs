use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which of the four energy-efficiency constraints failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    C1,
    C2,
    C3,
    C4,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Constraint::C1 => "C1 (total power budget)",
            Constraint::C2 => "C2 (BS antenna budget)",
            Constraint::C3 => "C3 (RF chain budget)",
            Constraint::C4 => "C4 (non-negative powers)",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    /// A parsed scenario violates one of its invariants.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("infeasible problem: constraint {constraint} violated: {detail}")]
    Infeasible {
        constraint: Constraint,
        detail: String,
    },

    #[error("numerical non-convergence: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::Domain(_) | Error::Invariant(_) => 3,
            Error::Infeasible { .. } => 4,
            Error::Numerical(_) => 5,
        }
    }
}
