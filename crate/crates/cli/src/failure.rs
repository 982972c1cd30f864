use std::fmt;

/// Failures grouped by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Mismatch(String),
    Invariant(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Mismatch(_) => 3,
            Failure::Invariant(_) => 4,
            Failure::Io(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Mismatch(m) => write!(f, "classification mismatch: {m}"),
            Failure::Invariant(m) => write!(f, "invariant failure: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<nullitylab::Error> for Failure {
    fn from(e: nullitylab::Error) -> Self {
        use nullitylab::Error as E;
        match e {
            E::OutOfDomain { .. }
            | E::InvalidOrder(_)
            | E::DimensionMismatch(_)
            | E::InvalidParameter(_)
            | E::UnknownImmersion(_) => Failure::Config(e.to_string()),
            _ => Failure::Invariant(e.to_string()),
        }
    }
}
