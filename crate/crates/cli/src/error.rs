use std::fmt;

use palmjog_bus::{NodeError, ServeError};
use palmjog_core::dataset::DatasetError;
use palmjog_core::nn::NetError;
use palmjog_core::quant::QuantError;

use crate::scenario::ScenarioError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// A command failure, split by exit code: bad input versus failure while running.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Failure::Validation(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Validation(e) => Failure::Validation(e.context(ctx)),
            Failure::Runtime(e) => Failure::Runtime(e.context(ctx)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) => Failure::Runtime(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<NetError> for Failure {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Io(_) | NetError::Diverged { .. } => Failure::Runtime(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<QuantError> for Failure {
    fn from(e: QuantError) -> Self {
        match e {
            QuantError::Io(_) => Failure::Runtime(e.into()),
            QuantError::Net(n) => n.into(),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<NodeError> for Failure {
    fn from(e: NodeError) -> Self {
        match e {
            NodeError::Net(n) => n.into(),
            NodeError::Quant(q) => q.into(),
            NodeError::Sim(_) | NodeError::Bus(_) => Failure::Runtime(e.into()),
            _ => Failure::Validation(e.into()),
        }
    }
}

impl From<ServeError> for Failure {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Node(n) => n.into(),
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Node(n) => n.into(),
            _ => Failure::Validation(e.into()),
        }
    }
}
