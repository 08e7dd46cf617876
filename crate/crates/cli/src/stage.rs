//! Pipeline stages and their exit codes.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Usage,
    Config,
    Load,
    Embeddings,
    Method,
    Evaluate,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Usage => 2,
            Stage::Config => 3,
            Stage::Load => 4,
            Stage::Embeddings => 5,
            Stage::Method => 6,
            Stage::Evaluate => 7,
            Stage::Output => 8,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Usage => "usage",
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Embeddings => "embeddings",
            Stage::Method => "method",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub stage: Stage,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {:#}", self.stage, self.error)
    }
}

pub type StageResult<T> = Result<T, Failure>;

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| Failure {
            stage,
            error: e.into(),
        })
    }
}

pub fn fail<T>(stage: Stage, msg: impl fmt::Display) -> StageResult<T> {
    Err(Failure {
        stage,
        error: anyhow::anyhow!("{msg}"),
    })
}
