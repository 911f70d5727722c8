//! Ledger state persistence for the CLI: load, mutate, save. All state is
//! explicit in the state file; nothing lives in the environment.

use std::path::{Path, PathBuf};

use rnft_core::chain::{ChainError, ChainState};
use rnft_core::graph::GraphError;
use rnft_core::incentive::IncentiveError;
use rnft_core::scenario::ScenarioError;

/// A CLI-level error: a stable machine-readable code plus a human message.
#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<IncentiveError> for CliError {
    fn from(e: IncentiveError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("IoError", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new("ParseError", e.to_string())
    }
}

/// The in-memory ledger bound to a state file.
pub struct Session {
    path: PathBuf,
    state: Option<ChainState>,
    dirty: bool,
    check_invariants: bool,
}

impl Session {
    /// Opens a session; the state file may not exist yet (only `init`
    /// creates it).
    pub fn open(path: &Path, check_invariants: bool) -> Result<Self, CliError> {
        let state = if path.exists() {
            let raw = std::fs::read_to_string(path)?;
            Some(serde_json::from_str(&raw)?)
        } else {
            None
        };
        Ok(Self {
            path: path.to_path_buf(),
            state,
            dirty: false,
            check_invariants,
        })
    }

    pub fn replace(&mut self, state: ChainState) {
        self.state = Some(state);
        self.dirty = true;
    }

    pub fn state(&self) -> Result<&ChainState, CliError> {
        self.state.as_ref().ok_or_else(|| {
            CliError::new(
                "StateMissing",
                format!("no ledger at {}; run `init` first", self.path.display()),
            )
        })
    }

    pub fn state_mut(&mut self) -> Result<&mut ChainState, CliError> {
        self.dirty = true;
        self.state.as_mut().ok_or_else(|| {
            CliError::new(
                "StateMissing",
                "no ledger state; run `init` first".to_string(),
            )
        })
    }

    /// Re-asserts the registry and chain invariants (test mode flag).
    pub fn check(&self) -> Result<(), CliError> {
        if !self.check_invariants {
            return Ok(());
        }
        if let Some(state) = &self.state {
            state.graph().check_invariants()?;
            state.verify_chain()?;
        }
        Ok(())
    }

    /// Writes the state back if any command mutated it.
    pub fn save(&mut self) -> Result<(), CliError> {
        if !self.dirty {
            return Ok(());
        }
        let state = self.state()?;
        let json = serde_json::to_string_pretty(state)?;
        std::fs::write(&self.path, json + "\n")?;
        self.dirty = false;
        Ok(())
    }
}
