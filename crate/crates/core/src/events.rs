//! Append-only run log: one JSON object per line.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::registry::LabId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Init,
    Move,
    Explore,
    VoteTally,
    TrustUpdate,
    BestUpdate,
    BudgetUpdate,
    Prune,
    Spawn,
    Extinction,
    Summary,
}

impl EventKind {
    /// Position in the iteration barrier order. Moves and explorations share
    /// a stage because they interleave by lab id.
    pub fn stage(&self) -> u8 {
        match self {
            Self::Init => 0,
            Self::Move | Self::Explore => 1,
            Self::VoteTally => 2,
            Self::TrustUpdate => 3,
            Self::BestUpdate => 4,
            Self::BudgetUpdate => 5,
            Self::Prune => 6,
            Self::Spawn => 7,
            Self::Extinction => 8,
            Self::Summary => 9,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Init => "init",
            Self::Move => "move",
            Self::Explore => "explore",
            Self::VoteTally => "vote_tally",
            Self::TrustUpdate => "trust_update",
            Self::BestUpdate => "best_update",
            Self::BudgetUpdate => "budget_update",
            Self::Prune => "prune",
            Self::Spawn => "spawn",
            Self::Extinction => "extinction",
            Self::Summary => "summary",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One log line. `payload` is a JSON object whose keys serialize sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub iteration: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab: Option<LabId>,
    pub payload: Value,
}

impl RunEvent {
    pub fn new(iteration: u64, kind: EventKind, lab: Option<LabId>, payload: Value) -> Self {
        Self {
            iteration,
            kind,
            lab,
            payload,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Writes events as JSON lines. Flushing is left to the iteration barrier.
pub struct EventLog<W: Write> {
    out: W,
    written: usize,
}

impl<W: Write> EventLog<W> {
    pub fn new(out: W) -> Self {
        Self { out, written: 0 }
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_event<W: Write>(log: &mut EventLog<W>, event: &RunEvent) -> Result<()> {
    log.out.write_all(event.to_line().as_bytes())?;
    log.out.write_all(b"\n")?;
    log.written += 1;
    Ok(())
}
