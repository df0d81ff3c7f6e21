//! Rebuilds population, budgets and trust from an event log alone and audits
//! the log's internal consistency.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::events::{EventKind, RunEvent};
use crate::registry::LabId;
use crate::runner::{LabLedger, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub events: usize,
    pub iterations: u64,
    pub population: usize,
    pub labs: BTreeMap<LabId, LabLedger>,
    pub extinct: bool,
    /// Problems found while replaying; empty for a sound log.
    pub violations: Vec<String>,
    /// `Some(true)` when the reconstruction equals the logged summary.
    pub matches_summary: Option<bool>,
}

impl ReplayReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty() && self.matches_summary == Some(true)
    }
}

fn field<'a>(event: &'a RunEvent, line: usize, key: &str) -> Result<&'a Value> {
    event.payload.get(key).ok_or_else(|| Error::Replay {
        line,
        reason: format!("{} event lacks `{key}`", event.kind),
    })
}

fn as_u32(v: &Value, line: usize) -> Result<u32> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| Error::Replay {
            line,
            reason: format!("expected a budget, got {v}"),
        })
}

fn lab_of(event: &RunEvent, line: usize) -> Result<LabId> {
    event.lab.ok_or_else(|| Error::Replay {
        line,
        reason: format!("{} event without a lab", event.kind),
    })
}

/// Replays a log read line by line.
pub fn replay<R: BufRead>(reader: R) -> Result<ReplayReport> {
    let mut labs: BTreeMap<LabId, LabLedger> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut max_budget: Option<u32> = None;
    let mut summary: Option<RunSummary> = None;
    let mut extinct = false;
    let mut count = 0;
    let mut iterations = 0;
    let mut cursor: Option<(u64, u8)> = None;

    for (index, text) in reader.lines().enumerate() {
        let line = index + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let event: RunEvent = serde_json::from_str(&text).map_err(|e| Error::Replay {
            line,
            reason: e.to_string(),
        })?;
        count += 1;
        if summary.is_some() {
            violations.push(format!("line {line}: event after summary"));
        }
        let stage = event.kind.stage();
        if let Some((it, st)) = cursor {
            if event.iteration < it || (event.iteration == it && stage < st) {
                violations.push(format!(
                    "line {line}: {} at iteration {} breaks barrier order",
                    event.kind, event.iteration
                ));
            }
        }
        cursor = Some((event.iteration, stage));
        iterations = iterations.max(event.iteration + 1);

        match event.kind {
            EventKind::Init => {
                max_budget = event
                    .payload
                    .pointer("/config/lifecycle.max_budget")
                    .and_then(Value::as_u64)
                    .map(|b| b as u32);
                let entries =
                    field(&event, line, "labs")?
                        .as_array()
                        .ok_or_else(|| Error::Replay {
                            line,
                            reason: "`labs` is not a list".into(),
                        })?;
                for entry in entries {
                    let id: LabId =
                        serde_json::from_value(entry["id"].clone()).map_err(|e| Error::Replay {
                            line,
                            reason: e.to_string(),
                        })?;
                    let budget = as_u32(&entry["budget"], line)?;
                    labs.insert(id, LabLedger { budget, trust: 0.0 });
                }
            }
            EventKind::BudgetUpdate => {
                let id = lab_of(&event, line)?;
                let before = as_u32(field(&event, line, "before")?, line)?;
                let after = as_u32(field(&event, line, "after")?, line)?;
                match labs.get_mut(&id) {
                    Some(lab) => {
                        if lab.budget != before {
                            violations.push(format!(
                                "line {line}: lab {id} budget was {} not {before}",
                                lab.budget
                            ));
                        }
                        lab.budget = after;
                    }
                    None => {
                        violations.push(format!("line {line}: budget update for unknown lab {id}"))
                    }
                }
            }
            EventKind::TrustUpdate => {
                let trust: BTreeMap<LabId, f64> =
                    serde_json::from_value(field(&event, line, "trust")?.clone()).map_err(|e| {
                        Error::Replay {
                            line,
                            reason: e.to_string(),
                        }
                    })?;
                for (id, value) in trust {
                    match labs.get_mut(&id) {
                        Some(lab) => lab.trust = value,
                        None => violations.push(format!("line {line}: trust for unknown lab {id}")),
                    }
                }
            }
            EventKind::Prune => {
                let id = lab_of(&event, line)?;
                match labs.remove(&id) {
                    Some(lab) if lab.budget != 0 => violations.push(format!(
                        "line {line}: lab {id} pruned with budget {}",
                        lab.budget
                    )),
                    Some(_) => {}
                    None => violations.push(format!("line {line}: prune of unknown lab {id}")),
                }
            }
            EventKind::Spawn => {
                let child = lab_of(&event, line)?;
                let parent: LabId = serde_json::from_value(field(&event, line, "parent")?.clone())
                    .map_err(|e| Error::Replay {
                        line,
                        reason: e.to_string(),
                    })?;
                let budget = as_u32(field(&event, line, "budget")?, line)?;
                let parent_budget = as_u32(field(&event, line, "parent_budget")?, line)?;
                let trust = field(&event, line, "trust")?.as_f64().unwrap_or(f64::NAN);
                match labs.get_mut(&parent) {
                    Some(p) => {
                        if Some(p.budget) != max_budget {
                            violations.push(format!(
                                "line {line}: parent {parent} spawned at budget {} (ceiling {max_budget:?})",
                                p.budget
                            ));
                        }
                        p.budget = parent_budget;
                    }
                    None => {
                        violations.push(format!("line {line}: spawn from unknown parent {parent}"))
                    }
                }
                if labs.insert(child, LabLedger { budget, trust }).is_some() {
                    violations.push(format!("line {line}: child id {child} reused"));
                }
            }
            EventKind::Extinction => extinct = true,
            EventKind::Summary => {
                summary = Some(serde_json::from_value(event.payload.clone()).map_err(|e| {
                    Error::Replay {
                        line,
                        reason: e.to_string(),
                    }
                })?);
            }
            EventKind::Move | EventKind::Explore | EventKind::VoteTally | EventKind::BestUpdate => {
            }
        }
    }

    let matches_summary = summary
        .as_ref()
        .map(|s| s.labs == labs && s.final_population == labs.len());
    Ok(ReplayReport {
        events: count,
        iterations,
        population: labs.len(),
        labs,
        extinct,
        violations,
        matches_summary,
    })
}
