//! Natural selection of labs: rank-based budgets, pruning of broke labs,
//! spawning from labs at the budget ceiling, and the rotating explorer duty.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::landscape::Bounds;
use crate::registry::{LabId, Position, Registry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleParams {
    pub initial_budget: u32,
    pub max_budget: u32,
    pub selection_fraction: f64,
    pub population_cap: usize,
    pub initial_population: usize,
    pub explorer_fraction: f64,
    pub spawn_scale: f64,
}

impl LifecycleParams {
    pub fn for_bounds(bounds: Bounds) -> Self {
        Self {
            initial_budget: 3,
            max_budget: 6,
            selection_fraction: 0.25,
            population_cap: 64,
            initial_population: 20,
            explorer_fraction: 0.1,
            spawn_scale: 0.05 * bounds.width(),
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.initial_budget < 1 {
            return Err(("lifecycle.initial_budget", "must be at least 1".into()));
        }
        if self.initial_budget > self.max_budget {
            return Err((
                "lifecycle.max_budget",
                "must be at least lifecycle.initial_budget".into(),
            ));
        }
        if !(self.selection_fraction >= 0.0 && self.selection_fraction <= 0.5) {
            return Err((
                "lifecycle.selection_fraction",
                "must lie in [0, 0.5]".into(),
            ));
        }
        if self.population_cap < 1 {
            return Err(("lifecycle.population_cap", "must be at least 1".into()));
        }
        if self.initial_population < 1 {
            return Err(("lifecycle.initial_population", "must be at least 1".into()));
        }
        if self.initial_population > self.population_cap {
            return Err((
                "lifecycle.initial_population",
                "must not exceed lifecycle.population_cap".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.explorer_fraction) {
            return Err(("lifecycle.explorer_fraction", "must lie in [0, 1)".into()));
        }
        if !(self.spawn_scale > 0.0) || !self.spawn_scale.is_finite() {
            return Err((
                "lifecycle.spawn_scale",
                "must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Size of each selection slice for a population of `n`.
    pub fn slice(&self, n: usize) -> usize {
        (self.selection_fraction * n as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetChange {
    pub lab: LabId,
    pub before: u32,
    pub after: u32,
}

/// The top `floor(q·N)` labs of `ranking` (best first) gain one credit up
/// to the ceiling; the bottom `floor(q·N)` lose one down to zero.
pub fn update_budgets(
    registry: &mut Registry,
    ranking: &[LabId],
    params: &LifecycleParams,
) -> Vec<BudgetChange> {
    let k = params.slice(ranking.len());
    let mut changes = Vec::new();
    if k == 0 {
        return changes;
    }
    let top = &ranking[..k];
    let bottom = &ranking[ranking.len() - k..];
    for (ids, delta) in [(top, 1i64), (bottom, -1i64)] {
        for &id in ids {
            let lab = registry.lab_mut(id).expect("ranked lab is alive");
            let before = lab.budget;
            let after = (before as i64 + delta).clamp(0, params.max_budget as i64) as u32;
            lab.budget = after;
            changes.push(BudgetChange {
                lab: id,
                before,
                after,
            });
        }
    }
    changes.sort_by_key(|c| c.lab);
    changes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spawn {
    pub parent: LabId,
    pub child: LabId,
    pub position: Position,
    pub parent_budget: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LifecycleReport {
    pub pruned: Vec<LabId>,
    pub spawned: Vec<Spawn>,
    pub extinct: bool,
}

/// Removes every lab with budget 0, then lets every lab at the ceiling spawn
/// one child near itself (ascending id order, until the population cap).
/// Children start with budget `initial_budget`, zero trust and zero
/// velocity; the parent's budget resets to `initial_budget`.
pub fn prune_and_spawn<R: Rng + ?Sized>(
    registry: &mut Registry,
    params: &LifecycleParams,
    rng: &mut R,
    iteration: u64,
) -> Result<LifecycleReport> {
    let mut report = LifecycleReport::default();
    let broke: Vec<LabId> = registry
        .labs()
        .filter(|l| l.budget == 0)
        .map(|l| l.id)
        .collect();
    for id in broke {
        registry.remove_lab(id, iteration)?;
        report.pruned.push(id);
    }
    if registry.is_empty() {
        report.extinct = true;
        return Ok(report);
    }

    let bounds = registry.bounds();
    let parents: Vec<LabId> = registry
        .labs()
        .filter(|l| l.budget >= params.max_budget)
        .map(|l| l.id)
        .collect();
    for parent in parents {
        if registry.population() >= params.population_cap.min(registry.population_cap()) {
            break;
        }
        let origin = registry.lab(parent).expect("parent alive").position.clone();
        let position = Position(
            origin
                .0
                .iter()
                .map(|&x| {
                    let z: f64 = StandardNormal.sample(rng);
                    bounds.clamp(x + params.spawn_scale * z)
                })
                .collect(),
        );
        let child = registry.register_child(
            position.clone(),
            params.initial_budget,
            Some(parent),
            iteration + 1,
        )?;
        registry.lab_mut(parent).expect("parent alive").budget = params.initial_budget;
        report.spawned.push(Spawn {
            parent,
            child,
            position,
            parent_budget: params.initial_budget,
        });
    }
    Ok(report)
}

/// Flags the `floor(ρ·N)` labs whose `(id + t) mod N` is smallest as
/// explorers for iteration `t`; everyone else is unflagged.
pub fn assign_explorers(registry: &mut Registry, fraction: f64, t: u64) -> Vec<LabId> {
    let n = registry.population();
    if n == 0 {
        return Vec::new();
    }
    let count = (fraction * n as f64).floor() as usize;
    let mut keyed: Vec<(u64, LabId)> = registry
        .ids()
        .into_iter()
        .map(|id| ((id.0 + t) % n as u64, id))
        .collect();
    keyed.sort();
    let chosen: Vec<LabId> = keyed.into_iter().take(count).map(|(_, id)| id).collect();
    for lab in registry.labs_mut() {
        lab.explorer = chosen.contains(&lab.id);
    }
    let mut chosen = chosen;
    chosen.sort();
    chosen
}
