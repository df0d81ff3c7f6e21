//! The lab decision seam.
//!
//! A behavior sees its own state, an immutable snapshot of the swarm, and
//! its own random stream, and proposes an [`Action`]. Nothing else about
//! other labs is reachable from here.
//!
//! Agent roles map onto the simulator as follows: planning is the behavior's
//! decision, work is the position update plus landscape evaluation, and
//! evaluation is the shared reviewer pool in [`crate::review`].

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{explore_move, pso_move, Coefficients, SwarmParams};
use crate::error::{Error, Result};
use crate::landscape::Bounds;
use crate::pareto::ArchiveEntry;
use crate::registry::{LabState, Position, Velocity};
use crate::rng::Stream;

pub const DEFAULT_BEHAVIOR: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    PsoMove,
    ExploreMove,
    Hold,
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PsoMove => "pso_move",
            Self::ExploreMove => "explore_move",
            Self::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub position: Position,
    pub velocity: Velocity,
}

impl Action {
    pub fn hold(lab: &LabState) -> Self {
        Self {
            kind: ActionKind::Hold,
            position: lab.position.clone(),
            velocity: lab.velocity.clone(),
        }
    }
}

/// Where the social pull points.
#[derive(Debug, Clone, Copy)]
pub enum SocialTarget<'a> {
    /// Single-objective swarm best; `None` before anything has been scored.
    Best(Option<&'a Position>),
    /// Non-dominated archive; each lab draws one entry uniformly.
    Archive(&'a [ArchiveEntry]),
}

/// Read-only view of the swarm shared by every lab in one iteration.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub iteration: u64,
    pub coefficients: Coefficients,
    pub epsilon: f64,
    pub social: SocialTarget<'a>,
    pub bounds: Bounds,
    pub params: &'a SwarmParams,
}

impl Snapshot<'_> {
    /// Resolves the social target for one lab, drawing from its stream when
    /// an archive has to be sampled. Falls back to the lab's own best.
    pub fn social_target<'s>(&'s self, lab: &'s LabState, rng: &mut Stream) -> &'s Position {
        match self.social {
            SocialTarget::Best(Some(p)) => p,
            SocialTarget::Best(None) => lab.best_position(),
            SocialTarget::Archive([]) => lab.best_position(),
            SocialTarget::Archive(entries) => &entries[rng.random_range(0..entries.len())].position,
        }
    }
}

pub trait LabBehavior: Send + Sync {
    fn decide(&self, lab: &LabState, snapshot: &Snapshot<'_>, rng: &mut Stream) -> Result<Action>;
}

/// Explorer-flagged labs always explore. Otherwise a uniform draw below ε
/// explores and anything else takes a PSO step.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultBehavior;

impl LabBehavior for DefaultBehavior {
    fn decide(&self, lab: &LabState, snapshot: &Snapshot<'_>, rng: &mut Stream) -> Result<Action> {
        let explore = lab.explorer || rng.random::<f64>() < snapshot.epsilon;
        if explore {
            let (position, velocity) = explore_move(
                &lab.position,
                snapshot.params.explore_scale,
                snapshot.bounds,
                rng,
            );
            return Ok(Action {
                kind: ActionKind::ExploreMove,
                position,
                velocity,
            });
        }
        let target = snapshot.social_target(lab, rng).clone();
        let (position, velocity) = pso_move(
            lab,
            &target,
            snapshot.coefficients,
            snapshot.params.v_max,
            snapshot.bounds,
            rng,
        )?;
        Ok(Action {
            kind: ActionKind::PsoMove,
            position,
            velocity,
        })
    }
}

/// Always steps toward the swarm best with no cognitive pull.
#[derive(Debug, Default, Clone, Copy)]
pub struct GreedyBehavior;

impl LabBehavior for GreedyBehavior {
    fn decide(&self, lab: &LabState, snapshot: &Snapshot<'_>, rng: &mut Stream) -> Result<Action> {
        let target = snapshot.social_target(lab, rng).clone();
        let coeffs = Coefficients {
            cognitive: 0.0,
            ..snapshot.coefficients
        };
        let (position, velocity) = pso_move(
            lab,
            &target,
            coeffs,
            snapshot.params.v_max,
            snapshot.bounds,
            rng,
        )?;
        Ok(Action {
            kind: ActionKind::PsoMove,
            position,
            velocity,
        })
    }
}

/// Named behaviors selectable through the `lab.behavior` config key.
#[derive(Clone)]
pub struct BehaviorCatalog {
    entries: BTreeMap<String, Arc<dyn LabBehavior>>,
}

impl BehaviorCatalog {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Catalog holding only `"default"`.
    pub fn builtin() -> Self {
        let mut catalog = Self::empty();
        catalog
            .register(DEFAULT_BEHAVIOR, Arc::new(DefaultBehavior))
            .expect("fresh catalog");
        catalog
    }

    pub fn register(&mut self, name: &str, behavior: Arc<dyn LabBehavior>) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        self.entries.insert(name.to_string(), behavior);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn LabBehavior>> {
        self.entries.get(name).cloned()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for BehaviorCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl std::fmt::Debug for BehaviorCatalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}
