//! Shared domain types and the swarm registry: the public record of each
//! lab's current claim, the evidence it has produced, and the trust the
//! community places in it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::Bounds;

/// Identity of one lab. Ids increase strictly and are never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabId(pub u64);

impl fmt::Display for LabId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the claim space. The claim space is the numeric space itself
/// (identity embedding); see [`Embedder`] for the extension point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Velocity(pub Vec<f64>);

impl Position {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Velocity {
    pub fn zeros(dimension: usize) -> Self {
        Velocity(vec![0.0; dimension])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for Position {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Velocity {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Maps a lab's claim into the claim space.
///
/// Synthetic landscapes use [`IdentityEmbedder`]; a text-producing lab would
/// supply an embedder from its artifacts instead.
pub trait Embedder {
    type Claim;
    fn embed(&self, claim: &Self::Claim) -> Position;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityEmbedder;

impl Embedder for IdentityEmbedder {
    type Claim = Vec<f64>;

    fn embed(&self, claim: &Vec<f64>) -> Position {
        Position(claim.clone())
    }
}

/// Recorded quality of a best-known claim. Scalars are higher-is-better;
/// objective vectors are lower-is-better in every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Scalar(f64),
    Objectives(Vec<f64>),
}

impl Score {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Score::Scalar(v) => Some(*v),
            Score::Objectives(_) => None,
        }
    }
}

/// A best-known claim: where, how good, whose, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub position: Position,
    pub score: Score,
    pub lab: LabId,
    pub iteration: u64,
}

/// One swarm particle.
#[derive(Debug, Clone, PartialEq)]
pub struct LabState {
    pub id: LabId,
    pub position: Position,
    pub velocity: Velocity,
    /// `None` until the lab's first claim has been scored.
    pub personal_best: Option<Best>,
    pub budget: u32,
    pub trust: f64,
    pub explorer: bool,
    pub parent: Option<LabId>,
    pub born: u64,
}

impl LabState {
    /// Target of the cognitive pull: the personal best, or the current claim
    /// while nothing has been scored yet.
    pub fn best_position(&self) -> &Position {
        self.personal_best
            .as_ref()
            .map(|b| &b.position)
            .unwrap_or(&self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Objectives(Vec<f64>),
    VoteShare(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub iteration: u64,
    pub observation: Observation,
}

/// Public record of one lab. Records of pruned labs stay behind, frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryRecord {
    pub lab_id: LabId,
    pub claim: Position,
    evidence: Vec<Evidence>,
    pub trust: f64,
    pub died_at: Option<u64>,
}

impl RegistryRecord {
    pub fn evidence(&self) -> &[Evidence] {
        &self.evidence
    }

    pub fn is_alive(&self) -> bool {
        self.died_at.is_none()
    }
}

/// Swarm-level statistics the coefficient decoder reads.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    pub iteration: u64,
    pub position_variance: f64,
    pub initial_variance: f64,
    pub trust_concentration: f64,
    pub population: usize,
    pub global_best: Option<Best>,
}

/// Living labs plus every record ever created.
#[derive(Debug, Clone)]
pub struct Registry {
    dimension: usize,
    bounds: Bounds,
    population_cap: usize,
    next_id: u64,
    labs: BTreeMap<LabId, LabState>,
    records: BTreeMap<LabId, RegistryRecord>,
}

impl Registry {
    pub fn new(dimension: usize, bounds: Bounds, population_cap: usize) -> Self {
        Self {
            dimension,
            bounds,
            population_cap,
            next_id: 0,
            labs: BTreeMap::new(),
            records: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn population_cap(&self) -> usize {
        self.population_cap
    }

    pub fn population(&self) -> usize {
        self.labs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labs.is_empty()
    }

    /// Id the next registered lab will receive.
    pub fn next_id(&self) -> LabId {
        LabId(self.next_id)
    }

    /// Adds a lab with zero velocity, zero trust and its position as an
    /// unscored personal best.
    pub fn register_lab(&mut self, position: Position, budget: u32) -> Result<LabId> {
        self.register_child(position, budget, None, 0)
    }

    pub fn register_child(
        &mut self,
        position: Position,
        budget: u32,
        parent: Option<LabId>,
        born: u64,
    ) -> Result<LabId> {
        if self.labs.len() >= self.population_cap {
            return Err(Error::CapExceeded {
                cap: self.population_cap,
            });
        }
        Error::check_dim(self.dimension, position.len())?;
        self.bounds.check(&position.0)?;

        let id = LabId(self.next_id);
        self.next_id += 1;
        self.records.insert(
            id,
            RegistryRecord {
                lab_id: id,
                claim: position.clone(),
                evidence: Vec::new(),
                trust: 0.0,
                died_at: None,
            },
        );
        self.labs.insert(
            id,
            LabState {
                id,
                position,
                velocity: Velocity::zeros(self.dimension),
                personal_best: None,
                budget,
                trust: 0.0,
                explorer: false,
                parent,
                born,
            },
        );
        Ok(id)
    }

    /// Replaces the lab's public claim and appends one evidence entry.
    pub fn record_claim(&mut self, id: LabId, claim: Position, evidence: Evidence) -> Result<()> {
        Error::check_dim(self.dimension, claim.len())?;
        let record = self.living_record_mut(id)?;
        record.claim = claim;
        push_evidence(record, evidence);
        Ok(())
    }

    /// Appends evidence without changing the claim.
    pub fn record_evidence(&mut self, id: LabId, evidence: Evidence) -> Result<()> {
        let record = self.living_record_mut(id)?;
        push_evidence(record, evidence);
        Ok(())
    }

    /// Removes a living lab; its record is frozen and kept.
    pub fn remove_lab(&mut self, id: LabId, iteration: u64) -> Result<LabState> {
        let lab = self.labs.remove(&id).ok_or(Error::UnknownLab(id))?;
        let record = self.records.get_mut(&id).ok_or(Error::UnknownLab(id))?;
        record.trust = lab.trust;
        record.died_at = Some(iteration);
        Ok(lab)
    }

    /// Copies every living lab's trust into its record (iteration barrier).
    pub fn sync_trust(&mut self) {
        for (id, lab) in &self.labs {
            if let Some(record) = self.records.get_mut(id) {
                record.trust = lab.trust;
            }
        }
    }

    pub fn lab(&self, id: LabId) -> Option<&LabState> {
        self.labs.get(&id)
    }

    pub fn lab_mut(&mut self, id: LabId) -> Option<&mut LabState> {
        self.labs.get_mut(&id)
    }

    pub fn labs(&self) -> impl Iterator<Item = &LabState> {
        self.labs.values()
    }

    pub fn labs_mut(&mut self) -> impl Iterator<Item = &mut LabState> {
        self.labs.values_mut()
    }

    pub fn ids(&self) -> Vec<LabId> {
        self.labs.keys().copied().collect()
    }

    pub fn record(&self, id: LabId) -> Option<&RegistryRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &RegistryRecord> {
        self.records.values()
    }

    pub fn positions(&self) -> Vec<&[f64]> {
        self.labs
            .values()
            .map(|l| l.position.0.as_slice())
            .collect()
    }

    fn living_record_mut(&mut self, id: LabId) -> Result<&mut RegistryRecord> {
        match self.records.get_mut(&id) {
            Some(record) if record.is_alive() => Ok(record),
            _ => Err(Error::UnknownLab(id)),
        }
    }
}

fn push_evidence(record: &mut RegistryRecord, evidence: Evidence) {
    // evidence stays sorted by iteration
    let last = record.evidence.last().map_or(0, |e| e.iteration);
    debug_assert!(evidence.iteration >= last);
    record.evidence.push(evidence);
}

/// Mean squared Euclidean distance to the centroid.
pub fn position_variance<P: AsRef<[f64]>>(positions: &[P]) -> Result<f64> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::EmptySwarm);
    }
    let dim = positions[0].as_ref().len();
    let mut centroid = vec![0.0; dim];
    for p in positions {
        Error::check_dim(dim, p.as_ref().len())?;
        for (c, x) in centroid.iter_mut().zip(p.as_ref()) {
            *c += x;
        }
    }
    for c in &mut centroid {
        *c /= n as f64;
    }
    let total: f64 = positions
        .iter()
        .map(|p| squared_distance(p.as_ref(), &centroid))
        .sum();
    Ok(total / n as f64)
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest share of total trust; `1/N` when nobody holds any trust.
pub fn trust_concentration(trusts: &[f64]) -> f64 {
    let total: f64 = trusts.iter().sum();
    if trusts.is_empty() {
        return 1.0;
    }
    if total <= 0.0 {
        return 1.0 / trusts.len() as f64;
    }
    trusts.iter().copied().fold(0.0, f64::max) / total
}

/// Snapshot of the collective state at iteration `t`.
///
/// `initial_variance` is the variance at t = 0; pass `None` at t = 0 to use
/// the current variance.
pub fn collective_state(
    registry: &Registry,
    t: u64,
    initial_variance: Option<f64>,
    global_best: Option<&Best>,
) -> Result<CollectiveState> {
    let positions = registry.positions();
    let variance = position_variance(&positions)?;
    let trusts: Vec<f64> = registry.labs().map(|l| l.trust).collect();
    Ok(CollectiveState {
        iteration: t,
        position_variance: variance,
        initial_variance: initial_variance.unwrap_or(variance),
        trust_concentration: trust_concentration(&trusts),
        population: registry.population(),
        global_best: global_best.cloned(),
    })
}
