//! Citation-style voting by a shared pool of reviewer agents, trust
//! accounting with decay and a dominance cap, and fitness in the three
//! supported modes.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::pareto::{crowding_distance, pareto_ranks};
use crate::registry::LabId;
use crate::rng::{SeedTree, Stream, REVIEWER};

pub use crate::pareto::dominates;

/// Tolerance on the capped share.
pub const CAP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    Reference,
    Votes,
    MultiObjective,
}

impl FitnessMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Reference => "reference",
            Self::Votes => "votes",
            Self::MultiObjective => "multi_objective",
        }
    }
}

impl fmt::Display for FitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reference" => Ok(Self::Reference),
            "votes" => Ok(Self::Votes),
            "multi_objective" => Ok(Self::MultiObjective),
            other => Err(format!("unknown fitness mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewParams {
    pub reviewers: usize,
    pub votes_per_reviewer: usize,
    /// β: weight of popularity against true quality.
    pub conformity: f64,
    /// η: half-width of the uniform perception noise.
    pub noise: f64,
    /// λ: fraction of trust carried into the next iteration.
    pub decay: f64,
    /// γ: largest allowed trust share.
    pub dominance_cap: f64,
    pub cap_enabled: bool,
}

impl Default for ReviewParams {
    fn default() -> Self {
        Self {
            reviewers: 20,
            votes_per_reviewer: 2,
            conformity: 0.0,
            noise: 0.05,
            decay: 0.9,
            dominance_cap: 0.3,
            cap_enabled: true,
        }
    }
}

/// One lab as the reviewers see it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub lab: LabId,
    /// Ground-truth quality, higher is better, any scale.
    pub quality: f64,
    /// Trust at the last barrier.
    pub trust: f64,
}

/// Audit record of one reviewer's votes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub reviewer: usize,
    pub employer: LabId,
    pub votes: Vec<LabId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub iteration: u64,
    /// Every candidate appears, with zero if it received nothing.
    pub votes: BTreeMap<LabId, u32>,
    pub ballots: Vec<Ballot>,
}

impl VoteTally {
    pub fn total(&self) -> u32 {
        self.votes.values().sum()
    }

    /// `votes_i / Σ votes`, or 0 everywhere when nothing was cast.
    pub fn shares(&self) -> BTreeMap<LabId, f64> {
        let total = self.total();
        self.votes
            .iter()
            .map(|(&id, &v)| {
                let share = if total == 0 {
                    0.0
                } else {
                    v as f64 / total as f64
                };
                (id, share)
            })
            .collect()
    }
}

/// Reviewer agents shared by the whole community. Each reviewer owns a
/// random stream keyed by its index.
#[derive(Debug, Clone)]
pub struct ReviewerPool {
    votes_per_reviewer: usize,
    conformity: f64,
    noise: f64,
    streams: Vec<Stream>,
}

impl ReviewerPool {
    pub fn new(params: &ReviewParams, seeds: &SeedTree) -> Self {
        Self {
            votes_per_reviewer: params.votes_per_reviewer,
            conformity: params.conformity,
            noise: params.noise,
            streams: (0..params.reviewers)
                .map(|r| seeds.stream(REVIEWER, r as u64))
                .collect(),
        }
    }

    pub fn reviewer_count(&self) -> usize {
        self.streams.len()
    }

    /// Reviewer `r` is employed by the `r mod N`-th living lab.
    pub fn employer(&self, reviewer: usize, candidates: &[Candidate]) -> LabId {
        candidates[reviewer % candidates.len()].lab
    }

    /// Each reviewer perceives `s = (1−β)·q + β·popularity + ν` and approves
    /// its top-V labs, never its employer. `candidates` must be sorted by id.
    pub fn cast_votes(&mut self, candidates: &[Candidate], iteration: u64) -> Result<VoteTally> {
        if candidates.is_empty() {
            return Err(Error::EmptySwarm);
        }
        debug_assert!(candidates.windows(2).all(|w| w[0].lab < w[1].lab));
        let quality = normalized_quality(candidates);
        let total_trust: f64 = candidates.iter().map(|c| c.trust).sum();
        let popularity: Vec<f64> = candidates
            .iter()
            .map(|c| {
                if total_trust > 0.0 {
                    c.trust / total_trust
                } else {
                    0.0
                }
            })
            .collect();

        let mut votes: BTreeMap<LabId, u32> = candidates.iter().map(|c| (c.lab, 0)).collect();
        let mut ballots = Vec::with_capacity(self.streams.len());
        let (beta, eta, budget) = (self.conformity, self.noise, self.votes_per_reviewer);
        for reviewer in 0..self.streams.len() {
            let employer = self.employer(reviewer, candidates);
            let rng = &mut self.streams[reviewer];
            let mut perceived: Vec<(f64, LabId)> = Vec::with_capacity(candidates.len());
            for (i, c) in candidates.iter().enumerate() {
                let u: f64 = rng.random();
                let nu = eta * (2.0 * u - 1.0);
                if c.lab != employer {
                    perceived.push(((1.0 - beta) * quality[i] + beta * popularity[i] + nu, c.lab));
                }
            }
            perceived.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let chosen: Vec<LabId> = perceived.iter().take(budget).map(|&(_, id)| id).collect();
            for id in &chosen {
                *votes.get_mut(id).expect("voted for a candidate") += 1;
            }
            ballots.push(Ballot {
                reviewer,
                employer,
                votes: chosen,
            });
        }
        Ok(VoteTally {
            iteration,
            votes,
            ballots,
        })
    }
}

/// Min-max normalization to [0, 1]; all-equal qualities map to 0.5.
pub fn normalized_quality(candidates: &[Candidate]) -> Vec<f64> {
    let lo = candidates
        .iter()
        .map(|c| c.quality)
        .fold(f64::INFINITY, f64::min);
    let hi = candidates
        .iter()
        .map(|c| c.quality)
        .fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .map(|c| {
            if hi > lo {
                (c.quality - lo) / (hi - lo)
            } else {
                0.5
            }
        })
        .collect()
}

/// Per-lab trust with exponential decay and an optional dominance cap.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustLedger {
    pub trust: BTreeMap<LabId, f64>,
    pub decay: f64,
    pub dominance_cap: Option<f64>,
}

/// Result of settling one tally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapOutcome {
    Disabled,
    Untouched,
    Applied,
    /// γ ≤ 1/N for the current population (or N = 1): cap not applicable.
    Skipped,
}

impl TrustLedger {
    pub fn new(decay: f64, dominance_cap: Option<f64>) -> Self {
        Self {
            trust: BTreeMap::new(),
            decay,
            dominance_cap,
        }
    }

    /// `trust ← λ·trust + votes`, then the dominance cap when enabled.
    pub fn settle(&mut self, tally: &VoteTally) -> CapOutcome {
        settle_trust(&mut self.trust, tally, self.decay);
        let Some(cap) = self.dominance_cap else {
            return CapOutcome::Disabled;
        };
        let mut values: Vec<f64> = self.trust.values().copied().collect();
        let n = values.len();
        if n <= 1 || cap <= 1.0 / n as f64 {
            return CapOutcome::Skipped;
        }
        let before = values.clone();
        apply_dominance_cap(&mut values, cap).expect("feasibility checked above");
        for (t, v) in self.trust.values_mut().zip(&values) {
            *t = *v;
        }
        if before == values {
            CapOutcome::Untouched
        } else {
            CapOutcome::Applied
        }
    }

    pub fn shares(&self) -> BTreeMap<LabId, f64> {
        let total: f64 = self.trust.values().sum();
        self.trust
            .iter()
            .map(|(&id, &t)| (id, if total > 0.0 { t / total } else { 0.0 }))
            .collect()
    }
}

/// `trust_i ← λ·trust_i + votes_i` for every lab in the tally.
pub fn settle_trust(trust: &mut BTreeMap<LabId, f64>, tally: &VoteTally, decay: f64) {
    for (id, &v) in &tally.votes {
        let t = trust.entry(*id).or_insert(0.0);
        *t = decay * *t + v as f64;
    }
}

/// Caps every share at `cap`, handing the excess to the uncapped labs in
/// proportion to their pre-cap trust (equally if they hold none). Total
/// trust is preserved. A single lab is left untouched.
pub fn apply_dominance_cap(trust: &mut [f64], cap: f64) -> Result<()> {
    let n = trust.len();
    if n <= 1 {
        return Ok(());
    }
    if !(cap > 1.0 / n as f64) || cap > 1.0 {
        return Err(Error::InvalidCap { cap, population: n });
    }
    let total: f64 = trust.iter().sum();
    if total <= 0.0 {
        return Ok(());
    }
    let limit = cap * total;
    if trust.iter().all(|&t| t <= limit * (1.0 + CAP_SLACK)) {
        return Ok(());
    }
    let original = trust.to_vec();
    let mut capped = vec![false; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| !capped[i]).collect();
        let n_capped = n - free.len();
        let remaining = total - n_capped as f64 * limit;
        let weight: f64 = free.iter().map(|&i| original[i]).sum();
        for &i in &free {
            trust[i] = if weight > 0.0 {
                remaining * original[i] / weight
            } else {
                remaining / free.len() as f64
            };
        }
        let over: Vec<usize> = free.iter().copied().filter(|&i| trust[i] > limit).collect();
        if over.is_empty() {
            break;
        }
        for i in over {
            capped[i] = true;
            trust[i] = limit;
        }
    }
    Ok(())
}

/// Quality of one lab in the current fitness mode. Higher is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quality {
    Scalar(f64),
    /// Lower rank first, then larger crowding distance.
    Pareto {
        rank: usize,
        crowding: f64,
    },
}

impl Quality {
    /// `Greater` when `self` is better.
    pub fn compare(&self, other: &Quality) -> Ordering {
        match (self, other) {
            (Quality::Scalar(a), Quality::Scalar(b)) => a.total_cmp(b),
            (
                Quality::Pareto {
                    rank: ra,
                    crowding: ca,
                },
                Quality::Pareto {
                    rank: rb,
                    crowding: cb,
                },
            ) => rb.cmp(ra).then(ca.total_cmp(cb)),
            (Quality::Scalar(_), Quality::Pareto { .. }) => Ordering::Greater,
            (Quality::Pareto { .. }, Quality::Scalar(_)) => Ordering::Less,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Quality::Scalar(v) => Some(*v),
            Quality::Pareto { .. } => None,
        }
    }
}

/// What a fitness evaluation is computed from.
pub enum FitnessInput<'a> {
    /// Objective vectors of the living labs, in id order.
    Objectives(&'a [Vec<f64>]),
    Votes(&'a VoteTally),
}

/// Qualities of every living lab, in the order of the input.
///
/// Reference mode yields the negated reference error; votes mode the vote
/// share; multi-objective mode the (Pareto rank, crowding distance) key.
pub fn fitness(
    mode: FitnessMode,
    landscape: &Landscape,
    input: FitnessInput<'_>,
) -> Result<Vec<Quality>> {
    match (mode, input) {
        (FitnessMode::Reference, FitnessInput::Objectives(objs)) => objs
            .iter()
            .map(|f| landscape.reference_error(f).map(|e| Quality::Scalar(-e)))
            .collect(),
        (FitnessMode::Votes, FitnessInput::Votes(tally)) => Ok(tally
            .shares()
            .values()
            .map(|&s| Quality::Scalar(s))
            .collect()),
        (FitnessMode::MultiObjective, FitnessInput::Objectives(objs)) => {
            let ranks = pareto_ranks(objs);
            let mut crowding = vec![0.0; objs.len()];
            let max_rank = ranks.iter().copied().max().unwrap_or(0);
            for r in 0..=max_rank {
                let members: Vec<usize> = (0..objs.len()).filter(|&i| ranks[i] == r).collect();
                let front: Vec<&[f64]> = members.iter().map(|&i| objs[i].as_slice()).collect();
                for (&i, d) in members.iter().zip(crowding_distance(&front)) {
                    crowding[i] = d;
                }
            }
            Ok(ranks
                .into_iter()
                .zip(crowding)
                .map(|(rank, crowding)| Quality::Pareto { rank, crowding })
                .collect())
        }
        (mode, FitnessInput::Votes(_)) => Err(Error::ModeMismatch(format!(
            "{mode} fitness cannot be computed from a vote tally"
        ))),
        (mode, FitnessInput::Objectives(_)) => Err(Error::ModeMismatch(format!(
            "{mode} fitness needs a vote tally"
        ))),
    }
}

/// Labs ordered best first; equal qualities keep the lower id first.
pub fn rank_labs(ids: &[LabId], qualities: &[Quality]) -> Vec<LabId> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        qualities[b]
            .compare(&qualities[a])
            .then(ids[a].cmp(&ids[b]))
    });
    order.into_iter().map(|i| ids[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::make_landscape;

    fn params(beta: f64, eta: f64, reviewers: usize, v: usize) -> ReviewParams {
        ReviewParams {
            reviewers,
            votes_per_reviewer: v,
            conformity: beta,
            noise: eta,
            ..ReviewParams::default()
        }
    }

    fn candidates(q: &[f64], trust: &[f64]) -> Vec<Candidate> {
        q.iter()
            .zip(trust)
            .enumerate()
            .map(|(i, (&quality, &trust))| Candidate {
                lab: LabId(i as u64),
                quality,
                trust,
            })
            .collect()
    }

    #[test]
    fn quality_ranking_skips_employer() {
        // three reviewers: reviewer 2 is employed by lab 2
        let mut pool = ReviewerPool::new(&params(0.0, 0.0, 3, 2), &SeedTree::new(1));
        let tally = pool
            .cast_votes(&candidates(&[0.9, 0.5, 0.1], &[0.0; 3]), 0)
            .unwrap();
        let b = &tally.ballots[2];
        assert_eq!(b.employer, LabId(2));
        assert_eq!(b.votes, vec![LabId(0), LabId(1)]);
    }

    #[test]
    fn pure_conformity_follows_trust() {
        let mut pool = ReviewerPool::new(&params(1.0, 0.0, 1, 1), &SeedTree::new(1));
        let tally = pool
            .cast_votes(&candidates(&[0.9, 0.1, 0.5], &[0.0, 10.0, 0.0]), 0)
            .unwrap();
        assert_eq!(tally.ballots[0].employer, LabId(0));
        assert_eq!(tally.ballots[0].votes, vec![LabId(1)]);
    }

    #[test]
    fn lone_lab_gets_no_votes() {
        let mut pool = ReviewerPool::new(&params(0.0, 0.0, 4, 2), &SeedTree::new(1));
        let tally = pool.cast_votes(&candidates(&[1.0], &[0.0]), 0).unwrap();
        assert_eq!(tally.total(), 0);
        assert!(pool.cast_votes(&[], 0).is_err());
    }

    #[test]
    fn equal_qualities_vote_lowest_ids() {
        let mut pool = ReviewerPool::new(&params(0.0, 0.0, 5, 2), &SeedTree::new(1));
        let tally = pool
            .cast_votes(&candidates(&[0.3; 5], &[0.0; 5]), 0)
            .unwrap();
        for b in &tally.ballots {
            let expected: Vec<LabId> = (0..5)
                .map(LabId)
                .filter(|&id| id != b.employer)
                .take(2)
                .collect();
            assert_eq!(b.votes, expected);
        }
    }

    #[test]
    fn settle_examples() {
        let tally = |v: &[u32]| VoteTally {
            iteration: 0,
            votes: v
                .iter()
                .enumerate()
                .map(|(i, &v)| (LabId(i as u64), v))
                .collect(),
            ballots: vec![],
        };
        let mut trust = BTreeMap::new();
        settle_trust(&mut trust, &tally(&[5, 3, 0]), 1.0);
        assert_eq!(
            trust.values().copied().collect::<Vec<_>>(),
            vec![5.0, 3.0, 0.0]
        );
        settle_trust(&mut trust, &tally(&[1, 1, 2]), 0.0);
        assert_eq!(
            trust.values().copied().collect::<Vec<_>>(),
            vec![1.0, 1.0, 2.0]
        );
        let mut trust: BTreeMap<_, _> = [(LabId(0), 4.0), (LabId(1), 0.0)].into();
        settle_trust(&mut trust, &tally(&[0, 2]), 0.5);
        assert_eq!(trust.values().copied().collect::<Vec<_>>(), vec![2.0, 2.0]);
    }

    #[test]
    fn cap_examples() {
        let mut t = vec![8.0, 1.0, 1.0];
        apply_dominance_cap(&mut t, 0.5).unwrap();
        assert_eq!(t, vec![5.0, 2.5, 2.5]);
        let mut t = vec![3.0, 3.0, 4.0];
        apply_dominance_cap(&mut t, 0.5).unwrap();
        assert_eq!(t, vec![3.0, 3.0, 4.0]);
        let mut t = vec![7.0];
        apply_dominance_cap(&mut t, 0.5).unwrap();
        assert_eq!(t, vec![7.0]);
        assert!(matches!(
            apply_dominance_cap(&mut [1.0, 2.0, 3.0], 1.0 / 3.0),
            Err(Error::InvalidCap { .. })
        ));
    }

    #[test]
    fn cap_spreads_uniformly_over_zero_trust() {
        let mut t = vec![10.0, 0.0, 0.0, 0.0];
        apply_dominance_cap(&mut t, 0.4).unwrap();
        assert_eq!(t, vec![4.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn ledger_skips_infeasible_cap() {
        let mut ledger = TrustLedger::new(1.0, Some(0.3));
        let tally = VoteTally {
            iteration: 0,
            votes: [(LabId(0), 4), (LabId(1), 1)].into(),
            ballots: vec![],
        };
        assert_eq!(ledger.settle(&tally), CapOutcome::Skipped);
        assert_eq!(ledger.trust[&LabId(0)], 4.0);
    }

    #[test]
    fn vote_share_fitness() {
        let l = make_landscape("sphere", 2).unwrap();
        let tally = VoteTally {
            iteration: 0,
            votes: [(LabId(0), 5), (LabId(1), 3), (LabId(2), 0)].into(),
            ballots: vec![],
        };
        let q = fitness(FitnessMode::Votes, &l, FitnessInput::Votes(&tally)).unwrap();
        assert_eq!(
            q,
            vec![
                Quality::Scalar(0.625),
                Quality::Scalar(0.375),
                Quality::Scalar(0.0)
            ]
        );
        assert!(matches!(
            fitness(FitnessMode::Reference, &l, FitnessInput::Votes(&tally)),
            Err(Error::ModeMismatch(_))
        ));
        assert!(matches!(
            fitness(FitnessMode::Votes, &l, FitnessInput::Objectives(&[])),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn reference_fitness_peaks_at_zero() {
        let l = make_landscape("sphere", 2).unwrap();
        let q = fitness(
            FitnessMode::Reference,
            &l,
            FitnessInput::Objectives(&[vec![0.0], vec![2.0]]),
        )
        .unwrap();
        assert_eq!(q, vec![Quality::Scalar(0.0), Quality::Scalar(-2.0)]);
    }

    #[test]
    fn pareto_fitness_ranks() {
        let l = make_landscape("two_wells", 2).unwrap();
        let objs = vec![
            vec![1.0, 3.0],
            vec![2.0, 2.0],
            vec![3.0, 1.0],
            vec![3.0, 3.0],
        ];
        let q = fitness(
            FitnessMode::MultiObjective,
            &l,
            FitnessInput::Objectives(&objs),
        )
        .unwrap();
        let ranks: Vec<usize> = q
            .iter()
            .map(|q| match q {
                Quality::Pareto { rank, .. } => *rank,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ranks, vec![0, 0, 0, 1]);
        let order = rank_labs(&[LabId(0), LabId(1), LabId(2), LabId(3)], &q);
        // extremes first (infinite crowding, lower id first), then the middle
        assert_eq!(order, vec![LabId(0), LabId(2), LabId(1), LabId(3)]);
    }
}
