//! The iteration loop.
//!
//! Each iteration runs in a fixed barrier order:
//!
//! 1. collective state, coefficients, exploration rate;
//! 2. every lab acts (ascending id), is evaluated, and publishes its claim;
//! 3. votes mode only: reviewers vote, trust settles, the cap applies;
//! 4. fitness and best-claim updates;
//! 5. budgets, pruning, spawning, explorer duty;
//! 6. metrics row.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::behaviors::{ActionKind, BehaviorCatalog, LabBehavior, Snapshot, SocialTarget};
use crate::config::RunConfig;
use crate::engine::{
    age_vote_share, decode_coefficients, exploration_rate, update_bests, Coefficients,
};
use crate::error::{Error, Result};
use crate::events::{write_event, EventKind, EventLog, RunEvent};
use crate::landscape::Landscape;
use crate::lifecycle::{assign_explorers, prune_and_spawn, update_budgets};
use crate::metrics::{
    camp_count, consensus_variance, detect_camps, mean_pairwise_distance, rank_correlation,
    IterationMetrics, CSV_HEADER,
};
use crate::pareto::{ArchiveEntry, ParetoArchive};
use crate::registry::{
    collective_state, Best, Evidence, LabId, Observation, Position, Registry, Score,
};
use crate::review::{
    fitness, rank_labs, Candidate, FitnessInput, FitnessMode, ReviewerPool, TrustLedger,
};
use crate::rng::{SeedTree, Stream, INIT, LAB, LIFECYCLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Extinct,
}

/// Budget and trust of one living lab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabLedger {
    pub budget: u32,
    pub trust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub iterations_run: u64,
    pub final_best_quality: Option<f64>,
    pub swarm_best_hidden_error: Option<f64>,
    pub final_population: usize,
    pub total_births: usize,
    pub total_deaths: usize,
    pub final_camp_count: usize,
    pub final_hypervolume: Option<f64>,
    pub labs: BTreeMap<LabId, LabLedger>,
}

/// Everything one iteration produced, for callers that analyse runs in
/// process.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iteration: u64,
    pub events: Vec<RunEvent>,
    pub metrics: IterationMetrics,
    pub coefficients: Coefficients,
    pub epsilon: f64,
    /// Labs not on explorer duty this iteration, and how many of them explored.
    pub free_labs: usize,
    pub free_explored: usize,
    /// Living labs before selection, best first.
    pub ranking: Vec<LabId>,
    pub swarm_best_hidden_error: Option<f64>,
    pub extinct: bool,
}

pub struct Simulation {
    config: RunConfig,
    landscape: Landscape,
    behavior: Arc<dyn LabBehavior>,
    seeds: SeedTree,
    registry: Registry,
    lab_streams: BTreeMap<LabId, Stream>,
    lifecycle_stream: Stream,
    pool: ReviewerPool,
    ledger: TrustLedger,
    swarm_best: Option<Best>,
    archive: Option<ParetoArchive>,
    initial_variance: f64,
    roots: BTreeMap<LabId, LabId>,
    t: u64,
    status: Option<RunStatus>,
    births: usize,
    deaths: usize,
    last_metrics: Option<IterationMetrics>,
    init_event: RunEvent,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        Self::with_catalog(config, &BehaviorCatalog::builtin())
    }

    pub fn with_catalog(config: RunConfig, catalog: &BehaviorCatalog) -> Result<Self> {
        config.validate(catalog)?;
        let behavior = catalog.get(&config.behavior).expect("validated behavior");
        let landscape = config.landscape();
        let bounds = landscape.bounds();
        let seeds = SeedTree::new(config.seed);
        let lc = &config.lifecycle;

        let mut registry = Registry::new(config.dimension, bounds, lc.population_cap);
        let mut init_rng = seeds.stream(INIT, 0);
        let mut lab_streams = BTreeMap::new();
        let mut roots = BTreeMap::new();
        for _ in 0..lc.initial_population {
            let position = Position(
                (0..config.dimension)
                    .map(|_| init_rng.random_range(bounds.lo..=bounds.hi))
                    .collect(),
            );
            let id = registry.register_lab(position, lc.initial_budget)?;
            lab_streams.insert(id, seeds.stream(LAB, id.0));
            roots.insert(id, id);
        }
        assign_explorers(&mut registry, lc.explorer_fraction, 0);

        let cap = config
            .review
            .cap_enabled
            .then_some(config.review.dominance_cap);
        let mut ledger = TrustLedger::new(config.review.decay, cap);
        for id in registry.ids() {
            ledger.trust.insert(id, 0.0);
        }
        let archive = (config.mode == FitnessMode::MultiObjective).then(|| {
            let reference =
                (landscape.objective_count() == 2).then(|| landscape.objective_upper_bounds());
            ParetoArchive::new(config.swarm.archive_capacity, reference)
        });

        let mut sim = Self {
            pool: ReviewerPool::new(&config.review, &seeds),
            lifecycle_stream: seeds.stream(LIFECYCLE, 0),
            initial_variance: consensus_variance(&registry.positions())?,
            landscape,
            behavior,
            seeds,
            registry,
            lab_streams,
            ledger,
            swarm_best: None,
            archive,
            roots,
            t: 0,
            status: None,
            births: 0,
            deaths: 0,
            last_metrics: None,
            init_event: RunEvent::new(0, EventKind::Init, None, Value::Null),
            config,
        };
        sim.score_initial_claims()?;
        sim.init_event = sim.make_init_event();
        Ok(sim)
    }

    /// Objective-based modes know the quality of the starting claims before
    /// the first move; votes mode has to wait for the first tally.
    fn score_initial_claims(&mut self) -> Result<()> {
        if self.config.mode == FitnessMode::Votes {
            return Ok(());
        }
        for id in self.registry.ids() {
            let position = self.registry.lab(id).expect("alive").position.clone();
            let f = self.landscape.evaluate(&position.0)?;
            let score = match self.config.mode {
                FitnessMode::Reference => Score::Scalar(-self.landscape.reference_error(&f)?),
                _ => Score::Objectives(f.clone()),
            };
            let candidate = Best {
                position: position.clone(),
                score,
                lab: id,
                iteration: 0,
            };
            let lab = self.registry.lab_mut(id).expect("alive");
            update_bests(lab, &candidate, &mut self.swarm_best);
            if let Some(archive) = &mut self.archive {
                archive.offer(ArchiveEntry {
                    position,
                    objectives: f,
                    lab: id,
                    iteration: 0,
                });
            }
        }
        Ok(())
    }

    fn make_init_event(&self) -> RunEvent {
        // where the files land is not part of the experiment
        let mut config = self.config.to_json();
        if let Some(map) = config.as_object_mut() {
            map.remove("out");
        }
        let labs: Vec<Value> = self
            .registry
            .labs()
            .map(|l| json!({"id": l.id, "position": l.position, "budget": l.budget, "explorer": l.explorer}))
            .collect();
        RunEvent::new(
            0,
            EventKind::Init,
            None,
            json!({
                "config": config,
                "labs": labs,
                "initial_variance": self.initial_variance,
                "swarm_best": self.swarm_best,
                "archive_size": self.archive.as_ref().map(|a| a.len()),
            }),
        )
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn swarm_best(&self) -> Option<&Best> {
        self.swarm_best.as_ref()
    }

    pub fn archive(&self) -> Option<&ParetoArchive> {
        self.archive.as_ref()
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.ledger
    }

    pub fn initial_variance(&self) -> f64 {
        self.initial_variance
    }

    pub fn init_event(&self) -> &RunEvent {
        &self.init_event
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.status.is_some()
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.status
    }

    /// Founder of the lineage `id` belongs to.
    pub fn lineage_root(&self, id: LabId) -> Option<LabId> {
        self.roots.get(&id).copied()
    }

    pub fn seeds(&self) -> SeedTree {
        self.seeds
    }

    /// Runs one full iteration.
    pub fn step(&mut self) -> Result<IterationReport> {
        assert!(!self.is_finished(), "simulation already finished");
        let t = self.t;
        let horizon = self.config.iterations;
        let mode = self.config.mode;
        let mut events = Vec::new();

        // (1) collective state
        let state = collective_state(
            &self.registry,
            t,
            Some(self.initial_variance),
            self.swarm_best.as_ref(),
        )?;
        let coefficients = decode_coefficients(&state, &self.config.swarm, t, horizon)?;
        let epsilon = exploration_rate(&self.config.swarm, t, horizon);

        // (2) act, evaluate, publish
        let ids = self.registry.ids();
        let actions = {
            let social = match &self.archive {
                Some(archive) => SocialTarget::Archive(archive.entries()),
                None => SocialTarget::Best(self.swarm_best.as_ref().map(|b| &b.position)),
            };
            let snapshot = Snapshot {
                iteration: t,
                coefficients,
                epsilon,
                social,
                bounds: self.registry.bounds(),
                params: &self.config.swarm,
            };
            let mut actions = Vec::with_capacity(ids.len());
            for &id in &ids {
                let lab = self.registry.lab(id).expect("alive");
                let rng = self
                    .lab_streams
                    .get_mut(&id)
                    .expect("every lab owns a stream");
                let action = self.behavior.decide(lab, &snapshot, rng)?;
                self.check_action(id, &action)?;
                actions.push(action);
            }
            actions
        };

        let mut free_labs = 0;
        let mut free_explored = 0;
        let mut objectives = Vec::with_capacity(ids.len());
        for (&id, action) in ids.iter().zip(actions) {
            let f = self.landscape.evaluate(&action.position.0)?;
            let lab = self.registry.lab_mut(id).expect("alive");
            let explorer = lab.explorer;
            lab.position = action.position.clone();
            lab.velocity = action.velocity;
            if !explorer {
                free_labs += 1;
                if action.kind == ActionKind::ExploreMove {
                    free_explored += 1;
                }
            }
            self.registry.record_claim(
                id,
                action.position.clone(),
                Evidence {
                    iteration: t,
                    observation: Observation::Objectives(f.clone()),
                },
            )?;
            let kind = match action.kind {
                ActionKind::ExploreMove => EventKind::Explore,
                _ => EventKind::Move,
            };
            events.push(RunEvent::new(
                t,
                kind,
                Some(id),
                json!({"action": action.kind.name(), "explorer": explorer, "position": action.position, "objectives": f}),
            ));
            objectives.push(f);
        }

        // (3) citation votes
        let mut tally = None;
        let mut vote_truth_rho = None;
        if mode == FitnessMode::Votes {
            let candidates: Vec<Candidate> = ids
                .iter()
                .zip(&objectives)
                .map(|(&id, f)| Candidate {
                    lab: id,
                    quality: -f.iter().sum::<f64>(),
                    trust: self.ledger.trust[&id],
                })
                .collect();
            let votes = self.pool.cast_votes(&candidates, t)?;
            events.push(RunEvent::new(
                t,
                EventKind::VoteTally,
                None,
                json!({"votes": votes.votes, "ballots": votes.ballots, "total": votes.total()}),
            ));
            let outcome = self.ledger.settle(&votes);
            for (id, &trust) in &self.ledger.trust {
                self.registry
                    .lab_mut(*id)
                    .expect("ledger tracks living labs")
                    .trust = trust;
            }
            self.registry.sync_trust();
            events.push(RunEvent::new(
                t,
                EventKind::TrustUpdate,
                None,
                json!({"trust": self.ledger.trust, "cap": format!("{outcome:?}").to_lowercase()}),
            ));
            let shares = votes.shares();
            for (&id, &share) in &shares {
                self.registry.record_evidence(
                    id,
                    Evidence {
                        iteration: t,
                        observation: Observation::VoteShare(share),
                    },
                )?;
            }
            if self.landscape.has_reference() {
                let share_list: Vec<f64> = shares.values().copied().collect();
                let truth: Vec<f64> = objectives
                    .iter()
                    .map(|f| self.landscape.reference_error(f).map(|e| -e))
                    .collect::<Result<_>>()?;
                vote_truth_rho = rank_correlation(&share_list, &truth);
            }
            tally = Some(votes);
        }

        // (4) fitness and bests
        let input = match &tally {
            Some(votes) => FitnessInput::Votes(votes),
            None => FitnessInput::Objectives(&objectives),
        };
        let qualities = fitness(mode, &self.landscape, input)?;
        if mode == FitnessMode::Votes {
            let decay = self.config.review.decay;
            for lab in self.registry.labs_mut() {
                if let Some(best) = &mut lab.personal_best {
                    age_vote_share(best, decay);
                }
            }
            if let Some(best) = &mut self.swarm_best {
                age_vote_share(best, decay);
            }
        }
        for (i, &id) in ids.iter().enumerate() {
            let position = self.registry.lab(id).expect("alive").position.clone();
            let score = match mode {
                FitnessMode::MultiObjective => Score::Objectives(objectives[i].clone()),
                _ => Score::Scalar(qualities[i].scalar().expect("scalar fitness")),
            };
            let candidate = Best {
                position: position.clone(),
                score,
                lab: id,
                iteration: t,
            };
            let lab = self.registry.lab_mut(id).expect("alive");
            let (personal, swarm) = update_bests(lab, &candidate, &mut self.swarm_best);
            if personal {
                events.push(RunEvent::new(
                    t,
                    EventKind::BestUpdate,
                    Some(id),
                    json!({"scope": "personal", "score": candidate.score}),
                ));
            }
            if swarm {
                events.push(RunEvent::new(
                    t,
                    EventKind::BestUpdate,
                    Some(id),
                    json!({"scope": "swarm", "score": candidate.score}),
                ));
            }
            if let Some(archive) = &mut self.archive {
                let admission = archive.offer(ArchiveEntry {
                    position,
                    objectives: objectives[i].clone(),
                    lab: id,
                    iteration: t,
                });
                if admission.accepted {
                    events.push(RunEvent::new(
                        t,
                        EventKind::BestUpdate,
                        Some(id),
                        json!({"scope": "archive", "objectives": objectives[i], "evicted": admission.dominated_out + admission.truncated, "size": archive.len()}),
                    ));
                }
            }
        }
        let ranking = rank_labs(&ids, &qualities);

        // (5) selection
        let lc = self.config.lifecycle.clone();
        for change in update_budgets(&mut self.registry, &ranking, &lc) {
            events.push(RunEvent::new(
                t,
                EventKind::BudgetUpdate,
                Some(change.lab),
                json!({"before": change.before, "after": change.after}),
            ));
        }
        let report = prune_and_spawn(&mut self.registry, &lc, &mut self.lifecycle_stream, t)?;
        for &id in &report.pruned {
            let trust = self.ledger.trust.remove(&id).unwrap_or(0.0);
            self.lab_streams.remove(&id);
            events.push(RunEvent::new(
                t,
                EventKind::Prune,
                Some(id),
                json!({"budget": 0, "trust": trust}),
            ));
        }
        for spawn in &report.spawned {
            self.lab_streams
                .insert(spawn.child, self.seeds.stream(LAB, spawn.child.0));
            self.ledger.trust.insert(spawn.child, 0.0);
            let root = self.roots[&spawn.parent];
            self.roots.insert(spawn.child, root);
            events.push(RunEvent::new(
                t,
                EventKind::Spawn,
                Some(spawn.child),
                json!({
                    "parent": spawn.parent,
                    "position": spawn.position,
                    "budget": lc.initial_budget,
                    "parent_budget": spawn.parent_budget,
                    "trust": 0.0,
                }),
            ));
        }
        self.births += report.spawned.len();
        self.deaths += report.pruned.len();
        self.registry.sync_trust();

        let swarm_best_hidden_error = self.swarm_best_hidden_error();
        if report.extinct {
            events.push(RunEvent::new(
                t,
                EventKind::Extinction,
                None,
                json!({"pruned": report.pruned}),
            ));
            self.status = Some(RunStatus::Extinct);
            let metrics = IterationMetrics {
                iteration: t,
                population: 0,
                consensus_variance: 0.0,
                mean_pairwise_distance: 0.0,
                camp_count: 0,
                camp_assignment: BTreeMap::new(),
                best_quality: self.best_quality(),
                vote_truth_rho,
                hypervolume: self.archive.as_ref().and_then(|a| a.hypervolume()),
                births: report.spawned.len(),
                deaths: report.pruned.len(),
            };
            self.last_metrics = Some(metrics.clone());
            self.t += 1;
            return Ok(IterationReport {
                iteration: t,
                events,
                metrics,
                coefficients,
                epsilon,
                free_labs,
                free_explored,
                ranking,
                swarm_best_hidden_error,
                extinct: true,
            });
        }
        assign_explorers(&mut self.registry, lc.explorer_fraction, t + 1);

        // (6) metrics
        let positions = self.registry.positions();
        let labeled: Vec<(LabId, &[f64])> = self
            .registry
            .labs()
            .map(|l| (l.id, l.position.0.as_slice()))
            .collect();
        let camps = detect_camps(&labeled, self.config.link_threshold);
        let metrics = IterationMetrics {
            iteration: t,
            population: self.registry.population(),
            consensus_variance: consensus_variance(&positions)?,
            mean_pairwise_distance: mean_pairwise_distance(&positions),
            camp_count: camp_count(&camps),
            camp_assignment: camps,
            best_quality: self.best_quality(),
            vote_truth_rho,
            hypervolume: self.archive.as_ref().and_then(|a| a.hypervolume()),
            births: report.spawned.len(),
            deaths: report.pruned.len(),
        };
        self.last_metrics = Some(metrics.clone());
        self.t += 1;
        if self.t >= horizon {
            self.status = Some(RunStatus::Completed);
        }
        Ok(IterationReport {
            iteration: t,
            events,
            metrics,
            coefficients,
            epsilon,
            free_labs,
            free_explored,
            ranking,
            swarm_best_hidden_error,
            extinct: false,
        })
    }

    fn check_action(&self, lab: LabId, action: &crate::behaviors::Action) -> Result<()> {
        let invalid = |reason: String| Error::InvalidAction {
            behavior: self.config.behavior.clone(),
            lab,
            reason,
        };
        let d = self.config.dimension;
        if action.position.len() != d || action.velocity.len() != d {
            return Err(invalid("wrong dimension".into()));
        }
        self.registry
            .bounds()
            .check(&action.position.0)
            .map_err(|e| invalid(e.to_string()))?;
        let v_max = self.config.swarm.v_max;
        if let Some(v) = action.velocity.0.iter().find(|v| !(v.abs() <= v_max)) {
            return Err(invalid(format!("velocity {v} exceeds v_max {v_max}")));
        }
        Ok(())
    }

    fn best_quality(&self) -> Option<f64> {
        self.swarm_best.as_ref().and_then(|b| b.score.scalar())
    }

    /// Ground-truth error of the swarm best, when a reference exists.
    pub fn swarm_best_hidden_error(&self) -> Option<f64> {
        let best = self.swarm_best.as_ref()?;
        self.landscape.hidden_error(&best.position.0).ok()
    }

    pub fn summary(&self) -> RunSummary {
        let metrics = self.last_metrics.as_ref();
        RunSummary {
            status: self.status.unwrap_or(RunStatus::Completed),
            iterations_run: self.t,
            final_best_quality: self.best_quality(),
            swarm_best_hidden_error: self.swarm_best_hidden_error(),
            final_population: self.registry.population(),
            total_births: self.births,
            total_deaths: self.deaths,
            final_camp_count: metrics.map_or(0, |m| m.camp_count),
            final_hypervolume: self.archive.as_ref().and_then(|a| a.hypervolume()),
            labs: self
                .registry
                .labs()
                .map(|l| {
                    (
                        l.id,
                        LabLedger {
                            budget: l.budget,
                            trust: l.trust,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn summary_event(&self) -> RunEvent {
        let iteration = self.t.saturating_sub(1);
        RunEvent::new(
            iteration,
            EventKind::Summary,
            None,
            serde_json::to_value(self.summary()).expect("summary serializes"),
        )
    }
}

/// Runs a whole experiment, streaming events and metrics rows to the given
/// writers. Both are flushed at every iteration barrier.
pub fn run_to_writers<E: Write, M: Write>(
    config: RunConfig,
    catalog: &BehaviorCatalog,
    events: E,
    mut metrics: M,
) -> Result<RunSummary> {
    let mut sim = Simulation::with_catalog(config, catalog)?;
    let mut log = EventLog::new(events);
    write_event(&mut log, sim.init_event())?;
    writeln!(metrics, "{CSV_HEADER}")?;
    while !sim.is_finished() {
        let report = sim.step()?;
        for event in &report.events {
            write_event(&mut log, event)?;
        }
        writeln!(metrics, "{}", report.metrics.csv_row())?;
        log.flush()?;
        metrics.flush()?;
    }
    write_event(&mut log, &sim.summary_event())?;
    log.flush()?;
    Ok(sim.summary())
}

/// Runs into `dir`, writing `events.jsonl`, `metrics.csv` and `summary.json`.
pub fn run_in_dir(config: RunConfig, catalog: &BehaviorCatalog, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir)?;
    let events = BufWriter::new(File::create(dir.join("events.jsonl"))?);
    let metrics = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    let summary = run_to_writers(config, catalog, events, metrics)?;
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(summary)
}

/// Runs into the configured output directory (`out`, default `./run`).
pub fn run(config: RunConfig) -> Result<RunSummary> {
    let dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| Path::new("run").to_path_buf());
    run_in_dir(config, &BehaviorCatalog::builtin(), &dir)
}

/// In-memory run: `(summary, events.jsonl bytes, metrics.csv bytes)`.
pub fn run_in_memory(
    config: RunConfig,
    catalog: &BehaviorCatalog,
) -> Result<(RunSummary, Vec<u8>, Vec<u8>)> {
    let mut events = Vec::new();
    let mut metrics = Vec::new();
    let summary = run_to_writers(config, catalog, &mut events, &mut metrics)?;
    Ok((summary, events, metrics))
}
