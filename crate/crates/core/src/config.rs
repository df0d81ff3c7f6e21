//! Run configuration: a single flat JSON object with dotted keys.
//!
//! ```json
//! { "seed": 42, "landscape": "sphere", "dim": 10, "iterations": 200,
//!   "mode": "votes", "review.beta": 0.9, "lifecycle.population_cap": 64 }
//! ```
//!
//! Unspecified keys take their defaults; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;

use crate::behaviors::{BehaviorCatalog, DEFAULT_BEHAVIOR};
use crate::engine::SwarmParams;
use crate::error::{Error, Result};
use crate::landscape::{Landscape, LandscapeKind};
use crate::lifecycle::LifecycleParams;
use crate::metrics::default_link_threshold;
use crate::review::{FitnessMode, ReviewParams};

/// Fully resolved and validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: u64,
    pub landscape: LandscapeKind,
    pub dimension: usize,
    /// Whether the ground truth may be used (reference fitness, ρ diagnostic).
    pub reference: bool,
    pub mode: FitnessMode,
    pub swarm: SwarmParams,
    pub lifecycle: LifecycleParams,
    pub review: ReviewParams,
    pub link_threshold: f64,
    pub behavior: String,
    pub output_dir: Option<PathBuf>,
}

/// Raw key/value document, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    entries: BTreeMap<String, Value>,
}

struct UniqueKeys(BTreeMap<String, Value>);

impl<'de> Deserialize<'de> for UniqueKeys {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct KeysVisitor;

        impl<'de> Visitor<'de> for KeysVisitor {
            type Value = UniqueKeys;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object of configuration keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<UniqueKeys, A::Error> {
                let mut entries = BTreeMap::new();
                while let Some((key, value)) = map.next_entry::<String, Value>()? {
                    if entries.contains_key(&key) {
                        return Err(de::Error::custom(format!("duplicate key `{key}`")));
                    }
                    entries.insert(key, value);
                }
                Ok(UniqueKeys(entries))
            }
        }

        deserializer.deserialize_map(KeysVisitor)
    }
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let UniqueKeys(entries) =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> &BTreeMap<String, Value> {
        &self.entries
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        self.resolve_with(&BehaviorCatalog::builtin())
    }

    pub fn resolve_with(&self, catalog: &BehaviorCatalog) -> Result<RunConfig> {
        let mut keys = Keys {
            entries: self.entries.clone(),
        };
        let landscape: LandscapeKind = keys
            .string("landscape")?
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(LandscapeKind::Sphere);
        let dimension = keys.unsigned("dim")?.unwrap_or(10) as usize;
        if dimension == 0 {
            return Err(Error::validation("dim", "must be at least 1"));
        }
        let probe = Landscape::new(landscape, dimension)?;
        let bounds = probe.bounds();

        let mut swarm = SwarmParams::for_bounds(bounds);
        let mut lifecycle = LifecycleParams::for_bounds(bounds);
        let mut review = ReviewParams::default();

        let seed = keys.unsigned("seed")?.unwrap_or(0);
        let iterations = keys.unsigned("iterations")?.unwrap_or(200);
        let mode = match keys.string("mode")? {
            None => FitnessMode::Reference,
            Some(s) => s
                .parse()
                .map_err(|e: String| Error::validation("mode", e))?,
        };
        let reference = keys.boolean("landscape.reference")?.unwrap_or(true);
        let output_dir = keys.string("out")?.map(PathBuf::from);
        let behavior = keys
            .string("lab.behavior")?
            .unwrap_or_else(|| DEFAULT_BEHAVIOR.to_string());

        keys.float_into("engine.inertia_min", &mut swarm.inertia_min)?;
        keys.float_into("engine.inertia_max", &mut swarm.inertia_max)?;
        keys.float_into("engine.coeff_min", &mut swarm.coeff_min)?;
        keys.float_into("engine.coeff_max", &mut swarm.coeff_max)?;
        keys.float_into("engine.v_max", &mut swarm.v_max)?;
        keys.float_into("engine.epsilon_start", &mut swarm.epsilon_start)?;
        keys.float_into("engine.epsilon_end", &mut swarm.epsilon_end)?;
        keys.float_into("engine.explore_scale", &mut swarm.explore_scale)?;
        if let Some(v) = keys.unsigned("engine.archive_capacity")? {
            swarm.archive_capacity = v as usize;
        }

        if let Some(v) = keys.unsigned("lifecycle.initial_budget")? {
            lifecycle.initial_budget = to_u32("lifecycle.initial_budget", v)?;
        }
        if let Some(v) = keys.unsigned("lifecycle.max_budget")? {
            lifecycle.max_budget = to_u32("lifecycle.max_budget", v)?;
        }
        keys.float_into(
            "lifecycle.selection_fraction",
            &mut lifecycle.selection_fraction,
        )?;
        if let Some(v) = keys.unsigned("lifecycle.population_cap")? {
            lifecycle.population_cap = v as usize;
        }
        if let Some(v) = keys.unsigned("lifecycle.initial_population")? {
            lifecycle.initial_population = v as usize;
        }
        keys.float_into(
            "lifecycle.explorer_fraction",
            &mut lifecycle.explorer_fraction,
        )?;
        keys.float_into("lifecycle.spawn_scale", &mut lifecycle.spawn_scale)?;

        if let Some(v) = keys.unsigned("review.reviewers")? {
            review.reviewers = v as usize;
        }
        if let Some(v) = keys.unsigned("review.votes_per_reviewer")? {
            review.votes_per_reviewer = v as usize;
        }
        keys.float_into("review.beta", &mut review.conformity)?;
        keys.float_into("review.noise", &mut review.noise)?;
        keys.float_into("review.decay", &mut review.decay)?;
        keys.float_into("review.dominance_cap", &mut review.dominance_cap)?;
        if let Some(v) = keys.boolean("review.cap_enabled")? {
            review.cap_enabled = v;
        }

        let link_threshold = keys
            .float("metrics.link_threshold")?
            .unwrap_or_else(|| default_link_threshold(swarm.explore_scale, dimension));

        if let Some(key) = keys.entries.keys().next() {
            return Err(Error::validation(key, "unknown configuration key"));
        }

        let config = RunConfig {
            seed,
            iterations,
            landscape,
            dimension,
            reference,
            mode,
            swarm,
            lifecycle,
            review,
            link_threshold,
            behavior,
            output_dir,
        };
        config.validate(catalog)?;
        Ok(config)
    }
}

/// Parses and resolves a configuration document with the builtin behaviors.
pub fn load_config(document: &str) -> Result<RunConfig> {
    ConfigDocument::parse(document)?.resolve()
}

impl RunConfig {
    pub fn landscape(&self) -> Landscape {
        let l = Landscape::new(self.landscape, self.dimension).expect("validated dimension");
        if self.reference {
            l
        } else {
            l.without_reference()
        }
    }

    pub fn validate(&self, catalog: &BehaviorCatalog) -> Result<()> {
        let wrap =
            |r: Result<(), (&'static str, String)>| r.map_err(|(k, m)| Error::validation(k, m));
        if self.iterations < 1 {
            return Err(Error::validation("iterations", "must be at least 1"));
        }
        wrap(self.swarm.validate())?;
        wrap(self.lifecycle.validate())?;
        let r = &self.review;
        if !(0.0..=1.0).contains(&r.conformity) {
            return Err(Error::validation("review.beta", "must lie in [0, 1]"));
        }
        if !(r.noise >= 0.0) || !r.noise.is_finite() {
            return Err(Error::validation("review.noise", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&r.decay) {
            return Err(Error::validation("review.decay", "must lie in [0, 1]"));
        }
        let floor = 1.0 / self.lifecycle.population_cap as f64;
        if r.cap_enabled && !(r.dominance_cap > floor && r.dominance_cap <= 1.0) {
            return Err(Error::validation(
                "review.dominance_cap",
                format!("must lie in (1/population_cap, 1] = ({floor}, 1]"),
            ));
        }
        if self.mode == FitnessMode::Votes {
            if r.reviewers < 1 {
                return Err(Error::validation(
                    "review.reviewers",
                    "votes mode needs at least 1 reviewer",
                ));
            }
            if r.votes_per_reviewer < 1 {
                return Err(Error::validation(
                    "review.votes_per_reviewer",
                    "must be at least 1",
                ));
            }
        }
        let landscape = self.landscape();
        match self.mode {
            FitnessMode::Reference if !landscape.has_reference() => {
                return Err(Error::validation(
                    "mode",
                    format!(
                        "reference mode needs a landscape with a reference; `{}` has none here",
                        landscape.name()
                    ),
                ));
            }
            FitnessMode::Reference if landscape.objective_count() != 1 => {
                return Err(Error::validation(
                    "mode",
                    "reference mode needs a single objective",
                ));
            }
            FitnessMode::MultiObjective if landscape.objective_count() < 2 => {
                return Err(Error::validation(
                    "mode",
                    "multi_objective mode needs at least 2 objectives",
                ));
            }
            _ => {}
        }
        if !(self.link_threshold > 0.0) {
            return Err(Error::validation(
                "metrics.link_threshold",
                "must be positive",
            ));
        }
        if !catalog.contains(&self.behavior) {
            return Err(Error::validation(
                "lab.behavior",
                format!("no behavior named `{}` is registered", self.behavior),
            ));
        }
        Ok(())
    }

    /// Every key with its resolved value, in key order.
    pub fn to_document(&self) -> ConfigDocument {
        let s = &self.swarm;
        let l = &self.lifecycle;
        let r = &self.review;
        let mut doc = ConfigDocument::default();
        let mut put = |k: &str, v: Value| doc.set(k, v);
        put("seed", self.seed.into());
        put("iterations", self.iterations.into());
        put("landscape", self.landscape.name().into());
        put("dim", self.dimension.into());
        put("landscape.reference", self.reference.into());
        put("mode", self.mode.name().into());
        put("engine.inertia_min", s.inertia_min.into());
        put("engine.inertia_max", s.inertia_max.into());
        put("engine.coeff_min", s.coeff_min.into());
        put("engine.coeff_max", s.coeff_max.into());
        put("engine.v_max", s.v_max.into());
        put("engine.epsilon_start", s.epsilon_start.into());
        put("engine.epsilon_end", s.epsilon_end.into());
        put("engine.explore_scale", s.explore_scale.into());
        put("engine.archive_capacity", s.archive_capacity.into());
        put("lifecycle.initial_budget", l.initial_budget.into());
        put("lifecycle.max_budget", l.max_budget.into());
        put("lifecycle.selection_fraction", l.selection_fraction.into());
        put("lifecycle.population_cap", l.population_cap.into());
        put("lifecycle.initial_population", l.initial_population.into());
        put("lifecycle.explorer_fraction", l.explorer_fraction.into());
        put("lifecycle.spawn_scale", l.spawn_scale.into());
        put("review.reviewers", r.reviewers.into());
        put("review.votes_per_reviewer", r.votes_per_reviewer.into());
        put("review.beta", r.conformity.into());
        put("review.noise", r.noise.into());
        put("review.decay", r.decay.into());
        put("review.dominance_cap", r.dominance_cap.into());
        put("review.cap_enabled", r.cap_enabled.into());
        put("metrics.link_threshold", self.link_threshold.into());
        put("lab.behavior", self.behavior.clone().into());
        if let Some(out) = &self.output_dir {
            put("out", out.display().to_string().into());
        }
        doc
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.to_document().entries.into_iter().collect())
    }
}

fn to_u32(key: &str, v: u64) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::validation(key, "too large"))
}

/// Typed, consuming access to the raw entries.
struct Keys {
    entries: BTreeMap<String, Value>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.entries.remove(key)
    }

    fn unsigned(&mut self, key: &str) -> Result<Option<u64>> {
        self.take(key)
            .map(|v| {
                v.as_u64()
                    .ok_or_else(|| Error::validation(key, "expected a non-negative integer"))
            })
            .transpose()
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::validation(key, "expected a number"))
            })
            .transpose()
    }

    fn float_into(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.float(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key)
            .map(|v| {
                v.as_bool()
                    .ok_or_else(|| Error::validation(key, "expected true or false"))
            })
            .transpose()
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        self.take(key)
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(Error::validation(key, "expected a string")),
            })
            .transpose()
    }
}
