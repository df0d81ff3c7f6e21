//! The swarm update: coefficient decoding, the exploration schedule, the
//! three-factor velocity rule, bounded position updates, exploration jumps,
//! and best-claim bookkeeping.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::Bounds;
use crate::pareto::dominates;
use crate::registry::{Best, CollectiveState, LabState, Position, Score, Velocity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmParams {
    pub inertia_min: f64,
    pub inertia_max: f64,
    pub coeff_min: f64,
    pub coeff_max: f64,
    pub v_max: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub explore_scale: f64,
    pub archive_capacity: usize,
}

impl SwarmParams {
    /// Defaults scaled to the width of the search box.
    pub fn for_bounds(bounds: Bounds) -> Self {
        Self {
            inertia_min: 0.4,
            inertia_max: 0.9,
            coeff_min: 0.5,
            coeff_max: 2.5,
            v_max: 0.5 * bounds.width(),
            epsilon_start: 0.5,
            epsilon_end: 0.05,
            explore_scale: 0.1 * bounds.width(),
            archive_capacity: 50,
        }
    }

    /// Returns the offending key on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.inertia_min <= self.inertia_max) {
            return Err((
                "engine.inertia_min",
                "must not exceed engine.inertia_max".into(),
            ));
        }
        if !(self.coeff_min <= self.coeff_max) {
            return Err((
                "engine.coeff_min",
                "must not exceed engine.coeff_max".into(),
            ));
        }
        if !(self.v_max > 0.0) || !self.v_max.is_finite() {
            return Err(("engine.v_max", "must be positive and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return Err(("engine.epsilon_start", "must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(("engine.epsilon_end", "must lie in [0, 1]".into()));
        }
        if self.epsilon_end > self.epsilon_start {
            return Err((
                "engine.epsilon_end",
                "exploration rate must be non-increasing (epsilon_end <= epsilon_start)".into(),
            ));
        }
        if !(self.explore_scale >= 0.0) || !self.explore_scale.is_finite() {
            return Err((
                "engine.explore_scale",
                "must be non-negative and finite".into(),
            ));
        }
        if self.archive_capacity == 0 {
            return Err(("engine.archive_capacity", "must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inertia, cognitive and social weights for one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

/// Consensus κ = 1 − min(1, variance / initial variance).
pub fn consensus(state: &CollectiveState) -> f64 {
    if state.initial_variance <= 0.0 {
        return if state.position_variance <= 0.0 {
            1.0
        } else {
            0.0
        };
    }
    1.0 - (state.position_variance / state.initial_variance).min(1.0)
}

/// Cognitive pull dominates while opinions diverge, social pull as
/// consensus forms; inertia decays linearly over the run.
pub fn decode_coefficients(
    state: &CollectiveState,
    params: &SwarmParams,
    t: u64,
    horizon: u64,
) -> Result<Coefficients> {
    if state.population == 0 {
        return Err(Error::EmptySwarm);
    }
    assert!(
        horizon >= 1 && t <= horizon,
        "t = {t} outside [0, {horizon}]"
    );
    let kappa = consensus(state);
    let span = params.coeff_max - params.coeff_min;
    let progress = t as f64 / horizon as f64;
    Ok(Coefficients {
        inertia: params.inertia_max - (params.inertia_max - params.inertia_min) * progress,
        cognitive: params.coeff_min + span * (1.0 - kappa),
        social: params.coeff_min + span * kappa,
    })
}

/// Probability that a lab explores at iteration `t`.
pub fn exploration_rate(params: &SwarmParams, t: u64, horizon: u64) -> f64 {
    assert!(
        horizon >= 1 && t <= horizon,
        "t = {t} outside [0, {horizon}]"
    );
    let progress = t as f64 / horizon as f64;
    params.epsilon_start + (params.epsilon_end - params.epsilon_start) * progress
}

/// `v' = w·v + c1·r1⊙(p − x) + c2·r2⊙(g − x)`, clamped to `±v_max`, with
/// `r1_j` and `r2_j` drawn in that order for each coordinate.
pub fn velocity_update<R: Rng + ?Sized>(
    lab: &LabState,
    social_target: &Position,
    coeffs: Coefficients,
    v_max: f64,
    rng: &mut R,
) -> Result<Velocity> {
    velocity_update_with(lab, social_target, coeffs, v_max, || rng.random::<f64>())
}

/// [`velocity_update`] with an explicit source of unit draws.
pub fn velocity_update_with(
    lab: &LabState,
    social_target: &Position,
    coeffs: Coefficients,
    v_max: f64,
    mut draw: impl FnMut() -> f64,
) -> Result<Velocity> {
    let d = lab.position.len();
    let personal = lab.best_position();
    Error::check_dim(d, lab.velocity.len())?;
    Error::check_dim(d, personal.len())?;
    Error::check_dim(d, social_target.len())?;
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let x = lab.position.0[j];
        let r1 = draw();
        let r2 = draw();
        let v = coeffs.inertia * lab.velocity.0[j]
            + coeffs.cognitive * r1 * (personal.0[j] - x)
            + coeffs.social * r2 * (social_target.0[j] - x);
        out.push(v.clamp(-v_max, v_max));
    }
    Ok(Velocity(out))
}

/// Adds the velocity and clamps to the box. A clamped coordinate's velocity
/// is zeroed (absorbing walls).
pub fn position_update(
    position: &Position,
    velocity: &Velocity,
    bounds: Bounds,
) -> Result<(Position, Velocity)> {
    Error::check_dim(position.len(), velocity.len())?;
    let mut x = Vec::with_capacity(position.len());
    let mut v = Vec::with_capacity(position.len());
    for (p, dv) in position.0.iter().zip(&velocity.0) {
        let moved = p + dv;
        let clamped = bounds.clamp(moved);
        x.push(clamped);
        v.push(if clamped == moved { *dv } else { 0.0 });
    }
    Ok((Position(x), Velocity(v)))
}

/// Gaussian jump of scale `scale` around `position`, clamped to the box.
/// The mover's velocity is reset to zero.
pub fn explore_move<R: Rng + ?Sized>(
    position: &Position,
    scale: f64,
    bounds: Bounds,
    rng: &mut R,
) -> (Position, Velocity) {
    let x = position
        .0
        .iter()
        .map(|&p| {
            let z: f64 = StandardNormal.sample(rng);
            bounds.clamp(p + scale * z)
        })
        .collect();
    (Position(x), Velocity::zeros(position.len()))
}

/// Full PSO step: velocity update then bounded position update.
pub fn pso_move<R: Rng + ?Sized>(
    lab: &LabState,
    social_target: &Position,
    coeffs: Coefficients,
    v_max: f64,
    bounds: Bounds,
    rng: &mut R,
) -> Result<(Position, Velocity)> {
    let v = velocity_update(lab, social_target, coeffs, v_max, rng)?;
    position_update(&lab.position, &v, bounds)
}

/// `candidate` strictly improves on `incumbent`: a larger scalar, or a
/// dominating objective vector. An empty incumbent is always improved upon.
pub fn improves(candidate: &Score, incumbent: Option<&Score>) -> bool {
    match (candidate, incumbent) {
        (_, None) => true,
        (Score::Scalar(c), Some(Score::Scalar(i))) => c > i,
        (Score::Objectives(c), Some(Score::Objectives(i))) => dominates(c, i).unwrap_or(false),
        _ => false,
    }
}

/// Offers this iteration's score to the lab's personal best and to the
/// swarm best; each is replaced only on strict improvement. Callers offer
/// labs in ascending id order so that equal scores stay with the lower id.
/// Returns `(personal_replaced, swarm_replaced)`.
pub fn update_bests(
    lab: &mut LabState,
    candidate: &Best,
    swarm_best: &mut Option<Best>,
) -> (bool, bool) {
    let personal = improves(
        &candidate.score,
        lab.personal_best.as_ref().map(|b| &b.score),
    );
    if personal {
        lab.personal_best = Some(candidate.clone());
    }
    let swarm = matches!(candidate.score, Score::Scalar(_))
        && improves(&candidate.score, swarm_best.as_ref().map(|b| &b.score));
    if swarm {
        *swarm_best = Some(candidate.clone());
    }
    (personal, swarm)
}

/// Ages a recorded vote share by the trust decay factor.
pub fn age_vote_share(best: &mut Best, decay: f64) {
    if let Score::Scalar(s) = &mut best.score {
        *s *= decay;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::LabId;
    use crate::rng::{SeedTree, LAB};

    fn lab(x: &[f64], v: &[f64], p: &[f64]) -> LabState {
        LabState {
            id: LabId(0),
            position: Position(x.to_vec()),
            velocity: Velocity(v.to_vec()),
            personal_best: Some(Best {
                position: Position(p.to_vec()),
                score: Score::Scalar(0.0),
                lab: LabId(0),
                iteration: 0,
            }),
            budget: 3,
            trust: 0.0,
            explorer: false,
            parent: None,
            born: 0,
        }
    }

    fn state(variance: f64, initial: f64) -> CollectiveState {
        CollectiveState {
            iteration: 0,
            position_variance: variance,
            initial_variance: initial,
            trust_concentration: 1.0,
            population: 3,
            global_best: None,
        }
    }

    fn defaults() -> SwarmParams {
        SwarmParams::for_bounds(Bounds::new(-5.12, 5.12))
    }

    #[test]
    fn coefficient_endpoints() {
        let p = defaults();
        let c = decode_coefficients(&state(4.0, 2.0), &p, 0, 10).unwrap();
        assert_eq!((c.cognitive, c.social, c.inertia), (2.5, 0.5, 0.9));
        let c = decode_coefficients(&state(0.0, 2.0), &p, 10, 10).unwrap();
        assert_eq!((c.cognitive, c.social), (0.5, 2.5));
        assert!((c.inertia - 0.4).abs() < 1e-15);
        let c = decode_coefficients(&state(1.0, 2.0), &p, 5, 10).unwrap();
        assert_eq!((c.cognitive, c.social), (1.5, 1.5));
    }

    #[test]
    fn decoding_empty_swarm_fails() {
        let mut s = state(1.0, 1.0);
        s.population = 0;
        assert!(matches!(
            decode_coefficients(&s, &defaults(), 0, 1),
            Err(Error::EmptySwarm)
        ));
    }

    #[test]
    fn epsilon_schedule() {
        let p = defaults();
        assert_eq!(exploration_rate(&p, 0, 100), 0.5);
        assert!((exploration_rate(&p, 100, 100) - 0.05).abs() < 1e-15);
        assert!((exploration_rate(&p, 50, 100) - 0.275).abs() < 1e-15);
    }

    #[test]
    fn velocity_hand_example() {
        let l = lab(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]);
        let c = Coefficients {
            inertia: 0.5,
            cognitive: 1.0,
            social: 1.0,
        };
        let v = velocity_update_with(&l, &Position(vec![0.0, 2.0]), c, 3.0, || 1.0).unwrap();
        assert_eq!(v, Velocity(vec![2.5, 2.0]));
        let clamped = velocity_update_with(&l, &Position(vec![0.0, 2.0]), c, 1.0, || 1.0).unwrap();
        assert_eq!(clamped, Velocity(vec![1.0, 1.0]));
    }

    #[test]
    fn velocity_identity_cases() {
        let mut rng = SeedTree::new(1).stream(LAB, 0);
        let l = lab(&[0.3, -0.2], &[0.4, -0.1], &[1.0, 1.0]);
        let c = Coefficients {
            inertia: 1.0,
            cognitive: 0.0,
            social: 0.0,
        };
        let v = velocity_update(&l, &Position(vec![2.0, 2.0]), c, 10.0, &mut rng).unwrap();
        assert_eq!(v, l.velocity);

        let at = lab(&[0.5, 0.5], &[0.2, -0.4], &[0.5, 0.5]);
        let c = Coefficients {
            inertia: 0.7,
            cognitive: 2.0,
            social: 2.0,
        };
        let v = velocity_update(&at, &Position(vec![0.5, 0.5]), c, 10.0, &mut rng).unwrap();
        assert_eq!(v, Velocity(vec![0.7 * 0.2, 0.7 * -0.4]));
    }

    #[test]
    fn velocity_dimension_mismatch() {
        let l = lab(&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let c = Coefficients {
            inertia: 1.0,
            cognitive: 1.0,
            social: 1.0,
        };
        assert!(velocity_update_with(&l, &Position(vec![0.0]), c, 1.0, || 0.5).is_err());
    }

    #[test]
    fn position_examples() {
        let b = Bounds::new(-5.0, 5.0);
        let (x, v) =
            position_update(&Position(vec![1.0, 1.0]), &Velocity(vec![0.5, -1.0]), b).unwrap();
        assert_eq!(x, Position(vec![1.5, 0.0]));
        assert_eq!(v, Velocity(vec![0.5, -1.0]));

        let (x, v) = position_update(
            &Position(vec![0.9]),
            &Velocity(vec![0.5]),
            Bounds::new(-1.0, 1.0),
        )
        .unwrap();
        assert_eq!(x, Position(vec![1.0]));
        assert_eq!(v, Velocity(vec![0.0]));

        let (x, _) = position_update(&Position(vec![0.25, -3.0]), &Velocity::zeros(2), b).unwrap();
        assert_eq!(x, Position(vec![0.25, -3.0]));
        assert!(position_update(&Position(vec![0.0]), &Velocity::zeros(2), b).is_err());
    }

    #[test]
    fn explore_is_deterministic_and_degenerate_at_zero_scale() {
        let b = Bounds::new(-5.0, 5.0);
        let x = Position(vec![0.0, 0.0]);
        let mut rng = SeedTree::new(9).stream(LAB, 2);
        let (same, v) = explore_move(&x, 0.0, b, &mut rng);
        assert_eq!(same, x);
        assert_eq!(v, Velocity::zeros(2));
        let a = explore_move(&x, 0.1, b, &mut SeedTree::new(9).stream(LAB, 2)).0;
        let c = explore_move(&x, 0.1, b, &mut SeedTree::new(9).stream(LAB, 2)).0;
        assert_eq!(a, c);
    }

    #[test]
    fn explore_spread_matches_scale() {
        let b = Bounds::new(-5.0, 5.0);
        let mut rng = SeedTree::new(5).stream(LAB, 0);
        let origin = Position(vec![0.0, 0.0]);
        let draws: Vec<Position> = (0..10_000)
            .map(|_| explore_move(&origin, 0.1, b, &mut rng).0)
            .collect();
        for j in 0..2 {
            let xs: Vec<f64> = draws.iter().map(|p| p.0[j]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            let sd = var.sqrt();
            assert!((0.09..=0.11).contains(&sd), "sd {sd}");
        }
    }

    fn scored(lab: u64, error: f64, iteration: u64) -> Best {
        Best {
            position: Position(vec![error]),
            score: Score::Scalar(-error),
            lab: LabId(lab),
            iteration,
        }
    }

    #[test]
    fn bests_replace_only_on_strict_improvement() {
        let mut l = lab(&[0.0], &[0.0], &[0.0]);
        l.personal_best = Some(scored(0, 5.0, 0));
        let mut swarm = Some(scored(0, 5.0, 0));
        assert_eq!(
            update_bests(&mut l, &scored(0, 3.0, 1), &mut swarm),
            (true, true)
        );
        assert_eq!(
            update_bests(&mut l, &scored(0, 3.0, 2), &mut swarm),
            (false, false)
        );
        assert_eq!(l.personal_best.as_ref().unwrap().iteration, 1);
    }

    #[test]
    fn equal_scores_stay_with_lower_id() {
        let mut swarm = Some(scored(0, 4.0, 0));
        let mut a = lab(&[0.0], &[0.0], &[0.0]);
        a.id = LabId(2);
        let mut b = lab(&[0.0], &[0.0], &[0.0]);
        b.id = LabId(7);
        update_bests(&mut a, &scored(2, 0.0, 1), &mut swarm);
        update_bests(&mut b, &scored(7, 0.0, 1), &mut swarm);
        assert_eq!(swarm.unwrap().lab, LabId(2));
    }

    #[test]
    fn objective_bests_use_dominance() {
        let mut l = lab(&[0.0], &[0.0], &[0.0]);
        let best = |f: Vec<f64>| Best {
            position: Position(vec![0.0]),
            score: Score::Objectives(f),
            lab: LabId(0),
            iteration: 0,
        };
        l.personal_best = Some(best(vec![1.0, 3.0]));
        let mut swarm = None;
        assert_eq!(
            update_bests(&mut l, &best(vec![3.0, 1.0]), &mut swarm),
            (false, false)
        );
        assert_eq!(
            update_bests(&mut l, &best(vec![0.5, 3.0]), &mut swarm),
            (true, false)
        );
    }
}
