//! Pareto dominance, non-dominated sorting, crowding distance, 2-D
//! hypervolume, and the elitist archive the multi-objective swarm pulls
//! toward.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::registry::{LabId, Position};

/// `a` dominates `b` under minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    Error::check_dim(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Pareto rank of every vector: 0 for the non-dominated front, 1 for the
/// front left after removing it, and so on.
pub fn pareto_ranks<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<usize> {
    let n = vectors.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates_unchecked(vectors[i].as_ref(), vectors[j].as_ref()) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut ranks = vec![0usize; n];
    let mut front: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut rank = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &i in &front {
            ranks[i] = rank;
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        front = next;
        rank += 1;
    }
    ranks
}

/// NSGA-II crowding distance over one set of vectors. Boundary points get
/// infinity; an objective with zero spread contributes nothing.
pub fn crowding_distance<V: AsRef<[f64]>>(vectors: &[V]) -> Vec<f64> {
    let n = vectors.len();
    let mut distance = vec![0.0; n];
    if n == 0 {
        return distance;
    }
    let m = vectors[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| vectors[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let spread = hi - lo;
        if spread <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            let i = order[w];
            distance[i] += (value(order[w + 1]) - value(order[w - 1])) / spread;
        }
    }
    distance
}

/// Area dominated by `front` and bounded by `reference` (two objectives).
pub fn hypervolume_2d<V: AsRef<[f64]>>(front: &[V], reference: &[f64]) -> Result<f64> {
    if reference.len() != 2 {
        return Err(Error::Unsupported(format!(
            "hypervolume needs 2 objectives, got {}",
            reference.len()
        )));
    }
    let mut points = Vec::with_capacity(front.len());
    for (index, p) in front.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != 2 {
            return Err(Error::Unsupported(format!(
                "hypervolume needs 2 objectives, got {}",
                p.len()
            )));
        }
        if p[0] > reference[0] || p[1] > reference[1] {
            return Err(Error::BadReference { index });
        }
        points.push((p[0], p[1]));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut best_f2 = reference[1];
    for (i, &(f1, f2)) in points.iter().enumerate() {
        best_f2 = best_f2.min(f2);
        let next_f1 = points.get(i + 1).map_or(reference[0], |p| p.0);
        area += (next_f1 - f1) * (reference[1] - best_f2);
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchiveEntry {
    pub position: Position,
    pub objectives: Vec<f64>,
    pub lab: LabId,
    pub iteration: u64,
}

/// What happened to a candidate offered to the archive.
#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub accepted: bool,
    pub dominated_out: usize,
    pub truncated: usize,
}

/// Bounded non-dominated archive.
///
/// With two objectives and a reference point, overflow evicts the entry with
/// the smallest exclusive hypervolume contribution, which keeps the archive
/// hypervolume non-decreasing. Otherwise overflow evicts the entry with the
/// smallest crowding distance. Ties evict the most recently admitted entry.
#[derive(Debug, Clone)]
pub struct ParetoArchive {
    capacity: usize,
    reference: Option<Vec<f64>>,
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new(capacity: usize, reference: Option<Vec<f64>>) -> Self {
        assert!(capacity >= 1);
        Self {
            capacity,
            reference,
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn objectives(&self) -> Vec<&[f64]> {
        self.entries
            .iter()
            .map(|e| e.objectives.as_slice())
            .collect()
    }

    pub fn hypervolume(&self) -> Option<f64> {
        let reference = self.reference.as_ref()?;
        hypervolume_2d(&self.objectives(), reference).ok()
    }

    pub fn offer(&mut self, candidate: ArchiveEntry) -> Admission {
        let rejected = Admission {
            accepted: false,
            dominated_out: 0,
            truncated: 0,
        };
        let f = &candidate.objectives;
        if self
            .entries
            .iter()
            .any(|e| e.objectives == *f || dominates_unchecked(&e.objectives, f))
        {
            return rejected;
        }
        let before = self.entries.len();
        self.entries
            .retain(|e| !dominates_unchecked(f, &e.objectives));
        let dominated_out = before - self.entries.len();
        self.entries.push(candidate);

        let mut truncated = 0;
        let mut accepted = true;
        while self.entries.len() > self.capacity {
            let victim = self.eviction_index();
            if victim == self.entries.len() - 1 {
                accepted = false;
            }
            self.entries.remove(victim);
            truncated += 1;
        }
        Admission {
            accepted,
            dominated_out,
            truncated,
        }
    }

    fn eviction_index(&self) -> usize {
        let score = match &self.reference {
            Some(r) if r.len() == 2 => self.exclusive_contributions(r),
            _ => crowding_distance(&self.objectives()),
        };
        // last minimum wins so the newest entry goes first on ties
        let mut victim = 0;
        for (i, s) in score.iter().enumerate() {
            if s.total_cmp(&score[victim]) != Ordering::Greater {
                victim = i;
            }
        }
        victim
    }

    fn exclusive_contributions(&self, reference: &[f64]) -> Vec<f64> {
        let n = self.entries.len();
        let mut order: Vec<usize> = (0..n).collect();
        let f = |i: usize| &self.entries[i].objectives;
        order.sort_by(|&a, &b| f(a)[0].total_cmp(&f(b)[0]));
        let mut contribution = vec![0.0; n];
        for (w, &i) in order.iter().enumerate() {
            let right = order.get(w + 1).map_or(reference[0], |&j| f(j)[0]);
            let above = if w == 0 {
                reference[1]
            } else {
                f(order[w - 1])[1]
            };
            contribution[i] = (right - f(i)[0]) * (above - f(i)[1]);
        }
        contribution
    }
}
