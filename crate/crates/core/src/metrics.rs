//! Measurements of the community's emergent behavior.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::registry::{position_variance, squared_distance, LabId};

pub use crate::pareto::hypervolume_2d;

/// Metrics row for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub population: usize,
    pub consensus_variance: f64,
    pub mean_pairwise_distance: f64,
    pub camp_count: usize,
    #[serde(skip)]
    pub camp_assignment: BTreeMap<LabId, usize>,
    pub best_quality: Option<f64>,
    pub vote_truth_rho: Option<f64>,
    pub hypervolume: Option<f64>,
    pub births: usize,
    pub deaths: usize,
}

pub const CSV_HEADER: &str = "iteration,population,consensus_variance,mean_pairwise_distance,camp_count,best_quality,vote_truth_rho,hypervolume,births,deaths";

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.population,
            self.consensus_variance,
            self.mean_pairwise_distance,
            self.camp_count,
            opt(self.best_quality),
            opt(self.vote_truth_rho),
            opt(self.hypervolume),
            self.births,
            self.deaths
        )
    }
}

/// Mean squared distance to the centroid.
pub fn consensus_variance<P: AsRef<[f64]>>(positions: &[P]) -> Result<f64> {
    position_variance(positions)
}

/// Average Euclidean distance over all unordered pairs; 0 for fewer than two.
pub fn mean_pairwise_distance<P: AsRef<[f64]>>(positions: &[P]) -> f64 {
    let n = positions.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += squared_distance(positions[i].as_ref(), positions[j].as_ref()).sqrt();
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Single-linkage camps: connected components of the graph linking labs no
/// farther apart than `threshold`. Camps are numbered from 0 in order of
/// their smallest lab id.
pub fn detect_camps<P: AsRef<[f64]>>(
    labs: &[(LabId, P)],
    threshold: f64,
) -> BTreeMap<LabId, usize> {
    let n = labs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let limit = threshold * threshold;
    for i in 0..n {
        for j in i + 1..n {
            if squared_distance(labs[i].1.as_ref(), labs[j].1.as_ref()) <= limit {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // smallest id per component decides its index
    let mut smallest: BTreeMap<usize, LabId> = BTreeMap::new();
    for (i, (id, _)) in labs.iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = smallest.entry(root).or_insert(*id);
        if *id < *entry {
            *entry = *id;
        }
    }
    let mut roots: Vec<(LabId, usize)> =
        smallest.into_iter().map(|(root, id)| (id, root)).collect();
    roots.sort();
    let index: BTreeMap<usize, usize> = roots
        .iter()
        .enumerate()
        .map(|(k, &(_, root))| (root, k))
        .collect();
    labs.iter()
        .enumerate()
        .map(|(i, (id, _))| (*id, index[&find(&mut parent, i)]))
        .collect()
}

pub fn camp_count(assignment: &BTreeMap<LabId, usize>) -> usize {
    assignment.values().max().map_or(0, |&m| m + 1)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ = 1 − 6Σd²/(N(N²−1)) over average ranks. `None` when fewer
/// than two items are given or either list is constant.
pub fn rank_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || n != b.len() {
        return None;
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(a) || constant(b) {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
    let n = n as f64;
    Some(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Default camp link threshold: half the exploration scale times √D.
pub fn default_link_threshold(explore_scale: f64, dimension: usize) -> f64 {
    0.5 * explore_scale * (dimension as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labs(points: &[f64]) -> Vec<(LabId, Vec<f64>)> {
        points
            .iter()
            .enumerate()
            .map(|(i, &x)| (LabId(i as u64), vec![x]))
            .collect()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(
            consensus_variance(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap(),
            1.0
        );
        assert_eq!(consensus_variance(&[vec![3.0, 1.0]]).unwrap(), 0.0);
        assert_eq!(consensus_variance(&[[3.0, 1.0]; 3]).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(
            mean_pairwise_distance(&[vec![0.0, 0.0], vec![2.0, 0.0]]),
            2.0
        );
        assert_eq!(mean_pairwise_distance(&[vec![1.0]]), 0.0);
        assert!(
            (mean_pairwise_distance(&[vec![0.0], vec![1.0], vec![2.0]]) - 4.0 / 3.0).abs() < 1e-15
        );
    }

    #[test]
    fn camp_examples() {
        let a = detect_camps(&labs(&[0.0, 0.1, 5.0, 5.1]), 1.0);
        assert_eq!(a.values().copied().collect::<Vec<_>>(), vec![0, 0, 1, 1]);
        assert_eq!(camp_count(&a), 2);
        let chain = detect_camps(&labs(&[0.0, 0.9, 1.8, 2.7]), 1.0);
        assert_eq!(camp_count(&chain), 1);
        assert_eq!(camp_count(&detect_camps::<Vec<f64>>(&[], 1.0)), 0);
    }

    #[test]
    fn camps_index_by_smallest_member() {
        let shuffled = vec![
            (LabId(7), vec![0.0]),
            (LabId(3), vec![9.0]),
            (LabId(5), vec![0.2]),
        ];
        let a = detect_camps(&shuffled, 1.0);
        assert_eq!(a[&LabId(3)], 0);
        assert_eq!(a[&LabId(5)], 1);
        assert_eq!(a[&LabId(7)], 1);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]),
            Some(1.0)
        );
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]),
            Some(-1.0)
        );
        assert_eq!(
            rank_correlation(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]),
            Some(0.5)
        );
        assert_eq!(rank_correlation(&[1.0], &[1.0]), None);
        assert_eq!(rank_correlation(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(
            average_ranks(&[5.0, 1.0, 5.0, 0.0]),
            vec![3.5, 2.0, 3.5, 1.0]
        );
    }
}
