//! Slow, obviously-correct reimplementations used to check the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Minimization dominance straight from the definition.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Peel fronts one at a time by scanning every pair.
pub fn pareto_ranks(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut rank = vec![usize::MAX; n];
    let mut level = 0;
    while rank.contains(&usize::MAX) {
        let front: Vec<usize> = (0..n)
            .filter(|&i| rank[i] == usize::MAX)
            .filter(|&i| {
                !(0..n)
                    .any(|j| rank[j] == usize::MAX && j != i && dominates(&points[j], &points[i]))
            })
            .collect();
        for i in front {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

pub fn non_dominated(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|p| dominates(p, &points[i])))
        .collect()
}

/// Area dominated by `front` inside the reference box, by counting cell
/// centres on a `cells`×`cells` grid spanning `[lower, reference]`.
pub fn grid_hypervolume(
    front: &[Vec<f64>],
    lower: [f64; 2],
    reference: [f64; 2],
    cells: usize,
) -> f64 {
    let dx = (reference[0] - lower[0]) / cells as f64;
    let dy = (reference[1] - lower[1]) / cells as f64;
    let mut hits = 0usize;
    for i in 0..cells {
        let x = lower[0] + (i as f64 + 0.5) * dx;
        for j in 0..cells {
            let y = lower[1] + (j as f64 + 0.5) * dy;
            if front.iter().any(|p| p[0] <= x && p[1] <= y) {
                hits += 1;
            }
        }
    }
    hits as f64 * dx * dy
}

/// Spearman's ρ from the definition: average ranks, then
/// 1 − 6Σd²/(n(n²−1)).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Mean squared distance to the centroid, coordinate by coordinate.
pub fn variance(points: &[Vec<f64>]) -> f64 {
    let n = points.len() as f64;
    let d = points[0].len();
    let mut total = 0.0;
    for j in 0..d {
        let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
        total += points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>();
    }
    total / n
}

pub fn mean_pairwise(points: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..points.len() {
        for j in 0..i {
            sum += points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Camps by flood fill from each unvisited point; returns the camp sizes
/// sorted ascending.
pub fn camp_sizes(points: &[Vec<f64>], threshold: f64) -> Vec<usize> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            <= threshold
    };
    let mut seen = vec![false; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut stack = vec![s];
        seen[s] = true;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for j in 0..n {
                if !seen[j] && near(i, j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    sizes.sort_unstable();
    sizes
}

/// One coordinate of the velocity rule with explicit draws.
#[allow(clippy::too_many_arguments)]
pub fn velocity(
    w: f64,
    v: f64,
    c1: f64,
    r1: f64,
    p: f64,
    x: f64,
    c2: f64,
    r2: f64,
    g: f64,
    v_max: f64,
) -> f64 {
    let raw = w * v + c1 * r1 * (p - x) + c2 * r2 * (g - x);
    raw.max(-v_max).min(v_max)
}

/// Dominance cap by bisection on the threshold level: every share above
/// `cap` is cut to `cap`, and the others are scaled by a common factor
/// so the total is unchanged.
pub fn capped(trust: &[f64], cap: f64) -> Vec<f64> {
    let total: f64 = trust.iter().sum();
    if total <= 0.0 || trust.len() <= 1 || cap * trust.len() as f64 <= 1.0 {
        return trust.to_vec();
    }
    let limit = cap * total;
    if trust.iter().all(|&t| t <= limit) {
        return trust.to_vec();
    }
    // labs pinned at the cap, growing until the rest fit under it
    let mut order: Vec<usize> = (0..trust.len()).collect();
    order.sort_by(|&a, &b| trust[b].total_cmp(&trust[a]));
    for pinned in 1..trust.len() {
        let rest: f64 = order[pinned..].iter().map(|&i| trust[i]).sum();
        let room = total - limit * pinned as f64;
        let mut out = vec![0.0; trust.len()];
        for &i in &order[..pinned] {
            out[i] = limit;
        }
        if rest <= 0.0 {
            let share = room / (trust.len() - pinned) as f64;
            for &i in &order[pinned..] {
                out[i] = share;
            }
        } else {
            for &i in &order[pinned..] {
                out[i] = trust[i] * room / rest;
            }
        }
        if order[pinned..]
            .iter()
            .all(|&i| out[i] <= limit * (1.0 + 1e-12))
        {
            return out;
        }
    }
    unreachable!("cap above 1/N is always feasible")
}

/// Textbook global-best PSO with constriction constants, used only to check
/// that a 1% error target on the sphere is reachable at this scale.
pub fn plain_pso_sphere(dim: usize, particles: usize, iterations: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (lo, hi) = (-5.12, 5.12);
    let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut x: Vec<Vec<f64>> = (0..particles)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let mut v = vec![vec![0.0; dim]; particles];
    let mut p = x.clone();
    let mut pf: Vec<f64> = x.iter().map(|xi| f(xi)).collect();
    let mut g = (0..particles)
        .min_by(|&a, &b| pf[a].total_cmp(&pf[b]))
        .unwrap();
    let start = pf[g];
    let (w, c) = (0.7298, 1.49618);
    for _ in 0..iterations {
        for i in 0..particles {
            for j in 0..dim {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                v[i][j] = w * v[i][j] + c * r1 * (p[i][j] - x[i][j]) + c * r2 * (p[g][j] - x[i][j]);
                x[i][j] = (x[i][j] + v[i][j]).clamp(lo, hi);
            }
            let fx = f(&x[i]);
            if fx < pf[i] {
                pf[i] = fx;
                p[i] = x[i].clone();
            }
        }
        g = (0..particles)
            .min_by(|&a, &b| pf[a].total_cmp(&pf[b]))
            .unwrap();
    }
    (start, pf[g])
}
