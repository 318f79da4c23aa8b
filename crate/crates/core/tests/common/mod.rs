#![allow(dead_code)]

use netlens::aggregation::{WeightInstance, WeightProblem};
use netlens::Graph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random weight instance with integer tallies in `0..=4`.
pub fn random_instance<R: Rng>(rng: &mut R, max_lenses: usize, max_classes: usize, max_nodes: usize) -> WeightProblem {
    let lenses = rng.gen_range(1..=max_lenses);
    let classes = rng.gen_range(2..=max_classes);
    let nodes = (0..rng.gen_range(1..=max_nodes))
        .map(|_| WeightInstance {
            tally: (0..lenses * classes).map(|_| rng.gen_range(0..=4) as f64).collect(),
            truth: rng.gen_range(0..classes),
        })
        .collect();
    WeightProblem { lenses, classes, nodes }
}

/// Summed slack `Σ_m max(0, max_j Σ_i p_i (n_ij − n_iy))`, computed directly.
pub fn slack_sum(problem: &WeightProblem, p: &[f64]) -> f64 {
    let (l, c) = (problem.lenses, problem.classes);
    problem
        .nodes
        .iter()
        .map(|node| {
            let score = |j: usize| (0..l).map(|i| p[i] * node.tally[i * c + j]).sum::<f64>();
            let own = score(node.truth);
            (0..c).map(|j| score(j) - own).fold(0.0f64, f64::max)
        })
        .sum()
}

/// Minimum of the summed slack over all grid points of the probability simplex with
/// coordinates that are multiples of `1 / steps`.
pub fn grid_min(problem: &WeightProblem, steps: usize) -> f64 {
    fn walk(problem: &WeightProblem, steps: usize, prefix: &mut Vec<usize>, best: &mut f64) {
        let used: usize = prefix.iter().sum();
        if prefix.len() + 1 == problem.lenses {
            prefix.push(steps - used);
            let p: Vec<f64> = prefix.iter().map(|&k| k as f64 / steps as f64).collect();
            *best = best.min(slack_sum(problem, &p));
            prefix.pop();
            return;
        }
        for k in 0..=steps - used {
            prefix.push(k);
            walk(problem, steps, prefix, best);
            prefix.pop();
        }
    }
    let mut best = f64::INFINITY;
    walk(problem, steps, &mut Vec::new(), &mut best);
    best
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Exact minimum by vertex enumeration. The summed slack is piecewise linear on the simplex
/// with breakpoints on the hyperplanes `p_i = 0`, `d·p = 0` and `d·p = d'·p` (two rows of one
/// node), so some vertex of that arrangement attains the minimum.
pub fn vertex_min(problem: &WeightProblem) -> f64 {
    let (l, c) = (problem.lenses, problem.classes);
    let mut planes: Vec<Vec<f64>> = (0..l)
        .map(|i| {
            let mut e = vec![0.0; l];
            e[i] = 1.0;
            e
        })
        .collect();
    for node in &problem.nodes {
        let rows: Vec<Vec<f64>> = (0..c)
            .filter(|&j| j != node.truth)
            .map(|j| (0..l).map(|i| node.tally[i * c + j] - node.tally[i * c + node.truth]).collect())
            .collect();
        for (a, r) in rows.iter().enumerate() {
            planes.push(r.clone());
            for s in &rows[a + 1..] {
                planes.push(r.iter().zip(s).map(|(x, y)| x - y).collect());
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut choose = |subset: &[usize]| {
        let mut a = vec![vec![1.0; l]];
        let mut b = vec![1.0];
        for &h in subset {
            a.push(planes[h].clone());
            b.push(0.0);
        }
        if let Some(p) = solve_square(a, b) {
            if p.iter().all(|&x| x >= -1e-12) {
                let p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
                best = best.min(slack_sum(problem, &p));
            }
        }
    };
    // All (l − 1)-subsets of the hyperplanes, l ≤ 3.
    match l {
        1 => choose(&[]),
        2 => (0..planes.len()).for_each(|h| choose(&[h])),
        3 => {
            for h in 0..planes.len() {
                for k in h + 1..planes.len() {
                    choose(&[h, k]);
                }
            }
        }
        _ => panic!("vertex oracle supports at most three lenses"),
    }
    best
}

/// Connected random graph on `n` nodes: a random spanning tree plus extra edges with
/// probability `density`.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        edges.push((order[i], parent));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(density) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).0
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}
