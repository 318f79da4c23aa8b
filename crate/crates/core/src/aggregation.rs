//! Combining lens tallies into per-node label sets.
//!
//! Lens weights `p` live on the probability simplex. They are either learned by a linear
//! program over training nodes or set proportional to each lens's accuracy. A node's label
//! scores are `Σ_i p_i · n_ij` over its tally rows `i`; normalized, they form its label
//! distribution, which is trimmed to the shortest prefix whose cumulative weight reaches a
//! threshold τ.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::graph::NodeId;
use crate::lens::{LabelTally, TallyTable};
use crate::simplex::{LinearProgram, LpError, Relation};
use crate::walk::rng_from_seed;

/// Cumulative-weight slack when comparing against τ, absorbing rounding in the normalization.
pub const THRESHOLD_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("weights must be nonnegative, finite and not all zero")]
    DegenerateWeights,
    #[error("expected {expected} weights, found {found}")]
    WeightCount { expected: usize, found: usize },
    #[error("threshold {0} is outside (0, 1]")]
    BadThreshold(f64),
    #[error("train fraction {0} is outside (0, 1)")]
    BadTrainFraction(f64),
    #[error("no training nodes")]
    NoTrainingNodes,
    #[error("weight search did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error("weights file line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Lens weights: nonnegative, summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Normalizes `raw` to sum to one.
    pub fn normalized(raw: &[f64]) -> Result<Self, AggregationError> {
        if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(AggregationError::DegenerateWeights);
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(AggregationError::DegenerateWeights);
        }
        Ok(WeightVector(raw.iter().map(|x| x / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Text form: optional `#` comment lines, then `row_label<TAB>weight` per lens row.
    pub fn write<W: Write>(&self, row_labels: &[String], comment: &str, mut out: W) -> std::io::Result<()> {
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
        for (label, p) in row_labels.iter().zip(&self.0) {
            writeln!(out, "{label}\t{p}")?;
        }
        Ok(())
    }

    /// Parses the text form, returning row labels alongside the weights.
    pub fn read<R: BufRead>(reader: R) -> Result<(Vec<String>, WeightVector), AggregationError> {
        let mut labels = Vec::new();
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let err = |message: &str| AggregationError::Format {
                line: i + 1,
                message: message.to_string(),
            };
            let line = line.map_err(|e| err(&e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, value) = line
                .split_once(|c: char| c.is_whitespace())
                .ok_or_else(|| err("expected `label<TAB>weight`"))?;
            let value: f64 = value.trim().parse().map_err(|_| err("bad weight"))?;
            labels.push(label.to_string());
            values.push(value);
        }
        Ok((labels, WeightVector::normalized(&values)?))
    }
}

/// Optimal lens weights together with the per-node slacks they leave.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackSolution {
    pub weights: WeightVector,
    /// `ξ_m` for every training node, in the order given.
    pub slacks: Vec<f64>,
    pub objective: f64,
}

/// One training node's tally matrix (`lenses × classes`, row-major) and true class.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightInstance {
    pub tally: Vec<f64>,
    pub truth: usize,
}

/// Training data for the weight program.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightProblem {
    pub lenses: usize,
    pub classes: usize,
    pub nodes: Vec<WeightInstance>,
}

impl WeightProblem {
    /// Builds the problem from tallies of `nodes`. With `row_normalize`, each tally row is
    /// divided by its sum (empty rows stay zero); otherwise raw counts are used.
    pub fn from_tallies(table: &TallyTable, truth: &[usize], nodes: &[NodeId], row_normalize: bool) -> Self {
        let instances = nodes
            .iter()
            .map(|&v| WeightInstance {
                tally: tally_values(table.node(v), row_normalize),
                truth: truth[v],
            })
            .collect();
        WeightProblem {
            lenses: table.rows(),
            classes: table.classes(),
            nodes: instances,
        }
    }

    /// Smallest `ξ ≥ 0` with `y·p ≥ (Xᵀp)_j − ξ` for every class `j`.
    pub fn slack(&self, node: &WeightInstance, p: &[f64]) -> f64 {
        let scores = class_scores(&node.tally, self.lenses, self.classes, p);
        let own = scores[node.truth];
        scores.iter().fold(0.0f64, |acc, &s| acc.max(s - own))
    }

    /// `Σ_m ξ_m` at weights `p`.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.nodes.iter().map(|n| self.slack(n, p)).sum()
    }

    /// Solves
    ///
    /// ```text
    /// minimize Σ_m ξ_m
    /// s.t.     Σ_i p_i (n_ij − n_iy_m) − ξ_m ≤ 0   for every node m and class j ≠ y_m
    ///          Σ_i p_i = 1,  p ≥ 0,  ξ ≥ 0
    /// ```
    ///
    /// Eliminating `ξ` leaves a convex piecewise-linear function of `p` alone, minimized by
    /// cutting planes whose small master programs go through the dense simplex. Constraint
    /// rows that hold for every feasible `p` (all differences ≤ 0) or are dominated by another
    /// row of the same node are dropped, and nodes with identical remaining rows are merged
    /// with their count as weight. The returned slacks are recomputed from the final weights.
    pub fn solve(&self) -> Result<SlackSolution, AggregationError> {
        if self.nodes.is_empty() {
            return Err(AggregationError::NoTrainingNodes);
        }
        let l = self.lenses;
        let mut groups: HashMap<Vec<Vec<u64>>, usize> = HashMap::new();
        let mut group_rows: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut multiplicity: Vec<f64> = Vec::new();
        for node in &self.nodes {
            let rows = self.binding_rows(node);
            if rows.is_empty() {
                continue;
            }
            let key: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
            match groups.get(&key) {
                Some(&g) => multiplicity[g] += 1.0,
                None => {
                    groups.insert(key, group_rows.len());
                    group_rows.push(rows);
                    multiplicity.push(1.0);
                }
            }
        }
        let found = minimize_piecewise(l, &group_rows, &multiplicity)?;
        // Final choice under the reported objective, which sums per node rather than per
        // merged group and so may round differently.
        let mut weights = found.clone();
        let mut best = self.objective(found.as_slice());
        for i in 0..l {
            let mut e = vec![0.0; l];
            e[i] = 1.0;
            let value = self.objective(&e);
            if value < best {
                best = value;
                weights = WeightVector::normalized(&e)?;
            }
        }
        let slacks: Vec<f64> = self.nodes.iter().map(|n| self.slack(n, weights.as_slice())).collect();
        let objective = slacks.iter().sum();
        Ok(SlackSolution {
            weights,
            slacks,
            objective,
        })
    }

    /// Difference vectors `n_·j − n_·y` that can be positive, minus dominated ones, sorted.
    fn binding_rows(&self, node: &WeightInstance) -> Vec<Vec<f64>> {
        let (l, c) = (self.lenses, self.classes);
        let mut rows: Vec<Vec<f64>> = (0..c)
            .filter(|&j| j != node.truth)
            .map(|j| (0..l).map(|i| node.tally[i * c + j] - node.tally[i * c + node.truth]).collect::<Vec<f64>>())
            .filter(|d| d.iter().any(|&x| x > 0.0))
            .collect();
        rows.sort_by(|a, b| a.partial_cmp(b).expect("finite tallies"));
        rows.dedup();
        let dominated = |a: &Vec<f64>, b: &Vec<f64>| a != b && a.iter().zip(b).all(|(x, y)| x <= y);
        let kept: Vec<Vec<f64>> = rows
            .iter()
            .filter(|a| !rows.iter().any(|b| dominated(a, b)))
            .cloned()
            .collect();
        kept
    }
}

const GAP_TOLERANCE: f64 = 1e-9;
const MAX_CUTS: usize = 5_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `f(p) = Σ_g w_g max(0, max_r d_gr·p)` together with a subgradient at `p`.
fn value_and_cut(p: &[f64], group_rows: &[Vec<Vec<f64>>], multiplicity: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut cut = vec![0.0; p.len()];
    for (rows, &w) in group_rows.iter().zip(multiplicity) {
        let mut best: Option<(&Vec<f64>, f64)> = None;
        for d in rows {
            let v = dot(d, p);
            if v > best.map_or(0.0, |(_, b)| b) {
                best = Some((d, v));
            }
        }
        if let Some((d, v)) = best {
            value += w * v;
            cut.iter_mut().zip(d).for_each(|(c, x)| *c += w * x);
        }
    }
    (value, cut)
}

/// Minimizes the summed slack over the probability simplex. The program is the epigraph
/// form of the slack LP: `t ≥ a_k·p` for subgradient cuts `a_k`, refined until the master
/// bound meets the best evaluated point. The unit vectors and the uniform vector are
/// evaluated first, so the result is never worse than any of them.
fn minimize_piecewise(l: usize, group_rows: &[Vec<Vec<f64>>], multiplicity: &[f64]) -> Result<WeightVector, AggregationError> {
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut visit = |p: Vec<f64>, cuts: &mut Vec<Vec<f64>>| {
        let (value, cut) = value_and_cut(&p, group_rows, multiplicity);
        if incumbent.as_ref().map_or(true, |(best, _)| value < *best) {
            incumbent = Some((value, p));
        }
        if !cuts.contains(&cut) {
            cuts.push(cut);
        }
        incumbent.as_ref().map(|(v, _)| *v).expect("set above")
    };
    for i in 0..l {
        let mut e = vec![0.0; l];
        e[i] = 1.0;
        visit(e, &mut cuts);
    }
    let mut upper = visit(vec![1.0 / l as f64; l], &mut cuts);
    while cuts.len() <= MAX_CUTS {
        let (lower, p) = solve_master(l, &cuts)?;
        if upper - lower <= GAP_TOLERANCE * upper.abs().max(1.0) {
            let (_, best) = incumbent.expect("evaluated above");
            return WeightVector::normalized(&best);
        }
        let before = cuts.len();
        upper = visit(p, &mut cuts);
        if cuts.len() == before {
            // The master already holds this cut, so its bound is attained at `p`.
            let (_, best) = incumbent.expect("evaluated above");
            return WeightVector::normalized(&best);
        }
    }
    Err(AggregationError::NoConvergence(MAX_CUTS))
}

/// `min t` over `t ≥ a·p` for every cut, `Σ p = 1`, `p ≥ 0`; returns `(t, p)`.
fn solve_master(l: usize, cuts: &[Vec<f64>]) -> Result<(f64, Vec<f64>), AggregationError> {
    let mut objective = vec![0.0; l + 1];
    objective[l] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for a in cuts {
        let mut coeffs = a.clone();
        coeffs.push(-1.0);
        lp.add(coeffs, Relation::Le, 0.0);
    }
    let mut simplex_row = vec![1.0; l];
    simplex_row.push(0.0);
    lp.add(simplex_row, Relation::Eq, 1.0);
    let solution = lp.solve()?;
    let p: Vec<f64> = solution.x[..l].iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = p.iter().sum();
    Ok((solution.objective, p.iter().map(|x| x / sum).collect()))
}

/// Options for learning lens weights from a tally table.
#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Training nodes beyond this many are uniformly subsampled.
    pub max_training_nodes: usize,
    pub row_normalize: bool,
    pub seed: u64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_training_nodes: 5_000,
            row_normalize: false,
            seed: 0,
        }
    }
}

/// Learns lens weights on `train` nodes; see [`WeightProblem::solve`].
pub fn solve_weights_lp(
    table: &TallyTable,
    truth: &[usize],
    train: &[NodeId],
    options: &LpOptions,
) -> Result<SlackSolution, AggregationError> {
    let mut nodes = train.to_vec();
    if nodes.len() > options.max_training_nodes {
        let mut rng = rng_from_seed(options.seed);
        nodes.shuffle(&mut rng);
        nodes.truncate(options.max_training_nodes);
        nodes.sort_unstable();
    }
    WeightProblem::from_tallies(table, truth, &nodes, options.row_normalize).solve()
}

/// Weights proportional to per-lens accuracies.
pub fn naive_weights(accuracies: &[f64]) -> Result<WeightVector, AggregationError> {
    WeightVector::normalized(accuracies)
}

/// Probability vector over classes.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution(Vec<f64>);

impl LabelDistribution {
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        let total: f64 = scores.iter().sum();
        (total > 0.0).then(|| LabelDistribution(scores.iter().map(|s| s / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Highest-weight class (lowest index among ties) and its weight.
    pub fn top(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = i;
            }
        }
        (best, self.0[best])
    }
}

fn tally_values(t: LabelTally<'_>, row_normalize: bool) -> Vec<f64> {
    let mut out: Vec<f64> = t.as_slice().iter().map(|&c| c as f64).collect();
    if row_normalize {
        for row in out.chunks_mut(t.classes()) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
    }
    out
}

fn class_scores(tally: &[f64], lenses: usize, classes: usize, p: &[f64]) -> Vec<f64> {
    let mut scores = vec![0.0; classes];
    for i in 0..lenses {
        if p[i] == 0.0 {
            continue;
        }
        for (j, s) in scores.iter_mut().enumerate() {
            *s += p[i] * tally[i * classes + j];
        }
    }
    scores
}

/// Weighted label distribution of one node, or `None` when every weighted count is zero
/// (the node is unlabeled).
pub fn node_distribution(t: LabelTally<'_>, p: &WeightVector, row_normalize: bool) -> Result<Option<LabelDistribution>, AggregationError> {
    if p.len() != t.rows() {
        return Err(AggregationError::WeightCount {
            expected: t.rows(),
            found: p.len(),
        });
    }
    let values = tally_values(t, row_normalize);
    let scores = class_scores(&values, t.rows(), t.classes(), p.as_slice());
    Ok(LabelDistribution::from_scores(&scores))
}

/// Labels kept after trimming a distribution at threshold τ.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Retained classes by descending weight (ascending index among ties).
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub tau: f64,
}

impl Prediction {
    pub fn k(&self) -> usize {
        self.labels.len()
    }
}

/// Shortest descending-weight prefix whose cumulative weight reaches `tau` (within
/// [`THRESHOLD_EPS`]). Zero-weight labels are never retained.
pub fn top_k_prediction(w: &LabelDistribution, tau: f64) -> Result<Prediction, AggregationError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(AggregationError::BadThreshold(tau));
    }
    let mut order: Vec<usize> = (0..w.0.len()).filter(|&j| w.0[j] > 0.0).collect();
    order.sort_by(|&a, &b| w.0[b].total_cmp(&w.0[a]).then(a.cmp(&b)));
    let mut cumulative = 0.0;
    let mut k = order.len();
    for (i, &j) in order.iter().enumerate() {
        cumulative += w.0[j];
        if cumulative >= tau - THRESHOLD_EPS {
            k = i + 1;
            break;
        }
    }
    order.truncate(k);
    Ok(Prediction {
        weights: order.iter().map(|&j| w.0[j]).collect(),
        labels: order,
        tau,
    })
}

/// `1/k` when the true class is retained, else `0`.
pub fn node_accuracy(pred: &Prediction, truth: usize) -> f64 {
    if pred.labels.contains(&truth) {
        1.0 / pred.k() as f64
    } else {
        0.0
    }
}

/// Seeded uniform split of `0..n` into sorted train and test node lists; the train side
/// gets `round(train_fraction * n)` nodes.
pub fn split_nodes(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<NodeId>, Vec<NodeId>), AggregationError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(AggregationError::BadTrainFraction(train_fraction));
    }
    let mut nodes: Vec<NodeId> = (0..n).collect();
    nodes.shuffle(&mut rng_from_seed(seed));
    let cut = (train_fraction * n as f64).round() as usize;
    let mut test = nodes.split_off(cut);
    nodes.sort_unstable();
    test.sort_unstable();
    Ok((nodes, test))
}
