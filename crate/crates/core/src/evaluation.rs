//! Scoring trimmed predictions: accuracy-versus-τ curves, reward (confusion) matrices,
//! weight entropy against node diversity, and per-network homogeneity.
//!
//! A test node whose prediction keeps `k` labels gives `1/k` reward to each of them in its
//! true-class row. Rewards are accumulated exactly in units of `1 / lcm(1..=C)`, so row sums,
//! traces and the curve value at a τ agree bit for bit.

use std::io::Write;

use thiserror::Error;

use crate::aggregation::{top_k_prediction, AggregationError, LabelDistribution, Prediction};
use crate::classifier::ClassCatalog;
use crate::graph::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("no test nodes to evaluate")]
    EmptyTestSet,
    #[error("τ grid is empty or not strictly increasing within (0, 1]")]
    BadGrid,
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least two points")]
    TooFewPoints,
    #[error("correlation is undefined for a constant input")]
    ConstantInput,
    #[error("{0} classes is too many for exact reward accounting")]
    TooManyClasses(usize),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

/// A test node with its true class and weighted label distribution (`None` when unlabeled).
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredNode {
    pub node: NodeId,
    pub truth: usize,
    pub distribution: Option<LabelDistribution>,
}

/// Evenly spaced thresholds `step, 2·step, …, 1`.
pub fn tau_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round().max(1.0) as usize;
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn lcm_upto(c: usize) -> Option<u128> {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    (1..=c as u128).try_fold(1u128, |acc, k| (acc / gcd(acc, k)).checked_mul(k))
}

/// Reward matrix at one τ. Entry `(i, j)` is the total reward nodes of true class `i`
/// received for being labeled `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardMatrix {
    classes: usize,
    unit: u128,
    cells: Vec<u128>,
    scored: Vec<u64>,
    unscored: Vec<u64>,
}

impl RewardMatrix {
    pub fn new(classes: usize) -> Result<Self, EvaluationError> {
        let unit = lcm_upto(classes)
            .filter(|u| u.checked_mul(u64::MAX as u128).is_some())
            .ok_or(EvaluationError::TooManyClasses(classes))?;
        Ok(RewardMatrix {
            classes,
            unit,
            cells: vec![0; classes * classes],
            scored: vec![0; classes],
            unscored: vec![0; classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Records one test node; `None` marks an unlabeled node, which earns nothing.
    pub fn record(&mut self, truth: usize, prediction: Option<&Prediction>) {
        match prediction {
            Some(p) if p.k() > 0 => {
                let share = self.unit / p.k() as u128;
                for &j in &p.labels {
                    self.cells[truth * self.classes + j] += share;
                }
                self.scored[truth] += 1;
            }
            _ => self.unscored[truth] += 1,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.classes + j] as f64 / self.unit as f64
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.classes).map(|j| self.entry(i, j)).collect()
    }

    /// Exact row sum in reward units (`unit` per scored node).
    pub fn row_units(&self, i: usize) -> u128 {
        self.cells[i * self.classes..(i + 1) * self.classes].iter().sum()
    }

    /// Reward units per node.
    pub fn unit(&self) -> u128 {
        self.unit
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_units(i) as f64 / self.unit as f64
    }

    /// Test nodes of class `i` that received a nonempty prediction.
    pub fn scored(&self, i: usize) -> u64 {
        self.scored[i]
    }

    pub fn unscored(&self, i: usize) -> u64 {
        self.unscored[i]
    }

    fn trace_units(&self) -> u128 {
        (0..self.classes).map(|i| self.cells[i * self.classes + i]).sum()
    }

    fn total_units(&self) -> u128 {
        self.cells.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        self.trace_units() as f64 / self.unit as f64
    }

    pub fn total(&self) -> f64 {
        self.total_units() as f64 / self.unit as f64
    }

    /// Trace divided by the sum of all entries.
    pub fn trace_over_total(&self) -> f64 {
        self.trace_units() as f64 / self.total_units() as f64
    }

    /// Mean node accuracy over all recorded nodes; unlabeled nodes count as zero.
    pub fn accuracy(&self) -> f64 {
        let nodes: u64 = self.scored.iter().chain(&self.unscored).sum();
        self.trace_units() as f64 / (self.unit * nodes as u128) as f64
    }

    /// Off-diagonal column with the largest reward in row `i`, if any is positive; ties go
    /// to the lowest class index.
    pub fn mode_incorrect(&self, i: usize) -> Option<usize> {
        let mut best: Option<(usize, u128)> = None;
        for j in (0..self.classes).filter(|&j| j != i) {
            let v = self.cells[i * self.classes + j];
            if v > 0 && best.map_or(true, |(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }

    /// CSV with a `true\pred` header row of class names and one row per true class.
    pub fn write_csv<W: Write>(&self, catalog: &ClassCatalog, mut out: W) -> std::io::Result<()> {
        writeln!(out, "true\\pred,{}", catalog.names().join(","))?;
        for i in 0..self.classes {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{}", catalog.name(i), row.join(","))?;
        }
        Ok(())
    }
}

/// Curve point and the reward matrix behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct TauEvaluation {
    pub tau: f64,
    pub accuracy: f64,
    pub rewards: RewardMatrix,
}

/// Mean node accuracy per τ.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyCurve {
    pub points: Vec<TauEvaluation>,
}

impl AccuracyCurve {
    /// Highest-accuracy point; the smallest τ wins ties.
    pub fn peak(&self) -> &TauEvaluation {
        let mut best = &self.points[0];
        for p in &self.points[1..] {
            if p.accuracy > best.accuracy {
                best = p;
            }
        }
        best
    }

    pub fn at(&self, tau: f64) -> Option<&TauEvaluation> {
        self.points.iter().find(|p| (p.tau - tau).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau,accuracy")?;
        for p in &self.points {
            writeln!(out, "{},{}", p.tau, p.accuracy)?;
        }
        Ok(())
    }
}

/// Predictions of every scored node at one τ.
pub fn predictions_at(nodes: &[ScoredNode], tau: f64) -> Result<Vec<Option<Prediction>>, EvaluationError> {
    nodes
        .iter()
        .map(|n| {
            n.distribution
                .as_ref()
                .map(|w| top_k_prediction(w, tau))
                .transpose()
                .map_err(EvaluationError::from)
        })
        .collect()
}

/// Reward matrix of `nodes` at `tau`.
pub fn confusion_reward(nodes: &[ScoredNode], classes: usize, tau: f64) -> Result<RewardMatrix, EvaluationError> {
    let mut m = RewardMatrix::new(classes)?;
    for (node, pred) in nodes.iter().zip(predictions_at(nodes, tau)?) {
        m.record(node.truth, pred.as_ref());
    }
    Ok(m)
}

/// Accuracy at every τ of `grid` (strictly increasing, within (0, 1]).
pub fn accuracy_curve(nodes: &[ScoredNode], classes: usize, grid: &[f64]) -> Result<AccuracyCurve, EvaluationError> {
    if nodes.is_empty() {
        return Err(EvaluationError::EmptyTestSet);
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    if grid.is_empty() || !increasing || grid[0] <= 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(EvaluationError::BadGrid);
    }
    let points = grid
        .iter()
        .map(|&tau| {
            let rewards = confusion_reward(nodes, classes, tau)?;
            Ok(TauEvaluation {
                tau,
                accuracy: rewards.accuracy(),
                rewards,
            })
        })
        .collect::<Result<_, EvaluationError>>()?;
    Ok(AccuracyCurve { points })
}

/// Fraction of nodes whose highest-weight label is the true class (unlabeled nodes miss).
pub fn top1_accuracy(nodes: &[ScoredNode]) -> f64 {
    let hits = nodes
        .iter()
        .filter(|n| n.distribution.as_ref().is_some_and(|w| w.top().0 == n.truth))
        .count();
    hits as f64 / nodes.len() as f64
}

/// `−Σ w ln w / ln C` with `0 ln 0 = 0`, where `C = w.len()`.
pub fn normalized_entropy(w: &[f64]) -> f64 {
    if w.len() < 2 {
        return 0.0;
    }
    let h: f64 = w.iter().filter(|&&x| x > 0.0).map(|&x| x * (1.0 / x).ln()).sum();
    (h / (w.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvaluationError> {
    if x.len() != y.len() {
        return Err(EvaluationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvaluationError::TooFewPoints);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvaluationError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityRecord {
    pub diversity: usize,
    pub top_weight: f64,
    pub entropy: f64,
    pub top_correct: bool,
}

impl DiversityRecord {
    pub fn new(diversity: usize, w: &LabelDistribution, truth: usize) -> Self {
        let (top, top_weight) = w.top();
        DiversityRecord {
            diversity,
            top_weight,
            entropy: normalized_entropy(w.as_slice()),
            top_correct: top == truth,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityBucket {
    pub diversity: usize,
    pub nodes: usize,
    pub top_correct_pct: f64,
    pub mean_top_weight: f64,
    pub mean_entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiversityReport {
    pub buckets: Vec<DiversityBucket>,
    /// Node-wise correlation of diversity with top weight; `None` when undefined.
    pub corr_top_weight: Option<f64>,
    pub corr_entropy: Option<f64>,
    /// The same correlations over bucket means.
    pub bucket_corr_top_weight: Option<f64>,
    pub bucket_corr_entropy: Option<f64>,
}

pub fn diversity_report(records: &[DiversityRecord]) -> DiversityReport {
    let max = records.iter().map(|r| r.diversity).max().unwrap_or(0);
    let buckets: Vec<DiversityBucket> = (1..=max)
        .filter_map(|d| {
            let rs: Vec<&DiversityRecord> = records.iter().filter(|r| r.diversity == d).collect();
            if rs.is_empty() {
                return None;
            }
            let n = rs.len() as f64;
            Some(DiversityBucket {
                diversity: d,
                nodes: rs.len(),
                top_correct_pct: 100.0 * rs.iter().filter(|r| r.top_correct).count() as f64 / n,
                mean_top_weight: rs.iter().map(|r| r.top_weight).sum::<f64>() / n,
                mean_entropy: rs.iter().map(|r| r.entropy).sum::<f64>() / n,
            })
        })
        .collect();
    let div: Vec<f64> = records.iter().map(|r| r.diversity as f64).collect();
    let top: Vec<f64> = records.iter().map(|r| r.top_weight).collect();
    let ent: Vec<f64> = records.iter().map(|r| r.entropy).collect();
    let bdiv: Vec<f64> = buckets.iter().map(|b| b.diversity as f64).collect();
    let btop: Vec<f64> = buckets.iter().map(|b| b.mean_top_weight).collect();
    let bent: Vec<f64> = buckets.iter().map(|b| b.mean_entropy).collect();
    DiversityReport {
        corr_top_weight: pearson(&div, &top).ok(),
        corr_entropy: pearson(&div, &ent).ok(),
        bucket_corr_top_weight: pearson(&bdiv, &btop).ok(),
        bucket_corr_entropy: pearson(&bdiv, &bent).ok(),
        buckets,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl DiversityReport {
    /// Bucket rows, a blank line, then the node-wise and bucket-wise correlations.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "diversity,nodes,top_label_correct_pct,avg_top_weight,avg_entropy")?;
        for b in &self.buckets {
            writeln!(
                out,
                "{},{},{},{},{}",
                b.diversity, b.nodes, b.top_correct_pct, b.mean_top_weight, b.mean_entropy
            )?;
        }
        writeln!(out)?;
        writeln!(out, "correlation,top_weight,entropy")?;
        writeln!(out, "nodes,{},{}", opt(self.corr_top_weight), opt(self.corr_entropy))?;
        writeln!(out, "buckets,{},{}", opt(self.bucket_corr_top_weight), opt(self.bucket_corr_entropy))?;
        Ok(())
    }
}

/// One network's row of the homogeneity table.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityRow {
    pub network: String,
    pub class: usize,
    pub peak_accuracy: f64,
    pub peak_tau: f64,
    /// Off-diagonal label with the largest reward at the peak τ.
    pub mode_incorrect: Option<usize>,
    pub reward_row: Vec<f64>,
}

/// Summarizes a single-class network's curve.
pub fn homogeneity_row(network: &str, class: usize, curve: &AccuracyCurve) -> HomogeneityRow {
    let peak = curve.peak();
    HomogeneityRow {
        network: network.to_string(),
        class,
        peak_accuracy: peak.accuracy,
        peak_tau: peak.tau,
        mode_incorrect: peak.rewards.mode_incorrect(class),
        reward_row: peak.rewards.row(class),
    }
}

pub fn write_homogeneity_csv<W: Write>(rows: &[HomogeneityRow], catalog: &ClassCatalog, mut out: W) -> std::io::Result<()> {
    writeln!(out, "network,peak_accuracy_pct,peak_tau,mode_incorrect,{}", catalog.names().join(","))?;
    for r in rows {
        let mode = r.mode_incorrect.map_or("none", |m| catalog.name(m));
        let rewards: Vec<String> = r.reward_row.iter().map(|x| x.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.network,
            100.0 * r.peak_accuracy,
            r.peak_tau,
            mode,
            rewards.join(",")
        )?;
    }
    Ok(())
}

/// `node,true,k,labels,score` rows; labels are `;`-separated class names.
pub fn write_predictions_csv<W: Write>(
    nodes: &[ScoredNode],
    predictions: &[Option<Prediction>],
    catalog: &ClassCatalog,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "node,true,k,labels,score")?;
    for (n, p) in nodes.iter().zip(predictions) {
        let (k, labels, score) = match p {
            Some(p) => {
                let names: Vec<&str> = p.labels.iter().map(|&j| catalog.name(j)).collect();
                (p.k(), names.join(";"), crate::aggregation::node_accuracy(p, n.truth))
            }
            None => (0, String::new(), 0.0),
        };
        writeln!(out, "{},{},{k},{labels},{score}", n.node, catalog.name(n.truth))?;
    }
    Ok(())
}
