//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.

mod common;

use std::time::{Duration, Instant};

use netlens::aggregation::{node_accuracy, top_k_prediction, LabelDistribution};
use netlens::classifier::{Classifier, UniformRandomClassifier};
use netlens::evaluation::{normalized_entropy, predictions_at};
use netlens::experiment::{evaluate_network, run, ExperimentConfig, ExperimentRun};
use netlens::lens::per_lens_accuracy;
use netlens::embedding::{canonical_form, image_in_order, DEFAULT_SEARCH_BUDGET};
use netlens::testbed::{generate_family, Family};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{grid_min, random_connected_graph, random_instance, random_permutation, slack_sum, vertex_min};

// Pinned tolerances and thresholds.
const INVARIANCE_MIN_FRACTION: f64 = 0.995;
const INVARIANCE_TIME_LIMIT: Duration = Duration::from_secs(30);
const LP_MATCH_TOL: f64 = 1e-6;
const LP_FEASIBILITY_TOL: f64 = 1e-9;
const LP_TIME_LIMIT: Duration = Duration::from_secs(10);
const CHANCE_TOP1: f64 = 2.0 / 3.0;
/// Regression floor from the pilot run (0.8231 with the default configuration, seed 7).
const PINNED_TOP1: f64 = 0.82;
const REPRODUCTION_TIME_LIMIT: Duration = Duration::from_secs(120);
const PURE_STAR_MIN_PEAK: f64 = 0.95;
const RANDOM_CURVE_TOL: f64 = 0.02;
const RANDOM_LENS_TOL_PCT: f64 = 1.0;
const MIN_RANDOM_ASSIGNMENTS: u64 = 100_000;
const ENTROPY_TOL: f64 = 1e-12;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn embedding_invariance(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let families = [Family::Ring, Family::Grid, Family::Wheel, Family::Ladder, Family::Star, Family::Clique];
    let (mut pairs, mut identical, mut graphs) = (0usize, 0usize, 0usize);
    for &n in &[8usize, 16, 32, 64] {
        for k in 0..50 {
            let g = match k % 3 {
                0 => random_connected_graph(&mut rng, n, 2.0 / n as f64),
                1 => random_connected_graph(&mut rng, n, 0.3),
                _ => generate_family(families[k % families.len()], n).expect("family sizes are valid"),
            };
            graphs += 1;
            let reference = image_in_order(&g, &canonical_form(&g, DEFAULT_SEARCH_BUDGET).order).to_pbm();
            for r in 0..20 {
                let h = g.permuted(&random_permutation(&mut rng, n));
                let form = canonical_form(&h, DEFAULT_SEARCH_BUDGET);
                pairs += 1;
                if image_in_order(&h, &form.order).to_pbm() == reference {
                    identical += 1;
                } else {
                    println!("    relabel mismatch: n={n} graph={k} relabel={r} certified={}", form.certified);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let fraction = identical as f64 / pairs as f64;
    report.line(
        1,
        "embedding invariance",
        graphs >= 200 && fraction >= INVARIANCE_MIN_FRACTION && elapsed < INVARIANCE_TIME_LIMIT,
        format!("{identical}/{pairs} relabel pairs identical ({:.2}%) over {graphs} graphs in {elapsed:.1?}", 100.0 * fraction),
    );
}

fn lp_oracle(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_gap, mut worst_violation, mut above_grid) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..50 {
        let problem = random_instance(&mut rng, 3, 3, 6);
        let solution = problem.solve().expect("weight LP solves");
        let p = solution.weights.as_slice();
        let oracle = vertex_min(&problem);
        worst_gap = worst_gap.max((solution.objective - oracle).abs());
        if solution.objective > grid_min(&problem, 100) + LP_MATCH_TOL {
            above_grid += 1;
        }
        // Constraints of the slack program at the returned point.
        let mut violation = (p.iter().sum::<f64>() - 1.0).abs();
        violation = p.iter().fold(violation, |v, &x| v.max(-x));
        let (l, c) = (problem.lenses, problem.classes);
        for (node, &xi) in problem.nodes.iter().zip(&solution.slacks) {
            violation = violation.max(-xi);
            for j in (0..c).filter(|&j| j != node.truth) {
                let lhs: f64 = (0..l).map(|i| p[i] * (node.tally[i * c + j] - node.tally[i * c + node.truth])).sum();
                violation = violation.max(lhs - xi);
            }
        }
        worst_violation = worst_violation.max(violation);
    }
    let elapsed = start.elapsed();
    report.line(
        2,
        "LP oracle equivalence",
        worst_gap <= LP_MATCH_TOL && worst_violation <= LP_FEASIBILITY_TOL && above_grid == 0 && elapsed < LP_TIME_LIMIT,
        format!(
            "50 instances, max |solver - vertex oracle| = {worst_gap:.2e}, {above_grid} above the 0.01 grid minimum, max violation {worst_violation:.2e}, {elapsed:.1?}"
        ),
    );
}

fn lp_dominance(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0;
    for _ in 0..20 {
        let problem = random_instance(&mut rng, 4, 4, 12);
        let solution = problem.solve().expect("weight LP solves");
        for i in 0..problem.lenses {
            let mut e = vec![0.0; problem.lenses];
            e[i] = 1.0;
            if solution.objective > slack_sum(&problem, &e) {
                violations += 1;
            }
        }
    }
    report.line(
        3,
        "LP dominance over one-hot weights",
        violations == 0,
        format!("20 instances, {violations} one-hot vectors beat the solver"),
    );
}

fn worked_example(report: &mut Report) {
    let w = LabelDistribution::from_scores(&[0.5, 0.3, 0.2]).expect("nonzero");
    let pred = top_k_prediction(&w, 0.8).expect("valid threshold");
    let acc = node_accuracy(&pred, 1);
    report.line(
        4,
        "trimmed top-k worked example",
        pred.labels == vec![0, 1] && acc == 0.5,
        format!("k = {}, labels {:?}, accuracy for second label {acc}", pred.k(), pred.labels),
    );
}

fn reward_conservation(report: &mut Report, run: &ExperimentRun) {
    let eval = &run.evaluation;
    let classes = run.catalog.len();
    let mut ok = true;
    let mut worst_mean_gap = 0.0f64;
    let mut unscored_nodes = 0;
    for point in &eval.curve.points {
        let m = &point.rewards;
        for i in 0..classes {
            ok &= m.row_units(i) == m.unit() * m.scored(i) as u128;
        }
        let unscored: u64 = (0..classes).map(|i| m.unscored(i)).sum();
        unscored_nodes = unscored_nodes.max(unscored);
        // Unlabeled nodes score zero, so the identity holds over the labeled nodes only.
        ok &= unscored > 0 || m.trace_over_total() == point.accuracy;
        // Independent reading of the curve as a mean of per-node accuracies.
        let preds = predictions_at(&eval.scored, point.tau).expect("valid τ");
        let mean = eval
            .scored
            .iter()
            .zip(&preds)
            .map(|(n, p)| p.as_ref().map_or(0.0, |p| node_accuracy(p, n.truth)))
            .sum::<f64>()
            / eval.scored.len() as f64;
        worst_mean_gap = worst_mean_gap.max((mean - point.accuracy).abs());
    }
    ok &= worst_mean_gap <= 1e-12;
    report.line(
        5,
        "reward conservation",
        ok,
        format!(
            "{} τ values: row sums exact, trace/total equal to curve; mean-of-nodes gap {worst_mean_gap:.1e}; unlabeled test nodes {unscored_nodes}",
            eval.curve.points.len()
        ),
    );
}

fn reproduction(report: &mut Report, run: &ExperimentRun, elapsed: Duration) {
    let top1 = run.evaluation.top1;
    report.line(
        6,
        "star/wheel/ladder desk-scale reproduction",
        top1 > CHANCE_TOP1 && top1 >= PINNED_TOP1 && elapsed < REPRODUCTION_TIME_LIMIT,
        format!(
            "{} nodes, {} test nodes, top-1 {top1:.4} (pinned >= {PINNED_TOP1}, chance x2 = {CHANCE_TOP1:.3}), {elapsed:.1?}",
            run.network.node_count(),
            run.evaluation.test.len()
        ),
    );
}

fn diversity_signs(report: &mut Report, run: &ExperimentRun) {
    let d = &run.diversity;
    let (top, ent) = (d.corr_top_weight, d.corr_entropy);
    report.line(
        7,
        "diversity correlation signs",
        top.is_some_and(|r| r < 0.0) && ent.is_some_and(|r| r > 0.0),
        format!("corr(diversity, top weight) = {top:?}, corr(diversity, entropy) = {ent:?}"),
    );
}

fn homogeneity(report: &mut Report, run: &ExperimentRun, config: &ExperimentConfig) {
    let star = &run.homogeneity[0];
    let random = UniformRandomClassifier::new(run.catalog.clone(), 808);
    let eval = evaluate_network(config, &run.network, &random, 99).expect("random pipeline runs");
    let assignments = eval.table.total();
    let chance = 1.0 / random.catalog().len() as f64;
    let low = eval.curve.points[0].clone();
    let lens = per_lens_accuracy(&eval.table, &run.network.truth);
    let lens_ok = lens
        .iter()
        .all(|a| a.pooled.is_some_and(|p| (p - 100.0 * chance).abs() <= RANDOM_LENS_TOL_PCT));
    let pooled: Vec<String> = lens.iter().map(|a| format!("{:.2}", a.pooled.unwrap_or(f64::NAN))).collect();
    report.line(
        8,
        "homogeneity sanity",
        star.network == "star"
            && star.peak_accuracy >= PURE_STAR_MIN_PEAK
            && assignments >= MIN_RANDOM_ASSIGNMENTS
            && (low.accuracy - chance).abs() <= RANDOM_CURVE_TOL
            && lens_ok,
        format!(
            "pure star peak {:.4}; random classifier curve at τ={} is {:.4} vs 1/C = {chance:.4} over {assignments} assignments, per-lens pooled % [{}]",
            star.peak_accuracy,
            low.tau,
            low.accuracy,
            pooled.join(", ")
        ),
    );
}

fn determinism(report: &mut Report, one: &ExperimentRun, config: &ExperimentConfig) {
    let eight = run(&ExperimentConfig { workers: 8, ..config.clone() }).expect("pipeline runs");
    let a = one.artifacts().expect("artifacts");
    let b = eight.artifacts().expect("artifacts");
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    report.line(
        9,
        "determinism across worker counts",
        a.len() == b.len() && differing.is_empty(),
        format!("{} artifacts compared for 1 vs 8 workers, differing: {differing:?}", a.len()),
    );
}

fn entropy_closed_forms(report: &mut Report) {
    let uniform = normalized_entropy(&[1.0 / 9.0; 9]);
    let mut one_hot = [0.0; 9];
    one_hot[3] = 1.0;
    let one_hot = normalized_entropy(&one_hot);
    let mut half = [0.0; 9];
    half[0] = 0.5;
    half[1] = 0.5;
    let half = normalized_entropy(&half);
    let expected = 2f64.ln() / 9f64.ln();
    report.line(
        10,
        "entropy closed forms",
        (uniform - 1.0).abs() <= ENTROPY_TOL && one_hot.abs() <= ENTROPY_TOL && (half - expected).abs() <= ENTROPY_TOL,
        format!("uniform {uniform}, one-hot {one_hot}, two-way split {half} (ln2/ln9 = {expected})"),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    embedding_invariance(&mut report);
    lp_oracle(&mut report);
    lp_dominance(&mut report);
    worked_example(&mut report);

    let config = ExperimentConfig { workers: 1, ..ExperimentConfig::default() };
    let start = Instant::now();
    let one = run(&config).expect("pipeline runs");
    let elapsed = start.elapsed();
    reward_conservation(&mut report, &one);
    reproduction(&mut report, &one, elapsed);
    diversity_signs(&mut report, &one);
    homogeneity(&mut report, &one, &config);
    determinism(&mut report, &one, &config);
    entropy_closed_forms(&mut report);

    if report.failures > 0 {
        println!("{} criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
