//! End-to-end synthetic run: generated family parts are spliced into a heterogeneous
//! network, per-size centroid models are trained on single-class networks, lenses label every
//! node, lens weights are learned on a training split and the held-out nodes are scored.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::aggregation::{node_distribution, solve_weights_lp, split_nodes, AggregationError, LpOptions, SlackSolution};
use crate::classifier::{CentroidEnsemble, CentroidModel, ClassCatalog, Classifier, ClassifierError};
use crate::embedding::embed_image;
use crate::evaluation::{
    accuracy_curve, diversity_report, homogeneity_row, predictions_at, tau_grid, top1_accuracy,
    write_homogeneity_csv, write_predictions_csv, AccuracyCurve, DiversityRecord, DiversityReport,
    EvaluationError, HomogeneityRow, ScoredNode,
};
use crate::lens::{run_lenses, LensConfig, LensError, TallyTable};
use crate::testbed::{family_parts, node_diversity, sample_walks, splice, Family, HeterogeneousNetwork, TestbedError};
use crate::walk::derive_seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Testbed(#[from] TestbedError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Lens(#[from] LensError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("no training walks of size {0} could be drawn for class {1}")]
    NoTrainingWalks(usize, String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub sizes: Vec<usize>,
    /// Parts per class per size.
    pub parts_per_size: usize,
    pub splice_edges: usize,
    /// Training walks per class per lens size.
    pub training_walks: usize,
    pub train_fraction: f64,
    pub tau_step: f64,
    pub max_training_nodes: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            families: vec![Family::Star, Family::Wheel, Family::Ladder],
            sizes: vec![8, 16, 32, 64],
            parts_per_size: 30,
            splice_edges: 10,
            training_walks: 100,
            train_fraction: 0.8,
            tau_step: 0.05,
            max_training_nodes: 5_000,
            seed: 7,
            workers: 0,
        }
    }
}

// Stream tags for derive_seed.
const SPLICE: u64 = 1;
const TRAIN_NET: u64 = 2;
const TRAIN_WALKS: u64 = 3;
const LENSES: u64 = 4;
const SPLIT: u64 = 5;
const LP: u64 = 6;
const PURE_NET: u64 = 7;

impl ExperimentConfig {
    pub fn catalog(&self) -> Result<ClassCatalog, ClassifierError> {
        ClassCatalog::new(self.families.iter().map(|f| f.name()))
    }

    fn stream(&self, tag: u64, extra: &[u64]) -> u64 {
        let mut path = vec![tag];
        path.extend_from_slice(extra);
        derive_seed(self.seed, &path)
    }

    fn lens_config(&self, tag: u64) -> LensConfig {
        let mut c = LensConfig::new(self.sizes.clone(), self.stream(LENSES, &[tag]));
        c.workers = self.workers;
        c
    }

    fn lp_options(&self, tag: u64) -> LpOptions {
        LpOptions {
            max_training_nodes: self.max_training_nodes,
            row_normalize: false,
            seed: self.stream(LP, &[tag]),
        }
    }
}

/// Single-class spliced network of `family`, built like the heterogeneous testbed.
pub fn pure_network(config: &ExperimentConfig, family: Family, class: usize, seed: u64) -> Result<HeterogeneousNetwork, TestbedError> {
    let parts = family_parts(family, class, config.parts_per_size, &config.sizes)?;
    splice(&parts, config.splice_edges, seed)
}

/// Trains one centroid model per lens size on walks drawn from a single-class network per
/// class.
pub fn train_models(config: &ExperimentConfig, catalog: &ClassCatalog) -> Result<CentroidEnsemble, ExperimentError> {
    let mut samples: Vec<Vec<_>> = vec![Vec::new(); config.sizes.len()];
    for (class, &family) in config.families.iter().enumerate() {
        let net = pure_network(config, family, class, config.stream(TRAIN_NET, &[class as u64]))?;
        for (si, &size) in config.sizes.iter().enumerate() {
            let seed = config.stream(TRAIN_WALKS, &[class as u64, size as u64]);
            let walks = sample_walks(&net.graph, size, config.training_walks, seed);
            if walks.is_empty() {
                return Err(ExperimentError::NoTrainingWalks(size, family.name().to_string()));
            }
            for w in walks {
                let sub = net.graph.induced_subgraph(&w.members).expect("walk members are valid");
                samples[si].push((embed_image(&sub), class));
            }
        }
    }
    let models = config
        .sizes
        .iter()
        .zip(&samples)
        .map(|(&size, s)| CentroidModel::train(catalog, s, size))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CentroidEnsemble::new(models)?)
}

/// Lens run, weights and scores on one network.
#[derive(Clone, Debug)]
pub struct NetworkEvaluation {
    pub table: TallyTable,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub weights: SlackSolution,
    pub scored: Vec<ScoredNode>,
    pub curve: AccuracyCurve,
    pub top1: f64,
}

/// Runs lenses over `net`, learns weights on a training split and scores the test split.
/// `tag` separates the seed streams of different networks in one experiment.
pub fn evaluate_network(
    config: &ExperimentConfig,
    net: &HeterogeneousNetwork,
    classifier: &dyn Classifier,
    tag: u64,
) -> Result<NetworkEvaluation, ExperimentError> {
    let classes = classifier.catalog().len();
    let table = run_lenses(&net.graph, classifier, &config.lens_config(tag))?;
    let (train, test) = split_nodes(net.node_count(), config.train_fraction, config.stream(SPLIT, &[tag]))?;
    let weights = solve_weights_lp(&table, &net.truth, &train, &config.lp_options(tag))?;
    let scored = test
        .iter()
        .map(|&v| {
            Ok(ScoredNode {
                node: v,
                truth: net.truth[v],
                distribution: node_distribution(table.node(v), &weights.weights, false)?,
            })
        })
        .collect::<Result<Vec<_>, AggregationError>>()?;
    let curve = accuracy_curve(&scored, classes, &tau_grid(config.tau_step))?;
    let top1 = top1_accuracy(&scored);
    Ok(NetworkEvaluation {
        table,
        train,
        test,
        weights,
        scored,
        curve,
        top1,
    })
}

/// Everything produced by [`run`].
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub catalog: ClassCatalog,
    pub models: CentroidEnsemble,
    pub network: HeterogeneousNetwork,
    pub evaluation: NetworkEvaluation,
    pub diversity: DiversityReport,
    pub homogeneity: Vec<HomogeneityRow>,
}

/// Diversity records of the scored nodes that received a label distribution.
pub fn diversity_records(net: &HeterogeneousNetwork, scored: &[ScoredNode]) -> Vec<DiversityRecord> {
    let diversity = node_diversity(net);
    scored
        .iter()
        .filter_map(|n| n.distribution.as_ref().map(|w| DiversityRecord::new(diversity[n.node], w, n.truth)))
        .collect()
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentRun, ExperimentError> {
    let catalog = config.catalog()?;
    let models = train_models(config, &catalog)?;
    let parts = config
        .families
        .iter()
        .enumerate()
        .map(|(class, &f)| family_parts(f, class, config.parts_per_size, &config.sizes))
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    let network = splice(&parts, config.splice_edges, config.stream(SPLICE, &[]))?;
    let evaluation = evaluate_network(config, &network, &models, 0)?;
    let diversity = diversity_report(&diversity_records(&network, &evaluation.scored));

    let mut homogeneity = Vec::new();
    for (class, &family) in config.families.iter().enumerate() {
        let tag = 1 + class as u64;
        let pure = pure_network(config, family, class, config.stream(PURE_NET, &[class as u64]))?;
        let eval = evaluate_network(config, &pure, &models, tag)?;
        homogeneity.push(homogeneity_row(family.name(), class, &eval.curve));
    }

    Ok(ExperimentRun {
        catalog,
        models,
        network,
        evaluation,
        diversity,
        homogeneity,
    })
}

impl ExperimentRun {
    /// Named CSV and text artifacts. The reward matrix and predictions are taken at the peak τ.
    pub fn artifacts(&self) -> Result<Vec<(String, Vec<u8>)>, ExperimentError> {
        let eval = &self.evaluation;
        let peak = eval.curve.peak();
        let mut files = Vec::new();
        let mut add = |name: &str, f: &mut dyn FnMut(&mut Vec<u8>) -> std::io::Result<()>| -> std::io::Result<()> {
            let mut buf = Vec::new();
            f(&mut buf)?;
            files.push((name.to_string(), buf));
            Ok(())
        };
        add("edges.txt", &mut |b| self.network.graph.write_store(b))?;
        add("truth.tsv", &mut |b| self.network.write_truth(&self.catalog, b))?;
        add("tally.csv", &mut |b| eval.table.write_csv(&self.catalog, b))?;
        let labels: Vec<String> = (0..eval.table.rows()).map(|r| eval.table.row_label(r)).collect();
        let comment = format!("lp objective={}", eval.weights.objective);
        add("weights.tsv", &mut |b| eval.weights.weights.write(&labels, &comment, b))?;
        add("curve.csv", &mut |b| eval.curve.write_csv(b))?;
        add("reward.csv", &mut |b| peak.rewards.write_csv(&self.catalog, b))?;
        add("diversity.csv", &mut |b| self.diversity.write_csv(b))?;
        add("homogeneity.csv", &mut |b| write_homogeneity_csv(&self.homogeneity, &self.catalog, b))?;
        let preds = predictions_at(&eval.scored, peak.tau)?;
        add("predictions.csv", &mut |b| write_predictions_csv(&eval.scored, &preds, &self.catalog, b))?;
        add("summary.txt", &mut |b| {
            writeln!(b, "nodes={}", self.network.node_count())?;
            writeln!(b, "test_nodes={}", eval.test.len())?;
            writeln!(b, "top1_accuracy={}", eval.top1)?;
            writeln!(b, "peak_accuracy={}", peak.accuracy)?;
            writeln!(b, "peak_tau={}", peak.tau)?;
            writeln!(b, "walk_failures={}", eval.table.failures.len())?;
            writeln!(b, "uncertified_embeddings={}", eval.table.uncertified_embeddings)
        })?;
        for m in self.models.models() {
            let text = m.to_text();
            add(&format!("model_{}.nlm", m.lens_size()), &mut |b| b.write_all(text.as_bytes()))?;
        }
        Ok(files)
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in self.artifacts()? {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}
