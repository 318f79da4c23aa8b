use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netlens::aggregation::{naive_weights, node_distribution, solve_weights_lp, split_nodes, LpOptions, WeightVector};
use netlens::classifier::{CentroidEnsemble, CentroidModel, ClassCatalog, Classifier, UniformRandomClassifier};
use netlens::embedding::{embed_image, BitImage};
use netlens::evaluation::{
    accuracy_curve, diversity_report, homogeneity_row, predictions_at, tau_grid, top1_accuracy, write_homogeneity_csv,
    write_predictions_csv, ScoredNode,
};
use netlens::experiment::{diversity_records, evaluate_network, pure_network, run, ExperimentConfig};
use netlens::graph::parse_edge_list;
use netlens::lens::{row_accuracy, run_lenses, LensConfig, TallyTable};
use netlens::testbed::{extract_corpus, family_parts, read_truth, splice as splice_parts, Family, HeterogeneousNetwork, LabeledSubgraph};
use netlens::{read_graph_store, Graph};

use crate::config::{check_fraction, check_sizes, usage, Settings};
use crate::{CorpusArgs, DemoArgs, EvaluateArgs, HomogeneityArgs, IngestArgs, LensArgs, SpliceArgs, TrainArgs, WeightsArgs};

const DEFAULT_SIZES: &[usize] = &[8, 16, 32, 64];

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn read_graph(path: &Path) -> Result<Graph> {
    read_graph_store(open(path)?).with_context(|| format!("reading graph {}", path.display()))
}

fn sizes(s: &Settings, flag: &Option<String>) -> Result<Vec<usize>> {
    let sizes = s.list("sizes", flag)?.unwrap_or_else(|| DEFAULT_SIZES.to_vec());
    check_sizes(&sizes)?;
    Ok(sizes)
}

fn families(s: &Settings, flag: &Option<String>) -> Result<Vec<Family>> {
    let names: Vec<String> = s.list("classes", flag)?.unwrap_or_else(|| vec!["star".into(), "wheel".into(), "ladder".into()]);
    names
        .iter()
        .map(|n| n.parse::<Family>().or_else(|_| usage(format!("unknown family {n:?}"))))
        .collect()
}

fn train_fraction(s: &Settings, flag: &Option<String>) -> Result<f64> {
    let f = s.or("train-fraction", flag, 0.8)?;
    check_fraction(f)?;
    Ok(f)
}

pub fn ingest(s: &Settings, a: &IngestArgs) -> Result<()> {
    let input: PathBuf = s.require("input", &a.input)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let parsed = parse_edge_list(open(&input)?).with_context(|| format!("parsing {}", input.display()))?;
    let g = &parsed.graph;
    let mut w = create(&out)?;
    g.write_store(&mut w)?;
    w.flush()?;
    let ids_path = PathBuf::from(format!("{}.ids", out.display()));
    let mut ids = create(&ids_path)?;
    writeln!(ids, "node\toriginal_id")?;
    for v in 0..g.node_count() {
        writeln!(ids, "{v}\t{}", g.original_id(v).unwrap_or(v as u64))?;
    }
    ids.flush()?;
    println!(
        "nodes={} edges={} self_loops={} duplicates={}",
        g.node_count(),
        g.edge_count(),
        parsed.stats.self_loops,
        parsed.stats.duplicates
    );
    Ok(())
}

pub fn corpus(s: &Settings, a: &CorpusArgs) -> Result<()> {
    let seed: u64 = s.require("seed", &a.seed)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let sizes = sizes(s, &a.sizes)?;
    let count: usize = s.or("count", &a.count, 30)?;
    let (graph, default_class) = match (s.raw("graph", &a.graph), s.raw("family", &a.family)) {
        (Some(path), None) => (read_graph(Path::new(&path))?, None),
        (None, Some(name)) => {
            let family: Family = name.parse().or_else(|_| usage(format!("unknown family {name:?}")))?;
            let config = ExperimentConfig {
                sizes: sizes.clone(),
                parts_per_size: s.or("parts", &a.parts, 30)?,
                splice_edges: s.or("splice-edges", &a.splice_edges, 10)?,
                ..ExperimentConfig::default()
            };
            let net = pure_network(&config, family, 0, netlens::walk::derive_seed(seed, &[0]))?;
            (net.graph, Some(family.name().to_string()))
        }
        _ => return usage("give exactly one of --graph and --family"),
    };
    let class: String = match s.raw("class", &a.class).or(default_class) {
        Some(c) => c,
        None => return usage("missing --class"),
    };
    if class.is_empty() || class.contains(['/', '\\']) || class.chars().any(char::is_whitespace) {
        return usage(format!("class name {class:?} cannot be used as a directory"));
    }
    let extraction = extract_corpus(&graph, 0, count, &sizes, netlens::walk::derive_seed(seed, &[1]));
    let mut written = vec![0usize; sizes.len()];
    for sub in &extraction.subgraphs {
        let si = sizes.iter().position(|&z| z == sub.size_class).expect("extracted sizes were requested");
        let path = out.join(&class).join(sub.size_class.to_string()).join(format!("{}.pbm", written[si]));
        written[si] += 1;
        let mut w = create(&path)?;
        w.write_all(embed_image(&sub.graph).to_pbm().as_bytes())?;
        w.flush()?;
    }
    for (size, requested, achieved) in &extraction.shortfall {
        eprintln!("warning: size {size}: extracted {achieved} of {requested} requested subgraphs");
    }
    println!("class={class} subgraphs={}", extraction.subgraphs.len());
    Ok(())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    Ok(entries)
}

/// PBM images of a `<class>/<size>/<k>.pbm` corpus, in sorted path order.
fn read_corpus(dir: &Path, catalog: &ClassCatalog) -> Result<Vec<(usize, usize, BitImage)>> {
    let mut out = Vec::new();
    for class_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let name = class_dir.file_name().unwrap_or_default().to_string_lossy().to_string();
        let Ok(class) = catalog.index_of(&name) else {
            continue;
        };
        for size_dir in sorted_entries(&class_dir)?.into_iter().filter(|p| p.is_dir()) {
            let size_name = size_dir.file_name().unwrap_or_default().to_string_lossy().to_string();
            let Ok(size) = size_name.parse::<usize>() else {
                bail!("{}: size directories must be numbers", size_dir.display());
            };
            for file in sorted_entries(&size_dir)?.into_iter().filter(|p| p.extension().is_some_and(|e| e == "pbm")) {
                let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
                let image = BitImage::from_pbm(&text).with_context(|| format!("parsing {}", file.display()))?;
                if image.side() != size {
                    bail!("{}: image is {}x{}, directory says {size}", file.display(), image.side(), image.side());
                }
                out.push((class, size, image));
            }
        }
    }
    Ok(out)
}

fn corpus_catalog(s: &Settings, flag: &Option<String>, corpus: &Path) -> Result<ClassCatalog> {
    let names: Vec<String> = match s.list("classes", flag)? {
        Some(n) => n,
        None => sorted_entries(corpus)?
            .into_iter()
            .filter(|p| p.is_dir())
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().to_string())
            .collect(),
    };
    ClassCatalog::new(names).or_else(|e| usage(e.to_string()))
}

pub fn train(s: &Settings, a: &TrainArgs) -> Result<()> {
    let corpus: PathBuf = s.require("corpus", &a.corpus)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let catalog = corpus_catalog(s, &a.classes, &corpus)?;
    let images = read_corpus(&corpus, &catalog)?;
    let mut found: Vec<usize> = images.iter().map(|(_, size, _)| *size).collect();
    found.sort_unstable();
    found.dedup();
    if found.is_empty() {
        bail!("no PBM images under {}", corpus.display());
    }
    fs::create_dir_all(&out)?;
    for size in found {
        let samples: Vec<(BitImage, usize)> = images
            .iter()
            .filter(|(_, z, _)| *z == size)
            .map(|(c, _, img)| (img.clone(), *c))
            .collect();
        let model = CentroidModel::train(&catalog, &samples, size)?;
        fs::write(out.join(format!("model_{size}.nlm")), model.to_text())?;
        println!("size={size} samples={}", samples.len());
    }
    Ok(())
}

fn read_models(dir: &Path) -> Result<CentroidEnsemble> {
    let mut models = Vec::new();
    for path in sorted_entries(dir)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
        if name.starts_with("model_") && name.ends_with(".nlm") {
            let text = fs::read_to_string(&path)?;
            models.push(CentroidModel::from_text(&text).with_context(|| format!("reading {}", path.display()))?);
        }
    }
    if models.is_empty() {
        bail!("no model_<size>.nlm files in {}", dir.display());
    }
    Ok(CentroidEnsemble::new(models)?)
}

fn write_network(net: &HeterogeneousNetwork, catalog: &ClassCatalog, out: &Path) -> Result<()> {
    let mut w = create(&out.join("edges.txt"))?;
    net.graph.write_store(&mut w)?;
    w.flush()?;
    let mut w = create(&out.join("truth.tsv"))?;
    net.write_truth(catalog, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn splice(s: &Settings, a: &SpliceArgs) -> Result<()> {
    let seed: u64 = s.require("seed", &a.seed)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let edges: usize = s.or("splice-edges", &a.splice_edges, 10)?;
    let (catalog, parts) = match s.raw("corpus", &a.corpus) {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let catalog = corpus_catalog(s, &a.classes, &dir)?;
            let parts: Vec<LabeledSubgraph> = read_corpus(&dir, &catalog)?
                .into_iter()
                .enumerate()
                .map(|(k, (class, size, image))| LabeledSubgraph {
                    graph: image.to_graph(),
                    class,
                    source_id: k,
                    size_class: size,
                })
                .collect();
            (catalog, parts)
        }
        None => {
            let fams = families(s, &a.classes)?;
            let sizes = sizes(s, &a.sizes)?;
            let count: usize = s.or("parts", &a.parts, 30)?;
            let catalog = ClassCatalog::new(fams.iter().map(|f| f.name())).or_else(|e| usage(e.to_string()))?;
            let mut parts = Vec::new();
            for (class, &f) in fams.iter().enumerate() {
                parts.extend(family_parts(f, class, count, &sizes)?);
            }
            (catalog, parts)
        }
    };
    let net = splice_parts(&parts, edges, seed)?;
    write_network(&net, &catalog, &out)?;
    println!(
        "nodes={} edges={} parts={} splice_edges={} bridge_edges={}",
        net.node_count(),
        net.graph.edge_count(),
        parts.len(),
        net.splice_edges.len(),
        net.bridge_edges.len()
    );
    Ok(())
}

pub fn lens(s: &Settings, a: &LensArgs) -> Result<()> {
    let seed: u64 = s.require("seed", &a.seed)?;
    let graph_path: PathBuf = s.require("graph", &a.graph)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let graph = read_graph(&graph_path)?;
    let classifier: Box<dyn Classifier> = match (s.raw("models", &a.models), s.list::<String>("random", &a.random)?) {
        (Some(dir), None) => Box::new(read_models(Path::new(&dir))?),
        (None, Some(names)) => {
            let catalog = ClassCatalog::new(names).or_else(|e| usage(e.to_string()))?;
            Box::new(UniformRandomClassifier::new(catalog, seed))
        }
        _ => return usage("give exactly one of --models and --random"),
    };
    let mut config = LensConfig::new(sizes(s, &a.sizes)?, seed);
    config.walks_per_node = s.or("walks-per-node", &a.walks_per_node, 1)?;
    config.workers = s.or("workers", &a.workers, 0)?;
    let table = run_lenses(&graph, classifier.as_ref(), &config)?;
    let mut w = create(&out)?;
    table.write_csv(classifier.catalog(), &mut w)?;
    w.flush()?;
    println!(
        "nodes={} labels={} walk_failures={} uncertified_embeddings={}",
        table.node_count(),
        table.total(),
        table.failures.len(),
        table.uncertified_embeddings
    );
    Ok(())
}

fn read_tally(path: &Path) -> Result<(TallyTable, ClassCatalog)> {
    TallyTable::read_csv(open(path)?).with_context(|| format!("reading tally {}", path.display()))
}

fn read_truth_for(path: &Path, catalog: &ClassCatalog, nodes: usize) -> Result<Vec<usize>> {
    let (truth, _) = read_truth(catalog, open(path)?).with_context(|| format!("reading truth {}", path.display()))?;
    if truth.len() != nodes {
        bail!("truth lists {} nodes, tally has {nodes}", truth.len());
    }
    Ok(truth)
}

fn row_labels(table: &TallyTable) -> Vec<String> {
    (0..table.rows()).map(|r| table.row_label(r)).collect()
}

pub fn weights(s: &Settings, a: &WeightsArgs) -> Result<()> {
    let out: PathBuf = s.require("out", &a.out)?;
    let method: String = s.or("method", &a.method, "lp".to_string())?;
    let (labels, weights, comment) = match method.as_str() {
        "naive" => match s.list::<f64>("accuracies", &a.accuracies)? {
            Some(acc) => {
                let sizes = sizes(s, &a.sizes)?;
                let labels: Vec<String> = if acc.len() == 2 * sizes.len() {
                    sizes.iter().flat_map(|z| [format!("{z}:start"), format!("{z}:member")]).collect()
                } else {
                    (0..acc.len()).map(|i| format!("row{i}")).collect()
                };
                (labels, naive_weights(&acc)?, "naive weights from given accuracies".to_string())
            }
            None => {
                let (table, truth, train) = training_inputs(s, a)?;
                let acc: Vec<f64> = row_accuracy(&table, &truth, Some(&train)).iter().map(|x| x.unwrap_or(0.0)).collect();
                (row_labels(&table), naive_weights(&acc)?, "naive weights from training-row accuracies".to_string())
            }
        },
        "lp" => {
            let (table, truth, train) = training_inputs(s, a)?;
            let options = LpOptions {
                max_training_nodes: s.or("max-training-nodes", &a.max_training_nodes, LpOptions::default().max_training_nodes)?,
                row_normalize: false,
                seed: s.require("seed", &a.seed)?,
            };
            let solution = solve_weights_lp(&table, &truth, &train, &options)?;
            (row_labels(&table), solution.weights, format!("lp objective={}", solution.objective))
        }
        other => return usage(format!("unknown method {other:?}, expected lp or naive")),
    };
    let mut w = create(&out)?;
    weights.write(&labels, &comment, &mut w)?;
    w.flush()?;
    for (label, p) in labels.iter().zip(weights.as_slice()) {
        println!("{label}\t{p}");
    }
    Ok(())
}

fn training_inputs(s: &Settings, a: &WeightsArgs) -> Result<(TallyTable, Vec<usize>, Vec<usize>)> {
    let seed: u64 = s.require("seed", &a.seed)?;
    let (table, catalog) = read_tally(&s.require::<PathBuf>("tally", &a.tally)?)?;
    let truth = read_truth_for(&s.require::<PathBuf>("truth", &a.truth)?, &catalog, table.node_count())?;
    let (train, _) = split_nodes(table.node_count(), train_fraction(s, &a.train_fraction)?, seed)?;
    Ok((table, truth, train))
}

pub fn evaluate(s: &Settings, a: &EvaluateArgs) -> Result<()> {
    let seed: u64 = s.require("seed", &a.seed)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let (table, catalog) = read_tally(&s.require::<PathBuf>("tally", &a.tally)?)?;
    let truth_path: PathBuf = s.require("truth", &a.truth)?;
    let truth = read_truth_for(&truth_path, &catalog, table.node_count())?;
    let weights_path: PathBuf = s.require("weights", &a.weights)?;
    let (_, weights) = WeightVector::read(open(&weights_path)?).with_context(|| format!("reading {}", weights_path.display()))?;
    let (_, test) = split_nodes(table.node_count(), train_fraction(s, &a.train_fraction)?, seed)?;
    let scored = test
        .iter()
        .map(|&v| {
            Ok(ScoredNode {
                node: v,
                truth: truth[v],
                distribution: node_distribution(table.node(v), &weights, false)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let step: f64 = s.or("tau-step", &a.tau_step, 0.05)?;
    if !(step > 0.0 && step <= 1.0) {
        return usage(format!("tau-step must lie in (0, 1], got {step}"));
    }
    let curve = accuracy_curve(&scored, catalog.len(), &tau_grid(step))?;
    let tau: f64 = s.or("tau", &a.tau, curve.peak().tau)?;
    let point = match curve.at(tau) {
        Some(p) => p,
        None => return usage(format!("tau {tau} is not on the grid of step {step}")),
    };
    fs::create_dir_all(&out)?;
    let mut w = create(&out.join("curve.csv"))?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&out.join("reward.csv"))?;
    point.rewards.write_csv(&catalog, &mut w)?;
    w.flush()?;
    let preds = predictions_at(&scored, point.tau)?;
    let mut w = create(&out.join("predictions.csv"))?;
    write_predictions_csv(&scored, &preds, &catalog, &mut w)?;
    w.flush()?;
    if let Some(graph_path) = s.raw("graph", &a.graph) {
        let graph = read_graph(Path::new(&graph_path))?;
        if graph.node_count() != truth.len() {
            bail!("graph has {} nodes, truth lists {}", graph.node_count(), truth.len());
        }
        let net = HeterogeneousNetwork {
            provenance: vec![0; truth.len()],
            graph,
            truth: truth.clone(),
            splice_edges: Vec::new(),
            bridge_edges: Vec::new(),
        };
        let report = diversity_report(&diversity_records(&net, &scored));
        let mut w = create(&out.join("diversity.csv"))?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    let peak = curve.peak();
    println!(
        "test_nodes={} top1_accuracy={} peak_accuracy={} peak_tau={}",
        scored.len(),
        top1_accuracy(&scored),
        peak.accuracy,
        peak.tau
    );
    Ok(())
}

pub fn homogeneity(s: &Settings, a: &HomogeneityArgs) -> Result<()> {
    let models = read_models(&s.require::<PathBuf>("models", &a.models)?)?;
    let out: PathBuf = s.require("out", &a.out)?;
    let config = ExperimentConfig {
        families: families(s, &a.classes)?,
        sizes: sizes(s, &a.sizes)?,
        parts_per_size: s.or("parts", &a.parts, 30)?,
        splice_edges: s.or("splice-edges", &a.splice_edges, 10)?,
        train_fraction: train_fraction(s, &a.train_fraction)?,
        tau_step: s.or("tau-step", &a.tau_step, 0.05)?,
        seed: s.require("seed", &a.seed)?,
        workers: s.or("workers", &a.workers, 0)?,
        ..ExperimentConfig::default()
    };
    let catalog = models.catalog().clone();
    let mut rows = Vec::new();
    for (k, &family) in config.families.iter().enumerate() {
        let class = catalog
            .index_of(family.name())
            .or_else(|_| usage(format!("family {} is not a model class", family.name())))?;
        let tag = k as u64;
        let net = pure_network(&config, family, class, netlens::walk::derive_seed(config.seed, &[tag]))?;
        let eval = evaluate_network(&config, &net, &models, tag)?;
        let row = homogeneity_row(family.name(), class, &eval.curve);
        println!(
            "{}\tpeak={}\tmode_incorrect={}",
            row.network,
            row.peak_accuracy,
            row.mode_incorrect.map_or("none", |m| catalog.name(m))
        );
        rows.push(row);
    }
    let mut w = create(&out.join("homogeneity.csv"))?;
    write_homogeneity_csv(&rows, &catalog, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn demo(s: &Settings, a: &DemoArgs) -> Result<()> {
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        families: families(s, &a.classes)?,
        sizes: sizes(s, &a.sizes)?,
        parts_per_size: s.or("parts", &a.parts, defaults.parts_per_size)?,
        splice_edges: s.or("splice-edges", &a.splice_edges, defaults.splice_edges)?,
        training_walks: s.or("training-walks", &a.training_walks, defaults.training_walks)?,
        train_fraction: train_fraction(s, &a.train_fraction)?,
        tau_step: s.or("tau-step", &a.tau_step, defaults.tau_step)?,
        max_training_nodes: s.or("max-training-nodes", &a.max_training_nodes, defaults.max_training_nodes)?,
        seed: s.require("seed", &a.seed)?,
        workers: s.or("workers", &a.workers, 0)?,
    };
    let out: PathBuf = s.require("out", &a.out)?;
    let result = run(&config)?;
    result.write_artifacts(&out)?;
    let peak = result.evaluation.curve.peak();
    println!("nodes={}", result.network.node_count());
    println!("test_nodes={}", result.evaluation.test.len());
    println!("top1_accuracy={:.4} (chance {:.4})", result.evaluation.top1, 1.0 / result.catalog.len() as f64);
    println!("peak_accuracy={:.4} at tau={}", peak.accuracy, peak.tau);
    println!("artifacts written to {}", out.display());
    Ok(())
}
