//! Running every lens over every node and tallying the labels each node receives.
//!
//! A walk of size `s` started at `v` is embedded and classified once; its label is credited
//! to `v` in the `(s, start)` row and to every other walk member in the `(s, member)` row.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{ClassCatalog, Classifier, ClassifierError};
use crate::embedding::{canonical_form, image_in_order, DEFAULT_SEARCH_BUDGET};
use crate::graph::{Graph, NodeId};
use crate::walk::{random_walk_sample, walk_seed, WalkError};

const CHUNK_NODES: usize = 2048;

#[derive(Debug, Error)]
pub enum LensError {
    #[error("lens sizes must be ascending, unique and at least 2: {0:?}")]
    BadSizes(Vec<usize>),
    #[error("walks per node must be at least 1")]
    NoWalks,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("could not build worker pool: {0}")]
    Pool(String),
    #[error("tally file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether a label reached a node as the walk's start or as another member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Start,
    Member,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Start => "start",
            Mode::Member => "member",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LensConfig {
    /// Ascending, unique lens sizes.
    pub sizes: Vec<usize>,
    pub walks_per_node: usize,
    pub master_seed: u64,
    /// Worker threads; `0` uses rayon's default.
    pub workers: usize,
}

impl LensConfig {
    pub fn new(sizes: Vec<usize>, master_seed: u64) -> Self {
        LensConfig {
            sizes,
            walks_per_node: 1,
            master_seed,
            workers: 0,
        }
    }

    fn validate(&self) -> Result<(), LensError> {
        let ok = !self.sizes.is_empty()
            && self.sizes[0] >= 2
            && self.sizes.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(LensError::BadSizes(self.sizes.clone()));
        }
        if self.walks_per_node == 0 {
            return Err(LensError::NoWalks);
        }
        Ok(())
    }
}

/// A walk that could not be completed; the node gets no start-mode label for that size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkFailure {
    pub node: NodeId,
    pub lens_size: usize,
    pub error: WalkError,
}

/// Label counts for every node: `2 * sizes.len()` rows by `classes` columns per node.
/// Row `2 * i` is the start-mode row of `sizes[i]` and row `2 * i + 1` its member-mode row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TallyTable {
    sizes: Vec<usize>,
    classes: usize,
    node_count: usize,
    counts: Vec<u32>,
    pub failures: Vec<WalkFailure>,
    /// Walks whose canonical ordering search ran out of budget.
    pub uncertified_embeddings: usize,
}

/// Borrowed `X_m` matrix of one node.
#[derive(Clone, Copy, Debug)]
pub struct LabelTally<'a> {
    counts: &'a [u32],
    rows: usize,
    classes: usize,
}

impl<'a> LabelTally<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, row: usize, class: usize) -> u32 {
        self.counts[row * self.classes + class]
    }

    pub fn row(&self, row: usize) -> &'a [u32] {
        &self.counts[row * self.classes..(row + 1) * self.classes]
    }

    /// Column of the given class across all rows (`y_m` for the true class).
    pub fn column(&self, class: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, class)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn as_slice(&self) -> &'a [u32] {
        self.counts
    }
}

impl TallyTable {
    pub fn zeros(node_count: usize, sizes: Vec<usize>, classes: usize) -> Self {
        let rows = 2 * sizes.len();
        TallyTable {
            sizes,
            classes,
            node_count,
            counts: vec![0; node_count * rows * classes],
            failures: Vec::new(),
            uncertified_embeddings: 0,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn rows(&self) -> usize {
        2 * self.sizes.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn row_index(&self, size_index: usize, mode: Mode) -> usize {
        2 * size_index + usize::from(mode == Mode::Member)
    }

    /// `(lens size, mode)` of a row.
    pub fn row_kind(&self, row: usize) -> (usize, Mode) {
        let mode = if row % 2 == 0 { Mode::Start } else { Mode::Member };
        (self.sizes[row / 2], mode)
    }

    /// Human-readable row label such as `16:member`.
    pub fn row_label(&self, row: usize) -> String {
        let (size, mode) = self.row_kind(row);
        format!("{size}:{}", mode.name())
    }

    pub fn node(&self, v: NodeId) -> LabelTally<'_> {
        let stride = self.rows() * self.classes;
        LabelTally {
            counts: &self.counts[v * stride..(v + 1) * stride],
            rows: self.rows(),
            classes: self.classes,
        }
    }

    pub fn add(&mut self, v: NodeId, row: usize, class: usize, amount: u32) {
        let stride = self.rows() * self.classes;
        self.counts[v * stride + row * self.classes + class] += amount;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Audit dump: a `#` line with sizes, classes and node count, the header
    /// `node,row,class,count`, then one line per nonzero count.
    pub fn write_csv<W: Write>(&self, catalog: &ClassCatalog, mut out: W) -> std::io::Result<()> {
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        writeln!(
            out,
            "# sizes={} classes={} nodes={}",
            sizes.join(","),
            catalog.names().join(","),
            self.node_count
        )?;
        writeln!(out, "node,row,class,count")?;
        let labels: Vec<String> = (0..self.rows()).map(|r| self.row_label(r)).collect();
        for v in 0..self.node_count {
            let t = self.node(v);
            for (r, label) in labels.iter().enumerate() {
                for (c, &n) in t.row(r).iter().enumerate() {
                    if n > 0 {
                        writeln!(out, "{v},{label},{},{n}", catalog.name(c))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads a table written by [`TallyTable::write_csv`]. Walk failures are not stored in
    /// the file and come back empty.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<(TallyTable, ClassCatalog), LensError> {
        let mut lines = reader.lines().enumerate();
        let err = |line: usize, message: &str| LensError::Format {
            line,
            message: message.to_string(),
        };
        let (_, meta) = lines.next().ok_or_else(|| err(1, "empty file"))?;
        let meta = meta?;
        let mut sizes = None;
        let mut classes = None;
        let mut nodes = None;
        for field in meta.trim_start_matches('#').split_whitespace() {
            match field.split_once('=') {
                Some(("sizes", v)) => {
                    sizes = v
                        .split(',')
                        .map(|s| s.parse::<usize>().ok())
                        .collect::<Option<Vec<_>>>()
                }
                Some(("classes", v)) => classes = Some(v.split(',').map(str::to_string).collect::<Vec<_>>()),
                Some(("nodes", v)) => nodes = v.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (Some(sizes), Some(classes), Some(nodes)) = (sizes, classes, nodes) else {
            return Err(err(1, "expected `# sizes=.. classes=.. nodes=..`"));
        };
        let catalog = ClassCatalog::new(classes)?;
        let mut table = TallyTable::zeros(nodes, sizes, catalog.len());
        let labels: Vec<String> = (0..table.rows()).map(|r| table.row_label(r)).collect();
        for (i, line) in lines {
            let line = line?;
            let ln = i + 1;
            if line.is_empty() || line == "node,row,class,count" {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err(ln, "expected node,row,class,count"));
            }
            let v: usize = f[0].parse().map_err(|_| err(ln, "bad node"))?;
            if v >= nodes {
                return Err(err(ln, "node out of range"));
            }
            let row = labels.iter().position(|l| l == f[1]).ok_or_else(|| err(ln, "unknown row"))?;
            let class = catalog.index_of(f[2])?;
            let n: u32 = f[3].parse().map_err(|_| err(ln, "bad count"))?;
            table.add(v, row, class, n);
        }
        Ok((table, catalog))
    }
}

struct WalkOutcome {
    node: NodeId,
    size_index: usize,
    result: Result<(usize, Vec<NodeId>, bool), WalkError>,
}

/// Runs every lens from every node of `g` and tallies the classifier's labels.
///
/// Results depend only on the inputs and `config.master_seed`: each walk's seed is derived
/// from `(master_seed, node, size, repetition)` and counts are merged in node order.
pub fn run_lenses(g: &Graph, classifier: &dyn Classifier, config: &LensConfig) -> Result<TallyTable, LensError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LensError::Pool(e.to_string()))?;
    let n = g.node_count();
    let classes = classifier.catalog().len();
    let mut table = TallyTable::zeros(n, config.sizes.clone(), classes);
    let jobs_per_node = config.sizes.len() * config.walks_per_node;

    for chunk_start in (0..n).step_by(CHUNK_NODES) {
        let chunk_end = (chunk_start + CHUNK_NODES).min(n);
        let outcomes: Result<Vec<WalkOutcome>, ClassifierError> = pool.install(|| {
            (chunk_start * jobs_per_node..chunk_end * jobs_per_node)
                .into_par_iter()
                .map(|job| {
                    let node = job / jobs_per_node;
                    let rest = job % jobs_per_node;
                    let size_index = rest / config.walks_per_node;
                    let rep = rest % config.walks_per_node;
                    let size = config.sizes[size_index];
                    let seed = walk_seed(config.master_seed, node, size, rep);
                    let result = match random_walk_sample(g, node, size, seed) {
                        Ok(walk) => {
                            let sub = g
                                .induced_subgraph(&walk.members)
                                .expect("walk members are distinct and in range");
                            let form = canonical_form(&sub, DEFAULT_SEARCH_BUDGET);
                            let image = image_in_order(&sub, &form.order);
                            let label = classifier.classify(&image, seed)?;
                            Ok((label, walk.members, form.certified))
                        }
                        Err(e) => Err(e),
                    };
                    Ok(WalkOutcome { node, size_index, result })
                })
                .collect()
        });
        for outcome in outcomes? {
            match outcome.result {
                Ok((label, members, certified)) => {
                    let start_row = table.row_index(outcome.size_index, Mode::Start);
                    table.add(outcome.node, start_row, label, 1);
                    for &m in &members[1..] {
                        table.add(m, start_row + 1, label, 1);
                    }
                    if !certified {
                        table.uncertified_embeddings += 1;
                    }
                }
                Err(error) => table.failures.push(WalkFailure {
                    node: outcome.node,
                    lens_size: config.sizes[outcome.size_index],
                    error,
                }),
            }
        }
    }
    Ok(table)
}

/// Percent-correct figures for one lens size.
#[derive(Clone, Debug, PartialEq)]
pub struct LensAccuracy {
    pub size: usize,
    /// Start and member labels pooled.
    pub pooled: Option<f64>,
    pub member_only: Option<f64>,
    pub start_only: Option<f64>,
}

/// Percent of label assignments in each row that hit the node's true class, over `nodes`
/// (all nodes when `None`). Rows without any assignments are `None`.
pub fn row_accuracy(table: &TallyTable, truth: &[usize], nodes: Option<&[NodeId]>) -> Vec<Option<f64>> {
    let (hits, totals) = row_hits(table, truth, nodes);
    hits.iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| 100.0 * h as f64 / t as f64))
        .collect()
}

fn row_hits(table: &TallyTable, truth: &[usize], nodes: Option<&[NodeId]>) -> (Vec<u64>, Vec<u64>) {
    let rows = table.rows();
    let mut hits = vec![0u64; rows];
    let mut totals = vec![0u64; rows];
    let mut visit = |v: NodeId| {
        let t = table.node(v);
        for r in 0..rows {
            hits[r] += t.get(r, truth[v]) as u64;
            totals[r] += t.row(r).iter().map(|&c| c as u64).sum::<u64>();
        }
    };
    match nodes {
        Some(list) => list.iter().copied().for_each(&mut visit),
        None => (0..table.node_count()).for_each(&mut visit),
    }
    (hits, totals)
}

/// Per-size accuracy in the pooled, member-only and start-only readings.
pub fn per_lens_accuracy(table: &TallyTable, truth: &[usize]) -> Vec<LensAccuracy> {
    let (hits, totals) = row_hits(table, truth, None);
    let pct = |h: u64, t: u64| (t > 0).then(|| 100.0 * h as f64 / t as f64);
    table
        .sizes()
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let (s, m) = (2 * i, 2 * i + 1);
            LensAccuracy {
                size,
                pooled: pct(hits[s] + hits[m], totals[s] + totals[m]),
                member_only: pct(hits[m], totals[m]),
                start_only: pct(hits[s], totals[s]),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::BitImage;

    struct Constant(ClassCatalog, usize);

    impl Classifier for Constant {
        fn catalog(&self) -> &ClassCatalog {
            &self.0
        }
        fn classify(&self, _: &BitImage, _: u64) -> Result<usize, ClassifierError> {
            Ok(self.1)
        }
    }

    fn cat() -> ClassCatalog {
        ClassCatalog::new(["a", "b"]).unwrap()
    }

    fn ring(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edge_slice(n, &edges)
    }

    #[test]
    fn start_rows_sum_to_one_and_members_conserve() {
        let g = ring(20);
        let cfg = LensConfig::new(vec![4, 8], 3);
        let t = run_lenses(&g, &Constant(cat(), 1), &cfg).unwrap();
        assert!(t.failures.is_empty());
        for v in 0..20 {
            let x = t.node(v);
            assert_eq!(x.row(0).iter().sum::<u32>(), 1);
            assert_eq!(x.row(2).iter().sum::<u32>(), 1);
            assert_eq!(x.column(0), vec![0; 4]);
        }
        let member = |row: usize| (0..20).map(|v| t.node(v).row(row).iter().sum::<u32>()).sum::<u32>();
        assert_eq!(member(1), 20 * 3);
        assert_eq!(member(3), 20 * 7);
        assert_eq!(t.total(), 20 * (4 + 8));
    }

    #[test]
    fn small_components_skip_large_lenses() {
        let g = Graph::from_edge_slice(5, &[(0, 1), (1, 2), (3, 4)]);
        let cfg = LensConfig::new(vec![2, 3], 0);
        let t = run_lenses(&g, &Constant(cat(), 0), &cfg).unwrap();
        let failed: Vec<(usize, usize)> = t.failures.iter().map(|f| (f.node, f.lens_size)).collect();
        assert_eq!(failed, vec![(3, 3), (4, 3)]);
        assert_eq!(t.node(3).row(2), &[0, 0]);
        assert_eq!(t.node(3).row(0), &[1, 0]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let g = ring(5);
        for sizes in [vec![], vec![1, 4], vec![4, 4], vec![8, 4]] {
            assert!(matches!(
                run_lenses(&g, &Constant(cat(), 0), &LensConfig::new(sizes, 0)),
                Err(LensError::BadSizes(_))
            ));
        }
        let mut cfg = LensConfig::new(vec![2], 0);
        cfg.walks_per_node = 0;
        assert!(matches!(run_lenses(&g, &Constant(cat(), 0), &cfg), Err(LensError::NoWalks)));
    }

    #[test]
    fn repeated_walks_add_start_labels() {
        let g = ring(10);
        let mut cfg = LensConfig::new(vec![3], 1);
        cfg.walks_per_node = 3;
        let t = run_lenses(&g, &Constant(cat(), 0), &cfg).unwrap();
        assert_eq!(t.node(4).row(0), &[3, 0]);
        assert_eq!(t.total(), 10 * 3 * 3);
    }

    #[test]
    fn perfect_classifier_scores_100() {
        let g = ring(12);
        let t = run_lenses(&g, &Constant(cat(), 1), &LensConfig::new(vec![3, 6], 0)).unwrap();
        let acc = per_lens_accuracy(&t, &vec![1; 12]);
        for a in &acc {
            assert_eq!(a.pooled, Some(100.0));
            assert_eq!(a.start_only, Some(100.0));
            assert_eq!(a.member_only, Some(100.0));
        }
        let wrong = per_lens_accuracy(&t, &vec![0; 12]);
        assert_eq!(wrong[0].pooled, Some(0.0));
        let empty = TallyTable::zeros(2, vec![4], 2);
        assert_eq!(row_accuracy(&empty, &[0, 0], None), vec![None, None]);
    }

    #[test]
    fn csv_round_trip() {
        let g = ring(9);
        let t = run_lenses(&g, &Constant(cat(), 1), &LensConfig::new(vec![2, 4], 5)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&cat(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# sizes=2,4 classes=a,b nodes=9\nnode,row,class,count\n0,2:start,b,1\n"));
        let (back, catalog) = TallyTable::read_csv(&buf[..]).unwrap();
        assert_eq!(catalog, cat());
        assert_eq!(back.counts, t.counts);
    }
}
