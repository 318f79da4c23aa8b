//! Labeled heterogeneous testbeds: synthetic graph families, walk-based subgraph extraction,
//! splicing of labeled parts into one network, and ground-truth node diversity.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::classifier::{ClassCatalog, ClassifierError};
use crate::graph::{parse_dense_edge_list, Graph, GraphError, NodeId};
use crate::walk::{random_walk_sample, random_walk_sample_within, rng_from_seed, WalkSample};

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("{family} needs {requirement}, got n = {n}")]
    InvalidSize {
        family: Family,
        n: usize,
        requirement: &'static str,
    },
    #[error("unknown graph family {0:?}")]
    UnknownFamily(String),
    #[error("splicing needs at least two parts, got {0}")]
    TooFewParts(usize),
    #[error("{requested} splice edges requested but only {available} distinct cross-part pairs exist")]
    TooManySpliceEdges { requested: usize, available: u128 },
    #[error("truth file line {line}: {message}")]
    Truth { line: usize, message: String },
    #[error(transparent)]
    Class(#[from] ClassifierError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard graph families used for synthetic classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Star,
    Wheel,
    Ladder,
    Ring,
    Clique,
    Grid,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Star,
        Family::Wheel,
        Family::Ladder,
        Family::Ring,
        Family::Clique,
        Family::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Star => "star",
            Family::Wheel => "wheel",
            Family::Ladder => "ladder",
            Family::Ring => "ring",
            Family::Clique => "clique",
            Family::Grid => "grid",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = TestbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| TestbedError::UnknownFamily(s.to_string()))
    }
}

/// The `n`-node member of `family`.
///
/// * star: hub `0` joined to leaves `1..n`
/// * wheel: hub `0` joined to every node of the cycle `1..n`
/// * ladder: rails `0..k` and `k..2k` joined by rungs `(i, i + k)`, with `k = n / 2`
/// * ring: cycle `0..n`
/// * clique: complete graph
/// * grid: `a × b` lattice with `a ≤ b` the most square factorization of `n`, `a ≥ 2`
pub fn generate_family(family: Family, n: usize) -> Result<Graph, TestbedError> {
    let invalid = |requirement| TestbedError::InvalidSize { family, n, requirement };
    let mut edges = Vec::new();
    match family {
        Family::Star => {
            if n < 2 {
                return Err(invalid("n >= 2"));
            }
            edges.extend((1..n).map(|i| (0, i)));
        }
        Family::Wheel => {
            if n < 4 {
                return Err(invalid("n >= 4"));
            }
            let rim = n - 1;
            for i in 0..rim {
                edges.push((0, 1 + i));
                edges.push((1 + i, 1 + (i + 1) % rim));
            }
        }
        Family::Ladder => {
            if n < 4 || n % 2 != 0 {
                return Err(invalid("an even n >= 4"));
            }
            let k = n / 2;
            for i in 0..k {
                edges.push((i, i + k));
                if i + 1 < k {
                    edges.push((i, i + 1));
                    edges.push((i + k, i + k + 1));
                }
            }
        }
        Family::Ring => {
            if n < 3 {
                return Err(invalid("n >= 3"));
            }
            edges.extend((0..n).map(|i| (i, (i + 1) % n)));
        }
        Family::Clique => {
            if n < 2 {
                return Err(invalid("n >= 2"));
            }
            for i in 0..n {
                edges.extend(((i + 1)..n).map(|j| (i, j)));
            }
        }
        Family::Grid => {
            let a = (2..=n.isqrt()).rev().find(|a| n % a == 0);
            let Some(a) = a else {
                return Err(invalid("n = a * b with a, b >= 2"));
            };
            let b = n / a;
            for r in 0..a {
                for c in 0..b {
                    let v = r * b + c;
                    if c + 1 < b {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < a {
                        edges.push((v, v + b));
                    }
                }
            }
        }
    }
    Ok(Graph::from_edge_slice(n, &edges))
}

/// Connected subgraph tagged with the class of the network it came from.
#[derive(Clone, Debug)]
pub struct LabeledSubgraph {
    pub graph: Graph,
    pub class: usize,
    /// Identifier of the subgraph within its source network (extraction order).
    pub source_id: usize,
    pub size_class: usize,
}

/// Subgraphs extracted from one network plus any requested sizes that could not be met.
#[derive(Clone, Debug)]
pub struct CorpusExtraction {
    pub subgraphs: Vec<LabeledSubgraph>,
    /// `(size, requested, achieved)` for every size that fell short.
    pub shortfall: Vec<(usize, usize, usize)>,
}

/// Extracts `count` node-disjoint walk subgraphs of every size in `sizes` from `g`.
///
/// Sizes are processed largest first. Start nodes are taken in a seeded uniform order over
/// the still-unused nodes, and every walk avoids nodes claimed by earlier walks.
pub fn extract_corpus(g: &Graph, class: usize, count: usize, sizes: &[usize], seed: u64) -> CorpusExtraction {
    let mut rng = rng_from_seed(seed);
    let mut used = vec![false; g.node_count()];
    let mut order: Vec<usize> = sizes.to_vec();
    order.sort_unstable_by(|a, b| b.cmp(a));
    order.dedup();
    let mut subgraphs = Vec::new();
    let mut shortfall = Vec::new();
    for &size in &order {
        let mut starts: Vec<NodeId> = (0..g.node_count()).filter(|&v| !used[v]).collect();
        starts.shuffle(&mut rng);
        let mut achieved = 0;
        for start in starts {
            if achieved == count {
                break;
            }
            if used[start] {
                continue;
            }
            let walk_seed = rng.gen::<u64>();
            let Ok(walk) = random_walk_sample_within(g, start, size, walk_seed, |v| !used[v]) else {
                continue;
            };
            for &v in &walk.members {
                used[v] = true;
            }
            let graph = g
                .induced_subgraph(&walk.members)
                .expect("walk members are distinct and in range");
            subgraphs.push(LabeledSubgraph {
                graph,
                class,
                source_id: subgraphs.len(),
                size_class: size,
            });
            achieved += 1;
        }
        if achieved < count {
            shortfall.push((size, count, achieved));
        }
    }
    CorpusExtraction { subgraphs, shortfall }
}

/// Draws `count` walks of `size` nodes from uniformly random start nodes; walks may overlap.
/// Starts whose walk fails are redrawn, up to `16 * count` attempts in total.
pub fn sample_walks(g: &Graph, size: usize, count: usize, seed: u64) -> Vec<WalkSample> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(count);
    if g.node_count() == 0 {
        return out;
    }
    for _ in 0..16 * count.max(1) {
        if out.len() == count {
            break;
        }
        let start = rng.gen_range(0..g.node_count());
        if let Ok(w) = random_walk_sample(g, start, size, rng.gen()) {
            out.push(w);
        }
    }
    out
}

/// One generated family graph per `(size, k)` for `k < count`, labeled `class`.
pub fn family_parts(
    family: Family,
    class: usize,
    count: usize,
    sizes: &[usize],
) -> Result<Vec<LabeledSubgraph>, TestbedError> {
    let mut parts = Vec::with_capacity(count * sizes.len());
    for &size in sizes {
        let graph = generate_family(family, size)?;
        for _ in 0..count {
            parts.push(LabeledSubgraph {
                graph: graph.clone(),
                class,
                source_id: parts.len(),
                size_class: size,
            });
        }
    }
    Ok(parts)
}

/// Spliced network with per-node ground truth.
#[derive(Clone, Debug)]
pub struct HeterogeneousNetwork {
    pub graph: Graph,
    /// Class index of the part each node came from.
    pub truth: Vec<usize>,
    /// Index of the part each node came from.
    pub provenance: Vec<usize>,
    /// Random cross-part edges, in insertion order.
    pub splice_edges: Vec<(NodeId, NodeId)>,
    /// Extra edges that joined components left over after random splicing.
    pub bridge_edges: Vec<(NodeId, NodeId)>,
}

impl HeterogeneousNetwork {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// A network whose nodes all carry `class`.
    pub fn homogeneous(graph: Graph, class: usize) -> Self {
        let n = graph.node_count();
        HeterogeneousNetwork {
            graph,
            truth: vec![class; n],
            provenance: vec![0; n],
            splice_edges: Vec::new(),
            bridge_edges: Vec::new(),
        }
    }

    /// Ground truth as TSV rows `node_id<TAB>class_name<TAB>subgraph_id`, after a header row.
    pub fn write_truth<W: Write>(&self, catalog: &ClassCatalog, mut out: W) -> std::io::Result<()> {
        writeln!(out, "node_id\tclass_name\tsubgraph_id")?;
        for (v, (&class, &part)) in self.truth.iter().zip(&self.provenance).enumerate() {
            writeln!(out, "{v}\t{}\t{part}", catalog.name(class))?;
        }
        Ok(())
    }

    /// Loads a network saved as a dense edge list plus a truth TSV. Truth rows must list
    /// nodes `0..n` in order; the header row is optional.
    pub fn load<E: BufRead, T: BufRead>(
        catalog: &ClassCatalog,
        edges: E,
        truth: T,
    ) -> Result<Self, TestbedError> {
        let (truth, provenance) = read_truth(catalog, truth)?;
        let graph = parse_dense_edge_list(edges, truth.len())?.graph;
        Ok(HeterogeneousNetwork {
            graph,
            truth,
            provenance,
            splice_edges: Vec::new(),
            bridge_edges: Vec::new(),
        })
    }
}

/// Reads `node_id<TAB>class_name<TAB>subgraph_id` rows into class and part vectors.
pub fn read_truth<R: BufRead>(catalog: &ClassCatalog, reader: R) -> Result<(Vec<usize>, Vec<usize>), TestbedError> {
    let mut truth = Vec::new();
    let mut provenance = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let err = |message: String| TestbedError::Truth { line: i + 1, message };
        if line.trim().is_empty() || (i == 0 && line.starts_with("node_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let node: usize = fields[0].trim().parse().map_err(|_| err("bad node id".into()))?;
        if node != truth.len() {
            return Err(err(format!("expected node {}, found {node}", truth.len())));
        }
        truth.push(catalog.index_of(fields[1].trim())?);
        provenance.push(fields[2].trim().parse().map_err(|_| err("bad subgraph id".into()))?);
    }
    Ok((truth, provenance))
}

/// Disjoint union of `parts` plus `extra_per_part * parts.len()` random splice edges.
///
/// Each splice edge joins a uniformly random node of one uniformly random part to a uniformly
/// random node of a different part; draws that repeat an existing splice edge are redrawn.
/// If the result is still disconnected, every further component is joined to the ones before
/// it (ordered by smallest node) by one random bridge edge.
pub fn splice(parts: &[LabeledSubgraph], extra_per_part: usize, seed: u64) -> Result<HeterogeneousNetwork, TestbedError> {
    if parts.len() < 2 {
        return Err(TestbedError::TooFewParts(parts.len()));
    }
    let sizes: Vec<usize> = parts.iter().map(|p| p.graph.node_count()).collect();
    let requested = extra_per_part * parts.len();
    let total: u128 = sizes.iter().map(|&s| s as u128).sum();
    let same: u128 = sizes.iter().map(|&s| (s as u128) * (s as u128)).sum();
    let available = (total * total - same) / 2;
    if requested as u128 > available {
        return Err(TestbedError::TooManySpliceEdges { requested, available });
    }

    let mut offsets = Vec::with_capacity(parts.len());
    let mut n = 0;
    for &s in &sizes {
        offsets.push(n);
        n += s;
    }
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut truth = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for (i, part) in parts.iter().enumerate() {
        edges.extend(part.graph.edges().map(|(u, v)| (u + offsets[i], v + offsets[i])));
        truth.extend(std::iter::repeat(part.class).take(sizes[i]));
        provenance.extend(std::iter::repeat(i).take(sizes[i]));
    }

    let mut rng = rng_from_seed(seed);
    let mut seen: HashSet<(NodeId, NodeId)> = HashSet::with_capacity(requested);
    let mut splice_edges = Vec::with_capacity(requested);
    while splice_edges.len() < requested {
        let a = rng.gen_range(0..parts.len());
        let mut b = rng.gen_range(0..parts.len() - 1);
        if b >= a {
            b += 1;
        }
        let u = offsets[a] + rng.gen_range(0..sizes[a]);
        let v = offsets[b] + rng.gen_range(0..sizes[b]);
        if seen.insert((u.min(v), u.max(v))) {
            splice_edges.push((u, v));
        }
    }
    edges.extend_from_slice(&splice_edges);

    let graph = Graph::from_edge_slice(n, &edges);
    let comp = graph.components();
    let comp_count = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut bridge_edges = Vec::new();
    if comp_count > 1 {
        let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); comp_count];
        for (v, &c) in comp.iter().enumerate() {
            members[c].push(v);
        }
        let mut joined: Vec<NodeId> = members[0].clone();
        for group in &members[1..] {
            let u = group[rng.gen_range(0..group.len())];
            let v = joined[rng.gen_range(0..joined.len())];
            bridge_edges.push((v, u));
            joined.extend_from_slice(group);
        }
        edges.extend_from_slice(&bridge_edges);
    }
    let graph = if bridge_edges.is_empty() {
        graph
    } else {
        Graph::from_edge_slice(n, &edges)
    };
    Ok(HeterogeneousNetwork {
        graph,
        truth,
        provenance,
        splice_edges,
        bridge_edges,
    })
}

/// Number of distinct classes among each node and its neighbors.
pub fn node_diversity(net: &HeterogeneousNetwork) -> Vec<usize> {
    let mut classes: Vec<usize> = Vec::new();
    (0..net.node_count())
        .map(|v| {
            classes.clear();
            classes.push(net.truth[v]);
            classes.extend(net.graph.neighbors(v).iter().map(|&u| net.truth[u]));
            classes.sort_unstable();
            classes.dedup();
            classes.len()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_edge_counts() {
        let star = generate_family(Family::Star, 4).unwrap();
        assert_eq!(star.edge_count(), 3);
        assert_eq!(star.degree(0), 3);
        assert_eq!(generate_family(Family::Wheel, 5).unwrap().edge_count(), 8);
        assert_eq!(generate_family(Family::Ladder, 6).unwrap().edge_count(), 7);
        assert_eq!(generate_family(Family::Ring, 7).unwrap().edge_count(), 7);
        assert_eq!(generate_family(Family::Clique, 5).unwrap().edge_count(), 10);
        // 3 x 4 lattice: 3 * 3 horizontal + 2 * 4 vertical.
        assert_eq!(generate_family(Family::Grid, 12).unwrap().edge_count(), 17);
        for f in Family::ALL {
            assert!(generate_family(f, 16).unwrap().is_connected(), "{f}");
        }
    }

    #[test]
    fn family_minimums() {
        assert!(generate_family(Family::Star, 1).is_err());
        assert!(generate_family(Family::Wheel, 3).is_err());
        assert!(generate_family(Family::Ladder, 5).is_err());
        assert!(generate_family(Family::Ladder, 2).is_err());
        assert!(generate_family(Family::Ring, 2).is_err());
        assert!(generate_family(Family::Grid, 7).is_err());
        assert_eq!("wheel".parse::<Family>().unwrap(), Family::Wheel);
        assert!("hexagon".parse::<Family>().is_err());
    }

    #[test]
    fn extraction_is_disjoint() {
        let g = generate_family(Family::Grid, 100).unwrap();
        let out = extract_corpus(&g, 0, 3, &[8, 16], 5);
        assert_eq!(out.subgraphs.len(), 6);
        assert!(out.shortfall.is_empty());
        for s in &out.subgraphs {
            assert!(s.graph.is_connected());
            assert_eq!(s.graph.node_count(), s.size_class);
        }
    }

    #[test]
    fn ring_extraction_yields_path() {
        let g = generate_family(Family::Ring, 16).unwrap();
        let out = extract_corpus(&g, 0, 1, &[8], 3);
        let sub = &out.subgraphs[0].graph;
        assert_eq!(sub.node_count(), 8);
        assert_eq!(sub.edge_count(), 7);
        let mut degrees: Vec<usize> = (0..8).map(|v| sub.degree(v)).collect();
        degrees.sort();
        assert_eq!(degrees, vec![1, 1, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn oversized_request_reports_shortfall() {
        let g = generate_family(Family::Ring, 20).unwrap();
        let out = extract_corpus(&g, 1, 5, &[8], 0);
        assert_eq!(out.subgraphs.len(), 2);
        assert_eq!(out.shortfall, vec![(8, 5, 2)]);
    }

    #[test]
    fn two_part_splice() {
        let parts = vec![
            LabeledSubgraph { graph: generate_family(Family::Star, 4).unwrap(), class: 0, source_id: 0, size_class: 4 },
            LabeledSubgraph { graph: generate_family(Family::Ring, 4).unwrap(), class: 1, source_id: 0, size_class: 4 },
        ];
        let net = splice(&parts, 1, 9).unwrap();
        assert_eq!(net.splice_edges.len(), 2);
        assert!(net.bridge_edges.is_empty());
        assert!(net.graph.is_connected());
        assert_eq!(net.graph.edge_count(), 3 + 4 + 2);
        let div = node_diversity(&net);
        for &(u, v) in &net.splice_edges {
            assert_eq!(div[u], 2);
            assert_eq!(div[v], 2);
        }
        assert_eq!(net.truth, vec![0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn splice_rejects_impossible_requests() {
        let k2 = LabeledSubgraph { graph: generate_family(Family::Star, 2).unwrap(), class: 0, source_id: 0, size_class: 2 };
        assert!(matches!(splice(&[k2.clone()], 1, 0), Err(TestbedError::TooFewParts(1))));
        // Two K2 parts have only four cross pairs.
        assert!(matches!(
            splice(&[k2.clone(), k2], 3, 0),
            Err(TestbedError::TooManySpliceEdges { requested: 6, available: 4 })
        ));
    }

    #[test]
    fn sparse_splice_gets_bridged() {
        let parts = family_parts(Family::Ring, 0, 40, &[3]).unwrap();
        let net = splice(&parts, 0, 1).unwrap();
        assert_eq!(net.bridge_edges.len(), 39);
        assert!(net.graph.is_connected());
    }

    #[test]
    fn diversity_counts_own_class() {
        // 0 - 1 - 2 with 0 -> classes {0}, 1 joins a foreign node 3 and 4.
        let g = Graph::from_edge_slice(5, &[(0, 1), (1, 2), (1, 3), (1, 4)]);
        let mut net = HeterogeneousNetwork::homogeneous(g, 0);
        net.truth = vec![0, 0, 0, 1, 2];
        assert_eq!(node_diversity(&net), vec![1, 3, 1, 2, 2]);
    }

    #[test]
    fn truth_round_trip() {
        let cat = ClassCatalog::new(["star", "wheel"]).unwrap();
        let parts: Vec<_> = family_parts(Family::Star, 0, 2, &[4])
            .unwrap()
            .into_iter()
            .chain(family_parts(Family::Wheel, 1, 2, &[5]).unwrap())
            .collect();
        let net = splice(&parts, 2, 4).unwrap();
        let mut truth = Vec::new();
        net.write_truth(&cat, &mut truth).unwrap();
        let text = String::from_utf8(truth.clone()).unwrap();
        assert!(text.starts_with("node_id\tclass_name\tsubgraph_id\n0\tstar\t0\n"));
        let mut edges = Vec::new();
        net.graph.write_edge_list(&mut edges).unwrap();
        let back = HeterogeneousNetwork::load(&cat, &edges[..], &truth[..]).unwrap();
        assert_eq!(back.graph, net.graph);
        assert_eq!(back.truth, net.truth);
        assert_eq!(back.provenance, net.provenance);
        assert!(matches!(
            read_truth(&cat, &b"0\tstar\t0\n2\tstar\t0\n"[..]),
            Err(TestbedError::Truth { line: 2, .. })
        ));
    }
}
