//! Undirected simple graphs in compressed adjacency form, plus edge-list ingestion.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

/// Dense node index, always `< node_count`.
pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: NodeId, node_count: usize },
    #[error("node {0} listed more than once")]
    DuplicateNode(NodeId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Counts of input edges that were discarded while building a simple graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl EdgeStats {
    pub fn dropped(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

/// Immutable undirected simple graph.
///
/// Neighbor lists are sorted ascending and stored back to back; `offsets[v]..offsets[v + 1]`
/// delimits the neighbors of `v`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    original_ids: Option<Vec<u64>>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.node_count())
            .field("edges", &self.edge_count())
            .finish()
    }
}

impl Graph {
    /// Builds a graph on `node_count` nodes. Self-loops and repeated edges (in either
    /// orientation) are dropped and counted.
    ///
    /// Panics if an endpoint is `>= node_count`.
    pub fn from_edges<I>(node_count: usize, edges: I) -> (Graph, EdgeStats)
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut stats = EdgeStats::default();
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); node_count];
        for (u, v) in edges {
            assert!(u < node_count && v < node_count, "edge ({u}, {v}) out of range");
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        let mut repeated_half_edges = 0;
        for list in &mut adj {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            repeated_half_edges += before - list.len();
            targets.extend_from_slice(list);
            offsets.push(targets.len());
        }
        stats.duplicates = repeated_half_edges / 2;
        (
            Graph {
                offsets,
                targets,
                original_ids: None,
            },
            stats,
        )
    }

    /// Convenience wrapper over [`Graph::from_edges`] that discards the statistics.
    pub fn from_edge_slice(node_count: usize, edges: &[(NodeId, NodeId)]) -> Graph {
        Graph::from_edges(node_count, edges.iter().copied()).0
    }

    pub fn empty(node_count: usize) -> Graph {
        Graph {
            offsets: vec![0; node_count + 1],
            targets: Vec::new(),
            original_ids: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Source-file identifier of a dense node index, when the graph was parsed.
    pub fn original_id(&self, v: NodeId) -> Option<u64> {
        self.original_ids.as_ref().map(|ids| ids[v])
    }

    pub fn original_ids(&self) -> Option<&[u64]> {
        self.original_ids.as_deref()
    }

    /// Graph on `nodes.len()` vertices where vertex `i` stands for `nodes[i]`, keeping every
    /// edge of `self` whose endpoints are both selected.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<Graph, GraphError> {
        let n = self.node_count();
        let mut position: HashMap<NodeId, usize> = HashMap::with_capacity(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            if v >= n {
                return Err(GraphError::NodeOutOfRange {
                    node: v,
                    node_count: n,
                });
            }
            if position.insert(v, i).is_some() {
                return Err(GraphError::DuplicateNode(v));
            }
        }
        let mut edges = Vec::new();
        for (i, &v) in nodes.iter().enumerate() {
            for &w in self.neighbors(v) {
                if let Some(&j) = position.get(&w) {
                    if i < j {
                        edges.push((i, j));
                    }
                }
            }
        }
        Ok(Graph::from_edges(nodes.len(), edges).0)
    }

    /// Component id per node, numbered in order of each component's smallest node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in self.neighbors(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.components().iter().all(|&c| c == 0)
    }

    /// Relabels vertices: vertex `v` of `self` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[NodeId]) -> Graph {
        assert_eq!(perm.len(), self.node_count());
        let edges = self.edges().map(|(u, v)| (perm[u], perm[v]));
        Graph::from_edges(self.node_count(), edges).0
    }

    /// Edge list with dense ids, one `u v` pair per line.
    pub fn write_edge_list<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    /// Dense edge list after a `# nodes=N edges=M` header, so isolated nodes survive a
    /// round trip through [`read_graph_store`].
    pub fn write_store<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# nodes={} edges={}", self.node_count(), self.edge_count())?;
        self.write_edge_list(out)
    }
}

/// Reads a graph written by [`Graph::write_store`]. Without the header line the input is
/// treated as a plain edge list and ids are remapped in order of first appearance.
pub fn read_graph_store<R: BufRead>(mut reader: R) -> Result<Graph, GraphError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header = text.lines().next().and_then(|l| l.strip_prefix("# nodes="));
    match header {
        Some(rest) => {
            let count = rest.split_whitespace().next().unwrap_or("");
            let n: usize = count.parse().map_err(|_| GraphError::Parse {
                line: 1,
                message: format!("bad node count {count:?}"),
            })?;
            Ok(parse_dense_edge_list(text.as_bytes(), n)?.graph)
        }
        None => Ok(parse_edge_list(text.as_bytes())?.graph),
    }
}

/// Result of parsing an edge list.
#[derive(Debug)]
pub struct ParsedGraph {
    pub graph: Graph,
    pub stats: EdgeStats,
}

/// Parses a whitespace-separated edge list (SNAP style).
///
/// Lines starting with `#` and blank lines are skipped. Every other line needs at least two
/// nonnegative integer tokens; extra tokens are ignored. Source ids are remapped to dense
/// indices in order of first appearance and the mapping is kept on the graph.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<ParsedGraph, GraphError> {
    let mut ids: Vec<u64> = Vec::new();
    let mut index: HashMap<u64, NodeId> = HashMap::new();
    let mut edges = Vec::new();
    let mut intern = |id: u64| -> NodeId {
        *index.entry(id).or_insert_with(|| {
            ids.push(id);
            ids.len() - 1
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut endpoint = |what: &str| -> Result<u64, GraphError> {
            let tok = tokens.next().ok_or_else(|| GraphError::Parse {
                line: lineno + 1,
                message: format!("missing {what} endpoint"),
            })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let u = endpoint("first")?;
        let v = endpoint("second")?;
        let (u, v) = (intern(u), intern(v));
        edges.push((u, v));
    }
    let (mut graph, stats) = Graph::from_edges(ids.len(), edges);
    graph.original_ids = Some(ids);
    Ok(ParsedGraph { graph, stats })
}

/// Parses an edge list whose ids are already dense indices below `node_count`, such as one
/// written by [`Graph::write_edge_list`]. Nodes without edges are kept.
pub fn parse_dense_edge_list<R: BufRead>(reader: R, node_count: usize) -> Result<ParsedGraph, GraphError> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut endpoint = || -> Result<NodeId, GraphError> {
            let tok = tokens.next().ok_or_else(|| GraphError::Parse {
                line: lineno + 1,
                message: "expected two endpoints".to_string(),
            })?;
            let v: NodeId = tok.parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                message: format!("invalid node id {tok:?}"),
            })?;
            if v >= node_count {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    message: format!("node {v} out of range for {node_count} nodes"),
                });
            }
            Ok(v)
        };
        let u = endpoint()?;
        let v = endpoint()?;
        edges.push((u, v));
    }
    let (graph, stats) = Graph::from_edges(node_count, edges);
    Ok(ParsedGraph { graph, stats })
}

pub fn parse_edge_list_str(text: &str) -> Result<ParsedGraph, GraphError> {
    parse_edge_list(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_keeps_isolated_nodes() {
        let g = Graph::from_edge_slice(5, &[(0, 1), (3, 1)]);
        let mut buf = Vec::new();
        g.write_store(&mut buf).unwrap();
        let back = read_graph_store(buf.as_slice()).unwrap();
        assert_eq!(back.node_count(), 5);
        assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        let plain = read_graph_store("7 9\n9 4\n".as_bytes()).unwrap();
        assert_eq!(plain.node_count(), 3);
    }

    #[test]
    fn parses_simple_path() {
        let p = parse_edge_list_str("0 1\n1 2\n").unwrap();
        assert_eq!(p.graph.node_count(), 3);
        assert_eq!(p.graph.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(p.stats, EdgeStats::default());
    }

    #[test]
    fn collapses_reverse_duplicates() {
        let p = parse_edge_list_str("# comment\n5 7\n7 5\n").unwrap();
        assert_eq!(p.graph.node_count(), 2);
        assert_eq!(p.graph.edge_count(), 1);
        assert_eq!(p.stats.duplicates, 1);
        assert_eq!(p.graph.original_ids(), Some(&[5u64, 7][..]));
    }

    #[test]
    fn drops_self_loop_but_keeps_node() {
        let p = parse_edge_list_str("3 3\n").unwrap();
        assert_eq!(p.graph.node_count(), 1);
        assert_eq!(p.graph.edge_count(), 0);
        assert_eq!(p.stats.self_loops, 1);
    }

    #[test]
    fn reports_line_of_bad_token() {
        let err = parse_edge_list_str("0 1\n\n1 x\n").unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_edge_list_str("4\n").unwrap_err(),
            GraphError::Parse { line: 1, .. }
        ));
        assert!(parse_edge_list_str("-1 2\n").is_err());
    }

    #[test]
    fn tolerates_tabs_and_extra_columns() {
        let p = parse_edge_list_str("10\t20\t0.5\n  20 30  \n").unwrap();
        assert_eq!(p.graph.node_count(), 3);
        assert_eq!(p.graph.edge_count(), 2);
    }

    #[test]
    fn dense_edge_list_keeps_isolated_nodes() {
        let g = Graph::from_edge_slice(4, &[(0, 2), (2, 3)]);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 2\n2 3\n");
        let back = parse_dense_edge_list(&buf[..], 4).unwrap().graph;
        assert_eq!(back, g);
        assert!(parse_dense_edge_list(&b"0 4\n"[..], 4).is_err());
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let p = parse_edge_list_str("1 2\n2 3\n3 1\n3 4\n4 4\n2 1\n").unwrap();
        let g = p.graph;
        let total: usize = (0..g.node_count()).map(|v| g.degree(v)).sum();
        assert_eq!(total, 2 * g.edge_count());
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn induced_subgraph_cases() {
        let triangle = Graph::from_edge_slice(3, &[(0, 1), (1, 2), (0, 2)]);
        let sub = triangle.induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(sub.edges().collect::<Vec<_>>(), vec![(0, 1)]);

        let all = triangle.induced_subgraph(&[2, 0, 1]).unwrap();
        assert_eq!(all.edge_count(), 3);

        let star = Graph::from_edge_slice(4, &[(0, 1), (0, 2), (0, 3)]);
        let leaves = star.induced_subgraph(&[1, 3]).unwrap();
        assert_eq!(leaves.node_count(), 2);
        assert_eq!(leaves.edge_count(), 0);

        assert!(matches!(
            star.induced_subgraph(&[0, 4]),
            Err(GraphError::NodeOutOfRange { node: 4, .. })
        ));
        assert!(matches!(
            star.induced_subgraph(&[1, 1]),
            Err(GraphError::DuplicateNode(1))
        ));
    }

    #[test]
    fn components_are_numbered_by_smallest_member() {
        let g = Graph::from_edge_slice(5, &[(3, 4), (0, 2)]);
        assert_eq!(g.components(), vec![0, 1, 0, 2, 2]);
        assert!(!g.is_connected());
    }

    #[test]
    fn neighbor_lists_sorted_and_symmetric() {
        let g = Graph::from_edge_slice(4, &[(3, 0), (2, 0), (1, 0), (2, 3)]);
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        for (u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
    }
}
