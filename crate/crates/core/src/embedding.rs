//! Structured image embeddings: a subgraph's adjacency matrix, re-indexed by a canonical node
//! order so that isomorphic subgraphs produce the same binary image.
//!
//! The order comes from individualization-refinement over ordered partitions:
//!
//! 1. Nodes start in cells keyed by degree and then by their sorted neighbor-degree sequence,
//!    both descending, so the highest-degree node class comes first.
//! 2. Cells are refined until every node in a cell has the same number of neighbors in every
//!    cell; split pieces are ordered by that count vector, descending.
//! 3. While some cell has several nodes, each member of the first such cell is tried at the
//!    front of it and step 2 repeats. Every discrete partition reached this way gives an
//!    order, and the order whose upper-triangle bit string is lexicographically smallest wins.
//!
//! Branches are pruned when the candidate is a structural twin of an explored one or lies in
//! the same orbit under automorphisms discovered so far that fix the current prefix. A node
//! budget bounds the search; when it runs out the result is still deterministic but is no
//! longer guaranteed to be invariant, which [`CanonicalForm::certified`] reports.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Search-tree nodes explored before giving up on a certified canonical form.
pub const DEFAULT_SEARCH_BUDGET: usize = 20_000;

const MAX_STORED_AUTOMORPHISMS: usize = 256;

/// Square binary image, row-major, one bit per pixel. `1` (black) marks an edge.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitImage {
    n: usize,
    stride: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BitImage({}x{})", self.n, self.n)?;
        for i in 0..self.n {
            let row: String = (0..self.n)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

impl BitImage {
    pub fn zeros(n: usize) -> BitImage {
        let stride = n.div_ceil(64);
        BitImage {
            n,
            stride,
            words: vec![0; stride * n],
        }
    }

    /// Side length.
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.words[i * self.stride + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let w = &mut self.words[i * self.stride + j / 64];
        if value {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Flat indices `i * n + j` of the set pixels, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| self.get(i, j))
                .map(move |j| i * self.n + j)
        })
    }

    pub fn is_symmetric_hollow(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i) && (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// ASCII PBM (`P1`) encoding: magic line, `n n` line, then one line per row with pixels
    /// separated by single spaces.
    pub fn to_pbm(&self) -> String {
        let mut out = String::with_capacity(8 + self.n * self.n * 2);
        let _ = writeln!(out, "P1\n{} {}", self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    out.push(' ');
                }
                out.push(if self.get(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// Parses an ASCII PBM image. Whitespace between pixels is optional and `#` comments are
    /// skipped, as in the netpbm format. The image must be square, symmetric, and have an empty
    /// diagonal.
    pub fn from_pbm(text: &str) -> Result<BitImage, PbmError> {
        let mut tokens = PbmTokens::new(text);
        match tokens.next_token() {
            Some("P1") => {}
            other => return Err(PbmError::BadMagic(other.unwrap_or("").to_string())),
        }
        let mut dim = || -> Result<usize, PbmError> {
            let t = tokens.next_token().ok_or(PbmError::Truncated)?;
            t.parse().map_err(|_| PbmError::BadDimension(t.to_string()))
        };
        let (w, h) = (dim()?, dim()?);
        if w != h {
            return Err(PbmError::NotSquare { width: w, height: h });
        }
        let mut img = BitImage::zeros(w);
        let mut k = 0;
        while k < w * h {
            let c = tokens.next_pixel().ok_or(PbmError::Truncated)?;
            match c {
                '0' => {}
                '1' => img.set(k / w, k % w, true),
                other => return Err(PbmError::BadPixel(other)),
            }
            k += 1;
        }
        if !img.is_symmetric_hollow() {
            return Err(PbmError::NotAdjacency);
        }
        Ok(img)
    }

    /// Image as a graph on `n` nodes.
    pub fn to_graph(&self) -> Graph {
        let edges = (0..self.n).flat_map(|i| ((i + 1)..self.n).filter(move |&j| self.get(i, j)).map(move |j| (i, j)));
        Graph::from_edges(self.n, edges).0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PbmError {
    #[error("expected magic P1, found {0:?}")]
    BadMagic(String),
    #[error("invalid dimension {0:?}")]
    BadDimension(String),
    #[error("image is {width}x{height}, expected a square image")]
    NotSquare { width: usize, height: usize },
    #[error("invalid pixel {0:?}")]
    BadPixel(char),
    #[error("image data ends early")]
    Truncated,
    #[error("image is not a symmetric matrix with an empty diagonal")]
    NotAdjacency,
}

struct PbmTokens<'a> {
    rest: &'a str,
}

impl<'a> PbmTokens<'a> {
    fn new(text: &'a str) -> Self {
        PbmTokens { rest: text }
    }

    fn skip_blank(&mut self) {
        loop {
            self.rest = self.rest.trim_start();
            if self.rest.starts_with('#') {
                self.rest = self.rest.find('\n').map_or("", |i| &self.rest[i..]);
            } else {
                break;
            }
        }
    }

    fn next_token(&mut self) -> Option<&'a str> {
        self.skip_blank();
        if self.rest.is_empty() {
            return None;
        }
        let end = self
            .rest
            .find(|c: char| c.is_whitespace() || c == '#')
            .unwrap_or(self.rest.len());
        let (tok, rest) = self.rest.split_at(end);
        self.rest = rest;
        Some(tok)
    }

    fn next_pixel(&mut self) -> Option<char> {
        self.skip_blank();
        let c = self.rest.chars().next()?;
        self.rest = &self.rest[c.len_utf8()..];
        Some(c)
    }
}

/// Canonical node order together with whether the search finished within budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForm {
    /// `order[i]` is the node placed at row/column `i`.
    pub order: Vec<NodeId>,
    pub certified: bool,
}

/// Canonical order of `g`'s nodes; see the module docs for the rule.
pub fn canonical_order(g: &Graph) -> Vec<NodeId> {
    canonical_form(g, DEFAULT_SEARCH_BUDGET).order
}

pub fn canonical_form(g: &Graph, budget: usize) -> CanonicalForm {
    let bits = BitAdjacency::new(g);
    if bits.n == 0 {
        return CanonicalForm {
            order: Vec::new(),
            certified: true,
        };
    }
    let mut search = Search {
        adj: &bits,
        best: None,
        automorphisms: Vec::new(),
        visited: 0,
        budget,
        certified: true,
    };
    let cells = initial_partition(g);
    let mut prefix = Vec::new();
    search.explore(cells, &mut prefix);
    let (_, order) = search.best.expect("search reaches at least one leaf");
    CanonicalForm {
        order,
        certified: search.certified,
    }
}

/// Adjacency matrix of `g` re-indexed by [`canonical_order`].
pub fn embed_image(g: &Graph) -> BitImage {
    image_in_order(g, &canonical_order(g))
}

/// Adjacency matrix of `g` with row `i` standing for node `order[i]`.
pub fn image_in_order(g: &Graph, order: &[NodeId]) -> BitImage {
    let n = g.node_count();
    let mut position = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut img = BitImage::zeros(n);
    for (u, v) in g.edges() {
        let (a, b) = (position[u], position[v]);
        img.set(a, b, true);
        img.set(b, a, true);
    }
    img
}

struct BitAdjacency {
    n: usize,
    stride: usize,
    rows: Vec<u64>,
}

impl BitAdjacency {
    fn new(g: &Graph) -> Self {
        let n = g.node_count();
        let stride = n.div_ceil(64).max(1);
        let mut rows = vec![0u64; n * stride];
        for u in 0..n {
            for &v in g.neighbors(u) {
                rows[u * stride + v / 64] |= 1 << (v % 64);
            }
        }
        BitAdjacency { n, stride, rows }
    }

    #[inline]
    fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.stride..(v + 1) * self.stride]
    }

    #[inline]
    fn has(&self, u: usize, v: usize) -> bool {
        self.rows[u * self.stride + v / 64] >> (v % 64) & 1 == 1
    }

    fn count_into(&self, v: usize, mask: &[u64]) -> u32 {
        self.row(v)
            .iter()
            .zip(mask)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    /// `u` and `v` have the same neighbors apart from each other.
    fn twins(&self, u: usize, v: usize) -> bool {
        self.row(u).iter().zip(self.row(v)).enumerate().all(|(k, (a, b))| {
            let mut diff = a ^ b;
            for x in [u, v] {
                if x / 64 == k {
                    diff &= !(1 << (x % 64));
                }
            }
            diff == 0
        })
    }

    /// Upper triangle of the permuted matrix, most significant bit first, so that comparing
    /// the word vectors compares the bit strings lexicographically.
    fn triangle_bits(&self, order: &[usize]) -> Vec<u64> {
        let n = order.len();
        let total = n * n.saturating_sub(1) / 2;
        let mut words = vec![0u64; total.div_ceil(64)];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.has(order[i], order[j]) {
                    words[k / 64] |= 1 << (63 - k % 64);
                }
                k += 1;
            }
        }
        words
    }
}

type Cells = Vec<Vec<usize>>;

fn initial_partition(g: &Graph) -> Cells {
    let n = g.node_count();
    let mut keyed: Vec<((usize, Vec<usize>), usize)> = (0..n)
        .map(|v| {
            let mut nd: Vec<usize> = g.neighbors(v).iter().map(|&w| g.degree(w)).collect();
            nd.sort_unstable_by(|a, b| b.cmp(a));
            ((g.degree(v), nd), v)
        })
        .collect();
    keyed.sort_by(|(ka, va), (kb, vb)| kb.cmp(ka).then(va.cmp(vb)));
    let mut cells: Cells = Vec::new();
    let mut last: Option<&(usize, Vec<usize>)> = None;
    for (key, v) in &keyed {
        if last != Some(key) {
            cells.push(Vec::new());
            last = Some(key);
        }
        cells.last_mut().unwrap().push(*v);
    }
    cells
}

/// Splits cells until the partition is equitable.
fn refine(adj: &BitAdjacency, cells: &mut Cells) {
    'outer: loop {
        let masks: Vec<Vec<u64>> = cells
            .iter()
            .map(|cell| {
                let mut m = vec![0u64; adj.stride];
                for &v in cell {
                    m[v / 64] |= 1 << (v % 64);
                }
                m
            })
            .collect();
        for ci in 0..cells.len() {
            if cells[ci].len() < 2 {
                continue;
            }
            let mut sigs: Vec<(Vec<u32>, usize)> = cells[ci]
                .iter()
                .map(|&v| (masks.iter().map(|m| adj.count_into(v, m)).collect(), v))
                .collect();
            if sigs.iter().all(|(s, _)| *s == sigs[0].0) {
                continue;
            }
            sigs.sort_by(|(sa, va), (sb, vb)| sb.cmp(sa).then(va.cmp(vb)));
            let mut pieces: Cells = Vec::new();
            for (i, (_, v)) in sigs.iter().enumerate() {
                if i == 0 || sigs[i - 1].0 != sigs[i].0 {
                    pieces.push(Vec::new());
                }
                pieces.last_mut().unwrap().push(*v);
            }
            cells.splice(ci..=ci, pieces);
            continue 'outer;
        }
        break;
    }
}

struct Search<'a> {
    adj: &'a BitAdjacency,
    best: Option<(Vec<u64>, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
    visited: usize,
    budget: usize,
    certified: bool,
}

impl Search<'_> {
    fn explore(&mut self, mut cells: Cells, prefix: &mut Vec<usize>) {
        self.visited += 1;
        refine(self.adj, &mut cells);
        let Some(target) = cells.iter().position(|c| c.len() > 1) else {
            self.leaf(cells.into_iter().map(|c| c[0]).collect());
            return;
        };
        let candidates = cells[target].clone();
        let mut explored: Vec<usize> = Vec::new();
        for &v in &candidates {
            if !explored.is_empty() {
                if self.visited >= self.budget {
                    self.certified = false;
                    return;
                }
                if explored.iter().any(|&e| self.adj.twins(e, v)) {
                    continue;
                }
                if self.same_orbit(prefix, v, &explored) {
                    continue;
                }
            }
            let mut child = cells.clone();
            let rest: Vec<usize> = candidates.iter().copied().filter(|&x| x != v).collect();
            child.splice(target..=target, [vec![v], rest]);
            prefix.push(v);
            self.explore(child, prefix);
            prefix.pop();
            explored.push(v);
        }
    }

    fn leaf(&mut self, order: Vec<usize>) {
        let bits = self.adj.triangle_bits(&order);
        match &self.best {
            None => self.best = Some((bits, order)),
            Some((best_bits, best_order)) => match bits.cmp(best_bits) {
                std::cmp::Ordering::Less => self.best = Some((bits, order)),
                std::cmp::Ordering::Equal => {
                    if self.automorphisms.len() < MAX_STORED_AUTOMORPHISMS {
                        let mut gamma = vec![0; order.len()];
                        for (i, &v) in order.iter().enumerate() {
                            gamma[v] = best_order[i];
                        }
                        if gamma.iter().enumerate().any(|(i, &x)| i != x) {
                            self.automorphisms.push(gamma);
                        }
                    }
                }
                std::cmp::Ordering::Greater => {}
            },
        }
    }

    /// Whether `v` is mapped onto an explored candidate by the group generated by the known
    /// automorphisms that fix every node of `prefix`.
    fn same_orbit(&self, prefix: &[usize], v: usize, explored: &[usize]) -> bool {
        let n = self.adj.n;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for x in 0..n {
                let (a, b) = (find(&mut parent, x), find(&mut parent, gamma[x]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        if !any {
            return false;
        }
        let root = find(&mut parent, v);
        explored.iter().any(|&e| find(&mut parent, e) == root)
    }
}
