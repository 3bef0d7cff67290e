//! Directed web graphs, the damping parameter and page partitions.
//!
//! A [`WebGraph`] stores both adjacency directions in compressed form. The
//! hyperlink matrix is implicit: the column of page `j` holds `1/n_j` at each
//! out-neighbour of `j`, and the scaled link operator `Q = (1 - m) A` is
//! obtained by multiplying with [`Damping::link_mass`].

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Teleportation parameter `m`, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Damping(f64);

impl Damping {
    pub const DEFAULT: Damping = Damping(0.15);

    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m < 1.0 {
            Ok(Damping(m))
        } else {
            Err(Error::domain(format!("damping m = {m} must lie in (0, 1)")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - m`, the total mass a page forwards along its links.
    #[inline]
    pub fn link_mass(self) -> f64 {
        1.0 - self.0
    }
}

impl Default for Damping {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Immutable directed graph over pages `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WebGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

fn compress(n: usize, mut pairs: Vec<(usize, usize)>) -> (Vec<usize>, Vec<usize>) {
    pairs.sort_unstable();
    pairs.dedup();
    let mut offsets = vec![0usize; n + 1];
    for &(a, _) in &pairs {
        offsets[a + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let targets = pairs.into_iter().map(|(_, b)| b).collect();
    (offsets, targets)
}

impl WebGraph {
    /// Builds a graph from `(src, dst)` pairs. Duplicates collapse; dangling
    /// pages are allowed.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!(
                "a web graph needs at least 2 pages, got {n}"
            )));
        }
        let edges: Vec<(usize, usize)> = edges.into_iter().collect();
        if let Some(&(s, d)) = edges.iter().find(|&&(s, d)| s >= n || d >= n) {
            return Err(Error::domain(format!(
                "edge {s} -> {d} out of range for n = {n}"
            )));
        }
        let transposed = edges.iter().map(|&(s, d)| (d, s)).collect();
        let (out_offsets, out_targets) = compress(n, edges);
        let (in_offsets, in_sources) = compress(n, transposed);
        Ok(Self {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        })
    }

    /// Parses an edge list. Lines are `src dst`; blank lines and lines
    /// starting with `#` are skipped. `index_base` is 0 or 1 and the page
    /// count is one more than the largest (rebased) index seen.
    pub fn load_edge_list(text: &str, index_base: usize) -> Result<Self> {
        if index_base > 1 {
            return Err(Error::domain(format!(
                "index base must be 0 or 1, got {index_base}"
            )));
        }
        let mut edges = Vec::new();
        let mut max_index = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (src, dst) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => (
                    parse_index(a, index_base, lineno + 1)?,
                    parse_index(b, index_base, lineno + 1)?,
                ),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected `src dst`, found {line:?}"),
                    })
                }
            };
            max_index = max_index.max(Some(src.max(dst)));
            edges.push((src, dst));
        }
        let n = max_index.map_or(0, |m| m + 1);
        Self::from_edges(n, edges)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    /// Sorted out-link targets of page `i`.
    #[inline]
    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[i]..self.out_offsets[i + 1]]
    }

    /// Sorted in-link sources of page `i`.
    #[inline]
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[i]..self.in_offsets[i + 1]]
    }

    #[inline]
    pub fn out_degree(&self, i: usize) -> usize {
        self.out_offsets[i + 1] - self.out_offsets[i]
    }

    #[inline]
    pub fn in_degree(&self, i: usize) -> usize {
        self.in_offsets[i + 1] - self.in_offsets[i]
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.out_neighbors(i).binary_search(&i).is_ok()
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.n).any(|i| self.has_self_loop(i))
    }

    pub fn dangling_pages(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.out_degree(i) == 0).collect()
    }

    /// True when every column of the hyperlink matrix sums to one.
    pub fn is_stochastic(&self) -> bool {
        (0..self.n).all(|i| self.out_degree(i) > 0)
    }

    pub(crate) fn require_stochastic(&self) -> Result<()> {
        match (0..self.n).find(|&i| self.out_degree(i) == 0) {
            None => Ok(()),
            Some(i) => Err(Error::domain(format!(
                "page {i} is dangling; patch the graph before computing ranks"
            ))),
        }
    }

    /// Gives every dangling page a link to all `n` pages, itself included.
    /// Returns the patched graph and the pages that were patched.
    pub fn patch_dangling(&self) -> (WebGraph, Vec<usize>) {
        let dangling = self.dangling_pages();
        if dangling.is_empty() {
            return (self.clone(), dangling);
        }
        let mut edges = self.edges();
        for &d in &dangling {
            edges.extend((0..self.n).map(|t| (d, t)));
        }
        let patched = Self::from_edges(self.n, edges).expect("patched edges stay in range");
        (patched, dangling)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|s| self.out_neighbors(s).iter().map(move |&d| (s, d)))
            .collect()
    }

    /// Weight `(1 - m) / n_j` carried by every out-link of page `j`.
    #[inline]
    pub fn link_weight(&self, j: usize, m: Damping) -> f64 {
        m.link_mass() / self.out_degree(j) as f64
    }

    /// Column `i` of `Q = (1 - m) A` as sorted `(row, value)` pairs.
    pub fn q_column(&self, m: Damping, i: usize) -> Result<Vec<(usize, f64)>> {
        if i >= self.n {
            return Err(Error::domain(format!(
                "page {i} out of range for n = {}",
                self.n
            )));
        }
        if self.out_degree(i) == 0 {
            return Err(Error::domain(format!(
                "column {i} is dangling and has no mass"
            )));
        }
        let w = self.link_weight(i, m);
        Ok(self.out_neighbors(i).iter().map(|&j| (j, w)).collect())
    }

    /// Sparse product `y = Q x`, scattering from each source in ascending
    /// order so that results are reproducible bit for bit.
    pub fn apply_q(&self, m: Damping, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 || self.out_degree(j) == 0 {
                continue;
            }
            let w = self.link_weight(j, m) * xj;
            for &t in self.out_neighbors(j) {
                y[t] += w;
            }
        }
    }
}

fn parse_index(field: &str, base: usize, line: usize) -> Result<usize> {
    let value: usize = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("{field:?} is not a nonnegative integer"),
    })?;
    value.checked_sub(base).ok_or_else(|| Error::Parse {
        line,
        msg: format!("index {value} is below the index base {base}"),
    })
}

/// Disjoint grouping of pages, `V = V_1 ∪ ... ∪ V_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    group_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    permutation: Vec<usize>,
}

impl Partition {
    /// Builds a partition from a page-to-label map. Labels need not be
    /// contiguous; groups are numbered by ascending label.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation("partition covers no pages".into()));
        }
        let dense: BTreeMap<usize, usize> = labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(idx, label)| (label, idx))
            .collect();
        let group_of: Vec<usize> = labels.iter().map(|l| dense[l]).collect();
        let mut members = vec![Vec::new(); dense.len()];
        for (page, &g) in group_of.iter().enumerate() {
            members[g].push(page);
        }
        let mut permutation = vec![0; labels.len()];
        for (new_index, &page) in members.iter().flatten().enumerate() {
            permutation[page] = new_index;
        }
        Ok(Self {
            group_of,
            members,
            permutation,
        })
    }

    /// Parses `page group` lines. Every page of `graph` must appear exactly
    /// once.
    pub fn load(text: &str, graph: &WebGraph, index_base: usize) -> Result<Self> {
        let n = graph.n();
        let mut labels: Vec<Option<usize>> = vec![None; n];
        let mut doubled = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (page, group) = match (fields.next(), fields.next(), fields.next()) {
                (Some(p), Some(g), None) => {
                    let page = parse_index(p, index_base, lineno + 1)?;
                    let group: usize = g.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("{g:?} is not a group label"),
                    })?;
                    (page, group)
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected `page group`, found {line:?}"),
                    })
                }
            };
            if page >= n {
                return Err(Error::Validation(format!(
                    "line {}: page {page} out of range for n = {n}",
                    lineno + 1
                )));
            }
            if labels[page].replace(group).is_some() {
                doubled.push(page);
            }
        }
        let missing: Vec<usize> = (0..n).filter(|&i| labels[i].is_none()).collect();
        if !missing.is_empty() || !doubled.is_empty() {
            doubled.sort_unstable();
            doubled.dedup();
            return Err(Error::Validation(format!(
                "unassigned pages {missing:?}, doubly assigned pages {doubled:?}"
            )));
        }
        let labels: Vec<usize> = labels.into_iter().map(Option::unwrap).collect();
        Self::from_labels(&labels)
    }

    /// One singleton group per page.
    pub fn trivial(graph: &WebGraph) -> Self {
        let labels: Vec<usize> = (0..graph.n()).collect();
        Self::from_labels(&labels).expect("n >= 2")
    }

    /// A single group holding every page.
    pub fn whole_graph(graph: &WebGraph) -> Self {
        Self::from_labels(&vec![0; graph.n()]).expect("n >= 2")
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    pub fn num_pages(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, page: usize) -> usize {
        self.group_of[page]
    }

    pub fn members(&self, group: usize) -> &[usize] {
        &self.members[group]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `permutation()[page]` is the page's index once groups are laid out
    /// contiguously in group order.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (page, &p) in self.permutation.iter().enumerate() {
            inv[p] = page;
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m15() -> Damping {
        Damping::new(0.15).unwrap()
    }

    #[test]
    fn two_cycle() {
        let g = WebGraph::load_edge_list("0 1\n1 0", 0).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!((g.out_degree(0), g.out_degree(1)), (1, 1));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = WebGraph::load_edge_list("1 2\n1 2\n2 1", 1).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!((g.out_degree(0), g.out_degree(1)), (1, 1));
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn dangling_allowed_on_load() {
        let g = WebGraph::load_edge_list("0 1", 0).unwrap();
        assert_eq!((g.out_degree(0), g.out_degree(1)), (1, 0));
        assert_eq!(g.dangling_pages(), vec![1]);
        assert!(!g.is_stochastic());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let g = WebGraph::load_edge_list("# header\n\n0 1\n  # indented\n1 2\n", 0).unwrap();
        assert_eq!(g.n(), 3);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match WebGraph::load_edge_list("0 1\n1 x\n", 0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match WebGraph::load_edge_list("0 1\n# c\n1 2 3\n", 0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            WebGraph::load_edge_list("0 1", 1),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tiny_graphs_rejected() {
        assert!(matches!(
            WebGraph::load_edge_list("0 0", 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            WebGraph::load_edge_list("# nothing", 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn self_loops_preserved() {
        let g = WebGraph::load_edge_list("0 0\n0 1\n1 0", 0).unwrap();
        assert!(g.has_self_loop(0));
        assert!(!g.has_self_loop(1));
        assert_eq!(g.in_neighbors(0), &[0, 1]);
    }

    #[test]
    fn patch_leaves_stochastic_graph_alone() {
        let g = WebGraph::load_edge_list("0 1\n1 0", 0).unwrap();
        let (p, patched) = g.patch_dangling();
        assert!(patched.is_empty());
        assert_eq!(p, g);
    }

    #[test]
    fn patch_links_dangling_page_to_everyone() {
        let g = WebGraph::load_edge_list("0 1", 0).unwrap();
        let (p, patched) = g.patch_dangling();
        assert_eq!(patched, vec![1]);
        assert_eq!(p.out_neighbors(1), &[0, 1]);
        let col = p.q_column(Damping::new(0.5).unwrap(), 1).unwrap();
        // A column (1/2, 1/2) scaled by 1 - m
        assert_eq!(col, vec![(0, 0.25), (1, 0.25)]);
    }

    #[test]
    fn patch_isolated_pages() {
        let g = WebGraph::from_edges(3, []).unwrap();
        let (p, patched) = g.patch_dangling();
        assert_eq!(patched, vec![0, 1, 2]);
        for i in 0..3 {
            assert_eq!(p.out_neighbors(i), &[0, 1, 2]);
        }
    }

    #[test]
    fn q_column_values() {
        let g = WebGraph::load_edge_list("0 1\n1 0", 0).unwrap();
        assert_eq!(g.q_column(m15(), 0).unwrap(), vec![(1, 0.85)]);
        let g = WebGraph::load_edge_list("0 1\n0 2\n1 0\n2 0", 0).unwrap();
        assert_eq!(g.q_column(m15(), 0).unwrap(), vec![(1, 0.425), (2, 0.425)]);
    }

    #[test]
    fn q_column_rejects_dangling() {
        let g = WebGraph::load_edge_list("0 1", 0).unwrap();
        assert!(matches!(g.q_column(m15(), 1), Err(Error::Domain(_))));
        assert!(matches!(g.q_column(m15(), 7), Err(Error::Domain(_))));
    }

    #[test]
    fn damping_bounds() {
        assert!(Damping::new(0.0).is_err());
        assert!(Damping::new(1.0).is_err());
        assert!(Damping::new(f64::NAN).is_err());
        assert_eq!(Damping::default().value(), 0.15);
    }

    #[test]
    fn degenerate_partitions() {
        let g = WebGraph::from_edges(7, (0..7).map(|i| (i, (i + 1) % 7))).unwrap();
        let t = Partition::trivial(&g);
        assert_eq!(t.num_groups(), 7);
        assert!(t.group_sizes().iter().all(|&l| l == 1));
        let w = Partition::whole_graph(&g);
        assert_eq!(w.num_groups(), 1);
        assert_eq!(w.group_sizes(), vec![7]);
    }

    #[test]
    fn partition_file() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 0", 0).unwrap();
        let p = Partition::load("0 0\n1 0\n2 1", &g, 0).unwrap();
        assert_eq!(p.num_groups(), 2);
        assert_eq!(p.members(0), &[0, 1]);
        assert_eq!(p.members(1), &[2]);
    }

    #[test]
    fn partition_labels_are_densified() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 0", 0).unwrap();
        let p = Partition::load("# page group\n0 40\n1 7\n2 40", &g, 0).unwrap();
        assert_eq!(p.num_groups(), 2);
        assert_eq!(p.members(0), &[1]);
        assert_eq!(p.members(1), &[0, 2]);
        assert_eq!(p.permutation(), &[1, 0, 2]);
    }

    #[test]
    fn partition_reports_offenders() {
        let g = WebGraph::load_edge_list("0 1\n1 2\n2 3\n3 0", 0).unwrap();
        let err = Partition::load("0 0\n1 0\n1 1\n", &g, 0).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(msg.contains("[1]"), "{msg}");
    }
}
