use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Immutable undirected simple graph with dense internal indices and an
/// external-label map. Neighbor lists are sorted, so traversal order (and
/// everything downstream of it) is deterministic.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    labels: Vec<String>,
    index: HashMap<String, u32>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from labelled edges. Labels are mapped to dense indices
    /// in first-seen order; self-loops and duplicate edges are dropped.
    pub fn from_edges<I, S>(edges: I) -> Graph
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut builder = GraphBuilder::new();
        for (a, b) in edges {
            let u = builder.intern(a.into());
            let v = builder.intern(b.into());
            builder.add_edge(u, v);
        }
        builder.finish()
    }

    /// Builds a graph on `n` nodes labelled "0".."n-1" from index pairs.
    /// Nodes without edges are retained (unlike `from_edges`, which never
    /// sees them).
    pub fn from_index_edges(n: u32, edges: &[(u32, u32)]) -> Graph {
        let mut builder = GraphBuilder::new();
        for i in 0..n {
            builder.intern(i.to_string());
        }
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge index out of range");
            builder.add_edge(u, v);
        }
        builder.finish()
    }

    /// Reads a SNAP-style edge list: `#` comment lines, two whitespace
    /// separated labels per data line.
    pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
        let mut builder = GraphBuilder::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("expected two node labels, got {line:?}"),
                    })
                }
            };
            let u = builder.intern(a.to_string());
            let v = builder.intern(b.to_string());
            builder.add_edge(u, v);
        }
        Ok(builder.finish())
    }

    /// Writes the edge list in the same format `load_edge_list` reads.
    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for u in 0..self.node_count() as u32 {
            for &v in self.neighbors(u) {
                if u < v {
                    writeln!(writer, "{}\t{}", self.labels[u as usize], self.labels[v as usize])?;
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn label(&self, v: u32) -> &str {
        &self.labels[v as usize]
    }

    pub fn node_index(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    /// Total degree of a node set.
    pub fn volume(&self, nodes: &[u32]) -> usize {
        nodes.iter().map(|&v| self.degree(v)).sum()
    }

    /// Dense adjacency matrix; only materialized for factorization-sized
    /// subgraphs.
    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut a = Array2::zeros((n, n));
        for u in 0..n as u32 {
            for &v in self.neighbors(u) {
                a[(u as usize, v as usize)] = 1.0;
            }
        }
        a
    }

    /// Subgraph induced on `nodes`, plus the local-index → parent-index map.
    /// Local indices follow the sorted order of `nodes`, and labels carry
    /// over, so results are deterministic.
    pub fn induced_subgraph(&self, nodes: &[u32]) -> Result<(Graph, Vec<u32>)> {
        let mut to_parent: Vec<u32> = nodes.to_vec();
        to_parent.sort_unstable();
        to_parent.dedup();
        if let Some(&v) = to_parent.iter().find(|&&v| v as usize >= self.node_count()) {
            return Err(Error::Domain(format!("node index {v} out of range")));
        }
        let mut to_local: HashMap<u32, u32> = HashMap::with_capacity(to_parent.len());
        for (i, &v) in to_parent.iter().enumerate() {
            to_local.insert(v, i as u32);
        }
        let mut builder = GraphBuilder::new();
        for &v in &to_parent {
            builder.intern(self.labels[v as usize].clone());
        }
        for &u in &to_parent {
            let lu = to_local[&u];
            for &v in self.neighbors(u) {
                if let Some(&lv) = to_local.get(&v) {
                    if lu < lv {
                        builder.add_edge(lu, lv);
                    }
                }
            }
        }
        Ok((builder.finish(), to_parent))
    }

    /// Nodes of the connected component containing `start`, sorted.
    pub fn connected_component(&self, start: u32) -> Vec<u32> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![start];
        seen[start as usize] = true;
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            out.push(u);
            for &v in self.neighbors(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.connected_component(0).len() == self.node_count()
    }

    /// Biconnected components as sorted node sets (Hopcroft–Tarjan, iterative).
    /// Every edge lands in exactly one component; isolated nodes yield none.
    pub fn biconnected_components(&self) -> Vec<Vec<u32>> {
        let n = self.node_count();
        let mut components = Vec::new();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0usize;
        let mut edge_stack: Vec<(u32, u32)> = Vec::new();
        // Explicit DFS frame: (node, parent, index into neighbor list).
        let mut frames: Vec<(u32, u32, usize)> = Vec::new();

        for root in 0..n as u32 {
            if disc[root as usize] != usize::MAX {
                continue;
            }
            disc[root as usize] = timer;
            low[root as usize] = timer;
            timer += 1;
            frames.push((root, u32::MAX, 0));
            while let Some(&mut (u, parent, ref mut next)) = frames.last_mut() {
                if *next < self.degree(u) {
                    let v = self.adj[u as usize][*next];
                    *next += 1;
                    if disc[v as usize] == usize::MAX {
                        edge_stack.push((u, v));
                        disc[v as usize] = timer;
                        low[v as usize] = timer;
                        timer += 1;
                        frames.push((v, u, 0));
                    } else if v != parent && disc[v as usize] < disc[u as usize] {
                        edge_stack.push((u, v));
                        low[u as usize] = low[u as usize].min(disc[v as usize]);
                    }
                } else {
                    frames.pop();
                    if let Some(&mut (p, _, _)) = frames.last_mut() {
                        low[p as usize] = low[p as usize].min(low[u as usize]);
                        if low[u as usize] >= disc[p as usize] {
                            // p is an articulation point (or root): pop one component.
                            let mut nodes = Vec::new();
                            while let Some(&(a, b)) = edge_stack.last() {
                                if disc[a as usize] >= disc[u as usize]
                                    || (a == p && b == u)
                                {
                                    edge_stack.pop();
                                    nodes.push(a);
                                    nodes.push(b);
                                    if a == p && b == u {
                                        break;
                                    }
                                } else {
                                    break;
                                }
                            }
                            nodes.sort_unstable();
                            nodes.dedup();
                            components.push(nodes);
                        }
                    }
                }
            }
        }
        components.sort();
        components
    }

    /// True iff the whole graph is a single biconnected component.
    pub fn is_biconnected(&self) -> bool {
        let comps = self.biconnected_components();
        comps.len() == 1 && comps[0].len() == self.node_count()
    }
}

struct GraphBuilder {
    adj: Vec<Vec<u32>>,
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl GraphBuilder {
    fn new() -> Self {
        GraphBuilder { adj: Vec::new(), labels: Vec::new(), index: HashMap::new() }
    }

    fn intern(&mut self, label: String) -> u32 {
        if let Some(&i) = self.index.get(&label) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.labels.push(label.clone());
        self.index.insert(label, i);
        self.adj.push(Vec::new());
        i
    }

    fn add_edge(&mut self, u: u32, v: u32) {
        if u == v {
            return;
        }
        self.adj[u as usize].push(v);
        self.adj[v as usize].push(u);
    }

    fn finish(mut self) -> Graph {
        let mut edge_count = 0;
        for list in &mut self.adj {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Graph { adj: self.adj, labels: self.labels, index: self.index, edge_count: edge_count / 2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(n: u32) -> Graph {
        Graph::from_index_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>())
    }

    #[test]
    fn load_two_edge_path() {
        let g = Graph::load_edge_list("0 1\n1 2\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn load_dedups_and_drops_self_loops() {
        let g = Graph::load_edge_list("a b\nb a\na a\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn load_rejects_malformed_line() {
        let err = Graph::load_edge_list("0 1\n0 1 2\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_skips_comments_and_blank_lines() {
        let g = Graph::load_edge_list("# header\n\n0 1\n".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn karate_fixture_counts() {
        let data = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/karate.edges")).unwrap();
        let g = Graph::load_edge_list(&data[..]).unwrap();
        assert_eq!(g.node_count(), 34);
        assert_eq!(g.edge_count(), 78);
    }

    #[test]
    fn induced_subgraph_of_triangle() {
        let g = Graph::from_index_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        let (sub, map) = g.induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(sub.node_count(), 2);
        assert_eq!(sub.edge_count(), 1);
        assert_eq!(map, vec![0, 1]);
    }

    #[test]
    fn induced_subgraph_full_is_copy() {
        let g = path(5);
        let (sub, _) = g.induced_subgraph(&[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(sub.edge_count(), g.edge_count());
        assert_eq!(sub.node_count(), g.node_count());
    }

    #[test]
    fn induced_subgraph_rejects_out_of_range() {
        let g = path(3);
        assert!(g.induced_subgraph(&[0, 7]).is_err());
    }

    #[test]
    fn biconnected_path_splits_at_articulation() {
        let g = path(3);
        assert_eq!(g.biconnected_components(), vec![vec![0, 1], vec![1, 2]]);
    }

    #[test]
    fn biconnected_triangle_is_single_component() {
        let g = Graph::from_index_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(g.biconnected_components(), vec![vec![0, 1, 2]]);
        assert!(g.is_biconnected());
    }

    #[test]
    fn round_trip_preserves_structure() {
        let g = Graph::from_index_edges(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (4, 5)]);
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let h = Graph::load_edge_list(&buf[..]).unwrap();
        assert_eq!(h.edge_count(), g.edge_count());
        for u in 0..g.node_count() as u32 {
            for &v in g.neighbors(u) {
                let hu = h.node_index(g.label(u)).unwrap();
                let hv = h.node_index(g.label(v)).unwrap();
                assert!(h.has_edge(hu, hv));
            }
        }
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric(edges in proptest::collection::vec((0u32..20, 0u32..20), 0..60)) {
            let g = Graph::from_index_edges(20, &edges);
            for u in 0..20u32 {
                for &v in g.neighbors(u) {
                    prop_assert!(g.has_edge(v, u));
                    prop_assert_ne!(u, v);
                }
            }
            let total: usize = (0..20u32).map(|v| g.degree(v)).sum();
            prop_assert_eq!(total, 2 * g.edge_count());
        }

        #[test]
        fn induced_subgraph_never_invents_edges(
            edges in proptest::collection::vec((0u32..20, 0u32..20), 0..80),
            subset in proptest::collection::vec(0u32..20, 1..20),
        ) {
            let g = Graph::from_index_edges(20, &edges);
            let (sub, map) = g.induced_subgraph(&subset).unwrap();
            // Compare against a brute-force filter of the parent edge list.
            for u in 0..sub.node_count() as u32 {
                for &v in sub.neighbors(u) {
                    prop_assert!(g.has_edge(map[u as usize], map[v as usize]));
                }
            }
            let mut expected = 0;
            for (i, &pu) in map.iter().enumerate() {
                for &pv in map.iter().skip(i + 1) {
                    if g.has_edge(pu, pv) {
                        expected += 1;
                    }
                }
            }
            prop_assert_eq!(sub.edge_count(), expected);
        }

        #[test]
        fn biconnected_components_cover_edges_once(
            edges in proptest::collection::vec((0u32..12, 0u32..12), 0..40),
        ) {
            let g = Graph::from_index_edges(12, &edges);
            let comps = g.biconnected_components();
            let mut covered = 0usize;
            for comp in &comps {
                let (sub, _) = g.induced_subgraph(comp).unwrap();
                covered += sub.edge_count();
            }
            // Components pairwise share at most one node, so induced edge
            // counts add up exactly to the full edge set.
            prop_assert_eq!(covered, g.edge_count());
            for (i, a) in comps.iter().enumerate() {
                for b in comps.iter().skip(i + 1) {
                    let shared = a.iter().filter(|x| b.binary_search(x).is_ok()).count();
                    prop_assert!(shared <= 1);
                }
            }
        }
    }
}
