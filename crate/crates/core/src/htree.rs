//! The hierarchical tree: red, black, and super nodes over a nested
//! partitioning, carrying the interaction edges that represent the
//! (extended) linear system.
//!
//! Leaf red nodes hold the original unknowns; non-leaf red and black nodes
//! hold auxiliary variables introduced when well-separated fill-in is
//! compressed. Super nodes merge sibling red pairs and are the unit of
//! compression and elimination. Distance queries always refer to the
//! adjacency graphs of the original matrix, which are cached per level.

use std::collections::{BTreeSet, HashMap};

use crate::dense::{DenseBlock, LuFactor};
use crate::error::{Error, Result};
use crate::partition::NestedPartitioning;
use crate::sparse::{build_adjacency, AdjacencyGraph, BlockSparseMatrix};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Red,
    Black,
    Super,
}

#[derive(Debug)]
pub struct HNode {
    pub kind: NodeKind,
    /// Superscript level in the tree.
    pub level: usize,
    /// Position within the level.
    pub index: usize,
    /// Defining cluster: red nodes sit at their own level, black and super
    /// nodes at the level above.
    pub cluster_level: usize,
    pub cluster_index: usize,
    /// Variable count: leaf cluster size for leaf reds, assigned rank for
    /// auxiliary nodes, sibling sum for supers. Zero until assigned.
    pub size: usize,
    pub elim_order: Option<usize>,
    pub eliminated: bool,
    /// Red nodes only: folded into a super node.
    pub merged: bool,
    /// Super nodes only: the two red siblings and their sizes.
    pub children: Option<(NodeId, NodeId)>,
    pub(crate) pivot: Option<LuFactor>,
}

impl HNode {
    pub fn is_active(&self) -> bool {
        !self.eliminated && !self.merged
    }

    pub fn pivot(&self) -> Option<&LuFactor> {
        self.pivot.as_ref()
    }
}

#[derive(Debug)]
pub struct HTree {
    nodes: Vec<HNode>,
    edges: HashMap<(NodeId, NodeId), DenseBlock>,
    out_nbrs: Vec<BTreeSet<NodeId>>,
    in_nbrs: Vec<BTreeSet<NodeId>>,
    depth: usize,
    /// red[i][j]: red node j at level i, i in 0..=depth.
    red: Vec<Vec<NodeId>>,
    /// black[i][j]: black node j at level i, i in 1..=depth (black[0] empty).
    black: Vec<Vec<NodeId>>,
    /// supers[i][j]: filled as levels are merged.
    supers: Vec<Vec<NodeId>>,
    /// Adjacency graph of the original matrix under each level's partitioning.
    level_adj: Vec<AdjacencyGraph>,
    np: NestedPartitioning,
}

impl HTree {
    /// Build the initial tree: all reds and blacks, interaction edges only
    /// among leaf red nodes, reproducing the adjacency graph of `m` under
    /// the leaf partitioning.
    pub fn init(m: &BlockSparseMatrix, np: &NestedPartitioning) -> Result<HTree> {
        let l = np.depth();
        let mut nodes = Vec::new();
        let mut red: Vec<Vec<NodeId>> = Vec::with_capacity(l + 1);
        for i in 0..=l {
            let level_p = np.level(i);
            let mut ids = Vec::with_capacity(1 << i);
            for j in 0..(1usize << i) {
                let size = if i == l { level_p.members(j).len() } else { 0 };
                ids.push(nodes.len());
                nodes.push(HNode {
                    kind: NodeKind::Red,
                    level: i,
                    index: j,
                    cluster_level: i,
                    cluster_index: j,
                    size,
                    elim_order: None,
                    eliminated: false,
                    merged: false,
                    children: None,
                    pivot: None,
                });
            }
            red.push(ids);
        }
        let mut black: Vec<Vec<NodeId>> = vec![Vec::new()];
        for i in 1..=l {
            let mut ids = Vec::with_capacity(1 << (i - 1));
            for j in 0..(1usize << (i - 1)) {
                ids.push(nodes.len());
                nodes.push(HNode {
                    kind: NodeKind::Black,
                    level: i,
                    index: j,
                    cluster_level: i - 1,
                    cluster_index: j,
                    size: 0,
                    elim_order: None,
                    eliminated: false,
                    merged: false,
                    children: None,
                    pivot: None,
                });
            }
            black.push(ids);
        }

        let mut level_adj = Vec::with_capacity(l + 1);
        for i in 0..=l {
            level_adj.push(build_adjacency(m, np.level(i))?);
        }

        let n_nodes = nodes.len();
        let mut tree = HTree {
            nodes,
            edges: HashMap::new(),
            out_nbrs: vec![BTreeSet::new(); n_nodes],
            in_nbrs: vec![BTreeSet::new(); n_nodes],
            depth: l,
            red,
            black,
            supers: vec![Vec::new(); l + 1],
            level_adj,
            np: np.clone(),
        };

        // bulk extraction of leaf interaction blocks
        let leaf = np.leaf();
        let mut pos_in_cluster = vec![0usize; m.n()];
        for c in 0..leaf.n_clusters() {
            for (t, &idx) in leaf.members(c).iter().enumerate() {
                pos_in_cluster[idx] = t;
            }
        }
        let mut blocks: HashMap<(usize, usize), DenseBlock> = HashMap::new();
        for (r, c, v) in m.iter() {
            let (ci, cj) = (leaf.cluster_of(r), leaf.cluster_of(c));
            let block = blocks.entry((cj, ci)).or_insert_with(|| {
                DenseBlock::zeros(leaf.members(ci).len(), leaf.members(cj).len())
            });
            *block.at_mut(pos_in_cluster[r], pos_in_cluster[c]) += v;
        }
        let mut keys: Vec<(usize, usize)> = blocks.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let (from_c, to_c) = key;
            let block = blocks.remove(&key).unwrap();
            tree.set_edge(tree.red[l][from_c], tree.red[l][to_c], block);
        }
        Ok(tree)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &HNode {
        &self.nodes[id]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut HNode {
        &mut self.nodes[id]
    }

    pub fn nested_partitioning(&self) -> &NestedPartitioning {
        &self.np
    }

    pub fn red_node(&self, level: usize, j: usize) -> NodeId {
        self.red[level][j]
    }

    pub fn black_node(&self, level: usize, j: usize) -> NodeId {
        self.black[level][j]
    }

    /// Super node j at level i; panics before the level has been merged.
    pub fn super_node(&self, level: usize, j: usize) -> NodeId {
        self.supers[level][j]
    }

    pub fn has_super(&self, level: usize) -> bool {
        !self.supers[level].is_empty()
    }

    /// Red parent of the black node paired with super j at level i.
    pub fn red_parent(&self, level: usize, j: usize) -> NodeId {
        self.red[level - 1][j]
    }

    pub fn root_red(&self) -> NodeId {
        self.red[0][0]
    }

    /// Human-readable node label, e.g. `s2[3]`.
    pub fn label(&self, id: NodeId) -> String {
        let n = &self.nodes[id];
        let k = match n.kind {
            NodeKind::Red => "r",
            NodeKind::Black => "b",
            NodeKind::Super => "s",
        };
        format!("{}{}[{}]", k, n.index, n.level)
    }

    // ---- edges ----

    pub fn block(&self, from: NodeId, to: NodeId) -> Option<&DenseBlock> {
        self.edges.get(&(from, to))
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Insert or replace an edge; 0-dimension blocks are dropped.
    pub(crate) fn set_edge(&mut self, from: NodeId, to: NodeId, block: DenseBlock) {
        if block.is_empty() {
            return;
        }
        debug_assert_eq!(block.rows(), self.nodes[to].size, "edge rows = size(to)");
        debug_assert_eq!(block.cols(), self.nodes[from].size, "edge cols = size(from)");
        self.out_nbrs[from].insert(to);
        self.in_nbrs[to].insert(from);
        self.edges.insert((from, to), block);
    }

    /// Accumulate `delta` into the edge, creating it when absent. Returns
    /// true when a new edge was created.
    pub(crate) fn add_to_edge(&mut self, from: NodeId, to: NodeId, delta: &DenseBlock) -> bool {
        if delta.is_empty() {
            return false;
        }
        if let Some(existing) = self.edges.get_mut(&(from, to)) {
            existing.add_assign(delta);
            false
        } else {
            self.set_edge(from, to, delta.clone());
            true
        }
    }

    pub(crate) fn remove_edge(&mut self, from: NodeId, to: NodeId) -> Option<DenseBlock> {
        let removed = self.edges.remove(&(from, to));
        if removed.is_some() {
            self.out_nbrs[from].remove(&to);
            self.in_nbrs[to].remove(&from);
        }
        removed
    }

    /// Sorted out-neighbors (edge targets) of `id`.
    pub fn out_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.out_nbrs[id].iter().copied().collect()
    }

    pub fn in_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.in_nbrs[id].iter().copied().collect()
    }

    /// Sorted union of in/out neighbors that are still active, self excluded.
    pub fn active_partners(&self, id: NodeId) -> Vec<NodeId> {
        let mut set: BTreeSet<NodeId> = self.out_nbrs[id]
            .iter()
            .chain(self.in_nbrs[id].iter())
            .copied()
            .collect();
        set.remove(&id);
        set.into_iter().filter(|&u| self.nodes[u].is_active()).collect()
    }

    /// All edges sorted by (from, to); test and trace support.
    pub fn edge_list(&self) -> Vec<(NodeId, NodeId)> {
        let mut keys: Vec<_> = self.edges.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    // ---- distance queries ----

    /// Map both nodes to clusters, lift the deeper one to the shallower
    /// level through its ancestors, and measure the BFS shortest path in the
    /// adjacency graph of the original matrix at that level.
    pub fn node_distance(&self, u: NodeId, v: NodeId) -> usize {
        let (lu, ju) = (self.nodes[u].cluster_level, self.nodes[u].cluster_index);
        let (lv, jv) = (self.nodes[v].cluster_level, self.nodes[v].cluster_index);
        let (level, a, b) = if lu <= lv {
            (lu, ju, self.np.ancestor_cluster(lv, jv, lu))
        } else {
            (lv, jv, self.np.ancestor_cluster(lu, ju, lv))
        };
        if a == b {
            return 0;
        }
        self.level_adj[level]
            .bfs_distance(a, b)
            .unwrap_or(usize::MAX)
    }

    /// Distance greater than 1: clusters are not the same and not adjacent.
    pub fn is_well_separated(&self, u: NodeId, v: NodeId) -> bool {
        let (lu, ju) = (self.nodes[u].cluster_level, self.nodes[u].cluster_index);
        let (lv, jv) = (self.nodes[v].cluster_level, self.nodes[v].cluster_index);
        let (level, a, b) = if lu <= lv {
            (lu, ju, self.np.ancestor_cluster(lv, jv, lu))
        } else {
            (lv, jv, self.np.ancestor_cluster(lu, ju, lv))
        };
        if a == b {
            return false;
        }
        !self.level_adj[level].adjacent(a, b)
    }

    /// Cheap check for the sparsity instrumentation: distance <= 2.
    pub fn distance_leq_2(&self, u: NodeId, v: NodeId) -> bool {
        let (lu, ju) = (self.nodes[u].cluster_level, self.nodes[u].cluster_index);
        let (lv, jv) = (self.nodes[v].cluster_level, self.nodes[v].cluster_index);
        let (level, a, b) = if lu <= lv {
            (lu, ju, self.np.ancestor_cluster(lv, jv, lu))
        } else {
            (lv, jv, self.np.ancestor_cluster(lu, ju, lv))
        };
        if a == b {
            return true;
        }
        let adj = &self.level_adj[level];
        if adj.adjacent(a, b) {
            return true;
        }
        adj.neighbors(a).iter().any(|&w| adj.adjacent(w, b))
    }

    /// Adjacency graph of the original matrix at a given cluster level.
    pub fn level_adjacency(&self, level: usize) -> &AdjacencyGraph {
        &self.level_adj[level]
    }

    // ---- merging ----

    /// Merge the sibling red pair j at `level` into a super node. Every edge
    /// incident to either sibling is re-expressed against the super node by
    /// block concatenation with zero-filled missing quadrants.
    pub(crate) fn merge_red_nodes(&mut self, level: usize, j: usize) -> NodeId {
        let r0 = self.red[level][2 * j];
        let r1 = self.red[level][2 * j + 1];
        let s0 = self.nodes[r0].size;
        let s1 = self.nodes[r1].size;
        let sid = self.nodes.len();
        self.nodes.push(HNode {
            kind: NodeKind::Super,
            level,
            index: j,
            cluster_level: level - 1,
            cluster_index: j,
            size: s0 + s1,
            elim_order: None,
            eliminated: false,
            merged: false,
            children: Some((r0, r1)),
            pivot: None,
        });
        self.out_nbrs.push(BTreeSet::new());
        self.in_nbrs.push(BTreeSet::new());
        if self.supers[level].len() <= j {
            self.supers[level].resize(j + 1, usize::MAX);
        }
        self.supers[level][j] = sid;

        // gather the affected neighbor set (self pair handled separately)
        let mut others: BTreeSet<NodeId> = BTreeSet::new();
        for &r in &[r0, r1] {
            others.extend(self.out_nbrs[r].iter().copied());
            others.extend(self.in_nbrs[r].iter().copied());
        }
        others.remove(&r0);
        others.remove(&r1);

        // self-edge quadrants
        let mut self_block = DenseBlock::zeros(s0 + s1, s0 + s1);
        let mut any_self = false;
        for (from, to, roff, coff) in [
            (r0, r0, 0, 0),
            (r0, r1, s0, 0),
            (r1, r0, 0, s0),
            (r1, r1, s0, s0),
        ] {
            if let Some(b) = self.remove_edge(from, to) {
                self_block.paste(roff, coff, &b);
                any_self = true;
            }
        }
        if any_self {
            self.set_edge(sid, sid, self_block);
        }

        for u in others {
            let su = self.nodes[u].size;
            // outgoing: (r0 -> u | r1 -> u) becomes s -> u, columns stacked
            let b0 = self.remove_edge(r0, u);
            let b1 = self.remove_edge(r1, u);
            if b0.is_some() || b1.is_some() {
                let mut merged = DenseBlock::zeros(su, s0 + s1);
                if let Some(b) = b0 {
                    merged.paste(0, 0, &b);
                }
                if let Some(b) = b1 {
                    merged.paste(0, s0, &b);
                }
                self.set_edge(sid, u, merged);
            }
            // incoming: (u -> r0 ; u -> r1) becomes u -> s, rows stacked
            let b0 = self.remove_edge(u, r0);
            let b1 = self.remove_edge(u, r1);
            if b0.is_some() || b1.is_some() {
                let mut merged = DenseBlock::zeros(s0 + s1, su);
                if let Some(b) = b0 {
                    merged.paste(0, 0, &b);
                }
                if let Some(b) = b1 {
                    merged.paste(s0, 0, &b);
                }
                self.set_edge(u, sid, merged);
            }
        }
        self.nodes[r0].merged = true;
        self.nodes[r1].merged = true;
        sid
    }

    // ---- materialization (tests, traces) ----

    /// Dense materialization of the system represented by a chosen set of
    /// nodes, laid out in the order given. Test and inspection support.
    pub fn materialize(&self, node_order: &[NodeId]) -> DenseBlock {
        let mut offset = HashMap::new();
        let mut total = 0;
        for &id in node_order {
            offset.insert(id, total);
            total += self.nodes[id].size;
        }
        let mut m = DenseBlock::zeros(total, total);
        for (&(from, to), block) in &self.edges {
            let (Some(&fo), Some(&to_off)) = (offset.get(&from), offset.get(&to)) else {
                continue;
            };
            for r in 0..block.rows() {
                for c in 0..block.cols() {
                    *m.at_mut(to_off + r, fo + c) += block.at(r, c);
                }
            }
        }
        m
    }

    /// Ids of all currently active nodes, sorted.
    pub fn active_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&id| self.nodes[id].is_active())
            .collect()
    }

    pub(crate) fn singular_pivot_error(&self, id: NodeId) -> Error {
        Error::SingularPivot {
            node: self.label(id),
            level: self.nodes[id].level,
            size: self.nodes[id].size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::build_nested_partitioning;
    use crate::problems;
    use crate::sparse::Partitioning;

    fn tree_for(m: &BlockSparseMatrix, depth: usize) -> HTree {
        let np = build_nested_partitioning(m, depth, 0).unwrap();
        HTree::init(m, &np).unwrap()
    }

    #[test]
    fn init_identity_has_only_leaf_self_edges() {
        let m = problems::identity(8);
        let t = tree_for(&m, 2);
        for (from, to) in t.edge_list() {
            assert_eq!(from, to);
            assert_eq!(t.node(from).kind, NodeKind::Red);
            assert_eq!(t.node(from).level, 2);
        }
        assert_eq!(t.edge_count(), 4);
    }

    #[test]
    fn init_leaf_edges_match_adjacency() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 64;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 4.0));
        }
        for _ in 0..150 {
            entries.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
        }
        let m = BlockSparseMatrix::from_coo(n, &entries).unwrap();
        let np = build_nested_partitioning(&m, 3, 0).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        let adj = build_adjacency(&m, np.leaf()).unwrap();
        let mut expected = Vec::new();
        for i in 0..adj.n_vertices() {
            for &j in adj.out_neighbors(i) {
                expected.push((t.red_node(3, i), t.red_node(3, j)));
            }
        }
        expected.sort_unstable();
        assert_eq!(t.edge_list(), expected);
    }

    #[test]
    fn init_blocks_match_extract_block() {
        let m = problems::poisson2d(4, 4, problems::Boundary::Dirichlet);
        let np = build_nested_partitioning(&m, 2, 0).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        let leaf = np.leaf();
        for (from, to) in t.edge_list() {
            let fi = t.node(from).cluster_index;
            let ti = t.node(to).cluster_index;
            let expect = crate::sparse::extract_block(&m, leaf, ti, fi);
            assert_eq!(t.block(from, to).unwrap(), &expect);
        }
    }

    #[test]
    fn merge_zero_fills_missing_sibling() {
        // contiguous leaves of n=10 at depth 2: {0,1,2},{3,4},{5,6,7},{8,9};
        // sibling pair 0 has sizes 3 and 2, with an edge from the first
        // sibling only to the third cluster
        let mut entries: Vec<(usize, usize, f64)> = (0..10).map(|i| (i, i, 1.0)).collect();
        entries.push((5, 0, 7.0)); // block A[cluster2, cluster0] nonzero
        let m = BlockSparseMatrix::from_coo(10, &entries).unwrap();
        let np = crate::partition::build_nested_partitioning_with(&m, 2, 0, true).unwrap();
        let mut t = HTree::init(&m, &np).unwrap();
        let r0 = t.red_node(2, 0);
        let r2 = t.red_node(2, 2);
        assert!(t.has_edge(r0, r2));
        let s = t.merge_red_nodes(2, 0);
        assert_eq!(t.node(s).size, 5);
        // outgoing edge re-expressed with the second sibling's two zero
        // columns appended
        let out = t.block(s, r2).unwrap();
        assert_eq!((out.rows(), out.cols()), (3, 5));
        assert_eq!(out.at(0, 0), 7.0);
        for r in 0..3 {
            for c in 3..5 {
                assert_eq!(out.at(r, c), 0.0);
            }
        }
        // super self-edge is block-diagonal of the sibling self-edges
        let self_block = t.block(s, s).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(self_block.at(i, j), expect);
            }
        }
    }

    #[test]
    fn merge_block_diagonal_self_edges() {
        let m = problems::identity(4);
        let np = crate::partition::build_nested_partitioning_with(&m, 2, 0, true).unwrap();
        let mut t = HTree::init(&m, &np).unwrap();
        let s = t.merge_red_nodes(2, 0);
        let block = t.block(s, s).unwrap();
        assert_eq!(block.rows(), 2);
        assert_eq!(block.at(0, 0), 1.0);
        assert_eq!(block.at(1, 1), 1.0);
        assert_eq!(block.at(0, 1), 0.0);
        assert_eq!(block.at(1, 0), 0.0);
    }

    #[test]
    fn merge_preserves_represented_system() {
        let m = problems::poisson2d(4, 4, problems::Boundary::Dirichlet);
        let np = build_nested_partitioning(&m, 3, 0).unwrap();
        let mut t = HTree::init(&m, &np).unwrap();
        // materialize leaves in sibling-pair order so the merged layout lines up
        let order: Vec<NodeId> = (0..8).map(|j| t.red_node(3, j)).collect();
        let before = t.materialize(&order);
        let mut super_order = Vec::new();
        for j in 0..4 {
            super_order.push(t.merge_red_nodes(3, j));
        }
        let after = t.materialize(&super_order);
        assert_eq!(before.rows(), after.rows());
        assert!(before.sub(&after).frobenius_norm() == 0.0);
    }

    #[test]
    fn distance_examples() {
        // 8-cluster chain at the leaf level
        let m = problems::chain1d(8, false);
        let np = crate::partition::build_nested_partitioning_with(&m, 3, 0, true).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        let u = t.red_node(3, 0);
        assert_eq!(t.node_distance(u, u), 0);
        assert_eq!(t.node_distance(u, t.red_node(3, 1)), 1);
        assert_eq!(t.node_distance(u, t.red_node(3, 7)), 7);
        // BFS oracle on the path graph: distance between leaves i and j is |i-j|
        for i in 0..8usize {
            for j in 0..8usize {
                let d = t.node_distance(t.red_node(3, i), t.red_node(3, j));
                assert_eq!(d, i.abs_diff(j));
            }
        }
    }

    #[test]
    fn well_separated_examples() {
        let m = problems::chain1d(8, false);
        let np = crate::partition::build_nested_partitioning_with(&m, 3, 0, true).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        assert!(!t.is_well_separated(t.red_node(3, 0), t.red_node(3, 1)));
        assert!(!t.is_well_separated(t.red_node(3, 3), t.red_node(3, 3)));
        assert!(t.is_well_separated(t.red_node(3, 0), t.red_node(3, 2)));
        assert!(t.distance_leq_2(t.red_node(3, 0), t.red_node(3, 2)));
        assert!(!t.distance_leq_2(t.red_node(3, 0), t.red_node(3, 3)));
    }

    #[test]
    fn cross_level_distance_lifts_clusters() {
        let m = problems::chain1d(8, false);
        let np = crate::partition::build_nested_partitioning_with(&m, 3, 0, true).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        // red 0 at level 2 covers leaves {0,1}; leaf 7 lifts to cluster 3 at level 2
        let shallow = t.red_node(2, 0);
        let deep = t.red_node(3, 7);
        // chain at level 2: clusters 0-1-2-3, distance 3
        assert_eq!(t.node_distance(shallow, deep), 3);
        assert_eq!(t.node_distance(deep, shallow), 3);
        // ancestral: leaf 1 lifts into cluster 0 at level 2 -> distance 0
        assert_eq!(t.node_distance(shallow, t.red_node(3, 1)), 0);
    }

    #[test]
    fn distance_symmetry_and_triangle_at_fixed_level() {
        let m = problems::poisson2d(6, 6, problems::Boundary::Dirichlet);
        let np = build_nested_partitioning(&m, 3, 0).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        let ids: Vec<NodeId> = (0..8).map(|j| t.red_node(3, j)).collect();
        for &a in &ids {
            for &b in &ids {
                let dab = t.node_distance(a, b);
                assert_eq!(dab, t.node_distance(b, a));
                for &c in &ids {
                    let dac = t.node_distance(a, c);
                    let dcb = t.node_distance(c, b);
                    assert!(dab <= dac + dcb);
                }
            }
        }
    }

    #[test]
    fn materialize_reassembles_permuted_matrix() {
        let m = problems::poisson2d(3, 3, problems::Boundary::Dirichlet);
        let np = build_nested_partitioning(&m, 2, 0).unwrap();
        let t = HTree::init(&m, &np).unwrap();
        let order: Vec<NodeId> = (0..4).map(|j| t.red_node(2, j)).collect();
        let mat = t.materialize(&order);
        // permutation vector: original index -> materialized position
        let leaf = np.leaf();
        let mut perm = Vec::new();
        for j in 0..4 {
            perm.extend_from_slice(leaf.members(j));
        }
        let dense = m.to_dense();
        for (pi, &i) in perm.iter().enumerate() {
            for (pj, &j) in perm.iter().enumerate() {
                assert_eq!(mat.at(pi, pj), dense.at(i, j));
            }
        }
    }

    #[test]
    fn merge_keyed_by_trivial_partitioning() {
        // one-cluster partitioning sanity for Partitioning::trivial
        let p = Partitioning::trivial(3);
        assert_eq!(p.n_clusters(), 1);
        assert_eq!(p.members(0), &[0, 1, 2]);
    }
}
