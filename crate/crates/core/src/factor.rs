//! Level-by-level factorization: merge sibling reds into super nodes,
//! compress well-separated interactions through auxiliary variables, and
//! eliminate. The tree is mutated in place and afterwards holds the
//! hierarchical factorization: every eliminated node keeps its pivot LU and
//! its frozen incident edges for the solve traversals.

use std::time::Instant;

use serde::Serialize;

use crate::dense::{lu_factor, DenseBlock, LowRankFactor, SvdCutoff};
use crate::error::{Error, Result};
use crate::htree::{HTree, NodeId};
use crate::partition::{build_nested_partitioning_with, choose_depth};
use crate::sparse::BlockSparseMatrix;
use crate::trace::{TraceEvent, TraceKind, TraceLog};

/// Singular-value truncation criterion for fill-in compression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TruncationRule {
    /// Keep sigma_k / sigma_0 >= eps (ties kept).
    RelativeSigma(f64),
    /// Keep the smallest rank whose discarded tail, relative to the
    /// Frobenius norm of every stacked block at the current level and all
    /// completed levels, stays below eps.
    FrobeniusGlobal(f64),
}

impl TruncationRule {
    pub fn epsilon(&self) -> f64 {
        match self {
            TruncationRule::RelativeSigma(e) | TruncationRule::FrobeniusGlobal(e) => *e,
        }
    }
}

/// Tree depth: explicit, or derived from a target leaf-cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DepthSpec {
    Depth(usize),
    TargetLeaf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PartitionStrategy {
    GraphBisection,
    /// Contiguous index-range halving; deterministic layouts for traces.
    Contiguous,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorConfig {
    pub rule: TruncationRule,
    pub depth: DepthSpec,
    pub seed: u64,
    pub instrument: bool,
    pub partition: PartitionStrategy,
}

impl FactorConfig {
    /// Default configuration at the given low-rank precision.
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            rule: TruncationRule::RelativeSigma(epsilon),
            depth: DepthSpec::TargetLeaf(32),
            seed: 0,
            instrument: false,
            partition: PartitionStrategy::GraphBisection,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.rule.epsilon()
    }

    fn validate(&self) -> Result<()> {
        let eps = self.epsilon();
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be in (0, 1], got {eps}"
            )));
        }
        if let DepthSpec::Depth(0) | DepthSpec::TargetLeaf(0) = self.depth {
            return Err(Error::InvalidInput("depth/target_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-level factorization statistics.
#[derive(Debug, Clone, Serialize)]
pub struct LevelStats {
    pub level: usize,
    pub super_count: usize,
    /// d_i: maximum super-node size at this level.
    pub max_super_size: usize,
    pub avg_super_size: f64,
    /// Average assigned rank over compression events.
    pub avg_rank: f64,
    /// avg rank / avg size over the compressed super nodes.
    pub compression_ratio: f64,
    /// Maximum number of distance-1 / distance-2 cluster neighbors.
    pub kappa1: usize,
    pub kappa2: usize,
    pub compress_events: usize,
    pub aux_vars: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorStats {
    pub n: usize,
    pub depth: usize,
    pub depth_clamped: bool,
    pub levels: Vec<LevelStats>,
    pub aux_var_total: usize,
    /// Observed growth rate of d_i: max over levels of (d_i / d_l)^(1/(l-i)).
    /// Diagnostic only; linear complexity expects this below 2^(1/3).
    pub alpha_hat: f64,
    pub svd_seconds: f64,
    pub gemm_seconds: f64,
    pub pivot_seconds: f64,
    pub total_seconds: f64,
    /// Instrumented: edges created between nodes at distance > 2 (the
    /// sparsity guarantee expects zero).
    pub edge_distance_violations: usize,
    pub edges_created: usize,
}

/// JSON rendering of factorization statistics; used by bindings.
pub fn factor_stats_json(stats: &FactorStats) -> Option<String> {
    serde_json::to_string_pretty(stats).ok()
}

/// Outcome of one node elimination; identities of created fill edges are
/// reported for instrumentation.
#[derive(Debug, Default)]
pub struct EliminationOutcome {
    pub created_edges: Vec<(NodeId, NodeId)>,
    pub updated_edges: usize,
    pub pivot_seconds: f64,
    pub gemm_seconds: f64,
}

/// Outcome of one super-node compression.
#[derive(Debug, Default)]
pub struct CompressOutcome {
    pub partners: Vec<NodeId>,
    pub rank: usize,
    pub dropped_energy: f64,
    pub stack_frobenius_sq: f64,
    pub created_edges: Vec<(NodeId, NodeId)>,
}

/// Eliminate node `p`: Schur-update every (incoming, outgoing) pair of
/// active neighbors, store the pivot LU on the node, and retain its frozen
/// edges for the solve phase. Size-0 nodes are no-ops but still receive an
/// elimination order.
pub fn eliminate_node(tree: &mut HTree, p: NodeId, order: usize) -> Result<EliminationOutcome> {
    let mut outcome = EliminationOutcome::default();
    {
        let node = tree.node_mut(p);
        debug_assert!(node.elim_order.is_none(), "node eliminated twice");
        node.elim_order = Some(order);
    }
    if let Some((r0, r1)) = tree.node(p).children {
        tree.node_mut(r0).elim_order = Some(order);
        tree.node_mut(r1).elim_order = Some(order);
    }
    if tree.node(p).size == 0 {
        tree.node_mut(p).eliminated = true;
        return Ok(outcome);
    }
    let t_pivot = Instant::now();
    let pivot_block = match tree.block(p, p) {
        Some(b) => b.clone(),
        None => return Err(tree.singular_pivot_error(p)),
    };
    let lu = lu_factor(&pivot_block).map_err(|_| tree.singular_pivot_error(p))?;

    let in_nbrs: Vec<NodeId> = tree
        .in_neighbors(p)
        .into_iter()
        .filter(|&k| k != p && tree.node(k).is_active())
        .collect();
    let out_nbrs: Vec<NodeId> = tree
        .out_neighbors(p)
        .into_iter()
        .filter(|&q| q != p && tree.node(q).is_active())
        .collect();

    // w_k = pivot^-1 * Mat(k -> p)
    let solved: Vec<(NodeId, DenseBlock)> = in_nbrs
        .iter()
        .map(|&k| (k, lu.solve(tree.block(k, p).expect("incoming edge"))))
        .collect();
    outcome.pivot_seconds = t_pivot.elapsed().as_secs_f64();

    let t_gemm = Instant::now();
    for &q in &out_nbrs {
        let a_qp = tree.block(p, q).expect("outgoing edge").clone();
        for (k, w) in &solved {
            let mut delta = DenseBlock::zeros(a_qp.rows(), w.cols());
            crate::dense::gemm(-1.0, &a_qp, w, 0.0, &mut delta);
            if tree.add_to_edge(*k, q, &delta) {
                outcome.created_edges.push((*k, q));
            } else {
                outcome.updated_edges += 1;
            }
        }
    }
    outcome.gemm_seconds = t_gemm.elapsed().as_secs_f64();
    let node = tree.node_mut(p);
    node.pivot = Some(lu);
    node.eliminated = true;
    Ok(outcome)
}

/// Compress all well-separated interactions of super node `s` into auxiliary
/// variables on its black node and red parent, applying the five edge
/// updates. A rank-0 result simply deletes the well-separated edges.
pub fn compress_super_node(
    tree: &mut HTree,
    s: NodeId,
    rule: &TruncationRule,
    frob_reference_sq: &mut f64,
) -> Result<CompressOutcome> {
    let mut outcome = CompressOutcome::default();
    let m = tree.node(s).size;
    if m == 0 {
        return Ok(outcome);
    }
    let partners: Vec<NodeId> = tree
        .active_partners(s)
        .into_iter()
        .filter(|&u| tree.is_well_separated(s, u))
        .collect();
    if partners.is_empty() {
        return Ok(outcome);
    }
    outcome.partners = partners.clone();

    let heights: Vec<usize> = partners.iter().map(|&u| tree.node(u).size).collect();
    let total: usize = heights.iter().sum();
    let mut stack = DenseBlock::zeros(2 * total, m);
    let mut offset = 0;
    // outgoing blocks A_k = Mat(s -> p_k)
    for &p in &partners {
        if let Some(b) = tree.block(s, p) {
            stack.paste(offset, 0, b);
        }
        offset += tree.node(p).size;
    }
    // incoming blocks transposed: B_k with Mat(p_k -> s) = B_k^T
    for &p in &partners {
        if let Some(b) = tree.block(p, s) {
            stack.paste(offset, 0, &b.transpose());
        }
        offset += tree.node(p).size;
    }
    let stack_frob = stack.frobenius_norm();
    outcome.stack_frobenius_sq = stack_frob * stack_frob;
    *frob_reference_sq += outcome.stack_frobenius_sq;

    let cutoff = match rule {
        TruncationRule::RelativeSigma(eps) => SvdCutoff::RelativeSigma { eps: *eps },
        TruncationRule::FrobeniusGlobal(eps) => SvdCutoff::FrobeniusRelative {
            eps: *eps,
            reference: frob_reference_sq.sqrt(),
        },
    };
    let mut stacked_heights = heights.clone();
    stacked_heights.extend_from_slice(&heights);
    let factor = LowRankFactor::compress(&stack, &stacked_heights, cutoff)?;
    let rank = factor.rank;
    outcome.rank = rank;
    outcome.dropped_energy = factor.dropped_energy;

    // rule 1: remove the well-separated edges in both directions
    for &p in &partners {
        tree.remove_edge(s, p);
        tree.remove_edge(p, s);
    }
    if rank == 0 {
        return Ok(outcome);
    }

    let level = tree.node(s).level;
    let j = tree.node(s).index;
    let b = tree.black_node(level, j);
    let pb = tree.red_parent(level, j);
    debug_assert_eq!(tree.node(b).size, 0, "black node compressed twice");
    debug_assert_eq!(tree.node(pb).size, 0, "red parent compressed twice");
    tree.node_mut(b).size = rank;
    tree.node_mut(pb).size = rank;

    // rules 2 and 3: low-rank legs between the red parent and each partner
    for (k, &p) in partners.iter().enumerate() {
        let r_k = &factor.stacked_left[k];
        let q_k = &factor.stacked_left[partners.len() + k];
        tree.set_edge(pb, p, r_k.clone());
        tree.set_edge(p, pb, q_k.transpose());
        outcome.created_edges.push((pb, p));
        outcome.created_edges.push((p, pb));
    }
    // rule 4: tie the super node to its black node through V
    tree.set_edge(s, b, factor.right.transpose());
    tree.set_edge(b, s, factor.right.clone());
    outcome.created_edges.push((s, b));
    outcome.created_edges.push((b, s));
    // rule 5: minus-identity coupling between the black node and red parent
    tree.set_edge(b, pb, DenseBlock::scaled_identity(rank, -1.0));
    tree.set_edge(pb, b, DenseBlock::scaled_identity(rank, -1.0));
    outcome.created_edges.push((b, pb));
    outcome.created_edges.push((pb, b));
    Ok(outcome)
}

/// Hierarchical factorization handle: the mutated tree plus the elimination
/// sequence. Immutable after construction; supports repeated solves.
pub struct Factorization {
    tree: HTree,
    elim_sequence: Vec<NodeId>,
    n: usize,
    config: FactorConfig,
    trace: TraceLog,
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tree(&self) -> &HTree {
        &self.tree
    }

    pub fn config(&self) -> &FactorConfig {
        &self.config
    }

    /// Nodes in ascending elimination order.
    pub fn elimination_sequence(&self) -> &[NodeId] {
        &self.elim_sequence
    }

    /// Step trace; empty unless the factorization ran instrumented.
    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    /// Solve A x = b. Allocates a fresh session; sessions can also be
    /// managed explicitly for repeated solves.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut session = crate::solve::SolveSession::new(self);
        session.set_rhs(b)?;
        session.run();
        Ok(session.gather_solution())
    }
}

struct LevelAccumulator {
    ranks: Vec<usize>,
    compressed_sizes: Vec<usize>,
    aux_vars: usize,
}

/// Factorize `m` under `cfg`.
pub fn factorize(
    m: &BlockSparseMatrix,
    cfg: &FactorConfig,
) -> Result<(Factorization, FactorStats)> {
    cfg.validate()?;
    let t_start = Instant::now();
    let n = m.n();
    let requested_depth = match cfg.depth {
        DepthSpec::Depth(l) => l,
        DepthSpec::TargetLeaf(t) => choose_depth(n, t),
    };
    let np = build_nested_partitioning_with(
        m,
        requested_depth,
        cfg.seed,
        cfg.partition == PartitionStrategy::Contiguous,
    )?;
    let l = np.depth();
    let mut tree = HTree::init(m, &np)?;

    let mut stats = FactorStats {
        n,
        depth: l,
        depth_clamped: np.was_clamped(),
        levels: Vec::new(),
        aux_var_total: 0,
        alpha_hat: 0.0,
        svd_seconds: 0.0,
        gemm_seconds: 0.0,
        pivot_seconds: 0.0,
        total_seconds: 0.0,
        edge_distance_violations: 0,
        edges_created: 0,
    };
    let mut trace = TraceLog::default();
    let mut frob_reference_sq = 0.0f64;
    let mut order = 0usize;
    let mut elim_sequence = Vec::with_capacity(2 * (1 << l));

    for level in (1..=l).rev() {
        let count = 1usize << (level - 1);
        let mut supers = Vec::with_capacity(count);
        for j in 0..count {
            supers.push(tree.merge_red_nodes(level, j));
        }
        if cfg.instrument {
            let partners = supers.iter().map(|&s| tree.label(s)).collect();
            trace.push(snapshot_event(
                &tree,
                TraceKind::Merge,
                level,
                format!("level{level}"),
                partners,
                None,
            ));
        }

        let mut acc = LevelAccumulator {
            ranks: Vec::new(),
            compressed_sizes: Vec::new(),
            aux_vars: 0,
        };

        for j in 0..count {
            let s = supers[j];
            let t0 = Instant::now();
            let comp = compress_super_node(&mut tree, s, &cfg.rule, &mut frob_reference_sq)?;
            stats.svd_seconds += t0.elapsed().as_secs_f64();
            if !comp.partners.is_empty() {
                acc.ranks.push(comp.rank);
                acc.compressed_sizes.push(tree.node(s).size);
                acc.aux_vars += 2 * comp.rank;
                if cfg.instrument {
                    stats.edges_created += comp.created_edges.len();
                    for &(a, b) in &comp.created_edges {
                        if !tree.distance_leq_2(a, b) {
                            stats.edge_distance_violations += 1;
                        }
                    }
                    let partners = comp.partners.iter().map(|&p| tree.label(p)).collect();
                    trace.push(snapshot_event(
                        &tree,
                        TraceKind::Compress,
                        level,
                        tree.label(s),
                        partners,
                        Some(comp.rank),
                    ));
                }
            }

            for node in [s, tree.black_node(level, j)] {
                let before = tree.node(node).size;
                let out = eliminate_node(&mut tree, node, order)?;
                order += 1;
                elim_sequence.push(node);
                stats.gemm_seconds += out.gemm_seconds;
                stats.pivot_seconds += out.pivot_seconds;
                if cfg.instrument && before > 0 {
                    stats.edges_created += out.created_edges.len();
                    for &(a, b) in &out.created_edges {
                        if !tree.distance_leq_2(a, b) {
                            stats.edge_distance_violations += 1;
                        }
                    }
                    trace.push(snapshot_event(
                        &tree,
                        TraceKind::Eliminate,
                        level,
                        tree.label(node),
                        Vec::new(),
                        None,
                    ));
                }
            }
        }
        stats.levels.push(level_stats(&tree, level, &supers, &acc));
        stats.aux_var_total += acc.aux_vars;
    }
    // the root red node never holds variables in the sparse case; order it
    // last for completeness
    let root = tree.root_red();
    tree.node_mut(root).elim_order = Some(order);

    stats.alpha_hat = alpha_hat(&stats.levels, l);
    stats.total_seconds = t_start.elapsed().as_secs_f64();

    Ok((
        Factorization {
            tree,
            elim_sequence,
            n,
            config: cfg.clone(),
            trace,
        },
        stats,
    ))
}

fn snapshot_event(
    tree: &HTree,
    kind: TraceKind,
    level: usize,
    node: String,
    partners: Vec<String>,
    rank: Option<usize>,
) -> TraceEvent {
    let active = tree.active_nodes();
    let nodes = active
        .iter()
        .map(|&id| (tree.label(id), tree.node(id).size))
        .collect();
    let active_set: std::collections::HashSet<NodeId> = active.into_iter().collect();
    let edges = tree
        .edge_list()
        .into_iter()
        .filter(|(a, b)| active_set.contains(a) && active_set.contains(b))
        .map(|(a, b)| (tree.label(a), tree.label(b)))
        .collect();
    TraceEvent {
        kind,
        level,
        node,
        partners,
        rank,
        nodes,
        edges,
    }
}

fn level_stats(
    tree: &HTree,
    level: usize,
    supers: &[NodeId],
    acc: &LevelAccumulator,
) -> LevelStats {
    let sizes: Vec<usize> = supers.iter().map(|&s| tree.node(s).size).collect();
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    let avg_size = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
    let avg_rank = if acc.ranks.is_empty() {
        0.0
    } else {
        acc.ranks.iter().sum::<usize>() as f64 / acc.ranks.len() as f64
    };
    let avg_compressed_size = if acc.compressed_sizes.is_empty() {
        0.0
    } else {
        acc.compressed_sizes.iter().sum::<usize>() as f64 / acc.compressed_sizes.len() as f64
    };
    let compression_ratio = if avg_compressed_size > 0.0 {
        avg_rank / avg_compressed_size
    } else {
        0.0
    };
    // kappa over the cluster adjacency at the level the supers live on
    let adj = tree.level_adjacency(level - 1);
    let mut kappa1 = 0;
    let mut kappa2 = 0;
    for v in 0..adj.n_vertices() {
        let direct = adj.neighbors(v);
        kappa1 = kappa1.max(direct.len());
        let mut two_hop = std::collections::BTreeSet::new();
        for &w in direct {
            for &x in adj.neighbors(w) {
                if x != v && direct.binary_search(&x).is_err() {
                    two_hop.insert(x);
                }
            }
        }
        kappa2 = kappa2.max(two_hop.len());
    }
    LevelStats {
        level,
        super_count: supers.len(),
        max_super_size: max_size,
        avg_super_size: avg_size,
        avg_rank,
        compression_ratio,
        kappa1,
        kappa2,
        compress_events: acc.ranks.len(),
        aux_vars: acc.aux_vars,
    }
}

fn alpha_hat(levels: &[LevelStats], depth: usize) -> f64 {
    let d_l = levels
        .iter()
        .find(|s| s.level == depth)
        .map(|s| s.max_super_size)
        .unwrap_or(0);
    if d_l == 0 {
        return 0.0;
    }
    let mut alpha: f64 = 0.0;
    for s in levels {
        if s.level < depth && s.max_super_size > 0 {
            let ratio = s.max_super_size as f64 / d_l as f64;
            alpha = alpha.max(ratio.powf(1.0 / (depth - s.level) as f64));
        }
    }
    alpha
}
