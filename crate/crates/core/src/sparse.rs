//! Block-sparse matrix storage, partitioned views, adjacency graphs, and
//! Matrix Market I/O.
//!
//! A [`BlockSparseMatrix`] is ingested as a coordinate list (duplicates
//! summed) and converted to a sorted CSR form on construction so that block
//! extraction and matrix-vector products are deterministic.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::dense::DenseBlock;
use crate::error::{Error, Result};

/// Symmetry declared by the source of the matrix (Matrix Market header or a
/// generator). Storage is always general: symmetric input is mirrored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Square sparse matrix with real scalar entries.
#[derive(Debug, Clone)]
pub struct BlockSparseMatrix {
    n: usize,
    /// CSR storage, column indices sorted within each row.
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetry_hint: Symmetry,
}

impl BlockSparseMatrix {
    /// Build from a coordinate list. Duplicate coordinates are summed.
    pub fn from_coo(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_coo_with_hint(n, entries, Symmetry::General)
    }

    pub fn from_coo_with_hint(
        n: usize,
        entries: &[(usize, usize, f64)],
        symmetry_hint: Symmetry,
    ) -> Result<Self> {
        for &(r, c, v) in entries {
            if r >= n || c >= n {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) outside [0, {n})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite value {v} at ({r}, {c})"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        // prefix sums
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            symmetry_hint,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn symmetry_hint(&self) -> Symmetry {
        self.symmetry_hint
    }

    /// Iterate stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Entries of row `r` as parallel (columns, values) slices.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }

    /// Dense materialization; intended for tests and tiny systems.
    pub fn to_dense(&self) -> DenseBlock {
        let mut d = DenseBlock::zeros(self.n, self.n);
        for (r, c, v) in self.iter() {
            *d.at_mut(r, c) += v;
        }
        d
    }

    /// Frobenius norm of the sparse matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Surjective map from indices to clusters.
#[derive(Debug, Clone)]
pub struct Partitioning {
    cluster_of: Vec<usize>,
    n_clusters: usize,
    /// Members of each cluster in ascending original-index order.
    members: Vec<Vec<usize>>,
}

impl Partitioning {
    pub fn new(cluster_of: Vec<usize>, n_clusters: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); n_clusters];
        for (idx, &c) in cluster_of.iter().enumerate() {
            if c >= n_clusters {
                return Err(Error::InvalidInput(format!(
                    "cluster id {c} out of range [0, {n_clusters})"
                )));
            }
            members[c].push(idx);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(Error::InvalidInput(format!(
                "partitioning is not surjective: cluster {empty} has no members"
            )));
        }
        Ok(Self {
            cluster_of,
            n_clusters,
            members,
        })
    }

    /// Single cluster holding [0, n).
    pub fn trivial(n: usize) -> Self {
        Self::new(vec![0; n], 1).expect("trivial partitioning")
    }

    /// One cluster per index.
    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect(), n).expect("identity partitioning")
    }

    pub fn n_indices(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn cluster_of(&self, idx: usize) -> usize {
        self.cluster_of[idx]
    }

    pub fn members(&self, cluster: usize) -> &[usize] {
        &self.members[cluster]
    }
}

/// Cluster-level adjacency graph of a matrix under a partitioning.
///
/// A directed edge `i -> j` is present iff block `A[j, i]` has at least one
/// stored entry, including self-edges for nonzero diagonal blocks.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    n_vertices: usize,
    /// Sorted out-neighbor lists: `out[i]` holds every j with an edge i -> j.
    out: Vec<Vec<usize>>,
    /// Sorted undirected neighbor lists (union of both directions, no self).
    undirected: Vec<Vec<usize>>,
}

impl AdjacencyGraph {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.out[from].binary_search(&to).is_ok()
    }

    /// Neighbors ignoring direction and self-loops; used for distance
    /// queries and bisection.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.undirected[v]
    }

    pub fn directed_edge_count(&self) -> usize {
        self.out.iter().map(|o| o.len()).sum()
    }

    /// Are `u` and `v` connected by an edge in either direction?
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        u == v || self.undirected[u].binary_search(&v).is_ok()
    }

    /// BFS shortest-path length between clusters, ignoring edge direction.
    /// Returns `None` when disconnected.
    pub fn bfs_distance(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.n_vertices];
        let mut queue = std::collections::VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(u) = queue.pop_front() {
            for &w in &self.undirected[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    if w == to {
                        return Some(dist[w]);
                    }
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

/// Build the adjacency graph of `m` under partitioning `p`.
pub fn build_adjacency(m: &BlockSparseMatrix, p: &Partitioning) -> Result<AdjacencyGraph> {
    if p.n_indices() != m.n() {
        return Err(Error::DimensionMismatch(format!(
            "partitioning covers {} indices, matrix has {}",
            p.n_indices(),
            m.n()
        )));
    }
    let nv = p.n_clusters();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (r, c, _v) in m.iter() {
        // entry (r, c) lies in block A[p(r), p(c)], i.e. edge p(c) -> p(r)
        out[p.cluster_of(c)].push(p.cluster_of(r));
    }
    for o in &mut out {
        o.sort_unstable();
        o.dedup();
    }
    let mut undirected: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for (i, o) in out.iter().enumerate() {
        for &j in o {
            if i != j {
                undirected[i].push(j);
                undirected[j].push(i);
            }
        }
    }
    for u in &mut undirected {
        u.sort_unstable();
        u.dedup();
    }
    Ok(AdjacencyGraph {
        n_vertices: nv,
        out,
        undirected,
    })
}

/// Extract the dense block `A[C_i, C_j]` with members in ascending
/// original-index order.
pub fn extract_block(
    m: &BlockSparseMatrix,
    p: &Partitioning,
    i: usize,
    j: usize,
) -> DenseBlock {
    let rows = p.members(i);
    let cols = p.members(j);
    let mut block = DenseBlock::zeros(rows.len(), cols.len());
    // position of each original column index within the block, if any
    let mut col_pos = std::collections::HashMap::with_capacity(cols.len());
    for (t, &c) in cols.iter().enumerate() {
        col_pos.insert(c, t);
    }
    for (bi, &r) in rows.iter().enumerate() {
        let (cs, vs) = m.row(r);
        for (&c, &v) in cs.iter().zip(vs) {
            if let Some(&bj) = col_pos.get(&c) {
                *block.at_mut(bi, bj) += v;
            }
        }
    }
    block
}

/// Read a coordinate-format Matrix Market file (real, general or symmetric).
pub fn load_matrix_market<P: AsRef<Path>>(path: P) -> Result<BlockSparseMatrix> {
    let file = File::open(path.as_ref())?;
    let mut lines = BufReader::new(file).lines();

    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(Error::MatrixMarket("empty file".into())),
        }
    };
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::MatrixMarket(format!("bad header line: {header}")));
    }
    if fields[2] != "coordinate" {
        return Err(Error::MatrixMarket(format!(
            "unsupported format '{}': only coordinate is supported",
            fields[2]
        )));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::MatrixMarket(format!(
            "unsupported field type '{}': only real is supported",
            fields[3]
        )));
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(Error::MatrixMarket(format!(
                "unsupported symmetry '{other}': only general/symmetric"
            )))
        }
    };

    // skip comments, read size line
    let size_line = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                break line;
            }
            None => return Err(Error::MatrixMarket("missing size line".into())),
        }
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(Error::MatrixMarket(format!("bad size line: {size_line}")));
    }
    let rows: usize = parse_num(dims[0], "row count")?;
    let cols: usize = parse_num(dims[1], "column count")?;
    let nnz: usize = parse_num(dims[2], "nnz count")?;
    if rows != cols {
        return Err(Error::MatrixMarket(format!(
            "matrix must be square, got {rows} x {cols}"
        )));
    }

    let mut entries = Vec::with_capacity(if symmetry == Symmetry::Symmetric {
        2 * nnz
    } else {
        nnz
    });
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::MatrixMarket(format!("bad entry line: {t}")));
        }
        let r: usize = parse_num(parts[0], "row index")?;
        let c: usize = parse_num(parts[1], "column index")?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| Error::MatrixMarket(format!("bad value: {}", parts[2])))?;
        if r == 0 || c == 0 || r > rows || c > cols {
            return Err(Error::MatrixMarket(format!(
                "index ({r}, {c}) outside 1..={rows}"
            )));
        }
        entries.push((r - 1, c - 1, v));
        if symmetry == Symmetry::Symmetric && r != c {
            entries.push((c - 1, r - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::MatrixMarket(format!(
            "expected {nnz} entries, found {seen}"
        )));
    }
    BlockSparseMatrix::from_coo_with_hint(rows, &entries, symmetry)
}

fn parse_num(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::MatrixMarket(format!("bad {what}: {s}")))
}

/// Write `m` in coordinate Matrix Market format (real general, 1-based).
pub fn save_matrix_market<P: AsRef<Path>>(m: &BlockSparseMatrix, path: P) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n(), m.n(), m.nnz())?;
    for (r, c, v) in m.iter() {
        writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{proptest, prop_assert, prop_assert_eq};

    fn write_temp(content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir();
        let path = dir.join(format!(
            "hlu_mm_test_{}_{}.mtx",
            std::process::id(),
            rand::random::<u64>()
        ));
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn load_identity_2x2() {
        let path = write_temp(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        );
        let m = load_matrix_market(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(m.n(), 2);
        let entries: Vec<_> = m.iter().collect();
        assert_eq!(entries, vec![(0, 0, 1.0), (1, 1, 1.0)]);
    }

    #[test]
    fn symmetric_header_mirrors_entries() {
        let path = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 1 3.0\n",
        );
        let m = load_matrix_market(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let entries: Vec<_> = m.iter().collect();
        assert!(entries.contains(&(1, 0, 3.0)));
        assert!(entries.contains(&(0, 1, 3.0)));
        assert_eq!(m.symmetry_hint(), Symmetry::Symmetric);
    }

    #[test]
    fn rejects_pattern_field() {
        let path = write_temp("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n");
        let err = load_matrix_market(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(matches!(err, Error::MatrixMarket(_)));
    }

    #[test]
    fn save_empty_matrix_header() {
        let m = BlockSparseMatrix::from_coo(3, &[]).unwrap();
        let path = std::env::temp_dir().join(format!("hlu_empty_{}.mtx", std::process::id()));
        save_matrix_market(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert!(text.lines().nth(1).unwrap().starts_with("3 3 0"));
    }

    #[test]
    fn save_identity_two_lines() {
        let m = BlockSparseMatrix::from_coo(2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let path = std::env::temp_dir().join(format!("hlu_id2_{}.mtx", std::process::id()));
        save_matrix_market(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn laplacian_round_trip_is_exact() {
        let m = crate::problems::poisson2d(5, 5, crate::problems::Boundary::Dirichlet);
        let path = std::env::temp_dir().join(format!("hlu_lap_{}.mtx", std::process::id()));
        save_matrix_market(&m, &path).unwrap();
        let m2 = load_matrix_market(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let a: Vec<_> = m.iter().collect();
        let b: Vec<_> = m2.iter().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = BlockSparseMatrix::from_coo(2, &[(0, 1, 1.0), (0, 1, 2.5)]).unwrap();
        let entries: Vec<_> = m.iter().collect();
        assert_eq!(entries, vec![(0, 1, 3.5)]);
    }

    #[test]
    fn rejects_out_of_range_and_nonfinite() {
        assert!(BlockSparseMatrix::from_coo(2, &[(2, 0, 1.0)]).is_err());
        assert!(BlockSparseMatrix::from_coo(2, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn adjacency_diagonal_matrix_has_only_self_edges() {
        let m = BlockSparseMatrix::from_coo(6, &(0..6).map(|i| (i, i, 1.0)).collect::<Vec<_>>())
            .unwrap();
        let p = Partitioning::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let g = build_adjacency(&m, &p).unwrap();
        for v in 0..3 {
            assert_eq!(g.out_neighbors(v), &[v]);
        }
    }

    #[test]
    fn adjacency_four_cluster_block_example() {
        // block A[2, 1] nonzero (0-based: A[1, 0]) implies edge v0 -> v1
        let m = BlockSparseMatrix::from_coo(
            8,
            &[(2, 1, 5.0), (0, 0, 1.0), (3, 3, 1.0), (5, 5, 1.0), (7, 7, 1.0)],
        )
        .unwrap();
        let p = Partitioning::new(vec![0, 0, 1, 1, 2, 2, 3, 3], 4).unwrap();
        let g = build_adjacency(&m, &p).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(1, 0));
    }

    #[test]
    fn adjacency_matches_exhaustive_block_scan() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 64;
        let mut entries = Vec::new();
        for _ in 0..200 {
            entries.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
        }
        let m = BlockSparseMatrix::from_coo(n, &entries).unwrap();
        let p = Partitioning::new((0..n).map(|i| i / 8).collect(), 8).unwrap();
        let g = build_adjacency(&m, &p).unwrap();
        // brute force: scan all 64 block pairs through extract_block
        for i in 0..8 {
            for j in 0..8 {
                let block = extract_block(&m, &p, j, i);
                let nonzero = block.iter().any(|v| v != 0.0);
                assert_eq!(
                    g.has_edge(i, j),
                    nonzero,
                    "edge {i}->{j} disagrees with block A[{j},{i}]"
                );
            }
        }
    }

    #[test]
    fn extract_block_identity_diagonal() {
        let m = BlockSparseMatrix::from_coo(4, &(0..4).map(|i| (i, i, 1.0)).collect::<Vec<_>>())
            .unwrap();
        let p = Partitioning::new(vec![0, 0, 1, 1], 2).unwrap();
        let b = extract_block(&m, &p, 0, 0);
        assert_eq!(b.data(), &[1.0, 0.0, 0.0, 1.0]);
        let off = extract_block(&m, &p, 0, 1);
        assert!(off.iter().all(|v| v == 0.0));
    }

    proptest! {
        #[test]
        fn blocks_reassemble_dense_materialization(seed in 0u64..200) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 20;
            let mut entries = Vec::new();
            for _ in 0..60 {
                entries.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-2.0..2.0)));
            }
            let m = BlockSparseMatrix::from_coo(n, &entries).unwrap();
            // random-ish partitioning into 4 clusters, kept surjective
            let mut cluster_of: Vec<usize> = (0..n).map(|i| i % 4).collect();
            cluster_of.shuffle(&mut rng);
            let p = Partitioning::new(cluster_of, 4).unwrap();
            let dense = m.to_dense();
            let mut rebuilt = DenseBlock::zeros(n, n);
            for i in 0..4 {
                for j in 0..4 {
                    let block = extract_block(&m, &p, i, j);
                    for (bi, &r) in p.members(i).iter().enumerate() {
                        for (bj, &c) in p.members(j).iter().enumerate() {
                            *rebuilt.at_mut(r, c) = block.at(bi, bj);
                        }
                    }
                }
            }
            prop_assert!(dense.sub(&rebuilt).frobenius_norm() == 0.0);
        }

        #[test]
        fn adjacency_edge_count_monotone_under_new_entries(seed in 0u64..60) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 24;
            let mut entries = Vec::new();
            for _ in 0..30 {
                entries.push((rng.gen_range(0..n), rng.gen_range(0..n), 1.0));
            }
            let p = Partitioning::new((0..n).map(|i| i % 4).collect(), 4).unwrap();
            let base = build_adjacency(
                &BlockSparseMatrix::from_coo(n, &entries).unwrap(), &p).unwrap();
            for _ in 0..10 {
                entries.push((rng.gen_range(0..n), rng.gen_range(0..n), 1.0));
            }
            let grown = build_adjacency(
                &BlockSparseMatrix::from_coo(n, &entries).unwrap(), &p).unwrap();
            prop_assert!(grown.directed_edge_count() >= base.directed_edge_count());
        }

        #[test]
        fn random_round_trip_equality(seed in 0u64..50) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 50;
            let mut entries = Vec::new();
            for _ in 0..120 {
                entries.push((rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-5.0..5.0)));
            }
            let m = BlockSparseMatrix::from_coo(n, &entries).unwrap();
            let path = std::env::temp_dir().join(
                format!("hlu_rt_{}_{}.mtx", std::process::id(), seed));
            save_matrix_market(&m, &path).unwrap();
            let m2 = load_matrix_market(&path).unwrap();
            std::fs::remove_file(&path).ok();
            let a: Vec<_> = m.iter().collect();
            let b: Vec<_> = m2.iter().collect();
            prop_assert_eq!(a, b);
        }
    }
}
