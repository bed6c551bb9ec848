//! Forward/backward substitution over the factored tree.
//!
//! A session owns the per-solve Var/RHS scratch so a shared factorization
//! handle can serve concurrent solves. The forward traversal visits nodes in
//! elimination order updating right-hand sides; the backward traversal
//! visits them in exact reverse order solving for variables, splitting each
//! super node's solution back to its red children.

use crate::error::{Error, Result};
use crate::factor::Factorization;
use crate::htree::{NodeId, NodeKind};

pub struct SolveSession<'a> {
    fact: &'a Factorization,
    rhs: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl<'a> SolveSession<'a> {
    pub fn new(fact: &'a Factorization) -> Self {
        let n_nodes = fact.tree().n_nodes();
        SolveSession {
            fact,
            rhs: vec![Vec::new(); n_nodes],
            var: vec![Vec::new(); n_nodes],
        }
    }

    /// Load b into the leaf red sub-vectors (through their super nodes) and
    /// zero every auxiliary right-hand side.
    pub fn set_rhs(&mut self, b: &[f64]) -> Result<()> {
        let tree = self.fact.tree();
        if b.len() != self.fact.n() {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} != matrix size {}",
                b.len(),
                self.fact.n()
            )));
        }
        for id in 0..tree.n_nodes() {
            let size = tree.node(id).size;
            self.rhs[id] = vec![0.0; size];
            self.var[id] = vec![0.0; size];
        }
        let l = tree.depth();
        let leaf = tree.nested_partitioning().leaf();
        for j in 0..(1usize << (l - 1)) {
            let s = tree.super_node(l, j);
            let (r0, r1) = tree.node(s).children.expect("leaf super has children");
            let c0 = tree.node(r0).cluster_index;
            let c1 = tree.node(r1).cluster_index;
            let offset = tree.node(r0).size;
            for (t, &idx) in leaf.members(c0).iter().enumerate() {
                self.rhs[s][t] = b[idx];
            }
            for (t, &idx) in leaf.members(c1).iter().enumerate() {
                self.rhs[s][offset + t] = b[idx];
            }
        }
        Ok(())
    }

    /// Forward step for node `p`: update later right-hand sides with
    /// pivot^-1 applied to RHS(p).
    pub fn solve_l(&mut self, p: NodeId) {
        let tree = self.fact.tree();
        let node = tree.node(p);
        if node.size == 0 {
            return;
        }
        let order_p = node.elim_order.expect("eliminated node has an order");
        let f = node.pivot().expect("pivot stored").solve_vec(&self.rhs[p]);
        for q in tree.out_neighbors(p) {
            if q == p {
                continue;
            }
            let nq = tree.node(q);
            if nq.size == 0 {
                continue;
            }
            if nq.elim_order.expect("ordered") > order_p {
                let block = tree.block(p, q).expect("edge block");
                let update = block.matvec(&f);
                for (dst, u) in self.rhs[q].iter_mut().zip(&update) {
                    *dst -= u;
                }
            }
        }
    }

    /// Backward step for node `p`: solve for Var(p) using variables of
    /// later-eliminated nodes.
    pub fn solve_u(&mut self, p: NodeId) {
        let tree = self.fact.tree();
        let node = tree.node(p);
        if node.size == 0 {
            return;
        }
        let order_p = node.elim_order.expect("ordered");
        let mut acc = self.rhs[p].clone();
        for q in tree.in_neighbors(p) {
            if q == p {
                continue;
            }
            let nq = tree.node(q);
            if nq.size == 0 {
                continue;
            }
            if nq.elim_order.expect("ordered") > order_p {
                let block = tree.block(q, p).expect("edge block");
                let update = block.matvec(&self.var[q]);
                for (dst, u) in acc.iter_mut().zip(&update) {
                    *dst -= u;
                }
            }
        }
        self.var[p] = node.pivot().expect("pivot stored").solve_vec(&acc);
    }

    /// Split a super node's solution between its red children.
    pub fn split_var(&mut self, s: NodeId) {
        let tree = self.fact.tree();
        let Some((r0, r1)) = tree.node(s).children else {
            return;
        };
        let s0 = tree.node(r0).size;
        let s1 = tree.node(r1).size;
        if s0 + s1 == 0 {
            return;
        }
        self.var[r0] = self.var[s][..s0].to_vec();
        self.var[r1] = self.var[s][s0..s0 + s1].to_vec();
    }

    /// Full forward and backward traversal.
    pub fn run(&mut self) {
        let seq = self.fact.elimination_sequence();
        for &p in seq {
            self.solve_l(p);
        }
        for &p in seq.iter().rev() {
            self.solve_u(p);
            if self.fact.tree().node(p).kind == NodeKind::Super {
                self.split_var(p);
            }
        }
    }

    /// Assemble x from the leaf red variables in original index order.
    pub fn gather_solution(&self) -> Vec<f64> {
        let tree = self.fact.tree();
        let leaf = tree.nested_partitioning().leaf();
        let l = tree.depth();
        let mut x = vec![0.0; self.fact.n()];
        for c in 0..leaf.n_clusters() {
            let red = tree.red_node(l, c);
            for (t, &idx) in leaf.members(c).iter().enumerate() {
                x[idx] = self.var[red][t];
            }
        }
        x
    }

    /// Solved variables of a node; for inspection and tests.
    pub fn var(&self, id: NodeId) -> &[f64] {
        &self.var[id]
    }

    pub fn rhs(&self, id: NodeId) -> &[f64] {
        &self.rhs[id]
    }
}

#[cfg(test)]
mod tests {
    use crate::dense::DenseBlock;
    use crate::factor::{factorize, DepthSpec, FactorConfig};
    use crate::problems;
    use crate::solve::SolveSession;

    fn dense_solve(m: &DenseBlock, b: &[f64]) -> Vec<f64> {
        // plain Gaussian elimination with partial pivoting, written
        // independently of the library LU kernel
        let n = m.rows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| m.at(i, j)).collect())
            .collect();
        let mut x: Vec<f64> = b.to_vec();
        for k in 0..n {
            let mut p = k;
            for i in (k + 1)..n {
                if a[i][k].abs() > a[p][k].abs() {
                    p = i;
                }
            }
            a.swap(k, p);
            x.swap(k, p);
            for i in (k + 1)..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= a[i][j] * x[j];
            }
            x[i] /= a[i][i];
        }
        x
    }

    #[test]
    fn set_rhs_layout_two_clusters() {
        let m = problems::chain1d(4, false);
        let mut cfg = FactorConfig::with_epsilon(0.5);
        cfg.depth = DepthSpec::Depth(1);
        cfg.partition = crate::factor::PartitionStrategy::Contiguous;
        let (fact, _) = factorize(&m, &cfg).unwrap();
        let mut session = SolveSession::new(&fact);
        session.set_rhs(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = fact.tree().super_node(1, 0);
        assert_eq!(session.rhs(s), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn set_rhs_zero_everywhere_for_zero_b() {
        let m = problems::poisson2d(4, 4, problems::Boundary::Dirichlet);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(1e-6)).unwrap();
        let mut session = SolveSession::new(&fact);
        session.set_rhs(&[0.0; 16]).unwrap();
        for id in 0..fact.tree().n_nodes() {
            assert!(session.rhs(id).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn set_rhs_rejects_bad_length() {
        let m = problems::identity(8);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(0.5)).unwrap();
        let mut session = SolveSession::new(&fact);
        assert!(session.set_rhs(&[1.0; 7]).is_err());
    }

    #[test]
    fn identity_solves_exactly() {
        let m = problems::identity(32);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(0.5)).unwrap();
        let b: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let x = fact.solve(&b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn scatter_gather_round_trip() {
        // identity matrix: x = b exactly, so gather(set_rhs(b)) == b proves
        // the permutation bookkeeping round-trips
        let m = problems::identity(24);
        let mut cfg = FactorConfig::with_epsilon(0.5);
        cfg.seed = 9;
        let (fact, _) = factorize(&m, &cfg).unwrap();
        let b: Vec<f64> = (0..24).map(|i| i as f64 * 1.5 - 7.0).collect();
        let x = fact.solve(&b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn small_poisson_matches_independent_dense_solve() {
        let m = problems::poisson2d(8, 8, problems::Boundary::Dirichlet);
        let mut cfg = FactorConfig::with_epsilon(1e-13);
        cfg.depth = DepthSpec::TargetLeaf(8);
        let (fact, _) = factorize(&m, &cfg).unwrap();
        let (b, _x_true) = problems::manufactured_rhs(&m, 11);
        let x = fact.solve(&b).unwrap();
        let oracle = dense_solve(&m.to_dense(), &b);
        let num: f64 = x
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den <= 1e-8, "rel diff {}", num / den);
    }

    #[test]
    fn solve_is_linear() {
        let m = problems::poisson2d(6, 6, problems::Boundary::Dirichlet);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(1e-10)).unwrap();
        let (b1, _) = problems::manufactured_rhs(&m, 1);
        let (b2, _) = problems::manufactured_rhs(&m, 2);
        let alpha = 0.7;
        let beta = -1.3;
        let combo: Vec<f64> = b1
            .iter()
            .zip(&b2)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let x1 = fact.solve(&b1).unwrap();
        let x2 = fact.solve(&b2).unwrap();
        let xc = fact.solve(&combo).unwrap();
        let expect: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let num: f64 = xc
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = expect.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den <= 1e-12, "linearity violated: {}", num / den);
    }

    #[test]
    fn repeated_solves_bitwise_identical() {
        let m = problems::poisson3d(4, 4, 4, problems::Boundary::Dirichlet);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(1e-6)).unwrap();
        let (b, _) = problems::manufactured_rhs(&m, 8);
        let x1 = fact.solve(&b).unwrap();
        let x2 = fact.solve(&b).unwrap();
        assert_eq!(x1, x2);
    }

    #[test]
    fn concurrent_solves_share_the_handle() {
        let m = problems::poisson2d(12, 12, problems::Boundary::Dirichlet);
        let (fact, _) = factorize(&m, &FactorConfig::with_epsilon(1e-10)).unwrap();
        let sequential: Vec<Vec<f64>> = (0..4u64)
            .map(|s| fact.solve(&problems::manufactured_rhs(&m, s).0).unwrap())
            .collect();
        let concurrent: Vec<Vec<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4u64)
                .map(|s| {
                    let fact = &fact;
                    let m = &m;
                    scope.spawn(move || fact.solve(&problems::manufactured_rhs(m, s).0).unwrap())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert_eq!(sequential, concurrent);
    }
}
