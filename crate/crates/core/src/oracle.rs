//! Counted oracle access to a tree.
//!
//! Learners that are meant to run in sublinear time see the tree only
//! through an [`OracleSession`]: neighborhood queries, relation queries and
//! lowest-common-ancestor queries, each of which bumps a counter.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{ArityMode, LabeledTree, NodeId, Relation};

/// Euler tour plus a sparse table of depth minima.
#[derive(Clone, Debug)]
pub struct LcaIndex {
    first: Vec<u32>,
    /// `table[k][i]`: the shallowest tour entry in `[i, i + 2^k)`.
    table: Vec<Vec<u32>>,
    depth: Vec<u32>,
}

impl LcaIndex {
    pub fn new(tree: &LabeledTree) -> LcaIndex {
        let n = tree.len();
        let mut tour = Vec::with_capacity(2 * n);
        let mut first = vec![0u32; n];
        let mut stack: Vec<(NodeId, Option<NodeId>)> = vec![(tree.root(), tree.first_child(tree.root()))];
        first[0] = 0;
        tour.push(0u32);
        while let Some((_, next)) = stack.last_mut() {
            match *next {
                Some(c) => {
                    *next = tree.right_sibling(c);
                    first[c.index()] = tour.len() as u32;
                    tour.push(c.0);
                    stack.push((c, tree.first_child(c)));
                }
                None => {
                    stack.pop();
                    if let Some((p, _)) = stack.last() {
                        tour.push(p.0);
                    }
                }
            }
        }
        let depth: Vec<u32> = tree.nodes().map(|u| tree.depth(u)).collect();
        let mut table = vec![tour];
        let mut k = 1;
        while (1 << k) <= table[0].len() {
            let prev = &table[k - 1];
            let half = 1 << (k - 1);
            let row: Vec<u32> = (0..=table[0].len() - (1 << k))
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + half]);
                    if depth[a as usize] <= depth[b as usize] {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            table.push(row);
            k += 1;
        }
        LcaIndex { first, table, depth }
    }

    pub fn lca(&self, u: NodeId, v: NodeId) -> NodeId {
        let (mut i, mut j) = (self.first[u.index()] as usize, self.first[v.index()] as usize);
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        let len = j - i + 1;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let (a, b) = (self.table[k][i], self.table[k][j + 1 - (1 << k)]);
        NodeId(if self.depth[a as usize] <= self.depth[b as usize] { a } else { b })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OracleCounters {
    pub neighborhood: u64,
    pub relation: u64,
    pub lca: u64,
}

impl OracleCounters {
    pub fn total(&self) -> u64 {
        self.neighborhood + self.relation + self.lca
    }
}

pub struct OracleSession<'t> {
    tree: &'t LabeledTree,
    lca_index: std::borrow::Cow<'t, LcaIndex>,
    counters: OracleCounters,
    observed: BTreeSet<NodeId>,
}

impl<'t> OracleSession<'t> {
    pub fn new(tree: &'t LabeledTree) -> Self {
        Self::from_cow(tree, std::borrow::Cow::Owned(LcaIndex::new(tree)))
    }

    /// Shares a precomputed LCA index, e.g. across parallel sessions.
    pub fn with_index(tree: &'t LabeledTree, index: &'t LcaIndex) -> Self {
        Self::from_cow(tree, std::borrow::Cow::Borrowed(index))
    }

    fn from_cow(tree: &'t LabeledTree, lca_index: std::borrow::Cow<'t, LcaIndex>) -> Self {
        OracleSession { tree, lca_index, counters: OracleCounters::default(), observed: BTreeSet::new() }
    }

    pub fn mode(&self) -> ArityMode {
        self.tree.mode()
    }

    pub fn counters(&self) -> OracleCounters {
        self.counters
    }

    /// Nodes that appeared in a query or an answer so far.
    pub fn observed(&self) -> &BTreeSet<NodeId> {
        &self.observed
    }

    /// The 1-neighborhood of `u`, sorted by id. Binary mode: `u`, its parent
    /// and its children. Unranked mode: `u`, its parent, its first child and
    /// its left and right siblings.
    pub fn neighborhood(&mut self, u: NodeId) -> Vec<NodeId> {
        self.counters.neighborhood += 1;
        let t = self.tree;
        let mut out = vec![u];
        out.extend(t.parent(u));
        match t.mode() {
            ArityMode::Binary => out.extend(t.children(u)),
            ArityMode::Unranked => {
                out.extend(t.first_child(u));
                out.extend(t.left_sibling(u));
                out.extend(t.right_sibling(u));
            }
        }
        out.sort_unstable();
        self.observed.extend(out.iter().copied());
        out
    }

    pub fn relation(&mut self, rel: Relation, args: &[NodeId]) -> Result<bool> {
        if args.len() != rel.arity() {
            return Err(Error::RelationArity { rel: format!("{rel:?}"), expected: rel.arity(), got: args.len() });
        }
        if rel == Relation::Sib && self.tree.mode() == ArityMode::Binary {
            return Err(Error::ModeMismatch("sib".into()));
        }
        for &a in args {
            self.tree.check(a)?;
        }
        self.counters.relation += 1;
        self.observed.extend(args.iter().copied());
        Ok(self.tree.holds(rel, args))
    }

    pub fn lca(&mut self, u: NodeId, v: NodeId) -> NodeId {
        self.counters.lca += 1;
        let w = self.lca_index.lca(u, v);
        self.observed.extend([u, v, w]);
        w
    }
}
