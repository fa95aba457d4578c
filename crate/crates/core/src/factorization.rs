//! Factorization trees over sequences of monoid elements.
//!
//! A Simon tree has only leaves, binary nodes and idempotent nodes whose
//! children all carry the node's own idempotent label. A binary tree is a
//! balanced product tree whose shape never changes under updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monoid::Monoid;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeKind {
    Simon,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// A leaf holding sequence position `.0`.
    Leaf(u32),
    Binary,
    Idempotent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Node<E> {
    pub label: E,
    pub kind: NodeKind,
    pub children: Vec<u32>,
    parent: u32,
    slot: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorizationTree<E> {
    kind: TreeKind,
    nodes: Vec<Node<E>>,
    root: u32,
    leaves: Vec<u32>,
    free: Vec<u32>,
    /// Height allowed before an update batch falls back to a full rebuild.
    rebuild_height: usize,
    #[serde(skip)]
    dirty: Vec<bool>,
    touched: u64,
}

impl<E: Copy + Eq + std::hash::Hash + Ord + std::fmt::Debug> FactorizationTree<E> {
    /// A Simon tree over `seq`, built by repeatedly collapsing runs of one
    /// idempotent and pairing what remains.
    pub fn build_simon<M: Monoid<Elem = E>>(m: &mut M, seq: &[E]) -> Self {
        let mut t = Self::leaves_only(TreeKind::Simon, seq);
        let atoms = t.leaves.clone();
        t.root = t.assemble(m, atoms);
        t.rebuild_height = 6 * t.height().max(2);
        t
    }

    /// A balanced binary tree over `seq`.
    pub fn build_binary<M: Monoid<Elem = E>>(m: &mut M, seq: &[E]) -> Self {
        let mut t = Self::leaves_only(TreeKind::Binary, seq);
        let atoms = t.leaves.clone();
        t.root = t.balanced(m, &atoms);
        t.rebuild_height = usize::MAX;
        t
    }

    fn leaves_only(kind: TreeKind, seq: &[E]) -> Self {
        assert!(!seq.is_empty(), "factorization of an empty sequence");
        let nodes: Vec<Node<E>> = seq
            .iter()
            .enumerate()
            .map(|(i, &label)| Node { label, kind: NodeKind::Leaf(i as u32), children: Vec::new(), parent: NONE, slot: 0 })
            .collect();
        FactorizationTree {
            kind,
            leaves: (0..seq.len() as u32).collect(),
            nodes,
            root: 0,
            free: Vec::new(),
            rebuild_height: 0,
            dirty: Vec::new(),
            touched: seq.len() as u64,
        }
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn root_label(&self) -> E {
        self.nodes[self.root as usize].label
    }

    pub fn node(&self, u: u32) -> &Node<E> {
        &self.nodes[u as usize]
    }

    pub fn label(&self, u: u32) -> E {
        self.nodes[u as usize].label
    }

    pub fn leaf(&self, pos: usize) -> u32 {
        self.leaves[pos]
    }

    pub fn leaf_labels(&self) -> Vec<E> {
        self.leaves.iter().map(|&u| self.label(u)).collect()
    }

    /// Nodes created or relabeled since construction or the last reset.
    pub fn touched(&self) -> u64 {
        self.touched
    }

    pub fn reset_touched(&mut self) {
        self.touched = 0;
    }

    /// Height counting nodes, so a single leaf has height 1.
    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self.root, 1usize)];
        while let Some((u, d)) = stack.pop() {
            best = best.max(d);
            for &c in &self.nodes[u as usize].children {
                stack.push((c, d + 1));
            }
        }
        best
    }

    fn alloc(&mut self, label: E, kind: NodeKind, children: Vec<u32>) -> u32 {
        let node = Node { label, kind, children, parent: NONE, slot: 0 };
        let u = match self.free.pop() {
            Some(u) => {
                self.nodes[u as usize] = node;
                u
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() as u32 - 1
            }
        };
        for i in 0..self.nodes[u as usize].children.len() {
            let c = self.nodes[u as usize].children[i];
            self.nodes[c as usize].parent = u;
            self.nodes[c as usize].slot = i as u32;
        }
        self.touched += 1;
        u
    }

    fn binary<M: Monoid<Elem = E>>(&mut self, m: &mut M, a: u32, b: u32) -> u32 {
        let label = m.mul(self.label(a), self.label(b));
        self.alloc(label, NodeKind::Binary, vec![a, b])
    }

    fn balanced<M: Monoid<Elem = E>>(&mut self, m: &mut M, atoms: &[u32]) -> u32 {
        if atoms.len() == 1 {
            return atoms[0];
        }
        let mid = atoms.len().div_ceil(2);
        let l = self.balanced(m, &atoms[..mid]);
        let r = self.balanced(m, &atoms[mid..]);
        self.binary(m, l, r)
    }

    /// Simon tree over existing subtrees, left to right.
    fn assemble<M: Monoid<Elem = E>>(&mut self, m: &mut M, mut layer: Vec<u32>) -> u32 {
        while layer.len() > 1 {
            let mut runs = Vec::with_capacity(layer.len());
            let mut i = 0;
            while i < layer.len() {
                let e = self.label(layer[i]);
                let mut j = i + 1;
                if m.mul(e, e) == e {
                    while j < layer.len() && self.label(layer[j]) == e {
                        j += 1;
                    }
                }
                runs.push(match j - i {
                    1 => layer[i],
                    2 => self.binary(m, layer[i], layer[i + 1]),
                    _ => self.alloc(e, NodeKind::Idempotent, layer[i..j].to_vec()),
                });
                i = j;
            }
            if runs.len() == 1 {
                return runs[0];
            }
            layer = runs
                .chunks(2)
                .map(|c| if c.len() == 2 { self.binary(m, c[0], c[1]) } else { c[0] })
                .collect();
        }
        layer[0]
    }

    /// Replaces the labels at the given positions.
    pub fn update<M: Monoid<Elem = E>>(&mut self, m: &mut M, updates: &[(usize, E)]) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(updates.len());
        for &(i, _) in updates {
            if i >= self.len() {
                return Err(Error::InvalidNode(i as u32));
            }
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        self.dirty.resize(self.nodes.len(), false);
        for &(i, label) in updates {
            let leaf = self.leaves[i];
            if self.label(leaf) == label {
                continue;
            }
            self.nodes[leaf as usize].label = label;
            self.touched += 1;
            let mut u = leaf;
            while u != NONE && !self.dirty[u as usize] {
                self.dirty[u as usize] = true;
                u = self.nodes[u as usize].parent;
            }
        }
        if self.dirty.get(self.root as usize).copied().unwrap_or(false) {
            self.fix(m, self.root);
        }
        if self.kind == TreeKind::Simon && self.height() > self.rebuild_height {
            let seq = self.leaf_labels();
            let touched = self.touched;
            *self = Self::build_simon(m, &seq);
            self.touched += touched;
        }
        Ok(())
    }

    /// Recomputes a dirty subtree; returns whether its label changed.
    fn fix<M: Monoid<Elem = E>>(&mut self, m: &mut M, u: u32) -> bool {
        self.dirty[u as usize] = false;
        if let NodeKind::Leaf(_) = self.nodes[u as usize].kind {
            return true;
        }
        let mut any = false;
        for i in 0..self.nodes[u as usize].children.len() {
            let c = self.nodes[u as usize].children[i];
            if self.dirty.get(c as usize).copied().unwrap_or(false) {
                any |= self.fix(m, c);
            }
        }
        if !any {
            return false;
        }
        let old = self.label(u);
        match self.nodes[u as usize].kind {
            NodeKind::Binary => {
                let (a, b) = (self.nodes[u as usize].children[0], self.nodes[u as usize].children[1]);
                let label = m.mul(self.label(a), self.label(b));
                self.nodes[u as usize].label = label;
                self.touched += 1;
                label != old
            }
            NodeKind::Idempotent => {
                let children = self.nodes[u as usize].children.clone();
                if children.iter().all(|&c| self.label(c) == old) {
                    return false;
                }
                let (parent, slot) = (self.nodes[u as usize].parent, self.nodes[u as usize].slot);
                let r = self.assemble(m, children);
                self.nodes[r as usize].parent = parent;
                self.nodes[r as usize].slot = slot;
                if parent == NONE {
                    self.root = r;
                } else {
                    self.nodes[parent as usize].children[slot as usize] = r;
                }
                self.nodes[u as usize].children.clear();
                self.free.push(u);
                if self.dirty.len() < self.nodes.len() {
                    self.dirty.resize(self.nodes.len(), false);
                }
                self.label(r) != old
            }
            NodeKind::Leaf(_) => unreachable!(),
        }
    }

    /// Checks leaf order, products and, for Simon trees, the node-type
    /// discipline. Returns a description of the first violation.
    pub fn audit<M: Monoid<Elem = E>>(&self, m: &mut M) -> std::result::Result<(), String> {
        let mut stack = vec![self.root];
        let mut order = Vec::new();
        while let Some(u) = stack.pop() {
            let n = &self.nodes[u as usize];
            match n.kind {
                NodeKind::Leaf(p) => order.push(p),
                NodeKind::Binary => {
                    if n.children.len() != 2 {
                        return Err(format!("binary node {u} has {} children", n.children.len()));
                    }
                    let p = m.mul(self.label(n.children[0]), self.label(n.children[1]));
                    if p != n.label {
                        return Err(format!("binary node {u} label {:?} but product {p:?}", n.label));
                    }
                }
                NodeKind::Idempotent => {
                    if self.kind == TreeKind::Binary {
                        return Err(format!("idempotent node {u} in a binary tree"));
                    }
                    if n.children.len() < 3 || m.mul(n.label, n.label) != n.label {
                        return Err(format!("node {u} is not a proper idempotent node"));
                    }
                    if let Some(&c) = n.children.iter().find(|&&c| self.label(c) != n.label) {
                        return Err(format!("idempotent node {u} has child {c} with another label"));
                    }
                }
            }
            for (i, &c) in n.children.iter().enumerate() {
                let cn = &self.nodes[c as usize];
                if cn.parent != u || cn.slot != i as u32 {
                    return Err(format!("broken parent link at {c}"));
                }
            }
            stack.extend(n.children.iter().rev());
        }
        if order != (0..self.len() as u32).collect::<Vec<_>>() {
            return Err("leaves out of sequence order".into());
        }
        if order.iter().zip(&self.leaves).any(|(&p, &l)| self.nodes[l as usize].kind != NodeKind::Leaf(p)) {
            return Err("leaf table out of sync".into());
        }
        Ok(())
    }
}

/// Left fold of a sequence, the reference product.
pub fn fold<M: Monoid>(m: &mut M, seq: &[M::Elem]) -> M::Elem {
    let one = m.one();
    seq.iter().fold(one, |acc, &x| m.mul(acc, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{Sigma1, TreeAutomaton};
    use crate::automata::Side;
    use crate::monoid::{ElemId, TransitionMonoid};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Transition monoid of a random automaton and a pool of its generators.
    fn setup(seed: u64, states: u32) -> (TransitionMonoid, Vec<ElemId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dta = TreeAutomaton::random(&mut rng, Sigma1::new(vec!["a".into(), "b".into()], 0), states);
        let mut m = TransitionMonoid::new(dta);
        let mut pool = Vec::new();
        for a in 0..m.dta().num_letters() {
            for c in 0..=states {
                pool.push(m.generator(a, c, Side::L));
                pool.push(m.generator(a, c, Side::R));
            }
        }
        (m, pool)
    }

    fn random_seq(rng: &mut ChaCha8Rng, pool: &[ElemId], n: usize) -> Vec<ElemId> {
        (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
    }

    #[test]
    fn single_leaf() {
        let (mut m, pool) = setup(1, 3);
        let t = FactorizationTree::build_simon(&mut m, &pool[..1]);
        assert_eq!(t.height(), 1);
        assert_eq!(t.root_label(), pool[0]);
        let b = FactorizationTree::build_binary(&mut m, &pool[..1]);
        assert_eq!(b.height(), 1);
    }

    #[test]
    fn idempotent_run_is_flat() {
        let (mut m, pool) = setup(2, 3);
        let e = pool.iter().copied().find(|&x| m.mul(x, x) == x).unwrap_or(m.one());
        let t = FactorizationTree::build_simon(&mut m, &vec![e; 500]);
        assert_eq!(t.height(), 2);
        assert_eq!(t.node(t.root()).kind, NodeKind::Idempotent);
        t.audit(&mut m).unwrap();
    }

    #[test]
    fn binary_height() {
        let (mut m, pool) = setup(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seq = random_seq(&mut rng, &pool, 1024);
        let t = FactorizationTree::build_binary(&mut m, &seq);
        assert_eq!(t.height(), 11);
        let seq = random_seq(&mut rng, &pool, 1000);
        assert_eq!(FactorizationTree::build_binary(&mut m, &seq).height(), 11);
    }

    #[test]
    fn empty_update_keeps_tree() {
        let (mut m, pool) = setup(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seq = random_seq(&mut rng, &pool, 100);
        let mut t = FactorizationTree::build_simon(&mut m, &seq);
        let (root, h) = (t.root_label(), t.height());
        t.update(&mut m, &[]).unwrap();
        assert_eq!((t.root_label(), t.height()), (root, h));
    }

    #[test]
    fn update_errors() {
        let (mut m, pool) = setup(5, 2);
        let mut t = FactorizationTree::build_simon(&mut m, &pool[..4]);
        assert_eq!(t.update(&mut m, &[(1, pool[0]), (1, pool[1])]), Err(Error::DuplicateIndex(1)));
        assert_eq!(t.update(&mut m, &[(4, pool[0])]), Err(Error::InvalidNode(4)));
    }

    #[test]
    fn single_update_touches_little() {
        let (mut m, pool) = setup(6, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seq = random_seq(&mut rng, &pool, 100);
        let mut t = FactorizationTree::build_simon(&mut m, &seq);
        for _ in 0..50 {
            let i = rng.gen_range(0..seq.len());
            seq[i] = pool[rng.gen_range(0..pool.len())];
            let h = t.height();
            t.reset_touched();
            t.update(&mut m, &[(i, seq[i])]).unwrap();
            assert_eq!(t.root_label(), fold(&mut m, &seq));
            t.audit(&mut m).unwrap();
            // every touched node lies on the leaf-to-root path or in the
            // local rebuild of one idempotent node per level
            assert!(t.touched() as usize <= 4 * (h + m.len()), "{} {h}", t.touched());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn root_is_the_product(seed in any::<u64>(), n in 1usize..400, states in 1u32..5, rounds in 0usize..6) {
            let (mut m, pool) = setup(seed, states);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut seq = random_seq(&mut rng, &pool, n);
            let mut s = FactorizationTree::build_simon(&mut m, &seq);
            let mut b = FactorizationTree::build_binary(&mut m, &seq);
            let shape: Vec<Vec<u32>> = (0..b.nodes.len() as u32).map(|u| b.node(u).children.clone()).collect();
            prop_assert_eq!(s.root_label(), fold(&mut m, &seq));
            prop_assert!(s.audit(&mut m).is_ok());
            for _ in 0..rounds {
                let k = rng.gen_range(0..=n.min(8));
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                let ups: Vec<(usize, ElemId)> = idx[..k].iter().map(|&i| (i, pool[rng.gen_range(0..pool.len())])).collect();
                for &(i, x) in &ups {
                    seq[i] = x;
                }
                let h = s.height();
                s.update(&mut m, &ups).unwrap();
                b.update(&mut m, &ups).unwrap();
                let want = fold(&mut m, &seq);
                prop_assert_eq!(s.root_label(), want);
                prop_assert_eq!(b.root_label(), want);
                prop_assert!(s.audit(&mut m).map_err(TestCaseError::fail).is_ok());
                prop_assert!(b.audit(&mut m).is_ok());
                prop_assert_eq!(s.leaf_labels(), seq.clone());
                prop_assert!(s.height() <= 2 * h + 3 * m.len());
            }
            let shape2: Vec<Vec<u32>> = (0..b.nodes.len() as u32).map(|u| b.node(u).children.clone()).collect();
            prop_assert_eq!(shape, shape2);
            let rebuilt = FactorizationTree::build_simon(&mut m, &seq);
            prop_assert_eq!(rebuilt.root_label(), s.root_label());
        }
    }
}
