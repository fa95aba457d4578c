//! Learning parameters of an MSO formula on a tree.
//!
//! The index holds one factorization tree per heavy path over `M̂`. A
//! training set only changes example marks, so it is applied as a batch of
//! leaf updates, after which tracing descends from the root element to
//! recover concrete parameter nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::automata::{Mark, Side, TreeAutomaton};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::factorization::{FactorizationTree, NodeKind, TreeKind};
use crate::heavy_path::{HeavyPathDecomposition, PathId};
use crate::monoid::{ElemId, PowerMonoid, SetId};
use crate::mso::{compile_param_formula, symbols_for, CompileOptions, ParamFormula};
use crate::tree::{LabeledTree, NodeId, TrainingSet};

/// A `Σ₃` letter: symbol, example mark, cut-off element and side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Letter3 {
    pub sym: u32,
    pub mark: Mark,
    pub cut: SetId,
    pub side: Side,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Factorization-tree nodes created or relabeled while indexing.
    pub index_touched: u64,
    /// Factorization-tree nodes relabeled by training updates.
    pub update_touched: u64,
    /// Nodes visited by tracing.
    pub trace_steps: u64,
}

#[derive(Clone, Debug)]
pub struct LearnOptions {
    pub compile: CompileOptions,
    pub monoid_cap: usize,
    pub kind: TreeKind,
    pub exec: Exec,
}

impl LearnOptions {
    pub fn new(compile: CompileOptions) -> Self {
        LearnOptions { compile, monoid_cap: 100_000, kind: TreeKind::Simon, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub formula: String,
    pub params: Vec<NodeId>,
}

const INDEX_MAGIC: &[u8] = b"TLIX\x01";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Index {
    tree: LabeledTree,
    dec: HeavyPathDecomposition,
    pm: PowerMonoid,
    trees: Vec<FactorizationTree<SetId>>,
    letters: Vec<Letter3>,
    sym_map: Vec<u32>,
    marks: BTreeMap<NodeId, Mark>,
    monoid_cap: usize,
    pub formula: String,
    pub counters: Counters,
}

impl Index {
    /// Indexes `tree` against the automaton for `ψ`, with every example
    /// mark unknown.
    pub fn build(tree: &LabeledTree, dta: TreeAutomaton, kind: TreeKind, monoid_cap: usize) -> Result<Index> {
        let sym_map = dta.sigma.map_tree(tree)?;
        let dec = HeavyPathDecomposition::new(tree);
        let one = SetId(0);
        let mut ix = Index {
            tree: tree.clone(),
            pm: PowerMonoid::new(dta),
            trees: Vec::with_capacity(dec.num_paths()),
            letters: vec![Letter3 { sym: 0, mark: Mark::Unknown, cut: one, side: Side::L }; tree.len()],
            sym_map,
            marks: BTreeMap::new(),
            monoid_cap,
            formula: String::new(),
            counters: Counters::default(),
            dec,
        };
        let mut built: Vec<Option<FactorizationTree<SetId>>> = (0..ix.dec.num_paths()).map(|_| None).collect();
        for &p in ix.dec.topo_order().to_vec().iter() {
            let mut seq = Vec::with_capacity(ix.dec.path(p).len());
            for &u in ix.dec.path(p).to_vec().iter().rev() {
                let cut = ix.cutoff_path(u).map_or(one, |c| built[c.index()].as_ref().expect("topological order").root_label());
                let l = ix.letter_for(u, Mark::Unknown, cut);
                ix.letters[u.index()] = l;
                seq.push(ix.pm.hat(l.sym, l.mark, l.cut, l.side));
            }
            let ft = match kind {
                TreeKind::Simon => FactorizationTree::build_simon(&mut ix.pm, &seq),
                TreeKind::Binary => FactorizationTree::build_binary(&mut ix.pm, &seq),
            };
            ix.counters.index_touched += ft.touched();
            built[p.index()] = Some(ft);
            ix.check_caps()?;
        }
        ix.trees = built.into_iter().map(|t| t.expect("every path built")).collect();
        for t in &mut ix.trees {
            t.reset_touched();
        }
        Ok(ix)
    }

    /// Restores lookup tables after deserialization.
    pub fn rehydrate(&mut self) {
        self.pm.rehydrate();
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = INDEX_MAGIC.to_vec();
        bincode::serialize_into(&mut out, self).map_err(|e| Error::IndexFormat(e.to_string()))?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Index> {
        let body = bytes
            .strip_prefix(INDEX_MAGIC)
            .ok_or_else(|| Error::IndexFormat("not an index file".into()))?;
        let mut ix: Index = bincode::deserialize(body).map_err(|e| Error::IndexFormat(e.to_string()))?;
        ix.rehydrate();
        Ok(ix)
    }

    fn check_caps(&self) -> Result<()> {
        self.pm.m.check()?;
        if self.pm.m.len() > self.monoid_cap {
            return Err(Error::MonoidCap(self.monoid_cap));
        }
        Ok(())
    }

    pub fn tree(&self) -> &LabeledTree {
        &self.tree
    }

    pub fn decomposition(&self) -> &HeavyPathDecomposition {
        &self.dec
    }

    pub fn dta(&self) -> &TreeAutomaton {
        self.pm.m.dta()
    }

    pub fn power_monoid(&self) -> &PowerMonoid {
        &self.pm
    }

    pub fn path_tree(&self, p: PathId) -> &FactorizationTree<SetId> {
        &self.trees[p.index()]
    }

    pub fn letter(&self, u: NodeId) -> Letter3 {
        self.letters[u.index()]
    }

    /// Root element of the whole tree.
    pub fn root_set(&self) -> SetId {
        self.trees[self.dec.path_of(self.tree.root()).index()].root_label()
    }

    /// Whether some parameter setting is consistent with the applied marks.
    pub fn consistent(&self) -> bool {
        self.pm.accepts(self.root_set())
    }

    /// Sum of the heights of all path trees' root-to-leaf paths a trace
    /// can take, as a size measure: the largest path-tree height.
    pub fn max_height(&self) -> usize {
        self.trees.iter().map(|t| t.height()).max().unwrap_or(0)
    }

    fn cutoff_path(&self, u: NodeId) -> Option<PathId> {
        self.dec.cutoff_child(&self.tree, u).map(|c| self.dec.path_of(c))
    }

    fn letter_for(&self, u: NodeId, mark: Mark, cut: SetId) -> Letter3 {
        let sym = self.sym_map[self.tree.label(u).0 as usize];
        let side = match (self.dec.heavy_child(&self.tree, u), self.dec.cutoff_child(&self.tree, u)) {
            (None, _) => Side::L,
            (Some(h), None) => {
                if self.tree.e1(u) == Some(h) {
                    Side::R
                } else {
                    Side::L
                }
            }
            (Some(_), Some(c)) => {
                if self.tree.e1(u) == Some(c) {
                    Side::L
                } else {
                    Side::R
                }
            }
        };
        Letter3 { sym, mark, cut, side }
    }

    /// Position of `u` in its path's sequence, which is read bottom-up.
    fn seq_pos(&self, u: NodeId) -> usize {
        self.dec.path(self.dec.path_of(u)).len() - 1 - self.dec.pos(u)
    }

    /// Makes the example marks equal to `s`. Paths are updated children
    /// first, each at most once; a parent path is revisited only when a
    /// dependent root element actually changed.
    pub fn apply_training(&mut self, s: &TrainingSet) -> Result<()> {
        if let Some(bad) = s.examples().iter().find(|e| e.node.index() >= self.tree.len()) {
            return Err(Error::InvalidNode(bad.node.0));
        }
        let want: BTreeMap<NodeId, Mark> = s.examples().iter().map(|e| (e.node, Mark::from(e.polarity))).collect();
        let mut changed: Vec<NodeId> = Vec::new();
        for (&u, &m) in &want {
            if self.marks.get(&u) != Some(&m) {
                changed.push(u);
            }
        }
        for &u in self.marks.keys() {
            if !want.contains_key(&u) {
                changed.push(u);
            }
        }
        self.marks = want;
        self.refresh(changed)
    }

    /// The mark currently applied at `u`.
    pub fn mark(&self, u: NodeId) -> Mark {
        self.marks.get(&u).copied().unwrap_or(Mark::Unknown)
    }

    /// Sets the mark of a single node.
    pub fn set_mark(&mut self, u: NodeId, mark: Mark) -> Result<()> {
        self.tree.check(u)?;
        if self.mark(u) == mark {
            return Ok(());
        }
        match mark {
            Mark::Unknown => self.marks.remove(&u),
            m => self.marks.insert(u, m),
        };
        self.refresh(vec![u])
    }

    /// Changes the label of `u`. The symbol must belong to the automaton's
    /// alphabet.
    pub fn relabel(&mut self, u: NodeId, name: &str) -> Result<()> {
        self.tree.check(u)?;
        let sym = self.dta().sigma.symbol_index(name).ok_or_else(|| Error::UnknownSymbol(name.to_string()))?;
        let s = self.tree.alphabet_mut().intern(name);
        if s.0 as usize == self.sym_map.len() {
            self.sym_map.push(sym);
        }
        if self.tree.label(u) == s {
            return Ok(());
        }
        self.tree.set_label(u, s);
        self.refresh(vec![u])
    }

    /// Recomputes the letters of `changed` and propagates new root
    /// elements up through attaching paths.
    fn refresh(&mut self, changed: Vec<NodeId>) -> Result<()> {
        let mut pending: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        let topo_rank = |ix: &Index, p: PathId| ix.dec.topo_rank(p);
        for u in changed {
            pending.entry(topo_rank(self, self.dec.path_of(u))).or_default().push(u);
        }
        while let Some((r, mut nodes)) = pending.pop_first() {
            let p = self.dec.topo_order()[r];
            nodes.sort_unstable();
            nodes.dedup();
            let mut ups = Vec::with_capacity(nodes.len());
            for u in nodes {
                let cut = self.cutoff_path(u).map_or(SetId(0), |c| self.trees[c.index()].root_label());
                let mark = self.marks.get(&u).copied().unwrap_or(Mark::Unknown);
                let l = self.letter_for(u, mark, cut);
                self.letters[u.index()] = l;
                ups.push((self.seq_pos(u), self.pm.hat(l.sym, l.mark, l.cut, l.side)));
            }
            let old = self.trees[p.index()].root_label();
            let t = &mut self.trees[p.index()];
            t.reset_touched();
            t.update(&mut self.pm, &ups)?;
            self.counters.update_touched += t.touched();
            if t.root_label() != old {
                if let Some(a) = self.dec.attach(p) {
                    pending.entry(topo_rank(self, self.dec.path_of(a))).or_default().push(a);
                }
            }
        }
        self.check_caps()
    }

    /// Traces a root element in `F` down to parameter nodes; `None` when
    /// the root element misses `F`.
    pub fn trace(&mut self) -> Result<Option<Vec<NodeId>>> {
        let root = self.root_set();
        let Some(m) = self.pm.elems(root).iter().copied().find(|&m| self.pm.m.is_final(m)) else {
            return Ok(None);
        };
        let ell = self.dta().sigma.ell as usize;
        let mut params: Vec<Option<NodeId>> = vec![None; ell];
        let mut outer = vec![(self.dec.path_of(self.tree.root()), m)];
        while let Some((p, m)) = outer.pop() {
            let ft = &self.trees[p.index()];
            let mut inner = vec![(ft.root(), m)];
            while let Some((v, m)) = inner.pop() {
                self.counters.trace_steps += 1;
                let node = self.trees[p.index()].node(v).clone();
                match node.kind {
                    NodeKind::Leaf(pos) => {
                        let path = self.dec.path(p);
                        let x = path[path.len() - 1 - pos as usize];
                        let (k, cut) = self.leaf_choice(x, m)?;
                        for (i, slot) in params.iter_mut().enumerate() {
                            if k >> i & 1 == 1 {
                                if slot.is_some() {
                                    return Err(Error::ParamConsistency(m.0));
                                }
                                *slot = Some(x);
                            }
                        }
                        if self.pm.m.params(cut) != 0 {
                            let c = self.cutoff_path(x).ok_or(Error::ParamConsistency(cut.0))?;
                            outer.push((c, cut));
                        }
                    }
                    NodeKind::Binary => {
                        let (a, b) = (node.children[0], node.children[1]);
                        let ft = &self.trees[p.index()];
                        let (la, lb) = (ft.label(a), ft.label(b));
                        let (m1, m2) = self.split(la, lb, m).ok_or(Error::ParamConsistency(m.0))?;
                        for (c, x) in [(a, m1), (b, m2)] {
                            if self.pm.m.params(x) != 0 {
                                inner.push((c, x));
                            }
                        }
                    }
                    NodeKind::Idempotent => {
                        // children all carry `e`; peel them off left to right
                        let e = node.label;
                        let mut cur = m;
                        let k = node.children.len();
                        for (j, &c) in node.children.iter().enumerate() {
                            if self.pm.m.params(cur) == 0 {
                                break;
                            }
                            if j + 1 == k {
                                inner.push((c, cur));
                                break;
                            }
                            let (x, rest) = self.split_preferring_params(e, cur).ok_or(Error::ParamConsistency(cur.0))?;
                            if self.pm.m.params(x) != 0 {
                                inner.push((c, x));
                            }
                            cur = rest;
                        }
                    }
                }
            }
        }
        if params.iter().any(Option::is_none) {
            return Err(Error::ParamConsistency(m.0));
        }
        Ok(Some(params.into_iter().map(|p| p.expect("checked")).collect()))
    }

    /// Smallest `(m1, m2)` in `a × b` with `m1·m2 = m`.
    fn split(&mut self, a: SetId, b: SetId, m: ElemId) -> Option<(ElemId, ElemId)> {
        let (xs, ys) = (self.pm.elems(a).to_vec(), self.pm.elems(b).to_vec());
        for &x in &xs {
            for &y in &ys {
                if self.pm.m.mul(x, y) == m {
                    return Some((x, y));
                }
            }
        }
        None
    }

    /// Like [`Self::split`] over `e × e`, preferring a left factor that
    /// carries parameters.
    fn split_preferring_params(&mut self, e: SetId, m: ElemId) -> Option<(ElemId, ElemId)> {
        let xs = self.pm.elems(e).to_vec();
        let mut fallback = None;
        for &x in &xs {
            for &y in &xs {
                if self.pm.m.mul(x, y) == m {
                    if self.pm.m.params(x) != 0 {
                        return Some((x, y));
                    }
                    fallback = fallback.or(Some((x, y)));
                }
            }
        }
        fallback
    }

    /// Parameters placed at `x` and the cut-off element, chosen so that the
    /// leaf's generator is `m` and parameters split exactly.
    fn leaf_choice(&mut self, x: NodeId, m: ElemId) -> Result<(u32, ElemId)> {
        let l = self.letters[x.index()];
        let pm_ = self.pm.m.params(m);
        for c in self.pm.elems(l.cut).to_vec() {
            let pc = self.pm.m.params(c);
            if pc & !pm_ != 0 {
                continue;
            }
            let k = pm_ & !pc;
            let a = self.dta().sigma.letter(l.sym, l.mark, k);
            if self.pm.m.h_prime(a, c, l.side) == m {
                return Ok((k, c));
            }
        }
        Err(Error::ParamConsistency(m.0))
    }

    /// The marks currently applied, as a training set.
    pub fn training(&self) -> TrainingSet {
        let ex = self.marks.iter().map(|(&u, &m)| {
            let pol = if m == Mark::Pos { crate::tree::Polarity::Pos } else { crate::tree::Polarity::Neg };
            (u, pol)
        });
        TrainingSet::new(ex, self.tree.len()).expect("marks are consistent")
    }

    /// Whether the automaton accepts the tree decorated with the applied
    /// marks and `params`.
    pub fn verify(&self, params: &[NodeId]) -> Result<bool> {
        let letters = self.dta().sigma.decorate(&self.tree, &self.training(), params)?;
        self.dta().accepts(&self.tree, &letters)
    }

    /// Applies `s`, traces and verifies the result by a direct run.
    pub fn solve(&mut self, s: &TrainingSet) -> Result<Option<Vec<NodeId>>> {
        self.apply_training(s)?;
        match self.trace()? {
            Some(v) => {
                if !self.verify(&v)? {
                    return Err(Error::ParamConsistency(u32::MAX));
                }
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }
}

/// Compiles `phi`, indexes `tree` and solves for `s`.
pub fn learn_parameters(tree: &LabeledTree, phi: &ParamFormula, s: &TrainingSet, opts: &LearnOptions) -> Result<Option<Hypothesis>> {
    let mut ix = index_formula(tree, phi, opts)?;
    Ok(ix.solve(s)?.map(|params| Hypothesis { formula: phi.to_string(), params }))
}

/// The index of `tree` for one formula.
pub fn index_formula(tree: &LabeledTree, phi: &ParamFormula, opts: &LearnOptions) -> Result<Index> {
    let symbols = symbols_for(tree, &phi.body);
    let dta = compile_param_formula(phi, &symbols, &opts.compile)?;
    let mut ix = Index::build(tree, dta, opts.kind, opts.monoid_cap)?;
    ix.formula = phi.to_string();
    Ok(ix)
}

/// First catalog formula, in catalog order, with consistent parameters.
pub fn learn_model(tree: &LabeledTree, catalog: &[ParamFormula], s: &TrainingSet, opts: &LearnOptions) -> Result<Option<Hypothesis>> {
    let hit = opts.exec.find_first(catalog.len(), |i| match learn_parameters(tree, &catalog[i], s, opts) {
        Ok(None) => None,
        other => Some(other),
    });
    match hit {
        Some((_, r)) => r,
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::mso::{brute_eval, Assignment, Value};
    use crate::tree::{parse_tree, ArityMode, Polarity};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FIG1: &str = "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))";
    const FIG1_S: &str = "13 -\n2 +\n15 -\n7 -\n5 +\n8 +\n";
    const PHI1: &str = "(and (exists z (and (or (E x z) (E z x)) (or (E z y) (E y z)))) (not (= x y)))";

    fn opts(mode: ArityMode) -> LearnOptions {
        LearnOptions::new(CompileOptions::new(mode))
    }

    /// Consistency of `phi` with parameters `v` by direct evaluation.
    fn consistent(t: &LabeledTree, phi: &ParamFormula, s: &TrainingSet, v: &[NodeId]) -> bool {
        let mut asg = Assignment::new();
        for (p, &u) in phi.params.iter().zip(v) {
            asg.insert(p.clone(), Value::Node(u));
        }
        s.examples().iter().all(|e| {
            asg.insert(phi.x.clone(), Value::Node(e.node));
            brute_eval(&phi.body, t, &asg).unwrap() == (e.polarity == Polarity::Pos)
        })
    }

    fn any_consistent(t: &LabeledTree, phi: &ParamFormula, s: &TrainingSet) -> bool {
        let ell = phi.ell();
        let n = t.len();
        (0..n.pow(ell as u32)).any(|mut code| {
            let v: Vec<NodeId> = (0..ell)
                .map(|_| {
                    let u = NodeId((code % n) as u32);
                    code /= n;
                    u
                })
                .collect();
            consistent(t, phi, s, &v)
        })
    }

    #[test]
    fn single_node() {
        let t = parse_tree("(a)", ArityMode::Binary).unwrap();
        let phi = ParamFormula::parse("(= x x)").unwrap();
        let ix = index_formula(&t, &phi, &opts(ArityMode::Binary)).unwrap();
        assert_eq!(ix.decomposition().num_paths(), 1);
        assert_eq!(ix.path_tree(PathId(0)).len(), 1);
        assert!(ix.consistent());
    }

    #[test]
    fn fig1_parameter_learning() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        let phi = ParamFormula::parse(PHI1).unwrap();
        let mut ix = index_formula(&t, &phi, &opts(ArityMode::Unranked)).unwrap();
        assert!(ix.consistent());
        let v = ix.solve(&s).unwrap().expect("u5 is consistent");
        assert!(consistent(&t, &phi, &s, &v));
        assert!(consistent(&t, &phi, &s, &[NodeId(3)]));
        // reuse: the empty set, then S again
        assert!(ix.solve(&TrainingSet::default()).unwrap().is_some());
        assert_eq!(ix.solve(&s).unwrap(), Some(v));
    }

    #[test]
    fn index_roundtrip() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        let phi = ParamFormula::parse(PHI1).unwrap();
        let mut ix = index_formula(&t, &phi, &opts(ArityMode::Unranked)).unwrap();
        let bytes = ix.to_bytes().unwrap();
        let mut back = Index::from_bytes(&bytes).unwrap();
        assert_eq!(back.formula, ix.formula);
        assert_eq!(back.solve(&s).unwrap(), ix.solve(&s).unwrap());
        assert!(matches!(Index::from_bytes(b"junk"), Err(Error::IndexFormat(_))));
        assert!(matches!(Index::from_bytes(&bytes[..bytes.len() / 2]), Err(Error::IndexFormat(_))));
    }

    #[test]
    fn fig1_adversarial_training() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let phi = ParamFormula::parse(PHI1).unwrap();
        // no node lies two steps from both u1 and u2
        let s = TrainingSet::parse("0 +\n1 +\n", t.len()).unwrap();
        let mut ix = index_formula(&t, &phi, &opts(ArityMode::Unranked)).unwrap();
        assert_eq!(ix.solve(&s).unwrap(), None);
        assert!(!any_consistent(&t, &phi, &s));
    }

    #[test]
    fn fig1_model_learning() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        let psi = ParamFormula::parse("(exists z (E1 z x))").unwrap();
        let h = learn_model(&t, &[psi], &s, &opts(ArityMode::Unranked)).unwrap().unwrap();
        assert!(h.params.is_empty());
        let never = ParamFormula::parse("(and (= x x) (not (= x x)))").unwrap();
        assert_eq!(learn_model(&t, std::slice::from_ref(&never), &s, &opts(ArityMode::Unranked)).unwrap(), None);
        let all_pos = TrainingSet::parse("0 +\n4 +\n", t.len()).unwrap();
        let truth = ParamFormula::parse("(= x x)").unwrap();
        let h = learn_model(&t, &[never, truth.clone()], &all_pos, &opts(ArityMode::Unranked)).unwrap().unwrap();
        assert_eq!(h.formula, truth.to_string());
    }

    #[test]
    fn exhaustive_small_instances() {
        let phis = ["(le y x)", "(or (E1 y x) (E2 y x))", "(and (le y x) (not (le z x)))", "(and (le y x) (label b y))"];
        for f in phis {
            let phi = ParamFormula::parse(f).unwrap();
            for n in 1..=6 {
                for (shape, alt) in gen::binary_shapes(n, false).into_iter().flat_map(|s| [(s.clone(), false), (s, true)]) {
                    let labels: Vec<&str> = (0..n).map(|i| if alt && i % 2 == 1 { "b" } else { "a" }).collect();
                    let t = gen::labeled(&shape, ArityMode::Binary, &labels);
                    let mut ix = index_formula(&t, &phi, &opts(ArityMode::Binary)).unwrap();
                    let exs: Vec<(NodeId, Polarity)> = t.nodes().flat_map(|u| [(u, Polarity::Pos), (u, Polarity::Neg)]).collect();
                    for i in 0..exs.len() {
                        for j in i + 1..exs.len() {
                            let Ok(s) = TrainingSet::new([exs[i], exs[j]], t.len()) else { continue };
                            let got = ix.solve(&s).unwrap();
                            assert_eq!(got.is_some(), any_consistent(&t, &phi, &s), "{f} {shape} {s:?}");
                            if let Some(v) = got {
                                assert!(consistent(&t, &phi, &s, &v));
                            }
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn agrees_with_brute_force(seed in any::<u64>(), n in 1usize..40, k in 0usize..5, unranked in any::<bool>(), which in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mode = if unranked { ArityMode::Unranked } else { ArityMode::Binary };
            let t = if unranked { gen::random_unranked(&mut rng, n, &["a", "b"]) } else { gen::random_binary(&mut rng, n, &["a", "b"]) };
            let f = ["(le y x)", PHI1, "(and (le y x) (le z x))"][which];
            let phi = ParamFormula::parse(f).unwrap();
            let ex: Vec<(NodeId, Polarity)> = (0..k)
                .map(|_| (NodeId(rng.gen_range(0..n as u32)), if rng.gen() { Polarity::Pos } else { Polarity::Neg }))
                .collect();
            let Ok(s) = TrainingSet::new(ex, n) else { return Ok(()) };
            let got = learn_parameters(&t, &phi, &s, &opts(mode)).unwrap();
            prop_assert_eq!(got.is_some(), any_consistent(&t, &phi, &s));
            if let Some(h) = got {
                prop_assert!(consistent(&t, &phi, &s, &h.params));
            }
        }
    }
}
