//! Quantifier-free learning with lowest-common-ancestor access.
//!
//! Only the relations between examples and parameters matter, so each
//! candidate node is summarized by its atomic relations to every example.
//! A parameter tuple works iff no positive and no negative example end up
//! with the same combined feature vector; the formula is then a DNF over the
//! feature vectors of the positives.

use std::collections::{BTreeSet, HashMap};

use crate::error::Result;
use crate::exec::Exec;
use crate::gen;
use crate::mso::{Formula, ParamFormula, Rel};
use crate::oracle::OracleSession;
use crate::tree::{ArityMode, LabeledTree, NodeId, Polarity, Relation, TrainingSet};

/// Binary relations of the signature for `mode`.
pub fn signature(mode: ArityMode) -> &'static [Relation] {
    match mode {
        ArityMode::Binary => &[Relation::E1, Relation::E2, Relation::Le],
        ArityMode::Unranked => &[Relation::E1, Relation::E2, Relation::Le, Relation::Sib],
    }
}

fn rel_of(r: Relation) -> Rel {
    match r {
        Relation::E1 => Rel::E1,
        Relation::E2 => Rel::E2,
        Relation::Le => Rel::Le,
        Relation::Sib => Rel::Sib,
        other => unreachable!("{other:?} is not in the signature"),
    }
}

/// Closure of the example nodes under pairwise lowest common ancestors.
pub fn lca_closure(sess: &mut OracleSession<'_>, s: &TrainingSet) -> Vec<NodeId> {
    let mut set: BTreeSet<NodeId> = s.examples().iter().map(|e| e.node).collect();
    let mut todo: Vec<NodeId> = set.iter().copied().collect();
    let mut done: Vec<NodeId> = Vec::new();
    while let Some(u) = todo.pop() {
        for &w in &done {
            let a = sess.lca(u, w);
            if set.insert(a) {
                todo.push(a);
            }
        }
        done.push(u);
    }
    set.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SufficientSet {
    pub nodes: Vec<NodeId>,
    /// Parameter slots needed per original parameter.
    pub multiplicity: usize,
}

/// The 2-neighborhood of the LCA closure of the examples.
pub fn sufficient_set(sess: &mut OracleSession<'_>, s: &TrainingSet) -> SufficientSet {
    let mut out = BTreeSet::new();
    for u in lca_closure(sess, s) {
        for w in sess.neighborhood(u) {
            out.insert(w);
            out.extend(sess.neighborhood(w));
        }
    }
    let multiplicity = match sess.mode() {
        ArityMode::Binary => 1,
        ArityMode::Unranked => 2,
    };
    SufficientSet { nodes: out.into_iter().collect(), multiplicity }
}

/// Relations of every candidate to every example, one bit per atom.
struct FeatureTable {
    /// `bits[c][e]` for candidate `c` and example `e`.
    bits: Vec<Vec<u16>>,
    positive: Vec<bool>,
}

impl FeatureTable {
    fn new(sess: &mut OracleSession<'_>, s: &TrainingSet, candidates: &[NodeId]) -> Result<Self> {
        let sig = signature(sess.mode());
        let mut bits = Vec::with_capacity(candidates.len());
        for &v in candidates {
            let mut row = Vec::with_capacity(s.len());
            for e in s.examples() {
                let mut b = 0u16;
                for (j, &r) in sig.iter().enumerate() {
                    b |= (sess.relation(r, &[e.node, v])? as u16) << (2 * j);
                    b |= (sess.relation(r, &[v, e.node])? as u16) << (2 * j + 1);
                }
                b |= ((e.node == v) as u16) << (2 * sig.len());
                row.push(b);
            }
            bits.push(row);
        }
        Ok(FeatureTable { bits, positive: s.examples().iter().map(|e| e.polarity == Polarity::Pos).collect() })
    }

    fn feasible(&self, tuple: &[usize]) -> bool {
        let mut seen: HashMap<Vec<u16>, bool> = HashMap::with_capacity(self.positive.len());
        for (e, &pos) in self.positive.iter().enumerate() {
            let key: Vec<u16> = tuple.iter().map(|&c| self.bits[c][e]).collect();
            if *seen.entry(key).or_insert(pos) != pos {
                return false;
            }
        }
        true
    }
}

/// First nondecreasing tuple of `k` candidate indices starting with
/// `first`, in lexicographic order, accepted by `ok`.
fn first_tuple(n: usize, k: usize, first: usize, ok: &dyn Fn(&[usize]) -> bool) -> Option<Vec<usize>> {
    fn go(n: usize, k: usize, cur: &mut Vec<usize>, ok: &dyn Fn(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return ok(cur);
        }
        let lo = *cur.last().expect("nonempty");
        for c in lo..n {
            cur.push(c);
            if go(n, k, cur, ok) {
                return true;
            }
            cur.pop();
        }
        false
    }
    let mut cur = vec![first];
    go(n, k, &mut cur, ok).then_some(cur)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QfHypothesis {
    pub formula: ParamFormula,
    pub params: Vec<NodeId>,
}

/// Searches `slots`-tuples over `candidates` for one separating the
/// examples and synthesizes the formula.
pub fn qf_search(
    sess: &mut OracleSession<'_>,
    s: &TrainingSet,
    candidates: &[NodeId],
    slots: usize,
    exec: Exec,
) -> Result<Option<QfHypothesis>> {
    if s.is_empty() {
        // nothing to separate and no node to anchor parameters at
        return Ok(Some(QfHypothesis { formula: ParamFormula::with_vars("x", &[], Formula::True), params: Vec::new() }));
    }
    let table = FeatureTable::new(sess, s, candidates)?;
    let tuple = if slots == 0 {
        table.feasible(&[]).then(Vec::new)
    } else {
        let ok = |t: &[usize]| table.feasible(t);
        exec.find_first(candidates.len(), |i| first_tuple(candidates.len(), slots, i, &ok)).map(|(_, t)| t)
    };
    Ok(tuple.map(|t| synthesize(sess.mode(), &table, &t, candidates)))
}

fn synthesize(mode: ArityMode, table: &FeatureTable, tuple: &[usize], candidates: &[NodeId]) -> QfHypothesis {
    let sig = signature(mode);
    let ys: Vec<String> = (1..=tuple.len()).map(|i| format!("y{i}")).collect();
    let params = tuple.iter().map(|&c| candidates[c]).collect();
    let body = if table.positive.iter().all(|&p| !p) {
        Formula::False
    } else if table.positive.iter().all(|&p| p) {
        Formula::True
    } else {
        let mut keys: BTreeSet<Vec<u16>> = BTreeSet::new();
        for (e, _) in table.positive.iter().enumerate().filter(|(_, &p)| p) {
            keys.insert(tuple.iter().map(|&c| table.bits[c][e]).collect());
        }
        let disjuncts = keys
            .into_iter()
            .map(|key| {
                let mut lits = Vec::new();
                for (i, &b) in key.iter().enumerate() {
                    let y = ys[i].as_str();
                    let mut atoms: Vec<Formula> = Vec::new();
                    for &r in sig {
                        atoms.push(Formula::rel(rel_of(r), "x", y));
                        atoms.push(Formula::rel(rel_of(r), y, "x"));
                    }
                    atoms.push(Formula::rel(Rel::Eq, "x", y));
                    for (j, a) in atoms.into_iter().enumerate() {
                        lits.push(if b >> j & 1 == 1 { a } else { Formula::negate(a) });
                    }
                }
                Formula::And(lits)
            })
            .collect();
        Formula::Or(disjuncts)
    };
    let refs: Vec<&str> = ys.iter().map(String::as_str).collect();
    QfHypothesis { formula: ParamFormula::with_vars("x", &refs, body), params }
}

/// Learns a quantifier-free hypothesis with `ell` parameters, searching
/// only the sufficient set.
pub fn learn_qf(sess: &mut OracleSession<'_>, s: &TrainingSet, ell: usize, exec: Exec) -> Result<Option<QfHypothesis>> {
    let suff = sufficient_set(sess, s);
    qf_search(sess, s, &suff.nodes, ell * suff.multiplicity, exec)
}

/// The lower-bound fixture: the tree, its training set and the node `v`
/// below which exactly the positive examples lie.
pub struct Lemma3 {
    pub tree: LabeledTree,
    pub training: TrainingSet,
    pub v: NodeId,
}

pub fn gen_lemma3_tree(m: usize, ell: usize) -> Lemma3 {
    let (tree, training, v) = gen::spine_fan_tree(m, ell);
    Lemma3 { tree, training, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mso::{brute_eval, Assignment, Value};
    use crate::tree::parse_tree;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FIG1: &str = "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))";
    const FIG1_S: &str = "13 -\n2 +\n15 -\n7 -\n5 +\n8 +\n";

    /// Consistency of a hypothesis by direct evaluation.
    fn holds(t: &LabeledTree, h: &QfHypothesis, s: &TrainingSet) -> bool {
        let mut asg = Assignment::new();
        for (y, &v) in h.formula.params.iter().zip(&h.params) {
            asg.insert(y.clone(), Value::Node(v));
        }
        s.examples().iter().all(|e| {
            asg.insert("x".into(), Value::Node(e.node));
            brute_eval(&h.formula.body, t, &asg).unwrap() == (e.polarity == Polarity::Pos)
        })
    }

    #[test]
    fn closure_examples() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let mut sess = OracleSession::new(&t);
        let one = TrainingSet::parse("4 +\n", t.len()).unwrap();
        assert_eq!(lca_closure(&mut sess, &one), vec![NodeId(4)]);
        let sibs = TrainingSet::parse("6 +\n7 -\n", t.len()).unwrap();
        assert_eq!(lca_closure(&mut sess, &sibs), vec![NodeId(3), NodeId(6), NodeId(7)]);
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        let c = lca_closure(&mut sess, &s);
        assert!(c.contains(&NodeId(3)) && c.contains(&NodeId(0)));
    }

    #[test]
    fn leaf_neighborhood() {
        let t = parse_tree("(a (a (a (a) (a)) (a)) (a))", ArityMode::Binary).unwrap();
        let mut sess = OracleSession::new(&t);
        let s = TrainingSet::parse("3 +\n", t.len()).unwrap();
        let suff = sufficient_set(&mut sess, &s);
        // the leaf, its parent and sibling, and the grandparent
        assert_eq!(suff.nodes, vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)]);
        assert_eq!(suff.multiplicity, 1);
    }

    #[test]
    fn trivial_training_sets() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let mut sess = OracleSession::new(&t);
        let s = TrainingSet::parse("2 +\n5 +\n", t.len()).unwrap();
        let h = learn_qf(&mut sess, &s, 0, Exec::Sequential).unwrap().unwrap();
        assert_eq!(h.formula.body, Formula::True);
        assert!(h.params.is_empty());
        let h = learn_qf(&mut sess, &TrainingSet::default(), 2, Exec::Sequential).unwrap().unwrap();
        assert_eq!(h.formula.body, Formula::True);
        assert!(h.params.is_empty());
    }

    #[test]
    fn fig1_with_one_parameter() {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        let mut sess = OracleSession::new(&t);
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        assert!(learn_qf(&mut sess, &s, 0, Exec::Sequential).unwrap().is_none());
        if let Some(h) = learn_qf(&mut sess, &s, 1, Exec::Parallel).unwrap() {
            assert!(holds(&t, &h, &s));
        }
    }

    #[test]
    fn lemma3_fixture() {
        let mut calls = None;
        for m in [8, 40, 300] {
            let f = gen_lemma3_tree(m, 1);
            assert_eq!(f.training.len(), 4);
            let mut sess = OracleSession::new(&f.tree);
            let suff = sufficient_set(&mut sess, &f.training);
            assert!(suff.nodes.contains(&f.v));
            let h = learn_qf(&mut sess, &f.training, 1, Exec::Sequential).unwrap().unwrap();
            if f.tree.len() <= 64 {
                assert!(holds(&f.tree, &h, &f.training));
            }
            let c = sess.counters().total();
            assert_eq!(*calls.get_or_insert(c), c);
        }
        let small = gen_lemma3_tree(1, 0);
        assert_eq!(small.training.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn hypotheses_are_consistent(seed in any::<u64>(), n in 1usize..30, k in 1usize..6, unranked in any::<bool>(), ell in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = if unranked { gen::random_unranked(&mut rng, n, &["a"]) } else { gen::random_binary(&mut rng, n, &["a"]) };
            let ex: Vec<(NodeId, Polarity)> = (0..k)
                .map(|_| (NodeId(rng.gen_range(0..n as u32)), if rng.gen() { Polarity::Pos } else { Polarity::Neg }))
                .collect();
            let Ok(s) = TrainingSet::new(ex, n) else { return Ok(()) };
            let mut sess = OracleSession::new(&t);
            if let Some(h) = learn_qf(&mut sess, &s, ell, Exec::Sequential).unwrap() {
                prop_assert!(holds(&t, &h, &s));
                if !s.is_empty() {
                    prop_assert_eq!(h.params.len(), ell * if unranked { 2 } else { 1 });
                }
            }
            let suff = sufficient_set(&mut OracleSession::new(&t), &s);
            prop_assert!(suff.nodes.len() <= 40 * s.len());
        }
    }
}
