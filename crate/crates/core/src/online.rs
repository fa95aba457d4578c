//! Online learning: one index with fixed-shape factorization trees, updated
//! one example or one label change at a time.

use crate::automata::{Mark, TreeAutomaton};
use crate::error::{Error, Result};
use crate::factorization::TreeKind;
use crate::learner::{index_formula, Hypothesis, Index, LearnOptions};
use crate::monoid::SetId;
use crate::mso::ParamFormula;
use crate::tree::{LabeledTree, NodeId, Polarity, TrainingSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Consistent(Hypothesis),
    NotRealizable,
}

/// Cost of the last update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCost {
    pub update_touched: u64,
    pub trace_steps: u64,
}

pub struct OnlineState {
    index: Index,
    seen: TrainingSet,
    current: Option<Hypothesis>,
    last: StepCost,
}

/// Indexes `tree` for `aut` with binary factorization trees.
pub fn online_init(tree: &LabeledTree, aut: TreeAutomaton, monoid_cap: usize) -> Result<OnlineState> {
    Ok(OnlineState::new(Index::build(tree, aut, TreeKind::Binary, monoid_cap)?))
}

/// Compiles `phi` and indexes `tree` for online use.
pub fn online_init_formula(tree: &LabeledTree, phi: &ParamFormula, opts: &LearnOptions) -> Result<OnlineState> {
    let opts = LearnOptions { kind: TreeKind::Binary, ..opts.clone() };
    Ok(OnlineState::new(index_formula(tree, phi, &opts)?))
}

impl OnlineState {
    fn new(index: Index) -> Self {
        OnlineState { index, seen: TrainingSet::default(), current: None, last: StepCost::default() }
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn seen(&self) -> &TrainingSet {
        &self.seen
    }

    pub fn current(&self) -> Option<&Hypothesis> {
        self.current.as_ref()
    }

    pub fn last_cost(&self) -> StepCost {
        self.last
    }

    pub fn root_set(&self) -> SetId {
        self.index.root_set()
    }

    /// Adds one example and returns a hypothesis consistent with every
    /// example seen so far.
    pub fn add(&mut self, node: NodeId, polarity: Polarity) -> Result<Verdict> {
        self.index.tree().check(node)?;
        if self.index.mark(node) == Mark::from(polarity) {
            return self.step(|_| Ok(()));
        }
        self.seen.push(node, polarity)?;
        self.step(|ix| ix.set_mark(node, polarity.into()))
    }

    /// Changes the label of `node` and returns a fresh hypothesis.
    pub fn relabel(&mut self, node: NodeId, label: &str) -> Result<Verdict> {
        self.step(|ix| ix.relabel(node, label))
    }

    /// Adds the examples one at a time, returning every intermediate
    /// verdict.
    pub fn add_all(&mut self, s: &TrainingSet) -> Result<Vec<Verdict>> {
        s.examples().iter().map(|e| self.add(e.node, e.polarity)).collect()
    }

    fn step(&mut self, f: impl FnOnce(&mut Index) -> Result<()>) -> Result<Verdict> {
        let before = self.index.counters;
        f(&mut self.index)?;
        let traced = self.index.trace()?;
        let after = self.index.counters;
        self.last = StepCost {
            update_touched: after.update_touched - before.update_touched,
            trace_steps: after.trace_steps - before.trace_steps,
        };
        self.current = match traced {
            Some(params) => {
                if !self.index.verify(&params)? {
                    return Err(Error::ParamConsistency(u32::MAX));
                }
                Some(Hypothesis { formula: self.index.formula.clone(), params })
            }
            None => None,
        };
        Ok(match &self.current {
            Some(h) => Verdict::Consistent(h.clone()),
            None => Verdict::NotRealizable,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mso::CompileOptions;
    use crate::tree::{parse_tree, ArityMode};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FIG1: &str = "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))";
    const FIG1_S: &str = "13 -\n2 +\n15 -\n7 -\n5 +\n8 +\n";
    const PHI1: &str = "(and (exists z (and (or (E x z) (E z x)) (or (E z y) (E y z)))) (not (= x y)))";

    fn fig1() -> (LabeledTree, ParamFormula, LearnOptions) {
        let t = parse_tree(FIG1, ArityMode::Unranked).unwrap();
        (t, ParamFormula::parse(PHI1).unwrap(), LearnOptions::new(CompileOptions::new(ArityMode::Unranked)))
    }

    #[test]
    fn single_node() {
        let t = parse_tree("(a)", ArityMode::Binary).unwrap();
        let phi = ParamFormula::parse("(= x y)").unwrap();
        let mut st = online_init_formula(&t, &phi, &LearnOptions::new(CompileOptions::new(ArityMode::Binary))).unwrap();
        let v = st.add(NodeId(0), Polarity::Neg).unwrap();
        assert_eq!(v, Verdict::NotRealizable);
        assert!(matches!(st.add(NodeId(0), Polarity::Pos), Err(Error::Contradiction(0))));
        assert!(matches!(st.add(NodeId(1), Polarity::Pos), Err(Error::InvalidNode(1))));
    }

    #[test]
    fn fig1_prefixes() {
        let (t, phi, opts) = fig1();
        let mut st = online_init_formula(&t, &phi, &opts).unwrap();
        let s = TrainingSet::parse(FIG1_S, t.len()).unwrap();
        for v in st.add_all(&s).unwrap() {
            assert!(matches!(v, Verdict::Consistent(_)));
        }
        assert_eq!(st.current().unwrap().params, vec![NodeId(3)]);
        assert_eq!(st.seen(), &s);
    }

    #[test]
    fn relabels() {
        let (t, phi, opts) = fig1();
        let mut st = online_init_formula(&t, &phi, &opts).unwrap();
        let r0 = st.root_set();
        st.relabel(NodeId(4), "a").unwrap();
        assert_eq!(st.root_set(), r0);
        assert!(matches!(st.relabel(NodeId(4), "zz"), Err(Error::UnknownSymbol(_))));
        let phi_b = ParamFormula::parse("(and (le y x) (label b x))").unwrap();
        let mut st = online_init_formula(&t, &phi_b, &opts).unwrap();
        let r0 = st.root_set();
        assert_eq!(st.add(NodeId(4), Polarity::Pos).unwrap(), Verdict::NotRealizable);
        let r1 = st.root_set();
        assert_ne!(r1, r0);
        assert!(matches!(st.relabel(NodeId(4), "b").unwrap(), Verdict::Consistent(_)));
        st.relabel(NodeId(4), "a").unwrap();
        assert_eq!(st.index().tree().label_name(NodeId(4)), "a");
        assert_eq!(st.root_set(), r1);
    }

    /// Element ids are interned per index; transition tables are not.
    fn canonical(ix: &Index, s: SetId) -> Vec<Vec<u32>> {
        let pm = ix.power_monoid();
        let mut out: Vec<Vec<u32>> = pm.elems(s).iter().map(|&m| pm.m.table(m).to_vec()).collect();
        out.sort();
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        /// Any mix of updates leaves the same root element as indexing the
        /// final tree and marks from scratch.
        #[test]
        fn matches_rebuild(seed in any::<u64>(), n in 1usize..60, steps in 1usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = crate::gen::random_binary(&mut rng, n, &["a", "b"]);
            let phi = ParamFormula::parse("(and (le y x) (label b x))").unwrap();
            let opts = LearnOptions::new(CompileOptions::new(ArityMode::Binary));
            let mut st = online_init_formula(&t, &phi, &opts).unwrap();
            let mut nodes: Vec<u32> = (0..n as u32).collect();
            nodes.shuffle(&mut rng);
            let mut next = nodes.into_iter();
            for _ in 0..steps {
                if rng.gen_bool(0.5) {
                    let u = NodeId(rng.gen_range(0..n as u32));
                    st.relabel(u, if rng.gen() { "a" } else { "b" }).unwrap();
                } else if let Some(u) = next.next() {
                    let pol = if rng.gen() { Polarity::Pos } else { Polarity::Neg };
                    if let Verdict::Consistent(h) = st.add(NodeId(u), pol).unwrap() {
                        prop_assert_eq!(h.params.len(), 1);
                    }
                }
            }
            let mut fresh = index_formula(st.index().tree(), &phi, &LearnOptions { kind: TreeKind::Binary, ..opts.clone() }).unwrap();
            fresh.apply_training(st.seen()).unwrap();
            prop_assert_eq!(canonical(&fresh, fresh.root_set()), canonical(st.index(), st.root_set()));
            prop_assert_eq!(fresh.consistent(), st.index().consistent());
            for i in 0..n {
                let u = NodeId(i as u32);
                prop_assert_eq!(fresh.letter(u).sym, st.index().letter(u).sym);
            }
        }
    }
}
