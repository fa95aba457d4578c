//! Exhaustive reference searches, used as ground truth for the learners.

use crate::automata::TreeAutomaton;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::oracle::OracleSession;
use crate::qf::{qf_search, QfHypothesis};
use crate::tree::{LabeledTree, NodeId, TrainingSet};

/// Largest number of candidate tuples a search may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(50_000_000)
    }
}

impl Budget {
    fn check(self, what: &str, tuples: Option<u64>) -> Result<()> {
        match tuples {
            Some(t) if t <= self.0 => Ok(()),
            _ => Err(Error::Budget(format!("{what}: more than {} candidate tuples", self.0))),
        }
    }
}

/// Whether `aut` accepts `tree` decorated with `s` and `params`.
pub fn bf_consistent(tree: &LabeledTree, aut: &TreeAutomaton, params: &[NodeId], s: &TrainingSet) -> Result<bool> {
    let letters = aut.sigma.decorate(tree, s, params)?;
    aut.accepts(tree, &letters)
}

/// The lexicographically first parameter tuple over all nodes for which
/// `aut` accepts.
pub fn bf_search(
    tree: &LabeledTree,
    aut: &TreeAutomaton,
    s: &TrainingSet,
    exec: Exec,
    budget: Budget,
) -> Result<Option<Vec<NodeId>>> {
    let ell = aut.sigma.ell;
    let n = tree.len();
    budget.check("bf_search", (n as u64).checked_pow(ell))?;
    let base: Vec<u32> = aut
        .sigma
        .decorate(tree, s, &vec![tree.root(); ell as usize])?
        .into_iter()
        .map(|a| {
            let (sym, mark, _) = aut.sigma.decode(a);
            aut.sigma.letter(sym, mark, 0)
        })
        .collect();
    if ell == 0 {
        return Ok(aut.accepts(tree, &base)?.then(Vec::new));
    }
    let hit = exec.find_first(n, |first| {
        let mut letters = base.clone();
        let mut tuple = vec![0; ell as usize];
        tuple[0] = first;
        loop {
            letters.copy_from_slice(&base);
            for (i, &v) in tuple.iter().enumerate() {
                letters[v] |= 1 << i;
            }
            if aut.accepts(tree, &letters).expect("letters come from the automaton alphabet") {
                return Some(tuple.iter().map(|&v| NodeId(v as u32)).collect::<Vec<_>>());
            }
            // odometer over positions 1.., the first stays fixed
            let mut k = ell as usize - 1;
            loop {
                if k == 0 {
                    return None;
                }
                tuple[k] += 1;
                if tuple[k] < n {
                    break;
                }
                tuple[k] = 0;
                k -= 1;
            }
        }
    });
    Ok(hit.map(|(_, t)| t))
}

/// A quantifier-free hypothesis with `ell` parameters ranging over every
/// node of the tree.
pub fn bf_qf_search(tree: &LabeledTree, s: &TrainingSet, ell: usize, exec: Exec, budget: Budget) -> Result<Option<QfHypothesis>> {
    let n = tree.len() as u64;
    // nondecreasing tuples: C(n + ell - 1, ell)
    let tuples = (0..ell as u64).try_fold(1u64, |acc, i| acc.checked_mul(n + i).map(|v| v / (i + 1)));
    budget.check("bf_qf_search", tuples)?;
    let mut sess = OracleSession::new(tree);
    let all: Vec<NodeId> = tree.nodes().collect();
    qf_search(&mut sess, s, &all, ell, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mso::{compile_param_formula, symbols_for, CompileOptions, ParamFormula};
    use crate::tree::{parse_tree, ArityMode};

    fn setup(tree: &str, phi: &str) -> (LabeledTree, TreeAutomaton) {
        let t = parse_tree(tree, ArityMode::Binary).unwrap();
        let phi = ParamFormula::parse(phi).unwrap();
        let aut = compile_param_formula(&phi, &symbols_for(&t, &phi.body), &CompileOptions::new(ArityMode::Binary)).unwrap();
        (t, aut)
    }

    #[test]
    fn first_witness_in_lexicographic_order() {
        let (t, aut) = setup("(a (a (a) (a)) (a))", "(le y x)");
        let s = TrainingSet::parse("2 +\n3 +\n4 -\n", t.len()).unwrap();
        for ex in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(bf_search(&t, &aut, &s, ex, Budget::default()).unwrap(), Some(vec![NodeId(1)]));
        }
        assert!(bf_consistent(&t, &aut, &[NodeId(1)], &s).unwrap());
        assert!(!bf_consistent(&t, &aut, &[NodeId(0)], &s).unwrap());
        let bad = TrainingSet::parse("2 +\n4 +\n1 -\n", t.len()).unwrap();
        assert_eq!(bf_search(&t, &aut, &bad, Exec::Sequential, Budget::default()).unwrap(), None);
    }

    #[test]
    fn two_parameters() {
        let (t, aut) = setup("(a (a (a) (a)) (a))", "(or (le y x) (le z x))");
        let s = TrainingSet::parse("2 +\n4 +\n3 -\n", t.len()).unwrap();
        // y = 2 and z = 4 is the first pair that avoids 3
        let want = Some(vec![NodeId(2), NodeId(4)]);
        for ex in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(bf_search(&t, &aut, &s, ex, Budget::default()).unwrap(), want);
        }
    }

    #[test]
    fn later_parameters_may_precede_the_first() {
        let (t, aut) = setup("(a (a) (a))", "(and (le y x) (not (le z x)))");
        let s = TrainingSet::parse("0 -\n2 +\n", t.len()).unwrap();
        for ex in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(bf_search(&t, &aut, &s, ex, Budget::default()).unwrap(), Some(vec![NodeId(2), NodeId(1)]));
        }
    }

    #[test]
    fn budget_fails_loudly() {
        let (t, aut) = setup("(a (a (a) (a)) (a))", "(or (le y x) (le z x))");
        let s = TrainingSet::parse("2 +\n", t.len()).unwrap();
        let err = bf_search(&t, &aut, &s, Exec::Sequential, Budget(10)).unwrap_err();
        assert!(matches!(err, Error::Budget(_)));
        assert!(matches!(bf_qf_search(&t, &s, 3, Exec::Sequential, Budget(10)), Err(Error::Budget(_))));
    }

    #[test]
    fn qf_over_all_nodes() {
        let t = parse_tree("(a (a (a) (a)) (a))", ArityMode::Binary).unwrap();
        let s = TrainingSet::parse("2 +\n3 +\n4 -\n", t.len()).unwrap();
        assert!(bf_qf_search(&t, &s, 0, Exec::Sequential, Budget::default()).unwrap().is_none());
        let h = bf_qf_search(&t, &s, 1, Exec::Parallel, Budget::default()).unwrap().unwrap();
        assert_eq!(h.params, vec![NodeId(0)]);
    }
}
