//! Direct semantic evaluation by exhaustive search over assignments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tree::{LabeledTree, NodeId, Relation};

use super::formula::{Formula, MarkSet, Rel, N_SET, P_SET};

/// Largest tree `brute_eval` accepts for formulas with set quantifiers.
pub const MAX_NODES: usize = 20;

/// Largest tree for any formula; sets are bitmasks.
const MAX_FO_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Value {
    Node(NodeId),
    Set(u64),
}

pub type Assignment = BTreeMap<String, Value>;

/// Evaluates `f` on `tree`. Set quantifiers range over all subsets.
pub fn brute_eval(f: &Formula, tree: &LabeledTree, asg: &Assignment) -> Result<bool> {
    if tree.len() > MAX_FO_NODES || (f.has_set_quantifier() && tree.len() > MAX_NODES) {
        return Err(Error::Budget(format!("brute-force evaluation on {} nodes", tree.len())));
    }
    let mut asg = asg.clone();
    Ok(eval(f, tree, &mut asg))
}

fn node(asg: &Assignment, v: &str) -> NodeId {
    match asg.get(v) {
        Some(Value::Node(u)) => *u,
        other => panic!("variable {v} is not bound to a node: {other:?}"),
    }
}

fn set(asg: &Assignment, v: &str) -> u64 {
    match asg.get(v) {
        Some(Value::Set(s)) => *s,
        other => panic!("variable {v} is not bound to a set: {other:?}"),
    }
}

fn holds(tree: &LabeledTree, rel: Rel, u: NodeId, v: NodeId) -> bool {
    match rel {
        Rel::E1 => tree.holds(Relation::E1, &[u, v]),
        Rel::E2 => tree.holds(Relation::E2, &[u, v]),
        Rel::Edge => tree.holds(Relation::Child, &[u, v]),
        Rel::Le => tree.holds(Relation::Le, &[u, v]),
        Rel::Lt => tree.holds(Relation::Lt, &[u, v]),
        Rel::Eq => u == v,
        Rel::Sib => {
            let mut w = Some(u);
            while let Some(x) = w {
                if x == v {
                    return true;
                }
                w = tree.e2(x);
            }
            false
        }
    }
}

fn with<T>(asg: &mut Assignment, v: &str, val: Value, k: impl FnOnce(&mut Assignment) -> T) -> T {
    let old = asg.insert(v.to_owned(), val);
    let out = k(asg);
    match old {
        Some(o) => asg.insert(v.to_owned(), o),
        None => asg.remove(v),
    };
    out
}

fn eval(f: &Formula, t: &LabeledTree, asg: &mut Assignment) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Label(a, x) => t.label_name(node(asg, x)) == a,
        Formula::Rel(r, x, y) => holds(t, *r, node(asg, x), node(asg, y)),
        Formula::In(x, s) => set(asg, s) >> node(asg, x).0 & 1 == 1,
        Formula::Mark(m, x) => {
            let s = match m {
                MarkSet::P => P_SET,
                MarkSet::N => N_SET,
            };
            set(asg, s) >> node(asg, x).0 & 1 == 1
        }
        Formula::Not(g) => !eval(g, t, asg),
        Formula::And(gs) => gs.iter().all(|g| eval(g, t, asg)),
        Formula::Or(gs) => gs.iter().any(|g| eval(g, t, asg)),
        Formula::Implies(a, b) => !eval(a, t, asg) || eval(b, t, asg),
        Formula::Exists(v, g) => t.nodes().any(|u| with(asg, v, Value::Node(u), |a| eval(g, t, a))),
        Formula::Forall(v, g) => t.nodes().all(|u| with(asg, v, Value::Node(u), |a| eval(g, t, a))),
        Formula::ExistsSet(v, g) => (0..1u64 << t.len()).any(|s| with(asg, v, Value::Set(s), |a| eval(g, t, a))),
        Formula::ForallSet(v, g) => (0..1u64 << t.len()).all(|s| with(asg, v, Value::Set(s), |a| eval(g, t, a))),
    }
}
