//! Tree generators: random families, exhaustive shape enumerations, and the
//! spine-and-fan fixture that defeats purely local learners.

use rand::Rng;

use crate::tree::{ArityMode, LabeledTree, NodeId, Polarity, TrainingSet, TreeBuilder};

/// Random tree with exactly `n` nodes (`n` odd) where every node has zero
/// or two children. Sizes are split uniformly at random, giving expected
/// logarithmic depth.
pub fn random_full_binary<R: Rng>(rng: &mut R, n: usize, labels: &[&str]) -> LabeledTree {
    assert!(n % 2 == 1, "a 0/2-ary tree has an odd node count");
    random_binary_impl(rng, n, labels, false)
}

/// Random binary tree with `n` nodes, unary nodes allowed in either slot.
pub fn random_binary<R: Rng>(rng: &mut R, n: usize, labels: &[&str]) -> LabeledTree {
    random_binary_impl(rng, n, labels, true)
}

fn random_binary_impl<R: Rng>(rng: &mut R, n: usize, labels: &[&str], unary: bool) -> LabeledTree {
    assert!(n >= 1);
    let mut b = TreeBuilder::new(ArityMode::Binary);
    let pick = |rng: &mut R| labels[rng.gen_range(0..labels.len())];
    let root = b.root(pick(rng));
    // (parent, second slot, size)
    let mut stack: Vec<(NodeId, usize)> = vec![(root, n)];
    let mut pending: Vec<(NodeId, bool, usize)> = Vec::new();
    loop {
        if let Some((u, size)) = stack.pop() {
            let rest = size - 1;
            if rest == 0 {
                continue;
            }
            if unary && rng.gen_bool(1.0 / 3.0) {
                pending.push((u, rng.gen_bool(0.5), rest));
            } else if unary {
                let l = rng.gen_range(0..=rest);
                if l < rest {
                    pending.push((u, true, rest - l));
                }
                if l > 0 {
                    pending.push((u, false, l));
                }
            } else {
                let l = 2 * rng.gen_range(0..rest / 2) + 1;
                pending.push((u, true, rest - l));
                pending.push((u, false, l));
            }
        }
        match pending.pop() {
            Some((p, second, size)) => {
                let c = b.slot(p, second, pick(rng));
                stack.push((c, size));
            }
            None => break,
        }
    }
    b.build()
}

/// Random ordered unranked tree on `n` nodes: each node picks a parent
/// uniformly among the earlier ones (a random recursive tree).
pub fn random_unranked<R: Rng>(rng: &mut R, n: usize, labels: &[&str]) -> LabeledTree {
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 1..n {
        let p = rng.gen_range(0..v);
        kids[p].push(v);
    }
    let lab: Vec<&str> = (0..n).map(|_| labels[rng.gen_range(0..labels.len())]).collect();
    from_children(&kids, &lab)
}

/// Builds an unranked tree rooted at 0 from child lists, renumbering nodes
/// into preorder.
pub fn from_children(kids: &[Vec<usize>], labels: &[&str]) -> LabeledTree {
    let mut b = TreeBuilder::new(ArityMode::Unranked);
    let r = b.root(labels[0]);
    let mut stack: Vec<(usize, NodeId)> = kids[0].iter().rev().map(|&c| (c, r)).collect();
    while let Some((v, p)) = stack.pop() {
        let id = b.child(p, labels[v]);
        stack.extend(kids[v].iter().rev().map(|&c| (c, id)));
    }
    b.build()
}

/// Binary shapes with exactly `n` nodes as terms over the label `a`.
/// With `full`, only 0/2-ary shapes are produced.
pub fn binary_shapes(n: usize, full: bool) -> Vec<String> {
    // memo[0] holds the empty tree.
    let mut memo: Vec<Vec<String>> = vec![vec![String::new()]];
    for k in 1..=n {
        let mut out = Vec::new();
        for l in 0..k {
            let r = k - 1 - l;
            if full && (l == 0) != (r == 0) {
                continue;
            }
            for ls in &memo[l] {
                for rs in &memo[r] {
                    out.push(match (l, r) {
                        (0, 0) => "(a)".to_string(),
                        (_, 0) => format!("(a {ls})"),
                        (0, _) => format!("(a - {rs})"),
                        _ => format!("(a {ls} {rs})"),
                    });
                }
            }
        }
        memo.push(out);
    }
    memo.swap_remove(n)
}

/// Ordered unranked shapes with exactly `n` nodes.
pub fn unranked_shapes(n: usize) -> Vec<String> {
    // forests[k]: concatenations of trees with k nodes in total.
    let mut trees: Vec<Vec<String>> = vec![Vec::new()];
    let mut forests: Vec<Vec<String>> = vec![vec![String::new()]];
    for k in 1..=n {
        let t: Vec<String> = forests[k - 1]
            .iter()
            .map(|f| if f.is_empty() { "(a)".to_string() } else { format!("(a {f})") })
            .collect();
        trees.push(t);
        let mut f = Vec::new();
        for first in 1..=k {
            for a in &trees[first] {
                for rest in &forests[k - first] {
                    f.push(if rest.is_empty() { a.clone() } else { format!("{a} {rest}") });
                }
            }
        }
        forests.push(f);
    }
    trees.swap_remove(n)
}

/// Parses a shape and relabels node `i` with `labels[i]`.
pub fn labeled(shape: &str, mode: ArityMode, labels: &[&str]) -> LabeledTree {
    let mut t = LabeledTree::parse(shape, mode).expect("generated shape parses");
    let syms: Vec<_> = labels.iter().map(|l| t.alphabet_mut().intern(l)).collect();
    for (i, s) in syms.into_iter().enumerate() {
        t.set_label(NodeId(i as u32), s);
    }
    t
}

/// Spine-and-fan fixture. A path of `m` nodes leads to a node `w` whose two
/// children `v` and `v'` each fan out to `ell + 1` leaves: first through a
/// balanced binary fan, then through paths of length `m`. The leaves below
/// `v` are positive, those below `v'` negative.
///
/// Returns the tree, the training set, and `v`.
pub fn spine_fan_tree(m: usize, ell: usize) -> (LabeledTree, TrainingSet, NodeId) {
    assert!(m >= 1);
    let mut b = TreeBuilder::new(ArityMode::Binary);
    let mut u = b.root("a");
    for _ in 1..m {
        u = b.slot(u, false, "a");
    }
    let mut examples = Vec::new();
    let mut v = NodeId(0);
    for (side, pol) in [(false, Polarity::Pos), (true, Polarity::Neg)] {
        let top = b.slot(u, side, "a");
        if !side {
            v = top;
        }
        fan(&mut b, top, ell + 1, m, pol, &mut examples);
    }
    let t = b.build();
    let n = t.len();
    (t, TrainingSet::new(examples, n).expect("fixture is consistent"), v)
}

fn fan(
    b: &mut TreeBuilder,
    top: NodeId,
    k: usize,
    m: usize,
    pol: Polarity,
    examples: &mut Vec<(NodeId, Polarity)>,
) {
    // The right child of a fan node is created only after its whole left
    // subtree, keeping ids in preorder.
    enum Step {
        Fan(NodeId, usize),
        Right(NodeId, usize),
    }
    let mut stack = vec![Step::Fan(top, k)];
    while let Some(s) = stack.pop() {
        match s {
            Step::Fan(x, 1) => {
                let mut y = x;
                for _ in 0..m {
                    y = b.slot(y, false, "a");
                }
                examples.push((y, pol));
            }
            Step::Fan(x, k) => {
                let l = k.div_ceil(2);
                let left = b.slot(x, false, "a");
                stack.push(Step::Right(x, k - l));
                stack.push(Step::Fan(left, l));
            }
            Step::Right(x, k) => {
                let right = b.slot(x, true, "a");
                stack.push(Step::Fan(right, k));
            }
        }
    }
}
