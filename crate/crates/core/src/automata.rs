//! Deterministic bottom-up tree automata over the `E1`/`E2` structure and
//! their simulation by a string automaton reading decorated heavy paths.
//!
//! A transition is `δ(a, left, right)` where a missing child is `⊥`. Leaves
//! use `δ(a, ⊥, ⊥)`; unary nodes use the slot of their only child.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavy_path::HeavyPathDecomposition;
use crate::tree::{LabeledTree, NodeId, Polarity, TrainingSet};

pub type State = u32;

/// Example mark of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    Unknown = 0,
    Neg = 1,
    Pos = 2,
}

impl Mark {
    pub const ALL: [Mark; 3] = [Mark::Unknown, Mark::Neg, Mark::Pos];

    pub fn from_index(i: u32) -> Mark {
        Mark::ALL[i as usize]
    }
}

impl From<Polarity> for Mark {
    fn from(p: Polarity) -> Mark {
        match p {
            Polarity::Pos => Mark::Pos,
            Polarity::Neg => Mark::Neg,
        }
    }
}

/// The letter space `Σ × {?, N, P} × 2^{y_1..y_ℓ}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sigma1 {
    pub symbols: Vec<String>,
    pub ell: u32,
}

impl Sigma1 {
    pub fn new(symbols: Vec<String>, ell: u32) -> Sigma1 {
        assert!(ell < 16, "too many parameters");
        Sigma1 { symbols, ell }
    }

    pub fn num_letters(&self) -> u32 {
        self.symbols.len() as u32 * self.per_symbol()
    }

    fn per_symbol(&self) -> u32 {
        3 << self.ell
    }

    #[inline]
    pub fn letter(&self, sym: u32, mark: Mark, ybits: u32) -> u32 {
        sym * self.per_symbol() + ((mark as u32) << self.ell) + ybits
    }

    #[inline]
    pub fn decode(&self, letter: u32) -> (u32, Mark, u32) {
        let per = self.per_symbol();
        let rest = letter % per;
        (letter / per, Mark::from_index(rest >> self.ell), rest & ((1 << self.ell) - 1))
    }

    pub fn symbol_index(&self, name: &str) -> Option<u32> {
        self.symbols.iter().position(|s| s == name).map(|i| i as u32)
    }

    /// Maps every tree symbol to its index here.
    pub fn map_tree(&self, tree: &LabeledTree) -> Result<Vec<u32>> {
        tree.alphabet()
            .names()
            .iter()
            .map(|n| self.symbol_index(n).ok_or_else(|| Error::UnknownSymbol(n.clone())))
            .collect()
    }

    /// The `Σ₁` letter of every node, given example marks and parameter
    /// positions `params[i]` for `y_{i+1}`.
    pub fn decorate(&self, tree: &LabeledTree, s: &TrainingSet, params: &[NodeId]) -> Result<Vec<u32>> {
        assert_eq!(params.len(), self.ell as usize);
        let map = self.map_tree(tree)?;
        let mut marks = vec![Mark::Unknown; tree.len()];
        for e in s.examples() {
            marks[e.node.index()] = e.polarity.into();
        }
        let mut bits = vec![0u32; tree.len()];
        for (i, v) in params.iter().enumerate() {
            tree.check(*v)?;
            bits[v.index()] |= 1 << i;
        }
        Ok(tree
            .nodes()
            .map(|u| self.letter(map[tree.label(u).0 as usize], marks[u.index()], bits[u.index()]))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeAutomaton {
    pub sigma: Sigma1,
    num_states: u32,
    /// Indexed by `(letter, left + 1 or 0, right + 1 or 0)`.
    delta: Vec<State>,
    final_states: Vec<bool>,
}

impl TreeAutomaton {
    /// `delta(letter, left, right)` with `None` for a missing child.
    pub fn from_fn<F>(sigma: Sigma1, num_states: u32, final_states: Vec<bool>, mut delta: F) -> Self
    where
        F: FnMut(u32, Option<State>, Option<State>) -> State,
    {
        assert_eq!(final_states.len(), num_states as usize);
        let w = num_states as usize + 1;
        let mut table = Vec::with_capacity(sigma.num_letters() as usize * w * w);
        let opt = |x: usize| (x > 0).then(|| x as u32 - 1);
        for a in 0..sigma.num_letters() {
            for l in 0..w {
                for r in 0..w {
                    let q = delta(a, opt(l), opt(r));
                    assert!(q < num_states);
                    table.push(q);
                }
            }
        }
        TreeAutomaton { sigma, num_states, delta: table, final_states }
    }

    /// Uniformly random transitions and final states.
    pub fn random<R: Rng>(rng: &mut R, sigma: Sigma1, num_states: u32) -> Self {
        let fin = (0..num_states).map(|_| rng.gen_bool(0.5)).collect();
        Self::from_fn(sigma, num_states, fin, |_, _, _| rng.gen_range(0..num_states))
    }

    pub fn num_states(&self) -> u32 {
        self.num_states
    }

    pub fn num_letters(&self) -> u32 {
        self.sigma.num_letters()
    }

    pub fn is_final(&self, q: State) -> bool {
        self.final_states[q as usize]
    }

    #[inline]
    pub fn delta(&self, letter: u32, l: Option<State>, r: Option<State>) -> State {
        let w = self.num_states as usize + 1;
        let l = l.map_or(0, |q| q as usize + 1);
        let r = r.map_or(0, |q| q as usize + 1);
        self.delta[(letter as usize * w + l) * w + r]
    }

    pub fn delta0(&self, letter: u32) -> State {
        self.delta(letter, None, None)
    }

    pub fn delta2(&self, letter: u32, l: State, r: State) -> State {
        self.delta(letter, Some(l), Some(r))
    }

    /// Bottom-up run on the `E1`/`E2` structure. Children always carry
    /// larger preorder ids, so a reverse scan suffices.
    pub fn run(&self, tree: &LabeledTree, letters: &[u32]) -> Result<Run> {
        let mut rho = vec![0; tree.len()];
        for u in tree.nodes().rev() {
            let a = letters[u.index()];
            if a >= self.num_letters() {
                return Err(Error::LetterOutsideAlphabet(a));
            }
            let l = tree.e1(u).map(|c| rho[c.index()]);
            let r = tree.e2(u).map(|c| rho[c.index()]);
            rho[u.index()] = self.delta(a, l, r);
        }
        Ok(Run { rho })
    }

    pub fn accepts(&self, tree: &LabeledTree, letters: &[u32]) -> Result<bool> {
        Ok(self.is_final(self.run(tree, letters)?.at(tree.root())))
    }

    /// Text form: a header, the final states, then one `delta` row per
    /// table entry with `-` for a missing child.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dta 1\nsymbols {}\nell {}\nstates {}\nfinal",
            self.sigma.symbols.join(" "),
            self.sigma.ell,
            self.num_states
        );
        for q in 0..self.num_states {
            if self.is_final(q) {
                out.push_str(&format!(" {q}"));
            }
        }
        out.push('\n');
        let show = |x: Option<State>| x.map_or("-".to_string(), |q| q.to_string());
        let states = || std::iter::once(None).chain((0..self.num_states).map(Some));
        for a in 0..self.num_letters() {
            for l in states() {
                for r in states() {
                    out.push_str(&format!("delta {a} {} {} {}\n", show(l), show(r), self.delta(a, l, r)));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TreeAutomaton> {
        let mut symbols = None;
        let mut ell = None;
        let mut states = None;
        let mut fin = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |m: &str| Error::Syntax { offset: i + 1, msg: format!("automaton line: {m}") };
            let mut it = line.split_whitespace();
            let num = |t: Option<&str>| t.and_then(|t| t.parse::<u32>().ok()).ok_or_else(|| err("number expected"));
            let slot = |t: Option<&str>| match t {
                Some("-") => Ok(None),
                t => num(t).map(Some),
            };
            match it.next() {
                None => {}
                Some("dta") => {}
                Some("symbols") => symbols = Some(it.map(str::to_owned).collect::<Vec<_>>()),
                Some("ell") => ell = Some(num(it.next())?),
                Some("states") => states = Some(num(it.next())?),
                Some("final") => fin = it.map(|t| num(Some(t))).collect::<Result<_>>()?,
                Some("delta") => {
                    let a = num(it.next())?;
                    let l = slot(it.next())?;
                    let r = slot(it.next())?;
                    rows.push((a, l, r, num(it.next())?));
                }
                Some(_) => return Err(err("unknown directive")),
            }
        }
        let missing = |m: &str| Error::Syntax { offset: 0, msg: format!("automaton: missing {m}") };
        let sigma = Sigma1::new(symbols.ok_or_else(|| missing("symbols"))?, ell.ok_or_else(|| missing("ell"))?);
        let n = states.ok_or_else(|| missing("states"))?;
        let mut final_states = vec![false; n as usize];
        for q in fin {
            *final_states.get_mut(q as usize).ok_or_else(|| missing("valid final state"))? = true;
        }
        let w = n as usize + 1;
        let mut table = vec![u32::MAX; sigma.num_letters() as usize * w * w];
        for (a, l, r, q) in rows {
            let idx = (a as usize * w + l.map_or(0, |x| x as usize + 1)) * w + r.map_or(0, |x| x as usize + 1);
            if q >= n || idx >= table.len() {
                return Err(missing("in-range delta row"));
            }
            table[idx] = q;
        }
        if table.contains(&u32::MAX) {
            return Err(missing("delta rows"));
        }
        Ok(TreeAutomaton { sigma, num_states: n, delta: table, final_states })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub rho: Vec<State>,
}

impl Run {
    pub fn at(&self, u: NodeId) -> State {
        self.rho[u.index()]
    }
}

/// Side of the cut-off child relative to the heavy child.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L = 0,
    R = 1,
}

/// A `Σ₂` letter `(a, q, d)`; `cut` is a path-automaton state, `0` being `q0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PathLetter {
    pub letter: u32,
    pub cut: State,
    pub side: Side,
}

/// The string automaton over decorated heavy paths. Its states are `q0 = 0`
/// followed by the tree automaton states shifted by one.
#[derive(Clone, Debug)]
pub struct PathAutomaton<'a> {
    pub dta: &'a TreeAutomaton,
}

impl<'a> PathAutomaton<'a> {
    pub fn new(dta: &'a TreeAutomaton) -> Self {
        PathAutomaton { dta }
    }

    pub fn num_states(&self) -> u32 {
        self.dta.num_states() + 1
    }

    pub fn is_final(&self, p: State) -> bool {
        p > 0 && self.dta.is_final(p - 1)
    }

    /// `δ'(p, (a, c, d))`: `p` is the state of the heavy child, `c` that of
    /// the cut-off child on side `d`.
    #[inline]
    pub fn step(&self, p: State, l: PathLetter) -> State {
        let heavy = p.checked_sub(1);
        let cut = l.cut.checked_sub(1);
        1 + match l.side {
            Side::L => self.dta.delta(l.letter, cut, heavy),
            Side::R => self.dta.delta(l.letter, heavy, cut),
        }
    }

    pub fn read(&self, p: State, word: &[PathLetter]) -> State {
        word.iter().fold(p, |p, &l| self.step(p, l))
    }
}

/// `f_ρ(u)`: the node's letter together with the run state at its cut-off
/// child. A node whose only child is heavy gets `q0` with `d` on the side
/// opposite that child, so that `δ'` places the heavy state correctly.
pub fn extended_label(
    tree: &LabeledTree,
    dec: &HeavyPathDecomposition,
    letters: &[u32],
    cut_state: impl Fn(NodeId) -> State,
    u: NodeId,
) -> PathLetter {
    let letter = letters[u.index()];
    match (dec.heavy_child(tree, u), dec.cutoff_child(tree, u)) {
        (None, _) => PathLetter { letter, cut: 0, side: Side::L },
        (Some(h), None) => {
            let side = if tree.e1(u) == Some(h) { Side::R } else { Side::L };
            PathLetter { letter, cut: 0, side }
        }
        (Some(_), Some(c)) => {
            let side = if tree.e1(u) == Some(c) { Side::L } else { Side::R };
            PathLetter { letter, cut: cut_state(c), side }
        }
    }
}

/// Recomputes the run path by path in dependency order, reading each path
/// from its leaf upwards.
pub fn simulate_on_paths(
    dta: &TreeAutomaton,
    tree: &LabeledTree,
    dec: &HeavyPathDecomposition,
    letters: &[u32],
) -> Result<Run> {
    let pa = PathAutomaton::new(dta);
    // path-automaton state per node; 0 until computed
    let mut st = vec![0u32; tree.len()];
    for &p in dec.topo_order() {
        let mut q = 0;
        for &u in dec.path(p).iter().rev() {
            if letters[u.index()] >= dta.num_letters() {
                return Err(Error::LetterOutsideAlphabet(letters[u.index()]));
            }
            let l = extended_label(tree, dec, letters, |c| st[c.index()], u);
            q = pa.step(q, l);
            st[u.index()] = q;
        }
    }
    Ok(Run { rho: st.into_iter().map(|q| q - 1).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::tree::{parse_tree, ArityMode};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parity(symbols: &[&str]) -> TreeAutomaton {
        let sigma = Sigma1::new(symbols.iter().map(|s| s.to_string()).collect(), 0);
        let b = sigma.symbol_index("b").unwrap();
        let s2 = sigma.clone();
        TreeAutomaton::from_fn(sigma, 2, vec![false, true], move |a, l, r| {
            let own = (s2.decode(a).0 == b) as u32;
            own ^ l.unwrap_or(0) ^ r.unwrap_or(0)
        })
    }

    fn plain(t: &LabeledTree, a: &TreeAutomaton) -> Vec<u32> {
        a.sigma.decorate(t, &TrainingSet::default(), &[]).unwrap()
    }

    #[test]
    fn single_node_run() {
        let t = parse_tree("(a)", ArityMode::Binary).unwrap();
        let sigma = Sigma1::new(vec!["a".into()], 0);
        let a = TreeAutomaton::from_fn(sigma, 2, vec![false, true], |_, l, r| {
            if l.is_none() && r.is_none() {
                1
            } else {
                0
            }
        });
        let run = a.run(&t, &plain(&t, &a)).unwrap();
        assert_eq!(run.at(NodeId(0)), 1);
        let d = HeavyPathDecomposition::new(&t);
        assert_eq!(simulate_on_paths(&a, &t, &d, &plain(&t, &a)).unwrap(), run);
    }

    #[test]
    fn parity_by_hand() {
        let a = parity(&["a", "b"]);
        let t = parse_tree("(a (b) (a))", ArityMode::Binary).unwrap();
        let run = a.run(&t, &plain(&t, &a)).unwrap();
        assert_eq!(run.rho, vec![1, 1, 0]);
        assert!(a.accepts(&t, &plain(&t, &a)).unwrap());
    }

    #[test]
    fn marked_node_detection_on_fig1() {
        let t = parse_tree(
            "(a (a (a) (a (a (a) (a)) (a (a) (a) (a))) (a (a))) (a (a) (a (a))))",
            ArityMode::Unranked,
        )
        .unwrap();
        let sigma = Sigma1::new(vec!["a".into()], 0);
        let s2 = sigma.clone();
        let some_p = TreeAutomaton::from_fn(sigma, 2, vec![false, true], move |x, l, r| {
            let here = s2.decode(x).1 == Mark::Pos;
            (here || l == Some(1) || r == Some(1)) as u32
        });
        let s = TrainingSet::parse("13 -\n2 +\n15 -\n7 -\n5 +\n8 +\n", t.len()).unwrap();
        let letters = some_p.sigma.decorate(&t, &s, &[]).unwrap();
        assert!(some_p.accepts(&t, &letters).unwrap());
        assert!(!some_p.accepts(&t, &plain(&t, &some_p)).unwrap());
    }

    #[test]
    fn path_letter_shape() {
        // b at the root, heavy left subtree, right cut-off leaf
        let t = parse_tree("(b (a (a) (a)) (a))", ArityMode::Binary).unwrap();
        let a = parity(&["a", "b"]);
        let d = HeavyPathDecomposition::new(&t);
        let letters = plain(&t, &a);
        let run = a.run(&t, &letters).unwrap();
        let l = extended_label(&t, &d, &letters, |c| run.at(c) + 1, NodeId(0));
        assert_eq!(l.side, Side::R);
        assert_eq!(l.cut, run.at(NodeId(4)) + 1);
        let leaf = extended_label(&t, &d, &letters, |c| run.at(c) + 1, NodeId(4));
        assert_eq!((leaf.cut, leaf.side), (0, Side::L));
        let u = parse_tree("(a (a) -)", ArityMode::Binary).unwrap();
        let du = HeavyPathDecomposition::new(&u);
        let lu = extended_label(&u, &du, &plain(&u, &a), |_| unreachable!(), NodeId(0));
        assert_eq!((lu.cut, lu.side), (0, Side::R));
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = TreeAutomaton::random(&mut rng, Sigma1::new(vec!["a".into(), "b".into()], 1), 3);
        assert_eq!(TreeAutomaton::from_text(&a.to_text()).unwrap(), a);
        assert!(TreeAutomaton::from_text("dta 1\nsymbols a\nell 0\nstates 1\nfinal 0\n").is_err());
    }

    #[test]
    fn letter_outside_alphabet() {
        let a = parity(&["a", "b"]);
        let t = parse_tree("(a)", ArityMode::Binary).unwrap();
        assert!(matches!(a.run(&t, &[99]), Err(Error::LetterOutsideAlphabet(99))));
        let c = parse_tree("(c)", ArityMode::Binary).unwrap();
        assert!(matches!(a.sigma.decorate(&c, &TrainingSet::default(), &[]), Err(Error::UnknownSymbol(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn paths_simulate_the_run(seed in any::<u64>(), n in 1usize..300, states in 1u32..6, shape in 0u8..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = match shape {
                0 => gen::random_binary(&mut rng, n, &["a", "b"]),
                1 => gen::random_full_binary(&mut rng, n | 1, &["a", "b"]),
                _ => gen::random_unranked(&mut rng, n, &["a", "b"]),
            };
            let a = TreeAutomaton::random(&mut rng, Sigma1::new(vec!["a".into(), "b".into()], 0), states);
            let letters = plain(&t, &a);
            let d = HeavyPathDecomposition::new(&t);
            let run = a.run(&t, &letters).unwrap();
            prop_assert_eq!(simulate_on_paths(&a, &t, &d, &letters).unwrap(), run);
        }
    }
}
