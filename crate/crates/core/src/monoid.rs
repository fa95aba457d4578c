//! Transition monoid of the path automaton and its powerset monoid.
//!
//! Elements are interned lazily: only products that are actually needed are
//! ever computed. Each element carries a parameter set, fixed by its first
//! derivation; later derivations of productive elements are checked against
//! it and a mismatch is recorded as a [`Error::ParamConsistency`].

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::automata::{Mark, PathAutomaton, PathLetter, Side, State, TreeAutomaton};
use crate::error::{Error, Result};

/// Element of the transition monoid `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElemId(pub u32);

/// Element of the powerset monoid `M̂`: a set of `ElemId`s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SetId(pub u32);

/// A monoid with interned elements, as needed by factorization trees.
pub trait Monoid {
    type Elem: Copy + Eq + std::hash::Hash + Ord + std::fmt::Debug;
    fn one(&self) -> Self::Elem;
    fn mul(&mut self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
}

/// Parameters contained in any subtree evaluating to a tree-automaton state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum StateParams {
    Unrealizable,
    Unique(u32),
    Ambiguous,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Elem {
    table: Box<[State]>,
    params: u32,
    productive: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransitionMonoid {
    dta: TreeAutomaton,
    elems: Vec<Elem>,
    state_params: Vec<StateParams>,
    /// Path-automaton states reachable from `q0` through realizable letters.
    reach: Vec<bool>,
    /// Path-automaton states from which a final state is reachable.
    coreach: Vec<bool>,
    #[serde(skip)]
    index: HashMap<Box<[State]>, ElemId>,
    #[serde(skip)]
    products: HashMap<(ElemId, ElemId), ElemId>,
    #[serde(skip)]
    generators: HashMap<(u32, State, Side), ElemId>,
    violation: Option<u32>,
}

impl TransitionMonoid {
    pub fn new(dta: TreeAutomaton) -> Self {
        let state_params = state_params(&dta);
        let pa = PathAutomaton::new(&dta);
        let nq = pa.num_states() as usize;
        let cuts = realizable_cuts(&state_params);
        // successor lists of the path automaton under realizable letters
        let mut succ: Vec<Vec<State>> = vec![Vec::new(); nq];
        for (p, out) in succ.iter_mut().enumerate() {
            let mut seen = vec![false; nq];
            for a in 0..dta.num_letters() {
                for &c in &cuts {
                    for side in [Side::L, Side::R] {
                        let q = pa.step(p as State, PathLetter { letter: a, cut: c, side });
                        if !seen[q as usize] {
                            seen[q as usize] = true;
                            out.push(q);
                        }
                    }
                }
            }
        }
        let mut reach = vec![false; nq];
        let mut queue = VecDeque::from([0usize]);
        reach[0] = true;
        while let Some(p) = queue.pop_front() {
            for &q in &succ[p] {
                if !reach[q as usize] {
                    reach[q as usize] = true;
                    queue.push_back(q as usize);
                }
            }
        }
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); nq];
        for (p, out) in succ.iter().enumerate() {
            for &q in out {
                pred[q as usize].push(p);
            }
        }
        let mut coreach: Vec<bool> = (0..nq).map(|p| pa.is_final(p as State)).collect();
        let mut queue: VecDeque<usize> = (0..nq).filter(|&p| coreach[p]).collect();
        while let Some(q) = queue.pop_front() {
            for &p in &pred[q] {
                if !coreach[p] {
                    coreach[p] = true;
                    queue.push_back(p);
                }
            }
        }
        let mut m = TransitionMonoid {
            dta,
            elems: Vec::new(),
            state_params,
            reach,
            coreach,
            index: HashMap::new(),
            products: HashMap::new(),
            generators: HashMap::new(),
            violation: None,
        };
        let id: Box<[State]> = (0..nq as State).collect();
        m.intern(id, 0);
        m
    }

    /// Rebuilds the lookup tables skipped by serialization.
    pub fn rehydrate(&mut self) {
        self.index = self.elems.iter().enumerate().map(|(i, e)| (e.table.clone(), ElemId(i as u32))).collect();
    }

    pub fn dta(&self) -> &TreeAutomaton {
        &self.dta
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn one(&self) -> ElemId {
        ElemId(0)
    }

    pub fn table(&self, m: ElemId) -> &[State] {
        &self.elems[m.0 as usize].table
    }

    /// `f(m)`: the state reached from `q0`.
    pub fn f(&self, m: ElemId) -> State {
        self.elems[m.0 as usize].table[0]
    }

    pub fn is_final(&self, m: ElemId) -> bool {
        let q = self.f(m);
        q > 0 && self.dta.is_final(q - 1)
    }

    pub fn productive(&self, m: ElemId) -> bool {
        self.elems[m.0 as usize].productive
    }

    /// `p(m)` as a bitmask over `y_1..y_ℓ`.
    pub fn params(&self, m: ElemId) -> u32 {
        self.elems[m.0 as usize].params
    }

    /// Parameters inside any realizable subtree evaluating to path state
    /// `c` (`q0` meaning no subtree).
    pub fn cut_params(&self, c: State) -> u32 {
        match c.checked_sub(1).map(|q| self.state_params[q as usize]) {
            Some(StateParams::Unique(p)) => p,
            _ => 0,
        }
    }

    /// Fails if some derivation contradicted the parameter function.
    pub fn check(&self) -> Result<()> {
        match self.violation {
            Some(e) => Err(Error::ParamConsistency(e)),
            None => Ok(()),
        }
    }

    fn intern(&mut self, table: Box<[State]>, params: u32) -> ElemId {
        if let Some(&id) = self.index.get(&table) {
            let e = &self.elems[id.0 as usize];
            if e.productive && e.params != params && self.violation.is_none() {
                self.violation = Some(id.0);
            }
            return id;
        }
        let productive = table.iter().enumerate().any(|(s, &t)| self.reach[s] && self.coreach[t as usize]);
        let id = ElemId(self.elems.len() as u32);
        self.index.insert(table.clone(), id);
        self.elems.push(Elem { table, params: if productive { params } else { 0 }, productive });
        id
    }

    /// `h((a, c, d))` for a `Σ₁` letter `a`.
    pub fn generator(&mut self, a: u32, c: State, side: Side) -> ElemId {
        if let Some(&g) = self.generators.get(&(a, c, side)) {
            return g;
        }
        let pa = PathAutomaton::new(&self.dta);
        let l = PathLetter { letter: a, cut: c, side };
        let table: Box<[State]> = (0..pa.num_states()).map(|p| pa.step(p, l)).collect();
        let params = self.dta.sigma.decode(a).2 | self.cut_params(c);
        let g = self.intern(table, params);
        self.generators.insert((a, c, side), g);
        g
    }

    /// `h'((a, m, d))`: the generator for the state `f(m)` the cut-off
    /// element produces.
    pub fn h_prime(&mut self, a: u32, m: ElemId, side: Side) -> ElemId {
        let c = self.f(m);
        self.generator(a, c, side)
    }

    pub fn mul(&mut self, a: ElemId, b: ElemId) -> ElemId {
        if a.0 == 0 {
            return b;
        }
        if b.0 == 0 {
            return a;
        }
        if let Some(&c) = self.products.get(&(a, b)) {
            return c;
        }
        let (ta, tb) = (self.table(a), self.table(b));
        let table: Box<[State]> = ta.iter().map(|&q| tb[q as usize]).collect();
        let (pa, pb) = (self.params(a), self.params(b));
        let c = self.intern(table, pa | pb);
        if self.productive(c) && pa & pb != 0 && self.violation.is_none() {
            self.violation = Some(c.0);
        }
        self.products.insert((a, b), c);
        c
    }

    /// `q0` and every state some subtree evaluates to.
    pub fn realizable_cuts(&self) -> Vec<State> {
        realizable_cuts(&self.state_params)
    }

    /// All elements generated by realizable letters, or an error past `cap`.
    pub fn closure(&mut self, cap: usize) -> Result<Vec<ElemId>> {
        let mut gens = Vec::new();
        for a in 0..self.dta.num_letters() {
            for c in self.realizable_cuts() {
                for side in [Side::L, Side::R] {
                    gens.push(self.generator(a, c, side));
                }
            }
        }
        gens.sort();
        gens.dedup();
        let mut seen: HashSet<ElemId> = HashSet::new();
        let mut out = vec![self.one()];
        seen.insert(self.one());
        let mut i = 0;
        while i < out.len() {
            let m = out[i];
            i += 1;
            for &g in &gens {
                let p = self.mul(m, g);
                if seen.insert(p) {
                    if out.len() >= cap {
                        return Err(Error::MonoidCap(cap));
                    }
                    out.push(p);
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

fn realizable_cuts(sp: &[StateParams]) -> Vec<State> {
    std::iter::once(0)
        .chain((0..sp.len() as State).filter(|&q| sp[q as usize] != StateParams::Unrealizable).map(|q| q + 1))
        .collect()
}

/// Pairs (state, parameters) over all realizable subtrees, reduced to one
/// parameter set per state where that is unambiguous.
fn state_params(dta: &TreeAutomaton) -> Vec<StateParams> {
    let mut pairs: Vec<(State, u32)> = Vec::new();
    let mut seen: HashMap<(State, u32), ()> = HashMap::new();
    let ybits = |a: u32| dta.sigma.decode(a).2;
    let add = |p: (State, u32), pairs: &mut Vec<(State, u32)>, seen: &mut HashMap<(State, u32), ()>| {
        if seen.insert(p, ()).is_none() {
            pairs.push(p);
        }
    };
    for a in 0..dta.num_letters() {
        add((dta.delta0(a), ybits(a)), &mut pairs, &mut seen);
    }
    let mut i = 0;
    while i < pairs.len() {
        let (qi, pi) = pairs[i];
        for j in 0..=i {
            let (qj, pj) = pairs[j];
            for a in 0..dta.num_letters() {
                let y = ybits(a);
                let mut out = vec![
                    (dta.delta(a, Some(qi), Some(qj)), y | pi | pj),
                    (dta.delta(a, Some(qj), Some(qi)), y | pi | pj),
                ];
                if j == i {
                    out.push((dta.delta(a, Some(qi), None), y | pi));
                    out.push((dta.delta(a, None, Some(qi)), y | pi));
                }
                for p in out {
                    add(p, &mut pairs, &mut seen);
                }
            }
        }
        i += 1;
    }
    let mut out = vec![StateParams::Unrealizable; dta.num_states() as usize];
    for (q, p) in pairs {
        let slot = &mut out[q as usize];
        *slot = match *slot {
            StateParams::Unrealizable => StateParams::Unique(p),
            StateParams::Unique(x) if x == p => StateParams::Unique(x),
            _ => StateParams::Ambiguous,
        };
    }
    out
}

/// `M̂` together with the underlying `M`, and the morphism `ĥ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerMonoid {
    pub m: TransitionMonoid,
    sets: Vec<Box<[ElemId]>>,
    #[serde(skip)]
    index: HashMap<Box<[ElemId]>, SetId>,
    #[serde(skip)]
    products: HashMap<(SetId, SetId), SetId>,
    #[serde(skip)]
    hats: HashMap<(u32, Mark, SetId, Side), SetId>,
}

impl PowerMonoid {
    pub fn new(dta: TreeAutomaton) -> Self {
        let m = TransitionMonoid::new(dta);
        let mut pm = PowerMonoid { m, sets: Vec::new(), index: HashMap::new(), products: HashMap::new(), hats: HashMap::new() };
        let one = pm.m.one();
        pm.intern(vec![one]);
        pm
    }

    pub fn rehydrate(&mut self) {
        self.m.rehydrate();
        self.index = self.sets.iter().enumerate().map(|(i, s)| (s.clone(), SetId(i as u32))).collect();
    }

    pub fn intern(&mut self, mut elems: Vec<ElemId>) -> SetId {
        elems.sort_unstable();
        elems.dedup();
        let key: Box<[ElemId]> = elems.into();
        if let Some(&s) = self.index.get(&key) {
            return s;
        }
        let s = SetId(self.sets.len() as u32);
        self.index.insert(key.clone(), s);
        self.sets.push(key);
        s
    }

    pub fn elems(&self, s: SetId) -> &[ElemId] {
        &self.sets[s.0 as usize]
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Acceptance in `M̂`: the set meets `F`.
    pub fn accepts(&self, s: SetId) -> bool {
        self.elems(s).iter().any(|&m| self.m.is_final(m))
    }

    /// `ĥ((a, mark, m̂, d))` for base symbol index `sym`.
    pub fn hat(&mut self, sym: u32, mark: Mark, cut: SetId, side: Side) -> SetId {
        if let Some(&s) = self.hats.get(&(sym, mark, cut, side)) {
            return s;
        }
        let ell = self.m.dta.sigma.ell;
        let cuts = self.elems(cut).to_vec();
        let mut out = Vec::new();
        for ybits in 0..1u32 << ell {
            let a = self.m.dta.sigma.letter(sym, mark, ybits);
            for &c in &cuts {
                out.push(self.m.h_prime(a, c, side));
            }
        }
        let s = self.intern(out);
        self.hats.insert((sym, mark, cut, side), s);
        s
    }

    /// Number of distinct parameter subsets and cut-off elements in `ĥ` of a
    /// letter, i.e. the worst-case leaf search of tracing.
    pub fn hat_fanout(&self, cut: SetId) -> usize {
        self.elems(cut).len() << self.m.dta.sigma.ell
    }
}

impl Monoid for PowerMonoid {
    type Elem = SetId;

    fn one(&self) -> SetId {
        SetId(0)
    }

    fn mul(&mut self, a: SetId, b: SetId) -> SetId {
        if a.0 == 0 {
            return b;
        }
        if b.0 == 0 {
            return a;
        }
        if let Some(&c) = self.products.get(&(a, b)) {
            return c;
        }
        let (xs, ys) = (self.elems(a).to_vec(), self.elems(b).to_vec());
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                out.push(self.m.mul(x, y));
            }
        }
        let c = self.intern(out);
        self.products.insert((a, b), c);
        c
    }
}

impl Monoid for TransitionMonoid {
    type Elem = ElemId;

    fn one(&self) -> ElemId {
        ElemId(0)
    }

    fn mul(&mut self, a: ElemId, b: ElemId) -> ElemId {
        TransitionMonoid::mul(self, a, b)
    }
}
