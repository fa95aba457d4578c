//! Formula to tree automaton compilation.
//!
//! Every subformula becomes a deterministic, complete bottom-up automaton
//! over letters `symbol × {0,1}^k`, one bit track per free variable.
//! First-order variables are only meaningful on singleton tracks; the
//! singleton condition is conjoined whenever such a variable is projected
//! away, and for every parameter at the top level.

use std::collections::HashMap;
use std::hash::Hash;

use crate::automata::{Mark, Sigma1, TreeAutomaton};
use crate::error::{Error, Result};
use crate::tree::{ArityMode, LabeledTree};

use super::eval::{Assignment, Value};
use super::formula::{make_psi, Formula, MarkSet, ParamFormula, Rel, N_SET, P_SET};

/// Upper bound on dense transition table entries.
const TABLE_CAP: usize = 1 << 26;

#[derive(Clone, Debug)]
pub struct CompileOptions {
    pub mode: ArityMode,
    pub state_cap: usize,
    pub allow_set_quantifiers: bool,
    pub minimize: bool,
    pub max_rank: Option<usize>,
}

impl CompileOptions {
    pub fn new(mode: ArityMode) -> Self {
        CompileOptions { mode, state_cap: 1_000_000, allow_set_quantifiers: false, minimize: true, max_rank: None }
    }
}

/// Deterministic bottom-up automaton with one bit track per variable.
#[derive(Clone, Debug)]
pub struct TrackAutomaton {
    vars: Vec<String>,
    nsym: u32,
    n: u32,
    delta: Vec<u32>,
    fin: Vec<bool>,
}

impl TrackAutomaton {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn num_states(&self) -> u32 {
        self.n
    }

    fn num_letters(&self) -> u32 {
        self.nsym << self.vars.len()
    }

    #[inline]
    fn delta(&self, a: u32, l: Option<u32>, r: Option<u32>) -> u32 {
        let w = self.n as usize + 1;
        self.delta[(a as usize * w + l.map_or(0, |q| q as usize + 1)) * w + r.map_or(0, |q| q as usize + 1)]
    }

    /// Runs on `tree` where tree symbol `s` is automaton symbol `sym_map[s]`
    /// and every track variable is bound by `asg`.
    pub fn accepts(&self, tree: &LabeledTree, sym_map: &[u32], asg: &Assignment) -> bool {
        let mut rho = vec![0u32; tree.len()];
        for u in tree.nodes().rev() {
            let mut bits = 0;
            for (j, v) in self.vars.iter().enumerate() {
                let on = match asg.get(v) {
                    Some(Value::Node(w)) => *w == u,
                    Some(Value::Set(m)) => m >> u.0 & 1 == 1,
                    None => panic!("unbound track variable {v}"),
                };
                bits |= (on as u32) << j;
            }
            let a = (sym_map[tree.label(u).0 as usize] << self.vars.len()) | bits;
            rho[u.index()] =
                self.delta(a, tree.e1(u).map(|c| rho[c.index()]), tree.e2(u).map(|c| rho[c.index()]));
        }
        self.fin[rho[0] as usize]
    }

    fn complement(mut self) -> Self {
        self.fin.iter_mut().for_each(|f| *f = !*f);
        self
    }
}

struct Ctx<'a> {
    nsym: u32,
    symbols: &'a [String],
    opts: &'a CompileOptions,
}

/// Reachable-state construction: `step` maps a letter and optional child
/// summaries to a summary; summaries are interned as states.
fn build<S, F, A>(ctx: &Ctx, vars: Vec<String>, mut step: F, accept: A) -> Result<TrackAutomaton>
where
    S: Clone + Eq + Hash,
    F: FnMut(u32, Option<&S>, Option<&S>) -> S,
    A: Fn(&S) -> bool,
{
    let nl = ctx.nsym << vars.len();
    let mut states: Vec<S> = Vec::new();
    let mut ids: HashMap<S, u32> = HashMap::new();
    let mut rows: Vec<(usize, usize, Vec<u32>)> = Vec::new();
    let cap = ctx.opts.state_cap;
    let mut intern = |s: S, states: &mut Vec<S>| -> Result<u32> {
        if let Some(&i) = ids.get(&s) {
            return Ok(i);
        }
        if states.len() >= cap {
            return Err(Error::StateCap(cap));
        }
        let i = states.len() as u32;
        ids.insert(s.clone(), i);
        states.push(s);
        Ok(i)
    };
    let mut pairs = vec![(0usize, 0usize)];
    let mut i = 0;
    loop {
        for &(l, r) in &pairs {
            let ls = (l > 0).then(|| states[l - 1].clone());
            let rs = (r > 0).then(|| states[r - 1].clone());
            let mut row = Vec::with_capacity(nl as usize);
            for a in 0..nl {
                let s = step(a, ls.as_ref(), rs.as_ref());
                row.push(intern(s, &mut states)?);
            }
            rows.push((l, r, row));
        }
        if i == states.len() {
            break;
        }
        i += 1;
        let w = (states.len() + 1).pow(2) * nl as usize;
        if w > TABLE_CAP {
            return Err(Error::Budget(format!("transition table of {w} entries")));
        }
        pairs.clear();
        pairs.extend([(i, 0), (0, i), (i, i)]);
        for j in 1..i {
            pairs.push((i, j));
            pairs.push((j, i));
        }
    }
    let n = states.len();
    let w = n + 1;
    let mut delta = vec![0u32; nl as usize * w * w];
    for (l, r, row) in rows {
        for (a, q) in row.into_iter().enumerate() {
            delta[(a * w + l) * w + r] = q;
        }
    }
    let fin = states.iter().map(accept).collect();
    Ok(TrackAutomaton { vars, nsym: ctx.nsym, n: n as u32, delta, fin })
}

/// Coarsest congruence refining acceptance, by signature refinement.
fn minimize(a: TrackAutomaton) -> TrackAutomaton {
    let n = a.n as usize;
    let nl = a.num_letters();
    let mut class: Vec<u32> = a.fin.iter().map(|&f| f as u32).collect();
    let mut count = {
        let mut seen = [false; 2];
        class.iter().for_each(|&c| seen[c as usize] = true);
        seen.iter().filter(|&&s| s).count()
    };
    // normalize class ids to 0..count
    if count == 1 {
        class.iter_mut().for_each(|c| *c = 0);
    }
    loop {
        let mut sigs: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut next = vec![0u32; n];
        for p in 0..n as u32 {
            let mut sig = Vec::with_capacity(1 + 2 * nl as usize * (n + 1));
            sig.push(class[p as usize]);
            for x in 0..nl {
                for r in std::iter::once(None).chain((0..n as u32).map(Some)) {
                    sig.push(class[a.delta(x, Some(p), r) as usize]);
                    sig.push(class[a.delta(x, r, Some(p)) as usize]);
                }
            }
            let k = sigs.len() as u32;
            next[p as usize] = *sigs.entry(sig).or_insert(k);
        }
        let c = sigs.len();
        class = next;
        if c == count {
            break;
        }
        count = c;
    }
    if count == n {
        return a;
    }
    let mut rep = vec![u32::MAX; count];
    for (p, &c) in class.iter().enumerate() {
        if rep[c as usize] == u32::MAX {
            rep[c as usize] = p as u32;
        }
    }
    let w = count + 1;
    let mut delta = vec![0u32; nl as usize * w * w];
    let opt = |x: usize| (x > 0).then(|| rep[x - 1]);
    for x in 0..nl {
        for l in 0..w {
            for r in 0..w {
                delta[(x as usize * w + l) * w + r] = class[a.delta(x, opt(l), opt(r)) as usize];
            }
        }
    }
    let fin = rep.iter().map(|&p| a.fin[p as usize]).collect();
    TrackAutomaton { vars: a.vars, nsym: a.nsym, n: count as u32, delta, fin }
}

fn finish(ctx: &Ctx, a: TrackAutomaton) -> Result<TrackAutomaton> {
    Ok(if ctx.opts.minimize { minimize(a) } else { a })
}

/// Maps letters over `to` tracks to letters over the sub-list `from`.
fn projection(from: &[String], to: &[String], nsym: u32) -> Vec<u32> {
    let pos: Vec<usize> = from.iter().map(|v| to.iter().position(|w| w == v).expect("sub-list")).collect();
    let k = to.len();
    (0..nsym << k)
        .map(|a| {
            let sym = a >> k;
            let bits = pos.iter().enumerate().fold(0, |acc, (j, &p)| acc | ((a >> p & 1) << j));
            (sym << from.len()) | bits
        })
        .collect()
}

fn merge_vars(a: &[String], b: &[String]) -> Vec<String> {
    let mut v: Vec<String> = a.iter().chain(b).cloned().collect();
    v.sort();
    v.dedup();
    v
}

fn product(ctx: &Ctx, a: &TrackAutomaton, b: &TrackAutomaton, conj: bool) -> Result<TrackAutomaton> {
    let vars = merge_vars(&a.vars, &b.vars);
    let pa = projection(&a.vars, &vars, ctx.nsym);
    let pb = projection(&b.vars, &vars, ctx.nsym);
    let out = build(
        ctx,
        vars,
        |x, l: Option<&(u32, u32)>, r: Option<&(u32, u32)>| {
            (
                a.delta(pa[x as usize], l.map(|s| s.0), r.map(|s| s.0)),
                b.delta(pb[x as usize], l.map(|s| s.1), r.map(|s| s.1)),
            )
        },
        |&(p, q)| {
            if conj {
                a.fin[p as usize] && b.fin[q as usize]
            } else {
                a.fin[p as usize] || b.fin[q as usize]
            }
        },
    )?;
    finish(ctx, out)
}

/// Removes track `v` by subset construction.
fn project(ctx: &Ctx, a: &TrackAutomaton, v: &str) -> Result<TrackAutomaton> {
    let j = a.vars.iter().position(|w| w == v).expect("projected variable is a track");
    let vars: Vec<String> = a.vars.iter().filter(|w| *w != v).cloned().collect();
    let lo = (1u32 << j) - 1;
    let lift = |x: u32| {
        let base = ((x & !lo) << 1) | (x & lo);
        [base, base | 1 << j]
    };
    let mut mark = vec![false; a.n as usize];
    let out = build(
        ctx,
        vars,
        |x, l: Option<&Vec<u32>>, r: Option<&Vec<u32>>| {
            let mut set = Vec::new();
            let ls: Vec<Option<u32>> = l.map_or(vec![None], |s| s.iter().map(|&q| Some(q)).collect());
            let rs: Vec<Option<u32>> = r.map_or(vec![None], |s| s.iter().map(|&q| Some(q)).collect());
            for y in lift(x) {
                for &lq in &ls {
                    for &rq in &rs {
                        let q = a.delta(y, lq, rq);
                        if !mark[q as usize] {
                            mark[q as usize] = true;
                            set.push(q);
                        }
                    }
                }
            }
            for &q in &set {
                mark[q as usize] = false;
            }
            set.sort_unstable();
            set
        },
        |s| s.iter().any(|&q| a.fin[q as usize]),
    )?;
    finish(ctx, out)
}

fn bit(vars: &[String], v: &str) -> u32 {
    vars.iter().position(|w| w == v).expect("track") as u32
}

fn vars_of(names: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    v.sort();
    v.dedup();
    v
}

fn singleton(ctx: &Ctx, v: &str) -> Result<TrackAutomaton> {
    build(
        ctx,
        vec![v.to_string()],
        |x, l: Option<&u8>, r: Option<&u8>| ((x & 1) as u8 + l.copied().unwrap_or(0) + r.copied().unwrap_or(0)).min(2),
        |&c| c == 1,
    )
}

/// Summary flags for binary atoms.
const SAT: u8 = 1;
/// `y` is at this node.
const Y_HERE: u8 = 2;
/// `y` is this node or reachable from it along `E2`.
const Y_CHAIN: u8 = 4;
/// `y` is somewhere in this subtree.
const Y_BELOW: u8 = 8;

fn binary_atom(ctx: &Ctx, rel: Rel, x: &str, y: &str) -> Result<TrackAutomaton> {
    let vars = vars_of(&[x, y]);
    let (bx, by) = (bit(&vars, x), bit(&vars, y));
    let unranked = ctx.opts.mode == ArityMode::Unranked;
    build(
        ctx,
        vars,
        move |a, l: Option<&u8>, r: Option<&u8>| {
            let (l, r) = (l.copied().unwrap_or(0), r.copied().unwrap_or(0));
            let hx = a >> bx & 1 == 1;
            let hy = a >> by & 1 == 1;
            let chain = hy || r & Y_CHAIN != 0;
            let below = hy || (l | r) & Y_BELOW != 0;
            let hit = hx
                && match rel {
                    Rel::E1 => l & Y_HERE != 0,
                    Rel::E2 => r & Y_HERE != 0,
                    Rel::Edge if unranked => l & Y_CHAIN != 0,
                    Rel::Edge => (l | r) & Y_HERE != 0,
                    Rel::Le if unranked => hy || l & Y_BELOW != 0,
                    Rel::Le => below,
                    Rel::Lt if unranked => l & Y_BELOW != 0,
                    Rel::Lt => (l | r) & Y_BELOW != 0,
                    Rel::Sib => chain,
                    Rel::Eq => hy,
                };
            let mut s = 0;
            if hit || (l | r) & SAT != 0 {
                s |= SAT;
            }
            if hy {
                s |= Y_HERE;
            }
            if chain {
                s |= Y_CHAIN;
            }
            if below {
                s |= Y_BELOW;
            }
            s
        },
        |&s| s & SAT != 0,
    )
}

/// Atom holding when `x` sits on a node whose letter passes `test`.
fn unary_atom<T>(ctx: &Ctx, vars: Vec<String>, x: &str, test: T) -> Result<TrackAutomaton>
where
    T: Fn(u32, u32) -> bool,
{
    let bx = bit(&vars, x);
    let k = vars.len();
    build(
        ctx,
        vars,
        |a, l: Option<&bool>, r: Option<&bool>| {
            l.copied().unwrap_or(false) || r.copied().unwrap_or(false) || (a >> bx & 1 == 1 && test(a >> k, a))
        },
        |&s| s,
    )
}

fn constant(ctx: &Ctx, value: bool) -> Result<TrackAutomaton> {
    build(ctx, Vec::new(), |_, _: Option<&()>, _: Option<&()>| (), |_| value)
}

fn compile_rec(ctx: &Ctx, f: &Formula) -> Result<TrackAutomaton> {
    match f {
        Formula::True => constant(ctx, true),
        Formula::False => constant(ctx, false),
        Formula::Rel(rel, x, y) if x == y => {
            constant(ctx, matches!(rel, Rel::Le | Rel::Sib | Rel::Eq))
        }
        Formula::Rel(rel, x, y) => finish(ctx, binary_atom(ctx, *rel, x, y)?),
        Formula::Label(sym, x) => {
            let want = ctx.symbols.iter().position(|s| s == sym).map(|i| i as u32);
            finish(ctx, unary_atom(ctx, vec![x.clone()], x, |s, _| Some(s) == want)?)
        }
        Formula::In(x, set) => {
            let vars = vars_of(&[x, set]);
            let bs = bit(&vars, set);
            finish(ctx, unary_atom(ctx, vars, x, |_, a| a >> bs & 1 == 1)?)
        }
        Formula::Mark(m, x) => {
            let set = match m {
                MarkSet::P => P_SET,
                MarkSet::N => N_SET,
            };
            compile_rec(ctx, &Formula::In(x.clone(), set.into()))
        }
        Formula::Not(g) => Ok(compile_rec(ctx, g)?.complement()),
        Formula::And(gs) | Formula::Or(gs) => {
            let conj = matches!(f, Formula::And(_));
            let mut acc: Option<TrackAutomaton> = None;
            for g in gs {
                let b = compile_rec(ctx, g)?;
                acc = Some(match acc {
                    None => b,
                    Some(a) => product(ctx, &a, &b, conj)?,
                });
            }
            match acc {
                Some(a) => Ok(a),
                None => constant(ctx, conj),
            }
        }
        Formula::Implies(a, b) => compile_rec(ctx, &Formula::Or(vec![Formula::negate((**a).clone()), (**b).clone()])),
        Formula::Exists(v, g) => {
            let a = compile_rec(ctx, g)?;
            if !a.vars.contains(v) {
                return Ok(a);
            }
            let a = product(ctx, &a, &singleton(ctx, v)?, true)?;
            project(ctx, &a, v)
        }
        Formula::Forall(v, g) => {
            Ok(compile_rec(ctx, &Formula::Exists(v.clone(), Box::new(Formula::negate((**g).clone()))))?.complement())
        }
        Formula::ExistsSet(v, g) | Formula::ForallSet(v, g) => {
            if !ctx.opts.allow_set_quantifiers {
                return Err(Error::Unsupported("set quantifiers are disabled".into()));
            }
            let univ = matches!(f, Formula::ForallSet(..));
            let body = if univ { Formula::negate((**g).clone()) } else { (**g).clone() };
            let a = compile_rec(ctx, &body)?;
            let a = if a.vars.contains(v) { project(ctx, &a, v)? } else { a };
            Ok(if univ { a.complement() } else { a })
        }
    }
}

/// Compiles an arbitrary formula into a track automaton. Free variables
/// become tracks; first-order ones are interpreted on singleton tracks.
pub fn compile_tracks(f: &Formula, symbols: &[String], opts: &CompileOptions) -> Result<TrackAutomaton> {
    if let Some(q) = opts.max_rank {
        if f.quantifier_rank() > q {
            return Err(Error::Unsupported(format!("quantifier rank above {q}")));
        }
    }
    let ctx = Ctx { nsym: symbols.len().max(1) as u32, symbols, opts };
    compile_rec(&ctx, f)
}

/// Compiles `psi(P, N, y1..yl)` into a tree automaton over `Σ₁`. Each
/// parameter is additionally required to occur exactly once.
pub fn compile(psi: &Formula, symbols: &[String], params: &[String], opts: &CompileOptions) -> Result<TreeAutomaton> {
    let extra: Vec<String> = psi.free_fo().into_iter().filter(|v| !params.contains(v)).collect();
    if !extra.is_empty() {
        return Err(Error::FreeVariables(extra.join(" ")));
    }
    if let Some(s) = psi.free_sets().into_iter().find(|s| s != P_SET && s != N_SET) {
        return Err(Error::FreeVariables(s));
    }
    let ctx = Ctx { nsym: symbols.len().max(1) as u32, symbols, opts };
    let mut a = compile_tracks(psi, symbols, opts)?;
    for p in params {
        a = product(&ctx, &a, &singleton(&ctx, p)?, true)?;
    }
    let sigma = Sigma1::new(symbols.to_vec(), params.len() as u32);
    let pos = |v: &str| a.vars.iter().position(|w| w == v);
    let (pp, np) = (pos(P_SET), pos(N_SET));
    let yp: Vec<usize> = params.iter().map(|p| pos(p).expect("parameter track")).collect();
    let k = a.vars.len();
    let map: Vec<u32> = (0..sigma.num_letters())
        .map(|x| {
            let (sym, mark, ybits) = sigma.decode(x);
            let mut bits = 0u32;
            if let Some(j) = pp {
                bits |= ((mark == Mark::Pos) as u32) << j;
            }
            if let Some(j) = np {
                bits |= ((mark == Mark::Neg) as u32) << j;
            }
            for (i, &j) in yp.iter().enumerate() {
                bits |= (ybits >> i & 1) << j;
            }
            (sym << k) | bits
        })
        .collect();
    let fin = a.fin.clone();
    Ok(TreeAutomaton::from_fn(sigma, a.n, fin, |x, l, r| a.delta(map[x as usize], l, r)))
}

/// Symbols for compiling against `tree`: its alphabet followed by any
/// further labels the formula mentions.
pub fn symbols_for(tree: &LabeledTree, f: &Formula) -> Vec<String> {
    let mut out: Vec<String> = tree.alphabet().names().to_vec();
    for l in f.labels() {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

/// `make_psi` followed by `compile`.
pub fn compile_param_formula(phi: &ParamFormula, symbols: &[String], opts: &CompileOptions) -> Result<TreeAutomaton> {
    compile(&make_psi(phi)?, symbols, &phi.params, opts)
}
