//! Labeled trees, the term file format, and training sets.
//!
//! Nodes are addressed by preorder index. A tree is either *binary*, where
//! `E1`/`E2` are the first and second child slots, or *unranked*, where
//! `E1` is the first child and `E2` the next sibling. In both modes the
//! pair `(E1, E2)` forms a binary tree with the same preorder, which is the
//! structure every automaton runs on.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[inline]
fn opt(x: u32) -> Option<NodeId> {
    (x != NIL).then_some(NodeId(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Symbol(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArityMode {
    Binary,
    Unranked,
}

/// Interned label symbols, numbered in order of first appearance.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Symbol>,
}

impl From<Vec<String>> for Alphabet {
    fn from(names: Vec<String>) -> Self {
        let mut a = Alphabet::default();
        for n in names {
            a.intern(&n);
        }
        a
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.names
    }
}

impl Alphabet {
    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = Symbol(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: Symbol) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Relations of the tree signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    E1,
    E2,
    /// `E(x, y)`: y is a child of x in the actual tree.
    Child,
    /// Reflexive ancestor order.
    Le,
    Lt,
    /// Reflexive-transitive closure of `E2`, unranked trees only.
    Sib,
    Eq,
    Label(Symbol),
}

impl Relation {
    pub fn arity(self) -> usize {
        match self {
            Relation::Label(_) => 1,
            _ => 2,
        }
    }

    /// Accepts `E1 E2 E le <= lt < sib = R_<label>`.
    pub fn parse(name: &str, alphabet: &Alphabet) -> Result<Relation> {
        Ok(match name {
            "E1" => Relation::E1,
            "E2" => Relation::E2,
            "E" => Relation::Child,
            "le" | "<=" | "≤" => Relation::Le,
            "lt" | "<" => Relation::Lt,
            "sib" | "⪯" => Relation::Sib,
            "=" | "eq" => Relation::Eq,
            _ => match name.strip_prefix("R_") {
                Some(l) => Relation::Label(
                    alphabet
                        .get(l)
                        .ok_or_else(|| Error::UnknownSymbol(l.to_owned()))?,
                ),
                None => return Err(Error::UnknownRelation(name.to_owned())),
            },
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledTree {
    mode: ArityMode,
    alphabet: Alphabet,
    labels: Vec<Symbol>,
    parent: Vec<u32>,
    e1: Vec<u32>,
    e2: Vec<u32>,
    /// Parent in the `E1`/`E2` structure.
    sparent: Vec<u32>,
    /// Exclusive preorder end of the actual subtree.
    end: Vec<u32>,
    depth: Vec<u32>,
    /// Position among the siblings (unranked mode).
    sib_pos: Vec<u32>,
}

/// Builder used by the parser and the generators: nodes must be added in
/// preorder.
#[derive(Debug)]
pub struct TreeBuilder {
    mode: ArityMode,
    alphabet: Alphabet,
    labels: Vec<Symbol>,
    parent: Vec<u32>,
    e1: Vec<u32>,
    e2: Vec<u32>,
    last_child: Vec<u32>,
}

impl TreeBuilder {
    pub fn new(mode: ArityMode) -> Self {
        TreeBuilder {
            mode,
            alphabet: Alphabet::default(),
            labels: Vec::new(),
            parent: Vec::new(),
            e1: Vec::new(),
            e2: Vec::new(),
            last_child: Vec::new(),
        }
    }

    pub fn with_alphabet(mut self, alphabet: Alphabet) -> Self {
        self.alphabet = alphabet;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&mut self, label: &str) -> NodeId {
        assert!(self.labels.is_empty(), "root already added");
        self.push(label, NIL)
    }

    fn push(&mut self, label: &str, parent: u32) -> NodeId {
        let id = self.labels.len() as u32;
        let s = self.alphabet.intern(label);
        self.labels.push(s);
        self.parent.push(parent);
        self.e1.push(NIL);
        self.e2.push(NIL);
        self.last_child.push(NIL);
        NodeId(id)
    }

    /// Appends the next child of `p` in unranked mode. `p` must be on the
    /// current rightmost path for the preorder to stay valid.
    pub fn child(&mut self, p: NodeId, label: &str) -> NodeId {
        assert_eq!(self.mode, ArityMode::Unranked);
        let id = self.push(label, p.0);
        let last = self.last_child[p.index()];
        if last == NIL {
            self.e1[p.index()] = id.0;
        } else {
            self.e2[last as usize] = id.0;
        }
        self.last_child[p.index()] = id.0;
        id
    }

    /// Sets slot 1 or 2 of `p` in binary mode.
    pub fn slot(&mut self, p: NodeId, second: bool, label: &str) -> NodeId {
        assert_eq!(self.mode, ArityMode::Binary);
        let id = self.push(label, p.0);
        if second {
            debug_assert_eq!(self.e2[p.index()], NIL);
            self.e2[p.index()] = id.0;
        } else {
            debug_assert_eq!(self.e1[p.index()], NIL);
            self.e1[p.index()] = id.0;
        }
        id
    }

    pub fn build(self) -> LabeledTree {
        let n = self.labels.len();
        assert!(n > 0, "empty tree");
        let mut sparent = vec![NIL; n];
        for u in 0..n {
            for c in [self.e1[u], self.e2[u]] {
                if c != NIL {
                    sparent[c as usize] = u as u32;
                }
            }
        }
        let mut end: Vec<u32> = (1..=n as u32).collect();
        for u in (1..n).rev() {
            let p = self.parent[u] as usize;
            end[p] = end[p].max(end[u]);
        }
        let mut depth = vec![0u32; n];
        let mut sib_pos = vec![0u32; n];
        for u in 1..n {
            depth[u] = depth[self.parent[u] as usize] + 1;
        }
        if self.mode == ArityMode::Unranked {
            for u in 1..n {
                let sp = sparent[u] as usize;
                if self.e2[sp] == u as u32 {
                    sib_pos[u] = sib_pos[sp] + 1;
                }
            }
        } else {
            for (u, pos) in sib_pos.iter_mut().enumerate().skip(1) {
                if self.e2[self.parent[u] as usize] == u as u32 {
                    *pos = 1;
                }
            }
        }
        LabeledTree {
            mode: self.mode,
            alphabet: self.alphabet,
            labels: self.labels,
            parent: self.parent,
            e1: self.e1,
            e2: self.e2,
            sparent,
            end,
            depth,
            sib_pos,
        }
    }
}

impl LabeledTree {
    pub fn parse(text: &str, mode: ArityMode) -> Result<LabeledTree> {
        parse_tree(text, mode)
    }

    pub fn mode(&self) -> ArityMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn alphabet_mut(&mut self) -> &mut Alphabet {
        &mut self.alphabet
    }

    pub fn label(&self, u: NodeId) -> Symbol {
        self.labels[u.index()]
    }

    pub fn label_name(&self, u: NodeId) -> &str {
        self.alphabet.name(self.label(u))
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    pub fn set_label(&mut self, u: NodeId, s: Symbol) {
        assert!((s.0 as usize) < self.alphabet.len());
        self.labels[u.index()] = s;
    }

    pub fn check(&self, u: NodeId) -> Result<()> {
        if u.index() < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidNode(u.0))
        }
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        opt(self.parent[u.index()])
    }

    pub fn e1(&self, u: NodeId) -> Option<NodeId> {
        opt(self.e1[u.index()])
    }

    pub fn e2(&self, u: NodeId) -> Option<NodeId> {
        opt(self.e2[u.index()])
    }

    /// Parent in the `E1`/`E2` structure.
    pub fn struct_parent(&self, u: NodeId) -> Option<NodeId> {
        opt(self.sparent[u.index()])
    }

    pub fn depth(&self, u: NodeId) -> u32 {
        self.depth[u.index()]
    }

    /// Size of the actual subtree rooted at `u`.
    pub fn subtree_size(&self, u: NodeId) -> usize {
        (self.end[u.index()] - u.0) as usize
    }

    /// Size of the subtree of `u` in the `E1`/`E2` structure. In unranked
    /// mode this also covers the later siblings of `u`.
    pub fn struct_size(&self, u: NodeId) -> usize {
        match (self.mode, self.parent(u)) {
            (ArityMode::Unranked, Some(p)) => (self.end[p.index()] - u.0) as usize,
            _ => self.subtree_size(u),
        }
    }

    /// Children in the actual tree, left to right.
    pub fn children(&self, u: NodeId) -> Children<'_> {
        let first = match self.mode {
            ArityMode::Binary => {
                if self.e1[u.index()] != NIL {
                    self.e1[u.index()]
                } else {
                    self.e2[u.index()]
                }
            }
            ArityMode::Unranked => self.e1[u.index()],
        };
        Children { tree: self, parent: u, next: first }
    }

    pub fn is_leaf(&self, u: NodeId) -> bool {
        self.children(u).next().is_none()
    }

    pub fn first_child(&self, u: NodeId) -> Option<NodeId> {
        self.children(u).next()
    }

    pub fn left_sibling(&self, u: NodeId) -> Option<NodeId> {
        match self.mode {
            ArityMode::Unranked => {
                let sp = self.sparent[u.index()];
                (sp != NIL && self.e2[sp as usize] == u.0).then_some(NodeId(sp))
            }
            ArityMode::Binary => {
                let p = self.parent(u)?;
                (self.e2(p) == Some(u)).then(|| self.e1(p)).flatten()
            }
        }
    }

    pub fn right_sibling(&self, u: NodeId) -> Option<NodeId> {
        match self.mode {
            ArityMode::Unranked => self.e2(u),
            ArityMode::Binary => {
                let p = self.parent(u)?;
                (self.e1(p) == Some(u)).then(|| self.e2(p)).flatten()
            }
        }
    }

    /// `u ≤ v`: u is an ancestor of v or equal to it.
    #[inline]
    pub fn is_ancestor_or_self(&self, u: NodeId, v: NodeId) -> bool {
        u.0 <= v.0 && v.0 < self.end[u.index()]
    }

    /// Ground truth for every relation of the signature.
    pub fn holds(&self, rel: Relation, args: &[NodeId]) -> bool {
        match (rel, args) {
            (Relation::Label(s), [u]) => self.label(*u) == s,
            (Relation::E1, [u, v]) => self.e1[u.index()] == v.0,
            (Relation::E2, [u, v]) => self.e2[u.index()] == v.0,
            (Relation::Child, [u, v]) => self.parent[v.index()] == u.0,
            (Relation::Le, [u, v]) => self.is_ancestor_or_self(*u, *v),
            (Relation::Lt, [u, v]) => u != v && self.is_ancestor_or_self(*u, *v),
            (Relation::Eq, [u, v]) => u == v,
            (Relation::Sib, [u, v]) => {
                u == v
                    || (self.parent[u.index()] == self.parent[v.index()]
                        && self.parent[u.index()] != NIL
                        && self.sib_pos[u.index()] <= self.sib_pos[v.index()])
            }
            _ => panic!("relation {rel:?} applied to {} arguments", args.len()),
        }
    }

    /// Serializes back to the term syntax accepted by [`parse_tree`].
    pub fn to_term(&self) -> String {
        let mut out = String::with_capacity(self.len() * 4);
        // Frames hold the remaining children still to be printed.
        enum Item {
            Open(u32),
            Absent,
            Close,
        }
        let mut stack = vec![Item::Open(0)];
        while let Some(it) = stack.pop() {
            match it {
                Item::Close => out.push(')'),
                Item::Absent => out.push_str(" -"),
                Item::Open(u) => {
                    if u != 0 {
                        out.push(' ');
                    }
                    out.push('(');
                    out.push_str(self.alphabet.name(self.labels[u as usize]));
                    stack.push(Item::Close);
                    match self.mode {
                        ArityMode::Binary => {
                            let (a, b) = (self.e1[u as usize], self.e2[u as usize]);
                            if b != NIL {
                                stack.push(Item::Open(b));
                                stack.push(if a == NIL { Item::Absent } else { Item::Open(a) });
                            } else if a != NIL {
                                stack.push(Item::Open(a));
                            }
                        }
                        ArityMode::Unranked => {
                            let kids: Vec<NodeId> = self.children(NodeId(u)).collect();
                            stack.extend(kids.into_iter().rev().map(|c| Item::Open(c.0)));
                        }
                    }
                }
            }
        }
        out
    }
}

pub struct Children<'a> {
    tree: &'a LabeledTree,
    parent: NodeId,
    next: u32,
}

impl Iterator for Children<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.next == NIL {
            return None;
        }
        let c = self.next;
        self.next = match self.tree.mode {
            ArityMode::Unranked => self.tree.e2[c as usize],
            ArityMode::Binary => {
                let e2 = self.tree.e2[self.parent.index()];
                if c != e2 {
                    e2
                } else {
                    NIL
                }
            }
        };
        Some(NodeId(c))
    }
}

/// Parses `(label child*)`. In binary mode a child may be `-` for an absent
/// slot, and at most two slots are allowed.
pub fn parse_tree(text: &str, mode: ArityMode) -> Result<LabeledTree> {
    let bytes = text.as_bytes();
    let syntax = |offset: usize, msg: &str| Error::Syntax { offset, msg: msg.to_owned() };
    let is_atom = |b: u8| !(b.is_ascii_whitespace() || b == b'(' || b == b')');
    let mut b = TreeBuilder::new(mode);
    // (node, next binary slot)
    let mut stack: Vec<(NodeId, u8)> = Vec::new();
    let mut i = 0;
    let mut done = false;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if done {
            return Err(syntax(i, "trailing input after the root term"));
        }
        match c {
            b'(' => {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                let ls = i;
                while i < bytes.len() && is_atom(bytes[i]) {
                    i += 1;
                }
                let label = &text[ls..i];
                if label.is_empty() {
                    return Err(syntax(ls, "expected a label"));
                }
                if label == "-" {
                    return Err(syntax(ls, "`-` is not a valid label"));
                }
                let id = match stack.last_mut() {
                    None if b.is_empty() => b.root(label),
                    None => unreachable!(),
                    Some((p, slot)) => match mode {
                        ArityMode::Unranked => b.child(*p, label),
                        ArityMode::Binary => {
                            if *slot >= 2 {
                                return Err(Error::Arity { offset: start });
                            }
                            let s = *slot;
                            *slot += 1;
                            let p = *p;
                            b.slot(p, s == 1, label)
                        }
                    },
                };
                stack.push((id, 0));
            }
            b')' => {
                if stack.pop().is_none() {
                    return Err(syntax(i, "unbalanced `)`"));
                }
                if stack.is_empty() {
                    done = true;
                }
                i += 1;
            }
            _ => {
                let s = i;
                while i < bytes.len() && is_atom(bytes[i]) {
                    i += 1;
                }
                if &text[s..i] != "-" {
                    return Err(syntax(s, "expected `(`, `)` or `-`"));
                }
                match (mode, stack.last_mut()) {
                    (ArityMode::Binary, Some((_, slot))) => {
                        if *slot >= 2 {
                            return Err(Error::Arity { offset: s });
                        }
                        *slot += 1;
                    }
                    (ArityMode::Unranked, Some(_)) => {
                        return Err(syntax(s, "`-` is only allowed in binary mode"))
                    }
                    (_, None) => return Err(syntax(s, "expected `(`")),
                }
            }
        }
    }
    if !done {
        return Err(syntax(bytes.len(), "unexpected end of input"));
    }
    Ok(b.build())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Pos,
    Neg,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Pos => "+",
            Polarity::Neg => "-",
        })
    }
}

impl FromStr for Polarity {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "+" => Ok(Polarity::Pos),
            "-" => Ok(Polarity::Neg),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub node: NodeId,
    pub polarity: Polarity,
}

/// A non-contradicting set of labeled examples, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    examples: Vec<Example>,
}

impl TrainingSet {
    /// Validates node ids against a tree of `n` nodes. Repeated examples
    /// with the same polarity are merged.
    pub fn new<I>(examples: I, n: usize) -> Result<TrainingSet>
    where
        I: IntoIterator<Item = (NodeId, Polarity)>,
    {
        let mut seen: HashMap<NodeId, Polarity> = HashMap::new();
        let mut out = Vec::new();
        for (node, polarity) in examples {
            if node.index() >= n {
                return Err(Error::InvalidNode(node.0));
            }
            match seen.get(&node) {
                Some(&p) if p == polarity => {}
                Some(_) => return Err(Error::Contradiction(node.0)),
                None => {
                    seen.insert(node, polarity);
                    out.push(Example { node, polarity });
                }
            }
        }
        Ok(TrainingSet { examples: out })
    }

    /// One `<node-id> <+|->` per line; blank lines and `#` comments allowed.
    pub fn parse(text: &str, n: usize) -> Result<TrainingSet> {
        let mut pairs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Training { line: ln + 1, msg: msg.to_owned() };
            let mut it = line.split_whitespace();
            let id: u32 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected a node id"))?;
            let pol: Polarity = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("expected `+` or `-`"))?;
            if it.next().is_some() {
                return Err(err("trailing tokens"));
            }
            pairs.push((NodeId(id), pol));
        }
        TrainingSet::new(pairs, n)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn polarity(&self, u: NodeId) -> Option<Polarity> {
        self.examples.iter().find(|e| e.node == u).map(|e| e.polarity)
    }

    /// Adds one example, rejecting contradictions. Returns false if it was
    /// already present.
    pub fn push(&mut self, node: NodeId, polarity: Polarity) -> Result<bool> {
        match self.polarity(node) {
            Some(p) if p == polarity => Ok(false),
            Some(_) => Err(Error::Contradiction(node.0)),
            None => {
                self.examples.push(Example { node, polarity });
                Ok(true)
            }
        }
    }

    pub fn to_text(&self) -> String {
        self.examples
            .iter()
            .map(|e| format!("{} {}\n", e.node, e.polarity))
            .collect()
    }
}
