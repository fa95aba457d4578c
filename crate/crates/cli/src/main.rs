use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use treelearn::brute::bf_consistent;
use treelearn::exec::Exec;
use treelearn::factorization::TreeKind;
use treelearn::learner::{index_formula, Index, LearnOptions};
use treelearn::mso::{compile_param_formula, symbols_for, CompileOptions, ParamFormula};
use treelearn::online::{online_init_formula, Verdict};
use treelearn::oracle::{LcaIndex, OracleSession};
use treelearn::qf::{gen_lemma3_tree, learn_qf};
use treelearn::tree::{parse_tree, ArityMode, LabeledTree, NodeId, Polarity, TrainingSet};

#[derive(Parser)]
#[command(name = "treelearn", version, about = "Learn node classifiers on labeled trees")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an index for a tree and formula
    Index {
        #[command(flatten)]
        input: TreeFormula,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find parameters consistent with a training set
    Learn {
        #[command(flatten)]
        input: TreeFormula,
        #[arg(long)]
        train: PathBuf,
        /// Reuse a serialized index instead of building one
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Learn a quantifier-free hypothesis
    LearnQf {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        unranked: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Read updates from standard input and print a hypothesis after each
    Online {
        #[command(flatten)]
        input: TreeFormula,
    },
    /// Check a hypothesis against a training set
    Check {
        #[command(flatten)]
        input: TreeFormula,
        #[arg(long)]
        train: PathBuf,
        /// Comma-separated node ids
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Print the lower-bound fixture tree and training set
    GenLemma3 {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        tree_out: Option<PathBuf>,
        #[arg(long)]
        train_out: Option<PathBuf>,
    },
    /// Print the counters recorded by the last run
    Stats,
}

#[derive(Args)]
struct TreeFormula {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    formula: PathBuf,
    /// Read the tree as unranked (first-child/next-sibling encoding)
    #[arg(long)]
    unranked: bool,
    #[arg(long, value_enum, default_value_t = Kind::Simon)]
    kind: Kind,
    #[arg(long, default_value_t = 100_000)]
    monoid_cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Simon,
    Binary,
}

fn mode(unranked: bool) -> ArityMode {
    if unranked {
        ArityMode::Unranked
    } else {
        ArityMode::Binary
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))
}

fn load_tree(path: &Path, mode: ArityMode) -> Result<LabeledTree> {
    parse_tree(&read(path)?, mode).with_context(|| path.display().to_string())
}

fn load_formula(path: &Path) -> Result<ParamFormula> {
    ParamFormula::parse(&read(path)?).with_context(|| path.display().to_string())
}

fn load_training(path: &Path, n: usize) -> Result<TrainingSet> {
    TrainingSet::parse(&read(path)?, n).with_context(|| path.display().to_string())
}

impl TreeFormula {
    fn load(&self) -> Result<(LabeledTree, ParamFormula, LearnOptions)> {
        let mode = mode(self.unranked);
        let tree = load_tree(&self.tree, mode)?;
        let phi = load_formula(&self.formula)?;
        let mut opts = LearnOptions::new(CompileOptions::new(mode));
        opts.monoid_cap = self.monoid_cap;
        opts.kind = match self.kind {
            Kind::Simon => TreeKind::Simon,
            Kind::Binary => TreeKind::Binary,
        };
        Ok((tree, phi, opts))
    }
}

fn stats_path() -> PathBuf {
    std::env::var_os("TREELEARN_STATS")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("treelearn-stats.jsonl"))
}

fn write_stats(lines: &[Value]) -> Result<()> {
    let text: String = lines.iter().map(|v| format!("{v}\n")).collect();
    let path = stats_path();
    fs::write(&path, text).with_context(|| format!("{}: cannot write stats", path.display()))
}

fn index_stats(cmd: &str, ix: &Index) -> Value {
    let pm = ix.power_monoid();
    json!({
        "command": cmd,
        "nodes": ix.tree().len(),
        "states": ix.dta().num_states(),
        "letters": ix.dta().num_letters(),
        "monoid": pm.m.len(),
        "power_sets": pm.num_sets(),
        "paths": ix.decomposition().num_paths(),
        "max_height": ix.max_height(),
        "index_touched": ix.counters.index_touched,
        "update_touched": ix.counters.update_touched,
        "trace_steps": ix.counters.trace_steps,
    })
}

fn ids(v: &[NodeId]) -> String {
    v.iter().map(|u| format!(" {u}")).collect()
}

fn run(cli: Cli) -> Result<u8> {
    let mut out = io::stdout().lock();
    match cli.cmd {
        Cmd::Index { input, out: path } => {
            let (tree, phi, opts) = input.load()?;
            let ix = index_formula(&tree, &phi, &opts)?;
            let st = index_stats("index", &ix);
            for key in ["nodes", "states", "letters", "monoid", "power_sets", "paths", "max_height", "index_touched"] {
                writeln!(out, "{key} {}", st[key])?;
            }
            if let Some(p) = path {
                fs::write(&p, ix.to_bytes()?).with_context(|| format!("{}: cannot write", p.display()))?;
            }
            write_stats(&[st])?;
            Ok(0)
        }
        Cmd::Learn { input, train, index } => {
            let (tree, phi, opts) = input.load()?;
            let mut ix = match index {
                Some(p) => {
                    let bytes = fs::read(&p).with_context(|| format!("{}: cannot read", p.display()))?;
                    let ix = Index::from_bytes(&bytes).with_context(|| p.display().to_string())?;
                    if ix.tree().to_term() != tree.to_term() {
                        bail!("{}: index was built for a different tree", p.display());
                    }
                    if ix.formula != phi.to_string() {
                        bail!("{}: index was built for a different formula", p.display());
                    }
                    ix
                }
                None => index_formula(&tree, &phi, &opts)?,
            };
            let s = load_training(&train, tree.len())?;
            let res = ix.solve(&s)?;
            write_stats(&[index_stats("learn", &ix)])?;
            match res {
                Some(v) => {
                    writeln!(out, "CONSISTENT{}", ids(&v))?;
                    Ok(0)
                }
                None => {
                    writeln!(out, "NO-CONSISTENT-PARAMS")?;
                    Ok(1)
                }
            }
        }
        Cmd::LearnQf { tree, train, ell, unranked, sequential } => {
            let t = load_tree(&tree, mode(unranked))?;
            let s = load_training(&train, t.len())?;
            let lca = LcaIndex::new(&t);
            let mut sess = OracleSession::with_index(&t, &lca);
            let exec = if sequential { Exec::Sequential } else { Exec::Parallel };
            let res = learn_qf(&mut sess, &s, ell, exec)?;
            let c = sess.counters();
            write_stats(&[json!({
                "command": "learn-qf",
                "nodes": t.len(),
                "examples": s.len(),
                "oracle_neighborhood": c.neighborhood,
                "oracle_relation": c.relation,
                "oracle_lca": c.lca,
                "oracle_total": c.total(),
            })])?;
            match res {
                Some(h) => {
                    writeln!(out, "{}", h.formula)?;
                    writeln!(out, "PARAMS{}", ids(&h.params))?;
                    Ok(0)
                }
                None => {
                    writeln!(out, "NO-CONSISTENT-HYPOTHESIS")?;
                    Ok(1)
                }
            }
        }
        Cmd::Online { input } => {
            let (tree, phi, opts) = input.load()?;
            let mut st = online_init_formula(&tree, &phi, &opts)?;
            let mut stats = vec![index_stats("online-init", st.index())];
            for (i, line) in io::stdin().lock().lines().enumerate() {
                let line = line.context("stdin")?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let verdict = online_step(&mut st, line).with_context(|| format!("stdin line {}", i + 1))?;
                match verdict {
                    Verdict::Consistent(h) => writeln!(out, "CONSISTENT{}", ids(&h.params))?,
                    Verdict::NotRealizable => writeln!(out, "NOT-REALIZABLE")?,
                }
                out.flush()?;
                let cost = st.last_cost();
                stats.push(json!({
                    "command": "online-update",
                    "line": i + 1,
                    "update_touched": cost.update_touched,
                    "trace_steps": cost.trace_steps,
                }));
            }
            write_stats(&stats)?;
            Ok(0)
        }
        Cmd::Check { input, train, params } => {
            let (tree, phi, opts) = input.load()?;
            let s = load_training(&train, tree.len())?;
            let params = parse_ids(&params)?;
            if params.len() != phi.ell() {
                bail!("--params: the formula takes {} parameters, got {}", phi.ell(), params.len());
            }
            let aut = compile_param_formula(&phi, &symbols_for(&tree, &phi.body), &opts.compile)?;
            let ok = bf_consistent(&tree, &aut, &params, &s)?;
            writeln!(out, "{}", if ok { "CONSISTENT" } else { "INCONSISTENT" })?;
            write_stats(&[json!({ "command": "check", "nodes": tree.len(), "states": aut.num_states(), "consistent": ok })])?;
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::GenLemma3 { m, ell, tree_out, train_out } => {
            if m == 0 {
                bail!("--m must be at least 1");
            }
            let f = gen_lemma3_tree(m, ell);
            let term = f.tree.to_term();
            let text = f.training.to_text();
            match tree_out {
                Some(p) => fs::write(&p, format!("{term}\n")).with_context(|| format!("{}: cannot write", p.display()))?,
                None => writeln!(out, "{term}")?,
            }
            match train_out {
                Some(p) => fs::write(&p, &text).with_context(|| format!("{}: cannot write", p.display()))?,
                None => write!(out, "{text}")?,
            }
            Ok(0)
        }
        Cmd::Stats => {
            let path = stats_path();
            let text = fs::read_to_string(&path).with_context(|| format!("{}: no stats recorded", path.display()))?;
            write!(out, "{text}")?;
            Ok(0)
        }
    }
}

fn parse_ids(text: &str) -> Result<Vec<NodeId>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u32>().map(NodeId).map_err(|_| anyhow!("--params: bad node id `{s}`")))
        .collect()
}

fn online_step(st: &mut treelearn::online::OnlineState, line: &str) -> Result<Verdict> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let node = |w: &str| w.parse::<u32>().map(NodeId).map_err(|_| anyhow!("bad node id `{w}`"));
    Ok(match words.as_slice() {
        ["relabel", u, sym] => st.relabel(node(u)?, sym)?,
        [u, "+"] => st.add(node(u)?, Polarity::Pos)?,
        [u, "-"] => st.add(node(u)?, Polarity::Neg)?,
        _ => bail!("expected `<id> <+|->` or `relabel <id> <symbol>`"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
