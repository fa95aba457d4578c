use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("node at byte {offset} has more than two children in binary mode")]
    Arity { offset: usize },
    #[error("training line {line}: {msg}")]
    Training { line: usize, msg: String },
    #[error("node id {0} is out of range")]
    InvalidNode(u32),
    #[error("node {0} is labeled both + and -")]
    Contradiction(u32),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{0}` is only defined on unranked trees")]
    ModeMismatch(String),
    #[error("relation `{rel}` takes {expected} arguments, got {got}")]
    RelationArity { rel: String, expected: usize, got: usize },
    #[error("unknown label symbol `{0}`")]
    UnknownSymbol(String),
    #[error("the tree must be in binary mode")]
    NotBinary,
    #[error("letter {0} is outside the automaton alphabet")]
    LetterOutsideAlphabet(u32),
    #[error("automaton state cap of {0} exceeded")]
    StateCap(usize),
    #[error("monoid cap of {0} exceeded")]
    MonoidCap(usize),
    #[error("unsupported formula: {0}")]
    Unsupported(String),
    #[error("formula has unexpected free variables: {0}")]
    FreeVariables(String),
    #[error("parameter function is inconsistent on element {0}")]
    ParamConsistency(u32),
    #[error("duplicate update index {0}")]
    DuplicateIndex(usize),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("index file: {0}")]
    IndexFormat(String),
}
