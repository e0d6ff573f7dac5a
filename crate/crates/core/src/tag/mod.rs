//! m-tag systems: validation, single-step transitions and bounded runs.
//!
//! A tag system `(m, A, P)` reads the head symbol `x` of a queue, appends the
//! production `P(x)` to the tail and deletes `m` symbols from the head. It
//! halts when the queue holds fewer than `m` symbols.

mod runlength;

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use runlength::{Advance, RunQueue, StopReason};

/// One queue cell. Symbols are atomic tokens and may span several characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Symbol(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("symbol is empty")]
    Empty,
    #[error("symbol {0:?} contains whitespace or a bracket")]
    Forbidden(String),
}

impl Symbol {
    pub fn new(text: impl Into<String>) -> Result<Self, SymbolError> {
        let text = text.into();
        if text.is_empty() {
            return Err(SymbolError::Empty);
        }
        if text.chars().any(|c| c.is_whitespace() || c == '[' || c == ']') {
            return Err(SymbolError::Forbidden(text));
        }
        Ok(Symbol(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Symbol {
    type Error = SymbolError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Symbol::new(value)
    }
}

impl From<Symbol> for String {
    fn from(value: Symbol) -> Self {
        value.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Symbol {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

/// Parses whitespace-separated symbols, e.g. `"E D A B C"`.
pub fn word(text: &str) -> Result<Vec<Symbol>, SymbolError> {
    text.split_whitespace().map(Symbol::new).collect()
}

/// Queue contents, head at index 0.
///
/// The textual form is `[` + symbols joined by single spaces + `]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Queue(pub Vec<Symbol>);

impl Queue {
    pub fn new(cells: Vec<Symbol>) -> Self {
        Queue(cells)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cells(&self) -> &[Symbol] {
        &self.0
    }

    pub fn head(&self) -> Option<&Symbol> {
        self.0.first()
    }
}

impl fmt::Display for Queue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(s.as_str())?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueParseError {
    #[error("queue must be written as [s1 s2 ...]")]
    Brackets,
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

impl FromStr for Queue {
    type Err = QueueParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or(QueueParseError::Brackets)?;
        Ok(Queue(word(inner)?))
    }
}

/// The triplet `(m, alphabet, rules)`.
///
/// Instances may be built in an invalid state; [`validate_system`] reports
/// every violated invariant and the stepping functions refuse invalid systems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSystem {
    pub m: usize,
    pub alphabet: Vec<Symbol>,
    pub rules: IndexMap<Symbol, Vec<Symbol>>,
}

impl TagSystem {
    /// Builds a system whose alphabet is the rule keys in order.
    pub fn from_rules(m: usize, rules: impl IntoIterator<Item = (Symbol, Vec<Symbol>)>) -> Self {
        let rules: IndexMap<_, _> = rules.into_iter().collect();
        TagSystem {
            m,
            alphabet: rules.keys().cloned().collect(),
            rules,
        }
    }

    /// Convenience constructor from `"A : E D A B C"` style lines.
    pub fn parse_rules(m: usize, lines: &[&str]) -> Result<Self, SymbolError> {
        let mut rules = Vec::with_capacity(lines.len());
        for line in lines {
            let (lhs, rhs) = line.split_once(':').unwrap_or((line, ""));
            rules.push((Symbol::new(lhs.trim())?, word(rhs)?));
        }
        Ok(TagSystem::from_rules(m, rules))
    }

    pub fn production(&self, symbol: &Symbol) -> Option<&[Symbol]> {
        self.rules.get(symbol).map(Vec::as_slice)
    }

    pub fn contains(&self, symbol: &Symbol) -> bool {
        self.rules.contains_key(symbol)
    }

    /// Dense form used by the fast interpreters. Fails on an invalid system.
    pub fn indexed(&self) -> Result<IndexedSystem, TagError> {
        let violations = validate_system(self);
        if !violations.is_empty() {
            return Err(TagError::InvalidSystem(violations));
        }
        let index: HashMap<Symbol, u32> = self
            .alphabet
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let rules = self
            .alphabet
            .iter()
            .map(|s| self.rules[s].iter().map(|p| index[p]).collect())
            .collect();
        Ok(IndexedSystem {
            m: self.m,
            symbols: self.alphabet.clone(),
            index,
            rules,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ZeroDeletion,
    DuplicateSymbol(Symbol),
    MissingRule(Symbol),
    RuleForUnknownSymbol(Symbol),
    UnknownSymbolInProduction { rule: Symbol, symbol: Symbol },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDeletion => write!(f, "m must be ≥ 1"),
            Violation::DuplicateSymbol(s) => write!(f, "symbol {s} appears more than once in the alphabet"),
            Violation::MissingRule(s) => write!(f, "no production rule for symbol {s}"),
            Violation::RuleForUnknownSymbol(s) => write!(f, "rule for {s}, which is not in the alphabet"),
            Violation::UnknownSymbolInProduction { rule, symbol } => {
                write!(f, "production of {rule} uses {symbol}, which is not in the alphabet")
            }
        }
    }
}

/// Returns every violated invariant; an empty list means the system is valid.
pub fn validate_system(system: &TagSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    if system.m == 0 {
        out.push(Violation::ZeroDeletion);
    }
    let mut seen = HashSet::new();
    for s in &system.alphabet {
        if !seen.insert(s) {
            out.push(Violation::DuplicateSymbol(s.clone()));
        }
    }
    for s in &system.alphabet {
        if !system.rules.contains_key(s) && !out.contains(&Violation::MissingRule(s.clone())) {
            out.push(Violation::MissingRule(s.clone()));
        }
    }
    for (lhs, production) in &system.rules {
        if !seen.contains(lhs) {
            out.push(Violation::RuleForUnknownSymbol(lhs.clone()));
        }
        for p in production {
            if !seen.contains(p) {
                out.push(Violation::UnknownSymbolInProduction {
                    rule: lhs.clone(),
                    symbol: p.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagError {
    #[error("malformed input: symbol {symbol} at position {position} is not in the alphabet")]
    UnknownSymbol { symbol: Symbol, position: usize },
    #[error("invalid tag system: {}", join_violations(.0))]
    InvalidSystem(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Advanced(Queue),
    Halted(Queue),
}

impl StepOutcome {
    pub fn queue(&self) -> &Queue {
        match self {
            StepOutcome::Advanced(q) | StepOutcome::Halted(q) => q,
        }
    }
}

/// One transition. A queue shorter than `m` halts unchanged.
pub fn step(system: &TagSystem, queue: &Queue) -> Result<StepOutcome, TagError> {
    check_cells(system, queue)?;
    if queue.len() < system.m {
        return Ok(StepOutcome::Halted(queue.clone()));
    }
    let head = &queue.0[0];
    let production = system.production(head).ok_or_else(|| TagError::UnknownSymbol {
        symbol: head.clone(),
        position: 0,
    })?;
    let mut next = Vec::with_capacity(queue.len() - system.m + production.len());
    next.extend_from_slice(&queue.0[system.m..]);
    next.extend_from_slice(production);
    Ok(StepOutcome::Advanced(Queue(next)))
}

fn check_cells(system: &TagSystem, queue: &Queue) -> Result<(), TagError> {
    match queue.0.iter().position(|s| !system.contains(s)) {
        Some(position) => Err(TagError::UnknownSymbol {
            symbol: queue.0[position].clone(),
            position,
        }),
        None => Ok(()),
    }
}

/// Ground-truth queue states of a bounded run.
///
/// `steps[0]` is the initial queue and `steps[i]` the queue after the i-th
/// transition. `halt_step` is set exactly when the final queue is shorter
/// than `m`; otherwise the step budget ran out and `truncated` is true.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<Queue>,
    pub halt_step: Option<usize>,
    pub truncated: bool,
}

impl Trace {
    pub fn transitions(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn last(&self) -> &Queue {
        self.steps.last().expect("trace holds the initial queue")
    }
}

/// Runs at most `max_steps` transitions from `init`.
pub fn run(system: &TagSystem, init: &Queue, max_steps: usize) -> Result<Trace, TagError> {
    let indexed = system.indexed()?;
    let mut queue: VecDeque<u32> = indexed.encode(init)?.into();
    let mut steps = vec![init.clone()];
    while steps.len() <= max_steps {
        if indexed.step_in_place(&mut queue).is_none() {
            break;
        }
        steps.push(indexed.decode(queue.iter().copied()));
    }
    let halted = steps.last().is_some_and(|q| q.len() < system.m);
    Ok(Trace {
        halt_step: halted.then(|| steps.len() - 1),
        truncated: !halted,
        steps,
    })
}

/// A validated system with symbols replaced by dense ids.
#[derive(Debug, Clone)]
pub struct IndexedSystem {
    m: usize,
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, u32>,
    rules: Vec<Vec<u32>>,
}

impl IndexedSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, id: u32) -> &Symbol {
        &self.symbols[id as usize]
    }

    pub fn id(&self, symbol: &Symbol) -> Option<u32> {
        self.index.get(symbol).copied()
    }

    pub fn production(&self, id: u32) -> &[u32] {
        &self.rules[id as usize]
    }

    pub fn encode(&self, queue: &Queue) -> Result<Vec<u32>, TagError> {
        queue
            .0
            .iter()
            .enumerate()
            .map(|(position, s)| {
                self.id(s).ok_or_else(|| TagError::UnknownSymbol {
                    symbol: s.clone(),
                    position,
                })
            })
            .collect()
    }

    pub fn decode(&self, ids: impl IntoIterator<Item = u32>) -> Queue {
        Queue(ids.into_iter().map(|id| self.symbol(id).clone()).collect())
    }

    /// Applies one transition in place. Returns the symbol read, or `None`
    /// when the queue is shorter than `m` (halted, queue untouched).
    pub fn step_in_place(&self, queue: &mut VecDeque<u32>) -> Option<u32> {
        if queue.len() < self.m {
            return None;
        }
        let head = queue[0];
        queue.drain(..self.m);
        queue.extend(self.production(head).iter().copied());
        Some(head)
    }
}
