//! Binary Turing machines in quadruple form and their direct simulation.
//!
//! Each working state `Q` carries `(write, direction, next_on_0, next_on_1)`:
//! write the bit, move the head, read the new cell and branch on it. A
//! configuration is `(Q, M, N)` where `M` and `N` are the tape halves left
//! and right of the head read as binary numbers, least significant bit next
//! to the head.
//!
//! Text format, one record per line (`#` starts a comment):
//!
//! ```text
//! start Q0
//! halt H
//! Q0 1 R Q0 Q1
//! Q1 0 L H Q0
//! ```
//!
//! A state record is `name write(0|1) direction(L|R) next_on_0 next_on_1`.
//! `halt` lists one or more halting states and may appear several times.
//! State names use ASCII letters, digits, `-` and `.`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Left => "L",
            Direction::Right => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadruple {
    pub write: u8,
    pub direction: Direction,
    pub on_zero: String,
    pub on_one: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDef {
    pub name: String,
    /// `None` marks a halting state.
    pub action: Option<Quadruple>,
}

impl StateDef {
    pub fn working(name: &str, write: u8, direction: Direction, on_zero: &str, on_one: &str) -> Self {
        StateDef {
            name: name.to_string(),
            action: Some(Quadruple {
                write,
                direction,
                on_zero: on_zero.to_string(),
                on_one: on_one.to_string(),
            }),
        }
    }

    pub fn halting(name: &str) -> Self {
        StateDef {
            name: name.to_string(),
            action: None,
        }
    }

    pub fn is_halting(&self) -> bool {
        self.action.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("state {0:?} is defined more than once")]
    DuplicateState(String),
    #[error("invalid state name {0:?}")]
    InvalidName(String),
    #[error("state {from} refers to undefined state {target:?}")]
    UndefinedState { from: String, target: String },
    #[error("start state {0:?} is not defined")]
    UndefinedStart(String),
    #[error("state {0} writes a symbol other than 0 or 1")]
    InvalidWrite(String),
    #[error("machine has no states")]
    Empty,
}

/// A validated machine: names are unique and every reference resolves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    states: Vec<StateDef>,
    start: usize,
    index: HashMap<String, usize>,
}

pub(crate) fn valid_state_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
}

impl TuringMachine {
    pub fn new(states: Vec<StateDef>, start: &str) -> Result<Self, MachineError> {
        if states.is_empty() {
            return Err(MachineError::Empty);
        }
        let mut index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if !valid_state_name(&s.name) {
                return Err(MachineError::InvalidName(s.name.clone()));
            }
            if index.insert(s.name.clone(), i).is_some() {
                return Err(MachineError::DuplicateState(s.name.clone()));
            }
        }
        for s in &states {
            if let Some(q) = &s.action {
                if q.write > 1 {
                    return Err(MachineError::InvalidWrite(s.name.clone()));
                }
                for target in [&q.on_zero, &q.on_one] {
                    if !index.contains_key(target) {
                        return Err(MachineError::UndefinedState {
                            from: s.name.clone(),
                            target: target.clone(),
                        });
                    }
                }
            }
        }
        let start = *index
            .get(start)
            .ok_or_else(|| MachineError::UndefinedStart(start.to_string()))?;
        Ok(TuringMachine { states, start, index })
    }

    pub fn states(&self) -> &[StateDef] {
        &self.states
    }

    pub fn start(&self) -> &str {
        &self.states[self.start].name
    }

    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.index.get(name).map(|&i| &self.states[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Parses the line format documented at the module level.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut states = Vec::new();
        let mut halting = Vec::new();
        let mut start = None;
        let mut defined_at: HashMap<String, usize> = HashMap::new();
        let mut references: Vec<(usize, String)> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ParseError { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "start" => {
                    if fields.len() != 2 {
                        return Err(err("expected `start <state>`".into()));
                    }
                    if start.is_some() {
                        return Err(err("start state given twice".into()));
                    }
                    start = Some((line_no, fields[1].to_string()));
                }
                "halt" => {
                    if fields.len() < 2 {
                        return Err(err("expected `halt <state> ...`".into()));
                    }
                    for name in &fields[1..] {
                        if defined_at.insert(name.to_string(), line_no).is_some() {
                            return Err(err(format!("state {name} is defined more than once")));
                        }
                        halting.push(StateDef::halting(name));
                    }
                }
                name => {
                    if fields.len() != 5 {
                        return Err(err(
                            "expected `<state> <write 0|1> <L|R> <next_on_0> <next_on_1>`".into()
                        ));
                    }
                    let write = match fields[1] {
                        "0" => 0,
                        "1" => 1,
                        other => return Err(err(format!("write symbol must be 0 or 1, got {other}"))),
                    };
                    let direction = match fields[2] {
                        "L" | "l" => Direction::Left,
                        "R" | "r" => Direction::Right,
                        other => return Err(err(format!("direction must be L or R, got {other}"))),
                    };
                    if defined_at.insert(name.to_string(), line_no).is_some() {
                        return Err(err(format!("state {name} is defined more than once")));
                    }
                    references.push((line_no, fields[3].to_string()));
                    references.push((line_no, fields[4].to_string()));
                    states.push(StateDef::working(name, write, direction, fields[3], fields[4]));
                }
            }
        }

        for (line, target) in &references {
            if !defined_at.contains_key(target) {
                return Err(ParseError {
                    line: *line,
                    message: format!("undefined state {target}"),
                });
            }
        }
        let (start_line, start) = match start {
            Some(s) => s,
            None => match states.first() {
                Some(first) => (0, first.name.clone()),
                None => {
                    return Err(ParseError {
                        line: 0,
                        message: "no states defined".into(),
                    })
                }
            },
        };
        if !defined_at.contains_key(&start) {
            return Err(ParseError {
                line: start_line,
                message: format!("undefined state {start}"),
            });
        }
        states.extend(halting);
        TuringMachine::new(states, &start).map_err(|e| {
            let line = match &e {
                MachineError::InvalidName(n) | MachineError::DuplicateState(n) => {
                    defined_at.get(n).copied().unwrap_or(0)
                }
                _ => 0,
            };
            ParseError {
                line,
                message: e.to_string(),
            }
        })
    }

    /// Renders the machine in the line format accepted by [`TuringMachine::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("start {}\n", self.start());
        let halting: Vec<&str> = self
            .states
            .iter()
            .filter(|s| s.is_halting())
            .map(|s| s.name.as_str())
            .collect();
        if !halting.is_empty() {
            out.push_str(&format!("halt {}\n", halting.join(" ")));
        }
        for s in &self.states {
            if let Some(q) = &s.action {
                out.push_str(&format!(
                    "{} {} {} {} {}\n",
                    s.name, q.write, q.direction, q.on_zero, q.on_one
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Instantaneous description `(state, M, N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TmConfig {
    pub state: String,
    /// Tape left of the head, least significant bit nearest the head.
    pub left: u64,
    /// Tape right of the head, least significant bit nearest the head.
    pub right: u64,
}

impl TmConfig {
    pub fn new(state: &str, left: u64, right: u64) -> Self {
        TmConfig {
            state: state.to_string(),
            left,
            right,
        }
    }
}

impl fmt::Display for TmConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, M={}, N={})", self.state, self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TmStep {
    Next(TmConfig),
    Halted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("tape counter overflow in state {0}")]
    Overflow(String),
}

/// One machine step on the counter representation.
///
/// Moving right: `M' = 2M + S`, `N' = N / 2`, branch on `N mod 2`.
/// Moving left is the mirror image with `M` and `N` exchanged.
pub fn tm_step(tm: &TuringMachine, cfg: &TmConfig) -> Result<TmStep, StepError> {
    let state = tm
        .state(&cfg.state)
        .ok_or_else(|| StepError::UnknownState(cfg.state.clone()))?;
    let Some(q) = &state.action else {
        return Ok(TmStep::Halted);
    };
    let (grow, shrink) = match q.direction {
        Direction::Right => (cfg.left, cfg.right),
        Direction::Left => (cfg.right, cfg.left),
    };
    let grown = grow
        .checked_mul(2)
        .and_then(|g| g.checked_add(q.write as u64))
        .ok_or_else(|| StepError::Overflow(cfg.state.clone()))?;
    let next = if shrink % 2 == 1 { &q.on_one } else { &q.on_zero };
    let (left, right) = match q.direction {
        Direction::Right => (grown, shrink / 2),
        Direction::Left => (shrink / 2, grown),
    };
    Ok(TmStep::Next(TmConfig {
        state: next.clone(),
        left,
        right,
    }))
}
