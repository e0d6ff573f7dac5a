//! Seeded benchmark instances.
//!
//! Instance `index` of a dataset draws from ChaCha20 streams of `cfg.seed`
//! (see [`crate::rng`]). The stream id is
//! `(index << 16) | (attempt << 1) | field`, where `field` is 0 for the
//! production rules and 1 for the initial queue, and `attempt` counts
//! redraws under the optional `min_steps` filter (always 0 without it).
//!
//! Rules are drawn symbol by symbol in alphabet order: a length uniform in
//! `rule_len_min..=rule_len_max`, then that many symbols uniform over the
//! alphabet. The initial queue is a length uniform in
//! `init_len_min..=init_len_max` followed by its symbols.

use std::io::{BufRead, Write};

use indexmap::IndexMap;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tag::{run, validate_system, Queue, Symbol, TagError, TagSystem, Trace};

const ROMAN: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const GREEK: &str = "αβγδεζηθικλμνξοπρστυφχψω";
const SPECIAL: &str = "@#$%&*+=!?^~|;/";
const NUMERAL_MAX: usize = 99;
const MAX_ATTEMPTS: u64 = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphabetKind {
    Roman,
    Numeral,
    Greek,
    Special,
    Custom(Vec<Symbol>),
}

impl AlphabetKind {
    pub fn capacity(&self) -> usize {
        match self {
            AlphabetKind::Roman => ROMAN.chars().count(),
            AlphabetKind::Numeral => NUMERAL_MAX,
            AlphabetKind::Greek => GREEK.chars().count(),
            AlphabetKind::Special => SPECIAL.chars().count(),
            AlphabetKind::Custom(symbols) => symbols.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlphabetKind::Roman => "roman",
            AlphabetKind::Numeral => "numeral",
            AlphabetKind::Greek => "greek",
            AlphabetKind::Special => "special",
            AlphabetKind::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("alphabet {kind} has only {available} symbols, {requested} requested")]
    AlphabetTooLarge {
        kind: &'static str,
        available: usize,
        requested: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no instance {index} reached {min_steps} steps in {attempts} attempts")]
    FilterExhausted {
        index: u64,
        min_steps: usize,
        attempts: u64,
    },
    #[error(transparent)]
    Tag(#[from] TagError),
}

/// The first `size` symbols of the kind's canonical ordering.
pub fn alphabet(kind: &AlphabetKind, size: usize) -> Result<Vec<Symbol>, GenError> {
    if size == 0 {
        return Err(GenError::EmptyAlphabet);
    }
    if size > kind.capacity() {
        return Err(GenError::AlphabetTooLarge {
            kind: kind.name(),
            available: kind.capacity(),
            requested: size,
        });
    }
    let from_chars = |s: &str| {
        s.chars()
            .take(size)
            .map(|c| Symbol::new(c.to_string()).expect("fixed repertoire"))
            .collect()
    };
    Ok(match kind {
        AlphabetKind::Roman => from_chars(ROMAN),
        AlphabetKind::Greek => from_chars(GREEK),
        AlphabetKind::Special => from_chars(SPECIAL),
        AlphabetKind::Numeral => (1..=size)
            .map(|i| Symbol::new(i.to_string()).expect("digits"))
            .collect(),
        AlphabetKind::Custom(symbols) => symbols[..size].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub m: usize,
    pub alphabet_kind: AlphabetKind,
    pub alphabet_size: usize,
    pub rule_len_min: usize,
    pub rule_len_max: usize,
    pub init_len_min: usize,
    pub init_len_max: usize,
    pub max_steps: usize,
    pub count: usize,
    pub seed: u64,
    /// Redraw instances whose trace halts before this many steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_steps: Option<usize>,
}

impl GenConfig {
    /// m = 2, five Roman letters, rules of length 1..=5, initial queues of
    /// length 2..=9, 30 steps, 100 instances.
    pub fn standard(seed: u64) -> Self {
        GenConfig {
            m: 2,
            alphabet_kind: AlphabetKind::Roman,
            alphabet_size: 5,
            rule_len_min: 1,
            rule_len_max: 5,
            init_len_min: 2,
            init_len_max: 9,
            max_steps: 30,
            count: 100,
            seed,
            min_steps: None,
        }
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        let cfg: GenConfig = toml::from_str(text).map_err(|e| GenError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: &str| Err(GenError::Config(msg.to_string()));
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.rule_len_min == 0 || self.init_len_min == 0 {
            return bad("rule and init lengths must be at least 1");
        }
        if self.rule_len_min > self.rule_len_max {
            return bad("rule_len_min exceeds rule_len_max");
        }
        if self.init_len_min > self.init_len_max {
            return bad("init_len_min exceeds init_len_max");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if self.count == 0 {
            return bad("count must be at least 1");
        }
        if let Some(min) = self.min_steps {
            if min > self.max_steps {
                return bad("min_steps exceeds max_steps");
            }
        }
        let symbols = alphabet(&self.alphabet_kind, self.alphabet_size)?;
        let mut probe = TagSystem::from_rules(self.m, symbols.iter().map(|s| (s.clone(), Vec::new())));
        probe.alphabet = symbols;
        if let Some(v) = validate_system(&probe).first() {
            return Err(GenError::Config(v.to_string()));
        }
        Ok(())
    }
}

pub fn instance_id(seed: u64, index: u64) -> String {
    format!("tm-{seed}-{index:05}")
}

fn stream_id(index: u64, attempt: u64, field: u64) -> u64 {
    (index << 16) | (attempt << 1) | field
}

fn pick(r: &mut impl RngCore, symbols: &[Symbol], len: usize) -> Vec<Symbol> {
    (0..len)
        .map(|_| symbols[rng::below(r, symbols.len() as u64) as usize].clone())
        .collect()
}

fn sample_attempt(cfg: &GenConfig, symbols: &[Symbol], index: u64, attempt: u64) -> (TagSystem, Queue) {
    let mut rules_rng = rng::stream(cfg.seed, stream_id(index, attempt, 0));
    let rules = symbols.iter().map(|s| {
        let len = rng::between(&mut rules_rng, cfg.rule_len_min as u64, cfg.rule_len_max as u64) as usize;
        (s.clone(), pick(&mut rules_rng, symbols, len))
    });
    let system = TagSystem::from_rules(cfg.m, rules.collect::<Vec<_>>());
    let mut init_rng = rng::stream(cfg.seed, stream_id(index, attempt, 1));
    let len = rng::between(&mut init_rng, cfg.init_len_min as u64, cfg.init_len_max as u64) as usize;
    (system, Queue(pick(&mut init_rng, symbols, len)))
}

/// The system and initial queue of instance `index`, before any filtering.
pub fn sample_system(cfg: &GenConfig, index: u64) -> Result<(TagSystem, Queue), GenError> {
    cfg.validate()?;
    let symbols = alphabet(&cfg.alphabet_kind, cfg.alphabet_size)?;
    Ok(sample_attempt(cfg, &symbols, index, 0))
}

/// One dataset row: a system, its initial queue and the reference trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkInstance {
    pub id: String,
    pub system: TagSystem,
    pub init: Queue,
    pub max_steps: usize,
    pub trace: Trace,
}

impl BenchmarkInstance {
    pub fn new(id: impl Into<String>, system: TagSystem, init: Queue, max_steps: usize) -> Result<Self, TagError> {
        let trace = run(&system, &init, max_steps)?;
        Ok(BenchmarkInstance {
            id: id.into(),
            system,
            init,
            max_steps,
            trace,
        })
    }

    pub fn halted(&self) -> bool {
        self.trace.halt_step.is_some()
    }

    /// Steps that have a reference queue: the halt step, or `max_steps`.
    pub fn horizon(&self) -> usize {
        self.trace.halt_step.unwrap_or(self.max_steps).min(self.max_steps)
    }
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<Vec<BenchmarkInstance>, GenError> {
    cfg.validate()?;
    let symbols = alphabet(&cfg.alphabet_kind, cfg.alphabet_size)?;
    (0..cfg.count as u64)
        .map(|index| {
            let id = instance_id(cfg.seed, index);
            for attempt in 0..MAX_ATTEMPTS {
                let (system, init) = sample_attempt(cfg, &symbols, index, attempt);
                let instance = BenchmarkInstance::new(id.clone(), system, init, cfg.max_steps)?;
                let long_enough = match (cfg.min_steps, instance.trace.halt_step) {
                    (Some(min), Some(h)) => h >= min,
                    _ => true,
                };
                if long_enough {
                    return Ok(instance);
                }
            }
            Err(GenError::FilterExhausted {
                index,
                min_steps: cfg.min_steps.unwrap_or(0),
                attempts: MAX_ATTEMPTS,
            })
        })
        .collect()
}

/// The dataset line layout. Field order is part of the format.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    m: usize,
    alphabet: Vec<Symbol>,
    rules: IndexMap<Symbol, Vec<Symbol>>,
    init: Queue,
    max_steps: usize,
    trace: Vec<Queue>,
    halted: bool,
    halt_step: Option<usize>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line} ({id}): stored trace differs from recomputed trace")]
    TraceMismatch { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn to_json_line(instance: &BenchmarkInstance) -> String {
    let record = Record {
        id: instance.id.clone(),
        m: instance.system.m,
        alphabet: instance.system.alphabet.clone(),
        rules: instance.system.rules.clone(),
        init: instance.init.clone(),
        max_steps: instance.max_steps,
        trace: instance.trace.steps.clone(),
        halted: instance.halted(),
        halt_step: instance.trace.halt_step,
    };
    serde_json::to_string(&record).expect("plain data serializes")
}

pub fn write_dataset(mut out: impl Write, instances: &[BenchmarkInstance]) -> std::io::Result<()> {
    for instance in instances {
        writeln!(out, "{}", to_json_line(instance))?;
    }
    out.flush()
}

/// Parses one dataset line and checks its trace against a fresh run.
pub fn from_json_line(text: &str, line: usize) -> Result<BenchmarkInstance, DatasetError> {
    let format = |message: String| DatasetError::Format { line, message };
    let record: Record = serde_json::from_str(text).map_err(|e| format(e.to_string()))?;
    let system = TagSystem {
        m: record.m,
        alphabet: record.alphabet,
        rules: record.rules,
    };
    let instance =
        BenchmarkInstance::new(record.id, system, record.init, record.max_steps).map_err(|e| format(e.to_string()))?;
    if instance.trace.steps != record.trace
        || instance.trace.halt_step != record.halt_step
        || instance.halted() != record.halted
    {
        return Err(DatasetError::TraceMismatch { line, id: instance.id });
    }
    Ok(instance)
}

/// Reads a JSON-lines dataset. Blank lines are skipped.
pub fn read_dataset(input: impl BufRead) -> Result<Vec<BenchmarkInstance>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        out.push(from_json_line(&line_text, i + 1)?);
    }
    Ok(out)
}
