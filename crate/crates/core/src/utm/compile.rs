//! Compilation of a binary Turing machine into a 2-tag system.
//!
//! A configuration `(Q, M, N)` is the canonical word
//! `A x (alpha x)^M B x (beta x)^N`, all symbols scoped to `Q`. Reading only
//! even positions, six passes over the word double `M` (plus the written bit),
//! halve `N`, and route on the parity of `N` into the successor's word:
//!
//! | pass | reads        | produces                                   |
//! |------|--------------|--------------------------------------------|
//! | 1    | `A`, `alpha` | `C x` or `C x c x`, `c x c x`              |
//! | 2    | `B`, `beta`  | `S`, `s`                                   |
//! | 3    | `C`, `c`     | `D1 D0`, `d1 d0`                           |
//! | 4    | `S`, `s`     | `T1 T0`, `t1 t0` (alignment picks `D1`/`D0`) |
//! | 5    | `D*`, `d*`   | successor `A x` / `x A x`, `alpha x`       |
//! | 6    | `T*`, `t*`   | successor `B x`, `beta x`                  |
//!
//! Left moves reuse the same passes on the mirrored word. A left-moving
//! state first copies its `A` half to the tail as `R x (r x)^M`, so the
//! `B` half leads and is doubled while the `R` half is halved. Its last two
//! passes write the successor in the swapped entry form
//! `B~ x (beta~ x)^N A x (alpha x)^M`, and one copy pass
//! (`B~ -> B x`, `beta~ -> beta x`) moves the leading half to the tail,
//! giving the successor's ordinary word again.
//!
//! Halting states get entry words but empty productions, so the tag system
//! dies out if run past them.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::machine::{valid_state_name, Direction, MachineError, TmConfig, TuringMachine};
use crate::tag::{IndexedSystem, Queue, RunQueue, Symbol, TagSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    A,
    X,
    Alpha,
    B,
    Beta,
    C,
    CSmall,
    S,
    SSmall,
    D1,
    D0,
    DSmall1,
    DSmall0,
    T1,
    T0,
    TSmall1,
    TSmall0,
    /// Leading symbol of the copied `A` half in a left-moving state.
    R,
    RSmall,
}

impl Role {
    pub const ALL: [Role; 19] = [
        Role::A,
        Role::X,
        Role::Alpha,
        Role::B,
        Role::Beta,
        Role::C,
        Role::CSmall,
        Role::S,
        Role::SSmall,
        Role::D1,
        Role::D0,
        Role::DSmall1,
        Role::DSmall0,
        Role::T1,
        Role::T0,
        Role::TSmall1,
        Role::TSmall0,
        Role::R,
        Role::RSmall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::A => "A",
            Role::X => "x",
            Role::Alpha => "alpha",
            Role::B => "B",
            Role::Beta => "beta",
            Role::C => "C",
            Role::CSmall => "c",
            Role::S => "S",
            Role::SSmall => "s",
            Role::D1 => "D1",
            Role::D0 => "D0",
            Role::DSmall1 => "d1",
            Role::DSmall0 => "d0",
            Role::T1 => "T1",
            Role::T0 => "T0",
            Role::TSmall1 => "t1",
            Role::TSmall0 => "t0",
            Role::R => "R",
            Role::RSmall => "r",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown role {s}"))
    }
}

impl Serialize for Role {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Role {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which entry family a canonical word belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Direct,
    Swapped,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolKey {
    pub role: Role,
    pub state: String,
    pub convention: Convention,
}

impl SymbolKey {
    pub fn direct(role: Role, state: &str) -> Self {
        SymbolKey {
            role,
            state: state.to_string(),
            convention: Convention::Direct,
        }
    }

    pub fn swapped(role: Role, state: &str) -> Self {
        SymbolKey {
            role,
            state: state.to_string(),
            convention: Convention::Swapped,
        }
    }

    /// `role_state`, with a trailing `~` for the swapped family.
    pub fn render(&self) -> String {
        let suffix = match self.convention {
            Convention::Direct => "",
            Convention::Swapped => "~",
        };
        format!("{}_{}{}", self.role, self.state, suffix)
    }

    pub fn parse(text: &str) -> Option<Self> {
        let (body, convention) = match text.strip_suffix('~') {
            Some(b) => (b, Convention::Swapped),
            None => (text, Convention::Direct),
        };
        let (role, state) = body.split_once('_')?;
        if !valid_state_name(state) {
            return None;
        }
        Some(SymbolKey {
            role: role.parse().ok()?,
            state: state.to_string(),
            convention,
        })
    }
}

/// A decoded canonical word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalForm {
    pub config: TmConfig,
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error("state {0} has no swapped entry family")]
    NoSwappedFamily(String),
    #[error("unknown state {0}")]
    UnknownState(String),
}

/// The compiled 2-tag system and its symbol table.
#[derive(Debug, Clone)]
pub struct TagProgram {
    system: TagSystem,
    indexed: IndexedSystem,
    machine: TuringMachine,
    keys: Vec<SymbolKey>,
    lookup: HashMap<SymbolKey, u32>,
    entry_heads: Vec<bool>,
}

/// One symbol-table row as written to the sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub symbol: Symbol,
    pub role: Role,
    pub state: String,
    pub convention: Convention,
}

struct Emitter<'a> {
    lookup: &'a HashMap<SymbolKey, Symbol>,
}

impl Emitter<'_> {
    fn d(&self, role: Role, state: &str) -> Symbol {
        self.lookup[&SymbolKey::direct(role, state)].clone()
    }

    fn sw(&self, role: Role, state: &str) -> Symbol {
        self.lookup[&SymbolKey::swapped(role, state)].clone()
    }
}

/// Compiles `tm` into a 2-tag system.
pub fn compile(tm: &TuringMachine) -> Result<TagProgram, CompileError> {
    // Revalidate: references must resolve even if the caller built the
    // machine from parts.
    let tm = TuringMachine::new(tm.states().to_vec(), tm.start())?;

    let mut swapped_targets = BTreeSet::new();
    for s in tm.states() {
        if let Some(q) = &s.action {
            if q.direction == Direction::Left {
                swapped_targets.insert(q.on_zero.clone());
                swapped_targets.insert(q.on_one.clone());
            }
        }
    }

    let mut keys = Vec::new();
    for s in tm.states() {
        let name = s.name.as_str();
        keys.extend([Role::A, Role::X, Role::Alpha, Role::B, Role::Beta].map(|r| SymbolKey::direct(r, name)));
        if let Some(q) = &s.action {
            if q.direction == Direction::Left {
                keys.extend([Role::R, Role::RSmall].map(|r| SymbolKey::direct(r, name)));
            }
            keys.extend(
                [
                    Role::C,
                    Role::CSmall,
                    Role::S,
                    Role::SSmall,
                    Role::D1,
                    Role::D0,
                    Role::DSmall1,
                    Role::DSmall0,
                    Role::T1,
                    Role::T0,
                    Role::TSmall1,
                    Role::TSmall0,
                ]
                .map(|r| SymbolKey::direct(r, name)),
            );
        }
        if swapped_targets.contains(name) {
            keys.extend([Role::B, Role::Beta].map(|r| SymbolKey::swapped(r, name)));
        }
    }

    let symbols: HashMap<SymbolKey, Symbol> = keys
        .iter()
        .map(|k| (k.clone(), Symbol::new(k.render()).expect("state names are symbol-safe")))
        .collect();
    let e = Emitter { lookup: &symbols };
    let mut rules: IndexMap<Symbol, Vec<Symbol>> = IndexMap::new();

    for s in tm.states() {
        let n = s.name.as_str();
        rules.insert(e.d(Role::X, n), vec![e.d(Role::X, n)]);
        let Some(q) = &s.action else {
            for role in [Role::A, Role::Alpha, Role::B, Role::Beta] {
                rules.insert(e.d(role, n), vec![]);
            }
            continue;
        };
        let x = e.d(Role::X, n);
        let (double_lead, double_pair, halve_lead, halve_pair) = match q.direction {
            Direction::Right => (Role::A, Role::Alpha, Role::B, Role::Beta),
            Direction::Left => (Role::B, Role::Beta, Role::R, Role::RSmall),
        };
        if q.direction == Direction::Left {
            // copy the A half behind the B half
            rules.insert(e.d(Role::A, n), vec![e.d(Role::R, n), x.clone()]);
            rules.insert(e.d(Role::Alpha, n), vec![e.d(Role::RSmall, n), x.clone()]);
        }
        let c = e.d(Role::CSmall, n);
        let lead = if q.write == 1 {
            vec![e.d(Role::C, n), x.clone(), c.clone(), x.clone()]
        } else {
            vec![e.d(Role::C, n), x.clone()]
        };
        rules.insert(e.d(double_lead, n), lead);
        rules.insert(e.d(double_pair, n), vec![c.clone(), x.clone(), c, x.clone()]);
        rules.insert(e.d(halve_lead, n), vec![e.d(Role::S, n)]);
        rules.insert(e.d(halve_pair, n), vec![e.d(Role::SSmall, n)]);
        rules.insert(e.d(Role::C, n), vec![e.d(Role::D1, n), e.d(Role::D0, n)]);
        rules.insert(e.d(Role::CSmall, n), vec![e.d(Role::DSmall1, n), e.d(Role::DSmall0, n)]);
        rules.insert(e.d(Role::S, n), vec![e.d(Role::T1, n), e.d(Role::T0, n)]);
        rules.insert(e.d(Role::SSmall, n), vec![e.d(Role::TSmall1, n), e.d(Role::TSmall0, n)]);

        for (branch, target) in [(1, q.on_one.as_str()), (0, q.on_zero.as_str())] {
            let tx = e.d(Role::X, target);
            // first half of the successor comes from D/d, second from T/t
            let (first_lead, first_pair, second_lead, second_pair) = match q.direction {
                Direction::Right => (
                    e.d(Role::A, target),
                    e.d(Role::Alpha, target),
                    e.d(Role::B, target),
                    e.d(Role::Beta, target),
                ),
                Direction::Left => (
                    e.sw(Role::B, target),
                    e.sw(Role::Beta, target),
                    e.d(Role::A, target),
                    e.d(Role::Alpha, target),
                ),
            };
            let (d_lead, d_pair, t_lead, t_pair) = if branch == 1 {
                (Role::D1, Role::DSmall1, Role::T1, Role::TSmall1)
            } else {
                (Role::D0, Role::DSmall0, Role::T0, Role::TSmall0)
            };
            let d_word = if branch == 1 {
                vec![first_lead, tx.clone()]
            } else {
                vec![tx.clone(), first_lead, tx.clone()]
            };
            rules.insert(e.d(d_lead, n), d_word);
            rules.insert(e.d(d_pair, n), vec![first_pair, tx.clone()]);
            rules.insert(e.d(t_lead, n), vec![second_lead, tx.clone()]);
            rules.insert(e.d(t_pair, n), vec![second_pair, tx]);
        }
    }
    for name in &swapped_targets {
        let x = e.d(Role::X, name);
        rules.insert(e.sw(Role::B, name), vec![e.d(Role::B, name), x.clone()]);
        rules.insert(e.sw(Role::Beta, name), vec![e.d(Role::Beta, name), x]);
    }

    let alphabet: Vec<Symbol> = keys.iter().map(|k| symbols[k].clone()).collect();
    let rules: IndexMap<Symbol, Vec<Symbol>> = alphabet
        .iter()
        .map(|s| (s.clone(), rules.shift_remove(s).expect("every symbol gets a rule")))
        .collect();
    let system = TagSystem { m: 2, alphabet, rules };
    let indexed = system.indexed().expect("compiled system is closed");
    TagProgram::assemble(system, indexed, tm, keys)
}

impl TagProgram {
    fn assemble(
        system: TagSystem,
        indexed: IndexedSystem,
        machine: TuringMachine,
        keys: Vec<SymbolKey>,
    ) -> Result<Self, CompileError> {
        let lookup: HashMap<SymbolKey, u32> = keys.iter().enumerate().map(|(i, k)| (k.clone(), i as u32)).collect();
        let entry_heads = keys
            .iter()
            .map(|k| {
                matches!(
                    (k.role, k.convention),
                    (Role::A, Convention::Direct) | (Role::B, Convention::Swapped)
                )
            })
            .collect();
        Ok(TagProgram {
            system,
            indexed,
            machine,
            keys,
            lookup,
            entry_heads,
        })
    }

    pub fn system(&self) -> &TagSystem {
        &self.system
    }

    pub fn indexed(&self) -> &IndexedSystem {
        &self.indexed
    }

    pub fn machine(&self) -> &TuringMachine {
        &self.machine
    }

    pub fn key(&self, id: u32) -> &SymbolKey {
        &self.keys[id as usize]
    }

    pub fn id(&self, key: &SymbolKey) -> Option<u32> {
        self.lookup.get(key).copied()
    }

    pub fn symbol(&self, key: &SymbolKey) -> Option<&Symbol> {
        self.id(key).map(|id| self.indexed.symbol(id))
    }

    /// Flags, per symbol id, the heads that can start a canonical word.
    pub fn entry_heads(&self) -> &[bool] {
        &self.entry_heads
    }

    pub fn has_swapped_family(&self, state: &str) -> bool {
        self.lookup.contains_key(&SymbolKey::swapped(Role::B, state))
    }

    /// Symbol-table rows in alphabet order.
    pub fn symbol_table(&self) -> Vec<SymbolEntry> {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, k)| SymbolEntry {
                symbol: self.indexed.symbol(i as u32).clone(),
                role: k.role,
                state: k.state.clone(),
                convention: k.convention,
            })
            .collect()
    }

    fn ids(&self, cfg: &TmConfig, convention: Convention) -> Result<[u32; 6], CompileError> {
        let n = cfg.state.as_str();
        if self.machine.state(n).is_none() {
            return Err(CompileError::UnknownState(n.to_string()));
        }
        let get = |k: SymbolKey| self.id(&k).ok_or_else(|| CompileError::NoSwappedFamily(n.to_string()));
        let x = get(SymbolKey::direct(Role::X, n))?;
        let a = get(SymbolKey::direct(Role::A, n))?;
        let alpha = get(SymbolKey::direct(Role::Alpha, n))?;
        Ok(match convention {
            Convention::Direct => [
                a,
                alpha,
                get(SymbolKey::direct(Role::B, n))?,
                get(SymbolKey::direct(Role::Beta, n))?,
                x,
                0,
            ],
            Convention::Swapped => [
                get(SymbolKey::swapped(Role::B, n))?,
                get(SymbolKey::swapped(Role::Beta, n))?,
                a,
                alpha,
                x,
                1,
            ],
        })
    }

    /// Canonical word in run-length form.
    pub fn encode_runs(&self, cfg: &TmConfig, convention: Convention) -> Result<RunQueue, CompileError> {
        let [lead1, pair1, lead2, pair2, x, swapped] = self.ids(cfg, convention)?;
        let (first, second) = if swapped == 1 {
            (cfg.right, cfg.left)
        } else {
            (cfg.left, cfg.right)
        };
        let mut q = RunQueue::new();
        q.push_run(&[lead1, x], 1);
        q.push_run(&[pair1, x], first);
        q.push_run(&[lead2, x], 1);
        q.push_run(&[pair2, x], second);
        Ok(q)
    }

    fn decode_runs_slice(&self, runs: &[(&[u32], u64)]) -> Option<CanonicalForm> {
        let mut cur = Cursor::new(runs);
        let head = self.key(cur.peek()?);
        let state = head.state.as_str();
        let convention = match (head.role, head.convention) {
            (Role::A, Convention::Direct) => Convention::Direct,
            (Role::B, Convention::Swapped) => Convention::Swapped,
            _ => return None,
        };
        let [lead1, pair1, lead2, pair2, x, _] = self.ids(&TmConfig::new(state, 0, 0), convention).ok()?;
        if !(cur.expect(lead1) && cur.expect(x)) {
            return None;
        }
        let first = cur.count_pairs(pair1, x);
        if !(cur.expect(lead2) && cur.expect(x)) {
            return None;
        }
        let second = cur.count_pairs(pair2, x);
        if !cur.at_end() {
            return None;
        }
        let (left, right) = match convention {
            Convention::Direct => (first, second),
            Convention::Swapped => (second, first),
        };
        Some(CanonicalForm {
            config: TmConfig::new(state, left, right),
            convention,
        })
    }

    pub fn decode_runs(&self, queue: &RunQueue) -> Option<CanonicalForm> {
        let runs: Vec<(&[u32], u64)> = queue.runs().collect();
        self.decode_runs_slice(&runs)
    }

    pub fn decode_ids(&self, ids: &VecDeque<u32>) -> Option<CanonicalForm> {
        let (a, b) = ids.as_slices();
        self.decode_runs_slice(&[(a, 1), (b, 1)])
    }
}

/// Canonical word of `cfg` in the direct family.
pub fn encode_config(prog: &TagProgram, cfg: &TmConfig) -> Result<Queue, CompileError> {
    encode_config_as(prog, cfg, Convention::Direct)
}

pub fn encode_config_as(prog: &TagProgram, cfg: &TmConfig, convention: Convention) -> Result<Queue, CompileError> {
    let runs = prog.encode_runs(cfg, convention)?;
    Ok(prog.indexed.decode(runs.symbols()))
}

/// Recovers `(state, M, N)` from a canonical word, `None` for anything else.
pub fn decode_word(prog: &TagProgram, queue: &Queue) -> Option<CanonicalForm> {
    let ids: VecDeque<u32> = queue
        .cells()
        .iter()
        .map(|s| prog.indexed.id(s))
        .collect::<Option<_>>()?;
    prog.decode_ids(&ids)
}

/// Symbol-by-symbol walk over a run-length sequence that skips whole runs
/// when they match a repeated pair.
#[derive(Clone)]
struct Cursor<'a> {
    runs: &'a [(&'a [u32], u64)],
    run: usize,
    rep: u64,
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn new(runs: &'a [(&'a [u32], u64)]) -> Self {
        let mut c = Cursor {
            runs,
            run: 0,
            rep: 0,
            offset: 0,
        };
        c.normalize();
        c
    }

    fn normalize(&mut self) {
        while self.run < self.runs.len() {
            let (word, reps) = self.runs[self.run];
            if word.is_empty() || self.rep >= reps {
                self.run += 1;
                self.rep = 0;
                self.offset = 0;
            } else if self.offset >= word.len() {
                self.rep += 1;
                self.offset = 0;
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<u32> {
        self.runs.get(self.run).map(|(w, _)| w[self.offset])
    }

    fn expect(&mut self, symbol: u32) -> bool {
        if self.peek() != Some(symbol) {
            return false;
        }
        self.offset += 1;
        self.normalize();
        true
    }

    fn at_end(&self) -> bool {
        self.run >= self.runs.len()
    }

    fn count_pairs(&mut self, a: u32, b: u32) -> u64 {
        let mut n = 0;
        loop {
            if self.offset == 0 && self.run < self.runs.len() && self.runs[self.run].0 == [a, b] {
                n += self.runs[self.run].1 - self.rep;
                self.rep = self.runs[self.run].1;
                self.normalize();
                continue;
            }
            let mut probe = self.clone();
            if probe.expect(a) && probe.expect(b) {
                *self = probe;
                n += 1;
            } else {
                return n;
            }
        }
    }
}
