//! Running compiled programs one machine step at a time and checking them
//! against direct simulation.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use super::compile::{compile, decode_word, CanonicalForm, CompileError, Convention, TagProgram};
use super::machine::{tm_step, TmConfig, TmStep, TuringMachine};
use crate::tag::{Queue, RunQueue, StopReason, TagError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycleError {
    #[error("start word is not canonical")]
    NotCanonical,
    #[error("no canonical word within {budget} tag steps")]
    BudgetExhausted { budget: u64 },
    #[error("tag system halted after {after} steps before reaching a canonical word")]
    TagHalted { after: u64 },
    #[error(transparent)]
    Tag(#[from] TagError),
}

/// Result of one machine step carried out by the tag system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub word: Queue,
    pub form: CanonicalForm,
    pub tag_steps: u64,
}

/// Steps the tag system from a canonical word until the next canonical
/// word. A swapped-entry start is first copied into its direct form, which
/// belongs to the same cycle.
pub fn run_cycle(prog: &TagProgram, word: &Queue, budget: u64) -> Result<Cycle, CycleError> {
    run_cycle_observed(prog, word, budget, |_| {})
}

/// As [`run_cycle`], calling `observe` with the queue before every tag step.
pub fn run_cycle_observed(
    prog: &TagProgram,
    word: &Queue,
    budget: u64,
    mut observe: impl FnMut(&VecDeque<u32>),
) -> Result<Cycle, CycleError> {
    let start = decode_word(prog, word).ok_or(CycleError::NotCanonical)?;
    let system = prog.indexed();
    let mut queue: VecDeque<u32> = system.encode(word)?.into();
    let mut awaiting_rotation = start.convention == Convention::Swapped;
    let mut steps = 0u64;
    loop {
        if steps == budget {
            return Err(CycleError::BudgetExhausted { budget });
        }
        observe(&queue);
        if system.step_in_place(&mut queue).is_none() {
            return Err(CycleError::TagHalted { after: steps });
        }
        steps += 1;
        let Some(&head) = queue.front() else { continue };
        if !prog.entry_heads()[head as usize] {
            continue;
        }
        if let Some(form) = prog.decode_ids(&queue) {
            if awaiting_rotation && form.convention == Convention::Direct {
                awaiting_rotation = false;
                continue;
            }
            return Ok(Cycle {
                word: system.decode(queue.iter().copied()),
                form,
                tag_steps: steps,
            });
        }
    }
}

/// [`run_cycle`] on a run-length queue, updated in place. Returns the form
/// reached and the number of ordinary tag steps it took.
pub fn run_cycle_runs(
    prog: &TagProgram,
    queue: &mut RunQueue,
    budget: u64,
) -> Result<(CanonicalForm, u64), CycleError> {
    let start = prog.decode_runs(queue).ok_or(CycleError::NotCanonical)?;
    let mut awaiting_rotation = start.convention == Convention::Swapped;
    let mut steps = 0u64;
    loop {
        let adv = queue.advance(prog.indexed(), budget - steps, prog.entry_heads());
        steps += adv.steps;
        match adv.stop {
            StopReason::Halted => return Err(CycleError::TagHalted { after: steps }),
            StopReason::Budget => return Err(CycleError::BudgetExhausted { budget }),
            StopReason::Watched => {
                if let Some(form) = prog.decode_runs(queue) {
                    if awaiting_rotation && form.convention == Convention::Direct {
                        awaiting_rotation = false;
                        continue;
                    }
                    return Ok((form, steps));
                }
            }
        }
    }
}

/// Generous per-cycle step bound; a cycle takes at most about 7N + 3M + 9 steps.
pub fn cycle_budget(cfg: &TmConfig) -> u64 {
    cfg.left.saturating_add(cfg.right).saturating_mul(8).saturating_add(32)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Divergence {
    pub tm_step: usize,
    pub expected: Option<TmConfig>,
    pub actual: Option<TmConfig>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub passed: bool,
    /// Machine steps compared.
    pub tm_steps: usize,
    /// Step after which the machine sat in a halting state, if it did.
    pub halted_at: Option<usize>,
    pub tag_steps: u64,
    pub divergence: Option<Divergence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Runs direct simulation and the compiled tag system side by side for up
/// to `steps` machine steps, comparing every decoded configuration.
pub fn verify_equivalence(
    tm: &TuringMachine,
    cfg: &TmConfig,
    steps: usize,
) -> Result<EquivalenceReport, EquivalenceError> {
    let prog = compile(tm)?;
    Ok(verify_compiled(&prog, cfg, steps))
}

pub fn verify_compiled(prog: &TagProgram, cfg: &TmConfig, steps: usize) -> EquivalenceReport {
    let tm = prog.machine();
    let mut report = EquivalenceReport {
        passed: true,
        tm_steps: 0,
        halted_at: None,
        tag_steps: 0,
        divergence: None,
    };
    let fail = |report: &mut EquivalenceReport, d: Divergence| {
        report.passed = false;
        report.divergence = Some(d);
    };
    let mut queue = match prog.encode_runs(cfg, Convention::Direct) {
        Ok(q) => q,
        Err(e) => {
            fail(
                &mut report,
                Divergence {
                    tm_step: 0,
                    expected: Some(cfg.clone()),
                    actual: None,
                    detail: e.to_string(),
                },
            );
            return report;
        }
    };
    if tm.state(&cfg.state).is_some_and(|s| s.is_halting()) {
        report.halted_at = Some(0);
        return report;
    }
    let mut current = cfg.clone();
    for k in 1..=steps {
        let next = match tm_step(tm, &current) {
            Ok(TmStep::Next(next)) => next,
            Ok(TmStep::Halted) => {
                report.halted_at = Some(k - 1);
                break;
            }
            Err(e) => {
                fail(
                    &mut report,
                    Divergence {
                        tm_step: k,
                        expected: None,
                        actual: None,
                        detail: e.to_string(),
                    },
                );
                break;
            }
        };
        match run_cycle_runs(prog, &mut queue, cycle_budget(&current)) {
            Ok((form, n)) => {
                report.tag_steps += n;
                report.tm_steps = k;
                if form.config != next {
                    fail(
                        &mut report,
                        Divergence {
                            tm_step: k,
                            expected: Some(next),
                            actual: Some(form.config),
                            detail: "decoded configuration differs".into(),
                        },
                    );
                    break;
                }
            }
            Err(e) => {
                fail(
                    &mut report,
                    Divergence {
                        tm_step: k,
                        expected: Some(next),
                        actual: None,
                        detail: format!("from {current}: {e}"),
                    },
                );
                break;
            }
        }
        let halting = tm.state(&next.state).is_some_and(|s| s.is_halting());
        current = next;
        if halting {
            report.halted_at = Some(k);
            break;
        }
    }
    report
}
