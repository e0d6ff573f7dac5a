//! Seeded random machines and configurations for equivalence fuzzing.

use rand_core::RngCore;
use serde::Serialize;

use super::compile::{compile, CompileError};
use super::cycle::{verify_compiled, EquivalenceReport};
use super::machine::{Direction, StateDef, TmConfig, TuringMachine};
use crate::rng;

/// A machine with `working` states `Q0..`, one halting state `H`, and at
/// least one state moving in each direction when `working >= 2`.
pub fn random_machine(rng: &mut impl RngCore, working: usize) -> TuringMachine {
    assert!(working >= 1);
    let names: Vec<String> = (0..working).map(|i| format!("Q{i}")).chain(["H".to_string()]).collect();
    let pick = |rng: &mut dyn RngCore| names[rng::below(rng, names.len() as u64) as usize].clone();
    let mut states: Vec<StateDef> = (0..working)
        .map(|i| {
            let write = rng::below(rng, 2) as u8;
            let direction = if rng::below(rng, 2) == 0 {
                Direction::Left
            } else {
                Direction::Right
            };
            let on_zero = pick(rng);
            let on_one = pick(rng);
            StateDef::working(&names[i], write, direction, &on_zero, &on_one)
        })
        .collect();
    if working >= 2 {
        let dirs: Vec<Direction> = states
            .iter()
            .filter_map(|s| s.action.as_ref().map(|q| q.direction))
            .collect();
        if dirs.iter().all(|d| *d == dirs[0]) {
            let last = states[working - 1].action.as_mut().expect("working state");
            last.direction = match last.direction {
                Direction::Left => Direction::Right,
                Direction::Right => Direction::Left,
            };
        }
    }
    states.push(StateDef::halting("H"));
    TuringMachine::new(states, "Q0").expect("generated references resolve")
}

/// Random working-state configuration with both counters below `bound`.
pub fn random_config(rng: &mut impl RngCore, tm: &TuringMachine, bound: u64) -> TmConfig {
    let working: Vec<&StateDef> = tm.states().iter().filter(|s| !s.is_halting()).collect();
    let state = working[rng::below(rng, working.len() as u64) as usize];
    TmConfig::new(&state.name, rng::below(rng, bound), rng::below(rng, bound))
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzCase {
    pub machine: usize,
    pub machine_text: String,
    pub start: TmConfig,
    pub report: EquivalenceReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzSummary {
    pub cases: Vec<FuzzCase>,
}

impl FuzzSummary {
    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.report.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.report.passed)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FuzzPlan {
    pub seed: u64,
    pub machines: usize,
    pub configs_per_machine: usize,
    pub tm_steps: usize,
    /// Exclusive bound on the starting counters.
    pub counter_bound: u64,
}

/// Machine `i` is drawn from stream `i` of `seed`; its sizes range over 2..=4
/// working states.
pub fn fuzz(plan: &FuzzPlan) -> Result<FuzzSummary, CompileError> {
    let mut cases = Vec::new();
    for i in 0..plan.machines {
        let mut r = rng::stream(plan.seed, i as u64);
        let working = 2 + rng::below(&mut r, 3) as usize;
        let tm = random_machine(&mut r, working);
        let prog = compile(&tm)?;
        let text = tm.to_text();
        for _ in 0..plan.configs_per_machine {
            let start = random_config(&mut r, &tm, plan.counter_bound);
            let report = verify_compiled(&prog, &start, plan.tm_steps);
            cases.push(FuzzCase {
                machine: i,
                machine_text: text.clone(),
                start,
                report,
            });
        }
    }
    Ok(FuzzSummary { cases })
}
