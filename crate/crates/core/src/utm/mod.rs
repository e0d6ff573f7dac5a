//! Turing machines and their compilation into 2-tag systems.

mod compile;
mod cycle;
mod machine;
mod random;

pub use compile::{
    compile, decode_word, encode_config, encode_config_as, CanonicalForm, CompileError, Convention, Role, SymbolEntry,
    SymbolKey, TagProgram,
};
pub use cycle::{
    cycle_budget, run_cycle, run_cycle_observed, run_cycle_runs, verify_compiled, verify_equivalence, Cycle,
    CycleError, Divergence, EquivalenceError, EquivalenceReport,
};
pub use machine::{
    tm_step, Direction, MachineError, ParseError, Quadruple, StateDef, StepError, TmConfig, TmStep, TuringMachine,
};
pub use random::{fuzz, random_config, random_machine, FuzzCase, FuzzPlan, FuzzSummary};
