use proptest::prelude::*;

use tmbench::rng;
use tmbench::tag::{Queue, Symbol};
use tmbench::utm::{
    compile, decode_word, encode_config, encode_config_as, random_machine, run_cycle, run_cycle_observed, tm_step,
    verify_equivalence, Convention, Direction, Role, StateDef, TagProgram, TmConfig, TmStep, TuringMachine,
};

fn one_state(write: u8, direction: Direction, on_zero: &str, on_one: &str) -> TuringMachine {
    TuringMachine::new(
        vec![
            StateDef::working("Q0", write, direction, on_zero, on_one),
            StateDef::halting("H"),
        ],
        "Q0",
    )
    .unwrap()
}

fn roles(prog: &TagProgram, queue: &[u32]) -> Vec<Role> {
    queue.iter().map(|&id| prog.key(id).role).collect()
}

fn count_pairs(roles: &[Role], first: Role) -> usize {
    roles.windows(2).filter(|w| w[0] == first && w[1] == Role::X).count()
}

#[test]
fn every_one_state_cycle_is_sound_below_64() {
    for write in [0, 1] {
        for direction in [Direction::Left, Direction::Right] {
            for (z, o) in [("Q0", "Q0"), ("Q0", "H"), ("H", "Q0"), ("H", "H")] {
                let tm = one_state(write, direction, z, o);
                let prog = compile(&tm).unwrap();
                for m in 0..64 {
                    for n in 0..64 {
                        let cfg = TmConfig::new("Q0", m, n);
                        let TmStep::Next(expected) = tm_step(&tm, &cfg).unwrap() else {
                            unreachable!()
                        };
                        let word = encode_config(&prog, &cfg).unwrap();
                        let cycle = run_cycle(&prog, &word, 8 * (m + n) + 32).unwrap();
                        assert_eq!(cycle.form.config, expected, "{write} {direction} {z} {o} from {cfg}");
                        let swapped = matches!(direction, Direction::Left);
                        assert_eq!(cycle.form.convention == Convention::Swapped, swapped);
                    }
                }
            }
        }
    }
}

#[test]
fn x_symbols_are_never_read() {
    let tm = TuringMachine::parse("start Q0\nhalt H\nQ0 1 R Q1 Q0\nQ1 0 L Q0 H\n").unwrap();
    let prog = compile(&tm).unwrap();
    for m in 0..20 {
        for n in 0..20 {
            for state in ["Q0", "Q1"] {
                let mut word = encode_config(&prog, &TmConfig::new(state, m, n)).unwrap();
                // two cycles, so swapped words are rotated as well
                for _ in 0..2 {
                    let cycle = run_cycle_observed(&prog, &word, 8 * (m + n) + 64, |queue| {
                        let head = *queue.front().unwrap();
                        assert_ne!(prog.key(head).role, Role::X);
                    })
                    .unwrap();
                    if prog.machine().state(&cycle.form.config.state).unwrap().is_halting() {
                        break;
                    }
                    word = cycle.word;
                }
            }
        }
    }
}

#[test]
fn counter_laws_for_right_moves() {
    for write in [0u64, 1] {
        let tm = one_state(write as u8, Direction::Right, "Q0", "Q0");
        let prog = compile(&tm).unwrap();
        let b = prog.id(&tmbench::utm::SymbolKey::direct(Role::B, "Q0")).unwrap();
        for m in 0..40 {
            for n in 0..40 {
                let word = encode_config(&prog, &TmConfig::new("Q0", m, n)).unwrap();
                let mut after_phase_one = None;
                let cycle = run_cycle_observed(&prog, &word, 1_000, |queue| {
                    if after_phase_one.is_none() && queue.front() == Some(&b) {
                        let ids: Vec<u32> = queue.iter().copied().collect();
                        after_phase_one = Some(roles(&prog, &ids));
                    }
                })
                .unwrap();
                let phase_one = after_phase_one.unwrap();
                assert_eq!(count_pairs(&phase_one, Role::CSmall) as u64, 2 * m + write);
                let final_ids = prog.indexed().encode(&cycle.word).unwrap();
                let final_roles = roles(&prog, &final_ids);
                assert_eq!(count_pairs(&final_roles, Role::Beta) as u64, n / 2);
                assert_eq!(count_pairs(&final_roles, Role::Alpha) as u64, 2 * m + write);
            }
        }
    }
}

#[test]
fn parity_selects_the_successor() {
    let tm = TuringMachine::parse("start Q0\nhalt H\nQ0 1 R Even Odd\nEven 0 R Even Even\nOdd 0 R Odd Odd\n").unwrap();
    let prog = compile(&tm).unwrap();
    let d1 = prog.id(&tmbench::utm::SymbolKey::direct(Role::D1, "Q0")).unwrap();
    for m in 0..16 {
        for n in 0..64 {
            let word = encode_config(&prog, &TmConfig::new("Q0", m, n)).unwrap();
            let mut read_d1 = false;
            let cycle = run_cycle_observed(&prog, &word, 1_000, |q| read_d1 |= q.front() == Some(&d1)).unwrap();
            let odd = n % 2 == 1;
            assert_eq!(read_d1, odd);
            assert_eq!(cycle.form.config.state, if odd { "Odd" } else { "Even" });
            let head = prog.key(prog.indexed().id(cycle.word.head().unwrap()).unwrap());
            assert_eq!(
                (head.role, head.state.as_str()),
                (Role::A, cycle.form.config.state.as_str())
            );
        }
    }
}

#[test]
fn malformed_and_mid_phase_words_are_not_canonical() {
    let tm = one_state(1, Direction::Right, "Q0", "Q0");
    let prog = compile(&tm).unwrap();
    let sym = |r: Role| prog.symbol(&tmbench::utm::SymbolKey::direct(r, "Q0")).unwrap().clone();
    let word = Queue(vec![sym(Role::A), sym(Role::X), sym(Role::B)]);
    assert_eq!(decode_word(&prog, &word), None);

    // two tag steps by hand from (Q0, 1, 1)
    let start = encode_config(&prog, &TmConfig::new("Q0", 1, 1)).unwrap();
    let sys = prog.system();
    let mut q = start.clone();
    for _ in 0..2 {
        let next = sys.production(q.head().unwrap()).unwrap().to_vec();
        q = Queue(q.cells()[2..].iter().cloned().chain(next).collect());
    }
    assert_eq!(decode_word(&prog, &q), None);
    assert_eq!(decode_word(&prog, &start).unwrap().config, TmConfig::new("Q0", 1, 1));
}

#[test]
fn encoded_lengths_and_examples() {
    let prog = compile(&one_state(1, Direction::Right, "Q0", "Q0")).unwrap();
    let w = encode_config(&prog, &TmConfig::new("Q0", 0, 1)).unwrap();
    assert_eq!(w.to_string(), "[A_Q0 x_Q0 B_Q0 x_Q0 beta_Q0 x_Q0]");
    let w = encode_config(&prog, &TmConfig::new("Q0", 2, 0)).unwrap();
    assert_eq!(w.to_string(), "[A_Q0 x_Q0 alpha_Q0 x_Q0 alpha_Q0 x_Q0 B_Q0 x_Q0]");
    for m in 0..10 {
        for n in 0..10 {
            let w = encode_config(&prog, &TmConfig::new("Q0", m, n)).unwrap();
            assert_eq!(w.len() as u64, 2 + 2 * m + 2 + 2 * n);
        }
    }
    // rendered symbols survive the textual queue format
    let text = w.to_string();
    assert_eq!(text.parse::<Queue>().unwrap(), w);
    for entry in prog.symbol_table() {
        assert_eq!(Symbol::new(entry.symbol.to_string()).unwrap(), entry.symbol);
    }
}

#[test]
fn halting_successor_is_reported() {
    let tm = TuringMachine::parse("start Q0\nhalt H\nQ0 1 R Q1 Q1\nQ1 1 L Q0 H\n").unwrap();
    let report = verify_equivalence(&tm, &TmConfig::new("Q0", 0, 0), 20).unwrap();
    assert!(report.passed);
    assert!(report.halted_at.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn encode_decode_round_trip(seed in any::<u64>(), pick in any::<u64>(), m in 0u64..1000, n in 0u64..1000, swapped in any::<bool>()) {
        let mut r = rng::stream(seed, 0);
        let working = 2 + rng::below(&mut r, 3) as usize;
        let tm = random_machine(&mut r, working);
        let prog = compile(&tm).unwrap();
        let states = tm.states();
        let state = &states[(pick % states.len() as u64) as usize].name;
        let cfg = TmConfig::new(state, m, n);
        let convention = if swapped && prog.has_swapped_family(state) { Convention::Swapped } else { Convention::Direct };
        let word = encode_config_as(&prog, &cfg, convention).unwrap();
        let form = decode_word(&prog, &word).unwrap();
        prop_assert_eq!(&form.config, &cfg);
        prop_assert_eq!(form.convention, convention);
        let runs = prog.encode_runs(&form.config, convention).unwrap();
        prop_assert_eq!(prog.indexed().decode(runs.symbols()), word);
    }
}
