use std::collections::VecDeque;

use tmbench::rng;
use tmbench::tag::{run, step, validate_system, Queue, RunQueue, StepOutcome, StopReason, Symbol, TagSystem};

fn q(text: &str) -> Queue {
    text.parse().unwrap()
}

/// Spaced queue from a run of single-character symbols.
fn chars(text: &str) -> Queue {
    Queue(text.chars().map(|c| Symbol::new(c.to_string()).unwrap()).collect())
}

fn roman() -> TagSystem {
    TagSystem::parse_rules(2, &["A : E D A B C", "B : D", "C : E E E D D", "D : B C", "E : D"]).unwrap()
}

fn numeral() -> TagSystem {
    TagSystem::parse_rules(2, &["1 : 5 5 2", "2 : 4 2 5 1 3", "3 : 4 3 1", "4 : 3 4", "5 : 3"]).unwrap()
}

fn special() -> TagSystem {
    TagSystem::parse_rules(2, &["@ : % $ # $", "# : &", "$ : &", "% : # # % %", "& : % # & $"]).unwrap()
}

#[test]
fn roman_column() {
    let t = run(&roman(), &q("[B A E E C]"), 30).unwrap();
    assert_eq!(t.steps[1], q("[E E C D]"));
    assert_eq!(t.steps[2], q("[C D D]"));
    assert_eq!(t.steps[3], q("[D E E E D D]"));
    assert_eq!(t.steps[16], q("[D D]"));
    assert_eq!(t.steps[17], q("[B C]"));
    assert_eq!(t.steps[18], q("[D]"));
    assert_eq!(t.halt_step, Some(18));
    assert!(!t.truncated);
    assert_eq!(t.steps.len(), 19);
}

#[test]
fn numeral_column() {
    let t = run(&numeral(), &q("[5 2 3 2]"), 30).unwrap();
    assert_eq!(t.steps[1], q("[3 2 3]"));
    assert_eq!(t.steps[2], q("[3 4 3 1]"));
    assert_eq!(t.steps[3], q("[3 1 4 3 1]"));
    assert_eq!(t.steps[28], chars("3343455243134552343"));
    assert_eq!(t.steps[29], chars("43455243134552343431"));
    assert_eq!(t.steps[30], chars("45524313455234343134"));
    assert!(t.truncated);
    assert_eq!(t.halt_step, None);
}

#[test]
fn special_column() {
    let t = run(&special(), &q("[$ @ @ #]"), 30).unwrap();
    assert_eq!(t.steps[1], q("[@ # &]"));
    assert_eq!(t.steps[2], q("[& % $ # $]"));
    assert_eq!(t.steps[3], chars("$#$%#&$"));
    assert_eq!(t.steps[28], chars("$%#&$&"));
    assert_eq!(t.steps[29], chars("#&$&&"));
    assert_eq!(t.steps[30], q("[$ & & &]"));
    assert!(t.truncated);
}

fn random_system(r: &mut impl rand_core::RngCore) -> TagSystem {
    let m = rng::between(r, 1, 4) as usize;
    let size = rng::between(r, 1, 6) as usize;
    let names: Vec<String> = (0..size).map(|i| format!("s{i}")).collect();
    let rules = names
        .iter()
        .map(|n| {
            let len = rng::between(r, 0, 5);
            let body: Vec<&str> = (0..len)
                .map(|_| names[rng::below(r, size as u64) as usize].as_str())
                .collect();
            format!("{n} : {}", body.join(" "))
        })
        .collect::<Vec<_>>();
    let lines: Vec<&str> = rules.iter().map(String::as_str).collect();
    TagSystem::parse_rules(m, &lines).unwrap()
}

fn random_queue(r: &mut impl rand_core::RngCore, sys: &TagSystem, max_len: u64) -> Queue {
    let len = rng::between(r, 0, max_len);
    Queue(
        (0..len)
            .map(|_| sys.alphabet[rng::below(r, sys.alphabet.len() as u64) as usize].clone())
            .collect(),
    )
}

/// Straight from the definition, on strings.
fn naive_step(m: usize, rules: &[(String, Vec<String>)], queue: &[String]) -> Option<Vec<String>> {
    if queue.len() < m {
        return None;
    }
    let head = &queue[0];
    let (_, body) = rules.iter().find(|(s, _)| s == head).unwrap();
    let mut out: Vec<String> = queue[m..].to_vec();
    out.extend(body.iter().cloned());
    Some(out)
}

#[test]
fn suffix_append_and_length_laws_against_naive_stepper() {
    let mut r = rng::stream(2024, 0);
    for _ in 0..10_000 {
        let sys = random_system(&mut r);
        assert!(validate_system(&sys).is_empty());
        let queue = random_queue(&mut r, &sys, 12);
        let rules: Vec<(String, Vec<String>)> = sys
            .rules
            .iter()
            .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
            .collect();
        let cells: Vec<String> = queue.cells().iter().map(|s| s.to_string()).collect();
        let expected = naive_step(sys.m, &rules, &cells);
        match step(&sys, &queue).unwrap() {
            StepOutcome::Advanced(next) => {
                let got: Vec<String> = next.cells().iter().map(|s| s.to_string()).collect();
                assert_eq!(Some(got), expected);
                let head = queue.head().unwrap();
                assert_eq!(next.len(), queue.len() - sys.m + sys.production(head).unwrap().len());
            }
            StepOutcome::Halted(same) => {
                assert!(queue.len() < sys.m);
                assert_eq!(same, queue);
                assert_eq!(expected, None);
            }
        }
    }
}

#[test]
fn halt_law_and_prefix_stability() {
    let mut r = rng::stream(2024, 1);
    for _ in 0..500 {
        let sys = random_system(&mut r);
        let init = random_queue(&mut r, &sys, 9);
        let long = run(&sys, &init, 40).unwrap();
        assert_eq!(long.truncated, long.last().len() >= sys.m);
        assert_eq!(long.halt_step.is_some(), !long.truncated);
        for k in 0..=40 {
            let short = run(&sys, &init, k).unwrap();
            let n = short.steps.len();
            assert_eq!(&short.steps[..], &long.steps[..n]);
            if long.halt_step.is_none_or(|h| k < h) {
                assert_eq!(n, k + 1);
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sys = numeral();
    let a = serde_json::to_string(&run(&sys, &q("[5 2 3 2]"), 30).unwrap()).unwrap();
    let b = serde_json::to_string(&run(&sys, &q("[5 2 3 2]"), 30).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_length_engine_matches_plain_stepping() {
    let mut r = rng::stream(2024, 2);
    for _ in 0..2_000 {
        let sys = random_system(&mut r);
        let indexed = sys.indexed().unwrap();
        // long repeated stretches so macro steps actually fire
        let unit = random_queue(&mut r, &sys, 3);
        let reps = rng::between(&mut r, 1, 30);
        let unit = indexed.encode(&unit).unwrap();
        let tail = indexed.encode(&random_queue(&mut r, &sys, 4)).unwrap();
        let mut ids: Vec<u32> = Vec::new();
        for _ in 0..reps {
            ids.extend(&unit);
        }
        ids.extend(&tail);
        let budget = rng::between(&mut r, 0, 60);

        let mut plain: VecDeque<u32> = ids.iter().copied().collect();
        let mut taken = 0;
        while taken < budget && indexed.step_in_place(&mut plain).is_some() {
            taken += 1;
            if plain.len() > 5_000 {
                break;
            }
        }
        if plain.len() > 5_000 {
            continue;
        }
        let mut fast = RunQueue::new();
        fast.push_run(&unit, reps);
        for &s in &tail {
            fast.push_run(&[s], 1);
        }
        let adv = fast.advance(&indexed, taken, &[]);
        assert_eq!(adv.steps, taken);
        if adv.stop == StopReason::Halted {
            assert!(plain.len() < sys.m);
        }
        assert_eq!(fast.to_vec(), plain.iter().copied().collect::<Vec<_>>());
    }
}
