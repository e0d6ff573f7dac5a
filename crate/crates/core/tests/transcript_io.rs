use rand_core::RngCore;

use tmbench::generate::{generate_dataset, AlphabetKind, BenchmarkInstance, GenConfig};
use tmbench::rng;
use tmbench::tag::TagSystem;
use tmbench::transcript::{format_ground_truth, parse_transcript, render_prompt, PROMPT_TEMPLATE};

fn roman() -> BenchmarkInstance {
    let sys = TagSystem::parse_rules(2, &["A : E D A B C", "B : D", "C : E E E D D", "D : B C", "E : D"]).unwrap();
    BenchmarkInstance::new("roman", sys, "[B A E E C]".parse().unwrap(), 30).unwrap()
}

#[test]
fn prompt_matches_golden_file() {
    let golden = include_str!("data/prompt_roman.txt");
    let prompt = render_prompt(&roman());
    assert_eq!(prompt, golden);
    assert!(prompt.contains("Init: [B A E E C]\n"));
    assert!(prompt.contains("\nB : D\n"));
    assert_eq!(prompt, render_prompt(&roman()));
}

#[test]
fn prompt_differs_from_template_only_in_slots() {
    let prompt = render_prompt(&roman());
    let template_lines: Vec<&str> = PROMPT_TEMPLATE.lines().collect();
    let prompt_lines: Vec<&str> = prompt.lines().collect();
    // the rules slot expands to five lines
    assert_eq!(prompt_lines.len(), template_lines.len() + 4);
    let slot_lines = ["m: {m}", "Alphabet: {ALPHABET}", "Init: {INIT}", "{RULES}"];
    let mut p = 0;
    for t in &template_lines {
        if *t == "{RULES}" {
            p += 5;
            continue;
        }
        if slot_lines.contains(t) || t.contains("{MAX_STEPS}") {
            assert_ne!(*t, prompt_lines[p]);
        } else {
            assert_eq!(t.replace("{{", "{").replace("}}", "}"), prompt_lines[p]);
        }
        p += 1;
    }
}

#[test]
fn greek_prompt_is_intact() {
    let cfg = GenConfig {
        alphabet_kind: AlphabetKind::Greek,
        count: 1,
        ..GenConfig::standard(3)
    };
    let inst = &generate_dataset(&cfg).unwrap()[0];
    let prompt = render_prompt(inst);
    let bytes = prompt.clone().into_bytes();
    assert_eq!(String::from_utf8(bytes).unwrap(), prompt);
    assert!(prompt.contains("Alphabet: {α, β, γ, δ, ε}"));
}

#[test]
fn gemini_case_parses() {
    let parsed = parse_transcript(include_str!("data/gemini_case.txt"));
    let idx: Vec<usize> = parsed.steps.iter().map(|s| s.index).collect();
    assert_eq!(idx, (0..=19).collect::<Vec<_>>());
    assert_eq!(parsed.steps[0].queue, ["B", "D", "D"]);
    assert_eq!(parsed.steps[2].queue, ["C", "E", "C", "D", "B", "B"]);
    assert_eq!(parsed.steps[19].queue.len(), 36);
    assert_eq!(parsed.halt_claimed_at, None);
    assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
}

#[test]
fn roman_reference_transcript() {
    let text = format_ground_truth(&roman());
    assert!(text.contains("### step 18:\n- Head Symbol: B\n- Action: Append D to the end of the queue. Remove B C from the head.\n- Queue State: [D] <halt>\n"));
    assert!(!text.contains("### step 19"));
}

#[test]
fn format_then_parse_is_identity() {
    let mut n = 0;
    for kind in [
        AlphabetKind::Roman,
        AlphabetKind::Numeral,
        AlphabetKind::Greek,
        AlphabetKind::Special,
    ] {
        let cfg = GenConfig {
            alphabet_kind: kind,
            count: 250,
            ..GenConfig::standard(1234)
        };
        for inst in generate_dataset(&cfg).unwrap() {
            let parsed = parse_transcript(&format_ground_truth(&inst));
            assert!(parsed.warnings.is_empty(), "{}: {:?}", inst.id, parsed.warnings);
            assert_eq!(parsed.steps.len(), inst.trace.steps.len());
            for (i, q) in inst.trace.steps.iter().enumerate() {
                assert_eq!(parsed.steps[i].index, i);
                assert!(parsed.matches(i, q), "{} step {i}", inst.id);
            }
            assert_eq!(parsed.halt_claimed_at, inst.trace.halt_step);
            n += 1;
        }
    }
    assert_eq!(n, 1000);
}

#[test]
fn parser_survives_random_input() {
    let mut r = rng::stream(99, 0);
    let fragments = [
        "### step ",
        "Queue State: [",
        "]",
        "<halt>",
        "\n",
        "**",
        "99999999999999999999999",
        " ",
        ",",
        "[",
    ];
    for _ in 0..10_000 {
        let len = rng::below(&mut r, 400) as usize;
        let mut bytes = vec![0u8; len];
        r.fill_bytes(&mut bytes);
        let mut text = String::from_utf8_lossy(&bytes).into_owned();
        for _ in 0..rng::below(&mut r, 8) {
            let f = fragments[rng::below(&mut r, fragments.len() as u64) as usize];
            let at = rng::below(&mut r, text.len() as u64 + 1) as usize;
            if text.is_char_boundary(at) {
                text.insert_str(at, f);
            }
        }
        let parsed = parse_transcript(&text);
        assert!(parsed.steps.windows(2).all(|w| w[0].index < w[1].index));
    }
}
