use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tmbench::generate::{read_dataset, GenConfig};
use tmbench::tag::TagSystem;
use tmbench::utm::SymbolEntry;

fn tmbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmbench")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = tmbench(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the single stderr line.
fn fails(args: &[&str]) -> (i32, String) {
    let out = tmbench(args);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    (out.status.code().unwrap(), err.trim().to_string())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn gen_defaults_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let summary = ok(&["gen", "--seed", "3", "--out", p(&out)]);
    let data = read_dataset(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(data.len(), 100);
    let early = data.iter().filter(|d| d.halted()).count();
    assert_eq!(
        summary.trim(),
        format!("wrote 100 instances to {} ({early} halt early)", out.display())
    );
    assert!(data
        .iter()
        .all(|d| d.system.m == 2 && d.system.alphabet.len() == 5 && d.max_steps == 30));
}

#[test]
fn gen_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GenConfig {
        count: 7,
        ..GenConfig::standard(11)
    };
    let path = dir.path().join("gen.toml");
    std::fs::write(&path, format!("m = 3\nalphabet_kind = \"greek\"\nalphabet_size = 4\nrule_len_min = 2\nrule_len_max = 3\ninit_len_min = 3\ninit_len_max = 4\nmax_steps = 12\ncount = {}\nseed = {}\n", cfg.count, cfg.seed)).unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["gen", "--config", p(&path), "--out", p(&a)]);
    ok(&[
        "gen",
        "--seed",
        "11",
        "--m",
        "3",
        "--alphabet-kind",
        "greek",
        "--alphabet-size",
        "4",
        "--rule-len",
        "2..3",
        "--init-len",
        "3..=4",
        "--max-steps",
        "12",
        "--count",
        "7",
        "--out",
        p(&b),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.jsonl");
    ok(&[
        "gen",
        "--config",
        p(&path),
        "--count",
        "2",
        "--symbols",
        "x,y,z",
        "--out",
        p(&c),
    ]);
    let data = read_dataset(std::io::BufReader::new(std::fs::File::open(&c).unwrap())).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(
        data[0].system.alphabet.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        ["x", "y", "z"]
    );
}

#[test]
fn usage_errors_are_one_line_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let (code, msg) = fails(&["gen", "--seed", "1", "--count", "0", "--out", p(&out)]);
    assert_eq!((code, msg.as_str()), (2, "error[usage]: --count must be at least 1"));
    assert!(!out.exists());
    assert_eq!(fails(&["gen", "--out", p(&out)]).0, 2);
    assert_eq!(
        fails(&["gen", "--seed", "1", "--alphabet-size", "27", "--out", p(&out)]).0,
        2
    );
    assert_eq!(
        fails(&["gen", "--seed", "1", "--rule-len", "4..2", "--out", p(&out)]).0,
        2
    );
    let (code, msg) = fails(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(msg.starts_with("error[usage]: "), "{msg}");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "m = 2\nwhatever = 1\n").unwrap();
    let (code, msg) = fails(&["gen", "--config", p(&bad), "--out", p(&out)]);
    assert_eq!(code, 2);
    assert!(msg.contains("whatever"), "{msg}");
}

#[test]
fn io_errors_have_code_4() {
    let (code, msg) = fails(&["gen", "--seed", "1", "--out", "/nonexistent-dir/x.jsonl"]);
    assert_eq!(code, 4);
    assert!(msg.starts_with("error[io]: "), "{msg}");
    assert_eq!(fails(&["simulate", "--system", "/nonexistent.tag"]).0, 4);
}

#[test]
fn simulate_from_rules_file_and_dataset() {
    let zero = ok(&["simulate", "--system", p(&data("systems/roman.tag")), "--steps", "0"]);
    assert_eq!(zero, "0. [B A E E C] (Init)\n");
    let two = ok(&[
        "simulate",
        "--system",
        p(&data("systems/roman.tag")),
        "--init",
        "[D D]",
        "--steps",
        "2",
    ]);
    assert_eq!(two, "0. [D D] (Init)\n1. [B C]\n2. [D] (Halt)\n");

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.jsonl");
    ok(&["gen", "--seed", "5", "--count", "3", "--out", p(&d)]);
    let inst = &read_dataset(std::io::BufReader::new(std::fs::File::open(&d).unwrap())).unwrap()[1];
    let text = ok(&["simulate", "--dataset", p(&d), "--id", &inst.id]);
    let expected: Vec<String> = inst
        .trace
        .steps
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{i}. {q}"))
        .collect();
    let got: Vec<String> = text
        .lines()
        .map(|l| l.trim_end_matches(" (Init)").trim_end_matches(" (Halt)").to_string())
        .collect();
    assert_eq!(got, expected);
    assert_eq!(fails(&["simulate", "--dataset", p(&d), "--id", "nope"]).0, 3);

    let bad = dir.path().join("bad.tag");
    std::fs::write(&bad, "m 2\ninit [A B]\nA : B\nB : C\n").unwrap();
    let (code, msg) = fails(&["simulate", "--system", p(&bad)]);
    assert_eq!(code, 3);
    assert!(msg.contains("C"), "{msg}");
    std::fs::write(&bad, "m 2\nA B C\n").unwrap();
    assert!(fails(&["simulate", "--system", p(&bad), "--init", "[A]"])
        .1
        .contains("line 2"));
}

const RIGHT_MOVER: &str = "start Q0\nhalt H\nQ0 1 R Q0 H\n";

#[test]
fn compile_tm_writes_system_and_symbol_table() {
    let dir = tempfile::tempdir().unwrap();
    let tm = dir.path().join("m.tm");
    std::fs::write(&tm, "start Q0\nhalt H\nQ0 1 L Q1 H\nQ1 0 R Q0 Q0\n").unwrap();
    let out = dir.path().join("sys.json");
    ok(&["compile-tm", "--tm", p(&tm), "--out", p(&out)]);
    let system: TagSystem = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(system.m, 2);
    assert!(tmbench::tag::validate_system(&system).is_empty());
    let table: Vec<SymbolEntry> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sys.json.symbols.json")).unwrap()).unwrap();
    assert_eq!(table.len(), system.alphabet.len());
    assert!(table.iter().zip(&system.alphabet).all(|(e, s)| &e.symbol == s));

    // the JSON system is itself a valid simulate input
    let first = ok(&[
        "simulate",
        "--system",
        p(&out),
        "--init",
        &format!("[{} {}]", table[0].symbol, table[1].symbol),
        "--steps",
        "1",
    ]);
    assert!(first.starts_with("0. ["));
}

#[test]
fn verify_utm_single_and_fuzz() {
    let dir = tempfile::tempdir().unwrap();
    let tm = dir.path().join("r.tm");
    std::fs::write(&tm, RIGHT_MOVER).unwrap();
    let out = ok(&["verify-utm", "--tm", p(&tm), "--config", "Q0,0,1", "--tm-steps", "5"]);
    assert!(out.starts_with("PASS"), "{out}");
    let out = ok(&["verify-utm", "--tm", p(&tm), "--config", "Q0,0,0", "--tm-steps", "5"]);
    assert!(out.starts_with("PASS 5 TM steps"), "{out}");
    let out = ok(&[
        "verify-utm",
        "--random",
        "100",
        "--seed",
        "3",
        "--configs-per-machine",
        "1",
    ]);
    assert_eq!(out.trim(), "PASS 100/100 cases (100 machines, 20 TM steps)");

    let dangling = dir.path().join("d.tm");
    std::fs::write(&dangling, "start Q0\nhalt H\nQ0 1 R Q7 H\n").unwrap();
    let (code, msg) = fails(&["verify-utm", "--tm", p(&dangling), "--config", "Q0,0,0"]);
    assert_eq!(code, 3);
    assert!(msg.contains("line 3") && msg.contains("Q7"), "{msg}");
    assert_eq!(fails(&["verify-utm", "--tm", p(&tm), "--config", "Q0,1"]).0, 2);
    assert_eq!(fails(&["verify-utm", "--tm", p(&tm)]).0, 2);
}

#[test]
fn render_and_score_close_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 2, 3] {
        let d = dir.path().join(format!("d{seed}.jsonl"));
        ok(&["gen", "--seed", &seed.to_string(), "--out", p(&d)]);
        let t = dir.path().join(format!("t{seed}.jsonl"));
        ok(&["render", "--dataset", p(&d), "--truth", "--out", p(&t)]);
        let report = dir.path().join("r.json");
        let curve = dir.path().join("c.csv");
        let line = ok(&[
            "score",
            "--dataset",
            p(&d),
            "--transcripts",
            p(&t),
            "--out",
            p(&report),
            "--csv",
            p(&curve),
        ]);
        assert_eq!(
            line.trim(),
            "ground-truth: SWA uniform 100.0 | SWA linear 100.0 | pass rate 100.0 | 100 instances"
        );
        let back: tmbench::metrics::ScoreReport =
            serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(back.n_instances, 100);
        assert_eq!(back.acc_curve.len(), 30);
        let csv = std::fs::read_to_string(&curve).unwrap();
        assert_eq!(csv.lines().next(), Some("step,acc,n_correct,n_total"));
        assert_eq!(csv.lines().count(), 31);
    }

    let d = dir.path().join("d1.jsonl");
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let line = ok(&[
        "score",
        "--dataset",
        p(&d),
        "--transcripts",
        p(&empty),
        "--model",
        "nothing",
    ]);
    assert_eq!(
        line.trim(),
        "nothing: SWA uniform 0.0 | SWA linear 0.0 | pass rate 0.0 | 100 instances"
    );

    let data = read_dataset(std::io::BufReader::new(std::fs::File::open(&d).unwrap())).unwrap();
    let prompt = ok(&["render", "--dataset", p(&d), "--id", &data[0].id]);
    assert_eq!(prompt, tmbench::transcript::render_prompt(&data[0]));
    let prompts = dir.path().join("prompts.jsonl");
    ok(&["render", "--dataset", p(&d), "--out", p(&prompts)]);
    assert_eq!(std::fs::read_to_string(&prompts).unwrap().lines().count(), 100);

    let junk = dir.path().join("junk.jsonl");
    std::fs::write(&junk, "{not json\n").unwrap();
    assert_eq!(fails(&["score", "--dataset", p(&d), "--transcripts", p(&junk)]).0, 3);
}

#[test]
fn stats_over_reference_csv() {
    let csv = data("reference_scores.csv");
    let all = ok(&["stats", "--csv", p(&csv), "--x", "pass_rate", "--y", "aime,math,gpqa"]);
    assert!(all.contains("n = 35"), "{all}");
    assert!(all.contains("pearson r = 0.516"), "{all}");
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res.csv");
    let sub = ok(&[
        "stats",
        "--csv",
        p(&csv),
        "--x",
        "pass_rate",
        "--y",
        "gpqa",
        "--filter",
        "corr_subset",
        "--normalize",
        "--residuals",
        p(&res),
    ]);
    assert!(sub.contains("n = 12"), "{sub}");
    let rows = std::fs::read_to_string(&res).unwrap();
    assert_eq!(rows.lines().count(), 13);
    assert!(rows.starts_with("model,pass_rate,y,residual\n"));
    let (code, msg) = fails(&["stats", "--csv", p(&csv), "--x", "pass_rate", "--y", "nope"]);
    assert_eq!(code, 2);
    assert!(msg.contains("nope"), "{msg}");
}

#[test]
fn eval_fails_fast_on_config_problems() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("d.jsonl");
    ok(&["gen", "--seed", "1", "--count", "2", "--out", p(&d)]);
    let cfg = dir.path().join("runner.toml");
    let out = dir.path().join("t.jsonl");
    std::fs::write(
        &cfg,
        "base_url = \"http://127.0.0.1:9\"\nmodel = \"m\"\napi_key_env = \"TMBENCH_TEST_UNSET_KEY\"\n",
    )
    .unwrap();
    let (code, msg) = fails(&["eval", "--config", p(&cfg), "--dataset", p(&d), "--out", p(&out)]);
    assert_eq!(code, 5);
    assert!(msg.contains("TMBENCH_TEST_UNSET_KEY"), "{msg}");
    assert!(!out.exists());
    std::fs::write(
        &cfg,
        "base_url = \"http://127.0.0.1:9\"\nmodel = \"m\"\napi_key = \"sk-inline\"\n",
    )
    .unwrap();
    assert_eq!(
        fails(&["eval", "--config", p(&cfg), "--dataset", p(&d), "--out", p(&out)]).0,
        2
    );
    std::fs::write(&cfg, "base_url = \"http://127.0.0.1:9\"\nmodel = \"m\"\n").unwrap();
    assert_eq!(
        fails(&[
            "eval",
            "--config",
            p(&cfg),
            "--dataset",
            p(&d),
            "--out",
            p(&out),
            "--jobs",
            "0"
        ])
        .0,
        2
    );
}
