mod error;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{Class, Classify, Failure};
use tmbench::client::{run_benchmark, ClientError, LlmClient, RunnerConfig};
use tmbench::generate::{generate_dataset, read_dataset, write_dataset, AlphabetKind, BenchmarkInstance, GenConfig};
use tmbench::metrics::{judge_all, percent, score};
use tmbench::stats::{linear_fit, minmax_normalize, pearson};
use tmbench::tag::{self, word, Queue, TagSystem};
use tmbench::transcript::{format_ground_truth, render_prompt, TranscriptRecord};
use tmbench::utm::{compile, fuzz, verify_compiled, FuzzPlan, TmConfig, TuringMachine};

#[derive(Parser)]
#[command(name = "tmbench", version, about = "Tag-system simulation benchmark tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset.
    Gen(GenArgs),
    /// Print a tag-system trace.
    Simulate(SimulateArgs),
    /// Compile a Turing machine into a 2-tag system.
    CompileTm(CompileArgs),
    /// Check a compiled machine against direct simulation.
    VerifyUtm(VerifyArgs),
    /// Render prompts or ground-truth transcripts.
    Render(RenderArgs),
    /// Query a model endpoint for every instance.
    Eval(EvalArgs),
    /// Score transcripts against a dataset.
    Score(ScoreArgs),
    /// Pearson correlation and a least-squares line over CSV columns.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Roman,
    Numeral,
    Greek,
    Special,
}

#[derive(Args)]
struct GenArgs {
    /// TOML config; inline flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum)]
    alphabet_kind: Option<Kind>,
    /// Comma-separated custom alphabet; replaces --alphabet-kind.
    #[arg(long, value_delimiter = ',')]
    symbols: Option<Vec<String>>,
    #[arg(long)]
    alphabet_size: Option<usize>,
    /// Production length range, `LO..HI` inclusive or a single length.
    #[arg(long, value_parser = parse_range)]
    rule_len: Option<(usize, usize)>,
    /// Initial queue length range, `LO..HI` inclusive or a single length.
    #[arg(long, value_parser = parse_range)]
    init_len: Option<(usize, usize)>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    /// Redraw instances that halt before this many steps.
    #[arg(long)]
    min_steps: Option<usize>,
    /// Required unless the config file sets it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Rules file (`m 2`, `init [..]`, then `A : B C` lines) or system JSON.
    #[arg(long, conflicts_with_all = ["dataset", "id"])]
    system: Option<PathBuf>,
    /// Initial queue such as "[B A E E C]"; overrides the file's init line.
    #[arg(long, requires = "system")]
    init: Option<String>,
    #[arg(long, requires = "id")]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    id: Option<String>,
    /// Defaults to the instance budget, or 30.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    tm: PathBuf,
    /// Tag system JSON.
    #[arg(long)]
    out: PathBuf,
    /// Symbol table JSON; defaults to `<out>.symbols.json`.
    #[arg(long)]
    symbols: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(
        long,
        required_unless_present = "random",
        conflicts_with = "random",
        requires = "config"
    )]
    tm: Option<PathBuf>,
    /// Start configuration `STATE,M,N`.
    #[arg(long, value_parser = parse_tm_config)]
    config: Option<TmConfig>,
    /// Fuzz this many random machines instead.
    #[arg(long, requires = "seed")]
    random: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    configs_per_machine: usize,
    /// Exclusive bound on random starting counters.
    #[arg(long, default_value_t = 64)]
    counter_bound: u64,
    #[arg(long, default_value_t = 20)]
    tm_steps: usize,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Print one instance to stdout; without it, --out is required.
    #[arg(long, required_unless_present = "out")]
    id: Option<String>,
    /// Ground-truth transcript instead of the prompt.
    #[arg(long)]
    truth: bool,
    /// JSON-lines output: transcript records with --truth, else id/prompt pairs.
    #[arg(long, conflicts_with = "id")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Runner TOML config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Transcript file; existing successful records are kept.
    #[arg(long)]
    out: PathBuf,
    /// Overrides max_in_flight.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    transcripts: PathBuf,
    /// Defaults to the model named in the transcripts.
    #[arg(long)]
    model: Option<String>,
    /// Report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ACC(i) curve as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    x: String,
    /// One or more comma-separated columns; several are averaged per row.
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    /// Keep only rows where this column is 1/true/yes.
    #[arg(long)]
    filter: Option<String>,
    /// Min-max normalize both series before fitting.
    #[arg(long)]
    normalize: bool,
    /// Write x, y and the fit residual per row.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once("..") {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi.trim_start_matches('='))?)),
        None => parse(s).map(|n| (n, n)),
    }
}

fn parse_tm_config(s: &str) -> Result<TmConfig, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [state, m, n] = parts[..] else {
        return Err("expected STATE,M,N".into());
    };
    let num = |t: &str| t.parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(TmConfig::new(state, num(m)?, num(n)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            return Failure::new(Class::Usage, first.trim_start_matches("error: ")).report();
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Simulate(a) => simulate(a),
        Command::CompileTm(a) => compile_tm(a),
        Command::VerifyUtm(a) => verify_utm(a),
        Command::Render(a) => render(a),
        Command::Eval(a) => eval(a),
        Command::Score(a) => score_cmd(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).class(Class::Io, || format!("reading {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Vec<BenchmarkInstance>, Failure> {
    let file = File::open(path).class(Class::Io, || format!("reading {}", path.display()))?;
    read_dataset(BufReader::new(file)).class(Class::Input, || path.display().to_string())
}

/// Writes through a sibling temp file so a failed run leaves no partial output.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let ctx = || format!("writing {}", path.display());
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = File::create(&tmp).class(Class::Io, ctx)?;
    let mut out = BufWriter::new(file);
    fill(&mut out).and_then(|_| out.flush()).class(Class::Io, ctx)?;
    drop(out);
    std::fs::rename(&tmp, path).class(Class::Io, ctx)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    write_atomic(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)?;
        out.write_all(b"\n")
    })
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => GenConfig::from_toml(&read_text(path)?).class(Class::Usage, || path.display().to_string())?,
        None => {
            let Some(seed) = a.seed else {
                return Err(Failure::new(Class::Usage, "--seed is required without --config"));
            };
            GenConfig::standard(seed)
        }
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(k) = a.alphabet_kind {
        cfg.alphabet_kind = match k {
            Kind::Roman => AlphabetKind::Roman,
            Kind::Numeral => AlphabetKind::Numeral,
            Kind::Greek => AlphabetKind::Greek,
            Kind::Special => AlphabetKind::Special,
        };
    }
    if let Some(symbols) = a.symbols {
        let symbols = word(&symbols.join(" ")).class(Class::Usage, || "--symbols".into())?;
        if a.alphabet_size.is_none() {
            cfg.alphabet_size = symbols.len();
        }
        cfg.alphabet_kind = AlphabetKind::Custom(symbols);
    }
    if let Some(v) = a.alphabet_size {
        cfg.alphabet_size = v;
    }
    if let Some((lo, hi)) = a.rule_len {
        (cfg.rule_len_min, cfg.rule_len_max) = (lo, hi);
    }
    if let Some((lo, hi)) = a.init_len {
        (cfg.init_len_min, cfg.init_len_max) = (lo, hi);
    }
    if let Some(v) = a.max_steps {
        cfg.max_steps = v;
    }
    if let Some(v) = a.count {
        cfg.count = v;
    }
    if a.min_steps.is_some() {
        cfg.min_steps = a.min_steps;
    }
    if cfg.count == 0 {
        return Err(Failure::new(Class::Usage, "--count must be at least 1"));
    }
    cfg.validate().class(Class::Usage, || "config".into())?;
    let data = generate_dataset(&cfg).class(Class::Usage, || "generation".into())?;
    write_atomic(&a.out, |out| write_dataset(out, &data))?;
    let early = data.iter().filter(|d| d.halted()).count();
    println!(
        "wrote {} instances to {} ({early} halt early)",
        data.len(),
        a.out.display()
    );
    Ok(())
}

/// A parsed rules file: the system and an optional initial queue.
struct SystemFile {
    system: TagSystem,
    init: Option<Queue>,
}

/// `m N`, an optional `init [..]` line, then one `symbol : production` line
/// per rule. JSON in the serialized system layout also works.
fn parse_system(text: &str) -> Result<SystemFile, String> {
    if text.trim_start().starts_with('{') {
        let system = serde_json::from_str(text).map_err(|e| e.to_string())?;
        return Ok(SystemFile { system, init: None });
    }
    let mut m = None;
    let mut init = None;
    let mut rules = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| format!("line {}: {msg}", n + 1);
        if let Some(q) = line.strip_prefix("init ").filter(|r| r.trim_start().starts_with('[')) {
            init = Some(q.parse::<Queue>().map_err(|e| bad(e.to_string()))?);
        } else if let Some((lhs, rhs)) = line.split_once(':') {
            let lhs = tag::Symbol::new(lhs.trim()).map_err(|e| bad(e.to_string()))?;
            rules.push((lhs, word(rhs).map_err(|e| bad(e.to_string()))?));
        } else if let Some(v) = line.strip_prefix("m ") {
            m = Some(v.trim().parse::<usize>().map_err(|e| bad(e.to_string()))?);
        } else {
            return Err(bad(format!(
                "expected `m N`, `init [..]` or `symbol : production`, got {line:?}"
            )));
        }
    }
    let m = m.ok_or("missing `m N` line")?;
    Ok(SystemFile {
        system: TagSystem::from_rules(m, rules),
        init,
    })
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (system, init, budget) = match (&a.system, &a.dataset, &a.id) {
        (Some(path), _, _) => {
            let file = parse_system(&read_text(path)?).class(Class::Input, || path.display().to_string())?;
            let init = match (a.init.as_deref(), file.init) {
                (Some(text), _) => text.parse().class(Class::Usage, || "--init".into())?,
                (None, Some(q)) => q,
                (None, None) => {
                    return Err(Failure::new(
                        Class::Usage,
                        "--init is required when the file has no init line",
                    ))
                }
            };
            (file.system, init, 30)
        }
        (None, Some(path), Some(id)) => {
            let inst = load_dataset(path)?
                .into_iter()
                .find(|d| &d.id == id)
                .ok_or_else(|| Failure::new(Class::Input, format!("no instance {id} in {}", path.display())))?;
            (inst.system, inst.init, inst.max_steps)
        }
        _ => {
            return Err(Failure::new(
                Class::Usage,
                "give --system and --init, or --dataset and --id",
            ))
        }
    };
    let trace = tag::run(&system, &init, a.steps.unwrap_or(budget)).class(Class::Input, || "system".into())?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for (i, q) in trace.steps.iter().enumerate() {
        let note = if i == 0 {
            " (Init)"
        } else if trace.halt_step == Some(i) {
            " (Halt)"
        } else {
            ""
        };
        writeln!(out, "{i}. {q}{note}").class(Class::Io, || "stdout".into())?;
    }
    Ok(())
}

fn load_tm(path: &Path) -> Result<TuringMachine, Failure> {
    TuringMachine::parse(&read_text(path)?).class(Class::Input, || path.display().to_string())
}

fn compile_tm(a: CompileArgs) -> Result<(), Failure> {
    let tm = load_tm(&a.tm)?;
    let prog = compile(&tm).class(Class::Input, || a.tm.display().to_string())?;
    let symbols = a.symbols.unwrap_or_else(|| {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".symbols.json");
        PathBuf::from(p)
    });
    write_json(&a.out, prog.system())?;
    write_json(&symbols, &prog.symbol_table())?;
    println!(
        "{} states -> {} symbols; wrote {} and {}",
        tm.states().len(),
        prog.system().alphabet.len(),
        a.out.display(),
        symbols.display()
    );
    Ok(())
}

fn verify_utm(a: VerifyArgs) -> Result<(), Failure> {
    if let Some(machines) = a.random {
        let plan = FuzzPlan {
            seed: a.seed.expect("clap requires --seed"),
            machines,
            configs_per_machine: a.configs_per_machine,
            tm_steps: a.tm_steps,
            counter_bound: a.counter_bound,
        };
        let summary = fuzz(&plan).class(Class::Check, || "fuzz".into())?;
        for case in summary.cases.iter().filter(|c| !c.report.passed) {
            let d = case.report.divergence.as_ref();
            eprintln!(
                "machine {} from {}: {}",
                case.machine,
                case.start,
                d.map_or("", |d| d.detail.as_str())
            );
        }
        let total = summary.cases.len();
        let passed = summary.passed();
        let verdict = if passed == total { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {passed}/{total} cases ({machines} machines, {} TM steps)",
            a.tm_steps
        );
        return if passed == total {
            Ok(())
        } else {
            Err(Failure::new(
                Class::Check,
                format!("{} of {total} cases diverged", total - passed),
            ))
        };
    }
    let path = a.tm.expect("clap requires --tm");
    let cfg = a.config.expect("clap requires --config");
    let tm = load_tm(&path)?;
    let prog = compile(&tm).class(Class::Input, || path.display().to_string())?;
    let report = verify_compiled(&prog, &cfg, a.tm_steps);
    let halted = report
        .halted_at
        .map_or(String::new(), |h| format!(", halted after {h}"));
    if report.passed {
        println!(
            "PASS {} TM steps, {} tag steps{halted}",
            report.tm_steps, report.tag_steps
        );
        Ok(())
    } else {
        let d = report.divergence.expect("failed reports carry a divergence");
        println!("FAIL at TM step {}: {}", d.tm_step, d.detail);
        Err(Failure::new(Class::Check, format!("diverged at TM step {}", d.tm_step)))
    }
}

fn render(a: RenderArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.dataset)?;
    let text = |d: &BenchmarkInstance| {
        if a.truth {
            format_ground_truth(d)
        } else {
            render_prompt(d)
        }
    };
    if let Some(id) = &a.id {
        let inst = data
            .iter()
            .find(|d| &d.id == id)
            .ok_or_else(|| Failure::new(Class::Input, format!("no instance {id} in {}", a.dataset.display())))?;
        print!("{}", text(inst));
        return Ok(());
    }
    let out = a.out.expect("clap requires --out without --id");
    write_atomic(&out, |w| {
        for d in &data {
            let line = if a.truth {
                serde_json::to_string(&TranscriptRecord {
                    id: d.id.clone(),
                    model: "ground-truth".into(),
                    prompt: render_prompt(d),
                    response: Some(format_ground_truth(d)),
                    usage: None,
                    error: None,
                    attempts: None,
                })
            } else {
                serde_json::to_string(&serde_json::json!({"id": d.id, "prompt": render_prompt(d)}))
            };
            writeln!(w, "{}", line.map_err(std::io::Error::other)?)?;
        }
        Ok(())
    })?;
    println!("wrote {} records to {}", data.len(), out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let mut cfg =
        RunnerConfig::from_toml(&read_text(&a.config)?).class(Class::Usage, || a.config.display().to_string())?;
    if let Some(j) = a.jobs {
        cfg.max_in_flight = j;
        cfg.validate().class(Class::Usage, || "--jobs".into())?;
    }
    let data = load_dataset(&a.dataset)?;
    let client = LlmClient::new(cfg).map_err(|e| match e {
        ClientError::MissingKey(_) => Failure::new(Class::Remote, e.to_string()),
        _ => Failure::new(Class::Usage, e.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new().class(Class::Io, || "starting runtime".into())?;
    let summary = runtime
        .block_on(run_benchmark(&client, &data, &a.out))
        .class(Class::Io, || a.out.display().to_string())?;
    println!(
        "requested {}, succeeded {}, failed {}, skipped {}",
        summary.requested, summary.succeeded, summary.failed, summary.skipped
    );
    Ok(())
}

fn score_cmd(a: ScoreArgs) -> Result<(), Failure> {
    let data = load_dataset(&a.dataset)?;
    let text = read_text(&a.transcripts)?;
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: TranscriptRecord =
            serde_json::from_str(line).class(Class::Input, || format!("{} line {}", a.transcripts.display(), n + 1))?;
        records.push(r);
    }
    let model = a
        .model
        .or_else(|| records.first().map(|r| r.model.clone()))
        .unwrap_or_else(|| "unknown".into());
    let judgments = judge_all(&data, &records);
    let report = score(&model, &data, &judgments).class(Class::Input, || "score".into())?;
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    if let Some(path) = &a.csv {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["step", "acc", "n_correct", "n_total"])?;
            for p in &report.acc_curve {
                let acc = p.acc.map_or(String::new(), |v| v.to_string());
                csv.write_record([p.step.to_string(), acc, p.n_correct.to_string(), p.n_total.to_string()])?;
            }
            csv.flush()
        })?;
    }
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.1}", percent(v)));
    println!(
        "{model}: SWA uniform {} | SWA linear {} | pass rate {:.1} | {} instances",
        pct(report.swa_uniform),
        pct(report.swa_linear),
        percent(report.pass_rate),
        report.n_instances
    );
    Ok(())
}

fn truthy(v: &str) -> bool {
    matches!(v.trim().to_ascii_lowercase().as_str(), "1" | "true" | "yes")
}

fn stats(a: StatsArgs) -> Result<(), Failure> {
    let ctx = || a.csv.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(&a.csv)
        .class(Class::Io, ctx)?;
    let headers = reader.headers().class(Class::Input, ctx)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::new(Class::Usage, format!("no column {name:?} in {}", ctx())))
    };
    let x_col = col(&a.x)?;
    let y_cols = a.y.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    let filter_col = a.filter.as_deref().map(col).transpose()?;
    let (mut labels, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    for (n, row) in reader.records().enumerate() {
        let row = row.class(Class::Input, ctx)?;
        if filter_col.is_some_and(|c| !truthy(&row[c])) {
            continue;
        }
        let num = |c: usize| {
            row[c].parse::<f64>().class(Class::Input, || {
                format!("{} row {} column {}", ctx(), n + 1, &headers[c])
            })
        };
        xs.push(num(x_col)?);
        let mut sum = 0.0;
        for &c in &y_cols {
            sum += num(c)?;
        }
        ys.push(sum / y_cols.len() as f64);
        labels.push(row[0].to_string());
    }
    if a.normalize {
        xs = minmax_normalize(&xs).class(Class::Input, || a.x.clone())?;
        ys = minmax_normalize(&ys).class(Class::Input, || a.y.join(","))?;
    }
    let r = pearson(&xs, &ys).class(Class::Input, || "pearson".into())?;
    let fit = linear_fit(&xs, &ys).class(Class::Input, || "fit".into())?;
    println!("n = {}", xs.len());
    println!("pearson r = {r:.4}");
    println!(
        "fit: y = {:.6} * x + {:.6}, r^2 = {:.4}",
        fit.slope, fit.intercept, fit.r_squared
    );
    if let Some(path) = &a.residuals {
        write_atomic(path, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record([headers[0].to_string(), a.x.clone(), "y".into(), "residual".into()])?;
            for i in 0..xs.len() {
                csv.write_record([
                    labels[i].clone(),
                    xs[i].to_string(),
                    ys[i].to_string(),
                    fit.residuals[i].to_string(),
                ])?;
            }
            csv.flush()
        })?;
    }
    Ok(())
}
