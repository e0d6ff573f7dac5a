//! Prompt rendering, reference transcripts and transcript parsing.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::generate::BenchmarkInstance;
use crate::tag::{Queue, Symbol};

/// The one-shot prompt. Slots are `{m}`, `{ALPHABET}`, `{INIT}`, `{RULES}`
/// and `{MAX_STEPS}`; `{{` and `}}` stand for literal braces.
pub const PROMPT_TEMPLATE: &str = include_str!("../assets/prompt_template.txt");

/// Fills `template` from `slot`. Unknown or unterminated slots are kept
/// verbatim.
fn fill(template: &str, slot: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('{') {
            if let Some(end) = tail.find('}') {
                if let Some(value) = slot(&tail[1..end]) {
                    out.push_str(&value);
                    rest = &tail[end + 1..];
                    continue;
                }
            }
        }
        out.push_str(&tail[..1]);
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

fn join(symbols: &[Symbol]) -> String {
    symbols.iter().map(Symbol::as_str).collect::<Vec<_>>().join(" ")
}

pub fn render_prompt(instance: &BenchmarkInstance) -> String {
    let sys = &instance.system;
    fill(PROMPT_TEMPLATE, |name| {
        Some(match name {
            "m" => sys.m.to_string(),
            "MAX_STEPS" => instance.max_steps.to_string(),
            "ALPHABET" => {
                let names: Vec<&str> = sys.alphabet.iter().map(Symbol::as_str).collect();
                format!("{{{}}}", names.join(", "))
            }
            "INIT" => instance.init.to_string(),
            "RULES" => sys
                .alphabet
                .iter()
                .map(|s| format!("{s} : {}", join(&sys.rules[s])))
                .collect::<Vec<_>>()
                .join("\n"),
            _ => return None,
        })
    })
}

/// The instance's trace written the way models are asked to answer.
pub fn format_ground_truth(instance: &BenchmarkInstance) -> String {
    let trace = &instance.trace;
    let m = instance.system.m;
    let halt = |i: usize| if trace.halt_step == Some(i) { " <halt>" } else { "" };
    let mut out = String::from("Simulation steps:\n");
    out.push_str(&format!(
        "### step 0:\n- Action: Init\n- Queue State: {}{}\n",
        trace.steps[0],
        halt(0)
    ));
    for (i, pair) in trace.steps.windows(2).enumerate() {
        let before = pair[0].cells();
        let head = &before[0];
        let body = &instance.system.rules[head];
        let appended = if body.is_empty() {
            "nothing".to_string()
        } else {
            join(body)
        };
        out.push_str(&format!(
            "### step {}:\n- Head Symbol: {head}\n- Action: Append {appended} to the end of the queue. Remove {} from the head.\n- Queue State: {}{}\n",
            i + 1,
            join(&before[..m]),
            pair[1],
            halt(i + 1)
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedStep {
    pub index: usize,
    /// Tokens between the brackets; not necessarily valid symbols.
    pub queue: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedTrace {
    /// Strictly increasing step indices.
    pub steps: Vec<PredictedStep>,
    pub halt_claimed_at: Option<usize>,
    pub warnings: Vec<String>,
}

impl PredictedTrace {
    pub fn step(&self, index: usize) -> Option<&PredictedStep> {
        self.steps
            .binary_search_by_key(&index, |s| s.index)
            .ok()
            .map(|i| &self.steps[i])
    }

    pub fn last_index(&self) -> Option<usize> {
        self.steps.last().map(|s| s.index)
    }

    /// Whether step `index` holds exactly the symbols of `queue`.
    pub fn matches(&self, index: usize, queue: &Queue) -> bool {
        self.step(index).is_some_and(|s| {
            s.queue.len() == queue.len() && s.queue.iter().zip(queue.cells()).all(|(a, b)| a == b.as_str())
        })
    }
}

static STEP_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[\s#*_>]*step\s+(\d+)[\s*_]*(?::|$)").unwrap());
static QUEUE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)queue\s*state[\s*_]*:[\s*_]*\[([^\]]*)\](.*)$").unwrap());

struct Block {
    index: usize,
    queue: Option<(Vec<String>, bool)>,
    queue_lines: usize,
}

/// Extracts the queue of every step block of a model response.
///
/// Never fails; anything unusable is reported in `warnings`.
pub fn parse_transcript(text: &str) -> PredictedTrace {
    let mut warnings = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut stray = 0usize;
    for line in text.lines() {
        if let Some(c) = STEP_HEADER.captures(line) {
            match c[1].parse::<usize>() {
                Ok(index) => blocks.push(Block {
                    index,
                    queue: None,
                    queue_lines: 0,
                }),
                Err(_) => warnings.push(format!("step number out of range: {}", &c[1])),
            }
            continue;
        }
        if let Some(c) = QUEUE_LINE.captures(line) {
            let Some(block) = blocks.last_mut() else {
                stray += 1;
                continue;
            };
            let tokens = c[1].replace(',', " ").split_whitespace().map(str::to_string).collect();
            block.queue = Some((tokens, c[2].contains("<halt>")));
            block.queue_lines += 1;
        }
    }
    if stray > 0 {
        warnings.push(format!("{stray} queue state line(s) outside any step"));
    }

    let mut steps: Vec<PredictedStep> = Vec::new();
    let mut halt_claimed_at = None;
    for block in blocks {
        if block.queue_lines > 1 {
            warnings.push(format!(
                "step {}: {} queue states, kept the last",
                block.index, block.queue_lines
            ));
        }
        let Some((queue, halt)) = block.queue else {
            warnings.push(format!("step {}: no queue state", block.index));
            continue;
        };
        if let Some(last) = steps.last() {
            if block.index <= last.index {
                let kind = if steps.iter().any(|s| s.index == block.index) {
                    "duplicate"
                } else {
                    "out-of-order"
                };
                warnings.push(format!("step {}: {kind} step ignored", block.index));
                continue;
            }
        }
        if halt && halt_claimed_at.is_none() {
            halt_claimed_at = Some(block.index);
        }
        steps.push(PredictedStep {
            index: block.index,
            queue,
        });
    }
    if steps.is_empty() {
        warnings.push("no steps found".to_string());
    } else if steps[0].index != 0 {
        warnings.push("step 0 missing".to_string());
    }
    PredictedTrace {
        steps,
        halt_claimed_at,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub id: String,
    pub model: String,
    pub prompt: String,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub usage: Option<Usage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
}

impl TranscriptRecord {
    pub fn is_success(&self) -> bool {
        self.response.is_some() && self.error.is_none()
    }
}
