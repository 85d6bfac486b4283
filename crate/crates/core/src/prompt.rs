//! Mutation prompts: curriculum examples, context programs, failure feedback
//! and the transformation-priority guidance.

use std::collections::HashMap;
use std::fmt::Write;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::catalog::Task;
use crate::curriculum::StageSlice;
use crate::scoring::{FailureArtifact, Origin, StageScore};
use crate::source::sha256_hex;

const TEMPLATE: &str = include_str!("../assets/mutation_prompt.v1.txt");
pub const TEMPLATE_VERSION: &str = "mutation_prompt.v1";

pub const TRANSFORMATIONS: [&str; 7] = [
    "nil→constant",
    "constant→scalar",
    "statement→statements",
    "unconditional→if",
    "scalar→array",
    "if→while",
    "expression→function",
];

pub const NEW_MARKER: &str = "[NEW]";

static SECTIONS: LazyLock<HashMap<&'static str, String>> = LazyLock::new(|| parse_template(TEMPLATE));

fn parse_template(text: &'static str) -> HashMap<&'static str, String> {
    let mut out = HashMap::new();
    let mut name: Option<&'static str> = None;
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("@@ ") {
            if let Some(n) = name.take() {
                out.insert(n, std::mem::take(&mut body).trim_end().to_string());
            }
            name = Some(rest.trim());
        } else if name.is_some() {
            body.push_str(line);
            body.push('\n');
        }
    }
    if let Some(n) = name {
        out.insert(n, body.trim_end().to_string());
    }
    out
}

fn section(name: &str) -> &'static str {
    SECTIONS
        .get(name)
        .unwrap_or_else(|| panic!("prompt template lacks section {name}"))
}

/// sha256 of the prompt template asset, recorded with every run.
pub fn template_hash() -> String {
    sha256_hex(TEMPLATE.as_bytes())
}

pub fn system_message() -> &'static str {
    section("system")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Red,
    Green,
    Refactor,
}

pub fn select_phase(parent: &StageScore) -> Phase {
    if parent.acc_curr < 0.5 {
        Phase::Red
    } else if parent.acc_curr < 1.0 {
        Phase::Green
    } else {
        Phase::Refactor
    }
}

/// Switches used by the ablation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    /// Transformation list and phase guidance.
    pub tpp: bool,
    /// Concrete failure cases; otherwise only scalar scores are shown.
    pub explicit_feedback: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            tpp: true,
            explicit_feedback: true,
        }
    }
}

/// The public face of a task. Built from a [`Task`] without its hidden examples.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskHeader {
    pub id: String,
    pub function_name: String,
    pub domain: String,
}

impl TaskHeader {
    pub fn of(task: &Task) -> Self {
        TaskHeader {
            id: task.id.clone(),
            function_name: task.function_name.clone(),
            domain: task.domain.describe(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptContext<'a> {
    pub task: &'a TaskHeader,
    pub parent: &'a Candidate,
    pub best_two: [&'a Candidate; 2],
    pub inspiration: &'a Candidate,
    pub slice: &'a StageSlice,
    /// Parent's own failures, then up to two inherited bundles.
    pub feedback_chain: Vec<Vec<FailureArtifact>>,
    pub phase: Phase,
    pub options: PromptOptions,
}

impl<'a> PromptContext<'a> {
    pub fn new(
        task: &'a TaskHeader,
        parent: &'a Candidate,
        best_two: [&'a Candidate; 2],
        inspiration: &'a Candidate,
        slice: &'a StageSlice,
        options: PromptOptions,
    ) -> Self {
        PromptContext {
            task,
            parent,
            best_two,
            inspiration,
            slice,
            feedback_chain: parent.feedback_chain(),
            phase: select_phase(&parent.score),
            options,
        }
    }
}

fn call(fn_name: &str, input: &crate::Value) -> String {
    format!("{fn_name}({})", input.literal_form())
}

fn program_block(out: &mut String, title: &str, c: &Candidate) {
    let _ = writeln!(
        out,
        "## {title} [{}] (accuracy {:.3}, score {:.4})",
        c.id, c.score.acc_curr, c.score.total
    );
    out.push_str("```python\n");
    out.push_str(c.source.trim_end_matches('\n'));
    out.push_str("\n```\n\n");
}

fn origin_label(o: Origin) -> &'static str {
    match o {
        Origin::Current => "current",
        Origin::Replay => "replay",
        Origin::Heldout => "held-out",
    }
}

fn feedback_block(out: &mut String, ctx: &PromptContext) {
    out.push_str("## Feedback\n");
    let p = &ctx.parent;
    if !ctx.options.explicit_feedback {
        let _ = writeln!(
            out,
            "Parent passes {}/{} current examples (accuracy {:.3}); replay accuracy {:.3}; stage score {:.4}.\n",
            p.current.correct, p.current.total, p.current.accuracy, p.replay.accuracy, p.score.total
        );
        return;
    }
    for (depth, bundle) in ctx.feedback_chain.iter().enumerate() {
        match depth {
            0 => out.push_str("Failures of the parent:\n"),
            1 => out.push_str("Failures inherited from its parent:\n"),
            n => {
                let _ = writeln!(out, "Failures inherited from {n} generations back:");
            }
        }
        if bundle.is_empty() {
            out.push_str("- none\n");
        }
        for a in bundle {
            let _ = writeln!(
                out,
                "- [{}] {} expected {}, got {}",
                origin_label(a.origin),
                call(&ctx.task.function_name, &a.input),
                a.expected.literal_form(),
                a.got.describe()
            );
            if let Some((_, stderr)) = a.note.split_once("\nstderr: ") {
                for line in stderr.lines() {
                    let _ = writeln!(out, "    | {line}");
                }
            }
        }
    }
    out.push('\n');
}

/// Renders the mutation prompt. Deterministic in `ctx`.
pub fn render_prompt(ctx: &PromptContext) -> String {
    let mut out = String::new();
    let fn_name = &ctx.task.function_name;

    out.push_str("## Task\n");
    out.push_str(
        &section("header")
            .replace("{task}", &ctx.task.id)
            .replace("{fn}", fn_name)
            .replace("{domain}", &ctx.task.domain),
    );
    out.push_str("\n\n");
    let new_from = ctx.slice.new_from();
    for (i, ex) in ctx.slice.current.iter().enumerate() {
        let _ = write!(out, "{} == {}", call(fn_name, &ex.input), ex.output.literal_form());
        if i >= new_from && !ctx.slice.delta.is_empty() {
            let _ = write!(out, "  {NEW_MARKER}");
        }
        out.push('\n');
    }
    out.push('\n');

    program_block(&mut out, "Parent program", ctx.parent);
    program_block(&mut out, "Best program on this island", ctx.best_two[0]);
    program_block(&mut out, "Second best program on this island", ctx.best_two[1]);
    program_block(&mut out, "Inspiration program", ctx.inspiration);

    feedback_block(&mut out, ctx);

    if ctx.options.tpp {
        out.push_str("## Transformation priority\n");
        out.push_str(section("tpp"));
        out.push_str("\n\n");
        out.push_str(section(match ctx.phase {
            Phase::Red => "phase.red",
            Phase::Green => "phase.green",
            Phase::Refactor => "phase.refactor",
        }));
        out.push_str("\n\n");
    }

    out.push_str("## Rules\n");
    out.push_str(section("anti_hardcoding"));
    out.push_str("\n\n## Output format\n");
    out.push_str(section("format"));
    out.push('\n');
    out
}

/// Prompt asking the model for `count` fresh inputs to query.
pub fn render_proposal(
    task: &TaskHeader,
    known: &[crate::catalog::Example],
    best_source: Option<&str>,
    count: usize,
    rejection: Option<&str>,
) -> String {
    let mut out = String::from("## Input proposal\n");
    out.push_str(
        &section("propose")
            .replace("{task}", &task.id)
            .replace("{fn}", &task.function_name)
            .replace("{domain}", &task.domain)
            .replace("{count}", &count.to_string()),
    );
    out.push_str("\n\n## Queried so far\n");
    if known.is_empty() {
        out.push_str("- nothing yet\n");
    }
    for ex in known {
        let _ = writeln!(
            out,
            "{} == {}",
            call(&task.function_name, &ex.input),
            ex.output.literal_form()
        );
    }
    if let Some(src) = best_source {
        out.push_str("\n## Current best program\n```python\n");
        out.push_str(src.trim_end_matches('\n'));
        out.push_str("\n```\n");
    }
    if let Some(why) = rejection {
        let _ = write!(out, "\n## Previous proposal rejected\n{why}\n");
    }
    out
}
