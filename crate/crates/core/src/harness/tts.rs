use std::collections::BTreeMap;

use super::{per_task, AblationFlags, HarnessError, SuiteRun, TtsVariant};
use crate::candidate::Candidate;
use crate::catalog::Task;
use crate::curriculum::StageSlice;
use crate::engine::{
    derive_source, initial_program, EngineConfig, EngineError, Event, EventOutcome, RunRecord, Tokens,
};
use crate::executor::Executor;
use crate::llm::{ChatRequest, LlmClient, LlmError, Message, Usage};
use crate::prompt::{render_prompt, system_message, template_hash, PromptContext, TaskHeader, TEMPLATE_VERSION};
use crate::scoring::{omega_hard, Evaluator, StageEval};

struct Sample {
    id: String,
    source: String,
    eval: StageEval,
    /// Serialized visible-input behavior, for voting.
    signature: String,
}

/// Index of the winning sample. Best-of-N takes the highest visible
/// accuracy, the earliest on ties. Self-consistency takes the largest group
/// of identical visible behavior, ties to the group with the best member.
fn pick(samples: &[Sample], variant: TtsVariant) -> usize {
    let accuracy = |i: usize| samples[i].eval.current.accuracy;
    let best_of = |members: &[usize]| {
        members.iter().copied().fold(
            members[0],
            |best, i| if accuracy(i) > accuracy(best) { i } else { best },
        )
    };
    match variant {
        TtsVariant::Direct | TtsVariant::BestOfN => best_of(&(0..samples.len()).collect::<Vec<_>>()),
        TtsVariant::SelfConsistency => {
            let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
            for (i, s) in samples.iter().enumerate() {
                match groups.iter_mut().find(|(sig, _)| *sig == s.signature) {
                    Some((_, members)) => members.push(i),
                    None => groups.push((&s.signature, vec![i])),
                }
            }
            let mut winner = &groups[0].1;
            for (_, members) in &groups[1..] {
                let larger = members.len() > winner.len();
                let tie_better =
                    members.len() == winner.len() && accuracy(best_of(members)) > accuracy(best_of(winner));
                if larger || tie_better {
                    winner = members;
                }
            }
            best_of(winner)
        }
    }
}

fn baseline_task(
    task: &Task,
    cfg: &EngineConfig,
    samples: usize,
    variant: TtsVariant,
    llm: &dyn LlmClient,
    executor: &dyn Executor,
) -> Result<RunRecord, EngineError> {
    let evaluator = Evaluator::new(executor, &task.function_name).with_limits(cfg.limits());
    let header = TaskHeader::of(task);
    let slice = StageSlice::full(task.visible.clone());
    let template = initial_program(&task.function_name);
    let seed_eval = evaluator.stage_score(&template, &slice, cfg.penalties())?;
    let seed = Candidate::new("seed".into(), template.clone(), 0, 1, seed_eval, 0, None);
    let ctx = PromptContext::new(&header, &seed, [&seed, &seed], &seed, &slice, cfg.prompt);
    let messages = vec![Message::system(system_message()), Message::user(render_prompt(&ctx))];

    let mut usage = Usage::default();
    let mut events = Vec::with_capacity(samples);
    let mut candidates = BTreeMap::from([(seed.id.clone(), template.clone())]);
    let mut drawn: Vec<Sample> = Vec::new();
    let (mut unavailable, mut failures, mut skipped) = (0, 0, 0);
    for k in 0..samples {
        let mut request = ChatRequest::new(messages.clone(), &task.id, k);
        request.temperature = cfg.temperature;
        request.max_tokens = cfg.max_tokens;
        let mut event = Event {
            iter: k + 1,
            stage: 1,
            island: 0,
            parent_id: seed.id.clone(),
            child_id: None,
            outcome: EventOutcome::Inserted,
            score: None,
            tokens: Tokens::default(),
        };
        let reply = match llm.complete(&request) {
            Ok(r) => r,
            Err(e @ LlmError::MockScriptViolation(_)) => return Err(EngineError::Llm(e)),
            Err(e) => {
                log::warn!("task {} sample {k}: {e}", task.id);
                failures += 1;
                skipped += 1;
                event.outcome = if matches!(e, LlmError::Unavailable(_)) {
                    unavailable += 1;
                    EventOutcome::LlmUnavailable
                } else {
                    EventOutcome::LlmMalformed
                };
                events.push(event);
                continue;
            }
        };
        usage.add(&reply);
        event.tokens = Tokens {
            prompt: reply.prompt_tokens,
            completion: reply.completion_tokens,
        };
        match derive_source(&template, &reply.content) {
            Ok(source) => {
                let id = format!("n{k}");
                let eval = evaluator.stage_score(&source, &slice, cfg.penalties())?;
                let outcomes = evaluator.outcomes(&source, &task.visible)?;
                event.child_id = Some(id.clone());
                event.score = Some(eval.score);
                candidates.insert(id.clone(), source.clone());
                drawn.push(Sample {
                    id,
                    source,
                    eval,
                    signature: serde_json::to_string(&outcomes).expect("outcomes serialize"),
                });
            }
            Err(outcome) => {
                skipped += 1;
                event.outcome = outcome;
            }
        }
        events.push(event);
    }
    if unavailable == samples {
        return Err(EngineError::Llm(LlmError::Unavailable(
            "every model call of the run failed".into(),
        )));
    }

    let (final_id, final_source, final_eval) = if drawn.is_empty() {
        let eval = StageEval {
            score: seed.score,
            current: seed.current.clone(),
            replay: seed.replay.clone(),
        };
        (seed.id.clone(), template, eval)
    } else {
        let w = drawn.swap_remove(pick(&drawn, variant));
        (w.id, w.source, w.eval)
    };
    let hidden = evaluator.heldout_eval(&final_source, task)?;
    Ok(RunRecord {
        task_id: task.id.clone(),
        family: task.family,
        level: task.level,
        run_key: task.id.clone(),
        mode: variant.label().to_string(),
        config: cfg.clone(),
        prompt_template: TEMPLATE_VERSION.to_string(),
        prompt_template_hash: template_hash(),
        curriculum: None,
        stage_bests: Vec::new(),
        iteration_bests: Vec::new(),
        final_candidate_id: final_id,
        final_visible_accuracy: final_eval.current.accuracy,
        copy_frequency: omega_hard(&final_source, &task.visible),
        final_source,
        solved: hidden.solved(),
        hidden,
        hidden_eval_count: 1,
        iterations_run: samples,
        early_stop: false,
        usage,
        llm_failures: failures,
        skipped_iterations: skipped,
        checkpoints: Vec::new(),
        autonomous: None,
        events,
        candidates,
    })
}

/// Sampling baselines: `samples` independent completions of one prompt from
/// the initial program (one for Direct), a winner per variant, and one
/// hidden evaluation of the winner.
pub fn run_tts_baselines(
    tasks: &[Task],
    config: &EngineConfig,
    samples: usize,
    variant: TtsVariant,
    llm: &dyn LlmClient,
    executor: &dyn Executor,
    workers: usize,
) -> Result<SuiteRun, HarnessError> {
    if samples == 0 {
        return Err(HarnessError::InvalidSamples);
    }
    let samples = if variant == TtsVariant::Direct { 1 } else { samples };
    let mut cfg = config.clone();
    cfg.stages = 1;
    let results = per_task(tasks, workers, |task| {
        baseline_task(task, &cfg, samples, variant, llm, executor)
    })?;
    Ok(SuiteRun::collect(
        variant.label(),
        AblationFlags::of(&cfg, Some(samples)),
        tasks,
        results,
    ))
}
