use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{initial_program, Engine, EngineError, RunRecord, RunState, StageBest, StageRunner};
use crate::candidate::Candidate;
use crate::catalog::{draw, oracle_def, oracle_eval, Example, Task, TaskDef};
use crate::curriculum::StageSlice;
use crate::llm::{ChatRequest, LlmError, Message};
use crate::prompt::{render_proposal, system_message, TaskHeader};
use crate::value::{values_equal, Value};

/// Random draws tried when the model fails to supply enough inputs.
const FALLBACK_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutonomousConfig {
    pub initial_examples: usize,
    pub examples_per_round: usize,
    pub max_iterations: usize,
    pub patience: usize,
    pub max_reprompts: usize,
}

impl Default for AutonomousConfig {
    fn default() -> Self {
        AutonomousConfig {
            initial_examples: 2,
            examples_per_round: 2,
            max_iterations: 50,
            patience: 5,
            max_reprompts: 3,
        }
    }
}

impl AutonomousConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.initial_examples == 0 || self.max_iterations == 0 || self.patience == 0 {
            return Err("autonomous initial_examples, max_iterations and patience must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AutonomousTrace {
    /// Example-set size at each iteration.
    pub example_counts: Vec<usize>,
    pub proposal_calls: usize,
    pub rejected_proposals: usize,
    pub fallback_inputs: usize,
    pub consecutive_all_pass: usize,
}

/// Pulls the JSON array out of a proposal reply: a fenced `json` block if
/// present, else the span from the first `[` to the last `]`.
fn extract_array(reply: &str) -> Option<Vec<serde_json::Value>> {
    let fenced = reply.split("```json").nth(1).and_then(|rest| rest.split("```").next());
    let body = match fenced {
        Some(b) => b,
        None => {
            let (start, end) = (reply.find('[')?, reply.rfind(']')?);
            reply.get(start..=end)?
        }
    };
    match serde_json::from_str(body.trim()).ok()? {
        serde_json::Value::Array(items) => Some(items),
        _ => None,
    }
}

fn known_input(known: &[Example], input: &Value) -> bool {
    known.iter().any(|e| values_equal(&e.input, input, 0.0))
}

fn passes_all(c: &Candidate) -> bool {
    c.current.total > 0 && c.current.correct == c.current.total
}

fn stage_best(round: usize, examples: usize, best: &Candidate, iterations: usize) -> StageBest {
    StageBest {
        stage: round,
        examples,
        candidate_id: best.id.clone(),
        source: best.source.clone(),
        source_len: best.source.chars().count(),
        score: best.score,
        iterations,
    }
}

struct Proposer<'r> {
    task: &'r Task,
    header: &'r TaskHeader,
    def: &'static TaskDef,
    rng: ChaCha8Rng,
}

impl Engine<'_> {
    /// Grows its own example set: the model proposes inputs, the oracle labels
    /// them, and the search continues until the best program has passed every
    /// example for `patience` consecutive iterations.
    pub fn run_autonomous(&self, task: &Task, run_key: &str) -> Result<RunRecord, EngineError> {
        let cfg = &self.config;
        let acfg = &cfg.autonomous;
        let header = TaskHeader::of(task);
        let evaluator = self.evaluator(task);
        let def = oracle_def(&task.oracle_id).map_err(|e| EngineError::Task(task.id.clone(), e.to_string()))?;
        let mut proposer = Proposer {
            task,
            header: &header,
            def,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA076_1D64_78BD_642F),
        };
        let mut state = RunState::new(run_key);
        let mut trace = AutonomousTrace::default();

        let mut examples = self.propose(&mut proposer, &[], None, acfg.initial_examples, &mut state, &mut trace)?;
        let mut round = 1;
        let slice = StageSlice {
            index: round,
            current: examples.clone(),
            delta: examples.clone(),
            replay: Vec::new(),
        };
        let seed = initial_program(&task.function_name);
        let mut runner = StageRunner::new(self, &header, evaluator, slice, &seed, None, 0, &mut state)?;
        let mut stage_bests = Vec::new();
        let (mut iter, mut round_iters, mut early_stop) = (0, 0, false);
        while iter < acfg.max_iterations {
            iter += 1;
            round_iters += 1;
            runner.step(iter, &mut state)?;
            if state.llm_dead() {
                return Err(EngineError::Llm(LlmError::Unavailable(
                    "every model call of the run failed".into(),
                )));
            }
            trace.example_counts.push(examples.len());
            if !passes_all(runner.best()) {
                trace.consecutive_all_pass = 0;
                continue;
            }
            trace.consecutive_all_pass += 1;
            if trace.consecutive_all_pass >= acfg.patience {
                early_stop = true;
                break;
            }
            if iter == acfg.max_iterations {
                break;
            }
            let best = runner.best().clone();
            let new = self.propose(
                &mut proposer,
                &examples,
                Some(&best.source),
                acfg.examples_per_round,
                &mut state,
                &mut trace,
            )?;
            if new.is_empty() {
                continue;
            }
            stage_bests.push(stage_best(round, examples.len(), &best, round_iters));
            examples.extend(new.iter().cloned());
            round += 1;
            round_iters = 0;
            let slice = StageSlice {
                index: round,
                current: examples.clone(),
                delta: new,
                replay: Vec::new(),
            };
            runner = StageRunner::new(
                self,
                &header,
                evaluator,
                slice,
                &best.source,
                Some(&best),
                iter,
                &mut state,
            )?;
        }

        let best = runner.best().clone();
        stage_bests.push(stage_best(round, examples.len(), &best, round_iters));
        let hidden = evaluator.heldout_eval(&best.source, task)?;
        Ok(self.finish(
            task,
            run_key,
            None,
            stage_bests,
            best,
            hidden,
            iter,
            early_stop,
            state,
            Some(trace),
            &examples,
        ))
    }

    /// Up to `max_reprompts + 1` model calls for `count` new labelled
    /// examples; whatever is still missing is drawn at random.
    fn propose(
        &self,
        p: &mut Proposer,
        known: &[Example],
        best_source: Option<&str>,
        count: usize,
        state: &mut RunState,
        trace: &mut AutonomousTrace,
    ) -> Result<Vec<Example>, EngineError> {
        let cfg = &self.config;
        let mut accepted: Vec<Example> = Vec::new();
        let mut rejection: Option<String> = None;
        for _ in 0..=cfg.autonomous.max_reprompts {
            if accepted.len() >= count {
                break;
            }
            let seen: Vec<Example> = known.iter().chain(&accepted).cloned().collect();
            let prompt = render_proposal(
                p.header,
                &seen,
                best_source,
                count - accepted.len(),
                rejection.as_deref(),
            );
            let call_index = state.take_call_index();
            let mut request = ChatRequest::new(
                vec![Message::system(system_message()), Message::user(prompt)],
                &state.run_key,
                call_index,
            );
            request.temperature = cfg.temperature;
            request.max_tokens = cfg.max_tokens;
            trace.proposal_calls += 1;
            state.llm_calls += 1;
            let reply = match self.llm.complete(&request) {
                Ok(r) => r,
                Err(e @ LlmError::MockScriptViolation(_)) => return Err(EngineError::Llm(e)),
                Err(e) => {
                    log::warn!("input proposal failed: {e}");
                    state.llm_failures += 1;
                    if matches!(e, LlmError::Unavailable(_)) {
                        state.llm_unavailable += 1;
                    }
                    continue;
                }
            };
            state.usage.calls += 1;
            state.usage.prompt_tokens += reply.prompt_tokens;
            state.usage.completion_tokens += reply.completion_tokens;

            let Some(items) = extract_array(&reply.content) else {
                trace.rejected_proposals += 1;
                rejection = Some("The reply did not contain a JSON array of inputs.".into());
                continue;
            };
            let mut reasons = Vec::new();
            for item in items {
                if accepted.len() >= count {
                    break;
                }
                let checked = p.task.domain.coerce_plain(&item).and_then(|input| {
                    if known_input(known, &input) || known_input(&accepted, &input) {
                        return Err(format!("{} was already queried", input.literal_form()));
                    }
                    let output = oracle_eval(&p.task.oracle_id, &input).map_err(|e| e.to_string())?;
                    Ok(Example::new(input, output))
                });
                match checked {
                    Ok(ex) => accepted.push(ex),
                    Err(why) => {
                        trace.rejected_proposals += 1;
                        reasons.push(format!("- {item}: {why}"));
                    }
                }
            }
            rejection = (!reasons.is_empty()).then(|| reasons.join("\n"));
        }

        let mut tries = 0;
        while accepted.len() < count && tries < FALLBACK_DRAWS {
            tries += 1;
            let input = draw(p.def, &mut p.rng);
            if known_input(known, &input) || known_input(&accepted, &input) {
                continue;
            }
            let output = oracle_eval(&p.task.oracle_id, &input)
                .map_err(|e| EngineError::Task(p.task.id.clone(), e.to_string()))?;
            accepted.push(Example::new(input, output));
            trace.fallback_inputs += 1;
        }
        Ok(accepted)
    }
}

#[cfg(test)]
mod tests {
    use super::extract_array;
    use serde_json::json;

    #[test]
    fn arrays_are_found() {
        assert_eq!(
            extract_array("```json\n[1, [2, 3]]\n```"),
            Some(vec![json!(1), json!([2, 3])])
        );
        assert_eq!(extract_array("try [4, 5] then"), Some(vec![json!(4), json!(5)]));
        assert_eq!(extract_array("```json\n{\"a\": 1}\n```"), None);
        assert_eq!(extract_array("nothing here"), None);
        assert_eq!(extract_array("] backwards ["), None);
    }
}
