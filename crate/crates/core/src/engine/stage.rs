use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::island::{build_context, insert_child, migrate, sample_parent, Island};
use super::{derive_source, Engine, EngineError, Event, EventOutcome, IterationBest, RunState, Tokens};
use crate::candidate::{rank_cmp, Candidate};
use crate::curriculum::StageSlice;
use crate::llm::{ChatRequest, LlmError, Message};
use crate::prompt::{render_prompt, system_message, PromptContext, TaskHeader};
use crate::scoring::{Evaluator, StageEval};
use crate::source::source_hash;

fn island_seed(seed: u64, stage: usize, island: usize) -> u64 {
    let mut x = seed
        ^ (stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (island as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

struct Plan {
    island: usize,
    parent: usize,
    request: ChatRequest,
}

enum Work {
    LlmFailed(EventOutcome),
    Rejected(EventOutcome),
    Duplicate,
    Evaluated(String, StageEval),
}

/// Islands working on one curriculum stage.
pub struct StageRunner<'e, 'a> {
    engine: &'e Engine<'a>,
    header: &'e TaskHeader,
    evaluator: Evaluator<'e>,
    slice: StageSlice,
    islands: Vec<Island>,
    rngs: Vec<ChaCha8Rng>,
}

impl<'e, 'a> StageRunner<'e, 'a> {
    /// Seeds every island with `seed_source` evaluated on `slice`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        engine: &'e Engine<'a>,
        header: &'e TaskHeader,
        evaluator: Evaluator<'e>,
        slice: StageSlice,
        seed_source: &str,
        previous: Option<&Candidate>,
        iter: usize,
        state: &mut RunState,
    ) -> Result<Self, EngineError> {
        let cfg = &engine.config;
        let stage = slice.index;
        let eval = evaluator.stage_score(seed_source, &slice, cfg.penalties())?;
        let mut islands = Vec::with_capacity(cfg.islands);
        let mut rngs = Vec::with_capacity(cfg.islands);
        for i in 0..cfg.islands {
            let seed = island_seed(cfg.seed, stage, i);
            let mut island = Island::new(i, seed);
            let id = format!("s{stage}-seed-i{i}");
            let mut c = Candidate::new(id.clone(), seed_source.to_string(), i, stage, eval.clone(), iter, None);
            c.parent_id = previous.map(|p| p.id.clone());
            state.candidates.insert(id, seed_source.to_string());
            island.population.push(c);
            islands.push(island);
            rngs.push(ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(StageRunner {
            engine,
            header,
            evaluator,
            slice,
            islands,
            rngs,
        })
    }

    pub fn islands(&self) -> &[Island] {
        &self.islands
    }

    pub fn slice(&self) -> &StageSlice {
        &self.slice
    }

    /// Best candidate across islands; ties go to the lower island.
    pub fn best(&self) -> &Candidate {
        self.islands
            .iter()
            .filter_map(Island::best)
            .min_by(|a, b| rank_cmp(a, b))
            .expect("seeded islands are never empty")
    }

    /// Some candidate passes every example of the slice.
    pub fn solved(&self) -> bool {
        self.islands
            .iter()
            .flat_map(|i| &i.population)
            .any(|c| c.current.total > 0 && c.current.correct == c.current.total)
    }

    /// One mutation per island, then migration on period boundaries.
    pub(crate) fn step(&mut self, iter: usize, state: &mut RunState) -> Result<(), EngineError> {
        let cfg = &self.engine.config;
        let stage = self.slice.index;

        let plans: Vec<Plan> = (0..self.islands.len()).map(|i| self.plan(i, state)).collect();

        let work = |p: &Plan| self.work(p);
        let results: Vec<Result<(Work, Tokens), EngineError>> = if cfg.parallel {
            plans.par_iter().map(work).collect()
        } else {
            plans.iter().map(work).collect()
        };

        for (plan, result) in plans.iter().zip(results) {
            let (work, tokens) = result?;
            state.usage.prompt_tokens += tokens.prompt;
            state.usage.completion_tokens += tokens.completion;
            let island = &mut self.islands[plan.island];
            let parent = island.population[plan.parent].clone();
            let child_id = format!("s{stage}-t{iter}-i{}", plan.island);
            let mut event = Event {
                iter,
                stage,
                island: plan.island,
                parent_id: parent.id.clone(),
                child_id: None,
                outcome: EventOutcome::ParseFailure,
                score: None,
                tokens,
            };
            state.llm_calls += 1;
            match work {
                Work::LlmFailed(outcome) => {
                    state.llm_failures += 1;
                    if outcome == EventOutcome::LlmUnavailable {
                        state.llm_unavailable += 1;
                    }
                    state.skipped += 1;
                    event.outcome = outcome;
                }
                Work::Rejected(outcome) => {
                    state.usage.calls += 1;
                    state.skipped += 1;
                    event.outcome = outcome;
                }
                Work::Duplicate => {
                    state.usage.calls += 1;
                    event.outcome = EventOutcome::DuplicateRejected;
                }
                Work::Evaluated(source, eval) => {
                    state.usage.calls += 1;
                    state.candidates.insert(child_id.clone(), source.clone());
                    let child = Candidate::new(child_id.clone(), source, plan.island, stage, eval, iter, Some(&parent));
                    event.score = Some(child.score);
                    event.child_id = Some(child_id);
                    event.outcome = insert_child(island, child, cfg.population_cap).into();
                }
            }
            state.events.push(event);
        }

        migrate(
            &mut self.islands,
            cfg.migration_period,
            iter,
            cfg.population_cap,
            |from, to| format!("s{stage}-t{iter}-m{from}to{to}"),
        );

        let best = self.best();
        state.iteration_bests.push(IterationBest {
            iter,
            stage,
            candidate_id: best.id.clone(),
            total: best.score.total,
            acc_curr: best.score.acc_curr,
        });
        Ok(())
    }

    fn plan(&mut self, i: usize, state: &mut RunState) -> Plan {
        let cfg = &self.engine.config;
        let island = &self.islands[i];
        let rng = &mut self.rngs[i];
        let parent = sample_parent(island, &cfg.sampling_mix, rng);
        let pick = build_context(island, parent, rng);
        let pop = &island.population;
        let ctx = PromptContext::new(
            self.header,
            &pop[parent],
            [&pop[pick.best_two[0]], &pop[pick.best_two[1]]],
            &pop[pick.inspiration],
            &self.slice,
            cfg.prompt,
        );
        let messages = vec![Message::system(system_message()), Message::user(render_prompt(&ctx))];
        let call_index = state.take_call_index();
        let mut request = ChatRequest::new(messages, &state.run_key, call_index);
        request.temperature = cfg.temperature;
        request.max_tokens = cfg.max_tokens;
        Plan {
            island: i,
            parent,
            request,
        }
    }

    fn work(&self, plan: &Plan) -> Result<(Work, Tokens), EngineError> {
        let response = match self.engine.llm.complete(&plan.request) {
            Ok(r) => r,
            Err(LlmError::Unavailable(m)) => {
                log::warn!("island {}: {m}; iteration skipped", plan.island);
                return Ok((Work::LlmFailed(EventOutcome::LlmUnavailable), Tokens::default()));
            }
            Err(LlmError::MalformedResponse(m)) => {
                log::warn!("island {}: malformed response {m}; iteration skipped", plan.island);
                return Ok((Work::LlmFailed(EventOutcome::LlmMalformed), Tokens::default()));
            }
            Err(e @ LlmError::MockScriptViolation(_)) => return Err(EngineError::Llm(e)),
        };
        let tokens = Tokens {
            prompt: response.prompt_tokens,
            completion: response.completion_tokens,
        };
        let island = &self.islands[plan.island];
        let parent = &island.population[plan.parent];
        let source = match derive_source(&parent.source, &response.content) {
            Ok(s) => s,
            Err(outcome) => return Ok((Work::Rejected(outcome), tokens)),
        };
        if island.contains_hash(&source_hash(&source)) {
            return Ok((Work::Duplicate, tokens));
        }
        let eval = self
            .evaluator
            .stage_score(&source, &self.slice, self.engine.config.penalties())?;
        Ok((Work::Evaluated(source, eval), tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::island_seed;

    #[test]
    fn island_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for stage in 1..=4 {
            for island in 0..8 {
                assert!(seen.insert(island_seed(42, stage, island)));
            }
        }
    }
}
