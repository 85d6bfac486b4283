//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the table inline;
//! the lines go straight to stdout either way.

mod common;

use std::collections::BTreeMap;
use std::io::Write;

use common::references::reference;
use common::*;
use iosynth_core::catalog::{build_catalog, draw, export_benchmark, registry, HIDDEN_COUNT, VISIBLE_COUNT};
use iosynth_core::curriculum::{build_plan, difficulty_key};
use iosynth_core::diff::{apply_diffs, DiffApplyKind, DiffBlock};
use iosynth_core::engine::{Engine, EngineConfig, RunRecord};
use iosynth_core::executor::SubprocessExecutor;
use iosynth_core::harness::{
    classify_trajectory, events_jsonl, overfit_diagnostics, run_suite, run_tts_baselines, SearchMode, SuiteReport,
    TrajectoryClass, TtsVariant, DEFAULT_EPS_FRAC,
};
use iosynth_core::llm::{HttpClient, HttpConfig, MockScript, MockStep, ScriptedMock};
use iosynth_core::scoring::{Evaluator, Penalties, StageScore};
use iosynth_core::values_equal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass,
    Fail(String),
    Skip(String),
}

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn rewrite(src: &str) -> String {
    format!("```python\n{src}```\n")
}

fn per_run(steps: Vec<MockStep>) -> ScriptedMock {
    ScriptedMock::new(MockScript::PerRun(BTreeMap::from([(
        "prime_factorization".to_string(),
        steps,
    )])))
}

fn fitness_exactness() -> Check {
    let task = prime_task();
    let fake = prime_table(&task);
    let eval = Evaluator::new(&fake, "f");
    let pairs = factor_pairs();
    let constant = eval.fitness(LEVEL1, &pairs).map_err(|e| e.to_string())?;
    let full = eval.fitness(LEVEL4, &pairs).map_err(|e| e.to_string())?;
    ensure(constant == 0.125, || format!("constant program fitness {constant}"))?;
    ensure(full == 1.0, || format!("level-4 program fitness {full}"))
}

fn stage_score_identity() -> Check {
    let cfg = EngineConfig::default();
    ensure(cfg.lambda_c == 0.1 && cfg.lambda_h == 0.1, || {
        "default penalties are not 0.1".into()
    })?;
    ensure(Penalties::default() == cfg.penalties(), || {
        "config and default penalties differ".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let (acc, oc, oh): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
        let p = Penalties {
            lambda_c: rng.gen(),
            lambda_h: rng.gen(),
        };
        let s = StageScore::new(acc, oc, oh, p);
        let expected = acc - p.lambda_c * oc - p.lambda_h * oh;
        ensure(s.total.to_bits() == expected.to_bits(), || {
            format!("total {} != {expected}", s.total)
        })?;
    }
    Ok(())
}

fn curriculum_properties() -> Check {
    for task in build_catalog().map_err(|e| e.to_string())?.tasks {
        let plan = build_plan(&task.visible, 4, 4, 42).map_err(|e| e.to_string())?;
        let sizes: Vec<usize> = plan.stages.iter().map(|s| s.current.len()).collect();
        ensure(sizes == [2, 4, 6, 8], || format!("{}: sizes {sizes:?}", task.id))?;
        let last = &plan.stages[3].current;
        ensure(
            last.windows(2).all(|w| difficulty_key(&w[0]) <= difficulty_key(&w[1])),
            || format!("{}: difficulty not sorted", task.id),
        )?;
        let mut delta_total = 0;
        for (i, s) in plan.stages.iter().enumerate() {
            delta_total += s.delta.len();
            if i > 0 {
                let prev = &plan.stages[i - 1].current;
                ensure(s.current[..prev.len()] == prev[..], || {
                    format!("{}: stage {} not nested", task.id, i + 1)
                })?;
                ensure(s.replay.iter().all(|r| prev.contains(r)), || {
                    format!("{}: replay outside C_{i}", task.id)
                })?;
            }
        }
        ensure(
            delta_total == task.visible.len() && task.visible.iter().all(|v| last.contains(v)),
            || format!("{}: deltas do not partition the visible set", task.id),
        )?;
    }
    Ok(())
}

fn benchmark_determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let catalog = build_catalog().map_err(|e| e.to_string())?;
    let h1 = export_benchmark(&catalog, a.path()).map_err(|e| e.to_string())?.hash();
    let h2 = export_benchmark(&build_catalog().map_err(|e| e.to_string())?, b.path())
        .map_err(|e| e.to_string())?
        .hash();
    ensure(h1 == h2, || format!("manifest hashes differ: {h1} vs {h2}"))?;
    for task in &catalog.tasks {
        ensure(
            task.visible.len() == VISIBLE_COUNT && task.hidden().len() == HIDDEN_COUNT,
            || format!("{}: split sizes", task.id),
        )?;
        let overlap = task
            .hidden()
            .iter()
            .any(|h| task.visible.iter().any(|v| values_equal(&v.input, &h.input, 0.0)));
        ensure(!overlap, || format!("{}: visible and hidden inputs overlap", task.id))?;
    }
    for (i, def) in registry().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + i as u64);
        for _ in 0..200 {
            let input = draw(def, &mut rng);
            let got = def.label(&input).map_err(|e| e.to_string())?;
            let want = reference(def.oracle_id)(&input);
            ensure(values_equal(&got, &want, 1e-6), || {
                format!(
                    "{}({}): {} vs reference {}",
                    def.id,
                    input.literal_form(),
                    got.literal_form(),
                    want.literal_form()
                )
            })?;
        }
    }
    Ok(())
}

fn diff_engine() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for case in 0..500 {
        let n = rng.gen_range(1..12);
        let lines: Vec<String> = (0..n)
            .map(|i| format!("    v{i} = {}", rng.gen_range(0..1000)))
            .collect();
        let source = format!("def f(x):\n{}\n    return x\n", lines.join("\n"));
        let start = rng.gen_range(0..n);
        let end = rng.gen_range(start + 1..=n);
        let search = lines[start..end].join("\n");
        let replace = (0..rng.gen_range(0..4))
            .map(|k| format!("    w{case}_{k} = x * {}", rng.gen_range(0..100)))
            .collect::<Vec<_>>()
            .join("\n");
        let block = DiffBlock::new(&search, format!("{replace}\n    marker_{case} = 0"));
        let patched = apply_diffs(&source, std::slice::from_ref(&block)).map_err(|e| format!("case {case}: {e:?}"))?;
        let restored = apply_diffs(&patched, &[block.reversed()]).map_err(|e| format!("case {case}: {e:?}"))?;
        ensure(restored == source, || {
            format!("case {case}: round trip changed the source")
        })?;
    }
    let src = "a = 1\nb = 2\na = 1\n";
    let kind = |b: DiffBlock| apply_diffs(src, &[b]).map_err(|e| e.kind).err();
    ensure(
        kind(DiffBlock::new("c = 3", "c = 4")) == Some(DiffApplyKind::NoMatch),
        || "missing NoMatch".into(),
    )?;
    ensure(
        kind(DiffBlock::new("a = 1", "a = 5")) == Some(DiffApplyKind::AmbiguousMatch),
        || "missing AmbiguousMatch".into(),
    )
}

fn replay_run() -> Result<RunRecord, String> {
    let task = prime_task();
    let fake = prime_table(&task);
    let mock = ScriptedMock::from_steps(replay_script());
    let engine = Engine::new(replay_config(), &mock, &fake).map_err(|e| e.to_string())?;
    engine.run_task(&task, "prime_factorization").map_err(|e| e.to_string())
}

fn factorization_replay() -> Check {
    let record = replay_run()?;
    ensure(record.solved && record.hidden.accuracy == 1.0, || {
        format!("hidden accuracy {}", record.hidden.accuracy)
    })?;
    ensure(record.hidden_eval_count == 1, || {
        format!("{} hidden evaluations", record.hidden_eval_count)
    })?;
    let lengths: Vec<f64> = record.stage_bests.iter().map(|b| b.source_len as f64).collect();
    let class = classify_trajectory(&lengths, DEFAULT_EPS_FRAC).map_err(|e| e.to_string())?;
    ensure(class == TrajectoryClass::MonotoneUp, || {
        format!("stage lengths {lengths:?} classify as {class:?}")
    })?;
    let golden = std::fs::read_to_string(manifest_dir().join("tests/golden/prime_factorization.events.jsonl"))
        .map_err(|e| e.to_string())?;
    ensure(events_jsonl(&record.events) == golden, || {
        "event stream differs from the golden file".into()
    })
}

fn overfitting_detection() -> Check {
    let task = prime_task();
    let fake = prime_table(&task);
    let lookup = lookup_program(&task.visible);
    let eval = Evaluator::new(&fake, "f");
    let visible = eval.fitness(&lookup, &task.visible).map_err(|e| e.to_string())?;
    let hidden = eval.heldout_eval(&lookup, &task).map_err(|e| e.to_string())?.accuracy;
    ensure(visible == 1.0 && hidden < 1.0, || {
        format!("visible {visible}, hidden {hidden}")
    })?;

    let cfg = EngineConfig {
        islands: 1,
        total_iterations: 1,
        stages: 1,
        parallel: false,
        ..Default::default()
    };
    let mock = per_run(vec![MockStep::new("", &rewrite(&lookup))]);
    let run = run_suite(&[task], &cfg, SearchMode::Dio, &mock, &fake, 1).map_err(|e| e.to_string())?;
    let row = overfit_diagnostics(&run.report.tasks)
        .into_iter()
        .next()
        .ok_or("no diagnostics row")?;
    ensure(row.overfit == 1, || format!("overfit count {}", row.overfit))?;
    ensure(row.mean_copy_frequency > 0.5, || {
        format!("copy frequency {}", row.mean_copy_frequency)
    })
}

fn schedule_determinism() -> Check {
    let task = prime_task();
    let fake = prime_table(&task);
    let run = |parallel: bool| {
        let steps: Vec<MockStep> = (0..24)
            .map(|i| {
                let src = [LEVEL1, LEVEL2, LEVEL3, LEVEL4][i % 4];
                MockStep::new("", &rewrite(src)).with_usage(10 + i as u64, 3)
            })
            .collect();
        let mock = ScriptedMock::from_steps(steps);
        let cfg = EngineConfig {
            islands: 3,
            total_iterations: 8,
            seed: 7,
            migration_period: 2,
            parallel,
            ..Default::default()
        };
        Engine::new(cfg, &mock, &fake)
            .unwrap()
            .run_task(&task, "prime_factorization")
    };
    let serial = run(false).map_err(|e| e.to_string())?;
    let mut parallel = run(true).map_err(|e| e.to_string())?;
    parallel.config.parallel = false;
    ensure(serial == parallel, || "serial and parallel records differ".into())
}

fn tts_definitions() -> Check {
    let task = prime_task();
    let fake = prime_table(&task);
    let cfg = EngineConfig::default();
    let samples: Vec<MockStep> = [LEVEL2, LEVEL1, LEVEL4, LEVEL3, LEVEL2]
        .iter()
        .map(|s| MockStep::new("", &rewrite(s)))
        .collect();
    let bon = run_tts_baselines(
        std::slice::from_ref(&task),
        &cfg,
        5,
        TtsVariant::BestOfN,
        &per_run(samples.clone()),
        &fake,
        1,
    )
    .map_err(|e| e.to_string())?;
    let record = bon.records.first().ok_or("no best-of-n record")?;
    let winner = record.final_visible_accuracy;
    for e in &record.events {
        let acc = e.score.map_or(0.0, |s| s.acc_curr);
        ensure(winner >= acc, || format!("winner {winner} below sample {acc}"))?;
    }
    let normalize = |mut r: SuiteReport| {
        r.mode.clear();
        r.tasks.iter_mut().for_each(|t| t.mode.clear());
        r
    };
    let one = |variant| {
        run_tts_baselines(
            std::slice::from_ref(&task),
            &cfg,
            1,
            variant,
            &per_run(samples.clone()),
            &fake,
            1,
        )
        .map(|r| r.report)
    };
    let direct = one(TtsVariant::Direct).map_err(|e| e.to_string())?;
    let bon1 = one(TtsVariant::BestOfN).map_err(|e| e.to_string())?;
    ensure(normalize(direct) == normalize(bon1), || {
        "N=1 best-of-n differs from direct".into()
    })
}

fn trajectory_classifier() -> Check {
    use TrajectoryClass::*;
    let constructed: [(&[f64], TrajectoryClass); 6] = [
        (&[100.0, 100.0, 101.0, 99.0], Stable),
        (&[400.0, 300.0, 250.0, 200.0], MonotoneDown),
        (&[200.0, 400.0, 350.0, 250.0], Hump),
        (&[100.0, 200.0, 300.0, 400.0], MonotoneUp),
        (&[300.0, 100.0, 150.0, 320.0], Valley),
        (&[100.0, 300.0, 100.0, 300.0], Mixed),
    ];
    for (xs, want) in constructed {
        let got = classify_trajectory(xs, DEFAULT_EPS_FRAC).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("{xs:?}: {got:?}, expected {want:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for _ in 0..10_000 {
        let len = rng.gen_range(2..9);
        let xs: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2000.0)).collect();
        let a = classify_trajectory(&xs, DEFAULT_EPS_FRAC).map_err(|e| format!("{xs:?}: {e}"))?;
        ensure(classify_trajectory(&xs, DEFAULT_EPS_FRAC) == Ok(a), || {
            format!("{xs:?}: not deterministic")
        })?;
    }
    Ok(())
}

fn live_smoke() -> Verdict {
    let Some(http) = HttpConfig::from_env() else {
        return Verdict::Skip("LLM_API_URL not set".into());
    };
    let llm = HttpClient::new(http);
    let runner = manifest_dir().join("tests/fixtures/mini_runner.py");
    let exec = match SubprocessExecutor::new(vec!["python3".into(), runner.display().to_string()]) {
        Ok(e) => e,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let catalog = match build_catalog() {
        Ok(c) => c,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let tasks: Vec<_> = catalog.tasks.into_iter().take(5).collect();
    let cfg = EngineConfig {
        islands: 1,
        total_iterations: 4,
        ..Default::default()
    };
    let run = match run_suite(&tasks, &cfg, SearchMode::Dio, &llm, &exec, 5) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let r = &run.report;
    if let Some(f) = r.failures.iter().find(|f| f.infrastructure) {
        return Verdict::Fail(format!("{}: {}", f.task_id, f.error));
    }
    let expected = (r.prompt_tokens + r.completion_tokens) as f64 / r.iterations.max(1) as f64;
    if r.token_per_iter != expected {
        return Verdict::Fail(format!("token_per_iter {} != {expected}", r.token_per_iter));
    }
    Verdict::Pass
}

#[test]
fn acceptance() {
    let checks: Vec<Criterion> = vec![
        ("fitness exactness on the factorization pairs", fitness_exactness),
        ("stage score identity and default penalties", stage_score_identity),
        ("curriculum properties over the catalog", curriculum_properties),
        ("benchmark determinism and oracle equivalence", benchmark_determinism),
        ("diff engine round trips and match errors", diff_engine),
        ("prime factorization end-to-end replay", factorization_replay),
        ("overfitting detection", overfitting_detection),
        ("serial and parallel scheduling agree", schedule_determinism),
        ("test-time-scaling definitions", tts_definitions),
        ("trajectory classifier", trajectory_classifier),
    ];
    let mut verdicts: Vec<(&str, Verdict)> = checks
        .into_iter()
        .map(|(name, check)| {
            let v = match check() {
                Ok(()) => Verdict::Pass,
                Err(why) => Verdict::Fail(why),
            };
            (name, v)
        })
        .collect();
    verdicts.push(("live smoke suite (optional)", live_smoke()));
    verdicts.push((
        "runner protocol conformance (secondary component)",
        Verdict::Skip("guest runner is not part of this build".into()),
    ));

    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    writeln!(out).unwrap();
    for (name, v) in &verdicts {
        let line = match v {
            Verdict::Pass => format!("PASS  {name}"),
            Verdict::Fail(why) => {
                failed += 1;
                format!("FAIL  {name}: {why}")
            }
            Verdict::Skip(why) => format!("SKIP  {name}: {why}"),
        };
        writeln!(out, "{line}").unwrap();
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
