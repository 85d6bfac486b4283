use std::fs;
use std::path::{Path, PathBuf};

use iosynth_core::catalog::{build_catalog, export_benchmark, load_benchmark};
use iosynth_core::executor::{Executor, FakeExecutor, SubprocessExecutor};
use iosynth_core::harness::{
    read_report, run_autonomous_suite, run_suite, run_tts_baselines, write_run_dir, write_tables, Mode, SuiteReport,
    SuiteRun,
};
use iosynth_core::llm::{HttpClient, HttpConfig, LlmClient, MockScript, ScriptedMock, ENV_API_URL};

use crate::config::{ExecutorConfig, RunConfig};
use crate::RunArgs;

/// Exit 1 for bad input, 2 for missing or failing infrastructure.
pub struct Failure {
    pub code: u8,
    pub component: &'static str,
    pub message: String,
}

fn usage(component: &'static str, message: impl ToString) -> Failure {
    Failure {
        code: 1,
        component,
        message: message.to_string(),
    }
}

fn infra(component: &'static str, message: impl ToString) -> Failure {
    Failure {
        code: 2,
        component,
        message: message.to_string(),
    }
}

pub fn gen(out: &Path) -> Result<(), Failure> {
    let catalog = build_catalog().map_err(|e| usage("gen", e))?;
    let manifest = export_benchmark(&catalog, out).map_err(|e| usage("gen", e))?;
    println!("{}", manifest.hash());
    Ok(())
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(|e| usage("config", e))?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.mode {
        cfg.mode = Mode::parse(m).ok_or_else(|| usage("config", format!("unknown mode {m:?}")))?;
    }
    if let Some(p) = &args.mock {
        cfg.mock = Some(p.clone());
    }
    if let Some(p) = &args.out {
        cfg.out = p.clone();
    }
    if let Some(ids) = &args.tasks {
        cfg.tasks.ids = ids.clone();
    }
    if let Some(v) = args.seed {
        cfg.engine.seed = v;
    }
    if let Some(v) = args.islands {
        cfg.engine.islands = v;
    }
    if let Some(v) = args.iters {
        cfg.engine.total_iterations = v;
    }
    if let Some(v) = args.stages {
        cfg.engine.stages = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    cfg.validate().map_err(|e| usage("config", e))?;
    Ok(cfg)
}

fn model(cfg: &RunConfig) -> Result<Box<dyn LlmClient>, Failure> {
    if let Some(path) = &cfg.mock {
        let script = MockScript::load(path).map_err(|e| usage("mock", e))?;
        return Ok(Box::new(ScriptedMock::new(script)));
    }
    let http = HttpConfig::from_env().ok_or_else(|| {
        infra(
            "llm",
            format!("{ENV_API_URL} is not set and no --mock script was given"),
        )
    })?;
    Ok(Box::new(HttpClient::new(http)))
}

fn executor(cfg: &RunConfig) -> Result<Box<dyn Executor>, Failure> {
    match &cfg.executor {
        ExecutorConfig::Table { path } => {
            let fake = FakeExecutor::load(path).map_err(|e| usage("executor", format!("{}: {e}", path.display())))?;
            Ok(Box::new(fake))
        }
        ExecutorConfig::Subprocess { command } => {
            let sub = SubprocessExecutor::from_env()
                .map_or_else(|| SubprocessExecutor::new(command.clone()), Ok)
                .map_err(|e| usage("executor", e))?;
            Ok(Box::new(sub))
        }
    }
}

fn out_dir_error(path: &Path, e: impl ToString) -> Failure {
    usage("output", format!("{}: {}", path.display(), e.to_string()))
}

pub fn run(args: &RunArgs, autonomous: bool) -> Result<(), Failure> {
    let cfg = resolve(args)?;
    let catalog = match &cfg.benchmark {
        Some(dir) => load_benchmark(dir).map_err(|e| usage("benchmark", e))?,
        None => build_catalog().map_err(|e| usage("benchmark", e))?,
    };
    let tasks = cfg.tasks.select(catalog.tasks).map_err(|e| usage("config", e))?;
    let llm = model(&cfg)?;
    let exec = executor(&cfg)?;

    let suite: SuiteRun = if autonomous {
        run_autonomous_suite(&tasks, &cfg.engine, llm.as_ref(), exec.as_ref(), cfg.workers)
    } else if let Some(mode) = cfg.mode.search() {
        run_suite(&tasks, &cfg.engine, mode, llm.as_ref(), exec.as_ref(), cfg.workers)
    } else {
        let variant = cfg.mode.tts().expect("every mode is a search mode or a baseline");
        run_tts_baselines(
            &tasks,
            &cfg.engine,
            cfg.samples,
            variant,
            llm.as_ref(),
            exec.as_ref(),
            cfg.workers,
        )
    }
    .map_err(|e| usage("harness", e))?;

    fs::create_dir_all(&cfg.out).map_err(|e| out_dir_error(&cfg.out, e))?;
    let config_path = cfg.out.join("config.json");
    fs::write(&config_path, cfg.to_json()).map_err(|e| out_dir_error(&config_path, e))?;
    write_run_dir(&cfg.out, &suite).map_err(|e| usage("output", e))?;
    summarize(&suite.report);

    if let Some(f) = suite.report.failures.iter().find(|f| f.infrastructure) {
        return Err(infra("harness", format!("task {}: {}", f.task_id, f.error)));
    }
    Ok(())
}

fn summarize(report: &SuiteReport) {
    println!(
        "{}: {}/{} solved, pass rate {:.4}, mean sample pass ratio {:.4}, token/iter {:.1}",
        report.mode,
        report.overall.solved,
        report.overall.tasks,
        report.pass_rate,
        report.mean_sample_pass_ratio,
        report.token_per_iter
    );
    for f in &report.failures {
        println!("failed: {} ({})", f.task_id, f.error);
    }
}

pub fn report(dirs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    if dirs.is_empty() {
        return Err(usage("report", "no run directories given"));
    }
    let reports = dirs
        .iter()
        .map(|d| read_report(d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage("report", e))?;
    let merged = SuiteReport::merge(&reports);
    fs::create_dir_all(out).map_err(|e| out_dir_error(out, e))?;
    let path = out.join("report.json");
    fs::write(&path, merged.to_json()).map_err(|e| out_dir_error(&path, e))?;
    write_tables(out, &merged).map_err(|e| usage("output", e))?;
    summarize(&merged);
    Ok(())
}
