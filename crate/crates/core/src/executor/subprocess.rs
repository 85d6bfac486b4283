use std::io::{Read, Write};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{truncate_tail, CaseOutcome, ExecError, ExecJob, ExecResult, Executor, DIAGNOSTIC_LIMIT};
use crate::value::Value;

/// Whitespace-separated runner command, used when none is configured.
pub const RUNNER_ENV: &str = "IOSYNTH_RUNNER";

/// Slack on top of the summed per-case budget before the gateway kills a runner.
const BACKSTOP_GRACE: Duration = Duration::from_millis(1000);
const POLL: Duration = Duration::from_millis(5);

/// Spawns one runner process per job and speaks the line protocol with it.
///
/// The runner enforces per-case timeouts itself. If it overruns the whole
/// job budget anyway, it is killed and every case is retried in a process of
/// its own so a single hung input only costs its own slot.
#[derive(Debug, Clone)]
pub struct SubprocessExecutor {
    command: Vec<String>,
}

#[derive(Deserialize)]
struct RunnerResponse {
    results: Vec<CaseOutcome>,
    #[serde(default)]
    wall_ms: u64,
}

enum Attempt {
    Answered { response: RunnerResponse, stderr: String },
    Killed { stderr: String },
}

impl SubprocessExecutor {
    pub fn new(command: Vec<String>) -> Result<Self, ExecError> {
        if command.is_empty() {
            return Err(ExecError::BackendUnavailable("empty runner command".into()));
        }
        Ok(SubprocessExecutor { command })
    }

    pub fn from_env() -> Option<Self> {
        let raw = std::env::var(RUNNER_ENV).ok()?;
        Self::new(raw.split_whitespace().map(str::to_string).collect()).ok()
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    fn spawn(&self, memory_cap_mb: u64) -> Result<Child, ExecError> {
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        if memory_cap_mb > 0 {
            use std::os::unix::process::CommandExt;
            let bytes = memory_cap_mb.saturating_mul(1024 * 1024) as libc::rlim_t;
            // SAFETY: setrlimit is async-signal-safe and touches no shared state.
            unsafe {
                cmd.pre_exec(move || {
                    let lim = libc::rlimit {
                        rlim_cur: bytes,
                        rlim_max: bytes,
                    };
                    // best effort: ignore platforms that refuse the cap
                    libc::setrlimit(libc::RLIMIT_AS, &lim);
                    Ok(())
                });
            }
        }
        cmd.spawn()
            .map_err(|e| ExecError::BackendUnavailable(format!("cannot start {:?}: {e}", self.command[0])))
    }

    fn attempt(&self, job: &ExecJob, cases: &[Value], budget: Duration) -> Result<Attempt, ExecError> {
        let request = json!({
            "source": job.program_source,
            "fn": job.function_name,
            "cases": cases,
            "timeout_ms": job.timeout_ms,
        });
        let mut line = request.to_string();
        line.push('\n');

        let mut child = self.spawn(job.memory_cap_mb)?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let writer = thread::spawn(move || {
            // a runner that exits early closes the pipe; that shows up later
            let _ = stdin.write_all(line.as_bytes());
        });
        let out_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + budget;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => thread::sleep(POLL),
                Err(e) => return Err(ExecError::BackendUnavailable(format!("wait failed: {e}"))),
            }
        };
        let _ = writer.join();
        let out = out_reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        let stderr = truncate_tail(&String::from_utf8_lossy(&err), DIAGNOSTIC_LIMIT);

        let Some(status) = status else {
            return Ok(Attempt::Killed { stderr });
        };
        let text = String::from_utf8_lossy(&out);
        let first = text.lines().next().unwrap_or("").trim();
        if first.is_empty() {
            return Err(ExecError::BackendUnavailable(format!(
                "runner exited with {status} without a response: {stderr}"
            )));
        }
        let raw: serde_json::Value = serde_json::from_str(first)
            .map_err(|e| ExecError::BackendUnavailable(format!("unparseable runner response: {e}")))?;
        if let Some(fatal) = raw.get("fatal") {
            return Err(ExecError::BackendUnavailable(format!(
                "runner rejected request: {fatal}"
            )));
        }
        let response: RunnerResponse = serde_json::from_value(raw)
            .map_err(|e| ExecError::BackendUnavailable(format!("malformed runner response: {e}")))?;
        if response.results.len() != cases.len() {
            return Err(ExecError::BackendUnavailable(format!(
                "runner answered {} results for {} cases",
                response.results.len(),
                cases.len()
            )));
        }
        Ok(Attempt::Answered { response, stderr })
    }
}

fn job_budget(timeout_ms: u64, cases: usize) -> Duration {
    Duration::from_millis(timeout_ms.saturating_mul(cases as u64)) + BACKSTOP_GRACE
}

impl Executor for SubprocessExecutor {
    fn execute(&self, job: &ExecJob) -> Result<ExecResult, ExecError> {
        job.validate()?;
        let started = Instant::now();
        match self.attempt(job, &job.cases, job_budget(job.timeout_ms, job.cases.len()))? {
            Attempt::Answered { response, stderr } => Ok(ExecResult {
                per_case: response.results,
                wall_time_ms: response.wall_ms.max(started.elapsed().as_millis() as u64),
                diagnostics: stderr,
            }),
            Attempt::Killed { .. } => {
                log::debug!("runner overran job budget; isolating {} cases", job.cases.len());
                let mut per_case = Vec::with_capacity(job.cases.len());
                let mut diagnostics = String::new();
                for case in &job.cases {
                    let single = std::slice::from_ref(case);
                    match self.attempt(job, single, job_budget(job.timeout_ms, 1))? {
                        Attempt::Answered { mut response, stderr } => {
                            per_case.push(response.results.remove(0));
                            diagnostics.push_str(&stderr);
                        }
                        Attempt::Killed { stderr } => {
                            per_case.push(CaseOutcome::Timeout);
                            diagnostics.push_str(&stderr);
                        }
                    }
                }
                Ok(ExecResult {
                    per_case,
                    wall_time_ms: started.elapsed().as_millis() as u64,
                    diagnostics: truncate_tail(&diagnostics, DIAGNOSTIC_LIMIT),
                })
            }
        }
    }
}
