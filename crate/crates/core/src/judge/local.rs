use std::fs;
use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{
    compare_output, ensure_judgeable, tests_of, FailureDetail, JudgeBackend, JudgeError, JudgeResult, Limits,
    Submission, Verdict,
};
use crate::corpus::{Problem, TestCase};

/// Bytes of stdout kept per execution; the rest is drained and dropped.
pub const STDOUT_CAP: usize = 16 * 1024 * 1024;
const STDERR_CAP: usize = 64 * 1024;
const DIAGNOSTIC_CAP: usize = 4096;
const COMPILE_TIMEOUT: Duration = Duration::from_secs(60);
const DEFAULT_COMPILER: &str = "g++";
const COMPILER_ENV: &str = "REFINEBENCH_CXX";

#[derive(Debug, Clone)]
pub struct Binary {
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub enum CompileOutcome {
    Binary(Binary),
    Failed { diagnostics: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Timeout,
    Oom,
    Crash,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub stdout: String,
    pub stderr: String,
    pub outcome: Outcome,
    pub time_ms: u64,
    pub memory_kb: u64,
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
}

fn compiler() -> String {
    std::env::var(COMPILER_ENV).unwrap_or_else(|_| DEFAULT_COMPILER.to_string())
}

/// Checks that the C++ compiler can be invoked.
pub fn probe_toolchain() -> Result<String, JudgeError> {
    let cxx = compiler();
    let out = Command::new(&cxx)
        .arg("--version")
        .output()
        .map_err(|e| JudgeError::ToolchainMissing(format!("{cxx}: {e}")))?;
    if !out.status.success() {
        return Err(JudgeError::ToolchainMissing(format!("{cxx} --version exited with {}", out.status)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).lines().next().unwrap_or_default().to_string())
}

/// Compiles one C++17 translation unit inside `workdir`.
pub fn compile(source: &str, workdir: &Path) -> Result<CompileOutcome, JudgeError> {
    let src = workdir.join("main.cpp");
    let bin = workdir.join("main");
    fs::write(&src, source).map_err(|e| JudgeError::Sandbox(format!("write {}: {e}", src.display())))?;
    let cxx = compiler();
    let mut child = Command::new(&cxx)
        .args(["-std=c++17", "-O2", "-pipe", "-o"])
        .arg(&bin)
        .arg(&src)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| JudgeError::ToolchainMissing(format!("{cxx}: {e}")))?;
    let stderr = child.stderr.take().expect("piped stderr");
    let reader = thread::spawn(move || read_capped(stderr, STDERR_CAP));
    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() > COMPILE_TIMEOUT => {
                let _ = child.kill();
                let _ = child.wait();
                let _ = reader.join();
                return Ok(CompileOutcome::Failed {
                    diagnostics: "compilation timed out".into(),
                });
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(JudgeError::Sandbox(format!("waiting for compiler: {e}"))),
        }
    };
    let diagnostics = reader.join().unwrap_or_default();
    if status.success() && bin.exists() {
        Ok(CompileOutcome::Binary(Binary { path: bin }))
    } else {
        let diagnostics = if diagnostics.trim().is_empty() {
            format!("compiler exited with {status}")
        } else {
            truncate(&diagnostics, DIAGNOSTIC_CAP)
        };
        Ok(CompileOutcome::Failed { diagnostics })
    }
}

fn read_capped<R: Read>(mut r: R, cap: usize) -> String {
    let mut kept = Vec::new();
    let mut buf = [0u8; 8192];
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
    }
    String::from_utf8_lossy(&kept).into_owned()
}

fn truncate(s: &str, cap: usize) -> String {
    if s.len() <= cap {
        return s.to_string();
    }
    let mut end = cap;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}\n...(truncated)", &s[..end])
}

fn peak_rss_kb(pid: i32) -> Option<u64> {
    let status = fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: setrlimit only reads the struct we pass.
    if unsafe { libc::setrlimit(resource, &lim) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

/// Runs `binary` on one test. The child is killed with SIGKILL once the
/// wall-clock limit elapses or its peak resident set exceeds the memory limit.
pub fn execute(binary: &Binary, test: &TestCase, limits: Limits) -> Result<Execution, JudgeError> {
    if limits.time_limit_ms == 0 || limits.memory_limit_kb == 0 {
        return Err(JudgeError::Sandbox("limits must be positive".into()));
    }
    let time_limit = Duration::from_millis(limits.time_limit_ms);
    let cpu_secs = limits.time_limit_ms.div_ceil(1000) + 1;
    // Address-space cap is a backstop; the RSS monitor below decides MLE.
    let as_bytes = (limits.memory_limit_kb * 1024).saturating_mul(4).max(limits.memory_limit_kb * 1024 + (1 << 30));

    let mut cmd = Command::new(&binary.path);
    if let Some(dir) = binary.path.parent() {
        cmd.current_dir(dir);
    }
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    // SAFETY: the closure only calls async-signal-safe setrlimit.
    unsafe {
        cmd.pre_exec(move || {
            set_limit(libc::RLIMIT_CPU, cpu_secs)?;
            set_limit(libc::RLIMIT_CORE, 0)?;
            set_limit(libc::RLIMIT_AS, as_bytes)?;
            Ok(())
        });
    }
    let started = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| JudgeError::Sandbox(format!("spawn {}: {e}", binary.path.display())))?;
    let pid = child.id() as i32;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = test.input.clone().into_bytes();
    let writer = thread::spawn(move || {
        // A program may exit without reading its input; EPIPE is expected then.
        let _ = stdin.write_all(&input);
    });
    let stdout = child.stdout.take().expect("piped stdout");
    let out_reader = thread::spawn(move || read_capped(stdout, STDOUT_CAP));
    let stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || read_capped(stderr, STDERR_CAP));

    let mut killed_time = false;
    let mut killed_mem = false;
    let mut peak_kb = 0u64;
    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain data filled in by wait4.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let mut nap = Duration::from_micros(200);
    let elapsed = loop {
        // SAFETY: pid is our own unreaped child; pointers are valid for the call.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break started.elapsed();
        }
        if r < 0 {
            return Err(JudgeError::Sandbox(format!("wait4: {}", std::io::Error::last_os_error())));
        }
        if let Some(kb) = peak_rss_kb(pid) {
            peak_kb = peak_kb.max(kb);
        }
        let over_time = started.elapsed() >= time_limit;
        let over_mem = peak_kb > limits.memory_limit_kb;
        if over_time || over_mem {
            killed_time = over_time;
            killed_mem = over_mem && !over_time;
            // SAFETY: signalling our own child.
            unsafe { libc::kill(pid, libc::SIGKILL) };
            // SAFETY: as above, blocking reap.
            unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
            break started.elapsed();
        }
        thread::sleep(nap);
        nap = (nap * 2).min(Duration::from_millis(2));
    };
    let _ = writer.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();

    let memory_kb = peak_kb.max(usage.ru_maxrss.max(0) as u64);
    let time_ms = elapsed.as_millis() as u64;
    let exit = std::process::ExitStatus::from_raw(status);
    let (exit_code, signal) = (exit.code(), exit.signal());

    let outcome = if killed_time || time_ms >= limits.time_limit_ms || signal == Some(libc::SIGXCPU) {
        Outcome::Timeout
    } else if killed_mem || memory_kb > limits.memory_limit_kb || stderr.contains("std::bad_alloc") {
        Outcome::Oom
    } else if signal.is_some() || exit_code != Some(0) {
        Outcome::Crash
    } else {
        Outcome::Ok
    };
    Ok(Execution {
        stdout,
        stderr,
        outcome,
        time_ms: if outcome == Outcome::Timeout { time_ms.max(limits.time_limit_ms) } else { time_ms },
        memory_kb,
        exit_code,
        signal,
    })
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// Judge result plus the number of tests actually run.
#[derive(Debug, Clone)]
pub struct JudgeReport {
    pub result: JudgeResult,
    pub tests_executed: usize,
}

/// Compile-and-run judge. Each call uses its own temporary directory; at most
/// `slots` calls run at once.
pub struct LocalJudge {
    slots: Slots,
    /// When false, failures carry only the test index (as on platforms that
    /// hide hidden-test data).
    pub expose_diagnostics: bool,
}

impl LocalJudge {
    pub fn new(slots: usize) -> Self {
        Self {
            slots: Slots {
                free: Mutex::new(slots.max(1)),
                cv: Condvar::new(),
            },
            expose_diagnostics: true,
        }
    }

    pub fn judge(&self, submission: &Submission, tests: &[TestCase], limits: Limits) -> Result<JudgeResult, JudgeError> {
        self.judge_detailed(submission, tests, limits).map(|r| r.result)
    }

    pub fn judge_detailed(
        &self,
        submission: &Submission,
        tests: &[TestCase],
        limits: Limits,
    ) -> Result<JudgeReport, JudgeError> {
        if tests.is_empty() {
            return Err(JudgeError::NoTests);
        }
        let _slot = self.slots.acquire();
        let dir = tempfile::Builder::new()
            .prefix("refinebench-judge-")
            .tempdir()
            .map_err(|e| JudgeError::Sandbox(format!("tempdir: {e}")))?;
        let binary = match compile(&submission.source, dir.path())? {
            CompileOutcome::Binary(b) => b,
            CompileOutcome::Failed { diagnostics } => {
                let result = if self.expose_diagnostics {
                    JudgeResult::compilation_error(diagnostics)
                } else {
                    JudgeResult::failed(Verdict::CompilationError, 0, 0, FailureDetail::at(1))
                };
                return Ok(JudgeReport { result, tests_executed: 0 });
            }
        };

        let mut max_time = 0;
        let mut peak_mem = 0;
        for (i, test) in tests.iter().enumerate() {
            let run = execute(&binary, test, limits)?;
            max_time = max_time.max(run.time_ms);
            peak_mem = peak_mem.max(run.memory_kb);
            let verdict = match run.outcome {
                Outcome::Timeout => Some(Verdict::TimeLimitExceeded),
                Outcome::Oom => Some(Verdict::MemoryLimitExceeded),
                Outcome::Crash => Some(Verdict::RuntimeError),
                Outcome::Ok if compare_output(&test.expected_output, &run.stdout) => None,
                Outcome::Ok => Some(Verdict::WrongAnswer),
            };
            if let Some(verdict) = verdict {
                let detail = self.failure_detail(i + 1, test, &run, verdict);
                return Ok(JudgeReport {
                    result: JudgeResult::failed(verdict, max_time, peak_mem, detail),
                    tests_executed: i + 1,
                });
            }
        }
        Ok(JudgeReport {
            result: JudgeResult::accepted(max_time, peak_mem),
            tests_executed: tests.len(),
        })
    }

    fn failure_detail(&self, index: usize, test: &TestCase, run: &Execution, verdict: Verdict) -> FailureDetail {
        let mut d = FailureDetail::at(index as u32);
        if !self.expose_diagnostics {
            return d;
        }
        d.input = Some(truncate(&test.input, DIAGNOSTIC_CAP));
        d.expected = Some(truncate(&test.expected_output, DIAGNOSTIC_CAP));
        if verdict == Verdict::WrongAnswer || verdict == Verdict::RuntimeError {
            d.actual = Some(truncate(&run.stdout, DIAGNOSTIC_CAP));
        }
        d.message = match verdict {
            Verdict::RuntimeError => Some(match (run.signal, run.exit_code) {
                (Some(sig), _) => format!("terminated by signal {sig}"),
                (None, Some(code)) => format!("exited with code {code}"),
                _ => "abnormal termination".to_string(),
            }),
            Verdict::TimeLimitExceeded => Some(format!("killed after {} ms", run.time_ms)),
            Verdict::MemoryLimitExceeded => Some(format!("peak memory {} KB", run.memory_kb)),
            _ => None,
        };
        d
    }
}

impl Default for LocalJudge {
    fn default() -> Self {
        Self::new(thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

impl JudgeBackend for LocalJudge {
    fn evaluate(&self, submission: &Submission, problem: &Problem) -> Result<JudgeResult, JudgeError> {
        ensure_judgeable(problem)?;
        self.judge(submission, tests_of(problem), Limits::of(problem))
    }
}
