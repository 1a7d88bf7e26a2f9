//! Child processes with a wall-clock limit, bounded output capture and
//! whole-process-group cleanup.

use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Keeps the first and last `cap / 2` bytes of a stream.
#[derive(Debug)]
struct Capped {
    cap: usize,
    head: Vec<u8>,
    tail: std::collections::VecDeque<u8>,
    total: usize,
}

impl Capped {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            head: Vec::new(),
            tail: Default::default(),
            total: 0,
        }
    }

    fn push(&mut self, bytes: &[u8]) {
        self.total += bytes.len();
        let half = self.cap / 2;
        let mut rest = bytes;
        if self.head.len() < half {
            let take = (half - self.head.len()).min(rest.len());
            self.head.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
        }
        let tail_cap = self.cap - half;
        for &b in rest {
            if self.tail.len() == tail_cap {
                self.tail.pop_front();
            }
            self.tail.push_back(b);
        }
    }

    fn finish(self) -> Captured {
        let dropped = self.total - self.head.len() - self.tail.len();
        let mut bytes = self.head;
        if dropped > 0 {
            bytes.extend_from_slice(format!("\n[... {dropped} bytes omitted ...]\n").as_bytes());
        }
        bytes.extend(self.tail);
        Captured {
            text: String::from_utf8_lossy(&bytes).into_owned(),
            total_bytes: self.total,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Captured {
    pub text: String,
    pub total_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    /// Exit code, `None` when the process died from a signal.
    pub code: Option<i32>,
    pub signal: Option<i32>,
    pub timed_out: bool,
    pub duration_ms: u64,
    pub stdout: Captured,
    pub stderr: Captured,
}

impl ExecResult {
    pub fn success(&self) -> bool {
        !self.timed_out && self.code == Some(0)
    }

    pub fn combined(&self) -> String {
        let mut s = self.stdout.text.clone();
        if !s.is_empty() && !s.ends_with('\n') {
            s.push('\n');
        }
        s.push_str(&self.stderr.text);
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExecSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub cwd: PathBuf,
    pub timeout: Duration,
    pub output_cap: usize,
    pub env: BTreeMap<String, String>,
}

impl ExecSpec {
    /// `sh -c <command>` in `cwd`.
    pub fn shell(command: &str, cwd: &Path, timeout: Duration) -> Self {
        Self {
            program: "sh".into(),
            args: vec!["-c".into(), command.into()],
            cwd: cwd.to_path_buf(),
            timeout,
            output_cap: 256 * 1024,
            env: BTreeMap::new(),
        }
    }

    pub fn argv(program: &str, args: &[String], cwd: &Path, timeout: Duration) -> Self {
        Self {
            program: program.into(),
            args: args.to_vec(),
            cwd: cwd.to_path_buf(),
            timeout,
            output_cap: 256 * 1024,
            env: BTreeMap::new(),
        }
    }
}

fn reader(mut pipe: impl Read + Send + 'static, cap: usize) -> mpsc::Receiver<Captured> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut buf = Capped::new(cap);
        let mut chunk = [0u8; 8192];
        loop {
            match pipe.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => buf.push(&chunk[..n]),
            }
        }
        let _ = tx.send(buf.finish());
    });
    rx
}

fn kill_group(pgid: i32) {
    // SAFETY: killpg only sends a signal; a stale group id yields ESRCH.
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

/// Whether any process in the group is still alive.
pub fn group_alive(pgid: i32) -> bool {
    // SAFETY: signal 0 performs only the existence and permission check.
    unsafe { libc::killpg(pgid, 0) == 0 }
}

/// Run with a scrubbed environment: `PATH` is inherited, `HOME` points at the
/// working directory, locale and timezone are fixed, and `spec.env` is added.
/// The child leads a fresh process group which is killed when the child exits
/// or the timeout expires.
pub fn run(spec: &ExecSpec) -> std::io::Result<ExecResult> {
    let mut cmd = Command::new(&spec.program);
    cmd.args(&spec.args)
        .current_dir(&spec.cwd)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
        .env("HOME", &spec.cwd)
        .env("LANG", "C")
        .env("LC_ALL", "C")
        .env("TZ", "UTC")
        .envs(&spec.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pgid = child.id() as i32;
    let out_rx = reader(child.stdout.take().expect("piped stdout"), spec.output_cap);
    let err_rx = reader(child.stderr.take().expect("piped stderr"), spec.output_cap);

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= spec.timeout {
            timed_out = true;
            kill_group(pgid);
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    // Background children left behind by the command die with the group.
    kill_group(pgid);
    let duration = start.elapsed();

    // A descendant that escaped the group could hold a pipe open forever.
    let grace = Duration::from_secs(2);
    let stdout = out_rx.recv_timeout(grace).unwrap_or_default();
    let stderr = err_rx.recv_timeout(grace).unwrap_or_default();
    Ok(ExecResult {
        code: status.code(),
        signal: status.signal(),
        timed_out,
        duration_ms: duration.as_millis() as u64,
        stdout,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn captures_exit_code_and_output() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(&ExecSpec::shell("echo out; echo err >&2; exit 3", dir.path(), Duration::from_secs(10))).unwrap();
        assert_eq!(r.code, Some(3));
        assert_eq!(r.stdout.text, "out\n");
        assert_eq!(r.stderr.text, "err\n");
        assert!(!r.timed_out);
    }

    #[test]
    fn environment_is_scrubbed() {
        std::env::set_var("PATCHGAUGE_LEAK_CHECK", "1");
        let dir = tempfile::tempdir().unwrap();
        let r = run(&ExecSpec::shell(
            "echo \"${PATCHGAUGE_LEAK_CHECK:-unset} $LC_ALL $TZ\"",
            dir.path(),
            Duration::from_secs(10),
        ))
        .unwrap();
        assert_eq!(r.stdout.text, "unset C UTC\n");
    }

    #[test]
    fn output_is_capped_head_and_tail() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = ExecSpec::shell("seq 1 100000", dir.path(), Duration::from_secs(10));
        spec.output_cap = 64;
        let r = run(&spec).unwrap();
        assert!(r.stdout.text.starts_with("1\n2\n"));
        assert!(r.stdout.text.ends_with("100000\n"));
        assert!(r.stdout.text.contains("bytes omitted"));
        assert!(r.stdout.total_bytes > 500_000);
    }

    #[test]
    fn timeout_kills_whole_group() {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let r = run(&ExecSpec::shell("sleep 300 & sleep 300 & wait", dir.path(), Duration::from_millis(500))).unwrap();
        assert!(r.timed_out);
        assert!(start.elapsed() < Duration::from_secs(5));
        assert!(r.duration_ms >= 500);
    }

    #[test]
    fn background_children_do_not_outlive_a_normal_exit() {
        let dir = tempfile::tempdir().unwrap();
        let pidfile = dir.path().join("bg.pid");
        let cmd = format!("sleep 300 & echo $! > {}; exit 0", pidfile.display());
        let r = run(&ExecSpec::shell(&cmd, dir.path(), Duration::from_secs(10))).unwrap();
        assert_eq!(r.code, Some(0));
        let pid: i32 = std::fs::read_to_string(&pidfile).unwrap().trim().parse().unwrap();
        std::thread::sleep(Duration::from_millis(100));
        let state = std::fs::read_to_string(format!("/proc/{pid}/stat")).unwrap_or_default();
        // Gone, or a zombie awaiting reaping by init.
        assert!(state.is_empty() || state.split_whitespace().nth(2) == Some("Z"), "{state}");
    }
}
