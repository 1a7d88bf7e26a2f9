use std::path::{Path, PathBuf};
use std::process::Command;

use chrono::{DateTime, FixedOffset};

/// Thin wrapper over the `git` executable, always run against one repository.
#[derive(Debug, Clone)]
pub struct Git {
    repo: PathBuf,
}

#[derive(Debug, Clone)]
pub(crate) struct LogEntry {
    pub id: String,
    pub parents: Vec<String>,
    pub author_date: DateTime<FixedOffset>,
    pub message: String,
    pub files: Vec<String>,
}

impl Git {
    pub fn new(repo: impl Into<PathBuf>) -> Self {
        Self { repo: repo.into() }
    }

    pub fn repo(&self) -> &Path {
        &self.repo
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.repo)
            .args(["-c", "core.quotepath=off", "-c", "color.ui=never"])
            .env("GIT_TERMINAL_PROMPT", "0")
            .env("LC_ALL", "C");
        cmd
    }

    pub fn run_bytes(&self, args: &[&str]) -> Result<Vec<u8>, String> {
        let out = self
            .command()
            .args(args)
            .output()
            .map_err(|e| format!("cannot run git: {e}"))?;
        if !out.status.success() {
            return Err(format!(
                "git {} failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(out.stdout)
    }

    pub fn run(&self, args: &[&str]) -> Result<String, String> {
        let bytes = self.run_bytes(args)?;
        String::from_utf8(bytes).map_err(|_| format!("git {} produced non-UTF-8 output", args.join(" ")))
    }

    pub fn is_repository(&self) -> bool {
        self.repo.is_dir() && self.run(&["rev-parse", "--git-dir"]).is_ok()
    }

    pub fn has_commits(&self) -> bool {
        self.run(&["rev-parse", "--verify", "--quiet", "HEAD"]).is_ok()
    }

    /// Non-merge commits reachable from HEAD, newest first.
    pub(crate) fn log(&self) -> Result<Vec<LogEntry>, String> {
        let raw = self.run(&[
            "log",
            "--no-merges",
            "--no-renames",
            "--format=%x1e%H%x1f%P%x1f%aI%x1f%B%x1d",
            "--name-only",
        ])?;
        let mut entries = Vec::new();
        for record in raw.split('\x1e').filter(|r| !r.trim().is_empty()) {
            let (header, files) = record
                .split_once('\x1d')
                .ok_or_else(|| "unexpected git log output".to_string())?;
            let mut fields = header.splitn(4, '\x1f');
            let id = fields.next().unwrap_or_default().trim().to_string();
            let parents = fields
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .map(str::to_string)
                .collect();
            let date = fields.next().unwrap_or_default().trim();
            let author_date = DateTime::parse_from_rfc3339(date)
                .map_err(|e| format!("bad author date `{date}` on {id}: {e}"))?;
            let message = fields.next().unwrap_or_default().trim_end().to_string();
            let files = files
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            entries.push(LogEntry {
                id,
                parents,
                author_date,
                message,
                files,
            });
        }
        Ok(entries)
    }

    /// Unified diff of a non-merge commit against its first parent.
    pub fn commit_diff(&self, commit: &str) -> Result<String, String> {
        self.run(&["show", "--format=", "--no-color", "--no-ext-diff", "--no-renames", "-U3", commit])
    }

    pub fn parents(&self, commit: &str) -> Result<Vec<String>, String> {
        let line = self.run(&["rev-list", "--parents", "-n", "1", commit])?;
        Ok(line.split_whitespace().skip(1).map(str::to_string).collect())
    }

    /// Raw bytes of `path` at `rev`, or `None` when it does not exist there.
    pub fn file_at(&self, rev: &str, path: &str) -> Result<Option<Vec<u8>>, String> {
        let spec = format!("{rev}:{path}");
        if self.run(&["cat-file", "-e", &spec]).is_err() {
            return Ok(None);
        }
        self.run_bytes(&["cat-file", "blob", &spec]).map(Some)
    }

    /// Write the tree of `rev` into `dest` without touching the repository's
    /// index, worktrees or refs.
    pub fn export_tree(&self, rev: &str, dest: &Path) -> Result<(), String> {
        let tar = self.run_bytes(&["archive", "--format=tar", rev])?;
        std::fs::create_dir_all(dest).map_err(|e| e.to_string())?;
        let mut child = Command::new("tar")
            .arg("-x")
            .arg("-C")
            .arg(dest)
            .stdin(std::process::Stdio::piped())
            .stderr(std::process::Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot run tar: {e}"))?;
        {
            use std::io::Write;
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(&tar).map_err(|e| e.to_string())?;
        }
        let out = child.wait_with_output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("tar failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
        Ok(())
    }
}
