//! Running the project's compile and test commands against one generated
//! test file, and turning their output into diagnostics and an outcome.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Component, Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OutcomeStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Compile,
    Execute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerResult {
    pub phase: Phase,
    /// Process exit code; `128 + signal` when killed by a signal.
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
    /// Wall-clock seconds.
    pub duration: f64,
    pub timed_out: bool,
}

impl RunnerResult {
    pub fn succeeded(&self) -> bool {
        self.exit_code == 0 && !self.timed_out
    }
}

pub const PLACEHOLDERS: [&str; 3] = ["{project_root}", "{test_file}", "{test_class}"];

/// Default markers of a failed assertion in test output.
pub const DEFAULT_ASSERTION_MARKERS: [&str; 5] = [
    "AssertionFailedError",
    "AssertionError",
    "ComparisonFailure",
    "MultipleFailuresError",
    "expected:.*but was:",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunnerConfig {
    pub compile_cmd: String,
    pub test_cmd: String,
    /// Where generated tests are written, relative to the project root.
    pub test_source_dir: String,
    pub compile_timeout_secs: u64,
    pub execute_timeout_secs: u64,
    pub assertion_markers: Vec<String>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            compile_cmd: "mvn -q -o test-compile".into(),
            test_cmd: "mvn -q -o surefire:test -Dtest={test_class}".into(),
            test_source_dir: "src/test/java".into(),
            compile_timeout_secs: 300,
            execute_timeout_secs: 120,
            assertion_markers: DEFAULT_ASSERTION_MARKERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RunnerConfig {
    /// Rejects unknown `{...}` placeholders and bad marker regexes.
    pub fn validate(&self) -> Result<()> {
        let placeholder = Regex::new(r"\{[a-z_]+\}").expect("valid regex");
        for (name, cmd) in [("compile_cmd", &self.compile_cmd), ("test_cmd", &self.test_cmd)] {
            if cmd.trim().is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            if let Some(m) = placeholder.find_iter(cmd).find(|m| !PLACEHOLDERS.contains(&m.as_str())) {
                return Err(Error::Config(format!(
                    "{name} uses unknown placeholder {} (known: {})",
                    m.as_str(),
                    PLACEHOLDERS.join(", ")
                )));
            }
        }
        if self.compile_timeout_secs == 0 || self.execute_timeout_secs == 0 {
            return Err(Error::Config("timeouts must be at least 1 second".into()));
        }
        self.marker_regexes().map(|_| ())
    }

    pub fn marker_regexes(&self) -> Result<Vec<Regex>> {
        self.assertion_markers
            .iter()
            .map(|m| Regex::new(m).map_err(|e| Error::Config(format!("bad assertion marker {m:?}: {e}"))))
            .collect()
    }
}

/// A generated test placed in the project's test sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestFile {
    /// Relative to the project root.
    pub rel_path: PathBuf,
    /// Fully qualified class name.
    pub class_name: String,
    pub content: String,
}

fn package_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*package\s+([\w.]+)\s*;").expect("valid regex"))
}

fn class_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(?:class|interface|enum|record)\s+([A-Za-z_$][\w$]*)").expect("valid regex"))
}

/// Class name used when the code declares none; compilation will report it.
pub const FALLBACK_TEST_CLASS: &str = "GeneratedTest";

impl TestFile {
    /// Path follows the package and first declared type of `code`.
    pub fn from_code(code: &str, test_source_dir: &str) -> Self {
        let package = package_re().captures(code).map(|c| c[1].to_string());
        let class = class_re()
            .captures(code)
            .map(|c| c[1].to_string())
            .unwrap_or_else(|| FALLBACK_TEST_CLASS.to_string());
        let mut rel_path = PathBuf::from(test_source_dir);
        if let Some(pkg) = &package {
            rel_path.extend(pkg.split('.'));
        }
        rel_path.push(format!("{class}.java"));
        let class_name = match package {
            Some(pkg) => format!("{pkg}.{class}"),
            None => class,
        };
        TestFile {
            rel_path,
            class_name,
            content: code.to_string(),
        }
    }
}

/// Puts the test file in place and puts back whatever was there before on drop.
struct Placement {
    path: PathBuf,
    backup: Option<Vec<u8>>,
    created_dirs: Vec<PathBuf>,
}

impl Placement {
    fn new(path: PathBuf, content: &str) -> Result<Self> {
        let backup = match fs::read(&path) {
            Ok(bytes) => Some(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
        };
        let mut created_dirs = Vec::new();
        let mut dir = path.parent();
        while let Some(d) = dir {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            created_dirs.push(d.to_path_buf());
            dir = d.parent();
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, content).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(Placement {
            path,
            backup,
            created_dirs,
        })
    }
}

impl Drop for Placement {
    fn drop(&mut self) {
        let restored = match &self.backup {
            Some(bytes) => fs::write(&self.path, bytes),
            None => fs::remove_file(&self.path),
        };
        if let Err(e) = restored {
            log::warn!("could not restore {}: {e}", self.path.display());
        }
        // innermost first; only directories this run created, and only if empty
        for d in &self.created_dirs {
            let _ = fs::remove_dir(d);
        }
    }
}

fn substitute(template: &str, root: &Path, file: &Path, class: &str) -> String {
    template
        .replace("{project_root}", &root.display().to_string())
        .replace("{test_file}", &file.display().to_string())
        .replace("{test_class}", class)
}

fn drain<R: Read + Send + 'static>(stream: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut s) = stream {
            let _ = s.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Writes `test` into the project, runs `template` through `sh -c` in the
/// project root, and removes the test again. The whole process group is
/// killed on timeout.
pub fn run_phase(
    project_root: &Path,
    phase: Phase,
    template: &str,
    test: &TestFile,
    timeout: Duration,
) -> Result<RunnerResult> {
    let abs = project_root.join(&test.rel_path);
    let command = substitute(template, project_root, &abs, &test.class_name);
    let _placement = Placement::new(abs, &test.content)?;

    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(project_root)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| Error::RunnerConfig(format!("cannot start sh for {command:?}: {e}")))?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child
            .try_wait()
            .map_err(|e| Error::RunnerConfig(format!("waiting for {command:?}: {e}")))?
        {
            break status;
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            // SAFETY: signalling a process group we created; no memory is touched.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            break child
                .wait()
                .map_err(|e| Error::RunnerConfig(format!("waiting for {command:?}: {e}")))?;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let duration = start.elapsed().as_secs_f64();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    use std::os::unix::process::ExitStatusExt;
    let exit_code = status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(-1);
    if exit_code == 127 && !timed_out {
        return Err(Error::RunnerConfig(format!(
            "command not found: {command:?}: {}",
            stderr.trim()
        )));
    }
    Ok(RunnerResult {
        phase,
        exit_code,
        stdout,
        stderr,
        duration,
        timed_out,
    })
}

pub fn classify(compile: &RunnerResult, execute: Option<&RunnerResult>, markers: &[Regex]) -> OutcomeStatus {
    if !compile.succeeded() {
        return OutcomeStatus::CompilationFailure;
    }
    let Some(exec) = execute else {
        return OutcomeStatus::ExecutionFailure;
    };
    if exec.timed_out {
        return OutcomeStatus::ExecutionFailure;
    }
    if exec.exit_code == 0 {
        return OutcomeStatus::Pass;
    }
    let hit = |text: &str| markers.iter().any(|m| m.is_match(text));
    if hit(&exec.stdout) || hit(&exec.stderr) {
        OutcomeStatus::AssertionFailure
    } else {
        OutcomeStatus::ExecutionFailure
    }
}

fn diagnostic_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:\[(?:ERROR|WARNING)\]\s*)?((?:[A-Za-z]:)?[^\s:\[\]]+\.java):\[?\d+").expect("valid regex")
    })
}

fn frame_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s+at\s+([\w$.<>/]+)\(([^():]*)(?::\d+)?\)").expect("valid regex"))
}

fn lexical_normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other.as_os_str()),
        }
    }
    out
}

struct ProjectFiles<'a> {
    root: &'a Path,
    canonical_root: Option<PathBuf>,
    java_files: OnceLock<Vec<String>>,
}

impl<'a> ProjectFiles<'a> {
    fn new(root: &'a Path) -> Self {
        ProjectFiles {
            root,
            canonical_root: root.canonicalize().ok(),
            java_files: OnceLock::new(),
        }
    }

    fn contains_path(&self, written: &str) -> bool {
        let p = Path::new(written);
        if p.is_relative() {
            let joined = lexical_normalize(&self.root.join(p));
            return joined.starts_with(lexical_normalize(self.root));
        }
        let p = lexical_normalize(p);
        p.starts_with(lexical_normalize(self.root))
            || self.canonical_root.as_ref().is_some_and(|r| p.starts_with(r))
    }

    /// A stack frame names a class and a bare file; it is in the project when
    /// some project file ends with the class's package path plus that file.
    fn contains_frame(&self, method: &str, file: &str) -> bool {
        if file.contains('/') {
            return self.contains_path(file);
        }
        if !file.ends_with(".java") {
            return false;
        }
        let class = method.rsplit_once('.').map_or("", |(c, _)| c);
        let package = class.rsplit_once('.').map_or("", |(p, _)| p);
        let suffix = if package.is_empty() {
            format!("/{file}")
        } else {
            format!("/{}/{file}", package.replace('.', "/"))
        };
        self.java_files
            .get_or_init(|| {
                walkdir::WalkDir::new(self.root)
                    .into_iter()
                    .filter_map(|e| e.ok())
                    .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
                    .map(|e| e.path().to_string_lossy().into_owned())
                    .collect()
            })
            .iter()
            .any(|f| f.ends_with(&suffix))
    }
}

enum Record {
    Diagnostic { path: String, lines: Vec<String> },
    Trace { header: Vec<String>, frames: Vec<(String, String, String)> },
}

fn split_records(text: &str) -> Vec<Record> {
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if let Some(c) = diagnostic_re().captures(line) {
            let mut body = vec![line.to_string()];
            i += 1;
            while i < lines.len()
                && !lines[i].trim().is_empty()
                && (lines[i].starts_with(char::is_whitespace) || lines[i].trim() == "^")
                && frame_re().captures(lines[i]).is_none()
            {
                body.push(lines[i].to_string());
                i += 1;
            }
            records.push(Record::Diagnostic {
                path: c[1].to_string(),
                lines: body,
            });
            continue;
        }
        // an exception header: unindented line directly followed by frames
        let starts_trace = !line.trim().is_empty()
            && !line.starts_with(char::is_whitespace)
            && lines.get(i + 1).is_some_and(|next| frame_re().is_match(next));
        if starts_trace {
            let mut header = vec![line.to_string()];
            let mut frames = Vec::new();
            i += 1;
            while i < lines.len() {
                let l = lines[i];
                if let Some(c) = frame_re().captures(l) {
                    frames.push((l.to_string(), c[1].to_string(), c[2].to_string()));
                } else if l.trim_start().starts_with("Caused by:") || l.trim_start().starts_with("Suppressed:") {
                    frames.push((l.to_string(), String::new(), String::new()));
                } else if l.trim_start().starts_with("...") && l.trim_end().ends_with("more") {
                    // "... 3 more" elision
                } else {
                    break;
                }
                i += 1;
            }
            if frames.is_empty() {
                header.clear();
            }
            records.push(Record::Trace { header, frames });
            continue;
        }
        i += 1;
    }
    records
}

/// Diagnostic records (compiler `path:line` messages with their detail
/// lines, and exception traces) that concern files inside `project_root`,
/// in order and without duplicates. Frames outside the project are dropped
/// from a trace; a trace left with no project frame is dropped entirely.
pub fn extract_errors(result: &RunnerResult, project_root: &Path) -> Vec<String> {
    let files = ProjectFiles::new(project_root);
    let mut out: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for text in [&result.stdout, &result.stderr] {
        for record in split_records(text) {
            let rendered = match record {
                Record::Diagnostic { path, lines } => {
                    if !files.contains_path(&path) {
                        continue;
                    }
                    lines.join("\n")
                }
                Record::Trace { header, frames } => {
                    let kept: Vec<&String> = frames
                        .iter()
                        .filter(|(_, method, file)| method.is_empty() || files.contains_frame(method, file))
                        .map(|(line, _, _)| line)
                        .collect();
                    let has_project_frame = frames
                        .iter()
                        .any(|(_, method, file)| !method.is_empty() && files.contains_frame(method, file));
                    if !has_project_frame {
                        continue;
                    }
                    header.iter().chain(kept).cloned().collect::<Vec<_>>().join("\n")
                }
            };
            if seen.insert(rendered.clone()) {
                out.push(rendered);
            }
        }
    }
    out
}
