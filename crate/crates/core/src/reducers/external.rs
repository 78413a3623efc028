//! Subprocess protocol for reducers implemented outside this crate.
//!
//! The data is written to `input.csv` (header `x1..xm`) inside a per-run
//! working directory, the command template is expanded and run through
//! `sh -c`, and `output.csv` (header `y1..yk`, one row per input row, same
//! order) is read back. `{input}`, `{output}` and `{k}` are required
//! placeholders; every hyperparameter `name` also expands `{name}`.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::{EmbeddingResult, Hyperparameters};
use crate::error::{Error, ProtocolError, Result};
use crate::grid::PointCloud;
use crate::io::{read_cloud_file, write_cloud_file};

pub const INPUT_FILE: &str = "input.csv";
pub const OUTPUT_FILE: &str = "output.csv";

#[derive(Debug, Clone)]
pub struct ExternalOptions {
    pub timeout: Duration,
    /// Created if missing. Parallel runs must use distinct directories.
    pub workdir: PathBuf,
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Expands the placeholders of `template`.
pub fn expand_command(
    template: &str,
    input: &Path,
    output: &Path,
    k: usize,
    hyperparameters: &Hyperparameters,
) -> Result<String> {
    for p in ["{input}", "{output}", "{k}"] {
        if !template.contains(p) {
            return Err(Error::Argument(format!("command template lacks the {p} placeholder")));
        }
    }
    let mut cmd = template
        .replace("{input}", &shell_quote(&input.to_string_lossy()))
        .replace("{output}", &shell_quote(&output.to_string_lossy()))
        .replace("{k}", &k.to_string());
    for (name, value) in hyperparameters {
        cmd = cmd.replace(&format!("{{{name}}}"), &shell_quote(&value.to_string()));
    }
    Ok(cmd)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut Child) {
    // The child leads its own process group; take down anything it spawned.
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut Child) {
    let _ = child.kill();
}

fn spawn(cmd: &str, workdir: &Path) -> std::io::Result<Child> {
    let mut c = Command::new("sh");
    c.arg("-c")
        .arg(cmd)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        c.process_group(0);
    }
    c.spawn()
}

/// Runs an external reducer on `x` and returns its `k`-dimensional output.
pub fn run_external_reducer(
    command: &str,
    x: &PointCloud,
    k: usize,
    hyperparameters: &Hyperparameters,
    opts: &ExternalOptions,
) -> Result<EmbeddingResult> {
    if k < 1 {
        return Err(Error::Argument("target dimension k must be at least 1".into()));
    }
    std::fs::create_dir_all(&opts.workdir).map_err(|e| Error::io(&opts.workdir, e))?;
    let workdir = opts.workdir.canonicalize().map_err(|e| Error::io(&opts.workdir, e))?;
    let input = workdir.join(INPUT_FILE);
    let output = workdir.join(OUTPUT_FILE);
    match std::fs::remove_file(&output) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(Error::io(&output, e)),
        _ => {}
    }
    write_cloud_file(&input, 'x', x)?;
    let cmd = expand_command(command, &input, &output, k, hyperparameters)?;

    let start = Instant::now();
    let mut child = spawn(&cmd, &workdir).map_err(|e| ProtocolError::Launch(format!("{cmd}: {e}")))?;
    let out_reader = drain(child.stdout.take());
    let err_reader = drain(child.stderr.take());
    let deadline = start + opts.timeout;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                kill_tree(&mut child);
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                kill_tree(&mut child);
                let _ = child.wait();
                return Err(ProtocolError::Launch(format!("waiting for {cmd}: {e}")).into());
            }
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    let status = match status {
        Some(s) => s,
        None => {
            return Err(ProtocolError::Timeout {
                timeout: opts.timeout,
                stdout,
                stderr,
            }
            .into())
        }
    };
    if !status.success() {
        return Err(ProtocolError::NonZeroExit {
            code: status.code(),
            stdout,
            stderr,
        }
        .into());
    }

    let malformed = |detail: String| ProtocolError::MalformedOutput {
        path: output.clone(),
        detail,
    };
    let y = read_cloud_file(&output, Some('y')).map_err(|e| malformed(e.to_string()))?;
    if y.dim() != k {
        return Err(malformed(format!("{} columns, expected {k}", y.dim())).into());
    }
    if y.len() != x.len() {
        return Err(ProtocolError::RowCountMismatch {
            expected: x.len(),
            actual: y.len(),
        }
        .into());
    }
    if let Some(p) = y.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(malformed(format!("non-finite value in row {}", p / k)).into());
    }
    Ok(EmbeddingResult {
        y,
        method: format!("external:{command}"),
        hyperparameters: hyperparameters.clone(),
        wall_time,
        stdout,
        stderr,
    })
}
