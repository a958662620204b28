//! Shared helpers for the CLI integration tests: a scripted HTTP server
//! standing in for the remote editing service, and a small trained
//! synthetic workspace built once per test binary.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use docg_cli::config::WorkspaceConfig;

pub const BIN: &str = env!("CARGO_BIN_EXE_docg");

/// Runs `docg` inside `dir` with `dir/docg.toml` and no DOCG_* variables
/// leaking in from the environment.
pub fn docg(dir: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.current_dir(dir).arg("--config").arg(dir.join("docg.toml")).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("DOCG_") {
            cmd.env_remove(k);
        }
    }
    cmd.output().expect("run docg")
}

pub fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "docg failed ({:?})\nstdout:\n{stdout}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn read_config(dir: &Path) -> WorkspaceConfig {
    WorkspaceConfig::from_toml(&std::fs::read_to_string(dir.join("docg.toml")).unwrap()).unwrap()
}

pub fn write_config(dir: &Path, cfg: &WorkspaceConfig) {
    std::fs::write(dir.join("docg.toml"), cfg.to_toml().unwrap()).unwrap();
}

pub fn edit_config(dir: &Path, f: impl FnOnce(&mut WorkspaceConfig)) {
    let mut cfg = read_config(dir);
    f(&mut cfg);
    write_config(dir, &cfg);
}

/// Synthetic world with a quick config: two indicator epochs and a few
/// editor episodes.
pub fn quick_synth(dir: &Path) {
    ok(&Command::new(BIN).arg("synth").arg("--out").arg(dir).output().unwrap());
    edit_config(dir, |c| {
        c.indicator.epochs = 2;
        c.editor.episodes = 3;
        c.editor.batch_size = 4;
        c.evaluation.ablation_seeds = 2;
    });
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), &target).unwrap();
        }
    }
}

static TRAINED: OnceLock<PathBuf> = OnceLock::new();

fn trained_base() -> &'static Path {
    TRAINED.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("docg-fixture-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        quick_synth(&dir);
        for cmd in ["build-dataset", "train-indicator", "train-editor"] {
            ok(&docg(&dir, &[cmd]));
        }
        // Leave no run logs behind so tests can count their own.
        std::fs::remove_dir_all(dir.join("runs")).unwrap();
        dir
    })
}

/// Private copy of a workspace with dataset, indicator and policy in place.
pub fn trained_workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    copy_dir(trained_base(), tmp.path());
    tmp
}

pub fn run_logs(dir: &Path) -> usize {
    std::fs::read_dir(dir.join("runs")).map(|d| d.count()).unwrap_or(0)
}

pub fn chat_reply(text: &str) -> String {
    serde_json::json!({ "choices": [{ "message": { "content": text }, "finish_reason": "stop" }] }).to_string()
}

pub fn chat_refusal(reason: &str) -> String {
    serde_json::json!({ "choices": [{ "message": { "content": null, "refusal": reason }, "finish_reason": "stop" }] })
        .to_string()
}

#[derive(Debug, Clone)]
pub enum Reply {
    /// Read the request and never answer.
    Hang,
    /// 200 with this JSON body.
    Json(String),
}

/// Answers connection `k` with `script[k]`, later ones with `fallback`.
pub struct FixtureServer {
    pub url: String,
    connections: Arc<AtomicUsize>,
}

impl FixtureServer {
    pub fn start(script: Vec<Reply>, fallback: Reply) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let connections = Arc::new(AtomicUsize::new(0));
        let count = connections.clone();
        std::thread::spawn(move || {
            let mut held = Vec::new();
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let k = count.fetch_add(1, Ordering::SeqCst);
                let _ = read_request(&mut stream);
                match script.get(k).unwrap_or(&fallback) {
                    Reply::Hang => held.push(stream),
                    Reply::Json(body) => {
                        let head = format!(
                            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                            body.len()
                        );
                        let _ = stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(body.as_bytes()));
                    }
                }
            }
        });
        Self { url, connections }
    }

    pub fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }
}

fn read_request(stream: &mut TcpStream) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body)
}

/// Points the workspace's agent at `url` with short timeouts.
pub fn use_remote_agent(dir: &Path, url: &str) {
    edit_config(dir, |c| {
        c.agent.kind = docg_cli::config::AgentKind::Remote;
        c.remote.text_endpoint = Some(url.to_owned());
        c.remote.timeout_ms = 300;
        c.remote.max_retries = 2;
        c.remote.backoff_ms = 10;
    });
}
