#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread::{self, JoinHandle};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equilivest"))
}

pub fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn equilivest");
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub fn run_err(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("spawn equilivest");
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// `key = value` lines of a report or stats summary.
pub fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim_start().strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .trim()
        .to_string()
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// A listening subcommand, with the bound port parsed from its stderr.
pub struct Listener {
    child: Child,
    pub addr: SocketAddr,
    stderr: JoinHandle<String>,
}

impl Listener {
    pub fn spawn(args: &[&str]) -> Self {
        let mut child = bin().args(args).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
        let mut err = BufReader::new(child.stderr.take().unwrap());
        let mut line = String::new();
        err.read_line(&mut line).unwrap();
        let port: u16 = line.trim().rsplit(':').next().and_then(|s| s.parse().ok()).unwrap_or_else(|| panic!("{line}"));
        let stderr = thread::spawn(move || {
            let mut rest = String::new();
            err.read_to_string(&mut rest).unwrap();
            rest
        });
        Self { child, addr: SocketAddr::from(([127, 0, 0, 1], port)), stderr }
    }

    pub fn target(&self) -> String {
        format!("udp://{}", self.addr)
    }

    pub fn wait(self) -> (Output, String) {
        let out = self.child.wait_with_output().unwrap();
        (out, self.stderr.join().unwrap())
    }
}

pub const NOISY: &str = "noise_std = [0.01, 0.01, 0.01, 1.0, 1.0, 1.0]";

pub fn gait_scenario(dir: &Path, duration_ms: u64) -> std::path::PathBuf {
    let path = dir.join("gait.toml");
    write(&path, &format!("kind = \"gait\"\n[gait]\ncadence_sps = 1.4\nduration_ms = {duration_ms}\n{NOISY}\n"));
    path
}

pub fn walk_fall_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("walk_fall.toml");
    write(&path, &format!("kind = \"walk_then_fall\"\nvary = true\n[gait]\nduration_ms = 10000\n{NOISY}\n"));
    path
}

/// Event log rows without the header.
pub fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}
