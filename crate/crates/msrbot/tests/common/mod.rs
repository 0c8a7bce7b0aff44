#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use chrono::{TimeZone, Utc};
use msrbot::service::{router, AppState};
use msrbot_core::Bot;

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Serves `bot` on an ephemeral local port with the clock pinned to
/// 2020-03-01 noon UTC.
pub async fn spawn(bot: Bot) -> String {
    let state = AppState::new(Arc::new(bot), Some(Utc.with_ymd_and_hms(2020, 3, 1, 12, 0, 0).unwrap()));
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    format!("http://{addr}")
}

pub fn msrbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msrbot"))
        .current_dir(workspace_root())
        .args(args)
        .output()
        .unwrap()
}

/// Builds a store from the fixture exports inside `dir`.
pub fn fixture_store(dir: &Path) -> PathBuf {
    let out = dir.join("kb.json");
    let root = workspace_root();
    let status = msrbot(&[
        "ingest",
        "--git-export",
        root.join("data/fixture/commits.ndjson").to_str().unwrap(),
        "--issues",
        root.join("data/fixture/issues.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    out
}
