//! The service binary as a child process.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use bizchat_core::testing::repo_root;
use serde_json::Value;

pub const BOOT: &str = "crash-bootstrap";

pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(data_dir: &Path) -> Server {
        let root = repo_root();
        let mut child = Command::new(env!("CARGO_BIN_EXE_bizchat-server"))
            .args(["--mock", "--port", "0"])
            .env("BIND_ADDR", "127.0.0.1:0")
            .env("DATA_DIR", data_dir)
            .env("AUTH_TOKEN", BOOT)
            .env("CORPUS_DIR", root.join("corpus"))
            .env("FIXTURE_DIR", root.join("fixture"))
            .env("INGEST_MODE", "fixture")
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("service binary starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected output `{line}`"));
        Server { base: format!("http://{addr}"), child }
    }

    /// SIGKILL; nothing gets to flush or shut down.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn client() -> reqwest::Client {
    reqwest::Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

pub async fn post(client: &reqwest::Client, url: String, token: &str, body: Value) -> (u16, String) {
    let response = client.post(url).bearer_auth(token).json(&body).send().await.unwrap();
    (response.status().as_u16(), response.text().await.unwrap())
}

pub async fn get(client: &reqwest::Client, url: String, token: &str) -> (u16, String) {
    let response = client.get(url).bearer_auth(token).send().await.unwrap();
    (response.status().as_u16(), response.text().await.unwrap())
}
