#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Serves the files below `root` over HTTP on a loopback port.
pub struct TestServer {
    pub url: String,
    requests: Arc<AtomicUsize>,
    accept_headers: Arc<Mutex<Vec<String>>>,
}

impl TestServer {
    pub fn start(root: PathBuf) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let accept_headers = Arc::new(Mutex::new(Vec::new()));
        let (count, accepts) = (requests.clone(), accept_headers.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                loop {
                    let mut header = String::new();
                    if reader.read_line(&mut header).unwrap_or(0) == 0 || header == "\r\n" {
                        break;
                    }
                    if let Some((name, value)) = header.split_once(':') {
                        if name.eq_ignore_ascii_case("accept") {
                            accepts.lock().unwrap().push(value.trim().to_string());
                        }
                    }
                }
                count.fetch_add(1, Ordering::SeqCst);
                let path = request_line.split_whitespace().nth(1).unwrap_or("/");
                let file = root.join(path.trim_start_matches('/'));
                let response = match std::fs::read(&file) {
                    Ok(body) if !path.contains("..") => {
                        let mut r = format!(
                            "HTTP/1.1 200 OK\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                            body.len()
                        )
                        .into_bytes();
                        r.extend(body);
                        r
                    }
                    _ => b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_vec(),
                };
                let _ = stream.write_all(&response);
            }
        });
        TestServer {
            url,
            requests,
            accept_headers,
        }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn accept_headers(&self) -> Vec<String> {
        self.accept_headers.lock().unwrap().clone()
    }
}

fn copy_dir(from: &Path, to: &Path, server: &str) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target, server);
        } else if entry.path().extension().is_some_and(|e| e == "creole") {
            let text = std::fs::read_to_string(entry.path()).unwrap();
            std::fs::write(target, text.replace("SERVER", server)).unwrap();
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// The binomial wiki project copied into `dir`, its narrative pointing at `server`.
pub fn fig1_project(dir: &Path, server: &str) -> PathBuf {
    copy_dir(&fixtures().join("fig1/wiki"), &dir.join("wiki"), server);
    copy_dir(&fixtures().join("fig1/coq"), &dir.join("coq"), server);
    copy_dir(&fixtures().join("fig1/mizar"), &dir.join("mizar"), server);
    let config = dir.join("agora.conf");
    std::fs::write(
        &config,
        "# binomial wiki project\nnarratives = wiki\nannotate = coq\nformal = mizar\nout_dir = site\ncache_dir = cache\nsite_base = http://wiki.example/\ntimeout = 5\n",
    )
    .unwrap();
    config
}

pub fn agora(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agora"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run agora")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
