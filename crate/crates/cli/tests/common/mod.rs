//! Shared helpers: a stub JSON server and synthetic corpora on disk.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::Value;

type Handler = dyn Fn(&str, &Value, usize) -> (u16, Value) + Send + Sync;

/// Minimal HTTP/1.1 server: one request per connection, JSON in and out.
pub struct Stub {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
    pub peak: Arc<AtomicUsize>,
}

fn handle(mut stream: TcpStream, handler: &Handler, n: usize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    reader.read_line(&mut request_line).unwrap();
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    let body: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let (status, reply) = handler(&path, &body, n);
    let text = reply.to_string();
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    );
}

impl Stub {
    pub fn start(delay: Duration, handler: impl Fn(&str, &Value, usize) -> (u16, Value) + Send + Sync + 'static) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let active = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let (h, p) = (hits.clone(), peak.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let n = h.fetch_add(1, Ordering::SeqCst);
                let (handler, active, peak) = (handler.clone(), active.clone(), p.clone());
                thread::spawn(move || {
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(delay);
                    handle(stream, &*handler, n);
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        Stub { url, hits, peak }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}


/// Write a synthetic corpus of `n` items over six seen languages.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let c = wader_core::synthetic::corpus(n, &["en", "es", "fr", "it", "pt", "zh"], &[], seed);
    let path = dir.join("corpus.tsv");
    std::fs::write(&path, wader_cli::formats::render_corpus(&c, b'\t')).unwrap();
    path
}
