//! Minimal HTTP/1.1 stub server for tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct StubRequest {
    pub head: String,
    pub path: String,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct StubResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
    pub delay: Duration,
}

impl StubResponse {
    pub fn new(status: u16, body: impl Into<String>) -> Self {
        Self { status, headers: Vec::new(), body: body.into(), delay: Duration::ZERO }
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(&StubRequest) -> StubResponse + Send + Sync;

pub struct StubServer {
    addr: String,
    seen: Arc<Mutex<Vec<StubRequest>>>,
}

impl StubServer {
    pub fn new(handler: impl Fn(&StubRequest) -> StubResponse + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap().to_string();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let log = seen.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let handler = handler.clone();
                let log = log.clone();
                thread::spawn(move || {
                    let _ = serve(stream, &*handler, &log);
                });
            }
        });
        Self { addr, seen }
    }

    /// Always answers with `status` and a JSON body.
    pub fn json(status: u16, body: String) -> Self {
        Self::new(move |_| StubResponse::new(status, body.clone()).header("Content-Type", "application/json"))
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn requests(&self) -> Vec<StubRequest> {
        self.seen.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, handler: &Handler, log: &Mutex<Vec<StubRequest>>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    loop {
        let mut head = String::new();
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let end = line == "\r\n" || line == "\n";
            head.push_str(&line);
            if end {
                break;
            }
        }
        let length = head
            .lines()
            .find_map(|l| {
                let (name, value) = l.split_once(':')?;
                name.eq_ignore_ascii_case("content-length").then(|| value.trim().parse::<usize>().ok())?
            })
            .unwrap_or(0);
        let mut body = vec![0; length];
        reader.read_exact(&mut body)?;
        let path = head.split_whitespace().nth(1).unwrap_or("/").to_string();
        let request = StubRequest { head, path, body: String::from_utf8_lossy(&body).into_owned() };
        log.lock().unwrap().push(request.clone());
        let response = handler(&request);
        if !response.delay.is_zero() {
            thread::sleep(response.delay);
        }
        let mut out = format!(
            "HTTP/1.1 {} Stub\r\nContent-Length: {}\r\n",
            response.status,
            response.body.len()
        );
        for (name, value) in &response.headers {
            out.push_str(&format!("{name}: {value}\r\n"));
        }
        out.push_str("\r\n");
        out.push_str(&response.body);
        let mut writer = &stream;
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
}

/// One page of an extraction fixture directory: `<name>.html` plus the
/// expected `<name>.text` (one block per line) and `<name>.links`, and an
/// optional `<name>.url` (default `http://example.com/`).
#[derive(Debug)]
pub struct HtmlCase {
    pub name: String,
    pub expected_text: Vec<String>,
    pub actual_text: Vec<String>,
    pub expected_links: Vec<String>,
    pub actual_links: Vec<String>,
}

impl HtmlCase {
    pub fn passed(&self) -> bool {
        self.expected_text == self.actual_text && self.expected_links == self.actual_links
    }
}

pub fn run_html_suite(dir: &std::path::Path) -> std::io::Result<Vec<HtmlCase>> {
    use std::fs;

    let lines = |path: std::path::PathBuf| -> std::io::Result<Vec<String>> {
        Ok(fs::read_to_string(path)?.lines().map(str::to_string).collect())
    };
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".html")).map(str::to_string))
        .collect();
    names.sort();
    let mut cases = Vec::new();
    for name in names {
        let html = fs::read_to_string(dir.join(format!("{name}.html")))?;
        let page = fs::read_to_string(dir.join(format!("{name}.url"))).unwrap_or_else(|_| "http://example.com/".into());
        let page = url::Url::parse(page.trim()).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        cases.push(HtmlCase {
            expected_text: lines(dir.join(format!("{name}.text")))?,
            actual_text: crate::tools::html::text_blocks(&html),
            expected_links: lines(dir.join(format!("{name}.links")))?,
            actual_links: crate::tools::html::hyperlinks(&html, &page).iter().map(|l| l.to_string()).collect(),
            name,
        });
    }
    Ok(cases)
}
