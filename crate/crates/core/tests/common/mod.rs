//! A minimal in-process chat-completions server for offline tests. It
//! answers the pipeline's prompts symbolically (via the scene grammar), so
//! recorded runs terminate meaningfully without any real model.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use refgame::domain::{literal_truth, parse_utterance, AttributeSchema};
use refgame::oracle::{OracleConfig, OracleProposer, ProposerMode};
use refgame::engine::ProposerBackend;

pub struct FakeServer {
    pub url: String,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl FakeServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind fake server");
        let addr = listener.local_addr().unwrap();
        listener.set_nonblocking(true).unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let stop_flag = stop.clone();
        let request_count = requests.clone();
        let handle = std::thread::spawn(move || {
            let schema = AttributeSchema::a3ds();
            while !stop_flag.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        request_count.fetch_add(1, Ordering::SeqCst);
                        let _ = handle_connection(stream, &schema);
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(std::time::Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        });
        FakeServer {
            url: format!("http://{addr}/v1"),
            stop,
            requests,
            handle: Some(handle),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for FakeServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, schema: &AttributeSchema) -> std::io::Result<()> {
    stream.set_nodelay(true).ok();
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            return Ok(());
        }
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = find_subslice(&buf, b"\r\n\r\n") {
            break pos + 4;
        }
        if buf.len() > 1 << 20 {
            return Ok(());
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length = headers
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            if name.eq_ignore_ascii_case("content-length") {
                value.trim().parse::<usize>().ok()
            } else {
                None
            }
        })
        .unwrap_or(0);
    while buf.len() < header_end + content_length {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let body = String::from_utf8_lossy(&buf[header_end..header_end + content_length]).to_string();

    let prompt = serde_json::from_str::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| {
            v.get("messages")?
                .get(0)?
                .get("content")?
                .as_str()
                .map(str::to_string)
        })
        .unwrap_or_default();
    let content = respond(schema, &prompt);

    let payload = serde_json::json!({
        "id": "fake",
        "object": "chat.completion",
        "choices": [{
            "index": 0,
            "message": {"role": "assistant", "content": content},
            "finish_reason": "stop"
        }]
    })
    .to_string();
    let response = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        payload.len(),
        payload
    );
    stream.write_all(response.as_bytes())?;
    stream.flush()?;
    Ok(())
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let rest = &text[from..];
    let to = rest.find(end).unwrap_or(rest.len());
    Some(rest[..to].trim())
}

fn sample_count(prompt: &str) -> usize {
    between(prompt, "produce ", " sentence(s)")
        .and_then(|s| s.parse().ok())
        .unwrap_or(4)
}

/// Rule-based stand-in for a chat model, answering each pipeline prompt.
fn respond(schema: &AttributeSchema, prompt: &str) -> String {
    let proposer = OracleProposer::new(
        Arc::new(schema.clone()),
        OracleConfig {
            seed: 1,
            ..OracleConfig::default()
        },
    )
    .unwrap();

    if prompt.starts_with("Consider the following sentence:") {
        let state = between(prompt, "Consider the following sentence: ", "\n\n").unwrap_or("");
        let utterance = between(prompt, "sentence above: ", "\n\n").unwrap_or("");
        let verdict = match (
            parse_utterance(schema, state).ok().and_then(|f| f.as_state()),
            parse_utterance(schema, utterance),
        ) {
            (Some(state), Ok(features)) => literal_truth(&features, &state),
            _ => false,
        };
        return format!(
            "I will check each mentioned detail against the sentence.\n\n{}",
            if verdict { "yes" } else { "no" }
        );
    }

    if prompt.contains("only mention one detail") {
        let target = between(prompt, "\nTarget: ", "\n").unwrap_or("");
        let n = sample_count(prompt);
        match proposer.propose_initial(target, n) {
            Ok(proposals) => {
                return proposals
                    .iter()
                    .map(|p| format!("- {p}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Err(_) => return "- The scene exists.".to_string(),
        }
    }

    if prompt.contains("add one more detail taken from") {
        let mut quoted = prompt.split('"').skip(1).step_by(2);
        let partial = quoted.next().unwrap_or("");
        let full = quoted.next().unwrap_or("");
        let n = sample_count(prompt);
        match proposer.propose_extension(partial, full, n) {
            Ok(proposals) => {
                return proposals
                    .iter()
                    .map(|p| format!("- {p}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Err(_) => return format!("- {partial}"),
        }
    }

    if prompt.contains("leave out some part of the description") {
        let target = between(prompt, "\nTarget: ", "\n").unwrap_or("");
        let n = sample_count(prompt);
        let sp = OracleProposer::new(
            Arc::new(schema.clone()),
            OracleConfig {
                seed: 1,
                proposer_mode: ProposerMode::SubsetsLe2,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        match sp.propose_initial(target, n) {
            Ok(proposals) => {
                return proposals
                    .iter()
                    .map(|p| format!("- {p}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Err(_) => return "- The scene exists.".to_string(),
        }
    }

    if prompt.contains("target state and one or more distractors") {
        // The full target description is contrastive in any valid game.
        let target = prompt
            .rfind("Target state:\n- ")
            .map(|idx| {
                let rest = &prompt[idx + "Target state:\n- ".len()..];
                rest.lines().next().unwrap_or("").trim()
            })
            .unwrap_or("");
        return format!(
            "The target differs from every distractor in at least one feature.\nUtterance: \"{target}\"."
        );
    }

    "I cannot help with that.".to_string()
}
