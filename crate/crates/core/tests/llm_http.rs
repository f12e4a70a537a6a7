//! HTTP provider adapters against a local canned server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;

use sketchprobe::llm::{generate_sketches, ProviderConfig, ProviderError, ProviderKind};

/// Serves the given (status, body) pairs, one per connection, and sends
/// every request body back through the channel.
fn serve(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push_str(&line);
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            tx.send((headers, String::from_utf8(req).unwrap())).unwrap();
            let mut s = stream;
            write!(
                s,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn config(kind: ProviderKind, url: &str, env: &str) -> ProviderConfig {
    std::env::set_var(env, "secret-token");
    ProviderConfig {
        endpoint: url.to_string(),
        retry_backoff_ms: 10,
        max_retries: 2,
        ..ProviderConfig::http("local", kind, "model-x", env)
    }
}

#[test]
fn openai_adapter_retries_rate_limit() {
    let ok = serde_json::json!({"choices": [{"message": {"content": "```js\nlet a = numberLiteral;\n```"}}]});
    let (url, rx) = serve(vec![(429, "{}".into()), (200, ok.to_string())]);
    let mut p = config(ProviderKind::OpenaiChat, &url, "SKETCHPROBE_TEST_TOKEN_A").connect().unwrap();
    let r = generate_sketches(p.as_mut(), 1).unwrap();
    assert_eq!(r.sketches.len(), 1);
    assert!(r.sketches[0].check.valid);
    assert!(r.responses[0].timestamp > 0);
    let (headers, body) = rx.recv().unwrap();
    assert!(headers.to_ascii_lowercase().contains("authorization: bearer secret-token"));
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["model"], "model-x");
    assert_eq!(v["temperature"], 1.0);
    assert!(v["messages"][0]["content"].as_str().unwrap().contains("generate 1 different templates"));
}

#[test]
fn anthropic_adapter_and_auth_failure() {
    let ok = serde_json::json!({"content": [{"type": "text", "text": "hello"}]});
    let (url, rx) = serve(vec![(200, ok.to_string()), (401, "{\"error\":\"bad key\"}".into())]);
    let mut p = config(ProviderKind::AnthropicMessages, &url, "SKETCHPROBE_TEST_TOKEN_B").connect().unwrap();
    assert_eq!(p.complete("q").unwrap(), "hello");
    let (headers, _) = rx.recv().unwrap();
    assert!(headers.to_ascii_lowercase().contains("x-api-key: secret-token"));
    assert!(matches!(p.complete("q"), Err(ProviderError::Auth { status: 401, .. })));
}

#[test]
fn persistent_server_errors_give_up() {
    let (url, _rx) = serve(vec![(503, "{}".into()), (503, "{}".into()), (503, "{}".into())]);
    let mut p = config(ProviderKind::GeminiGenerate, &url, "SKETCHPROBE_TEST_TOKEN_C").connect().unwrap();
    assert!(matches!(p.complete("q"), Err(ProviderError::Http { status: 503, .. })));
}
