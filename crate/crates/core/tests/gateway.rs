//! Chat-completion client against a scripted local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use drivegen::llm::{
    build_specification_prompt, connect, Gateway, GatewayError, HttpGateway, ModelConfig, PromptBundle,
};

struct Recorded {
    body: String,
    authorization: Option<String>,
}

/// Serves one scripted `(status, body)` per connection, then stops.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Recorded>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&log);
    thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut authorization = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap(),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut request = vec![0u8; length];
            reader.read_exact(&mut request).unwrap();
            sink.lock().unwrap().push(Recorded { body: String::from_utf8(request).unwrap(), authorization });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, log)
}

fn reply(content: &str, finish: &str) -> String {
    serde_json::json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": finish}]
    })
    .to_string()
}

fn config(url: &str, retries: u32) -> ModelConfig {
    ModelConfig { retries, retry_backoff: 0.01, request_timeout: 5.0, ..ModelConfig::http(url) }
}

fn prompt() -> PromptBundle {
    build_specification_prompt("context", "task").unwrap()
}

#[test]
fn server_errors_are_retried() {
    let (url, log) =
        serve(vec![(500, "{}".into()), (503, "{}".into()), (200, reply("```\ncontroller = noop\n```", "stop"))]);
    let gateway = HttpGateway::new(config(&url, 2)).unwrap();
    assert_eq!(gateway.complete(&prompt()).unwrap(), "```\ncontroller = noop\n```");
    let log = log.lock().unwrap();
    assert_eq!(log.len(), 3);
    let body: serde_json::Value = serde_json::from_str(&log[0].body).unwrap();
    assert_eq!(body["model"], "gpt-4");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 4096);
    assert_eq!(body["messages"][0]["content"], prompt().rendered);
}

#[test]
fn unreachable_endpoint_fails_after_all_attempts() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gateway = HttpGateway::new(config(&format!("http://127.0.0.1:{port}/v1"), 2)).unwrap();
    match gateway.complete(&prompt()) {
        Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn persistent_server_errors_exhaust_retries() {
    let (url, log) = serve(vec![(502, "{}".into()), (502, "{}".into())]);
    let gateway = HttpGateway::new(config(&url, 1)).unwrap();
    assert!(matches!(gateway.complete(&prompt()), Err(GatewayError::Transport { attempts: 2, .. })));
    assert_eq!(log.lock().unwrap().len(), 2);
}

#[test]
fn truncation_is_a_token_limit() {
    let (url, _) = serve(vec![(200, reply("```\ncontroller =", "length"))]);
    let gateway = HttpGateway::new(config(&url, 2)).unwrap();
    assert!(matches!(gateway.complete(&prompt()), Err(GatewayError::TokenLimitExceeded(_))));

    let error = r#"{"error":{"code":"context_length_exceeded","message":"too long"}}"#;
    let (url, log) = serve(vec![(400, error.into())]);
    let gateway = HttpGateway::new(config(&url, 2)).unwrap();
    assert!(matches!(gateway.complete(&prompt()), Err(GatewayError::TokenLimitExceeded(_))));
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, log) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let gateway = HttpGateway::new(config(&url, 3)).unwrap();
    assert!(matches!(gateway.complete(&prompt()), Err(GatewayError::Http { status: 401, .. })));
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn credential_comes_from_the_environment() {
    let (url, log) = serve(vec![(200, reply("ok", "stop"))]);
    let var = "DRIVEGEN_GATEWAY_TEST_KEY";
    std::env::set_var(var, "sk-test");
    let gateway = connect(&ModelConfig { api_key_env: var.into(), ..config(&url, 0) }).unwrap();
    assert_eq!(gateway.complete(&prompt()).unwrap(), "ok");
    assert_eq!(log.lock().unwrap()[0].authorization.as_deref(), Some("Bearer sk-test"));
}

#[test]
fn full_chat_completions_path_is_kept() {
    let (url, log) = serve(vec![(200, reply("ok", "stop"))]);
    let gateway = HttpGateway::new(config(&format!("{url}/chat/completions"), 0)).unwrap();
    assert_eq!(gateway.complete(&prompt()).unwrap(), "ok");
    assert_eq!(log.lock().unwrap().len(), 1);
}
