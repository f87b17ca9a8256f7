use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use editforge_eval::judge::STEP2_PROMPT;
use editforge_eval::*;
use serde_json::{json, Value};

struct Request {
    headers: Vec<String>,
    body: Value,
}

/// Serves canned replies: `reply(request_number, body)` gives the status
/// and raw response body.
fn stub<F>(reply: F) -> (String, Arc<Mutex<Vec<Request>>>)
where
    F: Fn(usize, &Value) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                let line = line.trim_end().to_string();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
            let (status, text) = reply(n, &body);
            seen.lock().unwrap().push(Request { headers, body });
            let payload = text;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, log)
}

fn ok(content: &str) -> (u16, String) {
    (200, json!({ "choices": [ { "message": { "content": content } } ] }).to_string())
}

fn task(instruction: &str) -> JudgeTask {
    JudgeTask { source_png: vec![1, 2, 3], instruction: instruction.into(), generated_png: vec![4, 5, 6] }
}

fn quick(url: &str) -> JudgeConfig {
    let mut cfg = JudgeConfig::new(url, "test-model");
    cfg.backoff_ms = 5;
    cfg.max_retries = 2;
    cfg
}

fn texts(message: &Value) -> Vec<String> {
    message["content"].as_array().unwrap().iter().filter_map(|p| p["text"].as_str().map(String::from)).collect()
}

#[test]
fn two_step_conversation_yields_the_final_score() {
    let (url, log) = stub(|n, _| ok(if n == 0 { "Change the sofa, then the lamp." } else { "Looks right. <s>5.0</s>" }));
    let mut cfg = quick(&url);
    cfg.api_key = Some("secret".into());
    assert_eq!(JudgeClient::new(cfg).judge(&task("Paint the sofa red")), Ok(5.0));

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 2);
    assert!(log[0].headers.iter().any(|h| h == "authorization: Bearer secret" || h == "Authorization: Bearer secret"));
    let first = log[0].body["messages"].as_array().unwrap();
    assert_eq!(first.len(), 2);
    assert_eq!(log[0].body["model"], "test-model");
    assert!(texts(&first[1]).contains(&"Complex instruction: Paint the sofa red".to_string()));
    assert_eq!(first[1]["content"][2]["image_url"]["url"], "data:image/png;base64,AQID");

    let second = log[1].body["messages"].as_array().unwrap();
    assert_eq!(second.len(), 4);
    assert_eq!(second[2]["role"], "assistant");
    assert_eq!(texts(&second[2]), ["Change the sofa, then the lamp."]);
    assert_eq!(texts(&second[3]), [STEP2_PROMPT]);
    assert_eq!(second[3]["content"][1]["image_url"]["url"], "data:image/png;base64,BAUG");
}

#[test]
fn server_errors_are_retried() {
    let (url, log) = stub(|n, _| if n == 0 { (503, "busy".into()) } else { ok("<s>7</s>") });
    assert_eq!(JudgeClient::new(quick(&url)).judge(&task("x")), Ok(7.0));
    assert_eq!(log.lock().unwrap().len(), 3);
}

#[test]
fn persistent_failures_and_client_errors_are_unavailable() {
    let (url, log) = stub(|_, _| (503, "busy".into()));
    assert!(matches!(JudgeClient::new(quick(&url)).judge(&task("x")), Err(JudgeError::Unavailable(_))));
    assert_eq!(log.lock().unwrap().len(), 3);

    let (url, log) = stub(|_, _| (401, "nope".into()));
    assert!(matches!(JudgeClient::new(quick(&url)).judge(&task("x")), Err(JudgeError::Unavailable(_))));
    assert_eq!(log.lock().unwrap().len(), 1);

    let closed = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let r = JudgeClient::new(quick(&format!("http://{closed}/"))).judge(&task("x"));
    assert!(matches!(r, Err(JudgeError::Unavailable(_))));
}

#[test]
fn a_bad_reply_does_not_spoil_the_batch() {
    let (url, _) = stub(|_, body| {
        let messages = body["messages"].as_array().unwrap();
        let instruction = texts(&messages[1]).join(" ");
        match (messages.len(), instruction.contains("bad")) {
            (2, _) => ok("analysis"),
            (_, true) => ok("I would give it a six"),
            _ => ok("<s>9.5</s>"),
        }
    });
    let tasks = [task("good one"), task("bad one"), task("good two")];
    let out = JudgeClient::new(quick(&url)).judge_batch(&tasks);
    assert_eq!(out[0], Ok(9.5));
    assert!(matches!(out[1], Err(JudgeError::MalformedReply(_))));
    assert_eq!(out[2], Ok(9.5));
}

#[test]
fn non_json_replies_are_malformed() {
    let (url, _) = stub(|_, _| (200, "hello".into()));
    assert!(matches!(JudgeClient::new(quick(&url)).judge(&task("x")), Err(JudgeError::MalformedReply(_))));
}

#[test]
fn judge_is_disabled_without_an_endpoint() {
    std::env::remove_var(judge::ENV_URL);
    assert_eq!(JudgeConfig::from_env(), None);
}
