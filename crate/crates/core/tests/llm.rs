mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use intentforge_core::llm::{
    request_hash, CompletionProvider, CompletionRequest, HttpProvider, HttpProviderConfig, RecordingProvider,
    ReplayEntry, ReplayProvider,
};
use intentforge_core::retrieval::{CachedEmbedder, EmbeddingProvider, HttpEmbedder, HttpEmbedderConfig};
use intentforge_core::Error;

struct Captured {
    headers: Vec<String>,
    body: String,
}

/// Serves one scripted `(status, body)` reply per connection, in order,
/// and reports each request it saw.
fn stub(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 {
                    break;
                }
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
                headers.push(line);
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            tx.send(Captured {
                headers,
                body: String::from_utf8(buf).unwrap(),
            })
            .unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1/chat"), rx)
}

fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn provider(endpoint: String, retries: u32) -> HttpProvider {
    HttpProvider::new(HttpProviderConfig {
        endpoint,
        api_key_env: Some("INTENTFORGE_TEST_LLM_KEY".into()),
        max_retries: retries,
        timeout_secs: 10,
        ..HttpProviderConfig::default()
    })
}

fn request() -> CompletionRequest {
    CompletionRequest::new("stub-model", Some("be terse".into()), "write a test")
}

#[test]
fn http_provider_returns_stub_body() {
    std::env::set_var("INTENTFORGE_TEST_LLM_KEY", "sekret");
    let (url, seen) = stub(vec![(200, chat_reply("```package a;```"))]);
    let text = provider(url, 0).complete(&request()).unwrap();
    assert_eq!(text, "```package a;```");
    let got = seen.recv().unwrap();
    let body: serde_json::Value = serde_json::from_str(&got.body).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0], serde_json::json!({"role": "system", "content": "be terse"}));
    assert_eq!(body["messages"][1], serde_json::json!({"role": "user", "content": "write a test"}));
    assert!(got.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sekret")));
}

#[test]
fn transient_status_is_retried() {
    let (url, seen) = stub(vec![(503, "{}".into()), (200, chat_reply("ok"))]);
    assert_eq!(provider(url, 2).complete(&request()).unwrap(), "ok");
    assert_eq!(seen.iter().take(2).count(), 2);
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, seen) = stub(vec![(401, "{}".into()), (200, chat_reply("late"))]);
    let err = provider(url, 3).complete(&request()).unwrap_err();
    assert!(matches!(&err, Error::Provider(m) if m.contains("401")), "{err:?}");
    seen.recv().unwrap();
    assert!(seen.try_recv().is_err());
}

#[test]
fn retries_run_out() {
    let (url, _seen) = stub(vec![(500, "{}".into()), (500, "{}".into())]);
    let err = provider(url, 1).complete(&request()).unwrap_err();
    assert!(matches!(err, Error::Provider(_)));
}

#[test]
fn missing_response_path_is_an_error() {
    let (url, _seen) = stub(vec![(200, r#"{"output": "x"}"#.into())]);
    let err = provider(url, 0).complete(&request()).unwrap_err();
    assert!(matches!(&err, Error::Provider(m) if m.contains("choices.0.message.content")));
}

#[test]
fn replay_hits_and_misses() {
    let replay = ReplayProvider::from_entries([ReplayEntry {
        system: Some("be terse".into()),
        user: "write a test".into(),
        response: "```package a;```".into(),
    }]);
    assert_eq!(replay.complete(&request()).unwrap(), "```package a;```");
    let other = CompletionRequest::new("stub-model", None, "write a test");
    match replay.complete(&other).unwrap_err() {
        Error::ReplayMiss { hash } => assert_eq!(hash, request_hash(None, "write a test")),
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn replay_key_ignores_model_and_temperature() {
    let mut a = request();
    a.model_id = "other".into();
    a.temperature = 0.7;
    assert_eq!(a.hash(), request().hash());
}

#[test]
fn recorded_exchanges_replay_offline() {
    let dir = tempfile::tempdir().unwrap();
    let live = common::Scripted::new(["first answer", "second answer"]);
    let rec = RecordingProvider::new(&live, dir.path());
    let r2 = CompletionRequest::new("m", None, "second question");
    assert_eq!(rec.complete(&request()).unwrap(), "first answer");
    assert_eq!(rec.complete(&r2).unwrap(), "second answer");
    assert_eq!(rec.recorded().len(), 2);

    let replay = ReplayProvider::from_dir(dir.path()).unwrap();
    assert_eq!(replay.len(), 2);
    assert_eq!(replay.complete(&r2).unwrap(), "second answer");
    assert_eq!(replay.complete(&request()).unwrap(), "first answer");
    assert!(dir.path().join(format!("{}.json", request().hash())).exists());
}

#[test]
fn http_embedder_reads_vector() {
    let (url, seen) = stub(vec![(200, r#"{"embedding": [0.6, 0.8]}"#.into())]);
    let emb = CachedEmbedder::new(HttpEmbedder::new(HttpEmbedderConfig {
        endpoint: url,
        max_retries: 0,
        timeout_secs: 10,
        ..HttpEmbedderConfig::default()
    }));
    let v = emb.embed("creates server").unwrap();
    assert_eq!(v.values, vec![0.6, 0.8]);
    // second lookup is served from the cache; the stub only answers once
    assert_eq!(emb.embed("creates server").unwrap(), v);
    let got = seen.recv().unwrap();
    assert_eq!(serde_json::from_str::<serde_json::Value>(&got.body).unwrap(), serde_json::json!({"input": "creates server"}));
}
