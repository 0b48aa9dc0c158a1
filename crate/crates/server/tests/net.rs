use std::net::SocketAddr;
use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpStream, UdpSocket};
use uno_server::protocol::{Body, CreateBody, Message, MsgType};
use uno_server::{replay, start, Client, ServerConfig, ServerHandle};

const WAIT: Duration = Duration::from_secs(5);

async fn server(static_dir: Option<std::path::PathBuf>) -> ServerHandle {
    let local: SocketAddr = "127.0.0.1:0".parse().unwrap();
    start(ServerConfig {
        udp: Some(local),
        ws: Some(local),
        static_dir,
        ..ServerConfig::default()
    })
    .await
    .unwrap()
}

fn create(seats: &[&str], seed: u64) -> CreateBody {
    CreateBody {
        seats: seats.iter().map(|s| s.to_string()).collect(),
        seed: Some(seed),
        turn_timeout_ms: None,
        bot_delay_ms: None,
    }
}

/// Plays the client's seat with the first legal action until RESULT.
async fn play_out(client: &mut Client) -> Message {
    loop {
        let msg = client.next_message(WAIT).await.unwrap().expect("server went quiet");
        match &msg.body {
            Body::Result(_) => return msg,
            Body::State(s) if s.view.current_player == s.view.player && !s.view.legal_actions.is_empty() => {
                let reply = client.act(s.view.legal_actions.first().unwrap()).await.unwrap();
                assert_eq!(reply.msg_type(), MsgType::Ack, "{reply:?}");
            }
            _ => {}
        }
    }
}

async fn human_vs_random(mut client: Client, handle: &ServerHandle, seed: u64) {
    assert_eq!(client.hello("test").await.unwrap().body.ack(), Some(1));
    let ack = client.create(create(&["human", "random"], seed)).await.unwrap();
    assert_eq!(ack.msg_type(), MsgType::Ack);
    let session = client.session.clone().unwrap();
    let ack = client.join(&session, None).await.unwrap();
    assert_eq!(ack.player, Some(0));
    let Body::Result(result) = play_out(&mut client).await.body else {
        unreachable!()
    };
    assert_eq!(result.rewards.len(), 2);

    let log = handle.session_log(&session).unwrap();
    assert_eq!(replay(&log).unwrap(), log);
}

#[tokio::test]
async fn udp_game_to_completion() {
    let handle = server(None).await;
    let client = Client::udp(handle.udp_addr.unwrap()).await.unwrap();
    human_vs_random(client, &handle, 21).await;
}

#[tokio::test]
async fn websocket_game_to_completion() {
    let handle = server(None).await;
    let url = format!("ws://{}/ws", handle.ws_addr.unwrap());
    let client = Client::ws(&url).await.unwrap();
    human_vs_random(client, &handle, 21).await;
}

#[tokio::test]
async fn transports_produce_identical_states() {
    let handle = server(None).await;
    let udp = Client::udp(handle.udp_addr.unwrap()).await.unwrap();
    human_vs_random(udp, &handle, 33).await;
    let ws = Client::ws(&format!("ws://{}/ws", handle.ws_addr.unwrap()))
        .await
        .unwrap();
    human_vs_random(ws, &handle, 33).await;
    let states = |id: &str| -> Vec<String> {
        handle
            .session_log(id)
            .unwrap()
            .outbound_of("STATE")
            .iter()
            .map(|e| e.text.replacen(&format!(r#""session":"{id}""#), r#""session":"_""#, 1))
            .collect()
    };
    assert_eq!(states("t1"), states("t2"));
}

#[tokio::test]
async fn duplicated_datagram_is_applied_once() {
    let handle = server(None).await;
    let addr = handle.udp_addr.unwrap();
    let mut client = Client::udp(addr).await.unwrap();
    client.create(create(&["human", "random"], 5)).await.unwrap();
    let session = client.session.clone().unwrap();
    client.join(&session, Some(0)).await.unwrap();
    let state = loop {
        let m = client.next_message(WAIT).await.unwrap().unwrap();
        if let Body::State(s) = m.body {
            if s.view.current_player == 0 {
                break s;
            }
        }
    };
    let action = state.view.legal_actions.first().unwrap();
    let text = client.peek_request(Body::Act(uno_server::protocol::ActBody { action }));
    // The datagram arrives twice before the client's own send.
    client.send_raw(&text).await.unwrap();
    client.send_raw(&text).await.unwrap();
    let reply = client.act(action).await.unwrap();
    assert_eq!(reply.msg_type(), MsgType::Ack);
    tokio::time::sleep(Duration::from_millis(200)).await;

    let log = handle.session_log(&session).unwrap();
    let acts = log.inbound().iter().filter(|t| t.contains(r#""type":"ACT""#)).count();
    assert_eq!(acts, 1);
    let moves_by_seat0 = log
        .outbound_of("STATE")
        .iter()
        .filter(|e| e.seat == Some(0) && e.text.contains(r#""events":[{"player":0"#))
        .count();
    assert_eq!(moves_by_seat0, 1);
    // Three copies of the ACK reached the socket; the client kept one.
    let acks = client
        .raw_log
        .iter()
        .filter(|t| t.contains(r#""type":"ACK""#) && t.contains(r#""player":0"#))
        .count();
    assert!(acks >= 2);
}

#[tokio::test]
async fn raw_udp_errors_on_garbage() {
    let handle = server(None).await;
    let socket = UdpSocket::bind("127.0.0.1:0").await.unwrap();
    socket.send_to(b"hello?", handle.udp_addr.unwrap()).await.unwrap();
    let mut buf = vec![0u8; 2048];
    let (n, _) = tokio::time::timeout(WAIT, socket.recv_from(&mut buf))
        .await
        .unwrap()
        .unwrap();
    let msg = Message::decode(std::str::from_utf8(&buf[..n]).unwrap()).unwrap();
    assert_eq!(msg.msg_type(), MsgType::Error);
}

#[tokio::test]
async fn bot_table_result_goes_to_creator() {
    let handle = server(None).await;
    let mut client = Client::ws(&format!("ws://{}/ws", handle.ws_addr.unwrap()))
        .await
        .unwrap();
    client.create(create(&["random", "random", "random"], 8)).await.unwrap();
    let msg = client.next_message(WAIT).await.unwrap().unwrap();
    assert_eq!(msg.msg_type(), MsgType::Result);
    assert_eq!(handle.session_ids(), vec!["t1".to_string()]);
}

#[tokio::test]
async fn static_files_are_served_beside_the_socket() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>uno</h1>").unwrap();
    let handle = server(Some(dir.path().to_path_buf())).await;
    let mut tcp = TcpStream::connect(handle.ws_addr.unwrap()).await.unwrap();
    tcp.write_all(b"GET /index.html HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut response = String::new();
    tcp.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.ends_with("<h1>uno</h1>"));
}
