//! `uno play`: a terminal client.

use std::time::Duration;

use tokio::io::{AsyncBufReadExt, BufReader};
use uno_core::encoding::{action_to_id, Action, ActionId};
use uno_core::game::PlayerView;
use uno_server::protocol::{Body, CreateBody, StateBody};
use uno_server::{Client, ErrorReason, MsgType};

use crate::{CliError, PlayArgs};

fn rt(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn render(state: &StateBody) -> String {
    let v = &state.view;
    let mut s = String::new();
    for e in &state.events {
        let how = if e.forced { " (timeout)" } else { "" };
        s.push_str(&format!("seat {} played {}{how}\n", e.player, e.label));
    }
    let hand: Vec<String> = v.hand.iter().map(ToString::to_string).collect();
    s.push_str(&format!(
        "target {}  |  hand sizes {:?}  |  seat {} to move\nyour hand (seat {}): {}\n",
        v.target,
        v.hand_sizes,
        v.current_player,
        v.player,
        hand.join(" ")
    ));
    if !v.legal_actions.is_empty() {
        let legal: Vec<String> = v
            .legal_actions
            .iter()
            .map(|a| format!("{}={}", a.index(), a.action()))
            .collect();
        s.push_str(&format!("legal: {}\n", legal.join(" ")));
    }
    s
}

/// Accepts an action id (`13`) or a label (`r-wild`, `g-7`, `draw`).
pub fn parse_choice(input: &str, view: &PlayerView) -> Result<ActionId, String> {
    let input = input.trim();
    let id = match input.parse::<usize>() {
        Ok(n) => ActionId::new(n).map_err(|e| e.to_string())?,
        Err(_) => {
            let action: Action = input
                .parse()
                .map_err(|_| format!("cannot read {input:?}; type an id or a card like g-7"))?;
            action_to_id(action).map_err(|e| e.to_string())?
        }
    };
    if view.legal_actions.contains(id) {
        Ok(id)
    } else {
        Err(format!("{} is not legal now", id.action()))
    }
}

pub async fn cmd_play(args: &PlayArgs) -> Result<(), CliError> {
    let mut client = match (&args.udp, &args.ws) {
        (Some(addr), _) => {
            let addr = tokio::net::lookup_host(addr)
                .await
                .map_err(|e| CliError::Usage(format!("--udp {addr}: {e}")))?
                .next()
                .ok_or_else(|| CliError::Usage(format!("--udp {addr}: no address")))?;
            Client::udp(addr).await.map_err(rt)?
        }
        (None, Some(url)) => Client::ws(url)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot connect to {url}: {e}")))?,
        (None, None) => return Err(CliError::Usage("give --udp or --ws".into())),
    };
    let hello = client
        .hello("uno-cli")
        .await
        .map_err(|e| CliError::Runtime(format!("server did not answer: {e}")))?;
    if hello.msg_type() != MsgType::Hello {
        return Err(CliError::Runtime(format!("unexpected reply {hello:?}")));
    }

    let session = match &args.session {
        Some(s) => s.clone(),
        None => {
            let seats: Vec<String> = args.create.split(',').map(|s| s.trim().to_string()).collect();
            let reply = client
                .create(CreateBody {
                    seats,
                    seed: args.seed,
                    turn_timeout_ms: args.turn_timeout_ms,
                    bot_delay_ms: None,
                })
                .await
                .map_err(rt)?;
            if let Body::Error(e) = reply.body {
                return Err(CliError::Usage(format!("table refused: {} ({})", e.message, e.reason)));
            }
            let id = reply.session.ok_or_else(|| rt("ACK without session"))?;
            println!("created table {id}");
            id
        }
    };
    let reply = client.join(&session, args.seat).await.map_err(rt)?;
    if let Body::Error(e) = reply.body {
        return Err(CliError::Usage(format!(
            "cannot join {session}: {} ({})",
            e.message, e.reason
        )));
    }
    println!("joined {session} as seat {}", client.player.unwrap_or_default());

    let mut stdin = BufReader::new(tokio::io::stdin()).lines();
    let idle = Duration::from_secs(args.idle_timeout_s);
    loop {
        let msg = client
            .next_message(idle)
            .await
            .map_err(rt)?
            .ok_or_else(|| rt(format!("no message from the server for {}s", args.idle_timeout_s)))?;
        match msg.body {
            Body::State(state) => {
                print!("{}", render(&state));
                let view = &state.view;
                if view.current_player != view.player || view.legal_actions.is_empty() {
                    continue;
                }
                loop {
                    let action = if args.auto {
                        view.legal_actions.first().expect("non-empty")
                    } else {
                        loop {
                            println!("your move:");
                            let line = stdin.next_line().await.map_err(rt)?.ok_or_else(|| rt("input closed"))?;
                            match parse_choice(&line, view) {
                                Ok(a) => break a,
                                Err(e) => println!("{e}"),
                            }
                        }
                    };
                    let reply = client.act(action).await.map_err(rt)?;
                    match reply.body {
                        Body::Error(e) => {
                            println!("refused: {} ({})", e.message, e.reason);
                            if args.auto || e.reason != ErrorReason::IllegalAction {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
            }
            Body::Result(r) => {
                println!(
                    "RESULT winner seat {} after {} rounds; rewards {:?}",
                    r.winner, r.rounds, r.rewards
                );
                return Ok(());
            }
            Body::Error(e) => println!("server error: {} ({})", e.message, e.reason),
            _ => {}
        }
    }
}
