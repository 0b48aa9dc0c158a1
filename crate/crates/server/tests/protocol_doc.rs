use proptest::prelude::*;
use uno_core::encoding::ActionId;
use uno_server::protocol::{ActBody, Body, CreateBody, JoinBody, Message};

fn doc_examples() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/PROTOCOL.md");
    let text = std::fs::read_to_string(path).unwrap();
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        if line.trim() == "```json" {
            let block: Vec<&str> = lines.by_ref().take_while(|l| l.trim() != "```").collect();
            out.push(block.join("\n"));
        }
    }
    out
}

#[test]
fn documented_messages_round_trip_exactly() {
    let examples = doc_examples();
    assert!(examples.len() >= 14);
    for text in examples {
        let msg = Message::decode(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(msg.encode(), text);
    }
}

fn any_body() -> impl Strategy<Value = Body> {
    prop_oneof![
        (0usize..61).prop_map(|a| Body::Act(ActBody {
            action: ActionId::new(a).unwrap()
        })),
        proptest::option::of(0usize..10).prop_map(|seat| Body::Join(JoinBody { seat })),
        (
            proptest::collection::vec(
                prop_oneof![
                    Just("human".to_string()),
                    Just("random".to_string()),
                    "[a-z/.]{1,12}".prop_map(|p| format!("agent:{p}"))
                ],
                0..12
            ),
            proptest::option::of(any::<u64>()),
            proptest::option::of(any::<u64>()),
            proptest::option::of(any::<u64>()),
        )
            .prop_map(|(seats, seed, turn_timeout_ms, bot_delay_ms)| Body::Create(CreateBody {
                seats,
                seed,
                turn_timeout_ms,
                bot_delay_ms
            })),
    ]
}

proptest! {
    #[test]
    fn requests_round_trip(seq in any::<u64>(), session in proptest::option::of("[a-z0-9]{1,6}"), player in proptest::option::of(0usize..10), body in any_body()) {
        let msg = Message::new(seq, session, player, body);
        let text = msg.encode();
        let back = Message::decode(&text).unwrap();
        prop_assert_eq!(&back, &msg);
        prop_assert_eq!(back.encode(), text);
    }
}
