mod support;

use proptest::prelude::*;
use support::corpus::CORPUS;
use support::fuzz::{mutate, mutation, valid_message};
use webvoice_gateway::{Method, ParseError, SipMessage};

#[test]
fn corpus_round_trips_to_normal_form() {
    for (name, raw, normal) in CORPUS {
        let msg = SipMessage::parse(raw.as_bytes()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let out = msg.serialize();
        let want = normal.unwrap_or(raw);
        assert_eq!(String::from_utf8_lossy(&out), want, "{name}");
        assert_eq!(SipMessage::parse(&out).unwrap().serialize(), out, "{name}");
    }
}

#[test]
fn corpus_covers_the_methods_and_answers_in_use() {
    let mut methods = Vec::new();
    let mut statuses = Vec::new();
    for (_, raw, _) in CORPUS {
        let msg = SipMessage::parse(raw.as_bytes()).unwrap();
        if let Some(m) = msg.method() {
            methods.push(m.clone());
        }
        statuses.extend(msg.status());
    }
    for m in [Method::Register, Method::Invite, Method::Ack, Method::Bye, Method::Cancel, Method::Options] {
        assert!(methods.contains(&m), "{m}");
    }
    for s in [100, 180, 200, 401, 486, 487, 603] {
        assert!(statuses.contains(&s), "{s}");
    }
}

#[test]
fn typed_errors() {
    let register = CORPUS[0].1;
    assert_eq!(SipMessage::parse(b""), Err(ParseError::Empty));
    assert_eq!(SipMessage::parse(&register.as_bytes()[..40]), Err(ParseError::NoBlankLine));
    let bad_start = register.replacen("SIP/2.0", "SIP/3.0", 1);
    assert!(matches!(SipMessage::parse(bad_start.as_bytes()), Err(ParseError::StartLine(_))));
    let no_call_id = register.replace("Call-ID: a84b4c76e66710@192.0.2.10\r\n", "");
    assert_eq!(SipMessage::parse(no_call_id.as_bytes()), Err(ParseError::MissingHeader("Call-ID")));
    let bad_cseq = register.replace("CSeq: 1 REGISTER", "CSeq: 1 INVITE");
    assert!(matches!(SipMessage::parse(bad_cseq.as_bytes()), Err(ParseError::CSeq(_))));
    let long = register.replace("Content-Length: 0", "Content-Length: 4");
    assert_eq!(
        SipMessage::parse(long.as_bytes()),
        Err(ParseError::ContentLength { declared: 4, actual: 0 })
    );
    let garbage_header = register.replace("Expires: 3600", "no colon here");
    assert!(matches!(SipMessage::parse(garbage_header.as_bytes()), Err(ParseError::HeaderLine(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn generated_messages_parse_and_round_trip(msg in valid_message()) {
        let bytes = msg.serialize();
        let parsed = SipMessage::parse(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&parsed, &msg);
        prop_assert_eq!(parsed.serialize(), bytes);
    }

    #[test]
    fn mutated_input_never_crashes(seed in 0..CORPUS.len(), edits in prop::collection::vec(mutation(), 1..6)) {
        let input = mutate(CORPUS[seed].1.as_bytes(), &edits);
        if let Ok(msg) = SipMessage::parse(&input) {
            let normal = msg.serialize();
            let again = SipMessage::parse(&normal).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(again.serialize(), normal);
        }
    }
}
