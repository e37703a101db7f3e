//! Hand-built SIP messages. Each entry is `(name, raw, normal)`; `normal`
//! is the serialized normal form when it differs from `raw`.

pub const CORPUS: [(&str, &str, Option<&str>); 20] = [
    (
        "register",
        "REGISTER sip:example.net SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK776asdhds\r\n\
         Max-Forwards: 70\r\n\
         From: <sip:alice@example.net>;tag=1928301774\r\n\
         To: <sip:alice@example.net>\r\n\
         Call-ID: a84b4c76e66710@192.0.2.10\r\n\
         CSeq: 1 REGISTER\r\n\
         Contact: <sip:alice@192.0.2.10:5060>\r\n\
         Expires: 3600\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "unregister-two-contacts",
        "REGISTER sip:example.net SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKnashds7\r\n\
         From: <sip:alice@example.net>;tag=456248\r\n\
         To: <sip:alice@example.net>\r\n\
         Call-ID: 843817637684230@998sdasdh09\r\n\
         CSeq: 1826 REGISTER\r\n\
         Contact: <sip:alice@192.0.2.10:5060>\r\n\
         Contact: <sip:alice@198.51.100.3:5070>;expires=0\r\n\
         Expires: 0\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "register-ok",
        "SIP/2.0 200 OK\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK776asdhds;received=192.0.2.10\r\n\
         From: <sip:alice@example.net>;tag=1928301774\r\n\
         To: <sip:alice@example.net>;tag=37GkEhwl6\r\n\
         Call-ID: a84b4c76e66710@192.0.2.10\r\n\
         CSeq: 1 REGISTER\r\n\
         Contact: <sip:alice@192.0.2.10:5060>;expires=3600\r\n\
         Date: Sat, 13 Nov 2010 23:29:00 GMT\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "register-challenge",
        "SIP/2.0 401 Unauthorized\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK776asdhds\r\n\
         From: <sip:alice@example.net>;tag=1928301774\r\n\
         To: <sip:alice@example.net>;tag=ab30\r\n\
         Call-ID: a84b4c76e66710@192.0.2.10\r\n\
         CSeq: 1 REGISTER\r\n\
         WWW-Authenticate: Digest realm=\"example.net\", nonce=\"ea9c8e88df84f1cec4341ae6cbe5a359\", qop=\"auth\"\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "invite",
        "INVITE sip:bob@biloxi.example.com SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         Max-Forwards: 70\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Contact: <sip:alice@192.0.2.10:5060>\r\n\
         Content-Type: application/sdp\r\n\
         Content-Length: 133\r\n\r\n\
         v=0\r\n\
         o=- 2890844526 2890844526 IN IP4 192.0.2.10\r\n\
         s=-\r\n\
         c=IN IP4 192.0.2.10\r\n\
         t=0 0\r\n\
         m=audio 49172 RTP/AVP 96\r\n\
         a=rtpmap:96 pcm16/8000\r\n",
        None,
    ),
    (
        "trying",
        "SIP/2.0 100 Trying\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "ringing",
        "SIP/2.0 180 Ringing\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=8321234356\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Contact: <sip:bob@198.51.100.4>\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "invite-ok",
        "SIP/2.0 200 OK\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=8321234356\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Contact: <sip:bob@198.51.100.4>\r\n\
         Content-Type: application/sdp\r\n\
         Content-Length: 114\r\n\r\n\
         v=0\r\n\
         o=bob 2808844564 2808844564 IN IP4 198.51.100.4\r\n\
         s=-\r\n\
         c=IN IP4 198.51.100.4\r\n\
         t=0 0\r\n\
         m=audio 3456 RTP/AVP 96\r\n",
        None,
    ),
    (
        "ack",
        "ACK sip:bob@198.51.100.4 SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bd5\r\n\
         Max-Forwards: 70\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=8321234356\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 ACK\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "bye",
        "BYE sip:alice@192.0.2.10:5060 SIP/2.0\r\n\
         Via: SIP/2.0/UDP 198.51.100.4;branch=z9hG4bKnashds10\r\n\
         Max-Forwards: 70\r\n\
         From: Bob <sip:bob@biloxi.example.com>;tag=8321234356\r\n\
         To: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 BYE\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "bye-ok",
        "SIP/2.0 200 OK\r\n\
         Via: SIP/2.0/UDP 198.51.100.4;branch=z9hG4bKnashds10\r\n\
         From: Bob <sip:bob@biloxi.example.com>;tag=8321234356\r\n\
         To: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 BYE\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "cancel",
        "CANCEL sip:bob@biloxi.example.com SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         Max-Forwards: 70\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 CANCEL\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "request-terminated",
        "SIP/2.0 487 Request Terminated\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=314159\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "busy",
        "SIP/2.0 486 Busy Here\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bK74bf9\r\n\
         From: \"Alice\" <sip:alice@example.net>;tag=9fxced76sl\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=2718\r\n\
         Call-ID: 3848276298220188511@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "options-unknown-headers",
        "OPTIONS sip:carol@chicago.example.com SIP/2.0\r\n\
         Via: SIP/2.0/UDP pc33.atlanta.example.com;branch=z9hG4bKhjhs8ass877\r\n\
         Max-Forwards: 70\r\n\
         To: <sip:carol@chicago.example.com>\r\n\
         From: Alice <sip:alice@atlanta.example.com>;tag=1928301774\r\n\
         Call-ID: a84b4c76e66710\r\n\
         CSeq: 63104 OPTIONS\r\n\
         Accept: application/sdp\r\n\
         X-Trace-Id: 7f3a;hop=2\r\n\
         Supported: timer, 100rel\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
    (
        "compact-forms",
        "INVITE sip:bob@biloxi.example.com SIP/2.0\r\n\
         v: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKkjshdyff\r\n\
         f: <sip:alice@example.net>;tag=88sja8x\r\n\
         t: <sip:bob@biloxi.example.com>\r\n\
         i: 987asjd97y7atg\r\n\
         CSeq: 986759 INVITE\r\n\
         m: <sip:alice@192.0.2.10>\r\n\
         l: 0\r\n\r\n",
        None,
    ),
    (
        "folded-header",
        "BYE sip:bob@198.51.100.4 SIP/2.0\r\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKfold1\r\n\
         From: <sip:alice@example.net>;tag=a1\r\n\
         To: <sip:bob@biloxi.example.com>;tag=b2\r\n\
         Call-ID: fold@192.0.2.10\r\n\
         CSeq: 2 BYE\r\n\
         Subject: lunch plans\r\n  \tfor tomorrow\r\n\
         Content-Length: 0\r\n\r\n",
        Some(
            "BYE sip:bob@198.51.100.4 SIP/2.0\r\n\
             Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKfold1\r\n\
             From: <sip:alice@example.net>;tag=a1\r\n\
             To: <sip:bob@biloxi.example.com>;tag=b2\r\n\
             Call-ID: fold@192.0.2.10\r\n\
             CSeq: 2 BYE\r\n\
             Subject: lunch plans for tomorrow\r\n\
             Content-Length: 0\r\n\r\n",
        ),
    ),
    (
        "bare-line-feeds",
        "SIP/2.0 180 Ringing\n\
         Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKlf\n\
         From: <sip:alice@example.net>;tag=a1\n\
         To: <sip:bob@biloxi.example.com>;tag=b2\n\
         Call-ID: lf@192.0.2.10\n\
         CSeq: 1 INVITE\n\
         Content-Length: 0\n\n",
        Some(
            "SIP/2.0 180 Ringing\r\n\
             Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKlf\r\n\
             From: <sip:alice@example.net>;tag=a1\r\n\
             To: <sip:bob@biloxi.example.com>;tag=b2\r\n\
             Call-ID: lf@192.0.2.10\r\n\
             CSeq: 1 INVITE\r\n\
             Content-Length: 0\r\n\r\n",
        ),
    ),
    (
        "no-content-length-and-spacing",
        "SIP/2.0 603 Decline\r\n\
         Via  :   SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKsp   \r\n\
         From:<sip:alice@example.net>;tag=a1\r\n\
         To: <sip:bob@biloxi.example.com>;tag=b2\r\n\
         Call-ID: sp@192.0.2.10\r\n\
         CSeq: 1 INVITE\r\n\r\n",
        Some(
            "SIP/2.0 603 Decline\r\n\
             Via: SIP/2.0/UDP 192.0.2.10:5060;branch=z9hG4bKsp\r\n\
             From: <sip:alice@example.net>;tag=a1\r\n\
             To: <sip:bob@biloxi.example.com>;tag=b2\r\n\
             Call-ID: sp@192.0.2.10\r\n\
             CSeq: 1 INVITE\r\n\
             Content-Length: 0\r\n\r\n",
        ),
    ),
    (
        "multi-via-record-route",
        "SIP/2.0 200 OK\r\n\
         Via: SIP/2.0/UDP server10.biloxi.example.com;branch=z9hG4bK4b43c2ff8.1\r\n\
         Via: SIP/2.0/UDP bigbox3.site3.atlanta.example.com;branch=z9hG4bK77ef4c2312983.1\r\n\
         Via: SIP/2.0/UDP pc33.atlanta.example.com;branch=z9hG4bK776asdhds;received=192.0.2.101\r\n\
         Record-Route: <sip:server10.biloxi.example.com;lr>\r\n\
         From: Alice <sip:alice@atlanta.example.com>;tag=1928301774\r\n\
         To: Bob <sip:bob@biloxi.example.com>;tag=a6c85cf\r\n\
         Call-ID: a84b4c76e66710@pc33.atlanta.example.com\r\n\
         CSeq: 314159 INVITE\r\n\
         Contact: <sip:bob@192.0.2.4>\r\n\
         Content-Length: 0\r\n\r\n",
        None,
    ),
];
