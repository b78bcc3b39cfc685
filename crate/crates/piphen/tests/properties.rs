//! Randomized law checks over the communication and metric primitives.

use proptest::prelude::*;

use piphen::fed::kd_loss;
use piphen::orchestrator::balance;
use piphen::semcom::{
    apply_delta, decode_frame, delta_header_bytes, embed_tokens, encode_delta, encode_frame,
    serialize_graph, Fields, FrameKind, KnowledgeGraph, LinkConfig, NetSim, EMBED_WIDTH,
};

fn arb_fields() -> impl Strategy<Value = Fields> {
    prop::collection::btree_map("[a-z]{1,8}", "[ -~]{0,12}", 0..5)
}

fn arb_graph(version: u64) -> impl Strategy<Value = KnowledgeGraph> {
    (
        prop::collection::btree_map(0u32..10, arb_fields(), 0..8),
        prop::collection::btree_map("[0-9]->[0-9]", arb_fields(), 0..4),
    )
        .prop_map(move |(nodes, edges)| KnowledgeGraph { version, nodes, edges })
}

proptest! {
    // a delta rebuilt onto its base is byte-identical to the target
    #[test]
    fn delta_round_trip(base in arb_graph(1), mut target in arb_graph(2)) {
        target.version = base.version + 1;
        let delta = encode_delta(&base, &target);
        let rebuilt = apply_delta(&base, &delta).unwrap();
        prop_assert_eq!(serialize_graph(&rebuilt), serialize_graph(&target));
    }

    // equal graphs produce the empty delta, which costs only the header
    #[test]
    fn identical_graphs_give_empty_delta(g in arb_graph(4)) {
        let delta = encode_delta(&g, &g);
        prop_assert!(delta.is_empty());
        prop_assert_eq!(delta.byte_size(), delta_header_bytes());
    }

    #[test]
    fn frame_round_trip(payload in prop::collection::vec(any::<u8>(), 0..512), k in 0u8..5) {
        let kind = match k {
            0 => FrameKind::Delta,
            1 => FrameKind::Item,
            2 => FrameKind::RawObservation,
            3 => FrameKind::Request,
            _ => FrameKind::Response,
        };
        let framed = encode_frame(kind, &payload);
        let (got_kind, got_payload, rest) = decode_frame(&framed).unwrap();
        prop_assert_eq!(got_kind, kind);
        prop_assert_eq!(got_payload, &payload[..]);
        prop_assert!(rest.is_empty());
    }

    #[test]
    fn embeddings_are_unit_norm(tokens in prop::collection::vec("[a-z0-9]{1,10}", 0..8)) {
        let refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
        let e = embed_tokens(&refs);
        prop_assert_eq!(e.len(), EMBED_WIDTH);
        let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn balance_is_bounded(counts in prop::collection::vec(0u64..1000, 1..8)) {
        let b = balance(&counts).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        // permutation invariant
        let mut rev = counts.clone();
        rev.reverse();
        prop_assert_eq!(b, balance(&rev).unwrap());
    }

    // KL of softened distributions is nonnegative and zero on itself
    #[test]
    fn kd_loss_is_nonnegative(
        z in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6),
        w in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6),
        tau in 0.5f64..4.0,
    ) {
        let n = z.len().min(w.len());
        let t = &z[..n];
        let s = &w[..n];
        prop_assert!(kd_loss(t, s, tau).unwrap() >= -1e-12);
        prop_assert!(kd_loss(t, t, tau).unwrap().abs() < 1e-12);
    }

    // delivery never precedes enqueue plus latency, and per-link order of
    // deliveries matches the order of sends
    #[test]
    fn netsim_respects_latency_and_fifo(
        sizes in prop::collection::vec(1usize..5000, 1..10),
        latency in 1u64..50_000,
        bw in 1000u64..10_000_000,
    ) {
        let mut sim = NetSim::new();
        sim.add_link(1, 2, LinkConfig { latency_us: latency, bandwidth_bytes_per_sec: bw }).unwrap();
        for s in &sizes {
            sim.net_send(1, 2, vec![0u8; *s]).unwrap();
        }
        let delivered = sim.net_run();
        prop_assert_eq!(delivered.len(), sizes.len());
        let mut last = 0u64;
        for (i, m) in delivered.iter().enumerate() {
            prop_assert_eq!(m.payload.len(), sizes[i]);
            prop_assert!(m.delivery_us >= m.enqueue_us + latency);
            prop_assert!(m.delivery_us >= last);
            last = m.delivery_us;
        }
    }
}
