use proptest::prelude::*;

use twtsim::engine::Engine;
use twtsim::mu::{allocate, validate, MuPolicy};
use twtsim::twt::{
    decode_element, encode_element, BroadcastInfo, Direction, TwtCommand, TwtMessage, TwtParams,
};
use twtsim::StationId;

fn params() -> impl Strategy<Value = TwtParams> {
    (1u32..=2000, any::<u64>(), any::<u8>(), any::<[bool; 4]>()).prop_flat_map(|(iv, twt, ch, f)| {
        (1u32..=iv).prop_map(move |units| TwtParams {
            target_wake_time_us: twt,
            wake_interval_us: iv * 256,
            min_wake_duration_us: units * 256,
            channel: ch,
            protection: f[0],
            trigger_enabled: f[1],
            implicit: f[2],
            announced: f[3],
        })
    })
}

fn message() -> impl Strategy<Value = TwtMessage> {
    let commands = prop::sample::select(vec![
        TwtCommand::Request,
        TwtCommand::Suggest,
        TwtCommand::Demand,
        TwtCommand::Accept,
        TwtCommand::Alternate,
        TwtCommand::Dictate,
        TwtCommand::Reject,
    ]);
    let broadcast = prop::option::of((any::<u8>(), any::<u64>(), any::<u16>()).prop_map(|(id, t, li)| {
        BroadcastInfo {
            session_id: id,
            next_target_beacon_us: t,
            listen_interval: li,
        }
    }));
    (commands, 0u8..8, prop::option::of(params()), broadcast).prop_map(|(command, id, p, broadcast)| {
        let params = match command {
            TwtCommand::Reject => None,
            TwtCommand::Request => p,
            _ => Some(p.unwrap_or(TwtParams {
                target_wake_time_us: 0,
                wake_interval_us: 20_480,
                min_wake_duration_us: 10_240,
                channel: 0,
                protection: false,
                trigger_enabled: true,
                implicit: true,
                announced: false,
            })),
        };
        let base = match command.direction() {
            Direction::Request => TwtMessage::request(command, id, params),
            Direction::Response => TwtMessage::response(command, id, params),
        };
        TwtMessage { broadcast, ..base }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn codec_round_trips(m in message()) {
        let bytes = encode_element(&m).unwrap();
        prop_assert_eq!(bytes[1] as usize, bytes.len() - 2);
        prop_assert_eq!(decode_element(&bytes), Ok(m));
    }

    #[test]
    fn codec_rejects_every_prefix(m in message()) {
        let bytes = encode_element(&m).unwrap();
        for cut in 0..bytes.len() {
            prop_assert!(decode_element(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn decoder_is_total(bytes in prop::collection::vec(any::<u8>(), 0..48)) {
        if let Ok(m) = decode_element(&bytes) {
            prop_assert!(m.validate().is_ok());
            prop_assert_eq!(encode_element(&m).unwrap(), bytes);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn engine_delivers_in_time_then_insertion_order(
        times in prop::collection::vec(0u64..50, 1..60),
        cancel in prop::collection::vec(any::<bool>(), 60),
    ) {
        let mut eng = Engine::new();
        let handles: Vec<_> = times.iter().enumerate().map(|(i, &t)| eng.schedule(t, i).unwrap()).collect();
        for (h, &c) in handles.iter().zip(&cancel) {
            if c {
                eng.cancel(*h);
            }
        }
        let mut expected: Vec<(u64, usize)> = times
            .iter()
            .enumerate()
            .filter(|(i, _)| !cancel[*i])
            .map(|(i, &t)| (t, i))
            .collect();
        expected.sort();
        let mut got = Vec::new();
        eng.run(100, |e, ev| {
            assert_eq!(e.now(), ev.fire_time);
            got.push((ev.fire_time, ev.kind));
        }).unwrap();
        prop_assert_eq!(got, expected);
        prop_assert_eq!(eng.now(), 100);
    }

    #[test]
    fn allocations_validate(
        width in prop::sample::select(vec![20u32, 40, 80, 160]),
        policy in prop::sample::select(vec![MuPolicy::MuMimo, MuPolicy::Ofdma, MuPolicy::Mixed]),
        demands in prop::collection::vec(0usize..100, 1..30),
        max_mu in 1usize..=8,
        streams in 1u8..=8,
    ) {
        let d: Vec<(StationId, usize)> = demands.iter().enumerate().map(|(i, &n)| (StationId(i as u16), n)).collect();
        match allocate(width, &d, max_mu, policy, streams) {
            Ok(out) => {
                prop_assert_eq!(validate(&out.allocation), Ok(()));
                let busy = demands.iter().filter(|&&n| n > 0).count();
                prop_assert_eq!(out.allocation.len() + out.deferred.len(), busy);
                prop_assert!(out.allocation.len() <= max_mu);
            }
            Err(e) => prop_assert!(demands.iter().all(|&n| n == 0), "{e}"),
        }
    }
}
