use twtsim::harness::sweep::{read_rows, COLUMNS};
use twtsim::harness::{run_scenario, run_sweep, AccessMode, AgreementType, ModeSpec, ScenarioConfig, SweepSpec};

fn short(text: &str) -> ScenarioConfig {
    let mut c = ScenarioConfig::parse(text).unwrap();
    c.duration_s = 2.0;
    c
}

#[test]
fn every_variant_conserves_packets_and_time() {
    let variants = [
        "access = 'dcf'\nload_mbps = 8",
        "[twt]\nagreement = 'broadcast'\nlisten_interval = 2",
        "[twt]\ntrigger_enabled = false",
        "[twt]\nhybrid_dcf = true",
        "[twt]\nannounced = true\nnum_sessions = 4",
        "[mu]\npolicy = 'ofdma'",
        "[mu]\npolicy = 'mixed'\n[phy]\nchannel_width_mhz = 80",
        "[dcf]\nrts_cts = false\n[beacon]\nenabled = false",
    ];
    for v in variants {
        let r = run_scenario(&short(v)).unwrap_or_else(|e| panic!("{v}: {e}"));
        let m = &r.metrics;
        let ch = &m.channel;
        assert_eq!(ch.idle_us + ch.success_us + ch.collision_us + ch.control_us, m.horizon_us, "{v}");
        assert!(m.delivered > 0, "{v}");
        for s in &m.stations {
            assert!(s.arrived >= s.delivered + s.dropped, "{v}");
            assert!((0.0..=1.0).contains(&s.awake_fraction), "{v}");
        }
    }
}

#[test]
fn broadcast_members_sleep_more_than_dcf_stations() {
    let dcf = run_scenario(&short("access = 'dcf'\nload_mbps = 1")).unwrap();
    let twt = run_scenario(&short("load_mbps = 1\n[twt]\nagreement = 'broadcast'\nnum_sessions = 4")).unwrap();
    assert!(dcf.metrics.stations.iter().all(|s| s.awake_fraction == 1.0));
    assert!(twt.metrics.stations.iter().all(|s| s.awake_fraction < 0.5));
    assert_eq!(twt.config.twt.agreement, AgreementType::Broadcast);
}

#[test]
fn sweep_file_resumes_without_rerunning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let spec = SweepSpec {
        base: ScenarioConfig {
            duration_s: 1.0,
            ..ScenarioConfig::default()
        },
        loads_mbps: vec![1.0, 4.0],
        modes: vec![ModeSpec::Dcf, ModeSpec::Twt(2)],
        replications: 2,
    };
    let first = run_sweep(&spec, Some(&out)).unwrap();
    assert_eq!(first.len(), 8);
    let header = std::fs::read_to_string(&out).unwrap();
    assert_eq!(header.lines().next().unwrap(), COLUMNS.join(","));

    // A row edited on disk survives a resume, proving it was not recomputed.
    let mut rows = read_rows(&out).unwrap();
    rows[0].delivered = 424242;
    let mut w = csv::Writer::from_path(&out).unwrap();
    for r in &rows {
        w.serialize(r).unwrap();
    }
    w.flush().unwrap();
    let resumed = run_sweep(&spec, Some(&out)).unwrap();
    assert_eq!(resumed[0].delivered, 424242);
    assert_eq!(resumed[1..], first[1..]);
}

#[test]
fn report_json_echoes_config() {
    let c = ScenarioConfig {
        access: AccessMode::Dcf,
        duration_s: 1.0,
        ..ScenarioConfig::default()
    };
    let r = run_scenario(&c).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let echoed: ScenarioConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(echoed, c);
    assert_eq!(v["seed"], 1);
    assert!(v["metrics"]["channel"]["idle_fraction"].is_number());
}
