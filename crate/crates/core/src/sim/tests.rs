use super::*;
use crate::output::trace_csv;
use crate::Exact;

fn reference() -> ScenarioConfig {
    ScenarioConfig::default()
}

fn fixed_link(up: &str, down: &str, s: f64) -> LinkSpec {
    LinkSpec {
        upstream: up.into(),
        downstream: down.into(),
        fixed: FixedDelay::Seconds(s),
        noise: NoiseModel::None,
        prop_speed_mps: config::SPEED_OF_LIGHT_MPS,
    }
}

fn node(name: &str, ratio: f64, offset_s: f64) -> NodeSpec {
    NodeSpec {
        name: name.into(),
        ratio,
        offset_s,
    }
}

#[test]
fn no_measurements_still_beacons() {
    let mut cfg = reference();
    cfg.n_measurements = 0;
    let out = run::<f64>(&cfg).unwrap();
    assert!(out.records.is_empty());
    assert!(out.undelivered.is_empty());
    assert!(!out.ratio_series.is_empty());
    // about 1200 beacons per link over 120 s
    for link in 0..2 {
        let n = out.ratio_series.iter().filter(|s| s.link == link).count();
        assert!((1199..=1201).contains(&n), "link {link}: {n}");
    }
}

#[test]
fn reference_run_delivers_everything_accurately() {
    let out = run::<f64>(&reference()).unwrap();
    assert_eq!(out.n_generated, 100);
    assert_eq!(out.records.len(), 100);
    let warm: Vec<_> = out.records.iter().filter(|r| !r.warm_up()).collect();
    assert!(warm.len() >= 95);
    for r in &warm {
        assert!(r.err_twice.abs() <= 1e-4, "{r:?}");
        assert!(r.err_once.abs() <= 1e-4);
        assert!(r.delivered_at > r.t_m);
        // per-hop estimates on the affine-plus-delay model
        let gs = &r.sensor_hop().estimate;
        let hg = &r.head_hop().estimate;
        assert!((gs.ratio_used - 1.0002 / 1.0001).abs() < 1e-12);
        assert!((hg.ratio_used - 1.0001).abs() < 1e-12);
        assert!(gs.delay_est > 0.0 && hg.delay_est > 0.0);
    }
}

#[test]
fn exact_backend_has_zero_warm_error() {
    let out = run::<Exact>(&reference()).unwrap();
    for r in out.records.iter().filter(|r| !r.warm_up()) {
        assert_eq!(r.err_twice, Exact::from_count(0));
        assert_eq!(r.err_once, Exact::from_count(0));
        for h in &r.hops {
            assert_eq!(h.isolated_error, Exact::from_count(0));
        }
    }
    for s in out.ratio_series.iter().filter(|s| !s.warm_up) {
        assert_eq!(s.r_hat, s.r_true);
    }
}

#[test]
fn f64_and_exact_agree() {
    let a = run::<f64>(&reference()).unwrap();
    let b = run::<Exact>(&reference()).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.measurement_id, y.measurement_id);
        assert!((x.t_scfr_twice - y.t_scfr_twice.approx()).abs() < 1e-12);
        assert!(
            (x.sensor_hop().estimate.theta_est - y.sensor_hop().estimate.theta_est.approx()).abs()
                < 1e-12
        );
    }
}

#[test]
fn deterministic() {
    let mut cfg = reference();
    cfg.links[1].noise = NoiseModel::Gaussian(1e-6);
    let a = trace_csv(&run::<f64>(&cfg).unwrap()).unwrap();
    let b = trace_csv(&run::<f64>(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    let c = trace_csv(&run::<f64>(&cfg).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn link_noise_streams_are_independent() {
    let mut a = reference();
    a.links[1].noise = NoiseModel::Exponential(1e-6);
    let mut b = a.clone();
    b.links[0].noise = NoiseModel::Exponential(1e-6);
    let oa = run::<f64>(&a).unwrap();
    let ob = run::<f64>(&b).unwrap();
    // identical sensor-side beacon arrivals despite noise on the other link
    let sensor_a: Vec<_> = oa
        .ratio_series
        .iter()
        .filter(|s| s.link == 1)
        .map(|s| s.at)
        .collect();
    let sensor_b: Vec<_> = ob
        .ratio_series
        .iter()
        .filter(|s| s.link == 1)
        .map(|s| s.at)
        .collect();
    assert_eq!(sensor_a, sensor_b);
}

#[test]
fn conservation() {
    let mut cases = vec![reference()];
    let mut short = reference();
    short.horizon_s = 10.0;
    short.n_measurements = 40;
    cases.push(short);
    let mut slow = reference();
    slow.links[1].fixed = FixedDelay::Seconds(0.5);
    slow.links[0].noise = NoiseModel::Gaussian(1e-3);
    slow.horizon_s = 2.0;
    slow.n_measurements = 30;
    cases.push(slow);
    for seed in 0..5 {
        for cfg in &cases {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            let out = run::<f64>(&cfg).unwrap();
            assert_eq!(
                out.records.len() + out.undelivered.len(),
                cfg.n_measurements
            );
            let mut ids: Vec<u64> = out
                .records
                .iter()
                .map(|r| r.measurement_id)
                .chain(out.undelivered.iter().map(|u| u.measurement_id))
                .collect();
            ids.sort();
            assert_eq!(ids, (0..cfg.n_measurements as u64).collect::<Vec<_>>());
        }
    }
}

#[test]
fn measurement_before_first_beacon_is_not_synchronized() {
    let mut cfg = reference();
    cfg.links[1].fixed = FixedDelay::Seconds(0.5);
    cfg.horizon_s = 5.0;
    cfg.n_measurements = 50;
    let out = run::<f64>(&cfg).unwrap();
    let early = out
        .undelivered
        .iter()
        .filter(|u| u.reason == UndeliveredReason::NotSynchronized { node: 2 })
        .count();
    assert!(early > 0);
    assert!(out
        .undelivered
        .iter()
        .filter(|u| u.reason == UndeliveredReason::NotSynchronized { node: 2 })
        .all(|u| u.t_m < 0.5 + 1e-9));
    assert!(out.records.iter().all(|r| r.t_m >= 0.5));
}

#[test]
fn past_horizon_is_undelivered() {
    let mut cfg = reference();
    cfg.seed = 1; // this realization runs past 120 s
    let out = run::<f64>(&cfg).unwrap();
    assert!(!out.undelivered.is_empty());
    for u in &out.undelivered {
        assert_eq!(u.reason, UndeliveredReason::PastHorizon);
        assert!(u.t_m > 119.9);
    }
}

#[test]
fn warm_up_is_flagged() {
    let mut cfg = reference();
    cfg.beacon_interval_s = 5.0;
    cfg.n_measurements = 30;
    cfg.horizon_s = 30.0;
    let out = run::<f64>(&cfg).unwrap();
    let (cold, warm): (Vec<_>, Vec<_>) = out.records.iter().partition(|r| r.warm_up());
    assert!(!cold.is_empty() && !warm.is_empty());
    for r in &cold {
        assert!(r.t_m < 5.0 + 1e-3);
        assert!(r
            .hops
            .iter()
            .any(|h| h.estimate.warm_up && h.estimate.ratio_used == 1.0));
    }
    for r in &warm {
        assert!(r.err_twice.abs() < 1e-9);
    }
}

/// The k-th beacon leaves at local time start + k * interval exactly.
#[test]
fn beacon_cadence_is_exact() {
    let cfg = reference();
    let out = run::<Exact>(&cfg).unwrap();
    let interval = Exact::of(cfg.beacon_interval_s);
    for link in 0..2 {
        let sender = &out.clocks[link];
        let d = Exact::of(cfg.links[link].fixed.clone_delay_m())
            / Exact::of(config::SPEED_OF_LIGHT_MPS);
        let start = sender.local_time(&SimTime::zero());
        for (k, s) in out
            .ratio_series
            .iter()
            .filter(|s| s.link == link)
            .enumerate()
            .take(50)
        {
            let departure = SimTime::new(s.at.clone() - d.clone());
            let local = sender.local_time(&departure);
            assert_eq!(
                local - start.clone(),
                Exact::from_count(k as u64) * interval.clone()
            );
        }
    }
}

impl FixedDelay {
    fn clone_delay_m(&self) -> f64 {
        match *self {
            FixedDelay::DistanceM(m) => m,
            FixedDelay::Seconds(_) => panic!("distance link expected"),
        }
    }
}

#[test]
fn single_hop_chain() {
    let cfg = reference().single_hop();
    let out = run::<f64>(&cfg).unwrap();
    assert_eq!(out.hops(), 1);
    assert_eq!(out.link_labels, ["sensor-head"]);
    for r in out.records.iter().filter(|r| !r.warm_up()) {
        assert_eq!(r.hops.len(), 1);
        assert_eq!(r.t_scfr_once, r.t_scfr_twice);
        assert!(r.err_twice.abs() < 1e-12);
        assert!((r.sensor_hop().estimate.ratio_used - 1.0002).abs() < 1e-12);
    }
}

#[test]
fn longer_chains_recover_exactly() {
    let cfg = ScenarioConfig {
        nodes: vec![
            node("head", 1.0, 0.0),
            node("g1", 1.00005, -0.4),
            node("g2", 0.99992, 2.5),
            node("g3", 1.0003, 0.1),
            node("sensor", 0.9998, -1.7),
        ],
        links: vec![
            fixed_link("head", "g1", 1e-6),
            fixed_link("g1", "g2", 2e-6),
            fixed_link("g2", "g3", 5e-7),
            fixed_link("g3", "sensor", 3e-6),
        ],
        processing_delay_a_s: 2e-3,
        n_measurements: 30,
        horizon_s: 30.0,
        ..reference()
    };
    let out = run::<Exact>(&cfg).unwrap();
    assert_eq!(out.hops(), 4);
    let warm: Vec<_> = out.records.iter().filter(|r| !r.warm_up()).collect();
    assert!(!warm.is_empty());
    for r in warm {
        assert_eq!(r.hops.len(), 4);
        assert_eq!(r.err_twice, Exact::from_count(0));
        assert_eq!(r.err_once, Exact::from_count(0));
    }
}

#[test]
fn noisy_run_is_bounded() {
    let mut cfg = reference();
    for l in &mut cfg.links {
        l.noise = NoiseModel::Gaussian(1e-6);
    }
    let out = run::<f64>(&cfg).unwrap();
    assert_eq!(out.records.len(), 100);
    // offset errors are at most half the noise asymmetry, a few sigma
    for r in out.records.iter().filter(|r| !r.warm_up()) {
        assert!(r.err_twice.abs() < 1e-4, "{}", r.err_twice);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let mut cfg = reference();
    cfg.horizon_s = 0.0;
    cfg.beacon_interval_s = -1.0;
    match run::<f64>(&cfg) {
        Err(SimError::Config(e)) => assert_eq!(e.violations().len(), 2),
        other => panic!("{other:?}"),
    }
}
