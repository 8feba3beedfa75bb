use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ut_core::lti::{butterworth_lowpass, margins, phase_deg, TransferFunction};
use ut_core::sim::{catalog, make_session, PlantModel, PlantSpec};
use ut_core::tuner::{integrator_time_constant, tune_pi_lead, zn_pid, PiLeadResult, TuneConfig};

const LINEAR: [&str; 3] = [
    "second_order_type_one",
    "fourth_order_resonant",
    "delayed_type_one",
];

fn plant(name: &str, seed: u64) -> PlantSpec {
    let mut p = catalog(name, &BTreeMap::new()).unwrap();
    p.seed = seed;
    p
}

fn model(p: &PlantSpec) -> &TransferFunction {
    match &p.model {
        PlantModel::LinearTf(tf) => tf,
        PlantModel::VcmLike(_) => unreachable!(),
    }
}

fn tune(p: &PlantSpec) -> PiLeadResult {
    tune_pi_lead(make_session(p.clone()).unwrap(), &TuneConfig::default()).unwrap()
}

#[test]
fn tuner_sources_never_name_the_plant_model() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("src/tuner");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        for banned in [
            "PlantSpec",
            "PlantModel",
            "catalog",
            "simulate_closed_loop",
            "make_session",
        ] {
            assert!(
                !text.contains(banned),
                "{} mentions {banned}",
                path.display()
            );
        }
    }
}

#[test]
fn linear_catalog_invariants() {
    let cfg = TuneConfig::default();
    for name in LINEAR {
        let p = plant(name, 3);
        let r = tune(&p);
        let g = model(&p);

        let i = &r.integrator;
        assert_eq!(
            i.ti,
            integrator_time_constant(i.omega_gc_bar, i.omega_c_pi_bar),
            "{name}"
        );
        assert_eq!(i.omega_c_pi_bar, 1.0 / i.ti_bar, "{name}");

        let first = i.sweep_log.iter().position(|row| row.omega_gc > 0.0);
        if let Some(k) = first {
            assert!(
                i.sweep_log[k..].iter().all(|row| row.omega_gc > 0.0),
                "{name}: {:?}",
                i.sweep_log
            );
        }
        assert!(i.sweep_log.windows(2).all(|w| w[1].ti < w[0].ti), "{name}");

        let c = &r.controllers.pi;
        let cl = &r.controllers.pi_lead;
        let top = 1.0 / (10.0 * r.ti);
        for k in 0..=200 {
            let w = top * 10f64.powf(-4.0 + 4.0 * k as f64 / 200.0);
            let ratio = cl.freq_response(w).unwrap().norm() / c.freq_response(w).unwrap().norm();
            assert!(
                (1.0..=1.05).contains(&ratio),
                "{name}: |L| = {ratio} at {w}"
            );
        }

        let pm = |l: &TransferFunction| {
            margins(&l.series(g), 1e-3, 1e5)
                .unwrap()
                .phase_margin()
                .unwrap()
        };
        assert!(pm(cl) >= pm(c), "{name}: {} < {}", pm(cl), pm(c));

        assert!(r.n_experiments <= cfg.safety.max_experiments);
        assert_eq!(r.n_experiments, r.log.experiments.len());

        let again = tune(&plant(name, 4242));
        assert_eq!(again.k, r.k, "{name}");
        assert_eq!(again.kp, r.kp, "{name}");
        assert_eq!(again.ti, r.ti, "{name}");
        assert_eq!(again.achieved_m, r.achieved_m, "{name}");
        assert_eq!(again.log.experiments, r.log.experiments, "{name}");
    }
}

#[test]
fn budget_is_a_hard_cap() {
    let mut cfg = TuneConfig::default();
    cfg.safety.max_experiments = 5;
    let f = tune_pi_lead(
        make_session(plant("second_order_type_one", 0)).unwrap(),
        &cfg,
    )
    .unwrap_err();
    assert!(f.log.experiments.len() <= 5);
    assert!(f.error.to_string().contains("budget"));
}

/// Frequency where the phase of `l` crosses -180°, by bisection.
fn phase_crossover(l: &TransferFunction, mut lo: f64, mut hi: f64) -> f64 {
    let f = |w: f64| phase_deg(l, w).unwrap() + 180.0;
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let m = (lo * hi).sqrt();
        if f(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn ultimate_gain_matches_the_phase_crossover() {
    let g = TransferFunction::new([1.0], [0.0005, 0.06, 1.0, 0.0]).unwrap();
    let cfg = TuneConfig::default();
    let f = butterworth_lowpass(cfg.zn.filter_hz, cfg.zn.filter_order).unwrap();
    let l = g.series(&f);
    let w180 = phase_crossover(&l, 1.0, 1e4);
    let ku = 1.0 / l.freq_response(w180).unwrap().norm();
    let tu = 2.0 * std::f64::consts::PI / w180;

    let z = zn_pid(make_session(PlantSpec::linear(g)).unwrap(), &cfg).unwrap();
    let u = z.ultimate;
    assert!((u.ku / ku - 1.0).abs() < 0.03, "Ku {} vs {ku}", u.ku);
    assert!((u.tu / tu - 1.0).abs() < 0.03, "Tu {} vs {tu}", u.tu);
}
