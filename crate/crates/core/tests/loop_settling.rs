use fuzzytherm_core::{control, fltc, LoopConfig, PlantParams};

// Regression pins from the first implementation; nothing external to match.
#[test]
fn default_run_settles_near_setpoint() {
    let rec = control::run(
        fltc::controller(),
        PlantParams::default(),
        LoopConfig::default(),
    )
    .unwrap();
    let s = rec.summary;
    assert_eq!(rec.frames.len(), 600);
    assert_eq!(s.settling_time, Some(178.0));
    assert!(s.overshoot >= 0.0 && s.overshoot < 0.05, "{}", s.overshoot);
    let (lo, hi) = s.steady_state_error.unwrap();
    assert!(lo > -0.05 && hi <= 1.0, "{lo} {hi}");
    let last = rec.frames.last().unwrap();
    assert!((last.sensed - 45.0).abs() < 0.05);
}

#[test]
fn worked_example_appears_when_cooling_through_46() {
    let cfg = LoopConfig {
        initial_temp: 55.0,
        ..Default::default()
    };
    let rec = control::run(fltc::controller(), PlantParams::default(), cfg).unwrap();
    let near: Vec<_> = rec
        .frames
        .iter()
        .filter(|f| (f.sensed - 46.0).abs() < 0.2)
        .collect();
    assert!(!near.is_empty());
    for f in near {
        assert!((f.fan_duty - 0.51).abs() <= 0.01, "{}", f.fan_duty);
        assert!((f.heater_duty - 0.49).abs() <= 0.01);
    }
}
