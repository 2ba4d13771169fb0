use petreg::observer::CombineMode;
use petreg::sim::{compute_metrics, Channel};
use petreg::{run_scenario, Error, ScenarioDocument};

fn bundled(name: &str) -> ScenarioDocument {
    let path = format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"));
    ScenarioDocument::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_leader_stays_at_rest() {
    let mut doc = bundled("four_followers.toml");
    doc.leader.v0 = vec![0.0, 0.0];
    for f in &mut doc.followers {
        f.x0 = vec![0.0, 0.0];
    }
    doc.sim.t_end = 5.0;
    doc.sim.tail_window = 1.0;
    let (traj, log) = run_scenario(&doc.build().unwrap()).unwrap();
    for a in &traj.agents {
        assert!(a.x.iter().chain(&a.x_hat).all(|x| x.norm() == 0.0));
        assert!(a.e.iter().all(|e| e.norm() == 0.0));
        assert!(a.v_err.iter().all(|&e| e == 0.0));
    }
    // only the unconditional transmissions at t = 0
    assert!(log
        .records
        .iter()
        .filter(|r| r.channel == Channel::PetmB)
        .all(|r| r.at.0 == 0));
    let m = compute_metrics(&traj, &log, 1.0).unwrap();
    assert_eq!(m.tail_error, 0.0);
}

#[test]
fn four_followers_regulate() {
    let doc = bundled("four_followers.toml");
    let (traj, log) = run_scenario(&doc.build().unwrap()).unwrap();
    let at = |secs: f64| {
        traj.times
            .iter()
            .position(|t| t.seconds() >= secs - 1e-9)
            .unwrap()
    };
    let k20 = at(20.0);
    for a in &traj.agents {
        assert!(a.s_err[k20] < 1e-3 && a.v_err[k20] < 1e-3);
        let tilde = (&a.x_hat[k20] - &a.x[k20]).norm();
        assert!(tilde < 1e-3, "{tilde}");
        assert!(a.e[at(25.0)..].iter().all(|e| e.norm() < 1e-2));
    }
    let m = compute_metrics(&traj, &log, 5.0).unwrap();
    assert!(m.petm_a.multiples_of_period && m.petm_b.multiples_of_period);
    assert!(m.petm_a.min_gap.unwrap() >= 0.01 - 1e-12);
    assert!(m.petm_b.min_gap.unwrap() >= 0.01 - 1e-12);
}

#[test]
fn literal_conjunction_loses_the_leader() {
    let mut doc = bundled("four_followers.toml");
    doc.observer.combine_mode = CombineMode::And;
    match run_scenario(&doc.build().unwrap()) {
        Err(Error::Divergence { time, .. }) => assert!(time > 5.0),
        Ok((traj, _)) => {
            let worst = traj
                .agents
                .iter()
                .map(|a| *a.v_err.last().unwrap())
                .fold(0.0, f64::max);
            assert!(worst > 1.0, "{worst}");
        }
        Err(other) => panic!("{other}"),
    }
}

#[test]
fn runs_are_deterministic() {
    let mut doc = bundled("four_followers_actuator.toml");
    doc.sim.t_end = 5.0;
    doc.sim.tail_window = 1.0;
    let sc = doc.build().unwrap();
    assert_eq!(run_scenario(&sc).unwrap(), run_scenario(&sc).unwrap());
}

#[test]
fn integration_is_converged() {
    let mut doc = bundled("four_followers.toml");
    let coarse = {
        doc.sim.substeps = 2;
        let (t, l) = run_scenario(&doc.build().unwrap()).unwrap();
        compute_metrics(&t, &l, 5.0).unwrap().tail_error
    };
    let fine = {
        doc.sim.substeps = 4;
        let (t, l) = run_scenario(&doc.build().unwrap()).unwrap();
        compute_metrics(&t, &l, 5.0).unwrap().tail_error
    };
    assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
}

#[test]
fn phase_shifted_sensors_stay_on_their_grids() {
    let mut doc = bundled("four_followers_actuator.toml");
    doc.sim.sensor_phases = Some(vec![0.0, 0.005, 0.002, 0.007]);
    doc.sim.t_end = 10.0;
    let (traj, log) = run_scenario(&doc.build().unwrap()).unwrap();
    let phases = [0u64, 5_000, 2_000, 7_000];
    for r in log
        .records
        .iter()
        .filter(|r| r.channel == Channel::PetmB && r.at.0 > 0)
    {
        assert_eq!(r.at.0 % 10_000, phases[r.agent]);
    }
    for r in log.records.iter().filter(|r| r.channel == Channel::PetmC) {
        assert_eq!(r.at.0 % 10_000, 0);
    }
    let m = compute_metrics(&traj, &log, 2.0).unwrap();
    assert!(m.petm_b.multiples_of_period && m.petm_c.multiples_of_period);
    assert!(m.tail_error < 1e-2, "{}", m.tail_error);
}

#[test]
fn bound_violating_period_diverges_or_degrades() {
    // far outside every admissible period: the guard must stop the run
    let mut doc = bundled("four_followers.toml");
    doc.sim.comm_period = 1.0;
    doc.sim.sensor_periods = vec![1.0; 4];
    doc.sim.sensor_phases = None;
    match run_scenario(&doc.build().unwrap()) {
        Err(Error::Divergence { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}
