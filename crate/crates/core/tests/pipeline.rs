use std::f64::consts::PI;

use soliton_qubit::chain::{envelope_norm, evolve, spin_deficit, ChainParams, ChainState};
use soliton_qubit::closedform::Branch;
use soliton_qubit::qubit::{
    integrate_tdse, make_drive, solve_dxy_for_target, tune_dz, DetuningMode, EnvelopeSource, QubitParams,
    QubitState,
};
use soliton_qubit::solitons::SolitonSpec;

fn tuned_run(xi: f64, branch: Branch) -> f64 {
    let params = ChainParams::new(1.0, 10.0, 10.0, 420).unwrap();
    let spec = SolitonSpec::bright(PI / 30.0, 10.0, &params).unwrap();
    let dxy = solve_dxy_for_target(xi, 0, branch, &spec, params.s).unwrap();
    let tuned = tune_dz(&spec, &params, &QubitParams::new(dxy, 0.0), 1.372).unwrap();
    let q = QubitParams::new(dxy, tuned.dz());
    let drive = make_drive(&spec, &q, &params, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
    let tt = spec.transit_time().unwrap();
    let t_i = -8.0 * tt;
    integrate_tdse(&drive, QubitState::up(t_i), t_i, 8.0 * tt, tt / 200.0)
        .unwrap()
        .final_p_minus()
}

#[test]
fn tuned_soliton_switches_on_either_branch() {
    let minus = tuned_run(1.0, Branch::Minus);
    assert!(minus >= 0.95);
    assert!((tuned_run(1.0, Branch::Plus) - minus).abs() <= 1e-12);
}

#[test]
fn lattice_conserves_spin_deficit_for_both_kinds() {
    let params = ChainParams::new(1.0, 3.0, 1.0, 200).unwrap();
    for spec in [
        SolitonSpec::bright(PI / 10.0, 10.0, &params).unwrap(),
        SolitonSpec::dark(PI - PI / 100.0, 10.0, &params).unwrap(),
    ] {
        let init = match spec.kind() {
            soliton_qubit::solitons::SolitonKind::Bright => ChainState::from_soliton(&spec, &params, 0.0),
            soliton_qubit::solitons::SolitonKind::Dark => ChainState::kink_antikink(&spec, &params, 0.0).unwrap(),
        };
        let trace = evolve(&init, &params, 10.0, 1e-3, 1000).unwrap();
        let (first, last) = (trace.state(0), trace.state(trace.len() - 1));
        let d0 = spin_deficit(&first);
        assert!((spin_deficit(&last) - d0).abs() <= 1e-8 * d0, "{:?}", spec.kind());
        assert!(envelope_norm(&last).is_finite());
    }
}
