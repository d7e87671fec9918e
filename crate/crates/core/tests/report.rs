mod common;

use common::*;
use expert_skip::baselines::{calibrate_beta, evaluate_mass_rule};
use expert_skip::calibration::calibrate_alpha;
use expert_skip::dmt::DmtObjective;
use expert_skip::frontier::{frontier_search, make_grid, GridObjective};
use expert_skip::report::*;

#[test]
fn sweep_rows_meet_their_targets() {
    let model = bimodal_model(3, 8, 4, 12);
    let c = calib(16, 5, 0.5, 16, 3);
    let factors = calibrate_alpha(&model, &c).unwrap();
    let objective = DmtObjective::new(&model, &factors, &c).unwrap();
    let grid = make_grid(16).unwrap();
    let sweep = run_sweep(&objective, &grid, &RHO_PRESETS).unwrap();
    assert_eq!(sweep.rows.len(), 3 * RHO_PRESETS.len());
    for row in &sweep.rows {
        match row.policy {
            "dmt" | "reduced_k" => assert_eq!(row.meets_target(), row.g.is_some(), "{row:?}"),
            "mass_rule" => assert!(row.g.unwrap() <= row.rho, "{row:?}"),
            other => panic!("unexpected policy {other}"),
        }
    }
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + sweep.rows.len());
    assert!(!text.contains('\r'));
}

#[test]
fn dmt_beats_mass_rule_at_matched_g_on_bimodal_model() {
    let model = bimodal_model(4, 8, 4, 21);
    let c = calib(32, 6, 0.5, 16, 8);
    let factors = calibrate_alpha(&model, &c).unwrap();
    let objective = DmtObjective::new(&model, &factors, &c).unwrap();
    let grid = make_grid(32).unwrap();
    for rho in [0.3, 0.5, 0.7] {
        let mass = evaluate_mass_rule(&objective, &calibrate_beta(&model, &c, rho).unwrap()).unwrap();
        let dmt = frontier_search(GridObjective::new(&objective, &grid), mass.g).unwrap().optimum.unwrap();
        assert!(dmt.g >= mass.g);
        assert!(dmt.f <= mass.f, "rho {rho}: dmt f {} (g {}) vs mass f {} (g {})", dmt.f, dmt.g, mass.f, mass.g);
    }
}

#[test]
fn bench_counts_match_grid() {
    let model = model(2, 8, 2, 5);
    let c = calib(8, 4, 0.5, 16, 5);
    let factors = calibrate_alpha(&model, &c).unwrap();
    let objective = DmtObjective::new(&model, &factors, &c).unwrap();
    let grid = make_grid(12).unwrap();
    let bench = run_bench(&objective, &grid, 0.3).unwrap();
    assert_eq!(bench.agreement.naive.counters.f_calls, 144);
    assert!(bench.agreement.agrees());
    assert!(bench.agreement.frontier.counters.g_calls <= 24);
}
