mod common;

use common::*;
use expert_skip::baselines::*;
use expert_skip::engine::{Modality, SkipPolicy};
use proptest::prelude::*;
use rand::Rng;

/// Try every start rank and keep the smallest that satisfies the rule.
fn brute_force_first(sorted: &[f64], beta: f64) -> Option<usize> {
    let total: f64 = sorted.iter().sum();
    (1..sorted.len()).filter(|&i| sorted[i..].iter().sum::<f64>() < beta * total).min()
}

fn random_sorted(r: &mut impl Rng) -> Vec<f64> {
    let k = r.random_range(1..10);
    let mut v: Vec<f64> = (0..k).map(|_| r.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

#[test]
fn mass_rule_matches_brute_force() {
    let mut r = rng(2024);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let v = random_sorted(&mut r);
        let beta = r.random::<f64>();
        if mass_rule_first_skipped(&v, beta) != brute_force_first(&v, beta) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn beta_one_keeps_only_top1() {
    let mut r = rng(5);
    for _ in 0..1000 {
        let v = random_sorted(&mut r);
        assert_eq!(mass_rule_skip(&v, 1.0), (1..v.len()).collect::<Vec<_>>());
        assert!(mass_rule_skip(&v, 0.0).is_empty());
    }
}

proptest! {
    #[test]
    fn mass_rule_monotone_in_beta(seed in 0u64..u64::MAX, b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
        let v = random_sorted(&mut rng(seed));
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let small = mass_rule_skip(&v, lo);
        let large = mass_rule_skip(&v, hi);
        prop_assert!(small.iter().all(|r| large.contains(r)));
    }
}

#[test]
fn reduced_k_is_exact_and_layer_uniform() {
    for (k, kp, want) in [(6, 6, 0.0), (6, 1, 5.0 / 6.0), (8, 2, 0.75)] {
        let model = model(3, 8.max(k), k, 1);
        let policy = reduced_k_policy(&model, kp).unwrap();
        let c = calib(6, 5, 0.5, 16, 2);
        let mut total = expert_skip::engine::SkipStats::new(3);
        for seq in c.samples() {
            total.merge(&model.forward(seq, &policy).unwrap().stats);
        }
        assert_eq!(total.skip_ratio(), want);
        for layer in &total.layers {
            for m in Modality::ALL {
                if layer.routed(m) > 0 {
                    assert_eq!(layer.skipped(m) as f64 / layer.routed(m) as f64, want);
                }
            }
        }
    }
    let model = model(1, 4, 2, 1);
    assert!(reduced_k_policy(&model, 0).is_err());
    assert!(reduced_k_policy(&model, 3).is_err());
}

fn g_under(
    model: &expert_skip::engine::SyntheticMoeModel,
    c: &expert_skip::data::CalibrationSet,
    s: &BetaSchedule,
) -> f64 {
    let mut total = expert_skip::engine::SkipStats::new(model.num_layers());
    for seq in c.samples() {
        total.merge(&model.forward(seq, &SkipPolicy::MassRule(s)).unwrap().stats);
    }
    total.skip_ratio()
}

#[test]
fn tiny_target_gives_zero_betas() {
    let model = model(3, 8, 4, 9);
    let c = calib(6, 4, 0.5, 16, 1);
    let s = calibrate_beta(&model, &c, 1e-9).unwrap();
    assert!(s.beta.iter().all(|b| *b == 0.0));
}

#[test]
fn single_layer_beta_matches_exhaustive_grid() {
    let model = model(1, 8, 4, 19);
    let c = calib(8, 5, 0.5, 16, 3);
    for rho in [0.2, 0.5, 0.7] {
        let s = calibrate_beta(&model, &c, rho).unwrap();
        // Exhaustive: the feasible grid value with the largest g, largest β on ties.
        let mut best = (f64::NEG_INFINITY, 0.0);
        for beta in beta_grid() {
            let g = g_under(&model, &c, &BetaSchedule::new(vec![beta]).unwrap());
            if g <= rho && g >= best.0 {
                best = (g, beta);
            }
        }
        assert_eq!(g_under(&model, &c, &s), best.0);
        assert_eq!(s.beta[0], best.1);
    }
}

#[test]
fn three_layer_schedule_tracks_target() {
    let model = model(3, 8, 4, 23);
    let c = calib(8, 5, 0.5, 16, 5);
    let rho = 0.5;
    let s = calibrate_beta(&model, &c, rho).unwrap();
    let g = g_under(&model, &c, &s);
    assert!(g <= rho, "{g}");
    // One more β step on the last layer overshoots, unless already at the top.
    let last = s.beta[2];
    if last < 1.0 {
        let mut bumped = s.clone();
        bumped.beta[2] = ((last * 100.0).round() + 1.0) / 100.0;
        assert!(g_under(&model, &c, &bumped) > rho);
    }
}
