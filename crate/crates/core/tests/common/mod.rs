#![allow(dead_code)]

use expert_skip::calibration::GlobalFactors;
use expert_skip::data::CalibrationSet;
use expert_skip::dmt::ThresholdPair;
use expert_skip::engine::{ModelSpec, RouterTuning, SkipMask, SkipPolicy, SyntheticMoeModel, TokenSequence};
use expert_skip::frontier::FullTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(layers: usize, experts: usize, k: usize, seed: u64) -> SyntheticMoeModel {
    let spec = ModelSpec::new(layers, experts, k, 8, 16, 16, seed).unwrap();
    SyntheticMoeModel::build(&spec).unwrap()
}

/// Vision routers run at a higher temperature, so vision routing is flatter.
pub fn bimodal_model(layers: usize, experts: usize, k: usize, seed: u64) -> SyntheticMoeModel {
    let spec = ModelSpec::new(layers, experts, k, 8, 16, 16, seed).unwrap().with_router(RouterTuning {
        gain: 6.0,
        text_temperature: 1.0,
        vision_temperature: 4.0,
    });
    SyntheticMoeModel::build(&spec).unwrap()
}

pub fn calib(n: usize, len: usize, text_fraction: f64, vocab: usize, seed: u64) -> CalibrationSet {
    CalibrationSet::generate(n, len, text_fraction, vocab, seed).unwrap()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Term-by-term KL with compensated summation and the same 1e-12 floor.
pub fn oracle_kl(p: &[f64], q: &[f64]) -> f64 {
    compensated_sum(p.iter().zip(q).filter(|(pv, _)| **pv > 0.0).map(|(pv, qv)| pv * (pv.ln() - qv.max(1e-12).ln())))
}

pub fn oracle_rms_norm(x: &[f64]) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v / (ms + 1e-6).sqrt()).collect()
}

/// Per-slot application of the threshold rule, one layer at a time: route
/// each position with `moe_layer_forward`, compare every routed score against
/// its modality threshold, freeze the layer's mask and move on. Returns the
/// final distribution and `(routed, skipped)`.
pub fn brute_force_dmt(
    model: &SyntheticMoeModel,
    seq: &TokenSequence,
    factors: &GlobalFactors,
    thresholds: ThresholdPair,
) -> (Vec<f64>, u64, u64) {
    let spec = model.spec();
    let n = seq.len();
    let mut mask = SkipMask::new(spec.num_layers, n, spec.top_k);
    let (mut routed, mut skipped) = (0u64, 0u64);
    for l in 0..spec.num_layers {
        let (_, trace) = model.forward_traced(seq, &SkipPolicy::FixedMask(&mask)).unwrap();
        for (pos, tok) in seq.tokens().iter().enumerate() {
            let x = &trace.moe_inputs[l][pos];
            let routing = model.moe_layer_forward(x, l, tok.modality, &[]).unwrap().routing;
            for (slot, &m) in routing.selected.iter().enumerate() {
                let score = factors.alpha_norm[l] * routing.probs[m];
                let tau = match tok.modality {
                    expert_skip::engine::Modality::Text => thresholds.tau_text,
                    expert_skip::engine::Modality::Vision => thresholds.tau_vision,
                };
                let skip = score < tau;
                mask.set(l, pos, slot, skip);
                routed += 1;
                skipped += u64::from(skip);
            }
        }
    }
    let out = model.forward(seq, &SkipPolicy::FixedMask(&mask)).unwrap();
    (out.distribution, routed, skipped)
}

/// Random table whose `f` and `g` are non-decreasing in both indices.
/// `g` is a 2-D cumulative sum normalised into [0, 1]; values are quantised
/// so plateaus and ties occur.
pub fn random_monotone_table(d: usize, seed: u64) -> FullTable {
    let mut r = rng(seed);
    let cumulative = |scale: u32, r: &mut ChaCha8Rng| {
        let inc: Vec<f64> = (0..d * d).map(|_| f64::from(r.random_range(0..scale))).collect();
        let mut c = vec![0.0; d * d];
        for q in 0..d {
            for p in 0..d {
                let up = if q > 0 { c[(q - 1) * d + p] } else { 0.0 };
                let left = if p > 0 { c[q * d + p - 1] } else { 0.0 };
                let diag = if q > 0 && p > 0 { c[(q - 1) * d + p - 1] } else { 0.0 };
                c[q * d + p] = inc[q * d + p] + up + left - diag;
            }
        }
        c
    };
    let f = cumulative(4, &mut r);
    let g_raw = cumulative(3, &mut r);
    let max = g_raw.iter().copied().fold(0.0, f64::max).max(1.0);
    let g = g_raw.iter().map(|v| v / max).collect();
    FullTable::new(d, f, g).unwrap()
}

/// Mean KL between the unmodified output and the output with every routed
/// expert of layer `l` masked out, for each layer.
pub fn brute_force_alpha(model: &SyntheticMoeModel, c: &CalibrationSet) -> Vec<f64> {
    let spec = model.spec();
    (0..spec.num_layers)
        .map(|l| {
            let terms = c.samples().iter().map(|seq| {
                let base = model.forward(seq, &SkipPolicy::None).unwrap().distribution;
                let mut mask = SkipMask::new(spec.num_layers, seq.len(), spec.top_k);
                for pos in 0..seq.len() {
                    for slot in 0..spec.top_k {
                        mask.set(l, pos, slot, true);
                    }
                }
                let abl = model.forward(seq, &SkipPolicy::FixedMask(&mask)).unwrap().distribution;
                oracle_kl(&base, &abl)
            });
            compensated_sum(terms) / c.len() as f64
        })
        .collect()
}
