//! Browser bindings: build a small model once, then evaluate thresholds and
//! run the frontier search interactively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use expert_skip::calibration::{calibrate_alpha, GlobalFactors};
use expert_skip::data::CalibrationSet;
use expert_skip::dmt::{DmtObjective, SkipProfile, ThresholdPair};
use expert_skip::engine::{flop_count, ModelSpec, RouterTuning, SyntheticMoeModel};
use expert_skip::frontier::{frontier_search, make_grid, naive_search, FullTable, GridObjective};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(js_err)
}

#[derive(Serialize)]
struct Evaluation {
    f: f64,
    g: f64,
    expert_flops_saved: u64,
    expert_flops_baseline: u64,
    profile: SkipProfile,
}

#[derive(Serialize)]
struct Table {
    grid: Vec<f64>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Search<'a> {
    result: &'a expert_skip::frontier::FrontierResult,
    tau_text: Option<f64>,
    tau_vision: Option<f64>,
    naive_f_calls: Option<u64>,
}

#[wasm_bindgen]
pub struct DemoSession {
    model: SyntheticMoeModel,
    data: CalibrationSet,
    factors: GlobalFactors,
}

impl DemoSession {
    fn objective(&self) -> Result<DmtObjective<'_>, JsValue> {
        DmtObjective::new(&self.model, &self.factors, &self.data).map_err(js_err)
    }
}

#[wasm_bindgen]
impl DemoSession {
    /// Build a model with `layers` MoE layers of 8 experts (top-2), sample
    /// `samples` calibration sequences and estimate the global factors.
    #[wasm_bindgen(constructor)]
    pub fn new(
        seed: u64,
        layers: usize,
        samples: usize,
        text_fraction: f64,
        vision_temperature: f64,
    ) -> Result<DemoSession, JsValue> {
        let spec = ModelSpec::new(layers, 8, 2, 16, 32, 64, seed).map_err(js_err)?.with_router(RouterTuning {
            gain: 4.0,
            text_temperature: 1.0,
            vision_temperature,
        });
        let model = SyntheticMoeModel::build(&spec).map_err(js_err)?;
        let data = CalibrationSet::generate(samples, 8, text_fraction, 64, seed ^ 0x9e37_79b9).map_err(js_err)?;
        let factors = calibrate_alpha(&model, &data).map_err(js_err)?;
        Ok(DemoSession { model, data, factors })
    }

    /// Normalized global factor per layer, as JSON.
    pub fn alpha_profile(&self) -> Result<String, JsValue> {
        to_json(&self.factors.alpha_norm)
    }

    /// f, g, FLOP savings and the per-layer, per-modality skip profile.
    pub fn evaluate(&self, tau_text: f64, tau_vision: f64) -> Result<String, JsValue> {
        let tau = ThresholdPair::new(tau_text, tau_vision).map_err(js_err)?;
        let eval = self.objective()?.evaluate(tau).map_err(js_err)?;
        let flops = flop_count(self.model.spec(), &eval.stats);
        to_json(&Evaluation {
            f: eval.value.f,
            g: eval.value.g,
            expert_flops_saved: flops.expert_savings(),
            expert_flops_baseline: flops.expert_baseline,
            profile: SkipProfile::from_stats(&eval.stats),
        })
    }

    /// Every cell of the `d × d` grid; rows are text thresholds.
    pub fn table(&self, d: usize) -> Result<String, JsValue> {
        let grid = make_grid(d).map_err(js_err)?;
        let objective = self.objective()?;
        let table = FullTable::materialize(&GridObjective::new(&objective, &grid));
        let rows = |get: &dyn Fn(usize, usize) -> f64| (0..d).map(|q| (0..d).map(|p| get(q, p)).collect()).collect();
        to_json(&Table { grid: grid.values().to_vec(), f: rows(&|q, p| table.f(q, p)), g: rows(&|q, p| table.g(q, p)) })
    }

    /// Frontier search at target `rho`; with `compare` also counts the
    /// exhaustive search's f evaluations.
    pub fn frontier(&self, rho: f64, d: usize, compare: bool) -> Result<String, JsValue> {
        let grid = make_grid(d).map_err(js_err)?;
        let objective = self.objective()?;
        let result = frontier_search(GridObjective::new(&objective, &grid), rho).map_err(js_err)?;
        let naive_f_calls = if compare {
            Some(naive_search(GridObjective::new(&objective, &grid), rho).map_err(js_err)?.counters.f_calls)
        } else {
            None
        };
        to_json(&Search {
            tau_text: result.optimum.map(|e| grid.values()[e.q]),
            tau_vision: result.optimum.map(|e| grid.values()[e.p]),
            result: &result,
            naive_f_calls,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_round_trip() {
        let s = DemoSession::new(3, 3, 8, 0.5, 2.0).unwrap();
        let alpha: Vec<f64> = serde_json::from_str(&s.alpha_profile().unwrap()).unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let eval: serde_json::Value = serde_json::from_str(&s.evaluate(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(eval["g"], 0.0);
        let table: serde_json::Value = serde_json::from_str(&s.table(4).unwrap()).unwrap();
        assert_eq!(table["g"].as_array().unwrap().len(), 4);
        let search: serde_json::Value = serde_json::from_str(&s.frontier(0.5, 8, true).unwrap()).unwrap();
        assert_eq!(search["naive_f_calls"], 64);
        assert!(search["result"]["optimum"]["g"].as_f64().unwrap() >= 0.5);
    }
}
