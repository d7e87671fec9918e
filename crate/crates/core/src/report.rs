//! Drivers behind the CLI reports: frontier CSVs, baseline sweeps and the
//! frontier-vs-exhaustive benchmark.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::baselines::{calibrate_beta, evaluate_mass_rule, reduced_k_policy};
use crate::dmt::DmtObjective;
use crate::error::Result;
use crate::frontier::{frontier_search, naive_search, FrontierResult, Grid, GridObjective, NaiveResult};
use crate::io::csv_writer;

/// Target skip ratios that line up with the published comparison tables.
pub const RHO_PRESETS: [f64; 5] = [0.48, 0.65, 0.73, 0.80, 0.85];

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per frontier cell: `q,p,tau_text,tau_vision,f,g`.
pub fn write_frontier_csv<W: Write>(result: &FrontierResult, grid: &Grid, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["q", "p", "tau_text", "tau_vision", "f", "g"])?;
    for e in &result.frontier {
        let t = grid.pair(e.q, e.p);
        out.write_record([
            e.q.to_string(),
            e.p.to_string(),
            t.tau_text.to_string(),
            t.tau_vision.to_string(),
            e.f.to_string(),
            e.g.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Single summary record; `status` is `OK` or `INFEASIBLE`.
pub fn write_frontier_summary<W: Write>(result: &FrontierResult, grid: &Grid, samples: usize, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "status",
        "q",
        "p",
        "tau_text",
        "tau_vision",
        "f",
        "g",
        "f_calls",
        "g_calls",
        "evaluations",
        "rho",
        "D",
        "N",
    ])?;
    let c = result.counters;
    let tail = [
        c.f_calls.to_string(),
        c.g_calls.to_string(),
        c.evaluations.to_string(),
        result.rho.to_string(),
        result.grid_size.to_string(),
        samples.to_string(),
    ];
    let head: Vec<String> = match result.optimum {
        Some(e) => {
            let t = grid.pair(e.q, e.p);
            vec![
                "OK".into(),
                e.q.to_string(),
                e.p.to_string(),
                t.tau_text.to_string(),
                t.tau_vision.to_string(),
                e.f.to_string(),
                e.g.to_string(),
            ]
        }
        None => {
            let mut v = vec!["INFEASIBLE".to_string()];
            v.extend(std::iter::repeat_n(String::new(), 6));
            v
        }
    };
    out.write_record(head.iter().chain(tail.iter()))?;
    out.flush()?;
    Ok(())
}

/// Frontier result next to the exhaustive one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub naive: NaiveResult,
    pub frontier: FrontierResult,
}

impl Agreement {
    /// Same optimal objective value, or both infeasible.
    pub fn agrees(&self) -> bool {
        match (self.naive.best, self.frontier.optimum) {
            (Some(a), Some(b)) => a.f == b.f,
            (None, None) => true,
            _ => false,
        }
    }

    pub fn f_call_ratio(&self) -> f64 {
        self.naive.counters.f_calls as f64 / self.frontier.counters.f_calls.max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        out.write_record([
            "agree",
            "naive_q",
            "naive_p",
            "naive_f",
            "frontier_q",
            "frontier_p",
            "frontier_f",
            "naive_f_calls",
            "frontier_f_calls",
            "naive_g_calls",
            "frontier_g_calls",
            "f_call_ratio",
        ])?;
        let (n, fr) = (self.naive.best, self.frontier.optimum);
        out.write_record([
            self.agrees().to_string(),
            n.map(|e| e.q.to_string()).unwrap_or_default(),
            n.map(|e| e.p.to_string()).unwrap_or_default(),
            opt_str(n.map(|e| e.f)),
            fr.map(|e| e.q.to_string()).unwrap_or_default(),
            fr.map(|e| e.p.to_string()).unwrap_or_default(),
            opt_str(fr.map(|e| e.f)),
            self.naive.counters.f_calls.to_string(),
            self.frontier.counters.f_calls.to_string(),
            self.naive.counters.g_calls.to_string(),
            self.frontier.counters.g_calls.to_string(),
            self.f_call_ratio().to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub policy: &'static str,
    pub tau_text: Option<f64>,
    pub tau_vision: Option<f64>,
    /// `None` when the policy cannot reach `rho`.
    pub f: Option<f64>,
    pub g: Option<f64>,
    pub f_calls: u64,
    pub g_calls: u64,
    pub detail: String,
}

impl SweepRow {
    /// Baselines are fitted from below, so a row can report `g < rho`.
    pub fn meets_target(&self) -> bool {
        self.g.is_some_and(|g| g >= self.rho)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv_writer(w);
        out.write_record([
            "rho",
            "policy",
            "tau_text",
            "tau_vision",
            "f",
            "g",
            "meets_target",
            "f_calls",
            "g_calls",
            "detail",
        ])?;
        for r in &self.rows {
            out.write_record([
                r.rho.to_string(),
                r.policy.to_string(),
                opt_str(r.tau_text),
                opt_str(r.tau_vision),
                r.f.map(|v| v.to_string()).unwrap_or_else(|| "INFEASIBLE".into()),
                opt_str(r.g),
                r.meets_target().to_string(),
                r.f_calls.to_string(),
                r.g_calls.to_string(),
                r.detail.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Largest `k'` whose truncation skips at least `rho` of the routed slots.
pub fn reduced_k_for(top_k: usize, rho: f64) -> Option<usize> {
    (1..=top_k).rev().find(|&kp| (top_k - kp) as f64 / top_k as f64 >= rho)
}

/// DMT frontier search, truncated top-k and the tail-mass rule at each target.
pub fn run_sweep(objective: &DmtObjective<'_>, grid: &Grid, rhos: &[f64]) -> Result<SweepResult> {
    let model = objective.model();
    let k = model.spec().top_k;
    let mut rows = Vec::new();
    for &rho in rhos {
        let result = frontier_search(GridObjective::new(objective, grid), rho)?;
        let opt = result.optimum;
        rows.push(SweepRow {
            rho,
            policy: "dmt",
            tau_text: opt.map(|e| grid.values()[e.q]),
            tau_vision: opt.map(|e| grid.values()[e.p]),
            f: opt.map(|e| e.f),
            g: opt.map(|e| e.g),
            f_calls: result.counters.f_calls,
            g_calls: result.counters.g_calls,
            detail: opt.map(|e| format!("q={} p={}", e.q, e.p)).unwrap_or_default(),
        });

        let (f, g, detail) = match reduced_k_for(k, rho) {
            Some(kp) => {
                let v = objective.evaluate_policy(&reduced_k_policy(model, kp)?)?.value;
                (Some(v.f), Some(v.g), format!("k'={kp}"))
            }
            None => (None, None, String::new()),
        };
        rows.push(SweepRow {
            rho,
            policy: "reduced_k",
            tau_text: None,
            tau_vision: None,
            f,
            g,
            f_calls: 0,
            g_calls: 0,
            detail,
        });

        let schedule = calibrate_beta(model, objective.calibration(), rho)?;
        let v = evaluate_mass_rule(objective, &schedule)?;
        let betas: Vec<String> = schedule.beta.iter().map(|b| b.to_string()).collect();
        rows.push(SweepRow {
            rho,
            policy: "mass_rule",
            tau_text: None,
            tau_vision: None,
            f: Some(v.f),
            g: Some(v.g),
            f_calls: 0,
            g_calls: 0,
            detail: format!("beta={}", betas.join(";")),
        });
    }
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub grid_size: usize,
    pub samples: usize,
    pub rho: f64,
    pub agreement: Agreement,
    pub frontier_seconds: f64,
    pub naive_seconds: f64,
}

impl BenchReport {
    pub fn wall_ratio(&self) -> f64 {
        self.naive_seconds / self.frontier_seconds.max(f64::MIN_POSITIVE)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let a = &self.agreement;
        let mut out = csv_writer(w);
        out.write_record([
            "D",
            "N",
            "rho",
            "agree",
            "frontier_f_calls",
            "frontier_g_calls",
            "frontier_evaluations",
            "naive_f_calls",
            "naive_g_calls",
            "naive_evaluations",
            "f_call_ratio",
            "frontier_seconds",
            "naive_seconds",
            "wall_ratio",
        ])?;
        out.write_record([
            self.grid_size.to_string(),
            self.samples.to_string(),
            self.rho.to_string(),
            a.agrees().to_string(),
            a.frontier.counters.f_calls.to_string(),
            a.frontier.counters.g_calls.to_string(),
            a.frontier.counters.evaluations.to_string(),
            a.naive.counters.f_calls.to_string(),
            a.naive.counters.g_calls.to_string(),
            a.naive.counters.evaluations.to_string(),
            a.f_call_ratio().to_string(),
            self.frontier_seconds.to_string(),
            self.naive_seconds.to_string(),
            self.wall_ratio().to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

pub fn compare_searches(objective: &DmtObjective<'_>, grid: &Grid, rho: f64) -> Result<Agreement> {
    Ok(run_bench(objective, grid, rho)?.agreement)
}

/// Time frontier search and exhaustive search on the same objective.
pub fn run_bench(objective: &DmtObjective<'_>, grid: &Grid, rho: f64) -> Result<BenchReport> {
    let start = Instant::now();
    let frontier = frontier_search(GridObjective::new(objective, grid), rho)?;
    let frontier_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let naive = naive_search(GridObjective::new(objective, grid), rho)?;
    let naive_seconds = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        grid_size: grid.len(),
        samples: objective.calibration().len(),
        rho,
        agreement: Agreement { naive, frontier },
        frontier_seconds,
        naive_seconds,
    })
}
