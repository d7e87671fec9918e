//! Deterministic synthetic MoE stack.
//!
//! Each layer is a causal mean-pool mixing block (a linear stand-in for
//! attention) followed by a routed MoE feed-forward block, both residual.
//! Sub-block inputs are RMS-normalised. The final position is projected to
//! vocabulary logits by a linear head.

use super::policy::SkipPolicy;
use super::routing::{route_probs, select_topk_into, RoutingDecision};
use super::spec::ModelSpec;
use super::stats::SkipStats;
use super::token::{Modality, TokenSequence};
use crate::error::{Error, Result};
use crate::linalg::{rms_norm_into, softmax_into, Matrix};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpertWeights {
    /// `ffn_dim × hidden_dim`
    pub up: Matrix,
    /// `hidden_dim × ffn_dim`
    pub down: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `hidden_dim × hidden_dim`
    pub mix: Matrix,
    /// `experts × hidden_dim`
    pub router: Matrix,
    pub experts: Vec<ExpertWeights>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMoeModel {
    spec: ModelSpec,
    /// `vocab × hidden_dim`
    pub(crate) embedding: Matrix,
    pub(crate) layers: Vec<LayerWeights>,
    /// `vocab × hidden_dim`
    pub(crate) head: Matrix,
}

/// Final-position next-token distribution plus skip accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub distribution: Vec<f64>,
    pub stats: SkipStats,
}

/// Hidden states entering and leaving each MoE block, `[layer][position]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardTrace {
    pub moe_inputs: Vec<Vec<Vec<f64>>>,
    pub moe_outputs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoeLayerOutput {
    pub output: Vec<f64>,
    pub routing: RoutingDecision,
    pub experts_evaluated: usize,
}

pub fn build_synthetic_model(spec: &ModelSpec) -> Result<SyntheticMoeModel> {
    SyntheticMoeModel::build(spec)
}

impl SyntheticMoeModel {
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.hidden_dim;
        let bound = 1.0 / (d as f64).sqrt();

        let mut rng = substream(spec.seed, "embedding");
        let embedding = Matrix::uniform(spec.vocab_size, d, bound, &mut rng);

        let mut mix_rng = substream(spec.seed, "mixing");
        let mut router_rng = substream(spec.seed, "router");
        let mut expert_rng = substream(spec.seed, "experts");
        let layers = (0..spec.num_layers)
            .map(|_| LayerWeights {
                mix: Matrix::uniform(d, d, bound, &mut mix_rng),
                router: Matrix::uniform(spec.experts_per_layer, d, bound, &mut router_rng),
                experts: (0..spec.experts_per_layer)
                    .map(|_| ExpertWeights {
                        up: Matrix::uniform(spec.ffn_dim, d, bound, &mut expert_rng),
                        down: Matrix::uniform(d, spec.ffn_dim, bound, &mut expert_rng),
                    })
                    .collect(),
            })
            .collect();

        let mut rng = substream(spec.seed, "head");
        let head = Matrix::uniform(spec.vocab_size, d, bound, &mut rng);

        Ok(Self { spec: *spec, embedding, layers, head })
    }

    pub(crate) fn from_parts(spec: ModelSpec, embedding: Matrix, layers: Vec<LayerWeights>, head: Matrix) -> Self {
        Self { spec, embedding, layers, head }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.spec.num_layers
    }

    pub fn layer(&self, l: usize) -> &LayerWeights {
        &self.layers[l]
    }

    /// Mutable access for building special-purpose models (e.g. a dead layer).
    pub fn layer_mut(&mut self, l: usize) -> &mut LayerWeights {
        &mut self.layers[l]
    }

    fn temperature(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Text => self.spec.router.text_temperature,
            Modality::Vision => self.spec.router.vision_temperature,
        }
    }

    /// Router logits for an already normalised hidden state.
    fn router_logits_into(&self, layer: usize, modality: Modality, normed: &[f64], out: &mut [f64]) {
        self.layers[layer].router.matvec_into(normed, out);
        let scale = self.spec.router.gain / self.temperature(modality);
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    /// `acc += weight · Expert(normed)`
    fn expert_accumulate(
        &self,
        layer: usize,
        expert: usize,
        normed: &[f64],
        weight: f64,
        hidden: &mut [f64],
        acc: &mut [f64],
    ) {
        let e = &self.layers[layer].experts[expert];
        e.up.matvec_into(normed, hidden);
        for h in hidden.iter_mut() {
            *h = h.max(0.0);
        }
        e.down.matvec_add_scaled(hidden, weight, acc);
    }

    /// Route `x` at `layer` and apply the MoE block, leaving out the experts
    /// listed in `skip_experts` (which must all be among the selected top-k).
    pub fn moe_layer_forward(
        &self,
        x: &[f64],
        layer: usize,
        modality: Modality,
        skip_experts: &[usize],
    ) -> Result<MoeLayerOutput> {
        let d = self.spec.hidden_dim;
        if layer >= self.spec.num_layers {
            return Err(Error::InvalidArgument(format!("layer {layer} out of range")));
        }
        if x.len() != d {
            return Err(Error::InvalidInput(format!("hidden state has {} entries, expected {d}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("hidden state is not finite".into()));
        }
        let mut normed = vec![0.0; d];
        rms_norm_into(x, &mut normed);
        let mut logits = vec![0.0; self.spec.experts_per_layer];
        self.router_logits_into(layer, modality, &normed, &mut logits);
        let probs = route_probs(&logits)?;
        let mut selected = Vec::with_capacity(self.spec.top_k);
        select_topk_into(&probs, self.spec.top_k, &mut selected);
        if let Some(bad) = skip_experts.iter().find(|m| !selected.contains(m)) {
            return Err(Error::ContractViolation(format!("expert {bad} is not among the routed experts {selected:?}")));
        }

        let mut hidden = vec![0.0; self.spec.ffn_dim];
        let mut acc = vec![0.0; d];
        let mut evaluated = 0;
        for &m in &selected {
            if !skip_experts.contains(&m) {
                self.expert_accumulate(layer, m, &normed, probs[m], &mut hidden, &mut acc);
                evaluated += 1;
            }
        }
        let mut output = x.to_vec();
        if evaluated > 0 {
            for (o, a) in output.iter_mut().zip(&acc) {
                *o += a;
            }
        }
        Ok(MoeLayerOutput {
            output,
            routing: RoutingDecision { logits, probs, selected },
            experts_evaluated: evaluated,
        })
    }

    /// Full forward pass; returns the last-position distribution.
    pub fn forward(&self, seq: &TokenSequence, policy: &SkipPolicy<'_>) -> Result<ForwardOutput> {
        self.run(seq, policy, None)
    }

    pub fn forward_traced(
        &self,
        seq: &TokenSequence,
        policy: &SkipPolicy<'_>,
    ) -> Result<(ForwardOutput, ForwardTrace)> {
        let mut trace = ForwardTrace::default();
        let out = self.run(seq, policy, Some(&mut trace))?;
        Ok((out, trace))
    }

    fn run(
        &self,
        seq: &TokenSequence,
        policy: &SkipPolicy<'_>,
        mut trace: Option<&mut ForwardTrace>,
    ) -> Result<ForwardOutput> {
        let spec = &self.spec;
        let (d, k) = (spec.hidden_dim, spec.top_k);
        let n = seq.len();
        if n == 0 {
            return Err(Error::InvalidInput("token sequence is empty".into()));
        }
        policy.validate(spec.num_layers, k, n)?;
        let tokens = seq.tokens();
        if let Some(t) = tokens.iter().find(|t| t.embed_index as usize >= spec.vocab_size) {
            return Err(Error::InvalidInput(format!(
                "embed index {} outside vocabulary of {}",
                t.embed_index, spec.vocab_size
            )));
        }

        let mut h = Vec::with_capacity(n * d);
        for t in tokens {
            h.extend_from_slice(self.embedding.row(t.embed_index as usize));
        }
        let mut normed = vec![0.0; n * d];
        let mut mean = vec![0.0; d];
        let mut logits = vec![0.0; spec.experts_per_layer];
        let mut probs = vec![0.0; spec.experts_per_layer];
        let mut selected = Vec::with_capacity(k);
        let mut skip = vec![false; k];
        let mut hidden = vec![0.0; spec.ffn_dim];
        let mut acc = vec![0.0; d];
        let mut stats = SkipStats::new(spec.num_layers);
        stats.tokens = n as u64;
        stats.sequences = 1;

        for (l, weights) in self.layers.iter().enumerate() {
            // Causal mean-pool mixing.
            for (x, y) in h.chunks_exact(d).zip(normed.chunks_exact_mut(d)) {
                rms_norm_into(x, y);
            }
            mean.fill(0.0);
            for (i, (x, y)) in h.chunks_exact_mut(d).zip(normed.chunks_exact(d)).enumerate() {
                for (m, v) in mean.iter_mut().zip(y) {
                    *m += v;
                }
                weights.mix.matvec_add_scaled(&mean, 1.0 / (i + 1) as f64, x);
            }

            if let Some(tr) = trace.as_deref_mut() {
                tr.moe_inputs.push(h.chunks_exact(d).map(<[f64]>::to_vec).collect());
            }

            // Routed experts.
            let counts = &mut stats.layers[l];
            for (pos, (x, y)) in h.chunks_exact_mut(d).zip(normed.chunks_exact_mut(d)).enumerate() {
                let modality = tokens[pos].modality;
                rms_norm_into(x, y);
                self.router_logits_into(l, modality, y, &mut logits);
                softmax_into(&logits, &mut probs);
                select_topk_into(&probs, k, &mut selected);
                policy.decide(l, pos, modality, &probs, &selected, &mut skip);

                acc.fill(0.0);
                let mut evaluated = 0u64;
                for (&m, &s) in selected.iter().zip(&skip) {
                    if !s {
                        self.expert_accumulate(l, m, y, probs[m], &mut hidden, &mut acc);
                        evaluated += 1;
                    }
                }
                if evaluated > 0 {
                    for (o, a) in x.iter_mut().zip(&acc) {
                        *o += a;
                    }
                }
                let mi = modality.index();
                counts.routed[mi] += k as u64;
                counts.skipped[mi] += k as u64 - evaluated;
                stats.expert_evals += evaluated;
            }

            if let Some(tr) = trace.as_deref_mut() {
                tr.moe_outputs.push(h.chunks_exact(d).map(<[f64]>::to_vec).collect());
            }
        }

        let last = &h[(n - 1) * d..];
        if last.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("hidden state became non-finite".into()));
        }
        let mut y = vec![0.0; d];
        rms_norm_into(last, &mut y);
        let mut head_logits = vec![0.0; spec.vocab_size];
        self.head.matvec_into(&y, &mut head_logits);
        let mut distribution = vec![0.0; spec.vocab_size];
        softmax_into(&head_logits, &mut distribution);
        Ok(ForwardOutput { distribution, stats })
    }
}
