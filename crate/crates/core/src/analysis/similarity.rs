use serde::Serialize;

use crate::error::{contract, Result};
use crate::vit::ViTTrace;

/// Mean token-wise cosine similarity between two traces, per layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityProfile {
    pub per_layer: Vec<f64>,
}

impl SimilarityProfile {
    /// `layer,cosine_sim` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,cosine_sim\n");
        for (i, v) in self.per_layer.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        s
    }

    /// Layer with the lowest similarity (lowest index on ties).
    pub fn min_layer(&self) -> usize {
        super::argmax(self.per_layer.iter().map(|v| -v))
    }
}

/// Two zero vectors count as identical; one zero vector against a non-zero
/// one counts as orthogonal.
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (na * nb)).clamp(-1.0, 1.0),
    }
}

pub fn layer_similarity(a: &ViTTrace, b: &ViTTrace) -> Result<SimilarityProfile> {
    if a.layers.len() != b.layers.len() || a.num_tokens() != b.num_tokens() {
        return Err(contract!(
            "traces differ: {} vs {} layers, {} vs {} tokens",
            a.layers.len(),
            b.layers.len(),
            a.num_tokens(),
            b.num_tokens()
        ));
    }
    let mut per_layer = Vec::with_capacity(a.layers.len());
    for (i, (la, lb)) in a.layers.iter().zip(&b.layers).enumerate() {
        let (Some(ta), Some(tb)) = (&la.tokens, &lb.tokens) else {
            return Err(contract!("layer {i}: tokens were not captured"));
        };
        if ta.shape() != tb.shape() {
            return Err(contract!("layer {i}: token shapes {:?} vs {:?}", ta.shape(), tb.shape()));
        }
        let n = ta.shape()[0];
        let total: f64 = (0..n).map(|t| cosine(ta.row(t), tb.row(t))).sum();
        per_layer.push(total / n as f64);
    }
    Ok(SimilarityProfile { per_layer })
}
