use serde::Serialize;

use crate::error::{contract, Result};

/// Three-stage split of a per-layer attention-distance curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    /// First layer of stage 2.
    pub s: usize,
    /// First layer of stage 3.
    pub t: usize,
    /// Layer of the smoothed minimum.
    pub min_layer: usize,
    pub threshold: f64,
    pub smoothed: Vec<f64>,
    /// Mean raw value per stage; `None` for an empty stage.
    pub stage_means: [Option<f64>; 3],
    /// The curve never drops below the threshold; `s = t = min_layer`.
    pub degenerate: bool,
}

/// Heuristic boundaries for a U-shaped distance curve.
///
/// The curve is smoothed with a centred 3-tap moving average (truncated at
/// the ends). With `m` the smoothed argmin and
/// `theta = min + (first - min) / 2`, stage 2 starts at the first layer
/// strictly below `theta`, and stage 3 at the first layer after `m` that
/// climbs back to `theta`, or at the last layer if none does. Comparisons
/// against `theta` allow a relative slack of `1e-9` so values that equal it
/// in exact arithmetic are treated as equal.
pub fn segment_stages(d_avg: &[f64]) -> Result<StageReport> {
    let n = d_avg.len();
    if n < 4 {
        return Err(contract!("stage segmentation needs at least 4 layers, got {n}"));
    }
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            d_avg[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let min_layer = super::argmax(smoothed.iter().map(|v| -v));
    let min = smoothed[min_layer];
    let threshold = min + 0.5 * (smoothed[0] - min);
    let slack = 1e-9 * threshold.abs().max(1.0);

    let s = smoothed.iter().position(|&v| v < threshold - slack);
    let (s, t, degenerate) = match s {
        None => (min_layer, min_layer, true),
        Some(s) => {
            let t = (min_layer + 1..n).find(|&i| smoothed[i] >= threshold - slack).unwrap_or(n - 1);
            (s, t, false)
        }
    };
    let mean = |r: std::ops::Range<usize>| {
        (!r.is_empty()).then(|| d_avg[r.clone()].iter().sum::<f64>() / r.len() as f64)
    };
    Ok(StageReport {
        s,
        t,
        min_layer,
        threshold,
        stage_means: [mean(0..s), mean(s..t), mean(t..n)],
        smoothed,
        degenerate,
    })
}
