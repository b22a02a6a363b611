//! Attention diagnostics over [`ViTTrace`](crate::vit::ViTTrace)s.

mod distance;
mod flow;
mod pca;
mod similarity;
mod stages;

pub use distance::{attention_distances, layer_distances, patch_submatrix, DistanceReport, PatchGrid};
pub use flow::{inflow_outflow, FlowMap};
pub use pca::{pca_project, Pca};
pub use similarity::{layer_similarity, SimilarityProfile};
pub use stages::{segment_stages, StageReport};

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
