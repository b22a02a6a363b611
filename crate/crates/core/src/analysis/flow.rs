use serde::Serialize;

use super::argmax;
use crate::error::{contract, Result};
use crate::tensor::Tensor;

/// Dominant information pathway of every token in one layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowMap {
    pub layer: usize,
    /// `inflow[k]`: the key token that query `k` attends to most (row argmax).
    pub inflow: Vec<usize>,
    /// `outflow[k]`: the query token that attends most to key `k` (column argmax).
    pub outflow: Vec<usize>,
}

/// Row and column argmax of a square attention matrix, CLS included.
pub fn inflow_outflow(attention: &Tensor, layer: usize) -> Result<FlowMap> {
    let (n, m) = attention.dims2()?;
    if n != m {
        return Err(contract!("attention must be square, got {n}x{m}"));
    }
    let inflow = (0..n).map(|k| argmax(attention.row(k).iter().copied())).collect();
    let outflow = (0..n).map(|k| argmax((0..n).map(|i| attention.at(i, k)))).collect();
    Ok(FlowMap { layer, inflow, outflow })
}
