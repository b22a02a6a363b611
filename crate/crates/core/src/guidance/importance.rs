use super::ContinuousMap;
use crate::error::{contract, Result};
use crate::vit::ViTTrace;

/// Layers averaged by default: the first three.
pub const DEFAULT_LAYERS: [usize; 3] = [0, 1, 2];

/// Area-weighted resampling of a `in_rows x in_cols` grid. Each output cell
/// is the overlap-weighted mean of the input cells it covers.
pub fn area_pool(values: &[f64], in_rows: usize, in_cols: usize, out_rows: usize, out_cols: usize) -> Result<Vec<f64>> {
    if values.len() != in_rows * in_cols || in_rows == 0 || in_cols == 0 || out_rows == 0 || out_cols == 0 {
        return Err(contract!("cannot pool {in_rows}x{in_cols} ({} values) to {out_rows}x{out_cols}", values.len()));
    }
    let spans = |n_in: usize, n_out: usize| -> Vec<Vec<(usize, f64)>> {
        (0..n_out)
            .map(|o| {
                let lo = o as f64 * n_in as f64 / n_out as f64;
                let hi = (o + 1) as f64 * n_in as f64 / n_out as f64;
                (lo.floor() as usize..(hi.ceil() as usize).min(n_in))
                    .filter_map(|i| {
                        let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                        (w > 0.0).then_some((i, w))
                    })
                    .collect()
            })
            .collect()
    };
    let ys = spans(in_rows, out_rows);
    let xs = spans(in_cols, out_cols);
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for yspan in &ys {
        for xspan in &xs {
            let (mut acc, mut area) = (0.0, 0.0);
            for &(iy, wy) in yspan {
                for &(ix, wx) in xspan {
                    acc += wy * wx * values[iy * in_cols + ix];
                    area += wy * wx;
                }
            }
            out.push(acc / area);
        }
    }
    Ok(out)
}

/// Mean CLS-to-patch attention over `layers`, pooled to `out_rows x out_cols`.
///
/// Layers are summed in ascending index order, so the result does not
/// depend on the order they are listed in.
pub fn importance_map(trace: &ViTTrace, layers: &[usize], out_rows: usize, out_cols: usize) -> Result<ContinuousMap> {
    if !trace.has_cls {
        return Err(contract!("importance map needs a model with a CLS token"));
    }
    if layers.is_empty() {
        return Err(contract!("at least one guidance layer is required"));
    }
    let mut sorted = layers.to_vec();
    sorted.sort_unstable();
    let depth = trace.layers.len();
    let patches = trace.grid * trace.grid;
    let mut acc = vec![0.0; patches];
    for &l in &sorted {
        if l >= depth {
            return Err(contract!("guidance layer {l} but the model has {depth} layers"));
        }
        let row = trace.layers[l]
            .cls_row
            .as_ref()
            .ok_or_else(|| contract!("layer {l}: CLS attention rows were not captured"))?;
        if row.len() != patches + 1 {
            return Err(contract!("layer {l}: CLS row has {} entries, expected {}", row.len(), patches + 1));
        }
        for (a, v) in acc.iter_mut().zip(&row[1..]) {
            *a += v;
        }
    }
    let inv = 1.0 / sorted.len() as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    let pooled = area_pool(&acc, trace.grid, trace.grid, out_rows, out_cols)?;
    let mut map = ContinuousMap::new(out_rows, out_cols, pooled)?;
    map.layers = sorted;
    Ok(map)
}
