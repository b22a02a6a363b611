use super::ContinuousMap;
use crate::error::{contract, Result};

/// Zero-mean, unit-variance copy; a flat map becomes all zeros.
fn zscore(values: &[f64]) -> Vec<f64> {
    let (mu, sigma) = super::map::population_stats(values);
    if sigma == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mu) / sigma).collect()
}

/// Adds a whole-image map to per-tile maps.
///
/// `locals` are row-major over a `tile_rows x tile_cols` layout and must all
/// share one shape. Each map is z-scored on its own, the global map is
/// nearest-neighbour upsampled to the tiled resolution, and the two are
/// summed cell by cell.
pub fn hierarchical_fuse(
    global: &ContinuousMap,
    locals: &[ContinuousMap],
    tile_rows: usize,
    tile_cols: usize,
) -> Result<ContinuousMap> {
    if tile_rows == 0 || tile_cols == 0 || locals.len() != tile_rows * tile_cols {
        return Err(contract!("{} local maps for a {tile_rows}x{tile_cols} tile layout", locals.len()));
    }
    let (lr, lc) = (locals[0].rows, locals[0].cols);
    if let Some((i, m)) = locals.iter().enumerate().find(|(_, m)| m.rows != lr || m.cols != lc) {
        return Err(contract!("tile {i} is {}x{}, expected {lr}x{lc}", m.rows, m.cols));
    }
    let (rows, cols) = (tile_rows * lr, tile_cols * lc);
    let g = zscore(&global.values);
    let z_locals: Vec<Vec<f64>> = locals.iter().map(|m| zscore(&m.values)).collect();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let gr = r * global.rows / rows;
        for c in 0..cols {
            let gc = c * global.cols / cols;
            let tile = (r / lr) * tile_cols + c / lc;
            let local = z_locals[tile][(r % lr) * lc + c % lc];
            out.push(g[gr * global.cols + gc] + local);
        }
    }
    ContinuousMap::new(rows, cols, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::quantize_map;

    fn map(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> ContinuousMap {
        let v = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        ContinuousMap::new(rows, cols, v).unwrap()
    }

    #[test]
    fn constant_inputs_fuse_to_base() {
        let g = map(2, 2, |_, _| 0.4);
        let locals = vec![map(3, 3, |_, _| 0.1); 4];
        let f = hierarchical_fuse(&g, &locals, 2, 2).unwrap();
        assert_eq!((f.rows, f.cols), (6, 6));
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert!(quantize_map(&f, 0.75, 3).unwrap().is_all_base());
    }

    #[test]
    fn zero_global_gives_zscored_local() {
        let g = map(2, 2, |_, _| 0.0);
        let mut locals = vec![map(2, 2, |_, _| 1.0); 4];
        locals[3] = map(2, 2, |r, c| (r * 2 + c) as f64);
        let f = hierarchical_fuse(&g, &locals, 2, 2).unwrap();
        let z = zscore(&locals[3].values);
        assert_eq!([f.at(2, 2), f.at(2, 3), f.at(3, 2), f.at(3, 3)], [z[0], z[1], z[2], z[3]]);
        assert_eq!(f.at(0, 0), 0.0);
    }

    #[test]
    fn tile_shape_mismatch() {
        let g = map(2, 2, |_, _| 0.0);
        let mut locals = vec![map(2, 2, |_, _| 1.0); 4];
        locals[1] = map(3, 2, |_, _| 1.0);
        assert!(hierarchical_fuse(&g, &locals, 2, 2).is_err());
        assert!(hierarchical_fuse(&g, &locals[..3], 2, 2).is_err());
    }

    #[test]
    fn nearest_upsampling_of_global() {
        let g = map(2, 2, |r, c| (r * 2 + c) as f64);
        let locals = vec![map(2, 2, |_, _| 0.0); 4];
        let f = hierarchical_fuse(&g, &locals, 2, 2).unwrap();
        let z = zscore(&g.values);
        assert_eq!(f.at(0, 1), z[0]);
        assert_eq!(f.at(1, 3), z[1]);
        assert_eq!(f.at(3, 0), z[2]);
    }
}
