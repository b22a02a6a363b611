use super::{ContinuousMap, GuidanceMap, MapStats};
use crate::error::{contract, Result};

pub const DEFAULT_K: f64 = 0.75;

/// Thresholds a map at `mu +- k*sigma` (population statistics).
///
/// Three levels: above `mu + k*sigma` is `+1`, below `mu - k*sigma` is `-1`.
/// Five levels add `+-2` beyond `mu +- 2k*sigma`. A map with zero spread is
/// all base level.
///
/// A map whose spread is pure rounding noise counts as flat.
pub fn quantize_map(map: &ContinuousMap, k: f64, level_count: u8) -> Result<GuidanceMap> {
    if map.values.is_empty() {
        return Err(contract!("cannot quantise an empty map"));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(contract!("k must be positive, got {k}"));
    }
    if level_count != 3 && level_count != 5 {
        return Err(contract!("level count must be 3 or 5, got {level_count}"));
    }
    let (mu, sigma) = super::map::population_stats(&map.values);
    let levels = map
        .values
        .iter()
        .map(|&v| {
            if sigma == 0.0 {
                0
            } else if level_count == 5 && v > mu + 2.0 * k * sigma {
                2
            } else if level_count == 5 && v < mu - 2.0 * k * sigma {
                -2
            } else if v > mu + k * sigma {
                1
            } else if v < mu - k * sigma {
                -1
            } else {
                0
            }
        })
        .collect();
    Ok(GuidanceMap::new(map.rows, map.cols, levels, level_count)?.with_stats(MapStats { mu, sigma, k }))
}
