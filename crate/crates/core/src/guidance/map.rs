use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Largest number of cells a guidance map may have.
pub const MAX_CELLS: usize = 1 << 16;

/// Non-negative importance scores on a `rows x cols` grid, row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    /// Trace layers the scores were averaged over, if any.
    pub layers: Vec<usize>,
}

impl ContinuousMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != values.len() {
            return Err(contract!("{rows}x{cols} map cannot hold {} values", values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(contract!("map values must be finite"));
        }
        Ok(ContinuousMap { rows, cols, values, layers: Vec::new() })
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// Population mean and standard deviation. Spread below `1e-12 * |mean|`
/// is rounding noise from summing identical values and is reported as zero.
pub(crate) fn population_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let sigma = (values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
    if sigma <= 1e-12 * mu.abs() {
        (mu, 0.0)
    } else {
        (mu, sigma)
    }
}

/// Statistics used to quantise a map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapStats {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
}

/// Per-cell rate levels: `-1` lowers, `0` keeps, `+1` raises the rate
/// (`+-2` as well for five-level maps).
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceMap {
    rows: usize,
    cols: usize,
    levels: Vec<i8>,
    level_count: u8,
    stats: Option<MapStats>,
}

impl GuidanceMap {
    pub fn new(rows: usize, cols: usize, levels: Vec<i8>, level_count: u8) -> Result<Self> {
        let span = match level_count {
            3 => 1,
            5 => 2,
            _ => return Err(contract!("level count must be 3 or 5, got {level_count}")),
        };
        if rows == 0 || cols == 0 || rows * cols != levels.len() {
            return Err(contract!("{rows}x{cols} map cannot hold {} levels", levels.len()));
        }
        if levels.len() > MAX_CELLS {
            return Err(contract!("map has {} cells, more than {MAX_CELLS}", levels.len()));
        }
        if let Some(bad) = levels.iter().find(|l| l.abs() > span) {
            return Err(contract!("level {bad} outside the {level_count}-level set"));
        }
        Ok(GuidanceMap { rows, cols, levels, level_count, stats: None })
    }

    /// All cells at the base level.
    pub fn base(rows: usize, cols: usize) -> Result<Self> {
        GuidanceMap::new(rows, cols, vec![0; rows * cols], 3)
    }

    pub fn with_stats(mut self, stats: MapStats) -> Self {
        self.stats = Some(stats);
        self
    }

    pub fn without_stats(mut self) -> Self {
        self.stats = None;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn levels(&self) -> &[i8] {
        &self.levels
    }

    pub fn level_count(&self) -> u8 {
        self.level_count
    }

    pub fn stats(&self) -> Option<MapStats> {
        self.stats
    }

    pub fn at(&self, r: usize, c: usize) -> i8 {
        self.levels[r * self.cols + c]
    }

    pub fn is_all_base(&self) -> bool {
        self.levels.iter().all(|&l| l == 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MapJson::from(self)).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: MapJson = serde_json::from_str(s).map_err(|e| crate::Error::Format(format!("guidance JSON: {e}")))?;
        let rows = j.levels.len();
        let cols = j.levels.first().map_or(0, Vec::len);
        if j.levels.iter().any(|r| r.len() != cols) || rows != j.rows || cols != j.cols {
            return Err(crate::Error::Format("guidance JSON: grid does not match rows/cols".into()));
        }
        let map = GuidanceMap::new(rows, cols, j.levels.concat(), j.level_count)?;
        Ok(match (j.mu, j.sigma, j.k) {
            (Some(mu), Some(sigma), Some(k)) => map.with_stats(MapStats { mu, sigma, k }),
            _ => map,
        })
    }
}

/// JSON debugging dump of a map.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapJson {
    rows: usize,
    cols: usize,
    level_count: u8,
    levels: Vec<Vec<i8>>,
    #[serde(default)]
    mu: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    k: Option<f64>,
}

impl From<&GuidanceMap> for MapJson {
    fn from(m: &GuidanceMap) -> Self {
        MapJson {
            rows: m.rows,
            cols: m.cols,
            level_count: m.level_count,
            levels: m.levels.chunks(m.cols).map(<[i8]>::to_vec).collect(),
            mu: m.stats.map(|s| s.mu),
            sigma: m.stats.map(|s| s.sigma),
            k: m.stats.map(|s| s.k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_set_is_enforced() {
        assert!(GuidanceMap::new(1, 2, vec![2, 0], 3).is_err());
        assert!(GuidanceMap::new(1, 2, vec![2, -2], 5).is_ok());
        assert!(GuidanceMap::new(1, 2, vec![0, 0], 4).is_err());
        assert!(GuidanceMap::new(257, 256, vec![0; 257 * 256], 3).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = GuidanceMap::new(2, 3, vec![-1, 0, 1, 1, 0, -1], 3)
            .unwrap()
            .with_stats(MapStats { mu: 0.5, sigma: 0.25, k: 0.75 });
        let j = m.to_json();
        assert!(j.contains("\"mu\": 0.5"));
        assert_eq!(GuidanceMap::from_json(&j).unwrap(), m);
        assert!(GuidanceMap::from_json(r#"{"rows":1,"cols":1,"level_count":3,"levels":[[0]],"extra":1}"#).is_err());
    }

    #[test]
    fn json_stats_survive_exactly() {
        let m = GuidanceMap::base(1, 1)
            .unwrap()
            .with_stats(MapStats { mu: 1.0585343828364067, sigma: 0.004055563558827995, k: 0.75 });
        let back = GuidanceMap::from_json(&m.to_json()).unwrap();
        assert_eq!(back.stats().unwrap().mu.to_bits(), 1.0585343828364067f64.to_bits());
    }
}
