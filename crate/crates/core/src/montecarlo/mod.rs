//! Seeded, parallel experiments over ensembles of percolation trees.
//!
//! Trial `t` of every cell uses the tree seed read from a ChaCha8 stream keyed
//! by the master seed with stream id `t`, so cells with different `p` see
//! coupled trees and reports do not depend on the worker count. Trials run on
//! a rayon pool capped by `FRACVIS_THREADS` and are reduced in trial order.

mod kinds;
mod stats;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::exactgeom::{Direction, Point, Side, Viewpoint};
use crate::grid::PercParams;
use crate::scalar::Scalar;
use crate::visibility::SightSpec;

pub use stats::{
    aggregate, extinction_limit, extinction_oracle, extinction_oracle_exact, median, round_report, wilson, Estimate,
    Proportion, Z95,
};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "FRACVIS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Extinction,
    Dimension,
    VisibleDimension,
    Corner,
    Block,
    StripeLength,
    Coverage,
    PassedCounts,
}

fn format_one() -> u32 {
    1
}

fn base_two() -> u32 {
    2
}

fn plus() -> Side {
    Side::Plus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "format_one")]
    pub format: u32,
    pub kind: ExperimentKind,
    pub p: Vec<Scalar>,
    #[serde(rename = "M", default = "base_two")]
    pub m: u32,
    pub depth: u32,
    pub trials: u32,
    pub seed: u64,
    #[serde(default)]
    pub directions: Vec<Direction>,
    /// Adds every reduced direction with components bounded by this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_grid: Option<i64>,
    #[serde(default = "plus")]
    pub side: Side,
    #[serde(default)]
    pub viewpoints: Vec<Viewpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Scalar>,
    /// Block test depth; defaults to `level + 4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_depth: Option<u32>,
    /// Inclusive level range of slope fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Levels for extinction and length experiments, depths for coverage sweeps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<u32>,
    /// Positions `m` of the partial-sum tail check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub azuma_m: Vec<u32>,
    /// Smallest sample count for a history bucket or tail point to be used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_bucket: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<(Point, Point)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_gap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_level: Option<u32>,
    #[serde(default)]
    pub record_runtime: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with only the required fields set.
    pub fn new(kind: ExperimentKind, p: Vec<Scalar>, depth: u32, trials: u32, seed: u64) -> Self {
        ExperimentConfig {
            format: 1,
            kind,
            p,
            m: 2,
            depth,
            trials,
            seed,
            directions: Vec::new(),
            direction_grid: None,
            side: Side::Plus,
            viewpoints: Vec::new(),
            eps: None,
            block_depth: None,
            k_range: None,
            eta: None,
            levels: Vec::new(),
            azuma_m: Vec::new(),
            min_bucket: None,
            lines: Vec::new(),
            growth_gap: None,
            base_level: None,
            record_runtime: false,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != 1 {
            bail!(Config, "unsupported config format {}", self.format);
        }
        if self.trials == 0 {
            bail!(Config, "trials must be at least 1");
        }
        if self.p.is_empty() {
            bail!(Config, "no retention probabilities given");
        }
        for p in &self.p {
            PercParams::new(p.clone(), self.m, self.depth, 0).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some((lo, hi)) = self.k_range {
            if lo > hi || hi > self.depth || hi - lo < 2 {
                bail!(Config, "k range {lo}..={hi} needs 3 levels within depth {}", self.depth);
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 1.0) {
                bail!(Config, "eta {eta} is outside (0, 1)");
            }
        }
        if self.levels.iter().any(|&l| l > self.depth) {
            bail!(Config, "levels {:?} exceed depth {}", self.levels, self.depth);
        }
        if let Some(g) = self.direction_grid {
            if !(1..=64).contains(&g) {
                bail!(Config, "direction grid bound {g} is outside 1..=64");
            }
        }
        kinds::validate(self)
    }

    /// Configured directions followed by the grid, without repeats.
    pub fn all_directions(&self) -> Vec<Direction> {
        let mut out = self.directions.clone();
        if let Some(g) = self.direction_grid {
            for d in direction_grid(g) {
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        out
    }

    pub fn sights(&self) -> Vec<SightSpec> {
        let lines = self.all_directions().into_iter().map(|d| SightSpec::Line { d, side: self.side });
        let points = self.viewpoints.iter().map(|x| SightSpec::Point { x: x.clone() });
        lines.chain(points).collect()
    }

    pub fn k_range_or_default(&self) -> (u32, u32) {
        self.k_range.unwrap_or(((self.depth / 2).max(1), self.depth))
    }

    pub fn min_bucket_or_default(&self) -> u64 {
        self.min_bucket.unwrap_or(50)
    }

    fn params(&self, p: &Scalar, depth: u32, seed: u64) -> Result<PercParams> {
        PercParams::new(p.clone(), self.m, depth, seed)
    }
}

/// One direction per line orientation: reduced `(a, b)` with `|a|, |b| ≤ bound`
/// and `b > 0`, or `b = 0, a = 1`, in lexicographic order.
pub fn direction_grid(bound: i64) -> Vec<Direction> {
    let mut out = Vec::new();
    for a in -bound..=bound {
        for b in 0..=bound {
            if (b == 0 && a != 1) || num_integer::gcd(a, b) != 1 {
                continue;
            }
            out.push(Direction::new(a, b).expect("nonzero"));
        }
    }
    out
}

/// Per-trial tree seeds: the first word of stream `t` of the master ChaCha8 key.
pub fn trial_seeds(master: u64, trials: u32) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..trials)
        .map(|t| {
            rng.set_stream(t as u64);
            rng.set_word_pos(0);
            rng.next_u64()
        })
        .collect()
}

/// Worker count from `FRACVIS_THREADS`; `None` leaves rayon's default.
pub fn configured_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => bail!(Config, "{THREADS_ENV}={v} is not a worker count"),
        },
    }
}

/// Runs `f` over the trials on the configured pool, results in trial order.
pub(crate) fn run_trials<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = configured_threads()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    pool.install(|| seeds.par_iter().enumerate().map(|(i, &s)| f(i, s)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Metric {
    Estimate(Estimate),
    Proportion(Proportion),
    Value { value: f64 },
    Count { value: u64 },
    Series { values: Vec<f64> },
}

impl Metric {
    fn rounded(self) -> Metric {
        let r = round_report;
        match self {
            Metric::Estimate(e) => Metric::Estimate(Estimate { mean: r(e.mean), stderr: r(e.stderr), ..e }),
            Metric::Proportion(p) => Metric::Proportion(Proportion {
                estimate: r(p.estimate),
                wilson_lo: r(p.wilson_lo),
                wilson_hi: r(p.wilson_hi),
                ..p
            }),
            Metric::Value { value } => Metric::Value { value: r(value) },
            Metric::Series { values } => Metric::Series { values: values.into_iter().map(r).collect() },
            c @ Metric::Count { .. } => c,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Metric::Estimate(e) => Some(e.mean),
            Metric::Proportion(p) => Some(p.estimate),
            Metric::Value { value } => Some(*value),
            Metric::Count { value } => Some(*value as f64),
            Metric::Series { .. } => None,
        }
    }
}

/// Estimates for one combination of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub p: Scalar,
    /// Further coordinates of the cell, such as the level or the sight.
    pub key: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, Metric>,
}

impl Cell {
    pub(crate) fn new(p: &Scalar) -> Self {
        Cell { p: p.clone(), key: BTreeMap::new(), metrics: BTreeMap::new() }
    }

    pub(crate) fn with_key(mut self, k: &str, v: impl ToString) -> Self {
        self.key.insert(k.to_string(), v.to_string());
        self
    }

    pub(crate) fn put(&mut self, name: impl Into<String>, m: Metric) {
        self.metrics.insert(name.into(), m.rounded());
    }

    pub(crate) fn value(&mut self, name: &str, v: f64) {
        self.put(name, Metric::Value { value: v });
    }

    pub(crate) fn count(&mut self, name: &str, v: u64) {
        self.put(name, Metric::Count { value: v });
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.get(name)
    }

    pub fn key_is(&self, k: &str, v: &str) -> bool {
        self.key.get(k).is_some_and(|x| x == v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: u32,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
    /// Cells whose estimates rest on too few samples or on parameters outside
    /// their intended range.
    pub flags: Vec<String>,
    /// Invariant checks that failed.
    pub audit_failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Long-format CSV: `cell,p,key,metric,value,stderr,ci_lo,ci_hi,samples`.
    /// Series are written one row per element with the index appended to the
    /// metric name.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,p,key,metric,value,stderr,ci_lo,ci_hi,samples\n");
        for (i, c) in self.cells.iter().enumerate() {
            let key: Vec<String> = c.key.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let key = key.join(";");
            let mut row = |name: &str, v: String, se: String, lo: String, hi: String, n: String| {
                out.push_str(&format!("{i},{},\"{key}\",{name},{v},{se},{lo},{hi},{n}\n", c.p));
            };
            for (name, m) in &c.metrics {
                let e = String::new;
                match m {
                    Metric::Estimate(x) => {
                        row(name, x.mean.to_string(), x.stderr.to_string(), e(), e(), x.samples.to_string())
                    }
                    Metric::Proportion(x) => row(
                        name,
                        x.estimate.to_string(),
                        round_report(x.stderr()).to_string(),
                        x.wilson_lo.to_string(),
                        x.wilson_hi.to_string(),
                        x.trials.to_string(),
                    ),
                    Metric::Value { value } => row(name, value.to_string(), e(), e(), e(), e()),
                    Metric::Count { value } => row(name, value.to_string(), e(), e(), e(), e()),
                    Metric::Series { values } => {
                        for (j, v) in values.iter().enumerate() {
                            row(&format!("{name}[{j}]"), v.to_string(), e(), e(), e(), e());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn cells_for(&self, p: &Scalar) -> impl Iterator<Item = &Cell> {
        let p = p.clone();
        self.cells.iter().filter(move |c| c.p == p)
    }
}

/// Runs the experiment described by `config`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let seeds = trial_seeds(config.seed, config.trials);
    let mut out = kinds::Outcome::default();
    for p in &config.p {
        kinds::run_cell(config, p, &seeds, &mut out)?;
    }
    let runtime_ms = config.record_runtime.then(|| start.elapsed().as_millis() as u64);
    Ok(ExperimentReport {
        format: 1,
        config: config.clone(),
        seeds,
        cells: out.cells,
        flags: out.flags,
        audit_failures: out.audit_failures,
        runtime_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = trial_seeds(7, 50);
        assert_eq!(a, trial_seeds(7, 50));
        assert_eq!(&trial_seeds(7, 10)[..], &a[..10]);
        let mut s = a.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 50);
        assert_ne!(a, trial_seeds(8, 50));
    }

    #[test]
    fn grid_directions() {
        let g = direction_grid(1);
        let pairs: Vec<(i64, i64)> = g.iter().map(|d| (d.a(), d.b())).collect();
        assert_eq!(pairs, vec![(-1, 1), (0, 1), (1, 0), (1, 1)]);
        // one orientation per line: 2·(#coprime pairs in [1,12]²) + both axes
        assert_eq!(direction_grid(12).len(), 2 * 91 + 2);
    }

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"extinction","p":[0.2,"3/10"],"depth":6,"trials":10,"seed":1,"levels":[3,6]}"#,
        )
        .unwrap();
        assert_eq!(cfg.p, vec![Scalar::ratio(1, 5), Scalar::ratio(3, 10)]);
        assert_eq!(cfg.m, 2);
        let bad = [
            r#"{"kind":"extinction","p":[0.2],"depth":6,"trials":0,"seed":1}"#,
            r#"{"kind":"extinction","p":[],"depth":6,"trials":3,"seed":1}"#,
            r#"{"kind":"extinction","p":[1.5],"depth":6,"trials":3,"seed":1}"#,
            r#"{"kind":"nonsense","p":[0.5],"depth":6,"trials":3,"seed":1}"#,
            r#"{"kind":"extinction","p":[0.5],"depth":6,"trials":3,"seed":1,"bogus":1}"#,
            r#"{"kind":"dimension","p":[0.5],"depth":6,"trials":3,"seed":1,"k_range":[5,6]}"#,
            r#"{"kind":"corner","p":[0.5],"depth":6,"trials":3,"seed":1,"directions":[[1,0]]}"#,
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }
}
