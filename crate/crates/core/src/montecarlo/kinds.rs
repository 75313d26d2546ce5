use std::collections::BTreeMap;

use super::stats::{aggregate, extinction_oracle, median, Proportion};
use super::{run_trials, Cell, ExperimentConfig, ExperimentKind, Metric};
use crate::analysis::{
    count_passed, default_stripe_eps, dim_slope, is_corner, projection_coverage, radial_coverage, stripe_decomposition,
    theoretical_dim, BlockCache, ScalingTable, SlopeSign, StripeLayout,
};
use crate::error::{bail, Error, Result};
use crate::exactgeom::Direction;
use crate::grid::{generate, grid_side, survives_to, PercolationTree};
use crate::scalar::Scalar;
use crate::visibility::{visible_cover, visible_from_line, SightSpec};

/// Fewer surviving samples than this are flagged.
const MIN_SURVIVORS: usize = 30;

/// Failing audits are those beyond this many standard errors.
const AUDIT_SE: f64 = 4.0;

#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub cells: Vec<Cell>,
    pub flags: Vec<String>,
    pub audit_failures: Vec<String>,
}

impl Outcome {
    fn flag(&mut self, p: &Scalar, what: impl std::fmt::Display) {
        self.flags.push(format!("p={p}: {what}"));
    }

    fn audit(&mut self, p: &Scalar, what: impl std::fmt::Display) {
        self.audit_failures.push(format!("p={p}: {what}"));
    }

    /// Records the discard rate and flags small samples; false when nothing survived.
    fn survivors(&mut self, cell: &mut Cell, survived: usize, trials: usize) -> Result<bool> {
        cell.put("discard_rate", Metric::Proportion(Proportion::new((trials - survived) as u64, trials as u64)?));
        cell.count("survivors", survived as u64);
        if survived < MIN_SURVIVORS {
            let key: Vec<String> = cell.key.iter().map(|(k, v)| format!("{k}={v}")).collect();
            self.flag(&cell.p, format!("[{}] only {survived} of {trials} trees survive", key.join(" ")));
        }
        Ok(survived > 0)
    }
}

pub(crate) fn validate(cfg: &ExperimentConfig) -> Result<()> {
    use ExperimentKind::*;
    let stripes = matches!(cfg.kind, Corner | Block | StripeLength);
    if stripes {
        let dirs = cfg.all_directions();
        if dirs.is_empty() || !cfg.viewpoints.is_empty() {
            bail!(Config, "stripe experiments need directions and no viewpoints");
        }
        if let Some(d) = dirs.iter().find(|d| d.is_axis_aligned()) {
            bail!(Config, "stripe experiments exclude axis directions, got {d}");
        }
        for &n in &stripe_levels(cfg) {
            if n < 2 {
                bail!(Config, "stripe level {n} is below 2");
            }
            if let Some(bd) = cfg.block_depth {
                if bd < n {
                    bail!(Config, "block depth {bd} is above stripe level {n}");
                }
            }
            for d in &dirs {
                layout(cfg, d, n).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
    }
    if cfg.eta.is_some() && cfg.kind != Corner {
        bail!(Config, "eta only applies to corner experiments");
    }
    match cfg.kind {
        Extinction | Corner | Block | StripeLength => {}
        Dimension | VisibleDimension => {
            let (lo, hi) = cfg.k_range_or_default();
            if hi < lo + 2 || hi > cfg.depth {
                bail!(Config, "slope fits need 3 levels within depth {}", cfg.depth);
            }
            if cfg.kind == VisibleDimension && cfg.sights().is_empty() {
                bail!(Config, "no directions or viewpoints to look from");
            }
        }
        Coverage => {
            if cfg.sights().is_empty() {
                bail!(Config, "no directions or viewpoints to look from");
            }
            let eps = coverage_eps(cfg);
            if eps.signum() <= 0 || eps >= Scalar::ratio(1, 2) {
                bail!(Config, "carving size {eps} is outside (0, 1/2)");
            }
        }
        PassedCounts => {
            if cfg.lines.is_empty() {
                bail!(Config, "no lines to count along");
            }
            if cfg.lines.iter().any(|(a, b)| a == b) {
                bail!(Config, "a line needs two distinct points");
            }
            let g = cfg.growth_gap.unwrap_or(1);
            if g == 0 || g > cfg.depth {
                bail!(Config, "growth gap {g} is outside 1..={}", cfg.depth);
            }
            if cfg.base_level.is_some_and(|k| k + g > cfg.depth) {
                bail!(Config, "base level plus gap exceeds depth {}", cfg.depth);
            }
        }
    }
    Ok(())
}

pub(crate) fn run_cell(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Extinction => extinction(cfg, p, seeds, out),
        ExperimentKind::Dimension => dimension(cfg, p, seeds, out),
        ExperimentKind::VisibleDimension => visible_dimension(cfg, p, seeds, out),
        ExperimentKind::Corner => corner(cfg, p, seeds, out),
        ExperimentKind::Block => block(cfg, p, seeds, out),
        ExperimentKind::StripeLength => stripe_length(cfg, p, seeds, out),
        ExperimentKind::Coverage => coverage(cfg, p, seeds, out),
        ExperimentKind::PassedCounts => passed_counts(cfg, p, seeds, out),
    }
}

fn levels_or_depth(cfg: &ExperimentConfig) -> Vec<u32> {
    let mut v = if cfg.levels.is_empty() { vec![cfg.depth] } else { cfg.levels.clone() };
    v.sort_unstable();
    v.dedup();
    v
}

fn stripe_levels(cfg: &ExperimentConfig) -> Vec<u32> {
    levels_or_depth(cfg)
}

fn block_depth(cfg: &ExperimentConfig, n: u32) -> u32 {
    cfg.block_depth.unwrap_or(n + 4)
}

fn coverage_eps(cfg: &ExperimentConfig) -> Scalar {
    cfg.eps.clone().unwrap_or_else(|| Scalar::ratio(1, 8))
}

fn layout(cfg: &ExperimentConfig, d: &Direction, n: u32) -> Result<StripeLayout> {
    let eps = match &cfg.eps {
        Some(e) => e.clone(),
        None => default_stripe_eps(d)?,
    };
    stripe_decomposition(d, cfg.side, n, cfg.m, &eps)
}

/// The tree of one trial, or `None` when it is extinct at `depth`.
fn surviving_tree(cfg: &ExperimentConfig, p: &Scalar, depth: u32, seed: u64) -> Result<Option<PercolationTree>> {
    let params = cfg.params(p, depth, seed)?;
    if !survives_to(&params, depth)? {
        return Ok(None);
    }
    Ok(Some(generate(&params)?))
}

fn estimate(values: &[f64]) -> Result<Metric> {
    Ok(Metric::Estimate(aggregate(values)?))
}

fn extinction(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let levels = levels_or_depth(cfg);
    let extinct = run_trials(seeds, |_, seed| {
        let params = cfg.params(p, cfg.depth, seed)?;
        levels.iter().map(|&n| Ok(!survives_to(&params, n)?)).collect::<Result<Vec<bool>>>()
    })?;
    let t = seeds.len() as u64;
    for (i, &n) in levels.iter().enumerate() {
        let hits = extinct.iter().filter(|e| e[i]).count() as u64;
        let prop = Proportion::new(hits, t)?;
        let q = extinction_oracle(p, cfg.m, n);
        let se = (q * (1.0 - q) / t as f64).sqrt();
        let diff = prop.estimate - q;
        let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        let mut cell = Cell::new(p).with_key("level", n);
        cell.put("extinct", Metric::Proportion(prop));
        cell.value("oracle", q);
        cell.value("oracle_se", se);
        cell.value("z", if z.is_finite() { z } else { f64::MAX });
        if z.abs() > AUDIT_SE {
            out.audit(p, format!("level {n}: extinction frequency {} is {z:.2} standard errors from {q}", prop.estimate));
        }
        out.cells.push(cell);
    }
    Ok(())
}

fn dimension(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let (lo, hi) = cfg.k_range_or_default();
    let fits = run_trials(seeds, |_, seed| {
        let Some(tree) = surviving_tree(cfg, p, cfg.depth, seed)? else { return Ok(None) };
        Ok(Some(dim_slope(&ScalingTable::of_tree(&tree, cfg.depth)?, lo..=hi)?))
    })?;
    let fits: Vec<_> = fits.into_iter().flatten().collect();
    let mut cell = Cell::new(p).with_key("k_range", format!("{lo}..={hi}"));
    cell.value("theory", theoretical_dim(p, cfg.m));
    if out.survivors(&mut cell, fits.len(), seeds.len())? {
        let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
        cell.put("slope", estimate(&slopes)?);
        cell.value("slope_median", median(&slopes)?);
        cell.value("max_residual", fits.iter().map(|f| f.max_residual).fold(0.0, f64::max));
    }
    out.cells.push(cell);
    Ok(())
}

/// The first `k ≥ 1` with `N_k ≤ a_k·M^k`, where `a_k = k²` from lines and `k³` from points.
fn first_bounded_level(counts: &[u64], sight: &SightSpec, m: u32) -> Option<u32> {
    let power = if matches!(sight, SightSpec::Line { .. }) { 2 } else { 3 };
    (1..counts.len() as u32).find(|&k| {
        let bound = (k as f64).powi(power) * (m as f64).powi(k as i32);
        counts[k as usize] as f64 <= bound
    })
}

struct VisibleTrial {
    e_slope: f64,
    /// Per sight: slope, `N_k/M^k` for `k = 0..=n`, first bounded level.
    sights: Vec<(f64, Vec<f64>, Option<u32>)>,
}

fn visible_dimension(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let (lo, hi) = cfg.k_range_or_default();
    let sights = cfg.sights();
    let n = cfg.depth;
    let trials = run_trials(seeds, |_, seed| {
        let Some(tree) = surviving_tree(cfg, p, n, seed)? else { return Ok(None) };
        let e_slope = dim_slope(&ScalingTable::of_tree(&tree, n)?, lo..=hi)?.slope;
        let mut per = Vec::with_capacity(sights.len());
        for sight in &sights {
            let cover = visible_cover(&tree, n, sight)?;
            let slope = dim_slope(&ScalingTable::of_cover(&cover), lo..=hi)?.slope;
            let scaled =
                cover.counts.iter().enumerate().map(|(k, &c)| c as f64 / (cfg.m as f64).powi(k as i32)).collect();
            per.push((slope, scaled, first_bounded_level(&cover.counts, sight, cfg.m)));
        }
        Ok(Some(VisibleTrial { e_slope, sights: per }))
    })?;
    let trials: Vec<VisibleTrial> = trials.into_iter().flatten().collect();
    let survived = trials.len();
    for (i, sight) in sights.iter().enumerate() {
        let mut cell = Cell::new(p).with_key("sight", sight);
        if !out.survivors(&mut cell, survived, seeds.len())? {
            out.cells.push(cell);
            continue;
        }
        let slopes: Vec<f64> = trials.iter().map(|t| t.sights[i].0).collect();
        cell.put("v_slope", estimate(&slopes)?);
        let mean_scaled = (0..=n as usize)
            .map(|k| trials.iter().map(|t| t.sights[i].1[k]).sum::<f64>() / survived as f64)
            .collect();
        cell.put("scaled_counts", Metric::Series { values: mean_scaled });
        let firsts: Vec<f64> = trials.iter().filter_map(|t| t.sights[i].2.map(f64::from)).collect();
        cell.put("bounded", Metric::Proportion(Proportion::new(firsts.len() as u64, survived as u64)?));
        if !firsts.is_empty() {
            cell.put("first_bounded_k", estimate(&firsts)?);
        }
        out.cells.push(cell);
    }
    let mut cell = Cell::new(p).with_key("sight", "pooled");
    cell.value("theory", theoretical_dim(p, cfg.m));
    if out.survivors(&mut cell, survived, seeds.len())? {
        let e: Vec<f64> = trials.iter().map(|t| t.e_slope).collect();
        let v: Vec<f64> = trials.iter().flat_map(|t| t.sights.iter().map(|s| s.0)).collect();
        let (e, v) = (aggregate(&e)?, aggregate(&v)?);
        cell.value("gap", e.mean - v.mean);
        cell.put("e_slope", Metric::Estimate(e));
        cell.put("v_slope", Metric::Estimate(v));
    }
    out.cells.push(cell);
    Ok(())
}

fn corner(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let dirs = cfg.all_directions();
    let levels = stripe_levels(cfg);
    let top = *levels.last().expect("levels are nonempty");
    let layouts: Vec<(u32, StripeLayout)> =
        levels.iter().flat_map(|&n| dirs.iter().map(move |d| (n, d))).map(|(n, d)| Ok((n, layout(cfg, d, n)?))).collect::<Result<_>>()?;
    let trials = run_trials(seeds, |_, seed| {
        let Some(tree) = surviving_tree(cfg, p, top, seed)? else { return Ok(None) };
        let mut seqs = Vec::new();
        let mut triples = 0u64;
        for (_, l) in &layouts {
            let sign = SlopeSign::of(&l.d);
            for proc in l.processes(&tree)? {
                let all = proc.all.iter().map(|s| is_corner(s, sign, cfg.m)).collect::<Result<Vec<bool>>>()?;
                triples += all.windows(3).filter(|w| w.iter().all(|&z| z)).count() as u64;
                if !proc.corners.is_empty() {
                    seqs.push(proc.corners);
                }
            }
        }
        Ok(Some((seqs, triples)))
    })?;
    let trials: Vec<(Vec<Vec<bool>>, u64)> = trials.into_iter().flatten().collect();
    let survived = trials.len();
    let triples: u64 = trials.iter().map(|t| t.1).sum();
    let seqs: Vec<Vec<bool>> = trials.into_iter().flat_map(|t| t.0).collect();
    let mut cell = Cell::new(p).with_key("levels", format!("{levels:?}"));
    let any = out.survivors(&mut cell, survived, seeds.len())?;
    cell.count("intervals", seqs.len() as u64);
    if !any || seqs.is_empty() {
        out.flag(p, "no stripe process has a retained square");
        out.cells.push(cell);
        return Ok(());
    }
    // (m, X_{m−1}) → (samples, corners at position m)
    let mut buckets: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
    for s in &seqs {
        let mut x = 0;
        for (i, &z) in s.iter().enumerate() {
            let b = buckets.entry((i + 1, x)).or_default();
            b.0 += 1;
            b.1 += z as u64;
            x += z as usize;
        }
    }
    let total: u64 = seqs.iter().map(|s| s.len() as u64).sum();
    let corners: u64 = seqs.iter().map(|s| s.iter().filter(|&&z| z).count() as u64).sum();
    cell.put("corner", Metric::Proportion(Proportion::new(corners, total)?));
    cell.count("corner_triples", triples);
    if triples > 0 {
        out.audit(p, format!("{triples} runs of three consecutive corners above a stripe"));
    }
    let min_bucket = cfg.min_bucket_or_default();
    let used: Vec<((usize, usize), (u64, u64))> = buckets.into_iter().filter(|(_, (n, _))| *n >= min_bucket).collect();
    cell.count("buckets", used.len() as u64);
    let Some(zeta) = used.iter().map(|(_, (n, c))| *c as f64 / *n as f64).max_by(f64::total_cmp) else {
        out.flag(p, format!("no history bucket has {min_bucket} samples"));
        out.cells.push(cell);
        return Ok(());
    };
    cell.value("zeta_hat", zeta);
    let eta = cfg.eta.unwrap_or((1.0 - zeta) / 2.0);
    if !(eta > 0.0 && zeta + eta < 1.0) {
        bail!(Config, "eta {eta} is outside (0, 1 − ζ̂) with ζ̂ = {zeta}");
    }
    cell.value("eta", eta);
    let azuma_m = if cfg.azuma_m.is_empty() { vec![10, 20, 40] } else { cfg.azuma_m.clone() };
    let n = seqs.len() as u64;
    for m in azuma_m {
        // positions beyond the end of a process count as non-corners
        let threshold = (zeta + eta) * m as f64;
        let over = seqs
            .iter()
            .filter(|s| s.iter().take(m as usize).filter(|&&z| z).count() as f64 > threshold)
            .count() as u64;
        let tail = Proportion::new(over, n)?;
        let bound = (-eta * eta * m as f64 / 2.0).exp();
        let se = (bound * (1.0 - bound) / n as f64).sqrt();
        cell.put(format!("tail_m{m}"), Metric::Proportion(tail));
        cell.value(&format!("bound_m{m}"), bound);
        cell.value(&format!("excess_se_m{m}"), (tail.estimate - bound) / se);
        if tail.estimate > bound + AUDIT_SE * se {
            out.audit(p, format!("X_{m} tail {} exceeds exp(−η²m/2) = {bound} by more than {AUDIT_SE} SE", tail.estimate));
        }
    }
    out.cells.push(cell);
    for ((m, x), (n, c)) in used {
        let mut b = Cell::new(p).with_key("levels", format!("{levels:?}")).with_key("m", m).with_key("x", x);
        b.put("corner", Metric::Proportion(Proportion::new(c, n)?));
        out.cells.push(b);
    }
    Ok(())
}

/// `P̂(Y ≥ i)` for `i = 1, 2, …` while at least `min` samples reach `i`.
fn survival(ys: &[usize], min: u64) -> Vec<f64> {
    let n = ys.len() as f64;
    let mut out = Vec::new();
    for i in 1.. {
        let c = ys.iter().filter(|&&y| y >= i).count();
        if (c as u64) < min.max(1) {
            break;
        }
        out.push(c as f64 / n);
    }
    out
}

/// Largest second difference of `ln S` in units of its Greenwood standard error,
/// where `surv` holds survival fractions of `n` samples.
fn concavity_z(surv: &[f64], n: usize) -> f64 {
    let c: Vec<f64> = surv.iter().map(|s| s * n as f64).collect();
    surv.windows(3)
        .zip(c.windows(3))
        .map(|(s, c)| {
            let d2 = s[2].ln() - 2.0 * s[1].ln() + s[0].ln();
            let var = 1.0 / c[2] - 1.0 / c[0];
            if var > 0.0 {
                d2 / var.sqrt()
            } else if d2 > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares slope of `values` against their indices.
fn linear_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / n;
    let sxy: f64 = values.iter().enumerate().map(|(i, v)| (i as f64 - mx) * (v - my)).sum();
    let sxx: f64 = (0..values.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    sxy / sxx
}

/// Block frequency, first-block positions and `Y` of the stripes of one tree.
#[derive(Default, Clone)]
struct BlockTally {
    candidates: u64,
    blocks: u64,
    ys: Vec<usize>,
}

impl BlockTally {
    fn merge(&mut self, o: &BlockTally) {
        self.candidates += o.candidates;
        self.blocks += o.blocks;
        self.ys.extend_from_slice(&o.ys);
    }
}

fn block(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let dirs = cfg.all_directions();
    let levels = stripe_levels(cfg);
    let top = *levels.last().expect("levels are nonempty");
    let trials = run_trials(seeds, |_, seed| {
        let Some(tree) = surviving_tree(cfg, p, top, seed)? else { return Ok(None) };
        let mut per = Vec::new();
        for &n in &levels {
            for d in &dirs {
                let mut cache = BlockCache::new(&tree, *d, block_depth(cfg, n));
                let mut tally = BlockTally::default();
                for proc in layout(cfg, d, n)?.processes(&tree)? {
                    if proc.chosen.is_empty() {
                        continue;
                    }
                    for (sq, &z) in proc.chosen.iter().zip(&proc.corners) {
                        if !z {
                            tally.candidates += 1;
                            tally.blocks += cache.is_block(&crate::grid::ancestor(sq, 2, cfg.m)?)? as u64;
                        }
                    }
                    tally.ys.push(proc.cover(&mut cache, cfg.m)?.0.y);
                }
                per.push(tally);
            }
        }
        Ok(Some(per))
    })?;
    let trials: Vec<Vec<BlockTally>> = trials.into_iter().flatten().collect();
    let mut pooled = BlockTally::default();
    let mut keys: Vec<(String, String)> = Vec::new();
    for &n in &levels {
        for d in &dirs {
            keys.push((n.to_string(), d.to_string()));
        }
    }
    for (i, (n, d)) in keys.iter().enumerate() {
        let mut t = BlockTally::default();
        for tr in &trials {
            t.merge(&tr[i]);
        }
        pooled.merge(&t);
        let cell = Cell::new(p).with_key("level", n).with_key("direction", d);
        block_cell(cfg, cell, &t, trials.len(), seeds.len(), out)?;
    }
    let cell = Cell::new(p).with_key("level", "all").with_key("direction", "pooled");
    block_cell(cfg, cell, &pooled, trials.len(), seeds.len(), out)
}

fn block_cell(
    cfg: &ExperimentConfig,
    mut cell: Cell,
    t: &BlockTally,
    survived: usize,
    trials: usize,
    out: &mut Outcome,
) -> Result<()> {
    let p = cell.p.clone();
    if !out.survivors(&mut cell, survived, trials)? || t.candidates == 0 {
        out.cells.push(cell);
        return Ok(());
    }
    cell.put("q_hat", Metric::Proportion(Proportion::new(t.blocks, t.candidates)?));
    let ys: Vec<f64> = t.ys.iter().map(|&y| y as f64).collect();
    cell.put("y", estimate(&ys)?);
    let surv = survival(&t.ys, cfg.min_bucket_or_default());
    let logs: Vec<f64> = surv.iter().map(|s| s.ln()).collect();
    cell.put("y_survival", Metric::Series { values: surv.clone() });
    if logs.len() >= 3 {
        cell.value("y_decay_rate", linear_slope(&logs).exp());
        let second = logs.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::NEG_INFINITY, f64::max);
        cell.value("y_max_second_difference", second);
        cell.value("y_concavity_z", concavity_z(&surv, t.ys.len()));
    } else {
        let key: Vec<String> = cell.key.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.flag(&p, format!("[{}] Y tail has fewer than 3 well-sampled points", key.join(" ")));
    }
    out.cells.push(cell);
    Ok(())
}

fn stripe_length(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let dirs = cfg.all_directions();
    let levels = stripe_levels(cfg);
    let top = *levels.last().expect("levels are nonempty");
    // per (level, direction): (ĤL, N_n(V)·M^{-n}, S_n)
    let trials = run_trials(seeds, |_, seed| {
        let Some(tree) = surviving_tree(cfg, p, top, seed)? else { return Ok(None) };
        let mut per = Vec::new();
        for &n in &levels {
            let s = grid_side(cfg.m, n)? as f64;
            for d in &dirs {
                let l = layout(cfg, d, n)?;
                let est = crate::analysis::visible_length_estimate(&tree, n, d, cfg.side, &l.eps, block_depth(cfg, n))?;
                let proxy = visible_from_line(&tree, n, d, cfg.side)?.counts[n as usize] as f64 / s;
                per.push((est.estimate, proxy, est.total as f64));
            }
        }
        Ok(Some(per))
    })?;
    let trials: Vec<Vec<(f64, f64, f64)>> = trials.into_iter().flatten().collect();
    let mut i = 0;
    for &n in &levels {
        for d in &dirs {
            let mut cell = Cell::new(p).with_key("level", n).with_key("direction", d);
            if out.survivors(&mut cell, trials.len(), seeds.len())? {
                let hl: Vec<f64> = trials.iter().map(|t| t[i].0).collect();
                let proxy: Vec<f64> = trials.iter().map(|t| t[i].1).collect();
                let s: Vec<f64> = trials.iter().map(|t| t[i].2).collect();
                let violations = hl.iter().zip(&proxy).filter(|(h, v)| **h < **v / 4.0).count() as u64;
                cell.put("hl", estimate(&hl)?);
                cell.value("hl_median", median(&hl)?);
                cell.put("proxy", estimate(&proxy)?);
                cell.value("proxy_median", median(&proxy)?);
                cell.put("s_n", estimate(&s)?);
                cell.count("dominance_violations", violations);
                if violations > 0 {
                    out.audit(p, format!("level {n} d={d}: {violations} trees with ĤL below a quarter of the visible count"));
                }
            }
            out.cells.push(cell);
            i += 1;
        }
    }
    Ok(())
}

fn coverage(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let sights = cfg.sights();
    let levels = levels_or_depth(cfg);
    let (lo, hi) = (levels[0], *levels.last().expect("levels are nonempty"));
    let eps = coverage_eps(cfg);
    // per sight: coverage at every level lo..=hi
    let trials = run_trials(seeds, |_, seed| {
        let tree = generate(&cfg.params(p, hi, seed)?)?;
        sights
            .iter()
            .map(|sight| {
                (lo..=hi)
                    .map(|m| match sight {
                        SightSpec::Line { d, .. } => projection_coverage(&tree, m, d, &eps),
                        SightSpec::Point { x } => radial_coverage(&tree, m, x, &eps),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let t = seeds.len() as u64;
    for (i, sight) in sights.iter().enumerate() {
        let violations =
            trials.iter().filter(|tr| tr[i].windows(2).any(|w| w[1] && !w[0])).count() as u64;
        if violations > 0 {
            out.audit(p, format!("{sight}: {violations} trees covered at a deeper level but not a shallower one"));
        }
        for &m in &levels {
            let hits = trials.iter().filter(|tr| tr[i][(m - lo) as usize]).count() as u64;
            let mut cell = Cell::new(p).with_key("sight", sight).with_key("level", m);
            cell.put("covered", Metric::Proportion(Proportion::new(hits, t)?));
            cell.count("monotonicity_violations", violations);
            out.cells.push(cell);
        }
    }
    Ok(())
}

fn passed_counts(cfg: &ExperimentConfig, p: &Scalar, seeds: &[u64], out: &mut Outcome) -> Result<()> {
    let n = cfg.depth;
    let g = cfg.growth_gap.unwrap_or(1);
    let k0 = cfg.base_level.unwrap_or(n - g);
    let trials = run_trials(seeds, |_, seed| {
        let tree = generate(&cfg.params(p, n, seed)?)?;
        cfg.lines
            .iter()
            .map(|(a, b)| (0..=n).map(|k| count_passed(&tree, k, a, b)).collect::<Result<Vec<u64>>>())
            .collect::<Result<Vec<_>>>()
    })?;
    let mut ratios = Vec::new();
    for (i, (a, b)) in cfg.lines.iter().enumerate() {
        let mut cell = Cell::new(p).with_key("line", format!("({},{})-({},{})", a.0, a.1, b.0, b.1));
        let means = (0..=n as usize)
            .map(|k| trials.iter().map(|t| t[i][k] as f64).sum::<f64>() / trials.len() as f64)
            .collect();
        cell.put("v_mean", Metric::Series { values: means });
        let last: Vec<f64> = trials.iter().map(|t| t[i][n as usize] as f64).collect();
        cell.put("v_depth", estimate(&last)?);
        out.cells.push(cell);
        for t in &trials {
            let base = t[i][k0 as usize];
            if base > 0 {
                ratios.push(t[i][(k0 + g) as usize] as f64 / base as f64);
            }
        }
    }
    let mut cell = Cell::new(p).with_key("line", "pooled").with_key("base", k0).with_key("gap", g);
    let threshold = ((cfg.m as f64).powi(g as i32) - 1.0) * p.to_f64().powi(g as i32);
    cell.value("threshold", threshold);
    cell.count("pairs", ratios.len() as u64);
    if ratios.len() < MIN_SURVIVORS {
        out.flag(p, format!("only {} line/tree pairs pass a level-{k0} square", ratios.len()));
    }
    if !ratios.is_empty() {
        cell.value("growth_median", median(&ratios)?);
        cell.put("growth", estimate(&ratios)?);
    }
    out.cells.push(cell);
    Ok(())
}
