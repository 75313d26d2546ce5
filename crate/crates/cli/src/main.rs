//! `fracvis`: generate percolation trees, compute visible parts, and run experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fracvis::analysis::{
    default_stripe_eps, dim_slope, projection_coverage, radial_coverage, visible_length_estimate, count_passed,
    ScalingTable,
};
use fracvis::exactgeom::Point;
use fracvis::grid::{generate, PercParams, PercolationTree};
use fracvis::montecarlo::{run, ExperimentConfig};
use fracvis::visibility::{audit_discrepancies, certify, ray_cast_oracle, visible_cover, DiscrepancyKind, SightSpec, VisibleCover};
use fracvis::Scalar;

#[derive(Parser)]
#[command(name = "fracvis", version, about = "Fractal percolation and its visible parts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a percolation tree and write it as JSON.
    Gen(GenArgs),
    /// Compute the squares visible from a line or a point.
    ///
    /// Writes the cover as JSON and the counts as CSV with columns `k,N_k`.
    Vis(VisArgs),
    /// Box counts and fitted scaling slope of E_n or of a visible part.
    ///
    /// The table has columns `k,N_k`; the summary line is
    /// `slope=<f> intercept=<f> max_residual=<f> points=<n>` with 6 decimals.
    Boxdim(BoxdimArgs),
    /// Stripe covering counts and the length estimate along a direction.
    ///
    /// The table has columns `j,Q_I,C_I,Y,first_block`; the summary line is
    /// `S_n=<n> HL=<f> stripes=<n> eps=<r>`.
    Stripes(StripesArgs),
    /// Whether the level-m shadows cover the carved unit square, over a sweep of m.
    ///
    /// CSV columns: `m,covered` with `covered` 0 or 1.
    Coverage(CoverageArgs),
    /// Number of retained squares a line passes, per level.
    ///
    /// CSV columns: `line,k,V_k` where `line` is the 0-based index of `--through`.
    Passed(PassedArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    ///
    /// The CSV table has columns `cell,p,key,metric,value,stderr,ci_lo,ci_hi,samples`.
    /// Exits with code 2 when an invariant audit fails.
    Mc(McArgs),
    /// Re-verify a stored cover with witness rays and a ray-cast oracle.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Retention probability, as a decimal or a fraction.
    #[arg(long)]
    p: Scalar,
    #[arg(long)]
    depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subdivision base.
    #[arg(long = "base", default_value_t = 2)]
    m: u32,
    /// Store only the parameters; the levels are regenerated on load.
    #[arg(long)]
    params_only: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Where the tree comes from: a file, or parameters to generate it.
#[derive(Args)]
struct TreeArgs {
    #[arg(long, conflicts_with_all = ["p", "depth"])]
    tree: Option<PathBuf>,
    #[arg(long)]
    p: Option<Scalar>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "base", default_value_t = 2)]
    m: u32,
}

impl TreeArgs {
    fn load(&self) -> Result<PercolationTree> {
        if let Some(path) = &self.tree {
            return PercolationTree::load(path).with_context(|| format!("reading tree {}", path.display()));
        }
        let (Some(p), Some(depth)) = (&self.p, self.depth) else {
            bail!("give --tree or both --p and --depth");
        };
        Ok(generate(&PercParams::new(p.clone(), self.m, depth, self.seed)?)?)
    }
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct SightArgs {
    /// Viewing line direction and side, such as `1,1,+`.
    #[arg(long, allow_hyphen_values = true)]
    line: Option<String>,
    /// External viewpoint, such as `-1,1/2`.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
}

impl SightArgs {
    fn sight(&self) -> Result<Option<SightSpec>> {
        Ok(match (&self.line, &self.point) {
            (Some(l), _) => Some(SightSpec::parse_line(l)?),
            (_, Some(x)) => Some(SightSpec::parse_point(x)?),
            _ => None,
        })
    }

    fn required(&self) -> Result<SightSpec> {
        self.sight()?.ok_or_else(|| anyhow!("give --line or --point"))
    }
}

#[derive(Args)]
struct VisArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    sight: SightArgs,
    /// Level of the squares; defaults to the tree depth.
    #[arg(long)]
    level: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    /// Counts CSV; printed to stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SetKind {
    /// The retained squares.
    #[value(name = "E")]
    E,
    /// The visible squares.
    #[value(name = "V")]
    V,
}

#[derive(Args)]
struct BoxdimArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[arg(long, value_enum, default_value = "E")]
    set: SetKind,
    /// A stored cover to count instead of computing one.
    #[arg(long, conflicts_with_all = ["tree", "p"])]
    cover: Option<PathBuf>,
    #[command(flatten)]
    sight: SightArgs,
    #[arg(long)]
    level: Option<u32>,
    /// Inclusive level range of the fit, `lo:hi`.
    #[arg(long)]
    krange: String,
    /// Table CSV; printed to stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StripesArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Viewing line direction and side, such as `1,1,+`.
    #[arg(long, allow_hyphen_values = true)]
    line: String,
    #[arg(long)]
    level: Option<u32>,
    /// Stripe width factor; defaults to the largest power of 1/2 below the direction's bound.
    #[arg(long)]
    eps: Option<Scalar>,
    /// Level at which blocks are tested; defaults to level + 4.
    #[arg(long)]
    block_depth: Option<u32>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full estimate with its layout as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    sight: SightArgs,
    #[arg(long, default_value = "1/8")]
    eps: Scalar,
    /// Inclusive sweep of depths, `lo:hi`; defaults to every level of the tree.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PassedArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Two points of a line, `x0,y0,x1,y1`; repeat for several lines.
    #[arg(long, required = true, allow_hyphen_values = true)]
    through: Vec<String>,
    /// Inclusive level range, `lo:hi`; defaults to every level of the tree.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report JSON; overrides the config's output path. Printed to stdout when neither is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    cover: PathBuf,
    /// The tree the cover was computed on; regenerated from the cover's parameters when absent.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Rays cast by the oracle; 0 skips it. Defaults to 4^(level+3) when the level is at most 6.
    #[arg(long)]
    rays: Option<u64>,
}

/// A failed certification or audit, reported with exit code 2.
#[derive(Debug)]
struct Rejected(String);

impl std::fmt::Display for Rejected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Rejected {}

fn parse_range(text: &str) -> Result<(u32, u32)> {
    let (lo, hi) = text.split_once(':').ok_or_else(|| anyhow!("range must look like `lo:hi`, got `{text}`"))?;
    let (lo, hi): (u32, u32) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo > hi {
        bail!("empty range {text}");
    }
    Ok((lo, hi))
}

fn parse_line_points(text: &str) -> Result<(Point, Point)> {
    let v: Vec<Scalar> =
        text.split(',').map(|s| s.trim().parse::<Scalar>().map_err(|e| anyhow!("{e}"))).collect::<Result<_>>()?;
    let [x0, y0, x1, y1] = <[Scalar; 4]>::try_from(v).map_err(|_| anyhow!("line must look like `x0,y0,x1,y1`"))?;
    Ok(((x0, y0), (x1, y1)))
}

/// Writes `text` to `path`, or to stdout when there is no path.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn level_or_depth(level: Option<u32>, tree: &PercolationTree) -> Result<u32> {
    let n = level.unwrap_or(tree.depth());
    if n > tree.depth() {
        bail!("level {n} exceeds the tree depth {}", tree.depth());
    }
    Ok(n)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let tree = generate(&PercParams::new(a.p.clone(), a.m, a.depth, a.seed)?)?;
    tree.save(&a.out, !a.params_only)?;
    Ok(())
}

fn cmd_vis(a: &VisArgs) -> Result<()> {
    let tree = a.tree.load()?;
    let n = level_or_depth(a.level, &tree)?;
    let cover = visible_cover(&tree, n, &a.sight.required()?)?;
    cover.save(&a.out)?;
    emit(a.csv.as_deref(), &cover.counts_csv())
}

fn cmd_boxdim(a: &BoxdimArgs) -> Result<()> {
    let (lo, hi) = parse_range(&a.krange)?;
    let table = match (a.set, &a.cover) {
        (_, Some(path)) => ScalingTable::of_cover(&VisibleCover::load(path)?),
        (SetKind::E, None) => {
            let tree = a.tree.load()?;
            ScalingTable::of_tree(&tree, level_or_depth(a.level, &tree)?)?
        }
        (SetKind::V, None) => {
            let tree = a.tree.load()?;
            let n = level_or_depth(a.level, &tree)?;
            ScalingTable::of_cover(&visible_cover(&tree, n, &a.sight.required()?)?)
        }
    };
    let fit = dim_slope(&table, lo..=hi)?;
    emit(a.csv.as_deref(), &table.to_csv())?;
    println!("slope={:.6} intercept={:.6} max_residual={:.6} points={}", fit.slope, fit.intercept, fit.max_residual, fit.points);
    Ok(())
}

fn cmd_stripes(a: &StripesArgs) -> Result<()> {
    let tree = a.tree.load()?;
    let n = level_or_depth(a.level, &tree)?;
    let SightSpec::Line { d, side } = SightSpec::parse_line(&a.line)? else { unreachable!() };
    let eps = match &a.eps {
        Some(e) => e.clone(),
        None => default_stripe_eps(&d)?,
    };
    let est = visible_length_estimate(&tree, n, &d, side, &eps, a.block_depth.unwrap_or(n + 4))?;
    emit(a.csv.as_deref(), &est.to_csv())?;
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&est)? + "\n")?;
    }
    println!("S_n={} HL={:.6} stripes={} eps={}", est.total, est.estimate, est.layout.count, est.layout.eps);
    Ok(())
}

fn cmd_coverage(a: &CoverageArgs) -> Result<()> {
    let tree = a.tree.load()?;
    let (lo, hi) = match &a.levels {
        Some(r) => parse_range(r)?,
        None => (0, tree.depth()),
    };
    let sight = a.sight.required()?;
    let mut out = String::from("m,covered\n");
    for m in lo..=hi {
        let covered = match &sight {
            SightSpec::Line { d, .. } => projection_coverage(&tree, m, d, &a.eps)?,
            SightSpec::Point { x } => radial_coverage(&tree, m, x, &a.eps)?,
        };
        out.push_str(&format!("{m},{}\n", covered as u8));
    }
    emit(a.csv.as_deref(), &out)
}

fn cmd_passed(a: &PassedArgs) -> Result<()> {
    let tree = a.tree.load()?;
    let (lo, hi) = match &a.levels {
        Some(r) => parse_range(r)?,
        None => (0, tree.depth()),
    };
    let mut out = String::from("line,k,V_k\n");
    for (i, text) in a.through.iter().enumerate() {
        let (p0, p1) = parse_line_points(text)?;
        for k in lo..=hi {
            out.push_str(&format!("{i},{k},{}\n", count_passed(&tree, k, &p0, &p1)?));
        }
    }
    emit(a.csv.as_deref(), &out)
}

fn cmd_mc(a: &McArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let report = run(&cfg)?;
    let json = report.to_json()?;
    emit(a.out.as_deref().or(cfg.output.as_deref()), &json)?;
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv())?;
    }
    for f in &report.flags {
        eprintln!("flag: {f}");
    }
    if !report.audit_failures.is_empty() {
        return Err(Rejected(format!("audit failures:\n  {}", report.audit_failures.join("\n  "))).into());
    }
    Ok(())
}

fn cmd_certify(a: &CertifyArgs) -> Result<()> {
    let cover = VisibleCover::load(&a.cover)?;
    let tree = match &a.tree {
        Some(path) => PercolationTree::load(path)?,
        None => generate(&cover.params)?,
    };
    if tree.params() != &cover.params {
        bail!("the cover was computed on a different tree");
    }
    let report = certify(&cover, &tree)?;
    println!("witness: {} squares checked, {} failures", report.checked, report.failures.len());
    if !report.failures.is_empty() {
        let list: Vec<String> = report.failures.iter().map(|s| s.to_string()).collect();
        return Err(Rejected(format!("witness rays failed for {}", list.join(", "))).into());
    }
    let rays = a.rays.unwrap_or(if cover.level <= 6 { 4u64.pow(cover.level + 3) } else { 0 });
    if rays > 0 {
        let oracle = ray_cast_oracle(&tree, cover.level, &cover.sight, rays)?;
        let extra: Vec<String> =
            oracle.squares.iter().filter(|s| !cover.is_marked(s)).map(|s| s.to_string()).collect();
        let unexplained = audit_discrepancies(&cover, &oracle, &tree)?
            .into_iter()
            .filter(|d| d.kind == DiscrepancyKind::Unexplained)
            .count();
        println!(
            "oracle: {rays} rays, {} squares hit, {} outside the cover, {unexplained} unexplained discrepancies",
            oracle.squares.len(),
            extra.len()
        );
        if !extra.is_empty() || unexplained > 0 {
            return Err(Rejected(format!("oracle disagrees with the cover ({} squares outside it)", extra.len())).into());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Rejected>().is_some() {
        return 2;
    }
    match err.downcast_ref::<fracvis::Error>() {
        Some(fracvis::Error::Certification(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Vis(a) => cmd_vis(a),
        Command::Boxdim(a) => cmd_boxdim(a),
        Command::Stripes(a) => cmd_stripes(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Passed(a) => cmd_passed(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Certify(a) => cmd_certify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
