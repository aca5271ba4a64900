//! Command-line surface. Exit codes: 0 success, 1 usage or input error,
//! 2 registration failure (a run that completed but found no usable
//! hypothesis, or a diagnostic that came back empty everywhere).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use turboreg_core::{
    clique_stability_samples, estimate, estimate_resolution, evaluate_pairs, generate, median,
    CorrespondenceSet, Error, EstimatorParams, EvalReport, GraphMode, PairOutcome,
    RegistrationResult, RigidTransform, StabilityConfig, SuccessCriteria, SynthConfig,
    INDOOR_CRITERIA, KITTI_CRITERIA,
};

use crate::bench::{self, BenchInput, BenchOptions};
use crate::document::ResultDocument;
use crate::formats;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unusable input files.
    Usage(String),
    /// The pipeline ran and came up empty.
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CmdResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "turboreg",
    version,
    about = "Correspondence-based rigid registration via pivot-guided clique search",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate a rigid transform from a correspondence file
    Register(RegisterArgs),
    /// Generate a synthetic instance: .corr, .gt and .mask files
    Synth(SynthArgs),
    /// Score predicted transforms against ground-truth transforms
    Eval(EvalArgs),
    /// Run the estimator or the RANSAC baseline over many pairs
    Bench(BenchArgs),
    /// Clique-stability diagnostics across edge thresholds
    #[command(name = "diag-stability")]
    DiagStability(StabilityArgs),
}

fn parse_graph(s: &str) -> Result<GraphMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct EstimatorOpts {
    /// Edge threshold in meters; default 0.25 x point-cloud resolution
    #[arg(long)]
    tau: Option<f64>,
    /// Resolution in meters, used for the tau default when --tau is absent
    #[arg(long)]
    resolution: Option<f64>,
    /// Pivot edges to expand
    #[arg(long, default_value_t = 1000)]
    k1: usize,
    /// Candidates kept per pivot
    #[arg(long, default_value_t = 2)]
    k2: usize,
    /// Residual bound in meters for the consensus count
    #[arg(long, default_value_t = 0.10)]
    inlier_thresh: f64,
    /// Compatibility weights: o2 (each triangle counted once) or sc2
    #[arg(long, default_value = "o2", value_parser = parse_graph)]
    graph: GraphMode,
    /// Re-fit once on the winning inlier set
    #[arg(long)]
    refine: bool,
}

impl EstimatorOpts {
    /// Params with everything but tau settled.
    fn base(&self) -> Result<EstimatorParams, CliError> {
        let mut p = EstimatorParams::new(1.0);
        p.k1 = self.k1;
        p.k2 = self.k2;
        p.inlier_threshold = self.inlier_thresh;
        p.graph_mode = self.graph;
        p.refine = self.refine;
        p.validate().map_err(CliError::usage)?;
        Ok(p)
    }

    /// The tau actually in force, estimating resolution from the source
    /// points only when neither --tau nor --resolution was given.
    fn resolve_tau(&self, corr: &CorrespondenceSet) -> Result<f64, CliError> {
        match (self.tau, self.resolution) {
            (Some(t), _) => Ok(t),
            (None, Some(r)) => Ok(0.25 * r),
            (None, None) => Ok(0.25
                * estimate_resolution(&corr.source_points()).map_err(CliError::usage)?),
        }
    }

    fn resolve(&self, corr: &CorrespondenceSet) -> Result<EstimatorParams, CliError> {
        let mut p = self.base()?;
        p.tau = self.resolve_tau(corr)?;
        p.validate().map_err(CliError::usage)?;
        Ok(p)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// RE <= 15 degrees, TE <= 0.30 m
    Indoor,
    /// RE <= 5 degrees, TE <= 0.60 m
    Kitti,
}

#[derive(Args)]
struct CriteriaOpts {
    /// Success thresholds by name; overrides --re-max/--te-max
    #[arg(long, value_enum, conflicts_with_all = ["re_max", "te_max"])]
    preset: Option<Preset>,
    /// Maximum rotation error in degrees for a pair to count as success
    #[arg(long, default_value_t = 15.0)]
    re_max: f64,
    /// Maximum translation error in meters for a pair to count as success
    #[arg(long, default_value_t = 0.30)]
    te_max: f64,
}

impl CriteriaOpts {
    fn criteria(&self) -> SuccessCriteria {
        match self.preset {
            Some(Preset::Indoor) => INDOOR_CRITERIA,
            Some(Preset::Kitti) => KITTI_CRITERIA,
            None => SuccessCriteria {
                re_max_deg: self.re_max,
                te_max_m: self.te_max,
            },
        }
    }
}

#[derive(Args)]
struct RegisterArgs {
    /// Correspondence file: one "sx sy sz tx ty tz" record per line
    #[arg(long)]
    corr: PathBuf,
    #[command(flatten)]
    est: EstimatorOpts,
    /// Worker threads (default: rayon's global default)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=1024))]
    threads: Option<u32>,
    /// Report stage timings as zeros so output is byte-stable across runs
    #[arg(long)]
    no_timings: bool,
    /// Write the JSON document here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of correspondences
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    outlier_ratio: f64,
    /// Gaussian noise sigma in meters on inlier targets
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Source points fill [-extent/2, extent/2]^3
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>.corr, <prefix>.gt and <prefix>.mask
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted transforms: .json result documents or 4x4 text files
    #[arg(long, num_args = 1.., required = true)]
    pred: Vec<PathBuf>,
    /// Ground-truth 4x4 text files, one per prediction
    #[arg(long, num_args = 1.., required = true)]
    gt: Vec<PathBuf>,
    #[command(flatten)]
    criteria: CriteriaOpts,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Turboreg,
    Ransac,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Turboreg)]
    method: MethodArg,
    /// Directory of <stem>.corr files with <stem>.gt sidecars
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    /// Synthetic sweep: comma list of correspondence counts
    #[arg(long, value_delimiter = ',')]
    synth_n: Vec<usize>,
    /// Synthetic sweep: comma list of outlier ratios
    #[arg(long, value_delimiter = ',')]
    synth_outlier_ratio: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    synth_noise: f64,
    #[arg(long, default_value_t = 1.0)]
    synth_extent: f64,
    /// Comma list of seeds; "a..b" expands to the half-open range
    #[arg(long, value_delimiter = ',', default_value = "0")]
    synth_seeds: Vec<String>,
    #[command(flatten)]
    est: EstimatorOpts,
    #[command(flatten)]
    criteria: CriteriaOpts,
    /// Baseline sampling seed; pair k draws from seed + k
    #[arg(long, default_value_t = 0)]
    ransac_seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=1024))]
    threads: Option<u32>,
    /// Zero the timing columns and drop FPS so output is byte-stable
    #[arg(long)]
    no_timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    /// Comma list of edge thresholds in meters, one output row each
    #[arg(long, value_delimiter = ',', required = true)]
    taus: Vec<f64>,
    /// Members per grown clique (at least 4)
    #[arg(long, default_value_t = 10)]
    clique_size: usize,
    /// Cliques collected per tau and instance
    #[arg(long, default_value_t = 50)]
    max_cliques: usize,
    /// Comma list of instance seeds; "a..b" expands to the half-open range
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<String>,
    /// Correspondences per synthetic instance (all inliers)
    #[arg(long, default_value_t = 60)]
    n: usize,
    /// Gaussian noise sigma in meters
    #[arg(long, default_value_t = 0.005)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let outcome = match cli.cmd {
        Cmd::Register(a) => cmd_register(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::DiagStability(a) => cmd_stability(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn write_output(path: Option<&Path>, content: &str) -> CmdResult {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .lock()
                .write_all(content.as_bytes())
                .map_err(CliError::usage)
        }
    }
}

fn build_pool(threads: u32) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads as usize)
        .build()
        .map_err(CliError::usage)
}

/// Run `f`, optionally inside a dedicated pool of the requested width.
fn with_pool<R: Send>(
    threads: Option<u32>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, CliError> {
    match threads {
        Some(n) => Ok(build_pool(n)?.install(f)),
        None => Ok(f()),
    }
}

fn cmd_register(a: RegisterArgs) -> CmdResult {
    let corr = formats::read_correspondences(&a.corr).map_err(CliError::usage)?;
    let params = a.est.resolve(&corr)?;
    let run: Result<RegistrationResult, Error> =
        with_pool(a.threads, || estimate(&corr, &params))?;
    match run {
        Ok(r) => write_output(
            a.out.as_deref(),
            &ResultDocument::from_result(&r, &params, a.no_timings).to_json(),
        ),
        Err(Error::NoHypothesis { reason }) => {
            let doc = ResultDocument::from_failure(reason.clone(), &params);
            write_output(a.out.as_deref(), &doc.to_json())?;
            Err(CliError::Runtime(format!("registration failed: {reason}")))
        }
        Err(e) => Err(CliError::usage(e)),
    }
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let config = SynthConfig {
        n: a.n,
        outlier_ratio: a.outlier_ratio,
        noise_sigma: a.noise,
        extent: a.extent,
        seed: a.seed,
    };
    let inst = generate(&config).map_err(CliError::usage)?;
    let prefix = a.out_prefix.as_os_str().to_string_lossy();
    let write = |ext: &str, content: String| -> CmdResult {
        let path = PathBuf::from(format!("{prefix}.{ext}"));
        std::fs::write(&path, content)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    };
    write("corr", formats::correspondences_to_string(&inst.correspondences))?;
    write("gt", formats::transform_to_string(&inst.gt))?;
    write("mask", formats::mask_to_string(&inst.inlier_mask))
}

/// A prediction is either a register JSON document or a 4x4 text file,
/// told apart by the .json extension.
fn load_prediction(path: &Path) -> Result<PairOutcome, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let doc = ResultDocument::from_json(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let transform = match doc.transform {
            None => None,
            Some(m) => {
                let (t, fixed) = RigidTransform::from_row_major_lenient(&m)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                if fixed {
                    eprintln!(
                        "warning: {}: rotation re-projected onto the rotation group",
                        path.display()
                    );
                }
                Some(t)
            }
        };
        Ok(PairOutcome {
            transform,
            elapsed_s: doc.stage_timings.total(),
        })
    } else {
        let r = formats::read_transform(path).map_err(CliError::usage)?;
        if r.reprojected {
            eprintln!(
                "warning: {}: rotation re-projected onto the rotation group",
                path.display()
            );
        }
        Ok(PairOutcome {
            transform: Some(r.transform),
            elapsed_s: 0.0,
        })
    }
}

fn load_gt(path: &Path) -> Result<RigidTransform, CliError> {
    let r = formats::read_transform(path).map_err(CliError::usage)?;
    if r.reprojected {
        eprintln!(
            "warning: {}: rotation re-projected onto the rotation group",
            path.display()
        );
    }
    Ok(r.transform)
}

fn render_eval_csv(report: &EvalReport) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("pair,re_deg,te_m,success,elapsed_s\n");
    for (k, p) in report.per_pair.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{},{},{}", p.re_deg, p.te_m, p.success, p.elapsed_s);
    }
    let _ = write!(
        out,
        "# pairs={} successes={} rr={} mean_re_success_deg={} mean_te_success_m={}",
        report.pairs,
        report.successes,
        report.rr,
        report.mean_re_success_deg,
        report.mean_te_success_m
    );
    if let Some(fps) = report.fps {
        let _ = write!(out, " fps={fps}");
    }
    out.push('\n');
    out
}

fn render_eval_json(report: &EvalReport) -> String {
    let per_pair: Vec<serde_json::Value> = report
        .per_pair
        .iter()
        .enumerate()
        .map(|(k, p)| {
            serde_json::json!({
                "pair": k,
                "re_deg": p.re_deg,
                "te_m": p.te_m,
                "success": p.success,
                "elapsed_s": p.elapsed_s,
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({
        "per_pair": per_pair,
        "pairs": report.pairs,
        "successes": report.successes,
        "rr": report.rr,
        "mean_re_success_deg": report.mean_re_success_deg,
        "mean_te_success_m": report.mean_te_success_m,
        "mean_re_all_deg": report.mean_re_all_deg,
        "mean_te_all_m": report.mean_te_all_m,
        "fps": report.fps,
    }))
    .expect("report serializes");
    s.push('\n');
    s
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if a.pred.len() != a.gt.len() {
        return Err(CliError::Usage(format!(
            "{} predictions vs {} ground truths",
            a.pred.len(),
            a.gt.len()
        )));
    }
    let mut pairs = Vec::with_capacity(a.pred.len());
    for (p, g) in a.pred.iter().zip(&a.gt) {
        pairs.push((load_prediction(p)?, load_gt(g)?));
    }
    let report = evaluate_pairs(&pairs, &a.criteria.criteria()).map_err(CliError::usage)?;
    let rendered = match a.format {
        OutFormat::Csv => render_eval_csv(&report),
        OutFormat::Json => render_eval_json(&report),
    };
    write_output(a.out.as_deref(), &rendered)
}

fn expand_seeds(tokens: &[String]) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    for t in tokens {
        let t = t.trim();
        if let Some((a, b)) = t.split_once("..") {
            let lo: u64 = a
                .parse()
                .map_err(|_| CliError::Usage(format!("bad seed range {t:?}")))?;
            let hi: u64 = b
                .parse()
                .map_err(|_| CliError::Usage(format!("bad seed range {t:?}")))?;
            if hi <= lo {
                return Err(CliError::Usage(format!("empty seed range {t:?}")));
            }
            out.extend(lo..hi);
        } else {
            out.push(
                t.parse()
                    .map_err(|_| CliError::Usage(format!("bad seed {t:?}")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no seeds given".into()));
    }
    Ok(out)
}

fn dataset_inputs(dir: &Path) -> Result<Vec<BenchInput>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
    let mut corr_paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "corr"))
        .collect();
    corr_paths.sort();
    let mut inputs = Vec::with_capacity(corr_paths.len());
    for p in corr_paths {
        let corr = formats::read_correspondences(&p).map_err(CliError::usage)?;
        let gt_path = p.with_extension("gt");
        if !gt_path.exists() {
            return Err(CliError::Usage(format!(
                "{}: missing ground-truth sidecar",
                gt_path.display()
            )));
        }
        let gt = load_gt(&gt_path)?;
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        inputs.push(BenchInput {
            id,
            corr,
            gt,
            outlier_ratio: None,
            noise_sigma: None,
            seed: None,
        });
    }
    if inputs.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no .corr files found",
            dir.display()
        )));
    }
    Ok(inputs)
}

fn sweep_inputs(a: &BenchArgs) -> Result<Vec<BenchInput>, CliError> {
    let seeds = expand_seeds(&a.synth_seeds)?;
    let mut inputs = Vec::new();
    for &n in &a.synth_n {
        for &ratio in &a.synth_outlier_ratio {
            for &seed in &seeds {
                let inst = generate(&SynthConfig {
                    n,
                    outlier_ratio: ratio,
                    noise_sigma: a.synth_noise,
                    extent: a.synth_extent,
                    seed,
                })
                .map_err(CliError::usage)?;
                inputs.push(BenchInput {
                    id: format!("n{n}_r{ratio}_s{seed}"),
                    corr: inst.correspondences,
                    gt: inst.gt,
                    outlier_ratio: Some(ratio),
                    noise_sigma: Some(a.synth_noise),
                    seed: Some(seed),
                });
            }
        }
    }
    if inputs.is_empty() {
        return Err(CliError::Usage(
            "empty sweep: give --synth-n and --synth-outlier-ratio".into(),
        ));
    }
    Ok(inputs)
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let sweep_requested = !a.synth_n.is_empty() || !a.synth_outlier_ratio.is_empty();
    let inputs = match (&a.dataset_dir, sweep_requested) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "choose either --dataset-dir or a --synth-* sweep, not both".into(),
            ))
        }
        (Some(dir), false) => dataset_inputs(dir)?,
        (None, true) => sweep_inputs(&a)?,
        (None, false) => {
            return Err(CliError::Usage(
                "no input: give --dataset-dir or a --synth-* sweep".into(),
            ))
        }
    };
    let opts = BenchOptions {
        method: match a.method {
            MethodArg::Turboreg => bench::Method::Turboreg,
            MethodArg::Ransac => bench::Method::Ransac,
        },
        params: a.est.base()?,
        tau_override: match (a.est.tau, a.est.resolution) {
            (Some(t), _) => Some(t),
            (None, Some(r)) => Some(0.25 * r),
            (None, None) => None,
        },
        criteria: a.criteria.criteria(),
        ransac_seed: a.ransac_seed,
        suppress_timings: a.no_timings,
    };
    let rows = with_pool(a.threads, || bench::run_pairs(&inputs, &opts))?
        .map_err(CliError::Usage)?;
    write_output(a.out.as_deref(), &bench::render_csv(&rows, a.no_timings))
}

fn cmd_stability(a: StabilityArgs) -> CmdResult {
    let seeds = expand_seeds(&a.seeds)?;
    let config_for = |seed: u64| StabilityConfig {
        taus: a.taus.clone(),
        clique_size: a.clique_size,
        max_cliques: a.max_cliques,
        seed,
    };
    config_for(0).validate().map_err(CliError::usage)?;
    let mut pooled: Vec<Vec<(f64, f64)>> = vec![Vec::new(); a.taus.len()];
    for &seed in &seeds {
        let inst = generate(&SynthConfig {
            n: a.n,
            outlier_ratio: 0.0,
            noise_sigma: a.noise,
            extent: a.extent,
            seed,
        })
        .map_err(CliError::usage)?;
        let per_tau = clique_stability_samples(&inst.correspondences, &config_for(seed))
            .map_err(CliError::usage)?;
        for (k, (_, samples)) in per_tau.into_iter().enumerate() {
            pooled[k].extend(samples);
        }
    }
    if pooled.iter().all(|s| s.is_empty()) {
        return Err(CliError::Runtime(format!(
            "no cliques of size {} found at any tau",
            a.clique_size
        )));
    }
    use std::fmt::Write as _;
    let mut out = String::from("tau,median_dr_deg,median_dt_m,samples\n");
    for (tau, samples) in a.taus.iter().zip(&pooled) {
        if samples.is_empty() {
            let _ = writeln!(out, "{tau},,,0");
        } else {
            let (dr, dt): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
            let _ = writeln!(
                out,
                "{tau},{},{},{}",
                median(dr).unwrap(),
                median(dt).unwrap(),
                samples.len()
            );
        }
    }
    write_output(a.out.as_deref(), &out)
}
