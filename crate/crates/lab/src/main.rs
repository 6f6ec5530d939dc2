use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hgdlab::bounds::{bound_rhs, BoundParams, BoundQuery, TheoremId};
use hgdlab::io::{read_dataset, write_dataset, write_json_file, write_softmargin, write_trace, TraceSummary};
use hgdlab::metrics::{risk_report, soft_margin_curve};
use hgdlab::optimizer::{
    default_step_size, gd_train, sgd_train, CheckpointSchedule, Fault, Mode, OptimConfig, SgdOptions, StepRule,
};
use hgdlab::synthdata::{sample, DistributionSpec, NoiseModel};
use hgdlab::{LabError, LossSpec64};
use hgdlab_lab::config::{ExperimentConfig, ExperimentId, OUT_ENV};
use hgdlab_lab::{check_invariants, emit_plot, run_experiment};

#[derive(Parser)]
#[command(name = "hgdlab", version, about = "Surrogate-loss gradient descent experiments for noisy halfspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic data set to CSV (+ meta sidecar).
    Gen(GenArgs),
    /// Run full-batch GD on a CSV data set, or online SGD on a distribution.
    Train(TrainArgs),
    /// Zero-one and surrogate risk of a weight vector on a data set.
    Eval(EvalArgs),
    /// Empirical soft-margin curve of a direction.
    Softmargin(SoftmarginArgs),
    /// Evaluate a theorem's right-hand side.
    Bounds(BoundsArgs),
    /// Run a parameter sweep.
    Experiment(ExperimentArgs),
    /// Run the invariant suite.
    Invariants(InvariantArgs),
    /// Log-log SVG plot of a result CSV.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    HardMarginSphere,
    SeparableSphere,
    Gaussian,
    UniformBallIsotropic,
    TruncatedGaussian,
}

#[derive(Args)]
struct SpecArgs {
    /// Distribution spec as JSON; the flags below override its fields.
    #[arg(long)]
    spec_json: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    gamma_star: Option<f64>,
    /// `none`, `rcn:ETA` or `boundary_adv:BAND,BUDGET`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    b_x: Option<f64>,
}

fn parse_noise(s: &str) -> anyhow::Result<NoiseModel<f64>> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    Ok(match kind {
        "none" => NoiseModel::None,
        "rcn" => NoiseModel::Rcn { eta: rest.parse().context("rcn:ETA")? },
        "boundary_adv" => {
            let (band, budget) = rest.split_once(',').ok_or_else(|| anyhow!("boundary_adv:BAND,BUDGET"))?;
            NoiseModel::BoundaryAdv { band: band.parse()?, budget: budget.parse()? }
        }
        other => bail!(LabError::Usage(format!("unknown noise model `{other}`"))),
    })
}

impl SpecArgs {
    fn build(&self) -> anyhow::Result<DistributionSpec<f64>> {
        let mut spec: DistributionSpec<f64> = match &self.spec_json {
            Some(p) => {
                serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
            }
            None => {
                let d = self.d.ok_or_else(|| LabError::Usage("--d is required without --spec-json".into()))?;
                match self.family.unwrap_or(FamilyArg::Gaussian) {
                    FamilyArg::HardMarginSphere => DistributionSpec::hard_margin_sphere(
                        d,
                        self.gamma_star
                            .ok_or_else(|| LabError::Usage("hard_margin_sphere needs --gamma-star".into()))?,
                    ),
                    FamilyArg::SeparableSphere => DistributionSpec::separable_sphere(d),
                    FamilyArg::Gaussian => DistributionSpec::gaussian(d),
                    FamilyArg::UniformBallIsotropic => DistributionSpec::uniform_ball_isotropic(d),
                    FamilyArg::TruncatedGaussian => DistributionSpec::truncated_gaussian(d),
                }
            }
        };
        if self.spec_json.is_some() {
            if let Some(g) = self.gamma_star {
                spec.gamma_star = Some(g);
            }
            if self.family.is_some() || self.d.is_some() {
                log::warn!("--family and --d are ignored with --spec-json");
            }
        }
        if let Some(n) = &self.noise {
            spec = spec.with_noise(parse_noise(n)?);
        }
        if let Some(b) = self.b_x {
            spec = spec.with_b_x(b);
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("hgdlab-out"))
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `$HGDLAB_OUT/data.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Gd,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Gd)]
    mode: ModeArg,
    /// Training CSV (full batch).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sampling distribution (SGD).
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value = "logistic")]
    loss: String,
    /// Step size; defaults to the rule for the mode.
    #[arg(long)]
    eta: Option<f64>,
    /// Target accuracy used by the non-smooth and SGD step rules.
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: u64,
    #[arg(long, default_value_t = 100)]
    checkpoints: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    inject_fault: Option<FaultArg>,
    /// Trace CSV; `.summary.json` is written alongside.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipGradientSign,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated weights, or a trace summary JSON (uses `best_w`).
    #[arg(long)]
    weights: String,
    #[arg(long, default_value = "logistic")]
    loss: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SoftmarginArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated direction; defaults to the first basis vector.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long, default_value = "0.01,0.02,0.05,0.1,0.2,0.3,0.4,0.5")]
    gammas: String,
    /// Distribution spec JSON whose analytic soft margin fills `phi_bound`.
    #[arg(long)]
    spec_json: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Query JSON `{theorem, params, loss}`; flags override its parameters.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    theorem: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    opt: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    b_x: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    c_m: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    w0_to_v_dist: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    f_v: Option<f64>,
    #[arg(long)]
    multiplier: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment id; may come from --config instead.
    id: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    opt_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    iterations_grid: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    dims_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    gammas_grid: Option<Vec<f64>>,
    /// Loss ids separated by `;` (ids contain commas).
    #[arg(long)]
    losses: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    gamma_star: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    #[arg(long)]
    n_directions: Option<usize>,
    #[arg(long)]
    multiplier: Option<f64>,
    #[arg(long)]
    checkpoints_per_doubling: Option<usize>,
    /// Also render `measured_err` (or the experiment's main column) as SVG.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct InvariantArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run this many consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    Violation,
}

fn print_json<S: serde::Serialize>(v: &S, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => write_json_file(v, p)?,
        None => println!("{}", serde_json::to_string_pretty(v)?),
    }
    Ok(())
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number `{x}`"))).collect()
}

fn fault(f: Option<FaultArg>) -> Option<Fault> {
    f.map(|FaultArg::FlipGradientSign| Fault::FlipGradientSign)
}

fn gen(a: GenArgs) -> anyhow::Result<Status> {
    let spec = a.spec.build()?;
    let ds = sample(&spec, a.n, a.seed)?;
    let out = a.out.unwrap_or_else(|| out_dir().join("data.csv"));
    write_dataset(&ds, &out)?;
    println!("{}", out.display());
    Ok(Status::Ok)
}

fn train(a: TrainArgs) -> anyhow::Result<Status> {
    let loss: LossSpec64 = a.loss.parse()?;
    let schedule = CheckpointSchedule::Evenly(a.checkpoints);
    let (trace, mode, eta) = match a.mode {
        ModeArg::Gd => {
            let path = a.data.as_ref().ok_or_else(|| LabError::Usage("--data is required for gd".into()))?;
            let ds = read_dataset::<f64>(path).with_context(|| format!("reading {}", path.display()))?;
            let rule = if loss.is_smooth() { StepRule::FullBatch } else { StepRule::FullBatchNonSmooth { eps: a.eps } };
            let eta = match a.eta {
                Some(e) => e,
                None => default_step_size(&loss, ds.max_norm(), rule)?,
            };
            let mut cfg = OptimConfig::new(Mode::FullBatch, ds.d(), eta, a.iterations).with_checkpoints(schedule);
            if let Some(f) = fault(a.inject_fault) {
                cfg = cfg.with_fault(f);
            }
            (gd_train(&ds, &loss, &cfg)?, "gd", eta)
        }
        ModeArg::Sgd => {
            let spec = a.spec.build()?;
            let eta = match a.eta {
                Some(e) => e,
                None => default_step_size(&loss, spec.b_x, StepRule::SgdUnbounded { eps: a.eps })?,
            };
            let mut cfg = OptimConfig::new(Mode::OnlineSgd, spec.d, eta, a.iterations).with_checkpoints(schedule);
            if let Some(f) = fault(a.inject_fault) {
                cfg = cfg.with_fault(f);
            }
            (sgd_train(&spec, &loss, &cfg, a.seed, SgdOptions::for_accuracy(a.eps))?, "sgd", eta)
        }
    };
    let mut summary = TraceSummary::from_trace(&trace);
    summary.extra.insert("loss".into(), loss.id().into());
    summary.extra.insert("mode".into(), mode.into());
    summary.extra.insert("eta".into(), eta.into());
    let out = a.out.unwrap_or_else(|| out_dir().join("trace.csv"));
    write_trace(&summary, &out, &trace)?;
    println!("{}", out.display());
    Ok(Status::Ok)
}

fn eval(a: EvalArgs) -> anyhow::Result<Status> {
    let loss: LossSpec64 = a.loss.parse()?;
    let ds = read_dataset::<f64>(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let w = if Path::new(&a.weights).is_file() {
        let s: TraceSummary = serde_json::from_str(
            &std::fs::read_to_string(&a.weights).with_context(|| format!("reading {}", a.weights))?,
        )?;
        s.best_w
    } else {
        parse_list(&a.weights)?
    };
    let report = risk_report(&w, &ds, &loss)?;
    print_json(&report, a.out.as_deref())?;
    Ok(Status::Ok)
}

fn softmargin(a: SoftmarginArgs) -> anyhow::Result<Status> {
    let ds = read_dataset::<f64>(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let dir = match &a.direction {
        Some(s) => parse_list(s)?,
        None => {
            let mut e = vec![0.0; ds.d()];
            e[0] = 1.0;
            e
        }
    };
    let gammas = parse_list(&a.gammas)?;
    let mut curve = soft_margin_curve(ds.features(), ds.d(), &dir, &gammas)?;
    if let Some(p) = &a.spec_json {
        let spec: DistributionSpec<f64> =
            serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?;
        if let Some(form) = spec.analytic().soft_margin {
            curve = curve.with_bound(&form);
        }
    }
    let out = a.out.unwrap_or_else(|| out_dir().join("softmargin.csv"));
    write_softmargin(&curve, &out)?;
    println!("{}", out.display());
    Ok(Status::Ok)
}

fn bounds(a: BoundsArgs) -> anyhow::Result<Status> {
    let mut q = match &a.json {
        Some(p) => serde_json::from_str::<BoundQuery>(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => {
            let t = a.theorem.as_deref().ok_or_else(|| LabError::Usage("--theorem or --json is required".into()))?;
            BoundQuery::new(t.parse::<TheoremId>()?, BoundParams::default())
        }
    };
    if let Some(t) = &a.theorem {
        q.theorem = t.parse()?;
    }
    if let Some(l) = &a.loss {
        q.loss = l.parse()?;
    }
    let p = &mut q.params;
    macro_rules! over {
        ($($f:ident),*) => { $( if a.$f.is_some() { p.$f = a.$f; } )* };
    }
    over!(
        opt,
        gamma,
        gamma_star,
        eps,
        eps1,
        eps2,
        n,
        b_x,
        l,
        h,
        v,
        c_m,
        u,
        c0,
        p,
        delta,
        w0_to_v_dist,
        phi,
        eta,
        f_v,
        multiplier
    );
    let report = bound_rhs(&q)?;
    print_json(&report, None)?;
    Ok(Status::Ok)
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<Status> {
    let mut cfg = match (&a.config, &a.id) {
        (Some(p), _) => ExperimentConfig::from_json_file(p)?,
        (None, Some(id)) => ExperimentConfig::defaults(id.parse::<ExperimentId>()?),
        (None, None) => bail!(LabError::Usage("give an experiment id or --config".into())),
    };
    if let (Some(_), Some(id)) = (&a.config, &a.id) {
        let id: ExperimentId = id.parse()?;
        if id != cfg.experiment {
            bail!(LabError::Usage(format!("--config is for {}, not {id}", cfg.experiment)));
        }
    }
    if let Some(r) = a.repeats {
        cfg.repeats = r;
    }
    if let Some(s) = a.base_seed {
        cfg.base_seed = s;
    }
    if a.out_dir.is_some() {
        cfg.out_dir = a.out_dir.clone();
    }
    let s = &mut cfg.sweep;
    if let Some(v) = a.opt_grid {
        s.opt = v;
    }
    if let Some(v) = a.eps_grid {
        s.eps = v;
    }
    if let Some(v) = a.n_grid {
        s.n = v;
    }
    if let Some(v) = a.iterations_grid {
        s.iterations = v;
    }
    if let Some(v) = a.dims_grid {
        s.dims = v;
    }
    if let Some(v) = a.gammas_grid {
        s.gammas = v;
    }
    if let Some(v) = &a.losses {
        s.losses = v.split(';').map(|x| x.trim().to_string()).collect();
    }
    let o = &mut cfg.overrides;
    macro_rules! over {
        ($($f:ident),*) => { $( if a.$f.is_some() { o.$f = a.$f.clone(); } )* };
    }
    over!(
        loss,
        d,
        gamma_star,
        gamma,
        eps,
        n,
        n_test,
        n_val,
        eta,
        max_iterations,
        n_directions,
        multiplier,
        checkpoints_per_doubling
    );
    let art = run_experiment(&cfg)?;
    println!("{}", art.csv.display());
    println!("{}", art.summary_json.display());
    if a.plot {
        let (x, y, g) = match cfg.experiment {
            ExperimentId::SeparableTails => ("inv_eps", "t_target", Some("loss")),
            ExperimentId::SoftMarginCurves => ("gamma", "phi_hat", Some("family")),
            ExperimentId::SgdFastRate => ("t", "suboptimality", None),
            _ => ("opt", "measured_err", None),
        };
        println!("{}", emit_plot(&art.csv, x, y, g, None)?.display());
    }
    for n in &art.output.summary.notes {
        eprintln!("note: {n}");
    }
    if art.output.summary.violations > 0 {
        eprintln!("{} {} row(s)", hgdlab_lab::BOUND_VIOLATION, art.output.summary.violations);
        return Ok(Status::Violation);
    }
    Ok(Status::Ok)
}

fn invariants(a: InvariantArgs) -> anyhow::Result<Status> {
    let mut ok = true;
    for seed in a.seed..a.seed + a.seeds.max(1) {
        let r = check_invariants(seed, fault(a.inject_fault));
        println!("seed {seed}");
        for l in &r.lines {
            println!("  {l}");
        }
        ok &= r.passed();
    }
    Ok(if ok { Status::Ok } else { Status::Violation })
}

fn plot(a: PlotArgs) -> anyhow::Result<Status> {
    let out = emit_plot(&a.csv, &a.x, &a.y, a.group.as_deref(), a.out.as_deref())?;
    println!("{}", out.display());
    Ok(Status::Ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Softmargin(a) => softmargin(a),
        Command::Bounds(a) => bounds(a),
        Command::Experiment(a) => experiment(a),
        Command::Invariants(a) => invariants(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
