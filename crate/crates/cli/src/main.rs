use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use thermometry::counting::F21Series;
use thermometry::demux::BetaExponent;
use thermometry::estimation::MuConvention;
use thermometry::sweep::{
    evaluate_point, figure, run_sweep, sweep_metadata, Axis, Conventions, Figure, FigureOptions, Fixed,
    Metadata, Output, OutputFormat, Quantity, SweepParam, SweepSpec, Table, DEFAULT_TAIL_TOL,
};
use thermometry::{Error, GammaConvention, SourcePair};

/// Precision limits for thermometry of two diffraction-blurred thermal sources.
#[derive(Parser)]
#[command(name = "thermometry", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regenerate the data behind one of the figures.
    Figure(FigureArgs),
    /// Sweep one quantity over one or two parameter axes.
    Sweep(SweepArgs),
    /// Evaluate every quantity at a single point and print JSON.
    Eval(EvalArgs),
    /// Check the closed forms against the Fock-space oracle.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MuArg {
    ResourceConsistent,
    Unsplit,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaArg {
    Negative,
    Positive,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesArg {
    Gauss,
    Exponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum GammaArg {
    Thermal,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Convention switches. Unset flags keep the value from the config file, or
/// the physics-consistent default.
#[derive(Args)]
struct ConventionArgs {
    #[arg(long, value_enum)]
    mu_convention: Option<MuArg>,
    #[arg(long, value_enum)]
    beta_exponent: Option<BetaArg>,
    #[arg(long, value_enum)]
    f21_series: Option<SeriesArg>,
    #[arg(long, value_enum)]
    gamma_convention: Option<GammaArg>,
}

impl ConventionArgs {
    fn apply(&self, mut c: Conventions) -> Conventions {
        if let Some(m) = self.mu_convention {
            c.mu = match m {
                MuArg::ResourceConsistent => MuConvention::ResourceConsistent,
                MuArg::Unsplit => MuConvention::Unsplit,
            };
        }
        if let Some(b) = self.beta_exponent {
            c.beta_exponent = match b {
                BetaArg::Negative => BetaExponent::Negative,
                BetaArg::Positive => BetaExponent::Positive,
            };
        }
        if let Some(f) = self.f21_series {
            c.f21_series = match f {
                SeriesArg::Gauss => F21Series::Gauss,
                SeriesArg::Exponential => F21Series::Exponential,
            };
        }
        if let Some(g) = self.gamma_convention {
            c.gamma = match g {
                GammaArg::Thermal => GammaConvention::Thermal,
                GammaArg::Literal => GammaConvention::Literal,
            };
        }
        c
    }
}

#[derive(Args)]
struct FigureArgs {
    /// fig2 .. fig8
    #[arg(value_parser = parse_figure)]
    figure: Figure,
    /// Grid points along s (per axis for fig4, capped at 60).
    #[arg(long, default_value_t = 101)]
    steps: usize,
    /// Temperature for fig2 and fig3.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Highest HG mode index counted (fig7); full basis when omitted.
    #[arg(long)]
    hg_modes: Option<usize>,
    /// Write the table here plus a `<output>.meta.json` sidecar instead of printing it.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[command(flatten)]
    conventions: ConventionArgs,
}

/// Geometry and source parameters shared by `sweep` and `eval`.
#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    t2: Option<f64>,
    /// Sets both temperatures.
    #[arg(long, conflicts_with_all = ["t1", "t2"])]
    t: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// PSF overlap.
    #[arg(long)]
    s: Option<f64>,
    /// Source separation; with `--varpi` determines s.
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    varpi: Option<f64>,
}

impl PointArgs {
    fn apply(&self, mut f: Fixed) -> Fixed {
        if let Some(t) = self.t {
            f.t1 = t;
            f.t2 = t;
        }
        f.t1 = self.t1.unwrap_or(f.t1);
        f.t2 = self.t2.unwrap_or(f.t2);
        f.omega = self.omega.unwrap_or(f.omega);
        f.eta = self.eta.unwrap_or(f.eta);
        f.varpi = self.varpi.unwrap_or(f.varpi);
        if self.s.is_some() {
            f.s = self.s;
        }
        if self.d.is_some() {
            f.d = self.d;
        }
        f
    }
}

#[derive(Args)]
struct SweepArgs {
    /// TOML file whose keys mirror the sweep specification.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_quantity)]
    quantity: Option<Quantity>,
    /// `param:start:stop:steps`, e.g. `s:0:1:101`.
    #[arg(long, value_parser = parse_axis)]
    axis: Option<Axis>,
    /// Optional second axis in the same form.
    #[arg(long, value_parser = parse_axis)]
    axis2: Option<Axis>,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long)]
    hg_modes: Option<usize>,
    #[arg(long)]
    tail_tol: Option<f64>,
    /// Number of repetitions in the bounds.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    conventions: ConventionArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML file with flat keys t1, t2, omega, eta, s or d, varpi.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long)]
    hg_modes: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    tail_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[command(flatten)]
    conventions: ConventionArgs,
}

#[derive(Args)]
struct SelftestArgs {
    /// Print the checks as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_quantity(s: &str) -> Result<Quantity, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [param, start, stop, steps] = parts[..] else {
        return Err(format!("expected param:start:stop:steps, got {s:?}"));
    };
    let param: SweepParam = param.parse().map_err(|e: Error| e.to_string())?;
    let num = |x: &str| x.parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    let steps = steps.parse::<usize>().map_err(|e| format!("{steps:?}: {e}"))?;
    Ok(Axis::new(param, num(start)?, num(stop)?, steps))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(table: &Table, format: OutputFormat, metadata: &Metadata, output: Option<&Path>) -> Result<()> {
    let body = table.render(format);
    match output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
            let meta = sidecar_path(path);
            fs::write(&meta, to_json(metadata)?).with_context(|| format!("writing {}", meta.display()))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn run_figure(args: FigureArgs) -> Result<()> {
    let opts = FigureOptions {
        steps: args.steps,
        temperature: args.temperature,
        conventions: args.conventions.apply(Conventions::default()),
        hg_modes: args.hg_modes,
    };
    let data = figure(args.figure, &opts)?;
    emit(&data.table, args.format.into(), &data.metadata, args.output.as_deref())
}

fn build_sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let mut spec = match &args.config {
        Some(path) => read_toml::<SweepSpec>(path)?,
        None => {
            let quantity = args.quantity.ok_or_else(|| usage("--quantity is required without --config"))?;
            let axis = args.axis.ok_or_else(|| usage("--axis is required without --config"))?;
            SweepSpec::new(quantity, axis, Fixed::default())
        }
    };
    if let Some(q) = args.quantity {
        spec.quantity = q;
    }
    if let Some(a) = args.axis {
        spec.axis = a;
    }
    if args.axis2.is_some() {
        spec.axis2 = args.axis2;
    }
    spec.fixed = args.point.apply(spec.fixed);
    if args.hg_modes.is_some() {
        spec.hg_modes = args.hg_modes;
    }
    spec.tail_tol = args.tail_tol.unwrap_or(spec.tail_tol);
    spec.nu = args.nu.unwrap_or(spec.nu);
    spec.conventions = args.conventions.apply(spec.conventions);
    if let Some(path) = &args.output {
        spec.output = Some(Output {
            path: path.display().to_string(),
            format: args.format.map_or(OutputFormat::Csv, Into::into),
        });
    } else if let (Some(out), Some(f)) = (spec.output.as_mut(), args.format) {
        out.format = f.into();
    }
    Ok(spec)
}

fn run_sweep_command(args: SweepArgs) -> Result<()> {
    let spec = build_sweep_spec(&args)?;
    spec.validate()?;
    let table = run_sweep(&spec)?;
    let metadata = sweep_metadata(&spec, &table);
    let format = spec
        .output
        .as_ref()
        .map(|o| o.format)
        .or(args.format.map(Into::into))
        .unwrap_or(OutputFormat::Csv);
    let path = spec.output.as_ref().map(|o| PathBuf::from(&o.path));
    emit(&table, format, &metadata, path.as_deref())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let fixed = match &args.config {
        Some(path) => read_toml::<Fixed>(path)?,
        None => Fixed::default(),
    };
    let fixed = args.point.apply(fixed);
    let conventions = args.conventions.apply(Conventions::default());
    let geom = fixed
        .geometry()?
        .ok_or_else(|| usage("the geometry is unset: give s or d"))?;
    let pair = SourcePair::with_convention(fixed.t1, fixed.t2, fixed.omega, fixed.eta, conventions.gamma)?;
    let report = evaluate_point(&pair, &geom, &conventions, args.hg_modes, args.tail_tol, args.nu)?;
    print!("{}", to_json(&report)?);
    Ok(())
}

fn run_selftest(args: SelftestArgs) -> Result<bool> {
    let checks = thermometry::selftest::run()?;
    if args.json {
        print!("{}", to_json(&checks)?);
    } else {
        for c in &checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            println!("{tag} {}: {:.3e} (tol {:.0e})", c.name, c.error, c.tolerance);
        }
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Usage(_) | Error::Domain(_) | Error::Range(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Figure(a) => run_figure(a).map(|()| true),
        Command::Sweep(a) => run_sweep_command(a).map(|()| true),
        Command::Eval(a) => run_eval(a).map(|()| true),
        Command::Selftest(a) => run_selftest(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
