use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use pvtrace::pipeline::{self, Params, PipelineConfig};
use pvtrace::Error;

/// Vectorize a line drawing into centerline strokes.
///
/// Every option may also be given in a `--config` file as `key = value`
/// lines, where `key` is the long flag name without dashes. Flags on the
/// command line take precedence over the file.
#[derive(Debug, Parser)]
#[command(name = "pvtrace", version, args_override_self = true)]
struct Cli {
    /// Input raster (PNG or PGM).
    input: PathBuf,

    /// Output SVG. Defaults to the input path with an `.svg` extension.
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Read options from a key=value file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Dark-pixel threshold as a fraction of the maximum intensity.
    #[arg(long, default_value_t = 0.35)]
    threshold: f64,

    /// Smoothness weight of the field energy.
    #[arg(long, default_value_t = 50.0)]
    lambda: f64,

    /// Weight pulling one frame direction toward the image gradient.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,

    /// Weight of the centering term in the embedding.
    #[arg(long, default_value_t = 0.07)]
    eta: f64,

    /// Loops enclosing at most this many white pixels are contracted.
    #[arg(long, default_value_t = 4)]
    nhole: usize,

    /// Tracing step in pixels.
    #[arg(long, default_value_t = 0.1)]
    step: f64,

    /// Number of correction pairs kept by L-BFGS.
    #[arg(long, default_value_t = 6)]
    history: usize,

    /// Douglas-Peucker tolerance in pixels; 0 keeps every point.
    #[arg(long, default_value_t = 0.75)]
    simplify_tol: f64,

    /// Edit mask of the input's size: black removes ink, white adds it, gray
    /// leaves the pixel alone.
    #[arg(long)]
    mask: Option<PathBuf>,

    /// Stretch the intensity histogram before thresholding.
    #[arg(long)]
    equalize: bool,

    /// Write the relaxed field as CSV.
    #[arg(long)]
    dump_field: Option<PathBuf>,

    /// Write the traced curves as SVG.
    #[arg(long)]
    dump_curves: Option<PathBuf>,

    /// Write the topology graph as JSON.
    #[arg(long)]
    dump_graph: Option<PathBuf>,

    /// Append a statistics row to this CSV file.
    #[arg(long)]
    stats_csv: Option<PathBuf>,
}

impl Cli {
    fn into_config(self) -> PipelineConfig {
        let mut params = Params {
            threshold: self.threshold,
            equalize: self.equalize,
            ..Params::default()
        };
        params.solver.lambda = self.lambda;
        params.solver.mu = self.mu;
        params.solver.lbfgs_history = self.history;
        params.trace.step = self.step;
        params.simplify.n_hole = self.nhole;
        params.embed.eta = self.eta;
        params.smooth.tolerance = self.simplify_tol;
        PipelineConfig {
            output: self.output.unwrap_or_else(|| self.input.with_extension("svg")),
            input: self.input,
            mask: self.mask,
            params,
            dump_field: self.dump_field,
            dump_curves: self.dump_curves,
            dump_graph: self.dump_graph,
            stats_csv: self.stats_csv,
        }
    }
}

/// Turns `key = value` lines into flags. Blank lines and `#` comments are
/// skipped; boolean keys take `true` or `false`.
fn config_args(text: &str) -> Result<Vec<OsString>, String> {
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        if key == "config" || key == "input" {
            return Err(format!("line {}: `{key}` cannot be set from a config file", n + 1));
        }
        if key == "equalize" {
            match value {
                "true" => args.push("--equalize".into()),
                "false" => {}
                _ => return Err(format!("line {}: equalize must be true or false", n + 1)),
            }
            continue;
        }
        args.push(format!("--{key}").into());
        args.push(value.into());
    }
    Ok(args)
}

fn parse(argv: Vec<OsString>) -> Result<Cli, ExitCode> {
    let fail = |e: clap::Error| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    };
    let cli = Cli::try_parse_from(&argv).map_err(fail)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("pvtrace: config: cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let extra = config_args(&text).map_err(|e| {
        eprintln!("pvtrace: config: {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    let mut merged = vec![argv[0].clone()];
    merged.extend(extra);
    merged.extend(argv.into_iter().skip(1));
    Cli::try_parse_from(merged).map_err(fail)
}

fn report(input: &Path, out: &pipeline::Output) {
    println!("{}", input.display());
    print!("{}", out.stats.summary());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let config = cli.into_config();
    if let Err(e) = config.params.validate() {
        eprintln!("pvtrace: {e}");
        return ExitCode::from(1);
    }
    match pipeline::run(&config) {
        Ok(out) => {
            report(&config.input, &out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::debug!("failed in stage {}", e.stage());
            eprintln!("pvtrace: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 1,
                _ => 2,
            })
        }
    }
}
