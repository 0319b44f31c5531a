mod render;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kan_hwcost::counted::{reconcile_with, CountedNetwork, FaultSite, ReconcileOptions};
use kan_hwcost::infer::EvalOptions;
use kan_hwcost::iso::{self, Template};
use kan_hwcost::netspec::QuantScheme;
use kan_hwcost::{
    cost_report, parse_spec, BasisMode, EdgeFamily, Metric, Network, NetworkSpec, NetworkWeights, QuantConfig,
};

/// Hardware inference cost of KAN and MLP networks.
#[derive(Parser, Debug)]
#[command(name = "kan-hwcost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-layer and total RM, BOP and NABS for a network description.
    Analyze {
        spec: PathBuf,
        #[arg(long, default_value = "lut")]
        mode: BasisMode,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        quant: QuantArgs,
    },
    /// Run a forward pass.
    Infer {
        spec: PathBuf,
        /// Comma-separated input values.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        /// Seed for random weights when no weights file is given.
        #[arg(long, default_value_t = 0, conflicts_with = "weights")]
        seed: u64,
        /// Weights JSON file.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value = "lut")]
        mode: BasisMode,
        /// Also report the operations performed.
        #[arg(long)]
        counted: bool,
    },
    /// Check instrumented operation counts against the closed-form model.
    /// Exits 1 on any mismatch.
    Validate {
        /// Network description; defaults to the [3,16,16,2] cubic B-spline KAN.
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "lut")]
        mode: BasisMode,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: Option<FaultSite>,
    },
    /// Costs over a range of widths, written to sweep.csv.
    Sweep {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 4)]
        x_min: usize,
        #[arg(long, default_value_t = 64)]
        x_max: usize,
    },
    /// Widest networks within an MLP baseline's budget, written to iso.csv.
    Iso {
        #[command(flatten)]
        design: DesignArgs,
        /// Baseline network: a spec file or comma-separated MLP widths.
        #[arg(long, default_value = "3,64,64,2")]
        baseline: String,
        /// Metrics to solve, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "rm,bop,nabs")]
        metrics: Vec<Metric>,
    },
    /// Print the per-edge and per-layer formulas with values substituted.
    Formulas {
        /// Family, optionally with parameters: `bspline`, `bspline:k=3,g=5`.
        family: String,
        /// Extra family parameter, e.g. `--param k=4`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long, default_value_t = 3)]
        n_in: usize,
        #[arg(long, default_value_t = 1)]
        n_out: usize,
        #[arg(long, default_value = "lut")]
        mode: BasisMode,
        #[command(flatten)]
        quant: QuantArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args, Debug)]
struct QuantArgs {
    /// Set every operand width to this many bits.
    #[arg(long)]
    bits: Option<u32>,
    /// Weight quantization: uniform, pot or apot:N.
    #[arg(long)]
    scheme: Option<QuantScheme>,
}

impl QuantArgs {
    fn apply(&self, mut quant: QuantConfig) -> Result<QuantConfig> {
        if let Some(bits) = self.bits {
            quant = QuantConfig::uniform_bits(bits).with_scheme(quant.scheme);
        }
        if let Some(scheme) = self.scheme {
            quant = quant.with_scheme(scheme);
        }
        quant.validate()?;
        Ok(quant)
    }
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long, default_value = "3,X,X,2")]
    template: Template,
    /// KAN families, `;`-separated shorthands. Defaults to the four
    /// reference families.
    #[arg(long, value_delimiter = ';')]
    families: Vec<EdgeFamily>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    quant: QuantArgs,
}

impl DesignArgs {
    fn families(&self) -> Vec<EdgeFamily> {
        if self.families.is_empty() {
            iso::reference_families()
        } else {
            self.families.clone()
        }
    }
}

enum Outcome {
    Ok,
    Mismatch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("KAN_HWCOST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("KAN_HWCOST_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load_spec(path: &Path) -> Result<(NetworkSpec, QuantConfig)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spec(&text).with_context(|| format!("in {}", path.display()))
}

fn run(cli: Cli) -> Result<Outcome> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze {
            spec,
            mode,
            format,
            quant,
        } => {
            let (spec, q) = load_spec(&spec)?;
            let report = cost_report(&spec, &quant.apply(q)?, mode)?;
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
                Format::Csv => render::report_csv(&report, &mut out)?,
                Format::Table => render::report_table(&report, &mut out)?,
            }
        }
        Command::Infer {
            spec,
            input,
            seed,
            weights,
            mode,
            counted,
        } => {
            let (spec, _) = load_spec(&spec)?;
            let x = input
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad input value `{v}`"))
                })
                .collect::<Result<Vec<_>>>()?;
            let weights = match weights {
                Some(path) => NetworkWeights::from_json(
                    &fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                )
                .with_context(|| format!("in {}", path.display()))?,
                None => NetworkWeights::random(&spec, seed),
            };
            let options = EvalOptions::new(mode);
            let body = if counted {
                let pass = CountedNetwork::new(&spec, &weights, options)?.forward(&x)?;
                serde_json::json!({
                    "output": pass.output,
                    "ops": pass.total(),
                    "layers": pass.layers.iter().map(|l| l.total()).collect::<Vec<_>>(),
                })
            } else {
                serde_json::json!({ "output": Network::new(&spec, &weights, options)?.forward(&x)? })
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&body)?)?;
        }
        Command::Validate {
            spec,
            trials,
            seed,
            mode,
            report,
            inject_fault,
        } => {
            let (spec, quant) = match spec {
                Some(p) => load_spec(&p)?,
                None => (
                    NetworkSpec::uniform("bspline-3-16-16-2", &[3, 16, 16, 2], &EdgeFamily::bspline(3, 5))?,
                    QuantConfig::default(),
                ),
            };
            let mut opts = ReconcileOptions::new(mode, trials as usize, seed);
            opts.fault = inject_fault;
            let r = reconcile_with(&spec, &quant, opts)?;
            let json = serde_json::to_string_pretty(&r)?;
            match report {
                Some(path) => fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(out, "{json}")?,
            }
            if !r.passed {
                if let Some(m) = r.first_divergence() {
                    eprintln!(
                        "mismatch: {} mismatches; first at trial {}, layer {}, {}: {:?} expected {}, counted {}",
                        r.mismatch_count,
                        m.trial,
                        m.layer,
                        render::site(&m.site),
                        m.quantity,
                        m.expected,
                        m.counted
                    );
                }
                return Ok(Outcome::Mismatch);
            }
            eprintln!("ok: {} trials, counts match the closed-form model", r.trials);
        }
        Command::Sweep { design, x_min, x_max } => {
            let quant = design.quant.apply(QuantConfig::default())?;
            let rows = iso::sweep_widths(&design.template, (x_min, x_max), &quant, &design.families())?;
            let path = design.out.join("sweep.csv");
            write_file(&path, |w| Ok(iso::write_sweep_csv(&rows, w)?))?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
        }
        Command::Iso {
            design,
            baseline,
            metrics,
        } => {
            let quant = design.quant.apply(QuantConfig::default())?;
            let baseline = load_baseline(&baseline)?;
            if metrics.is_empty() {
                bail!("no metrics selected");
            }
            let table = iso::iso_table(&quant, &baseline, &design.template, &design.families(), &metrics)?;
            let path = design.out.join("iso.csv");
            write_file(&path, |w| Ok(iso::write_iso_csv(&table, w)?))?;
            render::iso_summary(&table, &mut out)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Formulas {
            family,
            params,
            n_in,
            n_out,
            mode,
            quant,
        } => {
            let shorthand = match (family.contains(':'), params.is_empty()) {
                (_, true) => family,
                (true, false) => format!("{family},{}", params.join(",")),
                (false, false) => format!("{family}:{}", params.join(",")),
            };
            let family: EdgeFamily = shorthand.parse()?;
            if n_in == 0 || n_out == 0 {
                bail!("--n-in and --n-out must be >= 1");
            }
            render::formulas(
                &family,
                n_in,
                n_out,
                &quant.apply(QuantConfig::default())?,
                mode,
                &mut out,
            )?;
        }
    }
    Ok(Outcome::Ok)
}

fn load_baseline(arg: &str) -> Result<NetworkSpec> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(load_spec(path)?.0);
    }
    let widths = arg
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("baseline `{arg}` is neither a file nor comma-separated widths"))?;
    let name = format!(
        "mlp-{}",
        widths.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
    );
    Ok(NetworkSpec::uniform(name, &widths, &EdgeFamily::mlp())?)
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut file = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    body(&mut file)?;
    file.flush()?;
    Ok(())
}
