use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rabi_lattice::io;
use rabi_lattice::plot::emit_plots;
use rabi_lattice::scenario::{
    self, builtin, compare_named, load_config, run_all, BandsConfig, DynamicsConfig, Model, Outcome,
    QubitSpec, Scenario,
};
use rabi_lattice::Error;

#[derive(Parser)]
#[command(name = "rabi-lattice", version, about = "Quantum Rabi model simulated with a cold atom in an optical lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch band structure of the lattice.
    Bands(BandsArgs),
    /// Time evolution under a single model.
    Evolve(EvolveArgs),
    /// Deviation metrics between two series CSV files.
    Compare(CompareArgs),
    /// Run a builtin scenario or a JSON config.
    Scenario(ScenarioArgs),
    /// SVG line charts, one per column, from CSV files.
    Plot(PlotArgs),
}

#[derive(Args)]
struct BandsArgs {
    /// Lattice depth in recoil energies.
    #[arg(long)]
    v: f64,
    #[arg(long, default_value_t = 4)]
    n_bands: usize,
    #[arg(long, default_value_t = 401)]
    q_resolution: usize,
    #[arg(long, default_value_t = rabi_lattice::bands::DEFAULT_N_MAX)]
    n_max: usize,
    #[arg(long, default_value = "bands")]
    name: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

/// Overrides shared by `evolve` and `scenario`; names mirror config keys.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    band_points: Option<usize>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    periods: Option<f64>,
    #[arg(long)]
    n_records: Option<usize>,
    #[arg(long)]
    breakdown_threshold: Option<f64>,
    #[arg(long)]
    energy_tolerance: Option<f64>,
}

impl Overrides {
    fn apply(&self, c: &mut DynamicsConfig) {
        if self.dt.is_some() {
            c.dt = self.dt;
        }
        if self.n_points.is_some() {
            c.n_points = self.n_points;
        }
        if self.band_points.is_some() {
            c.band_points = self.band_points;
        }
        if let Some(n) = self.cutoff {
            c.cutoff = n;
        }
        if self.t_max.is_some() {
            c.t_max = self.t_max;
        }
        if self.periods.is_some() {
            c.periods = self.periods;
            c.t_max = self.t_max;
        }
        if self.n_records.is_some() {
            c.n_records = self.n_records;
        }
        if let Some(t) = self.breakdown_threshold {
            c.breakdown_threshold = t;
        }
        if let Some(t) = self.energy_tolerance {
            c.energy_tolerance = t;
        }
    }
}

#[derive(Args)]
struct EvolveArgs {
    #[arg(long)]
    model: Model,
    #[arg(long)]
    g_over_w0: Option<f64>,
    #[arg(long)]
    wq_over_w0: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    /// band0, band1 or equal.
    #[arg(long, default_value = "band1")]
    qubit: String,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long, default_value = "evolve")]
    name: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = scenario::DEFAULT_BREAKDOWN_THRESHOLD)]
    threshold: f64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Builtin name (fig1, fig2, fig2-ddsc, fig2-dsc, fig3, fig3-ddsc, fig3-dsc, fig4, all).
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    name: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Skip the dt-halving, grid-doubling and cutoff reruns.
    #[arg(long)]
    no_convergence: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Defaults to the directory of each input.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn report_error(e: &Error) {
    let json = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{json}");
}

/// Writes a stdout line, ignoring a reader that went away (`| head`).
fn out(line: impl std::fmt::Display) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        out(f.display());
    }
}

fn bands(args: BandsArgs) -> Result<(), Error> {
    let config = BandsConfig {
        name: args.name,
        v: args.v,
        n_bands: args.n_bands,
        q_resolution: args.q_resolution,
        n_max: args.n_max,
    };
    let run = scenario::run_bands(&config, Some(&args.out_dir))?;
    print_files(&run.files);
    Ok(())
}

fn evolve(args: EvolveArgs) -> Result<bool, Error> {
    let mut c = DynamicsConfig::new(&args.name, 1.0, 0.0);
    c.g_over_w0 = args.g_over_w0;
    c.wq_over_w0 = args.wq_over_w0;
    c.v = args.v;
    c.w0 = args.w0;
    c.models = vec![args.model];
    c.qubit = QubitSpec::Named(args.qubit);
    c.snapshot_every = args.snapshot_every;
    args.overrides.apply(&mut c);
    let run = scenario::run_dynamics(&c, Some(&args.out_dir))?;
    for f in &run.failures {
        eprintln!("{}", serde_json::json!({ "error": f.kind, "model": f.model, "message": f.message }));
    }
    print_files(&run.files);
    Ok(run.failures.is_empty())
}

fn compare(args: CompareArgs) -> Result<(), Error> {
    let a = io::load_series_csv(&args.a)?;
    let b = io::load_series_csv(&args.b)?;
    let name = |p: &Path| p.display().to_string();
    let report = compare_named(&name(&args.a), &a, &name(&args.b), &b, args.threshold)?;
    if let Some(out) = &args.out {
        io::save_json(out, &report)?;
    }
    out(serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_scenarios(args: ScenarioArgs) -> Result<bool, Error> {
    let mut list: Vec<Scenario> = match (&args.name, &args.config) {
        (Some(name), None) => builtin(name)?,
        (None, Some(path)) => load_config(path)?,
        _ => return Err(Error::Usage("give a scenario name or --config".into())),
    };
    for s in &mut list {
        if let Scenario::Dynamics(c) = s {
            args.overrides.apply(c);
            if args.no_convergence {
                c.convergence = false;
            }
        }
    }
    let mut ok = true;
    for (s, result) in list.iter().zip(run_all(&list, Some(&args.out_dir))) {
        match result {
            Ok(outcome) => {
                if let Outcome::Dynamics(run) = &outcome {
                    for f in &run.failures {
                        eprintln!(
                            "{}",
                            serde_json::json!({ "error": f.kind, "scenario": s.name(), "model": f.model, "message": f.message })
                        );
                    }
                }
                ok &= outcome.succeeded();
                print_files(outcome.files());
            }
            Err(e) => {
                ok = false;
                eprintln!(
                    "{}",
                    serde_json::json!({ "error": e.kind(), "scenario": s.name(), "message": e.to_string() })
                );
            }
        }
    }
    Ok(ok)
}

fn plot(args: PlotArgs) -> Result<(), Error> {
    for path in &args.csv {
        let table = io::read_table(std::fs::File::open(path)?)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "plot".into());
        let dir = match &args.out_dir {
            Some(d) => d.clone(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        std::fs::create_dir_all(&dir)?;
        for (column, svg) in emit_plots(&table, &stem) {
            let path_out = dir.join(format!("{stem}_{column}.svg"));
            std::fs::write(&path_out, svg)?;
            out(path_out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let msg = e.render().to_string();
            report_error(&Error::Usage(msg.trim().to_string()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Bands(a) => bands(a).map(|()| true),
        Command::Evolve(a) => evolve(a),
        Command::Compare(a) => compare(a).map(|()| true),
        Command::Scenario(a) => run_scenarios(a),
        Command::Plot(a) => plot(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}
