use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rmst_core::curve::{export_curve, write_curve_csv};
use rmst_core::dataset::{load_dataset, Dataset, DatasetSchema};
use rmst_core::ipcw::{CensoringModel, Evaluation, IpcwOptions, IpcwVariance, Selection};
use rmst_core::pseudo::{pseudo_values_with, BeyondFollowUp, PseudoOptions};
use rmst_core::report::{analyze, AnalysisOptions, Method};
use rmst_core::sample::split_by_group;
use rmst_core::sim::{
    builtin_scenario, builtin_scenarios, run_power_study_with_progress, PowerStudy, ScenarioConfig,
};
use rmst_core::{ipcw_weights_with, km_fit, Link, Reference};

#[derive(Parser)]
#[command(
    name = "rmst",
    version,
    about = "Restricted mean survival time regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the naive, pseudo-value, IPCW and Cox analyses to a data set.
    Analyze(AnalyzeArgs),
    /// Run the Monte-Carlo type-1 error and power study.
    Simulate(SimulateArgs),
    /// Write the jackknife pseudo-values of a data set.
    Pseudo(PseudoArgs),
    /// Write Kaplan-Meier curves per arm for the original data and the pseudo-values.
    Curves(CurvesArgs),
    /// Write the IPCW weights of a data set.
    Weights(WeightsArgs),
    /// Print the built-in scenario configurations.
    Scenarios(ScenariosArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated data file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// TOML schema naming the time, event, group and covariate columns.
    #[arg(long)]
    schema: PathBuf,
    /// Restriction time.
    #[arg(long)]
    tau: f64,
}

#[derive(Args)]
struct PseudoFlags {
    /// Leave-one-out fits whose follow-up ends before tau: error or carry-forward.
    #[arg(long, default_value = "error")]
    beyond_follow_up: BeyondFollowUp,
}

impl PseudoFlags {
    fn options(&self) -> PseudoOptions {
        PseudoOptions {
            beyond_follow_up: self.beyond_follow_up,
            ..PseudoOptions::default()
        }
    }
}

#[derive(Args)]
struct IpcwFlags {
    /// Weighted subjects: complete-at-tau or event-only.
    #[arg(long, default_value = "complete-at-tau")]
    ipcw_selection: Selection,
    /// Censoring distribution: pooled or per-arm.
    #[arg(long, default_value = "pooled")]
    ipcw_censoring: CensoringModel,
    /// Where the censoring curve is read: right-continuous or left-limit.
    #[arg(long, default_value = "right-continuous")]
    ipcw_evaluation: Evaluation,
    /// Variance: fixed-weights or censoring-adjusted.
    #[arg(long, default_value = "fixed-weights")]
    ipcw_variance: IpcwVariance,
}

impl IpcwFlags {
    fn options(&self) -> IpcwOptions {
        IpcwOptions {
            selection: self.ipcw_selection,
            censoring: self.ipcw_censoring,
            evaluation: self.ipcw_evaluation,
            variance: self.ipcw_variance,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "identity")]
    link: Link,
    /// Comma-separated subset of naive, andersen, tian, cox.
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Naive, Method::Andersen, Method::Tian])]
    methods: Vec<Method>,
    /// Reference distribution of the naive test: normal or student-t.
    #[arg(long, default_value = "normal")]
    reference: Reference,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    pseudo: PseudoFlags,
    #[command(flatten)]
    ipcw: IpcwFlags,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name; repeatable.
    #[arg(long)]
    scenario: Vec<String>,
    /// Run all sixteen built-in scenarios.
    #[arg(long)]
    all: bool,
    /// Scenario TOML file; repeatable.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = [100])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path; the JSON table is written next to it.
    #[arg(long, default_value = "power.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PseudoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pseudo: PseudoFlags,
    /// Output CSV (`id,time,event,group,pseudo_value`); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    pseudo: PseudoFlags,
    /// Directory receiving km_<arm>.csv and pseudo_<arm>.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ipcw: IpcwFlags,
    /// Output CSV (`id,x,selected,weight`); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenariosArgs {
    /// Print only this scenario.
    #[arg(long)]
    name: Option<String>,
    /// Write one TOML file per scenario into this directory instead of printing.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let schema = DatasetSchema::from_path(&args.schema)?;
    Ok(load_dataset(&args.data, &schema)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = output(Some(path))?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Returns `true` if every requested method failed.
fn cmd_analyze(args: AnalyzeArgs) -> Result<bool> {
    let dataset = load(&args.data)?;
    let options = AnalysisOptions {
        tau: args.data.tau,
        link: args.link,
        reference: args.reference,
        alpha: args.alpha,
        methods: args.methods,
        pseudo: args.pseudo.options(),
        ipcw: args.ipcw.options(),
    };
    let report = analyze(&dataset, &options)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        fs::write(path, report.to_json() + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(report.total_failure())
}

fn scenarios_for(args: &SimulateArgs) -> Result<Vec<ScenarioConfig>> {
    let mut out = if args.all {
        builtin_scenarios()
    } else {
        Vec::new()
    };
    for name in &args.scenario {
        match builtin_scenario(name) {
            Some(cfg) => out.push(cfg),
            None => bail!("unknown scenario '{name}' (see `rmst scenarios`)"),
        }
    }
    for path in &args.config {
        out.push(ScenarioConfig::from_path(path)?);
    }
    if out.is_empty() {
        bail!("no scenarios selected: use --scenario, --all or --config");
    }
    Ok(out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let study = PowerStudy {
        scenarios: scenarios_for(&args)?,
        n_grid: args.n,
        reps: args.reps,
        alpha: args.alpha,
        seed: args.seed,
        threads: args.threads,
    };
    let table = run_power_study_with_progress(&study, &|msg| eprintln!("{msg}"))?;
    write_file(&args.out, |w| Ok(table.write_csv(w)?))?;
    let json = args.out.with_extension("json");
    fs::write(&json, table.to_json() + "\n")
        .with_context(|| format!("cannot write {}", json.display()))?;
    eprintln!("wrote {} and {}", args.out.display(), json.display());
    Ok(())
}

fn cmd_pseudo(args: PseudoArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let pv = pseudo_values_with(&dataset.samples, args.data.tau, args.pseudo.options())?;
    let mut w = output(args.out.as_deref())?;
    pv.write_csv(&dataset.samples, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let pv = pseudo_values_with(&dataset.samples, args.data.tau, args.pseudo.options())?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let (treated, control) = split_by_group(&dataset.samples);
    for (arm, subset) in [("treatment", treated), ("control", control)] {
        let km = km_fit(&subset)?;
        let values: Vec<f64> = dataset
            .samples
            .iter()
            .zip(&pv.values)
            .filter(|(s, _)| s.group.as_str() == arm)
            .map(|(_, &v)| v)
            .collect();
        let pseudo = rmst_core::pseudo::PseudoValueSet {
            values,
            tau: pv.tau,
            pooled_rmst: pv.pooled_rmst,
        }
        .survival_curve();
        for (kind, curve) in [("km", &km), ("pseudo", &pseudo)] {
            let path = args.out_dir.join(format!("{kind}_{arm}.csv"));
            write_file(&path, |w| Ok(write_curve_csv(&export_curve(curve), w)?))?;
        }
        println!(
            "{arm}: max |S_pseudo - S_km| = {:.4}",
            km.max_abs_difference(&pseudo)
        );
    }
    Ok(())
}

fn cmd_weights(args: WeightsArgs) -> Result<()> {
    let dataset = load(&args.data)?;
    let weights = ipcw_weights_with(&dataset.samples, args.data.tau, args.ipcw.options())?;
    let mut w = output(args.out.as_deref())?;
    weights.write_csv(&dataset.samples, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_scenarios(args: ScenariosArgs) -> Result<()> {
    let all = match &args.name {
        Some(name) => {
            vec![builtin_scenario(name).with_context(|| format!("unknown scenario '{name}'"))?]
        }
        None => builtin_scenarios(),
    };
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for cfg in &all {
                let path = dir.join(format!("{}.toml", cfg.name));
                fs::write(&path, cfg.to_toml())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        None => {
            let mut out = io::stdout().lock();
            for (i, cfg) in all.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                writeln!(out, "# {}", cfg.name)?;
                write!(out, "{}", cfg.to_toml())?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a).map(|()| false),
        Command::Pseudo(a) => cmd_pseudo(a).map(|()| false),
        Command::Curves(a) => cmd_curves(a).map(|()| false),
        Command::Weights(a) => cmd_weights(a).map(|()| false),
        Command::Scenarios(a) => cmd_scenarios(a).map(|()| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("error: every requested method failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
