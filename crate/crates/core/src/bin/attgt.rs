//! Batch front end: estimate, diagnose, impute, contrast, and simulate
//! staggered-adoption panels from JSON run configurations, emitting
//! plot-ready TSV tables plus a manifest that pins every run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use attgt::aggregate::{
    aggregate_event, aggregate_group, aggregate_overall, contrast_ddd, AggregationResult,
    DddMode, DddResult,
};
use attgt::bootstrap::{attach_bands, multiplier_bootstrap, BootstrapConfig};
use attgt::design::{ControlMode, DesignConfig};
use attgt::dgp::{generate, DgpSpec};
use attgt::diagnostics::{bacon_decompose, twfe_estimate, twfe_weights};
use attgt::error::{Error, Result};
use attgt::gt::att_gt_all;
use attgt::impute::{fit_untreated_twfe, impute_att};
use attgt::panel::{
    aggregate_cells, binarize_covariates, load_csv, write_csv, CsvSchema, PanelDataset,
};
use attgt::report::{
    aggregation_tsv, att_gt_tsv, bacon_tsv, cell_weights_tsv, ddd_tsv, sha256_file,
    weight_histogram_tsv, RunManifest,
};

#[derive(Parser)]
#[command(name = "attgt", version, about = "Staggered difference-in-differences toolkit")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate group-time effects and aggregate them with bands
    Estimate(RunArgs),
    /// Pooled two-way fixed-effects benchmark, weights, decomposition
    Diagnose(RunArgs),
    /// Imputation cross-check with pre-trend placebos
    Impute(RunArgs),
    /// Difference two completed estimate runs label by label
    Contrast(ContrastArgs),
    /// Generate a synthetic panel with a known effect surface
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Control pool override
    #[arg(long, value_enum)]
    control: Option<ControlArg>,
    /// Adjust control outcome changes for covariates
    #[arg(long)]
    conditional: bool,
    /// Bootstrap draw count override
    #[arg(long)]
    draws: Option<usize>,
    /// Bootstrap seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ContrastArgs {
    /// Completed estimate run directory A
    run_a: PathBuf,
    /// Completed estimate run directory B
    run_b: PathBuf,
    /// JSON contrast configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bootstrap draw count override
    #[arg(long)]
    draws: Option<usize>,
    /// Bootstrap seed override
    #[arg(long)]
    seed: Option<u64>,
    /// How to attach inference to the differences
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON generator specification
    #[arg(long)]
    config: PathBuf,
    /// Generator seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControlArg {
    Never,
    Notyet,
    Both,
}

impl From<ControlArg> for ControlMode {
    fn from(arg: ControlArg) -> Self {
        match arg {
            ControlArg::Never => ControlMode::NeverTreated,
            ControlArg::Notyet => ControlMode::NotYetTreated,
            ControlArg::Both => ControlMode::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Shared,
    Independent,
}

impl From<ModeArg> for DddMode {
    fn from(arg: ModeArg) -> Self {
        match arg {
            ModeArg::Shared => DddMode::SharedDraws,
            ModeArg::Independent => DddMode::Independent,
        }
    }
}

/// One JSON document per run: where the data lives, how to read it, and
/// the full estimation design. Flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    input: PathBuf,
    #[serde(default)]
    schema: CsvSchema,
    #[serde(default)]
    design: DesignConfig,
    /// Split listed covariates at their weighted median before use.
    #[serde(default)]
    binarize: bool,
    #[serde(default = "default_out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
struct ContrastConfig {
    bootstrap: BootstrapConfig,
    mode: DddMode,
    out: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Impute(args) => cmd_impute(args),
        Command::Contrast(args) => cmd_contrast(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 config, 3 data, 4 estimation, 5 incompatible runs.
fn exit_code(e: &Error) -> u8 {
    e.category()
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read {what} {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("invalid {what} {}: {e}", path.display())))
}

fn load_dataset(cfg: &RunConfig) -> Result<PanelDataset> {
    let records = load_csv(&cfg.input, &cfg.schema)?;
    let ds = aggregate_cells(&records)?;
    if cfg.binarize && !cfg.design.covariate_names.is_empty() {
        return binarize_covariates(&ds, &cfg.design.covariate_names);
    }
    Ok(ds)
}

fn resolve_run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = read_json(&args.config, "config")?;
    if let Some(control) = args.control {
        cfg.design.control_mode = control.into();
    }
    if args.conditional {
        cfg.design.conditional = true;
    }
    if let Some(draws) = args.draws {
        cfg.design.bootstrap.n_draws = draws;
    }
    if let Some(seed) = args.seed {
        cfg.design.bootstrap.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn start_manifest(command: &str, cfg: &RunConfig, seed: u64) -> Result<RunManifest> {
    let echo = serde_json::to_value(cfg)?;
    let inputs = BTreeMap::from([(
        cfg.input.display().to_string(),
        sha256_file(&cfg.input)?,
    )]);
    Ok(RunManifest::new(command, echo, inputs, seed))
}

fn write_output(
    dir: &Path,
    name: &str,
    text: String,
    manifest: &mut RunManifest,
) -> Result<()> {
    fs::write(dir.join(name), text)?;
    manifest.record_output(name);
    Ok(())
}

fn write_json_output(
    dir: &Path,
    name: &str,
    value: &serde_json::Value,
    manifest: &mut RunManifest,
) -> Result<()> {
    write_output(dir, name, serde_json::to_string_pretty(value)?, manifest)
}

fn influence_store(agg: &AggregationResult) -> BTreeMap<String, BTreeMap<String, f64>> {
    agg.influence_set().into_iter().collect()
}

fn cmd_estimate(args: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let mut manifest = start_manifest("estimate", &cfg, cfg.design.bootstrap.seed)?;

    let stage = Instant::now();
    let ds = load_dataset(&cfg)?;
    manifest.record_timing("load", stage.elapsed());

    let stage = Instant::now();
    let table = att_gt_all(&ds, &cfg.design)?;
    manifest.record_timing("estimate", stage.elapsed());

    let stage = Instant::now();
    let overall = aggregate_overall(&table)?;
    let by_group = aggregate_group(&table)?;
    let by_event = aggregate_event(&table, cfg.design.event_window)?;
    let banded = |agg: &AggregationResult| {
        let band = multiplier_bootstrap(&agg.influence_set(), &cfg.design.bootstrap)?;
        Ok::<_, Error>((attach_bands(agg, &band)?, band))
    };
    let (overall_banded, overall_band) = banded(&overall)?;
    let (group_banded, group_band) = banded(&by_group)?;
    let (event_banded, event_band) = banded(&by_event)?;
    manifest.record_timing("inference", stage.elapsed());

    let stage = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    let hash = manifest.run_hash.clone();
    write_output(&cfg.out, "att_gt.tsv", att_gt_tsv(&table, &hash), &mut manifest)?;
    write_output(
        &cfg.out,
        "overall.tsv",
        aggregation_tsv(&overall_banded, &hash),
        &mut manifest,
    )?;
    write_output(
        &cfg.out,
        "by_group.tsv",
        aggregation_tsv(&group_banded, &hash),
        &mut manifest,
    )?;
    write_output(
        &cfg.out,
        "by_event.tsv",
        aggregation_tsv(&event_banded, &hash),
        &mut manifest,
    )?;
    let results = serde_json::json!({
        "manifest_hash": hash,
        "estimator": "group_time",
        "config": manifest.config,
        "att_gt": table,
        "overall": overall_banded,
        "by_group": group_banded,
        "by_event": event_banded,
        "bands": {
            "overall": overall_band,
            "by_group": group_band,
            "by_event": event_band,
        },
    });
    write_json_output(&cfg.out, "results.json", &results, &mut manifest)?;
    let influence = serde_json::json!({
        "manifest_hash": hash,
        "alpha": cfg.design.bootstrap.alpha,
        "event_window": cfg.design.event_window,
        "families": {
            "overall": influence_store(&overall),
            "by_group": influence_store(&by_group),
            "by_event": influence_store(&by_event),
        },
    });
    write_json_output(&cfg.out, "influence.json", &influence, &mut manifest)?;
    manifest.record_timing("write", stage.elapsed());
    manifest.record_output("manifest.json");
    manifest.write(&cfg.out.join("manifest.json"))
}

fn cmd_diagnose(args: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let mut manifest = start_manifest("diagnose", &cfg, cfg.design.bootstrap.seed)?;

    let stage = Instant::now();
    let ds = load_dataset(&cfg)?;
    manifest.record_timing("load", stage.elapsed());

    let stage = Instant::now();
    let twfe = twfe_estimate(&ds)?;
    let weights = twfe_weights(&ds)?;
    // the decomposition needs a balanced, time-constant-weight panel;
    // report the reason instead of failing the other diagnostics
    let (bacon, bacon_skipped) = match bacon_decompose(&ds) {
        Ok(b) => (Some(b), None),
        Err(e @ (Error::UnbalancedPanel(_) | Error::AlwaysTreated { .. })) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    manifest.record_timing("diagnose", stage.elapsed());

    let stage = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    let hash = manifest.run_hash.clone();
    write_output(
        &cfg.out,
        "weights.tsv",
        weight_histogram_tsv(&weights, &hash),
        &mut manifest,
    )?;
    write_output(
        &cfg.out,
        "cell_weights.tsv",
        cell_weights_tsv(&weights, &hash),
        &mut manifest,
    )?;
    if let Some(b) = &bacon {
        write_output(&cfg.out, "bacon.tsv", bacon_tsv(b, &hash), &mut manifest)?;
    }
    let results = serde_json::json!({
        "manifest_hash": hash,
        "config": manifest.config,
        "twfe": twfe,
        "negative_share_weighted": weights.negative_share_weighted,
        "treated_weight_sum": weights.treated_weight_sum,
        "weight_convention": weights.convention,
        "bacon": bacon,
        "bacon_skipped": bacon_skipped,
    });
    write_json_output(&cfg.out, "diagnostics.json", &results, &mut manifest)?;
    manifest.record_timing("write", stage.elapsed());
    manifest.record_output("manifest.json");
    manifest.write(&cfg.out.join("manifest.json"))
}

fn cmd_impute(args: RunArgs) -> Result<()> {
    let cfg = resolve_run_config(&args)?;
    let mut manifest = start_manifest("impute", &cfg, cfg.design.bootstrap.seed)?;

    let stage = Instant::now();
    let ds = load_dataset(&cfg)?;
    manifest.record_timing("load", stage.elapsed());

    let stage = Instant::now();
    let fe = fit_untreated_twfe(&ds)?;
    let res = impute_att(&ds, &fe, cfg.design.event_window, &cfg.design.bootstrap)?;
    manifest.record_timing("impute", stage.elapsed());

    let stage = Instant::now();
    fs::create_dir_all(&cfg.out)?;
    let hash = manifest.run_hash.clone();
    write_output(
        &cfg.out,
        "imputation_overall.tsv",
        aggregation_tsv(&res.overall, &hash),
        &mut manifest,
    )?;
    write_output(
        &cfg.out,
        "imputation_event.tsv",
        aggregation_tsv(&res.by_event, &hash),
        &mut manifest,
    )?;
    write_output(
        &cfg.out,
        "imputation_placebos.tsv",
        aggregation_tsv(&res.placebos, &hash),
        &mut manifest,
    )?;
    let results = serde_json::json!({
        "manifest_hash": hash,
        "config": manifest.config,
        "fit": fe,
        "overall": res.overall,
        "by_event": res.by_event,
        "placebos": res.placebos,
        "metadata": res.metadata,
    });
    write_json_output(&cfg.out, "imputation.json", &results, &mut manifest)?;
    manifest.record_timing("write", stage.elapsed());
    manifest.record_output("manifest.json");
    manifest.write(&cfg.out.join("manifest.json"))
}

/// The slice of a completed estimate run that contrast needs.
struct LoadedRun {
    event_window: serde_json::Value,
    families: BTreeMap<&'static str, AggregationResult>,
}

const FAMILIES: [&str; 3] = ["overall", "by_group", "by_event"];

fn load_run(dir: &Path) -> Result<LoadedRun> {
    let broken = |what: &str| {
        Error::IncompatibleRuns(format!("{} is not a completed estimate run: {what}", dir.display()))
    };
    let results: serde_json::Value = read_json(&dir.join("results.json"), "results")
        .map_err(|e| broken(&e.to_string()))?;
    let influence: serde_json::Value = read_json(&dir.join("influence.json"), "influence store")
        .map_err(|e| broken(&e.to_string()))?;

    let event_window = results
        .pointer("/config/design/event_window")
        .cloned()
        .ok_or_else(|| broken("missing event window in config echo"))?;

    let mut families = BTreeMap::new();
    for family in FAMILIES {
        let mut agg: AggregationResult =
            serde_json::from_value(results[family].clone()).map_err(|e| broken(&e.to_string()))?;
        let store = influence
            .pointer(&format!("/families/{family}"))
            .ok_or_else(|| broken("missing influence family"))?;
        let store: BTreeMap<String, BTreeMap<String, f64>> =
            serde_json::from_value(store.clone()).map_err(|e| broken(&e.to_string()))?;
        for est in &mut agg.estimates {
            if let Some(psi) = store.get(&est.label) {
                est.influence = psi.clone();
            } else if !est.is_reference {
                return Err(broken(&format!("label {} missing from influence store", est.label)));
            }
        }
        families.insert(family, agg);
    }
    Ok(LoadedRun { event_window, families })
}

fn cmd_contrast(args: ContrastArgs) -> Result<()> {
    let mut cfg: ContrastConfig = match &args.config {
        Some(path) => read_json(path, "config")?,
        None => ContrastConfig::default(),
    };
    if let Some(draws) = args.draws {
        cfg.bootstrap.n_draws = draws;
    }
    if let Some(seed) = args.seed {
        cfg.bootstrap.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode.into();
    }
    let out = args.out.clone().or(cfg.out.clone()).unwrap_or_else(default_out);
    cfg.bootstrap.validate()?;

    let echo = serde_json::json!({
        "run_a": args.run_a.display().to_string(),
        "run_b": args.run_b.display().to_string(),
        "bootstrap": cfg.bootstrap,
        "mode": cfg.mode,
    });
    let mut inputs = BTreeMap::new();
    for dir in [&args.run_a, &args.run_b] {
        for file in ["results.json", "influence.json"] {
            let path = dir.join(file);
            inputs.insert(
                path.display().to_string(),
                sha256_file(&path).map_err(|_| {
                    Error::IncompatibleRuns(format!("{} is missing {file}", dir.display()))
                })?,
            );
        }
    }
    let mut manifest = RunManifest::new("contrast", echo, inputs, cfg.bootstrap.seed);

    let stage = Instant::now();
    let run_a = load_run(&args.run_a)?;
    let run_b = load_run(&args.run_b)?;
    if run_a.event_window != run_b.event_window {
        return Err(Error::IncompatibleRuns(format!(
            "event windows differ: {} vs {}",
            run_a.event_window, run_b.event_window
        )));
    }
    manifest.record_timing("load", stage.elapsed());

    let stage = Instant::now();
    let z = attgt::bootstrap::normal_ci_z(cfg.bootstrap.alpha);
    let mut contrasts: BTreeMap<&str, DddResult> = BTreeMap::new();
    for family in FAMILIES {
        let mut ddd = contrast_ddd(&run_a.families[family], &run_b.families[family])?;
        match cfg.mode {
            DddMode::SharedDraws => {
                let influence: Vec<(String, BTreeMap<String, f64>)> = ddd
                    .estimates
                    .iter()
                    .map(|e| (e.label.clone(), e.influence.clone()))
                    .collect();
                let band = multiplier_bootstrap(&influence, &cfg.bootstrap)?;
                let shell = AggregationResult { kind: ddd.kind, estimates: ddd.estimates };
                ddd.estimates = attach_bands(&shell, &band)?.estimates;
            }
            DddMode::Independent => {
                let se_b: BTreeMap<&str, f64> = run_b.families[family]
                    .estimates
                    .iter()
                    .map(|e| (e.label.as_str(), e.se))
                    .collect();
                for (est, a) in ddd.estimates.iter_mut().zip(&run_a.families[family].estimates)
                {
                    est.se = (a.se.powi(2) + se_b[a.label.as_str()].powi(2)).sqrt();
                    est.ci = Some((est.estimate - z * est.se, est.estimate + z * est.se));
                    est.ucb = None;
                }
            }
        }
        ddd.inference_mode = Some(cfg.mode);
        contrasts.insert(family, ddd);
    }
    manifest.record_timing("contrast", stage.elapsed());

    let stage = Instant::now();
    fs::create_dir_all(&out)?;
    let hash = manifest.run_hash.clone();
    write_output(&out, "ddd_overall.tsv", ddd_tsv(&contrasts["overall"], &hash), &mut manifest)?;
    write_output(&out, "ddd_group.tsv", ddd_tsv(&contrasts["by_group"], &hash), &mut manifest)?;
    write_output(&out, "ddd_event.tsv", ddd_tsv(&contrasts["by_event"], &hash), &mut manifest)?;
    let results = serde_json::json!({
        "manifest_hash": hash,
        "config": manifest.config,
        "overall": contrasts["overall"],
        "by_group": contrasts["by_group"],
        "by_event": contrasts["by_event"],
    });
    write_json_output(&out, "ddd.json", &results, &mut manifest)?;
    manifest.record_timing("write", stage.elapsed());
    manifest.record_output("manifest.json");
    manifest.write(&out.join("manifest.json"))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut spec: DgpSpec = read_json(&args.config, "generator spec")?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = args.out.clone().unwrap_or_else(default_out);

    let echo = serde_json::to_value(&spec)?;
    let inputs = BTreeMap::from([(
        args.config.display().to_string(),
        sha256_file(&args.config)?,
    )]);
    let mut manifest = RunManifest::new("simulate", echo, inputs, spec.seed);

    let stage = Instant::now();
    let (ds, truth) = generate(&spec)?;
    manifest.record_timing("generate", stage.elapsed());

    let stage = Instant::now();
    fs::create_dir_all(&out)?;
    write_csv(&ds, &out.join("panel.csv"))?;
    manifest.record_output("panel.csv");
    let truth_json = serde_json::json!({
        "manifest_hash": manifest.run_hash,
        "spec": manifest.config,
        "truth": truth,
    });
    write_json_output(&out, "truth.json", &truth_json, &mut manifest)?;
    manifest.record_timing("write", stage.elapsed());
    manifest.record_output("manifest.json");
    manifest.write(&out.join("manifest.json"))
}
