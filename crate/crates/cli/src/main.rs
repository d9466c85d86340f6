//! Command-line driver for the demonstration, training and adaptation pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::warn;

use stylebias::harness::{
    artifact_path, evaluate_rollout, generate_dataset, pb_table_pca, pca_project, probe_pb,
    run_online_experiment, run_variant_experiment, write_explained_csv, write_loss_csv,
    write_online_csvs, write_pb_table_csv, write_probe_csv, write_trace_csv, write_variant_csvs,
    MetricTrace,
};
use stylebias::io::{load_dataset, load_model, parse_config, save_dataset, save_model, RunConfig};
use stylebias::rnnpb::{fit, VariantName};
use stylebias::seqcore::{
    gradient_check, random_sequence, specs_from_widths, with_io, Network, NetworkPreset,
};
use stylebias::{Demonstration, Error, Result, RnnpbModel};

#[derive(Debug, Parser)]
#[command(
    name = "stylebias",
    version,
    about = "Train a parametric-bias RNN on simulated tendon-arm demonstrations and adapt its bias vector"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for weight initialization and random probes (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Adaptation variant: A, B-min, B-max, AB-min or AB-max.
    #[arg(long, global = true, value_name = "NAME")]
    variant: Option<VariantName>,
    /// Network widths (overrides `preset`).
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    #[value(name = "paper")]
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record demonstrations over the configured grid.
    GenData,
    /// Train weights and per-demonstration bias vectors.
    Train,
    /// Offline bias adaptation after running the arm with p = 0.
    Adapt,
    /// Closed-loop runs with p = 0 and with every trained bias vector.
    Rollout,
    /// Teacher-forced and closed-loop metrics per demonstration.
    Eval,
    /// Closed-loop run with online bias updates.
    Online,
    /// Principal axes of the trained bias vectors.
    Pca,
    /// Linear probe from bias vectors to demonstration attributes.
    Probe,
    /// Finite-difference check of the training-loss gradient.
    Gradcheck,
}

fn dataset_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("dataset.jsonl")
}

fn model_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("model.json")
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config {
                key: path.display().to_string(),
                message: source.to_string(),
            },
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cli.preset {
        cfg.preset = match p {
            PresetArg::Desk => NetworkPreset::Desk,
            PresetArg::Full => NetworkPreset::Full,
        };
    }
    Ok(cfg)
}

fn load_pair(cfg: &RunConfig) -> Result<(RnnpbModel, Vec<Demonstration>)> {
    Ok((
        load_model(&model_path(cfg))?,
        load_dataset(&dataset_path(cfg))?,
    ))
}

fn pb_points(model: &RnnpbModel) -> Vec<Vec<f64>> {
    model.pb_table.iter().map(|e| e.p.clone()).collect()
}

fn meta_for(data: &[Demonstration], id: usize) -> Result<&Demonstration> {
    data.iter().find(|d| d.id == id).ok_or_else(|| {
        Error::Spec(format!(
            "model has a PB for demonstration {id} missing from the dataset"
        ))
    })
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn gen_data(cfg: &RunConfig) -> Result<()> {
    let data = generate_dataset(&cfg.grid, &cfg.sim)?;
    let path = dataset_path(cfg);
    save_dataset(&path, &data)?;
    println!(
        "{} demonstrations of {} steps",
        data.len(),
        cfg.grid.steps_per_demo
    );
    report(&path);
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<()> {
    let data = load_dataset(&dataset_path(cfg))?;
    let tc = cfg.train_config();
    let (model, rep) = fit(&cfg.layout(), &data, &tc)?;
    if !rep.stopped_early {
        warn!(
            "training stopped at the epoch limit with MSE {:.3e} (target {:.1e})",
            rep.final_mse, tc.early_stop_mse
        );
    }
    println!(
        "epochs {} teacher-forced MSE {:.3e}",
        rep.epochs_run, rep.final_mse
    );
    let path = model_path(cfg);
    save_model(&path, &model)?;
    report(&path);
    let loss = artifact_path(&cfg.out_dir, "train", "fit", "loss");
    write_loss_csv(&loss, "mse", &rep.loss_trace)?;
    report(&loss);
    let table = artifact_path(&cfg.out_dir, "train", "fit", "pb_table");
    write_pb_table_csv(&table, &model, &data, pb_table_pca(&model).as_ref())?;
    report(&table);
    Ok(())
}

fn adapt(cfg: &RunConfig, variant: Option<VariantName>) -> Result<()> {
    let model = load_model(&model_path(cfg))?;
    let names = variant.map_or(VariantName::ALL.to_vec(), |v| vec![v]);
    for name in names {
        let rep = run_variant_experiment(&model, name, &cfg.adapt, &cfg.sim)?;
        println!(
            "{name}: p {:?} matching {:.4} -> {:.4} mean |f| {:.2} -> {:.2} N",
            rep.p_after,
            rep.matching_before,
            rep.matching_after,
            rep.trace_before.mean_tension(),
            rep.trace_after.mean_tension()
        );
        for path in write_variant_csvs(&cfg.out_dir, "adapt", &rep)? {
            report(&path);
        }
    }
    Ok(())
}

fn trained_traces(
    cfg: &RunConfig,
    model: &RnnpbModel,
    data: &[Demonstration],
) -> Result<Vec<MetricTrace>> {
    model
        .pb_table
        .iter()
        .map(|e| {
            let d = meta_for(data, e.id)?;
            evaluate_rollout(
                model,
                &e.p,
                &cfg.sim,
                d.meta.r,
                d.steps.len(),
                &format!("demo{}", e.id),
            )
        })
        .collect()
}

fn rollout(cfg: &RunConfig) -> Result<()> {
    let (model, data) = load_pair(cfg)?;
    let base = evaluate_rollout(
        &model,
        &model.zero_pb(),
        &cfg.sim,
        cfg.adapt.r,
        cfg.adapt.steps,
        "p0",
    )?;
    let path = artifact_path(&cfg.out_dir, "rollout", "p0", "trace");
    write_trace_csv(&path, &[&base])?;
    report(&path);
    let traces = trained_traces(cfg, &model, &data)?;
    let path = artifact_path(&cfg.out_dir, "rollout", "trained", "traces");
    write_trace_csv(&path, &traces.iter().collect::<Vec<_>>())?;
    report(&path);
    Ok(())
}

fn eval(cfg: &RunConfig) -> Result<()> {
    let (model, data) = load_pair(cfg)?;
    let traces = trained_traces(cfg, &model, &data)?;
    let mut rows = Vec::new();
    println!("id  r      f_style  one-step MSE  final |err| (deg)  mean |f| (N)");
    for (e, tr) in model.pb_table.iter().zip(&traces) {
        let d = meta_for(&data, e.id)?;
        let mse = model.one_step_mse(&d.steps, &e.p)?;
        println!(
            "{:<3} {:<6} {:<8} {:<13.3e} {:<17.2} {:.2}",
            e.id,
            d.meta.r,
            d.meta.f_style,
            mse,
            tr.final_theta_error().to_degrees(),
            tr.mean_tension()
        );
        rows.push(vec![mse, tr.final_theta_error(), tr.mean_tension()]);
    }
    let path = artifact_path(&cfg.out_dir, "eval", "trained", "metrics");
    stylebias::harness::write_metric_table(
        &path,
        &["one_step_mse", "final_theta_error", "mean_tension_norm"],
        &model.pb_table.iter().map(|e| e.id).collect::<Vec<_>>(),
        &rows,
    )?;
    report(&path);
    Ok(())
}

fn online(cfg: &RunConfig, variant: Option<VariantName>) -> Result<()> {
    let model = load_model(&model_path(cfg))?;
    let names = variant.map_or(vec![VariantName::BMin, VariantName::BMax], |v| vec![v]);
    for name in names {
        let v = cfg.online.variant(name);
        let rep = run_online_experiment(
            &model,
            &name.to_string(),
            &v,
            cfg.buffer,
            &cfg.sim,
            cfg.online.r,
            cfg.online.steps,
        )?;
        println!(
            "{name}: {} updates, final p {:?}",
            rep.p_trajectory.len(),
            rep.trace.p
        );
        for path in write_online_csvs(&cfg.out_dir, "online", &rep)? {
            report(&path);
        }
    }
    Ok(())
}

fn pca(cfg: &RunConfig) -> Result<()> {
    let (model, data) = load_pair(cfg)?;
    let res = pca_project(&pb_points(&model), model.layout.p_dim.min(2))?;
    println!("explained variance ratios {:?}", res.explained_ratio);
    let coords = artifact_path(&cfg.out_dir, "pca", "pb", "coords");
    write_pb_table_csv(&coords, &model, &data, Some(&res))?;
    report(&coords);
    let explained = artifact_path(&cfg.out_dir, "pca", "pb", "explained");
    write_explained_csv(&explained, &res)?;
    report(&explained);
    Ok(())
}

fn probe(cfg: &RunConfig) -> Result<()> {
    let (model, data) = load_pair(cfg)?;
    let metas = model
        .pb_table
        .iter()
        .map(|e| meta_for(&data, e.id).map(|d| d.meta))
        .collect::<Result<Vec<_>>>()?;
    let res = probe_pb(&pb_points(&model), &metas)?;
    for r in &res {
        match r.r2 {
            Some(v) => println!("{}: R^2 = {v:.4}", r.attribute),
            None => println!("{}: degenerate", r.attribute),
        }
    }
    let path = artifact_path(&cfg.out_dir, "probe", "pb", "r2");
    write_probe_csv(&path, &res)?;
    report(&path);
    Ok(())
}

fn gradcheck(cfg: &RunConfig) -> Result<()> {
    let layout = cfg.layout();
    let specs = specs_from_widths(&with_io(
        layout.input_dim(),
        &cfg.preset.hidden(),
        layout.x_dim(),
    ))?;
    let net = Network::build(specs, cfg.seed)?;
    let gc = &cfg.gradcheck;
    let inputs = random_sequence(layout.x_dim(), gc.steps, cfg.seed);
    let targets = random_sequence(layout.x_dim(), gc.steps, cfg.seed.wrapping_add(1));
    let p = random_sequence(layout.p_dim, 1, cfg.seed.wrapping_add(2)).remove(0);
    let rep = gradient_check(&net, &inputs, &targets, Some(&p), gc.h, gc.tolerance)?;
    println!(
        "checked {} gradients, max relative error {:.3e} (tolerance {:.0e})",
        rep.checked, rep.max_rel_err, rep.tolerance
    );
    let path = cfg.out_dir.join("gradcheck").join("report.json");
    std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let text = serde_json::to_string_pretty(&rep).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    report(&path);
    if !rep.passed {
        return Err(Error::Fault(format!(
            "{} gradients exceed the tolerance",
            rep.failures.len()
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::GenData => gen_data(&cfg),
        Command::Train => train(&cfg),
        Command::Adapt => adapt(&cfg, cli.variant),
        Command::Rollout => rollout(&cfg),
        Command::Eval => eval(&cfg),
        Command::Online => online(&cfg, cli.variant),
        Command::Pca => pca(&cfg),
        Command::Probe => probe(&cfg),
        Command::Gradcheck => gradcheck(&cfg),
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("STYLEBIAS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("STYLEBIAS_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
