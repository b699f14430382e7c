use std::fs;
use std::path::Path;

use mgnet::data::{generate_synthetic, load_cohort, save_cohort, write_matrix, write_vector, Checkpoint, Cohort, SyntheticSpec};
use mgnet::evaluation::{ablation, auc, accuracy, cross_validate, grid_search, prepare, PipelineConfig};
use mgnet::graph::PopulationGraph;
use mgnet::model::{forward, Mode};
use mgnet::projection::{solve_projections, truncated_u1};
use mgnet::training::{train, TrainData};
use mgnet::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::args::{AblateArgs, ExportArgs, GenerateArgs, GridArgs, PipelineArgs, ProjectArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `config.json`: the command, its argv and the fully resolved
/// settings, enough to repeat the run.
fn write_echo(out: &Path, command: &str, argv: &[String], resolved: impl Serialize) -> Result<()> {
    let echo = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "argv": argv,
        "resolved": resolved,
    });
    write_text(&out.join("config.json"), &(serde_json::to_string_pretty(&echo).expect("echo serializes") + "\n"))
}

fn load_validated(args: &PipelineArgs, config: &PipelineConfig) -> Result<Cohort> {
    config.validate()?;
    if args.jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    let cohort = load_cohort(&args.manifest)?;
    let n = cohort.n_nodes();
    if config.k_neighbors >= n {
        return Err(Error::InvalidArgument(format!(
            "--k {} must be below the node count {n}",
            config.k_neighbors
        )));
    }
    Ok(cohort)
}

pub fn generate(args: &GenerateArgs, argv: &[String]) -> Result<()> {
    let inter: [f64; 2] = args
        .inter_density
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidArgument("--inter-density takes exactly two values".into()))?;
    let spec = SyntheticSpec {
        name: args.name.clone(),
        n_nodes: args.nodes,
        modalities: args.modalities.clone(),
        per_class: args.per_class,
        signal_strength: args.signal.clone(),
        noise_std: args.noise,
        within_density: args.within_density,
        inter_density: inter,
        seed: args.seed,
    };
    spec.validate()?;
    let cohort = generate_synthetic(&spec)?;
    save_cohort(&cohort, &args.out)?;
    write_echo(&args.out, "generate", argv, &spec)
}

pub fn project(args: &ProjectArgs, argv: &[String]) -> Result<()> {
    let cohort = load_cohort(&args.manifest)?;
    let pair = solve_projections(&cohort.tensor, args.tau)?;
    let graph = PopulationGraph::build(&truncated_u1(&pair), args.k, args.sigma)?;
    create_dir(&args.out)?;
    write_matrix(&args.out.join("u1.csv"), &pair.u1)?;
    write_matrix(&args.out.join("u2.csv"), &pair.u2)?;
    write_vector(&args.out.join("singular_values.csv"), &pair.singular_values)?;
    write_matrix(&args.out.join("adjacency.csv"), &graph.adjacency)?;
    write_matrix(&args.out.join("normalized_adjacency.csv"), &graph.normalized)?;
    write_echo(
        &args.out,
        "project",
        argv,
        json!({
            "manifest": args.manifest,
            "energy_threshold": args.tau,
            "k_neighbors": args.k,
            "kernel_width": graph.kernel_width,
            "trunc_rank": pair.trunc_rank,
        }),
    )
}

pub fn train_one(args: &PipelineArgs, argv: &[String]) -> Result<()> {
    let config = args.config(None);
    let cohort = load_validated(args, &config)?;
    let plan = config.fold_plan(&cohort.labels)?;
    let split = plan.split(0);
    let fit = if config.transductive {
        (0..cohort.subject_count()).collect()
    } else {
        split.fit()
    };
    let prepared = prepare(&cohort.tensor, &fit, &config)?;
    let data = TrainData {
        input: &prepared.input,
        labels: &cohort.labels,
        a_hat: &prepared.graph.normalized,
    };
    let outcome = train(data, &split.train, &split.val, &config.train_config(0))?;

    let test_x = prepared.input.select_subjects(&split.test)?;
    let trace = forward(&test_x, data.a_hat, &outcome.params, Mode::Eval, 0)?;
    let test_y: Vec<usize> = split.test.iter().map(|&i| cohort.labels[i]).collect();
    let summary = json!({
        "best_epoch": outcome.best_epoch,
        "val_accuracy": outcome.best_record().val_acc,
        "test_accuracy": accuracy(&trace.probabilities, &test_y)?,
        "test_auc": auc(&trace.positive_scores(), &test_y)?,
        "alpha": outcome.params.alpha,
        "train_subjects": split.train.iter().map(|&i| &cohort.subject_ids[i]).collect::<Vec<_>>(),
        "val_subjects": split.val.iter().map(|&i| &cohort.subject_ids[i]).collect::<Vec<_>>(),
        "test_subjects": split.test.iter().map(|&i| &cohort.subject_ids[i]).collect::<Vec<_>>(),
    });

    create_dir(&args.out)?;
    let mut log = String::new();
    for record in &outcome.log {
        log.push_str(&serde_json::to_string(record).expect("record serializes"));
        log.push('\n');
    }
    write_text(&args.out.join("train_log.jsonl"), &log)?;
    write_text(&args.out.join("summary.json"), &(serde_json::to_string_pretty(&summary).unwrap() + "\n"))?;
    Checkpoint::from_params(&outcome.params, json!({ "pipeline": config, "modalities": cohort.modalities }))
        .with_matrix("u1", &prepared.u1)
        .with_matrix("a_hat", &prepared.graph.normalized)
        .save(&args.out.join("checkpoint.json"))?;
    write_echo(&args.out, "train", argv, &config)
}

fn write_report(out: &Path, report: &mgnet::evaluation::EvalReport) -> Result<()> {
    create_dir(out)?;
    write_text(&out.join("report.json"), &report.to_json())?;
    write_text(&out.join("report.csv"), &report.to_csv())
}

pub fn cv(args: &PipelineArgs, argv: &[String]) -> Result<()> {
    let config = args.config(None);
    let cohort = load_validated(args, &config)?;
    let report = cross_validate(&cohort, &config, args.jobs)?;
    write_report(&args.out, &report)?;
    write_echo(&args.out, "cv", argv, &config)?;
    println!(
        "accuracy {:.2} ± {:.2}  auc {:.2} ± {:.2}",
        report.accuracy.mean, report.accuracy.std, report.auc.mean, report.auc.std
    );
    Ok(())
}

pub fn grid(args: &GridArgs, argv: &[String]) -> Result<()> {
    let base = args.pipeline.config(None);
    let grid = args.grid();
    let cohort = load_validated(&args.pipeline, &base)?;
    if let Some(&k) = grid.k.iter().find(|&&k| k >= cohort.n_nodes()) {
        return Err(Error::InvalidArgument(format!(
            "--k-grid value {k} must be below the node count {}",
            cohort.n_nodes()
        )));
    }
    let result = grid_search(&cohort, &base, &grid, args.pipeline.jobs)?;
    create_dir(&args.pipeline.out)?;
    write_text(&args.pipeline.out.join("sweep.csv"), &result.to_csv())?;
    write_text(
        &args.pipeline.out.join("grid.json"),
        &(serde_json::to_string_pretty(&result).unwrap() + "\n"),
    )?;
    write_echo(&args.pipeline.out, "grid", argv, json!({ "base": base, "grid": grid }))?;
    let best = result.best_row();
    println!(
        "best K={} batch={} D_out={}  val {:.2}  test accuracy {:.2} ± {:.2}",
        best.point.k,
        best.point.batch,
        best.point.d_out,
        best.report.val_accuracy.mean,
        best.report.accuracy.mean,
        best.report.accuracy.std
    );
    Ok(())
}

pub fn ablate(args: &AblateArgs, argv: &[String]) -> Result<()> {
    let config = args.pipeline.config(Some(args.ablate));
    let cohort = load_validated(&args.pipeline, &config)?;
    let report = ablation(&cohort, &config, args.ablate, args.pipeline.jobs)?;
    write_report(&args.pipeline.out, &report)?;
    write_echo(&args.pipeline.out, "ablate", argv, &config)?;
    println!(
        "accuracy {:.2} ± {:.2}  auc {:.2} ± {:.2}",
        report.accuracy.mean, report.accuracy.std, report.auc.mean, report.auc.std
    );
    Ok(())
}

pub fn export_embeddings(args: &ExportArgs, argv: &[String]) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let params = ck.params()?;
    let pipeline: Option<PipelineConfig> = ck
        .config
        .get("pipeline")
        .and_then(|v| serde_json::from_value(v.clone()).ok());
    let mut cohort = load_cohort(&args.manifest)?;
    if let Some(cfg) = &pipeline {
        cohort = cfg.view(&cohort)?;
    }
    let u1 = ck.matrix("u1")?;
    let a_hat = ck.matrix("a_hat")?;
    let input = cohort.tensor.mode_n_product(&u1.transpose(), 0)?;
    let trace = forward(&input, &a_hat, &params, Mode::Eval, 0)?;

    let dir = args.out.join("embeddings");
    create_dir(&dir)?;
    let mut probs = String::from("subject,label,p_class1\n");
    for (s, id) in cohort.subject_ids.iter().enumerate() {
        write_matrix(&dir.join(format!("{id}.csv")), &trace.pooled.subject_matrix(s))?;
        probs.push_str(&format!("{id},{},{}\n", cohort.labels[s], trace.probabilities.get(s, 1)));
    }
    write_text(&args.out.join("probabilities.csv"), &probs)?;
    write_echo(
        &args.out,
        "export-embeddings",
        argv,
        json!({ "manifest": args.manifest, "checkpoint": args.checkpoint }),
    )
}
