use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use svdnet::config::RunConfig;
use svdnet::diagnostics::s_of_w;
use svdnet::eval::{generate_synthetic, RankingReport, RetrievalDataset, SyntheticConfig};
use svdnet::network::EigenModel;
use svdnet::trainer::{
    evaluate_model, parse_checkpoint_name, run_decorr_comparison, run_dim_sweep, train_svdnet, Phase,
};

use crate::args::{Cli, Command, CompareArgs, DiagnoseArgs, EvalArgs, GenArgs, RunArgs, SweepArgs};
use crate::manifest::{DataSource, RunManifest};

pub const DATASET_FILE: &str = "dataset.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const REPORT_FILE: &str = "report.csv";
pub const DIAGNOSE_FILE: &str = "diagnose.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const SWEEP_FILE: &str = "sweep_dim.csv";

pub fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed, out),
        Command::Train(a) => cmd_train(a, config, cli.seed, out),
        Command::Eval(a) => cmd_eval(a, config, cli.seed, out),
        Command::Diagnose(a) => cmd_diagnose(a, config, cli.seed, out),
        Command::Compare(a) => cmd_compare(a, config, cli.seed, out),
        Command::SweepDim(a) => cmd_sweep_dim(a, config, cli.seed, out),
    }
}

/// Config file (if any), then flags. Relative `data` paths inside a config
/// file are taken relative to that file.
fn resolve_config(path: Option<&Path>, args: &RunArgs, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let mut cfg = RunConfig::load(p)?;
            if let (Some(data), Some(dir)) = (&cfg.data, p.parent()) {
                if data.is_relative() {
                    cfg.data = Some(dir.join(data));
                }
            }
            cfg
        }
        None => RunConfig::default(),
    };
    args.apply(&mut cfg, seed);
    cfg.schedule().validate()?;
    Ok(cfg)
}

/// Loads the configured dataset, or generates the default synthetic
/// benchmark into the output directory.
fn resolve_data(cfg: &RunConfig, out: &Path) -> Result<(RetrievalDataset, DataSource)> {
    match &cfg.data {
        Some(path) => {
            let data = RetrievalDataset::load(path).with_context(|| format!("loading {}", path.display()))?;
            Ok((data, DataSource { path: path.clone(), generated_from: None }))
        }
        None => {
            let gen = SyntheticConfig::default();
            let data = generate_synthetic(&gen)?;
            let path = out.join(DATASET_FILE);
            data.save(&path)?;
            info!("no dataset given; wrote the default synthetic benchmark to {}", path.display());
            Ok((data, DataSource { path, generated_from: Some(gen) }))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(args: &GenArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let gen = args.apply(seed);
    let data = generate_synthetic(&gen)?;
    let path = out.join(DATASET_FILE);
    data.save(&path)?;
    println!("wrote {} ({} rows, dim {})", path.display(), data.features.rows(), data.feature_dim());
    Ok(())
}

fn cmd_train(args: &RunArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, args, seed)?;
    let (data, source) = resolve_data(&cfg, out)?;
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir)?;
    let trace_path = out.join(TRACE_FILE);
    let manifest = RunManifest::new("train", &cfg, source)
        .artifact("checkpoints", ckpt_dir.clone())
        .artifact("trace", trace_path.clone());
    manifest.write(out)?;

    let run = train_svdnet(&data, &cfg, Some(&ckpt_dir))?;
    write_file(&trace_path, &run.trace.to_csv())?;
    manifest.check_artifacts()?;

    let last = run.trace.last().expect("trace has the step-0 record");
    println!(
        "{} RRI(s), converged: {}; final S(W) {:.6}, rank-1 {:.4}, mAP {:.4}",
        run.outcome.iterations, run.outcome.converged, last.s_of_w, last.rank1, last.map
    );
    Ok(())
}

fn report_csv(report: &RankingReport) -> String {
    let mut s = String::from("metric,value\n");
    writeln!(s, "mAP,{}", report.map).unwrap();
    for r in [1, 5, 10, 20] {
        writeln!(s, "rank{r},{}", report.rank(r)).unwrap();
    }
    writeln!(s, "queries,{}", report.per_query_ap.len()).unwrap();
    writeln!(s, "excluded_queries,{}", report.excluded_queries).unwrap();
    s
}

fn cmd_eval(args: &EvalArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, &args.run, seed)?;
    let model = EigenModel::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let (data, _) = resolve_data(&cfg, out)?;
    if model.input_dim() != data.feature_dim() {
        bail!(
            "checkpoint expects {}-dim inputs but the dataset has {} features",
            model.input_dim(),
            data.feature_dim()
        );
    }
    let report = evaluate_model(&model, &data, cfg.eval_options())?;
    write_file(&out.join(REPORT_FILE), &report_csv(&report))?;

    println!("{:<18}{:>10}", "metric", "value");
    println!("{:<18}{:>10.4}", "mAP", report.map);
    for r in [1, 5, 10, 20] {
        println!("{:<18}{:>10.4}", format!("rank-{r}"), report.rank(r));
    }
    println!("{:<18}{:>10}", "queries", report.per_query_ap.len());
    println!("{:<18}{:>10}", "excluded queries", report.excluded_queries);
    Ok(())
}

fn phase_order(p: Phase) -> u8 {
    match p {
        Phase::Step0 => 0,
        Phase::Decorrelate => 1,
        Phase::Restraint => 2,
        Phase::Relaxation => 3,
    }
}

fn collect_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in fs::read_dir(p).with_context(|| format!("reading {}", p.display()))? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "svdn") {
                    found.push(path);
                }
            }
        } else {
            found.push(p.clone());
        }
    }
    found.sort_by_key(|p| {
        let key = parse_checkpoint_name(p).map(|(t, phase)| (t, phase_order(phase)));
        (key.is_none(), key, p.clone())
    });
    if found.is_empty() {
        bail!("no checkpoints found");
    }
    Ok(found)
}

fn cmd_diagnose(args: &DiagnoseArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, &args.run, seed)?;
    let data = match &cfg.data {
        Some(path) => Some(RetrievalDataset::load(path).with_context(|| format!("loading {}", path.display()))?),
        None => None,
    };
    let mut csv = String::from("checkpoint,rri_index,phase,s_of_w,rank1,mAP\n");
    for path in collect_checkpoints(&args.paths)? {
        let model = EigenModel::load(&path).with_context(|| format!("loading {}", path.display()))?;
        let score = s_of_w(&model.eigenlayer)?;
        let (t, phase) = match parse_checkpoint_name(&path) {
            Some((t, phase)) => (t.to_string(), phase.to_string()),
            None => (String::new(), String::new()),
        };
        let (rank1, map) = match &data {
            Some(d) => {
                let r = evaluate_model(&model, d, cfg.eval_options())?;
                (r.rank1().to_string(), r.map.to_string())
            }
            None => (String::new(), String::new()),
        };
        writeln!(csv, "{},{t},{phase},{},{rank1},{map}", path.display(), score.value).unwrap();
    }
    print!("{csv}");
    write_file(&out.join(DIAGNOSE_FILE), &csv)
}

fn cmd_compare(args: &CompareArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, &args.run, seed)?;
    let (data, source) = resolve_data(&cfg, out)?;
    let path = out.join(COMPARE_FILE);
    let manifest = RunManifest::new("compare", &cfg, source).artifact("compare", path.clone());
    manifest.write(out)?;

    let rows = run_decorr_comparison(&data, &cfg, &args.methods)?;
    let mut csv = String::from("method,rank1,mAP,s_of_w,iterations\n");
    println!("{:<8}{:>10}{:>10}{:>10}", "method", "rank-1", "mAP", "S(W)");
    for r in &rows {
        writeln!(csv, "{},{},{},{},{}", r.method, r.rank1, r.map, r.s_of_w, r.iterations).unwrap();
        println!("{:<8}{:>10.4}{:>10.4}{:>10.4}", r.method.to_string(), r.rank1, r.map, r.s_of_w);
    }
    write_file(&path, &csv)?;
    manifest.check_artifacts()
}

fn cmd_sweep_dim(args: &SweepArgs, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg = resolve_config(config, &args.run, seed)?;
    let (data, source) = resolve_data(&cfg, out)?;
    let path = out.join(SWEEP_FILE);
    let manifest = RunManifest::new("sweep-dim", &cfg, source).artifact("sweep_dim", path.clone());
    manifest.write(out)?;

    let rows = run_dim_sweep(&data, &cfg, &args.dims)?;
    let mut csv = String::from("dim,step0_rank1,step0_mAP,rri_rank1,rri_mAP,rri_iterations,converged\n");
    println!("{:>6}{:>12}{:>12}", "dim", "step0 mAP", "RRI mAP");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.dim, r.step0_rank1, r.step0_map, r.rri_rank1, r.rri_map, r.rri_iterations, r.converged
        )
        .unwrap();
        println!("{:>6}{:>12.4}{:>12.4}", r.dim, r.step0_map, r.rri_map);
    }
    write_file(&path, &csv)?;
    manifest.check_artifacts()
}
