//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use brainfeat_core::dataset::FeatureMatrix;
use brainfeat_core::evaluate::{cross_validate, final_eval};
use brainfeat_core::features::extract::DomainSet;
use brainfeat_core::models::{ModelKind, TrainedModel};
use brainfeat_core::recording::Split;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{PipelineConfig, Profile};
use crate::error::Error;
use crate::manifest::{load_manifest, tuh_entries, write_manifest};
use crate::matrix_io::{read_feature_csv, write_feature_csv};
use crate::pipeline::{self, extract_manifest, matrix_file, with_threads};
use crate::report::{
    build_report, correlation, correlation_summary, ensemble_summary, read_json, topomap_stem, topomaps,
    write_correlation_csv, write_json, write_report_csvs, write_topomap_csv, AnalysisReport, CvReport, EvalReport,
    TopomapSummary,
};
use crate::svg::render_topomap;

#[derive(Debug, Parser)]
#[command(name = "brainfeat", version, about = "Feature-based EEG pathology decoding")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration overlaid on the profile preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "BRAINFEAT_THREADS")]
    pub threads: Option<usize>,
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic EDF dataset and its manifest.
    Synth {
        /// Overrides the configured number of recordings.
        #[arg(long)]
        recordings: Option<usize>,
    },
    /// Build a manifest from a TUH Abnormal style directory tree.
    Manifest {
        #[arg(long)]
        tuh_root: PathBuf,
    },
    /// Extract feature and covariance matrices for every manifest entry.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma separated subset of time,ft,cwt,dwt,conn.
        #[arg(long)]
        domains: Option<String>,
    },
    /// Fit models on the development split.
    Train(ModelArgs),
    /// Chronological k-fold cross-validation on the development split.
    Cv(ModelArgs),
    /// Fit on development, score the evaluation split with repeated seeds.
    Eval(ModelArgs),
    /// Topomaps, feature correlations and ensemble analysis.
    Analyze {
        /// Extraction output directory.
        #[arg(long)]
        features: PathBuf,
        /// Directory holding `cv_*.json` / `eval_*.json`; defaults to `--out`.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Summary tables from cross-validation and evaluation results.
    Report {
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Extraction output directory, or a feature CSV file.
    #[arg(long)]
    pub features: PathBuf,
    /// Comma separated model names, or `all`.
    #[arg(long, default_value = "rf")]
    pub model: String,
}

pub const ALL_MODELS: [&str; 6] = ["rf", "svm", "rg-geo-ts", "rg-geo", "rg-euclid-ts", "rg-euclid"];

pub fn parse_models(list: &str) -> Result<Vec<ModelKind>, Error> {
    let names: Vec<&str> = if list.trim() == "all" {
        ALL_MODELS.to_vec()
    } else {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    };
    if names.is_empty() {
        return Err(Error::Config("no model given".into()));
    }
    let mut out: Vec<ModelKind> = Vec::new();
    for n in names {
        let k = ModelKind::parse(n).ok_or_else(|| Error::Config(format!("unknown model `{n}`")))?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

/// Matrix for `kind`: a directory resolves to the kind's file inside it.
pub fn features_path(features: &Path, kind: ModelKind) -> PathBuf {
    if features.is_dir() {
        features.join(matrix_file(kind))
    } else {
        features.to_path_buf()
    }
}

fn load_split(path: &Path, split: Split) -> Result<FeatureMatrix, Error> {
    let m = read_feature_csv(path)?;
    let rows = m.rows_in_split(split);
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no {} rows", path.display(), split.as_str())));
    }
    Ok(m.subset(&rows))
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn create_dir(p: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::load(g.config.as_deref(), g.profile)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(t) = g.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<(), Error> {
    let mut cfg = resolve_config(&cli.global)?;
    let out = cli.global.out.clone();
    create_dir(&out)?;
    match cli.command {
        Command::Synth { recordings } => {
            if let Some(n) = recordings {
                cfg.synth.n_recordings = n;
                cfg.validate()?;
            }
            let entries = with_threads(cfg.threads, || pipeline::write_synth_dataset(&cfg, &out))??;
            let path = out.join("manifest.csv");
            write_manifest(&path, &entries)?;
            emit(json!({"command": "synth", "recordings": entries.len(), "manifest": path}));
        }
        Command::Manifest { tuh_root } => {
            let mut entries = tuh_entries(&tuh_root)?;
            if entries.is_empty() {
                return Err(Error::Data(format!("no EDF files below {}", tuh_root.display())));
            }
            let root = std::path::absolute(&tuh_root).map_err(|e| Error::io(&tuh_root, e))?;
            for e in &mut entries {
                e.path = root.join(&e.path).to_string_lossy().into_owned();
            }
            let path = out.join("manifest.csv");
            write_manifest(&path, &entries)?;
            let dev = entries.iter().filter(|e| e.split == Split::Development).count();
            emit(json!({"command": "manifest", "development": dev, "evaluation": entries.len() - dev}));
        }
        Command::Extract { manifest, domains } => {
            if let Some(d) = domains {
                cfg.features.domains =
                    DomainSet::parse(&d).ok_or_else(|| Error::Config(format!("unknown domain list `{d}`")))?;
                cfg.validate()?;
            }
            let m = load_manifest(&manifest)?;
            let x = with_threads(cfg.threads, || extract_manifest(&m, &cfg))??;
            if x.features.n_rows() == 0 {
                return Err(Error::Data("every recording was excluded".into()));
            }
            write_feature_csv(&out.join(pipeline::FEATURES_FILE), &x.features)?;
            write_feature_csv(&out.join(pipeline::RIEMANN_GEO_FILE), &x.riemann_geo)?;
            write_feature_csv(&out.join(pipeline::RIEMANN_EUCLID_FILE), &x.riemann_euclid)?;
            if let Some(c) = &x.crops {
                write_feature_csv(&out.join(pipeline::CROPS_FILE), c)?;
            }
            write_json(&out.join("excluded.json"), &x.excluded)?;
            write_json(&out.join("extraction.json"), &x.summary)?;
            emit(json!({"command": "extract", "summary": x.summary}));
        }
        Command::Train(a) => {
            for kind in parse_models(&a.model)? {
                let dev = load_split(&features_path(&a.features, kind), Split::Development)?;
                let model = with_threads(cfg.threads, || TrainedModel::fit(kind, &cfg.models, &dev, cfg.seed))??;
                write_json(&out.join(format!("model_{kind}.json")), &model)?;
                if let Some(imp) = model.importance() {
                    write_importance(&out.join(format!("importance_{kind}.csv")), &model, imp)?;
                }
                emit(json!({"command": "train", "model": kind.name(), "rows": dev.n_rows(), "features": dev.n_cols()}));
            }
        }
        Command::Cv(a) => {
            for kind in parse_models(&a.model)? {
                let dev = load_split(&features_path(&a.features, kind), Split::Development)?;
                let r = with_threads(cfg.threads, || {
                    cross_validate(kind, &cfg.models, &dev, cfg.evaluate.folds, cfg.seed)
                })??;
                emit(json!({"command": "cv", "model": kind.name(), "accuracy": r.accuracy}));
                let report = CvReport {
                    model: kind.name(),
                    seed: cfg.seed,
                    row_ids: dev.row_ids.clone(),
                    truth: dev.targets().unwrap_or_default(),
                    result: r,
                };
                write_json(&out.join(format!("cv_{kind}.json")), &report)?;
            }
        }
        Command::Eval(a) => {
            for kind in parse_models(&a.model)? {
                let path = features_path(&a.features, kind);
                let dev = load_split(&path, Split::Development)?;
                let ev = load_split(&path, Split::Evaluation)?;
                let r = with_threads(cfg.threads, || {
                    final_eval(kind, &cfg.models, &dev, &ev, cfg.evaluate.repeats, cfg.seed)
                })??;
                emit(json!({"command": "eval", "model": kind.name(), "mean_accuracy": r.mean_accuracy}));
                let report = EvalReport {
                    model: kind.name(),
                    seed: cfg.seed,
                    row_ids: ev.row_ids.clone(),
                    truth: ev.targets().unwrap_or_default(),
                    result: r,
                };
                write_json(&out.join(format!("eval_{kind}.json")), &report)?;
            }
        }
        Command::Analyze { features, results } => {
            let results = results.unwrap_or_else(|| out.clone());
            let r = with_threads(cfg.threads, || analyze(&cfg, &features, &results, &out))??;
            write_json(&out.join("analysis.json"), &r)?;
            emit(json!({"command": "analyze", "analysis": r}));
        }
        Command::Report { results } => {
            let results = results.unwrap_or_else(|| out.clone());
            let (cvs, evals) = collect_results(&results)?;
            if cvs.is_empty() && evals.is_empty() {
                return Err(Error::Data(format!(
                    "no cv_*.json or eval_*.json in {}",
                    results.display()
                )));
            }
            let r = build_report(&cvs, &evals)?;
            write_json(&out.join("report.json"), &r)?;
            write_report_csvs(&out, &r)?;
            emit(json!({"command": "report", "models": r.accuracies.len()}));
        }
    }
    Ok(())
}

fn write_importance(path: &Path, model: &TrainedModel, imp: &[f64]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["feature", "importance"])
        .map_err(|e| Error::csv(path, e))?;
    for (l, v) in model.labels.iter().zip(imp) {
        w.write_record([l.to_string(), format!("{v}")])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Results found in `dir`, in the canonical model order.
pub fn collect_results(dir: &Path) -> Result<(Vec<CvReport>, Vec<EvalReport>), Error> {
    let mut cvs = Vec::new();
    let mut evals = Vec::new();
    for name in ALL_MODELS {
        let p = dir.join(format!("cv_{name}.json"));
        if p.is_file() {
            cvs.push(read_json(&p)?);
        }
        let p = dir.join(format!("eval_{name}.json"));
        if p.is_file() {
            evals.push(read_json(&p)?);
        }
    }
    Ok((cvs, evals))
}

/// Topomaps from random forest importances (the saved `model_rf.json` when
/// present, otherwise a forest fitted on the development rows), the
/// correlation matrix of the filtered columns, and the ensemble analysis
/// when evaluation results for the configured models exist.
pub fn analyze(cfg: &PipelineConfig, features: &Path, results: &Path, out: &Path) -> Result<AnalysisReport, Error> {
    let fpath = features_path(features, ModelKind::Rf);
    let all = read_feature_csv(&fpath)?;
    let dev_rows = all.rows_in_split(Split::Development);
    if dev_rows.is_empty() {
        return Err(Error::Data(format!("{}: no development rows", fpath.display())));
    }
    let dev = all.subset(&dev_rows);
    let saved = results.join("model_rf.json");
    let model: TrainedModel = if saved.is_file() {
        read_json(&saved)?
    } else {
        TrainedModel::fit(ModelKind::Rf, &cfg.models, &dev, cfg.seed)?
    };
    let importance = model
        .importance()
        .ok_or_else(|| Error::Data("model_rf.json does not hold a random forest".into()))?;
    let mut summaries = Vec::new();
    for t in topomaps(importance, &model.labels, &cfg.analysis)? {
        let stem = topomap_stem(t.band);
        write_topomap_csv(&out.join(format!("{stem}.csv")), &t)?;
        let svg = render_topomap(&t, &format!("{}-{} Hz", t.band.lo, t.band.hi));
        let p = out.join(format!("{stem}.svg"));
        std::fs::write(&p, svg).map_err(|e| Error::io(&p, e))?;
        summaries.push(TopomapSummary {
            band: t.band,
            ranking: t.ranking().into_iter().map(String::from).collect(),
            total_mass: t.total_mass(),
            file_stem: stem,
        });
    }
    let filter = &cfg.analysis.correlation_filter;
    let corr = match correlation(&dev, filter) {
        Ok(c) => {
            write_correlation_csv(&out.join("correlation.csv"), &c, &dev.labels)?;
            Some(correlation_summary(&c, filter))
        }
        Err(Error::Data(_)) => None,
        Err(e) => return Err(e),
    };
    let (cvs, evals) = collect_results(results)?;
    let wanted: Vec<String> = cfg
        .analysis
        .ensemble_models
        .iter()
        .filter_map(|m| ModelKind::parse(m).map(|k| k.name()))
        .collect();
    let evals: Vec<EvalReport> = wanted
        .iter()
        .filter_map(|n| evals.iter().find(|e| &e.model == n).cloned())
        .collect();
    let cvs: Vec<CvReport> = wanted
        .iter()
        .filter_map(|n| cvs.iter().find(|c| &c.model == n).cloned())
        .collect();
    let ensemble = if evals.len() == wanted.len() && !evals.is_empty() {
        let cv_ok = cvs.len() == evals.len() && cvs.iter().all(|c| c.row_ids == cvs[0].row_ids);
        Some(ensemble_summary(
            &evals,
            cv_ok.then_some(cvs.as_slice()),
            &cfg.analysis,
        )?)
    } else {
        None
    };
    Ok(AnalysisReport {
        topomaps: summaries,
        correlation: corr,
        ensemble,
    })
}

/// Parses `args` (program name first) and runs; returns the exit code.
///
/// Failures print a JSON error record on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!("{}", Error::Config(e.to_string().trim().to_string()).record());
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}
