use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tpm_core::classical::{fit_mle, ClassicalModel, Family, FitReport};
use tpm_core::data::{read_dataset, write_dataset, Dataset};
use tpm_core::markov::MarkovTable;
use tpm_core::metrics::EvalReport;
use tpm_core::neural::BackboneConfig;
use tpm_core::pipeline::{
    check_classes, evaluate_records, fit_markov_dataset, quickstart, report, simulate as run_simulation,
    MarkovPredictor, Predictor, SimulateConfig,
};
use tpm_core::tpm::{
    load_checkpoint, save_checkpoint, train as train_tpm, train_regression_baseline, DensityGrid, HeadKind,
    LoadedModel, ModelKind, RegressionConfig, TpmConfig, TrainConfig, TrainingLog,
};

use crate::error::CliError;
use crate::{Baseline, EvaluateArgs, ExportArgs, FitArgs, FitModel, SimulateArgs, TrainArgs};

pub const FIT_FORMAT: &str = "tpm-fit";
pub const REPORT_FORMAT: &str = "tpm-report";
pub const TRAIN_LOG_FORMAT: &str = "tpm-train-log";
pub const ARRIVAL_FORMAT: &str = "tpm-arrival-pattern";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    write_text(path, &(text + "\n"))
}

fn load_data(path: &Path, max_frames: Option<usize>) -> Result<Dataset, CliError> {
    let ds = read_dataset(path)?;
    Ok(match max_frames {
        Some(0) => return Err(CliError::config("max_frames must be at least 1")),
        Some(n) => ds.truncate_frames(n),
        None => ds,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(p) => read_json::<SimulateConfig>(p)?,
        None => SimulateConfig::Synthetic(quickstart().synth),
    };
    match &mut config {
        SimulateConfig::Synthetic(s) => {
            s.seed = args.seed.unwrap_or(s.seed);
            s.n_sequences = args.n_sequences.unwrap_or(s.n_sequences);
        }
        SimulateConfig::Classical { n_sequences, seed, .. } => {
            *seed = args.seed.unwrap_or(*seed);
            *n_sequences = args.n_sequences.unwrap_or(*n_sequences);
        }
    }
    let ds = run_simulation(&config)?;
    write_dataset(&args.out, &ds)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRun {
    pub data: PathBuf,
    pub model: FitModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitResult {
    Classical { report: FitReport },
    Markov { table: MarkovTable },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitFile {
    pub format: String,
    pub version: u32,
    pub config: FitRun,
    pub result: FitResult,
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let ds = load_data(&args.data, args.max_frames)?;
    let family = match args.model {
        FitModel::Poisson => Some(Family::Poisson),
        FitModel::Hawkes => Some(Family::Hawkes),
        FitModel::SelfCorrecting => Some(Family::SelfCorrecting),
        FitModel::Markov => None,
    };
    let result = match family {
        Some(f) => FitResult::Classical {
            report: fit_mle(&ds.histories(), f)?,
        },
        None => FitResult::Markov {
            table: fit_markov_dataset(&ds, args.k)?,
        },
    };
    let file = FitFile {
        format: FIT_FORMAT.into(),
        version: 1,
        config: FitRun {
            data: args.data.clone(),
            model: args.model,
            k: family.is_none().then_some(args.k),
            max_frames: args.max_frames,
        },
        result,
    };
    write_json(&args.out, &file)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub head: HeadKind,
    pub baseline: Option<Baseline>,
    /// Sized from the dataset when absent.
    pub backbone: Option<BackboneConfig>,
    pub sigma: [f64; 2],
    pub seed: u64,
    pub train: TrainConfig,
    pub max_frames: Option<usize>,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            head: HeadKind::B,
            baseline: None,
            backbone: None,
            sigma: [2.0, 2.0],
            seed: 0,
            train: TrainConfig::default(),
            max_frames: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TrainLogFile<'a> {
    format: &'static str,
    version: u32,
    data: &'a Path,
    model: ModelKind,
    config: &'a TrainRun,
    log: &'a TrainingLog,
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut run: TrainRun = match &args.config {
        Some(p) => read_json(p)?,
        None => TrainRun::default(),
    };
    if let Some(h) = &args.head {
        run.head = h.parse().map_err(CliError::config)?;
    }
    if args.baseline.is_some() {
        run.baseline = args.baseline;
    }
    run.train.epochs = args.epochs.unwrap_or(run.train.epochs);
    run.train.learning_rate = args.learning_rate.unwrap_or(run.train.learning_rate);
    run.seed = args.seed.unwrap_or(run.seed);
    run.max_frames = args.max_frames.or(run.max_frames);

    let ds = load_data(&args.data, run.max_frames)?;
    let dim = ds.header.feature_dim;
    let backbone = *run.backbone.get_or_insert_with(|| BackboneConfig::new(dim));
    if backbone.frame_dim != dim {
        return Err(CliError::config(format!(
            "backbone frame_dim {} does not match dataset feature_dim {dim}",
            backbone.frame_dim
        )));
    }
    let (model, log) = match run.baseline {
        Some(Baseline::Regression) => {
            let cfg = RegressionConfig { backbone, seed: run.seed };
            let (m, log) = train_regression_baseline(&ds, cfg, &run.train)?;
            (LoadedModel::Regression(m), log)
        }
        None => {
            let cfg = TpmConfig {
                head: run.head,
                backbone,
                sigma: run.sigma,
                seed: run.seed,
            };
            let (m, log) = train_tpm(&ds, cfg, &run.train)?;
            (LoadedModel::Tpm(m), log)
        }
    };
    save_checkpoint(&args.out, &model.to_checkpoint(Some(run.train.clone())))?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.json");
        p.into()
    });
    write_json(
        &log_path,
        &TrainLogFile {
            format: TRAIN_LOG_FORMAT,
            version: 1,
            data: &args.data,
            model: model.kind(),
            config: &run,
            log: &log,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
struct EvaluateRun<'a> {
    data: &'a Path,
    source: serde_json::Value,
    max_order: Option<usize>,
    max_frames: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct ReportFile<'a> {
    format: &'static str,
    version: u32,
    config: EvaluateRun<'a>,
    report: &'a EvalReport,
}

fn head_name(kind: HeadKind) -> &'static str {
    match kind {
        HeadKind::A => "tpm_a",
        HeadKind::B => "tpm_b",
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let ds = load_data(&args.data, args.max_frames)?;
    let loaded;
    let mut time_model: Option<ClassicalModel> = None;
    let mut markov: Option<MarkovPredictor> = None;
    let mut source = serde_json::Map::new();
    let (predictor, default_name) = if let Some(path) = &args.checkpoint {
        let ckpt = load_checkpoint(path)?;
        loaded = LoadedModel::from_checkpoint(&ckpt)?;
        check_classes(loaded.classes(), &ds)?;
        source.insert("checkpoint".into(), serde_json::json!(path));
        source.insert("model_config".into(), ckpt.config.clone());
        let name = match &loaded {
            LoadedModel::Tpm(m) => head_name(m.head_kind()).to_string(),
            LoadedModel::Regression(_) => "regression".to_string(),
        };
        (Predictor::from_loaded(&loaded), name)
    } else if args.oracle {
        source.insert("oracle".into(), true.into());
        (Predictor::Oracle, "oracle".to_string())
    } else if !args.fit.is_empty() {
        let mut names = Vec::new();
        let mut fits = Vec::new();
        for path in &args.fit {
            let file: FitFile = read_json(path)?;
            if file.format != FIT_FORMAT {
                return Err(CliError::config(format!("{}: not a fit file", path.display())));
            }
            match file.result {
                FitResult::Classical { report } => {
                    if time_model.replace(report.model).is_some() {
                        return Err(CliError::config("at most one classical fit may be given"));
                    }
                    names.insert(0, format!("{:?}", report.model.family()).to_lowercase());
                }
                FitResult::Markov { table } => {
                    let order = args.max_order.unwrap_or(table.order());
                    if markov.is_some() {
                        return Err(CliError::config("at most one Markov fit may be given"));
                    }
                    names.push(if order == 0 {
                        "majority".to_string()
                    } else {
                        format!("markov_k{order}")
                    });
                    markov = Some(MarkovPredictor { table, max_order: order });
                }
            }
            fits.push(serde_json::json!(path));
        }
        source.insert("fit".into(), fits.into());
        let name = names.join("+").replace("selfcorrecting", "self_correcting");
        (
            Predictor::Baseline {
                time: time_model.as_ref(),
                markov: markov.as_ref(),
            },
            name,
        )
    } else {
        return Err(CliError::config("one of --checkpoint, --fit or --oracle is required"));
    };

    let records = evaluate_records(&predictor, &ds, None)?;
    let name = args.name.clone().unwrap_or(default_name);
    let rep = report(&name, &records, ds.classes())?;
    let file = ReportFile {
        format: REPORT_FORMAT,
        version: 1,
        config: EvaluateRun {
            data: &args.data,
            source: source.into(),
            max_order: args.max_order,
            max_frames: args.max_frames,
        },
        report: &rep,
    };
    write_json(&args.out, &file)?;
    let csv = args.csv.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    write_text(&csv, &rep.to_csv())?;
    if let Some(p) = &args.records {
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        write_text(p, &text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ArrivalTransition<'a> {
    sequence_id: &'a str,
    event_index: usize,
    current_time: f64,
    predicted_time: f64,
    truth_time: f64,
    samples: &'a [(f64, f64)],
}

pub fn export_arrival_pattern(args: &ExportArgs) -> Result<(), CliError> {
    if args.points < 2 || !(args.span_factor > 0.0 && args.span_factor.is_finite()) {
        return Err(CliError::config("need points ≥ 2 and a positive span factor"));
    }
    let ds = load_data(&args.data, args.max_frames)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let model = match LoadedModel::from_checkpoint(&ckpt)? {
        LoadedModel::Tpm(m) => m,
        LoadedModel::Regression(_) => {
            return Err(CliError::config("the regression baseline has no time density to export"));
        }
    };
    check_classes(&model.classes, &ds)?;
    let grid = DensityGrid {
        points: args.points,
        span_factor: args.span_factor,
    };
    let records = evaluate_records(&Predictor::Tpm(&model), &ds, Some(grid))?;
    let transitions: Vec<ArrivalTransition> = records
        .iter()
        .map(|r| ArrivalTransition {
            sequence_id: &r.sequence_id,
            event_index: r.event_index,
            current_time: r.current_time,
            predicted_time: r.predicted_time,
            truth_time: r.truth_time,
            samples: r.time_density_samples.as_deref().unwrap_or(&[]),
        })
        .collect();
    if args.out.extension().is_some_and(|e| e == "csv") {
        let mut text = String::from("sequence_id,event_index,t,density,predicted_time,truth_time\n");
        for tr in &transitions {
            for (t, f) in tr.samples {
                let _ = writeln!(
                    text,
                    "{},{},{t},{f},{},{}",
                    tr.sequence_id, tr.event_index, tr.predicted_time, tr.truth_time
                );
            }
        }
        write_text(&args.out, &text)
    } else {
        write_json(
            &args.out,
            &serde_json::json!({
                "format": ARRIVAL_FORMAT,
                "version": 1,
                "config": {
                    "checkpoint": args.checkpoint,
                    "data": args.data,
                    "model_config": ckpt.config,
                    "grid": grid,
                    "max_frames": args.max_frames,
                },
                "transitions": transitions,
            }),
        )
    }
}
