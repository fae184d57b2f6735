//! Batch orchestration: a run config, six file-coupled stages, and the run
//! report.
//!
//! The stages are `synth`, `geo`, `features`, `train`, `explain`, and
//! `report`, executed in that order by [`run_pipeline`] or individually by
//! [`run_stage`]. Stages exchange data only through files in the output
//! directory (plus the configured input files), so any stage can be re-run in
//! isolation as long as its inputs are on disk. Every write replaces the whole
//! file; re-running a stage with the same config and seed reproduces its
//! outputs byte for byte.
//!
//! On-disk layout, all under [`RunConfig::out_dir`]:
//!
//! | file | producer | content |
//! |---|---|---|
//! | `sites.csv`, `communes.geojson`, `boundary.geojson`, `records.csv` | `synth` | generated inputs (files mode reads them from the configured paths instead) |
//! | `cells.csv` | `geo` | labeled tower cells: rate, population, density, urbanicity |
//! | `features.csv` | `features` | the labeled 18-feature table |
//! | `splits.csv` | `train` | tower-to-split assignment (pre-subsampling) |
//! | `model_<kind>.json`, `metrics.json` | `train` | trained models and their test metrics |
//! | `lime.jsonl`, `shap.jsonl` | `explain` | per-instance explanations |
//! | `*_all.csv`, `*_urban.csv`, `*_rural.csv`, `confusion.csv` | `report` | plot-ready aggregates |
//! | `run_report.json` | `report` | seeds, hyperparameters, metrics, artifact list |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    bin_label, read_feature_table, read_splits_csv, subsample_majority, two_stage_split,
    write_feature_table, write_splits_csv, FeatureRow, FeatureTable, N_CLASSES,
};
use crate::error::{Error, Result};
use crate::explain::{
    aggregate_explanations, lime_explain, read_explanations_jsonl, tree_shap_all,
    write_aggregate_csv, write_explanations_jsonl, AggregateMatrix, ClassMode, Explanation,
    LimeConfig, Method, PopulationFilter,
};
use crate::geo::io::{
    io_err, parse_err, read_boundary_geojson, read_cells_csv, read_communes_geojson,
    read_sites_csv, require_exists, write_boundary_geojson, write_cells_csv,
    write_communes_geojson, write_sites_csv,
};
use crate::geo::{label_cells, Commune, Projection, TowerSite, Urbanicity};
use crate::models::metrics::{evaluate, write_confusion_csv, Metrics, MAE_MAX};
use crate::models::{boost, forest, linear, load_model, save_model, train, ModelKind, ModelSpec};
use crate::network::{
    extract_features, read_records_csv, write_records_csv, EventType, InteractionMatrix,
};
use crate::seeding;
use crate::synth::{generate_interactions, generate_world, SynthConfig};

/// Where a run's raw inputs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InputSpec {
    /// Generate sites, communes, boundary, and records with [`crate::synth`].
    /// The generator's seed is always overridden by [`RunConfig::seed`].
    Synthetic {
        #[serde(default)]
        synth: SynthConfig,
    },
    /// Read the four raw inputs from existing files.
    Files {
        sites: String,
        communes: String,
        boundary: String,
        records: String,
    },
}

fn default_urban_threshold() -> f64 {
    crate::geo::DEFAULT_URBAN_THRESHOLD
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_explainers() -> Vec<Method> {
    vec![Method::Lime, Method::Shap]
}

fn default_explain_model() -> ModelKind {
    ModelKind::RandomForest
}

fn default_out_dir() -> String {
    "out".to_string()
}

/// One run, fully specified. The JSON form is the CLI's `--config` schema;
/// every field except `input` and `seed` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSpec,
    /// Master seed; every random choice in the run derives from it.
    pub seed: u64,
    /// Population density (people per km²) at or above which a cell counts as
    /// urban.
    #[serde(default = "default_urban_threshold")]
    pub urban_threshold: f64,
    /// Model families to train, by code (`dt`, `rf`, `gbt`, `log`, `bay`).
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Explainers to run over the explanation test set.
    #[serde(default = "default_explainers")]
    pub explainers: Vec<Method>,
    /// The trained model the explainers and the confusion export target.
    #[serde(default = "default_explain_model")]
    pub explain_model: ModelKind,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

impl RunConfig {
    /// A synthetic-mode config with library defaults everywhere else.
    pub fn synthetic(seed: u64) -> Self {
        let mut config = RunConfig {
            input: InputSpec::Synthetic {
                synth: SynthConfig::default(),
            },
            seed,
            urban_threshold: default_urban_threshold(),
            models: default_models(),
            explainers: default_explainers(),
            explain_model: default_explain_model(),
            out_dir: default_out_dir(),
        };
        config.normalize();
        config
    }

    /// Forces the generator seed to the run seed so one number controls the
    /// whole run.
    pub fn normalize(&mut self) {
        if let InputSpec::Synthetic { synth } = &mut self.input {
            synth.seed = self.seed;
        }
    }

    /// Rejects inconsistent settings and, in files mode, missing input files.
    pub fn validate(&self) -> Result<()> {
        if !(self.urban_threshold.is_finite() && self.urban_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "urban_threshold must be finite and positive, got {}",
                self.urban_threshold
            )));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("model list is empty".to_string()));
        }
        if !self.models.contains(&self.explain_model) {
            return Err(Error::InvalidConfig(format!(
                "explain_model {} is not in the model list",
                self.explain_model
            )));
        }
        if self.explainers.contains(&Method::Shap)
            && !matches!(
                self.explain_model,
                ModelKind::DecisionTree | ModelKind::RandomForest
            )
        {
            return Err(Error::InvalidConfig(format!(
                "the Shapley explainer needs a tree-ensemble explain_model, got {}",
                self.explain_model
            )));
        }
        match &self.input {
            InputSpec::Synthetic { synth } => synth.validate(),
            InputSpec::Files {
                sites,
                communes,
                boundary,
                records,
            } => {
                for path in [sites, communes, boundary, records] {
                    require_exists(Path::new(path))?;
                }
                Ok(())
            }
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        Path::new(&self.out_dir).join(name)
    }

    /// Path of one raw input: the configured file in files mode, the `synth`
    /// stage's output in synthetic mode.
    fn input_path(&self, which: RawInput) -> PathBuf {
        match &self.input {
            InputSpec::Synthetic { .. } => self.out(which.file_name()),
            InputSpec::Files {
                sites,
                communes,
                boundary,
                records,
            } => PathBuf::from(match which {
                RawInput::Sites => sites,
                RawInput::Communes => communes,
                RawInput::Boundary => boundary,
                RawInput::Records => records,
            }),
        }
    }

    fn model_path(&self, kind: ModelKind) -> PathBuf {
        self.out(&format!("model_{kind}.json"))
    }

    fn explanations_path(&self, method: Method) -> PathBuf {
        self.out(&format!("{}.jsonl", method.to_string().to_lowercase()))
    }
}

#[derive(Clone, Copy)]
enum RawInput {
    Sites,
    Communes,
    Boundary,
    Records,
}

impl RawInput {
    fn file_name(self) -> &'static str {
        match self {
            RawInput::Sites => "sites.csv",
            RawInput::Communes => "communes.geojson",
            RawInput::Boundary => "boundary.geojson",
            RawInput::Records => "records.csv",
        }
    }
}

/// The six pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Geo,
    Features,
    Train,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Synth,
        Stage::Geo,
        Stage::Features,
        Stage::Train,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Geo => "geo",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synth" => Ok(Stage::Synth),
            "geo" => Ok(Stage::Geo),
            "features" => Ok(Stage::Features),
            "train" => Ok(Stage::Train),
            "explain" => Ok(Stage::Explain),
            "report" => Ok(Stage::Report),
            other => Err(format!(
                "unknown stage {other:?} (expected synth, geo, features, train, explain, or report)"
            )),
        }
    }
}

/// Reads and validates a run config file.
pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut config: RunConfig =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    config.normalize();
    Ok(config)
}

/// Runs one stage, wrapping any failure in [`Error::Stage`] so callers can
/// name the stage that broke. Creates the output directory first.
pub fn run_stage(stage: Stage, config: &RunConfig) -> Result<()> {
    let wrap = |e: Error| Error::Stage {
        stage: stage.name().to_string(),
        source: Box::new(e),
    };
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| wrap(io_err(Path::new(&config.out_dir), e)))?;
    match stage {
        Stage::Synth => stage_synth(config).map_err(wrap),
        Stage::Geo => stage_geo(config).map_err(wrap),
        Stage::Features => stage_features(config).map_err(wrap),
        Stage::Train => stage_train(config).map_err(wrap),
        Stage::Explain => stage_explain(config).map_err(wrap),
        Stage::Report => stage_report(config).map(|_| ()).map_err(wrap),
    }
}

/// Runs every stage in order (skipping `synth` in files mode) and returns the
/// run report. The config is validated before anything is written.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    let mut config = config.clone();
    config.normalize();
    config.validate()?;
    for stage in Stage::ALL {
        if stage == Stage::Synth && !matches!(config.input, InputSpec::Synthetic { .. }) {
            continue;
        }
        if stage == Stage::Report {
            break;
        }
        run_stage(stage, &config)?;
    }
    stage_report(&config).map_err(|e| Error::Stage {
        stage: Stage::Report.name().to_string(),
        source: Box::new(e),
    })
}

fn stage_synth(config: &RunConfig) -> Result<()> {
    let InputSpec::Synthetic { synth } = &config.input else {
        return Err(Error::InvalidConfig(
            "the synth stage needs synthetic input mode".to_string(),
        ));
    };
    let world = generate_world(synth)?;
    let records = generate_interactions(&world, synth)?;
    write_sites_csv(&config.out("sites.csv"), &world.sites)?;
    write_communes_geojson(&config.out("communes.geojson"), &world.communes)?;
    write_boundary_geojson(&config.out("boundary.geojson"), &world.boundary)?;
    write_records_csv(&config.out("records.csv"), &records)
}

fn stage_geo(config: &RunConfig) -> Result<()> {
    let ring = read_boundary_geojson(&config.input_path(RawInput::Boundary))?;
    let raw_sites = read_sites_csv(&config.input_path(RawInput::Sites))?;
    let raw_communes = read_communes_geojson(&config.input_path(RawInput::Communes))?;

    // One shared projection, centered on the boundary, so sites, communes,
    // and cells live in the same plane.
    let projection = Projection::for_ring(&ring)?;
    let boundary = projection.project_ring(&ring)?;
    let sites: Vec<TowerSite> = raw_sites
        .iter()
        .map(|(id, g)| TowerSite {
            tower_id: id.clone(),
            location: projection.project(*g),
        })
        .collect();
    let communes: Vec<Commune> = raw_communes
        .iter()
        .map(|c| {
            Commune::new(
                c.id.clone(),
                projection.project_ring(&c.ring)?,
                c.households_total,
                c.households_electrified,
                c.population,
            )
        })
        .collect::<Result<_>>()?;

    let cells = label_cells(&sites, &boundary, &communes, config.urban_threshold)?;
    write_cells_csv(&config.out("cells.csv"), &cells)
}

fn stage_features(config: &RunConfig) -> Result<()> {
    let sites = read_sites_csv(&config.input_path(RawInput::Sites))?;
    let records = read_records_csv(&config.input_path(RawInput::Records))?;
    let cells_path = config.out("cells.csv");
    let cells = read_cells_csv(&cells_path)?;

    let registry: Vec<String> = sites.iter().map(|(id, _)| id.clone()).collect();
    let cn = InteractionMatrix::build(EventType::CN, registry.clone(), &records)?;
    let cl = InteractionMatrix::build(EventType::CL, registry.clone(), &records)?;
    let sn = InteractionMatrix::build(EventType::SN, registry.clone(), &records)?;
    let features = extract_features(&cn, &cl, &sn)?;

    let labels: BTreeMap<&str, &crate::geo::io::CellLabel> =
        cells.iter().map(|c| (c.tower_id.as_str(), c)).collect();
    let mut rows = Vec::with_capacity(registry.len());
    for (id, features) in registry.iter().zip(features) {
        let cell = labels.get(id.as_str()).ok_or_else(|| {
            parse_err(&cells_path, 0, format!("no cell row for tower {id}"))
        })?;
        rows.push(FeatureRow {
            tower_id: id.clone(),
            features,
            rate: cell.rate,
            class: bin_label(cell.rate),
            density: cell.density,
            urbanicity: cell.urbanicity,
        });
    }
    write_feature_table(&config.out("features.csv"), &FeatureTable { rows })
}

fn stage_train(config: &RunConfig) -> Result<()> {
    let table = read_feature_table(&config.out("features.csv"))?;
    let splits = two_stage_split(&table, config.seed);
    write_splits_csv(&config.out("splits.csv"), &splits)?;

    let train_set = subsample_majority(&splits.model_train, config.seed);
    let mut metrics: BTreeMap<String, Metrics> = BTreeMap::new();
    for kind in &config.models {
        let spec = ModelSpec {
            kind: *kind,
            seed: seeding::derive_seed(config.seed, &format!("train-{kind}")),
        };
        let model = train(&spec, &train_set)?;
        save_model(&config.model_path(*kind), &model)?;
        metrics.insert(kind.to_string(), evaluate(&model, &splits.model_test));
    }
    write_json(&config.out("metrics.json"), &metrics)
}

fn stage_explain(config: &RunConfig) -> Result<()> {
    let table = read_feature_table(&config.out("features.csv"))?;
    let splits = read_splits_csv(&config.out("splits.csv"), &table)?;
    let model = load_model(&config.model_path(config.explain_model))?;

    for method in &config.explainers {
        let explanations: Vec<Explanation> = match method {
            Method::Lime => {
                let background: Vec<Vec<f64>> = subsample_majority(&splits.expl_train, config.seed)
                    .rows
                    .iter()
                    .map(|r| r.features.to_vec())
                    .collect();
                let lime = LimeConfig::new(config.seed);
                splits
                    .expl_test
                    .rows
                    .iter()
                    .map(|r| lime_explain(&model, &r.tower_id, &r.features, &background, &lime))
                    .collect::<Result<_>>()?
            }
            Method::Shap => {
                let mut all = Vec::with_capacity(splits.expl_test.len() * N_CLASSES);
                for r in &splits.expl_test.rows {
                    all.extend(tree_shap_all(&model, &r.tower_id, &r.features)?);
                }
                all
            }
        };
        write_explanations_jsonl(&config.explanations_path(*method), &explanations)?;
    }
    Ok(())
}

/// Writes the plot-ready CSVs: one file per aggregate matrix, named
/// `<method>_<class-mode>_<population>.csv`, plus `confusion.csv` for the
/// explained model. Returns the written paths.
pub fn export_plot_data(
    out_dir: &Path,
    aggregates: &[AggregateMatrix],
    confusion: &[Vec<usize>],
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(aggregates.len() + 1);
    for matrix in aggregates {
        let mode = match matrix.class_mode {
            ClassMode::PredictedOnly => "predicted",
            ClassMode::AllClasses => "all_classes",
        };
        let population = match matrix.population_filter {
            PopulationFilter::All => "all",
            PopulationFilter::Urban => "urban",
            PopulationFilter::Rural => "rural",
        };
        let name = format!(
            "{}_{mode}_{population}.csv",
            matrix.method.to_string().to_lowercase()
        );
        let path = out_dir.join(name);
        write_aggregate_csv(&path, matrix)?;
        written.push(path);
    }
    let confusion_path = out_dir.join("confusion.csv");
    write_confusion_csv(&confusion_path, confusion)?;
    written.push(confusion_path);
    Ok(written)
}

/// Everything needed to audit or repeat a run: the resolved config, the seed,
/// the pinned hyperparameters, the label distribution, per-model test
/// metrics, and the paths of all artifacts. The timestamp is the only field
/// that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Seconds since the Unix epoch at report time.
    pub timestamp_unix: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub hyperparameters: BTreeMap<String, f64>,
    /// Rows per class over the full feature table, before any split or
    /// subsampling.
    pub class_histogram: Vec<usize>,
    /// Share of rows in the top class.
    pub imbalance: f64,
    pub metrics: BTreeMap<String, Metrics>,
    pub artifacts: Vec<String>,
}

/// The fixed training and explanation constants a report pins down.
fn pinned_hyperparameters(config: &RunConfig) -> BTreeMap<String, f64> {
    let lime = LimeConfig::new(config.seed);
    BTreeMap::from(
        [
            ("split_ratio", 0.7),
            ("urban_threshold", config.urban_threshold),
            ("rf_trees", forest::RF_TREES as f64),
            ("rf_candidate_features", forest::RF_CANDIDATE_FEATURES as f64),
            ("gbt_rounds", boost::GBT_ROUNDS as f64),
            ("gbt_learning_rate", boost::GBT_LEARNING_RATE),
            ("gbt_max_depth", boost::GBT_MAX_DEPTH as f64),
            ("log_grad_tolerance", linear::LOG_GRAD_TOLERANCE),
            ("log_max_iter", linear::LOG_MAX_ITER as f64),
            ("lime_samples", lime.n_samples as f64),
            ("lime_kernel_width", lime.kernel_width),
            ("lime_top_features", lime.top_d as f64),
            ("lime_ridge_lambda", lime.ridge_lambda),
            ("mae_max", MAE_MAX),
        ]
        .map(|(k, v)| (k.to_string(), v)),
    )
}

fn stage_report(config: &RunConfig) -> Result<RunReport> {
    let table = read_feature_table(&config.out("features.csv"))?;
    let metrics: BTreeMap<String, Metrics> = read_json(&config.out("metrics.json"))?;
    let cells = read_cells_csv(&config.out("cells.csv"))?;
    let urbanicity: BTreeMap<String, Urbanicity> = cells
        .into_iter()
        .map(|c| (c.tower_id, c.urbanicity))
        .collect();

    let mut aggregates = Vec::new();
    for method in &config.explainers {
        let explanations = read_explanations_jsonl(&config.explanations_path(*method))?;
        let modes: &[ClassMode] = match method {
            Method::Lime => &[ClassMode::PredictedOnly],
            Method::Shap => &[ClassMode::PredictedOnly, ClassMode::AllClasses],
        };
        for mode in modes {
            for filter in [
                PopulationFilter::All,
                PopulationFilter::Urban,
                PopulationFilter::Rural,
            ] {
                aggregates.push(aggregate_explanations(
                    &explanations,
                    *mode,
                    filter,
                    &urbanicity,
                )?);
            }
        }
    }
    let explained = metrics.get(config.explain_model.code()).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "metrics.json has no entry for explain_model {}",
            config.explain_model
        ))
    })?;
    let mut artifacts = export_plot_data(
        Path::new(&config.out_dir),
        &aggregates,
        &explained.confusion,
    )?;

    if matches!(config.input, InputSpec::Synthetic { .. }) {
        for raw in [
            RawInput::Sites,
            RawInput::Communes,
            RawInput::Boundary,
            RawInput::Records,
        ] {
            artifacts.push(config.out(raw.file_name()));
        }
    }
    artifacts.push(config.out("cells.csv"));
    artifacts.push(config.out("features.csv"));
    artifacts.push(config.out("splits.csv"));
    for kind in &config.models {
        artifacts.push(config.model_path(*kind));
    }
    artifacts.push(config.out("metrics.json"));
    for method in &config.explainers {
        artifacts.push(config.explanations_path(*method));
    }
    let report_path = config.out("run_report.json");
    artifacts.push(report_path.clone());
    artifacts.sort();

    let report = RunReport {
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed: config.seed,
        config: config.clone(),
        hyperparameters: pinned_hyperparameters(config),
        class_histogram: table.class_counts().to_vec(),
        imbalance: table.imbalance(),
        metrics,
        artifacts: artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
    };
    write_json(&report_path, &report)?;
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// The process exit code for an error: 2 for config problems and missing
/// configured inputs, 1 for a failed stage.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidConfig(_) | Error::MissingPath(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}
