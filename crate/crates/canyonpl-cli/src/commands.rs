//! Subcommand argument structs and handlers.
//!
//! Each handler resolves its settings (flag, then config file, then
//! default), validates them up front, and only then touches the
//! filesystem or starts computing. All output files are plain text with
//! deterministic formatting so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use canyonpl::ae::{train_autoencoder, TrainConfig, Variant};
use canyonpl::building::{facade_patches, FacadePatch, GridScaler};
use canyonpl::clutter::{assemble_clutter, street_frame_clouds, StandardScaler};
use canyonpl::eval::{
    best_of_n_ae, distance_binned_rmse, lasso_importance, leave_one_feature_out,
    plan_links_shuffle_split, plan_street_by_street, rmse, run_protocol_with_workers, AeSettings,
    EvalReport, EvalTask, FamilyRegressor, FeatureSet, FoldRegressor, GppBaseline, Protocol,
    SlopeInterceptBaseline, SplitPlan,
};
use canyonpl::geometry::{knn_denoise, DenoiseParams};
use canyonpl::matrix::Matrix;
use canyonpl::persist::{load_autoencoder, save_autoencoder, save_regressor, RegressorBundle};
use canyonpl::regress::{fit_family, FamilyConfig, ModelKind};
use canyonpl::scene::Dataset;
use canyonpl::synth::{generate_pl, generate_scene, GroundTruthPL, SceneConfig};

use crate::config::{require, resolve, resolve_opt, RunConfig};
use crate::plots;
use crate::CliError;

/// Library validation failures on user-supplied values are usage errors.
fn usage(e: canyonpl::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------

/// Point-cloud denoising options (applied before feature extraction).
#[derive(Args, Debug)]
pub struct DenoiseOpts {
    /// Skip statistical outlier removal.
    #[arg(long)]
    pub no_denoise: bool,
    /// Neighbor count for per-point outlier scoring.
    #[arg(long, value_name = "K")]
    pub denoise_k: Option<usize>,
    /// Outlier threshold width in standard deviations.
    #[arg(long, value_name = "ALPHA")]
    pub denoise_alpha: Option<f64>,
}

fn resolve_denoise(opts: &DenoiseOpts, cfg: &RunConfig) -> Result<Option<DenoiseParams>, CliError> {
    if opts.no_denoise || cfg.no_denoise.unwrap_or(false) {
        return Ok(None);
    }
    let defaults = DenoiseParams::default();
    let params = DenoiseParams {
        k: resolve(opts.denoise_k, cfg.denoise_k, defaults.k),
        alpha: resolve(opts.denoise_alpha, cfg.denoise_alpha, defaults.alpha),
    };
    if params.k == 0 {
        return Err(CliError::Usage("--denoise-k must be >= 1".to_string()));
    }
    if !(params.alpha > 0.0) {
        return Err(CliError::Usage("--denoise-alpha must be > 0".to_string()));
    }
    Ok(Some(params))
}

/// Autoencoder architecture and training options.
#[derive(Args, Debug)]
pub struct AeOpts {
    /// Encoder trunk variant: grouped, single, or serial.
    #[arg(long, value_name = "NAME")]
    pub ae_variant: Option<String>,
    /// Training epochs.
    #[arg(long, value_name = "N")]
    pub ae_epochs: Option<usize>,
    /// Minibatch size (clamped to the available patch count).
    #[arg(long, value_name = "N")]
    pub ae_batch_size: Option<usize>,
    /// Adam learning rate.
    #[arg(long, value_name = "LR")]
    pub ae_learning_rate: Option<f64>,
    /// Early stop once the epoch-over-epoch loss change falls below this.
    #[arg(long, value_name = "TOL")]
    pub ae_stop_tol: Option<f64>,
    /// Autoencoder seed (separate stream from the protocol seed).
    #[arg(long, value_name = "SEED")]
    pub ae_seed: Option<u64>,
}

fn resolve_ae(opts: &AeOpts, cfg: &RunConfig) -> Result<(Variant, TrainConfig, u64), CliError> {
    let variant_name = resolve(
        opts.ae_variant.clone(),
        cfg.ae_variant.clone(),
        "grouped".to_string(),
    );
    let variant = Variant::parse(&variant_name).map_err(usage)?;
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: resolve(opts.ae_learning_rate, cfg.ae_learning_rate, defaults.learning_rate),
        batch_size: resolve(opts.ae_batch_size, cfg.ae_batch_size, defaults.batch_size),
        epochs: resolve(opts.ae_epochs, cfg.ae_epochs, defaults.epochs),
        stop_tol: resolve_opt(opts.ae_stop_tol, cfg.ae_stop_tol),
    };
    if train.batch_size == 0 {
        return Err(CliError::Usage("--ae-batch-size must be >= 1".to_string()));
    }
    let seed = resolve(opts.ae_seed, cfg.ae_seed, 0);
    Ok((variant, train, seed))
}

// ---------------------------------------------------------------------
// Shared pipeline steps
// ---------------------------------------------------------------------

/// A loaded dataset with its canonical 7-column clutter features and
/// dB targets, row-aligned with the link table.
struct Prepared {
    dataset: Dataset,
    features: Matrix,
    targets: Vec<f64>,
}

fn load_prepared(data: &Path, denoise: Option<DenoiseParams>) -> Result<Prepared, CliError> {
    let dataset = Dataset::load(data)?;
    let mut clouds = street_frame_clouds(&dataset)?;
    if let Some(params) = denoise {
        for cloud in clouds.values_mut() {
            // Clouds with k or fewer points pass through unfiltered:
            // no point in them has k genuine neighbors to score against.
            if cloud.len() > params.k {
                *cloud = knn_denoise(cloud, params)?;
            }
        }
    }
    let (features, targets) = assemble_clutter(&dataset, &clouds)?;
    Ok(Prepared {
        dataset,
        features,
        targets,
    })
}

/// Builds the feature matrix and column names for one feature set. The
/// building sets append the 12 latent codes from a trained autoencoder
/// loaded off disk (normalizing patches with the model's own scaler).
fn feature_matrix(
    prepared: &Prepared,
    set: FeatureSet,
    ae_model: Option<&Path>,
) -> Result<(Matrix, Vec<String>), CliError> {
    let names = set.feature_names(prepared.features.cols()).map_err(usage)?;
    let cols = set.clutter_columns(prepared.features.cols()).map_err(usage)?;
    let base = prepared.features.select_cols(&cols);
    if !set.uses_building() {
        return Ok((base, names));
    }
    let Some(path) = ae_model else {
        return Err(CliError::Usage(format!(
            "feature set '{}' needs --ae-model pointing at a trained autoencoder",
            set.name()
        )));
    };
    let model = load_autoencoder(path)?;
    let patches = facade_patches(&prepared.dataset)?;
    let normalized: Vec<FacadePatch> = prepared
        .dataset
        .links
        .iter()
        .map(|link| {
            patches
                .get(&link.link_id)
                .map(|p| model.scaler.normalize(p))
                .ok_or_else(|| {
                    canyonpl::Error::invalid(format!("no facade patch for link '{}'", link.link_id))
                })
        })
        .collect::<canyonpl::Result<_>>()?;
    let latents = model.encode_batch(&normalized)?;
    Ok((base.hcat(&latents)?, names))
}

fn parse_protocol(s: &str) -> Result<Protocol, CliError> {
    match s {
        "street-by-street" => Ok(Protocol::StreetByStreet),
        "shuffle-split" | "links-shuffle-split" => Ok(Protocol::LinksShuffleSplit),
        other => Err(CliError::Usage(format!(
            "unknown protocol '{other}' (street-by-street | shuffle-split)"
        ))),
    }
}

/// Builds the split plan for the chosen protocol.
fn build_plan(
    protocol: Protocol,
    dataset: &Dataset,
    iterations: usize,
    plan_seed: u64,
) -> Result<SplitPlan, CliError> {
    match protocol {
        Protocol::StreetByStreet => Ok(plan_street_by_street(dataset)?),
        Protocol::LinksShuffleSplit => {
            if iterations == 0 {
                return Err(CliError::Usage("--iterations must be >= 1".to_string()));
            }
            Ok(plan_links_shuffle_split(dataset, iterations, plan_seed)?)
        }
    }
}

// ---------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Number of streets to generate.
    #[arg(long, value_name = "N")]
    pub streets: Option<usize>,
    /// Scene seed (path loss draws use seed + 1).
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Shadowing standard deviation, dB.
    #[arg(long, value_name = "DB")]
    pub noise_sigma: Option<f64>,
    /// Saturate the street-clutter term above this density.
    #[arg(long, value_name = "CPS")]
    pub cps_saturation: Option<f64>,
}

pub fn cmd_synth(args: &SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let streets = resolve(args.streets, cfg.streets, 13);
    if streets == 0 {
        return Err(CliError::Usage("--streets must be >= 1".to_string()));
    }
    let seed = resolve(args.seed, cfg.seed, 0);
    let scene_cfg = SceneConfig::example(streets);
    let mut truth = GroundTruthPL::default();
    if let Some(sigma) = resolve_opt(args.noise_sigma, cfg.noise_sigma) {
        truth.noise_sigma = sigma;
    }
    if let Some(knee) = resolve_opt(args.cps_saturation, cfg.cps_saturation) {
        truth.cps_saturation = Some(knee);
    }
    truth.validate().map_err(usage)?;

    let mut dataset = generate_scene(&scene_cfg, seed)?;
    generate_pl(&mut dataset, &truth, seed.wrapping_add(1))?;
    dataset.save(&out)?;
    println!(
        "wrote {} streets / {} links to {}",
        dataset.streets.len(),
        dataset.links.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    /// Scene dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Feature set: clutter, clutter-building, clutter4, clutter4-building.
    #[arg(long, value_name = "NAME")]
    pub feature_set: Option<String>,
    /// Trained autoencoder (required by the building feature sets).
    #[arg(long, value_name = "FILE")]
    pub ae_model: Option<PathBuf>,
    #[command(flatten)]
    pub denoise: DenoiseOpts,
}

pub fn cmd_featurize(args: &FeaturizeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let set_name = resolve(
        args.feature_set.clone(),
        cfg.feature_set.clone(),
        "clutter".to_string(),
    );
    let set = FeatureSet::parse(&set_name).map_err(usage)?;
    let ae_model = resolve_opt(args.ae_model.clone(), cfg.ae_model.clone());
    if set.uses_building() && ae_model.is_none() {
        return Err(CliError::Usage(format!(
            "feature set '{}' needs --ae-model pointing at a trained autoencoder",
            set.name()
        )));
    }
    let denoise = resolve_denoise(&args.denoise, cfg)?;

    let prepared = load_prepared(&data, denoise)?;
    let (x, names) = feature_matrix(&prepared, set, ae_model.as_deref())?;

    let mut csv = String::new();
    csv.push_str(&names.join(","));
    csv.push_str(",measured_pl\n");
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            csv.push_str(&format!("{},", x.get(r, c)));
        }
        csv.push_str(&format!("{}\n", prepared.targets[r]));
    }
    write_text(&out, &csv)?;
    println!(
        "wrote {} rows x {} feature columns to {}",
        x.rows(),
        x.cols(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// train-ae
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TrainAeArgs {
    /// Scene dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output model path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub ae: AeOpts,
}

pub fn cmd_train_ae(args: &TrainAeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let (variant, mut train, seed) = resolve_ae(&args.ae, cfg)?;

    let dataset = Dataset::load(&data)?;
    let patches_by_link = facade_patches(&dataset)?;
    // Deterministic training order: the dataset's link order.
    let patches: Vec<FacadePatch> = dataset
        .links
        .iter()
        .map(|l| patches_by_link[&l.link_id].clone())
        .collect();
    let scaler = GridScaler::fit(&patches)?;
    let normalized: Vec<FacadePatch> = patches.iter().map(|p| scaler.normalize(p)).collect();
    train.batch_size = train.batch_size.min(normalized.len());

    let (model, curve) = train_autoencoder(&normalized, scaler, variant, train, seed)?;
    save_autoencoder(&model, &out)?;
    let final_loss = curve.train.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} autoencoder on {} patches for {} epochs; final loss {:.6}; saved to {}",
        variant.name(),
        normalized.len(),
        curve.train.len(),
        final_loss,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Scene dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output model path.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Model family: lasso, elastic-net, random-forest, svr.
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,
    /// Feature set: clutter, clutter-building, clutter4, clutter4-building.
    #[arg(long, value_name = "NAME")]
    pub feature_set: Option<String>,
    /// Trained autoencoder (required by the building feature sets).
    #[arg(long, value_name = "FILE")]
    pub ae_model: Option<PathBuf>,
    /// Fitting seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Elastic-net l1 mixing weight.
    #[arg(long, value_name = "DELTA")]
    pub delta: Option<f64>,
    /// SVR tube half-width, dB.
    #[arg(long, value_name = "EPS")]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub denoise: DenoiseOpts,
}

pub fn cmd_train(args: &TrainArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let kind_name = resolve(args.model.clone(), cfg.model.clone(), "lasso".to_string());
    let kind = ModelKind::parse(&kind_name).map_err(usage)?;
    let set_name = resolve(
        args.feature_set.clone(),
        cfg.feature_set.clone(),
        "clutter".to_string(),
    );
    let set = FeatureSet::parse(&set_name).map_err(usage)?;
    let ae_model = resolve_opt(args.ae_model.clone(), cfg.ae_model.clone());
    if set.uses_building() && ae_model.is_none() {
        return Err(CliError::Usage(format!(
            "feature set '{}' needs --ae-model pointing at a trained autoencoder",
            set.name()
        )));
    }
    let seed = resolve(args.seed, cfg.seed, 0);
    let defaults = FamilyConfig::default();
    let family_cfg = FamilyConfig {
        delta: resolve(args.delta, cfg.delta, defaults.delta),
        epsilon: resolve(args.epsilon, cfg.epsilon, defaults.epsilon),
    };
    let denoise = resolve_denoise(&args.denoise, cfg)?;

    let prepared = load_prepared(&data, denoise)?;
    let (x, names) = feature_matrix(&prepared, set, ae_model.as_deref())?;
    let scaler = StandardScaler::fit(&x)?;
    let xs = scaler.transform(&x)?;
    let model = fit_family(kind, &xs, &prepared.targets, seed, &family_cfg)?;
    let train_rmse = rmse(&prepared.targets, &model.predict(&xs)?)?;

    let bundle = RegressorBundle {
        kind,
        model,
        scaler,
        feature_names: names,
    };
    save_regressor(&bundle, &out)?;
    println!(
        "trained {} on {} links ({} features); train RMSE {:.4} dB; saved to {}",
        kind.name(),
        x.rows(),
        x.cols(),
        train_rmse,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Scene dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output report directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Protocol: street-by-street or shuffle-split.
    #[arg(long, value_name = "NAME")]
    pub protocol: Option<String>,
    /// Shuffle-split iteration count.
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// Seed for drawing the shuffle-split plan.
    #[arg(long, value_name = "SEED")]
    pub plan_seed: Option<u64>,
    /// Protocol seed (fold k fits with seed + k).
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Feature set: clutter, clutter-building, clutter4, clutter4-building.
    #[arg(long, value_name = "NAME")]
    pub feature_set: Option<String>,
    /// Comma-separated model families (baselines always run).
    #[arg(long, value_name = "LIST")]
    pub models: Option<String>,
    /// Worker threads for fold execution (default 1: bit-reproducible).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Repeated autoencoder trainings per fold for the best-of-n table.
    #[arg(long, value_name = "N")]
    pub ae_runs: Option<usize>,
    #[command(flatten)]
    pub denoise: DenoiseOpts,
    #[command(flatten)]
    pub ae: AeOpts,
}

fn parse_model_list(list: &str) -> Result<Vec<ModelKind>, CliError> {
    let mut kinds = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        kinds.push(ModelKind::parse(token).map_err(usage)?);
    }
    if kinds.is_empty() {
        return Err(CliError::Usage(
            "--models needs at least one model family".to_string(),
        ));
    }
    Ok(kinds)
}

fn env_workers() -> Option<usize> {
    std::env::var("CANYONPL_WORKERS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n >= 1)
}

pub fn cmd_evaluate(args: &EvaluateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let protocol = parse_protocol(&resolve(
        args.protocol.clone(),
        cfg.protocol.clone(),
        "street-by-street".to_string(),
    ))?;
    let iterations = resolve(args.iterations, cfg.iterations, 25);
    let plan_seed = resolve(args.plan_seed, cfg.plan_seed, 0);
    let seed = resolve(args.seed, cfg.seed, 0);
    let set_name = resolve(
        args.feature_set.clone(),
        cfg.feature_set.clone(),
        "clutter".to_string(),
    );
    let set = FeatureSet::parse(&set_name).map_err(usage)?;
    let kinds = parse_model_list(&resolve(
        args.models.clone(),
        cfg.models.clone(),
        "lasso,elastic-net,random-forest,svr".to_string(),
    ))?;
    let workers = args
        .workers
        .or(cfg.workers)
        .or_else(env_workers)
        .unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".to_string()));
    }
    let ae_runs = resolve(args.ae_runs, cfg.ae_runs, 1);
    if ae_runs == 0 {
        return Err(CliError::Usage("--ae-runs must be >= 1".to_string()));
    }
    let (variant, ae_train, ae_seed) = resolve_ae(&args.ae, cfg)?;
    let denoise = resolve_denoise(&args.denoise, cfg)?;

    let prepared = load_prepared(&data, denoise)?;
    let plan = build_plan(protocol, &prepared.dataset, iterations, plan_seed)?;

    // The building sets train a fresh autoencoder per fold on that
    // fold's training patches; the harness owns scaling and seeding.
    let patches;
    let ae_settings = if set.uses_building() {
        patches = facade_patches(&prepared.dataset)?;
        Some(AeSettings {
            patches: &patches,
            variant,
            train: ae_train,
            seed: ae_seed,
        })
    } else {
        None
    };
    let task = EvalTask {
        dataset: &prepared.dataset,
        features: &prepared.features,
        targets: &prepared.targets,
        feature_set: set,
        ae: ae_settings,
    };

    let families: Vec<FamilyRegressor> = kinds.iter().map(|&k| FamilyRegressor::new(k)).collect();
    let slope = SlopeInterceptBaseline;
    let uma = GppBaseline::uma_los();
    let umi = GppBaseline::umi_nlos();
    let mut models: Vec<&dyn FoldRegressor> = vec![&slope, &uma, &umi];
    for family in &families {
        models.push(family);
    }

    let report = run_protocol_with_workers(&task, &plan, &models, seed, workers)?;

    fs::create_dir_all(&out)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(canyonpl::Error::invalid(e.to_string())))?;
    write_text(&out.join("report.json"), &format!("{json}\n"))?;

    let mut fold_csv = String::from("fold");
    for model in &report.models {
        fold_csv.push_str(&format!(",{}", model.name));
    }
    fold_csv.push('\n');
    for k in 0..plan.folds.len() {
        fold_csv.push_str(&format!("{k}"));
        for model in &report.models {
            fold_csv.push_str(&format!(",{}", model.fold_rmse[k]));
        }
        fold_csv.push('\n');
    }
    write_text(&out.join("fold_rmse.csv"), &fold_csv)?;

    let mut bins_csv = String::from("model,bin_end,rmse,links\n");
    for model in &report.models {
        for bin in distance_binned_rmse(&prepared.dataset, model)? {
            bins_csv.push_str(&format!(
                "{},{},{},{}\n",
                model.name, bin.bin_end, bin.rmse, bin.links
            ));
        }
    }
    write_text(&out.join("distance_bins.csv"), &bins_csv)?;

    if set.uses_building() && ae_runs > 1 {
        let best = best_of_n_ae(&task, &plan, &families[0], ae_runs, ae_seed, seed)?;
        let mut best_csv = String::from("fold,average_rmse,best_rmse\n");
        for row in &best {
            best_csv.push_str(&format!(
                "{},{},{}\n",
                row.fold, row.average_rmse, row.best_rmse
            ));
        }
        write_text(&out.join("best_of_n.csv"), &best_csv)?;
    }

    println!(
        "{} protocol, {} folds, feature set {}:",
        report.protocol.name(),
        plan.folds.len(),
        set.name()
    );
    for model in &report.models {
        println!(
            "  {}: mean RMSE {:.4} dB (std {:.4})",
            model.name, model.mean_rmse, model.std_rmse
        );
    }
    println!("reports written to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------
// importance
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ImportanceArgs {
    /// Scene dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Protocol: street-by-street or shuffle-split.
    #[arg(long, value_name = "NAME")]
    pub protocol: Option<String>,
    /// Shuffle-split iteration count.
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// Seed for drawing the shuffle-split plan.
    #[arg(long, value_name = "SEED")]
    pub plan_seed: Option<u64>,
    /// Fitting seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Feature set: clutter or clutter4.
    #[arg(long, value_name = "NAME")]
    pub feature_set: Option<String>,
    /// Also run leave-one-feature-out with this model family.
    #[arg(long, value_name = "NAME")]
    pub lofo_model: Option<String>,
    #[command(flatten)]
    pub denoise: DenoiseOpts,
}

pub fn cmd_importance(args: &ImportanceArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let protocol = parse_protocol(&resolve(
        args.protocol.clone(),
        cfg.protocol.clone(),
        "street-by-street".to_string(),
    ))?;
    let iterations = resolve(args.iterations, cfg.iterations, 25);
    let plan_seed = resolve(args.plan_seed, cfg.plan_seed, 0);
    let seed = resolve(args.seed, cfg.seed, 0);
    let set_name = resolve(
        args.feature_set.clone(),
        cfg.feature_set.clone(),
        "clutter".to_string(),
    );
    let set = FeatureSet::parse(&set_name).map_err(usage)?;
    if set.uses_building() {
        return Err(CliError::Usage(
            "importance analyses run on the clutter feature sets".to_string(),
        ));
    }
    let lofo_kind = resolve_opt(args.lofo_model.clone(), cfg.lofo_model.clone())
        .map(|name| ModelKind::parse(&name).map_err(usage))
        .transpose()?;
    if lofo_kind.is_some() && set != FeatureSet::Clutter {
        return Err(CliError::Usage(
            "leave-one-feature-out needs --feature-set clutter".to_string(),
        ));
    }
    let denoise = resolve_denoise(&args.denoise, cfg)?;

    let prepared = load_prepared(&data, denoise)?;
    let plan = build_plan(protocol, &prepared.dataset, iterations, plan_seed)?;
    let task = EvalTask {
        dataset: &prepared.dataset,
        features: &prepared.features,
        targets: &prepared.targets,
        feature_set: set,
        ae: None,
    };

    let importances = lasso_importance(&task, &plan, seed)?;
    fs::create_dir_all(&out)?;
    let mut csv = String::from("feature,mean_weight,min_weight,max_weight\n");
    for row in &importances {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.name, row.mean_weight, row.min_weight, row.max_weight
        ));
    }
    write_text(&out.join("importance.csv"), &csv)?;
    for row in &importances {
        println!(
            "  {}: mean weight {:.4} (range {:.4} to {:.4})",
            row.name, row.mean_weight, row.min_weight, row.max_weight
        );
    }

    if let Some(kind) = lofo_kind {
        let model = FamilyRegressor::new(kind);
        let lofo = leave_one_feature_out(&task, &plan, &model, seed)?;
        let mut csv = String::from("feature,delta_rmse\n");
        for delta in &lofo.deltas {
            csv.push_str(&format!("{},{}\n", delta.name, delta.delta_rmse));
        }
        write_text(&out.join("lofo.csv"), &csv)?;
        println!(
            "leave-one-feature-out ({}): baseline mean RMSE {:.4} dB",
            kind.name(),
            lofo.baseline_mean_rmse
        );
        for delta in &lofo.deltas {
            println!("  without {}: {:+.4} dB", delta.name, delta.delta_rmse);
        }
    }
    println!("importance tables written to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------
// report
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Evaluation report (report.json from `evaluate`).
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Scene dataset directory the report was computed from.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Output directory for the SVG figures.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Model to plot in the measured-vs-predicted scatter.
    #[arg(long, value_name = "NAME")]
    pub plot_model: Option<String>,
    /// Fitting seed for the weight bars.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub denoise: DenoiseOpts,
}

pub fn cmd_report(args: &ReportArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let report_path = require(args.report.clone(), cfg.report.clone(), "report")?;
    let data = require(args.data.clone(), cfg.data.clone(), "data")?;
    let out = require(args.out.clone(), cfg.out.clone(), "out")?;
    let seed = resolve(args.seed, cfg.seed, 0);
    let denoise = resolve_denoise(&args.denoise, cfg)?;

    let text = fs::read_to_string(&report_path)?;
    let report: EvalReport = serde_json::from_str(&text).map_err(|e| {
        CliError::Runtime(canyonpl::Error::invalid(format!(
            "cannot parse report {}: {e}",
            report_path.display()
        )))
    })?;
    if report.models.is_empty() {
        return Err(CliError::Runtime(canyonpl::Error::invalid(
            "report contains no models",
        )));
    }
    let plot_model = resolve(
        args.plot_model.clone(),
        cfg.plot_model.clone(),
        report.models[0].name.clone(),
    );
    let Some(model) = report.models.iter().find(|m| m.name == plot_model) else {
        return Err(CliError::Usage(format!(
            "model '{plot_model}' is not in the report (available: {})",
            report
                .models
                .iter()
                .map(|m| m.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    };

    let prepared = load_prepared(&data, denoise)?;
    let n = prepared.dataset.links.len();

    // Box plot: the fold RMSE distribution of every model in the report.
    let rows: Vec<(String, Vec<f64>)> = report
        .models
        .iter()
        .map(|m| (m.name.clone(), m.fold_rmse.clone()))
        .collect();
    let box_svg = plots::box_plot(
        &format!("Fold RMSE by model ({})", report.protocol.name()),
        &rows,
    );

    // Scatter: measured vs predicted over every pooled test link of the
    // chosen model (errors are stored as predicted minus measured).
    let mut points = Vec::new();
    for fold in &model.fold_errors {
        for &(row, err) in fold {
            if row >= n {
                return Err(CliError::Runtime(canyonpl::Error::invalid(format!(
                    "report references link row {row} but the dataset has {n} links"
                ))));
            }
            let measured = prepared.dataset.links[row].measured_pl;
            points.push((measured, measured + err));
        }
    }
    let scatter_svg = plots::scatter_plot(
        &format!("Measured vs predicted ({plot_model})"),
        "measured path loss (dB)",
        "predicted path loss (dB)",
        &points,
    );

    // Weight bars: cross-validated lasso weights on the full clutter set.
    let task = EvalTask {
        dataset: &prepared.dataset,
        features: &prepared.features,
        targets: &prepared.targets,
        feature_set: FeatureSet::Clutter,
        ae: None,
    };
    let plan = plan_street_by_street(&prepared.dataset)?;
    let importances = lasso_importance(&task, &plan, seed)?;
    let bars: Vec<(String, f64, f64, f64)> = importances
        .iter()
        .map(|i| (i.name.clone(), i.mean_weight, i.min_weight, i.max_weight))
        .collect();
    let weights_svg = plots::bar_chart("Lasso weights (standardized features)", &bars);

    fs::create_dir_all(&out)?;
    write_text(&out.join("box.svg"), &box_svg)?;
    write_text(&out.join("scatter.svg"), &scatter_svg)?;
    write_text(&out.join("weights.svg"), &weights_svg)?;
    println!(
        "wrote box.svg, scatter.svg ({} points), weights.svg to {}",
        points.len(),
        out.display()
    );
    Ok(())
}
