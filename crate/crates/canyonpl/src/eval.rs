//! Evaluation protocols and the error analyses built on them.
//!
//! Two split families: random 80/20 link shuffles and street-by-street
//! folds that hold out one whole street at a time. Folds carry link ids,
//! not row indices, so a plan survives a dataset round-trip through disk.
//!
//! Three independent random streams keep the sources of variation
//! separable in reports: the plan seed (how links were split), the
//! protocol seed (model fitting per fold), and the autoencoder seed
//! (network init and batch shuffles per fold).
//!
//! Every fit inside a fold runs behind a leak guard that rejects held-out
//! links; a violation aborts the whole run rather than contaminating the
//! scores. The building feature sets refit the facade scaler and the
//! autoencoder inside each fold, on that fold's training links only.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ae::{train_autoencoder, TrainConfig, Variant, LATENT_DIM};
use crate::baselines::{
    fit_slope_intercept, gpp_uma_los, gpp_umi_nlos, predict_slope_intercept, SlopeInterceptModel,
};
use crate::building::{FacadePatch, GridScaler};
use crate::clutter::{StandardScaler, CLUTTER4_COLUMNS, CLUTTER_FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::regress::{fit_family, grid_search_linear, FamilyConfig, ModelKind, TrainedModel};
use crate::scene::Dataset;

/// Which split family produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Repeated random 80/20 link splits.
    LinksShuffleSplit,
    /// One fold per street: train on the rest, test on the held-out street.
    StreetByStreet,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::LinksShuffleSplit => "links-shuffle-split",
            Protocol::StreetByStreet => "street-by-street",
        }
    }
}

/// One train/test split, by link id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// A full evaluation plan: every fold the protocol will run, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub protocol: Protocol,
    /// Seed the plan was drawn with (0 for the deterministic street plan).
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    /// Checks the plan against a dataset: every id resolves, no fold uses
    /// a link on both sides, and street plans partition the link set.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.folds.is_empty() {
            return Err(Error::invalid("split plan has no folds"));
        }
        let known: HashSet<&str> = dataset.links.iter().map(|l| l.link_id.as_str()).collect();
        for (k, fold) in self.folds.iter().enumerate() {
            if fold.train.is_empty() || fold.test.is_empty() {
                return Err(Error::invalid(format!("fold {k} has an empty side")));
            }
            let mut seen: HashSet<&str> = HashSet::new();
            for id in fold.train.iter().chain(&fold.test) {
                if !known.contains(id.as_str()) {
                    return Err(Error::invalid(format!(
                        "fold {k} references unknown link '{id}'"
                    )));
                }
                if !seen.insert(id.as_str()) {
                    return Err(Error::invalid(format!("fold {k} lists link '{id}' twice")));
                }
            }
        }
        if self.protocol == Protocol::StreetByStreet {
            // Every link must be tested exactly once across the folds.
            let mut covered: HashSet<&str> = HashSet::new();
            for fold in &self.folds {
                for id in &fold.test {
                    if !covered.insert(id.as_str()) {
                        return Err(Error::invalid(format!(
                            "link '{id}' is tested in two street folds"
                        )));
                    }
                }
            }
            if covered.len() != dataset.links.len() {
                return Err(Error::invalid("street folds do not cover every link"));
            }
        }
        Ok(())
    }
}

/// Random 80/20 link splits: `iterations` consecutive shuffles of one
/// seeded stream; each fold trains on the first 4n/5 shuffled ids.
pub fn plan_links_shuffle_split(
    dataset: &Dataset,
    iterations: usize,
    seed: u64,
) -> Result<SplitPlan> {
    let n = dataset.links.len();
    if n < 5 {
        return Err(Error::invalid(format!(
            "shuffle split needs at least 5 links, got {n}"
        )));
    }
    if iterations == 0 {
        return Err(Error::invalid("shuffle split needs at least 1 iteration"));
    }
    let mut ids: Vec<String> = dataset.links.iter().map(|l| l.link_id.clone()).collect();
    let train_len = n * 4 / 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        ids.shuffle(&mut rng);
        folds.push(Fold {
            train: ids[..train_len].to_vec(),
            test: ids[train_len..].to_vec(),
        });
    }
    Ok(SplitPlan {
        protocol: Protocol::LinksShuffleSplit,
        seed,
        folds,
    })
}

/// One fold per street in street-table order: the held-out street is the
/// test side, every other link trains.
pub fn plan_street_by_street(dataset: &Dataset) -> Result<SplitPlan> {
    if dataset.streets.len() < 2 {
        return Err(Error::invalid(format!(
            "street-by-street needs at least 2 streets, got {}",
            dataset.streets.len()
        )));
    }
    let mut folds = Vec::with_capacity(dataset.streets.len());
    for scene in &dataset.streets {
        let sid = &scene.meta.street_id;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for link in &dataset.links {
            if link.street_id == *sid {
                test.push(link.link_id.clone());
            } else {
                train.push(link.link_id.clone());
            }
        }
        if test.is_empty() {
            return Err(Error::invalid(format!("street '{sid}' has no links")));
        }
        folds.push(Fold { train, test });
    }
    Ok(SplitPlan {
        protocol: Protocol::StreetByStreet,
        seed: 0,
        folds,
    })
}

/// Root-mean-square error between measured and predicted values.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::invalid("rmse needs at least one sample"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "rmse length mismatch: {} vs {}",
            actual.len(),
            predicted.len()
        )));
    }
    let ss: f64 = actual.iter().zip(predicted).map(|(a, p)| (p - a).powi(2)).sum();
    Ok((ss / actual.len() as f64).sqrt())
}

/// The feature sets the protocols compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// All seven street-clutter features.
    Clutter,
    /// Clutter plus the autoencoder building code.
    ClutterBuilding,
    /// The four-feature subset: log3d, both clutter densities, both_sides.
    Clutter4,
    /// The four-feature subset plus the building code.
    Clutter4Building,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Clutter,
        FeatureSet::ClutterBuilding,
        FeatureSet::Clutter4,
        FeatureSet::Clutter4Building,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Clutter => "clutter",
            FeatureSet::ClutterBuilding => "clutter-building",
            FeatureSet::Clutter4 => "clutter4",
            FeatureSet::Clutter4Building => "clutter4-building",
        }
    }

    pub fn parse(s: &str) -> Result<FeatureSet> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature set '{s}'")))
    }

    pub fn uses_building(self) -> bool {
        matches!(self, FeatureSet::ClutterBuilding | FeatureSet::Clutter4Building)
    }

    /// Clutter columns this set keeps, given the width of the supplied
    /// feature matrix. The four-feature subsets require the canonical
    /// seven-column layout; the full sets take the matrix as-is.
    pub fn clutter_columns(self, total_cols: usize) -> Result<Vec<usize>> {
        match self {
            FeatureSet::Clutter | FeatureSet::ClutterBuilding => Ok((0..total_cols).collect()),
            FeatureSet::Clutter4 | FeatureSet::Clutter4Building => {
                if total_cols != CLUTTER_FEATURE_NAMES.len() {
                    return Err(Error::invalid(format!(
                        "the four-feature subset needs the canonical {}-column matrix, got {total_cols}",
                        CLUTTER_FEATURE_NAMES.len()
                    )));
                }
                Ok(CLUTTER4_COLUMNS.to_vec())
            }
        }
    }

    /// Column labels for reports, aligned with [`FeatureSet::clutter_columns`]
    /// plus `ae0..` for the building sets.
    pub fn feature_names(self, total_cols: usize) -> Result<Vec<String>> {
        let canonical = total_cols == CLUTTER_FEATURE_NAMES.len();
        let mut names: Vec<String> = self
            .clutter_columns(total_cols)?
            .into_iter()
            .map(|c| {
                if canonical {
                    CLUTTER_FEATURE_NAMES[c].to_string()
                } else {
                    format!("f{c}")
                }
            })
            .collect();
        if self.uses_building() {
            for k in 0..LATENT_DIM {
                names.push(format!("ae{k}"));
            }
        }
        Ok(names)
    }
}

/// A fitted model ready to score feature rows.
pub trait Predict {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>>;
}

/// A model family the harness fits once per fold. `fit` receives raw
/// (unstandardized) training rows; implementations own any scaling.
pub trait FoldRegressor: Sync {
    fn name(&self) -> String;

    fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<Box<dyn Predict>>;

    /// True when the model reads specific columns by position (the
    /// distance baselines), which makes column-dropping analyses
    /// meaningless for it.
    fn reads_fixed_columns(&self) -> bool {
        false
    }
}

/// The regression families behind one seam: standardize on the training
/// rows, then fit the requested kind with its usual grid search.
#[derive(Debug, Clone)]
pub struct FamilyRegressor {
    pub kind: ModelKind,
    pub config: FamilyConfig,
}

impl FamilyRegressor {
    pub fn new(kind: ModelKind) -> FamilyRegressor {
        FamilyRegressor {
            kind,
            config: FamilyConfig::default(),
        }
    }
}

struct FittedFamily {
    scaler: StandardScaler,
    model: TrainedModel,
}

impl Predict for FittedFamily {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.model.predict(&self.scaler.transform(x)?)
    }
}

impl FoldRegressor for FamilyRegressor {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<Box<dyn Predict>> {
        let scaler = StandardScaler::fit(x)?;
        let xs = scaler.transform(x)?;
        let model = fit_family(self.kind, &xs, y, seed, &self.config)?;
        Ok(Box::new(FittedFamily { scaler, model }))
    }
}

/// Distance-only line refit on each training fold. Expects column 0 to
/// hold log10 d3d, which every feature set here guarantees.
#[derive(Debug, Clone, Copy, Default)]
pub struct SlopeInterceptBaseline;

struct FittedSlope {
    model: SlopeInterceptModel,
}

impl Predict for FittedSlope {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows())
            .map(|r| predict_slope_intercept(&self.model, 10f64.powf(x.get(r, 0))))
            .collect()
    }
}

impl FoldRegressor for SlopeInterceptBaseline {
    fn name(&self) -> String {
        "slope-intercept".to_string()
    }

    fn fit(&self, x: &Matrix, y: &[f64], _seed: u64) -> Result<Box<dyn Predict>> {
        if x.cols() == 0 {
            return Err(Error::invalid("slope-intercept needs a distance column"));
        }
        let d3d: Vec<f64> = (0..x.rows()).map(|r| 10f64.powf(x.get(r, 0))).collect();
        let model = fit_slope_intercept(&d3d, y)?;
        Ok(Box::new(FittedSlope { model }))
    }

    fn reads_fixed_columns(&self) -> bool {
        true
    }
}

/// Fixed reference curves; fitting is a no-op. Expects column 0 to hold
/// log10 d3d, like [`SlopeInterceptBaseline`].
#[derive(Debug, Clone, Copy)]
pub struct GppBaseline {
    /// UMi street-canyon NLOS when true, UMa LOS otherwise.
    pub umi_nlos: bool,
    /// Carrier frequency, GHz.
    pub fc_ghz: f64,
}

impl GppBaseline {
    pub fn uma_los() -> GppBaseline {
        GppBaseline {
            umi_nlos: false,
            fc_ghz: 28.0,
        }
    }

    pub fn umi_nlos() -> GppBaseline {
        GppBaseline {
            umi_nlos: true,
            fc_ghz: 28.0,
        }
    }
}

impl Predict for GppBaseline {
    fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows())
            .map(|r| {
                let d3d = 10f64.powf(x.get(r, 0));
                if self.umi_nlos {
                    gpp_umi_nlos(d3d, self.fc_ghz)
                } else {
                    gpp_uma_los(d3d, self.fc_ghz)
                }
            })
            .collect()
    }
}

impl FoldRegressor for GppBaseline {
    fn name(&self) -> String {
        if self.umi_nlos {
            "gpp-umi-nlos".to_string()
        } else {
            "gpp-uma-los".to_string()
        }
    }

    fn fit(&self, x: &Matrix, _y: &[f64], _seed: u64) -> Result<Box<dyn Predict>> {
        if x.cols() == 0 {
            return Err(Error::invalid("reference curves need a distance column"));
        }
        Ok(Box::new(*self))
    }

    fn reads_fixed_columns(&self) -> bool {
        true
    }
}

/// Autoencoder settings for the building feature sets. Patches are keyed
/// by link id and stay unnormalized; each fold fits its own grid scaler
/// on training patches only.
#[derive(Clone, Copy)]
pub struct AeSettings<'a> {
    pub patches: &'a HashMap<String, FacadePatch>,
    pub variant: Variant,
    pub train: TrainConfig,
    /// Base autoencoder seed; fold k trains with `seed + k`.
    pub seed: u64,
}

/// One evaluation problem: a dataset, its canonical clutter features and
/// targets (row-aligned with the link table), the feature set to expose,
/// and optional autoencoder settings for the building sets.
#[derive(Clone, Copy)]
pub struct EvalTask<'a> {
    pub dataset: &'a Dataset,
    pub features: &'a Matrix,
    pub targets: &'a [f64],
    pub feature_set: FeatureSet,
    pub ae: Option<AeSettings<'a>>,
}

/// Per-model scores for one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    /// One RMSE per fold, in fold order.
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    /// Population standard deviation over the fold RMSEs.
    pub std_rmse: f64,
    /// Per fold: (link row index, predicted minus measured) per test link.
    pub fold_errors: Vec<Vec<(usize, f64)>>,
}

/// Everything one protocol run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub feature_set: FeatureSet,
    pub feature_names: Vec<String>,
    /// Protocol seed: model fitting in fold k uses `seed + k`.
    pub seed: u64,
    pub fold_test_counts: Vec<usize>,
    pub models: Vec<ModelReport>,
}

/// Worker threads for fold execution: `CANYONPL_WORKERS` when set to a
/// positive integer, otherwise the machine's available parallelism.
pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var("CANYONPL_WORKERS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every fold of `plan` for every model and aggregates the scores.
pub fn run_protocol(
    task: &EvalTask,
    plan: &SplitPlan,
    models: &[&dyn FoldRegressor],
    seed: u64,
) -> Result<EvalReport> {
    run_protocol_with_workers(task, plan, models, seed, worker_count())
}

struct FoldOutput {
    test_count: usize,
    /// Per model: (rmse, signed errors keyed by link row index).
    scored: Vec<(f64, Vec<(usize, f64)>)>,
}

/// [`run_protocol`] with an explicit worker count. Reports are identical
/// at any count: folds are merged back in fold order.
pub fn run_protocol_with_workers(
    task: &EvalTask,
    plan: &SplitPlan,
    models: &[&dyn FoldRegressor],
    seed: u64,
    workers: usize,
) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::invalid("run_protocol needs at least one model"));
    }
    let n = task.dataset.links.len();
    if task.features.rows() != n || task.targets.len() != n {
        return Err(Error::invalid(format!(
            "features and targets must align with the {n} links: got {} rows and {} targets",
            task.features.rows(),
            task.targets.len()
        )));
    }
    if task.feature_set.uses_building() {
        let ae = task.ae.as_ref().ok_or_else(|| {
            Error::invalid(format!(
                "feature set '{}' needs autoencoder settings",
                task.feature_set.name()
            ))
        })?;
        for link in &task.dataset.links {
            if !ae.patches.contains_key(&link.link_id) {
                return Err(Error::invalid(format!(
                    "no facade patch for link '{}'",
                    link.link_id
                )));
            }
        }
    }
    plan.validate(task.dataset)?;
    let row_of: HashMap<&str, usize> = task
        .dataset
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| (l.link_id.as_str(), i))
        .collect();

    let n_folds = plan.folds.len();
    let workers = workers.max(1).min(n_folds);
    let mut outputs: Vec<(usize, Result<FoldOutput>)> = Vec::with_capacity(n_folds);
    if workers == 1 {
        for k in 0..n_folds {
            outputs.push((k, run_fold(task, plan, models, seed, &row_of, k)));
        }
    } else {
        let row_of = &row_of;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut mine = Vec::new();
                        let mut k = w;
                        while k < n_folds {
                            mine.push((k, run_fold(task, plan, models, seed, row_of, k)));
                            k += workers;
                        }
                        mine
                    })
                })
                .collect();
            for handle in handles {
                outputs.extend(handle.join().expect("fold worker panicked"));
            }
        });
        // Merge in fold order so any worker count yields the same report.
        outputs.sort_by_key(|&(k, _)| k);
    }

    let mut fold_test_counts = Vec::with_capacity(n_folds);
    let mut per_model_rmse: Vec<Vec<f64>> = vec![Vec::with_capacity(n_folds); models.len()];
    let mut per_model_errors: Vec<Vec<Vec<(usize, f64)>>> =
        vec![Vec::with_capacity(n_folds); models.len()];
    for (_, out) in outputs {
        let out = out?;
        fold_test_counts.push(out.test_count);
        for (m, (r, errs)) in out.scored.into_iter().enumerate() {
            per_model_rmse[m].push(r);
            per_model_errors[m].push(errs);
        }
    }

    let mut reports = Vec::with_capacity(models.len());
    for (m, model) in models.iter().enumerate() {
        let fold_rmse = std::mem::take(&mut per_model_rmse[m]);
        let (mean_rmse, std_rmse) = mean_std(&fold_rmse);
        reports.push(ModelReport {
            name: model.name(),
            fold_rmse,
            mean_rmse,
            std_rmse,
            fold_errors: std::mem::take(&mut per_model_errors[m]),
        });
    }
    Ok(EvalReport {
        protocol: plan.protocol,
        feature_set: task.feature_set,
        feature_names: task.feature_set.feature_names(task.features.cols())?,
        seed,
        fold_test_counts,
        models: reports,
    })
}

/// Rejects a fit that touches held-out links; `what` names the fit site.
fn guard_against_leak<'a>(
    used: impl IntoIterator<Item = &'a str>,
    held_out: &HashSet<&str>,
    what: &str,
) -> Result<()> {
    for id in used {
        if held_out.contains(id) {
            return Err(Error::invalid(format!(
                "leakage: {what} uses held-out link '{id}'"
            )));
        }
    }
    Ok(())
}

fn run_fold(
    task: &EvalTask,
    plan: &SplitPlan,
    models: &[&dyn FoldRegressor],
    seed: u64,
    row_of: &HashMap<&str, usize>,
    fold_idx: usize,
) -> Result<FoldOutput> {
    let fold = &plan.folds[fold_idx];
    let held_out: HashSet<&str> = fold.test.iter().map(|s| s.as_str()).collect();
    let train_rows: Vec<usize> = fold.train.iter().map(|id| row_of[id.as_str()]).collect();
    let test_rows: Vec<usize> = fold.test.iter().map(|id| row_of[id.as_str()]).collect();

    // Sentinel: whatever produced the index lists, the rows about to be
    // fitted must not include a held-out link.
    guard_against_leak(
        train_rows.iter().map(|&r| task.dataset.links[r].link_id.as_str()),
        &held_out,
        "model fitting",
    )?;

    let cols = task.feature_set.clutter_columns(task.features.cols())?;
    let base = task.features.select_cols(&cols);
    let x_all = if task.feature_set.uses_building() {
        let ae = task.ae.as_ref().expect("checked before folds start");
        guard_against_leak(
            fold.train.iter().map(|s| s.as_str()),
            &held_out,
            "autoencoder training",
        )?;
        let train_patches: Vec<FacadePatch> = fold
            .train
            .iter()
            .map(|id| ae.patches[id.as_str()].clone())
            .collect();
        // Scaler and autoencoder both see training patches only.
        let scaler = GridScaler::fit(&train_patches)?;
        let normalized_train: Vec<FacadePatch> =
            train_patches.iter().map(|p| scaler.normalize(p)).collect();
        let mut config = ae.train;
        // A batch can never exceed the fold's patch count.
        config.batch_size = config.batch_size.min(normalized_train.len()).max(1);
        let (model, _curve) = train_autoencoder(
            &normalized_train,
            scaler.clone(),
            ae.variant,
            config,
            ae.seed.wrapping_add(fold_idx as u64),
        )?;
        let normalized_all: Vec<FacadePatch> = task
            .dataset
            .links
            .iter()
            .map(|l| scaler.normalize(&ae.patches[l.link_id.as_str()]))
            .collect();
        let latents = model.encode_batch(&normalized_all)?;
        base.hcat(&latents)?
    } else {
        base
    };

    let x_train = x_all.select_rows(&train_rows);
    let x_test = x_all.select_rows(&test_rows);
    let y_train: Vec<f64> = train_rows.iter().map(|&r| task.targets[r]).collect();
    let y_test: Vec<f64> = test_rows.iter().map(|&r| task.targets[r]).collect();

    let fit_seed = seed.wrapping_add(fold_idx as u64);
    let mut scored = Vec::with_capacity(models.len());
    for model in models {
        let fitted = model.fit(&x_train, &y_train, fit_seed)?;
        let pred = fitted.predict(&x_test)?;
        let score = rmse(&y_test, &pred)?;
        let errors: Vec<(usize, f64)> = test_rows
            .iter()
            .zip(&pred)
            .zip(&y_test)
            .map(|((&row, &p), &a)| (row, p - a))
            .collect();
        scored.push((score, errors));
    }
    Ok(FoldOutput {
        test_count: test_rows.len(),
        scored,
    })
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let nf = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    (mean, var.sqrt())
}

/// RMSE within one 100 m distance bin, pooled over every fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    /// Upper edge of the bin (0, 100] is labeled 100, and so on.
    pub bin_end: f64,
    pub rmse: f64,
    /// Pooled test-link count; links appear once per fold that tested them.
    pub links: usize,
}

/// Pools one model's fold errors into 100 m d3d bins. Empty bins are
/// omitted; bins are returned in ascending order of their upper edge.
pub fn distance_binned_rmse(dataset: &Dataset, report: &ModelReport) -> Result<Vec<DistanceBin>> {
    let mut pooled: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for fold in &report.fold_errors {
        for &(row, err) in fold {
            let link = dataset.links.get(row).ok_or_else(|| {
                Error::invalid(format!(
                    "error row {row} is outside the {} links",
                    dataset.links.len()
                ))
            })?;
            let bin = (link.d3d / 100.0).ceil() as i64;
            let entry = pooled.entry(bin).or_insert((0.0, 0));
            entry.0 += err * err;
            entry.1 += 1;
        }
    }
    Ok(pooled
        .into_iter()
        .map(|(bin, (ss, count))| DistanceBin {
            bin_end: bin as f64 * 100.0,
            rmse: (ss / count as f64).sqrt(),
            links: count,
        })
        .collect())
}

/// Spread of one feature's standardized lasso weight across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub mean_weight: f64,
    pub min_weight: f64,
    pub max_weight: f64,
}

/// Grid-searched lasso weights on standardized training features, one
/// fit per fold; reports each feature's mean, min, and max weight.
pub fn lasso_importance(
    task: &EvalTask,
    plan: &SplitPlan,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if task.feature_set.uses_building() {
        return Err(Error::invalid(
            "lasso importance runs on the clutter feature sets",
        ));
    }
    let n = task.dataset.links.len();
    if task.features.rows() != n || task.targets.len() != n {
        return Err(Error::invalid(format!(
            "features and targets must align with the {n} links: got {} rows and {} targets",
            task.features.rows(),
            task.targets.len()
        )));
    }
    plan.validate(task.dataset)?;
    let row_of: HashMap<&str, usize> = task
        .dataset
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| (l.link_id.as_str(), i))
        .collect();
    let cols = task.feature_set.clutter_columns(task.features.cols())?;
    let x = task.features.select_cols(&cols);
    let names = task.feature_set.feature_names(task.features.cols())?;

    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(plan.folds.len());
    for (k, fold) in plan.folds.iter().enumerate() {
        let train_rows: Vec<usize> = fold.train.iter().map(|id| row_of[id.as_str()]).collect();
        let xt = x.select_rows(&train_rows);
        let yt: Vec<f64> = train_rows.iter().map(|&r| task.targets[r]).collect();
        let scaler = StandardScaler::fit(&xt)?;
        let xs = scaler.transform(&xt)?;
        let (_, model) = grid_search_linear(&xs, &yt, 1.0, seed.wrapping_add(k as u64))?;
        weights.push(model.weights);
    }

    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col: Vec<f64> = weights.iter().map(|w| w[j]).collect();
            let (mean_weight, _) = mean_std(&col);
            FeatureImportance {
                name: name.clone(),
                mean_weight,
                min_weight: col.iter().copied().fold(f64::INFINITY, f64::min),
                max_weight: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

/// Change in mean RMSE when one feature is removed and the protocol rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofoDelta {
    pub name: String,
    /// Mean RMSE without the feature minus the all-features baseline.
    pub delta_rmse: f64,
}

/// Leave-one-feature-out summary for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofoReport {
    pub baseline_mean_rmse: f64,
    pub deltas: Vec<LofoDelta>,
}

/// Reruns the protocol once per dropped feature column and reports each
/// drop's change in mean RMSE against the all-features baseline.
pub fn leave_one_feature_out(
    task: &EvalTask,
    plan: &SplitPlan,
    model: &dyn FoldRegressor,
    seed: u64,
) -> Result<LofoReport> {
    if task.feature_set != FeatureSet::Clutter {
        return Err(Error::invalid(
            "leave-one-feature-out runs on the full clutter set",
        ));
    }
    if model.reads_fixed_columns() {
        return Err(Error::invalid(format!(
            "model '{}' reads columns by position; dropping columns would silently shift them",
            model.name()
        )));
    }
    let models = [model];
    let baseline = run_protocol(task, plan, &models, seed)?;
    let baseline_mean_rmse = baseline.models[0].mean_rmse;
    let names = task.feature_set.feature_names(task.features.cols())?;
    let mut deltas = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let keep: Vec<usize> = (0..task.features.cols()).filter(|&c| c != j).collect();
        let reduced = task.features.select_cols(&keep);
        let sub = EvalTask {
            features: &reduced,
            ..*task
        };
        let report = run_protocol(&sub, plan, &models, seed)?;
        deltas.push(LofoDelta {
            name: name.clone(),
            delta_rmse: report.models[0].mean_rmse - baseline_mean_rmse,
        });
    }
    Ok(LofoReport {
        baseline_mean_rmse,
        deltas,
    })
}

/// Best and average RMSE for one fold over repeated autoencoder seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestOfFold {
    pub fold: usize,
    pub average_rmse: f64,
    pub best_rmse: f64,
}

/// Reruns the protocol with autoencoder seeds `base_seed..base_seed + n`,
/// keeping the protocol seed fixed so the spread isolates autoencoder
/// initialization and shuffle noise. Run r of fold k trains its
/// autoencoder with seed `base_seed + r + k`.
pub fn best_of_n_ae(
    task: &EvalTask,
    plan: &SplitPlan,
    model: &dyn FoldRegressor,
    n_runs: usize,
    base_seed: u64,
    seed: u64,
) -> Result<Vec<BestOfFold>> {
    if n_runs == 0 {
        return Err(Error::invalid("best-of-n needs at least one run"));
    }
    if !task.feature_set.uses_building() {
        return Err(Error::invalid("best-of-n needs a building feature set"));
    }
    let ae = task
        .ae
        .as_ref()
        .ok_or_else(|| Error::invalid("best-of-n needs autoencoder settings"))?;
    let models = [model];
    let mut per_run: Vec<Vec<f64>> = Vec::with_capacity(n_runs);
    for r in 0..n_runs {
        let mut sub = *task;
        sub.ae = Some(AeSettings {
            seed: base_seed.wrapping_add(r as u64),
            ..*ae
        });
        let report = run_protocol(&sub, plan, &models, seed)?;
        per_run.push(report.models[0].fold_rmse.clone());
    }
    Ok((0..plan.folds.len())
        .map(|k| {
            let runs: Vec<f64> = per_run.iter().map(|fr| fr[k]).collect();
            let (average_rmse, _) = mean_std(&runs);
            BestOfFold {
                fold: k,
                average_rmse,
                best_rmse: runs.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect())
}
