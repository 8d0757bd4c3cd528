use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::features::{extract_features, load_audio_input, load_visual_inputs, Modality};
use super::manifest::{read_manifest_copy, validate_manifest, Category, DatasetManifest};
use super::report::{
    accuracy_csv, parse_accuracy_csv, parse_significance_csv, significance_csv, write_reports, AccuracyRecord,
    Comparison, Condition, SignificanceRecord,
};
use crate::error::{Error, Result, ResultExt};
use crate::evalstat::{mcnemar_test, read_fold_csv, stratified_kfold, write_fold_csv, FoldAssignment};
use crate::fusion::{average_frame_probs, predict_classes, FusionRule, ProbabilityMatrix};
use crate::netcore::{
    predict_probs, read_checkpoint, train_with_validation, write_checkpoint, Dataset, NetworkSpec, ParamSet,
    Tensor, TrainConfig,
};

/// File locations inside an artifacts directory.
#[derive(Debug, Clone)]
pub struct ArtifactLayout {
    root: PathBuf,
}

impl ArtifactLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }

    pub fn folds(&self) -> PathBuf {
        self.root.join("folds.csv")
    }

    pub fn fold_dir(&self, fold: usize) -> PathBuf {
        self.root.join(format!("fold{fold}"))
    }

    pub fn modality_dir(&self, fold: usize, modality: Modality) -> PathBuf {
        self.fold_dir(fold).join(modality.name())
    }

    pub fn model(&self, fold: usize, modality: Modality, scope: &str) -> PathBuf {
        self.modality_dir(fold, modality).join(format!("model_{scope}.nmc"))
    }

    pub fn train_log(&self, fold: usize, modality: Modality, scope: &str) -> PathBuf {
        self.modality_dir(fold, modality).join(format!("train_log_{scope}.csv"))
    }

    pub fn probs(&self, fold: usize, modality: Modality) -> PathBuf {
        self.modality_dir(fold, modality).join("probs.csv")
    }

    pub fn fused(&self, fold: usize, rule: FusionRule) -> PathBuf {
        self.fold_dir(fold).join(format!("fused_{}.csv", rule.name()))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn accuracy_records(&self) -> PathBuf {
        self.reports().join("accuracy.csv")
    }

    pub fn significance_records(&self) -> PathBuf {
        self.reports().join("significance.csv")
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Folds stratified on (category, class).
pub fn assign_folds(manifest: &DatasetManifest, cfg: &RunConfig) -> Result<Vec<FoldAssignment>> {
    let strata: Vec<String> = manifest
        .entries()
        .iter()
        .map(|e| format!("{}/class {}", e.category, e.class_id))
        .collect();
    stratified_kfold(&strata, cfg.folds, cfg.seed)
}

/// Validates inputs, assigns folds and extracts all features. Fold
/// assignment happens before any file is decoded so stratification problems
/// surface immediately.
pub fn extract(manifest_path: &Path, cfg: &RunConfig, out: &Path) -> Result<Workspace> {
    cfg.validate()?;
    let manifest = validate_manifest(manifest_path)?;
    let folds = assign_folds(&manifest, cfg)?;
    let layout = ArtifactLayout::new(out);
    create_dir(out)?;
    cfg.save(&layout.config())?;
    write_text(&layout.manifest(), &manifest.to_csv_string())?;
    write_fold_csv(&layout.folds(), &folds, &manifest.video_ids())?;
    extract_features(manifest.entries(), cfg, out)?;
    Ok(Workspace {
        layout,
        cfg: cfg.clone(),
        manifest,
        folds,
    })
}

/// An artifacts directory after extraction, with its configuration,
/// manifest copy and folds loaded.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub layout: ArtifactLayout,
    pub cfg: RunConfig,
    pub manifest: DatasetManifest,
    pub folds: Vec<FoldAssignment>,
}

/// Stable per-job seed so every fold/modality/category model is independent
/// of the order jobs run in.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut x = base;
    for &p in parts {
        x ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(x << 6).wrapping_add(x >> 2);
        // splitmix64 finalizer
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

fn scope_tag(scope: Option<Category>) -> u64 {
    match scope {
        None => 0,
        Some(c) => 1 + c as u64,
    }
}

fn scope_name(scope: Option<Category>) -> &'static str {
    scope.map_or("all", Category::name)
}

impl Workspace {
    pub fn open(out: &Path) -> Result<Self> {
        let layout = ArtifactLayout::new(out);
        let cfg = RunConfig::load(&layout.config())?;
        let manifest = read_manifest_copy(&layout.manifest())?;
        let folds = read_fold_csv(&layout.folds(), &manifest.video_ids())?;
        if folds.len() != cfg.folds || folds.iter().enumerate().any(|(i, f)| f.fold_index != i) {
            return Err(Error::format(layout.folds(), format!("expected folds 0..{}", cfg.folds)));
        }
        Ok(Self {
            layout,
            cfg,
            manifest,
            folds,
        })
    }

    /// Replaces the run seed, e.g. from the command line.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.cfg.seed = seed;
        self
    }

    fn fold(&self, fold: usize) -> Result<&FoldAssignment> {
        self.folds.get(fold).ok_or_else(|| {
            Error::InvalidConfig(format!("fold {fold} out of range (run has {} folds)", self.folds.len()))
        })
    }

    /// Training scopes: one per category present, or one joint scope.
    pub fn scopes(&self) -> Vec<Option<Category>> {
        if self.cfg.train_jointly {
            vec![None]
        } else {
            self.manifest.categories().into_iter().map(Some).collect()
        }
    }

    fn in_scope(&self, index: usize, scope: Option<Category>) -> bool {
        scope.is_none_or(|c| self.manifest.entries()[index].category == c)
    }

    fn scope_of(&self, index: usize) -> Option<Category> {
        if self.cfg.train_jointly {
            None
        } else {
            Some(self.manifest.entries()[index].category)
        }
    }

    fn train_config(&self, modality: Modality) -> &TrainConfig {
        match modality {
            Modality::Audio => &self.cfg.audio_train,
            Modality::Visual => &self.cfg.visual_train,
        }
    }

    /// Inputs of one video: a single tensor for audio, one per frame for
    /// visual.
    fn video_inputs(&self, index: usize, modality: Modality) -> Result<Vec<Tensor>> {
        let id = &self.manifest.entries()[index].video_id;
        match modality {
            Modality::Audio => Ok(vec![load_audio_input(self.layout.root(), id, &self.cfg)?]),
            Modality::Visual => load_visual_inputs(self.layout.root(), id),
        }
    }

    fn dataset(&self, indices: &[usize], modality: Modality) -> Result<Dataset> {
        let (mut inputs, mut labels) = (Vec::new(), Vec::new());
        for &i in indices {
            let xs = self.video_inputs(i, modality)?;
            labels.extend(std::iter::repeat_n(self.manifest.entries()[i].class_id, xs.len()));
            inputs.extend(xs);
        }
        Dataset::new(inputs, labels)
    }

    fn network(&self, modality: Modality, sample: &Tensor) -> Result<NetworkSpec> {
        let shape: [usize; 3] = sample
            .shape()
            .try_into()
            .map_err(|_| Error::Shape(format!("expected a 3-d input, got {:?}", sample.shape())))?;
        let template = match modality {
            Modality::Audio => &self.cfg.audio_net,
            Modality::Visual => &self.cfg.visual_net,
        };
        template.build(shape, self.manifest.num_classes())
    }

    /// Trains the fold's models for one modality, writing a checkpoint and a
    /// per-epoch log for every scope.
    pub fn train_fold(&self, fold: usize, modality: Modality) -> Result<()> {
        let assignment = self.fold(fold)?;
        create_dir(&self.layout.modality_dir(fold, modality))?;
        for scope in self.scopes() {
            let name = scope_name(scope);
            let ctx = || format!("fold {fold}, {modality} model ({name})");
            let pick = |ids: &[usize]| -> Vec<usize> { ids.iter().copied().filter(|&i| self.in_scope(i, scope)).collect() };
            let train_ids = pick(&assignment.train);
            if train_ids.is_empty() {
                return Err(Error::InsufficientData("no training videos".into()).context(ctx()));
            }
            let train_set = self.dataset(&train_ids, modality).context(ctx)?;
            let val_set = self.dataset(&pick(&assignment.val), modality).context(ctx)?;
            let spec = self.network(modality, &train_set.inputs[0]).context(ctx)?;
            let mut tcfg = self.train_config(modality).clone();
            tcfg.seed = derive_seed(self.cfg.seed, &[fold as u64, modality as u64, scope_tag(scope)]);
            let report = train_with_validation(&spec, &train_set, Some(&val_set), &tcfg).context(ctx)?;

            write_checkpoint(&self.layout.model(fold, modality, name), &spec, &report.params)?;
            let mut log = String::from("epoch,loss,val_accuracy\n");
            for (e, loss) in report.loss_history.iter().enumerate() {
                let val = report.val_accuracy.get(e).map_or(String::new(), |v| v.to_string());
                writeln!(log, "{},{loss},{val}", e + 1).unwrap();
            }
            write_text(&self.layout.train_log(fold, modality, name), &log)?;
        }
        Ok(())
    }

    /// Class probabilities for every test video of the fold, from the saved
    /// checkpoints. Visual videos average their per-frame outputs.
    pub fn predict_fold(&self, fold: usize, modality: Modality) -> Result<ProbabilityMatrix> {
        let assignment = self.fold(fold)?;
        let mut models: BTreeMap<&str, (NetworkSpec, ParamSet)> = BTreeMap::new();
        let (mut ids, mut columns) = (Vec::new(), Vec::new());
        for &i in &assignment.test {
            let name = scope_name(self.scope_of(i));
            let ctx = || format!("fold {fold}, {modality} prediction");
            if !models.contains_key(name) {
                models.insert(name, read_checkpoint(&self.layout.model(fold, modality, name)).context(ctx)?);
            }
            let (spec, params) = &models[name];
            let inputs = self.video_inputs(i, modality)?;
            let probs = predict_probs(spec, params, &inputs).context(ctx)?;
            let frames: Vec<Vec<f64>> = probs.columns().map(<[f64]>::to_vec).collect();
            columns.push(average_frame_probs(&frames)?);
            ids.push(self.manifest.entries()[i].video_id.clone());
        }
        let matrix = ProbabilityMatrix::from_columns(self.manifest.class_ids(), ids, columns)?;
        matrix.write_csv(&self.layout.probs(fold, modality))?;
        Ok(matrix)
    }

    pub fn fuse_fold(&self, fold: usize, rule: FusionRule) -> Result<ProbabilityMatrix> {
        self.fold(fold)?;
        let visual = ProbabilityMatrix::read_csv(&self.layout.probs(fold, Modality::Visual))?;
        let audio = ProbabilityMatrix::read_csv(&self.layout.probs(fold, Modality::Audio))?;
        let fused = rule
            .fuse(&[&visual, &audio], self.cfg.product_floor)
            .context(|| format!("fold {fold}, {rule} fusion"))?;
        fused.write_csv(&self.layout.fused(fold, rule))?;
        Ok(fused)
    }

    /// Per-fold, per-category accuracies and McNemar tests, written to
    /// `reports/accuracy.csv` and `reports/significance.csv`.
    pub fn evaluate(&self) -> Result<(Vec<AccuracyRecord>, Vec<SignificanceRecord>)> {
        let (mut acc, mut sig) = (Vec::new(), Vec::new());
        let truth_of: BTreeMap<&str, (usize, Category)> = self
            .manifest
            .entries()
            .iter()
            .map(|e| (e.video_id.as_str(), (e.class_id, e.category)))
            .collect();
        for fold in 0..self.folds.len() {
            let mut preds: BTreeMap<Condition, (Vec<String>, Vec<usize>)> = BTreeMap::new();
            for cond in Condition::ALL {
                let path = match cond {
                    Condition::Visual => self.layout.probs(fold, Modality::Visual),
                    Condition::Audio => self.layout.probs(fold, Modality::Audio),
                    Condition::Product => self.layout.fused(fold, FusionRule::Product),
                    Condition::Sum => self.layout.fused(fold, FusionRule::Sum),
                };
                let m = ProbabilityMatrix::read_csv(&path)?;
                let p = predict_classes(&m)?.into_inner();
                preds.insert(cond, (m.sample_ids().to_vec(), p));
            }
            let ids = &preds[&Condition::Visual].0;
            if preds.values().any(|(other, _)| other != ids) {
                return Err(Error::Alignment(format!("fold {fold}: probability files list different videos")));
            }
            for cat in self.manifest.categories() {
                let rows: Vec<usize> = (0..ids.len())
                    .filter(|&n| truth_of.get(ids[n].as_str()).is_some_and(|t| t.1 == cat))
                    .collect();
                let truth: Vec<usize> = rows.iter().map(|&n| truth_of[ids[n].as_str()].0).collect();
                let subset = |c: Condition| -> Vec<usize> { rows.iter().map(|&n| preds[&c].1[n]).collect() };
                for cond in Condition::ALL {
                    let p = subset(cond);
                    acc.push(AccuracyRecord {
                        fold,
                        category: cat,
                        condition: cond,
                        correct: p.iter().zip(&truth).filter(|(a, b)| a == b).count(),
                        total: truth.len(),
                    });
                }
                for cmp in Comparison::ALL {
                    let (a, b) = cmp.pair();
                    let r = mcnemar_test(&subset(a), &subset(b), &truth, self.cfg.mcnemar)?;
                    sig.push(SignificanceRecord {
                        fold,
                        category: cat,
                        comparison: cmp,
                        b: r.table.b,
                        c: r.table.c,
                        p_value: r.p_value,
                        verdict: r.verdict,
                    });
                }
            }
        }
        create_dir(&self.layout.reports())?;
        write_text(&self.layout.accuracy_records(), &accuracy_csv(&acc))?;
        write_text(&self.layout.significance_records(), &significance_csv(&sig))?;
        Ok((acc, sig))
    }

    /// Renders every table from the records written by [`Workspace::evaluate`].
    pub fn report(&self) -> Result<()> {
        let acc = parse_accuracy_csv(&read_text(&self.layout.accuracy_records())?)?;
        let sig = parse_significance_csv(&read_text(&self.layout.significance_records())?)?;
        write_reports(&self.layout.reports(), &acc, &sig)
    }

    /// Train, predict and fuse every fold, then evaluate and report.
    pub fn run_all(&self) -> Result<Vec<AccuracyRecord>> {
        for fold in 0..self.folds.len() {
            for modality in Modality::ALL {
                self.train_fold(fold, modality)?;
                self.predict_fold(fold, modality)?;
            }
            for rule in FusionRule::ALL {
                self.fuse_fold(fold, rule)?;
            }
        }
        let (acc, _) = self.evaluate()?;
        self.report()?;
        Ok(acc)
    }
}

/// The whole experiment: extraction, per-fold training and prediction for
/// both modalities, fusion with both rules, evaluation and reports.
pub fn run_experiment(manifest_path: &Path, cfg: &RunConfig, out: &Path) -> Result<Vec<AccuracyRecord>> {
    extract(manifest_path, cfg, out)?.run_all()
}
