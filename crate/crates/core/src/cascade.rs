//! Cascade training and inference.
//!
//! A model is a face-box refiner followed by general stages shared by every
//! face and then `M = 2^K + 1` domain-specific cascades. At inference the
//! domain is re-predicted from the current shape before every domain stage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{derive_seed, perturb_bbox, DEFAULT_JITTER};
use crate::error::{Error, Result};
use crate::evaluation::{normalized_error, ErrorNormalization};
use crate::features::{context_features, dense_box_features, FeatureConfig};
use crate::raster::GrayImage;
use crate::regression::{solve_weighted_ridge, RidgeProblem, WeakRegressor};
use crate::shape::{apply_bbox_delta, place_mean_shape, shape_to_bbox, BoundingBox, Sample, Shape};
use crate::subspace::{
    domain_count, fuzzy_weight, normalize_shape, DomainLabel, FuzzySchedule, Memberships,
    ShapeSubspace,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub n_bbox_stages: usize,
    pub n_general: usize,
    pub n_domain: usize,
    pub k: usize,
    pub lambda: f64,
    pub schedule: FuzzySchedule,
    pub features: FeatureConfig,
    /// Initial boxes per training sample: the provided box plus
    /// `n_init − 1` perturbed copies.
    pub n_init: usize,
    pub init_jitter: f64,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            n_bbox_stages: 1,
            n_general: 2,
            n_domain: 3,
            k: 2,
            lambda: 10000.0,
            schedule: FuzzySchedule::default(),
            features: FeatureConfig::default(),
            n_init: 1,
            init_jitter: DEFAULT_JITTER,
            seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.schedule.len() != self.n_domain {
            return Err(Error::InvalidConfig(format!(
                "fuzzy schedule has {} values but there are {} domain stages",
                self.schedule.len(),
                self.n_domain
            )));
        }
        if self.n_domain > 0
            && (self.k == 0 || self.k > 8) {
                return Err(Error::InvalidConfig(format!("K must be in 1..=8, got {}", self.k)));
            }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.n_init == 0 {
            return Err(Error::InvalidConfig("n_init must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.init_jitter) {
            return Err(Error::InvalidConfig(format!(
                "init_jitter must be in [0, 0.5), got {}",
                self.init_jitter
            )));
        }
        Ok(())
    }

    pub fn domain_count(&self) -> usize {
        if self.n_domain == 0 {
            0
        } else {
            domain_count(self.k)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DacCsrModel {
    pub(crate) config: CascadeConfig,
    pub(crate) n_landmarks: usize,
    pub(crate) bbox_refiners: Vec<WeakRegressor>,
    pub(crate) mean_shape: Shape,
    pub(crate) general: Vec<WeakRegressor>,
    pub(crate) subspace: Option<ShapeSubspace>,
    /// `domains[m − 1][n − 1]` is stage `n` of domain `m`.
    pub(crate) domains: Vec<Vec<WeakRegressor>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    BoundingBox,
    General,
    Domain(u32),
}

/// Training loss of one stage over its own estimate track.
///
/// `weighted_loss_*` is `Σ w_i ‖t_i‖² / Σ w_i` with the stage's own weights;
/// the ridge solution can never increase it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLoss {
    pub kind: StageKind,
    pub stage: usize,
    pub mean_error_before: f64,
    pub mean_error_after: f64,
    pub weighted_loss_before: f64,
    pub weighted_loss_after: f64,
    /// Mean error over the track's own domain members (all instances for
    /// the box and general stages).
    pub member_error_before: f64,
    pub member_error_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub n_instances: usize,
    pub stages: Vec<StageLoss>,
    pub refiner_fallbacks: usize,
}

impl TrainingReport {
    pub fn track(&self, kind: StageKind) -> impl Iterator<Item = &StageLoss> {
        self.stages.iter().filter(move |s| s.kind == kind)
    }
}

/// Per-detection record of the inference path.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectTrace {
    pub refined_box: BoundingBox,
    pub box_fallback: bool,
    /// Estimate after mean-shape placement and after every later stage.
    pub shapes: Vec<Shape>,
    /// Domain chosen before each domain stage.
    pub domain_labels: Vec<DomainLabel>,
}

struct Instance<'a> {
    image: &'a GrayImage,
    gt: &'a Shape,
    gt_box: BoundingBox,
}

fn par_features<F>(n: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

fn weighted_loss(targets: &[Vec<f64>], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    targets
        .iter()
        .zip(weights)
        .map(|(t, w)| w * t.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / total
}

fn errors(instances: &[Instance], shapes: &[Shape]) -> Result<Vec<f64>> {
    instances
        .iter()
        .zip(shapes)
        .map(|(inst, s)| normalized_error(s, inst.gt, ErrorNormalization::FaceSize, &inst.gt_box))
        .collect()
}

fn mean_over(errors: &[f64], members: Option<&[bool]>) -> f64 {
    let (sum, n) = errors
        .iter()
        .enumerate()
        .filter(|(i, _)| members.is_none_or(|m| m[*i]))
        .fold((0.0, 0usize), |(s, n), (_, e)| (s + e, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// One ridge stage on a shape track: fits, applies, and reports the losses.
fn shape_stage(
    instances: &[Instance],
    shapes: &mut [Shape],
    weights: &[f64],
    cfg: &CascadeConfig,
    members: Option<&[bool]>,
    kind: StageKind,
    stage: usize,
) -> Result<(WeakRegressor, StageLoss)> {
    let features = par_features(instances.len(), |i| {
        context_features(instances[i].image, &shapes[i], &cfg.features)
    })?;
    let targets: Vec<Vec<f64>> = instances
        .iter()
        .zip(shapes.iter())
        .map(|(inst, s)| inst.gt.difference(s))
        .collect();
    let before = errors(instances, shapes)?;
    let problem = RidgeProblem::from_rows(&features, &targets, weights.to_vec(), cfg.lambda)?;
    drop(features);
    let reg = solve_weighted_ridge(&problem)?;
    let residuals = update_shapes(&reg, problem.features(), shapes, &targets)?;
    let after = errors(instances, shapes)?;
    let loss = StageLoss {
        kind,
        stage,
        mean_error_before: mean_over(&before, None),
        mean_error_after: mean_over(&after, None),
        weighted_loss_before: weighted_loss(&targets, weights),
        weighted_loss_after: weighted_loss(&residuals, weights),
        member_error_before: mean_over(&before, members),
        member_error_after: mean_over(&after, members),
    };
    log::info!(
        "{kind:?} stage {stage}: mean error {:.5} -> {:.5}",
        loss.mean_error_before,
        loss.mean_error_after
    );
    Ok((reg, loss))
}

/// Applies `reg` to every feature row, moves the shapes, returns residuals.
fn update_shapes(
    reg: &WeakRegressor,
    features: &nalgebra::DMatrix<f64>,
    shapes: &mut [Shape],
    targets: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let deltas = features * reg.projection().transpose();
    let mut residuals = Vec::with_capacity(shapes.len());
    for (i, s) in shapes.iter_mut().enumerate() {
        let d: Vec<f64> = deltas
            .row(i)
            .iter()
            .zip(reg.offset().iter())
            .map(|(a, e)| a + e)
            .collect();
        *s = s.add_delta(&d)?;
        residuals.push(targets[i].iter().zip(&d).map(|(t, d)| t - d).collect());
    }
    Ok(residuals)
}

fn mean_normalized_shape(shapes: &[&Shape]) -> Result<Shape> {
    let mut acc = vec![0.0; shapes[0].as_slice().len()];
    for s in shapes {
        for (a, v) in acc.iter_mut().zip(normalize_shape(s)?) {
            *a += v / shapes.len() as f64;
        }
    }
    Shape::new(acc)
}

/// Trains the full cascade and reports per-stage training losses.
pub fn train(samples: &[Sample], cfg: &CascadeConfig) -> Result<(DacCsrModel, TrainingReport)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, actual: 0 });
    }
    let n_landmarks = samples[0].require_gt()?.num_landmarks();
    let mut instances = Vec::with_capacity(samples.len() * cfg.n_init);
    let mut boxes = Vec::with_capacity(samples.len() * cfg.n_init);
    for (i, s) in samples.iter().enumerate() {
        let gt = s.require_gt()?;
        if gt.num_landmarks() != n_landmarks {
            return Err(Error::InvalidInput(format!(
                "training sample {i} has {} landmarks, expected {n_landmarks}",
                gt.num_landmarks()
            )));
        }
        let gt_box = shape_to_bbox(gt)
            .map_err(|e| Error::InvalidInput(format!("training sample {i}: {e}")))?;
        for j in 0..cfg.n_init {
            let b = if j == 0 {
                s.bbox
            } else {
                let seed = derive_seed(cfg.seed, (i * cfg.n_init + j) as u64);
                perturb_bbox(&s.bbox, seed, cfg.init_jitter)?
            };
            instances.push(Instance {
                image: &s.image,
                gt,
                gt_box,
            });
            boxes.push(b);
        }
    }
    let mut report = TrainingReport {
        n_instances: instances.len(),
        ..Default::default()
    };

    let mut bbox_refiners = Vec::with_capacity(cfg.n_bbox_stages);
    for stage in 1..=cfg.n_bbox_stages {
        let features = par_features(instances.len(), |i| {
            dense_box_features(instances[i].image, &boxes[i], &cfg.features)
        })?;
        let targets: Vec<Vec<f64>> = instances
            .iter()
            .zip(&boxes)
            .map(|(inst, b)| inst.gt_box.delta_from(b).to_vec())
            .collect();
        let weights = vec![1.0; instances.len()];
        let problem = RidgeProblem::from_rows(&features, &targets, weights.clone(), cfg.lambda)?;
        drop(features);
        let reg = solve_weighted_ridge(&problem)?;
        let box_error = |boxes: &[BoundingBox]| {
            instances
                .iter()
                .zip(boxes)
                .map(|(inst, b)| {
                    let d = inst.gt_box.delta_from(b);
                    d.iter().map(|v| v.abs()).sum::<f64>()
                        / 4.0
                        / (inst.gt_box.width() * inst.gt_box.height()).sqrt()
                })
                .sum::<f64>()
                / instances.len() as f64
        };
        let before = box_error(&boxes);
        let deltas = problem.features() * reg.projection().transpose();
        let mut residuals = Vec::with_capacity(boxes.len());
        for (i, b) in boxes.iter_mut().enumerate() {
            let d: Vec<f64> = deltas
                .row(i)
                .iter()
                .zip(reg.offset().iter())
                .map(|(a, e)| a + e)
                .collect();
            match apply_bbox_delta(b, &d) {
                Ok(nb) => *b = nb,
                Err(_) => report.refiner_fallbacks += 1,
            }
            residuals.push(targets[i].iter().zip(&d).map(|(t, d)| t - d).collect());
        }
        let after = box_error(&boxes);
        report.stages.push(StageLoss {
            kind: StageKind::BoundingBox,
            stage,
            mean_error_before: before,
            mean_error_after: after,
            member_error_before: before,
            member_error_after: after,
            weighted_loss_before: weighted_loss(&targets, &weights),
            weighted_loss_after: weighted_loss(&residuals, &weights),
        });
        bbox_refiners.push(reg);
    }

    let gts: Vec<&Shape> = samples.iter().map(|s| s.require_gt()).collect::<Result<_>>()?;
    let mean_shape = mean_normalized_shape(&gts)?;
    let mut shapes = boxes
        .iter()
        .map(|b| place_mean_shape(&mean_shape, b))
        .collect::<Result<Vec<_>>>()?;

    let unit = vec![1.0; instances.len()];
    let mut general = Vec::with_capacity(cfg.n_general);
    for stage in 1..=cfg.n_general {
        let (reg, loss) = shape_stage(&instances, &mut shapes, &unit, cfg, None, StageKind::General, stage)?;
        general.push(reg);
        report.stages.push(loss);
    }

    let (subspace, domains) = if cfg.n_domain == 0 {
        (None, Vec::new())
    } else {
        let normalized = shapes.iter().map(normalize_shape).collect::<Result<Vec<_>>>()?;
        let subspace = ShapeSubspace::fit(&normalized, cfg.k)?;
        let memberships: Vec<Memberships> = normalized
            .iter()
            .map(|x| subspace.training_memberships(&subspace.project(x)?))
            .collect::<Result<_>>()?;
        let mut domains = Vec::with_capacity(subspace.domain_count());
        for m in 1..=subspace.domain_count() as u32 {
            let label = DomainLabel::new(m);
            let members: Vec<bool> = memberships.iter().map(|ms| ms.contains(label)).collect();
            if !members.contains(&true) {
                log::warn!("domain {m} has no training members; its cascade is fit on fuzzy weights alone");
            }
            let mut track = shapes.clone();
            let mut cascade = Vec::with_capacity(cfg.n_domain);
            for stage in 1..=cfg.n_domain {
                let weights: Vec<f64> = memberships
                    .iter()
                    .map(|ms| fuzzy_weight(ms, label, stage, &cfg.schedule))
                    .collect();
                let (reg, loss) =
                    shape_stage(
                    &instances,
                    &mut track,
                    &weights,
                    cfg,
                    Some(&members),
                    StageKind::Domain(m),
                    stage,
                )?;
                cascade.push(reg);
                report.stages.push(loss);
            }
            domains.push(cascade);
        }
        (Some(subspace), domains)
    };

    let model = DacCsrModel {
        config: cfg.clone(),
        n_landmarks,
        bbox_refiners,
        mean_shape,
        general,
        subspace,
        domains,
    };
    Ok((model, report))
}

impl DacCsrModel {
    /// Assembles a model from stored parts, checking every dimension.
    pub fn from_parts(
        config: CascadeConfig,
        n_landmarks: usize,
        bbox_refiners: Vec<WeakRegressor>,
        mean_shape: Shape,
        general: Vec<WeakRegressor>,
        subspace: Option<ShapeSubspace>,
        domains: Vec<Vec<WeakRegressor>>,
    ) -> Result<Self> {
        config.validate()?;
        let bad = |m: String| Err(Error::ModelFormat(m));
        if mean_shape.num_landmarks() != n_landmarks {
            return bad("mean shape landmark count differs from the model's".into());
        }
        if bbox_refiners.len() != config.n_bbox_stages || general.len() != config.n_general {
            return bad("stage counts disagree with the configuration".into());
        }
        let dense = config.features.dense_dim()?;
        let context = config.features.context_dim(n_landmarks)?;
        for r in &bbox_refiners {
            if r.input_dim() != dense || r.output_dim() != 4 {
                return bad("box refiner has wrong dimensions".into());
            }
        }
        let shape_ok = |r: &WeakRegressor| r.input_dim() == context && r.output_dim() == 2 * n_landmarks;
        if !general.iter().all(shape_ok) {
            return bad("general stage has wrong dimensions".into());
        }
        match &subspace {
            None if config.n_domain == 0 && domains.is_empty() => {}
            Some(sub) if config.n_domain > 0 => {
                if sub.k() != config.k || sub.dim() != 2 * n_landmarks {
                    return bad("shape subspace disagrees with the configuration".into());
                }
                if domains.len() != sub.domain_count()
                    || domains.iter().any(|d| d.len() != config.n_domain || !d.iter().all(shape_ok))
                {
                    return bad(format!(
                        "expected {} domain cascades of {} stages",
                        sub.domain_count(),
                        config.n_domain
                    ));
                }
            }
            _ => return bad("domain stages and subspace are inconsistent".into()),
        }
        Ok(DacCsrModel {
            config,
            n_landmarks,
            bbox_refiners,
            mean_shape,
            general,
            subspace,
            domains,
        })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    pub fn mean_shape(&self) -> &Shape {
        &self.mean_shape
    }

    pub fn bbox_refiners(&self) -> &[WeakRegressor] {
        &self.bbox_refiners
    }

    pub fn general(&self) -> &[WeakRegressor] {
        &self.general
    }

    pub fn subspace(&self) -> Option<&ShapeSubspace> {
        self.subspace.as_ref()
    }

    pub fn domains(&self) -> &[Vec<WeakRegressor>] {
        &self.domains
    }

    pub fn domain_regressor(&self, domain: DomainLabel, stage: usize) -> Option<&WeakRegressor> {
        self.domains.get(domain.index())?.get(stage.checked_sub(1)?)
    }

    /// Total regressor applications per detection.
    pub fn stage_count(&self) -> usize {
        self.bbox_refiners.len() + self.general.len() + self.config.n_domain
    }

    /// The same model with the domain-specific cascades removed.
    pub fn general_only(&self) -> DacCsrModel {
        let mut config = self.config.clone();
        config.n_domain = 0;
        config.schedule = FuzzySchedule::new_unchecked(Vec::new());
        DacCsrModel {
            config,
            n_landmarks: self.n_landmarks,
            bbox_refiners: self.bbox_refiners.clone(),
            mean_shape: self.mean_shape.clone(),
            general: self.general.clone(),
            subspace: None,
            domains: Vec::new(),
        }
    }

    /// Runs the box refiners; falls back to the input box if any stage
    /// produces an invalid box or one that leaves the image.
    pub fn refine_box(&self, image: &GrayImage, bbox: &BoundingBox) -> Result<(BoundingBox, bool)> {
        let mut b = *bbox;
        for reg in &self.bbox_refiners {
            let f = dense_box_features(image, &b, &self.config.features)?;
            let next = apply_bbox_delta(&b, &reg.apply(&f)?)
                .and_then(|nb| dense_box_features(image, &nb, &self.config.features).map(|_| nb));
            match next {
                Ok(nb) => b = nb,
                Err(e) => {
                    log::warn!("box refinement failed ({e}); using the input box");
                    return Ok((*bbox, true));
                }
            }
        }
        Ok((b, false))
    }

    pub fn apply_stage(&self, reg: &WeakRegressor, image: &GrayImage, shape: &Shape) -> Result<Shape> {
        let f = context_features(image, shape, &self.config.features)?;
        shape.add_delta(&reg.apply(&f)?)
    }

    /// Domain predicted from a shape estimate.
    pub fn predict_domain(&self, shape: &Shape) -> Result<Option<DomainLabel>> {
        match &self.subspace {
            None => Ok(None),
            Some(sub) => Ok(Some(sub.predict_domain(&sub.shape_coefficients(shape)?)?)),
        }
    }

    pub fn detect(&self, image: &GrayImage, bbox: &BoundingBox) -> Result<Shape> {
        Ok(self.detect_traced(image, bbox)?.0)
    }

    pub fn detect_traced(&self, image: &GrayImage, bbox: &BoundingBox) -> Result<(Shape, DetectTrace)> {
        let (refined_box, box_fallback) = self.refine_box(image, bbox)?;
        let mut shape = place_mean_shape(&self.mean_shape, &refined_box)?;
        let mut shapes = vec![shape.clone()];
        for reg in &self.general {
            shape = self.apply_stage(reg, image, &shape)?;
            shapes.push(shape.clone());
        }
        let mut domain_labels = Vec::with_capacity(self.config.n_domain);
        for stage in 1..=self.config.n_domain {
            let label = self
                .predict_domain(&shape)?
                .expect("domain stages imply a subspace");
            let reg = self
                .domain_regressor(label, stage)
                .expect("predicted labels index existing cascades");
            shape = self.apply_stage(reg, image, &shape)?;
            shapes.push(shape.clone());
            domain_labels.push(label);
        }
        Ok((
            shape,
            DetectTrace {
                refined_box,
                box_fallback,
                shapes,
                domain_labels,
            },
        ))
    }

    /// Detects every sample in parallel, preserving order.
    pub fn detect_all(&self, samples: &[Sample]) -> Result<Vec<(Shape, DetectTrace)>> {
        samples
            .par_iter()
            .map(|s| self.detect_traced(&s.image, &s.bbox))
            .collect()
    }
}
