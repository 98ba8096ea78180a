//! Run configuration: every tunable of the pipeline as `key = value` lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::bgmodel::BgModelConfig;
use crate::error::{Error, Result};
use crate::fuse::FusionConfig;
use crate::judge::{BetaRule, JudgeConfig};
use crate::registration::{MotionModel, RegistrationConfig};
use crate::tradtrack::TrackerConfig;

use super::kv::KvDocument;
use super::read_text;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bg: BgModelConfig<f64>,
    pub registration: RegistrationConfig,
    pub tracker: TrackerConfig<f64>,
    pub judge: JudgeConfig<f64>,
    pub fusion: FusionConfig<f64>,
    /// IoU gate for evaluation matching.
    pub eval_iou: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bg: BgModelConfig::default(),
            registration: RegistrationConfig::default(),
            tracker: TrackerConfig::default(),
            judge: JudgeConfig::default(),
            fusion: FusionConfig::default(),
            eval_iou: 0.5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.bg.validate()?;
        self.registration.validate()?;
        self.tracker.validate()?;
        self.judge.validate()?;
        self.fusion.validate()?;
        if !(self.eval_iou > 0.0 && self.eval_iou < 1.0) {
            return Err(Error::Config(format!("eval_iou {} outside (0, 1)", self.eval_iou)));
        }
        if self.judge.theta_threshold != self.fusion.theta_threshold {
            return Err(Error::Config("judge and fusion theta thresholds differ".into()));
        }
        Ok(())
    }

    /// Parses and range-checks a configuration; unset keys keep their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = KvDocument::parse(text, path)?;
        if let Some(s) = doc.sections.get(1) {
            return Err(doc.error(s.line, "configuration files have no sections"));
        }
        let mut c = RunConfig::default();
        let mut beta_seen: Option<usize> = None;
        for e in &doc.top().entries {
            match e.key.as_str() {
                "grid_cell" => c.bg.grid_cell = doc.value(e)?,
                "theta_v" => c.bg.theta_v = doc.value(e)?,
                "decay_lambda" => c.bg.decay_lambda = doc.value(e)?,
                "theta_s" => c.bg.theta_s = doc.value(e)?,
                "theta_d" => c.bg.theta_d = doc.value(e)?,
                "min_blob_area" => c.bg.min_blob_area = doc.value(e)?,
                "variance_floor" => c.bg.variance_floor = doc.value(e)?,
                "pyramid_levels" => c.registration.pyramid_levels = doc.value(e)?,
                "max_iterations" => c.registration.max_iterations = doc.value(e)?,
                "convergence_eps" => c.registration.convergence_eps = doc.value(e)?,
                "motion_model" => {
                    c.registration.model = match e.value.as_str() {
                        "affine" => MotionModel::Affine,
                        "translation" => MotionModel::Translation,
                        other => {
                            return Err(doc.error(e.line, format!("motion_model `{other}` is not affine or translation")))
                        }
                    }
                }
                "outlier_sigma" => c.registration.outlier_sigma = doc.value(e)?,
                "tracker_iou_gate" => c.tracker.iou_gate = doc.value(e)?,
                "max_age" => c.tracker.max_age = doc.value(e)?,
                "min_hits" => c.tracker.min_hits = doc.value(e)?,
                "tracker_alpha" => c.tracker.alpha = doc.value(e)?,
                "tracker_beta" => c.tracker.beta = doc.value(e)?,
                "frame_gap" => c.judge.frame_gap = doc.value(e)?,
                "lambda" => c.judge.lambda = doc.value(e)?,
                "beta_d_fraction" | "beta_d_pixels" => {
                    if let Some(prev) = beta_seen {
                        return Err(doc.error(e.line, format!("beta_d already set on line {prev}")));
                    }
                    beta_seen = Some(e.line);
                    let v: f64 = doc.value(e)?;
                    c.judge.beta_d = if e.key == "beta_d_fraction" {
                        BetaRule::Relative(v)
                    } else {
                        BetaRule::Absolute(v)
                    };
                }
                "patch_width" => c.judge.patch_size.0 = doc.value(e)?,
                "patch_height" => c.judge.patch_size.1 = doc.value(e)?,
                "boundary_margin" => c.judge.boundary_margin = doc.value(e)?,
                "ssim_r1" => c.judge.r1 = doc.value(e)?,
                "ssim_r2" => c.judge.r2 = doc.value(e)?,
                "theta_threshold" => {
                    let v: f64 = doc.value(e)?;
                    c.judge.theta_threshold = v;
                    c.fusion.theta_threshold = v;
                }
                "prior_mota" => {
                    c.fusion.prior_mota = match e.value.as_str() {
                        "none" => None,
                        _ => Some(doc.value(e)?),
                    }
                }
                "mota_gate" => c.fusion.mota_gate = doc.value(e)?,
                "max_fg_ratio" => c.fusion.max_fg_ratio = doc.value(e)?,
                "component_radius" => c.fusion.component_radius = doc.value(e)?,
                "s_min_fraction" => c.fusion.s_min_fraction = doc.value(e)?,
                "alpha_b" => c.fusion.alpha_b = doc.value(e)?,
                "mota_deep" => c.fusion.mota_deep = doc.value(e)?,
                "mvf1_deep" => c.fusion.mvf1_deep = doc.value(e)?,
                "r" => c.fusion.r = doc.value(e)?,
                "assoc_iou_gate" => c.fusion.assoc_iou_gate = doc.value(e)?,
                "eval_iou" => c.eval_iou = doc.value(e)?,
                other => return Err(doc.error(e.line, format!("unknown key `{other}`"))),
            }
        }
        c.validate().map_err(|err| match err {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }

    /// Renders every key; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let b = &self.bg;
        kv("grid_cell", b.grid_cell.to_string());
        kv("theta_v", b.theta_v.to_string());
        kv("decay_lambda", b.decay_lambda.to_string());
        kv("theta_s", b.theta_s.to_string());
        kv("theta_d", b.theta_d.to_string());
        kv("min_blob_area", b.min_blob_area.to_string());
        kv("variance_floor", b.variance_floor.to_string());
        let r = &self.registration;
        kv("pyramid_levels", r.pyramid_levels.to_string());
        kv("max_iterations", r.max_iterations.to_string());
        kv("convergence_eps", r.convergence_eps.to_string());
        kv(
            "motion_model",
            match r.model {
                MotionModel::Affine => "affine",
                MotionModel::Translation => "translation",
            }
            .into(),
        );
        kv("outlier_sigma", r.outlier_sigma.to_string());
        let t = &self.tracker;
        kv("tracker_iou_gate", t.iou_gate.to_string());
        kv("max_age", t.max_age.to_string());
        kv("min_hits", t.min_hits.to_string());
        kv("tracker_alpha", t.alpha.to_string());
        kv("tracker_beta", t.beta.to_string());
        let j = &self.judge;
        kv("frame_gap", j.frame_gap.to_string());
        kv("lambda", j.lambda.to_string());
        match j.beta_d {
            BetaRule::Relative(v) => kv("beta_d_fraction", v.to_string()),
            BetaRule::Absolute(v) => kv("beta_d_pixels", v.to_string()),
        }
        kv("patch_width", j.patch_size.0.to_string());
        kv("patch_height", j.patch_size.1.to_string());
        kv("boundary_margin", j.boundary_margin.to_string());
        kv("ssim_r1", j.r1.to_string());
        kv("ssim_r2", j.r2.to_string());
        kv("theta_threshold", j.theta_threshold.to_string());
        let f = &self.fusion;
        kv("prior_mota", f.prior_mota.map_or_else(|| "none".into(), |p| p.to_string()));
        kv("mota_gate", f.mota_gate.to_string());
        kv("max_fg_ratio", f.max_fg_ratio.to_string());
        kv("component_radius", f.component_radius.to_string());
        kv("s_min_fraction", f.s_min_fraction.to_string());
        kv("alpha_b", f.alpha_b.to_string());
        kv("mota_deep", f.mota_deep.to_string());
        kv("mvf1_deep", f.mvf1_deep.to_string());
        kv("r", f.r.to_string());
        kv("assoc_iou_gate", f.assoc_iou_gate.to_string());
        kv("eval_iou", self.eval_iou.to_string());
        s
    }
}
