//! Flat `section.key = value` configuration.
//!
//! Blank lines and `#` comments are skipped. Every tracker default can be
//! overridden; unknown keys and unparseable values are rejected with the
//! line number.

use std::fmt::Write as _;
use std::str::FromStr;

use quadtrack::rklt::RkltConfig;
use quadtrack::rsst::RsstConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackerConfig {
    pub rsst: RsstConfig,
    pub rklt: RkltConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse '{value}'"))
}

impl TrackerConfig {
    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let (rs, rk) = (&mut self.rsst, &mut self.rklt);
        match key {
            "rsst.rot_range" => rs.rot_range = parse(key, value)?,
            "rsst.rot_step" => rs.rot_step = parse(key, value)?,
            "rsst.n_scales" => rs.n_scales = parse(key, value)?,
            "rsst.scale_step" => rs.scale_step = parse(key, value)?,
            "rsst.padding" => rs.padding = parse(key, value)?,
            "rsst.lambda" => rs.lambda = parse(key, value)?,
            "rsst.eta" => rs.eta = parse(key, value)?,
            "rsst.template_max_side" => rs.template_max_side = parse(key, value)?,
            "rsst.sample_max_side" => rs.sample_max_side = parse(key, value)?,
            "rsst.cell" => rs.cell = parse(key, value)?,
            "rsst.sigma_factor" => rs.sigma_factor = parse(key, value)?,
            "rsst.translation_iters" => rs.translation_iters = parse(key, value)?,
            "rklt.grid" => rk.grid = parse(key, value)?,
            "rklt.min_ncc" => rk.min_ncc = parse(key, value)?,
            "ransac.thresh" => rk.ransac.thresh = parse(key, value)?,
            "ransac.confidence" => rk.ransac.confidence = parse(key, value)?,
            "ransac.max_iters" => rk.ransac.max_iters = parse(key, value)?,
            "ransac.min_inliers" => rk.ransac.min_inliers = parse(key, value)?,
            "ransac.seed" => rk.ransac.seed = parse(key, value)?,
            "klt.levels" => rk.klt.levels = parse(key, value)?,
            "klt.window" => rk.klt.window = parse(key, value)?,
            "klt.max_iters" => rk.klt.max_iters = parse(key, value)?,
            "klt.epsilon" => rk.klt.epsilon = parse(key, value)?,
            "klt.min_eigen" => rk.klt.min_eigen = parse(key, value)?,
            "klt.min_eigen_ratio" => rk.klt.min_eigen_ratio = parse(key, value)?,
            "ic.max_iters" => rk.ic.max_iters = parse(key, value)?,
            "ic.epsilon" => rk.ic.epsilon = parse(key, value)?,
            "ic.max_halvings" => rk.ic.max_halvings = parse(key, value)?,
            "ic.template_max_side" => rk.ic.template_max_side = parse(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (rs, rk) = (&self.rsst, &self.rklt);
        vec![
            ("rsst.rot_range", rs.rot_range.to_string()),
            ("rsst.rot_step", rs.rot_step.to_string()),
            ("rsst.n_scales", rs.n_scales.to_string()),
            ("rsst.scale_step", rs.scale_step.to_string()),
            ("rsst.padding", rs.padding.to_string()),
            ("rsst.lambda", rs.lambda.to_string()),
            ("rsst.eta", rs.eta.to_string()),
            ("rsst.template_max_side", rs.template_max_side.to_string()),
            ("rsst.sample_max_side", rs.sample_max_side.to_string()),
            ("rsst.cell", rs.cell.to_string()),
            ("rsst.sigma_factor", rs.sigma_factor.to_string()),
            ("rsst.translation_iters", rs.translation_iters.to_string()),
            ("rklt.grid", rk.grid.to_string()),
            ("rklt.min_ncc", rk.min_ncc.to_string()),
            ("ransac.thresh", rk.ransac.thresh.to_string()),
            ("ransac.confidence", rk.ransac.confidence.to_string()),
            ("ransac.max_iters", rk.ransac.max_iters.to_string()),
            ("ransac.min_inliers", rk.ransac.min_inliers.to_string()),
            ("ransac.seed", rk.ransac.seed.to_string()),
            ("klt.levels", rk.klt.levels.to_string()),
            ("klt.window", rk.klt.window.to_string()),
            ("klt.max_iters", rk.klt.max_iters.to_string()),
            ("klt.epsilon", rk.klt.epsilon.to_string()),
            ("klt.min_eigen", rk.klt.min_eigen.to_string()),
            ("klt.min_eigen_ratio", rk.klt.min_eigen_ratio.to_string()),
            ("ic.max_iters", rk.ic.max_iters.to_string()),
            ("ic.epsilon", rk.ic.epsilon.to_string()),
            ("ic.max_halvings", rk.ic.max_halvings.to_string()),
            ("ic.template_max_side", rk.ic.template_max_side.to_string()),
        ]
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected 'key = value'", i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|m| CliError::Usage(format!("config line {}: {m}", i + 1)))?;
        }
        cfg.rsst
            .validate()
            .map_err(|e| CliError::Usage(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Resolved configuration as `key = value` lines; parses back to itself.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// First 16 hex digits of SHA-256 over the resolved configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
