//! Run configuration: one JSON document, every value overridable by a
//! dotted command-line key.

use std::path::{Path, PathBuf};

use railalign::evaluation::PairingMode;
use railalign::fitting::FitConfig;
use railalign::pcd_io::DEFAULT_EPSG;
use railalign::pipeline::{CleanupConfig, PipelineConfig};
use railalign::raster::DEFAULT_MAX_DIM;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Las,
    Xyzl,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    /// Taken from the file extension when absent (`.las` or text).
    pub format: Option<InputFormat>,
}

impl InputConfig {
    pub fn resolved_format(&self) -> InputFormat {
        self.format.unwrap_or_else(|| {
            let las = self
                .path
                .as_deref()
                .and_then(Path::extension)
                .is_some_and(|e| e.eq_ignore_ascii_case("las"));
            if las {
                InputFormat::Las
            } else {
                InputFormat::Xyzl
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Vertex spacing of the densified GeoJSON geometry.
    pub spacing_m: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self { spacing_m: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub reference: Option<PathBuf>,
    /// Polygon footprints for the buffer query.
    pub footprints: Option<PathBuf>,
    pub mode: PairingMode,
    pub buffer_distance_m: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            reference: None,
            footprints: None,
            mode: PairingMode::NearestPoint,
            buffer_distance_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub crs_epsg: u32,
    /// Alignment name written to the exports.
    pub name: String,
    pub classes: Vec<u8>,
    pub resolution_m: f64,
    pub max_raster_dim: usize,
    pub margin_m: f64,
    pub cleanup: CleanupConfig,
    pub fit: FitConfig,
    pub export: ExportConfig,
    pub evaluation: EvaluationConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            input: InputConfig::default(),
            crs_epsg: DEFAULT_EPSG,
            name: "alignment".into(),
            classes: p.classes,
            resolution_m: p.resolution_m,
            max_raster_dim: DEFAULT_MAX_DIM,
            margin_m: p.margin_m,
            cleanup: p.cleanup,
            fit: p.fit,
            export: ExportConfig::default(),
            evaluation: EvaluationConfig::default(),
            output_dir: PathBuf::from("run"),
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.input.path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.evaluation.reference.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.evaluation.footprints.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Sets `key` (dotted path into the JSON form) to `raw`, read as JSON
    /// when it parses and as a string otherwise.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| CliError::Usage(format!("unknown config key '{key}'")))?;
        }
        *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        *self = serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid value for '{key}': {e}")))?;
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            classes: self.classes.clone(),
            resolution_m: self.resolution_m,
            max_raster_dim: self.max_raster_dim,
            margin_m: self.margin_m,
            cleanup: self.cleanup.clone(),
            fit: self.fit.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if !(self.resolution_m > 0.0 && self.resolution_m.is_finite()) {
            return usage("resolution_m must be positive");
        }
        if self.classes.is_empty() {
            return usage("classes must not be empty");
        }
        if self.max_raster_dim == 0 {
            return usage("max_raster_dim must be positive");
        }
        if !(self.margin_m >= 0.0 && self.margin_m.is_finite()) {
            return usage("margin_m must be non-negative");
        }
        if self.cleanup.kernel_px == 0 {
            return usage("cleanup.kernel_px must be positive");
        }
        if !(self.export.spacing_m > 0.0) {
            return usage("export.spacing_m must be positive");
        }
        if !(self.evaluation.buffer_distance_m > 0.0) {
            return usage("evaluation.buffer_distance_m must be positive");
        }
        self.fit.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// Comma-separated class codes, e.g. `2,10`.
pub fn parse_classes(s: &str) -> Result<Vec<u8>, CliError> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<u8>()
                .map_err(|_| CliError::Usage(format!("invalid class code '{c}' in '{s}'")))
        })
        .collect()
}
