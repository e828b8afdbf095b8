//! The pipeline stages over a run directory. Every stage computes all of its
//! outputs in memory first, then writes them and records them in the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use railalign::alignment::{assemble, to_geojson, to_ifc_minimal};
use railalign::evaluation::{buffer_query, compare_buffer_queries, evaluate, hits_geojson, BufferQueryResult, Polyline};
use railalign::fitting::{classify_and_fit, vertical_profile, FitError, SegmentFit, VerticalProfile};
use railalign::geom::Point2;
use railalign::pcd_io::{parse_xyzl, read_geojson, read_las, write_geojson, GeoFeatureSet, Geometry, LabeledPointCloud};
use railalign::pipeline::{centreline_stage, raster_stage, PipelineError};
use railalign::raster::{
    binary_to_png, heights_from_png, heights_to_png, render_orientation_hsv, world_file, GridGeometry, HeightEncoding,
    RasterGrid,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{InputFormat, RunConfig};
use crate::error::CliError;
use crate::manifest::{sha256_bytes, sha256_file, write_atomic, Freshness, Manifest, StageRecord};

pub const OCCUPANCY_PNG: &str = "occupancy.png";
pub const OCCUPANCY_PGW: &str = "occupancy.pgw";
pub const HEIGHTS_PNG: &str = "heights.png";
pub const HEIGHTS_PGW: &str = "heights.pgw";
pub const FIT_REPORT: &str = "fit_report.json";
pub const BRANCHES: &str = "branches.geojson";
pub const ORIENTATION_PNG: &str = "orientation.png";
pub const ORIENTATION_PGW: &str = "orientation.pgw";
pub const ALIGNMENT_GEOJSON: &str = "alignment.geojson";
pub const ALIGNMENT_IFC: &str = "alignment.ifc";
pub const EVAL: &str = "eval.json";
pub const BUFFER: &str = "buffer.json";
pub const HITS: &str = "hits.geojson";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Rasterize,
    Fit,
    Export,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Rasterize => "rasterize",
            Stage::Fit => "fit",
            Stage::Export => "export",
            Stage::Evaluate => "evaluate",
        }
    }

    fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Rasterize => None,
            Stage::Fit => Some(Stage::Rasterize),
            Stage::Export => Some(Stage::Fit),
            Stage::Evaluate => Some(Stage::Export),
        }
    }
}

/// Contents of `fit_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub crs_epsg: u32,
    pub segment_kinds: Vec<String>,
    pub total_length_m: f64,
    /// Fitted elements of the principal chain, in order.
    pub fits: Vec<SegmentFit>,
    pub pixel_counts: Vec<usize>,
    pub profile: Option<VerticalProfile>,
    pub chains: usize,
    pub hough_lines: usize,
    pub circles: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RasterData {
    geometry: GridGeometry,
    height_encoding: HeightEncoding,
}

pub struct Runner {
    cfg: RunConfig,
    dir: PathBuf,
    force: bool,
}

fn json_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Line geometries of a feature set. A file written by the export stage
/// contributes only its whole-alignment MultiLineString.
pub fn line_parts(set: &GeoFeatureSet) -> Vec<Vec<Point2>> {
    let whole: Vec<_> = set.features.iter().filter(|f| f.properties.contains_key("segment_count")).collect();
    let feats: Vec<_> = if whole.is_empty() { set.features.iter().collect() } else { whole };
    let mut out = Vec::new();
    for f in feats {
        match &f.geometry {
            Geometry::LineString(p) => out.push(p.clone()),
            Geometry::MultiLineString(ls) => out.extend(ls.iter().cloned()),
            Geometry::Polygon(_) => {}
        }
    }
    out
}

/// Joins consecutive parts, dropping the repeated vertex where they touch.
pub fn concat_parts(parts: &[Vec<Point2>]) -> Vec<Point2> {
    let mut out: Vec<Point2> = Vec::new();
    for p in parts {
        for &v in p {
            if out.last().is_none_or(|l| l.distance(v) > 1e-9) {
                out.push(v);
            }
        }
    }
    out
}

impl Runner {
    pub fn new(cfg: RunConfig, force: bool) -> Self {
        let dir = cfg.output_dir.clone();
        Self { cfg, dir, force }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `stage` after making sure its upstream artifacts are usable.
    pub fn command(&self, stage: Stage) -> Result<(), CliError> {
        if let Some(up) = stage.upstream() {
            self.require(up)?;
        }
        self.run(stage)
    }

    /// All stages; evaluation only when a reference is configured.
    pub fn pipeline(&self) -> Result<(), CliError> {
        for stage in [Stage::Rasterize, Stage::Fit, Stage::Export] {
            self.run(stage)?;
        }
        if self.cfg.evaluation.reference.is_some() {
            self.run(Stage::Evaluate)?;
        }
        Ok(())
    }

    fn require(&self, stage: Stage) -> Result<(), CliError> {
        if let Some(up) = stage.upstream() {
            self.require(up)?;
        }
        let manifest = Manifest::load(&self.dir)?;
        match manifest.freshness(&self.dir, stage.name(), &self.params(stage), &self.inputs(stage)?)? {
            Freshness::Fresh => Ok(()),
            Freshness::Missing => self.run(stage),
            Freshness::Stale(_) if self.force => self.run(stage),
            Freshness::Stale(why) => Err(CliError::Stale(why)),
        }
    }

    fn run(&self, stage: Stage) -> Result<(), CliError> {
        match stage {
            Stage::Rasterize => self.rasterize(),
            Stage::Fit => self.fit(),
            Stage::Export => self.export(),
            Stage::Evaluate => self.evaluate(),
        }
    }

    fn params(&self, stage: Stage) -> Value {
        let c = &self.cfg;
        match stage {
            Stage::Rasterize => json!({
                "input": c.input.path.as_deref().map(path_string),
                "format": c.input.resolved_format(),
                "crs_epsg": c.crs_epsg,
                "classes": c.classes,
                "resolution_m": c.resolution_m,
                "max_raster_dim": c.max_raster_dim,
                "margin_m": c.margin_m,
            }),
            Stage::Fit => json!({ "cleanup": c.cleanup, "fit": c.fit }),
            Stage::Export => json!({ "name": c.name, "spacing_m": c.export.spacing_m }),
            Stage::Evaluate => json!({
                "reference": c.evaluation.reference.as_deref().map(path_string),
                "footprints": c.evaluation.footprints.as_deref().map(path_string),
                "mode": c.evaluation.mode,
                "buffer_distance_m": c.evaluation.buffer_distance_m,
            }),
        }
    }

    fn input_path(&self) -> Result<&Path, CliError> {
        self.cfg
            .input
            .path
            .as_deref()
            .ok_or_else(|| CliError::Usage("no input given (set input.path or pass --input)".into()))
    }

    /// Checksums of the files `stage` reads.
    fn inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>, CliError> {
        let mut files: Vec<(&str, PathBuf)> = Vec::new();
        match stage {
            Stage::Rasterize => files.push(("input", self.input_path()?.to_path_buf())),
            Stage::Fit => files.push((HEIGHTS_PNG, self.dir.join(HEIGHTS_PNG))),
            Stage::Export => files.push((FIT_REPORT, self.dir.join(FIT_REPORT))),
            Stage::Evaluate => {
                files.push((ALIGNMENT_GEOJSON, self.dir.join(ALIGNMENT_GEOJSON)));
                if let Some(r) = &self.cfg.evaluation.reference {
                    files.push(("reference", r.clone()));
                }
                if let Some(f) = &self.cfg.evaluation.footprints {
                    files.push(("footprints", f.clone()));
                }
            }
        }
        files
            .into_iter()
            .map(|(k, p)| Ok((k.to_string(), sha256_file(&p)?)))
            .collect()
    }

    /// Writes `outputs` and records the stage in the manifest.
    fn commit(&self, stage: Stage, outputs: Vec<(&str, Vec<u8>)>, data: Value) -> Result<(), CliError> {
        let inputs = self.inputs(stage)?;
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut sums = BTreeMap::new();
        for (name, bytes) in &outputs {
            write_atomic(&self.dir.join(name), bytes)?;
            sums.insert(name.to_string(), sha256_bytes(bytes));
        }
        let mut manifest = Manifest::load(&self.dir)?;
        manifest.stages.insert(
            stage.name().into(),
            StageRecord {
                params: self.params(stage),
                inputs,
                outputs: sums,
                data,
            },
        );
        manifest.save(&self.dir)
    }

    fn load_cloud(&self) -> Result<LabeledPointCloud, CliError> {
        let path = self.input_path()?;
        match self.cfg.input.resolved_format() {
            InputFormat::Las => read_las(&read(path)?, self.cfg.crs_epsg).map_err(|e| CliError::pcd(path, e)),
            InputFormat::Xyzl => parse_xyzl(&read_text(path)?, self.cfg.crs_epsg).map_err(|e| CliError::pcd(path, e)),
        }
    }

    fn rasterize(&self) -> Result<(), CliError> {
        let cloud = self.load_cloud()?;
        let grid = raster_stage(&cloud, &self.cfg.pipeline())?;
        let enc = HeightEncoding::for_grid(&grid);
        let wld = world_file(&grid.geometry).into_bytes();
        let outputs = vec![
            (OCCUPANCY_PNG, binary_to_png(&grid.occupancy).map_err(PipelineError::from)?),
            (OCCUPANCY_PGW, wld.clone()),
            (HEIGHTS_PNG, heights_to_png(&grid, &enc).map_err(PipelineError::from)?),
            (HEIGHTS_PGW, wld),
        ];
        let data = RasterData {
            geometry: grid.geometry,
            height_encoding: enc,
        };
        self.commit(Stage::Rasterize, outputs, serde_json::to_value(data).expect("serializable"))?;
        let g = grid.geometry;
        let occupied = grid.occupancy.data().iter().filter(|&&v| v).count();
        println!(
            "rasterize: {} points, {}x{} px at {} m, {} occupied",
            cloud.count(),
            g.width,
            g.height,
            g.resolution,
            occupied
        );
        Ok(())
    }

    fn load_grid(&self) -> Result<RasterGrid, CliError> {
        let manifest = Manifest::load(&self.dir)?;
        let path = self.dir.join(crate::manifest::MANIFEST);
        let rec = manifest
            .stages
            .get(Stage::Rasterize.name())
            .ok_or_else(|| CliError::parse(&path, "no rasterize record"))?;
        let data: RasterData = serde_json::from_value(rec.data.clone()).map_err(|e| CliError::parse(&path, e))?;
        let png_path = self.dir.join(HEIGHTS_PNG);
        heights_from_png(&read(&png_path)?, data.geometry, &data.height_encoding).map_err(|e| CliError::parse(&png_path, e))
    }

    fn fit(&self) -> Result<(), CliError> {
        let grid = self.load_grid()?;
        let pcfg = self.cfg.pipeline();
        let centreline = centreline_stage(&grid, &pcfg)?;
        let outcome = classify_and_fit(&centreline.skeleton, &centreline.graph, &centreline.field, &pcfg.fit)
            .map_err(PipelineError::from)?;
        let principal = outcome
            .principal()
            .filter(|c| !c.fits.is_empty())
            .ok_or(PipelineError::NoCentreline)?;
        let profile = match vertical_profile(&principal.fits, &grid, &pcfg.fit.profile) {
            Ok(p) => Some(p),
            Err(FitError::EmptyProfile) => None,
            Err(e) => return Err(PipelineError::from(e).into()),
        };
        let warnings = outcome.warnings();
        let report = FitReport {
            crs_epsg: self.cfg.crs_epsg,
            segment_kinds: principal.fits.iter().map(|f| f.kind().to_string()).collect(),
            total_length_m: principal.fits.iter().map(SegmentFit::length).sum(),
            fits: principal.fits.clone(),
            pixel_counts: principal.pixel_counts.clone(),
            profile,
            chains: outcome.chains.len(),
            hough_lines: outcome.hough_lines,
            circles: outcome.circles,
            warnings,
        };
        let branches = centreline.graph.to_geojson(&grid.geometry, self.cfg.crs_epsg);
        let outputs = vec![
            (FIT_REPORT, json_bytes(&report)),
            (BRANCHES, write_geojson(&branches).into_bytes()),
            (ORIENTATION_PNG, render_orientation_hsv(&centreline.field).map_err(PipelineError::from)?),
            (ORIENTATION_PGW, world_file(&grid.geometry).into_bytes()),
        ];
        self.commit(Stage::Fit, outputs, Value::Null)?;
        println!(
            "fit: {} elements ({}), {:.1} m",
            report.fits.len(),
            report.segment_kinds.join(", "),
            report.total_length_m
        );
        Ok(())
    }

    fn export(&self) -> Result<(), CliError> {
        let path = self.dir.join(FIT_REPORT);
        let report: FitReport = serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::parse(&path, e))?;
        let a = assemble(&report.fits, report.profile, report.crs_epsg, &self.cfg.name)?;
        let outputs = vec![
            (ALIGNMENT_GEOJSON, write_geojson(&to_geojson(&a, self.cfg.export.spacing_m)).into_bytes()),
            (ALIGNMENT_IFC, to_ifc_minimal(&a).into_bytes()),
        ];
        self.commit(Stage::Export, outputs, Value::Null)?;
        println!("export: {} segments, {:.1} m", a.horizontal.len(), a.total_length());
        Ok(())
    }

    fn read_features(path: &Path) -> Result<GeoFeatureSet, CliError> {
        read_geojson(&read_text(path)?).map_err(|e| CliError::parse(path, e))
    }

    fn evaluate(&self) -> Result<(), CliError> {
        let ev = &self.cfg.evaluation;
        let ref_path = ev
            .reference
            .as_deref()
            .ok_or_else(|| CliError::Usage("no reference given (set evaluation.reference)".into()))?;
        let recreated = concat_parts(&line_parts(&Self::read_features(&self.dir.join(ALIGNMENT_GEOJSON))?));
        let curve = Polyline::new(recreated.clone())?;
        let reference_parts = line_parts(&Self::read_features(ref_path)?);
        let reference = concat_parts(&reference_parts);
        let report = evaluate(&curve, &reference, ev.mode)?;
        let mut outputs = vec![(EVAL, json_bytes(&report))];
        if let Some(fp_path) = &ev.footprints {
            let footprints = Self::read_features(fp_path)?;
            let ours = buffer_query(&recreated, &footprints, ev.buffer_distance_m)?;
            let mut theirs = BufferQueryResult {
                buffer_distance: ev.buffer_distance_m,
                hit_ids: BTreeSet::new(),
                hit_count: 0,
                comparison: None,
            };
            for part in reference_parts.iter().filter(|p| p.len() >= 2) {
                theirs.hit_ids.extend(buffer_query(part, &footprints, ev.buffer_distance_m)?.hit_ids);
            }
            theirs.hit_count = theirs.hit_ids.len();
            let compared = compare_buffer_queries(&ours, &theirs)?;
            outputs.push((BUFFER, json_bytes(&compared)));
            outputs.push((HITS, write_geojson(&hits_geojson(&footprints, &ours)).into_bytes()));
            if let Some(c) = &compared.comparison {
                println!(
                    "buffer: {} hits, {} reference hits, {:.2} % disagreement",
                    compared.hit_count,
                    theirs.hit_count,
                    c.error_percent
                );
            }
        }
        self.commit(Stage::Evaluate, outputs, Value::Null)?;
        println!(
            "evaluate: rmsd {:.3} m over {} pairs ({} dropped)",
            report.rmsd, report.n, report.dropped
        );
        Ok(())
    }
}
