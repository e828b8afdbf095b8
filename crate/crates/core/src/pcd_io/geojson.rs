//! GeoJSON FeatureCollections in projected coordinates.
//!
//! RFC 7946 assumes WGS84; we keep the native projected CRS and record its
//! EPSG code in a top-level `crs_epsg` foreign member, repeated in every
//! feature's properties so GIS tools that drop foreign members keep it.

use super::{PcdError, DEFAULT_EPSG};
use crate::geom::Point2;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;

const CRS_KEY: &str = "crs_epsg";

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    LineString(Vec<Point2>),
    MultiLineString(Vec<Vec<Point2>>),
    /// Exterior ring first, then holes. Rings repeat their first vertex.
    Polygon(Vec<Vec<Point2>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeature {
    pub geometry: Geometry,
    pub properties: BTreeMap<String, String>,
}

impl GeoFeature {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            properties: BTreeMap::new(),
        }
    }

    pub fn with_property(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.properties.insert(key.into(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoFeatureSet {
    pub features: Vec<GeoFeature>,
    pub crs_epsg: u32,
}

impl GeoFeatureSet {
    pub fn new(crs_epsg: u32) -> Self {
        Self {
            features: Vec::new(),
            crs_epsg,
        }
    }
}

fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn write_positions(out: &mut String, pts: &[Point2]) {
    out.push('[');
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "[{},{}]", fmt_coord(p.x), fmt_coord(p.y));
    }
    out.push(']');
}

fn write_rings(out: &mut String, rings: &[Vec<Point2>]) {
    out.push('[');
    for (i, r) in rings.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_positions(out, r);
    }
    out.push(']');
}

/// Serializes a feature set as a FeatureCollection, one feature per line.
/// Coordinates are written with millimeter precision.
pub fn write_geojson(set: &GeoFeatureSet) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"type\":\"FeatureCollection\",\"{CRS_KEY}\":{},\"features\":[",
        set.crs_epsg
    );
    for (i, f) in set.features.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        let mut props = f.properties.clone();
        props.insert(CRS_KEY.to_string(), set.crs_epsg.to_string());
        let props = serde_json::to_string(&props).expect("string map serializes");
        let _ = write!(out, "{{\"type\":\"Feature\",\"properties\":{props},\"geometry\":");
        match &f.geometry {
            Geometry::LineString(pts) => {
                out.push_str("{\"type\":\"LineString\",\"coordinates\":");
                write_positions(&mut out, pts);
            }
            Geometry::MultiLineString(parts) => {
                out.push_str("{\"type\":\"MultiLineString\",\"coordinates\":");
                write_rings(&mut out, parts);
            }
            Geometry::Polygon(rings) => {
                out.push_str("{\"type\":\"Polygon\",\"coordinates\":");
                write_rings(&mut out, rings);
            }
        }
        out.push_str("}}");
    }
    if !set.features.is_empty() {
        out.push('\n');
    }
    out.push_str("]}\n");
    out
}

fn gj_err(msg: impl Into<String>) -> PcdError {
    PcdError::GeoJson(msg.into())
}

fn parse_position(v: &Value) -> Result<Point2, PcdError> {
    let arr = v.as_array().ok_or_else(|| gj_err("position is not an array"))?;
    if arr.len() < 2 {
        return Err(gj_err("position needs at least 2 numbers"));
    }
    let x = arr[0].as_f64().ok_or_else(|| gj_err("non-numeric coordinate"))?;
    let y = arr[1].as_f64().ok_or_else(|| gj_err("non-numeric coordinate"))?;
    Ok(Point2::new(x, y))
}

fn parse_line(v: &Value, index: usize) -> Result<Vec<Point2>, PcdError> {
    let arr = v
        .as_array()
        .ok_or_else(|| gj_err(format!("feature {index}: coordinates are not an array")))?;
    let pts = arr.iter().map(parse_position).collect::<Result<Vec<_>, _>>()?;
    if pts.len() < 2 {
        return Err(gj_err(format!("feature {index}: line with fewer than 2 vertices")));
    }
    Ok(pts)
}

fn parse_ring(v: &Value, index: usize) -> Result<Vec<Point2>, PcdError> {
    let mut ring = parse_line(v, index)?;
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    if ring.len() < 4 {
        return Err(gj_err(format!("feature {index}: polygon ring with fewer than 3 vertices")));
    }
    Ok(ring)
}

fn property_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads a FeatureCollection of LineString / MultiLineString / Polygon
/// features. MultiLineStrings are flattened into one feature per part.
pub fn read_geojson(text: &str) -> Result<GeoFeatureSet, PcdError> {
    let root: Value = serde_json::from_str(text).map_err(|e| gj_err(e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| gj_err("top level is not an object"))?;
    if obj.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(gj_err("top level is not a FeatureCollection"));
    }
    let crs_epsg = match obj.get(CRS_KEY) {
        None => DEFAULT_EPSG,
        Some(v) => v
            .as_u64()
            .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| gj_err("crs_epsg is not an integer"))?,
    };
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| gj_err("missing features array"))?;

    let mut set = GeoFeatureSet::new(crs_epsg);
    let empty = Map::new();
    for (index, feat) in features.iter().enumerate() {
        let props_obj = feat.get("properties").and_then(Value::as_object).unwrap_or(&empty);
        let mut properties: BTreeMap<String, String> = props_obj
            .iter()
            .map(|(k, v)| (k.clone(), property_string(v)))
            .collect();
        if properties.get(CRS_KEY).map(String::as_str) == Some(crs_epsg.to_string().as_str()) {
            properties.remove(CRS_KEY);
        }
        let geometry = feat
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| PcdError::UnsupportedGeometry {
                index,
                kind: "null".into(),
            })?;
        let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("missing");
        let coords = geometry.get("coordinates").unwrap_or(&Value::Null);
        match kind {
            "LineString" => set.features.push(GeoFeature {
                geometry: Geometry::LineString(parse_line(coords, index)?),
                properties,
            }),
            "MultiLineString" => {
                let parts = coords
                    .as_array()
                    .ok_or_else(|| gj_err(format!("feature {index}: coordinates are not an array")))?;
                for part in parts {
                    set.features.push(GeoFeature {
                        geometry: Geometry::LineString(parse_line(part, index)?),
                        properties: properties.clone(),
                    });
                }
            }
            "Polygon" => {
                let rings = coords
                    .as_array()
                    .ok_or_else(|| gj_err(format!("feature {index}: coordinates are not an array")))?
                    .iter()
                    .map(|r| parse_ring(r, index))
                    .collect::<Result<Vec<_>, _>>()?;
                if rings.is_empty() {
                    return Err(gj_err(format!("feature {index}: polygon without rings")));
                }
                set.features.push(GeoFeature {
                    geometry: Geometry::Polygon(rings),
                    properties,
                });
            }
            other => {
                return Err(PcdError::UnsupportedGeometry {
                    index,
                    kind: other.to_string(),
                })
            }
        }
    }
    Ok(set)
}
