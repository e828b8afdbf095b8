use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use super::{Alignment, HorizontalSegment};
use crate::geom::Point2;
use crate::pcd_io::{GeoFeature, GeoFeatureSet, Geometry};

/// Densified vertices of one segment at local offsets `0, spacing, …, length`.
fn densify(seg: &HorizontalSegment, spacing: f64) -> Vec<Point2> {
    let n = (seg.segment_length / spacing).ceil().max(1.0) as usize;
    let mut pts: Vec<Point2> = (0..n)
        .map(|k| k as f64 * spacing)
        .take_while(|&s| s < seg.segment_length - 1e-9)
        .map(|s| seg.point_at(s).0)
        .collect();
    pts.push(seg.end_point());
    if pts.len() == 1 {
        pts.insert(0, seg.start_point);
    }
    pts
}

/// One LineString per horizontal segment plus a MultiLineString for the
/// whole alignment. A non-positive `spacing` falls back to 1 m.
pub fn to_geojson(a: &Alignment, spacing: f64) -> GeoFeatureSet {
    let spacing = if spacing > 0.0 { spacing } else { 1.0 };
    let mut set = GeoFeatureSet::new(a.crs_epsg);
    let mut parts = Vec::with_capacity(a.horizontal.len());
    for (k, seg) in a.horizontal.iter().enumerate() {
        let pts = densify(seg, spacing);
        parts.push(pts.clone());
        set.features.push(
            GeoFeature::new(Geometry::LineString(pts))
                .with_property("segment_index", k)
                .with_property("segment_kind", seg.kind.ifc_name())
                .with_property("start_direction_rad", seg.start_direction)
                .with_property("segment_length_m", seg.segment_length)
                .with_property("start_radius_m", seg.start_radius)
                .with_property("end_radius_m", seg.end_radius)
                .with_property("start_station_m", a.stations[k]),
        );
    }
    set.features.push(
        GeoFeature::new(Geometry::MultiLineString(parts))
            .with_property("name", &a.name)
            .with_property("segment_count", a.horizontal.len())
            .with_property("total_length_m", a.total_length()),
    );
    set
}

/// STEP real: shortest round-trip digits, always with a decimal point and
/// an upper-case exponent.
pub(crate) fn step_real(v: f64) -> String {
    let s = format!("{v:?}");
    match s.split_once('e') {
        Some((m, e)) if m.contains('.') => format!("{m}E{e}"),
        Some((m, e)) => format!("{m}.E{e}"),
        None if s.contains('.') => s,
        None => format!("{s}."),
    }
}

/// IFC radius of curvature; 0 stands for an infinite radius.
fn step_radius(r: f64) -> String {
    step_real(if r.is_finite() { r } else { 0.0 })
}

fn step_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Deterministic 22-character IFC GlobalId derived from the alignment name
/// and a running counter.
fn guid(name: &str, counter: usize) -> String {
    const ALPHABET: &[u8; 64] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$";
    let digest = Sha256::digest(format!("{name}\u{0}{counter}").as_bytes());
    let mut v = u128::from_be_bytes(digest[..16].try_into().unwrap_or([0; 16]));
    let mut out = [0u8; 22];
    for slot in out.iter_mut().rev() {
        *slot = ALPHABET[(v & 63) as usize];
        v >>= 6;
    }
    // The leading character carries only two bits.
    out[0] = ALPHABET[(ALPHABET.iter().position(|&c| c == out[0]).unwrap_or(0)) & 3];
    String::from_utf8_lossy(&out).into_owned()
}

struct Writer<'a> {
    out: String,
    next: usize,
    guids: usize,
    name: &'a str,
}

impl Writer<'_> {
    fn add(&mut self, record: String) -> usize {
        self.next += 1;
        let _ = writeln!(self.out, "#{}={record};", self.next);
        self.next
    }

    fn guid(&mut self) -> String {
        self.guids += 1;
        step_string(&guid(self.name, self.guids))
    }
}

fn refs(ids: &[usize]) -> String {
    ids.iter().map(|i| format!("#{i}")).collect::<Vec<_>>().join(",")
}

/// Minimal IFC 4.3 STEP file: project, units, context, one alignment with a
/// horizontal nest of segments and, when a profile exists, a vertical nest
/// of constant-gradient pieces taken at the profile breakpoints.
pub fn to_ifc_minimal(a: &Alignment) -> String {
    let mut w = Writer {
        out: String::new(),
        next: 0,
        guids: 0,
        name: &a.name,
    };
    w.out.push_str("ISO-10303-21;\nHEADER;\n");
    w.out.push_str("FILE_DESCRIPTION(('ViewDefinition [Alignment-basedView]'),'2;1');\n");
    let _ = writeln!(
        w.out,
        "FILE_NAME({},'',(''),(''),'railalign','railalign','');",
        step_string(&format!("{}.ifc", a.name))
    );
    w.out.push_str("FILE_SCHEMA(('IFC4X3_ADD2'));\nENDSEC;\nDATA;\n");

    let origin = w.add("IFCCARTESIANPOINT((0.,0.,0.))".into());
    let placement = w.add(format!("IFCAXIS2PLACEMENT3D(#{origin},$,$)"));
    let context = w.add(format!("IFCGEOMETRICREPRESENTATIONCONTEXT($,'Model',3,1.E-5,#{placement},$)"));
    let metre = w.add("IFCSIUNIT(*,.LENGTHUNIT.,$,.METRE.)".into());
    let radian = w.add("IFCSIUNIT(*,.PLANEANGLEUNIT.,$,.RADIAN.)".into());
    let units = w.add(format!("IFCUNITASSIGNMENT((#{metre},#{radian}))"));
    let crs = w.add(format!("IFCPROJECTEDCRS('EPSG:{}',$,$,$,$,$,#{metre})", a.crs_epsg));
    w.add(format!("IFCMAPCONVERSION(#{context},#{crs},0.,0.,0.,$,$,$,$,$)"));
    let g = w.guid();
    let project = w.add(format!("IFCPROJECT({g},$,{},$,$,$,$,(#{context}),#{units})", step_string(&a.name)));
    let g = w.guid();
    let alignment = w.add(format!("IFCALIGNMENT({g},$,{},$,$,$,$,$)", step_string(&a.name)));
    let g = w.guid();
    w.add(format!("IFCRELAGGREGATES({g},$,$,$,#{project},(#{alignment}))"));

    let g = w.guid();
    let horizontal = w.add(format!("IFCALIGNMENTHORIZONTAL({g},$,$,$,$,$,$)"));
    let mut segments = Vec::with_capacity(a.horizontal.len());
    for (k, seg) in a.horizontal.iter().enumerate() {
        let pt = w.add(format!(
            "IFCCARTESIANPOINT(({},{}))",
            step_real(seg.start_point.x),
            step_real(seg.start_point.y)
        ));
        let params = w.add(format!(
            "IFCALIGNMENTHORIZONTALSEGMENT($,$,#{pt},{},{},{},{},$,.{}.)",
            step_real(seg.start_direction),
            step_radius(seg.start_radius),
            step_radius(seg.end_radius),
            step_real(seg.segment_length),
            seg.kind.ifc_name()
        ));
        let g = w.guid();
        segments.push(w.add(format!("IFCALIGNMENTSEGMENT({g},$,'H{}',$,$,$,$,#{params})", k + 1)));
    }
    let g = w.guid();
    w.add(format!("IFCRELNESTS({g},$,$,$,#{horizontal},({}))", refs(&segments)));
    let mut layouts = vec![horizontal];

    if let Some(profile) = &a.vertical {
        let g = w.guid();
        let vertical = w.add(format!("IFCALIGNMENTVERTICAL({g},$,$,$,$,$,$)"));
        let mut pieces = Vec::new();
        for (k, b) in profile.breakpoints.windows(2).enumerate() {
            let len = b[1] - b[0];
            if len <= 0.0 {
                continue;
            }
            let (h0, h1) = (profile.height_at(b[0]), profile.height_at(b[1]));
            let grade = (h1 - h0) / len;
            let params = w.add(format!(
                "IFCALIGNMENTVERTICALSEGMENT($,$,{},{},{},{},{},$,.CONSTANTGRADIENT.)",
                step_real(b[0]),
                step_real(len),
                step_real(h0),
                step_real(grade),
                step_real(grade)
            ));
            let g = w.guid();
            pieces.push(w.add(format!("IFCALIGNMENTSEGMENT({g},$,'V{}',$,$,$,$,#{params})", k + 1)));
        }
        let g = w.guid();
        w.add(format!("IFCRELNESTS({g},$,$,$,#{vertical},({}))", refs(&pieces)));
        layouts.push(vertical);
    }
    let g = w.guid();
    w.add(format!("IFCRELNESTS({g},$,$,$,#{alignment},({}))", refs(&layouts)));
    w.out.push_str("ENDSEC;\nEND-ISO-10303-21;\n");
    w.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{assemble, parse_step, SegmentKind};
    use crate::fitting::{
        fit_clothoid_g1, ArcSegmentFit, ClothoidConfig, LineSegmentFit, SegmentFit, VerticalProfile,
    };
    use crate::pcd_io::{read_geojson, write_geojson};
    use std::f64::consts::FRAC_PI_2;

    fn five_segments() -> Vec<SegmentFit> {
        let cfg = ClothoidConfig::default();
        let l1 = LineSegmentFit::new(Point2::new(0.0, 0.0), Point2::new(200.0, 0.0));
        let c1 = fit_clothoid_g1(l1.p_end, 0.0, Point2::new(259.9, 1.25), 0.05, &cfg).unwrap();
        let (p, t) = (c1.state_at(c1.length).0, c1.state_at(c1.length).1);
        let arc = ArcSegmentFit::new(p + Point2::from_angle(t + FRAC_PI_2) * 800.0, 800.0, t - FRAC_PI_2, 0.1);
        let t2 = t + 0.1;
        let c2 = fit_clothoid_g1(arc.p_end, t2, arc.p_end + Point2::from_angle(t2 + 0.025) * 60.0, t2 + 0.05, &cfg).unwrap();
        let end = c2.state_at(c2.length);
        let l2 = LineSegmentFit::new(end.0, end.0 + Point2::from_angle(end.1) * 150.0);
        vec![
            SegmentFit::Line(l1),
            SegmentFit::Clothoid(c1),
            SegmentFit::Arc(arc),
            SegmentFit::Clothoid(c2),
            SegmentFit::Line(l2),
        ]
    }

    #[test]
    fn real_formatting_round_trips() {
        for v in [0.0, 1.0, -800.0, 1e-7, 2.5e20, 0.1, 333_123.456_789, -1.234_567_890_123e-12] {
            let s = step_real(v);
            assert!(s.contains('.') && !s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(step_real(1e-7), "1.E-7");
    }

    #[test]
    fn guids_are_stable_and_well_formed() {
        let a = guid("x", 1);
        assert_eq!(a, guid("x", 1));
        assert_ne!(a, guid("x", 2));
        assert_eq!(a.len(), 22);
        assert!("0123".contains(a.chars().next().unwrap()));
    }

    #[test]
    fn single_line_ifc() {
        let fit = SegmentFit::Line(LineSegmentFit::new(Point2::new(0.0, 0.0), Point2::new(100.0, 0.0)));
        let a = assemble(&[fit], None, 25833, "single").unwrap();
        let text = to_ifc_minimal(&a);
        assert_eq!(text.matches(".LINE.").count(), 1);
        let f = parse_step(&text).unwrap();
        let segs: Vec<_> = f.of_type("IFCALIGNMENTHORIZONTALSEGMENT").collect();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].args[4].as_f64(), Some(0.0));
        assert_eq!(f.of_type("IFCALIGNMENT").count(), 1);
    }

    #[test]
    fn clockwise_arc_radius_in_ifc() {
        let arc = ArcSegmentFit::new(Point2::new(0.0, 0.0), 800.0, FRAC_PI_2, -0.1);
        let a = assemble(&[SegmentFit::Arc(arc)], None, 25833, "cw").unwrap();
        let f = parse_step(&to_ifc_minimal(&a)).unwrap();
        let seg = f.of_type("IFCALIGNMENTHORIZONTALSEGMENT").next().unwrap();
        assert_eq!(seg.args[4].as_f64(), Some(-800.0));
        assert_eq!(seg.args[5].as_f64(), Some(-800.0));
        assert_eq!(seg.args[8].as_enum(), Some("CIRCULARARC"));
    }

    #[test]
    fn ifc_round_trip_is_exact() {
        let profile = VerticalProfile {
            samples: vec![],
            breakpoints: vec![0.0, 300.0, 600.0, 700.0],
            coefficients: vec![[100.0, 0.01, 0.0, 0.0], [103.0, 0.0, 1e-5, 0.0], [103.9, -0.002, 0.0, 0.0]],
        };
        let a = assemble(&five_segments(), Some(profile), 25833, "five").unwrap();
        let text = to_ifc_minimal(&a);
        assert_eq!(text, to_ifc_minimal(&a));
        let f = parse_step(&text).unwrap();
        let segs: Vec<_> = f.of_type("IFCALIGNMENTHORIZONTALSEGMENT").collect();
        assert_eq!(segs.len(), 5);
        for (e, h) in segs.iter().zip(&a.horizontal) {
            let pt = f.get(e.args[2].as_ref_id().unwrap()).unwrap().args[0].as_list().unwrap().to_vec();
            assert_eq!(pt[0].as_f64(), Some(h.start_point.x));
            assert_eq!(pt[1].as_f64(), Some(h.start_point.y));
            assert_eq!(e.args[3].as_f64(), Some(h.start_direction));
            let r = |v: f64| if v.is_finite() { v } else { 0.0 };
            assert_eq!(e.args[4].as_f64(), Some(r(h.start_radius)));
            assert_eq!(e.args[5].as_f64(), Some(r(h.end_radius)));
            assert_eq!(e.args[6].as_f64(), Some(h.segment_length));
            assert_eq!(e.args[8].as_enum(), Some(h.kind.ifc_name()));
        }
        assert_eq!(f.of_type("IFCALIGNMENTVERTICALSEGMENT").count(), 3);
        assert_eq!(f.of_type("IFCRELNESTS").count(), 3);
    }

    #[test]
    fn geojson_features_and_properties() {
        let a = assemble(&five_segments(), None, 25833, "five").unwrap();
        let set = to_geojson(&a, 5.0);
        assert_eq!(set.features.len(), 6);
        let kinds: Vec<&str> = set.features[..5].iter().map(|f| f.properties["segment_kind"].as_str()).collect();
        assert_eq!(kinds, ["LINE", "CLOTHOID", "CIRCULARARC", "CLOTHOID", "LINE"]);
        assert!(matches!(set.features[5].geometry, Geometry::MultiLineString(_)));
        let text = write_geojson(&set);
        assert_eq!(text, write_geojson(&to_geojson(&a, 5.0)));
        let back = read_geojson(&text).unwrap();
        for (x, y) in back.features.iter().zip(&set.features) {
            assert_eq!(x.properties, y.properties);
        }
        let r: f64 = back.features[0].properties["start_radius_m"].parse().unwrap();
        assert!(r.is_infinite());
        assert_eq!(a.horizontal[2].kind, SegmentKind::CircularArc);

        let one = assemble(&five_segments()[..1], None, 25833, "one").unwrap();
        assert_eq!(to_geojson(&one, 10.0).features.len(), 2);
    }
}
