use super::{LabeledPointCloud, PcdError};

/// Parses whitespace-separated `x y z label` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_xyzl(text: &str, crs_epsg: u32) -> Result<LabeledPointCloud, PcdError> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(PcdError::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", tokens.len()),
            });
        }
        let mut xyz = [0.0; 3];
        for (k, tok) in tokens[..3].iter().enumerate() {
            xyz[k] = tok.parse::<f64>().map_err(|_| PcdError::Parse {
                line: line_no,
                message: format!("non-numeric coordinate {tok:?}"),
            })?;
            if !xyz[k].is_finite() {
                return Err(PcdError::Parse {
                    line: line_no,
                    message: format!("non-finite coordinate {tok:?}"),
                });
            }
        }
        let label = tokens[3].parse::<i64>().map_err(|_| PcdError::Parse {
            line: line_no,
            message: format!("non-numeric label {:?}", tokens[3]),
        })?;
        let label = u8::try_from(label).map_err(|_| {
            PcdError::Range(format!("label {label} at line {line_no} outside [0, 255]"))
        })?;
        points.push(xyz);
        labels.push(label);
    }
    LabeledPointCloud::new(points, labels, crs_epsg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let c = parse_xyzl("1.0 2.0 3.0 10", 25833).unwrap();
        assert_eq!(c.count(), 1);
        assert_eq!(c.labels(), &[10]);
        assert_eq!(c.points()[0], [1.0, 2.0, 3.0]);
        assert_eq!(c.crs_epsg(), 25833);
    }

    #[test]
    fn comments_skipped() {
        let c = parse_xyzl("# header\n0 0 0 2", 1).unwrap();
        assert_eq!(c.count(), 1);
        assert_eq!(c.labels(), &[2]);
    }

    #[test]
    fn bad_token_reports_line() {
        match parse_xyzl("1 2 x 3", 1) {
            Err(PcdError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_xyzl("# c\n\n1 2 3 4\n1 2 3", 1) {
            Err(PcdError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_range() {
        assert!(matches!(parse_xyzl("0 0 0 256", 1), Err(PcdError::Range(_))));
        assert!(matches!(parse_xyzl("0 0 0 -1", 1), Err(PcdError::Range(_))));
        assert!(parse_xyzl("0 0 0 255", 1).is_ok());
    }

    #[test]
    fn order_preserved() {
        let c = parse_xyzl("3 0 0 1\n1 0 0 2\n2 0 0 3\n", 1).unwrap();
        assert_eq!(c.labels(), &[1, 2, 3]);
        assert_eq!(c.points()[1][0], 1.0);
    }
}
