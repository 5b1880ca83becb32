//! Minimal ASCII PCD reading and writing.
//!
//! Only the subset needed to carry dense map points is supported: the ten
//! standard header keys in their canonical order, `FIELDS` starting with
//! `x y z`, and `DATA ascii`. Extra fields (rgb, intensity, ...) are read
//! positionally and dropped.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PcdError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("POINTS declares {declared} points but {found} data rows were found")]
    CountMismatch { declared: usize, found: usize },
    #[error("unsupported DATA encoding `{0}` (only ascii is accepted)")]
    NonAsciiData(String),
    #[error("bad number `{token}` on data row {row}")]
    BadNumber { row: usize, token: String },
    #[error("point cloud is empty")]
    EmptyCloud,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }
}

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Closed containment test on every axis.
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p.axis(i) >= self.min.axis(i) && p.axis(i) <= self.max.axis(i))
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounding_box(&self) -> Result<Aabb, PcdError> {
        bounding_box(self)
    }
}

/// Tight componentwise bounds of a non-empty cloud.
pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb, PcdError> {
    let first = *cloud.points.first().ok_or(PcdError::EmptyCloud)?;
    let (min, max) = cloud
        .points
        .iter()
        .skip(1)
        .fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        });
    Ok(Aabb { min, max })
}

const HEADER_KEYS: [&str; 10] = [
    "VERSION",
    "FIELDS",
    "SIZE",
    "TYPE",
    "COUNT",
    "WIDTH",
    "HEIGHT",
    "VIEWPOINT",
    "POINTS",
    "DATA",
];

pub fn parse_pcd(bytes: &[u8]) -> Result<PointCloud, PcdError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| PcdError::MalformedHeader("input is not valid UTF-8 text".into()))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let mut n_fields = 0usize;
    let mut declared = 0usize;
    for key in HEADER_KEYS {
        let line = lines
            .next()
            .ok_or_else(|| PcdError::MalformedHeader(format!("missing {key}")))?;
        let mut parts = line.split_whitespace();
        let found = parts.next().unwrap_or_default();
        if found != key {
            return Err(PcdError::MalformedHeader(format!(
                "expected {key}, found `{found}`"
            )));
        }
        let values: Vec<&str> = parts.collect();
        if values.is_empty() {
            return Err(PcdError::MalformedHeader(format!("{key} has no value")));
        }
        match key {
            "FIELDS" => {
                if values.len() < 3 || values[..3] != ["x", "y", "z"] {
                    return Err(PcdError::MalformedHeader(
                        "FIELDS must begin with `x y z`".into(),
                    ));
                }
                n_fields = values.len();
            }
            "POINTS" => {
                declared = values[0].parse().map_err(|_| {
                    PcdError::MalformedHeader(format!("bad POINTS value `{}`", values[0]))
                })?;
            }
            "DATA" if values[0] != "ascii" => {
                return Err(PcdError::NonAsciiData(values[0].to_string()));
            }
            _ => {}
        }
    }

    let mut points = Vec::with_capacity(declared);
    for (row, line) in lines.enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < n_fields {
            return Err(PcdError::MalformedHeader(format!(
                "data row {row} has {} values, expected {n_fields}",
                tokens.len()
            )));
        }
        let mut xyz = [0.0; 3];
        for (slot, token) in xyz.iter_mut().zip(&tokens) {
            *slot = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PcdError::BadNumber {
                    row,
                    token: token.to_string(),
                })?;
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }

    if points.len() != declared {
        return Err(PcdError::CountMismatch {
            declared,
            found: points.len(),
        });
    }
    Ok(PointCloud { points })
}

/// Serializes with six fractional digits per coordinate.
pub fn write_pcd(cloud: &PointCloud) -> Vec<u8> {
    let n = cloud.len();
    let mut out = String::with_capacity(160 + n * 36);
    out.push_str("VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n");
    let _ = writeln!(out, "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0");
    let _ = writeln!(out, "POINTS {n}\nDATA ascii");
    for p in &cloud.points {
        let _ = writeln!(out, "{:.6} {:.6} {:.6}", p.x, p.y, p.z);
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(points: usize, fields: &str) -> String {
        format!(
            "VERSION 0.7\nFIELDS {fields}\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n\
             WIDTH {points}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {points}\nDATA ascii\n"
        )
    }

    #[test]
    fn empty_cloud_parses() {
        let cloud = parse_pcd(header(0, "x y z").as_bytes()).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn single_point() {
        let text = header(1, "x y z") + "1.0 2.0 3.0\n";
        let cloud = parse_pcd(text.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn count_mismatch() {
        let text = header(2, "x y z") + "1.0 2.0 3.0\n";
        assert_eq!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::CountMismatch {
                declared: 2,
                found: 1
            })
        );
    }

    #[test]
    fn extra_fields_are_dropped() {
        let text = header(1, "x y z rgb") + "1 2 3 4.2e6\n";
        let cloud = parse_pcd(text.as_bytes()).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn binary_data_rejected() {
        let text = header(0, "x y z").replace("DATA ascii", "DATA binary");
        assert_eq!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::NonAsciiData("binary".into()))
        );
    }

    #[test]
    fn missing_key_and_bad_fields() {
        let text = header(0, "x y z").replace("VIEWPOINT 0 0 0 1 0 0 0\n", "");
        assert!(matches!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::MalformedHeader(_))
        ));
        let text = header(0, "rgb x y z");
        assert!(matches!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::MalformedHeader(_))
        ));
    }

    #[test]
    fn bad_number() {
        let text = header(1, "x y z") + "1.0 abc 3.0\n";
        assert!(matches!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::BadNumber { row: 0, .. })
        ));
        let text = header(1, "x y z") + "1.0 nan 3.0\n";
        assert!(matches!(
            parse_pcd(text.as_bytes()),
            Err(PcdError::BadNumber { .. })
        ));
    }

    #[test]
    fn bounding_boxes() {
        let one = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0)]);
        let bb = bounding_box(&one).unwrap();
        assert_eq!(bb.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(bb.max, Point3::new(0.0, 0.0, 0.0));

        let two = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, -1.0, 5.0),
        ]);
        let bb = bounding_box(&two).unwrap();
        assert_eq!(bb.min, Point3::new(0.0, -1.0, 0.0));
        assert_eq!(bb.max, Point3::new(2.0, 0.0, 5.0));

        assert_eq!(
            bounding_box(&PointCloud::default()),
            Err(PcdError::EmptyCloud)
        );
    }

    #[test]
    fn write_empty_and_single() {
        let text = String::from_utf8(write_pcd(&PointCloud::default())).unwrap();
        assert!(text.contains("POINTS 0\n"));
        assert!(parse_pcd(text.as_bytes()).unwrap().is_empty());

        let c = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(parse_pcd(&write_pcd(&c)).unwrap(), c);
    }
}
