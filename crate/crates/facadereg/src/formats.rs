//! Detection-file parsing and result-file serialization.
//!
//! The detection schema follows the common per-image annotation layout
//! (class, score, box in pixels) so any detector's output can be piped in:
//!
//! ```json
//! {
//!   "version": 1,
//!   "image": { "width": 640, "height": 480, "source_id": "facade-01" },
//!   "boxes": [
//!     { "class": "window", "score": 0.93, "x": 10, "y": 20, "w": 30, "h": 40 }
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::RegularizationReport;
use crate::types::{BoundingBox, DetectionSet, PrimitiveClass};

pub const DETECTION_FILE_VERSION: u64 = 1;
pub const RESULTS_FILE_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub width: u32,
    pub height: u32,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub class: String,
    pub score: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<&BoundingBox> for BoxRecord {
    fn from(b: &BoundingBox) -> Self {
        BoxRecord {
            class: b.class.as_str().to_owned(),
            score: b.confidence,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DetectionFile {
    version: u64,
    image: ImageMeta,
    boxes: Vec<BoxRecord>,
}

/// Pre-pass used to reject unknown versions before strict field validation.
#[derive(Debug, Deserialize)]
struct VersionProbe {
    version: Option<u64>,
}

fn syntax_checked(bytes: &[u8]) -> Result<serde_json::Value> {
    serde_json::from_slice::<serde_json::Value>(bytes)
        .map_err(|e| Error::ParseSyntax(e.to_string()))
}

fn schema_checked<T: for<'de> Deserialize<'de>>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        Error::ParseSchema(format!("field `{}`: {}", e.path(), e.inner()))
    })
}

/// Parses a detection file. Boxes are clamped into the image bounds; a box
/// that leaves no positive extent after clamping is rejected with its index.
pub fn parse_detections(bytes: &[u8]) -> Result<DetectionSet> {
    let value = syntax_checked(bytes)?;
    let probe: VersionProbe = schema_checked(value.clone())?;
    match probe.version {
        Some(DETECTION_FILE_VERSION) => {}
        Some(found) => {
            return Err(Error::UnsupportedVersion {
                found,
                expected: DETECTION_FILE_VERSION,
            })
        }
        None => {
            return Err(Error::ParseSchema("field `version`: missing".into()));
        }
    }
    let file: DetectionFile = schema_checked(value)?;
    let (iw, ih) = (f64::from(file.image.width), f64::from(file.image.height));
    let mut boxes = Vec::with_capacity(file.boxes.len());
    for (index, rec) in file.boxes.iter().enumerate() {
        for (field, v) in [
            ("score", rec.score),
            ("x", rec.x),
            ("y", rec.y),
            ("w", rec.w),
            ("h", rec.h),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidBox {
                    index,
                    reason: format!("field {field} is not finite"),
                });
            }
        }
        if rec.w <= 0.0 || rec.h <= 0.0 {
            return Err(Error::InvalidBox {
                index,
                reason: format!("non-positive size w={} h={}", rec.w, rec.h),
            });
        }
        let x = rec.x.clamp(0.0, iw);
        let y = rec.y.clamp(0.0, ih);
        let w = rec.w.min(iw - x);
        let h = rec.h.min(ih - y);
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox {
                index,
                reason: "box lies outside the image".into(),
            });
        }
        boxes.push(
            BoundingBox::new(PrimitiveClass::from_label(&rec.class), rec.score, x, y, w, h)
                .map_err(|e| match e {
                    Error::InvalidBox { reason, .. } => Error::InvalidBox { index, reason },
                    other => other,
                })?,
        );
    }
    DetectionSet::new(file.image.width, file.image.height, file.image.source_id, boxes)
}

/// Serializes a detection set in the same schema `parse_detections` reads.
/// Numbers round-trip at full precision.
pub fn write_detections(set: &DetectionSet) -> Vec<u8> {
    let file = DetectionFile {
        version: DETECTION_FILE_VERSION,
        image: ImageMeta {
            width: set.image_width,
            height: set.image_height,
            source_id: set.source_id.clone(),
        },
        boxes: set.boxes.iter().map(BoxRecord::from).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("detection file serializes");
    out.push(b'\n');
    out
}

/// The result-file payload: original boxes, regularized boxes, and the full
/// report. Key order is fixed by the struct layout, so output diffs stay
/// stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub version: u64,
    pub image: ImageMeta,
    pub detected: Vec<BoxRecord>,
    pub regularized: Vec<BoxRecord>,
    pub report: RegularizationReport,
}

/// Bundles detections, regularized boxes and the report into the results
/// payload.
pub fn results_file(
    detections: &DetectionSet,
    regularized: &DetectionSet,
    report: &RegularizationReport,
) -> ResultsFile {
    ResultsFile {
        version: RESULTS_FILE_VERSION,
        image: ImageMeta {
            width: detections.image_width,
            height: detections.image_height,
            source_id: detections.source_id.clone(),
        },
        detected: detections.boxes.iter().map(BoxRecord::from).collect(),
        regularized: regularized.boxes.iter().map(BoxRecord::from).collect(),
        report: report.clone(),
    }
}

pub fn write_results(
    detections: &DetectionSet,
    regularized: &DetectionSet,
    report: &RegularizationReport,
) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&results_file(detections, regularized, report))
        .expect("results file serializes");
    out.push(b'\n');
    out
}

pub fn parse_results(bytes: &[u8]) -> Result<ResultsFile> {
    let value = syntax_checked(bytes)?;
    let probe: VersionProbe = schema_checked(value.clone())?;
    match probe.version {
        Some(RESULTS_FILE_VERSION) => {}
        Some(found) => {
            return Err(Error::UnsupportedVersion {
                found,
                expected: RESULTS_FILE_VERSION,
            })
        }
        None => return Err(Error::ParseSchema("field `version`: missing".into())),
    }
    schema_checked(value)
}

/// Rebuilds a detection set from result-file box records (already clamped
/// when the results were produced).
pub fn detection_set_from_records(image: &ImageMeta, records: &[BoxRecord]) -> Result<DetectionSet> {
    let boxes = records
        .iter()
        .map(|r| {
            BoundingBox::new(
                PrimitiveClass::from_label(&r.class),
                r.score,
                r.x,
                r.y,
                r.w,
                r.h,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    DetectionSet::new(image.width, image.height, image.source_id.clone(), boxes)
}
