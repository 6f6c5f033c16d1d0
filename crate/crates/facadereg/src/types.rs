//! Domain types for boxes, attributes, and problem dimensions.

use std::fmt;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primitive kind a detector can emit. Unknown labels map to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveClass {
    Window,
    Door,
    Balcony,
    Other,
}

impl PrimitiveClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrimitiveClass::Window => "window",
            PrimitiveClass::Door => "door",
            PrimitiveClass::Balcony => "balcony",
            PrimitiveClass::Other => "other",
        }
    }

    /// Lenient mapping: any label that is not a known class becomes `Other`.
    pub fn from_label(label: &str) -> Self {
        match label {
            "window" => PrimitiveClass::Window,
            "door" => PrimitiveClass::Door,
            "balcony" => PrimitiveClass::Balcony,
            _ => PrimitiveClass::Other,
        }
    }
}

impl fmt::Display for PrimitiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for PrimitiveClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PrimitiveClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(PrimitiveClass::from_label(&s))
    }
}

/// The four box attributes. All per-attribute containers are indexed by this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    X,
    Y,
    W,
    H,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [Attribute::X, Attribute::Y, Attribute::W, Attribute::H];

    pub fn index(self) -> usize {
        match self {
            Attribute::X => 0,
            Attribute::Y => 1,
            Attribute::W => 2,
            Attribute::H => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::X => "x",
            Attribute::Y => "y",
            Attribute::W => "w",
            Attribute::H => "h",
        }
    }
}

/// One detected primitive: class, confidence, and the four attributes.
///
/// `(x, y)` is the upper-left corner in pixels, `(w, h)` the size. Attributes
/// are kept in double precision because regularized values are cluster means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub class: PrimitiveClass,
    pub confidence: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(
        class: PrimitiveClass,
        confidence: f64,
        x: f64,
        y: f64,
        w: f64,
        h: f64,
    ) -> Result<Self> {
        let b = BoundingBox {
            class,
            confidence,
            x,
            y,
            w,
            h,
        };
        b.validate(0)?;
        Ok(b)
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        for (attr, v) in Attribute::ALL.iter().zip([self.x, self.y, self.w, self.h]) {
            if !v.is_finite() {
                return Err(Error::InvalidBox {
                    index,
                    reason: format!("attribute {} is not finite", attr.name()),
                });
            }
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox {
                index,
                reason: format!("non-positive size w={} h={}", self.w, self.h),
            });
        }
        if !self.confidence.is_finite() || !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidBox {
                index,
                reason: format!("confidence {} outside [0, 1]", self.confidence),
            });
        }
        Ok(())
    }

    pub fn attribute(&self, attr: Attribute) -> f64 {
        match attr {
            Attribute::X => self.x,
            Attribute::Y => self.y,
            Attribute::W => self.w,
            Attribute::H => self.h,
        }
    }

    pub fn set_attribute(&mut self, attr: Attribute, value: f64) {
        match attr {
            Attribute::X => self.x = value,
            Attribute::Y => self.y = value,
            Attribute::W => self.w = value,
            Attribute::H => self.h = value,
        }
    }
}

/// All detections of one image. Box order is stable: index i identifies the
/// i-th box throughout the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub image_width: u32,
    pub image_height: u32,
    pub source_id: String,
    pub boxes: Vec<BoundingBox>,
}

impl DetectionSet {
    pub fn new(
        image_width: u32,
        image_height: u32,
        source_id: impl Into<String>,
        boxes: Vec<BoundingBox>,
    ) -> Result<Self> {
        for (i, b) in boxes.iter().enumerate() {
            b.validate(i)?;
        }
        Ok(DetectionSet {
            image_width,
            image_height,
            source_id: source_id.into(),
            boxes,
        })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Projects one attribute of every box into a vector, preserving order.
    pub fn attribute_samples(&self, attr: Attribute) -> Result<Vec<f64>> {
        attribute_samples(&self.boxes, attr)
    }
}

/// Per-attribute projection of a box list. Value i is box i's `attr` field.
pub fn attribute_samples(boxes: &[BoundingBox], attr: Attribute) -> Result<Vec<f64>> {
    if boxes.is_empty() {
        return Err(Error::EmptyDetections);
    }
    Ok(boxes.iter().map(|b| b.attribute(attr)).collect())
}

/// Number of explicit selection unknowns: n_boxes * (|X|+|Y|+|W|+|H|).
/// Counts only selection variables, excluding or-chain auxiliaries.
pub fn explicit_unknown_count(n_boxes: usize, space_sizes: [usize; 4]) -> usize {
    n_boxes * space_sizes.iter().sum::<usize>()
}
