//! Ring annotations in the Labelme JSON layout, used both for ground truth
//! and for detection results.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationDoc {
    pub image_name: String,
    pub width: usize,
    pub height: usize,
    pub polylines: Vec<Polyline>,
    /// Free-form block written under `metadata`; detection results record
    /// their configuration here.
    pub metadata: Option<Value>,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Annotation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn round3(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl AnnotationDoc {
    pub fn new(image_name: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            image_name: image_name.into(),
            width,
            height,
            polylines: Vec::new(),
            metadata: None,
        }
    }

    /// Closed polylines, in document order.
    pub fn rings(&self) -> Vec<Vec<(f64, f64)>> {
        self.polylines.iter().filter(|p| p.closed).map(|p| p.points.clone()).collect()
    }

    /// Coordinates may range over the area covered by the pixels, whose
    /// centres sit on integer positions.
    fn in_bounds(&self, (x, y): (f64, f64)) -> bool {
        let (w, h) = (self.width as f64, self.height as f64);
        x.is_finite() && y.is_finite() && (-0.5..=w - 0.5).contains(&x) && (-0.5..=h - 0.5).contains(&y)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("imageWidth", "image dimensions must be positive"));
        }
        for (i, p) in self.polylines.iter().enumerate() {
            let min = if p.closed { 3 } else { 2 };
            if p.points.len() < min {
                return Err(invalid(
                    format!("shapes[{i}].points"),
                    format!("{} points, at least {min} required", p.points.len()),
                ));
            }
            if let Some(j) = p.points.iter().position(|&q| !self.in_bounds(q)) {
                let (x, y) = p.points[j];
                return Err(invalid(
                    format!("shapes[{i}].points[{j}]"),
                    format!("({x}, {y}) is outside the {}x{} image", self.width, self.height),
                ));
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        let shapes: Vec<Value> = self
            .polylines
            .iter()
            .map(|p| {
                let points: Vec<Value> = p.points.iter().map(|&(x, y)| json!([round3(x), round3(y)])).collect();
                json!({
                    "label": p.label,
                    "points": points,
                    "group_id": null,
                    "shape_type": if p.closed { "polygon" } else { "linestrip" },
                    "flags": {},
                })
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("version".into(), json!("5.0.1"));
        doc.insert("flags".into(), json!({}));
        doc.insert("shapes".into(), Value::Array(shapes));
        doc.insert("imagePath".into(), json!(self.image_name));
        doc.insert("imageData".into(), Value::Null);
        doc.insert("imageHeight".into(), json!(self.height));
        doc.insert("imageWidth".into(), json!(self.width));
        if let Some(m) = &self.metadata {
            doc.insert("metadata".into(), m.clone());
        }
        Value::Object(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_value())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| invalid("$", "document is not a JSON object"))?;
        let dim = |key: &str| -> Result<usize> {
            let d = obj.get(key).ok_or_else(|| invalid(key, "missing"))?;
            d.as_u64()
                .filter(|&d| d > 0)
                .map(|d| d as usize)
                .ok_or_else(|| invalid(key, format!("expected a positive integer, got {d}")))
        };
        let width = dim("imageWidth")?;
        let height = dim("imageHeight")?;
        let image_name = match obj.get("imagePath") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(invalid("imagePath", format!("expected a string, got {other}"))),
        };
        let shapes = obj
            .get("shapes")
            .ok_or_else(|| invalid("shapes", "missing"))?
            .as_array()
            .ok_or_else(|| invalid("shapes", "expected an array"))?;

        let mut polylines = Vec::with_capacity(shapes.len());
        for (i, shape) in shapes.iter().enumerate() {
            let field = |f: &str| format!("shapes[{i}].{f}");
            let shape = shape.as_object().ok_or_else(|| invalid(format!("shapes[{i}]"), "expected an object"))?;
            let label = match shape.get("label") {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(invalid(field("label"), "expected a string")),
            };
            let closed = match shape.get("shape_type").and_then(Value::as_str) {
                None | Some("polygon") => true,
                Some("linestrip") | Some("line") => false,
                Some(other) => return Err(invalid(field("shape_type"), format!("unsupported shape type `{other}`"))),
            };
            let raw = shape
                .get("points")
                .ok_or_else(|| invalid(field("points"), "missing"))?
                .as_array()
                .ok_or_else(|| invalid(field("points"), "expected an array"))?;
            let mut points = Vec::with_capacity(raw.len());
            for (j, p) in raw.iter().enumerate() {
                let xy = p
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .and_then(|a| Some((a[0].as_f64()?, a[1].as_f64()?)))
                    .ok_or_else(|| invalid(format!("shapes[{i}].points[{j}]"), "expected [x, y]"))?;
                points.push(xy);
            }
            polylines.push(Polyline { label, points, closed });
        }
        let doc = Self {
            image_name,
            width,
            height,
            polylines,
            metadata: obj.get("metadata").cloned(),
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(s)?)
    }
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<AnnotationDoc> {
    AnnotationDoc::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_annotation(doc: &AnnotationDoc, path: impl AsRef<Path>) -> Result<()> {
    doc.validate()?;
    std::fs::write(path, doc.to_json()?)?;
    Ok(())
}

/// Result document with one closed polygon per ring, labelled `ring_1`
/// (innermost) onwards.
pub fn rings_to_doc(
    rings: &[Vec<(f64, f64)>],
    image_name: &str,
    (width, height): (usize, usize),
    metadata: Option<Value>,
) -> AnnotationDoc {
    let polylines = rings
        .iter()
        .enumerate()
        .map(|(i, pts)| Polyline {
            label: format!("ring_{}", i + 1),
            points: pts.clone(),
            closed: true,
        })
        .collect();
    AnnotationDoc {
        image_name: image_name.to_string(),
        width,
        height,
        polylines,
        metadata,
    }
}
