//! LabelMe-style ColorChecker corner annotations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four patches marked on every annotated chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerLabel {
    Cyan,
    White,
    Brown,
    Black,
}

impl CornerLabel {
    pub const ALL: [CornerLabel; 4] = [CornerLabel::Cyan, CornerLabel::White, CornerLabel::Brown, CornerLabel::Black];

    pub fn name(self) -> &'static str {
        match self {
            CornerLabel::Cyan => "cyan",
            CornerLabel::White => "white",
            CornerLabel::Brown => "brown",
            CornerLabel::Black => "black",
        }
    }
}

/// Corner-patch centers of a ColorChecker in image coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerAnnotation {
    pub cyan: [f64; 2],
    pub white: [f64; 2],
    pub brown: [f64; 2],
    pub black: [f64; 2],
    pub image_width: usize,
    pub image_height: usize,
}

impl CheckerAnnotation {
    pub fn new(
        brown: [f64; 2],
        cyan: [f64; 2],
        white: [f64; 2],
        black: [f64; 2],
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        let ann = CheckerAnnotation {
            cyan,
            white,
            brown,
            black,
            image_width,
            image_height,
        };
        ann.validate()?;
        Ok(ann)
    }

    pub fn corner(&self, label: CornerLabel) -> [f64; 2] {
        match label {
            CornerLabel::Cyan => self.cyan,
            CornerLabel::White => self.white,
            CornerLabel::Brown => self.brown,
            CornerLabel::Black => self.black,
        }
    }

    /// Signed area of the quad brown → cyan → black → white (the chart outline order).
    pub fn quad_area(&self) -> f64 {
        let pts = [self.brown, self.cyan, self.black, self.white];
        let mut twice = 0.0;
        for i in 0..4 {
            let [x0, y0] = pts[i];
            let [x1, y1] = pts[(i + 1) % 4];
            twice += x0 * y1 - x1 * y0;
        }
        0.5 * twice
    }

    /// Minimal LabelMe document with one point shape per corner.
    pub fn to_labelme_json(&self) -> String {
        let shapes: Vec<_> = CornerLabel::ALL
            .iter()
            .map(|&l| serde_json::json!({"label": l.name(), "points": [self.corner(l)], "shape_type": "point"}))
            .collect();
        let doc = serde_json::json!({
            "version": "5.0.1",
            "shapes": shapes,
            "imageWidth": self.image_width,
            "imageHeight": self.image_height,
        });
        serde_json::to_string_pretty(&doc).expect("annotation serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for label in CornerLabel::ALL {
            let [x, y] = self.corner(label);
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Annotation(format!("{} point is not finite", label.name())));
            }
            if x < 0.0 || y < 0.0 || x > self.image_width as f64 || y > self.image_height as f64 {
                return Err(Error::Annotation(format!(
                    "{} point ({x}, {y}) outside {}x{} image",
                    label.name(),
                    self.image_width,
                    self.image_height
                )));
            }
        }
        for (i, a) in CornerLabel::ALL.iter().enumerate() {
            for b in &CornerLabel::ALL[i + 1..] {
                let (pa, pb) = (self.corner(*a), self.corner(*b));
                if (pa[0] - pb[0]).hypot(pa[1] - pb[1]) < 1e-9 {
                    return Err(Error::Annotation(format!(
                        "degenerate: {} and {} coincide",
                        a.name(),
                        b.name()
                    )));
                }
            }
        }
        if self.quad_area().abs() < 1e-9 {
            return Err(Error::Annotation("degenerate: corner quad has zero area".into()));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct LabelMeFile {
    shapes: Vec<LabelMeShape>,
    #[serde(rename = "imageWidth")]
    image_width: usize,
    #[serde(rename = "imageHeight")]
    image_height: usize,
}

#[derive(Deserialize)]
struct LabelMeShape {
    label: String,
    points: Vec<[f64; 2]>,
}

pub fn read_checker_annotation(path: impl AsRef<Path>) -> Result<CheckerAnnotation> {
    let text = std::fs::read_to_string(path)?;
    parse_checker_annotation(&text)
}

/// Pull the first `cyan`, `white`, `brown` and `black` point out of a LabelMe
/// JSON document; other shapes are ignored.
pub fn parse_checker_annotation(json_text: &str) -> Result<CheckerAnnotation> {
    let file: LabelMeFile =
        serde_json::from_str(json_text).map_err(|e| Error::Annotation(format!("not a LabelMe document: {e}")))?;
    let find = |label: CornerLabel| -> Result<[f64; 2]> {
        let shape = file
            .shapes
            .iter()
            .find(|s| s.label == label.name())
            .ok_or_else(|| Error::Annotation(label.name().to_string()))?;
        shape
            .points
            .first()
            .copied()
            .ok_or_else(|| Error::Annotation(format!("{} shape has no points", label.name())))
    };
    CheckerAnnotation::new(
        find(CornerLabel::Brown)?,
        find(CornerLabel::Cyan)?,
        find(CornerLabel::White)?,
        find(CornerLabel::Black)?,
        file.image_width,
        file.image_height,
    )
}
