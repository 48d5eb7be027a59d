use serde::{Deserialize, Serialize};

use super::PainterError;
use crate::raster::NUM_CLASSES;

/// Dash pattern along the line, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dash {
    pub on: f64,
    pub off: f64,
}

impl Dash {
    pub fn period(&self) -> f64 {
        self.on + self.off
    }
}

/// How one road class is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSymbol {
    /// 1 for a single line, 2 for a double line.
    pub line_count: u8,
    /// Width of each stroke in pixels.
    pub stroke_width: f64,
    /// Clear gap between the two strokes of a double line, in pixels.
    #[serde(default)]
    pub spacing: f64,
    /// Pattern of the first (or only) stroke; absent means solid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dash: Option<Dash>,
    /// Pattern of the second stroke of a double line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_dash: Option<Dash>,
    pub color: [u8; 3],
}

impl ClassSymbol {
    /// Full width of the symbol in pixels at nominal spacing.
    pub fn casing_width(&self) -> f64 {
        match self.line_count {
            1 => self.stroke_width,
            _ => 2.0 * self.stroke_width + self.spacing,
        }
    }

    fn single(stroke_width: f64, dash: Option<Dash>) -> Self {
        Self { line_count: 1, stroke_width, spacing: 0.0, dash, second_dash: None, color: INK }
    }

    fn double(stroke_width: f64, spacing: f64, second_dash: Option<Dash>) -> Self {
        Self { line_count: 2, stroke_width, spacing, dash: None, second_dash, color: INK }
    }
}

const INK: [u8; 3] = [35, 31, 32];

/// Symbols of all five classes plus overpaint and randomization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbologySpec {
    /// Symbols for classes 1 to 5, in order.
    pub classes: Vec<ClassSymbol>,
    pub background: [u8; 3],
    /// Width of the background corridor painted under every road, pixels.
    pub overpaint_width: f64,
    /// Stroke widths vary uniformly by up to this many pixels.
    pub width_jitter: f64,
    /// Double-line gaps vary uniformly by up to this many pixels.
    pub spacing_jitter: f64,
    /// Start dashes at a uniformly drawn phase instead of at the line start.
    pub random_dash_phase: bool,
}

impl Default for SymbologySpec {
    fn default() -> Self {
        let dash = Some(Dash { on: 6.0, off: 4.0 });
        Self {
            classes: vec![
                ClassSymbol::single(1.0, dash),
                ClassSymbol::single(1.0, None),
                ClassSymbol::double(1.0, 3.0, dash),
                ClassSymbol::double(1.0, 4.0, None),
                ClassSymbol::double(1.0, 6.0, None),
            ],
            background: [247, 235, 205],
            overpaint_width: 13.0,
            width_jitter: 0.0,
            spacing_jitter: 1.0,
            random_dash_phase: true,
        }
    }
}

impl SymbologySpec {
    pub fn symbol(&self, class_index: usize) -> &ClassSymbol {
        &self.classes[class_index]
    }

    /// Widest symbol any draw can produce, in pixels.
    pub fn max_symbol_width(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| match c.line_count {
                1 => c.stroke_width + 2.0 * self.width_jitter,
                _ => 2.0 * (c.stroke_width + 2.0 * self.width_jitter) + c.spacing + 2.0 * self.spacing_jitter,
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), PainterError> {
        let bad = |msg: String| Err(PainterError::Symbology(msg));
        if self.classes.len() != NUM_CLASSES {
            return bad(format!("expected {NUM_CLASSES} class symbols, got {}", self.classes.len()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            let class = i + 1;
            if !matches!(c.line_count, 1 | 2) {
                return bad(format!("class {class}: line_count must be 1 or 2"));
            }
            if !(c.stroke_width > self.width_jitter) {
                return bad(format!("class {class}: stroke width must exceed the width jitter"));
            }
            if c.line_count == 2 && !(c.spacing > self.spacing_jitter) {
                return bad(format!("class {class}: spacing must exceed the spacing jitter"));
            }
            if c.line_count == 1 && c.second_dash.is_some() {
                return bad(format!("class {class}: a single line has no second stroke"));
            }
            for d in [c.dash, c.second_dash].into_iter().flatten() {
                if !(d.on > 0.0 && d.off > 0.0) {
                    return bad(format!("class {class}: dash lengths must be positive"));
                }
            }
        }
        if !(self.width_jitter >= 0.0 && self.spacing_jitter >= 0.0) {
            return bad("jitter must be non-negative".into());
        }
        if self.overpaint_width < self.max_symbol_width() {
            return bad(format!(
                "overpaint width {} is narrower than the widest symbol {}",
                self.overpaint_width,
                self.max_symbol_width()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let s = SymbologySpec::default();
        s.validate().unwrap();
        assert_eq!(s.max_symbol_width(), 10.0);
    }

    #[test]
    fn narrow_overpaint_is_rejected() {
        let s = SymbologySpec { overpaint_width: 8.0, ..Default::default() };
        assert!(matches!(s.validate(), Err(PainterError::Symbology(_))));
    }

    #[test]
    fn zero_dash_is_rejected() {
        let mut s = SymbologySpec::default();
        s.classes[0].dash = Some(Dash { on: 0.0, off: 4.0 });
        assert!(s.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = SymbologySpec::default();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<SymbologySpec>(&text).unwrap(), s);
    }
}
