use serde::{Deserialize, Serialize};

use super::MaskSet;
use crate::color::Rgb;
use crate::grid::{Cell, GridDims};
use crate::pile::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlayKind {
    Border,
    Fill,
}

/// Observation color image with mask overlays and numeric labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub dims: GridDims,
    pub pixels: Vec<Rgb>,
    pub overlay: OverlayKind,
    /// `(marker_id, marker_pixel)` per mask.
    pub labels: Vec<(u32, Cell)>,
}

/// Distinct overlay tint for the `i`-th mask (golden-angle hue walk).
fn overlay_color(i: usize) -> Rgb {
    let h = (i as f64 * 137.507_764) % 360.0;
    let (s, v) = (0.75, 0.95);
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let to8 = |f: f64| ((f + m) * 255.0).round() as u8;
    Rgb([to8(r), to8(g), to8(b)])
}

/// Renders the border image (mask boundaries drawn in white) and the fill
/// image (each mask tinted with its own overlay color).
pub fn annotate(observation: &Observation, masks: &MaskSet) -> (AnnotatedImage, AnnotatedImage) {
    let dims = observation.dims;
    let labels: Vec<(u32, Cell)> = masks.masks.iter().map(|m| (m.marker_id, m.marker_pixel)).collect();
    let mut border = observation.color.clone();
    let mut fill = observation.color.clone();
    for (i, m) in masks.masks.iter().enumerate() {
        for c in m.bitmap.boundary_cells() {
            border[dims.index(c)] = Rgb::WHITE;
        }
        let tint = overlay_color(i);
        for c in m.bitmap.cells() {
            let p = &mut fill[dims.index(c)];
            *p = p.blend(tint, 0.5);
        }
    }
    (
        AnnotatedImage {
            dims,
            pixels: border,
            overlay: OverlayKind::Border,
            labels: labels.clone(),
        },
        AnnotatedImage {
            dims,
            pixels: fill,
            overlay: OverlayKind::Fill,
            labels,
        },
    )
}

impl AnnotatedImage {
    /// Binary PPM (P6). Marker pixels are painted black.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut pixels = self.pixels.clone();
        for (_, c) in &self.labels {
            if self.dims.contains(*c) {
                pixels[self.dims.index(*c)] = Rgb([0, 0, 0]);
            }
        }
        rgb_to_ppm(self.dims, &pixels)
    }
}

pub(crate) fn rgb_to_ppm(dims: GridDims, pixels: &[Rgb]) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    for p in pixels {
        out.extend_from_slice(&p.0);
    }
    out
}

impl Observation {
    /// Binary PPM (P6) of the color image.
    pub fn to_ppm(&self) -> Vec<u8> {
        rgb_to_ppm(self.dims, &self.color)
    }
}
