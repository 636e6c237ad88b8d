use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// 8-bit RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);

    /// L-infinity distance between two colors.
    pub fn linf(self, other: Rgb) -> u8 {
        (0..3)
            .map(|i| self.0[i].abs_diff(other.0[i]))
            .max()
            .unwrap_or(0)
    }

    pub fn blend(self, other: Rgb, alpha: f64) -> Rgb {
        let mut out = [0u8; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let v = (1.0 - alpha) * self.0[i] as f64 + alpha * other.0[i] as f64;
            *o = v.round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    }
}

/// The fixed 12-entry named palette garments are colored from and masks are
/// histogrammed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteColor {
    Black,
    White,
    Gray,
    Red,
    Orange,
    Yellow,
    Green,
    Cyan,
    Blue,
    Purple,
    Pink,
    Brown,
}

impl PaletteColor {
    pub const ALL: [PaletteColor; 12] = [
        PaletteColor::Black,
        PaletteColor::White,
        PaletteColor::Gray,
        PaletteColor::Red,
        PaletteColor::Orange,
        PaletteColor::Yellow,
        PaletteColor::Green,
        PaletteColor::Cyan,
        PaletteColor::Blue,
        PaletteColor::Purple,
        PaletteColor::Pink,
        PaletteColor::Brown,
    ];

    pub fn rgb(self) -> Rgb {
        Rgb(match self {
            PaletteColor::Black => [20, 20, 20],
            PaletteColor::White => [235, 235, 235],
            PaletteColor::Gray => [128, 128, 128],
            PaletteColor::Red => [200, 30, 30],
            PaletteColor::Orange => [240, 140, 20],
            PaletteColor::Yellow => [230, 220, 40],
            PaletteColor::Green => [40, 170, 60],
            PaletteColor::Cyan => [40, 200, 210],
            PaletteColor::Blue => [40, 60, 200],
            PaletteColor::Purple => [130, 50, 170],
            PaletteColor::Pink => [240, 130, 180],
            PaletteColor::Brown => [120, 70, 30],
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PaletteColor::Black => "black",
            PaletteColor::White => "white",
            PaletteColor::Gray => "gray",
            PaletteColor::Red => "red",
            PaletteColor::Orange => "orange",
            PaletteColor::Yellow => "yellow",
            PaletteColor::Green => "green",
            PaletteColor::Cyan => "cyan",
            PaletteColor::Blue => "blue",
            PaletteColor::Purple => "purple",
            PaletteColor::Pink => "pink",
            PaletteColor::Brown => "brown",
        }
    }

    /// Nearest palette entry by squared Euclidean RGB distance; ties go to the
    /// earlier entry.
    pub fn nearest(c: Rgb) -> PaletteColor {
        let d2 = |p: PaletteColor| {
            let q = p.rgb().0;
            (0..3)
                .map(|i| {
                    let d = c.0[i] as i32 - q[i] as i32;
                    d * d
                })
                .sum::<i32>()
        };
        let mut best = PaletteColor::ALL[0];
        let mut best_d = d2(best);
        for &p in &PaletteColor::ALL[1..] {
            let d = d2(p);
            if d < best_d {
                best = p;
                best_d = d;
            }
        }
        best
    }
}

impl fmt::Display for PaletteColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PaletteColor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let lower = if lower == "grey" { "gray".to_string() } else { lower };
        PaletteColor::ALL
            .iter()
            .copied()
            .find(|p| p.name() == lower)
            .ok_or_else(|| format!("unknown palette color `{s}`"))
    }
}
