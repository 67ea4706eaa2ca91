//! Stage colours.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An RGB colour, normalised to `#RRGGBB` in upper case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Colour([u8; 3]);

impl Colour {
    /// Colour of situations that have not been assigned to a stage.
    pub const DEFAULT: Colour = Colour([0xFF, 0xFF, 0xFF]);

    pub const fn rgb(r: u8, g: u8, b: u8) -> Self {
        Colour([r, g, b])
    }

    pub fn channels(self) -> [u8; 3] {
        self.0
    }

    pub fn is_default(self) -> bool {
        self == Self::DEFAULT
    }

    fn from_hsl(h: f64, s: f64, l: f64) -> Self {
        let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
        let hp = (h.rem_euclid(360.0)) / 60.0;
        let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
        let (r, g, b) = match hp as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = l - c / 2.0;
        let to = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
        Colour([to(r), to(g), to(b)])
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

impl FromStr for Colour {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s.trim().trim_start_matches('#');
        let bad = || Error::validation(format!("`{s}` is not a #RRGGBB colour"));
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        Ok(Colour([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl TryFrom<String> for Colour {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Colour> for String {
    fn from(c: Colour) -> Self {
        c.to_string()
    }
}

/// Endless deterministic sequence of distinct pastel colours, stepping the
/// hue by the golden angle and cycling through a few lightness bands.
#[derive(Debug, Clone, Default)]
pub struct Palette {
    index: u32,
}

impl Palette {
    pub fn new() -> Self {
        Self::default()
    }

    /// Next colour that is not in `taken` and is not the default colour.
    pub fn next_free(&mut self, taken: impl Fn(Colour) -> bool) -> Colour {
        loop {
            let c = self.next().expect("palette is endless");
            if !c.is_default() && !taken(c) {
                return c;
            }
        }
    }
}

impl Iterator for Palette {
    type Item = Colour;

    fn next(&mut self) -> Option<Colour> {
        const GOLDEN_ANGLE: f64 = 137.507_764_050_037_85;
        let i = self.index;
        self.index += 1;
        let hue = 20.0 + GOLDEN_ANGLE * f64::from(i);
        let band = (i / 7) % 3;
        let (s, l) = [(0.62, 0.66), (0.48, 0.54), (0.70, 0.76)][band as usize];
        Some(Colour::from_hsl(hue, s, l))
    }
}
