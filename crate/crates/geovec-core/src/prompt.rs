//! Deterministic rendering of geolocation prompts.
//!
//! The canonical layout is line-oriented and `\n`-separated:
//!
//! ```text
//! Describe the geographic, economic, and social characteristics of the location at coordinates (<lat>, <lon>).
//! Address: <display>
//! Nearby Places:
//! 1. <name>, <d.d> km, <Direction> (<bearing> degrees)
//! ```
//!
//! Each variant emits a prefix of the next richer one, so the nearby-place
//! context always comes last.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::geo::{CardinalDirection, Coordinate};
use crate::places::{GeocodeResult, PlaceOfInterest};

pub const INSTRUCTION_PREFIX: &str =
    "Describe the geographic, economic, and social characteristics of the location at coordinates";
pub const ADDRESS_LABEL: &str = "Address: ";
pub const PLACES_HEADER: &str = "Nearby Places:";

/// Top-k values that correspond to rows of the prompt ablation.
pub const ABLATION_TOP_K: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("variant {variant} requires the {section} section")]
    MissingSection { variant: PromptVariant, section: &'static str },
    #[error("top-k must be at least 1")]
    ZeroTopK,
    #[error("unknown prompt variant `{0}`")]
    UnknownVariant(String),
    #[error("malformed nearby-place line `{0}`")]
    MalformedLine(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptVariant {
    InstructionOnly,
    InstructionAddress,
    InstructionAddressTopK(usize),
}

impl PromptVariant {
    pub fn top_k(k: usize) -> Result<Self, PromptError> {
        if k == 0 {
            return Err(PromptError::ZeroTopK);
        }
        Ok(PromptVariant::InstructionAddressTopK(k))
    }

    /// True for the standard ablation settings (k in 1, 5, 10).
    pub fn is_ablation_row(&self) -> bool {
        match self {
            PromptVariant::InstructionAddressTopK(k) => ABLATION_TOP_K.contains(k),
            _ => true,
        }
    }

    pub fn needs_address(&self) -> bool {
        !matches!(self, PromptVariant::InstructionOnly)
    }

    pub fn places_k(&self) -> Option<usize> {
        match self {
            PromptVariant::InstructionAddressTopK(k) => Some(*k),
            _ => None,
        }
    }
}

impl Default for PromptVariant {
    fn default() -> Self {
        PromptVariant::InstructionAddressTopK(10)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptVariant::InstructionOnly => f.write_str("instruction-only"),
            PromptVariant::InstructionAddress => f.write_str("instruction-address"),
            PromptVariant::InstructionAddressTopK(k) => write!(f, "instruction-address-top-{k}"),
        }
    }
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instruction-only" => Ok(PromptVariant::InstructionOnly),
            "instruction-address" => Ok(PromptVariant::InstructionAddress),
            _ => s
                .strip_prefix("instruction-address-top-")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| PromptError::UnknownVariant(s.to_string()))
                .and_then(PromptVariant::top_k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub variant: PromptVariant,
    pub text: String,
    pub coord: Coordinate,
}

/// First `k` entries of an already-ranked list.
pub fn select_top_k(places: &[PlaceOfInterest], k: usize) -> &[PlaceOfInterest] {
    &places[..k.min(places.len())]
}

// Newlines would break the line structure; trailing blanks are not allowed.
fn clean(s: &str) -> String {
    let joined: String = s
        .chars()
        .map(|ch| if ch == '\n' || ch == '\r' { ' ' } else { ch })
        .collect();
    joined.trim().to_string()
}

/// Bearing rounded to whole degrees in `[0, 360)`.
pub fn rounded_bearing(bearing_deg: f64) -> u32 {
    (libm::round(bearing_deg) as i64).rem_euclid(360) as u32
}

pub fn render_place_line(index: usize, place: &PlaceOfInterest) -> String {
    format!(
        "{}. {}, {:.1} km, {} ({} degrees)",
        index,
        clean(&place.name),
        place.distance_km,
        place.direction,
        rounded_bearing(place.bearing_deg)
    )
}

/// Fields recovered from a rendered nearby-place line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPlaceLine {
    pub index: usize,
    pub name: String,
    pub distance_km: f64,
    pub direction: CardinalDirection,
    pub bearing_deg: u32,
}

pub fn parse_place_line(line: &str) -> Result<ParsedPlaceLine, PromptError> {
    let bad = || PromptError::MalformedLine(line.to_string());
    let (index, rest) = line.split_once(". ").ok_or_else(bad)?;
    let index = index.parse().map_err(|_| bad())?;
    let rest = rest.strip_suffix(" degrees)").ok_or_else(bad)?;
    let (rest, bearing) = rest.rsplit_once(" (").ok_or_else(bad)?;
    let bearing_deg = bearing.parse().map_err(|_| bad())?;
    let (rest, direction) = rest.rsplit_once(", ").ok_or_else(bad)?;
    let direction = CardinalDirection::parse(direction).ok_or_else(bad)?;
    let (name, dist) = rest.rsplit_once(", ").ok_or_else(bad)?;
    let distance_km = dist
        .strip_suffix(" km")
        .and_then(|d| d.parse().ok())
        .ok_or_else(bad)?;
    Ok(ParsedPlaceLine {
        index,
        name: name.to_string(),
        distance_km,
        direction,
        bearing_deg,
    })
}

/// Renders the prompt for `variant`. Address is required unless the variant
/// is instruction-only; places are required for top-k variants and are
/// assumed ranked ascending by distance.
pub fn build_prompt(
    variant: PromptVariant,
    coord: Coordinate,
    geocode: Option<&GeocodeResult>,
    places: Option<&[PlaceOfInterest]>,
) -> Result<Prompt, PromptError> {
    let mut lines: Vec<String> = Vec::new();
    lines.push(format!(
        "{} ({:.4}, {:.4}).",
        INSTRUCTION_PREFIX,
        coord.lat(),
        coord.lon()
    ));
    if variant.needs_address() {
        let geocode = geocode.ok_or(PromptError::MissingSection { variant, section: "address" })?;
        lines.push(format!("{}{}", ADDRESS_LABEL, clean(geocode.display())));
    }
    if let Some(k) = variant.places_k() {
        let places = places.ok_or(PromptError::MissingSection { variant, section: "nearby places" })?;
        lines.push(PLACES_HEADER.to_string());
        for (i, p) in select_top_k(places, k).iter().enumerate() {
            lines.push(render_place_line(i + 1, p));
        }
    }
    Ok(Prompt {
        variant,
        text: lines.join("\n"),
        coord,
    })
}
