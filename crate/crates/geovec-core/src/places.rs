//! Address and nearby-place records, and the ranking rule that turns raw map
//! features into the ordered "Nearby Places" list.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::geo::{cardinal_direction, haversine_km, initial_bearing_deg, CardinalDirection, Coordinate};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlaceError {
    #[error("address has no components")]
    EmptyAddress,
    #[error("place name is empty")]
    EmptyName,
}

/// Address components ordered from the most local level to the country.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeocodeResult {
    components: Vec<(String, String)>,
    display: String,
}

impl GeocodeResult {
    pub fn new(components: Vec<(String, String)>) -> Result<Self, PlaceError> {
        if components.is_empty() {
            return Err(PlaceError::EmptyAddress);
        }
        let display = components
            .iter()
            .map(|(_, v)| v.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        Ok(GeocodeResult { components, display })
    }

    pub fn components(&self) -> &[(String, String)] {
        &self.components
    }

    pub fn display(&self) -> &str {
        &self.display
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlaceKind {
    Poi,
    Street,
}

/// A named map feature near a query coordinate, with distance and bearing
/// measured from that query.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceOfInterest {
    pub name: String,
    pub coord: Coordinate,
    pub distance_km: f64,
    pub bearing_deg: f64,
    pub direction: CardinalDirection,
    pub kind: PlaceKind,
}

impl PlaceOfInterest {
    /// Derives distance, bearing and direction from `query`. A feature that
    /// sits exactly on the query point gets bearing 0 (North).
    pub fn measured(
        query: Coordinate,
        name: String,
        coord: Coordinate,
        kind: PlaceKind,
    ) -> Result<Self, PlaceError> {
        if name.trim().is_empty() {
            return Err(PlaceError::EmptyName);
        }
        let distance_km = haversine_km(query, coord);
        let bearing_deg = initial_bearing_deg(query, coord).unwrap_or(0.0);
        Ok(PlaceOfInterest {
            name,
            coord,
            distance_km,
            bearing_deg,
            direction: cardinal_direction(bearing_deg),
            kind,
        })
    }
}

/// A raw named feature as delivered by a map service.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceCandidate {
    pub name: String,
    pub coord: Coordinate,
    pub kind: PlaceKind,
}

fn by_distance_then_name(a: &PlaceOfInterest, b: &PlaceOfInterest) -> Ordering {
    a.distance_km
        .total_cmp(&b.distance_km)
        .then_with(|| a.name.cmp(&b.name))
}

/// The `k` nearest points of interest within `radius_km`, ascending by
/// distance with ties broken by name. When no POI lies inside the radius the
/// named streets inside the radius are ranked instead.
pub fn rank_nearby(
    query: Coordinate,
    candidates: &[PlaceCandidate],
    radius_km: f64,
    k: usize,
) -> Vec<PlaceOfInterest> {
    let measure = |kind: PlaceKind| -> Vec<PlaceOfInterest> {
        let mut v: Vec<PlaceOfInterest> = candidates
            .iter()
            .filter(|c| c.kind == kind)
            .filter_map(|c| PlaceOfInterest::measured(query, c.name.clone(), c.coord, kind).ok())
            .filter(|p| p.distance_km <= radius_km)
            .collect();
        v.sort_by(by_distance_then_name);
        v
    };
    let mut ranked = measure(PlaceKind::Poi);
    if ranked.is_empty() {
        ranked = measure(PlaceKind::Street);
    }
    ranked.truncate(k);
    ranked
}
