//! Spherical geodesy and inverse-distance graphs over node sets.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use libm::{atan2, cos, sin, sqrt};
use thiserror::Error;

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Default clamp applied to pairwise distances before inversion.
pub const DEFAULT_MIN_DIST_KM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate (lon {lon}, lat {lat})")]
    InvalidCoordinate { lon: f64, lat: f64 },
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("{ids} ids but {coords} coordinates")]
    LengthMismatch { ids: usize, coords: usize },
    #[error("bearing is undefined between identical points")]
    DegenerateBearing,
}

/// A point on the sphere in degrees. Both components are finite and within
/// their closed ranges; the constructor is the only way in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coordinate {
    lon: f64,
    lat: f64,
}

impl Coordinate {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let ok = lon.is_finite()
            && lat.is_finite()
            && (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat);
        if ok {
            Ok(Coordinate { lon, lat })
        } else {
            Err(GeoError::InvalidCoordinate { lon, lat })
        }
    }

    /// Same as [`Coordinate::new`] with latitude first.
    pub fn from_lat_lon(lat: f64, lon: f64) -> Result<Self, GeoError> {
        Self::new(lon, lat)
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4})", self.lat, self.lon)
    }
}

/// Node identifiers with their coordinates, the `P` matrix of the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    ids: Vec<String>,
    coords: Vec<Coordinate>,
}

impl NodeSet {
    pub fn new(ids: Vec<String>, coords: Vec<Coordinate>) -> Result<Self, GeoError> {
        if ids.len() != coords.len() {
            return Err(GeoError::LengthMismatch {
                ids: ids.len(),
                coords: coords.len(),
            });
        }
        if ids.is_empty() {
            return Err(GeoError::EmptyNodeSet);
        }
        let mut sorted: Vec<&str> = ids.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GeoError::DuplicateId(String::from(w[0])));
        }
        Ok(NodeSet { ids, coords })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Coordinate)> + '_ {
        self.ids.iter().map(String::as_str).zip(self.coords.iter().copied())
    }

    /// A new set with nodes reordered so that entry `k` is old entry `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> NodeSet {
        NodeSet {
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: order.iter().map(|&i| self.coords[i]).collect(),
        }
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: Coordinate, b: Coordinate) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = sin(dlat * 0.5);
    let s_lon = sin(dlon * 0.5);
    let h = s_lat * s_lat + cos(lat1) * cos(lat2) * s_lon * s_lon;
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * atan2(sqrt(h), sqrt(1.0 - h))
}

/// Initial great-circle bearing from `a` towards `b`, clockwise from true
/// north, in `[0, 360)`.
pub fn initial_bearing_deg(a: Coordinate, b: Coordinate) -> Result<f64, GeoError> {
    if a == b {
        return Err(GeoError::DegenerateBearing);
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = sin(dlon) * cos(lat2);
    let x = cos(lat1) * sin(lat2) - sin(lat1) * cos(lat2) * cos(dlon);
    let deg = atan2(y, x).to_degrees();
    let mut bearing = wrap_360(deg);
    // wrapping can round up to exactly 360 for tiny negative inputs
    if bearing >= 360.0 {
        bearing = 0.0;
    }
    Ok(bearing)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CardinalDirection {
    North,
    Northeast,
    East,
    Southeast,
    South,
    Southwest,
    West,
    Northwest,
}

impl CardinalDirection {
    pub const ALL: [CardinalDirection; 8] = [
        CardinalDirection::North,
        CardinalDirection::Northeast,
        CardinalDirection::East,
        CardinalDirection::Southeast,
        CardinalDirection::South,
        CardinalDirection::Southwest,
        CardinalDirection::West,
        CardinalDirection::Northwest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CardinalDirection::North => "North",
            CardinalDirection::Northeast => "Northeast",
            CardinalDirection::East => "East",
            CardinalDirection::Southeast => "Southeast",
            CardinalDirection::South => "South",
            CardinalDirection::Southwest => "Southwest",
            CardinalDirection::West => "West",
            CardinalDirection::Northwest => "Northwest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for CardinalDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn wrap_360(x: f64) -> f64 {
    let r = libm::fmod(x, 360.0);
    if r < 0.0 {
        r + 360.0
    } else {
        r
    }
}

/// 8-wind label for a bearing. Bin `k` covers `[45k - 22.5, 45k + 22.5)`
/// modulo 360. Out-of-range inputs are wrapped first.
pub fn cardinal_direction(bearing_deg: f64) -> CardinalDirection {
    let shifted = wrap_360(wrap_360(bearing_deg) + 22.5);
    let k = (shifted / 45.0) as usize % 8;
    CardinalDirection::ALL[k]
}

/// Dense symmetric inverse-distance weights with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    weights: Vec<f64>,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Row-major weights.
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// `A[i][j] = 1 / max(haversine_km(i, j), min_dist_km)` off the diagonal.
pub fn build_adjacency(nodes: &NodeSet, min_dist_km: f64) -> AdjacencyMatrix {
    let n = nodes.len();
    let mut weights = alloc::vec![0.0; n * n];
    let coords = nodes.coords();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = haversine_km(coords[i], coords[j]).max(min_dist_km);
            let w = 1.0 / d;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    AdjacencyMatrix { n, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn c(lat: f64, lon: f64) -> Coordinate {
        Coordinate::from_lat_lon(lat, lon).unwrap()
    }

    // Independent oracle: spherical law of cosines in plain std-free form.
    fn law_of_cosines_km(a: Coordinate, b: Coordinate) -> f64 {
        let (p1, p2) = (a.lat().to_radians(), b.lat().to_radians());
        let dl = (b.lon() - a.lon()).to_radians();
        let cosang = sin(p1) * sin(p2) + cos(p1) * cos(p2) * cos(dl);
        libm::acos(cosang.clamp(-1.0, 1.0)) * EARTH_RADIUS_KM
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Coordinate::new(180.5, 0.0).is_err());
        assert!(Coordinate::new(0.0, -90.1).is_err());
        assert!(Coordinate::new(f64::NAN, 0.0).is_err());
        assert!(Coordinate::new(-180.0, 90.0).is_ok());
    }

    #[test]
    fn nodeset_rejects_duplicates() {
        let err = NodeSet::new(
            vec!["a".to_string(), "b".to_string(), "a".to_string()],
            vec![c(0.0, 0.0); 3],
        )
        .unwrap_err();
        assert_eq!(err, GeoError::DuplicateId("a".to_string()));
        assert_eq!(
            NodeSet::new(vec![], vec![]).unwrap_err(),
            GeoError::EmptyNodeSet
        );
    }

    #[test]
    fn haversine_identity_and_antipode() {
        assert_eq!(haversine_km(c(0.0, 0.0), c(0.0, 0.0)), 0.0);
        let d = haversine_km(c(0.0, 0.0), c(0.0, 180.0));
        assert!((d - core::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
        assert!((d - 20015.115).abs() < 1e-3);
    }

    #[test]
    fn paris_london() {
        let paris = c(48.8566, 2.3522);
        let london = c(51.5074, -0.1278);
        let d = haversine_km(paris, london);
        assert!((d - law_of_cosines_km(paris, london)).abs() < 1e-6);
        assert!((d - 343.6).abs() < 0.5, "{d}");
    }

    #[test]
    fn bearing_examples() {
        assert!((initial_bearing_deg(c(0.0, 0.0), c(0.0, 10.0)).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(initial_bearing_deg(c(0.0, 0.0), c(10.0, 0.0)).unwrap(), 0.0);
        assert_eq!(
            initial_bearing_deg(c(1.0, 1.0), c(1.0, 1.0)),
            Err(GeoError::DegenerateBearing)
        );
    }

    #[test]
    fn cardinal_bins() {
        assert_eq!(cardinal_direction(90.0), CardinalDirection::East);
        assert_eq!(cardinal_direction(0.0), CardinalDirection::North);
        assert_eq!(cardinal_direction(337.5), CardinalDirection::North);
        assert_eq!(cardinal_direction(337.4999), CardinalDirection::Northwest);
        assert_eq!(cardinal_direction(22.5), CardinalDirection::Northeast);
        assert_eq!(cardinal_direction(22.4999), CardinalDirection::North);
        assert_eq!(cardinal_direction(359.9999), CardinalDirection::North);
        assert_eq!(cardinal_direction(202.5), CardinalDirection::Southwest);
    }

    #[test]
    fn adjacency_two_nodes_and_clamp() {
        // 2 km along the equator: 2 / (R * pi / 180) degrees of longitude.
        let dlon = 2.0 / (EARTH_RADIUS_KM * core::f64::consts::PI / 180.0);
        let nodes = NodeSet::new(
            vec!["a".to_string(), "b".to_string()],
            vec![c(0.0, 0.0), c(0.0, dlon)],
        )
        .unwrap();
        let a = build_adjacency(&nodes, DEFAULT_MIN_DIST_KM);
        assert!((a.get(0, 1) - 0.5).abs() < 1e-12);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(1, 1), 0.0);

        let same = NodeSet::new(
            vec!["a".to_string(), "b".to_string()],
            vec![c(3.0, 4.0), c(3.0, 4.0)],
        )
        .unwrap();
        let a = build_adjacency(&same, 0.1);
        assert!((a.get(1, 0) - 10.0).abs() < 1e-12);
    }

    fn coord_strategy() -> impl Strategy<Value = Coordinate> {
        (-180.0f64..=180.0, -90.0f64..=90.0).prop_map(|(lon, lat)| Coordinate::new(lon, lat).unwrap())
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in coord_strategy(), b in coord_strategy()) {
            prop_assert_eq!(haversine_km(a, b), haversine_km(b, a));
        }

        #[test]
        fn triangle_inequality(a in coord_strategy(), b in coord_strategy(), m in coord_strategy()) {
            prop_assert!(haversine_km(a, b) <= haversine_km(a, m) + haversine_km(m, b) + 1e-9);
        }

        #[test]
        fn bearing_in_range_and_direction_total(a in coord_strategy(), b in coord_strategy()) {
            prop_assume!(a != b);
            let br = initial_bearing_deg(a, b).unwrap();
            prop_assert!((0.0..360.0).contains(&br));
            let _ = cardinal_direction(br);
        }

        #[test]
        fn adjacency_symmetric_zero_diagonal(pts in proptest::collection::vec(coord_strategy(), 2..8)) {
            let ids = (0..pts.len()).map(|i| i.to_string()).collect();
            let nodes = NodeSet::new(ids, pts).unwrap();
            let a = build_adjacency(&nodes, 0.1);
            for i in 0..a.n() {
                prop_assert_eq!(a.get(i, i), 0.0);
                for j in 0..a.n() {
                    prop_assert_eq!(a.get(i, j), a.get(j, i));
                    prop_assert!(a.get(i, j).is_finite() && a.get(i, j) >= 0.0);
                }
            }
        }
    }
}
