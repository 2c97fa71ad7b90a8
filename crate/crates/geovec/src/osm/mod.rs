//! Reverse geocoding and nearby-place search against Nominatim- and
//! Overpass-style services, behind a disk cache and a per-host rate limiter,
//! with an offline fixture mode.

mod cache;
mod parse;
mod ratelimit;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use geovec_core::embed::{BoxError, PromptSource};
use geovec_core::places::{rank_nearby, GeocodeResult, PlaceOfInterest};
use geovec_core::prompt::{build_prompt, Prompt, PromptVariant};
use geovec_core::Coordinate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, DiskCache};
pub use parse::{overpass_query, parse_overpass, parse_reverse};
pub use ratelimit::{Clock, RateLimiter, SystemClock};

pub const DEFAULT_GEOCODE_URL: &str = "https://nominatim.openstreetmap.org/reverse";
pub const DEFAULT_OVERPASS_URL: &str = "https://overpass-api.de/api/interpreter";
pub const GEOCODE_URL_ENV: &str = "GEOVEC_GEOCODE_URL";
pub const OVERPASS_URL_ENV: &str = "GEOVEC_OVERPASS_URL";
pub const DEFAULT_RADIUS_KM: f64 = 100.0;
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error)]
pub enum OsmError {
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
    #[error("no address found at {0}")]
    NoAddressFound(Coordinate),
    #[error("no fixture or cache entry for `{0}`")]
    FixtureMiss(String),
    #[error("cache entry {} unreadable: {reason}", path.display())]
    CacheCorrupt { path: PathBuf, reason: String },
    #[error("malformed response: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
}

/// Base URLs of the two services.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub geocode: String,
    pub overpass: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints { geocode: DEFAULT_GEOCODE_URL.into(), overpass: DEFAULT_OVERPASS_URL.into() }
    }
}

impl Endpoints {
    /// Defaults overridden by `GEOVEC_GEOCODE_URL` / `GEOVEC_OVERPASS_URL`.
    pub fn from_env() -> Self {
        let mut e = Endpoints::default();
        if let Ok(v) = std::env::var(GEOCODE_URL_ENV) {
            e.geocode = v;
        }
        if let Ok(v) = std::env::var(OVERPASS_URL_ENV) {
            e.overpass = v;
        }
        e
    }
}

/// Minimal HTTP surface used by the live source.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str, query: &[(&str, String)]) -> Result<String, OsmError>;
    fn post_form(&self, url: &str, form: &[(&str, String)]) -> Result<String, OsmError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
    user_agent: String,
}

impl fmt::Debug for UreqTransport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UreqTransport").field("user_agent", &self.user_agent).finish()
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(90)))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent, user_agent: format!("geovec/{}", env!("CARGO_PKG_VERSION")) }
    }
}

fn read_response(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>, url: &str) -> Result<String, OsmError> {
    let mut resp = r.map_err(|e| OsmError::UpstreamUnavailable(format!("{url}: {e}")))?;
    let status = resp.status().as_u16();
    if status >= 400 {
        return Err(OsmError::UpstreamUnavailable(format!("{url}: HTTP {status}")));
    }
    resp.body_mut()
        .read_to_string()
        .map_err(|e| OsmError::UpstreamUnavailable(format!("{url}: {e}")))
}

impl Transport for UreqTransport {
    fn get(&self, url: &str, query: &[(&str, String)]) -> Result<String, OsmError> {
        let mut req = self.agent.get(url).header("User-Agent", &self.user_agent);
        for (k, v) in query {
            req = req.query(*k, v);
        }
        read_response(req.call(), url)
    }

    fn post_form(&self, url: &str, form: &[(&str, String)]) -> Result<String, OsmError> {
        let req = self.agent.post(url).header("User-Agent", &self.user_agent);
        read_response(req.send_form(form.iter().map(|(k, v)| (*k, v.as_str()))), url)
    }
}

fn host_of(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.split(['/', '?']).next().unwrap_or(rest)
}

/// Recorded responses keyed by canonical query string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub query_key: String,
    pub body: String,
}

#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    bodies: HashMap<String, String>,
}

impl FixtureSet {
    pub fn from_records(records: Vec<FixtureRecord>) -> Self {
        FixtureSet { bodies: records.into_iter().map(|r| (r.query_key, r.body)).collect() }
    }

    /// Reads a JSON array of `{query_key, body}` records.
    pub fn load(path: &Path) -> Result<Self, OsmError> {
        let text = std::fs::read_to_string(path).map_err(|e| OsmError::Io(format!("{}: {e}", path.display())))?;
        let records: Vec<FixtureRecord> =
            serde_json::from_str(&text).map_err(|e| OsmError::Parse(format!("{}: {e}", path.display())))?;
        Ok(Self::from_records(records))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.bodies.get(key).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }
}

/// Canonical query string of a reverse-geocode request.
pub fn reverse_query_key(coord: Coordinate) -> String {
    format!("reverse?format=json&lat={:.7}&lon={:.7}", coord.lat(), coord.lon())
}

/// Canonical query string of a nearby-place request.
pub fn places_query_key(coord: Coordinate, radius_km: f64) -> String {
    format!("overpass?lat={:.7}&lon={:.7}&radius_km={radius_km}", coord.lat(), coord.lon())
}

enum Mode {
    Live { transport: Arc<dyn Transport>, limiter: Arc<RateLimiter>, endpoints: Endpoints },
    Fixture(FixtureSet),
}

/// Map-data client. Live mode is cache-first; fixture mode answers from
/// recorded responses, then from the cache, and never touches the network.
pub struct OsmClient {
    mode: Mode,
    cache: Option<DiskCache>,
}

impl fmt::Debug for OsmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match &self.mode {
            Mode::Live { endpoints, .. } => format!("live {endpoints:?}"),
            Mode::Fixture(set) => format!("fixture ({} records)", set.len()),
        };
        f.debug_struct("OsmClient").field("mode", &mode).field("cache", &self.cache).finish()
    }
}

impl OsmClient {
    pub fn live(
        transport: Arc<dyn Transport>,
        limiter: Arc<RateLimiter>,
        endpoints: Endpoints,
        cache: Option<DiskCache>,
    ) -> Self {
        OsmClient { mode: Mode::Live { transport, limiter, endpoints }, cache }
    }

    pub fn fixtures(set: FixtureSet, cache: Option<DiskCache>) -> Self {
        OsmClient { mode: Mode::Fixture(set), cache }
    }

    fn body(&self, key: &str, fetch: impl FnOnce(&dyn Transport, &Endpoints) -> Result<String, OsmError>) -> Result<String, OsmError> {
        match &self.mode {
            Mode::Fixture(set) => {
                if let Some(b) = set.get(key) {
                    return Ok(b.to_string());
                }
                match &self.cache {
                    Some(c) => c.get(cache_key(key))?.ok_or_else(|| OsmError::FixtureMiss(key.to_string())),
                    None => Err(OsmError::FixtureMiss(key.to_string())),
                }
            }
            Mode::Live { transport, limiter, endpoints } => {
                let run = || fetch(transport.as_ref(), endpoints);
                let limited = || {
                    let url = if key.starts_with("reverse") { &endpoints.geocode } else { &endpoints.overpass };
                    limiter.run(host_of(url), run)
                };
                match &self.cache {
                    Some(c) => c.lookup_or_fetch(cache_key(key), limited),
                    None => limited(),
                }
            }
        }
    }

    /// Address components of `coord`, local to national.
    pub fn reverse_geocode(&self, coord: Coordinate) -> Result<GeocodeResult, OsmError> {
        let key = reverse_query_key(coord);
        let body = self.body(&key, |t, e| {
            t.get(
                &e.geocode,
                &[
                    ("lat", format!("{:.7}", coord.lat())),
                    ("lon", format!("{:.7}", coord.lon())),
                    ("format", "json".into()),
                ],
            )
        })?;
        parse_reverse(&body)?.ok_or(OsmError::NoAddressFound(coord))
    }

    /// Up to `k` named POIs within `radius_km`, nearest first, or named
    /// streets when no POI is in range.
    pub fn nearby_places(&self, coord: Coordinate, radius_km: f64, k: usize) -> Result<Vec<PlaceOfInterest>, OsmError> {
        if !(radius_km.is_finite() && radius_km > 0.0) {
            return Err(OsmError::InvalidArgument(format!("radius_km must be positive, got {radius_km}")));
        }
        if k == 0 {
            return Err(OsmError::InvalidArgument("k must be at least 1".into()));
        }
        let key = places_query_key(coord, radius_km);
        let body = self.body(&key, |t, e| t.post_form(&e.overpass, &[("data", overpass_query(coord, radius_km))]))?;
        Ok(rank_nearby(coord, &parse_overpass(&body)?, radius_km, k))
    }
}

/// Prompts built from map data fetched through an [`OsmClient`].
#[derive(Debug)]
pub struct MapPrompts<'a> {
    pub client: &'a OsmClient,
    pub radius_km: f64,
}

impl MapPrompts<'_> {
    pub fn build(&self, coord: Coordinate, variant: PromptVariant) -> Result<Prompt, BoxError> {
        let geocode = if variant.needs_address() { Some(self.client.reverse_geocode(coord)?) } else { None };
        let places = match variant.places_k() {
            Some(k) => Some(self.client.nearby_places(coord, self.radius_km, k)?),
            None => None,
        };
        Ok(build_prompt(variant, coord, geocode.as_ref(), places.as_deref())?)
    }
}

impl PromptSource for MapPrompts<'_> {
    fn prompt(&self, _node_id: &str, coord: Coordinate, variant: PromptVariant) -> Result<Prompt, BoxError> {
        self.build(coord, variant)
    }
}
