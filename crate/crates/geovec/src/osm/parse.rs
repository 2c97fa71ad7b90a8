//! Parsers for the public Nominatim reverse JSON and Overpass JSON formats.

use geovec_core::places::{GeocodeResult, PlaceCandidate, PlaceKind};
use geovec_core::Coordinate;
use serde_json::Value;

use super::OsmError;

/// Address keys that are codes rather than place names.
fn skip_address_key(key: &str) -> bool {
    key == "country_code" || key == "postcode" || key.starts_with("ISO3166")
}

/// Address components in the order the service lists them (local first).
/// `Ok(None)` when the service found no address.
pub fn parse_reverse(body: &str) -> Result<Option<GeocodeResult>, OsmError> {
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let v: Value = serde_json::from_str(trimmed).map_err(|e| OsmError::Parse(format!("reverse geocode: {e}")))?;
    if v.get("error").is_some() {
        return Ok(None);
    }
    let Some(address) = v.get("address").and_then(Value::as_object) else {
        return Ok(None);
    };
    let components: Vec<(String, String)> = address
        .iter()
        .filter(|(k, _)| !skip_address_key(k))
        .filter_map(|(k, v)| {
            let s = v.as_str()?.trim();
            (!s.is_empty()).then(|| (k.clone(), s.to_string()))
        })
        .collect();
    if components.is_empty() {
        return Ok(None);
    }
    Ok(Some(GeocodeResult::new(components).expect("non-empty")))
}

const POI_KEYS: [&str; 4] = ["amenity", "shop", "tourism", "leisure"];

fn lat_lon(v: &Value) -> Option<(f64, f64)> {
    Some((v.get("lat")?.as_f64()?, v.get("lon")?.as_f64()?))
}

/// Named nodes tagged amenity/shop/tourism/leisure become POIs; ways tagged
/// `highway` with a name become streets, located at their `center`. Other
/// elements are ignored.
pub fn parse_overpass(body: &str) -> Result<Vec<PlaceCandidate>, OsmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| OsmError::Parse(format!("overpass: {e}")))?;
    let elements = v
        .get("elements")
        .and_then(Value::as_array)
        .ok_or_else(|| OsmError::Parse("overpass: missing `elements` array".into()))?;
    let mut out = Vec::new();
    for el in elements {
        let tags = el.get("tags").and_then(Value::as_object);
        let Some(name) = tags.and_then(|t| t.get("name")).and_then(Value::as_str) else {
            continue;
        };
        let name = name.trim();
        if name.is_empty() {
            continue;
        }
        let tags = tags.expect("checked above");
        let (kind, pos) = match el.get("type").and_then(Value::as_str) {
            Some("node") if POI_KEYS.iter().any(|k| tags.contains_key(*k)) => (PlaceKind::Poi, lat_lon(el)),
            Some("way") if tags.contains_key("highway") => {
                (PlaceKind::Street, el.get("center").and_then(lat_lon).or_else(|| lat_lon(el)))
            }
            _ => continue,
        };
        let Some((lat, lon)) = pos else { continue };
        let Ok(coord) = Coordinate::from_lat_lon(lat, lon) else { continue };
        out.push(PlaceCandidate { name: name.to_string(), coord, kind });
    }
    Ok(out)
}

/// OverpassQL for named POI nodes and named highways around a point.
pub fn overpass_query(coord: Coordinate, radius_km: f64) -> String {
    let r = (radius_km * 1000.0).round() as u64;
    let around = format!("around:{r},{:.7},{:.7}", coord.lat(), coord.lon());
    let mut q = String::from("[out:json][timeout:60];(");
    for key in POI_KEYS {
        q.push_str(&format!("node({around})[\"name\"][\"{key}\"];"));
    }
    q.push_str(&format!("way({around})[\"name\"][\"highway\"];"));
    q.push_str(");out center;");
    q
}
