//! Per-area outcome probabilities and choropleth documents.
//!
//! Geometry is read from GeoJSON. The area variable must be the first
//! variable of the model, so each root edge of the graph names an area.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ceg::{CegModel, SINK};
use crate::colour::Colour;
use crate::error::{Error, Result};

/// Fill of features with no matching area in the model.
pub const UNMATCHED_FILL: Colour = Colour::rgb(0xBE, 0xBE, 0xBE);
/// Fill of matched areas whose probability is undefined.
pub const UNDEFINED_FILL: Colour = Colour::rgb(0xF0, 0xF0, 0xF0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFeature {
    pub name: String,
    pub geometry: Value,
    pub properties: Map<String, Value>,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AreaMap {
    pub name_property: String,
    pub features: Vec<AreaFeature>,
}

/// Coordinate systems whose coordinates can be brought to WGS84 longitude
/// and latitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crs {
    Wgs84,
    WebMercator,
    BritishNationalGrid,
}

impl Crs {
    pub fn parse(id: &str) -> Result<Self> {
        let code = id.trim().to_ascii_uppercase();
        let code = code
            .strip_prefix("EPSG:")
            .or_else(|| code.strip_prefix("URN:OGC:DEF:CRS:EPSG::"))
            .unwrap_or(&code);
        match code {
            "4326" | "WGS84" | "CRS84" | "URN:OGC:DEF:CRS:OGC:1.3:CRS84" => Ok(Self::Wgs84),
            "3857" | "900913" => Ok(Self::WebMercator),
            "27700" => Ok(Self::BritishNationalGrid),
            _ => Err(Error::Config(format!(
                "unsupported CRS `{id}` (supported: EPSG:4326, EPSG:3857, EPSG:27700)"
            ))),
        }
    }

    /// Converts one coordinate pair to WGS84 (longitude, latitude).
    pub fn to_wgs84(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Self::Wgs84 => (x, y),
            Self::WebMercator => {
                const R: f64 = 6_378_137.0;
                let lon = (x / R).to_degrees();
                let lat = (2.0 * (y / R).exp().atan() - PI / 2.0).to_degrees();
                (lon, lat)
            }
            Self::BritishNationalGrid => {
                let (lat, lon) = osgb::grid_to_osgb36(x, y);
                let (lat, lon) = osgb::osgb36_to_wgs84(lat, lon);
                (lon.to_degrees(), lat.to_degrees())
            }
        }
    }
}

mod osgb {
    //! Ordnance Survey National Grid to WGS84.

    const A: f64 = 6_377_563.396;
    const B: f64 = 6_356_256.909;
    const F0: f64 = 0.999_601_271_7;
    const N0: f64 = -100_000.0;
    const E0: f64 = 400_000.0;

    /// Inverse transverse Mercator on the Airy 1830 ellipsoid. Radians.
    pub fn grid_to_osgb36(e: f64, n: f64) -> (f64, f64) {
        let lat0 = 49f64.to_radians();
        let lon0 = (-2f64).to_radians();
        let e2 = 1.0 - (B * B) / (A * A);
        let nn = (A - B) / (A + B);
        let (n2, n3) = (nn * nn, nn * nn * nn);
        let meridional = |lat: f64| {
            let (d, s) = (lat - lat0, lat + lat0);
            B * F0
                * ((1.0 + nn + 1.25 * n2 + 1.25 * n3) * d
                    - (3.0 * nn + 3.0 * n2 + 21.0 / 8.0 * n3) * d.sin() * s.cos()
                    + (15.0 / 8.0 * n2 + 15.0 / 8.0 * n3) * (2.0 * d).sin() * (2.0 * s).cos()
                    - 35.0 / 24.0 * n3 * (3.0 * d).sin() * (3.0 * s).cos())
        };
        let mut lat = lat0;
        let mut m = 0.0;
        for _ in 0..100 {
            lat += (n - N0 - m) / (A * F0);
            m = meridional(lat);
            if (n - N0 - m).abs() < 1e-5 {
                break;
            }
        }
        let (sin, cos) = lat.sin_cos();
        let nu = A * F0 / (1.0 - e2 * sin * sin).sqrt();
        let rho = A * F0 * (1.0 - e2) / (1.0 - e2 * sin * sin).powf(1.5);
        let eta2 = nu / rho - 1.0;
        let t = lat.tan();
        let (t2, t4, t6) = (t * t, t.powi(4), t.powi(6));
        let sec = 1.0 / cos;
        let vii = t / (2.0 * rho * nu);
        let viii = t / (24.0 * rho * nu.powi(3)) * (5.0 + 3.0 * t2 + eta2 - 9.0 * t2 * eta2);
        let ix = t / (720.0 * rho * nu.powi(5)) * (61.0 + 90.0 * t2 + 45.0 * t4);
        let x = sec / nu;
        let xi = sec / (6.0 * nu.powi(3)) * (nu / rho + 2.0 * t2);
        let xii = sec / (120.0 * nu.powi(5)) * (5.0 + 28.0 * t2 + 24.0 * t4);
        let xiia = sec / (5040.0 * nu.powi(7)) * (61.0 + 662.0 * t2 + 1320.0 * t4 + 720.0 * t6);
        let de = e - E0;
        let phi = lat - vii * de.powi(2) + viii * de.powi(4) - ix * de.powi(6);
        let lambda = lon0 + x * de - xi * de.powi(3) + xii * de.powi(5) - xiia * de.powi(7);
        (phi, lambda)
    }

    /// Seven-parameter Helmert shift from OSGB36 to WGS84. Radians.
    pub fn osgb36_to_wgs84(lat: f64, lon: f64) -> (f64, f64) {
        let (x, y, z) = to_cartesian(lat, lon, A, B);
        let (tx, ty, tz) = (446.448, -125.157, 542.060);
        let s = -20.4894e-6;
        let arcsec = |v: f64| (v / 3600.0f64).to_radians();
        let (rx, ry, rz) = (arcsec(0.1502), arcsec(0.2470), arcsec(0.8421));
        let x2 = tx + (1.0 + s) * x - rz * y + ry * z;
        let y2 = ty + rz * x + (1.0 + s) * y - rx * z;
        let z2 = tz - ry * x + rx * y + (1.0 + s) * z;
        from_cartesian(x2, y2, z2, 6_378_137.0, 6_356_752.314_245)
    }

    fn to_cartesian(lat: f64, lon: f64, a: f64, b: f64) -> (f64, f64, f64) {
        let e2 = 1.0 - (b * b) / (a * a);
        let nu = a / (1.0 - e2 * lat.sin().powi(2)).sqrt();
        (
            nu * lat.cos() * lon.cos(),
            nu * lat.cos() * lon.sin(),
            (1.0 - e2) * nu * lat.sin(),
        )
    }

    fn from_cartesian(x: f64, y: f64, z: f64, a: f64, b: f64) -> (f64, f64) {
        let e2 = 1.0 - (b * b) / (a * a);
        let p = (x * x + y * y).sqrt();
        let mut lat = z.atan2(p * (1.0 - e2));
        for _ in 0..20 {
            let nu = a / (1.0 - e2 * lat.sin().powi(2)).sqrt();
            let next = (z + e2 * nu * lat.sin()).atan2(p);
            if (next - lat).abs() < 1e-14 {
                lat = next;
                break;
            }
            lat = next;
        }
        (lat, y.atan2(x))
    }
}

fn reproject(value: &mut Value, crs: Crs) {
    if let Value::Array(items) = value {
        if items.len() >= 2 && items[0].is_number() && items[1].is_number() {
            let x = items[0].as_f64().unwrap_or(0.0);
            let y = items[1].as_f64().unwrap_or(0.0);
            let (lon, lat) = crs.to_wgs84(x, y);
            items[0] = json!(lon);
            items[1] = json!(lat);
        } else {
            for v in items {
                reproject(v, crs);
            }
        }
    }
}

fn property_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Reads a GeoJSON feature collection. Names come from `name_property`;
/// coordinates are converted to WGS84 when `crs` names the source system.
pub fn load_geo(source: &[u8], name_property: &str, crs: Option<&str>) -> Result<AreaMap> {
    let crs = crs.map(Crs::parse).transpose()?;
    let doc: Value = serde_json::from_slice(source)
        .map_err(|e| Error::Parse { row: e.line(), message: format!("invalid GeoJSON: {e}") })?;
    let features = match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::validation("FeatureCollection without a features array"))?
            .clone(),
        Some("Feature") => vec![doc.clone()],
        _ => return Err(Error::validation("expected a GeoJSON FeatureCollection")),
    };
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.into_iter().enumerate() {
        let properties = f
            .get("properties")
            .and_then(Value::as_object)
            .cloned()
            .unwrap_or_default();
        let name = properties
            .get(name_property)
            .and_then(property_text)
            .ok_or_else(|| {
                Error::validation(format!("feature {i} has no `{name_property}` property"))
            })?;
        let mut geometry = f.get("geometry").cloned().unwrap_or(Value::Null);
        match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon" | "MultiPolygon") => {}
            other => {
                return Err(Error::validation(format!(
                    "feature {i} ({name}) has geometry {}, expected Polygon or MultiPolygon",
                    other.unwrap_or("null")
                )))
            }
        }
        if let Some(crs) = crs {
            if let Some(coords) = geometry.get_mut("coordinates") {
                reproject(coords, crs);
            }
        }
        out.push(AreaFeature { name, geometry, properties, matched: false });
    }
    Ok(AreaMap { name_property: name_property.to_string(), features: out })
}

impl AreaMap {
    /// Marks the features whose names are among `areas`.
    pub fn match_areas(&mut self, areas: &BTreeSet<String>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &mut self.features {
            f.matched = areas.contains(&f.name);
            if f.matched && !seen.insert(f.name.clone()) {
                return Err(Error::validation(format!("area `{}` appears on two features", f.name)));
            }
        }
        Ok(())
    }

    pub fn matched_count(&self) -> usize {
        self.features.iter().filter(|f| f.matched).count()
    }

    pub fn unmatched(&self) -> Vec<&str> {
        self.features.iter().filter(|f| !f.matched).map(|f| f.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProbability {
    pub area: String,
    pub category: String,
    /// `None` when no path for the area satisfies the conditionals.
    pub probability: Option<f64>,
    /// Summed weight of the qualifying paths for the area.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProbabilityTable {
    pub area_variable: String,
    pub outcome_variable: String,
    pub colour_by: String,
    pub conditionals: Vec<String>,
    pub categories: Vec<String>,
    pub rows: Vec<AreaProbability>,
}

impl AreaProbabilityTable {
    pub fn areas(&self) -> BTreeSet<String> {
        self.rows.iter().map(|r| r.area.clone()).collect()
    }

    pub fn get(&self, area: &str, category: &str) -> Option<&AreaProbability> {
        self.rows.iter().find(|r| r.area == area && r.category == category)
    }

    /// Probability of `colour_by` in each area.
    pub fn selected(&self) -> BTreeMap<&str, Option<f64>> {
        self.rows
            .iter()
            .filter(|r| r.category == self.colour_by)
            .map(|r| (r.area.as_str(), r.probability))
            .collect()
    }

    /// Columns area, category, probability (`NA` when undefined) and mass.
    pub fn to_delimited(&self, separator: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(separator).from_writer(Vec::new());
        w.write_record(["area", "category", "probability", "mass"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.area.clone(),
                r.category.clone(),
                r.probability.map_or("NA".to_string(), |p| p.to_string()),
                r.mass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }
}

/// Probability of each outcome category per area.
///
/// Within an area, each root-to-sink path that carries every conditional
/// category and ends on an edge of the outcome variable is weighted by the
/// product of the posterior means of its edges after the area edge. The
/// probability of an outcome is the weight of the paths ending in it over
/// the weight of all such paths. Areas without such paths get `None`.
pub fn area_probabilities(
    ceg: &CegModel,
    colour_by: &str,
    conditionals: &[&str],
) -> Result<AreaProbabilityTable> {
    let area_variable = ceg
        .variables
        .first()
        .ok_or_else(|| Error::validation("the model has no variables"))?
        .clone();
    if let Some(declared) = &ceg.area_variable {
        if *declared != area_variable {
            return Err(Error::validation(format!(
                "the area variable `{declared}` must be the first variable of the tree, found `{area_variable}`"
            )));
        }
    }
    let outcome_variable = ceg
        .edges
        .iter()
        .find(|e| e.to == SINK && e.label == colour_by)
        .map(|e| e.variable.clone())
        .ok_or_else(|| Error::lookup("outcome category", colour_by))?;
    let categories: Vec<String> = {
        let set: BTreeSet<&str> = ceg
            .edges
            .iter()
            .filter(|e| e.variable == outcome_variable)
            .map(|e| e.label.as_str())
            .collect();
        set.into_iter().map(str::to_string).collect()
    };
    let mut cond_vars = BTreeMap::new();
    for c in conditionals {
        let var = ceg
            .edges
            .iter()
            .find(|e| e.label == *c)
            .map(|e| e.variable.clone())
            .ok_or_else(|| Error::lookup("category", *c))?;
        if var == area_variable || var == outcome_variable {
            return Err(Error::validation(format!(
                "conditional `{c}` belongs to `{var}`; only intermediate variables can be conditioned on"
            )));
        }
        if let Some(prev) = cond_vars.insert(var.clone(), *c) {
            return Err(Error::validation(format!(
                "`{prev}` and `{c}` are both categories of `{var}`; give at most one per variable"
            )));
        }
    }
    let wanted: Vec<(&str, &str)> = cond_vars.iter().map(|(v, c)| (v.as_str(), *c)).collect();
    let full: u64 = (1u64 << wanted.len()) - 1;
    let bit = |variable: &str, label: &str| -> u64 {
        wanted
            .iter()
            .position(|(v, c)| *v == variable && *c == label)
            .map_or(0, |i| 1u64 << i)
    };
    let mut adj: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, e) in ceg.edges.iter().enumerate() {
        adj.entry(e.from.as_str()).or_default().push(i);
    }
    let probs: Vec<f64> = ceg.edges.iter().map(|e| ceg.edge_probability(e)).collect();
    let cat_index: HashMap<&str, usize> =
        categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    struct Walk<'a> {
        ceg: &'a CegModel,
        adj: &'a HashMap<&'a str, Vec<usize>>,
        probs: &'a [f64],
        outcome: &'a str,
        cat_index: &'a HashMap<&'a str, usize>,
        full: u64,
        memo: HashMap<(String, u64), Vec<f64>>,
    }

    impl Walk<'_> {
        fn run(&mut self, at: &str, mask: u64, bit: &dyn Fn(&str, &str) -> u64) -> Vec<f64> {
            let key = (at.to_string(), mask);
            if let Some(v) = self.memo.get(&key) {
                return v.clone();
            }
            let mut acc = vec![0.0; self.cat_index.len()];
            let edges = self.adj.get(at).cloned().unwrap_or_default();
            for i in edges {
                let e = &self.ceg.edges[i];
                let m = mask | bit(&e.variable, &e.label);
                if e.to == SINK {
                    if m == self.full && e.variable == self.outcome {
                        acc[self.cat_index[e.label.as_str()]] += self.probs[i];
                    }
                } else {
                    let below = self.run(&e.to, m, bit);
                    for (a, b) in acc.iter_mut().zip(below) {
                        *a += self.probs[i] * b;
                    }
                }
            }
            self.memo.insert(key, acc.clone());
            acc
        }
    }

    let mut walk = Walk {
        ceg,
        adj: &adj,
        probs: &probs,
        outcome: &outcome_variable,
        cat_index: &cat_index,
        full,
        memo: HashMap::new(),
    };
    let root = ceg.root().ok_or_else(|| Error::validation("the model has no positions"))?;
    let mut per_area: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &i in adj.get(root.id.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
        let e = &ceg.edges[i];
        let weights = if e.to == SINK {
            vec![0.0; categories.len()]
        } else {
            walk.run(&e.to, 0, &bit)
        };
        per_area.insert(e.label.clone(), weights);
    }
    let mut rows = Vec::new();
    for (area, weights) in per_area {
        let mass: f64 = weights.iter().sum();
        for (c, w) in categories.iter().zip(&weights) {
            rows.push(AreaProbability {
                area: area.clone(),
                category: c.clone(),
                probability: (mass > 0.0).then(|| w / mass),
                mass,
            });
        }
    }
    Ok(AreaProbabilityTable {
        area_variable,
        outcome_variable,
        colour_by: colour_by.to_string(),
        conditionals: conditionals.iter().map(|c| c.to_string()).collect(),
        categories,
        rows,
    })
}

/// Names of the supported colour ramps.
pub const PALETTES: [&str; 8] = ["viridis", "magma", "inferno", "plasma", "cividis", "turbo", "mako", "rocket"];

fn ramp_stops(name: &str) -> Option<[u32; 5]> {
    Some(match name {
        "viridis" => [0x440154, 0x3B528B, 0x21918C, 0x5EC962, 0xFDE725],
        "magma" => [0x000004, 0x51127C, 0xB73779, 0xFC8961, 0xFCFDBF],
        "inferno" => [0x000004, 0x57106E, 0xBC3754, 0xF98E09, 0xFCFFA4],
        "plasma" => [0x0D0887, 0x7E03A8, 0xCC4778, 0xF89540, 0xF0F921],
        "cividis" => [0x00224E, 0x414D6B, 0x7C7B78, 0xBCAF6F, 0xFEE838],
        "turbo" => [0x30123B, 0x28BBEC, 0xA2FC3C, 0xFB8022, 0x7A0403],
        "mako" => [0x0B0405, 0x3E356B, 0x357BA2, 0x49C1AD, 0xDEF5E5],
        "rocket" => [0x03051A, 0x701F57, 0xE13342, 0xF6A47C, 0xFAEBDD],
        _ => return None,
    })
}

/// Colour of `value` on a linear ramp over `[min, max]`. When the range is
/// empty every value maps to the top of the ramp.
pub fn ramp_colour(palette: &str, value: f64, min: f64, max: f64) -> Result<Colour> {
    let stops = ramp_stops(palette).ok_or_else(|| {
        Error::Config(format!("unknown palette `{palette}` (expected one of {})", PALETTES.join(", ")))
    })?;
    let t = if max > min { ((value - min) / (max - min)).clamp(0.0, 1.0) } else { 1.0 };
    let pos = t * (stops.len() - 1) as f64;
    let i = (pos.floor() as usize).min(stops.len() - 2);
    let f = pos - i as f64;
    let chan = |c: u32, shift: u32| ((c >> shift) & 0xFF) as f64;
    let mix = |shift: u32| {
        let (a, b) = (chan(stops[i], shift), chan(stops[i + 1], shift));
        (a + (b - a) * f).round() as u8
    };
    Ok(Colour::rgb(mix(16), mix(8), mix(0)))
}

/// GeoJSON with each feature's `probability`, `label`, `fill` and `status`
/// (`defined`, `undefined` or `unmatched`). Undefined areas also carry
/// `hatch: true`.
pub fn render_map_document(
    map: &AreaMap,
    table: &AreaProbabilityTable,
    palette: &str,
    colour_by: &str,
) -> Result<Value> {
    ramp_colour(palette, 0.0, 0.0, 1.0)?;
    let values: BTreeMap<&str, Option<f64>> = table
        .rows
        .iter()
        .filter(|r| r.category == colour_by)
        .map(|r| (r.area.as_str(), r.probability))
        .collect();
    if values.is_empty() && !table.rows.is_empty() {
        return Err(Error::lookup("outcome category", colour_by));
    }
    let defined: Vec<f64> = values.values().filter_map(|v| *v).collect();
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut features = Vec::with_capacity(map.features.len());
    for f in &map.features {
        let mut props = f.properties.clone();
        let value = values.get(f.name.as_str());
        match value {
            Some(Some(p)) => {
                props.insert("status".into(), json!("defined"));
                props.insert("probability".into(), json!(p));
                props.insert("label".into(), json!(format!("{}: {p:.3}", f.name)));
                props.insert("fill".into(), json!(ramp_colour(palette, *p, min, max)?.to_string()));
            }
            Some(None) => {
                props.insert("status".into(), json!("undefined"));
                props.insert("probability".into(), Value::Null);
                props.insert("label".into(), json!(format!("{}: no data", f.name)));
                props.insert("fill".into(), json!(UNDEFINED_FILL.to_string()));
                props.insert("hatch".into(), json!(true));
            }
            None => {
                props.insert("status".into(), json!("unmatched"));
                props.insert("probability".into(), Value::Null);
                props.insert("label".into(), json!(f.name));
                props.insert("fill".into(), json!(UNMATCHED_FILL.to_string()));
            }
        }
        features.push(json!({
            "type": "Feature",
            "properties": Value::Object(props),
            "geometry": f.geometry,
        }));
    }
    let mut title = format!("P({colour_by}");
    if !table.conditionals.is_empty() {
        let _ = write!(title, " | {}", table.conditionals.join(", "));
    }
    title.push(')');
    Ok(json!({
        "type": "FeatureCollection",
        "properties": {
            "title": title,
            "palette": palette,
            "colour_by": colour_by,
            "conditionals": table.conditionals,
            "min": if defined.is_empty() { Value::Null } else { json!(min) },
            "max": if defined.is_empty() { Value::Null } else { json!(max) },
        },
        "features": features,
    }))
}
