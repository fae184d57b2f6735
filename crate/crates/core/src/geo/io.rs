//! On-disk formats for the geography stage.
//!
//! All geographic inputs are in degrees: tower sites as `tower_id,lon,lat`
//! CSV, communes and the region boundary as GeoJSON. Labeled cells are
//! written as `tower_id,rate,population,density,urbanicity` CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Urbanicity, VoronoiCell};

/// A commune as stored on disk, before projection.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCommune {
    pub id: String,
    pub ring: Vec<GeoPoint>,
    pub households_total: u64,
    pub households_electrified: u64,
    pub population: f64,
}

/// A labeled cell row as stored on disk, without geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLabel {
    pub tower_id: String,
    pub rate: f64,
    pub population: f64,
    pub density: f64,
    pub urbanicity: Urbanicity,
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub(crate) fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath(path.display().to_string()))
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    require_exists(path)?;
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn field<'r>(
    path: &Path,
    record: &'r csv::StringRecord,
    index: usize,
    name: &str,
) -> Result<&'r str> {
    record
        .get(index)
        .ok_or_else(|| parse_err(path, record_line(record), format!("missing column {name}")))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    index: usize,
    name: &str,
) -> Result<T> {
    let raw = field(path, record, index, name)?;
    raw.parse().map_err(|_| {
        parse_err(
            path,
            record_line(record),
            format!("column {name}: cannot parse {raw:?}"),
        )
    })
}

/// Reads tower sites (`tower_id,lon,lat`).
pub fn read_sites_csv(path: &Path) -> Result<Vec<(String, GeoPoint)>> {
    let mut reader = csv_reader(path)?;
    let mut sites = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| parse_err(path, 0, e.to_string()))?;
        let id = field(path, &record, 0, "tower_id")?.to_string();
        let lon: f64 = parse_field(path, &record, 1, "lon")?;
        let lat: f64 = parse_field(path, &record, 2, "lat")?;
        sites.push((id, GeoPoint::new(lon, lat)));
    }
    Ok(sites)
}

pub fn write_sites_csv(path: &Path, sites: &[(String, GeoPoint)]) -> Result<()> {
    let mut out = String::from("tower_id,lon,lat\n");
    for (id, g) in sites {
        out.push_str(&format!("{id},{},{}\n", g.lon, g.lat));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads labeled cells (`tower_id,rate,population,density,urbanicity`).
pub fn read_cells_csv(path: &Path) -> Result<Vec<CellLabel>> {
    let mut reader = csv_reader(path)?;
    let mut cells = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| parse_err(path, 0, e.to_string()))?;
        cells.push(CellLabel {
            tower_id: field(path, &record, 0, "tower_id")?.to_string(),
            rate: parse_field(path, &record, 1, "rate")?,
            population: parse_field(path, &record, 2, "population")?,
            density: parse_field(path, &record, 3, "density")?,
            urbanicity: field(path, &record, 4, "urbanicity")?.parse().map_err(
                |m: String| parse_err(path, record_line(&record), m),
            )?,
        });
    }
    Ok(cells)
}

pub fn write_cells_csv(path: &Path, cells: &[VoronoiCell]) -> Result<()> {
    let mut out = String::from("tower_id,rate,population,density,urbanicity\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.tower_id, c.rate, c.population, c.density, c.urbanicity
        ));
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    properties: serde_json::Value,
    geometry: Geometry,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct CommuneProps {
    id: String,
    households_total: u64,
    households_electrified: u64,
    population: f64,
}

fn read_collection(path: &Path) -> Result<FeatureCollection> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let fc: FeatureCollection =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    if fc.kind != "FeatureCollection" {
        return Err(parse_err(path, 1, "expected a FeatureCollection"));
    }
    Ok(fc)
}

fn outer_ring(path: &Path, index: usize, geometry: &Geometry) -> Result<Vec<GeoPoint>> {
    if geometry.kind != "Polygon" {
        return Err(parse_err(
            path,
            0,
            format!("feature {index}: expected Polygon geometry, got {}", geometry.kind),
        ));
    }
    let ring = geometry
        .coordinates
        .first()
        .ok_or_else(|| parse_err(path, 0, format!("feature {index}: polygon has no rings")))?;
    Ok(ring.iter().map(|[lon, lat]| GeoPoint::new(*lon, *lat)).collect())
}

fn ring_coordinates(ring: &[GeoPoint]) -> Vec<Vec<[f64; 2]>> {
    // GeoJSON rings repeat the first position at the end.
    let mut coords: Vec<[f64; 2]> = ring.iter().map(|g| [g.lon, g.lat]).collect();
    if let Some(first) = coords.first().copied() {
        if coords.last() != Some(&first) {
            coords.push(first);
        }
    }
    vec![coords]
}

/// Reads communes from a GeoJSON FeatureCollection; each feature needs
/// properties `households_total`, `households_electrified`, `population`.
pub fn read_communes_geojson(path: &Path) -> Result<Vec<RawCommune>> {
    let fc = read_collection(path)?;
    let mut communes = Vec::with_capacity(fc.features.len());
    for (i, feature) in fc.features.iter().enumerate() {
        let props: CommuneProps = serde_json::from_value(feature.properties.clone())
            .map_err(|e| parse_err(path, 0, format!("feature {i}: {e}")))?;
        communes.push(RawCommune {
            id: props.id,
            ring: outer_ring(path, i, &feature.geometry)?,
            households_total: props.households_total,
            households_electrified: props.households_electrified,
            population: props.population,
        });
    }
    Ok(communes)
}

pub fn write_communes_geojson(path: &Path, communes: &[RawCommune]) -> Result<()> {
    let fc = FeatureCollection {
        kind: "FeatureCollection".into(),
        features: communes
            .iter()
            .map(|c| Feature {
                kind: "Feature".into(),
                properties: serde_json::to_value(CommuneProps {
                    id: c.id.clone(),
                    households_total: c.households_total,
                    households_electrified: c.households_electrified,
                    population: c.population,
                })
                .expect("commune properties serialize"),
                geometry: Geometry {
                    kind: "Polygon".into(),
                    coordinates: ring_coordinates(&c.ring),
                },
            })
            .collect(),
    };
    let text = serde_json::to_string(&fc).expect("feature collection serializes");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Reads the region boundary: a FeatureCollection whose first feature is a
/// polygon.
pub fn read_boundary_geojson(path: &Path) -> Result<Vec<GeoPoint>> {
    let fc = read_collection(path)?;
    let feature = fc
        .features
        .first()
        .ok_or_else(|| parse_err(path, 1, "boundary file has no features"))?;
    outer_ring(path, 0, &feature.geometry)
}

pub fn write_boundary_geojson(path: &Path, ring: &[GeoPoint]) -> Result<()> {
    let fc = FeatureCollection {
        kind: "FeatureCollection".into(),
        features: vec![Feature {
            kind: "Feature".into(),
            properties: serde_json::json!({ "role": "boundary" }),
            geometry: Geometry {
                kind: "Polygon".into(),
                coordinates: ring_coordinates(ring),
            },
        }],
    };
    let text = serde_json::to_string(&fc).expect("feature collection serializes");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
