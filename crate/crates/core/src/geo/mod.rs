//! Geography: tessellation, projection, and area-weighted cell labeling.
//!
//! Tower coverage areas are approximated by Voronoi cells clipped to a region
//! boundary. Each cell inherits an electrification rate and a population from
//! the census communes it overlaps, weighted by intersection area, and is
//! classified urban or rural by population density.

pub mod io;
pub mod polygon;
pub mod voronoi;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use polygon::{intersection_area as polygon_intersection_area, Point, Polygon};

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Population density above which a cell counts as urban, per km².
pub const DEFAULT_URBAN_THRESHOLD: f64 = 1000.0;

/// Intersections smaller than this are numerical slivers and are dropped from
/// weighted sums.
pub const SLIVER_AREA_KM2: f64 = 1e-9;

/// A longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Self {
        GeoPoint { lon, lat }
    }
}

/// Equirectangular projection centred on a reference point.
///
/// At regional scale (a few hundred km) the distortion is far below the
/// tolerances used anywhere downstream, and the projection is exactly
/// invertible.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    lon0: f64,
    lat0: f64,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(center: GeoPoint) -> Self {
        Projection {
            lon0: center.lon,
            lat0: center.lat,
            cos_lat0: center.lat.to_radians().cos(),
        }
    }

    /// Projection centred on the centroid of a lon/lat ring.
    pub fn for_ring(ring: &[GeoPoint]) -> Result<Self> {
        let poly = Polygon::new(ring.iter().map(|g| Point::new(g.lon, g.lat)).collect())?;
        let c = poly.centroid();
        Ok(Projection::new(GeoPoint::new(c.x, c.y)))
    }

    /// Degrees to planar km.
    pub fn project(&self, g: GeoPoint) -> Point {
        Point::new(
            EARTH_RADIUS_KM * (g.lon - self.lon0).to_radians() * self.cos_lat0,
            EARTH_RADIUS_KM * (g.lat - self.lat0).to_radians(),
        )
    }

    /// Planar km back to degrees.
    pub fn unproject(&self, p: Point) -> GeoPoint {
        GeoPoint::new(
            self.lon0 + (p.x / (EARTH_RADIUS_KM * self.cos_lat0)).to_degrees(),
            self.lat0 + (p.y / EARTH_RADIUS_KM).to_degrees(),
        )
    }

    pub fn project_ring(&self, ring: &[GeoPoint]) -> Result<Polygon> {
        Polygon::new(ring.iter().map(|g| self.project(*g)).collect())
    }
}

/// A census commune: polygon plus household and population counts.
#[derive(Debug, Clone)]
pub struct Commune {
    pub id: String,
    pub polygon: Polygon,
    pub households_total: u64,
    pub households_electrified: u64,
    pub population: f64,
}

impl Commune {
    pub fn new(
        id: String,
        polygon: Polygon,
        households_total: u64,
        households_electrified: u64,
        population: f64,
    ) -> Result<Self> {
        polygon.ensure_simple()?;
        if households_total == 0 {
            return Err(Error::NoHouseholds(id));
        }
        if households_electrified > households_total {
            return Err(Error::BadHouseholdCounts {
                id,
                electrified: households_electrified,
                total: households_total,
            });
        }
        if !population.is_finite() || population < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "commune {id}: population must be finite and non-negative"
            )));
        }
        Ok(Commune {
            id,
            polygon,
            households_total,
            households_electrified,
            population,
        })
    }

    /// Fraction of households with stable electricity access.
    pub fn rate(&self) -> f64 {
        self.households_electrified as f64 / self.households_total as f64
    }
}

/// Urban/rural classification of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Urbanicity {
    Urban,
    Rural,
}

impl std::fmt::Display for Urbanicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Urbanicity::Urban => write!(f, "urban"),
            Urbanicity::Rural => write!(f, "rural"),
        }
    }
}

impl std::str::FromStr for Urbanicity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "urban" => Ok(Urbanicity::Urban),
            "rural" => Ok(Urbanicity::Rural),
            other => Err(format!("unknown urbanicity {other:?}")),
        }
    }
}

/// Density strictly above the threshold is urban; a tie stays rural.
pub fn classify_urbanicity(density: f64, threshold: f64) -> Urbanicity {
    if density > threshold {
        Urbanicity::Urban
    } else {
        Urbanicity::Rural
    }
}

/// A labeled tower coverage cell.
#[derive(Debug, Clone)]
pub struct VoronoiCell {
    pub tower_id: String,
    pub polygon: Polygon,
    pub area: f64,
    pub rate: f64,
    pub population: f64,
    pub density: f64,
    pub urbanicity: Urbanicity,
}

/// A tower site in projected km coordinates.
#[derive(Debug, Clone)]
pub struct TowerSite {
    pub tower_id: String,
    pub location: Point,
}

/// Tessellates the boundary into one clipped cell per tower.
pub fn compute_voronoi(sites: &[TowerSite], boundary: &Polygon) -> Result<Vec<(String, Polygon)>> {
    let points: Vec<Point> = sites.iter().map(|s| s.location).collect();
    let cells = voronoi::voronoi_cells(&points, boundary).map_err(|e| match e {
        // Re-key index-based site errors to tower ids.
        Error::DuplicateSites { first, second } => Error::DuplicateSites {
            first: site_id(sites, &first),
            second: site_id(sites, &second),
        },
        Error::SiteOutsideBoundary(which) => Error::SiteOutsideBoundary(site_id(sites, &which)),
        other => other,
    })?;
    Ok(sites
        .iter()
        .map(|s| s.tower_id.clone())
        .zip(cells)
        .collect())
}

fn site_id(sites: &[TowerSite], index_text: &str) -> String {
    index_text
        .split_whitespace()
        .nth(1)
        .and_then(|tok| tok.parse::<usize>().ok())
        .and_then(|i| sites.get(i))
        .map(|s| s.tower_id.clone())
        .unwrap_or_else(|| index_text.to_string())
}

/// Intersection areas and rates of every commune the polygon overlaps, with
/// slivers dropped.
fn overlaps<'a>(cell: &Polygon, communes: &'a [Commune]) -> Vec<(&'a Commune, f64)> {
    communes
        .iter()
        .filter_map(|commune| {
            let a = polygon::intersection_area_unchecked(cell, &commune.polygon);
            (a >= SLIVER_AREA_KM2).then_some((commune, a))
        })
        .collect()
}

/// Mean electrification rate of the overlapped communes, weighted by
/// intersection area.
pub fn area_weighted_rate(tower_id: &str, cell: &Polygon, communes: &[Commune]) -> Result<f64> {
    let parts = overlaps(cell, communes);
    let total: f64 = parts.iter().map(|(_, a)| a).sum();
    if total <= 0.0 {
        return Err(Error::UnlabeledCell(tower_id.to_string()));
    }
    Ok(parts.iter().map(|(c, a)| c.rate() * a).sum::<f64>() / total)
}

/// Population under the cell, assuming each commune's population is spread
/// homogeneously over its polygon.
pub fn area_weighted_population(
    tower_id: &str,
    cell: &Polygon,
    communes: &[Commune],
) -> Result<f64> {
    let parts = overlaps(cell, communes);
    if parts.is_empty() {
        return Err(Error::UnlabeledCell(tower_id.to_string()));
    }
    Ok(parts
        .iter()
        .map(|(c, a)| {
            let commune_area = c.polygon.area();
            if commune_area > 0.0 {
                c.population * (a / commune_area)
            } else {
                0.0
            }
        })
        .sum())
}

/// Labels one cell: weighted rate, population share, density, urbanicity.
pub fn label_cell(
    tower_id: &str,
    cell: Polygon,
    communes: &[Commune],
    urban_threshold: f64,
) -> Result<VoronoiCell> {
    let parts = overlaps(&cell, communes);
    let total: f64 = parts.iter().map(|(_, a)| a).sum();
    if total <= 0.0 {
        return Err(Error::UnlabeledCell(tower_id.to_string()));
    }
    let rate = parts.iter().map(|(c, a)| c.rate() * a).sum::<f64>() / total;
    let population: f64 = parts
        .iter()
        .map(|(c, a)| {
            let commune_area = c.polygon.area();
            if commune_area > 0.0 {
                c.population * (a / commune_area)
            } else {
                0.0
            }
        })
        .sum();
    let area = cell.area();
    let density = if area > 0.0 { population / area } else { 0.0 };
    Ok(VoronoiCell {
        tower_id: tower_id.to_string(),
        polygon: cell,
        area,
        rate,
        population,
        density,
        urbanicity: classify_urbanicity(density, urban_threshold),
    })
}

/// Tessellates and labels all cells in one pass.
pub fn label_cells(
    sites: &[TowerSite],
    boundary: &Polygon,
    communes: &[Commune],
    urban_threshold: f64,
) -> Result<Vec<VoronoiCell>> {
    for commune in communes {
        commune.polygon.ensure_simple()?;
    }
    compute_voronoi(sites, boundary)?
        .into_iter()
        .map(|(id, cell)| label_cell(&id, cell, communes, urban_threshold))
        .collect()
}
