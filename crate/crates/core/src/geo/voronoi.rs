//! Bounded Voronoi tessellation.
//!
//! Each cell is carved from the boundary ring by intersecting the half-planes
//! of the perpendicular bisectors towards the other sites. Working outwards
//! from the nearest neighbour lets the loop stop as soon as no remaining site
//! can still cut the cell.

use crate::error::{Error, Result};
use crate::geo::polygon::{Point, Polygon};

/// Minimum site separation; closer pairs are treated as duplicates.
const DUPLICATE_EPS_KM: f64 = 1e-9;

/// Computes one bounded Voronoi cell per site, in input order.
///
/// The boundary must be a simple ring, there must be at least three sites,
/// and every site must lie strictly inside the boundary.
pub fn voronoi_cells(sites: &[Point], boundary: &Polygon) -> Result<Vec<Polygon>> {
    boundary.ensure_simple()?;
    if sites.len() < 3 {
        return Err(Error::TooFewSites {
            needed: 3,
            got: sites.len(),
        });
    }
    for (i, s) in sites.iter().enumerate() {
        if !boundary.strictly_contains(*s, DUPLICATE_EPS_KM) {
            return Err(Error::SiteOutsideBoundary(format!(
                "site {i} at ({}, {})",
                s.x, s.y
            )));
        }
        for (j, o) in sites.iter().enumerate().skip(i + 1) {
            if s.distance(o) < DUPLICATE_EPS_KM {
                return Err(Error::DuplicateSites {
                    first: format!("site {i}"),
                    second: format!("site {j}"),
                });
            }
        }
    }

    let mut cells = Vec::with_capacity(sites.len());
    for (i, s) in sites.iter().enumerate() {
        let mut others: Vec<&Point> = sites
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p)
            .collect();
        others.sort_by(|a, b| s.distance_squared(a).total_cmp(&s.distance_squared(b)));

        let mut cell = boundary.clone();
        for o in others {
            // A bisector at distance d/2 from the site cannot cut a cell that
            // already fits inside the radius-d/2 disc around it.
            let reach = cell
                .vertices()
                .iter()
                .map(|v| s.distance(v))
                .fold(0.0, f64::max);
            if s.distance(o) > 2.0 * reach {
                break;
            }
            // Keep the side of the bisector nearer to s: (o - s)·p <= (|o|² - |s|²)/2.
            let nx = o.x - s.x;
            let ny = o.y - s.y;
            let c = (o.x * o.x + o.y * o.y - s.x * s.x - s.y * s.y) / 2.0;
            match cell.clip_halfplane(nx, ny, c) {
                Some(clipped) => cell = clipped,
                None => {
                    return Err(Error::SiteOutsideBoundary(format!(
                        "site {i} at ({}, {}) has an empty cell",
                        s.x, s.y
                    )))
                }
            }
        }
        cells.push(cell);
    }
    Ok(cells)
}
