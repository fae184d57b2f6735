//! Seeded synthetic world and interaction-record generator.
//!
//! Stands in for proprietary operator data: a rectangular country with a
//! west-to-east population-density gradient, communes cut as a Voronoi
//! partition of random seed points, towers placed with density-thinned
//! rejection sampling, and gravity-style tower-to-tower flows. The planted
//! ground truth is that text-message volume tracks electrification: each
//! tower's SMS budget scales with its electrification rate raised to
//! `sms_coupling`, which is exactly the signal the downstream explainers
//! are expected to rediscover. Everything derives from one seed through
//! the named substreams `world` and `interactions`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::geo::io::RawCommune;
use crate::geo::voronoi::voronoi_cells;
use crate::geo::{GeoPoint, Point, Projection};
use crate::network::{EventType, InteractionRecord};
use crate::seeding;
use crate::{Error, Result};

/// Population density at the western boundary edge, people per km².
pub const DEFAULT_WEST_DENSITY: f64 = 3000.0;

/// Population density at the eastern boundary edge, people per km².
pub const DEFAULT_EAST_DENSITY: f64 = 15.0;

/// Log-normal spread of commune densities around the gradient, in decades.
pub const DEFAULT_DENSITY_NOISE_DECADES: f64 = 0.5;

/// Default exponent tying a tower's SMS budget to its electrification rate.
pub const DEFAULT_SMS_COUPLING: f64 = 3.0;

/// Default exponent on populations in the gravity kernel.
pub const DEFAULT_CALL_COUPLING: f64 = 1.0;

/// Minimum spacing between towers, km.
pub const MIN_TOWER_SEPARATION_KM: f64 = 1.0;

/// Mean household size used to turn population into household counts.
pub const PERSONS_PER_HOUSEHOLD: f64 = 9.0;

/// Tower placement intensity is density^this; sub-linear, since coverage
/// networks chase area as well as people, and it keeps the sparse east
/// represented in the sample.
const TOWER_INTENSITY_EXPONENT: f64 = 0.5;

/// Rejection-sampling attempts allowed per requested point.
const PLACEMENT_ATTEMPTS_PER_POINT: usize = 1000;

/// Logistic slope of electrification per decade of density. Kept shallow so
/// the transition band covers most of the gradient and all ten classes are
/// populated.
const RATE_SLOPE: f64 = 1.6;

/// log10 density at which expected electrification is one half.
const RATE_PIVOT_LOG10: f64 = 2.3;

/// Standard deviation of the logit-scale electrification noise. Large on
/// purpose: density alone should not pin down the rate, so that the planted
/// SMS signal stays the strongest predictor.
const RATE_NOISE_SD: f64 = 1.1;

/// Distance softening of the gravity kernel, km; keeps self-pairs finite
/// and dominant.
const GRAVITY_SOFTENING_KM: f64 = 5.0;

/// Sigma of the mean-one multiplicative log-normal noise on flows.
const FLOW_NOISE_SD: f64 = 0.3;

/// Calls per unit of gravity kernel.
const CALL_FLOW_SCALE: f64 = 1e-6;

/// Expected yearly SMS output of a fully electrified tower.
const SMS_BUDGET_PER_TOWER: f64 = 50_000.0;

/// Mean extra minutes per call beyond the first.
const MINUTES_PER_CALL_EXTRA: f64 = 1.5;

/// Parameters of the west-to-east density gradient. Density interpolates
/// log-linearly between the west and east edge values, with per-commune
/// log-normal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityField {
    pub west_density: f64,
    pub east_density: f64,
    pub noise_decades: f64,
}

impl Default for DensityField {
    fn default() -> Self {
        DensityField {
            west_density: DEFAULT_WEST_DENSITY,
            east_density: DEFAULT_EAST_DENSITY,
            noise_decades: DEFAULT_DENSITY_NOISE_DECADES,
        }
    }
}

/// Generator settings. The same config and seed always produce
/// bit-identical output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_towers: usize,
    pub n_communes: usize,
    /// Boundary ring in lon/lat degrees, counterclockwise, unclosed.
    pub boundary: Vec<GeoPoint>,
    pub density_field: DensityField,
    pub sms_coupling: f64,
    pub call_coupling: f64,
    pub seed: u64,
}

/// A rectangle with roughly Senegal's extent and latitude.
pub fn default_boundary() -> Vec<GeoPoint> {
    vec![
        GeoPoint::new(-17.5, 12.3),
        GeoPoint::new(-11.3, 12.3),
        GeoPoint::new(-11.3, 16.7),
        GeoPoint::new(-17.5, 16.7),
    ]
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_towers: 500,
            n_communes: 60,
            boundary: default_boundary(),
            density_field: DensityField::default(),
            sms_coupling: DEFAULT_SMS_COUPLING,
            call_coupling: DEFAULT_CALL_COUPLING,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_towers < 10 {
            return Err(Error::InvalidConfig(format!(
                "n_towers must be at least 10, got {}",
                self.n_towers
            )));
        }
        if self.n_communes < 3 {
            return Err(Error::InvalidConfig(format!(
                "n_communes must be at least 3, got {}",
                self.n_communes
            )));
        }
        if self.boundary.len() < 3 {
            return Err(Error::InvalidConfig(
                "boundary ring needs at least 3 vertices".to_string(),
            ));
        }
        if self.sms_coupling < 0.0 || self.call_coupling < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "couplings must be non-negative, got sms {} and call {}",
                self.sms_coupling, self.call_coupling
            )));
        }
        let d = &self.density_field;
        if d.west_density <= 0.0 || d.east_density <= 0.0 || d.noise_decades < 0.0 {
            return Err(Error::InvalidConfig(
                "density field needs positive edge densities and non-negative noise".to_string(),
            ));
        }
        Ok(())
    }
}

/// A placed tower with the share of its commune's economy it serves,
/// in planar km coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerEconomy {
    pub id: String,
    pub location: Point,
    pub population: f64,
    pub rate: f64,
}

/// Everything [`generate_world`] produces: the artifact-ready sites and
/// communes, plus the per-tower planar economy the interaction generator
/// consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub sites: Vec<(String, GeoPoint)>,
    pub communes: Vec<RawCommune>,
    pub boundary: Vec<GeoPoint>,
    pub towers: Vec<TowerEconomy>,
}

fn ilogit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Rejection-samples points inside the boundary with acceptance
/// `accept(point)`, keeping `separation` km between kept points.
fn place_points(
    rng: &mut ChaCha8Rng,
    boundary: &crate::geo::Polygon,
    n: usize,
    separation: f64,
    mut accept: impl FnMut(&mut ChaCha8Rng, Point) -> bool,
) -> Vec<Point> {
    let (lo, hi) = boundary.bounding_box();
    let mut kept: Vec<Point> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while kept.len() < n && attempts < n * PLACEMENT_ATTEMPTS_PER_POINT {
        attempts += 1;
        let p = Point::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if !boundary.strictly_contains(p, 1e-6) {
            continue;
        }
        if kept.iter().any(|q| q.distance(&p) < separation) {
            continue;
        }
        if !accept(rng, p) {
            continue;
        }
        kept.push(p);
    }
    kept
}

/// Generates the synthetic world: commune polygons with planted
/// electrification rates, and towers thinned by local density.
pub fn generate_world(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let projection = Projection::for_ring(&config.boundary)?;
    let boundary = projection.project_ring(&config.boundary)?;
    boundary.ensure_simple()?;
    let mut rng = seeding::substream(config.seed, "world");

    let seeds = place_points(&mut rng, &boundary, config.n_communes, 2.0, |_, _| true);
    if seeds.len() < config.n_communes {
        return Err(Error::InvalidConfig(format!(
            "boundary too small for {} commune seeds",
            config.n_communes
        )));
    }
    let cells = voronoi_cells(&seeds, &boundary)?;

    let (lo, hi) = boundary.bounding_box();
    let span = hi.x - lo.x;
    let west_log10 = config.density_field.west_density.log10();
    let east_log10 = config.density_field.east_density.log10();
    let density_noise = Normal::new(0.0, config.density_field.noise_decades)
        .expect("validated noise is non-negative");
    let rate_noise = Normal::new(0.0, RATE_NOISE_SD).expect("constant sd");

    let mut communes = Vec::with_capacity(cells.len());
    let mut densities = Vec::with_capacity(cells.len());
    let mut rates = Vec::with_capacity(cells.len());
    let mut populations = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let t = ((cell.centroid().x - lo.x) / span).clamp(0.0, 1.0);
        let log10_density =
            west_log10 + t * (east_log10 - west_log10) + density_noise.sample(&mut rng);
        let density = 10f64.powf(log10_density);
        let target_rate = ilogit(
            RATE_SLOPE * (log10_density - RATE_PIVOT_LOG10) + rate_noise.sample(&mut rng),
        );
        let population = density * cell.area();
        let households_total = ((population / PERSONS_PER_HOUSEHOLD).round() as u64).max(1);
        let households_electrified =
            ((target_rate * households_total as f64).round() as u64).min(households_total);
        let ring = cell
            .vertices()
            .iter()
            .map(|&p| projection.unproject(p))
            .collect();
        communes.push(RawCommune {
            id: format!("c{c}"),
            ring,
            households_total,
            households_electrified,
            population,
        });
        densities.push(density);
        rates.push(households_electrified as f64 / households_total as f64);
        populations.push(population);
    }

    let density_max = densities.iter().cloned().fold(f64::MIN, f64::max);
    let commune_of = |p: Point| -> usize {
        let mut best = 0;
        for (i, s) in seeds.iter().enumerate() {
            if p.distance_squared(s) < p.distance_squared(&seeds[best]) {
                best = i;
            }
        }
        best
    };
    let locations = place_points(
        &mut rng,
        &boundary,
        config.n_towers,
        MIN_TOWER_SEPARATION_KM,
        |rng, p| {
            let intensity = (densities[commune_of(p)] / density_max).powf(TOWER_INTENSITY_EXPONENT);
            rng.gen::<f64>() < intensity
        },
    );
    if locations.len() < config.n_towers {
        return Err(Error::TowerPlacement {
            requested: config.n_towers,
            placed: locations.len(),
            min_separation_km: MIN_TOWER_SEPARATION_KM,
        });
    }

    let mut towers_in_commune = vec![0usize; cells.len()];
    let homes: Vec<usize> = locations.iter().map(|&p| commune_of(p)).collect();
    for &c in &homes {
        towers_in_commune[c] += 1;
    }
    let mut sites = Vec::with_capacity(locations.len());
    let mut towers = Vec::with_capacity(locations.len());
    for (i, (&p, &c)) in locations.iter().zip(&homes).enumerate() {
        let id = format!("t{i}");
        sites.push((id.clone(), projection.unproject(p)));
        towers.push(TowerEconomy {
            id,
            location: p,
            population: populations[c] / towers_in_commune[c] as f64,
            rate: rates[c],
        });
    }

    Ok(SynthWorld {
        sites,
        communes,
        boundary: config.boundary.clone(),
        towers,
    })
}

/// Generates directed tower-to-tower event records.
///
/// Calls follow a gravity kernel, (pop_i·pop_j)^call_coupling over squared
/// softened distance, with mean-one log-normal noise; call minutes add a
/// noisy per-call duration on top, so `CL >= CN` for every pair. Texts
/// spend a per-tower budget proportional to rate^sms_coupling across
/// destinations in gravity proportions, which plants the SMS signal and
/// severs it exactly when the coupling is zero. Self-pairs are kept:
/// within-cell events carry most of the diagonal. Zero-count records are
/// not emitted.
pub fn generate_interactions(
    world: &SynthWorld,
    config: &SynthConfig,
) -> Result<Vec<InteractionRecord>> {
    config.validate()?;
    let mut rng = seeding::substream(config.seed, "interactions");
    let noise = LogNormal::new(-FLOW_NOISE_SD * FLOW_NOISE_SD / 2.0, FLOW_NOISE_SD)
        .expect("constant sigma");
    let n = world.towers.len();

    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        let ti = &world.towers[i];
        for j in 0..n {
            let tj = &world.towers[j];
            let d2 = ti.location.distance_squared(&tj.location);
            kernel[i * n + j] = (ti.population * tj.population).powf(config.call_coupling)
                / (d2 + GRAVITY_SOFTENING_KM * GRAVITY_SOFTENING_KM);
        }
    }

    let mut records = Vec::new();
    let mut push = |from: &str, to: &str, event_type: EventType, count: u64| {
        if count > 0 {
            records.push(InteractionRecord {
                from_tower: from.to_string(),
                to_tower: to.to_string(),
                event_type,
                count,
            });
        }
    };
    for i in 0..n {
        let ti = &world.towers[i];
        let row = &kernel[i * n..(i + 1) * n];
        let row_sum: f64 = row.iter().sum();
        let budget = SMS_BUDGET_PER_TOWER * ti.rate.powf(config.sms_coupling);
        for j in 0..n {
            let tj = &world.towers[j];
            let calls_mean = CALL_FLOW_SCALE * row[j];
            let sms_mean = if row_sum > 0.0 {
                budget * row[j] / row_sum
            } else {
                0.0
            };
            let calls = (calls_mean * noise.sample(&mut rng)).round() as u64;
            let texts = (sms_mean * noise.sample(&mut rng)).round() as u64;
            let extra_minutes =
                (calls as f64 * MINUTES_PER_CALL_EXTRA * noise.sample(&mut rng)).round() as u64;
            push(&ti.id, &tj.id, EventType::CN, calls);
            push(
                &ti.id,
                &tj.id,
                EventType::CL,
                if calls > 0 { calls + extra_minutes } else { 0 },
            );
            push(&ti.id, &tj.id, EventType::SN, texts);
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::InteractionMatrix;

    fn small_config(seed: u64) -> SynthConfig {
        SynthConfig {
            n_towers: 40,
            n_communes: 12,
            seed,
            ..SynthConfig::default()
        }
    }

    /// A hand-built world bypassing placement, for interaction-level tests.
    fn hand_world(populations: &[f64], rates: &[f64], spacing_km: f64) -> SynthWorld {
        let towers = populations
            .iter()
            .zip(rates)
            .enumerate()
            .map(|(i, (&population, &rate))| TowerEconomy {
                id: format!("t{i}"),
                location: Point::new(i as f64 * spacing_km, 0.0),
                population,
                rate,
            })
            .collect();
        SynthWorld {
            sites: Vec::new(),
            communes: Vec::new(),
            boundary: default_boundary(),
            towers,
        }
    }

    fn pair_total(records: &[InteractionRecord], from: &str, to: &str, e: EventType) -> u64 {
        records
            .iter()
            .filter(|r| r.from_tower == from && r.to_tower == to && r.event_type == e)
            .map(|r| r.count)
            .sum()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va.sqrt() * vb.sqrt())
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in order.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        pearson(&ranks(a), &ranks(b))
    }

    fn sn_out_totals(world: &SynthWorld, records: &[InteractionRecord]) -> Vec<f64> {
        let registry: Vec<String> = world.towers.iter().map(|t| t.id.clone()).collect();
        let m = InteractionMatrix::build(EventType::SN, registry, records).unwrap();
        (0..world.towers.len()).map(|i| m.out(i) + m.te(i)).collect()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = small_config(7);
        let a = generate_world(&config).unwrap();
        let b = generate_world(&config).unwrap();
        assert_eq!(a, b);
        let ra = generate_interactions(&a, &config).unwrap();
        let rb = generate_interactions(&b, &config).unwrap();
        assert_eq!(ra, rb);
        let other = generate_world(&small_config(8)).unwrap();
        assert_ne!(a.sites, other.sites);
    }

    #[test]
    fn exact_tower_count_inside_boundary() {
        let config = SynthConfig {
            n_towers: 10,
            ..small_config(3)
        };
        let world = generate_world(&config).unwrap();
        assert_eq!(world.sites.len(), 10);
        let projection = Projection::for_ring(&config.boundary).unwrap();
        let boundary = projection.project_ring(&config.boundary).unwrap();
        for (_, g) in &world.sites {
            assert!(boundary.strictly_contains(projection.project(*g), 1e-9));
        }
        for (a, ta) in world.towers.iter().enumerate() {
            for tb in world.towers.iter().skip(a + 1) {
                assert!(ta.location.distance(&tb.location) >= MIN_TOWER_SEPARATION_KM);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let too_few = SynthConfig {
            n_towers: 9,
            ..SynthConfig::default()
        };
        assert!(matches!(
            generate_world(&too_few),
            Err(Error::InvalidConfig(_))
        ));
        let negative = SynthConfig {
            sms_coupling: -0.5,
            ..SynthConfig::default()
        };
        assert!(matches!(
            generate_world(&negative),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn cramped_boundary_fails_tower_placement() {
        let config = SynthConfig {
            n_towers: 30,
            n_communes: 3,
            boundary: vec![
                GeoPoint::new(0.0, 0.0),
                GeoPoint::new(0.03, 0.0),
                GeoPoint::new(0.03, 0.03),
                GeoPoint::new(0.0, 0.03),
            ],
            ..SynthConfig::default()
        };
        match generate_world(&config) {
            Err(Error::TowerPlacement {
                requested, placed, ..
            }) => {
                assert_eq!(requested, 30);
                assert!(placed < 30);
            }
            other => panic!("expected TowerPlacement, got {other:?}"),
        }
    }

    #[test]
    fn single_tower_yields_only_diagonal_records() {
        let world = hand_world(&[50_000.0], &[0.8], 10.0);
        let config = small_config(4);
        let records = generate_interactions(&world, &config).unwrap();
        assert!(!records.is_empty());
        for r in &records {
            assert_eq!(r.from_tower, "t0");
            assert_eq!(r.to_tower, "t0");
        }
    }

    #[test]
    fn call_minutes_cover_call_counts() {
        let world = generate_world(&small_config(11)).unwrap();
        let records = generate_interactions(&world, &small_config(11)).unwrap();
        let mut has_diagonal = false;
        for r in &records {
            if r.event_type == EventType::CN {
                let minutes = pair_total(&records, &r.from_tower, &r.to_tower, EventType::CL);
                assert!(
                    minutes >= r.count,
                    "{}->{}: {} minutes for {} calls",
                    r.from_tower,
                    r.to_tower,
                    minutes,
                    r.count
                );
            }
            has_diagonal |= r.from_tower == r.to_tower;
        }
        assert!(has_diagonal);
    }

    #[test]
    fn equal_towers_exchange_symmetric_volumes() {
        let world = hand_world(&[40_000.0, 40_000.0], &[0.6, 0.6], 20.0);
        let mut forward = 0.0;
        let mut backward = 0.0;
        for seed in 0..100 {
            let config = SynthConfig {
                sms_coupling: 0.0,
                seed,
                ..SynthConfig::default()
            };
            let records = generate_interactions(&world, &config).unwrap();
            forward += pair_total(&records, "t0", "t1", EventType::CN) as f64;
            backward += pair_total(&records, "t1", "t0", EventType::CN) as f64;
        }
        let ratio = forward / backward;
        assert!(
            (0.9..=1.1).contains(&ratio),
            "mean volume ratio {ratio} should be near 1"
        );
    }

    #[test]
    fn doubling_populations_quadruples_pair_volume() {
        let base = hand_world(&[30_000.0, 30_000.0], &[0.5, 0.5], 30.0);
        let doubled = hand_world(&[60_000.0, 60_000.0], &[0.5, 0.5], 30.0);
        let mut small = 0.0;
        let mut large = 0.0;
        for seed in 0..100 {
            let config = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            small += pair_total(
                &generate_interactions(&base, &config).unwrap(),
                "t0",
                "t1",
                EventType::CN,
            ) as f64;
            large += pair_total(
                &generate_interactions(&doubled, &config).unwrap(),
                "t0",
                "t1",
                EventType::CN,
            ) as f64;
        }
        let ratio = large / small;
        assert!(
            (3.4..=4.6).contains(&ratio),
            "quadrupling ratio was {ratio}"
        );
    }

    #[test]
    fn zero_coupling_severs_the_sms_electrification_link() {
        let config = SynthConfig {
            sms_coupling: 0.0,
            seed: 13,
            ..SynthConfig::default()
        };
        let world = generate_world(&config).unwrap();
        let records = generate_interactions(&world, &config).unwrap();
        let totals = sn_out_totals(&world, &records);
        let rates: Vec<f64> = world.towers.iter().map(|t| t.rate).collect();
        let rho = pearson(&totals, &rates);
        assert!(
            rho.abs() < 0.1,
            "SMS totals should decouple from electrification, got rho {rho}"
        );
    }

    #[test]
    fn planted_signal_outranks_call_volume() {
        let config = SynthConfig {
            seed: 13,
            ..SynthConfig::default()
        };
        let world = generate_world(&config).unwrap();
        let records = generate_interactions(&world, &config).unwrap();
        let rates: Vec<f64> = world.towers.iter().map(|t| t.rate).collect();
        let sn = sn_out_totals(&world, &records);
        let registry: Vec<String> = world.towers.iter().map(|t| t.id.clone()).collect();
        let cn_matrix = InteractionMatrix::build(EventType::CN, registry, &records).unwrap();
        let cn: Vec<f64> = (0..world.towers.len())
            .map(|i| cn_matrix.out(i) + cn_matrix.te(i))
            .collect();
        let sn_corr = spearman(&sn, &rates);
        let cn_corr = spearman(&cn, &rates);
        assert!(sn_corr > 0.0, "planted correlation was {sn_corr}");
        assert!(
            sn_corr > cn_corr,
            "SMS correlation {sn_corr} should beat call correlation {cn_corr}"
        );
    }
}
