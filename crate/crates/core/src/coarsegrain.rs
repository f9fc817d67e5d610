//! Tile coarse-graining, spin fields, and contour statistics.
//!
//! The box is partitioned into square tiles of side l = floor(k/2)
//! anchored at the origin (trailing partial strips are dropped and recorded).
//! A tile is +1 if it contains at least one horizontal rod center and no
//! vertical one, -1 in the symmetric case, 0 if it holds no centers. For
//! l <= k/2 the hard core makes a mixed tile geometrically impossible, so
//! encountering one is an invariant violation, not a data point. Defect
//! tiles (zeros and members of adjacent opposite-spin pairs) decompose into
//! connected contours whose empirical size distribution should decay
//! exponentially in the ordered phase.

use crate::lattice::{BoxSpec, Orientation, Rod, RodConfig};
use crate::stats::{weighted_linear_fit, WeightedFit};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoarseGrainError {
    #[error("tile ({0}, {1}) holds centers of both orientations; upstream hard-core bug")]
    MixedOrientations(usize, usize),
    #[error("tile ({0}, {1}) is outside the tiled region")]
    TileOutOfRange(usize, usize),
    #[error("tile ({0}, {1}) is empty; row occupancy is defined on occupied tiles")]
    EmptyTile(usize, usize),
    #[error("contour statistics need at least {need} fields, got {got}")]
    TooFewFields { need: usize, got: usize },
}

/// The coarse-grained spin field of one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinField {
    /// Tile side in sites, floor(k/2).
    pub ell: i32,
    /// Tiles along x and y.
    pub nx: usize,
    pub ny: usize,
    /// Sites dropped at the right/top edges (partial strips).
    pub dropped_x: i32,
    pub dropped_y: i32,
    spins: Vec<i8>,
}

impl SpinField {
    /// Coarse-grain a valid configuration.
    pub fn from_config(config: &RodConfig) -> Result<Self, CoarseGrainError> {
        Self::from_rods(config.rods(), config.spec())
    }

    /// Coarse-grain a bare rod list. Only centers and orientations are read,
    /// so this also serves trace files and symmetry transforms.
    pub fn from_rods(rods: &[Rod], spec: &BoxSpec) -> Result<Self, CoarseGrainError> {
        let ell = (spec.k / 2).max(1);
        let nx = (spec.width / ell) as usize;
        let ny = (spec.height / ell) as usize;
        let mut has_h = vec![false; nx * ny];
        let mut has_v = vec![false; nx * ny];
        for rod in rods {
            let c = rod.center;
            if c.x < 0 || c.y < 0 {
                continue;
            }
            let tx = (c.x / ell) as usize;
            let ty = (c.y / ell) as usize;
            if tx >= nx || ty >= ny {
                continue; // center in a dropped partial strip
            }
            match rod.orientation {
                Orientation::Horizontal => has_h[ty * nx + tx] = true,
                Orientation::Vertical => has_v[ty * nx + tx] = true,
            }
        }
        let mut spins = vec![0i8; nx * ny];
        for i in 0..spins.len() {
            spins[i] = match (has_h[i], has_v[i]) {
                (true, true) => {
                    return Err(CoarseGrainError::MixedOrientations(i % nx, i / nx));
                }
                (true, false) => 1,
                (false, true) => -1,
                (false, false) => 0,
            };
        }
        Ok(SpinField {
            ell,
            nx,
            ny,
            dropped_x: spec.width - nx as i32 * ell,
            dropped_y: spec.height - ny as i32 * ell,
            spins,
        })
    }

    /// Build a field directly from spin values (tests, synthetic models).
    pub fn from_spins(nx: usize, ny: usize, ell: i32, spins: Vec<i8>) -> Self {
        assert_eq!(spins.len(), nx * ny);
        assert!(spins.iter().all(|s| (-1..=1).contains(s)));
        SpinField {
            ell,
            nx,
            ny,
            dropped_x: 0,
            dropped_y: 0,
            spins,
        }
    }

    pub fn spin(&self, tx: usize, ty: usize) -> i8 {
        self.spins[ty * self.nx + tx]
    }

    pub fn tiles(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |ty| (0..self.nx).map(move |tx| (tx, ty)))
    }

    pub fn tile_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Global H <-> V relabeling: every spin changes sign.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.spins {
            *s = -*s;
        }
        out
    }
}

/// Tiles that are 0, plus every member of a nearest-neighbor pair carrying
/// opposite nonzero spins.
pub fn defect_tiles(field: &SpinField) -> BTreeSet<(usize, usize)> {
    let mut defects = BTreeSet::new();
    for (tx, ty) in field.tiles() {
        let s = field.spin(tx, ty);
        if s == 0 {
            defects.insert((tx, ty));
            continue;
        }
        let mut opposite = false;
        if tx + 1 < field.nx && field.spin(tx + 1, ty) == -s {
            opposite = true;
        }
        if tx > 0 && field.spin(tx - 1, ty) == -s {
            opposite = true;
        }
        if ty + 1 < field.ny && field.spin(tx, ty + 1) == -s {
            opposite = true;
        }
        if ty > 0 && field.spin(tx, ty - 1) == -s {
            opposite = true;
        }
        if opposite {
            defects.insert((tx, ty));
        }
    }
    defects
}

/// A connected component of defect tiles (4-neighbor adjacency).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    /// Member tiles, sorted.
    pub tiles: Vec<(usize, usize)>,
}

impl Contour {
    pub fn size(&self) -> usize {
        self.tiles.len()
    }
}

/// Decompose the defect set of a field into contours.
pub fn contours(field: &SpinField) -> Vec<Contour> {
    let defects = defect_tiles(field);
    let mut unvisited: BTreeSet<(usize, usize)> = defects;
    let mut out = Vec::new();
    while let Some(&start) = unvisited.iter().next() {
        unvisited.remove(&start);
        let mut component = vec![start];
        let mut frontier = vec![start];
        while let Some((tx, ty)) = frontier.pop() {
            let mut neighbors = Vec::with_capacity(4);
            if tx + 1 < field.nx {
                neighbors.push((tx + 1, ty));
            }
            if tx > 0 {
                neighbors.push((tx - 1, ty));
            }
            if ty + 1 < field.ny {
                neighbors.push((tx, ty + 1));
            }
            if ty > 0 {
                neighbors.push((tx, ty - 1));
            }
            for nb in neighbors {
                if unvisited.remove(&nb) {
                    component.push(nb);
                    frontier.push(nb);
                }
            }
        }
        component.sort_unstable();
        out.push(Contour { tiles: component });
    }
    out
}

/// Minimum events per size bin admitted into the Peierls fit; rarer bins
/// make log-scale noise dominate.
pub const MIN_BIN_EVENTS: u64 = 10;
pub const MIN_FIT_BINS: usize = 3;
pub const MIN_FIELDS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ContourStats {
    /// size -> number of (frame, contour) occurrences.
    pub histogram: Vec<(usize, u64)>,
    pub frames: usize,
    pub tiles_per_frame: usize,
    /// size -> (probability that a given tile hosts a contour of this size,
    /// Poisson standard error).
    pub host_probability: Vec<(usize, f64, f64)>,
    /// Weighted fit of ln P(s) = a - tau s over bins with enough events;
    /// None when fewer than MIN_FIT_BINS bins qualify.
    pub fit: Option<PeierlsFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeierlsFit {
    pub tau: f64,
    pub tau_se: f64,
    pub intercept: f64,
    pub sizes_used: Vec<usize>,
    pub chi2: f64,
}

impl ContourStats {
    pub fn total_contours(&self) -> u64 {
        self.histogram.iter().map(|(_, c)| c).sum()
    }
}

/// Aggregate contour sizes over a trajectory of spin fields and fit the
/// exponential decay rate of the tile-hosting probability.
pub fn contour_statistics(fields: &[SpinField]) -> Result<ContourStats, CoarseGrainError> {
    if fields.len() < MIN_FIELDS {
        return Err(CoarseGrainError::TooFewFields {
            need: MIN_FIELDS,
            got: fields.len(),
        });
    }
    let tiles_per_frame = fields[0].tile_count();
    let mut counts: std::collections::BTreeMap<usize, u64> = std::collections::BTreeMap::new();
    for field in fields {
        debug_assert_eq!(field.tile_count(), tiles_per_frame);
        for contour in contours(field) {
            *counts.entry(contour.size()).or_insert(0) += 1;
        }
    }
    let histogram: Vec<(usize, u64)> = counts.into_iter().collect();
    let total_tiles = fields.len() as f64 * tiles_per_frame as f64;
    let host_probability: Vec<(usize, f64, f64)> = histogram
        .iter()
        .map(|&(s, c)| {
            // A contour of size s occupies s tiles, so the per-tile hosting
            // probability is s c / (frames * tiles); Poisson error on c.
            let p = s as f64 * c as f64 / total_tiles;
            let se = s as f64 * (c as f64).sqrt() / total_tiles;
            (s, p, se)
        })
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sigmas = Vec::new();
    let mut sizes_used = Vec::new();
    for (i, &(s, c)) in histogram.iter().enumerate() {
        if c >= MIN_BIN_EVENTS {
            xs.push(s as f64);
            ys.push(host_probability[i].1.ln());
            sigmas.push(1.0 / (c as f64).sqrt());
            sizes_used.push(s);
        }
    }
    let fit = if sizes_used.len() >= MIN_FIT_BINS {
        weighted_linear_fit(&xs, &ys, &sigmas).ok().map(
            |WeightedFit {
                 slope,
                 intercept,
                 slope_se,
                 chi2,
                 ..
             }| PeierlsFit {
                tau: -slope,
                tau_se: slope_se,
                intercept,
                sizes_used,
                chi2,
            },
        )
    } else {
        None
    };

    Ok(ContourStats {
        histogram,
        frames: fields.len(),
        tiles_per_frame,
        host_probability,
        fit,
    })
}

/// Row-occupancy profile of one occupied tile: for a +1 tile, which of its
/// l rows contain at least one horizontal rod center (columns for -1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowOccupancy {
    pub occupied: usize,
    /// Center count per row (or column) inside the tile.
    pub profile: Vec<u32>,
}

pub fn row_occupancy_stats(
    config: &RodConfig,
    tile: (usize, usize),
) -> Result<RowOccupancy, CoarseGrainError> {
    let spec = config.spec();
    let ell = (spec.k / 2).max(1);
    let nx = (spec.width / ell) as usize;
    let ny = (spec.height / ell) as usize;
    let (tx, ty) = tile;
    if tx >= nx || ty >= ny {
        return Err(CoarseGrainError::TileOutOfRange(tx, ty));
    }
    let x0 = tx as i32 * ell;
    let y0 = ty as i32 * ell;
    let mut orientation: Option<Orientation> = None;
    let mut centers = Vec::new();
    for rod in config.rods() {
        let c = rod.center;
        if c.x >= x0 && c.x < x0 + ell && c.y >= y0 && c.y < y0 + ell {
            match orientation {
                None => orientation = Some(rod.orientation),
                Some(o) if o != rod.orientation => {
                    return Err(CoarseGrainError::MixedOrientations(tx, ty));
                }
                _ => {}
            }
            centers.push(c);
        }
    }
    let orientation = orientation.ok_or(CoarseGrainError::EmptyTile(tx, ty))?;
    let mut profile = vec![0u32; ell as usize];
    for c in centers {
        let lane = match orientation {
            Orientation::Horizontal => c.y - y0,
            Orientation::Vertical => c.x - x0,
        };
        profile[lane as usize] += 1;
    }
    Ok(RowOccupancy {
        occupied: profile.iter().filter(|&&n| n > 0).count(),
        profile,
    })
}

/// Distribution of occupied-lane counts over the occupied tiles of a
/// trajectory, for comparison against an independent-lane model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowOccupancyDistribution {
    /// counts[j] = number of occupied tiles with exactly j occupied lanes.
    pub counts: Vec<u64>,
}

impl RowOccupancyDistribution {
    pub fn record(&mut self, occupancy: &RowOccupancy) {
        if self.counts.len() <= occupancy.occupied {
            self.counts.resize(occupancy.occupied + 1, 0);
        }
        self.counts[occupancy.occupied] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Total-variation distance to the best-matching binomial(l, p)
    /// conditioned on at least one occupied lane; p is fitted so the
    /// conditional mean matches the data. Returns (p, tv).
    pub fn binomial_tv(&self, ell: usize) -> Option<(f64, f64)> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let mean_occupied: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(j, &c)| j as f64 * c as f64)
            .sum::<f64>()
            / total as f64;
        // Solve E[occupied | >= 1] = l p / (1 - (1-p)^l) for p by bisection.
        let target = mean_occupied;
        let cond_mean = |p: f64| ell as f64 * p / (1.0 - (1.0 - p).powi(ell as i32));
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cond_mean(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = 0.5 * (lo + hi);
        let norm = 1.0 - (1.0 - p).powi(ell as i32);
        let mut tv = 0.0;
        for j in 1..=ell {
            let model = binomial_pmf(ell, j, p) / norm;
            let observed = self
                .counts
                .get(j)
                .map(|&c| c as f64 / total as f64)
                .unwrap_or(0.0);
            tv += (model - observed).abs();
        }
        // Observed mass at j=0 (should be zero by construction).
        tv += self
            .counts
            .first()
            .map(|&c| c as f64 / total as f64)
            .unwrap_or(0.0);
        Some((p, 0.5 * tv))
    }
}

fn binomial_pmf(n: usize, j: usize, p: f64) -> f64 {
    let mut log_c = 0.0;
    for i in 0..j {
        log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    (log_c + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
}
