//! Lattice geometry and hard-core rod configurations.
//!
//! A [`Rod`] is a `1 x k` particle identified by its orientation and center
//! site; its footprint is the set of `k` collinear sites it covers. A
//! [`RodConfig`] is a set of rods with pairwise disjoint footprints plus a
//! site-occupancy index so compatibility checks cost O(k).

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("box dimensions must be positive, got {width}x{height}")]
    BadDimensions { width: i32, height: i32 },
    #[error("rod length k must be at least 2, got {0}")]
    BadRodLength(i32),
    #[error("site {0} is outside the box")]
    SiteOutsideBox(Site),
    #[error("rod {0} is incompatible with the configuration")]
    IncompatibleRod(Rod),
    #[error("rod {0} is not present in the configuration")]
    RodNotFound(Rod),
    #[error("activity must be nonnegative, got {0}")]
    NegativeActivity(f64),
    #[error("configuration invariant violated: {0}")]
    InvariantViolation(String),
}

/// A lattice site. Ordering is (x, y) lexicographic, which fixes the
/// canonical order of rod lists in traces and enumeration streams.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

pub fn site(x: i32, y: i32) -> Site {
    Site { x, y }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Horizontal => Orientation::Vertical,
            Orientation::Vertical => Orientation::Horizontal,
        }
    }

    /// One-letter tag used in traces and debug output.
    pub fn letter(self) -> char {
        match self {
            Orientation::Horizontal => 'H',
            Orientation::Vertical => 'V',
        }
    }
}

/// How rods must sit relative to the box.
///
/// `CenterInBox` is the paper's convention (a rod belongs to the box if its
/// center does, so footprints may overhang the edges); `FullyContained`
/// keeps whole footprints inside, which is the cleaner setting for exact
/// enumeration on tiny boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Containment {
    CenterInBox,
    FullyContained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Open,
    Plus,
    Minus,
}

impl BoundaryCondition {
    /// Orientation forced on rods centered in the peel, if any.
    pub fn forced_orientation(self) -> Option<Orientation> {
        match self {
            BoundaryCondition::Open => None,
            BoundaryCondition::Plus => Some(Orientation::Horizontal),
            BoundaryCondition::Minus => Some(Orientation::Vertical),
        }
    }
}

/// An oriented `1 x k` rod identified by its center site.
///
/// For even `k` the geometric center falls between sites; the convention here
/// pins the center to the left/bottom of the two middle cells, i.e. the
/// footprint starts `floor((k-1)/2)` sites before the center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rod {
    pub orientation: Orientation,
    pub center: Site,
}

impl Rod {
    pub fn new(orientation: Orientation, center: Site) -> Self {
        Rod {
            orientation,
            center,
        }
    }

    pub fn horizontal(x: i32, y: i32) -> Self {
        Rod::new(Orientation::Horizontal, site(x, y))
    }

    pub fn vertical(x: i32, y: i32) -> Self {
        Rod::new(Orientation::Vertical, site(x, y))
    }

    /// The k sites covered by this rod.
    pub fn footprint(self, k: i32) -> impl Iterator<Item = Site> {
        let off = (k - 1) / 2;
        let Site { x, y } = self.center;
        (0..k).map(move |i| match self.orientation {
            Orientation::Horizontal => site(x - off + i, y),
            Orientation::Vertical => site(x, y - off + i),
        })
    }

    /// Same center, opposite orientation (the rotation move).
    pub fn flipped(self) -> Self {
        Rod::new(self.orientation.flipped(), self.center)
    }

    /// Reflection about the main diagonal; maps H to V and vice versa while
    /// preserving hard-core compatibility on square boxes.
    pub fn transposed(self) -> Self {
        Rod::new(
            self.orientation.flipped(),
            site(self.center.y, self.center.x),
        )
    }

    pub fn translated(self, dx: i32, dy: i32) -> Self {
        Rod::new(
            self.orientation,
            site(self.center.x + dx, self.center.y + dy),
        )
    }
}

impl fmt::Display for Rod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.orientation.letter(), self.center)
    }
}

/// A half-open axis-aligned rectangle of sites, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl Rect {
    pub fn contains(&self, s: Site) -> bool {
        s.x >= self.x0 && s.x < self.x1 && s.y >= self.y0 && s.y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn width(&self) -> i32 {
        (self.x1 - self.x0).max(0)
    }

    pub fn height(&self) -> i32 {
        (self.y1 - self.y0).max(0)
    }

    pub fn area(&self) -> i64 {
        self.width() as i64 * self.height() as i64
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| site(x, y)))
    }
}

/// Box geometry: dimensions, rod length, containment mode and boundary
/// condition. Square boxes are the common case; rectangles are kept so tiny
/// strips like 1x4 can serve as enumeration test beds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub width: i32,
    pub height: i32,
    pub k: i32,
    pub containment: Containment,
    pub bc: BoundaryCondition,
}

impl BoxSpec {
    pub fn new(
        width: i32,
        height: i32,
        k: i32,
        containment: Containment,
        bc: BoundaryCondition,
    ) -> Result<Self, LatticeError> {
        if width < 1 || height < 1 {
            return Err(LatticeError::BadDimensions { width, height });
        }
        if k < 2 {
            return Err(LatticeError::BadRodLength(k));
        }
        Ok(BoxSpec {
            width,
            height,
            k,
            containment,
            bc,
        })
    }

    pub fn square(
        side: i32,
        k: i32,
        containment: Containment,
        bc: BoundaryCondition,
    ) -> Result<Self, LatticeError> {
        BoxSpec::new(side, side, k, containment, bc)
    }

    /// Number of sites in the box.
    pub fn sites(&self) -> i64 {
        self.width as i64 * self.height as i64
    }

    pub fn full_rect(&self) -> Rect {
        Rect {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        self.full_rect().contains(s)
    }

    /// The internal peel is the first 2k site layers from every edge
    /// (L-infinity distance to the boundary in 0..2k).
    pub fn peel_width(&self) -> i32 {
        2 * self.k
    }

    /// Whether a site belongs to the internal peel. Sites outside the box
    /// are an invalid query.
    pub fn in_peel(&self, s: Site) -> Result<bool, LatticeError> {
        if !self.contains(s) {
            return Err(LatticeError::SiteOutsideBox(s));
        }
        let d =
            s.x.min(s.y)
                .min(self.width - 1 - s.x)
                .min(self.height - 1 - s.y);
        Ok(d < self.peel_width())
    }

    /// Sites at L-infinity distance >= 2k from every edge.
    pub fn bulk_rect(&self) -> Rect {
        let p = self.peel_width();
        Rect {
            x0: p,
            y0: p,
            x1: self.width - p,
            y1: self.height - p,
        }
    }

    /// Plus/minus runs need a bulk for the boundary condition to act on;
    /// callers should warn when this is false.
    pub fn has_bulk(&self) -> bool {
        self.width > 4 * self.k && self.height > 4 * self.k
    }

    /// Containment rule only (no hard core, no boundary condition).
    pub fn rod_in_box(&self, rod: Rod) -> bool {
        match self.containment {
            Containment::CenterInBox => self.contains(rod.center),
            Containment::FullyContained => rod.footprint(self.k).all(|s| self.contains(s)),
        }
    }

    /// Boundary-condition rule: rods centered in the peel must carry the
    /// forced orientation. Callers must have checked `rod_in_box` first.
    pub fn rod_obeys_bc(&self, rod: Rod) -> bool {
        match self.bc.forced_orientation() {
            None => true,
            // Overhanging centers are inside the box by containment.
            Some(forced) => rod.orientation == forced || !self.in_peel(rod.center).unwrap_or(false),
        }
    }

    /// Single-rod legality: containment and boundary condition.
    pub fn rod_allowed(&self, rod: Rod) -> bool {
        self.rod_in_box(rod) && self.rod_obeys_bc(rod)
    }
}

/// Padded dense site-occupancy index. Footprints may overhang the box by up
/// to k-1 sites in `CenterInBox` mode, so the grid carries a k-wide margin.
#[derive(Debug, Clone, PartialEq)]
struct OccGrid {
    cells: Vec<u32>,
    pad: i32,
    stride: i32,
    rows: i32,
}

const EMPTY: u32 = u32::MAX;

impl OccGrid {
    fn new(spec: &BoxSpec) -> Self {
        let pad = spec.k;
        let stride = spec.width + 2 * pad;
        let rows = spec.height + 2 * pad;
        OccGrid {
            cells: vec![EMPTY; (stride * rows) as usize],
            pad,
            stride,
            rows,
        }
    }

    #[inline]
    fn idx(&self, s: Site) -> usize {
        debug_assert!(s.x >= -self.pad && s.x < self.stride - self.pad);
        debug_assert!(s.y >= -self.pad && s.y < self.rows - self.pad);
        ((s.y + self.pad) * self.stride + (s.x + self.pad)) as usize
    }

    #[inline]
    fn get(&self, s: Site) -> u32 {
        self.cells[self.idx(s)]
    }

    #[inline]
    fn set(&mut self, s: Site, v: u32) {
        let i = self.idx(s);
        self.cells[i] = v;
    }
}

/// A hard-core-compatible set of rods on a box, with an occupancy index kept
/// in lockstep so insertion checks are O(k).
#[derive(Debug, Clone)]
pub struct RodConfig {
    spec: BoxSpec,
    rods: Vec<Rod>,
    grid: OccGrid,
}

impl RodConfig {
    pub fn new(spec: BoxSpec) -> Self {
        RodConfig {
            grid: OccGrid::new(&spec),
            spec,
            rods: Vec::new(),
        }
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn rods(&self) -> &[Rod] {
        &self.rods
    }

    pub fn len(&self) -> usize {
        self.rods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rods.is_empty()
    }

    /// The rod covering a site, if any.
    pub fn occupant(&self, s: Site) -> Option<Rod> {
        if !self.spec.contains(s) {
            return None;
        }
        match self.grid.get(s) {
            EMPTY => None,
            i => Some(self.rods[i as usize]),
        }
    }

    /// Whether a rod center sits exactly at `s` (the indicator n_x).
    pub fn center_at(&self, s: Site) -> Option<Orientation> {
        self.occupant(s)
            .filter(|r| r.center == s)
            .map(|r| r.orientation)
    }

    /// True iff the rod is legal for the box and its footprint is disjoint
    /// from every existing footprint.
    pub fn is_compatible(&self, rod: Rod) -> bool {
        self.compatible_excluding(rod, None)
    }

    fn compatible_excluding(&self, rod: Rod, skip: Option<u32>) -> bool {
        if !self.spec.rod_allowed(rod) {
            return false;
        }
        rod.footprint(self.spec.k).all(|s| {
            let v = self.grid.get(s);
            v == EMPTY || Some(v) == skip
        })
    }

    /// Insert a rod; rejects without mutating if the rod is incompatible.
    pub fn apply(&mut self, rod: Rod) -> Result<(), LatticeError> {
        if !self.is_compatible(rod) {
            return Err(LatticeError::IncompatibleRod(rod));
        }
        let idx = self.rods.len() as u32;
        self.rods.push(rod);
        for s in rod.footprint(self.spec.k) {
            self.grid.set(s, idx);
        }
        debug_assert!(self.footprint_consistent(self.rods.len() - 1));
        Ok(())
    }

    /// Remove a rod; rejects without mutating if the rod is absent.
    pub fn remove(&mut self, rod: Rod) -> Result<(), LatticeError> {
        // A rod always covers its own center, so one grid probe finds it.
        let idx = match self.spec.contains(rod.center) {
            true => self.grid.get(rod.center),
            false => EMPTY,
        };
        if idx == EMPTY || self.rods[idx as usize] != rod {
            return Err(LatticeError::RodNotFound(rod));
        }
        self.remove_at(idx as usize);
        Ok(())
    }

    /// Remove the rod in slot `idx` (used by the sampler's uniform pick).
    pub fn remove_at(&mut self, idx: usize) -> Rod {
        let rod = self.rods[idx];
        for s in rod.footprint(self.spec.k) {
            self.grid.set(s, EMPTY);
        }
        self.rods.swap_remove(idx);
        if idx < self.rods.len() {
            let moved = self.rods[idx];
            for s in moved.footprint(self.spec.k) {
                self.grid.set(s, idx as u32);
            }
        }
        debug_assert!(idx >= self.rods.len() || self.footprint_consistent(idx));
        rod
    }

    /// Replace the rod in slot `idx` by `new` if the replacement keeps the
    /// configuration valid; used for translation/rotation moves. Returns
    /// whether the replacement happened.
    pub fn try_replace(&mut self, idx: usize, new: Rod) -> bool {
        if !self.compatible_excluding(new, Some(idx as u32)) {
            return false;
        }
        let old = self.rods[idx];
        for s in old.footprint(self.spec.k) {
            self.grid.set(s, EMPTY);
        }
        for s in new.footprint(self.spec.k) {
            self.grid.set(s, idx as u32);
        }
        self.rods[idx] = new;
        debug_assert!(self.footprint_consistent(idx));
        true
    }

    /// Rods sorted by (orientation, x, y): the canonical form used for
    /// traces and for keying enumerated states.
    pub fn canonical_rods(&self) -> Vec<Rod> {
        let mut v = self.rods.clone();
        v.sort_unstable();
        v
    }

    /// Local consistency of one slot's footprint (cheap per-move check).
    fn footprint_consistent(&self, idx: usize) -> bool {
        self.rods[idx]
            .footprint(self.spec.k)
            .all(|s| self.grid.get(s) == idx as u32)
    }

    /// Full invariant check by recomputation: hard core, occupancy index
    /// equal to the union of footprints, containment and bc closure. Cheap
    /// enough (no allocation beyond the walk) to run every sweep.
    pub fn validate(&self) -> Result<(), LatticeError> {
        for (i, rod) in self.rods.iter().enumerate() {
            if !self.spec.rod_in_box(*rod) {
                return Err(LatticeError::InvariantViolation(format!(
                    "rod {rod} violates containment"
                )));
            }
            if !self.spec.rod_obeys_bc(*rod) {
                return Err(LatticeError::InvariantViolation(format!(
                    "rod {rod} violates the boundary condition"
                )));
            }
            // Every footprint cell must point back to this slot. A shared
            // cell can satisfy at most one rod, so this also verifies the
            // hard core.
            for s in rod.footprint(self.spec.k) {
                if self.grid.get(s) != i as u32 {
                    return Err(LatticeError::InvariantViolation(format!(
                        "site {s} of rod {rod} not indexed to it (overlap or stale index)"
                    )));
                }
            }
        }
        // No stale cells: exactly N*k cells are occupied.
        let occupied = self.grid.cells.iter().filter(|&&v| v != EMPTY).count();
        let expected = self.rods.len() * self.spec.k as usize;
        if occupied != expected {
            return Err(LatticeError::InvariantViolation(format!(
                "occupancy index holds {occupied} cells, footprints cover {expected}"
            )));
        }
        Ok(())
    }
}

/// The theorem's regime parameter epsilon = max(z k, exp(-z k^2)).
pub fn regime_epsilon(z: f64, k: i32) -> f64 {
    let k = k as f64;
    (z * k).max((-z * k * k).exp())
}

/// Thresholds for the regime flag. The underlying theory only guarantees the
/// existence of suitable constants; these are user-supplied knobs, not
/// values with any claimed optimality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub epsilon0: f64,
    pub k0: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub z: f64,
    pub k: i32,
    pub epsilon: f64,
}

impl RegimeParams {
    pub fn new(z: f64, k: i32) -> Result<Self, LatticeError> {
        if z < 0.0 || !z.is_finite() {
            return Err(LatticeError::NegativeActivity(z));
        }
        if k < 2 {
            return Err(LatticeError::BadRodLength(k));
        }
        Ok(RegimeParams {
            z,
            k,
            epsilon: regime_epsilon(z, k),
        })
    }

    pub fn in_regime(&self, thresholds: RegimeThresholds) -> bool {
        self.epsilon <= thresholds.epsilon0 && self.k >= thresholds.k0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn open_box(w: i32, h: i32, k: i32) -> BoxSpec {
        BoxSpec::new(
            w,
            h,
            k,
            Containment::FullyContained,
            BoundaryCondition::Open,
        )
        .unwrap()
    }

    #[test]
    fn footprint_center_conventions() {
        let f: Vec<Site> = Rod::horizontal(0, 0).footprint(3).collect();
        assert_eq!(f, vec![site(-1, 0), site(0, 0), site(1, 0)]);

        let f: Vec<Site> = Rod::vertical(2, 2).footprint(2).collect();
        assert_eq!(f, vec![site(2, 2), site(2, 3)]);

        let f: Vec<Site> = Rod::horizontal(5, 5).footprint(7).collect();
        assert_eq!(f, (2..=8).map(|x| site(x, 5)).collect::<Vec<_>>());
    }

    #[test]
    fn footprint_size_is_k() {
        for k in 2..12 {
            for rod in [Rod::horizontal(3, -2), Rod::vertical(-7, 11)] {
                assert_eq!(rod.footprint(k).count(), k as usize);
            }
        }
    }

    #[test]
    fn same_row_distance_k_is_disjoint() {
        for k in 2..10 {
            let a = Rod::horizontal(0, 0);
            let b = Rod::horizontal(k, 0);
            let fa: HashSet<Site> = a.footprint(k).collect();
            assert!(b.footprint(k).all(|s| !fa.contains(&s)));
            // Distance k-1 overlaps.
            let c = Rod::horizontal(k - 1, 0);
            assert!(c.footprint(k).any(|s| fa.contains(&s)));
        }
    }

    #[test]
    fn compatibility_direct_overlap() {
        let spec =
            BoxSpec::new(8, 8, 2, Containment::CenterInBox, BoundaryCondition::Open).unwrap();
        let mut cfg = RodConfig::new(spec);
        cfg.apply(Rod::horizontal(0, 0)).unwrap();
        // V at (1,0) shares site (1,0) with H footprint {(0,0),(1,0)}.
        assert!(!cfg.is_compatible(Rod::vertical(1, 0)));
        // H at (2,0) has footprint {(2,0),(3,0)}, disjoint.
        assert!(cfg.is_compatible(Rod::horizontal(2, 0)));
    }

    /// Brute-force oracle: footprint set intersection plus independent
    /// containment/bc legality checks.
    fn brute_force_compatible(cfg: &RodConfig, rod: Rod) -> bool {
        let spec = cfg.spec();
        let in_box = match spec.containment {
            Containment::CenterInBox => spec.contains(rod.center),
            Containment::FullyContained => rod
                .footprint(spec.k)
                .all(|s| s.x >= 0 && s.x < spec.width && s.y >= 0 && s.y < spec.height),
        };
        if !in_box {
            return false;
        }
        if let Some(forced) = spec.bc.forced_orientation() {
            let d = rod
                .center
                .x
                .min(rod.center.y)
                .min(spec.width - 1 - rod.center.x)
                .min(spec.height - 1 - rod.center.y);
            if d < 2 * spec.k && rod.orientation != forced {
                return false;
            }
        }
        let new: HashSet<Site> = rod.footprint(spec.k).collect();
        cfg.rods()
            .iter()
            .all(|r| r.footprint(spec.k).all(|s| !new.contains(&s)))
    }

    #[test]
    fn compatibility_matches_brute_force_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let specs = [
            BoxSpec::new(12, 12, 3, Containment::CenterInBox, BoundaryCondition::Open).unwrap(),
            BoxSpec::new(
                10,
                14,
                4,
                Containment::FullyContained,
                BoundaryCondition::Plus,
            )
            .unwrap(),
            BoxSpec::new(9, 9, 2, Containment::CenterInBox, BoundaryCondition::Minus).unwrap(),
        ];
        for spec in specs {
            let mut cfg = RodConfig::new(spec);
            let random_rod = |rng: &mut ChaCha8Rng| {
                let o = if rng.gen_bool(0.5) {
                    Orientation::Horizontal
                } else {
                    Orientation::Vertical
                };
                Rod::new(
                    o,
                    site(rng.gen_range(0..spec.width), rng.gen_range(0..spec.height)),
                )
            };
            for _ in 0..100_000 / 3 {
                let rod = random_rod(&mut rng);
                assert_eq!(cfg.is_compatible(rod), brute_force_compatible(&cfg, rod));
                // Keep a few rods around so overlap cases actually occur.
                if cfg.is_compatible(rod) && cfg.len() < 6 {
                    cfg.apply(rod).unwrap();
                } else if cfg.len() >= 6 {
                    cfg.remove_at(0);
                }
            }
        }
    }

    #[test]
    fn in_peel_boundary_convention() {
        let spec =
            BoxSpec::square(80, 8, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        assert!(spec.in_peel(site(5, 40)).unwrap()); // distance 5 < 16
        assert!(!spec.in_peel(site(40, 40)).unwrap()); // center
        assert!(!spec.in_peel(site(16, 40)).unwrap()); // exactly 2k is bulk
        assert!(spec.in_peel(site(15, 40)).unwrap());
        assert_eq!(
            spec.in_peel(site(-1, 0)),
            Err(LatticeError::SiteOutsideBox(site(-1, 0)))
        );
        assert_eq!(
            spec.in_peel(site(80, 3)),
            Err(LatticeError::SiteOutsideBox(site(80, 3)))
        );
    }

    #[test]
    fn bulk_rect_matches_in_peel() {
        let spec =
            BoxSpec::square(40, 3, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        let bulk = spec.bulk_rect();
        for s in spec.full_rect().sites() {
            assert_eq!(bulk.contains(s), !spec.in_peel(s).unwrap());
        }
    }

    #[test]
    fn apply_then_remove_is_identity() {
        let spec = open_box(6, 6, 3);
        let mut cfg = RodConfig::new(spec);
        cfg.apply(Rod::horizontal(2, 2)).unwrap();
        let snapshot = cfg.canonical_rods();
        let rod = Rod::vertical(4, 2);
        cfg.apply(rod).unwrap();
        cfg.remove(rod).unwrap();
        assert_eq!(cfg.canonical_rods(), snapshot);
        cfg.validate().unwrap();
    }

    #[test]
    fn apply_incompatible_leaves_config_unchanged() {
        let spec = open_box(6, 6, 3);
        let mut cfg = RodConfig::new(spec);
        cfg.apply(Rod::horizontal(2, 2)).unwrap();
        let before = cfg.canonical_rods();
        let bad = Rod::vertical(2, 2);
        assert_eq!(cfg.apply(bad), Err(LatticeError::IncompatibleRod(bad)));
        assert_eq!(cfg.canonical_rods(), before);
        cfg.validate().unwrap();
    }

    #[test]
    fn remove_absent_rod_errors() {
        let spec = open_box(6, 6, 3);
        let mut cfg = RodConfig::new(spec);
        let rod = Rod::horizontal(2, 2);
        assert_eq!(cfg.remove(rod), Err(LatticeError::RodNotFound(rod)));
        cfg.apply(rod).unwrap();
        // Same footprint cell, different rod value: still not found.
        let other = Rod::horizontal(3, 2);
        assert!(matches!(
            cfg.remove(other),
            Err(LatticeError::RodNotFound(_))
        ));
    }

    #[test]
    fn occupancy_matches_recompute_after_random_walk() {
        let spec =
            BoxSpec::new(10, 10, 3, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        let mut cfg = RodConfig::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for step in 0..10_000 {
            if rng.gen_bool(0.6) || cfg.is_empty() {
                let o = if rng.gen_bool(0.5) {
                    Orientation::Horizontal
                } else {
                    Orientation::Vertical
                };
                let rod = Rod::new(o, site(rng.gen_range(0..10), rng.gen_range(0..10)));
                let _ = cfg.apply(rod);
            } else {
                let i = rng.gen_range(0..cfg.len());
                cfg.remove_at(i);
            }
            if step % 500 == 0 {
                // Independent recompute: union of footprints.
                let mut union: HashMap<Site, usize> = HashMap::new();
                for (i, rod) in cfg.rods().iter().enumerate() {
                    for s in rod.footprint(spec.k) {
                        assert!(union.insert(s, i).is_none(), "hard core broken");
                    }
                }
                for s in spec.full_rect().sites() {
                    match union.get(&s) {
                        Some(&i) => assert_eq!(cfg.occupant(s), Some(cfg.rods()[i])),
                        None => assert_eq!(cfg.occupant(s), None),
                    }
                }
            }
        }
        cfg.validate().unwrap();
    }

    #[test]
    fn bc_closure_under_plus() {
        let spec =
            BoxSpec::square(12, 2, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        let mut cfg = RodConfig::new(spec);
        // Peel is 4 layers on a 12-box: everything within distance < 4.
        assert!(cfg.apply(Rod::vertical(1, 1)).is_err());
        assert!(cfg.apply(Rod::horizontal(1, 1)).is_ok());
        assert!(cfg.apply(Rod::vertical(5, 5)).is_ok()); // bulk site
        for rod in cfg.rods() {
            if spec.in_peel(rod.center).unwrap() {
                assert_eq!(rod.orientation, Orientation::Horizontal);
            }
        }
        cfg.validate().unwrap();
    }

    #[test]
    fn regime_epsilon_examples() {
        let e = regime_epsilon(0.01, 10);
        assert!((e - (-1.0f64).exp()).abs() < 1e-12);
        assert!((e - 0.3679).abs() < 1e-4);

        assert_eq!(regime_epsilon(0.0, 5), 1.0);

        let e = regime_epsilon(0.06, 8);
        assert!((e - 0.48).abs() < 1e-12);
    }

    #[test]
    fn regime_epsilon_monotone_and_continuous_in_z() {
        let k = 8;
        let mut prev = regime_epsilon(0.03, k);
        let mut z = 0.03;
        // On the zk branch (zk >= e^{-zk^2} here) epsilon grows with z.
        while z < 0.5 {
            let next_z = z + 1e-3;
            let next = regime_epsilon(next_z, k);
            assert!(next >= prev - 1e-15);
            assert!((next - prev).abs() < 0.05, "discontinuity near z={z}");
            prev = next;
            z = next_z;
        }
    }

    #[test]
    fn regime_flag_uses_thresholds() {
        let thr = RegimeThresholds {
            epsilon0: 0.5,
            k0: 8,
        };
        assert!(RegimeParams::new(0.06, 8).unwrap().in_regime(thr));
        assert!(!RegimeParams::new(0.2, 8).unwrap().in_regime(thr)); // zk = 1.6
        assert!(!RegimeParams::new(0.06, 4).unwrap().in_regime(thr)); // k too small
        assert!(RegimeParams::new(-1.0, 8).is_err());
    }

    #[test]
    fn box_spec_validation() {
        assert!(BoxSpec::new(0, 5, 2, Containment::CenterInBox, BoundaryCondition::Open).is_err());
        assert!(BoxSpec::new(5, 5, 1, Containment::CenterInBox, BoundaryCondition::Open).is_err());
        let spec =
            BoxSpec::square(33, 8, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        assert!(spec.has_bulk());
        let spec =
            BoxSpec::square(32, 8, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        assert!(!spec.has_bulk());
    }

    #[test]
    fn transpose_preserves_compatibility() {
        let spec = open_box(9, 9, 3);
        let a = Rod::horizontal(4, 2);
        let b = Rod::vertical(2, 4);
        let fa: HashSet<Site> = a.footprint(3).collect();
        let disjoint = b.footprint(3).all(|s| !fa.contains(&s));
        let fat: HashSet<Site> = a.transposed().footprint(3).collect();
        let disjoint_t = b.transposed().footprint(3).all(|s| !fat.contains(&s));
        assert_eq!(disjoint, disjoint_t);
        let _ = spec;
    }
}
