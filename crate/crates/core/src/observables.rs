//! Estimators for density, orientational order, window events, and pair
//! correlations, with a frame recorder that accumulates them along a chain.
//!
//! Under plus/minus boundary conditions every rod centered in the peel is
//! forced by construction, so all bulk-sensitive estimators (density, order
//! parameter, correlations) are evaluated over the non-peel region; under
//! open boundary conditions the whole box is used.

use crate::coarsegrain::SpinField;
use crate::lattice::{site, BoundaryCondition, BoxSpec, Orientation, Rect, RodConfig, Site};
use crate::stats::{block_jackknife, blocking_error, BlockingResult, StatsError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("event window centered at {0} extends outside the box")]
    WindowOutsideBox(Site),
    #[error("event window centered at {0} overlaps the peel under plus/minus bc")]
    WindowInPeel(Site),
    #[error("separation {0} does not fit inside the measurement region")]
    SeparationTooLarge(i32),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The region over which densities, order parameters and correlations are
/// measured: the bulk for plus/minus boundary conditions, the full box for
/// open ones.
pub fn measure_region(spec: &BoxSpec) -> Rect {
    match spec.bc {
        BoundaryCondition::Open => spec.full_rect(),
        _ => spec.bulk_rect(),
    }
}

/// Global center density N / sites.
pub fn density(config: &RodConfig) -> f64 {
    config.len() as f64 / config.spec().sites() as f64
}

/// Center density restricted to a region.
pub fn region_density(config: &RodConfig, region: &Rect) -> f64 {
    if region.is_empty() {
        return 0.0;
    }
    let n = config
        .rods()
        .iter()
        .filter(|r| region.contains(r.center))
        .count();
    n as f64 / region.area() as f64
}

/// Nematic order parameter M = (N_H - N_V) / (N_H + N_V), zero on the empty
/// configuration.
pub fn order_parameter(config: &RodConfig) -> f64 {
    orientation_balance(config.rods().iter().map(|r| r.orientation))
}

/// Order parameter over rods with centers in a region.
pub fn region_order_parameter(config: &RodConfig, region: &Rect) -> f64 {
    orientation_balance(
        config
            .rods()
            .iter()
            .filter(|r| region.contains(r.center))
            .map(|r| r.orientation),
    )
}

fn orientation_balance(orientations: impl Iterator<Item = Orientation>) -> f64 {
    let mut h = 0i64;
    let mut v = 0i64;
    for o in orientations {
        match o {
            Orientation::Horizontal => h += 1,
            Orientation::Vertical => v += 1,
        }
    }
    if h + v == 0 {
        0.0
    } else {
        (h - v) as f64 / (h + v) as f64
    }
}

/// A window event: the rods with centers in a square window of side
/// floor(k/2) are all of the target orientation.
///
/// `min_centers` pins the emptiness convention: 1 (the default) requires at
/// least one center so vacuously-true windows do not count; 0 includes
/// them; 2 is the strengthened event used for monotonicity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSpec {
    pub center: Site,
    pub target: Orientation,
    #[serde(default = "default_min_centers")]
    pub min_centers: u32,
}

fn default_min_centers() -> u32 {
    1
}

impl EventSpec {
    pub fn new(center: Site, target: Orientation) -> Self {
        EventSpec {
            center,
            target,
            min_centers: 1,
        }
    }

    /// The window sites, side floor(k/2), same center convention as rods.
    pub fn window(&self, spec: &BoxSpec) -> Rect {
        let ell = (spec.k / 2).max(1);
        let off = (ell - 1) / 2;
        Rect {
            x0: self.center.x - off,
            y0: self.center.y - off,
            x1: self.center.x - off + ell,
            y1: self.center.y - off + ell,
        }
    }

    /// Windows must lie inside the box; under plus/minus bc they must also
    /// avoid the peel, where the event is decided by the boundary condition
    /// rather than by the measure.
    pub fn validate(&self, spec: &BoxSpec) -> Result<(), ObservableError> {
        let w = self.window(spec);
        let full = spec.full_rect();
        let corners = [
            site(w.x0, w.y0),
            site(w.x1 - 1, w.y0),
            site(w.x0, w.y1 - 1),
            site(w.x1 - 1, w.y1 - 1),
        ];
        if corners.iter().any(|c| !full.contains(*c)) {
            return Err(ObservableError::WindowOutsideBox(self.center));
        }
        if spec.bc != BoundaryCondition::Open {
            let bulk = spec.bulk_rect();
            if corners.iter().any(|c| !bulk.contains(*c)) {
                return Err(ObservableError::WindowInPeel(self.center));
            }
        }
        Ok(())
    }

    /// Event indicator on one configuration.
    pub fn indicator(&self, config: &RodConfig) -> bool {
        let w = self.window(config.spec());
        let mut centers = 0u32;
        for s in w.sites() {
            match config.center_at(s) {
                Some(o) if o == self.target => centers += 1,
                Some(_) => return false,
                None => {}
            }
        }
        centers >= self.min_centers
    }
}

/// Per-frame translation-averaged estimate of <n_x n_{x+a}> for an
/// axis-aligned separation distance, averaged over the two axes. Returns
/// (pair count, number of valid origin sites).
pub fn pair_count(config: &RodConfig, region: &Rect, separation: i32) -> (u64, u64) {
    let mut pairs = 0u64;
    let mut origins = 0u64;
    for &(dx, dy) in &[(separation, 0), (0, separation)] {
        let inner = Rect {
            x0: region.x0,
            y0: region.y0,
            x1: region.x1 - dx,
            y1: region.y1 - dy,
        };
        if inner.is_empty() {
            continue;
        }
        origins += inner.area() as u64;
        // Iterate rods rather than sites: n_x vanishes except at centers.
        for rod in config.rods() {
            let c = rod.center;
            if inner.contains(c) && config.center_at(site(c.x + dx, c.y + dy)).is_some() {
                pairs += 1;
            }
        }
    }
    (pairs, origins)
}

/// A local observable for cluster-property probes. Displacements shift the
/// support: in site units for center indicators, in tile units for spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalObs {
    /// n_x: 1 iff a rod center sits at the site.
    Center(Site),
    /// The coarse-grained spin of a tile, in {-1, 0, +1}.
    TileSpin(usize, usize),
}

impl LocalObs {
    pub fn shifted(&self, d: (i32, i32)) -> LocalObs {
        match *self {
            LocalObs::Center(s) => LocalObs::Center(site(s.x + d.0, s.y + d.1)),
            LocalObs::TileSpin(tx, ty) => {
                LocalObs::TileSpin((tx as i32 + d.0) as usize, (ty as i32 + d.1) as usize)
            }
        }
    }

    pub fn eval(&self, config: &RodConfig, field: Option<&SpinField>) -> f64 {
        match *self {
            LocalObs::Center(s) => config.center_at(s).is_some() as u8 as f64,
            LocalObs::TileSpin(tx, ty) => {
                let f = field.expect("tile-spin observables need a spin field");
                if tx < f.nx && ty < f.ny {
                    f.spin(tx, ty) as f64
                } else {
                    0.0
                }
            }
        }
    }
}

/// Connected correlation <A B_a> - <A><B_a> at one displacement, estimated
/// over stored frames with a block jackknife.
pub fn cluster_probe(
    configs: &[RodConfig],
    a: LocalObs,
    b: LocalObs,
    displacements: &[(i32, i32)],
) -> Result<Vec<ProbePoint>, ObservableError> {
    let needs_field = matches!(a, LocalObs::TileSpin(..)) || matches!(b, LocalObs::TileSpin(..));
    let fields: Vec<Option<SpinField>> = configs
        .iter()
        .map(|c| {
            if needs_field {
                Some(SpinField::from_config(c).expect("valid config"))
            } else {
                None
            }
        })
        .collect();
    let mut out = Vec::new();
    for &d in displacements {
        let b_shift = b.shifted(d);
        let mut ab = Vec::with_capacity(configs.len());
        let mut av = Vec::with_capacity(configs.len());
        let mut bv = Vec::with_capacity(configs.len());
        for (cfg, field) in configs.iter().zip(&fields) {
            let va = a.eval(cfg, field.as_ref());
            let vb = b_shift.eval(cfg, field.as_ref());
            ab.push(va * vb);
            av.push(va);
            bv.push(vb);
        }
        let (estimate, se) = block_jackknife(&[ab, av, bv], 32, |m| m[0] - m[1] * m[2])?;
        out.push(ProbePoint {
            displacement: d,
            estimate,
            se,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub displacement: (i32, i32),
    pub estimate: f64,
    pub se: f64,
}

/// What the recorder measures each frame.
#[derive(Debug, Clone, Default)]
pub struct RecorderSpec {
    pub windows: Vec<EventSpec>,
    pub separations: Vec<i32>,
    /// Keep per-frame spin fields (needed for contour statistics).
    pub collect_spin_fields: bool,
}

impl RecorderSpec {
    pub fn validate(&self, spec: &BoxSpec) -> Result<(), ObservableError> {
        for w in &self.windows {
            w.validate(spec)?;
        }
        let region = measure_region(spec);
        for &s in &self.separations {
            if s <= 0 || (s >= region.width() && s >= region.height()) {
                return Err(ObservableError::SeparationTooLarge(s));
            }
        }
        Ok(())
    }

    /// Default separations: axis-aligned multiples of floor(k/2) up to 4k.
    pub fn default_separations(k: i32) -> Vec<i32> {
        let ell = (k / 2).max(1);
        (1..=8).map(|m| m * ell).collect()
    }
}

/// Column-oriented per-frame measurements from one chain.
#[derive(Debug, Clone, Default)]
pub struct FrameSeries {
    pub sweeps: Vec<u64>,
    pub n: Vec<f64>,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    /// One indicator series per requested window.
    pub events: Vec<Vec<f64>>,
    /// One (pair fraction per origin site) series per separation.
    pub pair_fractions: Vec<Vec<f64>>,
    /// Region density series used by the correlation estimator.
    pub region_rho: Vec<f64>,
}

impl FrameSeries {
    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }
}

/// Accumulates the standard observables along a chain. Every frame is also
/// coarse-grained, which enforces the tile-exclusivity invariant on the
/// whole trajectory; violations count in `mixed_tile_violations` and panic
/// immediately (they indicate a hard-core bug, not a statistics issue).
pub struct Recorder {
    spec: BoxSpec,
    region: Rect,
    recorder_spec: RecorderSpec,
    pub series: FrameSeries,
    pub spin_fields: Vec<SpinField>,
    pub frames_checked: u64,
    pub mixed_tile_violations: u64,
}

impl Recorder {
    pub fn new(spec: BoxSpec, recorder_spec: RecorderSpec) -> Result<Self, ObservableError> {
        recorder_spec.validate(&spec)?;
        let series = FrameSeries {
            events: vec![Vec::new(); recorder_spec.windows.len()],
            pair_fractions: vec![Vec::new(); recorder_spec.separations.len()],
            ..Default::default()
        };
        Ok(Recorder {
            region: measure_region(&spec),
            spec,
            recorder_spec,
            series,
            spin_fields: Vec::new(),
            frames_checked: 0,
            mixed_tile_violations: 0,
        })
    }

    pub fn record(&mut self, sweep: u64, config: &RodConfig) {
        self.series.sweeps.push(sweep);
        self.series.n.push(config.len() as f64);
        self.series.rho.push(density(config));
        self.series
            .m
            .push(region_order_parameter(config, &self.region));
        self.series
            .region_rho
            .push(region_density(config, &self.region));
        for (i, w) in self.recorder_spec.windows.iter().enumerate() {
            self.series.events[i].push(w.indicator(config) as u8 as f64);
        }
        for (i, &sep) in self.recorder_spec.separations.iter().enumerate() {
            let (pairs, origins) = pair_count(config, &self.region, sep);
            let frac = if origins == 0 {
                0.0
            } else {
                pairs as f64 / origins as f64
            };
            self.series.pair_fractions[i].push(frac);
        }
        self.frames_checked += 1;
        match SpinField::from_config(config) {
            Ok(field) => {
                if self.recorder_spec.collect_spin_fields {
                    self.spin_fields.push(field);
                }
            }
            Err(e) => {
                self.mixed_tile_violations += 1;
                panic!("tile exclusivity violated at sweep {sweep}: {e}");
            }
        }
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn windows(&self) -> &[EventSpec] {
        &self.recorder_spec.windows
    }

    pub fn separations(&self) -> &[i32] {
        &self.recorder_spec.separations
    }

    /// Blocking summary of one scalar column.
    pub fn summarize(values: &[f64]) -> Result<BlockingResult, StatsError> {
        blocking_error(values)
    }

    /// Truncated pair correlation <n_x n_{x+a}> - rho^2 per separation, with
    /// block-jackknife errors.
    pub fn truncated_correlations(&self) -> Result<Vec<CorrelationPoint>, ObservableError> {
        let mut out = Vec::new();
        for (i, &sep) in self.recorder_spec.separations.iter().enumerate() {
            let (estimate, se) = block_jackknife(
                &[
                    self.series.pair_fractions[i].clone(),
                    self.series.region_rho.clone(),
                ],
                32,
                |m| m[0] - m[1] * m[1],
            )?;
            let raw = crate::stats::mean(&self.series.pair_fractions[i]);
            out.push(CorrelationPoint {
                separation: sep,
                raw,
                truncated: estimate,
                se,
            });
        }
        Ok(out)
    }

    /// Event probability for window `i` with a blocking error.
    pub fn event_probability(&self, i: usize) -> Result<BlockingResult, StatsError> {
        blocking_error(&self.series.events[i])
    }

    /// Pooled probability that any of the windows fires, averaged per frame
    /// across windows first (windows are strongly correlated in-frame).
    pub fn pooled_event_probability(&self) -> Result<BlockingResult, StatsError> {
        let n_windows = self.series.events.len();
        assert!(n_windows > 0, "no windows registered");
        let frames = self.series.len();
        let mut pooled = Vec::with_capacity(frames);
        for f in 0..frames {
            let s: f64 = self.series.events.iter().map(|w| w[f]).sum();
            pooled.push(s / n_windows as f64);
        }
        blocking_error(&pooled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationPoint {
    pub separation: i32,
    /// Translation-averaged <n_x n_{x+a}>.
    pub raw: f64,
    /// raw - rho^2.
    pub truncated: f64,
    pub se: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Containment, Rod};
    use crate::oracle::exact_expectation;
    use crate::sampler::{run_chain, SamplerParams};

    fn open_box(side: i32, k: i32) -> BoxSpec {
        BoxSpec::square(
            side,
            k,
            Containment::FullyContained,
            BoundaryCondition::Open,
        )
        .unwrap()
    }

    #[test]
    fn density_of_empty_config_is_zero() {
        let cfg = RodConfig::new(open_box(4, 2));
        assert_eq!(density(&cfg), 0.0);
    }

    #[test]
    fn center_sum_equals_rod_count() {
        let spec = open_box(8, 2);
        let mut cfg = RodConfig::new(spec);
        cfg.apply(Rod::horizontal(0, 0)).unwrap();
        cfg.apply(Rod::vertical(5, 3)).unwrap();
        cfg.apply(Rod::horizontal(2, 6)).unwrap();
        let total: usize = spec
            .full_rect()
            .sites()
            .filter(|&s| cfg.center_at(s).is_some())
            .count();
        assert_eq!(total, cfg.len());
    }

    #[test]
    fn order_parameter_limits() {
        let spec = open_box(8, 2);
        let mut cfg = RodConfig::new(spec);
        assert_eq!(order_parameter(&cfg), 0.0); // defined as 0 when empty
        cfg.apply(Rod::horizontal(0, 0)).unwrap();
        cfg.apply(Rod::horizontal(0, 2)).unwrap();
        assert_eq!(order_parameter(&cfg), 1.0);
        cfg.apply(Rod::vertical(5, 4)).unwrap();
        cfg.apply(Rod::vertical(7, 4)).unwrap();
        assert_eq!(order_parameter(&cfg), 0.0);
    }

    #[test]
    fn order_parameter_is_odd_under_relabeling() {
        let spec = open_box(9, 3);
        let mut cfg = RodConfig::new(spec);
        cfg.apply(Rod::horizontal(4, 1)).unwrap();
        cfg.apply(Rod::horizontal(4, 3)).unwrap();
        cfg.apply(Rod::vertical(1, 5)).unwrap();
        let mut flipped = RodConfig::new(spec);
        for r in cfg.rods() {
            flipped.apply(r.transposed()).unwrap();
        }
        assert_eq!(order_parameter(&flipped), -order_parameter(&cfg));
        assert_eq!(density(&flipped), density(&cfg));
    }

    #[test]
    fn reflection_trick_cancels_m_exactly() {
        // On a square open box, pairing every frame with its transpose makes
        // the averaged order parameter identically zero.
        let spec =
            BoxSpec::square(6, 2, Containment::CenterInBox, BoundaryCondition::Open).unwrap();
        let params = SamplerParams::new(0.4, 64, 8, 77);
        let mut total = 0.0;
        run_chain(spec, &params, 0, |_, cfg| {
            let mut reflected = RodConfig::new(spec);
            for r in cfg.rods() {
                reflected.apply(r.transposed()).unwrap();
            }
            total += order_parameter(cfg) + order_parameter(&reflected);
        })
        .unwrap();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn event_window_geometry_and_validation() {
        let spec =
            BoxSpec::square(80, 8, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        // ell = 4, so a window centered at (40, 40) covers [39,43) x [39,43).
        let ev = EventSpec::new(site(40, 40), Orientation::Vertical);
        let w = ev.window(&spec);
        assert_eq!((w.x0, w.y0, w.x1, w.y1), (39, 39, 43, 43));
        assert!(ev.validate(&spec).is_ok());
        // Peel is 16 deep; bulk starts at x=16. A window centered at (17,40)
        // spans [16,20) and just fits; centered at (16,40) it dips to x=15.
        assert!(EventSpec::new(site(17, 40), Orientation::Vertical)
            .validate(&spec)
            .is_ok());
        let bad = EventSpec::new(site(16, 40), Orientation::Vertical);
        assert_eq!(
            bad.validate(&spec),
            Err(ObservableError::WindowInPeel(site(16, 40)))
        );
        let outside = EventSpec::new(site(0, 0), Orientation::Vertical);
        assert!(matches!(
            outside.validate(&spec),
            Err(ObservableError::WindowOutsideBox(_))
        ));
    }

    #[test]
    fn event_indicator_conventions() {
        let spec = open_box(12, 4); // ell = 2
        let mut cfg = RodConfig::new(spec);
        let ev = EventSpec::new(site(6, 6), Orientation::Vertical);
        // Empty window: false under min_centers = 1, true under 0.
        assert!(!ev.indicator(&cfg));
        let vacuous = EventSpec {
            min_centers: 0,
            ..ev
        };
        assert!(vacuous.indicator(&cfg));
        // One vertical center inside the window at (6,6).
        cfg.apply(Rod::vertical(6, 6)).unwrap();
        assert!(ev.indicator(&cfg));
        // A horizontal center in the window kills the event.
        let mut cfg2 = RodConfig::new(spec);
        cfg2.apply(Rod::horizontal(5, 6)).unwrap(); // covers window site (5,6)? center (5,6) window x in [5,7)
        assert!(!EventSpec::new(site(6, 6), Orientation::Vertical).indicator(&cfg2));
    }

    #[test]
    fn strengthening_min_centers_is_monotone() {
        let spec = open_box(12, 4);
        let params = SamplerParams::new(0.3, 300, 30, 5);
        let base = EventSpec::new(site(6, 6), Orientation::Vertical);
        let strict = EventSpec {
            min_centers: 2,
            ..base
        };
        let mut hits = (0u64, 0u64);
        run_chain(spec, &params, 0, |_, cfg| {
            let weak = base.indicator(cfg);
            let strong = strict.indicator(cfg);
            assert!(!strong || weak, "strict event outside the weak one");
            hits.0 += weak as u64;
            hits.1 += strong as u64;
        })
        .unwrap();
        assert!(hits.1 <= hits.0);
    }

    #[test]
    fn tiny_box_event_probability_matches_oracle() {
        // 4x4 dimers, open bc: compare the chain frequency of the event to
        // the enumerated expectation of its indicator.
        let spec = open_box(4, 2);
        let ev = EventSpec::new(site(1, 1), Orientation::Vertical); // ell=1 window
        let z = 0.5;
        let exact = exact_expectation(&spec, z, |cfg| ev.indicator(cfg) as u8 as f64).unwrap();
        let mut params = SamplerParams::new(z, 40_000, 500, 21);
        params.measurement_interval = 1;
        let mut series = Vec::new();
        run_chain(spec, &params, 0, |_, cfg| {
            series.push(ev.indicator(cfg) as u8 as f64);
        })
        .unwrap();
        let r = blocking_error(&series).unwrap();
        assert!(
            (r.mean - exact).abs() < 4.0 * r.se.max(1e-4),
            "chain {} vs exact {} (se {})",
            r.mean,
            exact,
            r.se
        );
    }

    #[test]
    fn pair_count_tiny_box_matches_oracle() {
        let spec = open_box(4, 2);
        let z = 0.5;
        let region = measure_region(&spec);
        let sep = 2;
        // Oracle route: exact expectation of the translation-averaged
        // pair fraction (a linear observable, so expectations commute).
        let exact = exact_expectation(&spec, z, |cfg| {
            let (p, o) = pair_count(cfg, &region, sep);
            p as f64 / o as f64
        })
        .unwrap();
        let mut params = SamplerParams::new(z, 40_000, 500, 23);
        params.measurement_interval = 1;
        let mut series = Vec::new();
        run_chain(spec, &params, 0, |_, cfg| {
            let (p, o) = pair_count(cfg, &region, sep);
            series.push(p as f64 / o as f64);
        })
        .unwrap();
        let r = blocking_error(&series).unwrap();
        assert!(
            (r.mean - exact).abs() < 4.0 * r.se.max(1e-4),
            "chain {} vs exact {}",
            r.mean,
            exact
        );
    }

    #[test]
    fn pair_fraction_is_zero_at_zero_activity() {
        let spec = open_box(12, 4);
        let mut rec = Recorder::new(
            spec,
            RecorderSpec {
                windows: vec![],
                separations: vec![2, 4],
                collect_spin_fields: false,
            },
        )
        .unwrap();
        let params = SamplerParams::new(0.0, 32, 0, 9);
        run_chain(spec, &params, 0, |sweep, cfg| rec.record(sweep, cfg)).unwrap();
        assert!(rec.series.pair_fractions[0].iter().all(|&v| v == 0.0));
        assert!(rec.series.rho.iter().all(|&v| v == 0.0));
        let corr = rec.truncated_correlations().unwrap();
        assert!(corr.iter().all(|c| c.truncated == 0.0 && c.se == 0.0));
    }

    #[test]
    fn cluster_probe_of_constants_is_exactly_zero() {
        // A tile-spin observable on an all-horizontal frozen trajectory is
        // constant (+1), so the connected correlation vanishes identically.
        let spec =
            BoxSpec::square(16, 4, Containment::CenterInBox, BoundaryCondition::Open).unwrap();
        let mut cfg = RodConfig::new(spec);
        for y in 0..16 {
            for x in [2, 9] {
                cfg.apply(Rod::horizontal(x, y)).unwrap();
            }
        }
        let frames = vec![cfg; 64];
        let pts = cluster_probe(
            &frames,
            LocalObs::TileSpin(1, 1),
            LocalObs::TileSpin(1, 1),
            &[(1, 0), (2, 0)],
        )
        .unwrap();
        for p in pts {
            assert_eq!(p.estimate, 0.0);
            assert_eq!(p.se, 0.0);
        }
    }

    #[test]
    fn cluster_probe_center_pair_matches_oracle() {
        let spec = open_box(4, 2);
        let z = 0.5;
        let a = site(1, 1);
        let b = site(2, 2);
        let exact_ab = exact_expectation(&spec, z, |c| {
            (c.center_at(a).is_some() && c.center_at(b).is_some()) as u8 as f64
        })
        .unwrap();
        let exact_a =
            exact_expectation(&spec, z, |c| c.center_at(a).is_some() as u8 as f64).unwrap();
        let exact_b =
            exact_expectation(&spec, z, |c| c.center_at(b).is_some() as u8 as f64).unwrap();
        let exact_conn = exact_ab - exact_a * exact_b;

        let mut params = SamplerParams::new(z, 30_000, 500, 31);
        params.measurement_interval = 1;
        let mut frames = Vec::new();
        run_chain(spec, &params, 0, |_, cfg| frames.push(cfg.clone())).unwrap();
        let pts = cluster_probe(
            &frames,
            LocalObs::Center(a),
            LocalObs::Center(site(0, 0)),
            &[(b.x, b.y)],
        )
        .unwrap();
        assert!(
            (pts[0].estimate - exact_conn).abs() < 4.0 * pts[0].se.max(1e-4),
            "probe {} vs exact {}",
            pts[0].estimate,
            exact_conn
        );
    }

    #[test]
    fn recorder_validates_windows_and_separations() {
        let spec =
            BoxSpec::square(80, 8, Containment::CenterInBox, BoundaryCondition::Plus).unwrap();
        let bad_window = RecorderSpec {
            windows: vec![EventSpec::new(site(5, 40), Orientation::Vertical)],
            separations: vec![],
            collect_spin_fields: false,
        };
        assert!(Recorder::new(spec, bad_window).is_err());
        let bad_sep = RecorderSpec {
            windows: vec![],
            separations: vec![500],
            collect_spin_fields: false,
        };
        assert!(Recorder::new(spec, bad_sep).is_err());
    }

    #[test]
    fn default_separations_scale_with_k() {
        assert_eq!(
            RecorderSpec::default_separations(8),
            vec![4, 8, 12, 16, 20, 24, 28, 32]
        );
    }
}
