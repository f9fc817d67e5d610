//! Grand-canonical Metropolis-Hastings chain targeting the Gibbs weight
//! z^|R| under the selected boundary condition.
//!
//! Insertions draw an orientation uniformly from 2 and a center uniformly
//! from the box's S sites and accept with min(1, 2Sz/(N+1)); deletions pick
//! a rod uniformly and accept with min(1, N/(2Sz)). With equal insert and
//! delete proposal probabilities the pair satisfies detailed balance
//! exactly. Translations and rotations are weight-neutral self-inverse
//! proposals accepted iff compatible; one sweep is S elementary moves.

use crate::lattice::{site, BoxSpec, LatticeError, Orientation, Rod, RodConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("move mix must be nonnegative and sum to 1, got {0:?}")]
    BadMoveMix(MoveMix),
    #[error(
        "insert and delete probabilities must be equal for detailed balance, got {insert} vs {delete}"
    )]
    UnbalancedInsertDelete { insert: f64, delete: f64 },
    #[error("sweeps must be positive")]
    NoSweeps,
    #[error("measurement interval must be positive")]
    BadMeasurementInterval,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Proposal probabilities for the four elementary move types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveMix {
    pub insert: f64,
    pub delete: f64,
    pub translate: f64,
    pub rotate: f64,
}

impl Default for MoveMix {
    fn default() -> Self {
        MoveMix {
            insert: 0.4,
            delete: 0.4,
            translate: 0.1,
            rotate: 0.1,
        }
    }
}

impl MoveMix {
    /// Insert/delete only, for kernels that must stay inside the
    /// grand-canonical pair.
    pub fn insert_delete_only() -> Self {
        MoveMix {
            insert: 0.5,
            delete: 0.5,
            translate: 0.0,
            rotate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let parts = [self.insert, self.delete, self.translate, self.rotate];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SamplerError::BadMoveMix(*self));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SamplerError::BadMoveMix(*self));
        }
        if (self.insert - self.delete).abs() > 1e-12 {
            return Err(SamplerError::UnbalancedInsertDelete {
                insert: self.insert,
                delete: self.delete,
            });
        }
        Ok(())
    }
}

/// Chain start. `Empty` relies on move legality to enforce the boundary
/// condition; `SeededNematic` pre-fills the box with sparse rods of the
/// bc-favored orientation to shortcut the slow ordering dynamics at large k.
/// Both starts must agree within errors, which doubles as an equilibration
/// test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    Empty,
    SeededNematic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Per-rod activity.
    pub z: f64,
    /// Production sweeps after thermalization.
    pub sweeps: u64,
    /// Discarded sweeps before measurements start.
    pub thermalization: u64,
    pub seed: u64,
    pub move_mix: MoveMix,
    /// Sweeps between successive measurements.
    pub measurement_interval: u64,
    pub init: InitMode,
}

impl SamplerParams {
    pub fn new(z: f64, sweeps: u64, thermalization: u64, seed: u64) -> Self {
        SamplerParams {
            z,
            sweeps,
            thermalization,
            seed,
            move_mix: MoveMix::default(),
            measurement_interval: 1,
            init: InitMode::Empty,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.z < 0.0 || !self.z.is_finite() {
            return Err(LatticeError::NegativeActivity(self.z).into());
        }
        if self.sweeps == 0 {
            return Err(SamplerError::NoSweeps);
        }
        if self.measurement_interval == 0 {
            return Err(SamplerError::BadMeasurementInterval);
        }
        self.move_mix.validate()
    }
}

/// Acceptance probability for inserting into a state with n rods.
pub fn insertion_acceptance(sites: f64, z: f64, n: usize) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    (2.0 * sites * z / (n as f64 + 1.0)).min(1.0)
}

/// Acceptance probability for deleting from a state with n >= 1 rods.
pub fn deletion_acceptance(sites: f64, z: f64, n: usize) -> f64 {
    if z == 0.0 {
        // Deleting from z=0 states is always downhill.
        return 1.0;
    }
    (n as f64 / (2.0 * sites * z)).min(1.0)
}

pub const MOVE_KINDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Insert = 0,
    Delete = 1,
    Translate = 2,
    Rotate = 3,
}

pub const MOVE_KIND_NAMES: [&str; MOVE_KINDS] = ["insert", "delete", "translate", "rotate"];

/// Per-kind attempt/accept counters; merging across chains is additive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempts: [u64; MOVE_KINDS],
    pub accepts: [u64; MOVE_KINDS],
}

impl MoveStats {
    pub fn acceptance_rate(&self, kind: MoveKind) -> f64 {
        let i = kind as usize;
        if self.attempts[i] == 0 {
            0.0
        } else {
            self.accepts[i] as f64 / self.attempts[i] as f64
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for i in 0..MOVE_KINDS {
            self.attempts[i] += other.attempts[i];
            self.accepts[i] += other.accepts[i];
        }
    }
}

/// One Markov chain: configuration, counters and RNG state. The RNG is a
/// counter-based ChaCha generator; per-chain streams are derived from
/// (seed, chain index) so parallel chains never share randomness.
pub struct ChainState {
    pub config: RodConfig,
    pub sweeps_done: u64,
    pub moves_done: u64,
    pub stats: MoveStats,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new(spec: BoxSpec, params: &SamplerParams, chain_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(chain_index);
        let mut config = RodConfig::new(spec);
        if params.init == InitMode::SeededNematic {
            seed_nematic(&mut config);
        }
        ChainState {
            config,
            sweeps_done: 0,
            moves_done: 0,
            stats: MoveStats::default(),
            rng,
        }
    }

    fn random_rod(&mut self) -> Rod {
        let spec = *self.config.spec();
        let orientation = if self.rng.gen_bool(0.5) {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        Rod::new(
            orientation,
            site(
                self.rng.gen_range(0..spec.width),
                self.rng.gen_range(0..spec.height),
            ),
        )
    }

    /// Insertion proposal; returns whether the move was accepted.
    pub fn propose_insertion(&mut self, z: f64) -> bool {
        self.stats.attempts[MoveKind::Insert as usize] += 1;
        let rod = self.random_rod();
        if !self.config.is_compatible(rod) {
            return false;
        }
        let sites = self.config.spec().sites() as f64;
        let acc = insertion_acceptance(sites, z, self.config.len());
        if acc >= 1.0 || self.rng.gen::<f64>() < acc {
            self.config.apply(rod).expect("checked compatible");
            self.stats.accepts[MoveKind::Insert as usize] += 1;
            true
        } else {
            false
        }
    }

    /// Deletion proposal; rejects outright on the empty configuration.
    pub fn propose_deletion(&mut self, z: f64) -> bool {
        self.stats.attempts[MoveKind::Delete as usize] += 1;
        let n = self.config.len();
        if n == 0 {
            return false;
        }
        let idx = self.rng.gen_range(0..n);
        let sites = self.config.spec().sites() as f64;
        let acc = deletion_acceptance(sites, z, n);
        if acc >= 1.0 || self.rng.gen::<f64>() < acc {
            self.config.remove_at(idx);
            self.stats.accepts[MoveKind::Delete as usize] += 1;
            true
        } else {
            false
        }
    }

    /// Displace a uniformly chosen rod by one site along a uniformly chosen
    /// axis and sign; accepted iff the moved rod stays compatible.
    pub fn propose_translation(&mut self) -> bool {
        self.stats.attempts[MoveKind::Translate as usize] += 1;
        let n = self.config.len();
        if n == 0 {
            return false;
        }
        let idx = self.rng.gen_range(0..n);
        let (dx, dy) = match self.rng.gen_range(0..4u8) {
            0 => (1, 0),
            1 => (-1, 0),
            2 => (0, 1),
            _ => (0, -1),
        };
        let moved = self.config.rods()[idx].translated(dx, dy);
        if self.config.try_replace(idx, moved) {
            self.stats.accepts[MoveKind::Translate as usize] += 1;
            true
        } else {
            false
        }
    }

    /// Flip a uniformly chosen rod's orientation about its center; accepted
    /// iff compatible, boundary-condition legality included.
    pub fn propose_rotation(&mut self) -> bool {
        self.stats.attempts[MoveKind::Rotate as usize] += 1;
        let n = self.config.len();
        if n == 0 {
            return false;
        }
        let idx = self.rng.gen_range(0..n);
        let flipped = self.config.rods()[idx].flipped();
        if self.config.try_replace(idx, flipped) {
            self.stats.accepts[MoveKind::Rotate as usize] += 1;
            true
        } else {
            false
        }
    }

    pub fn elementary_move(&mut self, params: &SamplerParams) {
        let mix = params.move_mix;
        let u: f64 = self.rng.gen();
        if u < mix.insert {
            self.propose_insertion(params.z);
        } else if u < mix.insert + mix.delete {
            self.propose_deletion(params.z);
        } else if u < mix.insert + mix.delete + mix.translate {
            self.propose_translation();
        } else {
            self.propose_rotation();
        }
        self.moves_done += 1;
    }

    /// One sweep = S elementary moves, followed by a full invariant check.
    pub fn sweep(&mut self, params: &SamplerParams) {
        let moves = self.config.spec().sites() as u64;
        for _ in 0..moves {
            self.elementary_move(params);
        }
        self.sweeps_done += 1;
        self.config
            .validate()
            .expect("chain state violated configuration invariants");
    }
}

/// Sparse deterministic fill with the bc-favored orientation (horizontal
/// under open bc). Spacing 2k along the rod axis and 2 across it keeps the
/// start trivially compatible at roughly 1/(4k) centers per site.
fn seed_nematic(config: &mut RodConfig) {
    let spec = *config.spec();
    let favored = spec
        .bc
        .forced_orientation()
        .unwrap_or(Orientation::Horizontal);
    let step = 2 * spec.k;
    for y in (0..spec.height).step_by(2) {
        for x in (0..spec.width).step_by(step.max(1) as usize) {
            let rod = match favored {
                Orientation::Horizontal => Rod::horizontal(x, y),
                Orientation::Vertical => {
                    Rod::vertical(y.min(spec.width - 1), x.min(spec.height - 1))
                }
            };
            let _ = config.apply(rod);
        }
    }
}

/// Run a chain: thermalize, then call `on_measure` with (sweep index,
/// configuration) every `measurement_interval` production sweeps. The
/// trajectory is a pure function of (box, params, chain_index).
pub fn run_chain<F>(
    spec: BoxSpec,
    params: &SamplerParams,
    chain_index: u64,
    mut on_measure: F,
) -> Result<ChainState, SamplerError>
where
    F: FnMut(u64, &RodConfig),
{
    params.validate()?;
    let mut state = ChainState::new(spec, params, chain_index);
    for _ in 0..params.thermalization {
        state.sweep(params);
    }
    for s in 0..params.sweeps {
        state.sweep(params);
        if (s + 1) % params.measurement_interval == 0 {
            on_measure(state.sweeps_done, &state.config);
        }
    }
    Ok(state)
}

/// The exact one-step distribution of the chain's Markov kernel from a given
/// state: every reachable successor with its probability, plus the residual
/// "stay" mass. Mirrors `elementary_move` branch by branch; used to verify
/// stationarity against the enumerated Gibbs measure.
pub fn transition_distribution(
    spec: &BoxSpec,
    params: &SamplerParams,
    config: &RodConfig,
) -> Vec<(RodConfig, f64)> {
    let mix = params.move_mix;
    let z = params.z;
    let sites = spec.sites() as f64;
    let n = config.len();
    let mut out: Vec<(RodConfig, f64)> = Vec::new();
    let mut stay = 0.0;

    // Insertion: orientation 1/2, center 1/(S).
    if mix.insert > 0.0 {
        let per_proposal = mix.insert / (2.0 * sites);
        let mut moved = 0.0;
        for orientation in [Orientation::Horizontal, Orientation::Vertical] {
            for y in 0..spec.height {
                for x in 0..spec.width {
                    let rod = Rod::new(orientation, site(x, y));
                    if config.is_compatible(rod) {
                        let acc = insertion_acceptance(sites, z, n);
                        if acc > 0.0 {
                            let mut next = config.clone();
                            next.apply(rod).expect("checked compatible");
                            out.push((next, per_proposal * acc));
                            moved += per_proposal * acc;
                        }
                    }
                }
            }
        }
        stay += mix.insert - moved;
    }

    // Deletion: rod 1/N.
    if mix.delete > 0.0 {
        if n == 0 {
            stay += mix.delete;
        } else {
            let acc = deletion_acceptance(sites, z, n);
            let per_rod = mix.delete / n as f64;
            for idx in 0..n {
                let mut next = config.clone();
                next.remove_at(idx);
                out.push((next, per_rod * acc));
            }
            stay += mix.delete * (1.0 - acc);
        }
    }

    // Translation: rod 1/N, four directions 1/4 each.
    if mix.translate > 0.0 {
        if n == 0 {
            stay += mix.translate;
        } else {
            let per = mix.translate / (n as f64 * 4.0);
            let mut moved = 0.0;
            for idx in 0..n {
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let candidate = config.rods()[idx].translated(dx, dy);
                    let mut next = config.clone();
                    if next.try_replace(idx, candidate) {
                        out.push((next, per));
                        moved += per;
                    }
                }
            }
            stay += mix.translate - moved;
        }
    }

    // Rotation: rod 1/N.
    if mix.rotate > 0.0 {
        if n == 0 {
            stay += mix.rotate;
        } else {
            let per = mix.rotate / n as f64;
            let mut moved = 0.0;
            for idx in 0..n {
                let candidate = config.rods()[idx].flipped();
                let mut next = config.clone();
                if next.try_replace(idx, candidate) {
                    out.push((next, per));
                    moved += per;
                }
            }
            stay += mix.rotate - moved;
        }
    }

    out.push((config.clone(), stay));
    out
}
