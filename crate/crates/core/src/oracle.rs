//! Exact enumeration of rod configurations on tiny boxes.
//!
//! Every hard-core- and bc-compatible configuration is visited exactly once
//! by a depth-first walk over candidate rod positions in a fixed order
//! (row-major, horizontal before vertical), which makes the stream
//! deterministic and reproducible. The partition polynomial collects the
//! exact per-rod-count coefficients, and serves as ground truth for the
//! sampler and the estimators.

use crate::lattice::{site, BoxSpec, LatticeError, Orientation, Rod, RodConfig};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error(
        "state space too large: {positions} candidate rod positions (limit {limit}), \
         up to 2^{positions} subsets"
    )]
    StateSpaceTooLarge { positions: usize, limit: usize },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Default cap on candidate positions; 2^32 subsets is the absolute worst
/// case before hard-core pruning, which in practice cuts far below it.
pub const DEFAULT_POSITION_LIMIT: usize = 32;

/// All single-rod placements legal for the box (containment and boundary
/// condition), in canonical order: horizontal rods row-major, then vertical.
pub fn candidate_positions(spec: &BoxSpec) -> Vec<Rod> {
    let mut out = Vec::new();
    for orientation in [Orientation::Horizontal, Orientation::Vertical] {
        for y in 0..spec.height {
            for x in 0..spec.width {
                let rod = Rod::new(orientation, site(x, y));
                if spec.rod_allowed(rod) {
                    out.push(rod);
                }
            }
        }
    }
    out
}

/// Lazy stream over every allowed configuration, the empty one included.
///
/// Configurations are yielded in lexicographic order of their sorted
/// position-index sets; each one appears exactly once.
pub struct ConfigStream {
    positions: Vec<Rod>,
    config: RodConfig,
    applied: Vec<usize>,
    next: usize,
    emitted_empty: bool,
    done: bool,
}

impl ConfigStream {
    fn new(spec: BoxSpec, positions: Vec<Rod>) -> Self {
        ConfigStream {
            positions,
            config: RodConfig::new(spec),
            applied: Vec::new(),
            next: 0,
            emitted_empty: false,
            done: false,
        }
    }

    pub fn positions(&self) -> &[Rod] {
        &self.positions
    }
}

impl Iterator for ConfigStream {
    type Item = RodConfig;

    fn next(&mut self) -> Option<RodConfig> {
        if self.done {
            return None;
        }
        if !self.emitted_empty {
            self.emitted_empty = true;
            return Some(self.config.clone());
        }
        loop {
            // Extend the current set with the next compatible position.
            while self.next < self.positions.len() {
                let i = self.next;
                self.next += 1;
                if self.config.is_compatible(self.positions[i]) {
                    self.config
                        .apply(self.positions[i])
                        .expect("compatible rod must apply");
                    self.applied.push(i);
                    return Some(self.config.clone());
                }
            }
            // Exhausted: backtrack the deepest choice.
            match self.applied.pop() {
                Some(i) => {
                    self.config
                        .remove(self.positions[i])
                        .expect("applied rod must be removable");
                    self.next = i + 1;
                }
                None => {
                    self.done = true;
                    return None;
                }
            }
        }
    }
}

/// Enumerate all configurations, guarding against infeasible state spaces.
pub fn enumerate_configs(spec: &BoxSpec) -> Result<ConfigStream, OracleError> {
    enumerate_configs_with_limit(spec, DEFAULT_POSITION_LIMIT)
}

/// Same as [`enumerate_configs`] with an explicit position cap; raising the
/// cap past the default is an informed override.
pub fn enumerate_configs_with_limit(
    spec: &BoxSpec,
    limit: usize,
) -> Result<ConfigStream, OracleError> {
    let positions = candidate_positions(spec);
    if positions.len() > limit {
        return Err(OracleError::StateSpaceTooLarge {
            positions: positions.len(),
            limit,
        });
    }
    Ok(ConfigStream::new(*spec, positions))
}

/// The grand-canonical partition function as a polynomial in the activity:
/// coefficient `n` counts the allowed configurations with exactly `n` rods.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionPolynomial {
    pub coefficients: Vec<u64>,
}

impl PartitionPolynomial {
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn total_configs(&self) -> u64 {
        self.coefficients.iter().sum()
    }

    /// Z(z) by Horner evaluation in double precision.
    pub fn evaluate(&self, z: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * z + c as f64)
    }

    /// z d/dz log Z, the exact mean rod count at activity z.
    pub fn mean_rod_count(&self, z: f64) -> f64 {
        let num: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (n, &c)| acc * z + n as f64 * c as f64);
        num / self.evaluate(z)
    }
}

pub fn partition_polynomial(spec: &BoxSpec) -> Result<PartitionPolynomial, OracleError> {
    partition_polynomial_with_limit(spec, DEFAULT_POSITION_LIMIT)
}

pub fn partition_polynomial_with_limit(
    spec: &BoxSpec,
    limit: usize,
) -> Result<PartitionPolynomial, OracleError> {
    let mut coefficients: Vec<u64> = Vec::new();
    for cfg in enumerate_configs_with_limit(spec, limit)? {
        let n = cfg.len();
        if coefficients.len() <= n {
            coefficients.resize(n + 1, 0);
        }
        coefficients[n] += 1;
    }
    Ok(PartitionPolynomial { coefficients })
}

/// Exact Gibbs expectation of an arbitrary observable at activity z:
/// sum_R z^|R| A(R) / sum_R z^|R| over the bc-constrained ensemble.
pub fn exact_expectation<A>(spec: &BoxSpec, z: f64, observable: A) -> Result<f64, OracleError>
where
    A: Fn(&RodConfig) -> f64,
{
    if z < 0.0 || !z.is_finite() {
        return Err(OracleError::Lattice(LatticeError::NegativeActivity(z)));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for cfg in enumerate_configs(spec)? {
        let w = z.powi(cfg.len() as i32);
        num += w * observable(&cfg);
        den += w;
    }
    Ok(num / den)
}

/// Exact Gibbs probabilities over the enumerated states, keyed by canonical
/// rod list, in enumeration order.
pub fn gibbs_distribution(
    spec: &BoxSpec,
    z: f64,
) -> Result<(Vec<Vec<Rod>>, Vec<f64>), OracleError> {
    if z < 0.0 || !z.is_finite() {
        return Err(OracleError::Lattice(LatticeError::NegativeActivity(z)));
    }
    let mut keys = Vec::new();
    let mut weights = Vec::new();
    for cfg in enumerate_configs(spec)? {
        keys.push(cfg.canonical_rods());
        weights.push(z.powi(cfg.len() as i32));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((keys, weights))
}

/// Build the full transition matrix of a Markov kernel over the enumerated
/// state space and return the stationarity residual ||pi P - pi||_1 against
/// the exact Gibbs vector.
///
/// `kernel` maps a configuration to its complete one-step distribution
/// (successor states with probabilities, the "stay" mass included).
pub fn exact_transition_check<K>(spec: &BoxSpec, z: f64, kernel: K) -> Result<f64, OracleError>
where
    K: Fn(&RodConfig) -> Vec<(RodConfig, f64)>,
{
    use std::collections::HashMap;

    let mut states: Vec<RodConfig> = Vec::new();
    let mut index: HashMap<Vec<Rod>, usize> = HashMap::new();
    for cfg in enumerate_configs(spec)? {
        index.insert(cfg.canonical_rods(), states.len());
        states.push(cfg);
    }
    let weights: Vec<f64> = states.iter().map(|c| z.powi(c.len() as i32)).collect();
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let mut pi_p = vec![0.0; states.len()];
    for (i, state) in states.iter().enumerate() {
        let mut row_mass = 0.0;
        for (next, p) in kernel(state) {
            let j = *index
                .get(&next.canonical_rods())
                .expect("kernel left the enumerated state space");
            pi_p[j] += pi[i] * p;
            row_mass += p;
        }
        debug_assert!(
            (row_mass - 1.0).abs() < 1e-9,
            "kernel row {i} sums to {row_mass}"
        );
    }
    Ok(pi_p.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum())
}
