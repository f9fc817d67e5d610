//! Time-series statistics for Monte Carlo measurements: blocking error
//! analysis, block jackknife for nonlinear estimators, and error-weighted
//! linear fits.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series too short: need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("nonpositive fit weight at index {0}")]
    BadWeight(usize),
    #[error("degenerate fit: x values carry no spread")]
    DegenerateFit,
}

/// A named scalar time series sampled at known sweep indices.
#[derive(Debug, Clone, Default)]
pub struct ObservableSeries {
    pub name: String,
    pub sweeps: Vec<u64>,
    pub values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(name: impl Into<String>) -> Self {
        ObservableSeries {
            name: name.into(),
            sweeps: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, sweep: u64, value: f64) {
        self.sweeps.push(sweep);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn blocking(&self) -> Result<BlockingResult, StatsError> {
        blocking_error(&self.values)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingLevel {
    pub block_size: usize,
    pub n_blocks: usize,
    pub se: f64,
}

/// Outcome of a blocking analysis. `se` is the error at the detected
/// plateau; when no plateau is found the last (largest-block) level is
/// reported and `plateau_found` is false, so callers can tell an honest
/// error bar from a lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockingResult {
    pub mean: f64,
    pub se: f64,
    pub plateau_found: bool,
    pub levels: Vec<BlockingLevel>,
}

const MIN_SERIES_LEN: usize = 16;
const MIN_BLOCKS: usize = 16;
const PLATEAU_REL_STEP: f64 = 0.05;

/// Blocking (binning) analysis: the standard error of the mean estimated at
/// doubling block sizes. For correlated data the estimate grows with block
/// size until blocks exceed the autocorrelation time, then plateaus.
pub fn blocking_error(values: &[f64]) -> Result<BlockingResult, StatsError> {
    if values.len() < MIN_SERIES_LEN {
        return Err(StatsError::TooShort {
            need: MIN_SERIES_LEN,
            got: values.len(),
        });
    }
    let mut levels = Vec::new();
    let mut block_size = 1usize;
    let mut data = values.to_vec();
    loop {
        let n = data.len();
        if n < MIN_BLOCKS {
            break;
        }
        let se = (variance(&data) / n as f64).sqrt();
        levels.push(BlockingLevel {
            block_size,
            n_blocks: n,
            se,
        });
        // Halve: average adjacent pairs.
        let mut next = Vec::with_capacity(n / 2);
        for pair in data.chunks_exact(2) {
            next.push(0.5 * (pair[0] + pair[1]));
        }
        data = next;
        block_size *= 2;
    }

    // Plateau: two consecutive doublings that each grow the estimate by
    // less than PLATEAU_REL_STEP.
    let mut plateau_idx = None;
    for i in 1..levels.len() {
        let small = |j: usize| {
            let prev = levels[j - 1].se;
            prev == 0.0 || (levels[j].se - prev) / prev.max(f64::MIN_POSITIVE) < PLATEAU_REL_STEP
        };
        if small(i) && (i + 1 >= levels.len() || small(i + 1)) {
            plateau_idx = Some(i);
            break;
        }
    }
    let (se, plateau_found) = match plateau_idx {
        Some(i) => (levels[i].se, true),
        None => (levels.last().map(|l| l.se).unwrap_or(0.0), false),
    };
    Ok(BlockingResult {
        mean: mean(values),
        se,
        plateau_found,
        levels,
    })
}

/// Delete-one-block jackknife for a statistic that is a smooth function of
/// component means (ratios, truncated correlations, ...).
///
/// `components` holds one synchronous series per component; `stat` maps a
/// vector of component means to the estimate. Returns (estimate, se) where
/// the estimate is `stat` applied to the full-sample means.
pub fn block_jackknife<F>(
    components: &[Vec<f64>],
    n_blocks: usize,
    stat: F,
) -> Result<(f64, f64), StatsError>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!components.is_empty(), "need at least one component series");
    let n = components[0].len();
    assert!(
        components.iter().all(|c| c.len() == n),
        "component series must have equal length"
    );
    let n_blocks = n_blocks.min(n);
    if n < MIN_SERIES_LEN || n_blocks < 2 {
        return Err(StatsError::TooShort {
            need: MIN_SERIES_LEN,
            got: n,
        });
    }

    // Block sums per component; blocks may differ in length by one when
    // n_blocks does not divide n.
    let bounds: Vec<(usize, usize)> = (0..n_blocks)
        .map(|b| (b * n / n_blocks, (b + 1) * n / n_blocks))
        .collect();
    let totals: Vec<f64> = components.iter().map(|c| c.iter().sum()).collect();
    let full_means: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let estimate = stat(&full_means);

    let mut pseudo = Vec::with_capacity(n_blocks);
    for &(lo, hi) in &bounds {
        let len = (hi - lo) as f64;
        let means: Vec<f64> = components
            .iter()
            .zip(&totals)
            .map(|(c, t)| {
                let block_sum: f64 = c[lo..hi].iter().sum();
                (t - block_sum) / (n as f64 - len)
            })
            .collect();
        pseudo.push(stat(&means));
    }
    let pm = mean(&pseudo);
    let var = pseudo.iter().map(|p| (p - pm) * (p - pm)).sum::<f64>() * (n_blocks - 1) as f64
        / n_blocks as f64;
    Ok((estimate, var.sqrt()))
}

/// An error-weighted least-squares straight line fit y = intercept + slope x
/// with known per-point standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub chi2: f64,
    pub n_points: usize,
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<WeightedFit, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewPoints {
            need: 2,
            got: x.len(),
        });
    }
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), sigma.len());
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        if !sigma[i].is_finite() || sigma[i] <= 0.0 {
            return Err(StatsError::BadWeight(i));
        }
        let w = 1.0 / (sigma[i] * sigma[i]);
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 || det <= 0.0 {
        return Err(StatsError::DegenerateFit);
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = (0..x.len())
        .map(|i| {
            let r = (y[i] - intercept - slope * x[i]) / sigma[i];
            r * r
        })
        .sum();
    Ok(WeightedFit {
        slope,
        intercept,
        slope_se: (sw / det).sqrt(),
        intercept_se: (sxx / det).sqrt(),
        chi2,
        n_points: x.len(),
    })
}
