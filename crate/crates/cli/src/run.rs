//! Experiment execution: one output directory per run holding a manifest,
//! per-chain measurement CSVs, an aggregated summary, and optional
//! configuration traces. Chains run on independent RNG streams and their
//! files are written independently, so identical configs give byte-identical
//! measurements regardless of scheduling.

use crate::config::RunConfig;
use crate::trace::TraceWriter;
use crate::SCHEMA_VERSION;
use anyhow::{bail, Context, Result};
use rodlat::observables::{Recorder, RecorderSpec};
use rodlat::sampler::{run_chain, MoveStats};
use rodlat::stats::{block_jackknife, blocking_error, mean};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Marker dropped at run start and removed on success; its presence flags a
/// partial run directory.
pub const PARTIAL_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    pub chain_streams: Vec<u64>,
    pub acceptance_rates: Vec<AcceptanceRates>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub chain: u64,
    pub insert: f64,
    pub delete: f64,
    pub translate: f64,
    pub rotate: f64,
}

impl AcceptanceRates {
    fn from_stats(chain: u64, stats: &MoveStats) -> Self {
        let rate = |i: usize| {
            if stats.attempts[i] == 0 {
                0.0
            } else {
                stats.accepts[i] as f64 / stats.attempts[i] as f64
            }
        };
        AcceptanceRates {
            chain,
            insert: rate(0),
            delete: rate(1),
            translate: rate(2),
            rotate: rate(3),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub plateau_found: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventSummary {
    pub x: i32,
    pub y: i32,
    pub target: rodlat::lattice::Orientation,
    pub min_centers: u32,
    pub p: Estimate,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub separation: i32,
    pub raw: f64,
    pub truncated: f64,
    pub se: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: RunConfig,
    pub chains: u32,
    pub frames_per_chain: u64,
    pub n: Estimate,
    pub rho: Estimate,
    pub m: Estimate,
    pub events: Vec<EventSummary>,
    pub correlations: Vec<CorrelationSummary>,
    pub regime: RegimeSummary,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub k0: i32,
    pub in_regime: bool,
}

/// Per-chain measurement table as written to CSV. `rho` and `M` are
/// measured over the bulk region under plus/minus boundary conditions and
/// over the whole box under open ones; `N` is the global rod count.
#[derive(Debug, Clone, Default)]
pub struct ChainTable {
    pub sweeps: Vec<u64>,
    pub n: Vec<f64>,
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub events: Vec<Vec<f64>>,
    pub corr: Vec<Vec<f64>>,
}

pub fn csv_header(config: &RunConfig) -> String {
    let mut cols = vec![
        "sweep".to_string(),
        "N".to_string(),
        "rho".to_string(),
        "M".to_string(),
    ];
    for i in 0..config.windows.len() {
        cols.push(format!("event_{i}"));
    }
    for sep in &config.separations {
        cols.push(format!("corr_{sep}"));
    }
    cols.join(",")
}

fn write_csv(path: &Path, config: &RunConfig, table: &ChainTable) -> Result<()> {
    let mut out = String::new();
    out.push_str(&csv_header(config));
    out.push('\n');
    for f in 0..table.sweeps.len() {
        out.push_str(&table.sweeps[f].to_string());
        out.push(',');
        out.push_str(&(table.n[f] as u64).to_string());
        out.push(',');
        out.push_str(&table.rho[f].to_string());
        out.push(',');
        out.push_str(&table.m[f].to_string());
        for w in &table.events {
            out.push(',');
            out.push_str(&(w[f] as u8).to_string());
        }
        for c in &table.corr {
            out.push(',');
            out.push_str(&c[f].to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_csv(path: &Path, config: &RunConfig) -> Result<ChainTable> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    if header != csv_header(config) {
        bail!(
            "CSV header mismatch in {}: got `{header}`, expected `{}`",
            path.display(),
            csv_header(config)
        );
    }
    let mut table = ChainTable {
        events: vec![Vec::new(); config.windows.len()],
        corr: vec![Vec::new(); config.separations.len()],
        ..Default::default()
    };
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 4 + config.windows.len() + config.separations.len();
        if fields.len() != expected {
            bail!("CSV row has {} fields, expected {expected}", fields.len());
        }
        table.sweeps.push(fields[0].parse()?);
        table.n.push(fields[1].parse()?);
        table.rho.push(fields[2].parse()?);
        table.m.push(fields[3].parse()?);
        for (i, w) in table.events.iter_mut().enumerate() {
            w.push(fields[4 + i].parse()?);
        }
        let base = 4 + config.windows.len();
        for (i, c) in table.corr.iter_mut().enumerate() {
            c.push(fields[base + i].parse()?);
        }
    }
    Ok(table)
}

fn chain_csv_path(dir: &Path, chain: u64) -> PathBuf {
    dir.join(format!("measurements_chain{chain:04}.csv"))
}

fn chain_trace_path(dir: &Path, chain: u64) -> PathBuf {
    dir.join(format!("trace_chain{chain:04}.txt.gz"))
}

struct ChainOutput {
    table: ChainTable,
    stats: MoveStats,
}

fn run_one_chain(config: &RunConfig, chain: u64, dir: &Path) -> Result<ChainOutput> {
    let spec = config.box_spec();
    let recorder_spec = RecorderSpec {
        windows: config.events(),
        separations: config.separations.clone(),
        collect_spin_fields: false,
    };
    let mut recorder =
        Recorder::new(spec, recorder_spec).context("recorder rejected the run config")?;
    let mut trace = if config.trace {
        Some(TraceWriter::create(&chain_trace_path(dir, chain), &spec)?)
    } else {
        None
    };
    let params = config.sampler_params();
    let state = run_chain(spec, &params, chain, |sweep, cfg| {
        recorder.record(sweep, cfg);
        if let Some(t) = trace.as_mut() {
            t.record(sweep, cfg).expect("trace write failed");
        }
    })?;
    if let Some(t) = trace {
        t.finish()?;
    }
    let series = recorder.series;
    let table = ChainTable {
        sweeps: series.sweeps,
        n: series.n,
        rho: series.region_rho,
        m: series.m,
        events: series.events,
        corr: series.pair_fractions,
    };
    write_csv(&chain_csv_path(dir, chain), config, &table)?;
    Ok(ChainOutput {
        table,
        stats: state.stats,
    })
}

/// Pool per-chain blocking results: chains are independent, so the pooled
/// mean is the average of chain means and variances add. Associative and
/// order-insensitive.
fn pool_estimates(per_chain: &[(f64, f64, bool)]) -> Estimate {
    let n = per_chain.len() as f64;
    Estimate {
        mean: per_chain.iter().map(|e| e.0).sum::<f64>() / n,
        se: per_chain.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt() / n,
        plateau_found: per_chain.iter().all(|e| e.2),
    }
}

fn scalar_estimate(
    tables: &[ChainTable],
    pick: impl Fn(&ChainTable) -> &[f64],
) -> Result<Estimate> {
    let per_chain: Vec<(f64, f64, bool)> = tables
        .iter()
        .map(|t| {
            let r = blocking_error(pick(t))?;
            Ok((r.mean, r.se, r.plateau_found))
        })
        .collect::<Result<_, rodlat::stats::StatsError>>()?;
    Ok(pool_estimates(&per_chain))
}

pub fn summarize(config: &RunConfig, tables: &[ChainTable]) -> Result<Summary> {
    let n = scalar_estimate(tables, |t| &t.n)?;
    let rho = scalar_estimate(tables, |t| &t.rho)?;
    let m = scalar_estimate(tables, |t| &t.m)?;

    let mut events = Vec::new();
    for (i, w) in config.windows.iter().enumerate() {
        let per_chain: Vec<(f64, f64, bool)> = tables
            .iter()
            .map(|t| {
                let r = blocking_error(&t.events[i])?;
                Ok((r.mean, r.se, r.plateau_found))
            })
            .collect::<Result<_, rodlat::stats::StatsError>>()?;
        events.push(EventSummary {
            x: w.x,
            y: w.y,
            target: w.target,
            min_centers: w.min_centers,
            p: pool_estimates(&per_chain),
        });
    }

    let mut correlations = Vec::new();
    for (i, &sep) in config.separations.iter().enumerate() {
        let mut raws = Vec::new();
        let mut truncs = Vec::new();
        for t in tables {
            let (trunc, se) = block_jackknife(&[t.corr[i].clone(), t.rho.clone()], 32, |m| {
                m[0] - m[1] * m[1]
            })?;
            raws.push(mean(&t.corr[i]));
            truncs.push((trunc, se, true));
        }
        let pooled = pool_estimates(&truncs);
        correlations.push(CorrelationSummary {
            separation: sep,
            raw: mean(&raws),
            truncated: pooled.mean,
            se: pooled.se,
        });
    }

    let epsilon = rodlat::lattice::regime_epsilon(config.z, config.k);
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        chains: config.chains,
        frames_per_chain: config.frames(),
        n,
        rho,
        m,
        events,
        correlations,
        regime: RegimeSummary {
            epsilon,
            epsilon0: config.epsilon0,
            k0: config.k0,
            in_regime: epsilon <= config.epsilon0 && config.k >= config.k0,
        },
    })
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Execute a full experiment into `config.output_dir`; returns the summary.
pub fn run_experiment(config: &RunConfig) -> Result<Summary> {
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"")
        .with_context(|| format!("output dir {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe).ok();
    std::fs::write(dir.join(PARTIAL_MARKER), b"run in progress\n")?;
    let started = now_rfc3339();

    let chain_ids: Vec<u64> = (0..config.chains as u64).collect();
    let outputs: Vec<ChainOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = chain_ids
            .iter()
            .map(|&chain| {
                let dir = dir.clone();
                scope.spawn(move || run_one_chain(config, chain, &dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    let tables: Vec<ChainTable> = outputs.iter().map(|o| o.table.clone()).collect();
    let summary = summarize(config, &tables)?;
    let summary_json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(dir.join("summary.json"), summary_json)?;

    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started,
        finished: now_rfc3339(),
        chain_streams: chain_ids.clone(),
        acceptance_rates: outputs
            .iter()
            .zip(&chain_ids)
            .map(|(o, &c)| AcceptanceRates::from_stats(c, &o.stats))
            .collect(),
    };
    let mut manifest_file = std::fs::File::create(dir.join("manifest.json"))?;
    manifest_file.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    std::fs::remove_file(dir.join(PARTIAL_MARKER))?;
    Ok(summary)
}

/// Recompute the summary of an existing run directory from its manifest and
/// measurement CSVs.
pub fn analyze_run(dir: &Path) -> Result<Summary> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("no manifest.json in {}", dir.display()))?;
    let manifest: RunManifest = serde_json::from_str(&manifest_text)?;
    if dir.join(PARTIAL_MARKER).exists() {
        eprintln!(
            "warning: {} contains an {PARTIAL_MARKER} marker; analyzing a partial run",
            dir.display()
        );
    }
    let config = manifest.config;
    let tables: Vec<ChainTable> = (0..config.chains as u64)
        .map(|c| read_csv(&chain_csv_path(dir, c), &config))
        .collect::<Result<_>>()?;
    summarize(&config, &tables)
}

/// Spin-field and contour outputs for the `coarsegrain` subcommand.
pub fn coarsegrain_trace(trace_path: &Path, out_dir: &Path) -> Result<()> {
    use rodlat::coarsegrain::{contour_statistics, SpinField};

    let trace = crate::trace::read_trace(trace_path)?;
    if trace.frames.is_empty() {
        bail!("trace {} holds no frames", trace_path.display());
    }
    std::fs::create_dir_all(out_dir)?;

    let mut fields = Vec::with_capacity(trace.frames.len());
    let mut spin_csv = String::from("sweep,spins\n");
    for (i, (sweep, _)) in trace.frames.iter().enumerate() {
        let cfg = trace.frame_config(i)?;
        let field = SpinField::from_config(&cfg).map_err(|e| anyhow::anyhow!("frame {i}: {e}"))?;
        let mut tiles = String::with_capacity(field.tile_count());
        for (tx, ty) in field.tiles() {
            tiles.push(match field.spin(tx, ty) {
                1 => '+',
                -1 => '-',
                _ => '0',
            });
        }
        spin_csv.push_str(&format!("{sweep},{tiles}\n"));
        fields.push(field);
    }
    std::fs::write(out_dir.join("spinfields.csv"), spin_csv)?;

    let mut hist_csv = String::from("size,count,host_probability,se\n");
    let stats_json = match contour_statistics(&fields) {
        Ok(stats) => {
            for ((size, count), (_, p, se)) in stats.histogram.iter().zip(&stats.host_probability) {
                hist_csv.push_str(&format!("{size},{count},{p},{se}\n"));
            }
            serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "frames": stats.frames,
                "tiles_per_frame": stats.tiles_per_frame,
                "total_contours": stats.total_contours(),
                "fit": stats.fit.as_ref().map(|f| serde_json::json!({
                    "tau": f.tau,
                    "tau_se": f.tau_se,
                    "intercept": f.intercept,
                    "sizes_used": f.sizes_used,
                    "chi2": f.chi2,
                })),
            })
        }
        Err(e) => serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "frames": fields.len(),
            "error": e.to_string(),
        }),
    };
    std::fs::write(out_dir.join("contour_hist.csv"), hist_csv)?;
    std::fs::write(
        out_dir.join("contour_stats.json"),
        serde_json::to_string_pretty(&stats_json)?,
    )?;
    Ok(())
}
