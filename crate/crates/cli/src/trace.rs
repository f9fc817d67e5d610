//! Configuration trace files: one JSON header line with the box geometry,
//! then one line per frame holding the sweep index and the canonically
//! sorted rod list `O,x,y ...`, gzip-compressed. Sorted order makes traces
//! byte-stable across runs with the same seed.

use anyhow::{bail, Context, Result};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rodlat::lattice::{site, BoxSpec, Orientation, Rod, RodConfig};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct TraceHeader {
    schema_version: u32,
    #[serde(rename = "L")]
    l: i32,
    width: i32,
    height: i32,
    k: i32,
    bc: rodlat::lattice::BoundaryCondition,
    containment: rodlat::lattice::Containment,
}

pub struct TraceWriter<W: Write> {
    encoder: GzEncoder<W>,
}

impl TraceWriter<std::fs::File> {
    pub fn create(path: &Path, spec: &BoxSpec) -> Result<Self> {
        let file = std::fs::File::create(path)
            .with_context(|| format!("cannot create trace file {}", path.display()))?;
        TraceWriter::new(file, spec)
    }
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W, spec: &BoxSpec) -> Result<Self> {
        let mut encoder = GzEncoder::new(sink, Compression::fast());
        let header = TraceHeader {
            schema_version: crate::SCHEMA_VERSION,
            l: spec.width,
            width: spec.width,
            height: spec.height,
            k: spec.k,
            bc: spec.bc,
            containment: spec.containment,
        };
        serde_json::to_writer(&mut encoder, &header)?;
        encoder.write_all(b"\n")?;
        Ok(TraceWriter { encoder })
    }

    pub fn record(&mut self, sweep: u64, config: &RodConfig) -> Result<()> {
        let mut line = sweep.to_string();
        for rod in config.canonical_rods() {
            line.push(' ');
            line.push(rod.orientation.letter());
            line.push(',');
            line.push_str(&rod.center.x.to_string());
            line.push(',');
            line.push_str(&rod.center.y.to_string());
        }
        line.push('\n');
        self.encoder.write_all(line.as_bytes())?;
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        self.encoder.finish()?;
        Ok(())
    }
}

/// A decoded trace: the box it was recorded on and the per-frame rod lists.
pub struct Trace {
    pub spec: BoxSpec,
    pub frames: Vec<(u64, Vec<Rod>)>,
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open trace file {}", path.display()))?;
    read_trace_from(file)
}

pub fn read_trace_from<R: Read>(source: R) -> Result<Trace> {
    let mut lines = BufReader::new(GzDecoder::new(source)).lines();
    let header_line = lines
        .next()
        .context("empty trace file")?
        .context("trace header unreadable")?;
    let header: TraceHeader = serde_json::from_str(&header_line).context("bad trace header")?;
    if header.schema_version != crate::SCHEMA_VERSION {
        bail!("unsupported trace schema version {}", header.schema_version);
    }
    let spec = BoxSpec::new(
        header.width,
        header.height,
        header.k,
        header.containment,
        header.bc,
    )?;
    let mut frames = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let sweep: u64 = parts
            .next()
            .unwrap()
            .parse()
            .with_context(|| format!("bad sweep index on trace line {}", i + 2))?;
        let mut rods = Vec::new();
        for token in parts {
            let (letter, coords) = token.split_at(1);
            let orientation = match letter {
                "H" => Orientation::Horizontal,
                "V" => Orientation::Vertical,
                other => bail!("bad orientation tag `{other}` on trace line {}", i + 2),
            };
            let mut nums = coords.trim_start_matches(',').split(',');
            let x: i32 = nums
                .next()
                .context("missing x")?
                .parse()
                .with_context(|| format!("bad coordinate on trace line {}", i + 2))?;
            let y: i32 = nums
                .next()
                .context("missing y")?
                .parse()
                .with_context(|| format!("bad coordinate on trace line {}", i + 2))?;
            rods.push(Rod::new(orientation, site(x, y)));
        }
        frames.push((sweep, rods));
    }
    Ok(Trace { spec, frames })
}

impl Trace {
    /// Rebuild (and hence re-validate) one frame as a full configuration.
    pub fn frame_config(&self, index: usize) -> Result<RodConfig> {
        let mut cfg = RodConfig::new(self.spec);
        for rod in &self.frames[index].1 {
            cfg.apply(*rod)
                .with_context(|| format!("trace frame {index} is not a valid configuration"))?;
        }
        Ok(cfg)
    }
}
