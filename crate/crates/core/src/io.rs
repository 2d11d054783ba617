//! Run directories: ledger CSV, binary field and mask dumps, the events list,
//! and the verification of a finished run read back from disk.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json               resolved scenario
//! ledger.csv                one row per step, footer with the verdict
//! events.json               array of exclusion events
//! fields/<name>_<step>.chdf c, z, mu, ux, uy at the output cadence
//! masks/mask_<step>.chdm    region F after initialization and every step
//! ```
//!
//! A field dump is the ASCII line `CHDFIELD <name> <nx+1> <ny+1> <time>`
//! followed by the nodal values as little-endian `f64`, row-major with `x`
//! fastest. A mask dump is `CHDMASK <nx> <ny> <time>` followed by one byte
//! (0 or 1) per cell in cell order.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::admissible::{check_fineness, check_shrinking, ExclusionEvent, RegionMask};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::ledger::{check_energy_inequality, EnergyVerdict, Ledger};
use crate::stepper::{Simulation, Snapshot, SweepReport};

/// A field read back from a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub name: String,
    pub nodes_x: usize,
    pub nodes_y: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskDump {
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub mask: RegionMask,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Format(format!("field name {name:?} must be non-empty without whitespace")));
    }
    Ok(())
}

pub fn encode_field(grid: &Grid, name: &str, time: f64, values: &[f64]) -> Result<Vec<u8>> {
    check_name(name)?;
    grid.check_nodal(values.len())?;
    let mut out = format!("CHDFIELD {name} {} {} {time:.16e}\n", grid.nx + 1, grid.ny + 1).into_bytes();
    out.reserve(8 * values.len());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn split_header<'a>(bytes: &'a [u8], magic: &str) -> Result<(Vec<&'a str>, &'a [u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format(format!("{magic}: missing header line")))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format(format!("{magic}: header is not UTF-8")))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.first() != Some(&magic) {
        return Err(Error::Format(format!("expected {magic} header, got {header:?}")));
    }
    Ok((parts, &bytes[nl + 1..]))
}

fn parse<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("bad {what}: {s:?}")))
}

pub fn decode_field(bytes: &[u8]) -> Result<FieldDump> {
    let (h, body) = split_header(bytes, "CHDFIELD")?;
    if h.len() != 5 {
        return Err(Error::Format("CHDFIELD header needs name, two sizes and a time".into()));
    }
    let nodes_x: usize = parse(h[2], "node count")?;
    let nodes_y: usize = parse(h[3], "node count")?;
    let time: f64 = parse(h[4], "time")?;
    let n = nodes_x * nodes_y;
    if body.len() != 8 * n {
        return Err(Error::Format(format!("CHDFIELD body has {} bytes, expected {}", body.len(), 8 * n)));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(FieldDump { name: h[1].to_string(), nodes_x, nodes_y, time, values })
}

pub fn encode_mask(mask: &RegionMask, time: f64) -> Vec<u8> {
    let mut out = format!("CHDMASK {} {} {time:.16e}\n", mask.nx, mask.ny).into_bytes();
    out.extend(mask.as_slice().iter().map(|&b| u8::from(b)));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<MaskDump> {
    let (h, body) = split_header(bytes, "CHDMASK")?;
    if h.len() != 4 {
        return Err(Error::Format("CHDMASK header needs two sizes and a time".into()));
    }
    let nx: usize = parse(h[1], "cell count")?;
    let ny: usize = parse(h[2], "cell count")?;
    let time: f64 = parse(h[3], "time")?;
    if body.len() != nx * ny {
        return Err(Error::Format(format!("CHDMASK body has {} bytes, expected {}", body.len(), nx * ny)));
    }
    let cells = body
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Format(format!("CHDMASK byte {b} is not 0 or 1"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(MaskDump { nx, ny, time, mask: RegionMask::from_cells(nx, ny, cells) })
}

pub fn write_events(path: &Path, events: &[ExclusionEvent]) -> Result<()> {
    let text = serde_json::to_string_pretty(events).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<ExclusionEvent>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_sweep_report(path: &Path, report: &SweepReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_ledger(path: &Path, ledger: &Ledger) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    ledger.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_ledger(path: &Path) -> Result<Ledger> {
    Ledger::read_csv(BufReader::new(fs::File::open(path)?))
}

/// Writes the pieces of a run directory as the run progresses.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
}

impl RunWriter {
    pub fn create(dir: &Path, config: &ScenarioConfig) -> Result<Self> {
        fs::create_dir_all(dir.join("fields"))?;
        fs::create_dir_all(dir.join("masks"))?;
        fs::write(dir.join("config.json"), config.to_json() + "\n")?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_snapshot(&self, grid: &Grid, s: &Snapshot) -> Result<()> {
        let ux = s.u.component(0);
        let uy = s.u.component(1);
        let fields: [(&str, &[f64]); 5] =
            [("c", &s.c.values), ("z", &s.z.values), ("mu", &s.mu.values), ("ux", &ux), ("uy", &uy)];
        for (name, values) in fields {
            let path = self.dir.join("fields").join(format!("{name}_{:06}.chdf", s.step));
            fs::write(path, encode_field(grid, name, s.t, values)?)?;
        }
        Ok(())
    }

    pub fn write_mask(&self, step: usize, time: f64, mask: &RegionMask) -> Result<()> {
        fs::write(self.dir.join("masks").join(format!("mask_{step:06}.chdm")), encode_mask(mask, time))?;
        Ok(())
    }

    /// Ledger and events; called at the end of a run and after a failure.
    pub fn write_summary(&self, sim: &Simulation) -> Result<()> {
        write_ledger(&self.dir.join("ledger.csv"), sim.ledger())?;
        write_events(&self.dir.join("events.json"), sim.events())
    }
}

/// Result of re-checking a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DirVerification {
    pub energy: EnergyVerdict,
    pub shrinking: bool,
    /// Every recorded fineness measure below `eta`, and the stored masks
    /// consistent with the stored damage fields.
    pub fineness: bool,
    /// Stored damage fields in `[0, 1]` and non-increasing in time.
    pub monotone: bool,
    /// Every event's jump equals `energy_before - energy_after`, is
    /// nonnegative, and the ledger's cumulative jump column matches.
    pub events: bool,
    pub messages: Vec<String>,
}

impl DirVerification {
    pub fn ok(&self) -> bool {
        self.energy.ok && self.shrinking && self.fineness && self.monotone && self.events
    }
}

fn sorted_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<(usize, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(stem) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(ext)) else { continue };
        if let Ok(step) = stem.parse::<usize>() {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Re-check a finished run: energy inequality, shrinking masks, fineness,
/// damage monotonicity and event consistency.
pub fn verify_run_dir(dir: &Path) -> Result<DirVerification> {
    let config: ScenarioConfig = {
        let text = fs::read_to_string(dir.join("config.json"))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("config.json: {e}")))?
    };
    let grid = config.build_grid()?;
    let ledger = read_ledger(&dir.join("ledger.csv"))?;
    let events = read_events(&dir.join("events.json"))?;
    let mut messages = Vec::new();

    let energy = check_energy_inequality(&ledger);
    if !energy.ok {
        messages.push(format!(
            "energy inequality: worst slack {:e} at step {}, inconsistent row {:?}",
            energy.worst_slack, energy.worst_step, energy.inconsistent_row
        ));
    }

    let mut masks = Vec::new();
    for (step, path) in sorted_files(&dir.join("masks"), "mask_", ".chdm")? {
        let m = decode_mask(&fs::read(&path)?)?;
        if (m.nx, m.ny) != (grid.nx, grid.ny) {
            return Err(Error::Format(format!("{}: grid size mismatch", path.display())));
        }
        masks.push((step, m.mask));
    }
    let history: Vec<RegionMask> = masks.iter().map(|(_, m)| m.clone()).collect();
    let shrinking = check_shrinking(&history);
    if !shrinking {
        messages.push("region history is not shrinking".into());
    }

    let eta = ledger.eta;
    let mut fineness = ledger.rows.iter().all(|r| r.fineness < eta);
    if !fineness {
        messages.push("a ledger row exceeds the fineness bound".into());
    }

    let mut monotone = true;
    let mut prev: Option<Vec<f64>> = None;
    for (step, path) in sorted_files(&dir.join("fields"), "z_", ".chdf")? {
        let f = decode_field(&fs::read(&path)?)?;
        grid.check_nodal(f.values.len())?;
        if f.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            monotone = false;
            messages.push(format!("damage outside [0, 1] at step {step}"));
        }
        if let Some(p) = &prev {
            if f.values.iter().zip(p).any(|(a, b)| a > b) {
                monotone = false;
                messages.push(format!("damage increases before step {step}"));
            }
        }
        if let Some((_, mask)) = masks.iter().find(|(s, _)| *s == step) {
            let z = ScalarField::new(&grid, f.values.clone())?;
            if !check_fineness(&grid, mask, &z, ledger.z_tol, eta).ok {
                fineness = false;
                messages.push(format!("mask at step {step} is not fine for the stored damage"));
            }
        }
        prev = Some(f.values);
    }

    let mut events_ok = true;
    for e in &events {
        if e.jump != e.energy_before - e.energy_after || e.jump < 0.0 {
            events_ok = false;
            messages.push(format!("event at step {}: inconsistent or negative jump", e.step));
        }
    }
    let mut j = 0.0;
    for r in &ledger.rows {
        for e in events.iter().filter(|e| e.step == r.step) {
            j += e.jump;
        }
        if j != r.j_cum {
            events_ok = false;
            messages.push(format!("cumulative jump at step {} disagrees with the events", r.step));
            break;
        }
    }

    Ok(DirVerification { energy, shrinking, fineness, monotone, events: events_ok, messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DirichletSelector};

    #[test]
    fn field_round_trip() {
        let g = build_grid(3, 2, 1.0, 1.0, &DirichletSelector::left()).unwrap();
        let values: Vec<f64> = (0..g.node_count()).map(|i| i as f64 * 0.1 - 0.3).collect();
        let bytes = encode_field(&g, "c", 0.25, &values).unwrap();
        assert!(bytes.starts_with(b"CHDFIELD c 4 3 2.5"));
        let back = decode_field(&bytes).unwrap();
        assert_eq!(back.values, values);
        assert_eq!((back.nodes_x, back.nodes_y, back.time), (4, 3, 0.25));
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        assert!(encode_field(&g, "two words", 0.0, &values).is_err());
    }

    #[test]
    fn mask_round_trip() {
        let mut m = RegionMask::full(3, 2);
        m.set(4, false);
        let bytes = encode_mask(&m, 1.5);
        let back = decode_mask(&bytes).unwrap();
        assert_eq!(back.mask, m);
        assert_eq!(back.time, 1.5);
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 7;
        assert!(decode_mask(&bad).is_err());
        assert!(decode_mask(b"CHDFIELD 1 1 0\n\x01").is_err());
    }
}
