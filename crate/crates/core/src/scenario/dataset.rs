//! RSSI records, calibration, empirical densities and CSV exchange.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Receiver lies closer to the equivalent surface than the radiation kernels allow.
pub const FLAG_NEAR_FIELD: &str = "near_field";

/// One link observation. Free-space rows have no body position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RssiRecord {
    pub tx_id: u32,
    pub rx_id: u32,
    pub body_pos_id: Option<u32>,
    pub dx: f64,
    pub dy: f64,
    pub rssi_dbm: f64,
    pub rssi_free_dbm: f64,
    pub delta_rssi_db: f64,
    pub flags: String,
}

impl RssiRecord {
    pub fn linear(&self) -> f64 {
        10f64.powf(self.rssi_dbm / 10.0)
    }
}

pub fn write_dataset<W: Write>(out: W, records: &[RssiRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "tx_id",
        "rx_id",
        "body_pos_id",
        "dx",
        "dy",
        "rssi_dbm",
        "rssi_free_dbm",
        "delta_rssi_db",
        "flags",
    ])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_dataset<R: Read>(input: R) -> Result<Vec<RssiRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<RssiRecord>> {
    parse_dataset(std::fs::File::open(path)?)
}

/// Measured reference RSSI per link, `(tx_id, rx_id) -> dBm`.
pub fn read_reference<R: Read>(input: R) -> Result<BTreeMap<(u32, u32), f64>> {
    #[derive(Deserialize)]
    struct Row {
        tx_id: u32,
        rx_id: u32,
        rssi_dbm: f64,
    }
    let mut rd = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for row in rd.deserialize::<Row>() {
        let row = row?;
        out.insert((row.tx_id, row.rx_id), row.rssi_dbm);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationFactor {
    pub tx_id: u32,
    /// Linear-scale factor `α`.
    pub alpha: f64,
}

impl CalibrationFactor {
    pub fn db(&self) -> f64 {
        10.0 * self.alpha.log10()
    }

    pub fn apply(&self, linear: &[f64]) -> Vec<f64> {
        linear.iter().map(|v| self.alpha * v).collect()
    }
}

/// `α = max(reference) / max(simulated)` over one transmitter's receivers,
/// both in linear scale.
pub fn calibrate(tx_id: u32, simulated: &[f64], reference: &[f64]) -> Result<CalibrationFactor> {
    if simulated.len() != reference.len() || simulated.is_empty() {
        return Err(Error::Calibration(format!(
            "receiver sets differ ({} simulated, {} reference)",
            simulated.len(),
            reference.len()
        )));
    }
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (s, r) = (max(simulated), max(reference));
    if !(s > 0.0) {
        return Err(Error::Calibration(format!("simulated RSSI of transmitter {tx_id} is all zero")));
    }
    if !(r > 0.0) {
        return Err(Error::Calibration(format!("reference RSSI of transmitter {tx_id} is not positive")));
    }
    Ok(CalibrationFactor { tx_id, alpha: r / s })
}

/// Calibrates every transmitter present in both `records` (rows with body
/// position `pos`) and `reference`, then scales all of that transmitter's
/// rows. ΔRSSI is left untouched.
pub fn calibrate_records(
    records: &mut [RssiRecord],
    reference: &BTreeMap<(u32, u32), f64>,
    pos: Option<u32>,
) -> Result<Vec<CalibrationFactor>> {
    let mut per_tx: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.body_pos_id == pos && r.dx == 0.0 && r.dy == 0.0) {
        if let Some(&m) = reference.get(&(r.tx_id, r.rx_id)) {
            let e = per_tx.entry(r.tx_id).or_default();
            e.0.push(r.linear());
            e.1.push(10f64.powf(m / 10.0));
        }
    }
    let factors = per_tx
        .into_iter()
        .map(|(tx, (s, m))| calibrate(tx, &s, &m))
        .collect::<Result<Vec<_>>>()?;
    for f in &factors {
        let shift = f.db();
        for r in records.iter_mut().filter(|r| r.tx_id == f.tx_id) {
            r.rssi_dbm += shift;
            r.rssi_free_dbm += shift;
        }
    }
    Ok(factors)
}

/// Histogram density of RSSI values (dB) with bins aligned to multiples of
/// the bin width.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalPdf {
    /// Left edge of the first bin.
    pub start: f64,
    pub bin_width: f64,
    pub density: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
}

impl EmpiricalPdf {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.density.len())
            .map(|i| self.start + (i as f64 + 0.5) * self.bin_width)
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }
}

pub fn empirical_pdf(values: &[f64], bin_width: f64) -> Result<EmpiricalPdf> {
    if values.len() < 2 {
        return Err(Error::Parameter("an empirical density needs at least two values".into()));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Parameter(format!("bin width must be positive, got {bin_width}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("RSSI values must be finite".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_dev = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo / bin_width).floor() * bin_width;
    let bins = (((hi - start) / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - start) / bin_width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(EmpiricalPdf {
        start,
        bin_width,
        density: counts.into_iter().map(|c| c as f64 / (n * bin_width)).collect(),
        mean,
        std_dev,
    })
}
