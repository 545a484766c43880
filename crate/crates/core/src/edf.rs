//! European Data Format (EDF) reading and writing.
//!
//! Only plain 16-bit EDF is handled; EDF+ annotation signals are skipped and
//! BDF is not supported. Parsing works on an in-memory byte buffer.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::{Gender, PatientMeta, Recording};

const FIXED_HEADER_BYTES: usize = 256;
const PER_SIGNAL_HEADER_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdfError {
    #[error("file truncated: header declares {expected} bytes, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("signal {signal} has digital_max == digital_min ({value})")]
    DegenerateScaling { signal: usize, value: i64 },
    #[error("header field `{field}` has invalid value {value:?}")]
    BadHeaderField { field: &'static str, value: String },
    #[error("cannot encode: {0}")]
    Encode(String),
}

/// Per-signal header block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i64,
    pub digital_max: i64,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    pub fn sampling_rate(&self, record_duration_s: f64) -> f64 {
        self.samples_per_record as f64 / record_duration_s
    }

    /// Affine digital → physical conversion.
    pub fn to_physical(&self, digital: i16) -> f64 {
        let gain = (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64;
        self.physical_min + (digital as i64 - self.digital_min) as f64 * gain
    }

    fn to_digital(&self, physical: f64) -> i16 {
        let gain = (self.digital_max - self.digital_min) as f64 / (self.physical_max - self.physical_min);
        let d = libm::round((physical - self.physical_min) * gain) + self.digital_min as f64;
        d.clamp(self.digital_min as f64, self.digital_max as f64) as i16
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| 2 * s.samples_per_record).sum()
    }
}

/// Every signal of a file in physical units, each at its own rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub signals: Vec<Vec<f64>>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn text(&mut self, len: usize) -> String {
        let raw = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        String::from_utf8_lossy(raw).trim_end_matches([' ', '\0']).to_string()
    }

    fn number<T: core::str::FromStr>(&mut self, len: usize, field: &'static str) -> Result<T, EdfError> {
        let s = self.text(len);
        s.trim()
            .parse::<T>()
            .map_err(|_| EdfError::BadHeaderField { field, value: s })
    }
}

/// Parses a whole EDF file held in memory.
pub fn parse_edf_file(bytes: &[u8]) -> Result<EdfFile, EdfError> {
    if bytes.len() < FIXED_HEADER_BYTES {
        return Err(EdfError::TruncatedFile {
            expected: FIXED_HEADER_BYTES,
            actual: bytes.len(),
        });
    }
    let mut cur = Cursor { bytes, pos: 0 };
    let version = cur.text(8);
    let patient_id = cur.text(80);
    let recording_id = cur.text(80);
    let start_date = cur.text(8);
    let start_time = cur.text(8);
    let header_bytes: usize = cur.number(8, "header_bytes")?;
    let _reserved = cur.text(44);
    let n_records_raw: i64 = cur.number(8, "n_records")?;
    let record_duration_s: f64 = cur.number(8, "record_duration")?;
    let n_signals: usize = cur.number(4, "n_signals")?;

    if header_bytes != FIXED_HEADER_BYTES * (n_signals + 1) {
        return Err(EdfError::BadHeaderField {
            field: "header_bytes",
            value: header_bytes.to_string(),
        });
    }
    if bytes.len() < header_bytes {
        return Err(EdfError::TruncatedFile {
            expected: header_bytes,
            actual: bytes.len(),
        });
    }
    if !(record_duration_s > 0.0) && n_records_raw != 0 {
        return Err(EdfError::BadHeaderField {
            field: "record_duration",
            value: record_duration_s.to_string(),
        });
    }

    // per-signal fields are stored column-wise: all labels, then all transducers, ...
    let ns = n_signals;
    let labels: Vec<String> = (0..ns).map(|_| cur.text(16)).collect();
    let transducers: Vec<String> = (0..ns).map(|_| cur.text(80)).collect();
    let dims: Vec<String> = (0..ns).map(|_| cur.text(8)).collect();
    let pmin = (0..ns)
        .map(|_| cur.number::<f64>(8, "physical_min"))
        .collect::<Result<Vec<_>, _>>()?;
    let pmax = (0..ns)
        .map(|_| cur.number::<f64>(8, "physical_max"))
        .collect::<Result<Vec<_>, _>>()?;
    let dmin = (0..ns)
        .map(|_| cur.number::<i64>(8, "digital_min"))
        .collect::<Result<Vec<_>, _>>()?;
    let dmax = (0..ns)
        .map(|_| cur.number::<i64>(8, "digital_max"))
        .collect::<Result<Vec<_>, _>>()?;
    let prefilter: Vec<String> = (0..ns).map(|_| cur.text(80)).collect();
    let spr = (0..ns)
        .map(|_| cur.number::<usize>(8, "samples_per_record"))
        .collect::<Result<Vec<_>, _>>()?;
    debug_assert_eq!(cur.pos + 32 * ns, header_bytes);

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dmax[i] <= dmin[i] {
            if dmax[i] == dmin[i] {
                return Err(EdfError::DegenerateScaling {
                    signal: i,
                    value: dmax[i],
                });
            }
            return Err(EdfError::BadHeaderField {
                field: "digital_max",
                value: dmax[i].to_string(),
            });
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i],
            digital_max: dmax[i],
            prefiltering: prefilter[i].clone(),
            samples_per_record: spr[i],
        });
    }

    let mut header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes,
        n_records: 0,
        record_duration_s,
        signals,
    };
    let record_bytes = header.record_bytes();
    let n_records = match n_records_raw {
        // -1 marks a file whose writer never finalized the count
        -1 if record_bytes > 0 => (bytes.len() - header_bytes) / record_bytes,
        n if n >= 0 => n as usize,
        n => {
            return Err(EdfError::BadHeaderField {
                field: "n_records",
                value: n.to_string(),
            })
        }
    };
    header.n_records = n_records;

    let expected = header_bytes + n_records * record_bytes;
    if bytes.len() < expected {
        return Err(EdfError::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }

    let mut data: Vec<Vec<f64>> = header
        .signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * n_records))
        .collect();
    let mut pos = header_bytes;
    for _ in 0..n_records {
        for (sig, out) in header.signals.iter().zip(data.iter_mut()) {
            let chunk = &bytes[pos..pos + 2 * sig.samples_per_record];
            out.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| sig.to_physical(i16::from_le_bytes([b[0], b[1]]))),
            );
            pos += chunk.len();
        }
    }

    Ok(EdfFile { header, signals: data })
}

/// Parses an EDF buffer into a [`Recording`].
///
/// Signals sampled at a different rate than the first signal (and EDF+
/// annotation channels) are left out; channel order otherwise follows the
/// file. Patient metadata comes from [`parse_patient_meta`].
pub fn parse_edf(bytes: &[u8]) -> Result<Recording, EdfError> {
    let file = parse_edf_file(bytes)?;
    Ok(file.into_recording())
}

impl EdfFile {
    pub fn into_recording(self) -> Recording {
        let meta = parse_patient_meta(&self.header);
        let duration = self.header.record_duration_s;
        let is_data = |s: &SignalHeader| s.label.trim() != "EDF Annotations";
        let rate = self
            .header
            .signals
            .iter()
            .find(|s| is_data(s))
            .map(|s| s.sampling_rate(duration))
            .unwrap_or(0.0);
        let mut channels = Vec::new();
        let mut data = Vec::new();
        for (sig, samples) in self.header.signals.iter().zip(self.signals) {
            if is_data(sig) && sig.sampling_rate(duration) == rate {
                channels.push(sig.label.clone());
                data.push(samples);
            }
        }
        Recording {
            id: String::new(),
            sampling_rate_hz: rate,
            channels,
            data,
            meta,
            label: None,
            split: None,
        }
    }
}

const MONTHS: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Date {
    year: i32,
    month: u32,
    day: u32,
}

/// `dd-MMM-yyyy`, the EDF+ convention for birth and start dates.
fn parse_long_date(token: &str) -> Option<Date> {
    let mut parts = token.split('-');
    let day: u32 = parts.next()?.parse().ok()?;
    let mon = parts.next()?.to_ascii_uppercase();
    let year: i32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    let month = MONTHS.iter().position(|m| *m == mon)? as u32 + 1;
    (1..=31).contains(&day).then_some(Date { year, month, day })
}

/// `dd.mm.yy` from the fixed header; years 85–99 are 19xx, the rest 20xx.
fn parse_header_date(s: &str) -> Option<Date> {
    let mut parts = s.trim().split('.');
    let day: u32 = parts.next()?.parse().ok()?;
    let month: u32 = parts.next()?.parse().ok()?;
    let yy: i32 = parts.next()?.parse().ok()?;
    let year = if yy >= 85 { 1900 + yy } else { 2000 + yy };
    ((1..=12).contains(&month) && (1..=31).contains(&day)).then_some(Date { year, month, day })
}

fn years_between(birth: Date, at: Date) -> Option<u32> {
    let mut age = at.year - birth.year;
    if (at.month, at.day) < (birth.month, birth.day) {
        age -= 1;
    }
    u32::try_from(age).ok()
}

const MAX_AGE: u32 = 130;

/// Scans the identification fields for a gender token and an age.
///
/// An explicit `Age:NN` token takes precedence over birthdate arithmetic.
/// Anything unparseable degrades to unknown rather than failing.
pub fn parse_patient_meta(header: &EdfHeader) -> PatientMeta {
    let mut gender = Gender::Unknown;
    let mut token_age = None;
    let mut birth = None;
    let mut start_from_id = None;

    let mut scan = |field: &str, is_patient: bool| {
        let mut tokens = field.split_whitespace();
        while let Some(tok) = tokens.next() {
            let lower = tok.to_ascii_lowercase();
            if let Some(rest) = lower.strip_prefix("age:") {
                let digits = if rest.is_empty() {
                    tokens.next().unwrap_or_default().to_string()
                } else {
                    rest.to_string()
                };
                if let Ok(a) = digits.parse::<u32>() {
                    token_age = Some(a);
                }
            } else if lower == "startdate" {
                start_from_id = tokens.next().and_then(parse_long_date);
            } else if is_patient {
                match tok {
                    "M" if gender == Gender::Unknown => gender = Gender::Male,
                    "F" if gender == Gender::Unknown => gender = Gender::Female,
                    _ if birth.is_none() => birth = parse_long_date(tok),
                    _ => {}
                }
            }
        }
    };
    scan(&header.patient_id, true);
    scan(&header.recording_id, false);

    let start = start_from_id.or_else(|| parse_header_date(&header.start_date));
    let computed = match (birth, start) {
        (Some(b), Some(s)) => years_between(b, s),
        _ => None,
    };
    if let (Some(t), Some(c)) = (token_age, computed) {
        if t != c {
            log::warn!("age token {t} disagrees with birthdate arithmetic ({c}); keeping token");
        }
    }
    let age_years = token_age.or(computed).filter(|a| *a <= MAX_AGE);
    PatientMeta { age_years, gender }
}

/// Header content for [`encode_edf`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdfEncodeOptions {
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub record_duration_s: f64,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i16,
    pub digital_max: i16,
    pub physical_dimension: String,
}

impl Default for EdfEncodeOptions {
    fn default() -> Self {
        Self {
            patient_id: "X X X X".to_string(),
            recording_id: "Startdate X X X X".to_string(),
            start_date: "01.01.15".to_string(),
            start_time: "00.00.00".to_string(),
            record_duration_s: 1.0,
            physical_min: -1000.0,
            physical_max: 1000.0,
            digital_min: i16::MIN,
            digital_max: i16::MAX,
            physical_dimension: "uV".to_string(),
        }
    }
}

fn push_field(out: &mut Vec<u8>, value: &str, width: usize) -> Result<(), EdfError> {
    let bytes = value.as_bytes();
    if bytes.len() > width || !value.is_ascii() {
        return Err(EdfError::Encode(format!("{value:?} does not fit {width} ASCII bytes")));
    }
    out.extend_from_slice(bytes);
    out.extend(core::iter::repeat_n(b' ', width - bytes.len()));
    Ok(())
}

/// Shortest decimal rendering of `v` that fits an 8-byte header field.
fn fit_number(v: f64) -> Result<String, EdfError> {
    if v == libm::trunc(v) && v.abs() < 1e7 {
        return Ok(format!("{}", v as i64));
    }
    for digits in (0..=7).rev() {
        let s = format!("{v:.digits$}");
        if s.len() <= 8 {
            return Ok(s);
        }
    }
    Err(EdfError::Encode(format!("{v} does not fit an 8-byte field")))
}

/// Writes a recording as 16-bit EDF.
///
/// The sample count must fill whole data records. Physical values are
/// quantized against the limits exactly as they appear in the written header.
pub fn encode_edf(rec: &Recording, opts: &EdfEncodeOptions) -> Result<Vec<u8>, EdfError> {
    let spr_f = rec.sampling_rate_hz * opts.record_duration_s;
    let spr = libm::round(spr_f) as usize;
    if spr == 0 || (spr_f - spr as f64).abs() > 1e-9 {
        return Err(EdfError::Encode(format!(
            "record duration {} s does not hold a whole number of samples at {} Hz",
            opts.record_duration_s, rec.sampling_rate_hz
        )));
    }
    let n = rec.n_samples();
    if !n.is_multiple_of(spr) {
        return Err(EdfError::Encode(format!(
            "{n} samples do not fill whole records of {spr}"
        )));
    }
    if rec.data.iter().any(|c| c.len() != n) {
        return Err(EdfError::Encode("channels differ in length".to_string()));
    }
    let n_records = n / spr;
    let ns = rec.n_channels();

    let pmin_s = fit_number(opts.physical_min)?;
    let pmax_s = fit_number(opts.physical_max)?;
    let sig = SignalHeader {
        label: String::new(),
        transducer: String::new(),
        physical_dimension: opts.physical_dimension.clone(),
        physical_min: pmin_s.parse().unwrap_or(opts.physical_min),
        physical_max: pmax_s.parse().unwrap_or(opts.physical_max),
        digital_min: opts.digital_min as i64,
        digital_max: opts.digital_max as i64,
        prefiltering: String::new(),
        samples_per_record: spr,
    };
    if sig.digital_max <= sig.digital_min || !(sig.physical_max > sig.physical_min) {
        return Err(EdfError::Encode("degenerate scaling".to_string()));
    }

    let header_bytes = FIXED_HEADER_BYTES + PER_SIGNAL_HEADER_BYTES * ns;
    let mut out = Vec::with_capacity(header_bytes + n * ns * 2);
    push_field(&mut out, "0", 8)?;
    push_field(&mut out, &opts.patient_id, 80)?;
    push_field(&mut out, &opts.recording_id, 80)?;
    push_field(&mut out, &opts.start_date, 8)?;
    push_field(&mut out, &opts.start_time, 8)?;
    push_field(&mut out, &header_bytes.to_string(), 8)?;
    push_field(&mut out, "", 44)?;
    push_field(&mut out, &n_records.to_string(), 8)?;
    push_field(&mut out, &fit_number(opts.record_duration_s)?, 8)?;
    push_field(&mut out, &ns.to_string(), 4)?;
    for label in &rec.channels {
        push_field(&mut out, label, 16)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &opts.physical_dimension, 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &pmin_s, 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &pmax_s, 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &opts.digital_min.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &opts.digital_max.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 80)?;
    }
    for _ in 0..ns {
        push_field(&mut out, &spr.to_string(), 8)?;
    }
    for _ in 0..ns {
        push_field(&mut out, "", 32)?;
    }
    debug_assert_eq!(out.len(), header_bytes);

    for r in 0..n_records {
        for ch in &rec.data {
            for &v in &ch[r * spr..(r + 1) * spr] {
                out.extend_from_slice(&sig.to_digital(v).to_le_bytes());
            }
        }
    }
    Ok(out)
}
