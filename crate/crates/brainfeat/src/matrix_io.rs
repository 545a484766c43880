//! Feature matrix CSV files.
//!
//! Layout: `recording_id`, one column per serialized feature label, then
//! `label,split`. Missing cells are written empty.

use std::path::Path;

use brainfeat_core::dataset::{FeatureMatrix, RowInfo};
use brainfeat_core::features::FeatureLabel;
use brainfeat_core::recording::{ClassLabel, Split};

use crate::error::Error;

pub fn write_feature_csv(path: &Path, m: &FeatureMatrix) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = Vec::with_capacity(m.n_cols() + 3);
    header.push("recording_id".to_string());
    header.extend(m.labels.iter().map(|l| l.to_string()));
    header.push("label".into());
    header.push("split".into());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..m.n_rows() {
        rec.clear();
        rec.push(m.row_ids[i].clone());
        for (v, miss) in m.values[i].iter().zip(&m.missing[i]) {
            rec.push(if *miss { String::new() } else { format!("{v}") });
        }
        rec.push(m.y[i].map(|l| l.as_str().to_string()).unwrap_or_default());
        rec.push(m.split[i].map(|s| s.as_str().to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureMatrix, Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let n = headers.len();
    if n < 3 || &headers[0] != "recording_id" || &headers[n - 2] != "label" || &headers[n - 1] != "split" {
        return Err(Error::Data(format!(
            "{}: expected recording_id, feature columns, label, split",
            path.display()
        )));
    }
    let labels = headers
        .iter()
        .skip(1)
        .take(n - 3)
        .map(|h| FeatureLabel::parse(h).map_err(|e| Error::Data(format!("{}: column `{h}`: {e}", path.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut m = FeatureMatrix::empty(labels);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |what: &str| Error::Data(format!("{}: row {}: {what}", path.display(), row + 1));
        let mut values = Vec::with_capacity(n - 3);
        let mut missing = Vec::with_capacity(n - 3);
        for cell in rec.iter().skip(1).take(n - 3) {
            if cell.is_empty() {
                values.push(0.0);
                missing.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| bad("non-numeric cell"))?;
                if !v.is_finite() {
                    return Err(bad("non-finite value"));
                }
                values.push(v);
                missing.push(false);
            }
        }
        let label = match &rec[n - 2] {
            "" => None,
            s => Some(ClassLabel::parse(s).ok_or_else(|| bad("unknown label"))?),
        };
        let split = match &rec[n - 1] {
            "" => None,
            s => Some(Split::parse(s).ok_or_else(|| bad("unknown split"))?),
        };
        m.push_row(
            RowInfo {
                id: rec[0].to_string(),
                label,
                split,
            },
            values,
            missing,
        )?;
    }
    Ok(m)
}
