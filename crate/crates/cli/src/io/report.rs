//! CSV certification reports.
//!
//! Columns: `sample_id,true_label,predicted,p_min,d_min,simplex,db_cert,deepfool,ifgsm,wall_time_us`.
//! Floats are written as `{:.8e}` (nine significant digits), `inf` for an
//! unbounded value or a failed attack, and an empty field when the quantity
//! was not computed. Rows are sorted by `sample_id`.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const HEADER: [&str; 10] = [
    "sample_id",
    "true_label",
    "predicted",
    "p_min",
    "d_min",
    "simplex",
    "db_cert",
    "deepfool",
    "ifgsm",
    "wall_time_us",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CertRecord {
    pub sample_id: usize,
    pub true_label: usize,
    pub predicted: usize,
    pub p_min: f64,
    pub d_min: f64,
    pub simplex: f64,
    /// Only for one-hidden-layer networks.
    pub db_cert: Option<f64>,
    pub deepfool: Option<f64>,
    pub ifgsm: Option<f64>,
    pub wall_time_us: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("refusing to write an empty report")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.8e}")
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl CertRecord {
    fn fields(&self) -> [String; 10] {
        [
            self.sample_id.to_string(),
            self.true_label.to_string(),
            self.predicted.to_string(),
            format_float(self.p_min),
            format_float(self.d_min),
            format_float(self.simplex),
            optional(self.db_cert),
            optional(self.deepfool),
            optional(self.ifgsm),
            self.wall_time_us.map(|t| t.to_string()).unwrap_or_default(),
        ]
    }
}

pub fn write_report_to<W: Write>(records: &[CertRecord], out: W) -> Result<(), ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut sorted: Vec<&CertRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sample_id);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(HEADER)?;
    for r in sorted {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_report(records: &[CertRecord], path: &Path) -> Result<(), ReportError> {
    let file = File::create(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_report_to(records, io::BufWriter::new(file))
}

/// `name: mean=… min=…` for each numeric column, over finite entries.
pub fn summarize(records: &[CertRecord]) -> String {
    let columns: [(&str, Box<dyn Fn(&CertRecord) -> Option<f64>>); 6] = [
        ("p_min", Box::new(|r| Some(r.p_min))),
        ("d_min", Box::new(|r| Some(r.d_min))),
        ("simplex", Box::new(|r| Some(r.simplex))),
        ("db_cert", Box::new(|r| r.db_cert)),
        ("deepfool", Box::new(|r| r.deepfool)),
        ("ifgsm", Box::new(|r| r.ifgsm)),
    ];
    let mut parts = vec![format!("samples={}", records.len())];
    for (name, get) in &columns {
        let vals: Vec<f64> = records.iter().filter_map(get).collect();
        if vals.is_empty() {
            continue;
        }
        let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let mut part = format!("{name}: mean={} min={}", format_float(mean), format_float(min));
        if finite.len() < vals.len() {
            part.push_str(&format!(" unbounded={}", vals.len() - finite.len()));
        }
        parts.push(part);
    }
    parts.join("; ")
}
