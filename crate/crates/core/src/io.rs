//! Plain-text CSV persistence for datasets, truths and chains.
//!
//! Files are UTF-8, comma separated, LF terminated, with a header row.
//! Reals are written with 17 significant digits so a save/load round trip
//! is bit exact. Lines starting with `#` are treated as comments.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::data::{IntradayPanel, PanelError, SyntheticTruth};
use crate::model::{Dataset, ModelError, Params};
use crate::sampler::ChainSample;

pub const DATASET_HEADER: [&str; 3] = ["date", "return", "rv"];
pub const CHAIN_HEADER: [&str; 8] = [
    "iter",
    "phi",
    "mu",
    "xi",
    "sigma_eta_sq",
    "sigma_u_sq",
    "accept",
    "delta_h",
];
pub const INTRADAY_HEADER: [&str; 3] = ["date", "time", "return"];

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: empty dataset")]
    Empty { path: PathBuf },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Panel {
        path: PathBuf,
        #[source]
        source: PanelError,
    },
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Header-indexed CSV reader that reports 1-based line numbers.
struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
    header: csv::StringRecord,
}

impl Table {
    fn open(path: &Path) -> Result<Self, DataError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(file);
        let header = reader
            .headers()
            .map_err(|e| csv_err(path, e))?
            .clone();
        Ok(Table {
            path: path.to_path_buf(),
            reader,
            header,
        })
    }

    fn column(&self, name: &str) -> Result<usize, DataError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// Iterates over `(line, record)` pairs.
    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, csv::StringRecord), DataError>> + '_ {
        let path = self.path.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|e| csv_err(&path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            Ok((line, rec))
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DataError::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    }
}

fn field<'r>(path: &Path, line: u64, rec: &'r csv::StringRecord, idx: usize, name: &str) -> Result<&'r str, DataError> {
    rec.get(idx).ok_or_else(|| DataError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("missing value for '{name}'"),
    })
}

fn parse_real(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, DataError> {
    let s = field(path, line, rec, idx, name)?;
    s.parse::<f64>().map_err(|_| DataError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse '{s}' as a number in column '{name}'"),
    })
}

fn parse_finite(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, DataError> {
    let x = parse_real(path, line, rec, idx, name)?;
    if !x.is_finite() {
        return Err(DataError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite value in column '{name}'"),
        });
    }
    Ok(x)
}

/// Writes `date,return,rv`.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    let mut w = create(path)?;
    let mut body = String::with_capacity(64 * dataset.len() + 16);
    body.push_str(&DATASET_HEADER.join(","));
    body.push('\n');
    for ((d, y), rv) in dataset.dates().iter().zip(dataset.returns()).zip(dataset.rv()) {
        body.push_str(&format!("{d},{},{}\n", fmt_real(*y), fmt_real(*rv)));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let mut table = Table::open(path)?;
    let cols = [
        table.column("date")?,
        table.column("return")?,
        table.column("rv")?,
    ];
    let (mut dates, mut returns, mut rv) = (Vec::new(), Vec::new(), Vec::new());
    let p = path.to_path_buf();
    for row in table.rows() {
        let (line, rec) = row?;
        dates.push(field(&p, line, &rec, cols[0], "date")?.to_string());
        returns.push(parse_finite(&p, line, &rec, cols[1], "return")?);
        let v = parse_finite(&p, line, &rec, cols[2], "rv")?;
        if v <= 0.0 {
            return Err(DataError::Parse {
                path: p,
                line,
                msg: format!("rv must be positive (ln RV undefined), found {v}"),
            });
        }
        rv.push(v);
    }
    if returns.is_empty() {
        return Err(DataError::Empty { path: p });
    }
    Dataset::with_dates(dates, returns, rv).map_err(|source| DataError::Model { path: p, source })
}

/// Writes the latent path as `date,h` and the parameters as `parameter,value`.
pub fn save_truth(truth: &SyntheticTruth, latent_path: &Path, params_path: &Path) -> Result<(), DataError> {
    let mut w = create(latent_path)?;
    let mut body = String::from("date,h\n");
    for (d, h) in truth.dataset.dates().iter().zip(&truth.latent) {
        body.push_str(&format!("{d},{}\n", fmt_real(*h)));
    }
    w.write_all(body.as_bytes()).map_err(io_err(latent_path))?;
    w.flush().map_err(io_err(latent_path))?;
    save_params(&truth.params, params_path)
}

pub fn save_params(params: &Params, path: &Path) -> Result<(), DataError> {
    let mut w = create(path)?;
    let mut body = String::from("parameter,value\n");
    for (name, v) in Params::NAMES.iter().zip(params.as_array()) {
        body.push_str(&format!("{name},{}\n", fmt_real(v)));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn load_params(path: &Path) -> Result<Params, DataError> {
    let mut table = Table::open(path)?;
    let (ki, vi) = (table.column("parameter")?, table.column("value")?);
    let p = path.to_path_buf();
    let mut vals = [None; 5];
    for row in table.rows() {
        let (line, rec) = row?;
        let key = field(&p, line, &rec, ki, "parameter")?;
        let Some(i) = Params::NAMES.iter().position(|n| *n == key) else {
            return Err(DataError::Parse {
                path: p,
                line,
                msg: format!("unknown parameter '{key}'"),
            });
        };
        vals[i] = Some(parse_finite(&p, line, &rec, vi, "value")?);
    }
    let mut out = [0.0; 5];
    for (i, v) in vals.iter().enumerate() {
        out[i] = v.ok_or_else(|| DataError::MissingColumn {
            path: p.clone(),
            column: Params::NAMES[i].to_string(),
        })?;
    }
    let params = Params::from_array(out);
    params
        .validate()
        .map_err(|source| DataError::Model { path: p, source })?;
    Ok(params)
}

pub fn load_latent(path: &Path) -> Result<Vec<f64>, DataError> {
    let mut table = Table::open(path)?;
    let hi = table.column("h")?;
    let p = path.to_path_buf();
    let mut h = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        h.push(parse_finite(&p, line, &rec, hi, "h")?);
    }
    Ok(h)
}

/// Writes the chain CSV and, when `latent_path` is given, one row per
/// stored sweep with the latent snapshot (`iter,h_1,...,h_T`).
pub fn save_chain(samples: &[ChainSample], path: &Path, latent_path: Option<&Path>) -> Result<(), DataError> {
    let mut w = create(path)?;
    let mut body = CHAIN_HEADER.join(",");
    body.push('\n');
    for s in samples {
        body.push_str(&s.iter.to_string());
        for v in s.params.as_array() {
            body.push(',');
            body.push_str(&fmt_real(v));
        }
        body.push_str(if s.accept { ",1," } else { ",0," });
        body.push_str(&fmt_real(s.delta_h));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;

    if let Some(lp) = latent_path {
        let t = samples
            .iter()
            .find_map(|s| s.latent.as_ref().map(Vec::len))
            .unwrap_or(0);
        let mut w = create(lp)?;
        let mut header = String::from("iter");
        for i in 1..=t {
            header.push_str(&format!(",h_{i}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes()).map_err(io_err(lp))?;
        for s in samples {
            let Some(h) = &s.latent else { continue };
            let mut row = s.iter.to_string();
            for x in h {
                row.push(',');
                row.push_str(&fmt_real(*x));
            }
            row.push('\n');
            w.write_all(row.as_bytes()).map_err(io_err(lp))?;
        }
        w.flush().map_err(io_err(lp))?;
    }
    Ok(())
}

/// Reads a chain CSV, attaching latent snapshots from `latent_path` by `iter`.
pub fn load_chain(path: &Path, latent_path: Option<&Path>) -> Result<Vec<ChainSample>, DataError> {
    let mut table = Table::open(path)?;
    let cols: Vec<usize> = CHAIN_HEADER
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_, _>>()?;
    let p = path.to_path_buf();
    let mut out = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let iter_s = field(&p, line, &rec, cols[0], "iter")?;
        let iter = iter_s.parse::<usize>().map_err(|_| DataError::Parse {
            path: p.clone(),
            line,
            msg: format!("cannot parse '{iter_s}' as an iteration number"),
        })?;
        let mut vals = [0.0; 5];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_finite(&p, line, &rec, cols[k + 1], CHAIN_HEADER[k + 1])?;
        }
        let accept = match field(&p, line, &rec, cols[6], "accept")? {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(DataError::Parse {
                    path: p,
                    line,
                    msg: format!("accept must be 0 or 1, found '{other}'"),
                })
            }
        };
        let delta_h = parse_real(&p, line, &rec, cols[7], "delta_h")?;
        if delta_h.is_nan() || delta_h == f64::NEG_INFINITY {
            return Err(DataError::Parse {
                path: p,
                line,
                msg: "delta_h must be finite or +inf".into(),
            });
        }
        out.push(ChainSample {
            iter,
            params: Params::from_array(vals),
            accept,
            delta_h,
            latent: None,
        });
    }
    if let Some(lp) = latent_path {
        let mut lt = Table::open(lp)?;
        let ii = lt.column("iter")?;
        let lpb = lp.to_path_buf();
        let mut snapshots = std::collections::HashMap::new();
        for row in lt.rows() {
            let (line, rec) = row?;
            let it = field(&lpb, line, &rec, ii, "iter")?
                .parse::<usize>()
                .map_err(|_| DataError::Parse {
                    path: lpb.clone(),
                    line,
                    msg: "bad iteration number".into(),
                })?;
            let h = (0..rec.len())
                .filter(|&k| k != ii)
                .map(|k| parse_finite(&lpb, line, &rec, k, "h"))
                .collect::<Result<Vec<_>, _>>()?;
            snapshots.insert(it, h);
        }
        for s in &mut out {
            s.latent = snapshots.remove(&s.iter);
        }
    }
    Ok(out)
}

/// Reads `date,time,return` rows into a panel, one day per distinct date in
/// order of first appearance. Rows of a day need not be contiguous.
pub fn load_intraday(path: &Path) -> Result<IntradayPanel, DataError> {
    let mut table = Table::open(path)?;
    let di = table.column("date")?;
    table.column("time")?;
    let ri = table.column("return")?;
    let p = path.to_path_buf();
    let mut dates: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut days: Vec<Vec<f64>> = Vec::new();
    for row in table.rows() {
        let (line, rec) = row?;
        let date = field(&p, line, &rec, di, "date")?.to_string();
        let r = parse_finite(&p, line, &rec, ri, "return")?;
        let k = *index.entry(date.clone()).or_insert_with(|| {
            dates.push(date);
            days.push(Vec::new());
            days.len() - 1
        });
        days[k].push(r);
    }
    if days.is_empty() {
        return Err(DataError::Empty { path: p });
    }
    IntradayPanel::with_dates(dates, days).map_err(|source| DataError::Panel { path: p, source })
}
