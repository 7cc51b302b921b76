use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::{GreekEstimate, MethodSpec};
use crate::error::{Error, Result};
use crate::estimators::{GreekKind, OptionKind};

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

impl CellStatus {
    fn encode(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::Failed(msg) => format!("error: {msg}"),
        }
    }

    fn decode(s: &str) -> Self {
        match s.strip_prefix("error: ") {
            Some(msg) => CellStatus::Failed(msg.into()),
            None if s == "ok" => CellStatus::Ok,
            None => CellStatus::Failed(s.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub option: OptionKind,
    pub greek: GreekKind,
    pub strike: f64,
    pub d: usize,
    pub method: MethodSpec,
    pub estimate: GreekEstimate,
    pub vrf: f64,
    pub seconds: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

const HEADER: [&str; 13] = [
    "option",
    "greek",
    "K",
    "d",
    "method",
    "mean",
    "std_err",
    "vrf",
    "seconds",
    "var_of_means",
    "m_batches",
    "n_samples",
    "status",
];

/// 17 significant digits; parses back to the same bits.
fn full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Six significant digits for tables.
type CellText = fn(&ReportRow) -> String;

fn six(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=9).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("CSV: {e}"))
}

impl ExperimentReport {
    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.status != CellStatus::Ok)
    }

    pub fn is_complete(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn find(
        &self,
        option: OptionKind,
        greek: GreekKind,
        strike: f64,
        d: usize,
        method: MethodSpec,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.option == option
                && r.greek == greek
                && r.strike == strike
                && r.d == d
                && r.method == method
        })
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER).map_err(csv_err)?;
        for r in &self.rows {
            let e = &r.estimate;
            w.write_record([
                r.option.to_string(),
                r.greek.to_string(),
                full(r.strike),
                r.d.to_string(),
                r.method.to_string(),
                full(e.mean),
                full(e.std_err),
                full(r.vrf),
                full(r.seconds),
                full(e.var_of_means),
                e.m_batches.to_string(),
                e.n_samples.to_string(),
                r.status.encode(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Config(format!("CSV: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().ne(HEADER) {
            return Err(Error::Config(format!("unexpected CSV header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = i + 2;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let num = |k: usize| -> Result<f64> {
                field(k).parse().map_err(|_| {
                    Error::Config(format!(
                        "line {line}: bad number `{}` in `{}`",
                        field(k),
                        HEADER[k]
                    ))
                })
            };
            let int = |k: usize| -> Result<usize> {
                field(k).parse().map_err(|_| {
                    Error::Config(format!(
                        "line {line}: bad integer `{}` in `{}`",
                        field(k),
                        HEADER[k]
                    ))
                })
            };
            rows.push(ReportRow {
                option: field(0).parse()?,
                greek: field(1).parse()?,
                strike: num(2)?,
                d: int(3)?,
                method: field(4).parse()?,
                estimate: GreekEstimate {
                    mean: num(5)?,
                    std_err: num(6)?,
                    var_of_means: num(9)?,
                    m_batches: int(10)?,
                    n_samples: int(11)?,
                },
                vrf: num(7)?,
                seconds: num(8)?,
                status: CellStatus::decode(field(12)),
            });
        }
        Ok(Self { rows })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
        self.write_csv(io::BufWriter::new(file))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        Self::read_csv(io::BufReader::new(file))
    }

    /// Three tables per option (VRFs, Greek values ×10⁻³, seconds), with
    /// one column per method.
    pub fn to_markdown(&self) -> String {
        let mut options: Vec<OptionKind> = Vec::new();
        let mut methods: Vec<MethodSpec> = Vec::new();
        for r in &self.rows {
            if !options.contains(&r.option) {
                options.push(r.option);
            }
            if !methods.contains(&r.method) {
                methods.push(r.method);
            }
        }
        let mut out = String::new();
        for option in options {
            let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.option == option).collect();
            let mut keys: Vec<(GreekKind, f64, usize)> = Vec::new();
            for r in &rows {
                if !keys.contains(&(r.greek, r.strike, r.d)) {
                    keys.push((r.greek, r.strike, r.d));
                }
            }
            let tables: [(&str, CellText); 3] = [
                ("VRFs", |r| six(r.vrf)),
                ("Greek values (×10⁻³)", |r| six(r.estimate.mean * 1e3)),
                ("Simulation times (s)", |r| six(r.seconds)),
            ];
            for (title, cell) in tables {
                let _ = writeln!(out, "### {option}: {title}\n");
                let _ = write!(out, "| Greek | K | d |");
                for m in &methods {
                    let _ = write!(out, " {m} |");
                }
                let _ = write!(out, "\n|---|---|---|");
                out.push_str(&"---|".repeat(methods.len()));
                out.push('\n');
                for &(greek, k, d) in &keys {
                    let _ = write!(out, "| {greek} | {k} | {d} |");
                    for &m in &methods {
                        let text = match rows
                            .iter()
                            .find(|r| (r.greek, r.strike, r.d, r.method) == (greek, k, d, m))
                        {
                            Some(r) if r.status == CellStatus::Ok => cell(r),
                            Some(_) => "failed".into(),
                            None => String::new(),
                        };
                        let _ = write!(out, " {text} |");
                    }
                    out.push('\n');
                }
                out.push('\n');
            }
        }
        out
    }
}
