//! Result records and their on-disk formats.
//!
//! CSV: one comment line, a header row, then one row per sample.
//!
//! ```text
//! # engine=torus lambda=<λ> q=<q> h=<h> em2_max=<..> em3=<..> drift_max=<..> tolerance=<..> verdict=pass a=<a_1;..> b=<b_1;..>
//! r,f_1,f_2,df_1,df_2
//! 0,1,1,0.5,0
//! ```
//!
//! JSON lines: a `{"kind":"summary",...}` object carrying the same fields as
//! the comment line (residuals nested under `residual`), then one
//! `{"kind":"sample","r":..,"f":[..],"df":[..]}` object per row.
//!
//! Derivatives are with respect to the unit parameter `r ∈ [0, 1]`; the
//! physical arclength is `h r`. Floats use the shortest representation that
//! reads back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dirichlet_einstein::stencil::DerivativeStencil;
use dirichlet_einstein::{residual_report, MetricPath, ResidualReport, SpaceData, Verdict};
use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::CliError;

const SLOPE_STENCIL: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub em2_max: f64,
    pub em3: f64,
    pub drift_max: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl From<&ResidualReport> for ResidualSummary {
    fn from(r: &ResidualReport) -> Self {
        Self {
            em2_max: r.max_em2(),
            em3: r.em3_residual,
            drift_max: r.max_drift,
            tolerance: r.tolerance,
            verdict: r.verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub engine: String,
    pub lambda: f64,
    pub q: f64,
    pub h: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub residual: ResidualSummary,
    pub samples: Vec<Sample>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Summary {
        engine: String,
        lambda: f64,
        q: f64,
        h: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        residual: ResidualSummary,
    },
    Sample(Sample),
}

impl ResultRecord {
    pub fn new(engine: &str, q: f64, a: &[f64], b: &[f64], path: &MetricPath, report: &ResidualReport) -> Self {
        let samples = (0..path.len())
            .map(|j| {
                let (f, df, _) = path.sample(j);
                Sample {
                    r: path.grid()[j],
                    f,
                    df,
                }
            })
            .collect();
        Self {
            engine: engine.to_string(),
            lambda: path.lambda(),
            q,
            h: path.lapse(),
            a: a.to_vec(),
            b: b.to_vec(),
            residual: report.into(),
            samples,
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Rebuilds the metric path. Second derivatives are nine-point finite
    /// differences of the stored slopes.
    pub fn to_path(&self) -> dirichlet_einstein::Result<MetricPath> {
        let n = self.n();
        let grid: Vec<f64> = self.samples.iter().map(|s| s.r).collect();
        let rows = |pick: fn(&Sample) -> &Vec<f64>| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| self.samples.iter().map(|s| pick(s)[i]).collect())
                .collect()
        };
        let (f, df) = (rows(|s| &s.f), rows(|s| &s.df));
        let d = DerivativeStencil::of_width(&grid, 1, SLOPE_STENCIL.min(grid.len()))?;
        let ddf = df.iter().map(|row| d.apply(row)).collect();
        MetricPath::new(self.lambda, self.h, grid, f, df, ddf)
    }

    /// Re-runs the residual check on the stored table.
    pub fn recheck(&self, space: &SpaceData, tol: f64) -> dirichlet_einstein::Result<ResidualReport> {
        residual_report(space, &self.to_path()?, tol)
    }

    fn header_line(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let r = &self.residual;
        let verdict = if r.verdict.passed() { "pass" } else { "fail" };
        format!(
            "# engine={} lambda={} q={} h={} em2_max={} em3={} drift_max={} tolerance={} verdict={} a={} b={}",
            self.engine,
            self.lambda,
            self.q,
            self.h,
            r.em2_max,
            r.em3,
            r.drift_max,
            r.tolerance,
            verdict,
            join(&self.a),
            join(&self.b)
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        writeln!(out, "{}", self.header_line())?;
        let n = self.n();
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["r".to_string()];
        head.extend((1..=n).map(|i| format!("f_{i}")));
        head.extend((1..=n).map(|i| format!("df_{i}")));
        w.write_record(&head)?;
        for s in &self.samples {
            let row = std::iter::once(s.r)
                .chain(s.f.iter().copied())
                .chain(s.df.iter().copied());
            w.write_record(row.map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), CliError> {
        let summary = Line::Summary {
            engine: self.engine.clone(),
            lambda: self.lambda,
            q: self.q,
            h: self.h,
            a: self.a.clone(),
            b: self.b.clone(),
            residual: self.residual.clone(),
        };
        serde_json::to_writer(&mut out, &summary)?;
        out.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut out, &Line::Sample(s.clone()))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Record(m);
        let mut first = String::new();
        input.read_line(&mut first)?;
        let meta = first
            .trim_end()
            .strip_prefix('#')
            .ok_or_else(|| bad("missing '#' header line".into()))?;
        let mut rec = ResultRecord {
            engine: String::new(),
            lambda: f64::NAN,
            q: f64::NAN,
            h: f64::NAN,
            a: Vec::new(),
            b: Vec::new(),
            residual: ResidualSummary {
                em2_max: f64::NAN,
                em3: f64::NAN,
                drift_max: f64::NAN,
                tolerance: f64::NAN,
                verdict: Verdict::Fail,
            },
            samples: Vec::new(),
        };
        let num = |k: &str, v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad value for {k}: {v}")));
        for kv in meta.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("bad header field {kv}")))?;
            match k {
                "engine" => rec.engine = v.to_string(),
                "lambda" => rec.lambda = num(k, v)?,
                "q" => rec.q = num(k, v)?,
                "h" => rec.h = num(k, v)?,
                "em2_max" => rec.residual.em2_max = num(k, v)?,
                "em3" => rec.residual.em3 = num(k, v)?,
                "drift_max" => rec.residual.drift_max = num(k, v)?,
                "tolerance" => rec.residual.tolerance = num(k, v)?,
                "verdict" => {
                    rec.residual.verdict = match v {
                        "pass" => Verdict::Pass,
                        "fail" => Verdict::Fail,
                        _ => return Err(bad(format!("bad verdict {v}"))),
                    }
                }
                "a" | "b" => {
                    let vals = v.split(';').map(|x| num(k, x)).collect::<Result<Vec<_>, _>>()?;
                    if k == "a" {
                        rec.a = vals
                    } else {
                        rec.b = vals
                    }
                }
                _ => return Err(bad(format!("unknown header field {k}"))),
            }
        }
        let n = rec.a.len();
        if n == 0 || rec.b.len() != n || [rec.lambda, rec.q, rec.h].iter().any(|v| v.is_nan()) {
            return Err(bad("incomplete header line".into()));
        }
        let mut r = csv::Reader::from_reader(input);
        if r.headers()?.len() != 1 + 2 * n {
            return Err(bad(format!("expected {} columns", 1 + 2 * n)));
        }
        for row in r.records() {
            let row = row?;
            let vals = row.iter().map(|x| num("sample", x)).collect::<Result<Vec<_>, _>>()?;
            if vals.len() != 1 + 2 * n {
                return Err(bad(format!("expected {} columns", 1 + 2 * n)));
            }
            rec.samples.push(Sample {
                r: vals[0],
                f: vals[1..=n].to_vec(),
                df: vals[n + 1..].to_vec(),
            });
        }
        Ok(rec)
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, CliError> {
        let mut rec: Option<ResultRecord> = None;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match (serde_json::from_str::<Line>(&line)?, rec.as_mut()) {
                (
                    Line::Summary {
                        engine,
                        lambda,
                        q,
                        h,
                        a,
                        b,
                        residual,
                    },
                    None,
                ) => {
                    rec = Some(ResultRecord {
                        engine,
                        lambda,
                        q,
                        h,
                        a,
                        b,
                        residual,
                        samples: Vec::new(),
                    })
                }
                (Line::Sample(s), Some(r)) => {
                    if s.f.len() != r.n() || s.df.len() != r.n() {
                        return Err(CliError::Record("sample width does not match the summary".into()));
                    }
                    r.samples.push(s)
                }
                (Line::Summary { .. }, Some(_)) => return Err(CliError::Record("duplicate summary line".into())),
                (Line::Sample(_), None) => return Err(CliError::Record("sample before summary line".into())),
            }
        }
        rec.ok_or_else(|| CliError::Record("empty record".into()))
    }

    /// Reads a record, choosing the format from the file extension.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = BufReader::new(fs::File::open(path).map_err(|e| CliError::io(path, e))?);
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => Self::read_jsonl(file),
            _ => Self::read_csv(file),
        }
    }

    /// Writes `dir/stem.{csv,jsonl}` and returns the written paths.
    pub fn emit(&self, dir: &Path, stem: &str, formats: &[Format]) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        for &fmt in formats {
            let path = dir.join(format!("{stem}.{}", fmt.extension()));
            let file = BufWriter::new(fs::File::create(&path).map_err(|e| CliError::io(&path, e))?);
            match fmt {
                Format::Csv => self.write_csv(file)?,
                Format::Jsonl => self.write_jsonl(file)?,
            }
            written.push(path);
        }
        Ok(written)
    }

    /// One-line human summary.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let r = &self.residual;
        let _ = write!(
            s,
            "{}: lambda = {}, q = {}, h = {}, max residual = {:.3e} ({})",
            self.engine,
            self.lambda,
            self.q,
            self.h,
            r.em2_max.max(r.em3).max(r.drift_max),
            if r.verdict.passed() { "pass" } else { "fail" }
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ResultRecord {
        let exp = |r: f64| (0.5 * r).exp();
        let samples = (0..=4)
            .map(|j| {
                let r = j as f64 / 4.0;
                Sample {
                    r,
                    f: vec![exp(r), 1.0],
                    df: vec![0.5 * exp(r), 0.0],
                }
            })
            .collect();
        ResultRecord {
            engine: "torus".into(),
            lambda: 0.1 + 0.2,
            q: 1.0,
            h: 1.0,
            a: vec![1.0, 1.0],
            b: vec![0.5f64.exp(), 1.0],
            residual: ResidualSummary {
                em2_max: 1e-17,
                em3: 3.3e-16,
                drift_max: 0.0,
                tolerance: 1e-8,
                verdict: Verdict::Pass,
            },
            samples,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rec = record();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == "r,f_1,f_2,df_1,df_2");
        assert_eq!(ResultRecord::read_csv(&buf[..]).unwrap(), rec);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let rec = record();
        let mut buf = Vec::new();
        rec.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"kind\":\"summary\""));
        assert_eq!(text.lines().count(), 1 + rec.samples.len());
        assert_eq!(ResultRecord::read_jsonl(&buf[..]).unwrap(), rec);
    }

    #[test]
    fn malformed_inputs() {
        assert!(ResultRecord::read_csv(&b"r,f_1\n0,1\n"[..]).is_err());
        assert!(ResultRecord::read_jsonl(&b"{\"kind\":\"sample\",\"r\":0,\"f\":[1],\"df\":[0]}\n"[..]).is_err());
        assert!(ResultRecord::read_jsonl(&b""[..]).is_err());
    }
}
