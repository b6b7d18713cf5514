//! Report files. Floats are written with 17 significant digits so that
//! values round-trip exactly; identical runs give byte-identical CSVs.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::Format;
use crate::error::CliError;
use crate::experiment::ExperimentReport;

pub const REPORT_JSON: &str = "report.json";
pub const ERROR_CURVE_CSV: &str = "error_curve.csv";
pub const LANCZOS_CSV: &str = "lanczos.csv";
pub const MEASURE_CSV: &str = "measure.csv";
pub const DISTRIBUTION_CSV: &str = "distribution.csv";

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Relative errors are clipped to `[0, 1]` on export only.
fn clipped(x: f64) -> String {
    float(x.clamp(0.0, 1.0))
}

/// Pretty JSON with every float in `{:.16e}` form.
struct Precise(PrettyFormatter<'static>);

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn error_curve_csv(r: &ExperimentReport) -> String {
    let c = &r.error_curve;
    let mut s = String::from("n,mean_rel_error,min_rel_error,max_rel_error\n");
    for i in 0..c.len() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, clipped(c.mean[i]), clipped(c.min[i]), clipped(c.max[i]));
    }
    s
}

pub fn lanczos_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("k,a_k,b_k\n");
    for (k, a) in r.lanczos.a.iter().enumerate() {
        let b = if k == 0 { String::new() } else { float(r.lanczos.b[k - 1]) };
        let _ = writeln!(s, "{k},{},{b}", float(*a));
    }
    s
}

pub fn measure_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("lambda,weight\n");
    for atom in r.measure.atoms() {
        let _ = writeln!(s, "{},{}", float(atom.lambda), float(atom.weight));
    }
    s
}

pub fn distribution_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("k,p_k\n");
    for (k, p) in r.distribution.iter().enumerate() {
        let _ = writeln!(s, "{k},{}", float(*p));
    }
    s
}

/// Writes the requested formats into `dir`, creating it if needed.
pub fn export(report: &ExperimentReport, formats: &[Format], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut files: Vec<(&str, String)> = Vec::new();
    if formats.contains(&Format::Json) {
        files.push((REPORT_JSON, to_json(report)));
    }
    if formats.contains(&Format::Csv) {
        files.push((ERROR_CURVE_CSV, error_curve_csv(report)));
        files.push((LANCZOS_CSV, lanczos_csv(report)));
        files.push((MEASURE_CSV, measure_csv(report)));
        files.push((DISTRIBUTION_CSV, distribution_csv(report)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}
