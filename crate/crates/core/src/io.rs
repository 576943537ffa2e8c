//! CSV ingestion and emission, and the experiment spec file format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, PickandsCurve};
use crate::experiments::{EstimatorSpec, ExperimentResult, ExperimentSpec, Metric, QCurve};
use crate::models::{ModelParams, Sample, TailModel};
use crate::second_order::SecondOrderEstimate;
use crate::tail_probability::GpdFit;

/// Significant digits of every number written to CSV.
pub const DIGITS: usize = 15;

/// `v` rounded to 15 significant digits, in plain decimal notation.
pub fn format_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{:.*e}", DIGITS - 1, v).parse().expect("formatted float");
    format!("{rounded}")
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a numeric CSV file. The first line is a header iff one of its
/// cells is not a finite number. With `expected_d`, the column count must
/// match.
pub fn load_dataset(path: impl AsRef<Path>, expected_d: Option<usize>) -> Result<Sample> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut values = Vec::new();
    let mut d = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if std::mem::take(&mut first) && record.iter().any(|c| parse_cell(c).is_none()) {
            d = Some(record.len());
            continue;
        }
        let width = *d.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: record.len().min(width) + 1,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: j + 1,
                message: format!("{cell:?} is not a finite number"),
            })?;
            values.push(v);
        }
    }
    let d = d.unwrap_or(0);
    if values.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    if d < 2 {
        return Err(Error::arg(format!("{}: need at least 2 columns, found {d}", path.display())));
    }
    if let Some(e) = expected_d {
        if e != d {
            return Err(Error::arg(format!("{}: expected {e} columns, found {d}", path.display())));
        }
    }
    Ok(Sample::from_rows(values, d)?.with_source(path))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::io(path, source))
}

pub fn sample_csv(sample: &Sample) -> String {
    let header: Vec<String> = (1..=sample.d()).map(|j| format!("x{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for row in sample.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_num(*v)).collect();
        out += &cells.join(",");
        out.push('\n');
    }
    out
}

pub fn pickands_csv(curve: &PickandsCurve) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in curve.nodes() {
        let _ = writeln!(out, "{},{}", format_num(t), format_num(v));
    }
    out
}

pub fn qcurve_csv(curve: &QCurve) -> String {
    let mut out = String::from("theta,radius\n");
    for (theta, b) in curve.nodes() {
        let _ = writeln!(out, "{},{}", format_num(theta), format_num(b));
    }
    out
}

pub fn rho_csv(est: &SecondOrderEstimate) -> String {
    let xs: Vec<String> = est.eval_point.iter().map(|v| format_num(*v)).collect();
    format!(
        "{}\n{},{},{},{},{},{}\n",
        est.csv_header(),
        format_num(est.rho_hat),
        est.k_rho,
        format_num(est.a),
        format_num(est.r),
        xs.join(","),
        est.capped
    )
}

pub fn gpd_fits_csv(fits: &[GpdFit]) -> String {
    let mut out = format!("{}\n", GpdFit::csv_header());
    for f in fits {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_num(f.threshold),
            format_num(f.sigma),
            format_num(f.gamma),
            f.exceedances
        );
    }
    out
}

pub fn experiment_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("replicate,estimator,metric,value\n");
    for r in &result.rows {
        let _ = writeln!(out, "{},{},{},{}", r.replicate, r.estimator, r.metric, format_num(r.value));
    }
    out
}

pub fn summary_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("estimator,metric,min,q1,median,q3,max,mean\n");
    for s in result.summary() {
        let nums: Vec<String> = [s.min, s.q1, s.median, s.q3, s.max, s.mean].iter().map(|v| format_num(*v)).collect();
        let _ = writeln!(out, "{},{},{}", s.estimator, s.metric, nums.join(","));
    }
    out
}

pub fn write_sample_csv(sample: &Sample, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &sample_csv(sample))
}

pub fn write_pickands_csv(curve: &PickandsCurve, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &pickands_csv(curve))
}

pub fn write_qcurve_csv(curve: &QCurve, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &qcurve_csv(curve))
}

pub fn write_experiment_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &experiment_csv(result))
}

pub fn write_summary_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &summary_csv(result))
}

/// An experiment spec file: the spec plus optional output locations,
/// resolved against the directory of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub spec: ExperimentSpec,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

const SPEC_KEYS: &[&str] = &[
    "model", "beta", "nu", "theta", "tau", "s", "n", "replicates", "grid", "estimators", "metrics", "point",
    "seed", "k", "a", "r", "k_rho", "kappa", "rho", "clamp", "rho_floor", "rho_point", "output", "summary",
];

fn parse_list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// Parses a flat `key = value` spec (one pair per line, `#` comments).
pub fn parse_spec(text: &str, path: &Path) -> Result<SpecFile> {
    let mut entries: HashMap<&str, (u64, &str)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            column: 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
        let key = key.trim();
        if !SPEC_KEYS.contains(&key) {
            return Err(bad(format!("unknown key {key:?}")));
        }
        if entries.insert(key, (line_no, value.trim())).is_some() {
            return Err(bad(format!("duplicate key {key:?}")));
        }
    }
    let value_err = |key: &str, message: String| {
        let line = entries.get(key).map_or(0, |e| e.0);
        Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 1,
            message: format!("{key}: {message}"),
        }
    };
    let get = |key: &str| entries.get(key).map(|e| e.1);
    let num = |key: &str| -> Result<Option<f64>> {
        get(key)
            .map(|v| v.parse::<f64>().map_err(|_| value_err(key, format!("{v:?} is not a number"))))
            .transpose()
    };
    let count = |key: &str| -> Result<Option<usize>> {
        get(key)
            .map(|v| v.parse::<usize>().map_err(|_| value_err(key, format!("{v:?} is not a count"))))
            .transpose()
    };
    let point = |key: &str| -> Result<Option<Vec<f64>>> {
        get(key)
            .map(|v| {
                parse_list(v)
                    .into_iter()
                    .map(|c| c.parse::<f64>().map_err(|_| value_err(key, format!("{c:?} is not a number"))))
                    .collect()
            })
            .transpose()
    };

    let params = ModelParams {
        beta: num("beta")?,
        nu: num("nu")?,
        theta: num("theta")?,
        tau: num("tau")?,
        s: num("s")?,
    };
    let tag = get("model").ok_or_else(|| value_err("model", "missing".into()))?;
    let model = TailModel::from_tag(tag, &params)?;
    let n = count("n")?.ok_or_else(|| value_err("n", "missing".into()))?;
    let replicates = count("replicates")?.ok_or_else(|| value_err("replicates", "missing".into()))?;

    let mut spec = ExperimentSpec::new(model, n, replicates, 0);
    if let Some(seed) = get("seed") {
        spec.base_seed = seed.parse().map_err(|_| value_err("seed", format!("{seed:?} is not an unsigned integer")))?;
    }
    if let Some(grid) = count("grid")? {
        spec.grid = grid;
    }
    if let Some(list) = get("estimators") {
        spec.estimators = parse_list(list).into_iter().map(str::parse).collect::<Result<Vec<EstimatorSpec>>>()?;
    }
    let eval_point = point("point")?;
    if let Some(list) = get("metrics") {
        spec.metrics = parse_list(list)
            .into_iter()
            .map(|m| match m {
                "point" => Ok(Metric::Point(eval_point.clone().unwrap_or_else(|| vec![0.5, 0.5]))),
                "l1" => Ok(Metric::L1),
                "l1q" => Ok(Metric::L1Q),
                "rho" => Ok(Metric::Rho),
                other => Err(value_err("metrics", format!("unknown metric {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
    }

    let mut config = EstimatorConfig::for_sample_size(n);
    config.grid = spec.grid;
    if let Some(k) = count("k")? {
        config.k = k;
    }
    if let Some(a) = num("a")? {
        config.a = a;
    }
    if let Some(r) = num("r")? {
        config.r = r;
    }
    if let Some(k) = count("k_rho")? {
        config.k_rho = k;
    }
    if let Some(k) = count("kappa")? {
        config.kappa = k;
    }
    config.rho_override = num("rho")?;
    if let Some(c) = get("clamp") {
        config.clamp = c.parse().map_err(|_| value_err("clamp", format!("{c:?} is not true or false")))?;
    }
    if let Some(f) = num("rho_floor")? {
        config.rho_floor = f;
    }
    config.rho_point = point("rho_point")?;
    spec.config = config;
    spec.validate()?;

    let base = path.parent().unwrap_or(Path::new(""));
    Ok(SpecFile {
        spec,
        output: get("output").map(|p| base.join(p)),
        summary: get("summary").map(|p| base.join(p)),
    })
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SpecFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::io(path, source))?;
    parse_spec(&text, path)
}

/// Spec file text that parses back to `spec`.
pub fn spec_to_text(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model = {}", spec.model.tag());
    let p = spec.model.params();
    for (key, v) in [("beta", p.beta), ("nu", p.nu), ("theta", p.theta), ("tau", p.tau), ("s", p.s)] {
        if let Some(v) = v {
            let _ = writeln!(out, "{key} = {v}");
        }
    }
    let _ = writeln!(out, "n = {}", spec.n);
    let _ = writeln!(out, "replicates = {}", spec.replicates);
    let _ = writeln!(out, "grid = {}", spec.grid);
    let _ = writeln!(out, "seed = {}", spec.base_seed);
    let est: Vec<String> = spec.estimators.iter().map(|e| e.to_string()).collect();
    let _ = writeln!(out, "estimators = {}", est.join(","));
    let metrics: Vec<&str> = spec.metrics.iter().map(|m| m.name()).collect();
    let _ = writeln!(out, "metrics = {}", metrics.join(","));
    if let Some(Metric::Point(x)) = spec.metrics.iter().find(|m| matches!(m, Metric::Point(_))) {
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "point = {}", xs.join(","));
    }
    let c = &spec.config;
    let _ = writeln!(out, "k = {}", c.k);
    let _ = writeln!(out, "a = {}", c.a);
    let _ = writeln!(out, "r = {}", c.r);
    let _ = writeln!(out, "k_rho = {}", c.k_rho);
    let _ = writeln!(out, "kappa = {}", c.kappa);
    if let Some(rho) = c.rho_override {
        let _ = writeln!(out, "rho = {rho}");
    }
    let _ = writeln!(out, "clamp = {}", c.clamp);
    let _ = writeln!(out, "rho_floor = {}", c.rho_floor);
    if let Some(x) = &c.rho_point {
        let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "rho_point = {}", xs.join(","));
    }
    out
}
