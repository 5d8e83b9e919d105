//! Report files: pretty JSON plus CSV tables whose leading `#` lines record
//! the arguments that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use prefpareto_core::experiment::{MatrixReport, TauCurveReport, TuneReport};
use serde_json::Value;

pub type Table = (Vec<&'static str>, Vec<Vec<String>>);

pub struct Written {
    pub files: Vec<PathBuf>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<PathBuf, String> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, provenance: &[String], (header, rows): Table) -> Result<PathBuf, String> {
    let path = dir.join(name);
    let mut out = String::new();
    for line in provenance {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| e.to_string())?;
    for r in rows {
        w.write_record(&r).map_err(|e| e.to_string())?;
    }
    let body = w.into_inner().map_err(|e| e.to_string())?;
    out.push_str(&String::from_utf8(body).map_err(|e| e.to_string())?);
    fs::write(&path, out).map_err(|e| format!("writing {}: {e}", path.display()))?;
    Ok(path)
}

fn provenance(command: &str, args: &Value) -> Vec<String> {
    vec![format!("command: {command}"), format!("args: {args}")]
}

pub fn tau_curve(dir: &Path, report: &TauCurveReport) -> Result<Written, String> {
    let args = serde_json::to_value(&report.args).map_err(|e| e.to_string())?;
    let prov = provenance("tau-curve", &args);
    let summary = report
        .summary
        .iter()
        .map(|s| {
            vec![s.indicator.to_string(), s.n_pairs.to_string(), s.runs.to_string(), num(s.tau_mean), num(s.tau_std)]
        })
        .collect();
    let runs = report
        .runs
        .iter()
        .map(|r| {
            let folds = r.per_fold.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";");
            vec![
                r.indicator.to_string(),
                r.n_pairs.to_string(),
                r.profile.to_string(),
                r.seed.to_string(),
                num(r.tau_mean),
                num(r.tau_std),
                folds,
            ]
        })
        .collect();
    let json = serde_json::to_value(report).map_err(|e| e.to_string())?;
    Ok(Written {
        files: vec![
            write_json(dir, "tau_curve.json", &json)?,
            write_csv(
                dir,
                "tau_curve.csv",
                &prov,
                (vec!["indicator", "n_pairs", "runs", "tau_mean", "tau_std"], summary),
            )?,
            write_csv(
                dir,
                "tau_runs.csv",
                &prov,
                (vec!["indicator", "n_pairs", "profile", "seed", "tau_mean", "tau_std", "per_fold"], runs),
            )?,
        ],
    })
}

pub fn matrix(dir: &Path, report: &MatrixReport) -> Result<Written, String> {
    let args = serde_json::to_value(&report.args).map_err(|e| e.to_string())?;
    let prov = provenance("matrix", &args);
    let cells = report
        .cells
        .iter()
        .map(|c| {
            let outcome = serde_json::to_value(c.outcome).map_err(|e| e.to_string())?;
            Ok(vec![
                c.row.to_string(),
                c.column.to_string(),
                num(c.pb_mean),
                num(c.pb_std),
                num(c.ib_mean),
                num(c.ib_std),
                outcome.as_str().unwrap_or_default().to_string(),
            ])
        })
        .collect::<Result<Vec<_>, String>>()?;
    let mut runs = Vec::new();
    for r in &report.runs {
        for (i, row) in report.indicators.iter().enumerate() {
            let mut line = vec![r.profile.to_string(), r.seed.to_string(), row.to_string(), num(r.pb[i])];
            line.extend(r.ib[i].iter().map(|v| num(*v)));
            runs.push(line);
        }
    }
    let mut run_header = vec!["profile", "seed", "row", "pb"];
    run_header.extend(["ib_HV", "ib_SP", "ib_MS", "ib_R2"]);
    let s = &report.summary;
    let mut summary_prov = prov.clone();
    summary_prov.push(format!(
        "wins: {}, ties: {}, losses: {}, better_or_equal: {}/16",
        s.wins,
        s.ties,
        s.losses,
        s.better_or_equal()
    ));
    let json = serde_json::to_value(report).map_err(|e| e.to_string())?;
    Ok(Written {
        files: vec![
            write_json(dir, "matrix.json", &json)?,
            write_csv(
                dir,
                "matrix.csv",
                &summary_prov,
                (vec!["row", "column", "pb_mean", "pb_std", "ib_mean", "ib_std", "outcome"], cells),
            )?,
            write_csv(dir, "matrix_runs.csv", &prov, (run_header, runs))?,
        ],
    })
}

pub fn tune(dir: &Path, report: &TuneReport) -> Result<Written, String> {
    let args = serde_json::to_value(&report.args).map_err(|e| e.to_string())?;
    let prov = provenance("tune-ranker", &args);
    let cells = report
        .cells
        .iter()
        .map(|c| vec![c.indicator.to_string(), num(c.reg), num(c.tau_mean), num(c.tau_std)])
        .collect();
    let selected =
        report.selected.iter().map(|c| vec![c.indicator.to_string(), num(c.train.reg), num(c.tau_mean)]).collect();
    let json = serde_json::to_value(report).map_err(|e| e.to_string())?;
    Ok(Written {
        files: vec![
            write_json(dir, "tune.json", &json)?,
            write_csv(dir, "tune.csv", &prov, (vec!["indicator", "reg", "tau_mean", "tau_std"], cells))?,
            write_csv(dir, "tune_selected.csv", &prov, (vec!["indicator", "reg", "tau_mean"], selected))?,
        ],
    })
}
