//! File output: trajectory CSV, ensemble summary JSON, field rasters.
//!
//! Every file is written to a temporary sibling first and renamed into place,
//! so a failed export never leaves a partial file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::harness::gradcheck::GradcheckRow;
use crate::harness::EnsembleSummary;
use crate::objectives::GridSpec;
use crate::record::{RunRecord, Termination};

/// Scientific notation with 13 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.12e}")
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// `k,ak,hk,x1..xp,gx1..gxp,dist`. Gradient cells are empty on rows without
/// a step, `dist` is empty when the optimum is unknown.
pub fn trajectory_csv(record: &RunRecord) -> String {
    let p = record.rows[0].x_hat.dim();
    let mut out = String::from("k,ak,hk");
    for i in 1..=p {
        write!(out, ",x{i}").unwrap();
    }
    for i in 1..=p {
        write!(out, ",gx{i}").unwrap();
    }
    out.push_str(",dist\n");
    for row in &record.rows {
        write!(out, "{},{},{}", row.k, fmt_num(row.a_k), fmt_num(row.h_k)).unwrap();
        for c in row.x_hat.coords() {
            write!(out, ",{}", fmt_num(*c)).unwrap();
        }
        match &row.step {
            Some(s) => s.g_hat.iter().for_each(|g| write!(out, ",{}", fmt_num(*g)).unwrap()),
            None => (0..p).for_each(|_| out.push(',')),
        }
        out.push(',');
        if let Some(d) = row.dist {
            out.push_str(&fmt_num(d));
        }
        out.push('\n');
    }
    out
}

pub fn summary_json(summary: &EnsembleSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Full record, including probe samples when kept.
pub fn record_json(record: &RunRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("record serializes");
    s.push('\n');
    s
}

/// One line per run: `run,seed,iterations,termination,final_dist`.
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("run,seed,iterations,termination,final_dist\n");
    for (i, r) in records.iter().enumerate() {
        let term = match &r.termination {
            Termination::MaxIter => "max_iter",
            Termination::StopRule { .. } => "stop_rule",
            Termination::Failure { .. } => "failure",
        };
        let dist = r.final_distance().map(fmt_num).unwrap_or_default();
        let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
        writeln!(out, "{i},{seed},{},{term},{dist}", r.iterations()).unwrap();
    }
    out
}

/// `x,y[,z],f_db` over the grid. Points inside the source floor get `NaN`.
pub fn field_raster_csv(model: &FieldModel, grid: &GridSpec) -> Result<String> {
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: grid.dim(),
        });
    }
    let names = ["x", "y", "z"];
    let mut out = names[..grid.dim()].join(",");
    out.push_str(",f_db\n");
    for x in grid.points() {
        for c in x.coords() {
            write!(out, "{},", fmt_num(*c)).unwrap();
        }
        let f = match model.eval(&x) {
            Ok(v) => v,
            Err(Error::DistanceTooSmall { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        writeln!(out, "{}", fmt_num(f)).unwrap();
    }
    Ok(out)
}

pub fn gradcheck_csv(rows: &[GradcheckRow]) -> String {
    let mut out = String::from("sigma,h,predicted_var,empirical_var,bias_bound,empirical_bias\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.sigma),
            fmt_num(r.h),
            fmt_num(r.predicted_var),
            fmt_num(r.empirical_var),
            fmt_num(r.bias_bound),
            fmt_num(r.empirical_bias)
        )
        .unwrap();
    }
    out
}

pub fn write_trajectory(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, trajectory_csv(record).as_bytes())
}

/// Writes `summary.json` and `runs.csv` into `dir`.
pub fn write_ensemble(records: &[RunRecord], summary: &EnsembleSummary, dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InsufficientEnsemble { needed: 1, got: 0 });
    }
    write_atomic(&dir.join("summary.json"), summary_json(summary).as_bytes())?;
    write_atomic(&dir.join("runs.csv"), runs_csv(records).as_bytes())
}
