//! Training history CSV: one row per epoch, written with enough digits to
//! reconstruct every value. Error columns are empty on epochs without an
//! evaluation pass.

use std::fs;
use std::path::Path;

use crate::loss::ResidualBundle;
use crate::trainer::EpochRecord;
use crate::{Error, Result};

pub const HISTORY_HEADER: &str = "epoch,lr,alpha,loss_total,loss_momentum,loss_poisson_div,\
loss_constitutive,loss_incompressibility,loss_pressure_gradient,loss_boundary,err_u,err_p,\
wall_seconds";

/// `precision` is the digit count after the decimal point in scientific
/// notation; 16 reproduces any f64 exactly on parse-back.
pub fn format_row(r: &EpochRecord, precision: usize) -> String {
    let f = |v: f64| format!("{v:.precision$e}");
    let opt = |v: Option<f64>| v.map(&f).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.epoch,
        f(r.lr),
        f(r.alpha),
        f(r.loss.total),
        f(r.loss.momentum),
        f(r.loss.poisson_div),
        f(r.loss.constitutive),
        f(r.loss.incompressibility),
        f(r.loss.pressure_gradient),
        f(r.loss.boundary),
        opt(r.err_u),
        opt(r.err_p),
        f(r.wall_seconds),
    )
}

pub fn write_history(path: &Path, records: &[EpochRecord], precision: usize) -> Result<()> {
    let mut text = String::with_capacity(HISTORY_HEADER.len() + 1 + records.len() * 256);
    text.push_str(HISTORY_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&format_row(r, precision));
        text.push('\n');
    }
    write_atomic(path, &text)
}

/// Write-then-rename, so readers never observe a partial file.
pub(crate) fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let text = String::from_utf8(text)
        .map_err(|_| Error::config(format!("{} is not valid UTF-8", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HISTORY_HEADER => {}
        _ => {
            return Err(Error::config(format!(
                "{} does not start with the history header",
                path.display()
            )));
        }
    }
    lines.enumerate().map(|(i, line)| parse_row(line, i + 2, path)).collect()
}

fn parse_row(line: &str, lineno: usize, path: &Path) -> Result<EpochRecord> {
    let bad = |what: &str| {
        Error::config(format!("{} line {lineno}: {what}", path.display()))
    };
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 13 {
        return Err(bad(&format!("expected 13 columns, found {}", cols.len())));
    }
    let num = |i: usize| -> Result<f64> {
        cols[i].parse::<f64>().map_err(|_| bad(&format!("column {} is not a number", i + 1)))
    };
    let opt = |i: usize| -> Result<Option<f64>> {
        if cols[i].is_empty() { Ok(None) } else { num(i).map(Some) }
    };
    Ok(EpochRecord {
        epoch: cols[0].parse().map_err(|_| bad("column 1 is not an epoch number"))?,
        lr: num(1)?,
        alpha: num(2)?,
        loss: ResidualBundle {
            total: num(3)?,
            momentum: num(4)?,
            poisson_div: num(5)?,
            constitutive: num(6)?,
            incompressibility: num(7)?,
            pressure_gradient: num(8)?,
            boundary: num(9)?,
        },
        err_u: opt(10)?,
        err_p: opt(11)?,
        wall_seconds: num(12)?,
    })
}
