use std::path::Path;

use anyhow::{bail, Context};
use locsim::engine::CSV_COLUMNS;

use crate::output::{csv_io, emit};
use crate::{Failure, ReportArgs};

const KEY_COLUMNS: [&str; 3] = ["scheme", "cmr", "seed"];

#[derive(Debug, Default)]
struct Cell {
    scheme: String,
    cmr: String,
    /// One sample list per metric column; empty fields are skipped.
    samples: Vec<Vec<f64>>,
    runs: usize,
}

fn metrics() -> Vec<&'static str> {
    CSV_COLUMNS.iter().copied().filter(|c| !KEY_COLUMNS.contains(c)).collect()
}

fn read_cells(paths: &[impl AsRef<Path>]) -> anyhow::Result<Vec<Cell>> {
    let names = metrics();
    let mut cells: Vec<Cell> = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let mut rd = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let header = rd.headers()?.clone();
        let col = |name: &str| -> anyhow::Result<usize> {
            header
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("{}: missing column `{name}`", path.display()))
        };
        let scheme = col("scheme")?;
        let cmr = col("cmr")?;
        let idx = names.iter().map(|n| col(n)).collect::<anyhow::Result<Vec<_>>>()?;
        for rec in rd.records() {
            let rec = rec.with_context(|| format!("reading {}", path.display()))?;
            let (s, c) = (&rec[scheme], &rec[cmr]);
            let pos = match cells.iter().position(|x| x.scheme == s && x.cmr == c) {
                Some(p) => p,
                None => {
                    cells.push(Cell {
                        scheme: s.to_string(),
                        cmr: c.to_string(),
                        samples: vec![Vec::new(); names.len()],
                        runs: 0,
                    });
                    cells.len() - 1
                }
            };
            let cell = &mut cells[pos];
            cell.runs += 1;
            for (k, &i) in idx.iter().enumerate() {
                let v = rec[i].trim();
                if v.is_empty() {
                    continue;
                }
                let x: f64 = v
                    .parse()
                    .with_context(|| format!("{}: bad value `{v}` in `{}`", path.display(), names[k]))?;
                cell.samples[k].push(x);
            }
        }
    }
    if cells.is_empty() {
        bail!("no rows in the input files");
    }
    Ok(cells)
}

fn summary(xs: &[f64]) -> String {
    if xs.is_empty() {
        return String::new();
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    format!("{m:.4}±{sd:.4}")
}

pub fn run(a: ReportArgs) -> Result<(), Failure> {
    let cells = read_cells(&a.inputs)?;
    let names = metrics();
    emit(a.out.as_deref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["scheme", "cmr", "runs"];
        header.extend(names.iter().copied());
        out.write_record(&header).map_err(csv_io)?;
        for c in &cells {
            let mut rec = vec![c.scheme.clone(), c.cmr.clone(), c.runs.to_string()];
            rec.extend(c.samples.iter().map(|s| summary(s)));
            out.write_record(&rec).map_err(csv_io)?;
        }
        out.flush()
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_format() {
        assert_eq!(summary(&[]), "");
        assert_eq!(summary(&[1.0, 3.0]), "2.0000±1.4142");
        assert_eq!(summary(&[5.0]), "5.0000±0.0000");
    }
}
