use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::DropResult;
use crate::assignment::SchemeId;
use crate::error::{Error, Result};

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never see a truncated file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub(crate) fn write_csv<'a, T: Serialize + 'a>(path: &Path, rows: impl Iterator<Item = &'a T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CdfPoint {
    pub se: f64,
    pub cdf: f64,
}

/// Per-user SE of `scheme` pooled over all drops, sorted ascending, with the
/// empirical CDF ordinate `(k + 0.5) / n` for the zero-based k-th point.
pub fn emit_cdf(results: &[DropResult], scheme: SchemeId) -> Result<Vec<CdfPoint>> {
    let mut se: Vec<f64> = results
        .iter()
        .filter(|r| r.row.scheme == scheme)
        .flat_map(|r| r.per_user_se.iter().copied())
        .collect();
    if se.is_empty() {
        return Err(Error::EmptyInput("no per-user SE for CDF"));
    }
    se.sort_by(f64::total_cmp);
    let n = se.len() as f64;
    Ok(se
        .into_iter()
        .enumerate()
        .map(|(k, se)| CdfPoint {
            se,
            cdf: (k as f64 + 0.5) / n,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlotKind {
    /// Reads an aggregate CSV; one line per scheme, mean sum SE against the
    /// sweep value.
    Sweep { x_label: String },
    /// Reads `cdf_<scheme>.csv` files; per-user SE against CDF.
    Cdf,
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// A standalone matplotlib script that reads `files` at run time.
pub fn emit_plot_script(files: &[PathBuf], kind: &PlotKind) -> Result<String> {
    if files.is_empty() {
        return Err(Error::EmptyInput("no files to plot"));
    }
    if let Some(missing) = files.iter().find(|f| !f.is_file()) {
        return Err(Error::MissingFile(missing.clone()));
    }
    let names: Vec<String> = files
        .iter()
        .map(|f| py_str(&f.file_name().unwrap_or_default().to_string_lossy()))
        .collect();

    let mut s = String::new();
    s.push_str("#!/usr/bin/env python3\n");
    s.push_str("import csv\nimport os\nimport sys\nfrom collections import defaultdict\n\n");
    s.push_str("import matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("HERE = os.path.dirname(os.path.abspath(__file__))\n");
    let _ = writeln!(s, "FILES = [{}]\n", names.join(", "));
    s.push_str("fig, ax = plt.subplots()\n");
    match kind {
        PlotKind::Sweep { x_label } => {
            s.push_str(
                "lines = defaultdict(list)\n\
                 with open(os.path.join(HERE, FILES[0]), newline=\"\") as f:\n\
                 \x20   for row in csv.DictReader(f):\n\
                 \x20       lines[row[\"scheme\"]].append((float(row[\"sweep_value\"]), float(row[\"mean_sum_se\"])))\n\
                 for scheme, pts in sorted(lines.items()):\n\
                 \x20   pts.sort()\n\
                 \x20   ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=\"o\", label=scheme)\n",
            );
            let _ = writeln!(s, "ax.set_xlabel({})", py_str(x_label));
            s.push_str("ax.set_ylabel(\"sum SE [bit/s/Hz]\")\n");
        }
        PlotKind::Cdf => {
            s.push_str(
                "for name in FILES:\n\
                 \x20   scheme = name[len(\"cdf_\"):-len(\".csv\")]\n\
                 \x20   with open(os.path.join(HERE, name), newline=\"\") as f:\n\
                 \x20       rows = list(csv.DictReader(f))\n\
                 \x20   ax.plot([float(r[\"se\"]) for r in rows], [float(r[\"cdf\"]) for r in rows], label=scheme)\n\
                 ax.set_xlabel(\"per-user SE [bit/s/Hz]\")\n\
                 ax.set_ylabel(\"CDF\")\n",
            );
        }
    }
    s.push_str(
        "ax.grid(True)\nax.legend()\n\
         out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, \"plot.png\")\n\
         fig.savefig(out, dpi=150)\n",
    );
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ResultRow;

    fn result(scheme: SchemeId, se: &[f64]) -> DropResult {
        DropResult {
            row: ResultRow {
                scheme,
                sweep_value: 0.0,
                drop_seed: 0,
                sum_se: se.iter().sum(),
                p5_se: 0.0,
                p10_se: 0.0,
                mean_se: 0.0,
            },
            per_user_se: se.to_vec(),
        }
    }

    #[test]
    fn cdf_single_point() {
        let pts = emit_cdf(&[result(SchemeId::Eem, &[2.5])], SchemeId::Eem).unwrap();
        assert_eq!(pts, vec![CdfPoint { se: 2.5, cdf: 0.5 }]);
    }

    #[test]
    fn cdf_pools_and_sorts() {
        let rs = [
            result(SchemeId::Eem, &[3.0, 1.0]),
            result(SchemeId::Random, &[0.1]),
            result(SchemeId::Eem, &[2.0, 0.5]),
        ];
        let pts = emit_cdf(&rs, SchemeId::Eem).unwrap();
        let se: Vec<f64> = pts.iter().map(|p| p.se).collect();
        let cdf: Vec<f64> = pts.iter().map(|p| p.cdf).collect();
        assert_eq!(se, vec![0.5, 1.0, 2.0, 3.0]);
        assert_eq!(cdf, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn cdf_degenerate_and_empty() {
        let pts = emit_cdf(&[result(SchemeId::Dpb, &[1.0; 4])], SchemeId::Dpb).unwrap();
        assert!(pts.iter().all(|p| p.se == 1.0));
        assert!(matches!(emit_cdf(&[], SchemeId::Dpb), Err(Error::EmptyInput(_))));
        assert!(emit_cdf(&[result(SchemeId::Eem, &[1.0])], SchemeId::Dpb).is_err());
    }

    #[test]
    fn plot_script_references_files() {
        let dir = tempfile::tempdir().unwrap();
        let agg = dir.path().join("aggregate.csv");
        write_atomic(&agg, b"scheme,sweep_value,mean_sum_se\n").unwrap();
        let s = emit_plot_script(
            std::slice::from_ref(&agg),
            &PlotKind::Sweep {
                x_label: "number of UEs".into(),
            },
        )
        .unwrap();
        assert!(s.contains("\"aggregate.csv\""));
        assert!(s.contains("mean_sum_se"));
        assert!(s.contains("\"number of UEs\""));

        let s = emit_plot_script(&[agg], &PlotKind::Cdf).unwrap();
        assert!(s.contains("ax.set_ylabel(\"CDF\")"));

        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            emit_plot_script(&[missing], &PlotKind::Cdf),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
