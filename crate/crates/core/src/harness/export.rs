use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{MetricTrace, OnlineReport, VariantReport};
use super::pca::PcaResult;
use super::probe::ProbeResult;
use crate::error::{Error, Result};
use crate::rnnpb::{Demonstration, RnnpbModel};

/// `<root>/<experiment>/<variant>/<name>.csv`
pub fn artifact_path(root: &Path, experiment: &str, variant: &str, name: &str) -> PathBuf {
    root.join(experiment)
        .join(variant)
        .join(format!("{name}.csv"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// One row per step of every trace, traces stacked in order.
pub fn write_trace_csv(path: &Path, traces: &[&MetricTrace]) -> Result<()> {
    let Some(first) = traces.iter().find_map(|t| t.samples.first()) else {
        return write_rows(path, &["label".into(), "step".into()], &[]);
    };
    let (ns, nu) = (first.s.len(), first.u.len());
    let mut header: Vec<String> = ["label", "step", "theta_error", "tension_norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(indexed("s", ns));
    header.extend(indexed("u", nu));
    let rows = traces
        .iter()
        .flat_map(|tr| {
            tr.samples.iter().enumerate().map(move |(t, smp)| {
                let mut row = vec![
                    tr.label.clone(),
                    (t + 1).to_string(),
                    num(tr.theta_error[t]),
                    num(tr.tension_norm[t]),
                ];
                row.extend(smp.s.iter().chain(&smp.u).map(|v| num(*v)));
                row
            })
        })
        .collect::<Vec<_>>();
    write_rows(path, &header, &rows)
}

pub fn write_loss_csv(path: &Path, column: &str, values: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), num(*v)])
        .collect();
    write_rows(path, &["epoch".into(), column.into()], &rows)
}

/// Trained PB vectors with the attributes of their demonstrations and, when
/// given, their principal-axis coordinates.
pub fn write_pb_table_csv(
    path: &Path,
    model: &RnnpbModel,
    dataset: &[Demonstration],
    pca: Option<&PcaResult>,
) -> Result<()> {
    let p_dim = model.layout.p_dim;
    let n_pc = pca.map_or(0, |p| p.components.len());
    let mut header: Vec<String> = ["id", "r", "f_style", "beta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(indexed("p", p_dim));
    header.extend(indexed("pc", n_pc));
    let rows = model
        .pb_table
        .iter()
        .map(|e| {
            let meta = dataset.iter().find(|d| d.id == e.id).map(|d| d.meta);
            let mut row = vec![e.id.to_string()];
            match meta {
                Some(m) => row.extend([num(m.r), num(m.f_style), num(m.beta)]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row.extend(e.p.iter().map(|v| num(*v)));
            if let Some(pca) = pca {
                row.extend(pca.project(&e.p).into_iter().map(num));
            }
            row
        })
        .collect::<Vec<_>>();
    write_rows(path, &header, &rows)
}

/// A table with an `id` column followed by one column per metric.
pub fn write_metric_table(
    path: &Path,
    columns: &[&str],
    ids: &[usize],
    rows: &[Vec<f64>],
) -> Result<()> {
    if ids.len() != rows.len() || rows.iter().any(|r| r.len() != columns.len()) {
        return Err(Error::spec("metric table rows do not match its columns"));
    }
    let mut header = vec!["id".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    let rows: Vec<Vec<String>> = ids
        .iter()
        .zip(rows)
        .map(|(id, r)| {
            let mut row = vec![id.to_string()];
            row.extend(r.iter().map(|v| num(*v)));
            row
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Eigenvalue and explained-variance ratio of each principal axis.
pub fn write_explained_csv(path: &Path, pca: &PcaResult) -> Result<()> {
    let rows: Vec<Vec<String>> = pca
        .eigenvalues
        .iter()
        .zip(&pca.explained_ratio)
        .enumerate()
        .map(|(i, (l, r))| vec![(i + 1).to_string(), num(*l), num(*r)])
        .collect();
    let header = ["component", "eigenvalue", "explained_ratio"].map(String::from);
    write_rows(path, &header, &rows)
}

pub fn write_probe_csv(path: &Path, results: &[ProbeResult]) -> Result<()> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.attribute.clone(),
                r.r2.map(num).unwrap_or_default(),
                r.degenerate.to_string(),
            ]
        })
        .collect();
    write_rows(
        path,
        &["attribute".into(), "r2".into(), "degenerate".into()],
        &rows,
    )
}

/// Writes `traces`, `loss` and `pb` for one variant run and returns the paths.
pub fn write_variant_csvs(
    root: &Path,
    experiment: &str,
    report: &VariantReport,
) -> Result<Vec<PathBuf>> {
    let v = report.variant.as_str();
    let traces = artifact_path(root, experiment, v, "traces");
    write_trace_csv(&traces, &[&report.trace_before, &report.trace_after])?;
    let loss = artifact_path(root, experiment, v, "loss");
    write_loss_csv(&loss, "adaptation_loss", &report.loss_trace)?;

    let pb = artifact_path(root, experiment, v, "pb");
    let p_dim = report.p_before.len();
    let n_pc = report.overlay.as_ref().map_or(0, |o| o.before.len());
    let mut header = vec!["point".to_string(), "matching_loss".to_string()];
    header.extend(indexed("p", p_dim));
    header.extend(indexed("pc", n_pc));
    let mut rows = Vec::new();
    for (name, p, m, pc) in [
        (
            "before",
            &report.p_before,
            report.matching_before,
            report.overlay.as_ref().map(|o| &o.before),
        ),
        (
            "after",
            &report.p_after,
            report.matching_after,
            report.overlay.as_ref().map(|o| &o.after),
        ),
    ] {
        let mut row = vec![name.to_string(), num(m)];
        row.extend(p.iter().map(|v| num(*v)));
        if let Some(pc) = pc {
            row.extend(pc.iter().map(|v| num(*v)));
        }
        rows.push(row);
    }
    write_rows(&pb, &header, &rows)?;
    Ok(vec![traces, loss, pb])
}

/// Writes `trace` and `p_trajectory` for one online run and returns the paths.
pub fn write_online_csvs(
    root: &Path,
    experiment: &str,
    report: &OnlineReport,
) -> Result<Vec<PathBuf>> {
    let v = report.variant.as_str();
    let trace = artifact_path(root, experiment, v, "trace");
    write_trace_csv(&trace, &[&report.trace])?;
    let traj = artifact_path(root, experiment, v, "p_trajectory");
    let p_dim = report.trace.p.len();
    let mut header = vec!["step".to_string()];
    header.extend(indexed("p", p_dim));
    let rows: Vec<Vec<String>> = report
        .p_trajectory
        .iter()
        .map(|u| {
            let mut row = vec![u.step.to_string()];
            row.extend(u.p.iter().map(|v| num(*v)));
            row
        })
        .collect();
    write_rows(&traj, &header, &rows)?;
    Ok(vec![trace, traj])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnnpb::Sample;

    #[test]
    fn trace_csv_has_header_and_rows() {
        let tr = MetricTrace {
            label: "a,b".into(),
            r: 0.04,
            p: vec![0.0, 0.0],
            theta_error: vec![1.5, 0.25],
            tension_norm: vec![0.0, 3.0],
            samples: vec![
                Sample {
                    s: vec![0.0, 0.0, 0.0, 0.0],
                    u: vec![0.3, 0.3, 0.3],
                },
                Sample {
                    s: vec![-1.0, 1.0, 2.0, 2.0],
                    u: vec![0.31, 0.29, 0.31],
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = artifact_path(dir.path(), "exp", "A", "traces");
        write_trace_csv(&path, &[&tr]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "label,step,theta_error,tension_norm,s1,s2,s3,s4,u1,u2,u3"
        );
        assert!(lines[1].starts_with("\"a,b\",1,1.5,0,"));
        assert!(lines[2].ends_with(",0.31,0.29,0.31"));
    }
}
