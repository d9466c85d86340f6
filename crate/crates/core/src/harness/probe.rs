use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rnnpb::DemoMeta;

type Attribute = (&'static str, fn(&DemoMeta) -> f64);

/// Relative singular-value threshold for calling a design rank-deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub attribute: String,
    /// Coefficient of determination, absent when the fit is degenerate.
    pub r2: Option<f64>,
    pub degenerate: bool,
}

/// Ordinary least squares `target ~ 1 + features` solved through the SVD.
/// Returns `None` when the target is constant or the design is rank-deficient.
pub fn linear_r2(features: &[Vec<f64>], target: &[f64]) -> Result<Option<f64>> {
    let n = features.len();
    if n != target.len() || n == 0 {
        return Err(Error::spec("probe needs one target per feature row"));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(Error::spec("probe features have inconsistent widths"));
    }
    let mean_t = target.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = target.iter().map(|t| (t - mean_t) * (t - mean_t)).sum();
    let scale = target
        .iter()
        .map(|t| t.abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    if ss_tot <= (RANK_TOL * scale).powi(2) * n as f64 {
        return Ok(None);
    }
    let x = DMatrix::from_fn(
        n,
        d + 1,
        |i, j| if j == 0 { 1.0 } else { features[i][j - 1] },
    );
    let y = DVector::from_column_slice(target);
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    if n < d + 1 || svd.singular_values.iter().any(|s| *s <= RANK_TOL * s_max) {
        return Ok(None);
    }
    let beta = svd
        .solve(&y, RANK_TOL * s_max)
        .map_err(|e| Error::spec(format!("least-squares solve failed: {e}")))?;
    let resid = &y - &x * beta;
    let ss_res = resid.norm_squared();
    Ok(Some(1.0 - ss_res / ss_tot))
}

/// Regresses each demonstration attribute on its PB vector.
pub fn probe_pb(pbs: &[Vec<f64>], metas: &[DemoMeta]) -> Result<Vec<ProbeResult>> {
    if pbs.len() != metas.len() {
        return Err(Error::spec("probe needs one meta record per PB vector"));
    }
    if pbs.len() < 3 {
        return Err(Error::spec("probe needs at least three demonstrations"));
    }
    let attrs: [Attribute; 3] = [
        ("r", |m| m.r),
        ("f_style", |m| m.f_style),
        ("beta", |m| m.beta),
    ];
    attrs
        .iter()
        .map(|(name, get)| {
            let target: Vec<f64> = metas.iter().map(get).collect();
            let r2 = linear_r2(pbs, &target)?;
            Ok(ProbeResult {
                attribute: name.to_string(),
                degenerate: r2.is_none(),
                r2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(r: f64, f: f64) -> DemoMeta {
        DemoMeta {
            r,
            f_style: f,
            beta: 0.1,
        }
    }

    #[test]
    fn exact_linear_relation_scores_one() {
        let pbs = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            vec![2.0, -0.3],
            vec![0.5, 2.0],
        ];
        let metas: Vec<DemoMeta> = pbs
            .iter()
            .map(|p| meta(0.03 + 0.01 * p[0] - 0.002 * p[1], 100.0 - 20.0 * p[1]))
            .collect();
        let res = probe_pb(&pbs, &metas).unwrap();
        assert!((res[0].r2.unwrap() - 1.0).abs() < 1e-10);
        assert!((res[1].r2.unwrap() - 1.0).abs() < 1e-10);
        // beta is constant
        assert!(res[2].degenerate && res[2].r2.is_none());
    }

    #[test]
    fn duplicated_pb_columns_are_flagged() {
        let pbs = vec![
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
            vec![5.0, 5.0],
        ];
        let metas = vec![
            meta(0.03, 10.0),
            meta(0.035, 50.0),
            meta(0.04, 20.0),
            meta(0.03, 5.0),
        ];
        let res = probe_pb(&pbs, &metas).unwrap();
        assert!(res.iter().all(|r| r.degenerate));
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(probe_pb(&[vec![0.0], vec![1.0]], &[meta(0.0, 0.0), meta(1.0, 1.0)]).is_err());
    }
}
