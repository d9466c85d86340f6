use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnnpb::Demonstration;

/// Standard deviations are never smaller than this.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-score statistics of the concatenated `[s, u]` vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::spec("mean and std widths differ"));
        }
        if std.iter().any(|s| !(*s >= STD_FLOOR)) {
            return Err(Error::spec(
                "standard deviations must be at least the floor",
            ));
        }
        Ok(NormStats { mean, std })
    }

    /// Population statistics over every step of every demonstration.
    pub fn compute(dataset: &[Demonstration]) -> Result<Self> {
        let first = dataset
            .iter()
            .flat_map(|d| d.steps.first())
            .next()
            .ok_or_else(|| Error::spec("cannot normalize an empty dataset"))?;
        let dim = first.s.len() + first.u.len();
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        for x in dataset.iter().flat_map(|d| &d.steps).map(|s| s.concat()) {
            if x.len() != dim {
                return Err(Error::spec("samples have inconsistent widths"));
            }
            sum.iter_mut().zip(&x).for_each(|(a, b)| *a += b);
            n += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; dim];
        for x in dataset.iter().flat_map(|d| &d.steps).map(|s| s.concat()) {
            for i in 0..dim {
                let d = x[i] - mean[i];
                sq[i] += d * d;
            }
        }
        let std = sq
            .iter()
            .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_prefix(x)
    }

    /// Normalizes the leading `x.len()` dimensions.
    pub fn apply_prefix(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// `mean / std`: adding it to a normalized vector gives `x / std`.
    pub fn scaled_offset(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| m / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnnpb::{DemoMeta, Sample};
    use proptest::prelude::*;

    fn demo(steps: Vec<(Vec<f64>, Vec<f64>)>) -> Demonstration {
        Demonstration {
            id: 0,
            steps: steps.into_iter().map(|(s, u)| Sample { s, u }).collect(),
            meta: DemoMeta {
                r: 0.03,
                f_style: 10.0,
                beta: 0.1,
            },
        }
    }

    #[test]
    fn constant_channel_is_floored() {
        let d = demo(vec![
            (vec![1.0, 5.0], vec![0.3]),
            (vec![2.0, 5.0], vec![0.3]),
            (vec![3.0, 5.0], vec![0.3]),
        ]);
        let n = NormStats::compute(&[d]).unwrap();
        assert_eq!(n.std[1], STD_FLOOR);
        assert_eq!(n.std[2], STD_FLOOR);
        let z = n.apply(&[2.0, 5.0, 0.3]);
        assert_eq!(&z[..2], &[0.0, 0.0]);
        assert!(z[2].abs() < 1e-6);
    }

    #[test]
    fn normalized_dataset_has_zero_mean() {
        let steps = (0..40)
            .map(|t| {
                let t = t as f64;
                (vec![(t * 0.37).sin() * 3.0, t * t * 0.01], vec![100.0 + t])
            })
            .collect();
        let d = demo(steps);
        let n = NormStats::compute(std::slice::from_ref(&d)).unwrap();
        let mut acc = vec![0.0; 3];
        for s in &d.steps {
            let z = n.apply(&s.concat());
            acc.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
        }
        for a in acc {
            assert!((a / 40.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(NormStats::compute(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            x in proptest::collection::vec(-1e3f64..1e3, 4),
            mean in proptest::collection::vec(-50f64..50.0, 4),
            std in proptest::collection::vec(1e-3f64..100.0, 4),
        ) {
            let n = NormStats::new(mean, std).unwrap();
            let back = n.invert(&n.apply(&x));
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
