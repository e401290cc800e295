//! Deterministic synthetic fixtures standing in for the private corpus.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{
    normalize_label_rows, FeatureTable, LabelTable, PartitionMap, Split, N_EMOTIONS,
};
use crate::error::{Error, Result};

/// Maximum number of speakers per split; samples are dealt to them round-robin.
const SPEAKERS_PER_SPLIT: usize = 10;

/// Gamma shape for the raw shares. Below 1 so most rows have one or two
/// dominant emotions, like select-all-that-apply ratings.
const SHARE_SHAPE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub n_models: usize,
    pub dim: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_train: 200,
            n_dev: 80,
            n_test: 80,
            n_models: 3,
            dim: 16,
            noise_scale: 0.3,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_train", self.n_train),
            ("n_dev", self.n_dev),
            ("n_test", self.n_test),
            ("n_models", self.n_models),
            ("dim", self.dim),
        ] {
            if v == 0 {
                return Err(Error::invalid("synthetic spec", format!("{name} must be positive")));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(
                "synthetic spec",
                format!("noise_scale must be finite and >= 0, got {}", self.noise_scale),
            ));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.n_train + self.n_dev + self.n_test
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features: Vec<FeatureTable>,
    pub labels: LabelTable,
    pub partition: PartitionMap,
}

pub fn synthetic_model_name(m: usize) -> String {
    format!("synth_m{:02}", m + 1)
}

/// Draws a latent share matrix, then per model a random linear map to `dim`
/// features plus Gaussian noise whose scale grows with the model index
/// (`noise_scale * (1 + m/10)`).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let width = n.to_string().len().max(5);
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:0width$}")).collect();

    let gamma = Gamma::new(SHARE_SHAPE, 1.0).expect("valid gamma parameters");
    let mut raw = Array2::<f64>::zeros((n, N_EMOTIONS));
    for mut row in raw.rows_mut() {
        loop {
            for v in row.iter_mut() {
                *v = gamma.sample(&mut rng);
            }
            if row.iter().any(|&v| v > 0.0) {
                break;
            }
        }
    }
    let labels = normalize_label_rows(&LabelTable::new(ids.clone(), raw)?)?;

    let unit = Normal::new(0.0, 1.0).expect("valid normal parameters");
    let map_scale = 1.0 / (N_EMOTIONS as f64).sqrt();
    let mut features = Vec::with_capacity(spec.n_models);
    for m in 0..spec.n_models {
        let map = Array2::from_shape_simple_fn((N_EMOTIONS, spec.dim), || {
            map_scale * unit.sample(&mut rng)
        });
        let mut values = labels.values().dot(&map);
        let sigma = spec.noise_scale * (1.0 + m as f64 / 10.0);
        if sigma > 0.0 {
            for v in values.iter_mut() {
                *v += sigma * unit.sample(&mut rng);
            }
        }
        features.push(FeatureTable::new(synthetic_model_name(m), ids.clone(), values)?);
    }

    // Splits are contiguous id ranges; speakers are dealt round-robin inside
    // each split and carry the split in their name, so no speaker crosses splits.
    let mut rows = Vec::with_capacity(n);
    let mut offset = 0;
    for (split, count) in [
        (Split::Train, spec.n_train),
        (Split::Dev, spec.n_dev),
        (Split::Test, spec.n_test),
    ] {
        let speakers = SPEAKERS_PER_SPLIT.min(count);
        for k in 0..count {
            rows.push((
                ids[offset + k].clone(),
                split,
                format!("{split}_spk{:02}", k % speakers),
            ));
        }
        offset += count;
    }
    Ok(SyntheticData {
        features,
        labels,
        partition: PartitionMap::from_rows(rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bits() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.features, b.features);
        assert_eq!(a.partition, b.partition);

        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn labels_are_row_max_normalized() {
        let d = generate_synthetic(&SyntheticSpec::default()).unwrap();
        for row in d.labels.values().rows() {
            let max = row.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(max, 1.0);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    /// Solves `a x = b` by Gaussian elimination with partial pivoting.
    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                #[allow(clippy::needless_range_loop)]
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn noiseless_features_are_linear_in_labels() {
        let spec = SyntheticSpec {
            noise_scale: 0.0,
            ..SyntheticSpec::default()
        };
        let d = generate_synthetic(&spec).unwrap();
        let l = d.labels.values();
        let f = d.features[1].values();
        // Express label row 9 in the basis of rows 0..9, then the same
        // combination of feature rows must reproduce feature row 9.
        let basis: Vec<Vec<f64>> = (0..9)
            .map(|c| (0..9).map(|r| l[[r, c]]).collect())
            .collect();
        let coef = solve(basis, l.row(9).to_vec());
        for j in 0..spec.dim {
            let rebuilt: f64 = (0..9).map(|r| coef[r] * f[[r, j]]).sum();
            assert!((rebuilt - f[[9, j]]).abs() < 1e-8, "column {j}");
        }
    }

    #[test]
    fn partition_is_speaker_disjoint() {
        let d = generate_synthetic(&SyntheticSpec::default()).unwrap();
        d.partition.check_speaker_disjoint().unwrap();
        assert_eq!(d.partition.ids_in(Split::Train).len(), 200);
        assert_eq!(d.partition.ids_in(Split::Dev).len(), 80);
        assert_eq!(d.partition.ids_in(Split::Test).len(), 80);
    }

    #[test]
    fn rejects_zero_counts() {
        let spec = SyntheticSpec {
            n_train: 0,
            ..SyntheticSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec), Err(Error::Invalid { .. })));
    }
}
