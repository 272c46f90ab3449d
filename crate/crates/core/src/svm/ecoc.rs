use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ClassSet;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::svm::linear::{fit_linear_svm, LinearModel, SvmParams};

pub const MODEL_FORMAT: &str = "ecoc-linear-svm";
pub const MODEL_VERSION: u32 = 1;

/// One-vs-one code matrix: `C` rows, `C(C-1)/2` columns. Column for the
/// pair `(i, j)`, `i < j`, has +1 in row `i`, -1 in row `j` and 0 elsewhere.
pub fn ecoc_code(n_classes: usize) -> Result<Vec<Vec<i8>>> {
    if n_classes < 2 {
        return Err(Error::invalid(format!(
            "ECOC needs at least 2 classes, got {n_classes}"
        )));
    }
    let pairs = class_pairs(n_classes);
    let mut code = vec![vec![0i8; pairs.len()]; n_classes];
    for (l, &(i, j)) in pairs.iter().enumerate() {
        code[i][l] = 1;
        code[j][l] = -1;
    }
    Ok(code)
}

fn class_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

#[inline]
fn hinge(z: f64) -> f64 {
    (1.0 - z).max(0.0)
}

/// Multiclass ensemble of binary linear learners combined by output codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcocModel {
    pub format: String,
    pub version: u32,
    pub class_set: ClassSet,
    pub code: Vec<Vec<i8>>,
    pub learners: Vec<LinearModel>,
    /// Learners whose pair had a class missing from the training data; they
    /// are constant votes for the class that was present.
    pub degenerate: Vec<usize>,
}

impl EcocModel {
    pub fn dim(&self) -> usize {
        self.learners.first().map(|l| l.w.len()).unwrap_or(0)
    }

    pub fn n_classes(&self) -> usize {
        self.code.len()
    }

    /// Loss-based decoding: per class, the sum of hinge losses of
    /// `code[c][l] * margin_l`. Returns the minimizing class (lowest index on
    /// ties) and the loss vector.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let margins: Vec<f64> = self.learners.iter().map(|l| l.margin(x)).collect();
        let losses: Vec<f64> = self
            .code
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&margins)
                    .map(|(&c, &m)| hinge(c as f64 * m))
                    .sum()
            })
            .collect();
        let mut best = 0;
        for (c, &l) in losses.iter().enumerate().skip(1) {
            if l < losses[best] {
                best = c;
            }
        }
        Ok((best, losses))
    }

    /// Softmax of the negated decoding losses; strictly positive.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, losses) = self.predict(x)?;
        let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let e: Vec<f64> = losses.iter().map(|l| (lo - l).exp()).collect();
        let z: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / z).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: EcocModel = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}

/// Trains one binary learner per code column on hard class labels.
pub fn ecoc_train(
    x: &FeatureMatrix,
    labels: &[usize],
    class_set: &ClassSet,
    params: &SvmParams,
) -> Result<EcocModel> {
    if x.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    let n_classes = class_set.len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label index {bad} out of range")));
    }
    let mut present = vec![false; n_classes];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateBinaryTask(
            "training labels contain fewer than two classes".into(),
        ));
    }
    let code = ecoc_code(n_classes)?;
    let pairs = class_pairs(n_classes);
    let dim = x.cols();

    let results: Vec<Result<(LinearModel, bool)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(l, &(i, j))| {
            let p = SvmParams {
                seed: params.seed.wrapping_add(l as u64),
                ..*params
            };
            match (present[i], present[j]) {
                (true, true) => {
                    let mut rows = Vec::new();
                    let mut y = Vec::new();
                    for (r, &c) in labels.iter().enumerate() {
                        if c == i || c == j {
                            rows.push(x.row(r));
                            y.push(if c == i { 1.0 } else { -1.0 });
                        }
                    }
                    fit_linear_svm(&rows, &y, &p).map(|m| (m, false))
                }
                (true, false) => Ok((LinearModel::constant(dim, 1.0, &p), true)),
                (false, true) => Ok((LinearModel::constant(dim, -1.0, &p), true)),
                (false, false) => Ok((LinearModel::constant(dim, 0.0, &p), true)),
            }
        })
        .collect();
    let mut learners = Vec::with_capacity(results.len());
    let mut degenerate = Vec::new();
    for (l, r) in results.into_iter().enumerate() {
        let (m, deg) = r?;
        if deg {
            degenerate.push(l);
        }
        learners.push(m);
    }
    Ok(EcocModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        class_set: class_set.clone(),
        code,
        learners,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Track;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn code_sizes() {
        assert_eq!(ecoc_code(5).unwrap()[0].len(), 10);
        assert_eq!(ecoc_code(7).unwrap()[0].len(), 21);
        assert_eq!(ecoc_code(2).unwrap(), vec![vec![1], vec![-1]]);
        assert!(ecoc_code(1).is_err());
    }

    #[test]
    fn code_rows_distinct_columns_balanced() {
        for c in 2..9 {
            let code = ecoc_code(c).unwrap();
            for a in 0..c {
                for b in a + 1..c {
                    assert_ne!(code[a], code[b]);
                }
            }
            for l in 0..code[0].len() {
                assert!(code.iter().any(|r| r[l] == 1));
                assert!(code.iter().any(|r| r[l] == -1));
            }
        }
    }

    fn three_blobs(seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let centers = [[0.0, 4.0], [-4.0, -2.0], [4.0, -2.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.7).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..60 {
                rows.push(vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]);
                labels.push(k);
            }
        }
        (
            FeatureMatrix::from_rows(vec!["x".into(), "y".into()], &rows).unwrap(),
            labels,
        )
    }

    #[test]
    fn blob_centers_decode_to_their_class() {
        let (x, y) = three_blobs(1);
        let cs = ClassSet::custom(Track::Posture, &["a", "b", "c"]);
        let m = ecoc_train(&x, &y, &cs, &SvmParams::default()).unwrap();
        let centers = [[0.0, 4.0], [-4.0, -2.0], [4.0, -2.0]];
        for (k, c) in centers.iter().enumerate() {
            let (pred, losses) = m.predict(c).unwrap();
            assert_eq!(pred, k);
            // Hand decoding on the 3-row code: columns (0,1), (0,2), (1,2).
            let margins: Vec<f64> = m.learners.iter().map(|l| l.margin(c)).collect();
            let by_hand = [
                hinge(margins[0]) + hinge(margins[1]) + hinge(0.0),
                hinge(-margins[0]) + hinge(0.0) + hinge(margins[2]),
                hinge(0.0) + hinge(-margins[1]) + hinge(-margins[2]),
            ];
            for c in 0..3 {
                assert!((losses[c] - by_hand[c]).abs() < 1e-12);
            }
        }
        let again = m.predict(&[0.3, 0.1]).unwrap();
        assert_eq!(m.predict(&[0.3, 0.1]).unwrap(), again);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn single_class_training_fails() {
        let (x, _) = three_blobs(2);
        let cs = ClassSet::custom(Track::Posture, &["a", "b", "c"]);
        let y = vec![1; x.rows()];
        assert!(matches!(
            ecoc_train(&x, &y, &cs, &SvmParams::default()),
            Err(Error::DegenerateBinaryTask(_))
        ));
    }

    #[test]
    fn two_classes_reduce_to_sign() {
        let (x, y) = three_blobs(4);
        let keep: Vec<usize> = (0..y.len()).filter(|&i| y[i] < 2).collect();
        let x2 = x.select(&keep);
        let y2: Vec<usize> = keep.iter().map(|&i| y[i]).collect();
        let cs = ClassSet::custom(Track::Posture, &["a", "b"]);
        let m = ecoc_train(&x2, &y2, &cs, &SvmParams::default()).unwrap();
        for p in [[0.0, 0.0], [1.0, 2.0], [-3.0, 1.0], [0.5, -0.5], [10.0, 10.0]] {
            let sign_class = if m.learners[0].decide(&p) > 0 { 0 } else { 1 };
            assert_eq!(m.predict(&p).unwrap().0, sign_class);
        }
    }

    #[test]
    fn decoding_invariant_to_column_permutation() {
        let (x, y) = three_blobs(6);
        let cs = ClassSet::custom(Track::Posture, &["a", "b", "c"]);
        let m = ecoc_train(&x, &y, &cs, &SvmParams::default()).unwrap();
        let mut p = m.clone();
        let perm = [2usize, 0, 1];
        p.learners = perm.iter().map(|&l| m.learners[l].clone()).collect();
        p.code = m
            .code
            .iter()
            .map(|row| perm.iter().map(|&l| row[l]).collect())
            .collect();
        for i in 0..x.rows() {
            let (a, la) = m.predict(x.row(i)).unwrap();
            let (b, lb) = p.predict(x.row(i)).unwrap();
            assert_eq!(a, b);
            for (u, v) in la.iter().zip(&lb) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = three_blobs(9);
        let cs = ClassSet::custom(Track::Posture, &["a", "b", "c"]);
        let m = ecoc_train(&x, &y, &cs, &SvmParams::default()).unwrap();
        let back = EcocModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_class_pairs_become_constant_learners() {
        let (x, y) = three_blobs(5);
        let cs = ClassSet::custom(Track::Posture, &["a", "b", "c", "d"]);
        let m = ecoc_train(&x, &y, &cs, &SvmParams::default()).unwrap();
        // Pairs (0,3), (1,3), (2,3) are columns 2, 4, 5.
        assert_eq!(m.degenerate, vec![2, 4, 5]);
        assert_eq!(m.predict(&[0.0, 4.0]).unwrap().0, 0);
    }
}
