//! Per-point summaries of the cross distance matrix.

use serde::{Deserialize, Serialize};

use crate::geometry::{CrossDistanceMatrix, Pca};
use crate::stats::quantile_sorted;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReducerMethod {
    /// Projection of each row onto `k` principal components.
    Pca,
    /// The `k` largest entries of each row, descending.
    TopkMax,
    /// `k` evenly spaced quantiles of each row.
    Quantiles,
}

/// Distance-row reducer. The PCA variant carries its fitted projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReducer {
    pub method: ReducerMethod,
    pub k: usize,
    #[serde(default)]
    pub pca: Option<Pca>,
}

impl DistanceReducer {
    pub fn new(method: ReducerMethod, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("K must be >= 1"));
        }
        Ok(Self { method, k, pca: None })
    }

    pub fn is_fitted(&self) -> bool {
        self.method != ReducerMethod::Pca || self.pca.is_some()
    }

    /// Fits the PCA projection on the rows of the given matrices, which must
    /// all have the same row length. No-op for the other methods.
    pub fn fit<'a>(&mut self, matrices: impl IntoIterator<Item = &'a CrossDistanceMatrix>) -> Result<()> {
        if self.method != ReducerMethod::Pca {
            return Ok(());
        }
        let mats: Vec<&CrossDistanceMatrix> = matrices.into_iter().collect();
        let len = mats.first().ok_or(Error::Empty("PCA training matrices"))?.matrix().size();
        if let Some(m) = mats.iter().find(|m| m.matrix().size() != len) {
            return Err(Error::DimensionMismatch { expected: len, got: m.matrix().size() });
        }
        if self.k > len {
            return Err(Error::invalid(format!("K = {} exceeds row length {len}", self.k)));
        }
        let rows = mats.iter().flat_map(|m| (0..len).map(move |i| m.matrix().row(i)));
        self.pca = Some(Pca::fit(rows, len, self.k)?);
        Ok(())
    }

    pub fn transform(&self, cross: &CrossDistanceMatrix) -> Result<Vec<Vec<f64>>> {
        let m = cross.matrix();
        let n = m.size();
        match self.method {
            ReducerMethod::Pca => {
                let pca = self.pca.as_ref().ok_or_else(|| Error::invalid("PCA reducer is not fitted"))?;
                if pca.input_dim() != n {
                    return Err(Error::DimensionMismatch { expected: pca.input_dim(), got: n });
                }
                Ok((0..n).map(|i| pca.project(m.row(i))).collect())
            }
            ReducerMethod::TopkMax | ReducerMethod::Quantiles => {
                if self.k > n {
                    return Err(Error::invalid(format!("K = {} exceeds row length {n}", self.k)));
                }
                Ok((0..n)
                    .map(|i| {
                        let mut row = m.row(i).to_vec();
                        row.sort_by(f64::total_cmp);
                        if self.method == ReducerMethod::TopkMax {
                            row.iter().rev().take(self.k).copied().collect()
                        } else {
                            quantile_levels(self.k).map(|q| quantile_sorted(&row, q)).collect()
                        }
                    })
                    .collect())
            }
        }
    }
}

/// `0, 1/(k-1), ..., 1`; the median alone for `k = 1`.
fn quantile_levels(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 })
}

/// One feature row per point of the cross matrix. With `Pca`, the projection
/// is fitted on this matrix's own rows.
pub fn distance_features(cross: &CrossDistanceMatrix, method: ReducerMethod, k: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = DistanceReducer::new(method, k)?;
    r.fit([cross])?;
    r.transform(cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cross_distance_matrix, PointCloud};

    fn line(n: usize, offset: f64) -> PointCloud {
        PointCloud::new((0..n).map(|i| vec![i as f64 + offset]).collect()).unwrap()
    }

    #[test]
    fn topk_full_row_is_sorted_descending() {
        let c = cross_distance_matrix(&line(3, 0.0), &line(2, 0.5)).unwrap();
        let f = distance_features(&c, ReducerMethod::TopkMax, 5).unwrap();
        for (i, row) in f.iter().enumerate() {
            let mut want = c.matrix().row(i).to_vec();
            want.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(row, &want);
        }
    }

    #[test]
    fn quantiles_of_constant_rows() {
        // two coincident points: every entry 0
        let p = PointCloud::new(vec![vec![1.0, 1.0]]).unwrap();
        let c = cross_distance_matrix(&p, &p).unwrap();
        let f = distance_features(&c, ReducerMethod::Quantiles, 2).unwrap();
        assert!(f.iter().all(|r| r == &vec![0.0, 0.0]));
    }

    #[test]
    fn quantiles_interpolate() {
        let c = cross_distance_matrix(&line(1, 0.0), &line(4, 1.0)).unwrap();
        // row 0 = [0, 1, 2, 3, 4]
        let f = distance_features(&c, ReducerMethod::Quantiles, 3).unwrap();
        assert_eq!(f[0], vec![0.0, 2.0, 4.0]);
        let f = distance_features(&c, ReducerMethod::Quantiles, 5).unwrap();
        assert_eq!(f[0], vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn k_too_large() {
        let c = cross_distance_matrix(&line(2, 0.0), &line(2, 0.5)).unwrap();
        for m in [ReducerMethod::TopkMax, ReducerMethod::Quantiles, ReducerMethod::Pca] {
            assert!(distance_features(&c, m, 5).is_err());
        }
        assert!(DistanceReducer::new(ReducerMethod::TopkMax, 0).is_err());
    }

    #[test]
    fn pca_rows_have_k_columns() {
        let c = cross_distance_matrix(&line(5, 0.0), &line(5, 0.3)).unwrap();
        let f = distance_features(&c, ReducerMethod::Pca, 3).unwrap();
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|r| r.len() == 3));
    }
}
