use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Scalar};

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if cols == 0 {
            return Err(Error::InvalidInput("design matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: cols,
                });
            }
            data.extend_from_slice(r);
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy without the listed columns.
    pub fn without_columns(&self, drop: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.cols).filter(|c| !drop.contains(c)).collect();
        let mut data = Vec::with_capacity(self.rows * keep.len());
        for r in 0..self.rows {
            data.extend(keep.iter().map(|&c| self.get(r, c)));
        }
        Self {
            rows: self.rows,
            cols: keep.len(),
            data,
        }
    }

    pub fn mul_vec(&self, beta: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(beta).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RegressionOptions {
    /// Ridge penalty on the column-equilibrated coefficients; 0 gives OLS.
    pub ridge_lambda: f64,
    /// Columns exempt from the penalty (typically the intercept).
    pub unpenalized: Vec<usize>,
}

/// Least-squares solution with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit<T> {
    pub coefficients: Vec<T>,
    /// sqrt(mean squared residual) on the observations.
    pub residual_rms: T,
    /// Ratio of the largest to smallest pivot of the equilibrated R factor.
    pub condition_estimate: T,
    pub rank: usize,
    pub n_obs: usize,
    pub ridge_lambda: f64,
}

/// Ordinary least squares by column-pivoted Householder QR on the
/// column-equilibrated design.
pub fn fit_multiple_regression<T: Scalar>(x: &DesignMatrix<T>, y: &[T]) -> Result<RegressionFit<T>> {
    fit_regularized(x, y, &RegressionOptions::default())
}

/// Least squares with an optional ridge penalty. The penalty is applied by
/// appending `sqrt(lambda) * e_j` rows for each penalized column of the
/// unit-norm-column design, so it stays inside the QR solve.
pub fn fit_regularized<T: Scalar>(
    x: &DesignMatrix<T>,
    y: &[T],
    opts: &RegressionOptions,
) -> Result<RegressionFit<T>> {
    let (m, p) = (x.rows, x.cols);
    if y.len() != m {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: m,
        });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if !(opts.ridge_lambda >= 0.0 && opts.ridge_lambda.is_finite()) {
        return Err(Error::InvalidInput("ridge lambda must be non-negative".into()));
    }
    let ridge = opts.ridge_lambda > 0.0;
    if m < p && !ridge {
        return Err(Error::InsufficientData { needed: p, got: m });
    }

    let scale: Vec<T> = (0..p)
        .map(|c| {
            let n = (0..m).map(|r| x.get(r, c).powi(2)).sum::<T>().sqrt();
            if n > T::zero() {
                n
            } else {
                T::one()
            }
        })
        .collect();
    let penalized: Vec<usize> = if ridge {
        (0..p).filter(|c| !opts.unpenalized.contains(c)).collect()
    } else {
        Vec::new()
    };
    let rows = m + penalized.len();
    let root_lambda = lit::<T>(opts.ridge_lambda.sqrt());
    // Column-major working copy.
    let mut a: Vec<Vec<T>> = (0..p)
        .map(|c| {
            let mut col: Vec<T> = (0..m).map(|r| x.get(r, c) / scale[c]).collect();
            col.extend(penalized.iter().map(|&pc| if pc == c { root_lambda } else { T::zero() }));
            col
        })
        .collect();
    let mut rhs: Vec<T> = y.to_vec();
    rhs.resize(rows, T::zero());

    let mut perm: Vec<usize> = (0..p).collect();
    let steps = p.min(rows);
    let mut diag = Vec::with_capacity(steps);
    for k in 0..steps {
        let norm2 = |col: &Vec<T>| col[k..].iter().map(|&v| v * v).sum::<T>();
        let pivot = (k..p)
            .max_by(|&i, &j| norm2(&a[i]).partial_cmp(&norm2(&a[j])).unwrap())
            .unwrap();
        a.swap(k, pivot);
        perm.swap(k, pivot);
        let norm = norm2(&a[k]).sqrt();
        if norm == T::zero() {
            diag.push(T::zero());
            continue;
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|&t| t * t).sum();
        let reflect = |col: &mut [T]| {
            let d: T = v.iter().zip(col.iter()).map(|(&p, &q)| p * q).sum();
            let f = lit::<T>(2.0) * d / vnorm2;
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c = *c - f * vi;
            }
        };
        for col in a.iter_mut().skip(k + 1) {
            reflect(&mut col[k..]);
        }
        reflect(&mut rhs[k..]);
        a[k][k] = alpha;
        for v in a[k][k + 1..].iter_mut() {
            *v = T::zero();
        }
        diag.push(alpha);
    }

    let r00 = diag.first().map_or(T::zero(), |v| v.abs());
    let tol = T::epsilon() * lit(1000.0) * from_usize::<T>(rows.max(p)) * r00;
    let rank = diag.iter().take_while(|d| d.abs() > tol).count();
    if rank < p {
        return Err(Error::RankDeficient { rank, columns: p });
    }

    let mut z = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for j in i + 1..p {
            s = s - a[j][i] * z[j];
        }
        z[i] = s / a[i][i];
    }
    let mut coefficients = vec![T::zero(); p];
    for (k, &col) in perm.iter().enumerate() {
        coefficients[col] = z[k] / scale[col];
    }

    let fitted = x.mul_vec(&coefficients);
    let sse: T = fitted.iter().zip(y).map(|(&f, &t)| (t - f) * (t - f)).sum();
    let residual_rms = (sse / from_usize(m)).sqrt();
    let condition_estimate = r00 / diag[p - 1].abs();
    Ok(RegressionFit {
        coefficients,
        residual_rms,
        condition_estimate,
        rank,
        n_obs: m,
        ridge_lambda: opts.ridge_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_design(rng: &mut ChaCha8Rng, m: usize, p: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| {
                let mut row = vec![1.0];
                row.extend((1..p).map(|_| rng.random::<f64>() * 2.0 - 1.0));
                row
            })
            .collect()
    }

    #[test]
    fn identity_like_exact_recovery() {
        let mut rows: Vec<Vec<f64>> = (0..10)
            .map(|i| (0..10).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        rows.push(vec![1.0; 10]);
        rows.push((0..10).map(|j| j as f64).collect());
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let beta: Vec<f64> = (0..10).map(|j| (j as f64 - 4.5) * 1.7).collect();
        let y = x.mul_vec(&beta);
        let fit = fit_multiple_regression(&x, &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-8);
        }
        assert_eq!(fit.rank, 10);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn badly_scaled_columns_recover() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| {
                let hr = 50.0 + 50.0 * rng.random::<f64>();
                let t = 0.01 + 0.05 * rng.random::<f64>();
                vec![1.0, t, hr, hr * hr, t * t]
            })
            .collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let beta = [95.0, 150.0, 0.5, -0.001, 100.0];
        let fit = fit_multiple_regression(&x, &x.mul_vec(&beta)).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(fit.condition_estimate > 1.0);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = random_design(&mut rng, 12, 9);
        for r in &mut rows {
            let c = r[3];
            r.push(c);
        }
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y = vec![1.0; 12];
        match fit_multiple_regression(&x, &y) {
            Err(Error::RankDeficient { rank, columns }) => {
                assert_eq!((rank, columns), (9, 10));
            }
            other => panic!("{other:?}"),
        }
        // A ridge penalty makes the problem well posed again.
        let fit = fit_regularized(
            &x,
            &y,
            &RegressionOptions {
                ridge_lambda: 1e-3,
                unpenalized: vec![0],
            },
        )
        .unwrap();
        assert!((fit.coefficients[3] - fit.coefficients[9]).abs() < 1e-8);
    }

    #[test]
    fn input_validation() {
        let x = DesignMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            fit_multiple_regression(&x, &[1.0]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
        assert!(fit_multiple_regression(&x, &[1.0, 2.0]).is_err());
        assert!(DesignMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
        assert!(DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn residual_rms_matches_theory() {
        // E[RSS] = sigma^2 (n - p), so residual RMS ~ sigma sqrt((n - p) / n).
        let (m, p, sigma) = (40, 10, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let beta: Vec<f64> = (0..p).map(|j| j as f64 - 3.0).collect();
        let mut mean_rms = 0.0;
        for _ in 0..100 {
            let x = DesignMatrix::from_rows(&random_design(&mut rng, m, p)).unwrap();
            let y: Vec<f64> = x
                .mul_vec(&beta)
                .into_iter()
                .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            mean_rms += fit_multiple_regression(&x, &y).unwrap().residual_rms / 100.0;
        }
        let expected = sigma * ((m - p) as f64 / m as f64).sqrt();
        assert!((mean_rms / expected - 1.0).abs() < 0.2, "{mean_rms} vs {expected}");
    }

    #[test]
    fn single_precision() {
        let rows: Vec<[f32; 3]> = (0..8).map(|i| [1.0, i as f32, (i * i) as f32]).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y = x.mul_vec(&[2.0, -1.0, 0.5]);
        let fit = fit_multiple_regression(&x, &y).unwrap();
        assert!((fit.coefficients[2] - 0.5).abs() < 1e-4);
    }
}
