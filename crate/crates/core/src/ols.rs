use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares fit with classical standard errors.
#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub ssr: f64,
    pub nobs: usize,
}

impl OlsFit {
    pub fn t_stat(&self, i: usize) -> f64 {
        self.coef[i] / self.std_err[i]
    }

    /// Gaussian AIC up to the additive constant shared by all fits on the same rows.
    pub fn aic(&self) -> f64 {
        let n = self.nobs as f64;
        n * (self.ssr / n).ln() + 2.0 * self.coef.len() as f64
    }
}

/// Solves `min ||y - X b||` by Householder QR on column-equilibrated `X`.
pub(crate) fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::InsufficientData { what: "OLS observations", needed: k + 1, got: n });
    }
    let norms: Vec<f64> = (0..k).map(|j| x.column(j).norm()).collect();
    if norms.iter().any(|&c| c == 0.0 || !c.is_finite()) {
        return Err(Error::SingularRegression("zero or non-finite regressor column"));
    }
    let mut xs = x.clone();
    for (j, &c) in norms.iter().enumerate() {
        xs.column_mut(j).unscale_mut(c);
    }
    let qr = xs.clone().qr();
    let r = qr.r();
    let rmax = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return Err(Error::SingularRegression("rank-deficient design"));
    }
    let qty = qr.q().transpose() * y;
    let beta_s = r.solve_upper_triangular(&qty).ok_or(Error::SingularRegression("triangular solve failed"))?;
    let resid = y - &xs * &beta_s;
    let ssr = resid.norm_squared();
    let sigma2 = ssr / (n - k) as f64;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::SingularRegression("triangular inverse failed"))?;
    let cov_diag: Vec<f64> = (0..k).map(|i| rinv.row(i).norm_squared() * sigma2).collect();
    let coef = (0..k).map(|j| beta_s[j] / norms[j]).collect();
    let std_err = (0..k).map(|j| cov_diag[j].sqrt() / norms[j]).collect();
    Ok(OlsFit { coef, std_err, ssr, nobs: n })
}
