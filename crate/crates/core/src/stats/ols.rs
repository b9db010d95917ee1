//! Least squares via Householder QR, plus nested-model F tests.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::design::DesignMatrix;
use crate::stats::special::{sf_f, t_two_sided};
use crate::stats::{TestMethod, TestResult};

/// Relative tolerance for declaring a column aliased.
pub const RANK_TOL: f64 = 1e-10;

pub(crate) struct Qr {
    /// Columns that survived, in design order.
    pub kept: Vec<usize>,
    /// Columns numerically dependent on earlier ones.
    pub aliased: Vec<usize>,
    /// Upper-triangular factor over `kept`, row-major rank × rank.
    pub r: Vec<f64>,
    /// First `rank` entries of Qᵀy.
    pub qty: Vec<f64>,
}

impl Qr {
    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let k = self.rank();
        let mut beta = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = self.qty[i];
            for j in i + 1..k {
                s -= self.r[i * k + j] * beta[j];
            }
            beta[i] = s / self.r[i * k + i];
        }
        beta
    }

    /// Row-major inverse of the triangular factor.
    fn r_inverse(&self) -> Vec<f64> {
        let k = self.rank();
        let mut inv = vec![0.0; k * k];
        for col in 0..k {
            for i in (0..=col).rev() {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for j in i + 1..=col {
                    s -= self.r[i * k + j] * inv[j * k + col];
                }
                inv[i * k + col] = s / self.r[i * k + i];
            }
        }
        inv
    }
}

/// Householder QR that skips (and reports) columns whose remaining norm
/// falls below `RANK_TOL` times the largest column norm.
pub(crate) fn qr_decompose(x: &DesignMatrix, y: &[f64]) -> Qr {
    let n = x.nrows();
    let p = x.ncols();
    let mut a = x.data().to_vec();
    let mut qy = y.to_vec();
    let col_norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_norm = (0..p)
        .map(|j| col_norm(&a[j * n..(j + 1) * n]))
        .fold(0.0, f64::max);
    let tol = RANK_TOL * max_norm;

    let mut kept = Vec::new();
    let mut aliased = Vec::new();
    let mut reflectors: Vec<Vec<f64>> = Vec::new();
    let mut r_cols: Vec<Vec<f64>> = Vec::new();

    for j in 0..p {
        let row = kept.len();
        let col = &mut a[j * n..(j + 1) * n];
        let norm = if row < n { col_norm(&col[row..]) } else { 0.0 };
        if norm <= tol || row >= n {
            aliased.push(j);
            continue;
        }
        let alpha = if col[row] > 0.0 { -norm } else { norm };
        let mut v = col[row..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        let mut rc = col[..row].to_vec();
        rc.push(alpha);
        r_cols.push(rc);

        if vnorm2 > 0.0 {
            let apply = |target: &mut [f64]| {
                let dot: f64 = v.iter().zip(&target[row..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (t, vi) in target[row..].iter_mut().zip(&v) {
                    *t -= f * vi;
                }
            };
            for jj in j + 1..p {
                apply(&mut a[jj * n..(jj + 1) * n]);
            }
            apply(&mut qy);
        }
        reflectors.push(v);
        kept.push(j);
    }

    let k = kept.len();
    let mut r = vec![0.0; k * k];
    for (c, rc) in r_cols.iter().enumerate() {
        for (i, v) in rc.iter().enumerate() {
            r[i * k + c] = *v;
        }
    }
    Qr {
        kept,
        aliased,
        r,
        qty: qy[..k].to_vec(),
    }
}

fn residual_ss(x: &DesignMatrix, y: &[f64], cols: &[usize], beta: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let fit: f64 = cols.iter().zip(beta).map(|(&j, b)| x.get(i, j) * b).sum();
            let e = y[i] - fit;
            e * e
        })
        .sum()
}

fn total_ss(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

/// RSS and rank of the least-squares fit, tolerating aliased columns.
pub(crate) fn fit_rss(x: &DesignMatrix, y: &[f64]) -> (f64, usize) {
    let qr = qr_decompose(x, y);
    let beta = qr.coefficients();
    (residual_ss(x, y, &qr.kept, &beta), qr.rank())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub response: String,
    /// Term labels, intercept first; used to verify nesting.
    pub terms: Vec<String>,
    pub coefficients: Vec<Coefficient>,
    pub n: usize,
    /// Number of estimated coefficients.
    pub p: usize,
    pub df_resid: usize,
    pub rss: f64,
    pub tss: f64,
    pub r_squared: f64,
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Ordinary least squares of `y` on `x`.
pub fn ols_fit(x: &DesignMatrix, y: &[f64], response: &str) -> Result<RegressionResult> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::invalid(format!(
            "response has {} rows, design {n}",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} rows for {p} coefficients"
        )));
    }
    let qr = qr_decompose(x, y);
    if !qr.aliased.is_empty() {
        return Err(Error::RankDeficient(
            qr.aliased
                .iter()
                .map(|&j| x.column_names()[j].clone())
                .collect(),
        ));
    }
    let beta = qr.coefficients();
    let rss = residual_ss(x, y, &qr.kept, &beta);
    let tss = total_ss(y);
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let rinv = qr.r_inverse();

    let coefficients = (0..p)
        .map(|j| {
            let var: f64 = (j..p)
                .map(|k| rinv[j * p + k] * rinv[j * p + k])
                .sum::<f64>()
                * sigma2;
            let se = var.sqrt();
            let est = beta[j];
            let (t_value, p_value) = if se > 0.0 {
                let t = est / se;
                (Some(t), t_two_sided(t, df_resid as f64).unwrap_or(1.0))
            } else if est != 0.0 {
                (None, 0.0)
            } else {
                (None, 1.0)
            };
            Coefficient {
                name: x.column_names()[j].clone(),
                estimate: est,
                std_error: se,
                t_value,
                p_value,
            }
        })
        .collect();

    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (f_statistic, f_p_value) = if p > 1 {
        if tss == 0.0 {
            (Some(0.0), Some(1.0))
        } else if rss == 0.0 {
            (Some(f64::INFINITY), Some(0.0))
        } else {
            let f = ((tss - rss).max(0.0) / (p - 1) as f64) / sigma2;
            (Some(f), Some(sf_f(f, (p - 1) as f64, df_resid as f64)?))
        }
    } else {
        (None, None)
    };

    Ok(RegressionResult {
        response: response.to_string(),
        terms: x.term_labels(),
        coefficients,
        n,
        p,
        df_resid,
        rss,
        tss,
        r_squared,
        f_statistic,
        f_p_value,
    })
}

/// F test of a reduced model against a full model that extends it.
pub fn anova_nested(reduced: &RegressionResult, full: &RegressionResult) -> Result<TestResult> {
    if reduced.n != full.n || reduced.response != full.response {
        return Err(Error::NotNested(format!(
            "different data: {} (n={}) vs {} (n={})",
            reduced.response, reduced.n, full.response, full.n
        )));
    }
    if let Some(t) = reduced.terms.iter().find(|t| !full.terms.contains(t)) {
        return Err(Error::NotNested(format!(
            "term `{t}` missing from the full model"
        )));
    }
    if full.df_resid >= reduced.df_resid {
        return Err(Error::NotNested("full model adds no parameters".into()));
    }
    let tol = 1e-9 * reduced.rss.max(full.tss).max(f64::MIN_POSITIVE);
    if full.rss > reduced.rss + tol {
        return Err(Error::NotNested(format!(
            "full RSS {} exceeds reduced RSS {}",
            full.rss, reduced.rss
        )));
    }
    let d1 = (reduced.df_resid - full.df_resid) as f64;
    let d2 = full.df_resid as f64;
    let gain = (reduced.rss - full.rss).max(0.0);
    if full.rss == 0.0 {
        let p = if gain > 0.0 { 0.0 } else { 1.0 };
        let stat = if gain > 0.0 { f64::INFINITY } else { 0.0 };
        return Ok(TestResult::new(TestMethod::AnovaF, stat, vec![d1, d2], p));
    }
    let f = (gain / d1) / (full.rss / d2);
    Ok(TestResult::new(
        TestMethod::AnovaF,
        f,
        vec![d1, d2],
        sf_f(f, d1, d2)?,
    ))
}
