//! Rank-based tests: Kruskal-Wallis H and Mann-Whitney U.

use crate::error::{Error, Result};
use crate::stats::descriptive::{midranks, tie_sum};
use crate::stats::special::{sf_chi2, sf_norm};
use crate::stats::{TestMethod, TestResult};

/// Kruskal-Wallis H test with tie correction; p from chi-square(k-1).
pub fn kruskal_wallis(groups: &[&[f64]]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "Kruskal-Wallis needs at least 2 groups".into(),
        ));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InsufficientData(format!("group {i} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in Kruskal-Wallis input"));
    }
    let df = (groups.len() - 1) as f64;
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let correction = 1.0 - tie_sum(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(TestResult::degenerate(
            TestMethod::KruskalWallis,
            vec![df],
            "all values tied",
        ));
    }

    let mut offset = 0;
    let mut acc = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        acc += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = 12.0 / (n * (n + 1.0)) * acc - 3.0 * (n + 1.0);
    let h = (h / correction).max(0.0);
    let mut result = TestResult::new(TestMethod::KruskalWallis, h, vec![df], sf_chi2(h, df)?);
    if pooled.len() < 5 {
        result
            .notes
            .push("total n < 5: chi-square approximation unreliable".into());
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwuMethod {
    /// Exact null distribution when n_x·n_y ≤ 400 and there are no ties,
    /// normal approximation otherwise.
    Auto,
    Exact,
    Asymptotic,
}

const EXACT_LIMIT: usize = 400;

/// Counts of the Mann-Whitney U statistic over all C(m+n, m) rank
/// arrangements, indexed by U.
fn exact_u_counts(m: usize, n: usize) -> Vec<f64> {
    // f[j][u] for the current i: arrangements of i x's and j y's with U = u
    let max_u = m * n;
    let mut prev: Vec<Vec<f64>> = (0..=n)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; n + 1];
        cur[0][0] = 1.0;
        for j in 1..=n {
            // last element is an x (contributes j to U) or a y
            for u in 0..=i * j {
                let mut c = cur[j - 1][u];
                if u >= j {
                    c += prev[j][u - j];
                }
                cur[j][u] = c;
            }
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

/// Two-sided Mann-Whitney U test; `statistic` is U of `x`.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(x, y, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: MwuMethod) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientData(
            "Mann-Whitney needs two non-empty samples".into(),
        ));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in Mann-Whitney input"));
    }
    let (nx, ny) = (x.len(), y.len());
    let n = (nx + ny) as f64;
    let (ranks, ties) = midranks(&pooled);
    let rx: f64 = ranks[..nx].iter().sum();
    let u = rx - (nx * (nx + 1)) as f64 / 2.0;
    let mu = (nx * ny) as f64 / 2.0;

    let tsum = tie_sum(&ties);
    if tsum >= n * n * n - n {
        return Ok(TestResult::degenerate(
            TestMethod::MannWhitneyU,
            vec![],
            "all values tied",
        ));
    }

    let use_exact = match method {
        MwuMethod::Exact => true,
        MwuMethod::Asymptotic => false,
        MwuMethod::Auto => nx * ny <= EXACT_LIMIT && ties.is_empty(),
    };
    if use_exact {
        if !ties.is_empty() {
            return Err(Error::invalid("exact Mann-Whitney requires tie-free data"));
        }
        let counts = exact_u_counts(nx, ny);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(TestResult::new(TestMethod::MannWhitneyU, u, vec![], p));
    }

    let var = (nx * ny) as f64 / 12.0 * ((n + 1.0) - tsum / (n * (n - 1.0)));
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p = (2.0 * sf_norm(z)).min(1.0);
    Ok(TestResult::new(TestMethod::MannWhitneyU, u, vec![], p))
}
