//! Shapiro-Wilk W test with Royston's (1995, AS R94) coefficient and
//! p-value approximations. Coefficient tables are listed in
//! `docs/shapiro_wilk.md`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::stats::special::{norm_ppf, sf_norm};
use crate::stats::{TestMethod, TestResult};

pub const MAX_N: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

/// c[0] + c[1]·x + c[2]·x² + …
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Antisymmetric weights a_1..a_{n/2} applied to x_(n+1-i) − x_(i).
fn coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half)
        .map(|i| norm_ppf((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        for i in 2..half {
            a[i] = -m[i] / fac;
        }
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        for i in 1..half {
            a[i] = -m[i] / fac;
        }
    }
    a
}

fn p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if n == 3 {
        let p = 6.0 / PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        return p.clamp(0.0, 1.0);
    }
    let nf = n as f64;
    let y = (1.0 - w).ln();
    let (y, mean, sd) = if n <= 11 {
        let gamma = poly(&G, nf);
        if y >= gamma {
            return 1e-99;
        }
        (-(gamma - y).ln(), poly(&C3, nf), poly(&C4, nf).exp())
    } else {
        let ln_n = nf.ln();
        (y, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };
    sf_norm((y - mean) / sd)
}

/// Shapiro-Wilk test for 3 ≤ n ≤ 5000 non-constant finite values.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if !(3..=MAX_N).contains(&n) {
        return Err(Error::InsufficientData(format!(
            "Shapiro-Wilk needs 3 <= n <= {MAX_N}, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in Shapiro-Wilk input"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[n - 1] == sorted[0] {
        return Err(Error::InsufficientData(
            "Shapiro-Wilk on zero-variance sample".into(),
        ));
    }
    let a = coefficients(n);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let ss: f64 = sorted.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = a
        .iter()
        .enumerate()
        .map(|(i, ai)| ai * (sorted[n - 1 - i] - sorted[i]))
        .sum();
    let w = (num * num / ss).min(1.0);
    Ok(TestResult::new(
        TestMethod::ShapiroWilk,
        w,
        vec![],
        p_value(w, n),
    ))
}

/// Like [`shapiro_wilk`], but samples above 5000 are reduced to the first
/// 5000 values after a seeded shuffle, with a note on the result.
pub fn shapiro_wilk_subsampled(x: &[f64], seed: u64) -> Result<TestResult> {
    if x.len() <= MAX_N {
        return shapiro_wilk(x);
    }
    let mut v = x.to_vec();
    SplitMix64::new(seed).shuffle(&mut v);
    v.truncate(MAX_N);
    let mut r = shapiro_wilk(&v)?;
    r.notes
        .push(format!("subsampled {} -> {MAX_N} (seed {seed})", x.len()));
    Ok(r)
}
