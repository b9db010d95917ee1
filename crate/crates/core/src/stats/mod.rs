//! Statistics engine: special functions, linear models, and hypothesis tests.

pub mod categorical;
pub mod descriptive;
pub mod design;
pub mod effect;
pub mod nonparametric;
pub mod normality;
pub mod ols;
pub mod special;

use serde::Serialize;

pub use categorical::{bonferroni, chi_square_independence};
pub use design::{build_design, build_design_pruned, DesignMatrix, Term};
pub use effect::{eta_squared, EffectAttenuation};
pub use nonparametric::{kruskal_wallis, mann_whitney_u, mann_whitney_u_with, MwuMethod};
pub use normality::{shapiro_wilk, shapiro_wilk_subsampled};
pub use ols::{anova_nested, ols_fit, RegressionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ShapiroWilk,
    KruskalWallis,
    MannWhitneyU,
    ChiSquare,
    AnovaF,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    /// One entry for chi-square style tests, two for F tests, none for
    /// Shapiro-Wilk and Mann-Whitney.
    pub df: Vec<f64>,
    pub p_value: f64,
    /// Set when the data carried no information (e.g. all values tied) and
    /// the p-value is 1 by convention.
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestResult {
    pub(crate) fn new(method: TestMethod, statistic: f64, df: Vec<f64>, p_value: f64) -> Self {
        Self {
            method,
            statistic,
            df,
            p_value: p_value.clamp(0.0, 1.0),
            degenerate: false,
            notes: Vec::new(),
        }
    }

    pub(crate) fn degenerate(method: TestMethod, df: Vec<f64>, note: &str) -> Self {
        Self {
            method,
            statistic: 0.0,
            df,
            p_value: 1.0,
            degenerate: true,
            notes: vec![note.to_string()],
        }
    }
}

/// Report formatting for p-values: 4 significant digits, scientific below 1e-4.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        return "0".to_string();
    }
    if p < 1e-4 {
        return format!("{p:.3e}");
    }
    let digits = 3 - p.log10().floor() as i32;
    format!("{:.*}", digits.max(0) as usize, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.166), "0.1660");
        assert_eq!(format_p(0.0006), "0.0006000");
        assert_eq!(format_p(0.02604), "0.02604");
        assert_eq!(format_p(1.3e-7), "1.300e-7");
        assert_eq!(format_p(1.0), "1.000");
    }
}
