//! Effect-size attenuation of a term after adjusting for covariates.
//!
//! Unadjusted η² = (TSS − RSS(y ~ effect)) / TSS. Adjusted share
//! Δ = (RSS(y ~ covariates) − RSS(y ~ covariates + effect)) / TSS, i.e. the
//! sequential sum of squares of the effect entered last. Attenuation is
//! 100 · (η² − Δ) / η². All fits use the same rows.

use serde::Serialize;

use crate::cohort::{is_numeric, AuditRow, AuditTable};
use crate::error::{Error, Result};
use crate::stats::design::{assemble, Term};
use crate::stats::ols::fit_rss;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectAttenuation {
    pub effect: String,
    pub covariates: Vec<String>,
    pub n: usize,
    pub eta_sq_unadjusted: f64,
    pub delta_adjusted: f64,
    /// `None` when the unadjusted η² is zero.
    pub attenuation_pct: Option<f64>,
}

fn term_columns(t: &Term) -> Vec<String> {
    match t {
        Term::Main(a) => vec![a.clone()],
        Term::Interaction(a, b) => vec![a.clone(), b.clone()],
    }
}

fn row_defined(row: &AuditRow, col: &str) -> bool {
    if is_numeric(col) {
        row.numeric(col).is_some_and(f64::is_finite)
    } else {
        row.categorical(col).is_some()
    }
}

pub fn eta_squared(
    table: &AuditTable,
    response: &str,
    effect: &Term,
    covariates: &[Term],
) -> Result<EffectAttenuation> {
    let mut cols: Vec<String> = vec![response.to_string()];
    cols.extend(term_columns(effect));
    for c in covariates {
        cols.extend(term_columns(c));
    }
    for c in &cols {
        AuditTable::check_column(c)?;
    }
    let sub = table.filter(|r| cols.iter().all(|c| row_defined(r, c)));
    if sub.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable rows for effect size",
            sub.len()
        )));
    }

    let (d_eff, y) = assemble(&sub, response, std::slice::from_ref(effect), false)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let (rss_eff, _) = fit_rss(&d_eff, &y);

    let rss_cov = if covariates.is_empty() {
        tss
    } else {
        let (d_cov, _) = assemble(&sub, response, covariates, false)?;
        fit_rss(&d_cov, &y).0
    };
    let mut all = covariates.to_vec();
    all.push(effect.clone());
    let (d_all, _) = assemble(&sub, response, &all, false)?;
    let (rss_all, _) = fit_rss(&d_all, &y);

    let (eta, delta) = if tss > 0.0 {
        (
            ((tss - rss_eff) / tss).clamp(0.0, 1.0),
            ((rss_cov - rss_all) / tss).clamp(0.0, 1.0),
        )
    } else {
        (0.0, 0.0)
    };
    // relative noise floor of the QR fits
    let floor = |v: f64| if v < 1e-12 { 0.0 } else { v };
    let (eta, delta) = (floor(eta), floor(delta));
    let attenuation_pct = (eta > 0.0).then(|| 100.0 * (eta - delta) / eta);
    Ok(EffectAttenuation {
        effect: effect.label(),
        covariates: covariates.iter().map(Term::label).collect(),
        n: sub.len(),
        eta_sq_unadjusted: eta,
        delta_adjusted: delta,
        attenuation_pct,
    })
}
