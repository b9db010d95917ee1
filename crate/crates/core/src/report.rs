//! Rendering of an [`AuditReport`]: canonical JSON, a markdown summary and
//! a bundle of flat CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::audit::{AuditReport, GroupAnalysis};
use crate::error::{Error, Result};
use crate::stats::{format_p, RegressionResult, TestResult};

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions and every map is ordered, so equal reports give equal bytes.
pub fn to_json(report: &AuditReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt4(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), f4)
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn test_line(t: &TestResult) -> String {
    let df =
        t.df.iter()
            .map(|d| format!("{d}"))
            .collect::<Vec<_>>()
            .join(", ");
    let mut s = format!("{:.4}", t.statistic);
    if !df.is_empty() {
        s.push_str(&format!(" (df {df})"));
    }
    s.push_str(&format!(", p={}", format_p(t.p_value)));
    if t.degenerate {
        s.push_str(" [degenerate]");
    }
    s
}

fn model_row(out: &mut String, name: &str, r: Option<&RegressionResult>) {
    match r {
        Some(r) => {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} |",
                r.n,
                f4(r.r_squared),
                opt4(r.f_statistic),
                r.f_p_value.map_or("n/a".into(), format_p)
            );
        }
        None => {
            let _ = writeln!(out, "| {name} | excluded | | | |");
        }
    }
}

fn group_section(out: &mut String, g: &GroupAnalysis, heading: &str) {
    let _ = writeln!(out, "{heading} {} by {}\n", g.metric, g.attribute);
    let Some(f) = &g.fairness else {
        let _ = writeln!(out, "Fairness summary excluded (see exclusions).\n");
        return;
    };
    let _ = writeln!(out, "| group | n | mean ± SD | high-performer rate |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    for s in &f.groups {
        let flag = if s.sufficient_n { "" } else { " (small)" };
        let _ = writeln!(
            out,
            "| {}{flag} | {} | {} ± {} | {} |",
            s.group,
            s.n,
            f4(s.mean),
            f4(s.sd),
            f4(s.rate_high)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- threshold ({}): {}",
        match f.orientation {
            crate::fairness::Orientation::HigherBetter => "≥ Q3",
            crate::fairness::Orientation::LowerBetter => "≤ Q1",
        },
        f4(f.threshold)
    );
    let _ = writeln!(
        out,
        "- highest mean: {}, lowest mean: {}",
        f.max_mean_group, f.min_mean_group
    );
    match &f.worst_dpd {
        Some(w) => {
            let _ = writeln!(
                out,
                "- worst DPD: {} ({}) between {} and {}",
                f4(w.value),
                pct(w.value),
                w.group_a,
                w.group_b
            );
        }
        None => {
            let _ = writeln!(out, "- worst DPD: n/a");
        }
    }
    match &f.worst_dir {
        Some(w) => {
            let _ = writeln!(
                out,
                "- worst DIR: {} between {} and {}",
                f4(w.value),
                w.group_a,
                w.group_b
            );
        }
        None => {
            let _ = writeln!(out, "- worst DIR: n/a");
        }
    }
    if let Some(kw) = &g.kruskal_wallis {
        let _ = writeln!(out, "- Kruskal-Wallis H = {}", test_line(kw));
    }
    if let Some(rows) = &g.posthoc {
        let _ = writeln!(out, "\n| pair | U | p | p (Bonferroni) | significant |");
        let _ = writeln!(out, "|---|---:|---:|---:|---|");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} vs {} | {} | {} | {} | {} |",
                r.group_a,
                r.group_b,
                r.u,
                format_p(r.p_raw),
                format_p(r.p_bonferroni),
                if r.significant { "yes" } else { "no" }
            );
        }
    }
    let _ = writeln!(out);
}

/// Human-readable summary of the headline tables.
pub fn to_markdown(report: &AuditReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(out, "# Segmentation fairness audit\n");
    let _ = writeln!(
        out,
        "{} cases; alpha {}; attributes: {}; source column: {}; seed {}; tool {}; report schema {}.\n",
        report.n_cases,
        c.alpha,
        c.attributes.join(", "),
        c.source_column,
        c.seed,
        report.tool_version,
        report.schema_version
    );

    let _ = writeln!(out, "## Coverage\n");
    let _ = writeln!(out, "| metric | included | excluded |");
    let _ = writeln!(out, "|---|---:|---:|");
    for cv in &report.coverage {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            cv.metric, cv.n_included, cv.n_excluded
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Normality (Shapiro-Wilk)\n");
    for n in &report.normality {
        let _ = writeln!(
            out,
            "- {} (n={}): W = {}",
            n.metric,
            n.n,
            test_line(&n.shapiro_wilk)
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Fairness gaps\n");
    for g in &report.group_analyses {
        let gap = g.fairness.as_ref().map(|f| f.gap);
        let p = report
            .regression_block(&g.metric, &g.attribute)
            .and_then(|r| r.baseline.as_ref())
            .and_then(|b| b.f_p_value);
        let _ = writeln!(
            out,
            "- {} / {}: gap={} (p={})",
            g.metric,
            g.attribute,
            opt4(gap),
            p.map_or("n/a".into(), format_p)
        );
    }
    let _ = writeln!(
        out,
        "\np from the baseline one-way ANOVA (metric ~ attribute).\n"
    );

    let _ = writeln!(out, "## Group summaries\n");
    for g in &report.group_analyses {
        group_section(&mut out, g, "###");
    }

    let _ = writeln!(out, "## Models\n");
    for r in &report.regression {
        let _ = writeln!(out, "### {} ~ {}\n", r.metric, r.attribute);
        let _ = writeln!(out, "| model | n | R² | F | p |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|");
        model_row(&mut out, "baseline", r.baseline.as_ref());
        model_row(&mut out, "source only", r.source_only.as_ref());
        model_row(&mut out, "attribute + source", r.adjusted.as_ref());
        model_row(&mut out, "with interaction", r.interaction.as_ref());
        let _ = writeln!(out);
        for (name, t) in [
            ("source effect", &r.anova_source),
            (
                "attribute after source adjustment",
                &r.anova_attribute_adjusted,
            ),
            ("attribute × source interaction", &r.anova_interaction),
        ] {
            if let Some(t) = t {
                let _ = writeln!(out, "- {name}: F = {}", test_line(t));
            }
        }
        if let Some(a) = &r.attenuation {
            let _ = writeln!(
                out,
                "- η² unadjusted {}, after adjustment {}, attenuation {}",
                f4(a.eta_sq_unadjusted),
                f4(a.delta_adjusted),
                a.attenuation_pct
                    .map_or("n/a".into(), |v| format!("{v:.1}%"))
            );
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out, "## Age trend\n");
    let _ = writeln!(out, "| metric | model | slope per year | p (slope) | R² |");
    let _ = writeln!(out, "|---|---|---:|---:|---:|");
    for a in &report.age_trend {
        for (name, m) in [("age", &a.baseline), ("age + source", &a.adjusted)] {
            if let Some(m) = m {
                let coef = m.coefficient("age_years");
                let _ = writeln!(
                    out,
                    "| {} | {name} | {} | {} | {} |",
                    a.metric,
                    opt4(coef.map(|c| c.estimate)),
                    coef.map_or("n/a".into(), |c| format_p(c.p_value)),
                    f4(m.r_squared)
                );
            }
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## By data source\n");
    let _ = writeln!(
        out,
        "| source | metric | attribute | n | gap | worst DPD | worst DIR | KW p |"
    );
    let _ = writeln!(out, "|---|---|---|---:|---:|---:|---:|---:|");
    for b in &report.disaggregated {
        if !b.analysed {
            let _ = writeln!(
                out,
                "| {} | {} | (skipped) | {} | | | | |",
                b.source, b.metric, b.n_included
            );
            continue;
        }
        for g in &b.analyses {
            let f = g.fairness.as_ref();
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                b.source,
                g.metric,
                g.attribute,
                g.n_included,
                opt4(f.map(|f| f.gap)),
                opt4(f.and_then(|f| f.worst_dpd.as_ref()).map(|w| w.value)),
                opt4(f.and_then(|f| f.worst_dir.as_ref()).map(|w| w.value)),
                g.kruskal_wallis
                    .as_ref()
                    .map_or("n/a".into(), |k| format_p(k.p_value))
            );
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Expert ratings\n");
    if report.ratings.is_empty() {
        let _ = writeln!(out, "No rating analysis (see exclusions).\n");
    }
    for r in &report.ratings {
        let _ = writeln!(out, "### expert_rating × {} (n={})\n", r.attribute, r.n);
        let _ = writeln!(out, "| {} | {} |", r.attribute, r.ratings.join(" | "));
        let _ = writeln!(out, "|---|{}", "---:|".repeat(r.ratings.len()));
        for (l, row) in r.levels.iter().zip(&r.counts) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "| {l} | {} |", cells.join(" | "));
        }
        let _ = writeln!(out, "\n- χ² = {}\n", test_line(&r.chi_square));
    }

    let _ = writeln!(out, "## Exclusions\n");
    if report.exclusions.is_empty() {
        let _ = writeln!(out, "None.");
    }
    for e in &report.exclusions {
        let count = e.count.map_or(String::new(), |c| format!(" (n={c})"));
        let _ = writeln!(out, "- `{}`: {}{count}", e.scope, e.reason);
    }
    out
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `per_case_scores.csv`, `group_summaries.csv`, `pairwise.csv` and
/// `regression_coefficients.csv` under `dir`.
pub fn write_csv_bundle(report: &AuditReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("per_case_scores.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "case_id",
        "metric",
        "value",
        "high_performer",
        "age_years",
        "age_group",
        "ethnicity",
        "data_source",
        "expert_rating",
    ])?;
    for c in &report.per_case {
        w.write_record([
            c.case_id.as_str(),
            &c.metric,
            &c.value.to_string(),
            if c.high_performer { "1" } else { "0" },
            &c.age_years.to_string(),
            &c.age_group,
            &c.ethnicity,
            &c.data_source,
            c.expert_rating.as_deref().unwrap_or(""),
        ])?;
    }
    finish(w, &path)?;

    let scoped: Vec<(&str, &GroupAnalysis)> = report
        .group_analyses
        .iter()
        .map(|g| ("ALL", g))
        .chain(
            report
                .disaggregated
                .iter()
                .flat_map(|b| b.analyses.iter().map(move |g| (b.source.as_str(), g))),
        )
        .collect();

    let path = dir.join("group_summaries.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "source",
        "metric",
        "attribute",
        "group",
        "n",
        "mean",
        "sd",
        "n_high",
        "rate_high",
        "sufficient_n",
    ])?;
    for (src, g) in &scoped {
        let Some(f) = &g.fairness else { continue };
        for s in &f.groups {
            w.write_record([
                *src,
                &g.metric,
                &g.attribute,
                &s.group,
                &s.n.to_string(),
                &s.mean.to_string(),
                &s.sd.to_string(),
                &s.n_high.to_string(),
                &s.rate_high.to_string(),
                if s.sufficient_n { "1" } else { "0" },
            ])?;
        }
    }
    finish(w, &path)?;

    let path = dir.join("pairwise.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "source",
        "metric",
        "attribute",
        "group_a",
        "group_b",
        "dpd",
        "dir",
        "u",
        "p_raw",
        "p_bonferroni",
        "significant",
    ])?;
    for (src, g) in &scoped {
        let Some(f) = &g.fairness else { continue };
        for p in &f.pairs {
            let post = g.posthoc.as_ref().and_then(|rows| {
                rows.iter()
                    .find(|r| r.group_a == p.group_a && r.group_b == p.group_b)
            });
            w.write_record([
                *src,
                &g.metric,
                &g.attribute,
                &p.group_a,
                &p.group_b,
                &p.dpd.to_string(),
                &opt(p.dir),
                &opt(post.map(|r| r.u)),
                &opt(post.map(|r| r.p_raw)),
                &opt(post.map(|r| r.p_bonferroni)),
                post.map_or("", |r| if r.significant { "1" } else { "0" }),
            ])?;
        }
    }
    finish(w, &path)?;

    let path = dir.join("regression_coefficients.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "metric",
        "attribute",
        "model",
        "term",
        "estimate",
        "std_error",
        "t_value",
        "p_value",
    ])?;
    let mut models: Vec<(&str, &str, &str, &RegressionResult)> = Vec::new();
    for r in &report.regression {
        for (name, m) in [
            ("baseline", &r.baseline),
            ("source_only", &r.source_only),
            ("adjusted", &r.adjusted),
            ("interaction", &r.interaction),
        ] {
            if let Some(m) = m {
                models.push((&r.metric, &r.attribute, name, m));
            }
        }
    }
    for a in &report.age_trend {
        for (name, m) in [
            ("age_trend", &a.baseline),
            ("age_trend_adjusted", &a.adjusted),
        ] {
            if let Some(m) = m {
                models.push((&a.metric, "age_years", name, m));
            }
        }
    }
    for (metric, attribute, name, m) in models {
        for c in &m.coefficients {
            w.write_record([
                metric,
                attribute,
                name,
                &c.name,
                &c.estimate.to_string(),
                &c.std_error.to_string(),
                &opt(c.t_value),
                &c.p_value.to_string(),
            ])?;
        }
    }
    finish(w, &path)
}

/// Write `audit.json`, `audit.md` and `tables/*.csv` into `out_dir`.
pub fn render_report(report: &AuditReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let out = out_dir.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let json = out.join("audit.json");
    fs::write(&json, to_json(report)?).map_err(|e| Error::io(&json, e))?;
    let md = out.join("audit.md");
    fs::write(&md, to_markdown(report)).map_err(|e| Error::io(&md, e))?;
    write_csv_bundle(report, &out.join("tables"))
}
