//! The audit pipeline: normality, omnibus and post-hoc group tests, fairness
//! summaries, regression with source adjustment, per-source disaggregation
//! and expert-rating association, assembled into one [`AuditReport`].
//!
//! Analyses that cannot run are never silently skipped: each one lands in
//! the report's exclusion ledger with a reason.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{is_categorical, AuditTable, ExpertRating};
use crate::error::{Error, Result};
use crate::fairness::{binarize_top_quartile, fairness_summary, FairnessResult, Orientation};
use crate::stats::{
    anova_nested, bonferroni, build_design, build_design_pruned, chi_square_independence,
    eta_squared, kruskal_wallis, mann_whitney_u, ols_fit, shapiro_wilk_subsampled,
    EffectAttenuation, RegressionResult, Term, TestResult,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const ANALYSABLE_METRICS: [&str; 2] = ["dice", "hd95_mm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: String,
    pub orientation: Orientation,
}

impl MetricSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            orientation: Orientation::for_metric(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub metrics: Vec<MetricSpec>,
    pub attributes: Vec<String>,
    pub source_column: String,
    pub alpha: f64,
    /// Groups smaller than this never form the worst-case DPD/DIR pair.
    pub min_group_size: usize,
    /// Sources with fewer included cases are not disaggregated.
    pub min_source_size: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            metrics: vec![MetricSpec::new("dice"), MetricSpec::new("hd95_mm")],
            attributes: vec!["age_group".into(), "ethnicity".into()],
            source_column: "data_source".into(),
            alpha: 0.05,
            min_group_size: 5,
            min_source_size: 20,
            seed: 0,
        }
    }
}

impl AuditConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AuditConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.metrics.is_empty() {
            return Err(Error::invalid("no metrics configured"));
        }
        for m in &self.metrics {
            if !ANALYSABLE_METRICS.contains(&m.name.as_str()) {
                return Err(Error::Schema(format!("unknown metric column `{}`", m.name)));
            }
        }
        if self.attributes.is_empty() {
            return Err(Error::invalid("no sensitive attributes configured"));
        }
        for a in self
            .attributes
            .iter()
            .chain(std::iter::once(&self.source_column))
        {
            if !is_categorical(a) || a == "expert_rating" {
                return Err(Error::Schema(format!("`{a}` is not a grouping column")));
            }
        }
        if self.attributes.contains(&self.source_column) {
            return Err(Error::invalid(format!(
                "source column `{}` cannot also be a sensitive attribute",
                self.source_column
            )));
        }
        if self.min_group_size == 0 {
            return Err(Error::invalid("min_group_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosthocRow {
    pub group_a: String,
    pub group_b: String,
    pub u: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    pub significant: bool,
}

/// Pairwise Mann-Whitney U over all unordered group pairs with Bonferroni
/// correction (m = number of pairs).
pub fn posthoc_pairs(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<Vec<PosthocRow>> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "post-hoc comparisons need at least 2 groups".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, (a, xa)) in groups.iter().enumerate() {
        for (b, xb) in &groups[i + 1..] {
            let r = mann_whitney_u(xa, xb)?;
            rows.push(PosthocRow {
                group_a: a.clone(),
                group_b: b.clone(),
                u: r.statistic,
                p_raw: r.p_value,
                p_bonferroni: 0.0,
                significant: false,
            });
        }
    }
    let adjusted = bonferroni(&rows.iter().map(|r| r.p_raw).collect::<Vec<_>>());
    for (r, p) in rows.iter_mut().zip(adjusted) {
        r.p_bonferroni = p;
        r.significant = p < alpha;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    /// Slash-separated analysis path, e.g. `regression/dice/age_group/adjusted`.
    pub scope: String,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCoverage {
    pub metric: String,
    pub n_included: usize,
    pub n_excluded: usize,
    /// Undefined values per level of each grouping column.
    pub excluded_by_group: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityResult {
    pub metric: String,
    pub n: usize,
    pub shapiro_wilk: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAnalysis {
    pub metric: String,
    pub attribute: String,
    pub n_included: usize,
    pub kruskal_wallis: Option<TestResult>,
    /// Present only when the omnibus test is significant.
    pub posthoc: Option<Vec<PosthocRow>>,
    pub fairness: Option<FairnessResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionBlock {
    pub metric: String,
    pub attribute: String,
    /// metric ~ attribute
    pub baseline: Option<RegressionResult>,
    /// metric ~ source
    pub source_only: Option<RegressionResult>,
    /// metric ~ attribute + source
    pub adjusted: Option<RegressionResult>,
    /// metric ~ attribute + source + attribute:source
    pub interaction: Option<RegressionResult>,
    /// Interaction columns removed as empty or aliased cells.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub interaction_dropped_columns: Vec<String>,
    /// baseline vs adjusted: does the source add to the attribute?
    pub anova_source: Option<TestResult>,
    /// source_only vs adjusted: does the attribute survive adjustment?
    pub anova_attribute_adjusted: Option<TestResult>,
    /// adjusted vs interaction
    pub anova_interaction: Option<TestResult>,
    pub attenuation: Option<EffectAttenuation>,
}

/// Continuous age models for one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeTrend {
    pub metric: String,
    /// metric ~ age_years
    pub baseline: Option<RegressionResult>,
    /// metric ~ age_years + source
    pub adjusted: Option<RegressionResult>,
    pub anova_source: Option<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceBlock {
    pub source: String,
    pub metric: String,
    pub n_included: usize,
    /// false when the source was below `min_source_size`.
    pub analysed: bool,
    pub analyses: Vec<GroupAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingAssociation {
    pub attribute: String,
    pub n: usize,
    /// Row labels: attribute levels with at least one rated case.
    pub levels: Vec<String>,
    /// Column labels: ratings observed at least once.
    pub ratings: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub chi_square: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseScore {
    pub case_id: String,
    pub metric: String,
    pub value: f64,
    pub high_performer: bool,
    pub age_years: f64,
    pub age_group: String,
    pub ethnicity: String,
    pub data_source: String,
    pub expert_rating: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: AuditConfig,
    pub conventions: BTreeMap<String, String>,
    pub n_cases: usize,
    pub coverage: Vec<MetricCoverage>,
    pub normality: Vec<NormalityResult>,
    pub group_analyses: Vec<GroupAnalysis>,
    pub regression: Vec<RegressionBlock>,
    pub age_trend: Vec<AgeTrend>,
    pub disaggregated: Vec<SourceBlock>,
    pub ratings: Vec<RatingAssociation>,
    pub exclusions: Vec<Exclusion>,
    pub per_case: Vec<CaseScore>,
}

impl AuditReport {
    pub fn group_analysis(&self, metric: &str, attribute: &str) -> Option<&GroupAnalysis> {
        self.group_analyses
            .iter()
            .find(|g| g.metric == metric && g.attribute == attribute)
    }

    pub fn regression_block(&self, metric: &str, attribute: &str) -> Option<&RegressionBlock> {
        self.regression
            .iter()
            .find(|g| g.metric == metric && g.attribute == attribute)
    }

    pub fn age_trend(&self, metric: &str) -> Option<&AgeTrend> {
        self.age_trend.iter().find(|a| a.metric == metric)
    }

    pub fn source_blocks(&self, metric: &str) -> impl Iterator<Item = &SourceBlock> {
        let metric = metric.to_string();
        self.disaggregated
            .iter()
            .filter(move |b| b.metric == metric)
    }

    pub fn coverage(&self, metric: &str) -> Option<&MetricCoverage> {
        self.coverage.iter().find(|c| c.metric == metric)
    }

    /// Every p-value of a hypothesis test in the report, labelled by scope.
    /// Normality tests and per-pair post-hoc tests are omitted.
    pub fn hypothesis_tests(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for g in &self.group_analyses {
            if let Some(kw) = &g.kruskal_wallis {
                out.push((
                    format!("kruskal_wallis/{}/{}", g.metric, g.attribute),
                    kw.p_value,
                ));
            }
        }
        for r in &self.regression {
            let scope = |name: &str| format!("{name}/{}/{}", r.metric, r.attribute);
            if let Some(p) = r.baseline.as_ref().and_then(|b| b.f_p_value) {
                out.push((scope("baseline_f"), p));
            }
            if let Some(t) = &r.anova_source {
                out.push((scope("anova_source"), t.p_value));
            }
            if let Some(t) = &r.anova_attribute_adjusted {
                out.push((scope("anova_attribute_adjusted"), t.p_value));
            }
            if let Some(t) = &r.anova_interaction {
                out.push((scope("anova_interaction"), t.p_value));
            }
        }
        for a in &self.age_trend {
            if let Some(p) = a.baseline.as_ref().and_then(|b| b.f_p_value) {
                out.push((format!("age_trend/{}", a.metric), p));
            }
        }
        for r in &self.ratings {
            out.push((
                format!("chi_square/expert_rating/{}", r.attribute),
                r.chi_square.p_value,
            ));
        }
        out
    }
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("quantiles", "linear interpolation between order statistics, h = (n-1)p"),
        ("high_performer", "top quartile of the pooled included values: >= Q3 when higher is better, <= Q1 when lower is better, ties included"),
        ("dpd", "|P(high|a) - P(high|b)|, reported as a decimal"),
        ("dir", "min(rate)/max(rate); null when both rates are 0"),
        ("fairness_gap", "largest minus smallest group mean"),
        ("age_groups", "Young < 40 <= Middle <= 55 < Older (years)"),
        ("hd95", "max of both directed 95th percentiles of boundary-to-boundary distances; boundary = 6-connected; undefined when one mask is empty"),
        ("dice_empty", "1.0 when both masks are empty"),
        ("reference_level", "most frequent level, ties broken lexicographically"),
        ("posthoc", "pairwise Mann-Whitney U only after a significant Kruskal-Wallis test; Bonferroni over all pairs"),
        ("mann_whitney", "exact null distribution when nx*ny <= 400 and no ties, else normal approximation with tie correction and continuity correction"),
        ("shapiro_wilk", "Royston approximation; samples above 5000 are subsampled with the audit seed"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

struct Ledger(Vec<Exclusion>);

impl Ledger {
    fn push(&mut self, scope: impl Into<String>, reason: impl ToString, count: Option<usize>) {
        self.0.push(Exclusion {
            scope: scope.into(),
            reason: reason.to_string(),
            count,
        });
    }

    /// Ok value, or `None` with a ledger entry.
    fn keep<T>(&mut self, scope: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(scope, e, None);
                None
            }
        }
    }
}

fn analyse_groups(
    table: &AuditTable,
    metric: &MetricSpec,
    attribute: &str,
    cfg: &AuditConfig,
    scope: &str,
    ledger: &mut Ledger,
) -> Result<GroupAnalysis> {
    let groups = table.grouped(&metric.name, attribute)?;
    let n_included = groups.iter().map(|(_, v)| v.len()).sum();
    let slices: Vec<&[f64]> = groups.iter().map(|(_, v)| v.as_slice()).collect();
    let kw = ledger.keep(&format!("{scope}/kruskal_wallis"), kruskal_wallis(&slices));
    let posthoc = match &kw {
        Some(k) if !k.degenerate && k.p_value < cfg.alpha => ledger.keep(
            &format!("{scope}/posthoc"),
            posthoc_pairs(&groups, cfg.alpha),
        ),
        _ => None,
    };
    let fairness = ledger.keep(
        &format!("{scope}/fairness"),
        fairness_summary(
            table,
            &metric.name,
            attribute,
            metric.orientation,
            cfg.min_group_size,
        ),
    );
    if let Some(f) = &fairness {
        for g in f.groups.iter().filter(|g| !g.sufficient_n) {
            ledger.push(
                format!("{scope}/fairness/{}", g.group),
                format!(
                    "group below min_group_size {}; not eligible as worst-case pair",
                    cfg.min_group_size
                ),
                Some(g.n),
            );
        }
    }
    Ok(GroupAnalysis {
        metric: metric.name.clone(),
        attribute: attribute.to_string(),
        n_included,
        kruskal_wallis: kw,
        posthoc,
        fairness,
    })
}

fn fit(table: &AuditTable, metric: &str, terms: &[Term]) -> Result<RegressionResult> {
    let (x, y) = build_design(table, metric, terms)?;
    ols_fit(&x, &y, metric)
}

fn regression_block(
    table: &AuditTable,
    metric: &str,
    attribute: &str,
    source: &str,
    ledger: &mut Ledger,
) -> RegressionBlock {
    let scope = format!("regression/{metric}/{attribute}");
    let a = Term::main(attribute);
    let s = Term::main(source);
    let baseline = ledger.keep(
        &format!("{scope}/baseline"),
        fit(table, metric, std::slice::from_ref(&a)),
    );
    let source_only = ledger.keep(
        &format!("{scope}/source_only"),
        fit(table, metric, std::slice::from_ref(&s)),
    );
    let adjusted = ledger.keep(
        &format!("{scope}/adjusted"),
        fit(table, metric, &[a.clone(), s.clone()]),
    );
    let mut dropped = Vec::new();
    let interaction = ledger.keep(
        &format!("{scope}/interaction"),
        build_design_pruned(
            table,
            metric,
            &[a.clone(), s.clone(), Term::interaction(attribute, source)],
        )
        .and_then(|(x, y)| {
            dropped = x.dropped_columns.clone();
            ols_fit(&x, &y, metric)
        }),
    );
    let nested = |ledger: &mut Ledger,
                  name: &str,
                  r: Option<&RegressionResult>,
                  f: Option<&RegressionResult>| match (r, f) {
        (Some(r), Some(f)) => ledger.keep(&format!("{scope}/{name}"), anova_nested(r, f)),
        _ => {
            ledger.push(
                format!("{scope}/{name}"),
                "a compared model is unavailable",
                None,
            );
            None
        }
    };
    let anova_source = nested(ledger, "anova_source", baseline.as_ref(), adjusted.as_ref());
    let anova_attribute_adjusted = nested(
        ledger,
        "anova_attribute_adjusted",
        source_only.as_ref(),
        adjusted.as_ref(),
    );
    let anova_interaction = match (&adjusted, &interaction) {
        (Some(r), Some(f)) if f.p == r.p => {
            ledger.push(
                format!("{scope}/anova_interaction"),
                "every interaction cell is empty or aliased",
                None,
            );
            None
        }
        _ => nested(
            ledger,
            "anova_interaction",
            adjusted.as_ref(),
            interaction.as_ref(),
        ),
    };
    let attenuation = ledger.keep(
        &format!("{scope}/attenuation"),
        eta_squared(table, metric, &a, &[s]),
    );
    RegressionBlock {
        metric: metric.to_string(),
        attribute: attribute.to_string(),
        baseline,
        source_only,
        adjusted,
        interaction,
        interaction_dropped_columns: dropped,
        anova_source,
        anova_attribute_adjusted,
        anova_interaction,
        attenuation,
    }
}

fn age_trend(table: &AuditTable, metric: &str, source: &str, ledger: &mut Ledger) -> AgeTrend {
    let scope = format!("age_trend/{metric}");
    let age = Term::main("age_years");
    let baseline = ledger.keep(
        &format!("{scope}/baseline"),
        fit(table, metric, std::slice::from_ref(&age)),
    );
    let adjusted = ledger.keep(
        &format!("{scope}/adjusted"),
        fit(table, metric, &[age, Term::main(source)]),
    );
    let anova_source = match (&baseline, &adjusted) {
        (Some(b), Some(a)) => ledger.keep(&format!("{scope}/anova_source"), anova_nested(b, a)),
        _ => None,
    };
    AgeTrend {
        metric: metric.to_string(),
        baseline,
        adjusted,
        anova_source,
    }
}

fn coverage(table: &AuditTable, metric: &str, cfg: &AuditConfig) -> Result<MetricCoverage> {
    let values = table.numeric(metric)?;
    let n_included = values
        .iter()
        .filter(|v| v.is_some_and(f64::is_finite))
        .count();
    let mut excluded_by_group = BTreeMap::new();
    for col in cfg
        .attributes
        .iter()
        .chain(std::iter::once(&cfg.source_column))
    {
        let labels = table.categorical(col)?;
        let mut per: BTreeMap<String, usize> = BTreeMap::new();
        for (v, l) in values.iter().zip(&labels) {
            if !v.is_some_and(f64::is_finite) {
                *per.entry(l.unwrap_or("").to_string()).or_default() += 1;
            }
        }
        excluded_by_group.insert(col.clone(), per);
    }
    Ok(MetricCoverage {
        metric: metric.to_string(),
        n_included,
        n_excluded: table.len() - n_included,
        excluded_by_group,
    })
}

fn rating_association(table: &AuditTable, attribute: &str) -> Result<RatingAssociation> {
    let labels = table.categorical(attribute)?;
    let ratings = table.categorical("expert_rating")?;
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (l, r) in labels.iter().zip(&ratings) {
        if let (Some(l), Some(r)) = (l, r) {
            *counts.entry((l.to_string(), r.to_string())).or_default() += 1;
        }
    }
    let levels: Vec<String> = table
        .levels(attribute)?
        .into_iter()
        .filter(|l| counts.keys().any(|(a, _)| a == l))
        .collect();
    let observed: Vec<String> = ExpertRating::ALL
        .iter()
        .map(|r| r.as_str().to_string())
        .filter(|r| counts.keys().any(|(_, b)| b == r))
        .collect();
    let matrix: Vec<Vec<u64>> = levels
        .iter()
        .map(|l| {
            observed
                .iter()
                .map(|r| counts.get(&(l.clone(), r.clone())).copied().unwrap_or(0))
                .collect()
        })
        .collect();
    let chi_square = chi_square_independence(&matrix)?;
    Ok(RatingAssociation {
        attribute: attribute.to_string(),
        n: counts.values().sum::<u64>() as usize,
        levels,
        ratings: observed,
        counts: matrix,
        chi_square,
    })
}

fn per_case_scores(table: &AuditTable, cfg: &AuditConfig) -> Result<Vec<CaseScore>> {
    let mut out = Vec::new();
    for m in &cfg.metrics {
        let values = table.numeric(&m.name)?;
        let defined: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.filter(|x| x.is_finite()).map(|x| (i, x)))
            .collect();
        let scores: Vec<f64> = defined.iter().map(|&(_, v)| v).collect();
        let flags = match binarize_top_quartile(&scores, m.orientation) {
            Ok(b) => b.outcomes,
            Err(_) => vec![false; scores.len()],
        };
        for ((i, v), high) in defined.into_iter().zip(flags) {
            let row = &table.rows()[i];
            out.push(CaseScore {
                case_id: row.case_id().to_string(),
                metric: m.name.clone(),
                value: v,
                high_performer: high,
                age_years: row.record.age_years,
                age_group: row.age_group.to_string(),
                ethnicity: row.record.ethnicity.clone(),
                data_source: row.record.data_source.clone(),
                expert_rating: row.record.expert_rating.map(|r| r.to_string()),
            });
        }
    }
    Ok(out)
}

/// Run every configured analysis over `table`.
pub fn run_audit(table: &AuditTable, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    if table.is_empty() {
        return Err(Error::InsufficientData("audit table is empty".into()));
    }
    let mut ledger = Ledger(Vec::new());

    let mut coverages = Vec::new();
    for m in &cfg.metrics {
        let c = coverage(table, &m.name, cfg)?;
        if c.n_included == 0 {
            return Err(Error::InsufficientData(format!(
                "every `{}` value is undefined",
                m.name
            )));
        }
        if c.n_excluded > 0 {
            ledger.push(
                format!("metric/{}", m.name),
                "undefined value (one mask empty)",
                Some(c.n_excluded),
            );
        }
        coverages.push(c);
    }

    let mut normality = Vec::new();
    for m in &cfg.metrics {
        let values: Vec<f64> = table
            .numeric(&m.name)?
            .into_iter()
            .flatten()
            .filter(|v| v.is_finite())
            .collect();
        if let Some(sw) = ledger.keep(
            &format!("normality/{}", m.name),
            shapiro_wilk_subsampled(&values, cfg.seed),
        ) {
            normality.push(NormalityResult {
                metric: m.name.clone(),
                n: values.len(),
                shapiro_wilk: sw,
            });
        }
    }

    let mut group_analyses = Vec::new();
    for m in &cfg.metrics {
        for a in &cfg.attributes {
            let scope = format!("groups/{}/{a}", m.name);
            group_analyses.push(analyse_groups(table, m, a, cfg, &scope, &mut ledger)?);
        }
    }

    let mut regression = Vec::new();
    for m in &cfg.metrics {
        for a in &cfg.attributes {
            regression.push(regression_block(
                table,
                &m.name,
                a,
                &cfg.source_column,
                &mut ledger,
            ));
        }
    }
    let age_trend: Vec<AgeTrend> = cfg
        .metrics
        .iter()
        .map(|m| age_trend(table, &m.name, &cfg.source_column, &mut ledger))
        .collect();

    let mut disaggregated = Vec::new();
    for source in table.levels(&cfg.source_column)? {
        let sub = table.filter(|r| r.categorical(&cfg.source_column) == Some(source.as_str()));
        for m in &cfg.metrics {
            let n_included = sub
                .numeric(&m.name)?
                .iter()
                .filter(|v| v.is_some_and(f64::is_finite))
                .count();
            let scope = format!("disaggregated/{source}/{}", m.name);
            let mut block = SourceBlock {
                source: source.clone(),
                metric: m.name.clone(),
                n_included,
                analysed: n_included >= cfg.min_source_size,
                analyses: Vec::new(),
            };
            if block.analysed {
                for a in &cfg.attributes {
                    let scope = format!("{scope}/{a}");
                    block
                        .analyses
                        .push(analyse_groups(&sub, m, a, cfg, &scope, &mut ledger)?);
                }
            } else {
                ledger.push(
                    scope,
                    format!("source below min_source_size {}", cfg.min_source_size),
                    Some(n_included),
                );
            }
            disaggregated.push(block);
        }
    }

    let mut ratings = Vec::new();
    let rated = table
        .rows()
        .iter()
        .filter(|r| r.record.expert_rating.is_some())
        .count();
    if rated == 0 {
        ledger.push("ratings", "no expert ratings present", None);
    } else {
        for a in &cfg.attributes {
            if let Some(r) = ledger.keep(&format!("ratings/{a}"), rating_association(table, a)) {
                ratings.push(r);
            }
        }
    }

    Ok(AuditReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        conventions: conventions(),
        n_cases: table.len(),
        coverage: coverages,
        normality,
        group_analyses,
        regression,
        age_trend,
        disaggregated,
        ratings,
        exclusions: ledger.0,
        per_case: per_case_scores(table, cfg)?,
    })
}
