//! Case metadata, age binning, the joined audit table, and balanced
//! sub-cohort sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{parse_optional_f64, CaseMetrics};
use crate::rng::SplitMix64;

pub const AUDIT_TABLE_HEADER: [&str; 8] = [
    "case_id",
    "age_years",
    "age_group",
    "ethnicity",
    "data_source",
    "expert_rating",
    "dice",
    "hd95_mm",
];

pub const CATEGORICAL_COLUMNS: [&str; 4] =
    ["age_group", "ethnicity", "data_source", "expert_rating"];
pub const NUMERIC_COLUMNS: [&str; 3] = ["age_years", "dice", "hd95_mm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    Young,
    Middle,
    Older,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 3] = [AgeGroup::Young, AgeGroup::Middle, AgeGroup::Older];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Young => "Young",
            AgeGroup::Middle => "Middle",
            AgeGroup::Older => "Older",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgeGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("invalid age group label {s:?}")))
    }
}

/// Young below 40, Middle 40 to 55 inclusive, Older above 55.
pub fn bin_age(age_years: f64) -> Result<AgeGroup> {
    if !(age_years > 0.0 && age_years < 120.0) {
        return Err(Error::invalid(format!("age {age_years} outside (0, 120)")));
    }
    Ok(if age_years < 40.0 {
        AgeGroup::Young
    } else if age_years <= 55.0 {
        AgeGroup::Middle
    } else {
        AgeGroup::Older
    })
}

/// Expert visual grade of an automated mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExpertRating {
    Good,
    Acceptable,
    Poor,
    Missed,
}

impl ExpertRating {
    pub const ALL: [ExpertRating; 4] = [
        ExpertRating::Good,
        ExpertRating::Acceptable,
        ExpertRating::Poor,
        ExpertRating::Missed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpertRating::Good => "Good",
            ExpertRating::Acceptable => "Acceptable",
            ExpertRating::Poor => "Poor",
            ExpertRating::Missed => "Missed",
        }
    }
}

impl fmt::Display for ExpertRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpertRating {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExpertRating::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("invalid rating label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub age_years: f64,
    pub ethnicity: String,
    pub data_source: String,
    pub expert_rating: Option<ExpertRating>,
}

/// Validated case records keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cohort {
    records: BTreeMap<String, CaseRecord>,
}

impl Cohort {
    pub fn from_records(records: impl IntoIterator<Item = CaseRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            if r.case_id.is_empty() {
                return Err(Error::Schema("empty case_id".into()));
            }
            bin_age(r.age_years).map_err(|_| {
                Error::Schema(format!(
                    "case {}: age {} outside (0, 120)",
                    r.case_id, r.age_years
                ))
            })?;
            if r.ethnicity.is_empty() || r.data_source.is_empty() {
                return Err(Error::Schema(format!(
                    "case {}: empty category label",
                    r.case_id
                )));
            }
            if map.contains_key(&r.case_id) {
                return Err(Error::DuplicateCase(r.case_id));
            }
            map.insert(r.case_id.clone(), r);
        }
        Ok(Self { records: map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, case_id: &str) -> Option<&CaseRecord> {
        self.records.get(case_id)
    }

    /// Records in case_id order.
    pub fn records(&self) -> impl Iterator<Item = &CaseRecord> {
        self.records.values()
    }
}

struct Columns {
    index: BTreeMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord) -> Self {
        Self {
            index: headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.trim().to_string(), i))
                .collect(),
        }
    }

    fn required(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_age(case_id: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::Schema(format!("case {case_id}: unparsable age {raw:?}")))
}

fn parse_rating(raw: &str) -> Result<Option<ExpertRating>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        raw.parse().map(Some)
    }
}

/// Parse a cohort CSV (`case_id,age_years,ethnicity,data_source[,expert_rating]`).
pub fn read_cohort<R: Read>(input: R) -> Result<Cohort> {
    let mut rdr = csv::Reader::from_reader(input);
    let cols = Columns::new(rdr.headers()?);
    let ci = cols.required("case_id")?;
    let ai = cols.required("age_years")?;
    let ei = cols.required("ethnicity")?;
    let si = cols.required("data_source")?;
    let ri = cols.optional("expert_rating");

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let case_id = field(&rec, ci).to_string();
        records.push(CaseRecord {
            age_years: parse_age(&case_id, field(&rec, ai))?,
            ethnicity: field(&rec, ei).to_string(),
            data_source: field(&rec, si).to_string(),
            expert_rating: match ri {
                Some(i) => parse_rating(field(&rec, i))?,
                None => None,
            },
            case_id,
        });
    }
    Cohort::from_records(records)
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<Cohort> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cohort(file)
}

/// One case of the analysis table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub record: CaseRecord,
    pub age_group: AgeGroup,
    pub dice: f64,
    pub hd95_mm: Option<f64>,
}

impl AuditRow {
    pub fn case_id(&self) -> &str {
        &self.record.case_id
    }

    /// Value of a categorical column, `None` when the cell is empty.
    pub fn categorical(&self, name: &str) -> Option<&str> {
        match name {
            "age_group" => Some(self.age_group.as_str()),
            "ethnicity" => Some(&self.record.ethnicity),
            "data_source" => Some(&self.record.data_source),
            "expert_rating" => self.record.expert_rating.map(ExpertRating::as_str),
            _ => None,
        }
    }

    pub fn numeric(&self, name: &str) -> Option<f64> {
        match name {
            "age_years" => Some(self.record.age_years),
            "dice" => Some(self.dice),
            "hd95_mm" => self.hd95_mm,
            _ => None,
        }
    }
}

/// Ids that did not find a partner during a join.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    pub cohort_only: Vec<String>,
    pub metrics_only: Vec<String>,
}

/// Cases with demographics and quality metrics, ordered by case_id.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditTable {
    rows: Vec<AuditRow>,
}

pub fn is_categorical(name: &str) -> bool {
    CATEGORICAL_COLUMNS.contains(&name)
}

pub fn is_numeric(name: &str) -> bool {
    NUMERIC_COLUMNS.contains(&name)
}

impl AuditTable {
    pub fn from_rows(mut rows: Vec<AuditRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.record.case_id.cmp(&b.record.case_id));
        for w in rows.windows(2) {
            if w[0].record.case_id == w[1].record.case_id {
                return Err(Error::DuplicateCase(w[0].record.case_id.clone()));
            }
        }
        for r in &rows {
            if !(0.0..=1.0).contains(&r.dice) {
                return Err(Error::Schema(format!(
                    "case {}: dice {} outside [0,1]",
                    r.case_id(),
                    r.dice
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[AuditRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn check_column(name: &str) -> Result<()> {
        if is_categorical(name) || is_numeric(name) {
            Ok(())
        } else {
            Err(Error::Schema(format!("unknown column `{name}`")))
        }
    }

    pub fn categorical(&self, name: &str) -> Result<Vec<Option<&str>>> {
        if !is_categorical(name) {
            return Err(Error::Schema(format!(
                "`{name}` is not a categorical column"
            )));
        }
        Ok(self.rows.iter().map(|r| r.categorical(name)).collect())
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>> {
        if !is_numeric(name) {
            return Err(Error::Schema(format!("`{name}` is not a numeric column")));
        }
        Ok(self.rows.iter().map(|r| r.numeric(name)).collect())
    }

    /// Observed levels of a categorical column in canonical order: clinical
    /// order for age group and rating, lexicographic otherwise.
    pub fn levels(&self, name: &str) -> Result<Vec<String>> {
        let observed: BTreeSet<&str> = self.categorical(name)?.into_iter().flatten().collect();
        let canonical: Option<Vec<&str>> = match name {
            "age_group" => Some(AgeGroup::ALL.iter().map(|g| g.as_str()).collect()),
            "expert_rating" => Some(ExpertRating::ALL.iter().map(|r| r.as_str()).collect()),
            _ => None,
        };
        Ok(match canonical {
            Some(order) => order
                .into_iter()
                .filter(|l| observed.contains(l))
                .map(String::from)
                .collect(),
            None => observed.into_iter().map(String::from).collect(),
        })
    }

    /// Defined values of `metric` split by the levels of `attribute`, in
    /// canonical level order; levels without any defined value are omitted.
    pub fn grouped(&self, metric: &str, attribute: &str) -> Result<Vec<(String, Vec<f64>)>> {
        let values = self.numeric(metric)?;
        let labels = self.categorical(attribute)?;
        let mut groups: Vec<(String, Vec<f64>)> = self
            .levels(attribute)?
            .into_iter()
            .map(|l| (l, Vec::new()))
            .collect();
        for (v, l) in values.iter().zip(&labels) {
            if let (Some(v), Some(l)) = (v, l) {
                if let Some((_, g)) = groups.iter_mut().find(|(name, _)| name == l) {
                    g.push(*v);
                }
            }
        }
        groups.retain(|(_, g)| !g.is_empty());
        Ok(groups)
    }

    pub fn filter(&self, mut keep: impl FnMut(&AuditRow) -> bool) -> AuditTable {
        AuditTable {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(AUDIT_TABLE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.record.case_id.clone(),
                r.record.age_years.to_string(),
                r.age_group.to_string(),
                r.record.ethnicity.clone(),
                r.record.data_source.clone(),
                r.record
                    .expert_rating
                    .map(|x| x.to_string())
                    .unwrap_or_default(),
                r.dice.to_string(),
                r.hd95_mm
                    .map_or_else(|| "NA".to_string(), |v| v.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<audit table>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let cols = Columns::new(rdr.headers()?);
        let ci = cols.required("case_id")?;
        let ai = cols.required("age_years")?;
        let gi = cols.optional("age_group");
        let ei = cols.required("ethnicity")?;
        let si = cols.required("data_source")?;
        let ri = cols.optional("expert_rating");
        let di = cols.required("dice")?;
        let hi = cols.required("hd95_mm")?;

        let mut records = Vec::new();
        let mut scores = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let case_id = field(&rec, ci).to_string();
            let age_years = parse_age(&case_id, field(&rec, ai))?;
            if let Some(gi) = gi {
                let stated: AgeGroup = field(&rec, gi).parse()?;
                if bin_age(age_years).ok() != Some(stated) {
                    return Err(Error::Schema(format!(
                        "case {case_id}: age_group {stated} inconsistent with age {age_years}"
                    )));
                }
            }
            let dice = parse_optional_f64(field(&rec, di), "dice")?
                .ok_or_else(|| Error::Schema(format!("case {case_id}: missing dice")))?;
            let hd95 = parse_optional_f64(field(&rec, hi), "hd95_mm")?;
            scores.push((dice, hd95));
            records.push(CaseRecord {
                age_years,
                ethnicity: field(&rec, ei).to_string(),
                data_source: field(&rec, si).to_string(),
                expert_rating: match ri {
                    Some(i) => parse_rating(field(&rec, i))?,
                    None => None,
                },
                case_id,
            });
        }
        // Cohort validation covers ids, ages, and labels.
        let cohort = Cohort::from_records(records.clone())?;
        debug_assert_eq!(cohort.len(), records.len());
        let rows = records
            .into_iter()
            .zip(scores)
            .map(|(record, (dice, hd95_mm))| AuditRow {
                age_group: bin_age(record.age_years).expect("validated"),
                record,
                dice,
                hd95_mm,
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Inner join of cohort records and metrics on case_id.
pub fn join_metrics(cohort: &Cohort, metrics: &[CaseMetrics]) -> Result<(AuditTable, JoinReport)> {
    let mut by_id: BTreeMap<&str, &CaseMetrics> = BTreeMap::new();
    for m in metrics {
        if by_id.insert(m.case_id.as_str(), m).is_some() {
            return Err(Error::DuplicateCase(m.case_id.clone()));
        }
    }
    let mut rows = Vec::new();
    let mut report = JoinReport::default();
    for rec in cohort.records() {
        match by_id.remove(rec.case_id.as_str()) {
            Some(m) => rows.push(AuditRow {
                record: rec.clone(),
                age_group: bin_age(rec.age_years)?,
                dice: m.dice,
                hd95_mm: m.hd95_mm,
            }),
            None => report.cohort_only.push(rec.case_id.clone()),
        }
    }
    report.metrics_only = by_id.into_keys().map(String::from).collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData(
            "join of cohort and metrics is empty".into(),
        ));
    }
    Ok((AuditTable::from_rows(rows)?, report))
}

/// Downsample every level of `attribute` to the smallest level's size.
///
/// Each level's ids are sorted, then a partial Fisher-Yates pass driven by
/// one SplitMix64 stream (levels visited in canonical order) picks the rows.
pub fn balance_cohort(table: &AuditTable, attribute: &str, seed: u64) -> Result<AuditTable> {
    let values = table.categorical(attribute)?;
    let levels: Vec<String> = if attribute == "age_group" {
        AgeGroup::ALL.iter().map(|g| g.to_string()).collect()
    } else {
        table.levels(attribute)?
    };
    if levels.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "`{attribute}` needs at least 2 levels to balance, found {}",
            levels.len()
        )));
    }
    let mut members: BTreeMap<&str, Vec<usize>> =
        levels.iter().map(|l| (l.as_str(), Vec::new())).collect();
    for (i, v) in values.iter().enumerate() {
        if let Some(list) = v.and_then(|v| members.get_mut(v)) {
            list.push(i);
        }
    }
    if let Some(l) = levels.iter().find(|l| members[l.as_str()].is_empty()) {
        return Err(Error::InsufficientData(format!(
            "level `{l}` of `{attribute}` has zero rows"
        )));
    }
    let target = members.values().map(Vec::len).min().unwrap_or(0);

    let rows = table.rows();
    let mut rng = SplitMix64::new(seed);
    let mut picked = Vec::with_capacity(target * levels.len());
    for level in &levels {
        let mut idx = members[level.as_str()].clone();
        idx.sort_by(|&a, &b| rows[a].case_id().cmp(rows[b].case_id()));
        rng.partial_shuffle(&mut idx, target);
        picked.extend(idx[..target].iter().map(|&i| rows[i].clone()));
    }
    AuditTable::from_rows(picked)
}
