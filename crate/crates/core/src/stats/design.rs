//! Model matrices with treatment (dummy) coding.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::cohort::{is_categorical, is_numeric, AuditTable};
use crate::error::{Error, Result};
use crate::stats::ols::qr_decompose;

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Term {
    Main(String),
    Interaction(String, String),
}

impl Term {
    pub fn main(name: &str) -> Self {
        Term::Main(name.to_string())
    }

    pub fn interaction(a: &str, b: &str) -> Self {
        Term::Interaction(a.to_string(), b.to_string())
    }

    /// `a:b` parses as an interaction, anything else as a main effect.
    pub fn parse(s: &str) -> Self {
        match s.split_once(':') {
            Some((a, b)) => Term::interaction(a.trim(), b.trim()),
            None => Term::main(s.trim()),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    fn columns(&self) -> Vec<&str> {
        match self {
            Term::Main(a) => vec![a],
            Term::Interaction(a, b) => vec![a, b],
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Main(a) => f.write_str(a),
            Term::Interaction(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// n × p model matrix, column-major, first column the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    data: Vec<f64>,
    column_names: Vec<String>,
    /// (term label, column indices); the intercept is the first entry.
    term_columns: Vec<(String, Vec<usize>)>,
    pub reference_levels: BTreeMap<String, String>,
    /// Rows dropped because the response or a predictor was undefined.
    pub excluded_rows: usize,
    /// Interaction columns dropped because their cell was empty.
    pub dropped_columns: Vec<String>,
}

impl DesignMatrix {
    /// Intercept plus the given numeric columns, one term per column.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>, n: usize) -> Result<Self> {
        let mut data = vec![1.0; n];
        let mut column_names = vec![INTERCEPT.to_string()];
        let mut term_columns = vec![(INTERCEPT.to_string(), vec![0])];
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
            term_columns.push((name.clone(), vec![column_names.len()]));
            column_names.push(name);
            data.extend(col);
        }
        Ok(Self {
            n,
            data,
            column_names,
            term_columns,
            reference_levels: BTreeMap::new(),
            excluded_rows: 0,
            dropped_columns: Vec::new(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.term_columns.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn term_columns(&self) -> &[(String, Vec<usize>)] {
        &self.term_columns
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }
}

struct Block {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn categorical_block(
    name: &str,
    values: &[&str],
    canonical: &[String],
    refs: &mut BTreeMap<String, String>,
) -> Result<Block> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    let levels: Vec<&str> = canonical
        .iter()
        .map(String::as_str)
        .filter(|l| counts.contains_key(l))
        .collect();
    if levels.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "categorical `{name}` is constant over the included rows"
        )));
    }
    // most frequent level; BTreeMap iteration makes ties resolve lexicographically
    let reference = counts
        .iter()
        .fold(None::<(&str, usize)>, |best, (&l, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
        .map(|(l, _)| l)
        .expect("non-empty");
    refs.insert(name.to_string(), reference.to_string());
    let mut block = Block {
        names: Vec::new(),
        columns: Vec::new(),
    };
    for level in levels.into_iter().filter(|l| *l != reference) {
        block.names.push(format!("{name}[{level}]"));
        block.columns.push(
            values
                .iter()
                .map(|v| f64::from(u8::from(*v == level)))
                .collect(),
        );
    }
    Ok(block)
}

fn main_block(
    table: &AuditTable,
    name: &str,
    rows: &[usize],
    refs: &mut BTreeMap<String, String>,
) -> Result<Block> {
    if is_numeric(name) {
        let col = table.numeric(name)?;
        Ok(Block {
            names: vec![name.to_string()],
            columns: vec![rows.iter().map(|&i| col[i].expect("filtered")).collect()],
        })
    } else {
        let col = table.categorical(name)?;
        let values: Vec<&str> = rows.iter().map(|&i| col[i].expect("filtered")).collect();
        categorical_block(name, &values, &table.levels(name)?, refs)
    }
}

pub(crate) fn assemble(
    table: &AuditTable,
    response: &str,
    terms: &[Term],
    check_rank: bool,
) -> Result<(DesignMatrix, Vec<f64>)> {
    if !is_numeric(response) {
        return Err(Error::Schema(format!(
            "response `{response}` is not a numeric column"
        )));
    }
    for t in terms {
        for c in t.columns() {
            if !is_numeric(c) && !is_categorical(c) {
                return Err(Error::Schema(format!("unknown column `{c}` in term {t}")));
            }
        }
    }

    let y_all = table.numeric(response)?;
    let mut needed: Vec<&str> = terms.iter().flat_map(Term::columns).collect();
    needed.sort_unstable();
    needed.dedup();
    let rows: Vec<usize> = (0..table.len())
        .filter(|&i| {
            let row = &table.rows()[i];
            y_all[i].is_some_and(f64::is_finite)
                && needed.iter().all(|c| {
                    if is_numeric(c) {
                        row.numeric(c).is_some_and(f64::is_finite)
                    } else {
                        row.categorical(c).is_some()
                    }
                })
        })
        .collect();
    let excluded_rows = table.len() - rows.len();
    if excluded_rows > 0 {
        log::info!("design for {response}: excluded {excluded_rows} rows with undefined values");
    }
    let n = rows.len();
    let y: Vec<f64> = rows.iter().map(|&i| y_all[i].expect("filtered")).collect();

    let mut refs = BTreeMap::new();
    let mut data = vec![1.0; n];
    let mut column_names = vec![INTERCEPT.to_string()];
    let mut term_columns = vec![(INTERCEPT.to_string(), vec![0])];
    let mut dropped_columns = Vec::new();

    for term in terms {
        let block = match term {
            Term::Main(a) => main_block(table, a, &rows, &mut refs)?,
            Term::Interaction(a, b) => {
                let ba = main_block(table, a, &rows, &mut refs)?;
                let bb = main_block(table, b, &rows, &mut refs)?;
                let mut block = Block {
                    names: Vec::new(),
                    columns: Vec::new(),
                };
                for (na, ca) in ba.names.iter().zip(&ba.columns) {
                    for (nb, cb) in bb.names.iter().zip(&bb.columns) {
                        let name = format!("{na}:{nb}");
                        let col: Vec<f64> = ca.iter().zip(cb).map(|(x, y)| x * y).collect();
                        if col.iter().all(|&v| v == 0.0) {
                            dropped_columns.push(name);
                        } else {
                            block.names.push(name);
                            block.columns.push(col);
                        }
                    }
                }
                block
            }
        };
        let start = column_names.len();
        term_columns.push((term.label(), (start..start + block.names.len()).collect()));
        column_names.extend(block.names);
        for c in block.columns {
            data.extend(c);
        }
    }
    if !dropped_columns.is_empty() {
        log::info!("design for {response}: dropped empty interaction cells {dropped_columns:?}");
    }

    let design = DesignMatrix {
        n,
        data,
        column_names,
        term_columns,
        reference_levels: refs,
        excluded_rows,
        dropped_columns,
    };
    if check_rank {
        let qr = qr_decompose(&design, &y);
        if !qr.aliased.is_empty() {
            return Err(Error::RankDeficient(
                qr.aliased
                    .iter()
                    .map(|&j| design.column_names[j].clone())
                    .collect(),
            ));
        }
    }
    Ok((design, y))
}

/// Build the model matrix for `response ~ terms` over the rows where every
/// involved column is defined.
pub fn build_design(
    table: &AuditTable,
    response: &str,
    terms: &[Term],
) -> Result<(DesignMatrix, Vec<f64>)> {
    assemble(table, response, terms, true)
}

/// Like [`build_design`], but interaction columns aliased with earlier
/// columns (cells that add no information) are dropped and listed in
/// `dropped_columns`. Aliasing among main-effect columns is still an error.
pub fn build_design_pruned(
    table: &AuditTable,
    response: &str,
    terms: &[Term],
) -> Result<(DesignMatrix, Vec<f64>)> {
    let (mut design, y) = assemble(table, response, terms, false)?;
    let aliased = qr_decompose(&design, &y).aliased;
    if aliased.is_empty() {
        return Ok((design, y));
    }
    let interaction_cols: Vec<usize> = design
        .term_columns
        .iter()
        .zip(std::iter::once(None).chain(terms.iter().map(Some)))
        .filter(|(_, t)| matches!(t, Some(Term::Interaction(..))))
        .flat_map(|((_, cols), _)| cols.iter().copied())
        .collect();
    if aliased.iter().any(|j| !interaction_cols.contains(j)) {
        return Err(Error::RankDeficient(
            aliased
                .iter()
                .map(|&j| design.column_names[j].clone())
                .collect(),
        ));
    }
    design.remove_columns(&aliased);
    log::info!("design for {response}: dropped aliased interaction columns");
    Ok((design, y))
}

impl DesignMatrix {
    fn remove_columns(&mut self, drop: &[usize]) {
        let n = self.n;
        let keep: Vec<usize> = (0..self.ncols()).filter(|j| !drop.contains(j)).collect();
        let mut remap = vec![usize::MAX; self.ncols()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        for &j in drop {
            self.dropped_columns.push(self.column_names[j].clone());
        }
        self.data = keep
            .iter()
            .flat_map(|&j| self.data[j * n..(j + 1) * n].to_vec())
            .collect();
        self.column_names = keep.iter().map(|&j| self.column_names[j].clone()).collect();
        for (_, cols) in &mut self.term_columns {
            *cols = cols
                .iter()
                .filter(|&&j| remap[j] != usize::MAX)
                .map(|&j| remap[j])
                .collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{bin_age, AuditRow, CaseRecord};

    fn row(id: usize, age: f64, eth: &str, src: &str, dice: f64) -> AuditRow {
        AuditRow {
            record: CaseRecord {
                case_id: format!("c{id:03}"),
                age_years: age,
                ethnicity: eth.into(),
                data_source: src.into(),
                expert_rating: None,
            },
            age_group: bin_age(age).unwrap(),
            dice,
            hd95_mm: if id.is_multiple_of(7) {
                None
            } else {
                Some(id as f64)
            },
        }
    }

    fn crossed_table() -> AuditTable {
        let ages = [30.0, 45.0, 70.0];
        let srcs = ["A", "B", "C", "D"];
        let mut rows = Vec::new();
        let mut id = 0;
        for (gi, &age) in ages.iter().enumerate() {
            for (si, src) in srcs.iter().enumerate() {
                for k in 0..(2 + gi + si) {
                    rows.push(row(
                        id,
                        age,
                        if k % 3 == 0 { "Y" } else { "X" },
                        src,
                        0.5 + 0.01 * k as f64,
                    ));
                    id += 1;
                }
            }
        }
        AuditTable::from_rows(rows).unwrap()
    }

    #[test]
    fn single_categorical_reference_is_most_frequent() {
        let rows: Vec<_> = (0..15)
            .map(|i| row(i, 50.0, if i < 10 { "X" } else { "Y" }, "S", 0.5))
            .collect();
        let t = AuditTable::from_rows(rows).unwrap();
        let (d, y) = build_design(&t, "dice", &[Term::main("ethnicity")]).unwrap();
        assert_eq!(d.column_names(), ["(Intercept)", "ethnicity[Y]"]);
        assert_eq!(d.reference_levels["ethnicity"], "X");
        assert_eq!(y.len(), 15);
    }

    #[test]
    fn main_effects_and_interaction_widths() {
        let t = crossed_table();
        let (d, _) = build_design(
            &t,
            "dice",
            &[Term::main("age_group"), Term::main("data_source")],
        )
        .unwrap();
        assert_eq!(d.ncols(), 6);
        let (d, _) = build_design(
            &t,
            "dice",
            &[
                Term::main("age_group"),
                Term::main("data_source"),
                Term::interaction("age_group", "data_source"),
            ],
        )
        .unwrap();
        assert_eq!(d.ncols(), 12);
        assert!(d
            .column_names()
            .iter()
            .any(|c| c.contains("]:data_source[")));
        // interaction columns are products of their parents
        let names = d.column_names();
        let j = names.len() - 1;
        let (a, b) = names[j].split_once(':').unwrap();
        let ja = names.iter().position(|c| c == a).unwrap();
        let jb = names.iter().position(|c| c == b).unwrap();
        for i in 0..d.nrows() {
            assert_eq!(d.get(i, j), d.get(i, ja) * d.get(i, jb));
        }
    }

    #[test]
    fn undefined_response_rows_excluded() {
        let t = crossed_table();
        let (d, y) = build_design(&t, "hd95_mm", &[Term::main("age_group")]).unwrap();
        let missing = t.rows().iter().filter(|r| r.hd95_mm.is_none()).count();
        assert!(missing > 0);
        assert_eq!(d.excluded_rows, missing);
        assert_eq!(y.len(), t.len() - missing);
    }

    #[test]
    fn constant_categorical_rejected() {
        let rows: Vec<_> = (0..6).map(|i| row(i, 50.0, "X", "S", 0.5)).collect();
        let t = AuditTable::from_rows(rows).unwrap();
        assert!(matches!(
            build_design(&t, "dice", &[Term::main("ethnicity")]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn aliased_columns_reported() {
        // ethnicity is a relabelling of data_source
        let rows: Vec<_> = (0..12)
            .map(|i| {
                let (e, s) = if i % 2 == 0 { ("X", "A") } else { ("Y", "B") };
                row(i, 30.0 + i as f64, e, s, 0.5)
            })
            .collect();
        let t = AuditTable::from_rows(rows).unwrap();
        let err = build_design(
            &t,
            "dice",
            &[Term::main("data_source"), Term::main("ethnicity")],
        )
        .unwrap_err();
        match err {
            Error::RankDeficient(cols) => assert_eq!(cols, vec!["ethnicity[Y]"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn pruned_drops_only_aliased_interactions() {
        // ethnicity Y only occurs in source B, so Y:B duplicates the Y column
        let rows: Vec<_> = (0..24)
            .map(|i| {
                let s = ["A", "B", "C"][i % 3];
                let e = if s == "B" && i % 2 == 0 { "Y" } else { "X" };
                row(i, 50.0, e, s, 0.4 + 0.01 * (i % 5) as f64)
            })
            .collect();
        let t = AuditTable::from_rows(rows).unwrap();
        let terms = [
            Term::main("ethnicity"),
            Term::main("data_source"),
            Term::interaction("ethnicity", "data_source"),
        ];
        assert!(matches!(
            build_design(&t, "dice", &terms),
            Err(Error::RankDeficient(_))
        ));
        let (d, y) = build_design_pruned(&t, "dice", &terms).unwrap();
        assert_eq!(d.ncols(), 4);
        // Y:C is an empty cell, Y:B is aliased
        assert_eq!(
            d.dropped_columns,
            vec!["ethnicity[Y]:data_source[C]", "ethnicity[Y]:data_source[B]"]
        );
        let idx = &d.term_columns().last().unwrap().1;
        assert!(idx.is_empty());
        assert!(crate::stats::ols_fit(&d, &y, "dice").is_ok());

        let aliased_main: Vec<_> = (0..12)
            .map(|i| {
                let (e, s) = if i % 2 == 0 { ("X", "A") } else { ("Y", "B") };
                row(i, 50.0, e, s, 0.5 + 0.01 * i as f64)
            })
            .collect();
        let t = AuditTable::from_rows(aliased_main).unwrap();
        assert!(build_design_pruned(
            &t,
            "dice",
            &[Term::main("data_source"), Term::main("ethnicity")]
        )
        .is_err());
    }

    #[test]
    fn unknown_column() {
        let t = crossed_table();
        assert!(matches!(
            build_design(&t, "dice", &[Term::main("height")]),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            build_design(&t, "ethnicity", &[]),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn term_parsing() {
        assert_eq!(Term::parse("age_group"), Term::main("age_group"));
        assert_eq!(Term::parse("a:b"), Term::interaction("a", "b"));
        assert_eq!(Term::interaction("a", "b").label(), "a:b");
    }
}
