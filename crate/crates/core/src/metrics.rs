//! Per-case segmentation quality: Dice overlap and HD95 surface distance.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edt::edt_sq;
use crate::error::{Error, Result};
use crate::stats::descriptive::quantile;
use crate::volume::MaskVolume;

pub const METRICS_CSV_HEADER: &str = "case_id,dice,hd95_mm,gold_voxels,silver_voxels";

/// Quality of one silver mask against its gold mask. `hd95_mm` is `None`
/// (Undefined) exactly when one of the two masks is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub dice: f64,
    pub hd95_mm: Option<f64>,
    pub gold_voxels: usize,
    pub silver_voxels: usize,
}

fn check_dims(a: &MaskVolume, b: &MaskVolume) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

fn check_grid(a: &MaskVolume, b: &MaskVolume) -> Result<()> {
    check_dims(a, b)?;
    if a.spacing() != b.spacing() {
        return Err(Error::SpacingMismatch(a.spacing(), b.spacing()));
    }
    Ok(())
}

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
pub fn dice(gold: &MaskVolume, silver: &MaskVolume) -> Result<f64> {
    check_dims(gold, silver)?;
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (&g, &s) in gold.data().iter().zip(silver.data()) {
        a += usize::from(g);
        b += usize::from(s);
        both += usize::from(g && s);
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

/// Directed distances from each boundary voxel of `a` to the nearest
/// boundary voxel of `b`, in mm, ordered like `a.boundary_voxels()`.
pub fn surface_distances(a: &MaskVolume, b: &MaskVolume) -> Result<Vec<f64>> {
    check_grid(a, b)?;
    if !a.has_foreground() {
        return Err(Error::EmptyMask("source mask of surface distances"));
    }
    if !b.has_foreground() {
        return Err(Error::EmptyMask("target mask of surface distances"));
    }
    let field = edt_sq(b)?;
    Ok(a.boundary_indices()
        .into_iter()
        .map(|i| field[i].sqrt())
        .collect())
}

/// max of the two directed 95th percentiles; `None` when exactly one mask is empty.
pub fn hd95(gold: &MaskVolume, silver: &MaskVolume) -> Result<Option<f64>> {
    check_grid(gold, silver)?;
    match (gold.has_foreground(), silver.has_foreground()) {
        (false, false) => return Ok(Some(0.0)),
        (true, true) => {}
        _ => return Ok(None),
    }
    let forward = quantile(&surface_distances(gold, silver)?, 0.95);
    let backward = quantile(&surface_distances(silver, gold)?, 0.95);
    Ok(Some(forward.max(backward)))
}

pub fn compute_case_metrics(
    case_id: &str,
    gold: &MaskVolume,
    silver: &MaskVolume,
) -> Result<CaseMetrics> {
    Ok(CaseMetrics {
        case_id: case_id.to_string(),
        dice: dice(gold, silver)?,
        hd95_mm: hd95(gold, silver)?,
        gold_voxels: gold.foreground_count(),
        silver_voxels: silver.foreground_count(),
    })
}

/// Serialize metrics rows; Undefined HD95 is written as `NA`.
pub fn write_metrics_csv<W: Write>(rows: &[CaseMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_CSV_HEADER.split(','))?;
    for r in rows {
        let hd = r
            .hd95_mm
            .map_or_else(|| "NA".to_string(), |v| v.to_string());
        w.write_record([
            r.case_id.clone(),
            r.dice.to_string(),
            hd,
            r.gold_voxels.to_string(),
            r.silver_voxels.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
    Ok(())
}

pub(crate) fn parse_optional_f64(field: &str, column: &str) -> Result<Option<f64>> {
    let t = field.trim();
    if t.is_empty() || t == "NA" {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("column {column}: cannot parse {t:?}")))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<CaseMetrics>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("metrics file lacks column `{name}`")))
    };
    let (ci, di, hi, gi, si) = (
        col("case_id")?,
        col("dice")?,
        col("hd95_mm")?,
        col("gold_voxels")?,
        col("silver_voxels")?,
    );
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("").trim();
        let dice = parse_optional_f64(get(di), "dice")?
            .ok_or_else(|| Error::Schema(format!("case {}: missing dice", get(ci))))?;
        if !(0.0..=1.0).contains(&dice) {
            return Err(Error::Schema(format!(
                "case {}: dice {dice} outside [0,1]",
                get(ci)
            )));
        }
        let count = |i: usize, name: &str| {
            get(i)
                .parse::<usize>()
                .map_err(|_| Error::Schema(format!("column {name}: cannot parse {:?}", get(i))))
        };
        rows.push(CaseMetrics {
            case_id: get(ci).to_string(),
            dice,
            hd95_mm: parse_optional_f64(get(hi), "hd95_mm")?,
            gold_voxels: count(gi, "gold_voxels")?,
            silver_voxels: count(si, "silver_voxels")?,
        });
    }
    Ok(rows)
}
