//! Seeded synthetic cohorts: demographics plus gold/silver ellipsoid mask
//! pairs whose silver degradation depends on the case's groups.
//!
//! Every case draws from its own stream `derive_seed(seed, index)`, so a
//! case's phantom and degradation never depend on any other case. Group
//! labels are allocated up front by largest remainder and shuffled with
//! dedicated streams.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{AgeGroup, CaseRecord, Cohort, ExpertRating};
use crate::error::{Error, Result};
use crate::metrics::{compute_case_metrics, CaseMetrics};
use crate::rng::{derive_seed, SplitMix64};
use crate::volume::{mask_paths, write_mask, MaskVolume};

/// Proportions may miss 1 by this much; the allocation absorbs the rest.
pub const PROPORTION_TOL: f64 = 0.01;

const STREAM_AGE: u64 = 0xA6E0_0000_0000_0001;
const STREAM_SOURCE: u64 = 0xA6E0_0000_0000_0002;
const STREAM_ETHNICITY: u64 = 0xA6E0_0000_0000_0003;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proportions {
    pub levels: Vec<String>,
    pub proportions: Vec<f64>,
}

impl Proportions {
    pub fn new(levels: &[&str], proportions: &[f64]) -> Self {
        Self {
            levels: levels.iter().map(|s| s.to_string()).collect(),
            proportions: proportions.to_vec(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        check_proportions(what, &self.proportions)?;
        if self.levels.len() != self.proportions.len() {
            return Err(Error::invalid(format!(
                "{what}: {} levels but {} proportions",
                self.levels.len(),
                self.proportions.len()
            )));
        }
        if self.levels.iter().any(String::is_empty) {
            return Err(Error::invalid(format!("{what}: empty level label")));
        }
        let mut seen = self.levels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.levels.len() {
            return Err(Error::invalid(format!("{what}: duplicate level label")));
        }
        Ok(())
    }
}

fn check_proportions(what: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid(format!("{what}: no levels")));
    }
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::invalid(format!("{what}: proportion outside [0, 1]")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROPORTION_TOL {
        return Err(Error::invalid(format!("{what}: proportions sum to {sum}")));
    }
    Ok(())
}

/// Silver-mask degradation applied to a gold phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationParams {
    pub boundary_erosion_prob: f64,
    pub shrink_factor: f64,
    pub offset_voxels: f64,
    pub miss_prob: f64,
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

impl DegradationParams {
    pub const NEUTRAL: DegradationParams = DegradationParams {
        boundary_erosion_prob: 0.0,
        shrink_factor: 1.0,
        offset_voxels: 0.0,
        miss_prob: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(0.0..=1.0).contains(&p.boundary_erosion_prob) {
            return Err(Error::invalid("boundary_erosion_prob outside [0, 1]"));
        }
        if !(p.shrink_factor > 0.0 && p.shrink_factor <= 1.0) {
            return Err(Error::invalid("shrink_factor outside (0, 1]"));
        }
        if !(p.offset_voxels >= 0.0 && p.offset_voxels.is_finite()) {
            return Err(Error::invalid("offset_voxels must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&p.miss_prob) {
            return Err(Error::invalid("miss_prob outside [0, 1]"));
        }
        Ok(())
    }
}

/// Partial override of [`DegradationParams`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_erosion_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_voxels: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miss_prob: Option<f64>,
}

impl DegradationPatch {
    fn apply(&self, p: &mut DegradationParams) {
        if let Some(v) = self.boundary_erosion_prob {
            p.boundary_erosion_prob = v;
        }
        if let Some(v) = self.shrink_factor {
            p.shrink_factor = v;
        }
        if let Some(v) = self.offset_voxels {
            p.offset_voxels = v;
        }
        if let Some(v) = self.miss_prob {
            p.miss_prob = v;
        }
    }
}

/// Applies `set` to every case matching all given conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ethnicity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_source: Option<String>,
    pub set: DegradationPatch,
}

impl DegradationRule {
    fn matches(&self, age_group: &str, ethnicity: &str, data_source: &str) -> bool {
        self.age_group.as_deref().is_none_or(|v| v == age_group)
            && self.ethnicity.as_deref().is_none_or(|v| v == ethnicity)
            && self.data_source.as_deref().is_none_or(|v| v == data_source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub n_cases: usize,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Range of each ellipsoid semi-axis, in mm.
    pub radius_mm: [f64; 2],
    /// Levels must be `Young`, `Middle`, `Older`.
    pub age_groups: Proportions,
    pub sources: Proportions,
    pub ethnicities: Proportions,
    /// Per-source ethnicity mix overriding `ethnicities.proportions`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ethnicity_by_source: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub base: DegradationParams,
    /// Applied in order over `base`; later matches win per field.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<DegradationRule>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cases == 0 {
            return Err(Error::invalid("n_cases must be positive"));
        }
        if self.n_cases > 99_999 {
            return Err(Error::invalid("n_cases above 99999"));
        }
        self.age_groups.validate("age_groups")?;
        self.sources.validate("sources")?;
        self.ethnicities.validate("ethnicities")?;
        for l in &self.age_groups.levels {
            l.parse::<AgeGroup>()?;
        }
        for (src, p) in &self.ethnicity_by_source {
            if !self.sources.levels.contains(src) {
                return Err(Error::invalid(format!(
                    "ethnicity_by_source: unknown source `{src}`"
                )));
            }
            if p.len() != self.ethnicities.levels.len() {
                return Err(Error::invalid(format!(
                    "ethnicity_by_source[{src}]: wrong number of proportions"
                )));
            }
            check_proportions(&format!("ethnicity_by_source[{src}]"), p)?;
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("spacing must be finite and positive"));
        }
        let [r0, r1] = self.radius_mm;
        let max_spacing = self.spacing.iter().copied().fold(0.0, f64::max);
        // one voxel centre always falls inside an ellipsoid this large
        if !(r0 >= max_spacing && r1 >= r0 && r1.is_finite()) {
            return Err(Error::invalid(format!(
                "radius_mm must satisfy {max_spacing} <= min <= max"
            )));
        }
        for a in 0..3 {
            let extent = self.dims[a] as f64 * self.spacing[a];
            if 2.0 * r1 + 2.0 * self.spacing[a] > extent {
                return Err(Error::invalid(format!(
                    "dims too small: axis {a} spans {extent} mm, needs {} mm for radius {r1}",
                    2.0 * r1 + 2.0 * self.spacing[a]
                )));
            }
        }
        self.base.validate()?;
        for (i, r) in self.rules.iter().enumerate() {
            let mut p = self.base;
            r.set.apply(&mut p);
            p.validate()
                .map_err(|e| Error::invalid(format!("rule {i}: {e}")))?;
        }
        Ok(())
    }

    /// Effective degradation for a case with the given labels.
    pub fn params_for(
        &self,
        age_group: &str,
        ethnicity: &str,
        data_source: &str,
    ) -> DegradationParams {
        let mut p = self.base;
        for r in self
            .rules
            .iter()
            .filter(|r| r.matches(age_group, ethnicity, data_source))
        {
            r.set.apply(&mut p);
        }
        p
    }
}

/// Split `n` by `proportions`: floors of the quotas, then the remaining units
/// (or removals, when the proportions overshoot) by remainder size. Ties go
/// to the earlier level.
pub fn allocate(n: usize, proportions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let rem: Vec<f64> = quotas
        .iter()
        .zip(&counts)
        .map(|(q, &c)| q - c as f64)
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| rem[b].total_cmp(&rem[a]).then(a.cmp(&b)));
    let mut total: usize = counts.iter().sum();
    let mut k = 0;
    while total < n {
        counts[order[k % order.len()]] += 1;
        total += 1;
        k += 1;
    }
    let mut k = 0;
    while total > n {
        let i = order[order.len() - 1 - k % order.len()];
        if counts[i] > 0 {
            counts[i] -= 1;
            total -= 1;
        }
        k += 1;
    }
    counts
}

fn allocated_labels(
    levels: &[String],
    proportions: &[f64],
    n: usize,
    rng: &mut SplitMix64,
) -> Vec<String> {
    let mut labels = Vec::with_capacity(n);
    for (level, c) in levels.iter().zip(allocate(n, proportions)) {
        labels.extend(std::iter::repeat_n(level.clone(), c));
    }
    rng.shuffle(&mut labels);
    labels
}

/// Axis-aligned ellipsoid in physical (mm) coordinates; voxel (x, y, z)
/// sits at (x·sx, y·sy, z·sz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center_mm: [f64; 3],
    pub radii_mm: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3], scale: f64) -> bool {
        (0..3)
            .map(|a| {
                let d = (p[a] - self.center_mm[a]) / (self.radii_mm[a] * scale);
                d * d
            })
            .sum::<f64>()
            <= 1.0
    }

    pub fn voxelize(&self, dims: [usize; 3], spacing: [f64; 3]) -> Result<MaskVolume> {
        MaskVolume::from_fn(dims, spacing, |x, y, z| {
            self.contains(physical([x, y, z], spacing), 1.0)
        })
    }
}

fn physical(v: [usize; 3], spacing: [f64; 3]) -> [f64; 3] {
    [
        v[0] as f64 * spacing[0],
        v[1] as f64 * spacing[1],
        v[2] as f64 * spacing[2],
    ]
}

/// What the perturbation drew, for the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationDraws {
    pub missed: bool,
    pub offset: [i64; 3],
    pub eroded_voxels: usize,
}

fn draw_offset(radius: f64, rng: &mut SplitMix64) -> [i64; 3] {
    let k = radius.floor() as i64;
    if k == 0 {
        return [0; 3];
    }
    let side = (2 * k + 1) as u64;
    loop {
        let v = [
            rng.below(side) as i64 - k,
            rng.below(side) as i64 - k,
            rng.below(side) as i64 - k,
        ];
        if ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) as f64) <= radius * radius {
            return v;
        }
    }
}

/// Degrade `gold` in order: miss, shrink toward the ellipsoid centre, shift
/// by an integer offset inside a ball (voxels leaving the grid are lost),
/// then drop each remaining boundary voxel independently.
pub fn perturb_mask(
    gold: &MaskVolume,
    ellipsoid: &Ellipsoid,
    params: &DegradationParams,
    rng: &mut SplitMix64,
) -> Result<(MaskVolume, PerturbationDraws)> {
    params.validate()?;
    let (dims, spacing) = (gold.dims(), gold.spacing());
    if rng.bernoulli(params.miss_prob) {
        let draws = PerturbationDraws {
            missed: true,
            offset: [0; 3],
            eroded_voxels: 0,
        };
        return Ok((MaskVolume::empty(dims, spacing)?, draws));
    }

    let scale = params.shrink_factor.cbrt();
    let mut data: Vec<bool> = gold.data().to_vec();
    if scale < 1.0 {
        for (i, v) in data.iter_mut().enumerate() {
            if *v && !ellipsoid.contains(physical(gold.coords(i), spacing), scale) {
                *v = false;
            }
        }
    }

    let offset = draw_offset(params.offset_voxels, rng);
    if offset != [0; 3] {
        let mut shifted = vec![false; data.len()];
        for (i, &v) in data.iter().enumerate() {
            if !v {
                continue;
            }
            let c = gold.coords(i);
            let t: Vec<i64> = (0..3).map(|a| c[a] as i64 + offset[a]).collect();
            if (0..3).all(|a| t[a] >= 0 && (t[a] as usize) < dims[a]) {
                shifted[gold.index(t[0] as usize, t[1] as usize, t[2] as usize)] = true;
            }
        }
        data = shifted;
    }

    let mut vol = MaskVolume::new(dims, spacing, data)?;
    let mut eroded = 0;
    if params.boundary_erosion_prob > 0.0 {
        for i in vol.boundary_indices() {
            if rng.bernoulli(params.boundary_erosion_prob) {
                let [x, y, z] = vol.coords(i);
                vol.set(x, y, z, false);
                eroded += 1;
            }
        }
    }
    Ok((
        vol,
        PerturbationDraws {
            missed: false,
            offset,
            eroded_voxels: eroded,
        },
    ))
}

/// Grade implied by the silver mask's Dice.
pub fn rating_for(dice: f64, silver_empty: bool) -> ExpertRating {
    if silver_empty {
        ExpertRating::Missed
    } else if dice >= 0.8 {
        ExpertRating::Good
    } else if dice >= 0.6 {
        ExpertRating::Acceptable
    } else {
        ExpertRating::Poor
    }
}

/// Manifest entry of one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDraw {
    pub case_id: String,
    pub case_seed: u64,
    pub age_years: f64,
    pub age_group: String,
    pub ethnicity: String,
    pub data_source: String,
    pub ellipsoid: Ellipsoid,
    pub params: DegradationParams,
    pub perturbation: PerturbationDraws,
    pub gold_voxels: usize,
    pub silver_voxels: usize,
}

pub struct SynthCase {
    pub draw: CaseDraw,
    pub gold: MaskVolume,
    pub silver: MaskVolume,
}

impl SynthCase {
    pub fn metrics(&self) -> Result<CaseMetrics> {
        compute_case_metrics(&self.draw.case_id, &self.gold, &self.silver)
    }

    fn record(&self, m: &CaseMetrics) -> CaseRecord {
        CaseRecord {
            case_id: self.draw.case_id.clone(),
            age_years: self.draw.age_years,
            ethnicity: self.draw.ethnicity.clone(),
            data_source: self.draw.data_source.clone(),
            expert_rating: Some(rating_for(m.dice, m.silver_voxels == 0)),
        }
    }
}

pub fn case_id(index: usize) -> String {
    format!("case_{:05}", index + 1)
}

fn age_range(g: AgeGroup) -> (f64, f64) {
    match g {
        AgeGroup::Young => (25.0, 39.99),
        AgeGroup::Middle => (40.0, 55.0),
        AgeGroup::Older => (55.01, 80.0),
    }
}

struct Labels {
    age: Vec<String>,
    source: Vec<String>,
    ethnicity: Vec<String>,
}

fn assign_labels(cfg: &ScenarioConfig) -> Labels {
    let n = cfg.n_cases;
    let age = allocated_labels(
        &cfg.age_groups.levels,
        &cfg.age_groups.proportions,
        n,
        &mut SplitMix64::new(derive_seed(cfg.seed, STREAM_AGE)),
    );
    let source = allocated_labels(
        &cfg.sources.levels,
        &cfg.sources.proportions,
        n,
        &mut SplitMix64::new(derive_seed(cfg.seed, STREAM_SOURCE)),
    );
    let mut ethnicity = vec![String::new(); n];
    let mut rng = SplitMix64::new(derive_seed(cfg.seed, STREAM_ETHNICITY));
    for level in &cfg.sources.levels {
        let members: Vec<usize> = (0..n).filter(|&i| &source[i] == level).collect();
        let p = cfg
            .ethnicity_by_source
            .get(level)
            .unwrap_or(&cfg.ethnicities.proportions);
        let labels = allocated_labels(&cfg.ethnicities.levels, p, members.len(), &mut rng);
        for (i, l) in members.into_iter().zip(labels) {
            ethnicity[i] = l;
        }
    }
    Labels {
        age,
        source,
        ethnicity,
    }
}

fn generate_case(cfg: &ScenarioConfig, labels: &Labels, index: usize) -> Result<SynthCase> {
    let case_seed = derive_seed(cfg.seed, index as u64);
    let mut rng = SplitMix64::new(case_seed);
    let group: AgeGroup = labels.age[index].parse()?;
    let (lo, hi) = age_range(group);
    let age_years = (rng.uniform(lo, hi) * 100.0).round() / 100.0;

    let [r0, r1] = cfg.radius_mm;
    let radii_mm = [
        rng.uniform(r0, r1),
        rng.uniform(r0, r1),
        rng.uniform(r0, r1),
    ];
    let mut center_mm = [0.0; 3];
    for a in 0..3 {
        let extent = (cfg.dims[a] - 1) as f64 * cfg.spacing[a];
        let margin = radii_mm[a] + cfg.spacing[a];
        center_mm[a] = rng.uniform(margin, extent - margin);
    }
    let ellipsoid = Ellipsoid {
        center_mm,
        radii_mm,
    };
    let gold = ellipsoid.voxelize(cfg.dims, cfg.spacing)?;
    let params = cfg.params_for(
        group.as_str(),
        &labels.ethnicity[index],
        &labels.source[index],
    );
    let (silver, perturbation) = perturb_mask(&gold, &ellipsoid, &params, &mut rng)?;

    Ok(SynthCase {
        draw: CaseDraw {
            case_id: case_id(index),
            case_seed,
            age_years,
            age_group: group.as_str().to_string(),
            ethnicity: labels.ethnicity[index].clone(),
            data_source: labels.source[index].clone(),
            ellipsoid,
            params,
            perturbation,
            gold_voxels: gold.foreground_count(),
            silver_voxels: silver.foreground_count(),
        },
        gold,
        silver,
    })
}

/// Generate every case in memory, in index order.
pub fn generate_cases(cfg: &ScenarioConfig) -> Result<Vec<SynthCase>> {
    cfg.validate()?;
    let labels = assign_labels(cfg);
    (0..cfg.n_cases)
        .into_par_iter()
        .map(|i| generate_case(cfg, &labels, i))
        .collect()
}

/// Cohort and metrics of a scenario without keeping or writing any masks.
pub fn generate_metrics(cfg: &ScenarioConfig) -> Result<(Cohort, Vec<CaseMetrics>)> {
    cfg.validate()?;
    let labels = assign_labels(cfg);
    let rows: Vec<(CaseRecord, CaseMetrics)> = (0..cfg.n_cases)
        .into_par_iter()
        .map(|i| {
            let case = generate_case(cfg, &labels, i)?;
            let m = case.metrics()?;
            Ok((case.record(&m), m))
        })
        .collect::<Result<_>>()?;
    let (records, metrics): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((Cohort::from_records(records)?, metrics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    /// Cases per level, per attribute.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub cases: Vec<CaseDraw>,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Write `cohort.csv`, `manifest.json` and
/// `masks/<id>_{gold,silver}.{mhd,raw}` under `out_dir`.
pub fn write_scenario(cfg: &ScenarioConfig, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out = out_dir.as_ref();
    let cases = generate_cases(cfg)?;
    let masks = out.join("masks");
    fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;

    let mut records = Vec::with_capacity(cases.len());
    for case in &cases {
        let (gold_path, _) = mask_paths(&masks, &format!("{}_gold", case.draw.case_id));
        let (silver_path, _) = mask_paths(&masks, &format!("{}_silver", case.draw.case_id));
        write_mask(&case.gold, &gold_path)?;
        write_mask(&case.silver, &silver_path)?;
        let m = case.metrics()?;
        records.push(case.record(&m));
    }

    let cohort_path = out.join("cohort.csv");
    let file = fs::File::create(&cohort_path).map_err(|e| Error::io(&cohort_path, e))?;
    write_cohort_csv(&records, file)?;

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for c in &cases {
        for (attr, level) in [
            ("age_group", &c.draw.age_group),
            ("ethnicity", &c.draw.ethnicity),
            ("data_source", &c.draw.data_source),
        ] {
            *counts
                .entry(attr.to_string())
                .or_default()
                .entry(level.clone())
                .or_default() += 1;
        }
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        scenario: cfg.clone(),
        counts,
        cases: cases.into_iter().map(|c| c.draw).collect(),
    };
    let manifest_path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

pub fn write_cohort_csv<W: std::io::Write>(records: &[CaseRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "case_id",
        "age_years",
        "ethnicity",
        "data_source",
        "expert_rating",
    ])?;
    for r in records {
        w.write_record([
            r.case_id.as_str(),
            &format!("{:.2}", r.age_years),
            &r.ethnicity,
            &r.data_source,
            r.expert_rating.map_or("", ExpertRating::as_str),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<cohort csv>", e))?;
    Ok(())
}

const AGE_LEVELS: [&str; 3] = ["Young", "Middle", "Older"];
const AGE_PROPORTIONS: [f64; 3] = [0.232, 0.501, 0.266];

fn scenario(name: &str, seed: u64, n_cases: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        seed,
        n_cases,
        dims: [20, 20, 16],
        spacing: [0.8, 0.8, 1.2],
        radius_mm: [3.0, 6.0],
        age_groups: Proportions::new(&AGE_LEVELS, &AGE_PROPORTIONS),
        sources: Proportions::new(&["DUKE", "ISPY1", "ISPY2", "NACT"], &[0.2, 0.1, 0.6, 0.1]),
        ethnicities: Proportions::new(
            &["African American", "Asian", "Caucasian", "Hispanic"],
            &[0.15, 0.1, 0.6, 0.15],
        ),
        ethnicity_by_source: BTreeMap::new(),
        base: DegradationParams {
            boundary_erosion_prob: 0.3,
            shrink_factor: 0.9,
            offset_voxels: 1.0,
            miss_prob: 0.0,
        },
        rules: Vec::new(),
    }
}

fn rule(
    age_group: Option<&str>,
    ethnicity: Option<&str>,
    data_source: Option<&str>,
    set: DegradationPatch,
) -> DegradationRule {
    DegradationRule {
        age_group: age_group.map(str::to_string),
        ethnicity: ethnicity.map(str::to_string),
        data_source: data_source.map(str::to_string),
        set,
    }
}

fn erosion(p: f64) -> DegradationPatch {
    DegradationPatch {
        boundary_erosion_prob: Some(p),
        ..Default::default()
    }
}

/// Built-in scenarios, sorted by name.
pub fn scenario_library() -> Vec<ScenarioConfig> {
    // Degradation falls with age, identically in every source.
    let mut age_bias = scenario("age_bias_intrinsic", 1506, 1506);
    age_bias.base.miss_prob = 0.01;
    age_bias.rules = vec![
        rule(Some("Young"), None, None, erosion(0.6)),
        rule(Some("Middle"), None, None, erosion(0.4)),
        rule(Some("Older"), None, None, erosion(0.3)),
    ];

    // Opposite ethnicity effects in two equally sized, mirrored sources.
    let mut masking = scenario("masking_effect", 3003, 4000);
    masking.sources = Proportions::new(&["DUKE", "ISPY2"], &[0.5, 0.5]);
    masking.ethnicities = Proportions::new(&["Asian", "Caucasian"], &[0.5, 0.5]);
    masking.rules = vec![
        rule(None, Some("Asian"), Some("DUKE"), erosion(0.45)),
        rule(None, Some("Caucasian"), Some("ISPY2"), erosion(0.45)),
    ];

    // HD95 driven by source offsets; ethnicity mix differs by source.
    let mut confounded = scenario("source_confounded_hd95", 4242, 1200);
    confounded.sources = Proportions::new(&["DUKE", "ISPY1", "ISPY2"], &[0.3, 0.3, 0.4]);
    confounded.ethnicity_by_source = BTreeMap::from([
        ("DUKE".to_string(), vec![0.45, 0.05, 0.4, 0.1]),
        ("ISPY1".to_string(), vec![0.1, 0.1, 0.7, 0.1]),
        ("ISPY2".to_string(), vec![0.05, 0.15, 0.6, 0.2]),
    ]);
    confounded.rules = vec![
        rule(
            None,
            None,
            Some("DUKE"),
            DegradationPatch {
                offset_voxels: Some(3.0),
                ..Default::default()
            },
        ),
        rule(
            None,
            None,
            Some("ISPY1"),
            DegradationPatch {
                offset_voxels: Some(1.8),
                ..Default::default()
            },
        ),
        rule(
            None,
            Some("African American"),
            None,
            DegradationPatch {
                boundary_erosion_prob: Some(0.4),
                ..Default::default()
            },
        ),
    ];

    let null = scenario("null_scenario", 400, 400);

    let mut all = vec![age_bias, masking, null, confounded];
    all.sort_by(|a, b| a.name.cmp(&b.name));
    all
}

pub fn scenario_names() -> Vec<String> {
    scenario_library().into_iter().map(|s| s.name).collect()
}

pub fn find_scenario(name: &str) -> Result<ScenarioConfig> {
    scenario_library()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            Error::invalid(format!(
                "unknown scenario `{name}`; available: {}",
                scenario_names().join(", ")
            ))
        })
}
