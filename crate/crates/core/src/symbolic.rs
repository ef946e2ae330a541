//! Human-readable count features built from region sets.
//!
//! * [`FeatureMode::Simple`]: number of regions per lesion class, 4 values.
//! * [`FeatureMode::Extended`]: number of small, medium and large regions per
//!   lesion class, 12 values. Regions no larger than `tau0` or larger than
//!   `tau3` fall outside every bucket and are not counted.
//!
//! Vectors are ordered MA, HE, SE, EX; within a class, small, medium, large.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grader::GradePair;
use crate::mask_io::LesionClass;
use crate::regions::{Region, RegionSet};
use crate::table::{self, TableError, TableReader};

/// Size bucket boundaries in pixels: small is `(tau0, tau1]`, medium
/// `(tau1, tau2]`, large `(tau2, tau3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds", into = "RawThresholds")]
pub struct SizeThresholds {
    tau: [u64; 4],
}

#[derive(Serialize, Deserialize)]
struct RawThresholds {
    tau0: u64,
    tau1: u64,
    tau2: u64,
    tau3: u64,
}

impl TryFrom<RawThresholds> for SizeThresholds {
    type Error = FeatureError;

    fn try_from(raw: RawThresholds) -> Result<Self, Self::Error> {
        SizeThresholds::new(raw.tau0, raw.tau1, raw.tau2, raw.tau3)
    }
}

impl From<SizeThresholds> for RawThresholds {
    fn from(t: SizeThresholds) -> Self {
        let [tau0, tau1, tau2, tau3] = t.tau;
        RawThresholds { tau0, tau1, tau2, tau3 }
    }
}

impl Default for SizeThresholds {
    /// 10 / 500 / 1000 / 10000 pixels, tuned for 1024x1024 masks.
    fn default() -> Self {
        Self { tau: [10, 500, 1000, 10000] }
    }
}

impl SizeThresholds {
    pub fn new(tau0: u64, tau1: u64, tau2: u64, tau3: u64) -> Result<Self, FeatureError> {
        if !(tau0 < tau1 && tau1 < tau2 && tau2 < tau3) {
            return Err(FeatureError::Thresholds([tau0, tau1, tau2, tau3]));
        }
        Ok(Self { tau: [tau0, tau1, tau2, tau3] })
    }

    pub fn values(&self) -> [u64; 4] {
        self.tau
    }

    /// The bucket of a region of `size` pixels, `None` when discarded.
    pub fn classify(&self, size: u64) -> Option<SizeBucket> {
        let [t0, t1, t2, t3] = self.tau;
        if size <= t0 || size > t3 {
            None
        } else if size <= t1 {
            Some(SizeBucket::Small)
        } else if size <= t2 {
            Some(SizeBucket::Medium)
        } else {
            Some(SizeBucket::Large)
        }
    }
}

impl fmt::Display for SizeThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.tau;
        write!(f, "{a},{b},{c},{d}")
    }
}

impl std::str::FromStr for SizeThresholds {
    type Err = FeatureError;

    /// Parses `tau0,tau1,tau2,tau3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u64> = s
            .split(',')
            .map(|p| p.trim().parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|_| FeatureError::ThresholdSyntax(s.to_owned()))?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(FeatureError::ThresholdSyntax(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn word(self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.word() == word)
    }
}

/// Regions of one class split by size.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SizeBuckets {
    pub small: Vec<Region>,
    pub medium: Vec<Region>,
    pub large: Vec<Region>,
    pub discarded: Vec<Region>,
}

impl SizeBuckets {
    pub fn get(&self, bucket: SizeBucket) -> &[Region] {
        match bucket {
            SizeBucket::Small => &self.small,
            SizeBucket::Medium => &self.medium,
            SizeBucket::Large => &self.large,
        }
    }
}

/// Partitions regions into size buckets, keeping input order within each.
pub fn bucket_regions(region_set: &RegionSet, thresholds: &SizeThresholds) -> SizeBuckets {
    let mut buckets = SizeBuckets::default();
    for region in region_set.regions() {
        let target = match thresholds.classify(region.size as u64) {
            Some(SizeBucket::Small) => &mut buckets.small,
            Some(SizeBucket::Medium) => &mut buckets.medium,
            Some(SizeBucket::Large) => &mut buckets.large,
            None => &mut buckets.discarded,
        };
        target.push(*region);
    }
    buckets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Simple,
    Extended,
}

impl FeatureMode {
    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        match self {
            FeatureMode::Simple => 4,
            FeatureMode::Extended => 12,
        }
    }

    pub fn from_len(len: usize) -> Option<Self> {
        match len {
            4 => Some(FeatureMode::Simple),
            12 => Some(FeatureMode::Extended),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Simple => "simple",
            FeatureMode::Extended => "extended",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(FeatureMode::Simple),
            "extended" => Ok(FeatureMode::Extended),
            _ => Err(FeatureError::UnknownMode(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    mode: FeatureMode,
    values: Vec<u64>,
}

impl FeatureVector {
    pub fn new(mode: FeatureMode, values: Vec<u64>) -> Result<Self, FeatureError> {
        if values.len() != mode.len() {
            return Err(FeatureError::Length { mode, len: values.len() });
        }
        Ok(Self { mode, values })
    }

    pub fn zeros(mode: FeatureMode) -> Self {
        Self { mode, values: vec![0; mode.len()] }
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// Entry for `class` and `bucket`; Simple vectors have no buckets.
    pub fn bucket_count(&self, class: LesionClass, bucket: SizeBucket) -> Option<u64> {
        match self.mode {
            FeatureMode::Simple => None,
            FeatureMode::Extended => Some(self.values[3 * class.position() + bucket.position()]),
        }
    }

    /// Regions counted for `class` across all buckets.
    pub fn class_total(&self, class: LesionClass) -> u64 {
        match self.mode {
            FeatureMode::Simple => self.values[class.position()],
            FeatureMode::Extended => self.values[3 * class.position()..3 * class.position() + 3].iter().sum(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("size thresholds must be strictly increasing, got {0:?}")]
    Thresholds([u64; 4]),
    #[error("cannot parse thresholds `{0}`, expected tau0,tau1,tau2,tau3")]
    ThresholdSyntax(String),
    #[error("unknown feature mode `{0}`, expected simple or extended")]
    UnknownMode(String),
    #[error("{mode} feature vectors have {} entries, got {len}", mode.len())]
    Length { mode: FeatureMode, len: usize },
    #[error("no region set for lesion class {0}")]
    MissingClass(LesionClass),
    #[error("more than one region set for lesion class {0}")]
    DuplicateClass(LesionClass),
}

/// Orders the region sets by class, checking there is exactly one per class.
fn by_class(region_sets: &[RegionSet]) -> Result<[&RegionSet; 4], FeatureError> {
    let mut slots: [Option<&RegionSet>; 4] = [None; 4];
    for set in region_sets {
        let slot = &mut slots[set.lesion_class().position()];
        if slot.is_some() {
            return Err(FeatureError::DuplicateClass(set.lesion_class()));
        }
        *slot = Some(set);
    }
    let mut out = Vec::with_capacity(4);
    for (class, slot) in LesionClass::ALL.into_iter().zip(slots) {
        out.push(slot.ok_or(FeatureError::MissingClass(class))?);
    }
    Ok(out.try_into().expect("four classes"))
}

/// Region count per class, no size filtering.
pub fn simple_features(region_sets: &[RegionSet]) -> Result<FeatureVector, FeatureError> {
    let sets = by_class(region_sets)?;
    Ok(FeatureVector { mode: FeatureMode::Simple, values: sets.iter().map(|s| s.len() as u64).collect() })
}

/// Small/medium/large region counts per class.
pub fn extended_features(
    region_sets: &[RegionSet],
    thresholds: &SizeThresholds,
) -> Result<FeatureVector, FeatureError> {
    let sets = by_class(region_sets)?;
    let mut values = Vec::with_capacity(12);
    for set in sets {
        let mut counts = [0u64; 3];
        for region in set.regions() {
            if let Some(bucket) = thresholds.classify(region.size as u64) {
                counts[bucket.position()] += 1;
            }
        }
        values.extend(counts);
    }
    Ok(FeatureVector { mode: FeatureMode::Extended, values })
}

pub fn features(
    region_sets: &[RegionSet],
    mode: FeatureMode,
    thresholds: &SizeThresholds,
) -> Result<FeatureVector, FeatureError> {
    match mode {
        FeatureMode::Simple => simple_features(region_sets),
        FeatureMode::Extended => extended_features(region_sets, thresholds),
    }
}

/// One row of a features CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRow {
    pub image_id: String,
    pub features: FeatureVector,
    pub grades: Option<GradePair>,
}

fn feature_header(mode: FeatureMode) -> Vec<String> {
    let mut header = vec!["image_id".to_owned()];
    header.extend((1..=mode.len()).map(|k| format!("f{k}")));
    header.extend(["dr_grade".to_owned(), "dme_grade".to_owned()]);
    header
}

/// Writes `image_id,f1,...,fK,dr_grade,dme_grade`; unlabeled rows leave the
/// grade cells empty. All rows must share `mode`.
pub fn write_features_csv(path: impl AsRef<Path>, mode: FeatureMode, rows: &[FeatureRow]) -> Result<(), TableError> {
    let path = path.as_ref();
    let mut w = table::writer(path)?;
    table::write_row(&mut w, path, feature_header(mode))?;
    for row in rows {
        assert_eq!(row.features.mode(), mode, "feature rows must share one mode");
        let mut cells = vec![row.image_id.clone()];
        cells.extend(row.features.values().iter().map(u64::to_string));
        match row.grades {
            Some(g) => cells.extend([g.dr().to_string(), g.dme().to_string()]),
            None => cells.extend([String::new(), String::new()]),
        }
        table::write_row(&mut w, path, cells)?;
    }
    table::finish(w, path)
}

/// Reads a features CSV; the mode follows from the number of `f` columns.
pub fn read_features_csv(path: impl AsRef<Path>) -> Result<(FeatureMode, Vec<FeatureRow>), TableError> {
    let mut reader = TableReader::open(path.as_ref())?;
    let expected = "image_id,f1..fK,dr_grade,dme_grade with K = 4 or 12";
    let mode = reader
        .headers
        .len()
        .checked_sub(3)
        .and_then(FeatureMode::from_len)
        .filter(|&m| reader.headers == feature_header(m))
        .ok_or_else(|| reader.header_error(expected))?;

    let mut out = Vec::new();
    for row in reader.rows()? {
        let cell = |i: usize| row.record.get(i).unwrap_or("");
        let image_id = cell(0).to_owned();
        let mut values = Vec::with_capacity(mode.len());
        for k in 1..=mode.len() {
            let v = cell(k).trim();
            values.push(
                v.parse::<u64>()
                    .map_err(|_| reader.value_error(&row, &format!("f{k}"), v, "expected a nonnegative integer"))?,
            );
        }
        let (dr, dme) = (cell(mode.len() + 1).trim(), cell(mode.len() + 2).trim());
        let grades = match (dr.is_empty(), dme.is_empty()) {
            (true, true) => None,
            (false, false) => {
                let dr_v = dr.parse::<u8>().map_err(|_| reader.value_error(&row, "dr_grade", dr, "not a grade"))?;
                let dme_v = dme.parse::<u8>().map_err(|_| reader.value_error(&row, "dme_grade", dme, "not a grade"))?;
                Some(
                    GradePair::new(dr_v, dme_v)
                        .map_err(|e| reader.value_error(&row, "grades", &format!("{dr},{dme}"), e.to_string()))?,
                )
            }
            _ => {
                return Err(reader.value_error(&row, "grades", &format!("{dr},{dme}"), "grades must be given together"))
            }
        };
        out.push(FeatureRow { image_id, features: FeatureVector { mode, values }, grades });
    }
    Ok((mode, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(sizes: [&[usize]; 4]) -> Vec<RegionSet> {
        LesionClass::ALL
            .into_iter()
            .zip(sizes)
            .map(|(class, s)| RegionSet::from_sizes(class, s.iter().copied()))
            .collect()
    }

    #[test]
    fn bucket_boundaries() {
        let set = RegionSet::from_sizes(LesionClass::Ma, [5, 10, 11, 500, 501, 1000, 1001, 10000, 10001]);
        let b = bucket_regions(&set, &SizeThresholds::default());
        let sizes = |r: &[Region]| r.iter().map(|r| r.size).collect::<Vec<_>>();
        assert_eq!(sizes(&b.small), vec![11, 500]);
        assert_eq!(sizes(&b.medium), vec![501, 1000]);
        assert_eq!(sizes(&b.large), vec![1001, 10000]);
        assert_eq!(sizes(&b.discarded), vec![5, 10, 10001]);
    }

    #[test]
    fn empty_set_buckets() {
        let b = bucket_regions(&RegionSet::new(LesionClass::Ex, vec![]), &SizeThresholds::default());
        assert_eq!(b, SizeBuckets::default());
    }

    #[test]
    fn thresholds_must_increase() {
        assert!(SizeThresholds::new(10, 10, 20, 30).is_err());
        assert!(SizeThresholds::new(10, 500, 400, 1000).is_err());
        assert!("1,2,3".parse::<SizeThresholds>().is_err());
        assert_eq!("10,500,1000,10000".parse::<SizeThresholds>().unwrap(), SizeThresholds::default());
        let bad: Result<SizeThresholds, _> = serde_json::from_str(r#"{"tau0":5,"tau1":4,"tau2":6,"tau3":7}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn thresholds_json_shape() {
        let json = serde_json::to_string(&SizeThresholds::default()).unwrap();
        assert_eq!(json, r#"{"tau0":10,"tau1":500,"tau2":1000,"tau3":10000}"#);
    }

    #[test]
    fn simple_counts_everything() {
        let sets = sets([&[1; 33], &[600; 13], &[20000; 5], &[3; 27]]);
        assert_eq!(simple_features(&sets).unwrap().values(), &[33, 13, 5, 27]);
    }

    #[test]
    fn empty_sets_give_zero_vectors() {
        let sets = sets([&[], &[], &[], &[]]);
        assert_eq!(simple_features(&sets).unwrap(), FeatureVector::zeros(FeatureMode::Simple));
        assert_eq!(
            extended_features(&sets, &SizeThresholds::default()).unwrap(),
            FeatureVector::zeros(FeatureMode::Extended)
        );
    }

    #[test]
    fn extended_profile() {
        // 37 small MA, 26/2/2 HE, no SE, 197/5/3 EX, plus discarded specks.
        let ma: Vec<usize> = [vec![40; 37], vec![3; 4]].concat();
        let he: Vec<usize> = [vec![100; 26], vec![700; 2], vec![5000; 2], vec![20000]].concat();
        let ex: Vec<usize> = [vec![11; 197], vec![501; 5], vec![1001; 3]].concat();
        let f = extended_features(&sets([&ma, &he, &[1, 2], &ex]), &SizeThresholds::default()).unwrap();
        assert_eq!(f.values(), &[37, 0, 0, 26, 2, 2, 0, 0, 0, 197, 5, 3]);
        assert_eq!(f.class_total(LesionClass::He), 30);
        assert_eq!(f.bucket_count(LesionClass::Ex, SizeBucket::Medium), Some(5));
    }

    #[test]
    fn class_coverage_errors() {
        let mut s = sets([&[], &[], &[], &[]]);
        s.pop();
        assert!(matches!(simple_features(&s), Err(FeatureError::MissingClass(LesionClass::Ex))));
        s.push(RegionSet::new(LesionClass::Ma, vec![]));
        assert!(matches!(
            extended_features(&s, &SizeThresholds::default()),
            Err(FeatureError::DuplicateClass(LesionClass::Ma))
        ));
    }

    #[test]
    fn class_order_does_not_matter() {
        let mut s = sets([&[20], &[30, 40], &[], &[700]]);
        s.reverse();
        assert_eq!(simple_features(&s).unwrap().values(), &[1, 2, 0, 1]);
    }

    #[test]
    fn vector_length_checked() {
        assert!(FeatureVector::new(FeatureMode::Simple, vec![0; 12]).is_err());
        assert!(FeatureVector::new(FeatureMode::Extended, vec![0; 12]).is_ok());
    }
}
