//! Synthetic lesion-mask datasets with known region counts and rule labels.
//!
//! Every planted region is a filled rectangle or a disc of an exact pixel
//! size, and regions of one mask are kept at least two pixels apart, so
//! labeling a generated mask recovers exactly the planted regions.
//!
//! Labels come from a fixed rule over per-class, per-bucket counts. The DR
//! rule follows the usual severity scale where the four lesion classes can
//! express it. Two proxies are not clinical: three or more large hemorrhages
//! stand in for proliferative DR, and medium or large hard exudates stand in
//! for macular involvement.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::LabeledImage;
use crate::grader::GradePair;
use crate::mask_io::{self, LesionClass, LesionMask, ManifestError, ManifestRecord, MaskError, MaskPaths};
use crate::regions::extract_regions;
use crate::symbolic::{FeatureMode, FeatureVector, SizeBucket, SizeThresholds};
use crate::table::{self, TableError, TableReader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// Uses class totals only; a function of the unfiltered counts.
    CountOnly,
    /// Uses size buckets; not recoverable from plain counts.
    SizeAware,
}

impl LabelRule {
    pub fn name(self) -> &'static str {
        match self {
            LabelRule::CountOnly => "count-only",
            LabelRule::SizeAware => "size-aware",
        }
    }
}

impl fmt::Display for LabelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelRule {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count-only" => Ok(LabelRule::CountOnly),
            "size-aware" => Ok(LabelRule::SizeAware),
            other => Err(SynthError::Spec(format!("unknown label rule `{other}` (count-only or size-aware)"))),
        }
    }
}

/// Region counts indexed by `[class position][bucket position]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BucketCounts(pub [[u64; 3]; 4]);

impl BucketCounts {
    pub fn get(&self, class: LesionClass, bucket: SizeBucket) -> u64 {
        self.0[class.position()][bucket.position()]
    }

    pub fn set(&mut self, class: LesionClass, bucket: SizeBucket, count: u64) {
        self.0[class.position()][bucket.position()] = count;
    }

    pub fn class_total(&self, class: LesionClass) -> u64 {
        self.0[class.position()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    /// The Extended feature vector with these counts.
    pub fn to_features(&self) -> FeatureVector {
        FeatureVector::new(FeatureMode::Extended, self.0.iter().flatten().copied().collect()).expect("twelve entries")
    }

    pub fn from_features(features: &FeatureVector) -> Option<Self> {
        if features.mode() != FeatureMode::Extended {
            return None;
        }
        let mut counts = Self::default();
        for (slot, &v) in counts.0.iter_mut().flatten().zip(features.values()) {
            *slot = v;
        }
        Some(counts)
    }
}

/// Grades for a count table under `rule`.
pub fn label_rule(rule: LabelRule, counts: &BucketCounts) -> GradePair {
    use LesionClass::*;
    let he = counts.class_total(He);
    let ex = counts.class_total(Ex);
    let dr = if counts.total() == 0 {
        0
    } else if he == 0 && ex == 0 && counts.class_total(Se) == 0 {
        1
    } else {
        match rule {
            LabelRule::SizeAware if counts.get(He, SizeBucket::Large) >= 3 => 4,
            LabelRule::CountOnly if he > 40 => 4,
            _ if he > 20 => 3,
            _ => 2,
        }
    };
    let dme = match rule {
        _ if ex == 0 => 0,
        LabelRule::SizeAware => {
            if counts.get(Ex, SizeBucket::Medium) + counts.get(Ex, SizeBucket::Large) > 0 {
                2
            } else {
                1
            }
        }
        LabelRule::CountOnly => {
            if ex <= 15 {
                1
            } else {
                2
            }
        }
    };
    GradePair::new(dr, dme).expect("rule grades are in range")
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub min: u64,
    pub max: u64,
}

impl Span {
    pub const fn new(min: u64, max: u64) -> Self {
        Self { min, max }
    }

    fn sample(self, rng: &mut impl Rng) -> u64 {
        rng.random_range(self.min..=self.max)
    }
}

/// How many regions of each class and bucket an image gets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountModel {
    /// Draws a DR profile (healthy, mild, moderate, severe, proliferative) and
    /// an exudate profile (none, small only, with medium or large) uniformly,
    /// then counts uniformly within the profile's ranges.
    Profiles,
    /// Every image gets the same counts.
    Fixed(BucketCounts),
    /// Each count drawn independently from its span, `[class][bucket]`.
    Uniform([[Span; 3]; 4]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub label_rule: LabelRule,
    pub counts: CountModel,
    /// Thresholds the planted sizes are bucketed under.
    pub thresholds: SizeThresholds,
    /// Planted region sizes for the small, medium and large buckets.
    pub sizes: [Span; 3],
    /// Sizes of noise specks, which fall at or below the lowest threshold.
    pub speck_sizes: Span,
    pub specks_per_class: Span,
    /// Placement attempts per region before giving up.
    pub max_attempts: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_images: 100,
            width: 1024,
            height: 1024,
            seed: 0,
            label_rule: LabelRule::SizeAware,
            counts: CountModel::Profiles,
            thresholds: SizeThresholds::default(),
            sizes: [Span::new(11, 200), Span::new(501, 1000), Span::new(1001, 5000)],
            speck_sizes: Span::new(1, 10),
            specks_per_class: Span::new(0, 3),
            max_attempts: 1000,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Spec(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("canvas {}x{} is empty", self.width, self.height));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        let spans = self.sizes.iter().chain([&self.speck_sizes, &self.specks_per_class]);
        if let Some(s) = spans.clone().find(|s| s.min > s.max) {
            return bad(format!("span {}..={} is empty", s.min, s.max));
        }
        for (bucket, span) in SizeBucket::ALL.into_iter().zip(&self.sizes) {
            for size in [span.min, span.max] {
                if self.thresholds.classify(size) != Some(bucket) {
                    return bad(format!(
                        "{} size {size} is outside the {} bucket under thresholds {}",
                        bucket.word(),
                        bucket.word(),
                        self.thresholds
                    ));
                }
            }
        }
        let tau0 = self.thresholds.values()[0];
        if self.speck_sizes.min == 0 || self.speck_sizes.max > tau0 {
            return bad(format!("speck sizes must lie in 1..={tau0}"));
        }
        if let CountModel::Uniform(spans) = &self.counts {
            if let Some(s) = spans.iter().flatten().find(|s| s.min > s.max) {
                return bad(format!("count span {}..={} is empty", s.min, s.max));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error(
        "{image_id}: could not place a {size}-pixel {class} region on a {width}x{height} canvas after {attempts} attempts; \
         use a larger canvas or fewer regions"
    )]
    Packing { image_id: String, class: LesionClass, size: u64, width: usize, height: usize, attempts: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// One generated image.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image_id: String,
    /// Masks in class order.
    pub masks: Vec<LesionMask>,
    /// Bucketed counts; specks are excluded.
    pub counts: BucketCounts,
    /// Sizes of every planted region per class, specks included, sorted.
    pub planted_sizes: [Vec<u64>; 4],
    pub grades: GradePair,
}

pub fn image_id(index: usize) -> String {
    format!("img_{index:04}")
}

/// Generates images of one spec. Each image draws from its own stream of a
/// generator seeded with the spec's seed, so image `i` does not depend on how
/// many images come before it.
pub struct Synthesizer {
    spec: SynthSpec,
    /// Offsets ordered by distance from the origin; a prefix of any length is
    /// a connected disc.
    disc: Vec<(i64, i64)>,
}

impl Synthesizer {
    pub fn new(spec: SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let largest = spec.sizes[2].max.max(spec.speck_sizes.max);
        let radius = ((largest as f64 / std::f64::consts::PI).sqrt().ceil() as i64) + 2;
        let mut disc: Vec<(i64, i64)> =
            (-radius..=radius).flat_map(|r| (-radius..=radius).map(move |c| (r, c))).collect();
        disc.retain(|&(r, c)| r * r + c * c <= radius * radius);
        disc.sort_by_key(|&(r, c)| (r * r + c * c, r, c));
        assert!(disc.len() as u64 >= largest);
        Ok(Self { spec, disc })
    }

    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn image(&self, index: usize) -> Result<SynthImage, SynthError> {
        let spec = &self.spec;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(index as u64);
        let image_id = image_id(index);

        let counts = draw_counts(&spec.counts, &mut rng);
        let grades = label_rule(spec.label_rule, &counts);
        let mut masks = Vec::with_capacity(4);
        let mut planted_sizes: [Vec<u64>; 4] = Default::default();
        for class in LesionClass::ALL {
            let mut sizes = Vec::new();
            for bucket in SizeBucket::ALL {
                for _ in 0..counts.get(class, bucket) {
                    sizes.push(spec.sizes[bucket.position()].sample(&mut rng));
                }
            }
            for _ in 0..spec.specks_per_class.sample(&mut rng) {
                sizes.push(spec.speck_sizes.sample(&mut rng));
            }
            // Largest first packs better.
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            masks.push(self.plant(&image_id, class, &sizes, &mut rng)?);
            sizes.reverse();
            planted_sizes[class.position()] = sizes;
        }
        Ok(SynthImage { image_id, masks, counts, planted_sizes, grades })
    }

    fn plant(
        &self,
        image_id: &str,
        class: LesionClass,
        sizes: &[u64],
        rng: &mut ChaCha8Rng,
    ) -> Result<LesionMask, SynthError> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut pixels = vec![false; w * h];
        let mut reserved = vec![false; w * h];
        for &size in sizes {
            let mut placed = false;
            for _ in 0..self.spec.max_attempts {
                let (shape, rows, cols) = self.shape(size, rng);
                if rows > h || cols > w {
                    continue;
                }
                let r0 = rng.random_range(0..=h - rows);
                let c0 = rng.random_range(0..=w - cols);
                // The candidate's box grown by one must not touch any earlier box.
                let (ra, rb) = (r0.saturating_sub(1), (r0 + rows + 1).min(h));
                let (ca, cb) = (c0.saturating_sub(1), (c0 + cols + 1).min(w));
                if (ra..rb).any(|r| reserved[r * w + ca..r * w + cb].iter().any(|&x| x)) {
                    continue;
                }
                for r in r0..r0 + rows {
                    reserved[r * w + c0..r * w + c0 + cols].fill(true);
                }
                for (dr, dc) in shape {
                    pixels[(r0 + dr) * w + c0 + dc] = true;
                }
                placed = true;
                break;
            }
            if !placed {
                return Err(SynthError::Packing {
                    image_id: image_id.to_owned(),
                    class,
                    size,
                    width: w,
                    height: h,
                    attempts: self.spec.max_attempts,
                });
            }
        }
        Ok(LesionMask::new(w, h, pixels, class).expect("pixel buffer matches canvas"))
    }

    /// Pixel offsets of a random shape with exactly `size` pixels, and its
    /// bounding box height and width.
    fn shape(&self, size: u64, rng: &mut ChaCha8Rng) -> (Vec<(usize, usize)>, usize, usize) {
        let size = size as usize;
        if rng.random_bool(0.5) {
            // Rectangle, the last row possibly partial and left-aligned.
            let side = (size as f64).sqrt();
            let lo = ((side / 2.0).ceil() as usize).max(1);
            let hi = ((side * 2.0).floor() as usize).clamp(lo, size);
            let cols = rng.random_range(lo..=hi);
            let rows = size.div_ceil(cols);
            let offsets = (0..size).map(|k| (k / cols, k % cols)).collect();
            (offsets, rows, cols)
        } else {
            let pts = &self.disc[..size];
            let r_min = pts.iter().map(|p| p.0).min().unwrap();
            let c_min = pts.iter().map(|p| p.1).min().unwrap();
            let rows = (pts.iter().map(|p| p.0).max().unwrap() - r_min + 1) as usize;
            let cols = (pts.iter().map(|p| p.1).max().unwrap() - c_min + 1) as usize;
            let offsets = pts.iter().map(|&(r, c)| ((r - r_min) as usize, (c - c_min) as usize)).collect();
            (offsets, rows, cols)
        }
    }
}

fn span_counts(spans: [[(u64, u64); 3]; 4], rng: &mut ChaCha8Rng) -> BucketCounts {
    let mut counts = BucketCounts::default();
    for (row, spans) in counts.0.iter_mut().zip(spans) {
        for (slot, (lo, hi)) in row.iter_mut().zip(spans) {
            *slot = rng.random_range(lo..=hi);
        }
    }
    counts
}

fn draw_counts(model: &CountModel, rng: &mut ChaCha8Rng) -> BucketCounts {
    const Z: (u64, u64) = (0, 0);
    match model {
        CountModel::Fixed(counts) => *counts,
        CountModel::Uniform(spans) => span_counts(spans.map(|row| row.map(|s| (s.min, s.max))), rng),
        CountModel::Profiles => {
            let dr_profile = rng.random_range(0..5u8);
            // Healthy and mild images cannot carry exudates.
            let ex_profile = if dr_profile <= 1 { 0 } else { rng.random_range(0..3u8) };
            let ex = match ex_profile {
                0 => [Z, Z, Z],
                1 => [(1, 20), Z, Z],
                _ => [(0, 20), (1, 3), (0, 2)],
            };
            // Rows: MA, HE, SE, EX; columns: small, medium, large.
            let spans = match dr_profile {
                0 => [[Z; 3]; 4],
                1 => [[(1, 20), (0, 2), Z], [Z; 3], [Z; 3], [Z; 3]],
                2 => [[(0, 20), (0, 2), Z], [(1, 10), (0, 2), (0, 1)], [(0, 4), (0, 2), Z], ex],
                3 => [[(5, 30), (0, 3), Z], [(30, 60), (0, 3), (0, 1)], [(0, 6), (0, 3), (0, 1)], ex],
                _ => [[(5, 30), (0, 3), Z], [(0, 40), (0, 3), (3, 6)], [(0, 6), (0, 3), (0, 1)], ex],
            };
            span_counts(spans, rng)
        }
    }
}

impl SynthImage {
    /// Labels each mask's regions.
    pub fn labeled(&self) -> LabeledImage {
        LabeledImage {
            image_id: self.image_id.clone(),
            region_sets: self.masks.iter().map(extract_regions).collect(),
            grades: self.grades,
        }
    }
}

/// Generates the whole dataset in memory, keeping only region sets.
pub fn labeled_images(spec: &SynthSpec) -> Result<Vec<LabeledImage>, SynthError> {
    let synth = Synthesizer::new(spec.clone())?;
    (0..spec.n_images).map(|i| Ok(synth.image(i)?.labeled())).collect()
}

pub fn mask_file_name(image_id: &str, class: LesionClass) -> String {
    format!("{image_id}_{class}.pgm")
}

/// Writes `masks/<image_id>_<CLASS>.pgm`, `manifest.csv` and
/// `ground_truth.csv` under `out_dir` and returns the manifest path.
pub fn generate(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<PathBuf, SynthError> {
    let out_dir = out_dir.as_ref();
    let synth = Synthesizer::new(spec.clone())?;
    let mask_dir = out_dir.join("masks");
    fs::create_dir_all(&mask_dir).map_err(|source| SynthError::Io { path: mask_dir.clone(), source })?;

    let mut records = Vec::with_capacity(spec.n_images);
    let mut truth = Vec::with_capacity(spec.n_images);
    for i in 0..spec.n_images {
        let image = synth.image(i)?;
        let mut rel = Vec::with_capacity(4);
        for mask in &image.masks {
            let name = mask_file_name(&image.image_id, mask.lesion_class());
            mask_io::save_mask(mask, mask_dir.join(&name))?;
            rel.push(Path::new("masks").join(name));
        }
        let [ma, he, se, ex]: [PathBuf; 4] = rel.try_into().expect("four masks");
        records.push(ManifestRecord {
            image_id: image.image_id.clone(),
            mask_paths: MaskPaths::new(ma, he, se, ex),
            grades: Some(image.grades),
        });
        truth.push(GroundTruthRow { image_id: image.image_id, counts: image.counts, grades: image.grades });
    }
    let manifest = out_dir.join("manifest.csv");
    mask_io::write_manifest(&manifest, &records)?;
    write_ground_truth(out_dir.join("ground_truth.csv"), &truth)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRow {
    pub image_id: String,
    pub counts: BucketCounts,
    pub grades: GradePair,
}

fn ground_truth_header() -> Vec<String> {
    let mut header = vec!["image_id".to_owned()];
    for class in LesionClass::ALL {
        for bucket in SizeBucket::ALL {
            header.push(format!("{}_{}", class.name().to_lowercase(), bucket.word()));
        }
    }
    header.extend(["dr_grade".to_owned(), "dme_grade".to_owned()]);
    header
}

pub fn write_ground_truth(path: impl AsRef<Path>, rows: &[GroundTruthRow]) -> Result<(), TableError> {
    let path = path.as_ref();
    let mut w = table::writer(path)?;
    table::write_row(&mut w, path, ground_truth_header())?;
    for row in rows {
        let mut cells = vec![row.image_id.clone()];
        cells.extend(row.counts.0.iter().flatten().map(u64::to_string));
        cells.extend([row.grades.dr().to_string(), row.grades.dme().to_string()]);
        table::write_row(&mut w, path, cells)?;
    }
    table::finish(w, path)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRow>, TableError> {
    let mut reader = TableReader::open(path.as_ref())?;
    let header = ground_truth_header();
    if reader.headers != header {
        return Err(reader.header_error(header.join(",")));
    }
    let mut out = Vec::new();
    for row in reader.rows()? {
        let mut values = [0u64; 14];
        for (k, slot) in values.iter_mut().enumerate() {
            let v = row.record.get(k + 1).unwrap_or("").trim();
            *slot =
                v.parse().map_err(|_| reader.value_error(&row, &header[k + 1], v, "expected a nonnegative integer"))?;
        }
        let mut counts = BucketCounts::default();
        for (slot, &v) in counts.0.iter_mut().flatten().zip(&values[..12]) {
            *slot = v;
        }
        let grades = u8::try_from(values[12])
            .ok()
            .zip(u8::try_from(values[13]).ok())
            .and_then(|(dr, dme)| GradePair::new(dr, dme).ok())
            .ok_or_else(|| {
                reader.value_error(&row, "grades", &format!("{},{}", values[12], values[13]), "grade out of range")
            })?;
        out.push(GroundTruthRow { image_id: row.record.get(0).unwrap_or("").to_owned(), counts, grades });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use LesionClass::*;
    use SizeBucket::*;

    fn counts(entries: &[(LesionClass, SizeBucket, u64)]) -> BucketCounts {
        let mut c = BucketCounts::default();
        for &(class, bucket, n) in entries {
            c.set(class, bucket, n);
        }
        c
    }

    fn g(dr: u8, dme: u8) -> GradePair {
        GradePair::new(dr, dme).unwrap()
    }

    #[test]
    fn rule_examples() {
        let rule = |c: &BucketCounts| label_rule(LabelRule::SizeAware, c);
        assert_eq!(rule(&BucketCounts::default()), g(0, 0));
        assert_eq!(rule(&counts(&[(Ma, Small, 5)])), g(1, 0));
        assert_eq!(rule(&counts(&[(Ma, Small, 4), (He, Small, 19), (He, Medium, 2), (Se, Small, 1)])), g(3, 0));
        assert_eq!(rule(&counts(&[(He, Small, 20)])), g(2, 0));
        assert_eq!(rule(&counts(&[(He, Large, 3), (He, Small, 30)])), g(4, 0));
        assert_eq!(rule(&counts(&[(Se, Small, 1)])), g(2, 0));
        assert_eq!(rule(&counts(&[(Ex, Small, 50)])), g(2, 1));
        assert_eq!(rule(&counts(&[(Ex, Small, 1), (Ex, Medium, 1)])), g(2, 2));
    }

    #[test]
    fn count_only_rule() {
        let rule = |c: &BucketCounts| label_rule(LabelRule::CountOnly, c);
        assert_eq!(rule(&counts(&[(He, Large, 3)])), g(2, 0));
        assert_eq!(rule(&counts(&[(He, Small, 41)])), g(4, 0));
        assert_eq!(rule(&counts(&[(He, Small, 21)])), g(3, 0));
        assert_eq!(rule(&counts(&[(Ex, Medium, 15)])), g(2, 1));
        assert_eq!(rule(&counts(&[(Ex, Small, 16)])), g(2, 2));
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::default().validate().is_ok());
        let mut spec = SynthSpec::default();
        spec.sizes[0] = Span::new(5, 200);
        assert!(spec.validate().is_err());
        let spec = SynthSpec { speck_sizes: Span::new(1, 11), ..Default::default() };
        assert!(spec.validate().is_err());
        let spec = SynthSpec { width: 0, ..Default::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn planted_regions_are_recovered() {
        let spec = SynthSpec { n_images: 6, width: 256, height: 256, seed: 3, ..Default::default() };
        let synth = Synthesizer::new(spec).unwrap();
        for i in 0..6 {
            let image = synth.image(i).unwrap();
            for (mask, planted) in image.masks.iter().zip(&image.planted_sizes) {
                let mut found: Vec<u64> = extract_regions(mask).sizes().map(|s| s as u64).collect();
                found.sort_unstable();
                assert_eq!(&found, planted, "{} {}", image.image_id, mask.lesion_class());
            }
        }
    }

    #[test]
    fn images_are_independent_of_dataset_size() {
        let small = Synthesizer::new(SynthSpec { n_images: 2, width: 200, height: 200, ..Default::default() }).unwrap();
        let big = Synthesizer::new(SynthSpec { n_images: 50, width: 200, height: 200, ..Default::default() }).unwrap();
        let (a, b) = (small.image(1).unwrap(), big.image(1).unwrap());
        assert_eq!(a.masks, b.masks);
        assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn impossible_packing_is_reported() {
        let spec = SynthSpec {
            width: 40,
            height: 40,
            counts: CountModel::Fixed(counts(&[(He, Large, 2)])),
            max_attempts: 50,
            ..Default::default()
        };
        let err = Synthesizer::new(spec).unwrap().image(0).unwrap_err();
        assert!(matches!(err, SynthError::Packing { class: He, .. }), "{err}");
    }

    #[test]
    fn shapes_have_exact_size() {
        let synth = Synthesizer::new(SynthSpec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for size in [1u64, 2, 3, 7, 11, 200, 501, 4999] {
            for _ in 0..10 {
                let (offsets, rows, cols) = synth.shape(size, &mut rng);
                assert_eq!(offsets.len() as u64, size);
                assert!(offsets.iter().all(|&(r, c)| r < rows && c < cols));
                let mut dedup = offsets.clone();
                dedup.sort_unstable();
                dedup.dedup();
                assert_eq!(dedup.len(), offsets.len());
            }
        }
    }
}
