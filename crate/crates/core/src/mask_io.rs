//! Binary lesion masks stored as PGM rasters, and the CSV manifest binding
//! four masks and an optional grade pair to each image.
//!
//! Both PGM variants are read: P2 (ASCII samples) and P5 (one byte per
//! sample). Any sample value above 127 is lesion foreground. Masks are
//! written as P5 with maxval 255, foreground stored as 255.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grader::GradePair;

/// Sample values strictly above this are foreground.
pub const FOREGROUND_THRESHOLD: u8 = 127;

/// One of the four segmented lesion types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LesionClass {
    /// Microaneurysm.
    #[serde(rename = "MA")]
    Ma,
    /// Hemorrhage.
    #[serde(rename = "HE")]
    He,
    /// Soft exudate.
    #[serde(rename = "SE")]
    Se,
    /// Hard exudate.
    #[serde(rename = "EX")]
    Ex,
}

impl LesionClass {
    /// All classes in feature-vector order.
    pub const ALL: [LesionClass; 4] = [LesionClass::Ma, LesionClass::He, LesionClass::Se, LesionClass::Ex];

    /// 1-based class index: 1=MA, 2=HE, 3=SE, 4=EX.
    pub fn index(self) -> u8 {
        self.position() as u8 + 1
    }

    /// 0-based position in feature vectors.
    pub fn position(self) -> usize {
        match self {
            LesionClass::Ma => 0,
            LesionClass::He => 1,
            LesionClass::Se => 2,
            LesionClass::Ex => 3,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1..=4 => Some(Self::ALL[index as usize - 1]),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LesionClass::Ma => "MA",
            LesionClass::He => "HE",
            LesionClass::Se => "SE",
            LesionClass::Ex => "EX",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for LesionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Binary raster of one lesion class for one image. Pixels are row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LesionMask {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
    lesion_class: LesionClass,
}

impl LesionMask {
    pub fn new(width: usize, height: usize, pixels: Vec<bool>, lesion_class: LesionClass) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::Shape(format!("mask dimensions {width}x{height} contain a zero")));
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(MaskError::Shape(format!("{} pixels supplied for a {width}x{height} mask", pixels.len())));
        }
        Ok(Self { width, height, pixels, lesion_class })
    }

    /// All-background mask.
    pub fn empty(width: usize, height: usize, lesion_class: LesionClass) -> Result<Self, MaskError> {
        Self::new(width, height, vec![false; width.saturating_mul(height)], lesion_class)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        lesion_class: LesionClass,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, MaskError> {
        let mut pixels = Vec::with_capacity(width.saturating_mul(height));
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(row, col));
            }
        }
        Self::new(width, height, pixels, lesion_class)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn lesion_class(&self) -> LesionClass {
        self.lesion_class
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }
}

/// PGM sample encoding used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    /// P2, whitespace-separated decimal samples.
    Ascii,
    /// P5, one byte per sample.
    Binary,
}

#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed PGM header at byte {offset}: {reason}")]
    MalformedHeader { path: PathBuf, offset: usize, reason: String },
    #[error("{path}: maxval {maxval} at byte {offset} exceeds 255")]
    MaxvalTooLarge { path: PathBuf, offset: usize, maxval: u64 },
    #[error("{path}: zero {dimension} at byte {offset}")]
    ZeroDimension { path: PathBuf, offset: usize, dimension: &'static str },
    #[error("{path}: truncated pixel data at byte {offset}: expected {expected} samples, found {found}")]
    TruncatedPayload { path: PathBuf, offset: usize, expected: usize, found: usize },
    #[error("{path}: invalid sample at byte {offset}: {reason}")]
    InvalidSample { path: PathBuf, offset: usize, reason: String },
    #[error("invalid mask: {0}")]
    Shape(String),
}

/// Reads a P2 or P5 file and binarizes it at value > 127.
pub fn load_mask(path: impl AsRef<Path>, lesion_class: LesionClass) -> Result<LesionMask, MaskError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| MaskError::Io { path: path.to_owned(), source })?;
    decode_mask(&bytes, lesion_class, path)
}

/// Decodes PGM bytes. `source` is only used to label diagnostics.
pub fn decode_mask(bytes: &[u8], lesion_class: LesionClass, source: &Path) -> Result<LesionMask, MaskError> {
    let mut parser = PgmParser { bytes, pos: 0, path: source };
    let header = parser.header()?;
    let samples = match header.encoding {
        PgmEncoding::Binary => parser.binary_payload(&header)?,
        PgmEncoding::Ascii => parser.ascii_payload(&header)?,
    };
    let pixels = samples.into_iter().map(|v| v > FOREGROUND_THRESHOLD).collect();
    LesionMask::new(header.width, header.height, pixels, lesion_class)
}

/// Writes `mask` as P5.
pub fn save_mask(mask: &LesionMask, path: impl AsRef<Path>) -> Result<(), MaskError> {
    save_mask_as(mask, path, PgmEncoding::Binary)
}

pub fn save_mask_as(mask: &LesionMask, path: impl AsRef<Path>, encoding: PgmEncoding) -> Result<(), MaskError> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask, encoding)).map_err(|source| MaskError::Io { path: path.to_owned(), source })
}

/// Serializes with maxval 255; foreground is 255, background 0.
pub fn encode_mask(mask: &LesionMask, encoding: PgmEncoding) -> Vec<u8> {
    let sample = |p: bool| if p { 255u8 } else { 0u8 };
    let mut out = Vec::with_capacity(mask.pixels.len() + 32);
    match encoding {
        PgmEncoding::Binary => {
            write!(out, "P5\n{} {}\n255\n", mask.width, mask.height).unwrap();
            out.extend(mask.pixels.iter().map(|&p| sample(p)));
        }
        PgmEncoding::Ascii => {
            write!(out, "P2\n{} {}\n255\n", mask.width, mask.height).unwrap();
            for row in mask.pixels.chunks(mask.width) {
                let line: Vec<String> = row.iter().map(|&p| sample(p).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

struct PgmHeader {
    encoding: PgmEncoding,
    width: usize,
    height: usize,
    maxval: u64,
}

struct PgmParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> PgmParser<'a> {
    fn malformed(&self, offset: usize, reason: impl Into<String>) -> MaskError {
        MaskError::MalformedHeader { path: self.path.to_owned(), offset, reason: reason.into() }
    }

    fn header(&mut self) -> Result<PgmHeader, MaskError> {
        let encoding = match self.bytes.get(..2) {
            Some(b"P2") => PgmEncoding::Ascii,
            Some(b"P5") => PgmEncoding::Binary,
            _ => return Err(self.malformed(0, "expected magic number P2 or P5")),
        };
        self.pos = 2;
        if !self.bytes.get(2).is_some_and(u8::is_ascii_whitespace) {
            return Err(self.malformed(2, "expected whitespace after magic number"));
        }

        let (width, width_at) = self.header_number("width")?;
        let (height, height_at) = self.header_number("height")?;
        let (maxval, maxval_at) = self.header_number("maxval")?;
        if width == 0 {
            return Err(MaskError::ZeroDimension { path: self.path.to_owned(), offset: width_at, dimension: "width" });
        }
        if height == 0 {
            return Err(MaskError::ZeroDimension {
                path: self.path.to_owned(),
                offset: height_at,
                dimension: "height",
            });
        }
        if maxval > 255 {
            return Err(MaskError::MaxvalTooLarge { path: self.path.to_owned(), offset: maxval_at, maxval });
        }
        if maxval == 0 {
            return Err(self.malformed(maxval_at, "maxval must be at least 1"));
        }
        let width = usize::try_from(width).map_err(|_| self.malformed(width_at, "width too large"))?;
        let height = usize::try_from(height).map_err(|_| self.malformed(height_at, "height too large"))?;
        if width.checked_mul(height).is_none() {
            return Err(self.malformed(width_at, "pixel count overflows"));
        }

        // Exactly one whitespace byte separates maxval from the payload.
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => self.pos += 1,
            Some(_) => return Err(self.malformed(self.pos, "expected whitespace after maxval")),
            None => return Err(self.malformed(self.pos, "unexpected end of file after maxval")),
        }
        Ok(PgmHeader { encoding, width, height, maxval })
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Reads one decimal token, returning its value and starting offset.
    fn header_number(&mut self, what: &str) -> Result<(u64, usize), MaskError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let digits = self.take_digits();
        if digits.is_empty() {
            return Err(match self.bytes.get(start) {
                None => self.malformed(start, format!("unexpected end of file, expected {what}")),
                Some(_) => self.malformed(start, format!("expected decimal {what}")),
            });
        }
        let value = parse_decimal(digits).ok_or_else(|| self.malformed(start, format!("{what} out of range")))?;
        Ok((value, start))
    }

    fn take_digits(&mut self) -> &'a [u8] {
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        &self.bytes[start..self.pos]
    }

    fn binary_payload(&mut self, header: &PgmHeader) -> Result<Vec<u8>, MaskError> {
        let expected = header.width * header.height;
        let available = self.bytes.len() - self.pos;
        if available < expected {
            return Err(MaskError::TruncatedPayload {
                path: self.path.to_owned(),
                offset: self.bytes.len(),
                expected,
                found: available,
            });
        }
        let payload = &self.bytes[self.pos..self.pos + expected];
        if let Some(i) = payload.iter().position(|&v| u64::from(v) > header.maxval) {
            return Err(MaskError::InvalidSample {
                path: self.path.to_owned(),
                offset: self.pos + i,
                reason: format!("value {} exceeds maxval {}", payload[i], header.maxval),
            });
        }
        Ok(payload.to_vec())
    }

    fn ascii_payload(&mut self, header: &PgmHeader) -> Result<Vec<u8>, MaskError> {
        let expected = header.width * header.height;
        let mut samples = Vec::with_capacity(expected);
        while samples.len() < expected {
            self.skip_whitespace_and_comments();
            let start = self.pos;
            if start >= self.bytes.len() {
                return Err(MaskError::TruncatedPayload {
                    path: self.path.to_owned(),
                    offset: start,
                    expected,
                    found: samples.len(),
                });
            }
            let digits = self.take_digits();
            let invalid =
                |reason: String| MaskError::InvalidSample { path: self.path.to_owned(), offset: start, reason };
            if digits.is_empty() {
                return Err(invalid("expected decimal sample".into()));
            }
            let value = parse_decimal(digits)
                .filter(|&v| v <= header.maxval)
                .ok_or_else(|| invalid(format!("sample exceeds maxval {}", header.maxval)))?;
            samples.push(value as u8);
        }
        Ok(samples)
    }
}

fn parse_decimal(digits: &[u8]) -> Option<u64> {
    digits.iter().try_fold(0u64, |acc, &d| acc.checked_mul(10)?.checked_add(u64::from(d - b'0')))
}

/// Paths to the four masks of one image, indexed by lesion class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPaths([PathBuf; 4]);

impl MaskPaths {
    pub fn new(ma: PathBuf, he: PathBuf, se: PathBuf, ex: PathBuf) -> Self {
        Self([ma, he, se, ex])
    }

    pub fn get(&self, class: LesionClass) -> &Path {
        &self.0[class.position()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (LesionClass, &Path)> {
        LesionClass::ALL.into_iter().zip(self.0.iter().map(PathBuf::as_path))
    }
}

/// One manifest row: an image, its four masks, and its grades when labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub image_id: String,
    pub mask_paths: MaskPaths,
    pub grades: Option<GradePair>,
}

impl ManifestRecord {
    /// Loads all four masks in class order.
    pub fn load_masks(&self) -> Result<Vec<LesionMask>, MaskError> {
        self.mask_paths.iter().map(|(class, path)| load_mask(path, class)).collect()
    }
}

pub const MANIFEST_COLUMNS: [&str; 7] =
    ["image_id", "ma_mask", "he_mask", "se_mask", "ex_mask", "dr_grade", "dme_grade"];

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}, line {line}: {column} value `{value}` is not a grade in 0..={max}")]
    GradeOutOfRange { path: PathBuf, line: u64, column: &'static str, value: String, max: u8 },
    #[error("{path}, line {line}: dr_grade and dme_grade must both be present or both be empty")]
    PartialGrades { path: PathBuf, line: u64 },
    #[error("{path}, line {line}: duplicate image_id `{image_id}`")]
    DuplicateImageId { path: PathBuf, line: u64, image_id: String },
    #[error("{path}, line {line}: empty {column}")]
    EmptyField { path: PathBuf, line: u64, column: &'static str },
}

/// Reads a manifest CSV. Relative mask paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, ManifestError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| ManifestError::Io { path: path.to_owned(), source })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let csv_err = |source| ManifestError::Csv { path: path.to_owned(), source };

    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut columns = [0usize; 7];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ManifestError::MissingColumn { path: path.to_owned(), column: name })?;
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(columns[i]).unwrap_or("");

        let image_id = field(0).to_owned();
        if image_id.is_empty() {
            return Err(ManifestError::EmptyField { path: path.to_owned(), line, column: "image_id" });
        }
        let mut masks = Vec::with_capacity(4);
        for (i, &column) in MANIFEST_COLUMNS.iter().enumerate().skip(1).take(4) {
            let cell = field(i);
            if cell.is_empty() {
                return Err(ManifestError::EmptyField { path: path.to_owned(), line, column });
            }
            masks.push(base.join(cell));
        }
        let grade = |i: usize, max: u8| -> Result<Option<u8>, ManifestError> {
            let cell = field(i).trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<u8>().ok().filter(|&g| g <= max).map(Some).ok_or_else(|| ManifestError::GradeOutOfRange {
                path: path.to_owned(),
                line,
                column: MANIFEST_COLUMNS[i],
                value: cell.to_owned(),
                max,
            })
        };
        let grades = match (grade(5, 4)?, grade(6, 2)?) {
            (Some(dr), Some(dme)) => Some(GradePair::new(dr, dme).expect("ranges checked above")),
            (None, None) => None,
            _ => return Err(ManifestError::PartialGrades { path: path.to_owned(), line }),
        };
        if !seen.insert(image_id.clone()) {
            return Err(ManifestError::DuplicateImageId { path: path.to_owned(), line, image_id });
        }
        let [ma, he, se, ex]: [PathBuf; 4] = masks.try_into().expect("four mask columns");
        records.push(ManifestRecord { image_id, mask_paths: MaskPaths::new(ma, he, se, ex), grades });
    }
    Ok(records)
}

/// Writes a manifest CSV with LF line endings. Mask paths are written as given.
pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let csv_err = |source| ManifestError::Csv { path: path.to_owned(), source };
    let mut writer =
        csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    writer.write_record(MANIFEST_COLUMNS).map_err(csv_err)?;
    for record in records {
        let mut row = vec![record.image_id.clone()];
        row.extend(record.mask_paths.iter().map(|(_, p)| p.to_string_lossy().into_owned()));
        match record.grades {
            Some(g) => {
                row.push(g.dr().to_string());
                row.push(g.dme().to_string());
            }
            None => row.extend([String::new(), String::new()]),
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| ManifestError::Io { path: path.to_owned(), source })
}
