//! English explanations built from a feature vector and a predicted grade.
//!
//! Simple vectors render as
//! `The DR diagnosis of "image 1" is "moderate NPDR" because there are 33 MA, 13 HE, 5 SE and 27 EX regions, respectively.`
//!
//! Extended vectors render as
//! `The image 1 is classified as severe NPDR because 37 small MAs, 26 small HEs, ... and 3 large EXs are detected.`
//!
//! Zero counts are left out. When every count is zero the reason reads
//! `no lesion regions are detected`. [`parse`] inverts both forms exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::grader::GradePair;
use crate::mask_io::LesionClass;
use crate::symbolic::{FeatureMode, FeatureVector, SizeBucket};

/// Canonical DR grade names, indexed by grade.
pub const GRADE_NAMES: [&str; 5] = ["no DR", "mild NPDR", "moderate NPDR", "severe NPDR", "PDR"];

const NO_LESIONS: &str = "no lesion regions are detected";
const SIMPLE_PREFIX: &str = "The DR diagnosis of \"";
const EXTENDED_PREFIX: &str = "The image ";

pub fn grade_name(dr: u8) -> &'static str {
    GRADE_NAMES[dr as usize]
}

pub fn grade_from_name(name: &str) -> Option<u8> {
    GRADE_NAMES.iter().position(|&g| g == name).map(|g| g as u8)
}

/// One "<count> [size] <lesion>" item of an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clause {
    pub count: u64,
    pub size: Option<SizeBucket>,
    pub lesion: LesionClass,
}

impl Clause {
    fn render(&self, out: &mut String) {
        match self.size {
            None => write!(out, "{} {}", self.count, self.lesion).unwrap(),
            Some(size) => {
                let plural = if self.count == 1 { "" } else { "s" };
                write!(out, "{} {} {}{plural}", self.count, size.word(), self.lesion).unwrap()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub image_id: String,
    pub grade_text: &'static str,
    pub clauses: Vec<Clause>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExplainError {
    #[error("expected {expected} features, got {found}")]
    ModeMismatch { expected: FeatureMode, found: FeatureMode },
    #[error("cannot parse explanation: {0}")]
    Parse(String),
}

fn clauses_of(features: &FeatureVector) -> Vec<Clause> {
    let values = features.values();
    match features.mode() {
        FeatureMode::Simple => LesionClass::ALL
            .into_iter()
            .filter(|c| values[c.position()] > 0)
            .map(|lesion| Clause { count: values[lesion.position()], size: None, lesion })
            .collect(),
        FeatureMode::Extended => LesionClass::ALL
            .into_iter()
            .flat_map(|lesion| SizeBucket::ALL.into_iter().map(move |size| (lesion, size)))
            .zip(values)
            .filter(|(_, count)| **count > 0)
            .map(|((lesion, size), &count)| Clause { count, size: Some(size), lesion })
            .collect(),
    }
}

/// "a", "a and b", "a, b and c".
fn join_clauses(clauses: &[Clause], out: &mut String) {
    for (i, clause) in clauses.iter().enumerate() {
        if i > 0 {
            out.push_str(if i + 1 == clauses.len() { " and " } else { ", " });
        }
        clause.render(out);
    }
}

fn check_mode(features: &FeatureVector, expected: FeatureMode) -> Result<(), ExplainError> {
    if features.mode() != expected {
        return Err(ExplainError::ModeMismatch { expected, found: features.mode() });
    }
    Ok(())
}

pub fn render_simple(image_id: &str, features: &FeatureVector, grade: GradePair) -> Result<Explanation, ExplainError> {
    check_mode(features, FeatureMode::Simple)?;
    let grade_text = grade_name(grade.dr());
    let clauses = clauses_of(features);
    let mut rendered = format!("{SIMPLE_PREFIX}{image_id}\" is \"{grade_text}\" because ");
    if clauses.is_empty() {
        rendered.push_str(NO_LESIONS);
    } else {
        rendered.push_str("there are ");
        join_clauses(&clauses, &mut rendered);
        rendered.push_str(" regions, respectively");
    }
    rendered.push('.');
    Ok(Explanation { image_id: image_id.to_owned(), grade_text, clauses, rendered })
}

pub fn render_extended(
    image_id: &str,
    features: &FeatureVector,
    grade: GradePair,
) -> Result<Explanation, ExplainError> {
    check_mode(features, FeatureMode::Extended)?;
    let grade_text = grade_name(grade.dr());
    let clauses = clauses_of(features);
    let mut rendered = format!("{EXTENDED_PREFIX}{image_id} is classified as {grade_text} because ");
    if clauses.is_empty() {
        rendered.push_str(NO_LESIONS);
    } else {
        join_clauses(&clauses, &mut rendered);
        rendered.push_str(" are detected");
    }
    rendered.push('.');
    Ok(Explanation { image_id: image_id.to_owned(), grade_text, clauses, rendered })
}

/// Renders in whichever form matches the vector's mode.
pub fn render(image_id: &str, features: &FeatureVector, grade: GradePair) -> Explanation {
    match features.mode() {
        FeatureMode::Simple => render_simple(image_id, features, grade),
        FeatureMode::Extended => render_extended(image_id, features, grade),
    }
    .expect("mode matches by construction")
}

/// What [`parse`] recovers from a rendered sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedExplanation {
    pub image_id: String,
    pub grade_text: &'static str,
    pub features: FeatureVector,
}

fn parse_error(msg: impl Into<String>) -> ExplainError {
    ExplainError::Parse(msg.into())
}

/// Splits "<grade><after>" where grade is one of [`GRADE_NAMES`].
fn split_grade<'a>(text: &'a str, after: &str) -> Result<(&'static str, &'a str), ExplainError> {
    GRADE_NAMES
        .iter()
        .find_map(|&g| text.strip_prefix(g).and_then(|rest| rest.strip_prefix(after)).map(|rest| (g, rest)))
        .ok_or_else(|| parse_error("unknown DR grade"))
}

fn split_items(list: &str) -> Vec<&str> {
    match list.rsplit_once(" and ") {
        Some((head, last)) => head.split(", ").chain([last]).collect(),
        None => vec![list],
    }
}

/// Recovers image id, grade name and feature vector from a sentence produced
/// by [`render_simple`] or [`render_extended`].
pub fn parse(rendered: &str) -> Result<ParsedExplanation, ExplainError> {
    let (image_id, grade_text, mode, reason) = if let Some(rest) = rendered.strip_prefix(SIMPLE_PREFIX) {
        let (id, rest) = rest.split_once("\" is \"").ok_or_else(|| parse_error("missing grade"))?;
        let (grade, reason) = split_grade(rest, "\" because ")?;
        (id, grade, FeatureMode::Simple, reason)
    } else if let Some(rest) = rendered.strip_prefix(EXTENDED_PREFIX) {
        let (id, rest) = rest.split_once(" is classified as ").ok_or_else(|| parse_error("missing grade"))?;
        let (grade, reason) = split_grade(rest, " because ")?;
        (id, grade, FeatureMode::Extended, reason)
    } else {
        return Err(parse_error("unrecognized sentence"));
    };

    let reason = reason.strip_suffix('.').ok_or_else(|| parse_error("missing final period"))?;
    let mut values = vec![0u64; mode.len()];
    if reason != NO_LESIONS {
        let list = match mode {
            FeatureMode::Simple => {
                reason.strip_prefix("there are ").and_then(|r| r.strip_suffix(" regions, respectively"))
            }
            FeatureMode::Extended => reason.strip_suffix(" are detected"),
        }
        .ok_or_else(|| parse_error("malformed reason clause"))?;

        for item in split_items(list) {
            let words: Vec<&str> = item.split(' ').collect();
            let count: u64 = words[0].parse().map_err(|_| parse_error(format!("bad count in `{item}`")))?;
            let slot = match (mode, &words[..]) {
                (FeatureMode::Simple, [_, lesion]) => LesionClass::from_name(lesion)
                    .ok_or_else(|| parse_error(format!("bad lesion in `{item}`")))?
                    .position(),
                (FeatureMode::Extended, [_, size, lesion]) => {
                    let size =
                        SizeBucket::from_word(size).ok_or_else(|| parse_error(format!("bad size in `{item}`")))?;
                    let name = if count == 1 { Some(*lesion) } else { lesion.strip_suffix('s') };
                    let lesion = name
                        .and_then(LesionClass::from_name)
                        .ok_or_else(|| parse_error(format!("bad lesion in `{item}`")))?;
                    3 * lesion.position() + size.position()
                }
                _ => return Err(parse_error(format!("malformed clause `{item}`"))),
            };
            values[slot] = count;
        }
    }

    let features = FeatureVector::new(mode, values).expect("length matches mode");
    let parsed = ParsedExplanation { image_id: image_id.to_owned(), grade_text, features };
    // Reject anything that is not exactly what the renderer would produce
    // (reordered, repeated or zero clauses, leading zeros, ...).
    let grade = GradePair::new(grade_from_name(grade_text).expect("known grade"), 0).expect("valid grade");
    if render(&parsed.image_id, &parsed.features, grade).rendered != rendered {
        return Err(parse_error("sentence is not in canonical form"));
    }
    Ok(parsed)
}

/// Writes one sentence per line.
pub fn write_explanations(path: impl AsRef<Path>, explanations: &[Explanation]) -> std::io::Result<()> {
    let mut text = String::new();
    for e in explanations {
        text.push_str(&e.rendered);
        text.push('\n');
    }
    fs::write(path, text)
}
