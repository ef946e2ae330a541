//! Manifest record to feature row.

use crate::mask_io::{ManifestRecord, MaskError};
use crate::regions::{extract_regions, RegionSet};
use crate::symbolic::{self, FeatureMode, FeatureRow, SizeThresholds};
use crate::Error;

/// Loads the record's four masks and labels their regions, in class order.
pub fn region_sets(record: &ManifestRecord) -> Result<Vec<RegionSet>, MaskError> {
    record
        .mask_paths
        .iter()
        .map(|(class, path)| Ok(extract_regions(&crate::mask_io::load_mask(path, class)?)))
        .collect()
}

/// Feature row for one record; grades are carried through unchanged.
pub fn extract_features(
    record: &ManifestRecord,
    mode: FeatureMode,
    thresholds: &SizeThresholds,
) -> Result<FeatureRow, Error> {
    let sets = region_sets(record)?;
    Ok(FeatureRow {
        image_id: record.image_id.clone(),
        features: symbolic::features(&sets, mode, thresholds)?,
        grades: record.grades,
    })
}
