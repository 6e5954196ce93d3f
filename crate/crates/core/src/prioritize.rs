use crate::types::{severity_rank, AnnotationSet, ErrorAnnotation};

/// Orders every finding across `sets` for the editor: by severity, then by
/// category, then by original position (set order, then line order).
/// Nothing is dropped or merged.
pub fn prioritize(sets: &[AnnotationSet]) -> Vec<ErrorAnnotation> {
    let mut all: Vec<ErrorAnnotation> = sets.iter().flat_map(|s| s.annotations.iter().cloned()).collect();
    // sort_by_key is stable, so ties keep their original position
    all.sort_by_key(|a| (severity_rank(a.severity), a.category));
    all
}
