//! Label encoding: classes map to their lexicographic rank
//! (bird → 0, drone → 1, reflector → 2).

use crate::ingest::Class;

pub fn encode_labels(labels: &[Class]) -> Vec<usize> {
    labels.iter().map(|c| c.id()).collect()
}

/// Inverse of [`encode_labels`]; `None` for ids outside the class range.
pub fn decode_labels(ids: &[usize]) -> Option<Vec<Class>> {
    ids.iter().map(|&i| Class::from_id(i)).collect()
}
