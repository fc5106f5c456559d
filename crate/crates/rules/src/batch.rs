//! Rule evaluation over many inputs.
//!
//! With the `parallel` feature (on by default) the work is spread over the
//! rayon global pool; without it everything runs on the calling thread. Both
//! paths return results in input order, so callers never see the difference.

use chrono::NaiveDate;

use crate::{
    classify_bp, patient_criticality, relapse_scan, BpReading, BpReferenceTable, BpStage, LatestAssessment,
    RelapseState, Result, UrineProteinGrade,
};

/// True when this build evaluates batches on the rayon pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_sequential(items, f)
}

/// Always single-threaded; the reference path for benchmarks and tests.
pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

pub fn classify_bp_all(readings: &[BpReading], table: &BpReferenceTable) -> Vec<Result<BpStage>> {
    map(readings, |r| classify_bp(r, table))
}

pub fn relapse_states(diaries: &[Vec<(NaiveDate, UrineProteinGrade)>]) -> Vec<Result<RelapseState>> {
    map(diaries, |entries| relapse_scan(entries).map(|scan| scan.state))
}

pub fn criticality_all(patients: &[(LatestAssessment, RelapseState)]) -> Vec<bool> {
    map(patients, |(latest, relapse)| patient_criticality(latest, relapse))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let items: Vec<u64> = (0..10_000).collect();
        let square = |x: &u64| x * x;
        assert_eq!(map(&items, square), map_sequential(&items, square));
    }

    #[test]
    fn empty_batch() {
        let none: Vec<Vec<(NaiveDate, UrineProteinGrade)>> = Vec::new();
        assert!(relapse_states(&none).is_empty());
        assert!(criticality_all(&[]).is_empty());
    }
}
