use log::warn;

use super::PatientSeries;

/// Largest physiologically plausible change between consecutive readings.
pub const MAX_JUMP_MGDL: f64 = 40.0;

/// Drops every reading that differs from the last *retained* reading by more
/// than [`MAX_JUMP_MGDL`]. Gaps are left in place; nothing is interpolated.
pub fn clean(series: &PatientSeries) -> PatientSeries {
    let mut kept: Vec<super::Reading> = Vec::with_capacity(series.readings.len());
    for r in &series.readings {
        match kept.last() {
            Some(prev) if (r.glucose - prev.glucose).abs() > MAX_JUMP_MGDL => {}
            _ => kept.push(*r),
        }
    }
    PatientSeries::new(series.patient_id.clone(), kept)
}

/// Chronological train / validation / test partition of one patient.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: PatientSeries,
    pub val: PatientSeries,
    pub test: PatientSeries,
}

/// Splits 20:1:1 with training first and the most recent readings as test.
/// Series shorter than 22 readings are excluded (`None`) with a warning.
pub fn split_temporal(series: &PatientSeries) -> Option<Split> {
    let len = series.len();
    if len < 22 {
        warn!(
            "patient {} has only {len} readings; at least 22 are needed for a 20:1:1 split, excluded",
            series.patient_id
        );
        return None;
    }
    let n_train = 20 * len / 22;
    let n_val = len / 22;
    let part = |a: usize, b: usize| PatientSeries::new(series.patient_id.clone(), series.readings[a..b].to_vec());
    Some(Split {
        train: part(0, n_train),
        val: part(n_train, n_train + n_val),
        test: part(n_train + n_val, len),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn series(values: &[f64]) -> PatientSeries {
        PatientSeries::regular("p", Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(), values)
    }

    #[test]
    fn removes_against_last_retained() {
        // 150 jumps 50 from 100; 148 is then compared against 100 (48) and also dropped.
        assert_eq!(clean(&series(&[100.0, 150.0, 148.0])).values(), vec![100.0]);
    }

    #[test]
    fn keeps_moderate_steps() {
        assert_eq!(
            clean(&series(&[100.0, 130.0, 160.0])).values(),
            vec![100.0, 130.0, 160.0]
        );
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(clean(&series(&[100.0])).values(), vec![100.0]);
        assert!(clean(&series(&[])).is_empty());
    }

    #[test]
    fn exactly_forty_is_kept() {
        assert_eq!(clean(&series(&[100.0, 140.0])).len(), 2);
    }

    #[test]
    fn split_ratios() {
        let s = split_temporal(&series(&vec![100.0; 220])).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (200, 10, 10));
        let s = split_temporal(&series(&vec![100.0; 22])).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (20, 1, 1));
        assert!(split_temporal(&series(&vec![100.0; 21])).is_none());
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(values in prop::collection::vec(40.0f64..400.0, 0..200)) {
            let once = clean(&series(&values));
            prop_assert_eq!(clean(&once), once);
        }

        #[test]
        fn split_partitions_in_order(len in 22usize..600) {
            let values: Vec<f64> = (0..len).map(|i| 100.0 + i as f64).collect();
            let s = series(&values);
            let parts = split_temporal(&s).unwrap();
            let mut joined = parts.train.readings.clone();
            joined.extend(parts.val.readings.iter().copied());
            joined.extend(parts.test.readings.iter().copied());
            prop_assert_eq!(joined, s.readings);
            prop_assert!(parts.val.len() >= 1 && parts.test.len() >= 1);
        }
    }
}
