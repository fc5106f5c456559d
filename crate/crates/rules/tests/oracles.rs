//! Rule behaviour checked against independent, brute-force oracles.

use chrono::{Days, NaiveDate};
use proptest::prelude::*;

use nephro_rules::{
    adherence_rate, assess_growth, bp_color, classify_bp, classify_urine_protein, patient_criticality, relapse_scan,
    BpReading, BpReferenceTable, BpStage, DoseRecord, DoseSchedule, GrowthMetric, GrowthReferenceTable,
    LatestAssessment, RelapseScanner, RelapseState, RelapseStatus, SeverityColor, Sex, UrineProteinGrade,
};

const BP_CSV: &str = include_str!("../data/bp_reference_v1.csv");
const GROWTH_CSV: &str = include_str!("../data/growth_reference_v1.csv");

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 6, 1).unwrap() + Days::new(n)
}

fn grade() -> impl Strategy<Value = UrineProteinGrade> {
    (0usize..6).prop_map(|i| UrineProteinGrade::ALL[i])
}

/// Dates strictly ascending with arbitrary gaps.
fn diary(max_len: usize) -> impl Strategy<Value = Vec<(NaiveDate, UrineProteinGrade)>> {
    prop::collection::vec((1u64..40, grade()), 0..=max_len).prop_map(|steps| {
        let mut offset = 0;
        steps
            .into_iter()
            .map(|(gap, g)| {
                offset += gap;
                (day(offset), g)
            })
            .collect()
    })
}

/// Enumerates every maximal run of 3+/4+ entries and reports the one that
/// touches the end of the diary.
fn relapse_oracle(entries: &[(NaiveDate, UrineProteinGrade)]) -> (RelapseStatus, Option<NaiveDate>, u32) {
    let heavy: Vec<bool> = entries.iter().map(|(_, g)| matches!(g, UrineProteinGrade::ThreePlus | UrineProteinGrade::FourPlus)).collect();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < heavy.len() {
        if heavy[i] {
            let mut j = i;
            while j + 1 < heavy.len() && heavy[j + 1] {
                j += 1;
            }
            runs.push((i, j));
            i = j + 1;
        } else {
            i += 1;
        }
    }
    match runs.last() {
        Some(&(start, end)) if end + 1 == heavy.len() => {
            let len = (end - start + 1) as u32;
            if len >= 3 {
                (RelapseStatus::Relapse, Some(entries[start].0), len)
            } else {
                (RelapseStatus::Suspected, None, len)
            }
        }
        _ => (RelapseStatus::NoRelapse, None, 0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn relapse_matches_run_length_oracle(entries in diary(60)) {
        let scan = relapse_scan(&entries).unwrap();
        let (status, onset, count) = relapse_oracle(&entries);
        prop_assert_eq!(scan.state.status, status);
        prop_assert_eq!(scan.state.onset_date, onset);
        prop_assert_eq!(scan.state.suspect_count, count);
        for (flag, (_, g)) in scan.flags.iter().zip(&entries) {
            prop_assert_eq!(flag.heavy, *g >= UrineProteinGrade::ThreePlus);
        }
    }

    #[test]
    fn relapse_scan_is_incremental(entries in diary(40), extra_gap in 1u64..30, extra in grade()) {
        let mut scanner = RelapseScanner::new();
        for &(d, g) in &entries {
            scanner.push(d, g).unwrap();
        }
        let next = entries.last().map_or(day(0), |(d, _)| *d + Days::new(extra_gap));
        scanner.push(next, extra).unwrap();
        let mut full = entries.clone();
        full.push((next, extra));
        prop_assert_eq!(scanner.state(), relapse_scan(&full).unwrap().state);
    }

    #[test]
    fn short_heavy_run_broken_never_relapses(run in 0usize..3, filler in 0usize..4) {
        // heavy run shorter than three, then a non-heavy entry, then a second short run
        let mut grades = vec![UrineProteinGrade::FourPlus; run];
        grades.push(UrineProteinGrade::ALL[filler]);
        grades.extend(vec![UrineProteinGrade::ThreePlus; 2]);
        let entries: Vec<_> = grades.into_iter().enumerate().map(|(i, g)| (day(i as u64), g)).collect();
        prop_assert_ne!(relapse_scan(&entries).unwrap().state.status, RelapseStatus::Relapse);
    }
}

// --- blood pressure ---------------------------------------------------------

struct OracleRow {
    sex: String,
    age: u32,
    band: String,
    cols: [i32; 4],
}

fn oracle_rows() -> Vec<OracleRow> {
    BP_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            OracleRow {
                sex: f[0].to_string(),
                age: f[1].parse().unwrap(),
                band: f[2].to_string(),
                cols: [f[3].parse().unwrap(), f[4].parse().unwrap(), f[5].parse().unwrap(), f[6].parse().unwrap()],
            }
        })
        .collect()
}

fn channel(value: i32, p90: i32, p95: i32, stage2: i32) -> BpStage {
    if value >= stage2 {
        BpStage::Stage2
    } else if value >= p95 {
        BpStage::Stage1
    } else if value >= p90 {
        BpStage::Elevated
    } else {
        BpStage::Normal
    }
}

/// Stages systolic and diastolic separately from the raw CSV text and takes
/// the worse one. Returns `None` when no row applies.
fn bp_oracle(rows: &[OracleRow], sys: i32, dia: i32, age_months: u32, sex: &str, height: f64) -> Option<BpStage> {
    let find = |band: &str| rows.iter().find(|r| r.sex == sex && r.age == 13 && r.band == band).map(|r| r.cols);
    let adolescent = find("adolescent")?;
    let stage2 = find("adolescent_stage2")?;
    let years = age_months / 12;
    if years >= 13 {
        let s = channel(sys, adolescent[0], adolescent[1], stage2[1]);
        let d = channel(dia, adolescent[2], adolescent[3], stage2[3]);
        return Some(s.max(d));
    }
    let row = rows.iter().find(|r| {
        if r.sex != sex || r.age != years {
            return false;
        }
        let Some((lo, hi)) = r.band.split_once('-') else { return false };
        let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
        lo <= height && height < hi
    })?;
    let [sp90, sp95, dp90, dp95] = row.cols;
    let s = channel(sys, sp90, sp95, std::cmp::min(sp95 + 12, stage2[1]));
    let d = channel(dia, dp90, dp95, std::cmp::min(dp95 + 12, stage2[3]));
    Some(s.max(d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn bp_matches_two_channel_oracle(
        age in 12u32..=216,
        female in any::<bool>(),
        height in 60.0f64..190.0,
        dia in 30i32..110,
        pulse in 5i32..70,
    ) {
        let table = BpReferenceTable::from_csv_str(BP_CSV).unwrap();
        let rows = oracle_rows();
        let sex = if female { Sex::F } else { Sex::M };
        let sys = dia + pulse;
        let reading = BpReading::new(sys, dia, age, sex, height).unwrap();
        let got = classify_bp(&reading, &table).ok();
        prop_assert_eq!(got, bp_oracle(&rows, sys, dia, age, sex.as_str(), height));
    }
}

#[test]
fn adolescent_stage2_example() {
    let table = BpReferenceTable::from_csv_str(BP_CSV).unwrap();
    // 170 months = 14 years; table rows: adolescent_stage2 140/90
    let r = BpReading::new(142, 92, 170, Sex::M, 165.0).unwrap();
    assert_eq!(classify_bp(&r, &table).unwrap(), BpStage::Stage2);
}

#[test]
fn below_every_threshold_is_normal() {
    let table = BpReferenceTable::from_csv_str(BP_CSV).unwrap();
    for row in oracle_rows().iter().filter(|r| r.age < 13) {
        let (lo, hi) = row.band.split_once('-').unwrap();
        let height = (lo.parse::<f64>().unwrap() + hi.parse::<f64>().unwrap()) / 2.0;
        let sex: Sex = row.sex.parse().unwrap();
        let reading = BpReading::new(row.cols[0] - 1, row.cols[2] - 1, row.age * 12 + 6, sex, height).unwrap();
        assert_eq!(classify_bp(&reading, &table).unwrap(), BpStage::Normal, "{}", row.band);
    }
}

#[test]
fn exact_percentile_boundaries() {
    let table = BpReferenceTable::from_csv_str(BP_CSV).unwrap();
    for row in oracle_rows().iter().filter(|r| r.age < 13) {
        let (lo, hi) = row.band.split_once('-').unwrap();
        // band edges are inclusive below; the first band starts at zero
        let lo = lo.parse::<f64>().unwrap();
        let height = if lo > 0.0 { lo } else { hi.parse::<f64>().unwrap() - 0.1 };
        let sex: Sex = row.sex.parse().unwrap();
        let age = row.age * 12;
        let [sp90, sp95, dp90, dp95] = row.cols;
        let at = |s, d| classify_bp(&BpReading::new(s, d, age, sex, height).unwrap(), &table).unwrap();
        assert_eq!(at(sp90, dp90 - 1), BpStage::Elevated);
        assert_eq!(at(sp95, dp90 - 1), BpStage::Stage1);
        assert_eq!(at(sp90 - 1, dp90), BpStage::Elevated);
        assert_eq!(at(sp90 - 1, dp95), BpStage::Stage1);
    }
}

// --- growth -------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn growth_band_matches_interval_check(
        row_idx in 0usize..222,
        offset in -6i64..=6,
        factor in 0.3f64..1.8,
    ) {
        let table = GrowthReferenceTable::from_csv_str(GROWTH_CSV).unwrap();
        let line = GROWTH_CSV.lines().skip(1).nth(row_idx).unwrap();
        let f: Vec<&str> = line.split(',').collect();
        let sex: Sex = f[0].parse().unwrap();
        let row_age: i64 = f[1].parse().unwrap();
        let metric: GrowthMetric = f[2].parse().unwrap();
        let median: f64 = f[3].parse().unwrap();
        let sd: f64 = f[4].parse().unwrap();
        // stay within three months so this row is the unique nearest one
        let age = (row_age + offset / 2).clamp(0, 216) as u32;
        prop_assume!((age as i64 - row_age).abs() < 3);
        let value = median * factor;
        let a = assess_growth(value, sex, age, metric, &table).unwrap();
        let z = (value - median) / sd;
        prop_assert!((a.z - z).abs() < 1e-9);
        let expected = if z.abs() >= 2.0 {
            SeverityColor::Red
        } else if (1.0..2.0).contains(&z.abs()) {
            SeverityColor::Yellow
        } else {
            SeverityColor::Green
        };
        prop_assert_eq!(a.band, expected);
    }
}

#[test]
fn growth_exact_boundaries() {
    // sd = 2 so median ± k·sd is exact in binary
    let table = GrowthReferenceTable::from_csv_str("sex,age_months,metric,median,sd\nM,60,weight,20,2\n").unwrap();
    for (k, want) in [
        (-2.5, SeverityColor::Red),
        (-2.0, SeverityColor::Red),
        (-1.5, SeverityColor::Yellow),
        (-1.0, SeverityColor::Yellow),
        (0.0, SeverityColor::Green),
        (1.0, SeverityColor::Yellow),
        (1.5, SeverityColor::Yellow),
        (2.0, SeverityColor::Red),
        (2.5, SeverityColor::Red),
    ] {
        let a = assess_growth(20.0 + k * 2.0, Sex::M, 60, GrowthMetric::Weight, &table).unwrap();
        assert_eq!(a.z, k);
        assert_eq!(a.band, want, "z = {k}");
    }
}

// --- criticality ------------------------------------------------------------

fn color() -> impl Strategy<Value = Option<SeverityColor>> {
    prop::option::of((0usize..3).prop_map(|i| SeverityColor::ALL[i]))
}

fn stage() -> impl Strategy<Value = Option<BpStage>> {
    prop::option::of((0usize..4).prop_map(|i| BpStage::ALL[i]))
}

fn relapse_state() -> impl Strategy<Value = RelapseState> {
    (0u32..5).prop_map(|n| {
        let entries: Vec<_> = (0..n).map(|i| (day(i as u64), UrineProteinGrade::ThreePlus)).collect();
        relapse_scan(&entries).unwrap().state
    })
}

proptest! {
    #[test]
    fn criticality_is_disjunction_of_red_signals(
        urine in color(),
        bp in stage(),
        growth in prop::collection::vec((0usize..3).prop_map(|i| SeverityColor::ALL[i]), 0..4),
        relapse in relapse_state(),
    ) {
        let latest = LatestAssessment { urine_color: urine, bp_stage: bp, growth_bands: growth.clone() };
        let red_signal = relapse.status == RelapseStatus::Relapse
            || bp == Some(BpStage::Stage2)
            || urine == Some(SeverityColor::Red)
            || growth.contains(&SeverityColor::Red);
        prop_assert_eq!(patient_criticality(&latest, &relapse), red_signal);
    }

    #[test]
    fn criticality_is_monotone(urine in color(), bp in stage(), relapse in relapse_state()) {
        let base = LatestAssessment { urine_color: urine, bp_stage: bp, growth_bands: vec![] };
        if patient_criticality(&base, &relapse) {
            let worse_urine = LatestAssessment { urine_color: urine.max(Some(SeverityColor::Yellow)), ..base.clone() };
            let worse_bp = LatestAssessment { bp_stage: bp.max(Some(BpStage::Stage1)), ..base.clone() };
            let more_growth = LatestAssessment { growth_bands: vec![SeverityColor::Green], ..base.clone() };
            prop_assert!(patient_criticality(&worse_urine, &relapse));
            prop_assert!(patient_criticality(&worse_bp, &relapse));
            prop_assert!(patient_criticality(&more_growth, &relapse));
        }
    }
}

// --- adherence --------------------------------------------------------------

proptest! {
    #[test]
    fn adherence_matches_day_by_day_count(
        sched_start in 0u64..30,
        sched_len in prop::option::of(0u64..40),
        per_day in 1u32..4,
        win_start in 0u64..50,
        win_len in 0u64..40,
        events in prop::collection::vec((0u64..80, any::<bool>()), 0..60),
    ) {
        let schedule = DoseSchedule {
            start: day(sched_start),
            end: sched_len.map(|l| day(sched_start + l)),
            doses_per_day: per_day,
        };
        let records: Vec<DoseRecord> = events.iter().map(|&(d, taken)| DoseRecord { date: day(d), taken }).collect();
        let (ws, we) = (day(win_start), day(win_start + win_len));
        let got = adherence_rate(&schedule, &records, ws, we).unwrap();

        let mut expected = 0;
        let mut taken = 0;
        let mut d = ws;
        while d <= we {
            let active = d >= schedule.start && schedule.end.is_none_or(|e| d <= e);
            if active {
                expected += per_day;
                if records.iter().rev().find(|r| r.date == d).is_some_and(|r| r.taken) {
                    taken += per_day;
                }
            }
            d = d + Days::new(1);
        }
        prop_assert_eq!(got.expected_doses, expected);
        prop_assert_eq!(got.taken_doses, taken);
        let rate = if expected == 0 { 1.0 } else { taken as f64 / expected as f64 };
        prop_assert_eq!(got.rate, rate);
    }
}

// --- purity -------------------------------------------------------------------

#[test]
fn repeated_calls_agree() {
    let table = BpReferenceTable::from_csv_str(BP_CSV).unwrap();
    let growth = GrowthReferenceTable::from_csv_str(GROWTH_CSV).unwrap();
    let reading = BpReading::new(118, 76, 100, Sex::F, 125.0).unwrap();
    let entries: Vec<_> = (0..10).map(|i| (day(i), UrineProteinGrade::ALL[(i % 6) as usize])).collect();
    for _ in 0..2 {
        assert_eq!(classify_bp(&reading, &table), classify_bp(&reading, &table));
        assert_eq!(
            assess_growth(120.0, Sex::F, 100, GrowthMetric::Height, &growth),
            assess_growth(120.0, Sex::F, 100, GrowthMetric::Height, &growth)
        );
        assert_eq!(relapse_scan(&entries), relapse_scan(&entries));
    }
    for g in UrineProteinGrade::ALL {
        assert_eq!(classify_urine_protein(g), classify_urine_protein(g));
    }
    for s in BpStage::ALL {
        assert_eq!(bp_color(s), bp_color(s));
    }
}
