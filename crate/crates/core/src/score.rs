//! Instance points, time bonuses, benchmark tables and the overall ranking.
//!
//! A correct answer earns 10 points and an incorrect one costs 100. Among the
//! tools answering an instance correctly, those within 0.2 s of the fastest
//! scoring time get 2 bonus points and those within 0.2 s of the fastest of
//! the rest get 1; runtimes under a second count as one second. Benchmark
//! scores are normalized so the best tool gets 100, and the overall score is
//! the sum of a tool's benchmark percents.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::adjudicate::Classification;

pub const CORRECT_POINTS: i64 = 10;
pub const INCORRECT_POINTS: i64 = -100;
pub const FASTEST_BONUS: i64 = 2;
pub const SECOND_BONUS: i64 = 1;
/// Seconds.
pub const TIME_FLOOR: f64 = 1.0;
/// Seconds.
pub const TIE_WINDOW: f64 = 0.2;

/// Absorbs decimal representation error at the edge of the tie window.
const WINDOW_SLACK: f64 = 1e-9;

pub fn scoring_time(corrected: f64) -> f64 {
    corrected.max(TIME_FLOOR)
}

/// Bonus for each of the given scoring times, which belong to the correct
/// answers on one instance.
pub fn award_bonuses(times: &[f64]) -> Vec<i64> {
    let mut bonus = vec![0; times.len()];
    let mut rest: Vec<usize> = (0..times.len()).collect();
    for points in [FASTEST_BONUS, SECOND_BONUS] {
        let Some(min) = rest.iter().map(|&i| times[i]).min_by(f64::total_cmp) else {
            break;
        };
        let (cluster, others): (Vec<usize>, Vec<usize>) = rest
            .iter()
            .partition(|&&i| times[i] <= min + TIE_WINDOW + WINDOW_SLACK);
        for i in cluster {
            bonus[i] = points;
        }
        rest = others;
    }
    bonus
}

/// What scoring needs to know about one tool's answer on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub tool: String,
    pub instance: String,
    pub classification: Classification,
    /// Overhead-corrected runtime in seconds.
    pub corrected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScore {
    pub tool: String,
    pub instance: String,
    pub base: i64,
    pub bonus: i64,
    pub classification: Classification,
}

pub fn base_points(c: Classification) -> i64 {
    match c {
        Classification::CorrectHold | Classification::CorrectViolated => CORRECT_POINTS,
        Classification::Incorrect => INCORRECT_POINTS,
        Classification::Unsolved => 0,
    }
}

/// Scores in input order.
pub fn instance_scores(outcomes: &[Outcome]) -> Vec<InstanceScore> {
    let mut scores: Vec<InstanceScore> = outcomes
        .iter()
        .map(|o| InstanceScore {
            tool: o.tool.clone(),
            instance: o.instance.clone(),
            base: base_points(o.classification),
            bonus: 0,
            classification: o.classification,
        })
        .collect();
    let mut solved: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in outcomes.iter().enumerate() {
        if o.classification.is_correct() {
            solved.entry(o.instance.as_str()).or_default().push(i);
        }
    }
    for members in solved.values() {
        let times: Vec<f64> = members
            .iter()
            .map(|&i| scoring_time(outcomes[i].corrected))
            .collect();
        for (&i, b) in members.iter().zip(award_bonuses(&times)) {
            scores[i].bonus = b;
        }
    }
    scores
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub tool: String,
    pub verified: u32,
    pub falsified: u32,
    pub fastest: u32,
    pub second_fastest: u32,
    pub penalty: u32,
    pub score: i64,
    /// In `[0, 100]`, unrounded.
    pub percent: f64,
}

impl BenchmarkRow {
    /// Row with the score implied by the counts and percent 0.
    pub fn from_counts(
        tool: impl Into<String>,
        verified: u32,
        falsified: u32,
        fastest: u32,
        second_fastest: u32,
        penalty: u32,
    ) -> Self {
        let score = CORRECT_POINTS * i64::from(verified + falsified)
            + FASTEST_BONUS * i64::from(fastest)
            + SECOND_BONUS * i64::from(second_fastest)
            + INCORRECT_POINTS * i64::from(penalty);
        Self {
            tool: tool.into(),
            verified,
            falsified,
            fastest,
            second_fastest,
            penalty,
            score,
            percent: 0.0,
        }
    }
}

/// Score descending, then more fastest answers, then tool name.
fn rank(a: &BenchmarkRow, b: &BenchmarkRow) -> Ordering {
    b.score
        .cmp(&a.score)
        .then(b.fastest.cmp(&a.fastest))
        .then(a.tool.cmp(&b.tool))
}

/// Sets percents relative to the best positive score and sorts the rows.
pub fn normalize(rows: &mut [BenchmarkRow]) {
    let best = rows.iter().map(|r| r.score).max().unwrap_or(0);
    for r in rows.iter_mut() {
        r.percent = if best > 0 {
            100.0 * r.score.max(0) as f64 / best as f64
        } else {
            0.0
        };
    }
    rows.sort_by(rank);
}

/// One row per tool appearing in `outcomes`, normalized and ranked.
pub fn score_benchmark(outcomes: &[Outcome]) -> Vec<BenchmarkRow> {
    let scores = instance_scores(outcomes);
    let mut tally: BTreeMap<&str, ([u32; 5], i64)> = BTreeMap::new();
    for s in &scores {
        let (counts, total) = tally.entry(s.tool.as_str()).or_default();
        match s.classification {
            Classification::CorrectHold => counts[0] += 1,
            Classification::CorrectViolated => counts[1] += 1,
            Classification::Incorrect => counts[4] += 1,
            Classification::Unsolved => {}
        }
        match s.bonus {
            FASTEST_BONUS => counts[2] += 1,
            SECOND_BONUS => counts[3] += 1,
            _ => {}
        }
        *total += s.base + s.bonus;
    }
    let mut rows: Vec<BenchmarkRow> = tally
        .into_iter()
        .map(|(tool, (c, total))| {
            let row = BenchmarkRow::from_counts(tool, c[0], c[1], c[2], c[3], c[4]);
            assert_eq!(row.score, total, "score identity broken for `{tool}`");
            row
        })
        .collect();
    normalize(&mut rows);
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverallEntry {
    pub tool: String,
    /// Sum of the tool's benchmark percents.
    pub score: f64,
    pub fastest: u32,
}

/// Sums each tool's percents over the tables (absent counts as 0) and ranks
/// by total, then fastest answers, then name.
pub fn overall_scores(tables: &[Vec<BenchmarkRow>]) -> Vec<OverallEntry> {
    let mut totals: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for row in tables.iter().flatten() {
        let (score, fastest) = totals.entry(row.tool.as_str()).or_default();
        *score += row.percent;
        *fastest += row.fastest;
    }
    let mut out: Vec<OverallEntry> = totals
        .into_iter()
        .map(|(tool, (score, fastest))| OverallEntry {
            tool: tool.to_string(),
            score,
            fastest,
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.fastest.cmp(&a.fastest))
            .then(a.tool.cmp(&b.tool))
    });
    out
}

/// `x` to one decimal, rounding halves away from zero. The value is first
/// rounded to 9 decimals so that binary noise in values such as `0.15` does
/// not decide the direction.
pub fn format_tenths(x: f64) -> String {
    let fixed = format!("{:.9}", x.abs());
    let (int, frac) = fixed.split_once('.').expect("fixed-point format");
    let digits = frac.as_bytes();
    let mut tenths: u64 =
        int.parse::<u64>().expect("integer part") * 10 + u64::from(digits[0] - b'0');
    if digits[1] >= b'5' {
        tenths += 1;
    }
    let sign = if x < 0.0 && tenths > 0 { "-" } else { "" };
    format!("{sign}{}.{}", tenths / 10, tenths % 10)
}
