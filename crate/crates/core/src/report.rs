//! Benchmark tables, overall ranking, cactus plots and per-instance detail,
//! rendered as text, CSV and SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::adjudicate::{Classification, ResultStatus};
use crate::harness::{AdjudicatedRecord, HarnessError, CE_ABSENT};
use crate::score::{
    format_tenths, instance_scores, overall_scores, score_benchmark, scoring_time, BenchmarkRow,
    InstanceScore, Outcome, OverallEntry, TIME_FLOOR,
};

pub const TABLE_HEADER: [&str; 8] = [
    "#",
    "Tool",
    "Verified",
    "Falsified",
    "Fastest",
    "Penalty",
    "Score",
    "Percent",
];
pub const OVERALL_HEADER: [&str; 3] = ["#", "Tool", "Score"];
pub const DETAIL_HEADER: [&str; 11] = [
    "benchmark",
    "tool",
    "instance",
    "status",
    "raw",
    "corrected",
    "base",
    "bonus",
    "classification",
    "ground_truth",
    "witness",
];

/// Percent column text; tools without a positive score show `0%`.
pub fn percent_cell(row: &BenchmarkRow) -> String {
    if row.score <= 0 {
        "0%".into()
    } else {
        format!("{}%", format_tenths(row.percent))
    }
}

pub fn table_cells(rows: &[BenchmarkRow]) -> Vec<Vec<String>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.tool.clone(),
                r.verified.to_string(),
                r.falsified.to_string(),
                r.fastest.to_string(),
                r.penalty.to_string(),
                r.score.to_string(),
                percent_cell(r),
            ]
        })
        .collect()
}

pub fn overall_cells(entries: &[OverallEntry]) -> Vec<Vec<String>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| vec![(i + 1).to_string(), e.tool.clone(), format_tenths(e.score)])
        .collect()
}

/// Columns separated by two spaces; the second column is left aligned, the
/// rest right aligned.
pub fn render_text(header: &[&str], cells: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[&str]| -> String {
        let parts: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| match i {
                1 => format!("{c:<w$}"),
                _ => format!("{c:>w$}"),
            })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    for row in cells {
        out += &line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

pub fn render_csv(header: &[&str], cells: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in cells {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

/// Text and CSV renderings of a benchmark table.
pub fn emit_benchmark_table(rows: &[BenchmarkRow]) -> (String, String) {
    let cells = table_cells(rows);
    (
        render_text(&TABLE_HEADER, &cells),
        render_csv(&TABLE_HEADER, &cells),
    )
}

pub fn emit_overall(entries: &[OverallEntry]) -> (String, String) {
    let cells = overall_cells(entries);
    (
        render_text(&OVERALL_HEADER, &cells),
        render_csv(&OVERALL_HEADER, &cells),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CactusSeries {
    pub tool: String,
    /// Corrected runtimes of correctly solved instances, ascending; the
    /// `k`-th entry is the time needed to solve `k + 1` instances.
    pub runtimes: Vec<f64>,
}

/// One series per tool (by name), including tools that solved nothing.
pub fn cactus_series(outcomes: &[Outcome]) -> Vec<CactusSeries> {
    let mut by_tool: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for o in outcomes {
        let times = by_tool.entry(o.tool.as_str()).or_default();
        if o.classification.is_correct() {
            times.push(o.corrected);
        }
    }
    by_tool
        .into_iter()
        .map(|(tool, mut runtimes)| {
            runtimes.sort_by(f64::total_cmp);
            CactusSeries {
                tool: tool.to_string(),
                runtimes,
            }
        })
        .collect()
}

pub fn cactus_csv(series: &[CactusSeries]) -> String {
    let cells: Vec<Vec<String>> = series
        .iter()
        .flat_map(|s| {
            s.runtimes
                .iter()
                .enumerate()
                .map(|(k, t)| vec![s.tool.clone(), (k + 1).to_string(), format!("{t:.6}")])
        })
        .collect();
    render_csv(&["tool", "solved", "runtime"], &cells)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const DASHES: [&str; 3] = ["", "6 3", "2 2"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Solved count on x, runtime on a log10 y axis starting at the one-second
/// scoring floor.
pub fn cactus_svg(title: &str, series: &[CactusSeries]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let (pw, ph) = (W - left - right, H - top - bottom);
    let max_n = series
        .iter()
        .map(|s| s.runtimes.len())
        .max()
        .unwrap_or(0)
        .max(1);
    let max_t = series
        .iter()
        .flat_map(|s| s.runtimes.iter().copied())
        .fold(TIME_FLOOR * 10.0, f64::max);
    let decades = max_t.log10().ceil().max(1.0) as i32;
    let x = |n: f64| left + pw * n / max_n as f64;
    let y = |t: f64| top + ph * (1.0 - scoring_time(t).log10() / f64::from(decades));

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        s,
        "<!-- generator: vnnarena {} -->",
        env!("CARGO_PKG_VERSION")
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        left + pw / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{left:.1}\" y=\"{top:.1}\" width=\"{pw:.1}\" height=\"{ph:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for d in 0..=decades {
        let yy = y(10f64.powi(d));
        let _ = writeln!(
            s,
            "<line x1=\"{left:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#dddddd\"/>",
            left + pw
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            left - 6.0,
            yy + 4.0,
            10u64.pow(d as u32)
        );
    }
    let step = (max_n as f64 / 10.0).ceil().max(1.0) as usize;
    for n in (0..=max_n).step_by(step) {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{n}</text>",
            x(n as f64),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">instances solved</text>",
        left + pw / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">runtime (s, log scale)</text>",
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, series) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = DASHES[(i / PALETTE.len()) % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        if !series.runtimes.is_empty() {
            let points: Vec<String> = series
                .runtimes
                .iter()
                .enumerate()
                .map(|(k, &t)| format!("{:.1},{:.1}", x((k + 1) as f64), y(t)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash_attr} points=\"{}\"/>",
                points.join(" ")
            );
            for p in &points {
                let (px, py) = p.split_once(',').expect("formatted point");
                let _ = writeln!(
                    s,
                    "<circle cx=\"{px}\" cy=\"{py}\" r=\"2.5\" fill=\"{color}\"/>"
                );
            }
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"{dash_attr}/>",
            lx + 24.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\">{} ({})</text>",
            lx + 30.0,
            ly + 4.0,
            xml_escape(&series.tool),
            series.runtimes.len()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Adjudicated records as scoring inputs; instances are keyed by index.
pub fn outcomes(records: &[&AdjudicatedRecord]) -> Vec<Outcome> {
    records
        .iter()
        .map(|a| Outcome {
            tool: a.run.tool.clone(),
            instance: a.run.instance.to_string(),
            classification: a.classification,
            corrected: a.run.corrected,
        })
        .collect()
}

fn shown(path: &Path, base: &Path) -> String {
    let abs = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    abs.strip_prefix(base).unwrap_or(&abs).display().to_string()
}

/// Why a record scored as it did, as far as witnesses are concerned.
fn witness_note(a: &AdjudicatedRecord, group: &[&AdjudicatedRecord], base: &Path) -> String {
    let own = a
        .run
        .ce
        .as_deref()
        .map(|p| shown(p, base))
        .unwrap_or_default();
    match (a.classification, a.run.status) {
        (Classification::CorrectViolated, _) => own,
        (Classification::Incorrect, ResultStatus::Holds) => {
            let tool = a.witness_tool.as_deref().unwrap_or("?");
            let path = group
                .iter()
                .find(|g| g.run.tool == tool)
                .and_then(|g| g.run.ce.as_deref())
                .map(|p| shown(p, base))
                .unwrap_or_default();
            format!("contradicted by {tool}: {path}")
        }
        (Classification::Incorrect, _) if a.ce_verdict == CE_ABSENT => {
            "no counterexample written".into()
        }
        (Classification::Incorrect, _) => format!("{own}: {}", a.ce_verdict),
        _ => String::new(),
    }
}

/// Tables per benchmark (by name) and the overall ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Scoreboard {
    pub tables: Vec<(String, Vec<BenchmarkRow>)>,
    pub overall: Vec<OverallEntry>,
}

fn by_benchmark(records: &[AdjudicatedRecord]) -> BTreeMap<&str, Vec<&AdjudicatedRecord>> {
    let mut groups: BTreeMap<&str, Vec<&AdjudicatedRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.run.benchmark.as_str()).or_default().push(r);
    }
    groups
}

pub fn scoreboard(records: &[AdjudicatedRecord]) -> Scoreboard {
    let tables: Vec<(String, Vec<BenchmarkRow>)> = by_benchmark(records)
        .into_iter()
        .map(|(name, recs)| (name.to_string(), score_benchmark(&outcomes(&recs))))
        .collect();
    let overall = overall_scores(&tables.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>());
    Scoreboard { tables, overall }
}

/// Per-instance rows in record order within each benchmark. `base` is the
/// directory that counterexample paths are shown relative to.
pub fn detail_csv(records: &[AdjudicatedRecord], base: &Path) -> String {
    let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    let mut cells = Vec::new();
    for (name, recs) in by_benchmark(records) {
        let scores: Vec<InstanceScore> = instance_scores(&outcomes(&recs));
        for (a, s) in recs.iter().zip(scores) {
            let group: Vec<&AdjudicatedRecord> = recs
                .iter()
                .copied()
                .filter(|g| g.run.instance == a.run.instance)
                .collect();
            cells.push(vec![
                name.to_string(),
                a.run.tool.clone(),
                a.run.instance.to_string(),
                a.run.status.to_string(),
                format!("{:.6}", a.run.raw),
                format!("{:.6}", a.run.corrected),
                s.base.to_string(),
                s.bonus.to_string(),
                a.classification.to_string(),
                a.ground_truth.clone(),
                witness_note(a, &group, &base),
            ]);
        }
    }
    render_csv(&DETAIL_HEADER, &cells)
}

fn write(dir: &Path, name: String, text: &str) -> Result<PathBuf, HarnessError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| HarnessError::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

/// Writes `<benchmark>.table.{txt,csv}` and `overall.{txt,csv}`.
pub fn write_scoreboard(dir: &Path, board: &Scoreboard) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();
    for (name, rows) in &board.tables {
        let (text, csv) = emit_benchmark_table(rows);
        written.push(write(dir, format!("{name}.table.txt"), &text)?);
        written.push(write(dir, format!("{name}.table.csv"), &csv)?);
    }
    let (text, csv) = emit_overall(&board.overall);
    written.push(write(dir, "overall.txt".into(), &text)?);
    written.push(write(dir, "overall.csv".into(), &csv)?);
    Ok(written)
}

/// The scoreboard plus `<benchmark>.cactus.{svg,csv}` and `detail.csv`.
pub fn write_report(
    dir: &Path,
    records: &[AdjudicatedRecord],
    base: &Path,
) -> Result<Scoreboard, HarnessError> {
    let board = scoreboard(records);
    write_scoreboard(dir, &board)?;
    for (name, recs) in by_benchmark(records) {
        let series = cactus_series(&outcomes(&recs));
        write(
            dir,
            format!("{name}.cactus.svg"),
            &cactus_svg(&format!("Cactus plot for {name}"), &series),
        )?;
        write(dir, format!("{name}.cactus.csv"), &cactus_csv(&series))?;
    }
    write(dir, "detail.csv".into(), &detail_csv(records, base))?;
    Ok(board)
}
