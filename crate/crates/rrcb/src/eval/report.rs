//! Report emission: a full-precision CSV, an aligned plain-text table and
//! an SVG bar chart of overall scores with a dashed behavior reference
//! line.

use super::{ComboRow, EvalReport};
use crate::data::Quality;
use crate::error::{Error, Result};
use crate::geom::Task;
use std::fmt::Write as _;
use std::path::Path;

/// CSV with one row per (task, quality, policy) cell, full precision.
pub fn write_csv(report: &EvalReport) -> String {
    let mut s =
        String::from("task,quality,policy,n_episodes,mean_return,sem_return,success_rate,sem_success\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.task.name(),
            r.quality.name(),
            r.policy,
            r.n_episodes,
            r.mean_return,
            r.sem_return,
            r.success_rate,
            r.sem_success
        );
    }
    s
}

/// Parses a CSV produced by [`write_csv`]; used by tests and the repro
/// pipeline's consistency checks.
pub fn parse_report_csv(csv: &str) -> Result<Vec<ComboRow>> {
    let mut rows = Vec::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::Format(format!("csv line {i} has {} fields", parts.len())));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}'")))
        };
        rows.push(ComboRow {
            task: Task::parse(parts[0])?,
            quality: Quality::parse(parts[1])?,
            policy: parts[2].to_string(),
            n_episodes: parts[3]
                .parse()
                .map_err(|_| Error::Format("bad episode count".into()))?,
            mean_return: f(parts[4])?,
            sem_return: f(parts[5])?,
            success_rate: f(parts[6])?,
            sem_success: f(parts[7])?,
        });
    }
    Ok(rows)
}

/// Aligned text table with one block per policy plus the overall scores,
/// using the `mean +- sem` convention of the published tables.
pub fn render_text_table(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<14} {:>6}  {:>16}  {:>14}",
        "policy", "combo", "n", "return", "success"
    );
    let _ = writeln!(s, "{}", "-".repeat(72));
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<14} {:<14} {:>6}  {:>8.1} \u{b1} {:<5.1}  {:>6.2} \u{b1} {:<5.2}",
            r.policy,
            format!("{}/{}", r.task.name(), r.quality.name()),
            r.n_episodes,
            r.mean_return,
            r.sem_return,
            r.success_rate,
            r.sem_success
        );
    }
    let _ = writeln!(s, "{}", "-".repeat(72));
    for (name, score) in &report.overall {
        let _ = writeln!(s, "{:<14} overall score {:>8.1}", name, score);
    }
    s
}

/// Bar chart of overall scores; the `reference` entry's score is drawn as
/// a dashed horizontal line (the behavior-policy baseline).
pub fn render_svg(report: &EvalReport, reference: &str) -> String {
    let width = 640.0;
    let height = 360.0;
    let margin = 50.0;
    let n = report.overall.len().max(1);
    let max_score = report
        .overall
        .iter()
        .map(|(_, s)| *s)
        .fold(1.0f64, f64::max);
    let scale = (height - 2.0 * margin) / max_score;
    let band = (width - 2.0 * margin) / n as f64;
    let bar_w = band * 0.6;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(s, "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "  <line x1=\"{margin}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        height - margin,
        width - margin,
        height - margin
    );
    for (i, (name, score)) in report.overall.iter().enumerate() {
        let h = score * scale;
        let x = margin + i as f64 * band + (band - bar_w) / 2.0;
        let y = height - margin - h;
        let _ = writeln!(
            s,
            "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"#5d81b5\"/>"
        );
        let _ = writeln!(
            s,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{name}</text>",
            x + bar_w / 2.0,
            height - margin + 16.0
        );
        let _ = writeln!(
            s,
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{score:.0}</text>",
            x + bar_w / 2.0,
            y - 4.0
        );
    }
    let ref_score = report
        .overall
        .iter()
        .find(|(name, _)| name == reference)
        .map(|(_, sc)| *sc)
        .unwrap_or(0.0);
    let ry = height - margin - ref_score * scale;
    let _ = writeln!(
        s,
        "  <line x1=\"{margin}\" y1=\"{ry:.1}\" x2=\"{}\" y2=\"{ry:.1}\" stroke=\"black\" stroke-dasharray=\"6,4\"/>",
        width - margin
    );
    let _ = writeln!(s, "</svg>");
    s
}

/// Writes report.csv, report.txt and scores.svg into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path, reference: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.csv"), write_csv(report))?;
    std::fs::write(dir.join("report.txt"), render_text_table(report))?;
    std::fs::write(dir.join("scores.svg"), render_svg(report, reference))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> EvalReport {
        EvalReport {
            rows: vec![
                ComboRow {
                    task: Task::Push,
                    quality: Quality::Expert,
                    policy: "behavior".into(),
                    n_episodes: 27,
                    mean_return: 660.123456789,
                    sem_return: 2.3456789,
                    success_rate: 0.925925,
                    sem_success: 0.0123,
                },
                ComboRow {
                    task: Task::Lift,
                    quality: Quality::Mixed,
                    policy: "bc".into(),
                    n_episodes: 18,
                    mean_return: 437.0,
                    sem_return: 26.0,
                    success_rate: 0.09,
                    sem_success: 0.02,
                },
            ],
            overall: vec![("behavior".into(), 751.0), ("bc".into(), 516.0)],
        }
    }

    #[test]
    fn csv_round_trips_at_full_precision() {
        let report = sample_report();
        let csv = write_csv(&report);
        assert_eq!(csv.lines().count(), report.rows.len() + 1);
        let parsed = parse_report_csv(&csv).unwrap();
        for (a, b) in report.rows.iter().zip(&parsed) {
            assert_eq!(a.policy, b.policy);
            assert!((a.mean_return - b.mean_return).abs() < 1e-9);
            assert!((a.sem_return - b.sem_return).abs() < 1e-9);
            assert!((a.success_rate - b.success_rate).abs() < 1e-9);
        }
    }

    #[test]
    fn svg_has_one_bar_per_policy_and_a_dashed_line() {
        let report = sample_report();
        let svg = render_svg(&report, "behavior");
        let bars = svg.matches("<rect").count();
        // One background rect plus one bar per policy.
        assert_eq!(bars, 1 + report.overall.len());
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn text_table_mentions_every_policy() {
        let report = sample_report();
        let txt = render_text_table(&report);
        assert!(txt.contains("behavior"));
        assert!(txt.contains("bc"));
        assert!(txt.contains("overall score"));
    }

    #[test]
    fn emit_writes_three_files() {
        let report = sample_report();
        let dir = std::env::temp_dir().join("rrcb_report_test");
        emit_report(&report, &dir, "behavior").unwrap();
        for f in ["report.csv", "report.txt", "scores.svg"] {
            assert!(dir.join(f).exists(), "{f} missing");
        }
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_report_csv("task,quality\npush,expert").is_err());
        let bad = "task,quality,policy,n_episodes,mean_return,sem_return,success_rate,sem_success\npush,expert,bc,notanumber,1,2,3,4";
        assert!(parse_report_csv(bad).is_err());
    }
}
