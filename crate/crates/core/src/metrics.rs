//! Code-switching score, constraint compliance and benchmark-table
//! aggregation.
//!
//! Table arithmetic runs on integer micro-units (1e-6) and rounds half-up
//! to hundredths, so printed averages and deltas are exact for any input
//! with at most six decimals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::{self, Write};

use crate::constraints::{verify_all, ConstraintSpec};
use crate::script_analysis::{purity_violations, PurityPolicy, ViolatingSpan};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("nothing to score: input is empty")]
    EmptyInput,
    #[error("score {score} for `{name}` is outside [0, 100]")]
    OutOfRangeScore { name: String, score: f64 },
    #[error("column `{0}` not found")]
    UnknownColumn(String),
    #[error("table has {benchmarks} benchmarks but column `{column}` has {scores} scores")]
    RaggedTable { column: String, benchmarks: usize, scores: usize },
    #[error("report is not valid: {0}")]
    Parse(String),
}

/// A value in hundredths, e.g. `Centi(7603)` is 76.03.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Centi(pub i64);

impl Centi {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Signed form used for deltas: `+7.53`, `-0.40`.
    pub fn signed(self) -> String {
        let sign = if self.0 < 0 { '-' } else { '+' };
        format!("{sign}{}", Centi(self.0.abs()))
    }
}

impl fmt::Display for Centi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

const MICROS_PER_CENTI: i64 = 10_000;

fn to_micros(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// `num / den` rounded to the nearest integer, halves away from zero.
fn div_round_half_up(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}

/// Round a score to hundredths, halves away from zero.
pub fn round2(x: f64) -> Centi {
    Centi(div_round_half_up(to_micros(x), MICROS_PER_CENTI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub average: Centi,
}

/// Arithmetic mean of the rows, rounded half-up to two decimals.
pub fn benchmark_average(rows: &[BenchmarkRow]) -> Result<BenchmarkTable, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sum: i64 = 0;
    for row in rows {
        if !(0.0..=100.0).contains(&row.score) {
            return Err(MetricsError::OutOfRangeScore {
                name: row.name.clone(),
                score: row.score,
            });
        }
        sum += to_micros(row.score);
    }
    let average = Centi(div_round_half_up(sum, rows.len() as i64 * MICROS_PER_CENTI));
    Ok(BenchmarkTable {
        rows: rows.to_vec(),
        average,
    })
}

/// `column - baseline`, rounded half-up to hundredths.
pub fn score_delta(column: f64, baseline: f64) -> Centi {
    Centi(div_round_half_up(to_micros(column) - to_micros(baseline), MICROS_PER_CENTI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreColumn {
    pub name: String,
    pub scores: Vec<f64>,
}

/// Benchmarks as rows, models as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    #[serde(default)]
    pub title: String,
    pub benchmarks: Vec<String>,
    pub columns: Vec<ScoreColumn>,
}

impl ScoreTable {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for c in &self.columns {
            if c.scores.len() != self.benchmarks.len() {
                return Err(MetricsError::RaggedTable {
                    column: c.name.clone(),
                    benchmarks: self.benchmarks.len(),
                    scores: c.scores.len(),
                });
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&ScoreColumn, MetricsError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| MetricsError::UnknownColumn(name.to_string()))
    }

    pub fn column_rows(&self, name: &str) -> Result<Vec<BenchmarkRow>, MetricsError> {
        self.validate()?;
        let col = self.column(name)?;
        Ok(self
            .benchmarks
            .iter()
            .zip(&col.scores)
            .map(|(b, s)| BenchmarkRow {
                name: b.clone(),
                score: *s,
            })
            .collect())
    }

    pub fn average(&self, name: &str) -> Result<Centi, MetricsError> {
        Ok(benchmark_average(&self.column_rows(name)?)?.average)
    }

    /// Per-row deltas of `column` against `baseline`, followed by the delta
    /// of the two rounded averages.
    pub fn deltas(&self, column: &str, baseline: &str) -> Result<(Vec<Centi>, Centi), MetricsError> {
        self.validate()?;
        let col = self.column(column)?;
        let base = self.column(baseline)?;
        let rows = col.scores.iter().zip(&base.scores).map(|(c, b)| score_delta(*c, *b)).collect();
        let avg = Centi(self.average(column)?.0 - self.average(baseline)?.0);
        Ok((rows, avg))
    }
}

pub const FINETUNE_IMPACT_TABLE: &str = include_str!("../data/tables/finetune_impact.json");
pub const LEADERBOARD_TABLE: &str = include_str!("../data/tables/leaderboard.json");

/// The two shipped benchmark tables: base vs fine-tuned, then the
/// leaderboard comparison.
pub fn builtin_tables() -> Vec<ScoreTable> {
    [FINETUNE_IMPACT_TABLE, LEADERBOARD_TABLE]
        .iter()
        .map(|t| serde_json::from_str(t).expect("shipped tables are valid"))
        .collect()
}

/// One model output to score for code-switching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub prompt_id: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredOutput {
    pub prompt_id: String,
    pub output_text: String,
    pub pure: bool,
    pub violating_spans: Vec<ViolatingSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSwitchReport {
    pub pure: usize,
    pub total: usize,
    /// Percentage of pure outputs, 0 to 100.
    pub score: f64,
    pub outputs: Vec<ScoredOutput>,
}

impl CodeSwitchReport {
    pub fn rounded(&self) -> Centi {
        round2(self.score)
    }
}

/// Percentage of outputs with no unexpected non-Thai characters.
pub fn code_switching_score(outputs: &[OutputRecord], policy: &PurityPolicy) -> Result<CodeSwitchReport, MetricsError> {
    if outputs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let scored: Vec<ScoredOutput> = outputs
        .par_iter()
        .map(|o| {
            let violating_spans = purity_violations(&o.output, policy);
            ScoredOutput {
                prompt_id: o.prompt_id.clone(),
                output_text: o.output.clone(),
                pure: violating_spans.is_empty(),
                violating_spans,
            }
        })
        .collect();
    let pure = scored.iter().filter(|s| s.pure).count();
    let total = scored.len();
    Ok(CodeSwitchReport {
        pure,
        total,
        score: 100.0 * pure as f64 / total as f64,
        outputs: scored,
    })
}

/// Convenience wrapper numbering plain outputs `1..=n`.
pub fn code_switching_score_texts<S: AsRef<str>>(outputs: &[S], policy: &PurityPolicy) -> Result<CodeSwitchReport, MetricsError> {
    let records: Vec<OutputRecord> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| OutputRecord {
            prompt_id: (i + 1).to_string(),
            output: o.as_ref().to_string(),
        })
        .collect();
    code_switching_score(&records, policy)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompliancePair {
    pub response: String,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindTally {
    pub passed: usize,
    pub total: usize,
}

impl KindTally {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub compliant: usize,
    pub total: usize,
    /// Fraction of pairs whose every constraint passed.
    pub overall: f64,
    /// Individual outcomes grouped by constraint kind.
    pub per_kind: BTreeMap<String, KindTally>,
}

pub fn compliance_rate(pairs: &[CompliancePair]) -> Result<ComplianceReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let reports: Vec<_> = pairs.par_iter().map(|p| verify_all(&p.response, &p.constraints)).collect();
    let mut per_kind: BTreeMap<String, KindTally> = BTreeMap::new();
    let mut compliant = 0;
    for report in &reports {
        compliant += usize::from(report.all_passed);
        for o in &report.outcomes {
            let tally = per_kind.entry(o.kind.clone()).or_default();
            tally.total += 1;
            tally.passed += usize::from(o.passed);
        }
    }
    Ok(ComplianceReport {
        compliant,
        total: pairs.len(),
        overall: compliant as f64 / pairs.len() as f64,
        per_kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Structured,
    Human,
}

/// Everything `report` emits. `provenance` carries the run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(default)]
    pub tables: Vec<ScoreTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_switching: Option<CodeSwitchReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compliance: Option<ComplianceReport>,
}

impl Report {
    pub fn parse(text: &str) -> Result<Report, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::Parse(e.to_string()))
    }
}

fn render_table(out: &mut String, table: &ScoreTable, baseline: Option<&str>) -> Result<(), MetricsError> {
    table.validate()?;
    let baseline = baseline.filter(|b| table.columns.iter().any(|c| c.name == *b));
    let name_width = table
        .benchmarks
        .iter()
        .map(|b| b.chars().count())
        .chain(["Benchmark".len(), "Average".len()])
        .max()
        .unwrap_or(0);
    let cell_width = 18;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); table.benchmarks.len() + 1];
    for col in &table.columns {
        let deltas = match baseline {
            Some(b) if b != col.name => Some(table.deltas(&col.name, b)?),
            _ => None,
        };
        for (i, score) in col.scores.iter().enumerate() {
            let mut cell = round2(*score).to_string();
            if let Some((rows, _)) = &deltas {
                cell.push_str(&format!(" ({})", rows[i].signed()));
            }
            cells[i].push(cell);
        }
        let mut avg = table.average(&col.name)?.to_string();
        if let Some((_, d)) = &deltas {
            avg.push_str(&format!(" ({})", d.signed()));
        }
        cells[table.benchmarks.len()].push(avg);
    }

    if !table.title.is_empty() {
        let _ = writeln!(out, "{}", table.title);
    }
    let _ = write!(out, "{:<name_width$}", "Benchmark");
    for col in &table.columns {
        let _ = write!(out, "  {:>cell_width$}", col.name);
    }
    let _ = writeln!(out);
    let rule = name_width + table.columns.len() * (cell_width + 2);
    let _ = writeln!(out, "{}", "-".repeat(rule));
    for (i, row) in cells.iter().enumerate() {
        if i == table.benchmarks.len() {
            let _ = writeln!(out, "{}", "-".repeat(rule));
        }
        let label = table.benchmarks.get(i).map(String::as_str).unwrap_or("Average");
        let pad = name_width.saturating_sub(label.chars().count());
        let _ = write!(out, "{label}{}", " ".repeat(pad));
        for cell in row {
            let _ = write!(out, "  {cell:>cell_width$}");
        }
        let _ = writeln!(out);
    }
    Ok(())
}

/// Render a report. Structured output is pretty JSON that parses back into
/// an identical [`Report`]; human output is aligned tables with deltas
/// against `report.baseline` where that column exists.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String, MetricsError> {
    match format {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| MetricsError::Parse(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Human => {
            if let Some(b) = &report.baseline {
                if !report.tables.is_empty() && !report.tables.iter().any(|t| t.columns.iter().any(|c| &c.name == b)) {
                    return Err(MetricsError::UnknownColumn(b.clone()));
                }
            }
            let mut out = String::new();
            for (i, table) in report.tables.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                render_table(&mut out, table, report.baseline.as_deref())?;
            }
            if let Some(cs) = &report.code_switching {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "Code-switching score: {} ({}/{} outputs pure)", cs.rounded(), cs.pure, cs.total);
                for o in cs.outputs.iter().filter(|o| !o.pure) {
                    let spans: Vec<String> = o
                        .violating_spans
                        .iter()
                        .map(|s| format!("{}:{:?}", s.class, &o.output_text[s.range()]))
                        .collect();
                    let _ = writeln!(out, "  [{}] {}", o.prompt_id, spans.join(" "));
                }
            }
            if let Some(c) = &report.compliance {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "Compliance: {}/{} pairs ({:.4})", c.compliant, c.total, c.overall);
                for (kind, t) in &c.per_kind {
                    let _ = writeln!(out, "  {kind:<24}{:>6}/{:<6}{:.4}", t.passed, t.total, t.rate());
                }
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_constraint_spec;

    fn rows(scores: &[f64]) -> Vec<BenchmarkRow> {
        scores
            .iter()
            .enumerate()
            .map(|(i, s)| BenchmarkRow { name: format!("b{i}"), score: *s })
            .collect()
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round2(68.462), Centi(6846));
        assert_eq!(round2(1.005), Centi(101));
        assert_eq!(round2(0.125), Centi(13));
        assert_eq!(Centi(-40).signed(), "-0.40");
        assert_eq!(Centi(753).signed(), "+7.53");
        assert_eq!(Centi(5).to_string(), "0.05");
    }

    #[test]
    fn averages() {
        let t = benchmark_average(&rows(&[75.47, 57.94, 59.80, 61.40, 87.70])).unwrap();
        assert_eq!(t.average, Centi(6846));
        let t = benchmark_average(&rows(&[83.00, 75.81, 42.06, 67.95, 68.59, 44.19])).unwrap();
        assert_eq!(t.average, Centi(6360));
        assert_eq!(benchmark_average(&rows(&[42.42])).unwrap().average, Centi(4242));
        // exact half: (0.01 + 0.02) / 2 = 0.015 -> 0.02
        assert_eq!(benchmark_average(&rows(&[0.01, 0.02])).unwrap().average, Centi(2));
    }

    #[test]
    fn average_errors() {
        assert_eq!(benchmark_average(&[]), Err(MetricsError::EmptyInput));
        assert!(matches!(benchmark_average(&rows(&[101.0])), Err(MetricsError::OutOfRangeScore { .. })));
        assert!(matches!(benchmark_average(&rows(&[f64::NAN])), Err(MetricsError::OutOfRangeScore { .. })));
    }

    #[test]
    fn code_switching_examples() {
        let policy = PurityPolicy::default();
        let pure = vec!["สวัสดีครับ"; 10];
        assert_eq!(code_switching_score_texts(&pure, &policy).unwrap().score, 100.0);
        let mut one_bad = pure.clone();
        one_bad[3] = "สวัสดี中";
        let r = code_switching_score_texts(&one_bad, &policy).unwrap();
        assert_eq!(r.score, 90.0);
        assert_eq!(r.rounded().to_string(), "90.00");
        assert!(!r.outputs[3].pure && !r.outputs[3].violating_spans.is_empty());
        assert!(r.outputs.iter().all(|o| o.pure == o.violating_spans.is_empty()));
        assert_eq!(code_switching_score_texts::<&str>(&[], &policy), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn compliance_examples() {
        let wc = parse_constraint_spec(r#"{"id":"w","kind":"word_count","params":{"min":2,"max":2}}"#).unwrap();
        let th = parse_constraint_spec(r#"{"id":"t","kind":"thai_only"}"#).unwrap();
        let pair = |r: &str, c: &[&ConstraintSpec]| CompliancePair {
            response: r.to_string(),
            constraints: c.iter().map(|s| (*s).clone()).collect(),
        };
        let pairs = [
            pair("ก ข", &[&wc]),
            pair("ค ง", &[&wc]),
            pair("จ ฉ", &[&wc]),
            pair("a", &[&wc]),
        ];
        assert_eq!(compliance_rate(&pairs).unwrap().overall, 0.75);

        let r = compliance_rate(&[pair("hello there", &[&wc, &th])]).unwrap();
        assert_eq!(r.overall, 0.0);
        assert_eq!(r.per_kind["word_count"], KindTally { passed: 1, total: 1 });
        assert_eq!(r.per_kind["thai_only"], KindTally { passed: 0, total: 1 });

        let vacuous = compliance_rate(&[pair("x", &[]), pair("y", &[])]).unwrap();
        assert_eq!(vacuous.overall, 1.0);
        assert_eq!(compliance_rate(&[]), Err(MetricsError::EmptyInput));
    }

    fn table2() -> ScoreTable {
        ScoreTable {
            title: String::new(),
            benchmarks: ["IF", "MT", "NLU", "Exam", "CS"].map(String::from).to_vec(),
            columns: vec![
                ScoreColumn { name: "base".into(), scores: vec![75.47, 57.94, 59.80, 61.40, 87.70] },
                ScoreColumn { name: "tuned".into(), scores: vec![83.00, 75.81, 67.95, 63.00, 90.40] },
            ],
        }
    }

    #[test]
    fn human_report_shows_deltas() {
        let report = Report { baseline: Some("base".into()), tables: vec![table2()], ..Default::default() };
        let text = emit_report(&report, ReportFormat::Human).unwrap();
        assert!(text.contains("75.81 (+17.87)"), "{text}");
        assert!(text.contains("76.03 (+7.57)"), "{text}");
        assert!(text.contains("68.46"), "{text}");

        let bad = Report { baseline: Some("nope".into()), tables: vec![table2()], ..Default::default() };
        assert_eq!(emit_report(&bad, ReportFormat::Human), Err(MetricsError::UnknownColumn("nope".into())));
    }

    #[test]
    fn structured_report_round_trips() {
        let cs = code_switching_score_texts(&["ก", "ก a"], &PurityPolicy::default()).unwrap();
        let report = Report {
            baseline: Some("base".into()),
            tables: vec![table2()],
            code_switching: Some(cs),
            ..Default::default()
        };
        let first = emit_report(&report, ReportFormat::Structured).unwrap();
        let parsed = Report::parse(&first).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(emit_report(&parsed, ReportFormat::Structured).unwrap(), first);
    }

    #[test]
    fn tables_only_report() {
        let report = Report { tables: vec![table2()], ..Default::default() };
        let text = emit_report(&report, ReportFormat::Human).unwrap();
        assert!(!text.contains("Code-switching"));
        assert!(!text.contains('('));
    }

    #[test]
    fn shipped_tables() {
        let tables = builtin_tables();
        assert_eq!(tables[0].average("Qwen3-32B").unwrap().to_string(), "68.46");
        assert_eq!(tables[0].average("SiamGPT-32B").unwrap().to_string(), "76.03");
        let avgs: Vec<String> = ["SiamGPT-32B", "Typhoon2.5-30B", "OTG-R1-32B"]
            .iter()
            .map(|c| tables[1].average(c).unwrap().to_string())
            .collect();
        assert_eq!(avgs, ["63.60", "60.44", "55.78"]);
    }

    #[test]
    fn ragged_table_rejected() {
        let mut t = table2();
        t.columns[0].scores.pop();
        assert!(matches!(t.average("base"), Err(MetricsError::RaggedTable { .. })));
    }
}
