//! Deterministic report output. Rates print with exactly one decimal,
//! p-values with four significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    bin_rates, cutoff_split, size_test, success_rate, AnalyticsError, BinnedRates, CutoffTable, EdgeSpec, GroupBy,
    Observation, SizeField, StatsError, SuccessTable, WelchResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = AnalyticsError;
    fn from_str(s: &str) -> Result<Self, AnalyticsError> {
        match s {
            "text" | "txt" | "plain" | "plain-text" => Ok(ReportFormat::Text),
            "csv" | "delimited" => Ok(ReportFormat::Csv),
            "markdown" | "md" | "markup" => Ok(ReportFormat::Markdown),
            other => Err(AnalyticsError::UnknownFormat(other.to_string())),
        }
    }
}

/// Percentage with one decimal; `None` renders as "n/a".
pub fn format_rate(rate: Option<f64>) -> String {
    let Some(r) = rate else { return "n/a".into() };
    let tenths = (r * 1000.0).round() as i64;
    format!("{}.{}%", tenths / 10, tenths % 10)
}

/// Four significant digits; tiny values switch to exponent form.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        return "0".into();
    }
    if p < 1e-4 {
        return format!("{p:.3e}");
    }
    let decimals = (3 - p.log10().floor() as i32).max(0) as usize;
    let s = format!("{p:.decimals$}");
    // Rounding can carry into a new digit (0.099996 -> 0.10000).
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|c| *c == '0').count();
    if digits > 4 && decimals > 0 {
        let d = decimals - 1;
        format!("{p:.d$}")
    } else {
        s
    }
}

fn format_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        let s = format!("{x:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTest {
    pub field: SizeField,
    pub result: Result<WelchResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderCutoff {
    pub provider_id: String,
    pub table: Option<CutoffTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub by_project_provider: SuccessTable,
    pub by_provider: SuccessTable,
    pub by_kind: SuccessTable,
    pub bins: Vec<BinnedRates>,
    pub size_tests: Vec<SizeTest>,
    pub cutoffs: Vec<ProviderCutoff>,
}

impl Report {
    /// Every table over one snapshot. Bins are omitted when nothing was
    /// judged; cutoff tables only exist for providers with a cutoff date.
    pub fn build(
        obs: &[Observation],
        edges: &EdgeSpec,
        cutoffs: &BTreeMap<String, NaiveDate>,
    ) -> Result<Report, AnalyticsError> {
        let by_project_provider = success_rate(obs, GroupBy::ProjectProvider)?;
        let mut bins = Vec::new();
        let mut size_tests = Vec::new();
        for field in [SizeField::FileLoc, SizeField::FunctionLoc] {
            if by_project_provider.total() > 0 {
                bins.push(bin_rates(obs, field, edges)?);
            }
            size_tests.push(SizeTest {
                field,
                result: size_test(obs, field)?,
            });
        }
        let mut out_cutoffs = Vec::new();
        for (provider, date) in cutoffs {
            let mine: Vec<Observation> = obs.iter().filter(|o| &o.provider_id == provider).cloned().collect();
            let table = match cutoff_split(&mine, *date) {
                Ok(t) => Some(t),
                Err(AnalyticsError::NoDatedRecords) => None,
                Err(e) => return Err(e),
            };
            out_cutoffs.push(ProviderCutoff {
                provider_id: provider.clone(),
                table,
            });
        }
        Ok(Report {
            by_project_provider,
            by_provider: success_rate(obs, GroupBy::Provider)?,
            by_kind: success_rate(obs, GroupBy::Kind)?,
            bins,
            size_tests,
            cutoffs: out_cutoffs,
        })
    }
}

/// Rows of one rendered table: a title, a header and string cells.
struct Table {
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    footer: Vec<String>,
}

fn success_table(title: &str, t: &SuccessTable) -> Table {
    Table {
        title: title.into(),
        header: ["group", "correct", "incorrect", "total", "success rate"].map(String::from).to_vec(),
        rows: t
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.key.clone(),
                    r.n_correct.to_string(),
                    r.n_incorrect.to_string(),
                    r.n().to_string(),
                    format_rate(r.rate()),
                ]
            })
            .collect(),
        footer: vec![
            format!("unreviewed: {}", t.unreviewed),
            format!("excluded for context overflow: {}", t.context_overflow_excluded),
        ],
    }
}

fn bins_table(b: &BinnedRates) -> Table {
    let last = b.bins.len().saturating_sub(1);
    Table {
        title: format!("Success rate by {}", b.field.label()),
        header: ["bin", "n", "correct", "success rate"].map(String::from).to_vec(),
        rows: b
            .bins
            .iter()
            .enumerate()
            .map(|(i, bin)| {
                let close = if i == last { "]" } else { ")" };
                vec![
                    format!("[{}, {}{close}", format_num(bin.lo), format_num(bin.hi)),
                    bin.n.to_string(),
                    bin.n_correct.to_string(),
                    format_rate(bin.rate()),
                ]
            })
            .collect(),
        footer: Vec::new(),
    }
}

fn welch_table(tests: &[SizeTest]) -> Table {
    Table {
        title: "Welch's t-test, correct vs incorrect".into(),
        header: ["measure", "n correct", "n incorrect", "mean correct", "mean incorrect", "t", "df", "p"]
            .map(String::from)
            .to_vec(),
        rows: tests
            .iter()
            .map(|s| match &s.result {
                Ok(w) => vec![
                    s.field.label().to_string(),
                    w.n_a.to_string(),
                    w.n_b.to_string(),
                    format!("{:.2}", w.mean_a),
                    format!("{:.2}", w.mean_b),
                    format!("{:.4}", w.t),
                    format!("{:.2}", w.df),
                    if w.degenerate { format!("{} (degenerate)", format_p(w.p)) } else { format_p(w.p) },
                ],
                Err(e) => {
                    let mut row = vec![s.field.label().to_string()];
                    row.extend(std::iter::repeat("n/a".to_string()).take(6));
                    row.push(format!("n/a ({e})"));
                    row
                }
            })
            .collect(),
        footer: Vec::new(),
    }
}

fn cutoff_table(c: &ProviderCutoff) -> Table {
    let cell = |t: &CutoffTable, w: usize, s: usize| match t.cells[w][s] {
        Some(c) => format!("{} ({} of {})", format_rate(Some(c.rate())), c.n_correct, c.n),
        None => "n/a".into(),
    };
    match &c.table {
        Some(t) => Table {
            title: format!("{}: success rate around cutoff {}", c.provider_id, t.cutoff),
            header: vec![
                "period".into(),
                format!("file LOC <= {}", format_num(t.median_file_loc)),
                format!("file LOC > {}", format_num(t.median_file_loc)),
            ],
            rows: vec![
                vec!["before".into(), cell(t, 0, 0), cell(t, 0, 1)],
                vec!["after".into(), cell(t, 1, 0), cell(t, 1, 1)],
            ],
            footer: Vec::new(),
        },
        None => Table {
            title: format!("{}: success rate around cutoff", c.provider_id),
            header: vec!["period".into(), "below median".into(), "above median".into()],
            rows: Vec::new(),
            footer: vec!["no judged records".into()],
        },
    }
}

fn tables(r: &Report) -> Vec<Table> {
    let mut out = vec![
        success_table("Success rate by project and provider", &r.by_project_provider),
        success_table("Success rate by provider", &r.by_provider),
        success_table("Success rate by commit kind", &r.by_kind),
    ];
    if r.bins.is_empty() {
        for f in [SizeField::FileLoc, SizeField::FunctionLoc] {
            out.push(Table {
                title: format!("Success rate by {}", f.label()),
                header: ["bin", "n", "correct", "success rate"].map(String::from).to_vec(),
                rows: Vec::new(),
                footer: Vec::new(),
            });
        }
    }
    out.extend(r.bins.iter().map(bins_table));
    out.push(welch_table(&r.size_tests));
    out.extend(r.cutoffs.iter().map(cutoff_table));
    out
}

fn render_text(ts: &[Table]) -> String {
    let mut s = String::new();
    for t in ts {
        let mut widths: Vec<usize> = t.header.iter().map(|h| h.chars().count()).collect();
        for row in &t.rows {
            for (i, c) in row.iter().enumerate() {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(s, "{}", t.title);
        let _ = writeln!(s, "{}", line(&t.header));
        let _ = writeln!(s, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        for row in &t.rows {
            let _ = writeln!(s, "{}", line(row));
        }
        for f in &t.footer {
            let _ = writeln!(s, "{f}");
        }
        s.push('\n');
    }
    s
}

fn render_markdown(ts: &[Table]) -> String {
    let esc = |c: &str| c.replace('|', "\\|");
    let mut s = String::new();
    for t in ts {
        let _ = writeln!(s, "## {}\n", t.title);
        let _ = writeln!(s, "| {} |", t.header.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(t.header.len()));
        for row in &t.rows {
            let _ = writeln!(s, "| {} |", row.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | "));
        }
        if !t.footer.is_empty() {
            s.push('\n');
            for f in &t.footer {
                let _ = writeln!(s, "{f}  ");
            }
        }
        s.push('\n');
    }
    s
}

fn csv_field(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Long form: one value per line so every table fits one header.
fn render_csv(ts: &[Table]) -> String {
    let mut s = String::from("table,row,column,value\n");
    for t in ts {
        for row in &t.rows {
            for (h, c) in t.header.iter().zip(row).skip(1) {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    csv_field(&t.title),
                    csv_field(&row[0]),
                    csv_field(h),
                    csv_field(c)
                );
            }
        }
        for f in &t.footer {
            if let Some((k, v)) = f.split_once(": ") {
                let _ = writeln!(s, "{},,{},{}", csv_field(&t.title), csv_field(k), csv_field(v));
            }
        }
    }
    s
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    let ts = tables(report);
    match format {
        ReportFormat::Text => render_text(&ts),
        ReportFormat::Csv => render_csv(&ts),
        ReportFormat::Markdown => render_markdown(&ts),
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::counts;
    use super::*;
    use crate::miner::CommitKind;

    #[test]
    fn rate_rendering() {
        assert_eq!(format_rate(Some(13.0 / 25.0)), "52.0%");
        assert_eq!(format_rate(Some(56.0 / 187.0)), "29.9%");
        assert_eq!(format_rate(Some(4.0 / 23.0)), "17.4%");
        assert_eq!(format_rate(Some(3.0 / 22.0)), "13.6%");
        assert_eq!(format_rate(Some(2.0 / 14.0)), "14.3%");
        assert_eq!(format_rate(Some(1.0 / 16.0)), "6.3%");
        assert_eq!(format_rate(Some(12.0 / 20.0)), "60.0%");
        assert_eq!(format_rate(Some(0.0)), "0.0%");
        assert_eq!(format_rate(Some(1.0)), "100.0%");
        assert_eq!(format_rate(None), "n/a");
    }

    #[test]
    fn p_rendering() {
        assert_eq!(format_p(0.287_864_6), "0.2879");
        assert_eq!(format_p(1.0), "1.000");
        assert_eq!(format_p(0.012_345_6), "0.01235");
        assert_eq!(format_p(0.099_999_9), "0.1000");
        assert_eq!(format_p(3.2e-7), "3.200e-7");
    }

    #[test]
    fn table_shaped_input_renders() {
        let mut all = counts(CommitKind::FeatureEnhancement, 13, 12);
        all.extend(counts(CommitKind::BugFix, 56, 131));
        let r = Report::build(&all, &EdgeSpec::Quartiles, &BTreeMap::new()).unwrap();
        for f in [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Markdown] {
            let out = render_report(&r, f);
            assert!(out.contains("52.0%"), "{f:?}");
            assert!(out.contains("29.9%"), "{f:?}");
            assert_eq!(out, render_report(&r, f));
            assert!(!out.contains('\r'));
        }
    }

    #[test]
    fn empty_input_gives_headers_only() {
        let r = Report::build(&[], &EdgeSpec::Quartiles, &BTreeMap::new()).unwrap();
        let text = render_report(&r, ReportFormat::Text);
        assert!(text.contains("Success rate by commit kind"));
        assert!(!text.contains('%'));
        assert_eq!(render_report(&r, ReportFormat::Csv).lines().next(), Some("table,row,column,value"));
        assert!(matches!("pdf".parse::<ReportFormat>(), Err(AnalyticsError::UnknownFormat(_))));
    }
}
