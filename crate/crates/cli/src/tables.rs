//! Markdown and CSV renderings of a report.

use mph_core::classical::Method;
use mph_core::mph::{ClassicalComparison, Comparisons, SeriesResult};
use mph_core::{Family, MphReport};

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        out.push_str(&line(&self.headers));
        out.push_str(&line(&vec!["---".to_string(); self.headers.len()]));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&self.headers)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// How numbers are written into cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    /// Two decimals.
    Markdown,
    /// Shortest round-trip representation.
    Csv,
}

impl Style {
    fn num(self, v: f64) -> String {
        match self {
            Style::Markdown => format!("{v:.2}"),
            Style::Csv => v.to_string(),
        }
    }

    fn pct(self, v: i64) -> String {
        match self {
            Style::Markdown => format!("{v}%"),
            Style::Csv => v.to_string(),
        }
    }

    fn opt_num(self, v: Option<f64>) -> String {
        v.map(|v| self.num(v)).unwrap_or_else(|| "-".into())
    }
}

fn family_cells(result: &SeriesResult, style: Style) -> Vec<String> {
    Family::ALL
        .iter()
        .map(|&f| match result.score(f) {
            Some(s) => style.num(s.mae),
            None if result.failures.iter().any(|x| x.family == f) => "failed".into(),
            None => "-".into(),
        })
        .collect()
}

fn selection_cells(result: &SeriesResult, style: Style) -> Vec<String> {
    vec![
        result.selection.family.label().to_string(),
        style.num(result.selection.range),
        style.num(result.selection.min_mae),
    ]
}

const SCORE_HEADERS: [&str; 7] = ["MLP", "RF", "GB", "XGB", "Best", "Range", "Min MAE"];

/// Child scores, one row per series, numbered from 1.
pub fn children_table(children: &[SeriesResult], style: Style) -> Table {
    let mut headers = vec!["Series"];
    headers.extend(SCORE_HEADERS);
    let mut t = Table::new(&headers);
    for c in children {
        let mut row = vec![(c.series.index + 1).to_string()];
        row.extend(family_cells(c, style));
        row.extend(selection_cells(c, style));
        t.rows.push(row);
    }
    t
}

/// Single-row score table for the parent.
pub fn parent_table(result: &SeriesResult, style: Style) -> Table {
    let mut t = Table::new(&SCORE_HEADERS);
    let mut row = family_cells(result, style);
    row.extend(selection_cells(result, style));
    t.rows.push(row);
    t
}

pub fn top_down_table(c: &Comparisons, style: Style) -> Table {
    let mut t = Table::new(&["Top-down", "MPH", "% of Improvement"]);
    t.rows.push(vec![
        style.num(c.parent.top_down_mae),
        style.num(c.parent.mph_mae),
        style.pct(c.parent.improvement_vs_top_down),
    ]);
    t
}

pub fn bottom_up_table(c: &Comparisons, style: Style) -> Table {
    let mut t = Table::new(&["Bottom-up", "MPH", "% of Improvement"]);
    t.rows.push(vec![
        style.num(c.parent.bottom_up_mae),
        style.num(c.parent.mph_mae),
        style.pct(c.parent.improvement_vs_bottom_up),
    ]);
    t
}

pub fn ml_models_table(c: &Comparisons, style: Style) -> Table {
    let mut t = Table::new(&["Machine learning model", "MAE", "MAE from MPH", "Improvement"]);
    for m in &c.ml_models {
        t.rows.push(vec![
            m.family.label().to_string(),
            style.num(m.mae),
            style.num(m.mph_mae),
            style.pct(m.improvement),
        ]);
    }
    t
}

pub fn child_proration_table(c: &Comparisons, style: Style) -> Table {
    let mut t = Table::new(&["Series", "Phase I MAE", "Top-down (AHP) MAE", "Top-down (PHA) MAE"]);
    for d in &c.child_top_down {
        t.rows.push(vec![
            (d.series.index + 1).to_string(),
            style.num(d.phase1_mae),
            style.opt_num(d.ahp_mae),
            style.opt_num(d.pha_mae),
        ]);
    }
    t
}

/// All parent-level comparisons in one long table, for CSV export.
pub fn comparisons_csv_table(c: &Comparisons) -> Table {
    let s = Style::Csv;
    let mut t = Table::new(&["baseline", "baseline_mae", "mph_mae", "improvement_pct"]);
    t.rows.push(vec![
        "Top-down".into(),
        s.num(c.parent.top_down_mae),
        s.num(c.parent.mph_mae),
        s.pct(c.parent.improvement_vs_top_down),
    ]);
    t.rows.push(vec![
        "Bottom-up".into(),
        s.num(c.parent.bottom_up_mae),
        s.num(c.parent.mph_mae),
        s.pct(c.parent.improvement_vs_bottom_up),
    ]);
    for m in &c.ml_models {
        t.rows.push(vec![m.family.label().into(), s.num(m.mae), s.num(m.mph_mae), s.pct(m.improvement)]);
    }
    t
}

/// Which MPH phase a classical table is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    One,
    Two,
}

pub fn classical_table(c: &ClassicalComparison, phase: Phase, style: Style) -> Table {
    let header = match phase {
        Phase::One => "MAE from MPH (Phase I)",
        Phase::Two => "MAE from MPH (Phase II)",
    };
    let mut t = Table::new(&["Forecasting method", "MAE", header, "Improvement"]);
    for method in Method::ALL {
        let Some(r) = c.row(method) else { continue };
        let (mph, imp) = match phase {
            Phase::One => (r.phase1_mae, r.phase1_improvement),
            Phase::Two => (r.phase2_mae, r.phase2_improvement),
        };
        t.rows.push(vec![
            method.label().to_string(),
            style.num(r.mae),
            style.num(mph),
            imp.map(|i| style.pct(i)).unwrap_or_else(|| "-".into()),
        ]);
    }
    t
}

pub fn classical_csv_table(c: &ClassicalComparison) -> Table {
    let s = Style::Csv;
    let mut t = Table::new(&[
        "method",
        "mae",
        "phase1_mae",
        "phase1_improvement_pct",
        "phase2_mae",
        "phase2_improvement_pct",
    ]);
    let opt = |v: Option<i64>| v.map(|i| i.to_string()).unwrap_or_default();
    for r in &c.rows {
        t.rows.push(vec![
            r.method.label().to_string(),
            s.num(r.mae),
            s.num(r.phase1_mae),
            opt(r.phase1_improvement),
            s.num(r.phase2_mae),
            opt(r.phase2_improvement),
        ]);
    }
    t
}

fn caption(report: &MphReport, title: &str) -> String {
    format!(
        "## {title}\n\n{} predictions, seed {}, k = {}, {} settings per family.\n\n",
        report.mode.label(),
        report.seed,
        report.k,
        report.n_settings
    )
}

/// One rendered artifact: a base file name and its Markdown and CSV bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: &'static str,
    pub markdown: String,
    pub csv: String,
}

/// Renders every table artifact of a report.
pub fn render(report: &MphReport) -> Result<Vec<Artifact>, csv::Error> {
    let md = Style::Markdown;
    let mut out = vec![
        Artifact {
            name: "phase1_children",
            markdown: caption(report, "Phase I child-level results")
                + &children_table(&report.phase1_children, md).to_markdown(),
            csv: children_table(&report.phase1_children, Style::Csv).to_csv()?,
        },
        Artifact {
            name: "phase1_parent",
            markdown: caption(report, "Phase I parent-level results")
                + &parent_table(&report.phase1_parent, md).to_markdown(),
            csv: parent_table(&report.phase1_parent, Style::Csv).to_csv()?,
        },
        Artifact {
            name: "phase2",
            markdown: caption(report, "Phase II results") + &parent_table(&report.phase2_parent, md).to_markdown(),
            csv: parent_table(&report.phase2_parent, Style::Csv).to_csv()?,
        },
    ];

    let c = &report.comparisons;
    let mut cmp = caption(report, "Top-down vs MPH") + &top_down_table(c, md).to_markdown();
    cmp += "\n## Bottom-up vs MPH\n\n";
    cmp += &bottom_up_table(c, md).to_markdown();
    cmp += "\n## Machine learning models vs MPH\n\n";
    cmp += &ml_models_table(c, md).to_markdown();
    if !c.child_top_down.is_empty() {
        cmp += "\n## Child-level top-down proration\n\n";
        cmp += &child_proration_table(c, md).to_markdown();
    }
    for note in c.notes.iter().chain(&report.warnings) {
        cmp += &format!("\nNote: {note}\n");
    }
    out.push(Artifact {
        name: "comparisons",
        markdown: cmp,
        csv: comparisons_csv_table(c).to_csv()?,
    });

    if let Some(cl) = &report.classical {
        let mut text = caption(report, "Classical methods vs MPH (Phase I)")
            + &classical_table(cl, Phase::One, md).to_markdown();
        text += "\n## Classical methods vs MPH (Phase II)\n\n";
        text += &classical_table(cl, Phase::Two, md).to_markdown();
        text += &format!("\nProtocol: {}.\n", cl.protocol);
        out.push(Artifact {
            name: "classical_comparison",
            markdown: text,
            csv: classical_csv_table(cl).to_csv()?,
        });
    }
    Ok(out)
}

/// Side-by-side summary of several reports, one column per report.
pub fn compare_table(reports: &[(String, MphReport)]) -> Table {
    let md = Style::Markdown;
    let mut headers = vec!["Metric".to_string()];
    headers.extend(reports.iter().map(|(name, _)| name.clone()));
    let mut t = Table {
        headers,
        rows: Vec::new(),
    };
    let mut row = |label: &str, f: &dyn Fn(&MphReport) -> String| {
        let mut cells = vec![label.to_string()];
        cells.extend(reports.iter().map(|(_, r)| f(r)));
        t.rows.push(cells);
    };
    row("Mode", &|r| r.mode.label().to_string());
    row("Seed", &|r| r.seed.to_string());
    row("Top-down MAE", &|r| md.num(r.comparisons.parent.top_down_mae));
    row("Bottom-up MAE", &|r| md.num(r.comparisons.parent.bottom_up_mae));
    row("MPH MAE", &|r| md.num(r.comparisons.parent.mph_mae));
    row("Improvement vs top-down", &|r| md.pct(r.comparisons.parent.improvement_vs_top_down));
    row("Improvement vs bottom-up", &|r| md.pct(r.comparisons.parent.improvement_vs_bottom_up));
    row("Phase II winner", &|r| r.phase2_parent.selection.family.label().to_string());
    for f in Family::ALL {
        row(&format!("Phase I parent {f}"), &move |r| {
            r.phase1_parent.score(f).map(|s| md.num(s.mae)).unwrap_or_else(|| "-".into())
        });
        row(&format!("Phase II {f}"), &move |r| {
            r.phase2_parent.score(f).map(|s| md.num(s.mae)).unwrap_or_else(|| "-".into())
        });
    }
    t
}
