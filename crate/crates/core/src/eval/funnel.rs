use super::EvalError;
use crate::model::{percent, FunnelCounts, PipelineReport, SourceFunnel};

const HEADER: [&str; 4] = ["News Source", "Retrieved", "Title Filter", "Content Filter"];
const TOTAL_ROW: &str = "Total";

fn cell(count: u64, retrieved: u64) -> String {
    format!("{count} ({}%)", percent(count, retrieved))
}

fn row(name: &str, c: &FunnelCounts) -> [String; 4] {
    [
        name.to_string(),
        c.retrieved.to_string(),
        cell(c.after_title_filter, c.retrieved),
        cell(c.after_content_filter, c.retrieved),
    ]
}

/// Render a report as a source-by-stage CSV table with a trailing Total row.
/// Percentages are relative to each row's retrieved count.
pub fn render_funnel_table(report: &PipelineReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for r in &report.per_source {
        w.write_record(row(&r.source, &r.counts)).expect("in-memory write");
    }
    w.write_record(row(TOTAL_ROW, &report.totals())).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 CSV")
}

fn parse_count(raw: &str) -> Result<u64, EvalError> {
    let number = raw.split_whitespace().next().unwrap_or("");
    number.parse().map_err(|_| EvalError::Csv(format!("bad count cell {raw:?}")))
}

/// Inverse of [`render_funnel_table`] for the counts it shows
/// (cards emitted is not part of the table and comes back as 0).
pub fn parse_funnel_table(text: &str) -> Result<PipelineReport, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| EvalError::Csv(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(EvalError::Csv(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    let mut total = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
        let counts = FunnelCounts {
            retrieved: parse_count(&rec[1])?,
            after_title_filter: parse_count(&rec[2])?,
            after_content_filter: parse_count(&rec[3])?,
            cards_emitted: 0,
        };
        if &rec[0] == TOTAL_ROW {
            total = Some(counts);
        } else {
            rows.push(SourceFunnel { source: rec[0].to_string(), counts });
        }
    }
    let total = total.ok_or_else(|| EvalError::Csv("missing Total row".into()))?;
    Ok(PipelineReport::with_totals("", total, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(r: u64, t: u64, c: u64) -> FunnelCounts {
        FunnelCounts { retrieved: r, after_title_filter: t, after_content_filter: c, cards_emitted: 0 }
    }

    #[test]
    fn renders_rows_and_total() {
        let report = PipelineReport::with_totals(
            "all",
            counts(42405, 26628, 2616),
            vec![SourceFunnel { source: "MIT Tech Review".into(), counts: counts(3433, 1957, 519) }],
        );
        let csv = render_funnel_table(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "News Source,Retrieved,Title Filter,Content Filter");
        assert_eq!(lines[1], "MIT Tech Review,3433,1957 (57%),519 (15%)");
        assert_eq!(lines[2], "Total,42405,26628 (63%),2616 (6%)");
    }

    #[test]
    fn zero_retrieved_renders_zero_percent() {
        let report = PipelineReport::from_sources("x", vec![SourceFunnel { source: "Empty".into(), counts: counts(0, 0, 0) }]);
        let csv = render_funnel_table(&report);
        assert!(csv.contains("Empty,0,0 (0%),0 (0%)"));
    }

    #[test]
    fn round_trips_counts() {
        let report = PipelineReport::from_sources(
            "x",
            vec![
                SourceFunnel { source: "A, Inc.".into(), counts: counts(10, 7, 3) },
                SourceFunnel { source: "B".into(), counts: counts(5, 5, 0) },
            ],
        );
        let back = parse_funnel_table(&render_funnel_table(&report)).unwrap();
        assert_eq!(back.per_source, report.per_source);
        assert_eq!(back.totals(), FunnelCounts { cards_emitted: 0, ..report.totals() });
        assert!(parse_funnel_table("a,b\n1,2\n").is_err());
    }
}
