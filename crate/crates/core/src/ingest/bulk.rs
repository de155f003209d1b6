use serde::{Deserialize, Serialize};

use super::{canonicalize_url, IngestError};

/// One row of a bulk URL upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BulkRow {
    pub url: String,
    pub domain: Option<String>,
}

/// Parse a CSV of article URLs. A header row naming a `url` column is
/// required; a `domain` column is optional. Blank rows are skipped.
pub fn parse_url_csv(text: &str) -> Result<Vec<BulkRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IngestError::Csv(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let url_col = col("url").ok_or_else(|| IngestError::Csv("header row must contain a `url` column".into()))?;
    let domain_col = col("domain");

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let raw = record.get(url_col).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        let url = canonicalize_url(raw).map_err(|_| IngestError::Csv(format!("row {}: malformed URL {raw:?}", i + 2)))?;
        let domain = domain_col.and_then(|c| record.get(c)).filter(|d| !d.is_empty()).map(str::to_string);
        rows.push(BulkRow { url, domain });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows_with_optional_domain() {
        let rows = parse_url_csv("URL,Domain\nhttps://A.com/x/,virtual reality\n\nhttps://b.com/y,\n").unwrap();
        assert_eq!(
            rows,
            vec![
                BulkRow { url: "https://a.com/x".into(), domain: Some("virtual reality".into()) },
                BulkRow { url: "https://b.com/y".into(), domain: None },
            ]
        );
        let rows = parse_url_csv("url\nhttps://c.com/z\n").unwrap();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn rejects_missing_header_and_bad_urls() {
        assert!(matches!(parse_url_csv("link,domain\nhttps://a.com,x\n"), Err(IngestError::Csv(_))));
        assert!(matches!(parse_url_csv("https://a.com/x\n"), Err(IngestError::Csv(_))));
        let err = parse_url_csv("url\nhttps://ok.com\nnot a url\n").unwrap_err();
        assert!(err.to_string().contains("row 3"));
    }
}
