use super::EvalError;

/// Accepts 1/0, true/false, yes/no, relevant/irrelevant (any case).
pub fn parse_label(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "relevant" | "y" => Some(true),
        "0" | "false" | "no" | "irrelevant" | "n" => Some(false),
        _ => None,
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, EvalError> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| EvalError::Csv(format!("missing `{name}` column")))
}

/// `text,label` rows with binary labels.
pub fn read_labeled_csv(text: &str) -> Result<Vec<(String, bool)>, EvalError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| EvalError::Csv(e.to_string()))?.clone();
    let (t, l) = (column(&headers, "text")?, column(&headers, "label")?);
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
            let label = rec.get(l).unwrap_or("");
            let label = parse_label(label).ok_or_else(|| EvalError::Csv(format!("row {}: bad label {label:?}", i + 2)))?;
            Ok((rec.get(t).unwrap_or("").to_string(), label))
        })
        .collect()
}

/// `text,label_a,label_b` rows with arbitrary string labels.
pub fn read_annotation_csv(text: &str) -> Result<Vec<(String, String, String)>, EvalError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(|e| EvalError::Csv(e.to_string()))?.clone();
    let (t, a, b) = (column(&headers, "text")?, column(&headers, "label_a")?, column(&headers, "label_b")?);
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
            let get = |i| rec.get(i).unwrap_or("").to_string();
            Ok((get(t), get(a), get(b)))
        })
        .collect()
}
