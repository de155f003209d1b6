//! Readability-style extraction: pick the element whose direct paragraph
//! children carry the most text and use those paragraphs as the body.

use chrono::{DateTime, NaiveDate, Utc};
use scraper::{ElementRef, Html, Selector};

use super::IngestError;
use crate::model::{count_words, Article};

/// Bodies shorter than this are treated as boilerplate.
pub const MIN_BODY_WORDS: usize = 50;

const SKIPPED_ANCESTORS: &[&str] = &["nav", "footer", "aside", "header", "form", "script", "style", "noscript"];

const DATE_SELECTORS: &[(&str, &str)] = &[
    (r#"meta[property="article:published_time"]"#, "content"),
    (r#"meta[name="article:published_time"]"#, "content"),
    (r#"meta[itemprop="datePublished"]"#, "content"),
    (r#"meta[name="pubdate"]"#, "content"),
    (r#"meta[name="publish-date"]"#, "content"),
    (r#"meta[name="date"]"#, "content"),
    (r#"meta[name="dc.date"]"#, "content"),
    ("time[datetime]", "datetime"),
];

fn sel(css: &str) -> Selector {
    Selector::parse(css).expect("static selector")
}

pub(crate) fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn element_text(el: ElementRef<'_>) -> String {
    collapse_ws(&el.text().collect::<String>())
}

fn extract_title(doc: &Html) -> Option<String> {
    let og = doc
        .select(&sel(r#"meta[property="og:title"]"#))
        .filter_map(|m| m.value().attr("content"))
        .map(collapse_ws)
        .find(|t| !t.is_empty());
    og.or_else(|| doc.select(&sel("title")).map(element_text).find(|t| !t.is_empty()))
        .or_else(|| doc.select(&sel("h1")).map(element_text).find(|t| !t.is_empty()))
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.date_naive());
    }
    raw.get(..10).and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
}

fn extract_date(doc: &Html) -> Option<NaiveDate> {
    DATE_SELECTORS.iter().find_map(|(css, attr)| {
        doc.select(&sel(css))
            .filter_map(|el| el.value().attr(attr))
            .find_map(parse_date)
    })
}

fn in_skipped_region(el: ElementRef<'_>) -> bool {
    el.ancestors()
        .filter_map(ElementRef::wrap)
        .any(|a| SKIPPED_ANCESTORS.contains(&a.value().name()))
}

/// Paragraph texts of the best container under `root`, in document order.
fn best_container_paragraphs(root: ElementRef<'_>) -> Vec<String> {
    // (container, total chars, paragraphs), in order of first appearance
    let mut containers = Vec::new();
    for p in root.select(&sel("p")) {
        if in_skipped_region(p) {
            continue;
        }
        let text = element_text(p);
        if text.is_empty() {
            continue;
        }
        let Some(parent) = p.parent().map(|n| n.id()) else { continue };
        match containers.iter_mut().find(|(id, _, _): &&mut (_, usize, Vec<String>)| *id == parent) {
            Some(entry) => {
                entry.1 += text.chars().count();
                entry.2.push(text);
            }
            None => containers.push((parent, text.chars().count(), vec![text])),
        }
    }
    let mut best: Option<(usize, Vec<String>)> = None;
    for (_, chars, paras) in containers {
        if best.as_ref().is_none_or(|(b, _)| chars > *b) {
            best = Some((chars, paras));
        }
    }
    best.map(|(_, p)| p).unwrap_or_default()
}

/// Turn a downloaded page into an [`Article`].
///
/// `content_selector` restricts the paragraph search to the first element
/// matching it, for sources whose layout defeats the generic heuristic.
pub fn extract_article_with(
    html: &[u8],
    url: &str,
    source: &str,
    fetched_at: DateTime<Utc>,
    content_selector: Option<&str>,
) -> Result<Article, IngestError> {
    let text = String::from_utf8_lossy(html);
    let doc = Html::parse_document(&text);

    let title = extract_title(&doc).ok_or(IngestError::NoTitle)?;

    let override_root = match content_selector {
        Some(css) => {
            let s = Selector::parse(css).map_err(|e| IngestError::InvalidSource(format!("content_selector {css:?}: {e}")))?;
            doc.select(&s).next()
        }
        None => None,
    };
    let paragraphs = best_container_paragraphs(override_root.unwrap_or_else(|| doc.root_element()));
    let body = paragraphs.join("\n\n");
    let words = count_words(&body);
    if words < MIN_BODY_WORDS {
        return Err(IngestError::NoContent { words });
    }

    Ok(Article::new(url, source, title, body, extract_date(&doc), fetched_at))
}

pub fn extract_article(html: &[u8], url: &str, source: &str, fetched_at: DateTime<Utc>) -> Result<Article, IngestError> {
    extract_article_with(html, url, source, fetched_at, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize, w: &str) -> String {
        vec![w; n].join(" ")
    }

    fn now() -> DateTime<Utc> {
        "2023-08-15T00:00:00Z".parse().unwrap()
    }

    #[test]
    fn extracts_h1_and_paragraphs_of_largest_container() {
        let p1 = words(20, "alpha");
        let p2 = words(20, "beta");
        let p3 = words(20, "gamma");
        let html = format!(
            "<html><head></head><body>\
             <nav><p>Home About Contact Subscribe</p></nav>\
             <h1>T</h1>\
             <div class='teaser'><p>short teaser text</p></div>\
             <article><p>{p1}</p>\n<p>  {p2}\n </p><p>{p3}</p></article>\
             <footer><p>{}</p></footer></body></html>",
            words(80, "legal")
        );
        let a = extract_article(html.as_bytes(), "https://a.com/t", "A", now()).unwrap();
        assert_eq!(a.title, "T");
        assert_eq!(a.body, format!("{p1}\n\n{p2}\n\n{p3}"));
        assert_eq!(a.word_count, 60);
        assert_eq!(a.source, "A");
    }

    #[test]
    fn title_precedence_and_date() {
        let body = words(60, "word");
        let html = format!(
            r#"<html><head><title>Page title | Site</title>
            <meta property="og:title" content="  OG   title ">
            <meta property="article:published_time" content="2021-07-09T10:00:00Z"></head>
            <body><h1>Heading</h1><div><p>{body}</p></div></body></html>"#
        );
        let a = extract_article(html.as_bytes(), "https://a.com/t", "A", now()).unwrap();
        assert_eq!(a.title, "OG title");
        assert_eq!(a.published_at, NaiveDate::from_ymd_opt(2021, 7, 9));

        let html = format!("<html><head><title>Only title</title></head><body><div><p>{body}</p></div></body></html>");
        let a = extract_article(html.as_bytes(), "https://a.com/t", "A", now()).unwrap();
        assert_eq!(a.title, "Only title");
        assert_eq!(a.published_at, None);
    }

    #[test]
    fn short_body_is_no_content() {
        let html = "<html><head><title>x</title></head><body><p>one two three four five six seven eight nine ten</p></body></html>";
        assert!(matches!(
            extract_article(html.as_bytes(), "https://a.com/t", "A", now()),
            Err(IngestError::NoContent { words: 10 })
        ));
    }

    #[test]
    fn missing_title_is_no_title() {
        let html = format!("<html><body><p>{}</p></body></html>", words(80, "text"));
        assert!(matches!(extract_article(html.as_bytes(), "https://a.com/t", "A", now()), Err(IngestError::NoTitle)));
    }

    #[test]
    fn invalid_utf8_is_decoded_lossily() {
        let mut html = b"<html><head><title>Caf\xe9</title></head><body><div><p>".to_vec();
        html.extend(words(60, "ok").as_bytes());
        html.extend(b"</p></div></body></html>");
        let a = extract_article(&html, "https://a.com/t", "A", now()).unwrap();
        assert!(a.title.starts_with("Caf"));
    }

    #[test]
    fn content_selector_override() {
        let html = format!(
            "<html><head><title>x</title></head><body><div id='main'><p>{}</p></div><div><p>{}</p></div></body></html>",
            words(55, "chosen"),
            words(200, "other")
        );
        let a = extract_article_with(html.as_bytes(), "https://a.com/t", "A", now(), Some("#main")).unwrap();
        assert!(a.body.starts_with("chosen"));
        let a = extract_article(html.as_bytes(), "https://a.com/t", "A", now()).unwrap();
        assert!(a.body.starts_with("other"));
    }
}
