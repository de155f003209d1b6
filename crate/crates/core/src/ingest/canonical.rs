use url::Url;

use super::IngestError;

/// Query keys dropped during canonicalization. Keys starting with `utm_` are
/// dropped as well.
pub const TRACKING_PARAMS: &[&str] = &["fbclid", "gclid"];

fn is_tracking_key(key: &str) -> bool {
    let key = key.to_ascii_lowercase();
    key.starts_with("utm_") || TRACKING_PARAMS.contains(&key.as_str())
}

/// Normalize an absolute http(s) URL so that trivially different spellings of
/// the same page compare equal.
///
/// Scheme and host are lowercased, default ports and the fragment removed,
/// tracking parameters stripped, the remaining query pairs sorted, and a
/// trailing slash dropped from non-root paths.
pub fn canonicalize_url(raw: &str) -> Result<String, IngestError> {
    let malformed = || IngestError::MalformedUrl(raw.to_string());
    let mut url = Url::parse(raw.trim()).map_err(|_| malformed())?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none_or(str::is_empty) {
        return Err(malformed());
    }
    url.set_fragment(None);

    let path = url.path().to_string();
    let trimmed = path.trim_end_matches('/');
    if trimmed.len() < path.len() {
        url.set_path(if trimmed.is_empty() { "/" } else { trimmed });
    }

    let query = url.query().map(str::to_string);
    if let Some(query) = query {
        let mut pairs: Vec<&str> = query
            .split('&')
            .filter(|p| !p.is_empty())
            .filter(|p| !is_tracking_key(p.split('=').next().unwrap_or("")))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        if pairs.is_empty() {
            url.set_query(None);
        } else {
            url.set_query(Some(&pairs.join("&")));
        }
    }
    Ok(url.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_ports_tracking_and_slash() {
        assert_eq!(canonicalize_url("HTTPS://A.com:443/x/?utm_source=t").unwrap(), "https://a.com/x");
        assert_eq!(canonicalize_url("https://a.com/x#sec2").unwrap(), "https://a.com/x");
        assert_eq!(canonicalize_url("http://a.com:80/").unwrap(), "http://a.com/");
        assert_eq!(canonicalize_url("http://a.com:8080/p").unwrap(), "http://a.com:8080/p");
        assert_eq!(
            canonicalize_url("https://a.com/p?z=1&fbclid=abc&a=2&GCLID=x&utm_medium=m").unwrap(),
            "https://a.com/p?a=2&z=1"
        );
    }

    #[test]
    fn rejects_non_urls() {
        assert!(matches!(canonicalize_url("not a url"), Err(IngestError::MalformedUrl(_))));
        assert!(canonicalize_url("ftp://a.com/x").is_err());
        assert!(canonicalize_url("mailto:x@y.z").is_err());
        assert!(canonicalize_url("").is_err());
    }

    proptest! {
        #[test]
        fn idempotent(
            host in "[a-zA-Z]{1,8}\\.(com|org|net)",
            segs in proptest::collection::vec("[a-zA-Z0-9_%-]{0,6}", 0..4),
            slash in any::<bool>(),
            params in proptest::collection::vec(("(utm_x|fbclid|[a-z]{1,3})", "[a-zA-Z0-9%+]{0,4}"), 0..4),
            frag in proptest::option::of("[a-z0-9]{0,5}"),
            port in proptest::option::of(prop_oneof![Just(80u16), Just(443u16), Just(8080u16)]),
        ) {
            let mut raw = format!("https://{host}");
            if let Some(p) = port { raw.push_str(&format!(":{p}")); }
            raw.push('/');
            raw.push_str(&segs.join("/"));
            if slash { raw.push('/'); }
            if !params.is_empty() {
                raw.push('?');
                raw.push_str(&params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("&"));
            }
            if let Some(f) = frag { raw.push('#'); raw.push_str(&f); }
            let once = canonicalize_url(&raw).unwrap();
            let twice = canonicalize_url(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(!once.contains('#'));
            prop_assert!(!once.contains("utm_") && !once.contains("fbclid"));
        }
    }
}
