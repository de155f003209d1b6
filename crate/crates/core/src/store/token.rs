use std::fmt;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::RngCore;
use serde::{Deserialize, Serialize};

const TOKEN_BYTES: usize = 16;
/// Length of the unpadded URL-safe base64 form of 16 bytes.
pub const TOKEN_LEN: usize = 22;

/// Opaque per-browser identifier for bookmarks and dismissals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClientToken(String);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("malformed client token")]
pub struct InvalidToken;

impl ClientToken {
    pub fn generate() -> Self {
        let mut bytes = [0u8; TOKEN_BYTES];
        rand::rng().fill_bytes(&mut bytes);
        ClientToken(URL_SAFE_NO_PAD.encode(bytes))
    }

    pub fn parse(raw: &str) -> Result<Self, InvalidToken> {
        let raw = raw.trim();
        match URL_SAFE_NO_PAD.decode(raw) {
            Ok(bytes) if bytes.len() == TOKEN_BYTES && raw.len() == TOKEN_LEN => Ok(ClientToken(raw.to_string())),
            _ => Err(InvalidToken),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClientToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for ClientToken {
    type Error = InvalidToken;
    fn try_from(s: String) -> Result<Self, InvalidToken> {
        ClientToken::parse(&s)
    }
}

impl From<ClientToken> for String {
    fn from(t: ClientToken) -> String {
        t.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn generated_tokens_parse_and_differ() {
        let a = ClientToken::generate();
        let b = ClientToken::generate();
        assert_ne!(a, b);
        assert_eq!(a.as_str().len(), TOKEN_LEN);
        assert_eq!(ClientToken::parse(a.as_str()), Ok(a.clone()));
        assert!(a.as_str().chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'));
    }

    #[test]
    fn rejects_malformed() {
        let long = "A".repeat(23);
        for bad in ["", "short", "!!!!!!!!!!!!!!!!!!!!!!", long.as_str()] {
            assert_eq!(ClientToken::parse(bad), Err(InvalidToken), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn any_16_bytes_round_trip(bytes in proptest::array::uniform16(any::<u8>())) {
            let s = URL_SAFE_NO_PAD.encode(bytes);
            let t = ClientToken::parse(&s).unwrap();
            prop_assert_eq!(t.as_str(), s.as_str());
        }
    }
}
