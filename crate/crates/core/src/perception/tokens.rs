//! Text-space tokens and their grammar. See docs/tokens.md.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PerceptionError;

/// Separator between block id and count in a visual token.
pub const COUNT_SEP: char = '×';

/// One aggregate of visible blocks: `count` blocks of `block` in distance band `band`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VisualToken {
    pub band: u8,
    pub block: String,
    pub count: u32,
}

impl fmt::Display for VisualToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{COUNT_SEP}{}@{}", self.block, self.count, self.band)
    }
}

impl FromStr for VisualToken {
    type Err = PerceptionError;

    /// Accepts the canonical `×` separator and an ASCII `x` fallback.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PerceptionError::BadToken(s.to_string());
        let (head, band) = s.rsplit_once('@').ok_or_else(bad)?;
        let band: u8 = band.parse().map_err(|_| bad())?;
        let (block, count) = head
            .rsplit_once(COUNT_SEP)
            .or_else(|| head.rsplit_once('x'))
            .ok_or_else(bad)?;
        if !is_ident(block) || count.is_empty() || !count.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let count: u32 = count.parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        Ok(VisualToken { band, block: block.to_string(), count })
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// `key=value` token used by the state and task sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub key: String,
    pub value: String,
}

impl FromStr for KeyValue {
    type Err = PerceptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (k, v) = s.split_once('=').ok_or_else(|| PerceptionError::BadToken(s.to_string()))?;
        if !is_ident(k) || v.is_empty() || v.contains(char::is_whitespace) {
            return Err(PerceptionError::BadToken(s.to_string()));
        }
        Ok(KeyValue { key: k.to_string(), value: v.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visual_round_trip() {
        let t = VisualToken { band: 2, block: "diamond_ore".into(), count: 1 };
        assert_eq!(t.to_string(), "diamond_ore×1@2");
        assert_eq!("diamond_ore×1@2".parse::<VisualToken>().unwrap(), t);
        assert_eq!("diamond_orex1@2".parse::<VisualToken>().unwrap(), t);
        for bad in ["", "log", "log×@0", "log×0@0", "log×2@", "Log×2@0", "log×2@x"] {
            assert!(bad.parse::<VisualToken>().is_err(), "{bad}");
        }
    }

    #[test]
    fn key_value() {
        let kv: KeyValue = "goal=possess:log:3".parse().unwrap();
        assert_eq!((kv.key.as_str(), kv.value.as_str()), ("goal", "possess:log:3"));
        assert!("noequals".parse::<KeyValue>().is_err());
        assert!("a=".parse::<KeyValue>().is_err());
    }
}
