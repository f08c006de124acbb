//! Bidirectional item-id/token-id map with the reserved tokens.
//!
//! Token layout: PAD = 0, real items 1..=|V|, [mask] = |V|+1, [UID] = |V|+2.
//! The reserved ids therefore never collide with item ids.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};

use super::DataError;

pub type TokenId = usize;

pub const PAD_TOKEN: TokenId = 0;

pub fn mask_token_for(num_items: usize) -> TokenId {
    num_items + 1
}

pub fn uid_token_for(num_items: usize) -> TokenId {
    num_items + 2
}

/// Number of embedding rows a model needs for `num_items` real items.
pub fn table_rows_for(num_items: usize) -> usize {
    num_items + 3
}

#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    item_to_token: HashMap<String, TokenId>,
    token_to_item: Vec<String>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Token for `item`, inserting a fresh one on first sight.
    pub fn intern(&mut self, item: &str) -> TokenId {
        if let Some(&t) = self.item_to_token.get(item) {
            return t;
        }
        self.token_to_item.push(item.to_string());
        let token = self.token_to_item.len();
        self.item_to_token.insert(item.to_string(), token);
        token
    }

    pub fn token(&self, item: &str) -> Option<TokenId> {
        self.item_to_token.get(item).copied()
    }

    pub fn item(&self, token: TokenId) -> Option<&str> {
        if token == PAD_TOKEN {
            return None;
        }
        self.token_to_item.get(token - 1).map(|s| s.as_str())
    }

    pub fn num_items(&self) -> usize {
        self.token_to_item.len()
    }

    pub fn mask_token(&self) -> TokenId {
        mask_token_for(self.num_items())
    }

    pub fn uid_token(&self) -> TokenId {
        uid_token_for(self.num_items())
    }

    /// SHA-256 over the mapping in token order; checkpoints embed this so a
    /// model is never resumed or evaluated against a different vocabulary.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (i, item) in self.token_to_item.iter().enumerate() {
            hasher.update(item.as_bytes());
            hasher.update(b"\t");
            hasher.update((i + 1).to_string().as_bytes());
            hasher.update(b"\n");
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `item_id \t token_id` lines in token order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        for (i, item) in self.token_to_item.iter().enumerate() {
            writeln!(w, "{}\t{}", item, i + 1)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, DataError> {
        let mut vocab = Vocabulary::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let item = parts.next().unwrap_or_default();
            let token: TokenId = parts
                .next()
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| DataError::Parse {
                    line: idx + 1,
                    message: format!("expected `item\\ttoken`, got {line:?}"),
                })?;
            let assigned = vocab.intern(item);
            if assigned != token {
                return Err(DataError::Parse {
                    line: idx + 1,
                    message: format!(
                        "vocabulary file out of order: item {item:?} maps to {token} but row order implies {assigned}"
                    ),
                });
            }
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_tokens_never_collide_with_items() {
        let mut v = Vocabulary::new();
        let a = v.intern("a");
        let b = v.intern("b");
        assert_eq!((a, b), (1, 2));
        assert_eq!(v.intern("a"), 1);
        assert_eq!(v.num_items(), 2);
        assert_eq!(v.mask_token(), 3);
        assert_eq!(v.uid_token(), 4);
        assert_eq!(PAD_TOKEN, 0);
        assert_eq!(v.item(1), Some("a"));
        assert_eq!(v.item(PAD_TOKEN), None);
    }

    #[test]
    fn tsv_round_trip_preserves_mapping_and_digest() {
        let mut v = Vocabulary::new();
        for item in ["x9", "k2", "m5"] {
            v.intern(item);
        }
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        let loaded = Vocabulary::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(loaded.token("k2"), Some(2));
        assert_eq!(loaded.digest(), v.digest());
    }

    #[test]
    fn digest_is_order_sensitive() {
        let mut a = Vocabulary::new();
        a.intern("x");
        a.intern("y");
        let mut b = Vocabulary::new();
        b.intern("y");
        b.intern("x");
        assert_ne!(a.digest(), b.digest());
    }
}
