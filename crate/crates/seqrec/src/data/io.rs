//! Text formats: raw interaction logs, processed sequences, dataset stats.

use std::io::{BufRead, Write};

use super::preprocess::{DatasetStats, RawInteraction};
use super::sequence::UserSequence;
use super::vocab::TokenId;
use super::DataError;

/// Parses `user_id \t item_id \t timestamp` lines.
pub fn read_raw_interactions<R: BufRead>(r: R) -> Result<Vec<RawInteraction>, DataError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (user, item, ts) = match (parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(i), Some(t)) if !u.is_empty() && !i.is_empty() => (u, i, t),
            _ => {
                return Err(DataError::Parse {
                    line: idx + 1,
                    message: format!("expected `user\\titem\\ttimestamp`, got {line:?}"),
                })
            }
        };
        let timestamp: i64 = ts.trim().parse().map_err(|_| DataError::Parse {
            line: idx + 1,
            message: format!("bad timestamp {ts:?}"),
        })?;
        if timestamp < 0 {
            return Err(DataError::Parse {
                line: idx + 1,
                message: format!("negative timestamp {timestamp}"),
            });
        }
        out.push(RawInteraction {
            user_id: user.to_string(),
            item_id: item.to_string(),
            timestamp,
        });
    }
    Ok(out)
}

/// One user per line: the user index followed by its token sequence.
pub fn write_processed<W: Write>(sequences: &[UserSequence], mut w: W) -> Result<(), DataError> {
    for seq in sequences {
        write!(w, "{}", seq.user_index)?;
        for t in &seq.tokens {
            write!(w, " {t}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_processed<R: BufRead>(r: R) -> Result<Vec<UserSequence>, DataError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let user_index: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| DataError::Parse {
                line: idx + 1,
                message: "missing user index".into(),
            })?;
        let tokens: Vec<TokenId> = fields
            .map(|f| {
                f.parse().map_err(|_| DataError::Parse {
                    line: idx + 1,
                    message: format!("bad token {f:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        out.push(UserSequence::new(user_index, user_index.to_string(), tokens)?);
    }
    Ok(out)
}

pub fn write_stats<W: Write>(stats: &DatasetStats, mut w: W) -> Result<(), DataError> {
    writeln!(w, "num_users = {}", stats.num_users)?;
    writeln!(w, "num_items = {}", stats.num_items)?;
    writeln!(w, "num_actions = {}", stats.num_actions)?;
    writeln!(w, "avg_length = {}", stats.avg_length)?;
    Ok(())
}

pub fn read_stats<R: BufRead>(r: R) -> Result<DatasetStats, DataError> {
    let mut stats = DatasetStats { num_users: 0, num_items: 0, num_actions: 0, avg_length: 0.0 };
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        let bad = |message: String| DataError::Parse { line: idx + 1, message };
        match key {
            "num_users" => stats.num_users = value.parse().map_err(|e| bad(format!("{e}")))?,
            "num_items" => stats.num_items = value.parse().map_err(|e| bad(format!("{e}")))?,
            "num_actions" => stats.num_actions = value.parse().map_err(|e| bad(format!("{e}")))?,
            "avg_length" => stats.avg_length = value.parse().map_err(|e| bad(format!("{e}")))?,
            _ => {}
        }
    }
    Ok(stats)
}
