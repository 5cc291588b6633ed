use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_MAX: u16 = 999;

/// External score ledger. The value is kept in `0..=999` so it always has a
/// three-character digit-token form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub struct ScoreRecord {
    value: u16,
}

impl ScoreRecord {
    pub fn new(value: u16) -> Result<Self> {
        if value > SCORE_MAX {
            return Err(Error::ScoreOutOfRange(value as u32));
        }
        Ok(Self { value })
    }

    pub fn value(&self) -> u16 {
        self.value
    }

    /// Hundreds, tens and units characters.
    pub fn digits(&self) -> [char; 3] {
        digits_of(self.value)
    }
}

impl TryFrom<u16> for ScoreRecord {
    type Error = Error;

    fn try_from(value: u16) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ScoreRecord> for u16 {
    fn from(r: ScoreRecord) -> u16 {
        r.value
    }
}

/// Result of one ledger update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LedgerUpdate {
    pub record: ScoreRecord,
    /// An event arrived while the ledger was already at 999.
    pub saturated: bool,
}

/// Adds one to the ledger when `event` fires.
pub fn logic_calculate(record: ScoreRecord, event: bool) -> LedgerUpdate {
    if !event {
        return LedgerUpdate { record, saturated: false };
    }
    if record.value == SCORE_MAX {
        return LedgerUpdate { record, saturated: true };
    }
    LedgerUpdate { record: ScoreRecord { value: record.value + 1 }, saturated: false }
}

/// Zero-padded decimal digit tokens of `value`.
pub fn decompose_digits(value: u32) -> Result<[char; 3]> {
    if value > SCORE_MAX as u32 {
        return Err(Error::ScoreOutOfRange(value));
    }
    Ok(digits_of(value as u16))
}

fn digits_of(v: u16) -> [char; 3] {
    let d = |x: u16| char::from(b'0' + x as u8);
    [d(v / 100), d(v / 10 % 10), d(v % 10)]
}
