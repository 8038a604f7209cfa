use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A calendar quarter such as `1889Q1`.
///
/// Ordering is chronological and quarters support integer offsets, so a
/// contiguous range can be walked with `q + 1`, `q - lag` and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self, Error> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::QuarterFormat(format!("{year}Q{quarter}")));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn quarter(self) -> u8 {
        self.quarter
    }

    /// Number of quarters since year 0 Q1; used for arithmetic.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        let year = ordinal.div_euclid(4) as i32;
        let quarter = ordinal.rem_euclid(4) as u8 + 1;
        Self { year, quarter }
    }

    pub fn offset(self, quarters: i64) -> Self {
        Self::from_ordinal(self.ordinal() + quarters)
    }

    /// Signed distance `self - other` in quarters.
    pub fn since(self, other: Quarter) -> i64 {
        self.ordinal() - other.ordinal()
    }

    /// Parses either `YYYYQn` or a monthly date `YYYY-MM`. Monthly dates
    /// return `Some((quarter, is_quarter_end_month))`.
    pub fn parse_period(s: &str) -> Result<(Quarter, bool), Error> {
        let s = s.trim();
        if let Ok(q) = s.parse::<Quarter>() {
            return Ok((q, true));
        }
        let bad = || Error::QuarterFormat(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.get(..2.min(m.len())).unwrap_or(m).parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        let q = Quarter::new(year, (month - 1) / 3 + 1)?;
        Ok((q, month % 3 == 0))
    }
}

impl std::ops::Add<i64> for Quarter {
    type Output = Quarter;
    fn add(self, rhs: i64) -> Quarter {
        self.offset(rhs)
    }
}

impl std::ops::Sub<i64> for Quarter {
    type Output = Quarter;
    fn sub(self, rhs: i64) -> Quarter {
        self.offset(-rhs)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || Error::QuarterFormat(s.to_string());
        let (y, q) = t
            .split_once(['Q', 'q'])
            .ok_or_else(bad)?;
        if y.is_empty() || q.len() != 1 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let quarter: u8 = q.parse().map_err(|_| bad())?;
        Quarter::new(year, quarter).map_err(|_| bad())
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
