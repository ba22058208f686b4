//! Partial dates in `MM-DD-YYYY` form.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TimeRefError {
    #[error("month {0} out of range 1-12")]
    Month(u8),
    #[error("day {0} out of range 1-31")]
    Day(u8),
    #[error("year {0} is not a four-digit year")]
    Year(u16),
    #[error("day given without month")]
    DayWithoutMonth,
}

/// A possibly partial calendar date. Missing parts render as `XX`/`XXXX`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TimeRef {
    pub month: Option<u8>,
    pub day: Option<u8>,
    pub year: Option<u16>,
}

impl TimeRef {
    pub fn new(month: Option<u8>, day: Option<u8>, year: Option<u16>) -> Result<Self, TimeRefError> {
        let t = TimeRef { month, day, year };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), TimeRefError> {
        if let Some(m) = self.month {
            if !(1..=12).contains(&m) {
                return Err(TimeRefError::Month(m));
            }
        }
        if let Some(d) = self.day {
            if !(1..=31).contains(&d) {
                return Err(TimeRefError::Day(d));
            }
            if self.month.is_none() {
                return Err(TimeRefError::DayWithoutMonth);
            }
        }
        if let Some(y) = self.year {
            if !(1000..=9999).contains(&y) {
                return Err(TimeRefError::Year(y));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.month.is_none() && self.day.is_none() && self.year.is_none()
    }

    pub fn is_complete(&self) -> bool {
        self.month.is_some() && self.day.is_some() && self.year.is_some()
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Reads the `MM-DD-YYYY` shape without range checks, so that invalid
    /// stored values survive deserialization and can be reported later.
    pub fn from_canonical_lenient(text: &str) -> Option<TimeRef> {
        let caps = canonical_re().captures(text.trim())?;
        let num = |i: usize| caps.get(i).and_then(|m| m.as_str().parse::<u16>().ok());
        Some(TimeRef {
            month: num(1).map(|v| v as u8),
            day: num(2).map(|v| v as u8),
            year: num(3),
        })
    }

    /// Per-field agreement: every field present in both must match, and at
    /// least one field must be present in both.
    pub fn overlaps(&self, other: &TimeRef) -> bool {
        let pairs = [
            (self.month.map(u16::from), other.month.map(u16::from)),
            (self.day.map(u16::from), other.day.map(u16::from)),
            (self.year, other.year),
        ];
        let mut shared = 0;
        for (a, b) in pairs {
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    return false;
                }
                shared += 1;
            }
        }
        shared > 0
    }
}

impl fmt::Display for TimeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.month {
            Some(m) => write!(f, "{m:02}-")?,
            None => f.write_str("XX-")?,
        }
        match self.day {
            Some(d) => write!(f, "{d:02}-")?,
            None => f.write_str("XX-")?,
        }
        match self.year {
            Some(y) => write!(f, "{y:04}"),
            None => f.write_str("XXXX"),
        }
    }
}

/// Result of [`parse_time`]. `unparsed` carries the input when it matched
/// none of the recognised shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeParse {
    pub time: TimeRef,
    pub unparsed: Option<String>,
}

impl TimeParse {
    pub fn is_ok(&self) -> bool {
        self.unparsed.is_none()
    }
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

fn month_from_name(name: &str) -> Option<u8> {
    let name = name.to_lowercase();
    let name = name.trim_end_matches('.');
    MONTHS
        .iter()
        .position(|m| *m == name || (name.len() >= 3 && m.starts_with(name)))
        .map(|i| i as u8 + 1)
}

fn canonical_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:(\d{2})|XX)-(?:(\d{2})|XX)-(?:(\d{4})|XXXX)$").unwrap())
}

fn month_name_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^([a-z]+\.?)\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})$").unwrap()
    })
}

fn slash_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\d{1,2})/(?:(\d{1,2})/)?(\d{2}|\d{4})$").unwrap())
}

fn two_digit_year(yy: u16) -> u16 {
    if yy > 50 {
        1900 + yy
    } else {
        2000 + yy
    }
}

fn parse_strict(text: &str) -> Option<TimeRef> {
    if let Some(t) = TimeRef::from_canonical_lenient(text) {
        return t.check().ok().map(|_| t);
    }
    if text.len() == 4 && text.bytes().all(|b| b.is_ascii_digit()) {
        return TimeRef::new(None, None, text.parse().ok()).ok();
    }
    if let Some(caps) = month_name_re().captures(text) {
        let month = month_from_name(&caps[1])?;
        let day = caps[2].parse().ok()?;
        let year = caps[3].parse().ok()?;
        return TimeRef::new(Some(month), Some(day), Some(year)).ok();
    }
    if let Some(caps) = slash_re().captures(text) {
        let month = caps[1].parse().ok()?;
        let day = match caps.get(2) {
            Some(d) => Some(d.as_str().parse().ok()?),
            None => None,
        };
        let year_text = &caps[3];
        let year: u16 = year_text.parse().ok()?;
        let year = match (year_text.len(), day) {
            (2, None) => two_digit_year(year),
            // M/D/YY is not a recognised shape
            (2, Some(_)) => return None,
            _ => year,
        };
        return TimeRef::new(Some(month), day, Some(year)).ok();
    }
    None
}

/// Parses the date shapes found in news text.
///
/// Recognised: `July 1st, 2008`, `7/1/2008`, `7/08`, `7/2008`, `2008` and
/// the canonical `07-01-2008` (with `XX` placeholders). Two-digit years
/// above 50 resolve to the 1900s, otherwise to the 2000s. Empty input is an
/// absent date; anything else that fails yields an empty date with the
/// input recorded in `unparsed`.
pub fn parse_time(text: &str) -> TimeParse {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return TimeParse {
            time: TimeRef::default(),
            unparsed: None,
        };
    }
    match parse_strict(trimmed) {
        Some(time) => TimeParse { time, unparsed: None },
        None => TimeParse {
            time: TimeRef::default(),
            unparsed: Some(trimmed.to_string()),
        },
    }
}
