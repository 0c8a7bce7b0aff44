//! Absolute and relative date expressions resolved to inclusive day ranges.
//!
//! Grammar (case-insensitive):
//!
//! ```text
//! point    := YYYY-MM-DD | D/M/YYYY | Month D[st|nd|rd|th][,] YYYY
//!           | D[st|nd|rd|th] [of] Month[,] YYYY | Month[,] YYYY | YYYY
//! range    := between point (and|-) point | from point (to|until|till) point
//!           | point (-|to) point
//! relative := today | yesterday | (last|past|previous) (week|month|year)
//!           | this (week|month|year) | (last|past) N days
//! ```
//!
//! Slash dates are always day-first. Weeks run Monday to Sunday.

use std::fmt;
use std::sync::LazyLock;

use chrono::{DateTime, Datelike, Days, Months, NaiveDate, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DateError {
    #[error("could not understand the date {0:?}")]
    Unparseable(String),
    #[error("the date range starts ({start}) after it ends ({end})")]
    InvertedRange { start: NaiveDate, end: NaiveDate },
}

/// Inclusive range of UTC civil days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub start_day: NaiveDate,
    pub end_day: NaiveDate,
}

impl DateRange {
    pub fn new(start_day: NaiveDate, end_day: NaiveDate) -> Result<Self, DateError> {
        if start_day > end_day {
            return Err(DateError::InvertedRange {
                start: start_day,
                end: end_day,
            });
        }
        Ok(DateRange { start_day, end_day })
    }

    pub fn day(day: NaiveDate) -> Self {
        DateRange {
            start_day: day,
            end_day: day,
        }
    }

    pub fn month(year: i32, month: u32) -> Option<Self> {
        let start = NaiveDate::from_ymd_opt(year, month, 1)?;
        let end = start.checked_add_months(Months::new(1))?.pred_opt()?;
        Some(DateRange {
            start_day: start,
            end_day: end,
        })
    }

    pub fn year(year: i32) -> Option<Self> {
        Some(DateRange {
            start_day: NaiveDate::from_ymd_opt(year, 1, 1)?,
            end_day: NaiveDate::from_ymd_opt(year, 12, 31)?,
        })
    }

    pub fn contains_day(&self, day: NaiveDate) -> bool {
        self.start_day <= day && day <= self.end_day
    }

    /// Membership by the instant's UTC civil date.
    pub fn contains(&self, instant: &DateTime<Utc>) -> bool {
        self.contains_day(instant.date_naive())
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.start_day == self.end_day {
            write!(f, "{}", self.start_day)
        } else {
            write!(f, "{} to {}", self.start_day, self.end_day)
        }
    }
}

const MONTH: &str = "january|february|march|april|may|june|july|august|september|october|november|december|jan|feb|mar|apr|jun|jul|aug|sept|sep|oct|nov|dec";

fn point_pattern() -> String {
    format!(
        r"\d{{4}}-\d{{1,2}}-\d{{1,2}}|\d{{1,2}}/\d{{1,2}}/\d{{4}}|(?:{MONTH})\.? \d{{1,2}}(?:st|nd|rd|th)?,? \d{{4}}|\d{{1,2}}(?:st|nd|rd|th)? (?:of )?(?:{MONTH})\.?,? \d{{4}}|(?:{MONTH})\.?,? \d{{4}}|(?:19|20)\d{{2}}"
    )
}

/// Finds candidate date expressions inside free text. Matches still need to
/// go through [`resolve_date`].
pub(crate) static DATE_SPAN_RE: LazyLock<Regex> = LazyLock::new(|| {
    let p = point_pattern();
    let range = format!(
        r"between (?:{p}) ?(?:and|-|–) ?(?:{p})|from (?:{p}) (?:to|until|till) (?:{p})|(?:{p}) ?(?:-|–|to) ?(?:{p})"
    );
    let relative = r"today|yesterday|(?:last|past|previous) (?:week|month|year)|this (?:week|month|year)|(?:last|past) \d+ days";
    Regex::new(&format!(r"(?i)\b(?:{range}|{p}|{relative})\b")).unwrap()
});

static ISO_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{1,2})-(\d{1,2})$").unwrap());
static SLASH_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})/(\d{1,2})/(\d{4})$").unwrap());
static MONTH_DAY_YEAR_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^({MONTH})\.? (\d{{1,2}})(?:st|nd|rd|th)?,? (\d{{4}})$")).unwrap()
});
static DAY_MONTH_YEAR_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"^(\d{{1,2}})(?:st|nd|rd|th)? (?:of )?({MONTH})\.?,? (\d{{4}})$")).unwrap()
});
static MONTH_YEAR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^({MONTH})\.?,? (\d{{4}})$")).unwrap());
static YEAR_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^((?:19|20)\d{2})$").unwrap());
static LAST_N_DAYS_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:last|past) (\d+) days$").unwrap());

fn month_number(name: &str) -> Option<u32> {
    let n = match &name[..name.len().min(3)] {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "may" => 5,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" => 9,
        "oct" => 10,
        "nov" => 11,
        "dec" => 12,
        _ => return None,
    };
    Some(n)
}

fn ymd(year: &str, month: u32, day: &str) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(year.parse().ok()?, month, day.parse().ok()?)
}

fn parse_point(text: &str) -> Option<DateRange> {
    let text = text.trim();
    if let Some(c) = ISO_RE.captures(text) {
        return ymd(&c[1], c[2].parse().ok()?, &c[3]).map(DateRange::day);
    }
    if let Some(c) = SLASH_RE.captures(text) {
        return ymd(&c[3], c[2].parse().ok()?, &c[1]).map(DateRange::day);
    }
    if let Some(c) = MONTH_DAY_YEAR_RE.captures(text) {
        return ymd(&c[3], month_number(&c[1])?, &c[2]).map(DateRange::day);
    }
    if let Some(c) = DAY_MONTH_YEAR_RE.captures(text) {
        return ymd(&c[3], month_number(&c[2])?, &c[1]).map(DateRange::day);
    }
    if let Some(c) = MONTH_YEAR_RE.captures(text) {
        return DateRange::month(c[2].parse().ok()?, month_number(&c[1])?);
    }
    if let Some(c) = YEAR_RE.captures(text) {
        return DateRange::year(c[1].parse().ok()?);
    }
    None
}

fn normalize(expression: &str) -> String {
    let lowered = expression
        .trim()
        .trim_end_matches(['.', '?', '!', ',', ';', ':'])
        .to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    match collapsed.strip_prefix("the ") {
        Some(rest) => rest.to_string(),
        None => collapsed,
    }
}

fn monday_of(day: NaiveDate) -> NaiveDate {
    day - Days::new(u64::from(day.weekday().num_days_from_monday()))
}

fn resolve_relative(text: &str, today: NaiveDate) -> Option<DateRange> {
    let yesterday = today.pred_opt()?;
    let range = match text {
        "today" => DateRange::day(today),
        "yesterday" => DateRange::day(yesterday),
        "last week" | "past week" | "previous week" => {
            let this_monday = monday_of(today);
            DateRange {
                start_day: this_monday - Days::new(7),
                end_day: this_monday - Days::new(1),
            }
        }
        "this week" => {
            let monday = monday_of(today);
            DateRange {
                start_day: monday,
                end_day: monday + Days::new(6),
            }
        }
        "last month" | "past month" | "previous month" => {
            let prev = today.with_day(1)?.pred_opt()?;
            DateRange::month(prev.year(), prev.month())?
        }
        "this month" => DateRange::month(today.year(), today.month())?,
        "last year" | "past year" | "previous year" => DateRange::year(today.year() - 1)?,
        "this year" => DateRange::year(today.year())?,
        _ => {
            let c = LAST_N_DAYS_RE.captures(text)?;
            let n: u64 = c[1].parse().ok()?;
            if n == 0 {
                return None;
            }
            DateRange {
                start_day: yesterday.checked_sub_days(Days::new(n - 1))?,
                end_day: yesterday,
            }
        }
    };
    Some(range)
}

/// Splits `text` at every occurrence of any separator and returns the first
/// split where both sides are points.
fn split_points(text: &str, separators: &[&str]) -> Option<(DateRange, DateRange)> {
    for sep in separators {
        for (idx, _) in text.match_indices(sep) {
            let (left, right) = (&text[..idx], &text[idx + sep.len()..]);
            if let (Some(a), Some(b)) = (parse_point(left), parse_point(right)) {
                return Some((a, b));
            }
        }
    }
    None
}

/// Resolves a date expression against `now`.
pub fn resolve_date(expression: &str, now: DateTime<Utc>) -> Result<DateRange, DateError> {
    let text = normalize(expression);
    let unparseable = || DateError::Unparseable(expression.trim().to_string());
    if let Some(range) = resolve_relative(&text, now.date_naive()) {
        return Ok(range);
    }
    if let Some(point) = parse_point(&text) {
        return Ok(point);
    }
    let bounds = if let Some(rest) = text.strip_prefix("between ") {
        split_points(rest, &[" and ", " - ", "-", " – ", "–"])
    } else if let Some(rest) = text.strip_prefix("from ") {
        split_points(rest, &[" to ", " until ", " till "])
    } else {
        split_points(&text, &[" - ", "-", " – ", "–", " to "])
    };
    let (first, last) = bounds.ok_or_else(unparseable)?;
    DateRange::new(first.start_day, last.end_day)
}
