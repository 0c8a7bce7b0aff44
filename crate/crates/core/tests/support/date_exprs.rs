//! Generated date expressions with their expected day ranges.

use chrono::{Datelike, Days, NaiveDate};
use proptest::prelude::*;

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
    "November", "December",
];

pub fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn ordinal(n: u32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// Renders a single day in one of the accepted spellings.
pub fn render_day(d: NaiveDate, style: u8) -> String {
    let month = MONTHS[d.month0() as usize];
    match style % 8 {
        0 => d.format("%Y-%m-%d").to_string(),
        1 => format!("{}/{}/{}", d.day(), d.month(), d.year()),
        2 => format!("{month} {} {}", ordinal(d.day()), d.year()),
        3 => format!("{month} {}, {}", d.day(), d.year()),
        4 => format!("{} {month} {}", d.day(), d.year()),
        5 => format!("{} of {month} {}", ordinal(d.day()), d.year()),
        6 => format!("{} {}, {}", &month[..3], d.day(), d.year()),
        _ => format!("{:02}/{:02}/{}", d.day(), d.month(), d.year()),
    }
}

fn last_day_of_month(y: i32, m: u32) -> NaiveDate {
    let (ny, nm) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    day(ny, nm, 1).pred_opt().unwrap()
}

#[derive(Debug, Clone)]
pub enum Expr {
    Day(NaiveDate, u8),
    Month(i32, u32),
    Year(i32),
    Range(NaiveDate, NaiveDate, u8, u8, u8),
}

impl Expr {
    pub fn text(&self) -> String {
        match self {
            Expr::Day(d, s) => render_day(*d, *s),
            Expr::Month(y, m) => format!("{} {y}", MONTHS[*m as usize - 1]),
            Expr::Year(y) => y.to_string(),
            Expr::Range(a, b, sa, sb, form) => {
                let (a, b) = (render_day(*a, *sa), render_day(*b, *sb));
                match form % 4 {
                    0 => format!("between {a} and {b}"),
                    1 => format!("between {a} - {b}"),
                    2 => format!("from {a} to {b}"),
                    _ => format!("{a} - {b}"),
                }
            }
        }
    }

    pub fn expected(&self) -> (NaiveDate, NaiveDate) {
        match self {
            Expr::Day(d, _) => (*d, *d),
            Expr::Month(y, m) => (day(*y, *m, 1), last_day_of_month(*y, *m)),
            Expr::Year(y) => (day(*y, 1, 1), day(*y, 12, 31)),
            Expr::Range(a, b, ..) => (*a, *b),
        }
    }
}

fn any_day() -> impl Strategy<Value = NaiveDate> {
    (0u64..15_000).prop_map(|n| day(1990, 1, 1) + Days::new(n))
}

pub fn any_expr() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (any_day(), any::<u8>()).prop_map(|(d, s)| Expr::Day(d, s)),
        (1990i32..2030, 1u32..=12).prop_map(|(y, m)| Expr::Month(y, m)),
        (1990i32..2030).prop_map(Expr::Year),
        (any_day(), 0u64..400, any::<u8>(), any::<u8>(), any::<u8>())
            .prop_map(|(a, len, sa, sb, f)| Expr::Range(a, a + Days::new(len), sa, sb, f)),
    ]
}
