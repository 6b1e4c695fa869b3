//! Monthly series ingestion.
//!
//! Two source layouts are understood: the Bureau of Meteorology plaintext
//! table (one row per year, a four-digit year followed by up to twelve
//! monthly values) and a canonical `year,month,value` CSV. Both produce a
//! [`TimeSeries`], which is gap-free by construction: missing months at the
//! edges are trimmed and missing months in the interior are an error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: malformed token `{token}`")]
    MalformedLine { line: usize, token: String },
    #[error("line {line}: expected year {expected}, found {found}")]
    NonConsecutiveYears { line: usize, expected: i32, found: i32 },
    #[error("missing value inside the series at {stamp}")]
    InteriorGap { stamp: MonthStamp },
    #[error("no data")]
    Empty,
    #[error("missing `year,month,value` header")]
    MissingHeader,
    #[error("line {line}: rows are not in ascending (year, month) order")]
    UnsortedRows { line: usize },
    #[error("range {from}..={to} is outside the series span {start}..={end}")]
    OutOfRange { from: MonthStamp, to: MonthStamp, start: MonthStamp, end: MonthStamp },
    #[error("invalid month stamp {year}-{month}")]
    InvalidStamp { year: i32, month: i64 },
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
}

/// A calendar month. Ordering is lexicographic on (year, month).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub const MIN_YEAR: i32 = 1800;

    pub fn new(year: i32, month: u32) -> Result<Self, IngestError> {
        if !(1..=12).contains(&month) || year < Self::MIN_YEAR {
            return Err(IngestError::InvalidStamp { year, month: month as i64 });
        }
        Ok(Self { year, month: month as u8 })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    /// Months since January of year 0.
    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self { year: ordinal.div_euclid(12) as i32, month: (ordinal.rem_euclid(12) + 1) as u8 }
    }

    pub fn add_months(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: MonthStamp) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = IngestError;

    /// Accepts `YYYY-MM`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || IngestError::MalformedLine { line: 0, token: s.to_string() };
        let (y, m) = s.trim().split_once('-').ok_or_else(malformed)?;
        let year: i32 = y.parse().map_err(|_| malformed())?;
        let month: u32 = m.parse().map_err(|_| malformed())?;
        MonthStamp::new(year, month)
    }
}

/// Consecutive monthly observations, all finite, at least one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: MonthStamp,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: MonthStamp, values: Vec<f64>) -> Result<Self, IngestError> {
        if values.is_empty() {
            return Err(IngestError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(IngestError::NonFinite { index });
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn end(&self) -> MonthStamp {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stamp_at(&self, index: usize) -> MonthStamp {
        self.start.add_months(index as i64)
    }

    pub fn index_of(&self, stamp: MonthStamp) -> Option<usize> {
        let offset = self.start.months_until(stamp);
        (offset >= 0 && (offset as usize) < self.values.len()).then_some(offset as usize)
    }

    /// Inclusive sub-series `from..=to`.
    pub fn slice(&self, from: MonthStamp, to: MonthStamp) -> Result<TimeSeries, IngestError> {
        let out_of_range = || IngestError::OutOfRange { from, to, start: self.start, end: self.end() };
        if from > to {
            return Err(out_of_range());
        }
        let lo = self.index_of(from).ok_or_else(out_of_range)?;
        let hi = self.index_of(to).ok_or_else(out_of_range)?;
        Ok(TimeSeries { start: from, values: self.values[lo..=hi].to_vec() })
    }

    /// A copy with `extra` appended after the last month.
    pub fn extended(&self, extra: &[f64]) -> Result<TimeSeries, IngestError> {
        let mut values = Vec::with_capacity(self.values.len() + extra.len());
        values.extend_from_slice(&self.values);
        values.extend_from_slice(extra);
        TimeSeries::new(self.start, values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sample variance with the n − 1 denominator (0 for a single value).
    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    /// Canonical `year,month,value` CSV, one row per month.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.values.len() + 1));
        out.push_str("year,month,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let stamp = self.stamp_at(i);
            out.push_str(&format!("{},{},{}\n", stamp.year(), stamp.month(), v));
        }
        out
    }
}

/// Which tokens count as a missing month.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingPolicy {
    pub tokens: Vec<String>,
    pub values: Vec<f64>,
    /// Values whose magnitude exceeds this are treated as missing.
    pub max_abs: Option<f64>,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        Self { tokens: vec!["*".into(), "-999.9".into()], values: vec![-999.9], max_abs: Some(90.0) }
    }
}

impl MissingPolicy {
    /// `Ok(None)` for a missing month, `Err(())` for a token that is neither
    /// a sentinel nor a finite number.
    fn classify(&self, token: &str) -> Result<Option<f64>, ()> {
        if token.is_empty() || self.tokens.iter().any(|t| t == token) {
            return Ok(None);
        }
        let v: f64 = token.parse().map_err(|_| ())?;
        if !v.is_finite() {
            return Err(());
        }
        if self.values.contains(&v) || self.max_abs.is_some_and(|m| v.abs() > m) {
            return Ok(None);
        }
        Ok(Some(v))
    }
}

/// Trims missing months at both ends and rejects interior gaps.
fn assemble(start: MonthStamp, months: Vec<Option<f64>>) -> Result<TimeSeries, IngestError> {
    let first = months.iter().position(Option::is_some).ok_or(IngestError::Empty)?;
    let last = months.iter().rposition(Option::is_some).ok_or(IngestError::Empty)?;
    let mut values = Vec::with_capacity(last - first + 1);
    for (i, v) in months[first..=last].iter().enumerate() {
        match v {
            Some(v) => values.push(*v),
            None => return Err(IngestError::InteriorGap { stamp: start.add_months((first + i) as i64) }),
        }
    }
    TimeSeries::new(start.add_months(first as i64), values)
}

fn is_year_token(token: &str) -> bool {
    token.len() == 4 && token.bytes().all(|b| b.is_ascii_digit())
}

pub fn parse_bom_plaintext(text: &str) -> Result<TimeSeries, IngestError> {
    parse_bom_plaintext_with(text, &MissingPolicy::default())
}

pub fn parse_bom_plaintext_with(text: &str, policy: &MissingPolicy) -> Result<TimeSeries, IngestError> {
    let mut start: Option<MonthStamp> = None;
    let mut prev_year: Option<i32> = None;
    let mut months: Vec<Option<f64>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut tokens = raw.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        if !is_year_token(first) {
            continue;
        }
        let year: i32 = first.parse().expect("four ascii digits");
        if let Some(prev) = prev_year {
            if year != prev + 1 {
                return Err(IngestError::NonConsecutiveYears { line, expected: prev + 1, found: year });
            }
        } else {
            start = Some(
                MonthStamp::new(year, 1).map_err(|_| IngestError::MalformedLine { line, token: first.to_string() })?,
            );
        }
        prev_year = Some(year);

        let mut row = [None; 12];
        for (slot, token) in tokens.enumerate() {
            if slot >= 12 {
                return Err(IngestError::MalformedLine { line, token: token.to_string() });
            }
            row[slot] =
                policy.classify(token).map_err(|_| IngestError::MalformedLine { line, token: token.to_string() })?;
        }
        months.extend_from_slice(&row);
    }

    let start = start.ok_or(IngestError::Empty)?;
    assemble(start, months)
}

pub fn parse_csv(text: &str) -> Result<TimeSeries, IngestError> {
    parse_csv_with(text, &MissingPolicy::default())
}

pub fn parse_csv_with(text: &str, policy: &MissingPolicy) -> Result<TimeSeries, IngestError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if is_csv_header(header) => {}
        _ => return Err(IngestError::MissingHeader),
    }

    let mut start: Option<MonthStamp> = None;
    let mut prev: Option<MonthStamp> = None;
    let mut months: Vec<Option<f64>> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let malformed = |token: &str| IngestError::MalformedLine { line, token: token.to_string() };
        if fields.len() != 3 {
            return Err(malformed(raw));
        }
        let year: i32 = fields[0].parse().map_err(|_| malformed(fields[0]))?;
        let month: u32 = fields[1].parse().map_err(|_| malformed(fields[1]))?;
        let stamp = MonthStamp::new(year, month).map_err(|_| malformed(raw))?;
        let value = policy.classify(fields[2]).map_err(|_| malformed(fields[2]))?;

        match prev {
            None => start = Some(stamp),
            Some(p) => {
                let step = p.months_until(stamp);
                if step <= 0 {
                    return Err(IngestError::UnsortedRows { line });
                }
                // Skipped months are missing; `assemble` decides whether that is fatal.
                months.extend(std::iter::repeat_n(None, (step - 1) as usize));
            }
        }
        months.push(value);
        prev = Some(stamp);
    }

    let start = start.ok_or(IngestError::Empty)?;
    assemble(start, months)
}

fn is_csv_header(line: &str) -> bool {
    let fields: Vec<String> = line.split(',').map(|f| f.trim().to_ascii_lowercase()).collect();
    fields == ["year", "month", "value"]
}

/// Dispatches on the first non-blank line: a `year,month,value` header means
/// CSV, anything else is read as BOM plaintext.
pub fn parse_auto(text: &str, policy: &MissingPolicy) -> Result<TimeSeries, IngestError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if is_csv_header(first) {
        parse_csv_with(text, policy)
    } else {
        parse_bom_plaintext_with(text, policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stamp(y: i32, m: u32) -> MonthStamp {
        MonthStamp::new(y, m).unwrap()
    }

    #[test]
    fn bom_full_year() {
        let ts = parse_bom_plaintext("1876 11.3 11.0 0.2 9.4 6.4 -3.0 -2.1 -0.4 0.2 7.4 4.5 3.1").unwrap();
        assert_eq!(ts.start(), stamp(1876, 1));
        assert_eq!(ts.len(), 12);
        assert_eq!(ts.values()[0], 11.3);
    }

    #[test]
    fn bom_skips_headers_and_accepts_partial_final_year() {
        let text = "SOI table\nYear Jan Feb\n2008 1 2 3 4 5 6 7 8 9 10 11 12\n2009 1 2 3 4 5 6 7 8\n";
        let ts = parse_bom_plaintext(text).unwrap();
        assert_eq!(ts.len(), 20);
        assert_eq!(ts.end(), stamp(2009, 8));
    }

    #[test]
    fn bom_rejects_year_gap() {
        let err = parse_bom_plaintext("1876 1.0 2.0\n1878 3.0").unwrap_err();
        assert!(matches!(err, IngestError::NonConsecutiveYears { expected: 1877, found: 1878, .. }));
    }

    #[test]
    fn bom_interior_sentinel_is_a_gap() {
        let err = parse_bom_plaintext("1876 1.0 -999.9 3.0").unwrap_err();
        assert_eq!(err, IngestError::InteriorGap { stamp: stamp(1876, 2) });
        let err = parse_bom_plaintext("1876 1.0 * 3.0").unwrap_err();
        assert!(matches!(err, IngestError::InteriorGap { .. }));
        let err = parse_bom_plaintext("1876 1.0 95.0 3.0").unwrap_err();
        assert!(matches!(err, IngestError::InteriorGap { .. }));
    }

    #[test]
    fn bom_trims_edge_sentinels() {
        let ts = parse_bom_plaintext("1876 * -999.9 3.0 4.0 -999.9").unwrap();
        assert_eq!(ts.start(), stamp(1876, 3));
        assert_eq!(ts.values(), &[3.0, 4.0]);
    }

    #[test]
    fn bom_malformed_and_empty() {
        let err = parse_bom_plaintext("1876 1.0 abc").unwrap_err();
        assert_eq!(err, IngestError::MalformedLine { line: 1, token: "abc".into() });
        assert_eq!(parse_bom_plaintext("header only\n").unwrap_err(), IngestError::Empty);
        let too_many = format!("1876{}", " 1.0".repeat(13));
        assert!(matches!(parse_bom_plaintext(&too_many), Err(IngestError::MalformedLine { .. })));
    }

    #[test]
    fn custom_sentinel_policy() {
        let policy = MissingPolicy { tokens: vec!["NA".into()], values: vec![], max_abs: None };
        let ts = parse_bom_plaintext_with("1876 NA 95.0 3.0", &policy).unwrap();
        assert_eq!(ts.values(), &[95.0, 3.0]);
    }

    #[test]
    fn csv_examples() {
        let ts = parse_csv("year,month,value\n2000,1,1.5\n2000,2,-2.0").unwrap();
        assert_eq!(ts.start(), stamp(2000, 1));
        assert_eq!(ts.values(), &[1.5, -2.0]);

        let err = parse_csv("year,month,value\n2000,1,1.5\n2000,3,2.0").unwrap_err();
        assert_eq!(err, IngestError::InteriorGap { stamp: stamp(2000, 2) });
        assert_eq!(parse_csv("year,month,value\n").unwrap_err(), IngestError::Empty);
        assert_eq!(parse_csv("2000,1,1.5\n").unwrap_err(), IngestError::MissingHeader);
        assert_eq!(
            parse_csv("year,month,value\n2000,2,1.5\n2000,1,2.0").unwrap_err(),
            IngestError::UnsortedRows { line: 3 }
        );
        assert_eq!(
            parse_csv("year,month,value\n2000,1,1.5\n2000,1,2.0").unwrap_err(),
            IngestError::UnsortedRows { line: 3 }
        );
    }

    #[test]
    fn auto_detects_format() {
        let p = MissingPolicy::default();
        assert_eq!(parse_auto("year,month,value\n2000,1,1.5\n", &p).unwrap().len(), 1);
        assert_eq!(parse_auto("2000 1 2 3\n", &p).unwrap().len(), 3);
    }

    #[test]
    fn span_1876_to_2009_month_count() {
        // Month-count oracle: walk the calendar one month at a time.
        let (mut y, mut m, mut count) = (1876, 1, 1);
        while (y, m) != (2009, 8) {
            m += 1;
            if m == 13 {
                m = 1;
                y += 1;
            }
            count += 1;
        }
        assert_eq!(count, 1604);
        assert_eq!(stamp(1876, 1).months_until(stamp(2009, 8)) + 1, 1604);

        let ts = TimeSeries::new(stamp(1876, 1), vec![0.0; 1604]).unwrap();
        assert_eq!(ts.end(), stamp(2009, 8));
        let same = ts.slice(stamp(1876, 1), stamp(2009, 8)).unwrap();
        assert_eq!(same, ts);
        assert_eq!(ts.slice(stamp(2000, 1), stamp(2000, 12)).unwrap().len(), 12);
        assert!(matches!(ts.slice(stamp(2000, 1), stamp(2010, 1)), Err(IngestError::OutOfRange { .. })));
        assert!(ts.slice(stamp(2000, 2), stamp(2000, 1)).is_err());
    }

    #[test]
    fn stamp_parsing_and_bounds() {
        assert_eq!("2009-08".parse::<MonthStamp>().unwrap(), stamp(2009, 8));
        assert!("2009-13".parse::<MonthStamp>().is_err());
        assert!(MonthStamp::new(1799, 1).is_err());
        assert_eq!(stamp(2009, 12).add_months(1), stamp(2010, 1));
        assert_eq!(stamp(2010, 1).add_months(-1), stamp(2009, 12));
        assert!(stamp(2009, 12) < stamp(2010, 1));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            TimeSeries::new(stamp(2000, 1), vec![1.0, f64::NAN]),
            Err(IngestError::NonFinite { index: 1 })
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            year in 1800i32..2100,
            month in 1u32..=12,
            values in prop::collection::vec(-80.0f64..80.0, 1..60),
        ) {
            let ts = TimeSeries::new(stamp(year, month), values).unwrap();
            let back = parse_csv(&ts.to_csv()).unwrap();
            prop_assert_eq!(&back, &ts);
            prop_assert_eq!(ts.slice(ts.start(), ts.end()).unwrap(), ts);
        }

        #[test]
        fn bom_never_yields_sentinels(
            cells in prop::collection::vec(prop_oneof![
                Just("-999.9".to_string()),
                Just("*".to_string()),
                (-89.0f64..89.0).prop_map(|v| format!("{v:.1}")),
            ], 1..48)
        ) {
            let mut text = String::new();
            for (i, chunk) in cells.chunks(12).enumerate() {
                text.push_str(&format!("{} {}\n", 1900 + i, chunk.join(" ")));
            }
            if let Ok(ts) = parse_bom_plaintext(&text) {
                prop_assert!(ts.values().iter().all(|v| *v != -999.9 && v.abs() <= 90.0));
            }
        }
    }
}
