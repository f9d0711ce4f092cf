//! Value data types, rule-based cell classification and value normalization.
//!
//! Every cell of a table is assigned one of seven value types. Columns are
//! typed by majority vote over their non-empty cells, and cell values are
//! rewritten into a canonical form so that values coming from different
//! tables (or from the knowledge base) can be compared for equality.
//!
//! The recognizers live in a single rule table ([`RULES`]) which can be
//! exported with [`rules_tsv`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Entity,
    Quantity,
    String,
    DateTime,
    GeoCoordinate,
    Url,
    Other,
}

impl ValueType {
    pub const ALL: [ValueType; 7] = [
        ValueType::Entity,
        ValueType::Quantity,
        ValueType::String,
        ValueType::DateTime,
        ValueType::GeoCoordinate,
        ValueType::Url,
        ValueType::Other,
    ];

    /// The four types test collections are stratified over.
    pub const MAIN: [ValueType; 4] = [
        ValueType::Entity,
        ValueType::Quantity,
        ValueType::String,
        ValueType::DateTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Entity => "entity",
            ValueType::Quantity => "quantity",
            ValueType::String => "string",
            ValueType::DateTime => "datetime",
            ValueType::GeoCoordinate => "geo",
            ValueType::Url => "url",
            ValueType::Other => "other",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown value type `{s}`"))
    }
}

/// Canonical form of a normalized value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Canonical {
    Entity(String),
    Quantity { value: f64, unit: String },
    /// `YYYY-MM-DD`
    Date(String),
    /// `HH:MM:SS`
    Time(String),
    Year(i32),
    YearRange(i32, i32),
    DateRange(String, String),
    Text(String),
}

impl fmt::Display for Canonical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Canonical::Entity(id) => f.write_str(id),
            Canonical::Quantity { value, unit } if unit.is_empty() => write!(f, "{value}"),
            Canonical::Quantity { value, unit } => write!(f, "{value} {unit}"),
            Canonical::Date(d) | Canonical::Time(d) => f.write_str(d),
            Canonical::Year(y) => write!(f, "{y}"),
            Canonical::YearRange(a, b) => write!(f, "[{a},{b}]"),
            Canonical::DateRange(a, b) => write!(f, "[{a}, {b}]"),
            Canonical::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedValue {
    pub ty: ValueType,
    pub canonical: Canonical,
}

impl NormalizedValue {
    pub fn text(ty: ValueType, s: &str) -> Self {
        NormalizedValue {
            ty,
            canonical: Canonical::Text(s.to_lowercase()),
        }
    }

    pub fn entity(id: &str) -> Self {
        NormalizedValue {
            ty: ValueType::Entity,
            canonical: Canonical::Entity(id.trim().to_string()),
        }
    }

    /// Type-tagged canonical string, e.g. `quantity:100 m`. Parsed back by
    /// [`NormalizedValue::from_key`].
    pub fn key(&self) -> String {
        format!("{}:{}", self.ty, self.canonical)
    }

    pub fn from_key(key: &str) -> Option<Self> {
        let (ty, rest) = key.split_once(':')?;
        let ty: ValueType = ty.parse().ok()?;
        let v = normalize(rest, ty);
        (v.ty == ty).then_some(v)
    }
}

impl fmt::Display for NormalizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.canonical.fmt(f)
    }
}

const QUANTITY_REL_TOL: f64 = 1e-9;

/// Equality on normalized values: same type and same canonical form.
/// Quantities compare numbers with a relative tolerance and units
/// case-insensitively; units are never converted.
pub fn values_equal(a: &NormalizedValue, b: &NormalizedValue) -> bool {
    if a.ty != b.ty {
        return false;
    }
    match (&a.canonical, &b.canonical) {
        (
            Canonical::Quantity { value: x, unit: ux },
            Canonical::Quantity { value: y, unit: uy },
        ) => {
            let close = x == y || (x - y).abs() <= QUANTITY_REL_TOL * x.abs().max(y.abs());
            close && ux.to_lowercase() == uy.to_lowercase()
        }
        (x, y) => x == y,
    }
}

/// One recognizer of the rule table.
#[derive(Debug, Clone, Copy)]
pub struct Rule {
    pub id: &'static str,
    pub pattern: &'static str,
    pub value_type: ValueType,
    /// Canonicalization applied when the rule fires.
    pub canon: &'static str,
    /// A cell text the rule recognizes, with the heading it is read under.
    pub example: (&'static str, &'static str),
}

pub const RULES: &[Rule] = &[
    Rule {
        id: "placeholder",
        pattern: r"^(?i:|-|–|—|n/a|na|\?|none|unknown|tba|tbd)$",
        value_type: ValueType::Other,
        canon: "empty",
        example: ("n/a", "population"),
    },
    Rule {
        id: "url",
        pattern: r"^(?i:https?://|www\.)\S+$",
        value_type: ValueType::Url,
        canon: "text",
        example: ("https://example.org/page", "website"),
    },
    Rule {
        id: "geo-degrees",
        pattern: r"^[+-]?\d{1,2}(?:\.\d+)?°\s*[NSns]?[,;]?\s+[+-]?\d{1,3}(?:\.\d+)?°\s*[EWew]?$",
        value_type: ValueType::GeoCoordinate,
        canon: "text",
        example: ("59.91°N 10.75°E", "coordinates"),
    },
    Rule {
        id: "geo-hemisphere",
        pattern: r"^\d{1,2}(?:\.\d+)?\s*[NSns][,;]?\s+\d{1,3}(?:\.\d+)?\s*[EWew]$",
        value_type: ValueType::GeoCoordinate,
        canon: "text",
        example: ("59.91 N 10.75 E", "location"),
    },
    Rule {
        id: "date-dmy-text",
        pattern: r"^(\d{1,2})\s+([A-Za-z]+)\.?,?\s+(\d{4})$",
        value_type: ValueType::DateTime,
        canon: "date",
        example: ("5 October 1987", "date"),
    },
    Rule {
        id: "date-mdy-text",
        pattern: r"^([A-Za-z]+)\.?\s+(\d{1,2}),?\s+(\d{4})$",
        value_type: ValueType::DateTime,
        canon: "date",
        example: ("October 5, 1987", "released"),
    },
    Rule {
        id: "date-iso",
        pattern: r"^(\d{4})-(\d{1,2})-(\d{1,2})$",
        value_type: ValueType::DateTime,
        canon: "date",
        example: ("1987-10-05", "date"),
    },
    Rule {
        id: "date-dmy-slash",
        pattern: r"^(\d{1,2})/(\d{1,2})/(\d{4})$",
        value_type: ValueType::DateTime,
        canon: "date",
        example: ("05/10/1987", "date"),
    },
    Rule {
        id: "date-range",
        pattern: r"^(.+?)(?:\s+to\s+|\s*[–—]\s*|\s+-\s+)(.+)$",
        value_type: ValueType::DateTime,
        canon: "date-range",
        example: ("5 October 1987 to 30 December 1987", "period"),
    },
    Rule {
        id: "date-range-bracket",
        pattern: r"^\[(\d{4}-\d{2}-\d{2}),\s*(\d{4}-\d{2}-\d{2})\]$",
        value_type: ValueType::DateTime,
        canon: "date-range",
        example: ("[1987-10-05, 1987-12-30]", "period"),
    },
    Rule {
        id: "year-range",
        pattern: r"^(\d{4})\s*(?:--|–|—|-|to)\s*(\d{4}|\d{2})$",
        value_type: ValueType::DateTime,
        canon: "year-range",
        example: ("1998–99", "season"),
    },
    Rule {
        id: "year-range-bracket",
        pattern: r"^\[(\d{4}),\s*(\d{4})\]$",
        value_type: ValueType::DateTime,
        canon: "year-range",
        example: ("[1998,1999]", "season"),
    },
    Rule {
        id: "time",
        pattern: r"^(\d{1,2}):(\d{2})(?::(\d{2}))?\s*(?i:([ap])\.?m\.?)?$",
        value_type: ValueType::DateTime,
        canon: "time",
        example: ("9:05", "departure"),
    },
    Rule {
        id: "year",
        pattern: r"^(\d{4})$",
        value_type: ValueType::DateTime,
        canon: "year",
        example: ("1982", "year"),
    },
    Rule {
        id: "quantity",
        pattern: r"^([$€£¥])?\s*([+\-−])?\s*(\d{1,3}(?:,\d{3})+|\d+)?(\.\d+)?(.*)$",
        value_type: ValueType::Quantity,
        canon: "number-unit",
        example: ("100 m", "length"),
    },
];

/// Heading terms that make a column read as dates.
pub const DATE_KEYWORDS: &[&str] = &[
    "year",
    "birth",
    "born",
    "date",
    "founded",
    "created",
    "built",
    "established",
    "opened",
    "released",
    "died",
    "death",
];

static COMPILED: LazyLock<BTreeMap<&'static str, Regex>> = LazyLock::new(|| {
    RULES
        .iter()
        .map(|r| (r.id, Regex::new(r.pattern).expect("rule pattern compiles")))
        .collect()
});

fn rule(id: &str) -> &'static Regex {
    &COMPILED[id]
}

static ORDINAL_SUFFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i:st|nd|rd|th)\b").unwrap());

static LEADING_YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}\b").unwrap());

/// The rule table as tab-separated `id, value type, canonicalization, pattern`.
pub fn rules_tsv() -> String {
    let mut out = String::from("# cellac-rules v1\nid\ttype\tcanon\tpattern\n");
    for r in RULES {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.value_type, r.canon, r.pattern));
    }
    out
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_placeholder(raw: &str) -> bool {
    rule("placeholder").is_match(raw.trim())
}

fn has_date_keyword(heading: &str) -> bool {
    let h = heading.to_lowercase();
    DATE_KEYWORDS.iter().any(|k| h.contains(k))
}

/// Classify a single cell.
pub fn classify_cell(raw: &str, heading: &str, has_entity_link: bool) -> ValueType {
    if has_entity_link {
        return ValueType::Entity;
    }
    let text = collapse_ws(raw.trim());
    if is_placeholder(&text) {
        return ValueType::Other;
    }
    if rule("url").is_match(&text) {
        return ValueType::Url;
    }
    if rule("geo-degrees").is_match(&text) || rule("geo-hemisphere").is_match(&text) {
        return ValueType::GeoCoordinate;
    }
    let keyword = has_date_keyword(heading);
    if let Some(dt) = parse_datetime(&text) {
        // A bare year reads as a date only under a date-like heading.
        if !matches!(dt, Canonical::Year(_)) || keyword {
            return ValueType::DateTime;
        }
    }
    if keyword && LEADING_YEAR.is_match(&text) {
        return ValueType::DateTime;
    }
    if parse_quantity(&text).is_some() {
        return ValueType::Quantity;
    }
    ValueType::String
}

/// Vote counts of a column's non-empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnTyping {
    pub votes: BTreeMap<ValueType, usize>,
}

impl ColumnTyping {
    pub fn from_cells<'a, I>(cells: I, heading: &str) -> Self
    where
        I: IntoIterator<Item = (&'a str, bool)>,
    {
        let mut votes = BTreeMap::new();
        for (raw, linked) in cells {
            let ty = classify_cell(raw, heading, linked);
            if ty != ValueType::Other {
                *votes.entry(ty).or_insert(0) += 1;
            }
        }
        ColumnTyping { votes }
    }

    pub fn non_empty(&self) -> usize {
        self.votes.values().sum()
    }

    /// Majority type(s); ties yield several types, no votes yields `{Other}`.
    pub fn types(&self) -> BTreeSet<ValueType> {
        let Some(&best) = self.votes.values().max() else {
            return BTreeSet::from([ValueType::Other]);
        };
        self.votes
            .iter()
            .filter(|(_, &n)| n == best)
            .map(|(&t, _)| t)
            .collect()
    }

    /// Fraction of non-empty cells voting for the majority type.
    pub fn agreement(&self) -> f64 {
        let n = self.non_empty();
        if n == 0 {
            return 0.0;
        }
        *self.votes.values().max().unwrap() as f64 / n as f64
    }
}

/// Majority-vote column type over `(cell text, has entity link)` pairs.
pub fn detect_column_type<'a, I>(cells: I, heading: &str) -> BTreeSet<ValueType>
where
    I: IntoIterator<Item = (&'a str, bool)>,
{
    ColumnTyping::from_cells(cells, heading).types()
}

/// Normalize `raw` under value type `ty`. Input the type's rules cannot parse
/// falls back to a plain string.
pub fn normalize(raw: &str, ty: ValueType) -> NormalizedValue {
    let text = collapse_ws(raw.trim());
    let parsed = match ty {
        ValueType::Entity => return NormalizedValue::entity(&text),
        ValueType::Quantity => parse_quantity(&text),
        ValueType::DateTime => parse_datetime(&text),
        ValueType::String | ValueType::GeoCoordinate | ValueType::Url | ValueType::Other => {
            return NormalizedValue::text(ty, &text)
        }
    };
    match parsed {
        Some(canonical) => NormalizedValue { ty, canonical },
        None => NormalizedValue::text(ValueType::String, &text),
    }
}

fn month_number(name: &str) -> Option<u32> {
    let n = name.to_lowercase();
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
    MONTHS
        .iter()
        .position(|m| *m == n || (n.len() >= 3 && m.starts_with(&n) && (n.len() == 3 || n == "sept")))
        .map(|i| i as u32 + 1)
}

fn ymd(y: &str, m: u32, d: &str) -> Option<String> {
    let y: i32 = y.parse().ok()?;
    let d: u32 = d.parse().ok()?;
    NaiveDate::from_ymd_opt(y, m, d).map(|date| date.format("%Y-%m-%d").to_string())
}

fn parse_full_date(text: &str) -> Option<String> {
    if let Some(c) = rule("date-dmy-text").captures(text) {
        return ymd(&c[3], month_number(&c[2])?, &c[1]);
    }
    if let Some(c) = rule("date-mdy-text").captures(text) {
        return ymd(&c[3], month_number(&c[1])?, &c[2]);
    }
    if let Some(c) = rule("date-iso").captures(text) {
        return ymd(&c[1], c[2].parse().ok()?, &c[3]);
    }
    if let Some(c) = rule("date-dmy-slash").captures(text) {
        return ymd(&c[3], c[2].parse().ok()?, &c[1]);
    }
    None
}

fn parse_year_range(text: &str) -> Option<(i32, i32)> {
    let c = rule("year-range")
        .captures(text)
        .or_else(|| rule("year-range-bracket").captures(text))?;
    let start: i32 = c[1].parse().ok()?;
    let mut end: i32 = c[2].parse().ok()?;
    if c[2].len() == 2 {
        end += start / 100 * 100;
        if end < start {
            end += 100;
        }
    }
    (start <= end).then_some((start, end))
}

fn parse_time(text: &str) -> Option<String> {
    let c = rule("time").captures(text)?;
    let mut hour: u32 = c[1].parse().ok()?;
    let minute: u32 = c[2].parse().ok()?;
    let second: u32 = c.get(3).map_or(Ok(0), |m| m.as_str().parse()).ok()?;
    if let Some(half) = c.get(4) {
        if hour == 0 || hour > 12 {
            return None;
        }
        let pm = half.as_str().eq_ignore_ascii_case("p");
        hour = match (pm, hour) {
            (false, 12) => 0,
            (true, 12) => 12,
            (true, h) => h + 12,
            (false, h) => h,
        };
    }
    (hour < 24 && minute < 60 && second < 60).then(|| format!("{hour:02}:{minute:02}:{second:02}"))
}

fn parse_datetime_exact(text: &str) -> Option<Canonical> {
    if let Some(c) = rule("date-range-bracket").captures(text) {
        let (a, b) = (parse_full_date(&c[1])?, parse_full_date(&c[2])?);
        return (a <= b).then_some(Canonical::DateRange(a, b));
    }
    if let Some(d) = parse_full_date(text) {
        return Some(Canonical::Date(d));
    }
    if let Some((a, b)) = parse_year_range(text) {
        return Some(Canonical::YearRange(a, b));
    }
    if let Some(c) = rule("date-range").captures(text) {
        if let (Some(a), Some(b)) = (parse_full_date(c[1].trim()), parse_full_date(c[2].trim())) {
            if a <= b {
                return Some(Canonical::DateRange(a, b));
            }
        }
    }
    if let Some(t) = parse_time(text) {
        return Some(Canonical::Time(t));
    }
    if let Some(c) = rule("year").captures(text) {
        return c[1].parse().ok().map(Canonical::Year);
    }
    None
}

/// Head of a composite value such as `1987 (est.)` or `a; b`.
fn composite_head(text: &str) -> Option<&str> {
    let cut = text.find(['(', '[', ';']).filter(|&i| i > 0)?;
    Some(text[..cut].trim_end_matches([' ', ',']))
}

fn parse_datetime(text: &str) -> Option<Canonical> {
    parse_datetime_exact(text).or_else(|| composite_head(text).and_then(parse_datetime_exact))
}

fn parse_quantity(text: &str) -> Option<Canonical> {
    let c = rule("quantity").captures(text)?;
    if c.get(3).is_none() && c.get(4).is_none() {
        return None;
    }
    let digits = c.get(3).map_or("0", |m| m.as_str()).replace(',', "");
    let frac = c.get(4).map_or("", |m| m.as_str());
    let mut value: f64 = format!("{digits}{frac}").parse().ok()?;
    if c.get(2).is_some_and(|m| m.as_str() != "+") {
        value = -value;
    }
    if !value.is_finite() {
        return None;
    }
    let rest = c.get(5).map_or("", |m| m.as_str());
    let rest_trim = rest.trim_start();
    if let Some(first) = rest_trim.chars().next() {
        let unit_like = first.is_alphabetic() || "%°/$€£'\"′″²³µ([".contains(first);
        if !unit_like || ORDINAL_SUFFIX.is_match(rest) {
            return None;
        }
    }
    let unit_part = match rest_trim.find(['(', '[', ';']) {
        Some(i) => &rest_trim[..i],
        None => rest_trim,
    };
    let mut unit = unit_part.trim().trim_end_matches(',').trim().to_string();
    if let Some(cur) = c.get(1) {
        unit = if unit.is_empty() {
            cur.as_str().to_string()
        } else {
            format!("{} {unit}", cur.as_str())
        };
    }
    Some(Canonical::Quantity { value, unit })
}
