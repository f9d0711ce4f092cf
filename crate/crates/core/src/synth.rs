//! Seeded synthetic world: entities with planted attribute values, a table
//! corpus drawn from them with formatting variation, heading synonyms,
//! ambiguous headings, blanks and wrong values, a partial and partly
//! outdated knowledge base, and graded table pairs.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::candidates::Candidate;
use crate::eval::{Qrels, TestCollection};
use crate::kb::{Kb, Triple};
use crate::matching::GradedPair;
use crate::table::{CellRecord, PageMeta, TableRecord};
use crate::types::{normalize, NormalizedValue, ValueType};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    /// Multiplier on entity and table counts.
    pub scale: f64,
    /// Probability that a table cell with a known value is left blank.
    pub blank_rate: f64,
    /// Probability that a table cell holds another entity's value.
    pub wrong_rate: f64,
    /// Probability that a cell whose attribute is missing holds a value.
    pub spurious_rate: f64,
    /// Fraction of low-quality tables: little-visited pages with many
    /// wrong values.
    pub sloppy_rate: f64,
    /// Wrong-value probability in low-quality tables.
    pub sloppy_wrong_rate: f64,
    pub pairs: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            scale: 1.0,
            blank_rate: 0.08,
            wrong_rate: 0.07,
            spurious_rate: 0.05,
            sloppy_rate: 0.25,
            sloppy_wrong_rate: 0.35,
            pairs: 600,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Entity(usize),
    Date(i32, i32),
    /// Year of the date attribute plus an offset.
    YearOf(usize, i32),
    /// Death date: some decades after the birth date attribute.
    DateAfter(usize),
    Quantity(&'static str, f64, f64, u32),
    /// Fraction of another quantity attribute.
    ScaledOf(usize, f64, f64),
    Text(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
struct KbSpec {
    predicate: &'static str,
    label: &'static str,
    coverage: f64,
    /// Probability of a wrong object, alongside or instead of the true one.
    stale: f64,
    /// Attribute whose value replaces the true one when stale.
    stale_from: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Attr {
    #[allow(dead_code)]
    name: &'static str,
    kind: Kind,
    missing: f64,
    /// Missing exactly when this other attribute is missing.
    missing_with: Option<usize>,
    kb: Option<KbSpec>,
}

struct Family {
    name: &'static str,
    title: &'static str,
    caption: &'static str,
    columns: &'static [(usize, &'static [&'static str])],
}

struct Topic {
    name: &'static str,
    core_heading: &'static [&'static str],
    size: usize,
    attrs: &'static [Attr],
    families: &'static [Family],
    tables_per_family: usize,
}

const fn kb(predicate: &'static str, label: &'static str, coverage: f64) -> Option<KbSpec> {
    Some(KbSpec {
        predicate,
        label,
        coverage,
        stale: 0.35,
        stale_from: None,
    })
}

const fn attr(name: &'static str, kind: Kind, missing: f64, kb: Option<KbSpec>) -> Attr {
    Attr {
        name,
        kind,
        missing,
        missing_with: None,
        kb,
    }
}

const PERSON: usize = 1;
const CITY: usize = 2;
const COUNTRY: usize = 3;

const GENRES: &[&str] = &[
    "Drama", "Comedy", "Thriller", "Western", "Musical", "Documentary", "Horror", "Romance", "Science fiction",
];
const AWARDS: &[&str] = &[
    "Best Picture",
    "Best Director",
    "Best Actor",
    "Best Actress",
    "Best Screenplay",
    "Best Original Score",
    "Best Cinematography",
];
const OCCUPATIONS: &[&str] = &[
    "Actor", "Film director", "Writer", "Producer", "Composer", "Painter", "Politician", "Architect",
];
const MOTTOS: &[&str] = &[
    "Strength in unity",
    "Ever forward",
    "By sea and land",
    "Light and truth",
    "Faith and labour",
    "Freedom and order",
    "Onward together",
];

const FILM_ATTRS: &[Attr] = &[
    attr("director", Kind::Entity(PERSON), 0.0, kb("dbo:director", "director", 0.8)),
    Attr {
        name: "release date",
        kind: Kind::Date(1950, 2016),
        missing: 0.0,
        missing_with: None,
        kb: Some(KbSpec {
            predicate: "dbo:releaseDate",
            label: "release date",
            coverage: 0.7,
            stale: 0.2,
            stale_from: None,
        }),
    },
    attr("release year", Kind::YearOf(1, 0), 0.0, None),
    attr("runtime", Kind::Quantity("min", 80.0, 200.0, 0), 0.05, kb("dbo:runtime", "runtime", 0.6)),
    attr("gross", Kind::Quantity("million", 1.0, 900.0, 1), 0.35, None),
    attr("award", Kind::Text(AWARDS), 0.6, kb("dbo:award", "award", 0.6)),
    Attr {
        name: "award year",
        kind: Kind::YearOf(1, 1),
        missing: 0.0,
        missing_with: Some(5),
        kb: None,
    },
    attr("genre", Kind::Text(GENRES), 0.0, kb("dbo:genre", "genre", 0.7)),
];

const FILM_FAMILIES: &[Family] = &[
    Family {
        name: "films",
        title: "List of {} films",
        caption: "Films",
        columns: &[
            (0, &["director", "directed by"]),
            (1, &["release date", "released", "release"]),
            (3, &["runtime", "running time", "length"]),
            (7, &["genre", "type"]),
        ],
    },
    Family {
        name: "box office",
        title: "{} box office",
        caption: "Highest-grossing films",
        columns: &[(2, &["year"]), (4, &["gross", "box office", "worldwide gross"]), (0, &["director"])],
    },
    Family {
        name: "awards",
        title: "{} film awards",
        caption: "Award winners and nominees",
        columns: &[(6, &["year"]), (5, &["award", "category"]), (0, &["director", "directed by"])],
    },
];

const PERSON_ATTRS: &[Attr] = &[
    attr("birth date", Kind::Date(1900, 1990), 0.0, kb("dbo:birthDate", "birth date", 0.8)),
    Attr {
        name: "death date",
        kind: Kind::DateAfter(0),
        missing: 0.65,
        missing_with: None,
        kb: Some(KbSpec {
            predicate: "dbo:deathDate",
            label: "death date",
            coverage: 0.7,
            stale: 0.1,
            stale_from: None,
        }),
    },
    attr("nationality", Kind::Entity(COUNTRY), 0.0, kb("dbo:nationality", "nationality", 0.8)),
    attr("birth place", Kind::Entity(CITY), 0.0, kb("dbo:birthPlace", "birth place", 0.7)),
    attr("height", Kind::Quantity("m", 1.5, 2.05, 2), 0.3, kb("dbo:height", "height", 0.5)),
    attr("occupation", Kind::Text(OCCUPATIONS), 0.0, kb("dbo:occupation", "occupation", 0.6)),
];

const PERSON_FAMILIES: &[Family] = &[
    Family {
        name: "people",
        title: "List of {} people",
        caption: "People",
        columns: &[
            (0, &["born", "birth date", "date of birth"]),
            (1, &["died", "death date", "date of death"]),
            (2, &["nationality", "citizenship"]),
            (5, &["occupation", "profession"]),
        ],
    },
    Family {
        name: "births",
        title: "{} births",
        caption: "Notable births",
        columns: &[(0, &["date"]), (3, &["place", "birthplace", "birth place"]), (5, &["occupation"])],
    },
    Family {
        name: "deaths",
        title: "{} deaths",
        caption: "Notable deaths",
        columns: &[(1, &["date"]), (2, &["nationality", "country"]), (4, &["height"])],
    },
];

const CITY_ATTRS: &[Attr] = &[
    attr("country", Kind::Entity(COUNTRY), 0.0, kb("dbo:country", "country", 0.9)),
    Attr {
        name: "population",
        kind: Kind::Quantity("", 10_000.0, 5_000_000.0, 0),
        missing: 0.0,
        missing_with: None,
        kb: Some(KbSpec {
            predicate: "dbo:populationTotal",
            label: "population total",
            coverage: 0.75,
            stale: 0.4,
            stale_from: Some(2),
        }),
    },
    attr("census population", Kind::ScaledOf(1, 0.8, 0.95), 0.0, None),
    attr("area", Kind::Quantity("km2", 10.0, 2000.0, 1), 0.0, kb("dbo:areaTotal", "area total", 0.6)),
    attr("founded", Kind::Date(800, 1900), 0.3, kb("dbo:foundingYear", "founding year", 0.5)),
    attr("mayor", Kind::Entity(PERSON), 0.4, kb("dbo:leaderName", "leader name", 0.5)),
    attr("motto", Kind::Text(MOTTOS), 0.7, None),
];

const CITY_FAMILIES: &[Family] = &[
    Family {
        name: "cities",
        title: "List of cities in {}",
        caption: "Cities",
        columns: &[
            (0, &["country", "nation"]),
            (1, &["population", "inhabitants", "pop."]),
            (3, &["area", "area km2", "surface"]),
            (4, &["founded", "established"]),
        ],
    },
    Family {
        name: "census",
        title: "{} census 2000",
        caption: "Population at the 2000 census",
        columns: &[(2, &["population"]), (3, &["area"]), (0, &["country"])],
    },
    Family {
        name: "civic",
        title: "{} municipal government",
        caption: "Municipalities",
        columns: &[(5, &["mayor", "leader"]), (6, &["motto"]), (4, &["founded"])],
    },
];

const TOPICS: &[Topic] = &[
    Topic {
        name: "film",
        core_heading: &["film", "title"],
        size: 320,
        attrs: FILM_ATTRS,
        families: FILM_FAMILIES,
        tables_per_family: 60,
    },
    Topic {
        name: "person",
        core_heading: &["name", "person"],
        size: 400,
        attrs: PERSON_ATTRS,
        families: PERSON_FAMILIES,
        tables_per_family: 60,
    },
    Topic {
        name: "city",
        core_heading: &["city", "town"],
        size: 240,
        attrs: CITY_ATTRS,
        families: CITY_FAMILIES,
        tables_per_family: 50,
    },
    Topic {
        name: "country",
        core_heading: &["country"],
        size: 30,
        attrs: &[],
        families: &[],
        tables_per_family: 0,
    },
];

const REGIONS: &[&str] = &[
    "Nordic", "Andean", "Baltic", "Iberian", "Alpine", "Pacific", "Saharan", "Balkan", "Caspian", "Celtic",
    "Danubian", "Aegean",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "to", "sa", "vel", "dor", "an", "is", "ul", "mar", "te", "bo", "qui", "zan", "el", "ro",
    "nu", "fi", "gal", "ther", "os", "pa",
];

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// A planted attribute value.
#[derive(Debug, Clone, PartialEq)]
enum Value {
    Entity(String),
    Date(i32, u32, u32),
    Year(i32),
    Quantity(f64, &'static str, u32),
    Text(&'static str),
}

#[derive(Debug, Clone, Copy)]
enum DateStyle {
    Dmy,
    Mdy,
    Iso,
}

impl Value {
    fn raw(&self, names: &HashMap<String, String>, style: DateStyle, thousands: bool) -> (String, Option<String>) {
        match self {
            Value::Entity(id) => (names[id].clone(), Some(id.clone())),
            Value::Date(y, m, d) => {
                let s = match style {
                    DateStyle::Dmy => format!("{d} {} {y}", MONTHS[*m as usize - 1]),
                    DateStyle::Mdy => format!("{} {d}, {y}", MONTHS[*m as usize - 1]),
                    DateStyle::Iso => format!("{y:04}-{m:02}-{d:02}"),
                };
                (s, None)
            }
            Value::Year(y) => (y.to_string(), None),
            Value::Quantity(v, unit, decimals) => {
                let mut num = format!("{:.*}", *decimals as usize, v);
                if thousands && *decimals == 0 && *v >= 1000.0 {
                    num = group_thousands(&num);
                }
                if unit.is_empty() {
                    (num, None)
                } else {
                    (format!("{num} {unit}"), None)
                }
            }
            Value::Text(t) => (t.to_string(), None),
        }
    }

    fn kb_object(&self) -> String {
        match self {
            Value::Entity(id) => id.clone(),
            Value::Date(y, m, d) => format!("{y:04}-{m:02}-{d:02}"),
            Value::Year(y) => y.to_string(),
            Value::Quantity(v, unit, decimals) => {
                let num = format!("{:.*}", *decimals as usize, v);
                if unit.is_empty() {
                    num
                } else {
                    format!("{num} {unit}")
                }
            }
            Value::Text(t) => t.to_string(),
        }
    }

    fn normalized(&self) -> NormalizedValue {
        match self {
            Value::Entity(id) => NormalizedValue::entity(id),
            Value::Date(..) => normalize(&self.kb_object(), ValueType::DateTime),
            Value::Year(y) => normalize(&y.to_string(), ValueType::DateTime),
            Value::Quantity(..) => normalize(&self.kb_object(), ValueType::Quantity),
            Value::Text(t) => normalize(t, ValueType::String),
        }
    }
}

fn group_thousands(digits: &str) -> String {
    let (sign, body) = digits.strip_prefix('-').map_or(("", digits), |b| ("-", b));
    let mut out = String::new();
    for (i, ch) in body.chars().enumerate() {
        if i > 0 && (body.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    format!("{sign}{out}")
}

/// A generated world: corpus records, KB, graded table pairs and the planted
/// value behind every table cell.
#[derive(Debug, Clone, Default)]
pub struct Synthetic {
    pub tables: Vec<TableRecord>,
    pub triples: Vec<Triple>,
    pub labels: Vec<(String, String)>,
    pub pairs: Vec<GradedPair>,
    /// `(table id, row, col)` to planted truth key.
    pub truth: BTreeMap<(String, usize, usize), String>,
}

struct Entity {
    id: String,
    cluster: usize,
    values: Vec<Option<Value>>,
}

fn make_name(rng: &mut ChaCha8Rng, used: &mut std::collections::HashSet<String>) -> String {
    loop {
        let mut word = |n: usize| {
            let s: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
            let mut c = s.chars();
            c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
        };
        let a = word(2);
        let len = if a.len() % 2 == 0 { 2 } else { 3 };
        let b = word(len);
        let name = format!("{a} {b}");
        if used.insert(name.clone()) {
            return name;
        }
    }
}

/// A plausible but wrong variant of `v`, as left behind by extraction
/// errors and outdated revisions.
fn perturb(rng: &mut ChaCha8Rng, v: &Value, topic: &[Entity], ai: usize) -> Value {
    match v {
        Value::Date(y, m, d) => match rng.gen_range(0..3) {
            0 => Value::Date(y + rng.gen_range(1..3) * if rng.gen_bool(0.5) { 1 } else { -1 }, *m, *d),
            1 => Value::Date(*y, (*m % 12) + 1, *d),
            _ => Value::Date(*y, *m, (*d % 28) + 1),
        },
        Value::Year(y) => Value::Year(y + if rng.gen_bool(0.5) { 1 } else { -1 }),
        Value::Quantity(x, unit, dec) => {
            let f = 10f64.powi(*dec as i32);
            Value::Quantity((x * rng.gen_range(0.8..0.95) * f).round() / f, unit, *dec)
        }
        Value::Entity(_) | Value::Text(_) => {
            for _ in 0..8 {
                if let Some(w) = &topic.choose(rng).unwrap().values[ai] {
                    if w != v {
                        return w.clone();
                    }
                }
            }
            v.clone()
        }
    }
}

fn random_date(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> Value {
    Value::Date(rng.gen_range(lo..=hi), rng.gen_range(1..=12), rng.gen_range(1..=28))
}

impl Synthetic {
    pub fn generate(params: &SynthParams) -> Synthetic {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut used_names = std::collections::HashSet::new();
        let mut names: HashMap<String, String> = HashMap::new();

        // Entities first so that attribute values can reference any topic.
        let mut ents: Vec<Vec<Entity>> = Vec::new();
        for topic in TOPICS {
            let n = ((topic.size as f64 * params.scale).round() as usize).max(12);
            let clusters = (n / 20).clamp(1, REGIONS.len());
            let mut list = Vec::with_capacity(n);
            for i in 0..n {
                let name = make_name(&mut rng, &mut used_names);
                let id = format!("{}:{}", topic.name, name.replace(' ', "_"));
                names.insert(id.clone(), name);
                list.push(Entity {
                    id,
                    cluster: i % clusters,
                    values: Vec::new(),
                });
            }
            ents.push(list);
        }
        let ids: Vec<Vec<String>> = ents.iter().map(|l| l.iter().map(|e| e.id.clone()).collect()).collect();

        for (t, topic) in TOPICS.iter().enumerate() {
            for e in ents[t].iter_mut() {
                let mut values: Vec<Option<Value>> = Vec::with_capacity(topic.attrs.len());
                for a in topic.attrs {
                    let missing = match a.missing_with {
                        Some(other) => values[other].is_none(),
                        None => rng.gen_bool(a.missing),
                    };
                    let v = match a.kind {
                        Kind::Entity(target) => Value::Entity(ids[target].choose(&mut rng).unwrap().clone()),
                        Kind::Date(lo, hi) => random_date(&mut rng, lo, hi),
                        Kind::YearOf(src, off) => match &values[src] {
                            Some(Value::Date(y, ..)) => Value::Year(y + off),
                            _ => Value::Year(2000 + off),
                        },
                        Kind::DateAfter(src) => match &values[src] {
                            Some(Value::Date(y, ..)) => {
                                let lo = (y + 40).min(2017);
                                random_date(&mut rng, lo, (y + 90).clamp(lo, 2018))
                            }
                            _ => random_date(&mut rng, 1950, 2018),
                        },
                        Kind::Quantity(unit, lo, hi, dec) => {
                            let f = 10f64.powi(dec as i32);
                            Value::Quantity((rng.gen_range(lo..hi) * f).round() / f, unit, dec)
                        }
                        Kind::ScaledOf(src, lo, hi) => match &values[src] {
                            Some(Value::Quantity(v, unit, dec)) => {
                                let f = 10f64.powi(*dec as i32);
                                Value::Quantity((v * rng.gen_range(lo..hi) * f).round() / f, unit, *dec)
                            }
                            _ => Value::Quantity(1000.0, "", 0),
                        },
                        Kind::Text(words) => Value::Text(words.choose(&mut rng).unwrap()),
                    };
                    values.push((!missing).then_some(v));
                }
                e.values = values;
            }
        }

        let mut out = Synthetic::default();
        out.build_kb(&mut rng, &ents);
        out.build_tables(&mut rng, params, &ents, &names);
        out.build_pairs(&mut rng, params);
        out
    }

    fn build_kb(&mut self, rng: &mut ChaCha8Rng, ents: &[Vec<Entity>]) {
        for (t, topic) in TOPICS.iter().enumerate() {
            for (ai, a) in topic.attrs.iter().enumerate() {
                let Some(spec) = a.kb else { continue };
                if !self.labels.iter().any(|(p, _)| p == spec.predicate) {
                    self.labels.push((spec.predicate.to_string(), spec.label.to_string()));
                }
                for e in &ents[t] {
                    let push = |out: &mut Vec<Triple>, v: &Value| {
                        out.push(Triple {
                            subject: e.id.clone(),
                            predicate: spec.predicate.to_string(),
                            object: v.kb_object(),
                        })
                    };
                    match &e.values[ai] {
                        Some(v) if rng.gen_bool(spec.coverage) => {
                            if rng.gen_bool(spec.stale) {
                                let old = spec
                                    .stale_from
                                    .and_then(|s| e.values[s].clone())
                                    .unwrap_or_else(|| perturb(rng, v, &ents[t], ai));
                                // conflicting objects or an outdated one only
                                if rng.gen_bool(0.5) {
                                    push(&mut self.triples, v);
                                }
                                push(&mut self.triples, &old);
                            } else {
                                push(&mut self.triples, v);
                            }
                        }
                        None if rng.gen_bool(0.03) => {
                            let other = ents[t].choose(rng).unwrap();
                            if let Some(w) = &other.values[ai] {
                                push(&mut self.triples, w);
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }

    fn build_tables(
        &mut self,
        rng: &mut ChaCha8Rng,
        params: &SynthParams,
        ents: &[Vec<Entity>],
        names: &HashMap<String, String>,
    ) {
        for (t, topic) in TOPICS.iter().enumerate() {
            let n_tables = (topic.tables_per_family as f64 * params.scale).round() as usize;
            let clusters = ents[t].iter().map(|e| e.cluster).max().map_or(0, |c| c + 1);
            for family in topic.families {
                for k in 0..n_tables {
                    let cluster = rng.gen_range(0..clusters);
                    let mut members: Vec<&Entity> = ents[t].iter().filter(|e| e.cluster == cluster).collect();
                    members.shuffle(rng);
                    let rows = rng.gen_range(5..=12).min(members.len());
                    members.truncate(rows);
                    // a few rows from elsewhere in the topic
                    if rng.gen_bool(0.3) {
                        members.push(ents[t].choose(rng).unwrap());
                        members.dedup_by(|a, b| a.id == b.id);
                    }
                    let sloppy = rng.gen_bool(params.sloppy_rate);
                    let wrong_rate = if sloppy { params.sloppy_wrong_rate } else { params.wrong_rate };
                    let style = *[DateStyle::Dmy, DateStyle::Mdy, DateStyle::Iso].choose(rng).unwrap();
                    let thousands = rng.gen_bool(0.5);
                    let id = format!(
                        "{}-{}-{:03}",
                        topic.name,
                        family.name.replace(' ', "_"),
                        k
                    );
                    let mut headings = vec![topic.core_heading.choose(rng).unwrap().to_string()];
                    headings.extend(family.columns.iter().map(|(_, hs)| hs.choose(rng).unwrap().to_string()));
                    let mut record_rows = Vec::with_capacity(members.len());
                    for (r, e) in members.iter().enumerate() {
                        let mut row = vec![CellRecord::entity(names[&e.id].clone(), e.id.clone())];
                        for (c, &(ai, _)) in family.columns.iter().enumerate() {
                            let truth = e.values[ai].clone();
                            let key = truth
                                .as_ref()
                                .map_or_else(|| Candidate::Empty.key(), |v| v.normalized().key());
                            self.truth.insert((id.clone(), r, c + 1), key);
                            let shown = match truth {
                                Some(v) if rng.gen_bool(params.blank_rate) => {
                                    let _ = v;
                                    None
                                }
                                Some(v) if rng.gen_bool(wrong_rate) => {
                                    ents[t].choose(rng).unwrap().values[ai].clone().or(Some(v))
                                }
                                Some(v) => Some(v),
                                None if rng.gen_bool(params.spurious_rate) => ents[t].choose(rng).unwrap().values[ai].clone(),
                                None => None,
                            };
                            row.push(match shown {
                                Some(v) => {
                                    let (text, link) = v.raw(names, style, thousands);
                                    CellRecord { text, entity: link }
                                }
                                None => CellRecord::text(""),
                            });
                        }
                        record_rows.push(row);
                    }
                    let page_chars = rng.gen_range(2_000..60_000);
                    let (in_links, page_views) = if sloppy {
                        (rng.gen_range(0..25), rng.gen_range(10..800))
                    } else {
                        (rng.gen_range(20..500), rng.gen_range(500..100_000))
                    };
                    self.tables.push(TableRecord {
                        id,
                        page_title: family.title.replace("{}", REGIONS[cluster % REGIONS.len()]),
                        caption: family.caption.to_string(),
                        headings,
                        rows: record_rows,
                        meta: Some(PageMeta {
                            in_links,
                            out_links: rng.gen_range(5..300),
                            page_views,
                            tables_on_page: rng.gen_range(1..6),
                            table_chars: rng.gen_range(300..page_chars / 2),
                            page_chars,
                        }),
                    });
                }
            }
        }
    }

    fn build_pairs(&mut self, rng: &mut ChaCha8Rng, params: &SynthParams) {
        let family_of = |id: &str| -> (String, String) {
            let mut parts = id.rsplitn(2, '-');
            parts.next();
            let stem = parts.next().unwrap_or_default().to_string();
            let topic = stem.split('-').next().unwrap_or_default().to_string();
            (topic, stem)
        };
        let n = self.tables.len();
        if n < 2 {
            return;
        }
        for _ in 0..params.pairs {
            let a = rng.gen_range(0..n);
            let (ta, fa) = family_of(&self.tables[a].id);
            // bias towards pairs from the same topic so every grade occurs
            let b = loop {
                let b = rng.gen_range(0..n);
                if b == a {
                    continue;
                }
                let (tb, _) = family_of(&self.tables[b].id);
                if tb == ta || rng.gen_bool(0.2) {
                    break b;
                }
            };
            let (_, fb) = family_of(&self.tables[b].id);
            let grade = if fa == fb {
                if self.tables[a].page_title == self.tables[b].page_title {
                    2
                } else {
                    1
                }
            } else {
                0
            };
            self.pairs.push(GradedPair {
                input: self.tables[a].id.clone(),
                candidate: self.tables[b].id.clone(),
                grade,
            });
        }
    }

    pub fn kb(&self) -> Kb {
        Kb::from_triples(self.triples.iter().cloned()).with_labels(self.labels.iter().cloned())
    }

    pub fn triples_tsv(&self) -> String {
        self.triples
            .iter()
            .map(|t| format!("{}\t{}\t{}\n", t.subject, t.predicate, t.object))
            .collect()
    }

    pub fn labels_tsv(&self) -> String {
        self.labels.iter().map(|(p, l)| format!("{p}\t{l}\n")).collect()
    }

    pub fn truth_tsv(&self) -> String {
        self.truth
            .iter()
            .map(|((t, r, c), k)| format!("{t}\t{r}\t{c}\t{k}\n"))
            .collect()
    }

    /// Qrels holding the planted value of each test cell.
    pub fn qrels(&self, collection: &TestCollection) -> Qrels {
        truth_qrels(&self.truth, collection)
    }
}

/// Qrels from a planted-truth map, falling back to the concealed value.
pub fn truth_qrels(truth: &BTreeMap<(String, usize, usize), String>, collection: &TestCollection) -> Qrels {
    let mut map = BTreeMap::new();
    for c in &collection.cells {
        let value = truth
            .get(&(c.table_id.clone(), c.row, c.col))
            .and_then(|k| Candidate::from_key(k))
            .unwrap_or_else(|| c.truth());
        map.insert(c.cell_id.clone(), vec![value]);
    }
    Qrels(map)
}

/// Parse `table\trow\tcol\tkey` lines.
pub fn parse_truth(text: &str) -> crate::Result<BTreeMap<(String, usize, usize), String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [t, r, c, k] = parts.as_slice() else {
            return Err(crate::Error::parse("truth", i + 1, "expected 4 tab-separated fields"));
        };
        let (Ok(r), Ok(c)) = (r.parse(), c.parse()) else {
            return Err(crate::Error::parse("truth", i + 1, "bad row or column"));
        };
        map.insert((t.to_string(), r, c), k.to_string());
    }
    Ok(map)
}
