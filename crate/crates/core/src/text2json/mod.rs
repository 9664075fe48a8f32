//! Structured-extraction instances and their name-anchored soft-IoU scorer.
//!
//! An instance mixes 3–20 entity cards of one subset with 3–10 filler
//! passages, joined by blank lines, and ends with the subset's extraction
//! instruction. Gold answers are records with a unique `name` and two fields.

mod pools;
mod score;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use score::{score, EntryScore, ScoreReport};

pub const MIN_ENTRIES: usize = 3;
pub const MAX_ENTRIES: usize = 20;
pub const MIN_PASSAGES: usize = 3;
pub const MAX_PASSAGES: usize = 10;
pub const SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Doctors,
    Movies,
    Organizations,
    Products,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::Doctors, Subset::Movies, Subset::Organizations, Subset::Products];

    pub fn required_fields(self) -> [&'static str; 2] {
        match self {
            Subset::Doctors => ["specialization", "city"],
            Subset::Movies => ["country", "year"],
            Subset::Organizations => ["address", "site"],
            Subset::Products => ["material", "color"],
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Doctors => "doctors",
            Subset::Movies => "movies",
            Subset::Organizations => "organizations",
            Subset::Products => "products",
        })
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "doctors" => Ok(Subset::Doctors),
            "movies" => Ok(Subset::Movies),
            "organizations" => Ok(Subset::Organizations),
            "products" => Ok(Subset::Products),
            other => Err(Error::invalid(format!("unknown subset `{other}`"))),
        }
    }
}

/// One gold or predicted record; serializes flat as `{"name": …, <field>: …}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub name: String,
    #[serde(flatten)]
    pub fields: BTreeMap<String, String>,
}

impl EntryRecord {
    pub fn new(name: impl Into<String>, fields: &[(&str, &str)]) -> Self {
        Self { name: name.into(), fields: fields.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Text2JsonInstance {
    pub subset: Subset,
    /// Cards and passages joined by [`SEPARATOR`], then the extraction instruction.
    pub prompt_text: String,
    pub gold: Vec<EntryRecord>,
    pub n_passages: usize,
}

/// The extraction instruction shown after the context.
pub fn extraction_prompt(subset: Subset) -> &'static str {
    match subset {
        Subset::Doctors => "Find all doctor review cards in the text and compose a JSON object with the following fields: name --- doctor's name; specialization --- specialization; city --- city. There is no need to reproduce the reviews. Output only JSON. Do not skip cards and do not produce duplicates.",
        Subset::Movies => "Find all movie review cards in the text and compose a JSON object with the following fields: name --- movie title; country --- country of production; year --- year of release. There is no need to reproduce the reviews. Output only JSON. Do not skip cards and do not produce duplicates.",
        Subset::Organizations => "Find all organization cards in the text and compose a JSON object with the following fields: name --- the name of the organization (exactly as written in the card); address --- the address; site --- the website. There is no need to reproduce the reviews. Output only JSON. Do not skip cards and do not produce duplicates.",
        Subset::Products => "Find all product cards in the text and compose a JSON object with the following fields: name --- product name (exactly as written in the card); material --- material; color --- color. There is no need to reproduce the descriptions. Output only JSON. Do not skip cards and do not produce duplicates.",
    }
}

/// Parses a subset name and returns its extraction instruction.
pub fn extraction_prompt_for(subset: &str) -> Result<&'static str> {
    subset.parse().map(extraction_prompt)
}

/// Paragraphs of a filler corpus: blank-line separated, trimmed, non-empty.
pub fn read_filler_corpus(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::at_path(path))?;
    let passages: Vec<String> =
        text.split("\n\n").map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect();
    if passages.len() < MIN_PASSAGES {
        return Err(Error::invalid(format!(
            "{}: filler corpus holds {} passages, need at least {MIN_PASSAGES}",
            path.display(),
            passages.len()
        )));
    }
    Ok(passages)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// One card and its gold record.
fn make_entry(subset: Subset, rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> (String, EntryRecord) {
    use pools::*;
    loop {
        let (name, card, fields): (String, String, [(&str, String); 2]) = match subset {
            Subset::Doctors => {
                let name = format!("{} {}", pick(rng, FIRST_NAMES), pick(rng, SURNAMES));
                let (spec, city) = (pick(rng, SPECIALIZATIONS), pick(rng, CITIES));
                let card = format!("{name}, {spec}, {city}\n{}", pick(rng, DOCTOR_REVIEWS));
                (name, card, [("specialization", spec.into()), ("city", city.into())])
            }
            Subset::Movies => {
                let name = format!("The {} {}", pick(rng, TITLE_ADJECTIVES), pick(rng, TITLE_NOUNS));
                let (country, year) = (pick(rng, COUNTRIES), rng.gen_range(1950..=2024).to_string());
                let card = format!("{name}, {country}, {year}\n{}", pick(rng, MOVIE_REVIEWS));
                (name, card, [("country", country.into()), ("year", year)])
            }
            Subset::Organizations => {
                let name = format!("{} {} {}", pick(rng, ORG_PREFIXES), pick(rng, ORG_KINDS), pick(rng, ORG_SUFFIXES));
                let address = format!("{} {}, {}", rng.gen_range(1..=240), pick(rng, STREETS), pick(rng, CITIES));
                let slug: String = name
                    .to_ascii_lowercase()
                    .split(|c: char| !c.is_ascii_alphanumeric())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join("-");
                let site = format!("www.{slug}.example");
                let card = format!("{name}, {address}, {site}");
                (name, card, [("address", address), ("site", site)])
            }
            Subset::Products => {
                let name = format!(
                    "{} {} {}",
                    pick(rng, PRODUCT_ADJECTIVES),
                    pick(rng, PRODUCT_NOUNS),
                    pick(rng, PRODUCT_MODELS)
                );
                let (color, material) = (pick(rng, COLORS), pick(rng, MATERIALS));
                let card = format!(
                    "Product name: {name}\n* Color: {color}\n* Material: {material}\n* Length: {} cm\n* Category: {}\n{}",
                    rng.gen_range(5..=180),
                    pick(rng, CATEGORIES),
                    pick(rng, PRODUCT_BLURBS)
                );
                (name, card, [("material", material.into()), ("color", color.into())])
            }
        };
        if used.insert(name.clone()) {
            let fields = fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            return (card, EntryRecord { name, fields });
        }
    }
}

/// Seeded instance. Filler comes from `filler` when given, else the built-in pool.
pub fn generate_instance(subset: Subset, seed: u64, filler: Option<&[String]>) -> Result<Text2JsonInstance> {
    let builtin: Vec<String>;
    let pool: &[String] = match filler {
        Some(p) => p,
        None => {
            builtin = pools::FILLER.iter().map(|s| s.to_string()).collect();
            &builtin
        }
    };
    if pool.len() < MIN_PASSAGES {
        return Err(Error::invalid(format!("filler pool holds {} passages, need {MIN_PASSAGES}", pool.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_entries = rng.gen_range(MIN_ENTRIES..=MAX_ENTRIES);
    let n_passages = rng.gen_range(MIN_PASSAGES..=MAX_PASSAGES.min(pool.len()));

    let mut used = BTreeSet::new();
    let mut segments = Vec::with_capacity(n_entries + n_passages);
    let mut gold = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let (card, record) = make_entry(subset, &mut rng, &mut used);
        segments.push(card);
        gold.push(record);
    }
    segments.extend(pool.choose_multiple(&mut rng, n_passages).cloned());
    segments.shuffle(&mut rng);
    segments.push(extraction_prompt(subset).to_string());
    Ok(Text2JsonInstance { subset, prompt_text: segments.join(SEPARATOR), gold, n_passages })
}

impl Text2JsonInstance {
    /// Writes `<stem>.prompt.txt` and `<stem>.gold.json`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        let prompt = dir.join(format!("{stem}.prompt.txt"));
        std::fs::write(&prompt, &self.prompt_text).map_err(Error::at_path(&prompt))?;
        let gold = dir.join(format!("{stem}.gold.json"));
        std::fs::write(&gold, serde_json::to_string_pretty(&self.gold)?).map_err(Error::at_path(&gold))
    }
}

/// Reads a gold file written by [`Text2JsonInstance::save`].
pub fn read_gold(path: impl AsRef<Path>) -> Result<Vec<EntryRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::at_path(path))?;
    Ok(serde_json::from_str(&text)?)
}
