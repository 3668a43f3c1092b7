//! Scam-token name categories: clones of listed tokens, impersonated
//! companies and websites, meme words and DeFi-service words.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::Address;
use crate::tables::{fmt_f64, Table};

const DEFAULT_LISTS: &str = include_str!("../data/reference_lists.csv");

#[derive(Debug, Error)]
pub enum NamesError {
    #[error("reference list: {0}")]
    Csv(#[from] csv::Error),
    #[error("reference list {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("reference list line {line}: unknown kind {kind:?}")]
    Kind { line: u64, kind: String },
    #[error("reference list line {line}: empty term")]
    EmptyTerm { line: u64 },
    #[error("no .csv list files in {0}")]
    NoLists(String),
}

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and collapses whitespace runs into single spaces.
pub fn normalize_name(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let kept: String = lowered.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Second-level domain of a host name: `www.pornhub.com` → `pornhub`.
pub fn second_level_domain(host: &str) -> String {
    let host = host.trim().trim_end_matches('.').to_lowercase();
    let host = host.split("://").last().unwrap_or("").split('/').next().unwrap_or("");
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty() && *l != "www").collect();
    match labels.len() {
        0 => String::new(),
        1 => labels[0].to_string(),
        n => {
            let sld = labels[n - 2];
            if n >= 3 && matches!(sld, "co" | "com" | "org" | "net" | "ac" | "gov" | "edu") {
                labels[n - 3].to_string()
            } else {
                sld.to_string()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Clone,
    Impersonation,
    Meme,
    Defi,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Clone => "clone",
            Category::Impersonation => "impersonation",
            Category::Meme => "meme",
            Category::Defi => "defi",
        }
    }

    pub const ALL: [Category; 4] = [Category::Clone, Category::Impersonation, Category::Meme, Category::Defi];
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReferenceLists {
    /// Normalized name or alias → canonical verified token name.
    pub verified_tokens: BTreeMap<String, String>,
    pub companies: BTreeSet<String>,
    /// Second-level domains.
    pub websites: BTreeSet<String>,
    pub meme_keywords: BTreeSet<String>,
    pub defi_keywords: BTreeSet<String>,
}

#[derive(Deserialize)]
struct ListRow {
    term: String,
    kind: String,
    #[serde(default)]
    alias_of: Option<String>,
}

impl ReferenceLists {
    /// The small sample lists shipped with the crate.
    pub fn sample() -> Self {
        Self::from_reader(DEFAULT_LISTS.as_bytes()).expect("bundled reference lists")
    }

    /// Reads a `term,kind,alias_of` CSV. Kinds: verified, company, website, meme, defi.
    pub fn from_reader<R: Read>(r: R) -> Result<Self, NamesError> {
        let mut lists = ReferenceLists::default();
        lists.extend_from_reader(r)?;
        Ok(lists)
    }

    pub fn extend_from_reader<R: Read>(&mut self, r: R) -> Result<(), NamesError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r);
        for (i, row) in rdr.deserialize::<ListRow>().enumerate() {
            let row = row?;
            let line = i as u64 + 2;
            let kind = row.kind.to_lowercase();
            let term = if kind == "website" { second_level_domain(&row.term) } else { normalize_name(&row.term) };
            if term.is_empty() {
                return Err(NamesError::EmptyTerm { line });
            }
            match kind.as_str() {
                "verified" => {
                    let canon = match row.alias_of.as_deref().map(normalize_name) {
                        Some(a) if !a.is_empty() => a,
                        _ => term.clone(),
                    };
                    self.verified_tokens.insert(canon.clone(), canon.clone());
                    self.verified_tokens.insert(term, canon);
                }
                "company" => {
                    self.companies.insert(term);
                }
                "website" => {
                    self.websites.insert(term);
                }
                "meme" => {
                    self.meme_keywords.insert(term);
                }
                "defi" => {
                    self.defi_keywords.insert(term);
                }
                other => return Err(NamesError::Kind { line, kind: other.to_string() }),
            }
        }
        Ok(())
    }

    /// Loads a single CSV file, or every `.csv` file of a directory in name order.
    pub fn load(path: &Path) -> Result<Self, NamesError> {
        let io = |source| NamesError::Io { path: path.display().to_string(), source };
        let mut files = vec![];
        if path.is_dir() {
            for e in std::fs::read_dir(path).map_err(io)? {
                let p = e.map_err(io)?.path();
                if p.extension().is_some_and(|x| x == "csv") {
                    files.push(p);
                }
            }
            files.sort();
            if files.is_empty() {
                return Err(NamesError::NoLists(path.display().to_string()));
            }
        } else {
            files.push(path.to_path_buf());
        }
        let mut lists = ReferenceLists::default();
        for f in files {
            let file = std::fs::File::open(&f).map_err(|source| NamesError::Io { path: f.display().to_string(), source })?;
            lists.extend_from_reader(file)?;
        }
        Ok(lists)
    }
}

/// Plain containment for single words, whole-word match for phrases.
fn term_matches(normalized: &str, term: &str) -> bool {
    if term.contains(' ') {
        format!(" {normalized} ").contains(&format!(" {term} "))
    } else {
        normalized.contains(term)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameVerdict {
    pub token: Address,
    pub name: String,
    pub normalized: String,
    pub categories: BTreeSet<Category>,
    /// `category:term` for every hit.
    pub matched_terms: Vec<String>,
}

impl NameVerdict {
    pub fn is_covered(&self) -> bool {
        !self.categories.is_empty()
    }
}

pub fn classify(token: Address, name: &str, lists: &ReferenceLists) -> NameVerdict {
    let normalized = normalize_name(name);
    let mut categories = BTreeSet::new();
    let mut matched = Vec::new();
    if !normalized.is_empty() {
        if let Some(canon) = lists.verified_tokens.get(&normalized) {
            categories.insert(Category::Clone);
            matched.push(format!("clone:{canon}"));
        }
        let keyword_sets = [
            (Category::Impersonation, &lists.companies),
            (Category::Impersonation, &lists.websites),
            (Category::Meme, &lists.meme_keywords),
            (Category::Defi, &lists.defi_keywords),
        ];
        for (cat, set) in keyword_sets {
            for term in set.iter().filter(|t| term_matches(&normalized, t)) {
                categories.insert(cat);
                let tag = format!("{}:{term}", cat.as_str());
                if !matched.contains(&tag) {
                    matched.push(tag);
                }
            }
        }
    }
    NameVerdict { token, name: name.to_string(), normalized, categories, matched_terms: matched }
}

pub fn classify_all(names: &[(Address, String)], lists: &ReferenceLists) -> Vec<NameVerdict> {
    names.par_iter().map(|(a, n)| classify(*a, n, lists)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NameFrequency {
    /// Normalized name and occurrences, most frequent first.
    pub counts: Vec<(String, usize)>,
    pub total: usize,
    pub unique: usize,
    pub unique_ratio: f64,
}

pub fn name_frequency(verdicts: &[NameVerdict]) -> NameFrequency {
    let mut by: BTreeMap<&str, usize> = BTreeMap::new();
    for v in verdicts {
        *by.entry(v.normalized.as_str()).or_default() += 1;
    }
    let mut counts: Vec<(String, usize)> = by.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total = verdicts.len();
    let unique = counts.len();
    NameFrequency {
        counts,
        total,
        unique,
        unique_ratio: if total == 0 { 0.0 } else { unique as f64 / total as f64 },
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub total: usize,
    pub covered: usize,
    pub ratio: f64,
    pub per_category: BTreeMap<Category, usize>,
}

pub fn coverage(verdicts: &[NameVerdict]) -> Coverage {
    let mut c = Coverage { total: verdicts.len(), ..Default::default() };
    for cat in Category::ALL {
        c.per_category.insert(cat, 0);
    }
    for v in verdicts {
        if v.is_covered() {
            c.covered += 1;
        }
        for cat in &v.categories {
            *c.per_category.entry(*cat).or_default() += 1;
        }
    }
    if c.total > 0 {
        c.ratio = c.covered as f64 / c.total as f64;
    }
    c
}

pub fn verdicts_table(verdicts: &[NameVerdict]) -> Table {
    let mut t = Table::new(&["token", "name", "normalized", "clone", "impersonation", "meme", "defi", "matched_terms"]);
    for v in verdicts {
        let mut row = vec![v.token.to_string(), v.name.clone(), v.normalized.clone()];
        row.extend(Category::ALL.iter().map(|c| v.categories.contains(c).to_string()));
        row.push(v.matched_terms.join(";"));
        t.push(row);
    }
    t
}

pub fn frequency_table(f: &NameFrequency) -> Table {
    let mut t = Table::new(&["name", "count"]);
    for (n, c) in &f.counts {
        t.push(vec![n.clone(), c.to_string()]);
    }
    t
}

pub fn coverage_table(c: &Coverage) -> Table {
    let mut t = Table::new(&["total", "covered", "ratio", "clone", "impersonation", "meme", "defi"]);
    let mut row = vec![c.total.to_string(), c.covered.to_string(), fmt_f64(c.ratio)];
    row.extend(Category::ALL.iter().map(|k| c.per_category.get(k).copied().unwrap_or(0).to_string()));
    t.push(row);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(name: &str) -> Vec<Category> {
        classify(Address::ZERO, name, &ReferenceLists::sample()).categories.into_iter().collect()
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("💋OnlyFans"), "onlyfans");
        assert_eq!(normalize_name(""), "");
        assert_eq!(normalize_name("Shiba   INU!!"), "shiba inu");
        assert_eq!(normalize_name("  Baby\tDoge  "), "baby doge");
    }

    #[test]
    fn domains() {
        assert_eq!(second_level_domain("www.pornhub.com"), "pornhub");
        assert_eq!(second_level_domain("bbc.co.uk"), "bbc");
        assert_eq!(second_level_domain("https://google.com/x"), "google");
    }

    #[test]
    fn categories() {
        assert_eq!(cats("Pornhub"), vec![Category::Impersonation]);
        assert_eq!(cats("shibaswap"), vec![Category::Meme, Category::Defi]);
        assert!(cats("zzqx").is_empty());
        assert_eq!(cats("Shiba Inu"), vec![Category::Clone, Category::Meme]);
        assert_eq!(cats("ADA"), vec![Category::Clone]);
        assert_eq!(cats("💋OnlyFans"), vec![Category::Impersonation]);
    }

    #[test]
    fn phrases_need_word_boundaries() {
        let lists = ReferenceLists::from_reader("term,kind,alias_of\nBank of America,company,\n".as_bytes()).unwrap();
        assert!(classify(Address::ZERO, "Bank of America Inu", &lists).is_covered());
        assert!(!classify(Address::ZERO, "Bank of Americas", &lists).is_covered());
    }

    #[test]
    fn bad_kind_rejected() {
        assert!(ReferenceLists::from_reader("term,kind,alias_of\nx,unknown,\n".as_bytes()).is_err());
    }

    #[test]
    fn frequency() {
        let v: Vec<NameVerdict> = ["Galaxy", "galaxy", "GALAXY!", "moon"]
            .iter()
            .map(|n| classify(Address::ZERO, n, &ReferenceLists::sample()))
            .collect();
        let f = name_frequency(&v);
        assert_eq!(f.counts[0], ("galaxy".to_string(), 3));
        assert_eq!((f.unique, f.unique_ratio), (2, 0.5));
        assert!(name_frequency(&[]).counts.is_empty());
        assert_eq!(coverage(&v).covered, 1);
    }
}
