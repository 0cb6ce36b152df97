use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which text a feature was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Bio,
    Tweet,
}

impl Provenance {
    pub fn prefix(self) -> &'static str {
        match self {
            Provenance::Bio => "Bio_",
            Provenance::Tweet => "Tweet_",
        }
    }
}

/// A category dictionary in the LIWC `.dic` layout.
///
/// Entries ending in `*` match any token starting with the stem. A token's
/// categories are the union over every entry it matches.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    categories: Vec<(u32, String)>,
    exact: HashMap<String, BTreeSet<usize>>,
    prefixes: HashMap<String, BTreeSet<usize>>,
}

impl Lexicon {
    /// `entries` pairs a word (or `stem*`) with category ids.
    pub fn from_parts<I, S>(name: &str, categories: Vec<(u32, String)>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<u32>)>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon {
            name: name.to_string(),
            categories,
            exact: HashMap::new(),
            prefixes: HashMap::new(),
        };
        lex.check_unique_ids()?;
        for (word, ids) in entries {
            lex.insert(word.as_ref(), &ids)
                .map_err(|id| Error::InvalidArgument(format!("entry {:?} uses undeclared category {id}", word.as_ref())))?;
        }
        Ok(lex)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (id, _) in &self.categories {
            if !seen.insert(*id) {
                return Err(Error::InvalidArgument(format!("category id {id} declared twice")));
            }
        }
        Ok(())
    }

    fn insert(&mut self, word: &str, ids: &[u32]) -> std::result::Result<(), u32> {
        let mut idx = BTreeSet::new();
        for id in ids {
            let i = self
                .categories
                .iter()
                .position(|(cid, _)| cid == id)
                .ok_or(*id)?;
            idx.insert(i);
        }
        let word = word.to_lowercase();
        let (map, key) = match word.strip_suffix('*') {
            Some(stem) => (&mut self.prefixes, stem.to_string()),
            None => (&mut self.exact, word),
        };
        map.entry(key).or_default().extend(idx);
        Ok(())
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn entry_count(&self) -> usize {
        self.exact.len() + self.prefixes.len()
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(_, n)| n.as_str())
    }

    pub fn categories(&self) -> &[(u32, String)] {
        &self.categories
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|(_, n)| n == name)
    }

    /// Fails unless the lexicon declares exactly `n` categories.
    pub fn expect_categories(&self, n: usize) -> Result<()> {
        if self.categories.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "lexicon {} declares {} categories, expected {n}",
                self.name,
                self.categories.len()
            )))
        }
    }

    /// Category indices matched by `token` (already lowercase).
    pub fn lookup(&self, token: &str) -> BTreeSet<usize> {
        let mut out = self.exact.get(token).cloned().unwrap_or_default();
        if !self.prefixes.is_empty() {
            for (end, _) in token.char_indices().skip(1).chain(std::iter::once((token.len(), ' '))) {
                if let Some(cats) = self.prefixes.get(&token[..end]) {
                    out.extend(cats);
                }
            }
            // A bare "*" entry would match everything, including "".
            if let Some(cats) = self.prefixes.get("") {
                out.extend(cats);
            }
        }
        out
    }

    /// Feature names in category order, e.g. `Tweet_LIWC_social`.
    pub fn feature_names(&self, provenance: Provenance) -> Vec<String> {
        self.categories
            .iter()
            .map(|(_, n)| format!("{}{}_{}", provenance.prefix(), self.name, n))
            .collect()
    }

    /// Renders the lexicon back into `.dic` text. Entries are sorted.
    pub fn to_dic(&self) -> String {
        let mut out = String::from("%\n");
        for (id, name) in &self.categories {
            let _ = writeln!(out, "{id}\t{name}");
        }
        out.push_str("%\n");
        let mut rows: Vec<(String, &BTreeSet<usize>)> = self
            .exact
            .iter()
            .map(|(w, c)| (w.clone(), c))
            .chain(self.prefixes.iter().map(|(w, c)| (format!("{w}*"), c)))
            .collect();
        rows.sort();
        for (word, cats) in rows {
            out.push_str(&word);
            for &c in cats {
                let _ = write!(out, "\t{}", self.categories[c].0);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_dic(name: &str, text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let mut categories = Vec::new();
        let mut saw_open = false;
        for (no, line) in lines.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "%" {
                if saw_open {
                    break;
                }
                saw_open = true;
                continue;
            }
            if !saw_open {
                return Err(Error::parse(origin, no, "expected '%' to open the category header"));
            }
            let mut fields = split_fields(trimmed);
            let id = fields.next().unwrap_or_default();
            let id: u32 = id
                .parse()
                .map_err(|_| Error::parse(origin, no, format!("bad category id {id:?}")))?;
            let cat_name = fields.collect::<Vec<_>>().join(" ");
            if cat_name.is_empty() {
                return Err(Error::parse(origin, no, "category without a name"));
            }
            categories.push((id, cat_name));
        }
        if !saw_open {
            return Err(Error::parse(origin, 1, "missing category header"));
        }
        let mut lex = Lexicon {
            name: name.to_string(),
            categories,
            exact: HashMap::new(),
            prefixes: HashMap::new(),
        };
        lex.check_unique_ids().map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        for (no, line) in lines {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut fields = split_fields(trimmed);
            let word = fields.next().unwrap_or_default();
            let mut ids = Vec::new();
            for f in fields {
                let id: u32 = f
                    .parse()
                    .map_err(|_| Error::parse(origin, no, format!("bad category id {f:?}")))?;
                ids.push(id);
            }
            if ids.is_empty() {
                return Err(Error::parse(origin, no, format!("entry {word:?} has no categories")));
            }
            lex.insert(word, &ids)
                .map_err(|id| Error::parse(origin, no, format!("undeclared category id {id}")))?;
        }
        Ok(lex)
    }
}

fn split_fields(line: &str) -> Box<dyn Iterator<Item = &str> + '_> {
    if line.contains('\t') {
        Box::new(line.split('\t').map(str::trim).filter(|s| !s.is_empty()))
    } else {
        Box::new(line.split_whitespace())
    }
}

/// Loads a `.dic` file. The lexicon is named after the file stem, upper-cased
/// (`liwc.dic` → `LIWC`).
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_uppercase())
        .unwrap_or_else(|| "LEX".into());
    load_named_lexicon(path, &name)
}

pub fn load_named_lexicon(path: &Path, name: &str) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Lexicon::parse_dic(name, &text, path)
}

/// Per-category share of tokens matching that category; zeros for empty
/// input.
pub fn category_features(tokens: &[String], lexicon: &Lexicon, provenance: Provenance) -> Vec<(String, f64)> {
    let rates = category_rates(tokens, lexicon);
    lexicon.feature_names(provenance).into_iter().zip(rates).collect()
}

pub(crate) fn category_rates(tokens: &[String], lexicon: &Lexicon) -> Vec<f64> {
    let mut counts = vec![0usize; lexicon.category_count()];
    let mut cache: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for t in tokens {
        let cats = cache.entry(t.as_str()).or_insert_with(|| lexicon.lookup(t));
        for &c in cats.iter() {
            counts[c] += 1;
        }
    }
    let denom = tokens.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / denom).collect()
}
