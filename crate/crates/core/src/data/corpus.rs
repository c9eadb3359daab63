use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest history that yields a train, a validation and a test label.
pub const MIN_HISTORY_LEN: usize = 3;

/// Item token <-> dense id. Id 0 is the pad slot and has no token.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        if id == 0 {
            return None;
        }
        self.tokens.get(id as usize - 1).map(String::as_str)
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        self.tokens.push(token.to_owned());
        let id = self.tokens.len() as u32;
        self.index.insert(token.to_owned(), id);
        id
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + 1))
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHistory {
    pub user_id: String,
    /// Chronological item ids, never 0.
    pub items: Vec<u32>,
    /// Category ids aligned with `items`, once a category map is loaded.
    pub categories: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionCorpus {
    pub users: Vec<UserHistory>,
    pub items: Vocabulary,
    /// Category labels indexed by category id.
    pub category_names: Vec<String>,
}

impl InteractionCorpus {
    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn interaction_count(&self) -> usize {
        self.users.iter().map(|u| u.items.len()).sum()
    }

    pub fn has_categories(&self) -> bool {
        self.users.iter().all(|u| u.categories.is_some())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub lines: usize,
    /// Users dropped for having fewer than [`MIN_HISTORY_LEN`] items.
    pub dropped_short: Vec<String>,
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<(InteractionCorpus, ParseReport)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_bytes(&bytes, path)
}

pub fn parse_corpus_str(text: &str) -> Result<(InteractionCorpus, ParseReport)> {
    parse_corpus_bytes(text.as_bytes(), Path::new("<memory>"))
}

fn parse_corpus_bytes(bytes: &[u8], path: &Path) -> Result<(InteractionCorpus, ParseReport)> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut report = ParseReport::default();
    let mut seen_users: HashMap<String, usize> = HashMap::new();
    let mut raw: Vec<(String, Vec<&str>)> = Vec::new();

    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let lineno = i + 1;
        let line = std::str::from_utf8(line)
            .map_err(|e| parse_err(lineno, format!("invalid UTF-8: {e}")))?;
        let mut tokens = line.split_whitespace();
        let Some(user) = tokens.next() else {
            continue;
        };
        report.lines += 1;
        match seen_users.entry(user.to_owned()) {
            Entry::Occupied(first) => {
                return Err(parse_err(
                    lineno,
                    format!("user '{user}' already defined on line {}", first.get()),
                ));
            }
            Entry::Vacant(v) => {
                v.insert(lineno);
            }
        }
        let items: Vec<&str> = tokens.collect();
        if items.len() < MIN_HISTORY_LEN {
            report.dropped_short.push(user.to_owned());
            continue;
        }
        raw.push((user.to_owned(), items));
    }
    if report.lines == 0 {
        return Err(parse_err(0, "corpus is empty".into()));
    }
    if raw.is_empty() {
        return Err(parse_err(
            0,
            format!("no user has at least {MIN_HISTORY_LEN} interactions"),
        ));
    }
    if !report.dropped_short.is_empty() {
        log::info!(
            "dropped {} users with fewer than {MIN_HISTORY_LEN} interactions",
            report.dropped_short.len()
        );
    }

    let mut vocab = Vocabulary::default();
    let users = raw
        .into_iter()
        .map(|(user_id, tokens)| UserHistory {
            user_id,
            items: tokens.iter().map(|t| vocab.intern(t)).collect(),
            categories: None,
        })
        .collect();
    Ok((
        InteractionCorpus {
            users,
            items: vocab,
            category_names: Vec::new(),
        },
        report,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMapReport {
    /// Items listed more than once; the first listing was kept.
    pub duplicate_items: Vec<String>,
    /// Items absent from the map; they form singleton categories named after themselves.
    pub unmapped_items: usize,
}

/// Attaches category ids to every history from an `item_token category` file.
pub fn load_category_map(
    path: impl AsRef<Path>,
    corpus: &mut InteractionCorpus,
) -> Result<CategoryMapReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    apply_category_map(&text, path, corpus)
}

pub(crate) fn apply_category_map(
    text: &str,
    path: &Path,
    corpus: &mut InteractionCorpus,
) -> Result<CategoryMapReport> {
    let mut report = CategoryMapReport::default();
    let mut item_label: HashMap<&str, &str> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => continue,
            [item, label] => {
                if item_label.contains_key(item) {
                    log::warn!(
                        "{}:{}: item '{item}' listed again; keeping first category",
                        path.display(),
                        i + 1
                    );
                    report.duplicate_items.push((*item).to_owned());
                } else {
                    item_label.insert(item, label);
                }
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected 'item category', got {} tokens", tokens.len()),
                })
            }
        }
    }

    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |label: &str| -> u32 {
        if let Some(&id) = ids.get(label) {
            return id;
        }
        names.push(label.to_owned());
        let id = names.len() as u32 - 1;
        ids.insert(label.to_owned(), id);
        id
    };
    // category id per item id, index 0 unused
    let mut per_item = vec![0u32; corpus.items.len() + 1];
    for id in 1..=corpus.items.len() as u32 {
        let token = corpus.items.token(id).expect("dense vocabulary");
        per_item[id as usize] = match item_label.get(token) {
            Some(label) => intern(label),
            None => {
                report.unmapped_items += 1;
                intern(token)
            }
        };
    }
    for user in &mut corpus.users {
        user.categories = Some(user.items.iter().map(|&i| per_item[i as usize]).collect());
    }
    corpus.category_names = names;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub user_count: usize,
    pub item_count: usize,
    pub interaction_count: usize,
    pub average_length: f64,
    /// `1 - interactions / (users * items)`.
    pub sparsity: f64,
}

pub fn compute_stats(corpus: &InteractionCorpus) -> DatasetStats {
    let users = corpus.users.len();
    let items = corpus.item_count();
    let interactions = corpus.interaction_count();
    DatasetStats {
        user_count: users,
        item_count: items,
        interaction_count: interactions,
        average_length: interactions as f64 / users.max(1) as f64,
        sparsity: 1.0 - interactions as f64 / (users * items).max(1) as f64,
    }
}
