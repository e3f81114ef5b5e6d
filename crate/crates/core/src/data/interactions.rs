use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse binary user-item interactions for a single domain.
///
/// User and item ids are opaque strings. Internally both are remapped to
/// dense indices following the lexicographic order of the ids, so two sets
/// built from the same pairs are identical regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSet {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
    user_items: Vec<Vec<usize>>,
    item_users: Vec<Vec<usize>>,
    n_pairs: usize,
}

impl InteractionSet {
    /// Builds a set from `(user, item)` pairs. Duplicates are dropped.
    pub fn from_pairs<I, U, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (U, V)>,
        U: Into<String>,
        V: Into<String>,
    {
        Self::with_extra_items(pairs, std::iter::empty::<String>())
    }

    /// Like [`InteractionSet::from_pairs`], but also registers items that may
    /// have no interaction at all (held-out items, for instance).
    pub fn with_extra_items<I, U, V, E, S>(pairs: I, extra_items: E) -> Self
    where
        I: IntoIterator<Item = (U, V)>,
        U: Into<String>,
        V: Into<String>,
        E: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let pairs: BTreeSet<(String, String)> = pairs
            .into_iter()
            .map(|(u, i)| (u.into(), i.into()))
            .collect();
        let user_ids: Vec<String> = pairs
            .iter()
            .map(|(u, _)| u.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut items: BTreeSet<String> = pairs.iter().map(|(_, i)| i.clone()).collect();
        items.extend(extra_items.into_iter().map(Into::into));
        let item_ids: Vec<String> = items.into_iter().collect();

        let user_index: HashMap<String, usize> = user_ids
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        let item_index: HashMap<String, usize> = item_ids
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();

        let mut user_items = vec![Vec::new(); user_ids.len()];
        let mut item_users = vec![Vec::new(); item_ids.len()];
        for (u, i) in &pairs {
            let ui = user_index[u];
            let ii = item_index[i];
            user_items[ui].push(ii);
            item_users[ii].push(ui);
        }
        for row in user_items.iter_mut().chain(item_users.iter_mut()) {
            row.sort_unstable();
        }

        InteractionSet {
            user_ids,
            item_ids,
            user_index,
            item_index,
            user_items,
            item_users,
            n_pairs: pairs.len(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.n_pairs
    }

    pub fn is_empty(&self) -> bool {
        self.n_pairs == 0
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_idx(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_idx(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    /// Items the user interacted with, sorted by index.
    pub fn items_of(&self, user: usize) -> &[usize] {
        &self.user_items[user]
    }

    /// Users who interacted with the item, sorted by index.
    pub fn users_of(&self, item: usize) -> &[usize] {
        &self.item_users[item]
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.user_items[user].binary_search(&item).is_ok()
    }

    /// Iterates over all `(user, item)` index pairs in user-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }

    /// Iterates over all pairs as string ids.
    pub fn id_pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.pairs()
            .map(|(u, i)| (self.user_ids[u].as_str(), self.item_ids[i].as_str()))
    }

    /// Writes the pairs as `user<TAB>item` lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.n_pairs * 16);
        for (u, i) in self.id_pairs() {
            writeln!(out, "{u}\t{i}").expect("write to vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Parses interaction lines. Blank lines and lines starting with `#` are
/// skipped; fields past the second are ignored.
pub fn parse_interactions(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let user = fields.next().unwrap_or("").trim();
        let item = fields.next().map(str::trim).unwrap_or("");
        if user.is_empty() || item.is_empty() {
            return Err(Error::MalformedLine {
                line: n + 1,
                reason: "expected user_id<TAB>item_id".into(),
            });
        }
        pairs.push((user.to_string(), item.to_string()));
    }
    Ok(pairs)
}

/// Loads a TSV interaction log into a deduplicated [`InteractionSet`].
pub fn load_interactions(path: &Path) -> Result<InteractionSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let pairs = parse_interactions(&text)?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(InteractionSet::from_pairs(pairs))
}
