//! Coded categorical observations.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::{ConfigIndexer, NetworkSchema};

/// Cell marker for a missing value.
const MISSING: u16 = u16::MAX;

/// Dense configurations larger than this are counted with a hash map.
const DENSE_COUNT_LIMIT: usize = 1 << 22;

/// Rows of state indices (one column per schema variable) with a year tag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    schema: NetworkSchema,
    cells: Vec<u16>,
    years: Vec<i32>,
    missing: Vec<usize>,
}

impl Dataset {
    pub fn new(id: impl Into<String>, schema: NetworkSchema) -> Self {
        let missing = vec![0; schema.len()];
        Self {
            id: id.into(),
            schema,
            cells: Vec::new(),
            years: Vec::new(),
            missing,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Re-tags every row with `year`.
    pub fn with_year(mut self, year: i32) -> Self {
        self.years.iter_mut().for_each(|y| *y = year);
        self
    }

    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn n_vars(&self) -> usize {
        self.schema.len()
    }

    pub fn n_rows(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn push_row(&mut self, states: &[Option<usize>], year: i32) -> Result<()> {
        self.check_width(states.len())?;
        for (v, s) in states.iter().enumerate() {
            if let Some(s) = *s {
                self.check_state(v, s)?;
            }
        }
        for (v, s) in states.iter().enumerate() {
            match s {
                Some(s) => self.cells.push(*s as u16),
                None => {
                    self.cells.push(MISSING);
                    self.missing[v] += 1;
                }
            }
        }
        self.years.push(year);
        Ok(())
    }

    pub fn push_complete(&mut self, states: &[usize], year: i32) -> Result<()> {
        self.check_width(states.len())?;
        for (v, &s) in states.iter().enumerate() {
            self.check_state(v, s)?;
        }
        self.cells.extend(states.iter().map(|&s| s as u16));
        self.years.push(year);
        Ok(())
    }

    fn check_width(&self, n: usize) -> Result<()> {
        if n != self.n_vars() {
            return Err(Error::contract(format!(
                "row has {n} cells, schema has {} variables",
                self.n_vars()
            )));
        }
        Ok(())
    }

    fn check_state(&self, v: usize, s: usize) -> Result<()> {
        if s >= self.schema.cardinality(v) {
            return Err(Error::contract(format!(
                "state {s} out of range for `{}`",
                self.schema.name(v)
            )));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, var: usize) -> Option<usize> {
        let c = self.cells[row * self.n_vars() + var];
        (c != MISSING).then_some(c as usize)
    }

    /// Row as `Option` states.
    pub fn row(&self, row: usize) -> Vec<Option<usize>> {
        (0..self.n_vars()).map(|v| self.get(row, v)).collect()
    }

    /// Row of a complete dataset; `None` if any cell is missing.
    pub fn complete_row(&self, row: usize) -> Option<Vec<usize>> {
        (0..self.n_vars()).map(|v| self.get(row, v)).collect()
    }

    pub(crate) fn raw_row(&self, row: usize) -> &[u16] {
        let w = self.n_vars();
        &self.cells[row * w..(row + 1) * w]
    }

    pub fn year(&self, row: usize) -> i32 {
        self.years[row]
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn missing_in(&self, var: usize) -> usize {
        self.missing[var]
    }

    pub fn missing_total(&self) -> usize {
        self.missing.iter().sum()
    }

    pub fn row_has_missing(&self, row: usize) -> bool {
        self.raw_row(row).contains(&MISSING)
    }

    pub fn is_complete(&self) -> bool {
        self.missing_total() == 0
    }

    /// Errors with "incomplete data for family" if any of `vars` has missing cells.
    pub fn require_complete(&self, node: usize, vars: impl IntoIterator<Item = usize>) -> Result<()> {
        for v in vars {
            if self.missing[v] > 0 {
                return Err(Error::IncompleteData {
                    node: self.schema.name(node).to_owned(),
                    column: self.schema.name(v).to_owned(),
                });
            }
        }
        Ok(())
    }

    /// Rows for which `keep` returns true, in order.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Dataset {
        let mut out = Dataset::new(self.id.clone(), self.schema.clone());
        for r in 0..self.n_rows() {
            if keep(r) {
                out.push_raw(self.raw_row(r), self.years[r]);
            }
        }
        out
    }

    fn push_raw(&mut self, raw: &[u16], year: i32) {
        for (v, &c) in raw.iter().enumerate() {
            if c == MISSING {
                self.missing[v] += 1;
            }
        }
        self.cells.extend_from_slice(raw);
        self.years.push(year);
    }

    /// Appends the rows of `other`; schemas must match.
    pub fn extend_from(&mut self, other: &Dataset) -> Result<()> {
        if other.schema != self.schema {
            return Err(Error::SchemaMismatch(format!(
                "cannot concatenate `{}` into `{}`",
                other.id, self.id
            )));
        }
        for r in 0..other.n_rows() {
            self.push_raw(other.raw_row(r), other.years[r]);
        }
        Ok(())
    }

    pub fn concat(id: impl Into<String>, parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat needs at least one dataset"))?;
        let mut out = Dataset::new(id, first.schema.clone());
        for p in parts {
            out.extend_from(p)?;
        }
        Ok(out)
    }

    /// Splits rows by year tag, ordered by year.
    pub fn split_by_year(&self) -> BTreeMap<i32, Dataset> {
        let mut out: BTreeMap<i32, Dataset> = BTreeMap::new();
        for r in 0..self.n_rows() {
            let y = self.years[r];
            out.entry(y)
                .or_insert_with(|| Dataset::new(format!("{}@{y}", self.id), self.schema.clone()))
                .push_raw(self.raw_row(r), y);
        }
        out
    }

    /// Empirical marginal of every variable over its observed cells.
    /// Variables with no observations get a uniform vector.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut counts: Vec<Vec<u64>> = self
            .schema
            .cardinalities()
            .into_iter()
            .map(|k| vec![0; k])
            .collect();
        for r in 0..self.n_rows() {
            for (v, &c) in self.raw_row(r).iter().enumerate() {
                if c != MISSING {
                    counts[v][c as usize] += 1;
                }
            }
        }
        counts
            .into_iter()
            .map(|c| {
                let n: u64 = c.iter().sum();
                if n == 0 {
                    vec![1.0 / c.len() as f64; c.len()]
                } else {
                    c.iter().map(|&x| x as f64 / n as f64).collect()
                }
            })
            .collect()
    }

    /// Dense `m[u, x]` table for `node` given sorted `parents`
    /// (configuration-major, state-minor). Requires complete columns.
    pub fn family_counts(&self, node: usize, parents: &[usize]) -> Result<Vec<u64>> {
        self.require_complete(node, parents.iter().copied().chain([node]))?;
        let k = self.schema.cardinality(node);
        let ix = ConfigIndexer::new(parents.iter().map(|&p| self.schema.cardinality(p)).collect());
        let mut counts = vec![0u64; ix.size() * k];
        for r in 0..self.n_rows() {
            let row = self.raw_row(r);
            let u = ix.index(parents.iter().map(|&p| row[p] as usize));
            counts[u * k + row[node] as usize] += 1;
        }
        Ok(counts)
    }

    /// Counts for parent configurations observed at least once, sorted by
    /// configuration index. Works for configuration spaces too large to hold densely.
    pub fn observed_family_counts(&self, node: usize, parents: &[usize]) -> Result<Vec<(usize, Vec<u64>)>> {
        self.require_complete(node, parents.iter().copied().chain([node]))?;
        let k = self.schema.cardinality(node);
        let ix = ConfigIndexer::new(parents.iter().map(|&p| self.schema.cardinality(p)).collect());
        if ix.size().saturating_mul(k) <= DENSE_COUNT_LIMIT {
            let dense = self.family_counts(node, parents)?;
            return Ok(dense
                .chunks(k)
                .enumerate()
                .filter(|(_, c)| c.iter().any(|&x| x > 0))
                .map(|(u, c)| (u, c.to_vec()))
                .collect());
        }
        let mut map: HashMap<usize, Vec<u64>> = HashMap::new();
        for r in 0..self.n_rows() {
            let row = self.raw_row(r);
            let u = ix.index(parents.iter().map(|&p| row[p] as usize));
            map.entry(u).or_insert_with(|| vec![0; k])[row[node] as usize] += 1;
        }
        let mut out: Vec<_> = map.into_iter().collect();
        out.sort_unstable_by_key(|(u, _)| *u);
        Ok(out)
    }
}
