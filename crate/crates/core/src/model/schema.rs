//! Variables, schemas, evidence and total assignments.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A categorical variable with an ordered list of state labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawVariable")]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

#[derive(Deserialize)]
struct RawVariable {
    name: String,
    states: Vec<String>,
}

impl TryFrom<RawVariable> for Variable {
    type Error = Error;

    fn try_from(raw: RawVariable) -> Result<Self> {
        Variable::new(raw.name, raw.states)
    }
}

impl Variable {
    pub fn new<S: Into<String>>(name: impl Into<String>, states: impl IntoIterator<Item = S>) -> Result<Self> {
        let name = name.into();
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if name.is_empty() {
            return Err(Error::contract("variable name must not be empty"));
        }
        if states.len() < 2 {
            return Err(Error::contract(format!(
                "variable `{name}` needs at least 2 states, got {}",
                states.len()
            )));
        }
        if states.len() >= usize::from(u16::MAX) {
            return Err(Error::contract(format!("variable `{name}` has too many states")));
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(Error::contract(format!(
                    "variable `{name}` declares state `{s}` twice"
                )));
            }
        }
        Ok(Self { name, states })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }
}

/// Ordered variable declarations. The order fixes every variable and state
/// index used by tables, datasets and persisted models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct NetworkSchema {
    variables: Vec<Variable>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawSchema {
    variables: Vec<Variable>,
}

impl TryFrom<RawSchema> for NetworkSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        NetworkSchema::new(raw.variables)
    }
}

impl PartialEq for NetworkSchema {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
    }
}

impl NetworkSchema {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::contract(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(Self { variables, index })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, idx: usize) -> &Variable {
        &self.variables[idx]
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.variables[idx].name
    }

    pub fn cardinality(&self, idx: usize) -> usize {
        self.variables[idx].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Like [`index_of`](Self::index_of) but reports unknown names as a contract error.
    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::contract(format!("unknown variable `{name}`")))
    }

    /// Resolves `name` and `label` to (variable index, state index).
    pub fn resolve(&self, name: &str, label: &str) -> Result<(usize, usize)> {
        let var = self.require(name)?;
        let state = self.variables[var].state_index(label).ok_or_else(|| {
            Error::contract(format!("variable `{name}` has no state `{label}`"))
        })?;
        Ok((var, state))
    }

    /// Size of the joint state space (product of cardinalities).
    pub fn joint_size(&self) -> u128 {
        self.variables
            .iter()
            .map(|v| v.cardinality() as u128)
            .product()
    }
}

/// Partial map from variable index to state index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Evidence(BTreeMap<usize, usize>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds evidence from `(variable name, state label)` pairs.
    pub fn from_labels<'a>(
        schema: &NetworkSchema,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut ev = Self::new();
        for (name, label) in pairs {
            let (var, state) = schema.resolve(name, label)?;
            if ev.0.insert(var, state).is_some() {
                return Err(Error::contract(format!("variable `{name}` given twice")));
            }
        }
        Ok(ev)
    }

    /// Parses `name=label` (split at the first `=`). Labels not declared by
    /// the schema fall back to the reference aliases (`v_sex=woman`).
    pub fn parse_pair(schema: &NetworkSchema, text: &str) -> Result<(usize, usize)> {
        let (name, label) = text
            .split_once('=')
            .ok_or_else(|| Error::contract(format!("expected name=state, got `{text}`")))?;
        let (name, label) = (name.trim(), label.trim());
        schema.resolve(name, label).or_else(|e| {
            let alias = super::reference::canonical_label(name, label);
            if alias == label {
                Err(e)
            } else {
                schema.resolve(name, alias)
            }
        })
    }

    pub fn set(&mut self, var: usize, state: usize) -> Option<usize> {
        self.0.insert(var, state)
    }

    pub fn with(mut self, var: usize, state: usize) -> Self {
        self.0.insert(var, state);
        self
    }

    pub fn remove(&mut self, var: usize) -> Option<usize> {
        self.0.remove(&var)
    }

    pub fn get(&self, var: usize) -> Option<usize> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, var: usize) -> bool {
        self.0.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&v, &s)| (v, s))
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    /// Checks indices against `schema`.
    pub fn validate(&self, schema: &NetworkSchema) -> Result<()> {
        for (var, state) in self.iter() {
            if var >= schema.len() {
                return Err(Error::contract(format!("evidence on unknown variable index {var}")));
            }
            if state >= schema.cardinality(var) {
                return Err(Error::contract(format!(
                    "state {state} out of range for `{}`",
                    schema.name(var)
                )));
            }
        }
        Ok(())
    }

    /// Converts to a total assignment; fails if any variable is unset.
    pub fn to_assignment(&self, schema: &NetworkSchema) -> Result<Assignment> {
        self.validate(schema)?;
        let states = (0..schema.len())
            .map(|v| {
                self.get(v).ok_or_else(|| {
                    Error::contract(format!(
                        "assignment is partial: `{}` is unset",
                        schema.name(v)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Assignment(states))
    }

    pub fn to_labels(&self, schema: &NetworkSchema) -> BTreeMap<String, String> {
        self.iter()
            .map(|(v, s)| {
                let var = schema.variable(v);
                (var.name().to_owned(), var.states()[s].clone())
            })
            .collect()
    }
}

impl FromIterator<(usize, usize)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A state for every schema variable, in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(schema: &NetworkSchema, states: Vec<usize>) -> Result<Self> {
        if states.len() != schema.len() {
            return Err(Error::contract(format!(
                "assignment has {} states, schema has {} variables",
                states.len(),
                schema.len()
            )));
        }
        for (v, &s) in states.iter().enumerate() {
            if s >= schema.cardinality(v) {
                return Err(Error::contract(format!(
                    "state {s} out of range for `{}`",
                    schema.name(v)
                )));
            }
        }
        Ok(Self(states))
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }
}

/// Mixed-radix indexer for configurations of an ordered list of variables.
/// The last variable varies fastest (lexicographic order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIndexer {
    cards: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl ConfigIndexer {
    pub fn new(cards: Vec<usize>) -> Self {
        let mut strides = vec![0; cards.len()];
        let mut size = 1usize;
        for i in (0..cards.len()).rev() {
            strides[i] = size;
            size = size.saturating_mul(cards[i]);
        }
        Self {
            cards,
            strides,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn index(&self, states: impl IntoIterator<Item = usize>) -> usize {
        states
            .into_iter()
            .zip(&self.strides)
            .map(|(s, stride)| s * stride)
            .sum()
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        for (i, &stride) in self.strides.iter().enumerate() {
            out[i] = idx / stride;
            idx %= stride;
        }
        out
    }
}
