use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::parse::{parse_utterance, tokenize};
use crate::{Error, Result};

/// One attribute of the scene space: a name plus its ordered value lexicon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
    /// Optional surface-form synonyms mapping onto canonical lexemes.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

impl Attribute {
    pub fn new(name: &str, values: &[&str]) -> Self {
        Attribute {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
            aliases: BTreeMap::new(),
        }
    }
}

/// Attribute indices for the template roles, resolved by name.
#[derive(Debug, Clone, Default)]
pub(crate) struct Roles {
    pub floor: Option<usize>,
    pub wall: Option<usize>,
    pub object_color: Option<usize>,
    pub shape: Option<usize>,
    pub size: Option<usize>,
    pub position: Option<usize>,
}

impl Roles {
    pub(crate) fn require(&self) -> Result<(usize, usize, usize, usize, usize, usize)> {
        match (
            self.floor,
            self.wall,
            self.object_color,
            self.shape,
            self.size,
            self.position,
        ) {
            (Some(f), Some(w), Some(o), Some(sh), Some(sz), Some(p)) => Ok((f, w, o, sh, sz, p)),
            _ => Err(Error::InvalidSchema(
                "template rendering needs the six standard attribute names".into(),
            )),
        }
    }
}

/// A surface form the parser recognizes, with its token sequence and the
/// (attribute, value) pair it names.
#[derive(Debug, Clone)]
pub(crate) struct LexEntry {
    pub tokens: Vec<String>,
    pub attr: usize,
    pub value: u8,
}

/// The ordered attribute space plus derived lookup tables for parsing.
#[derive(Debug, Clone)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    pub(crate) roles: Roles,
    pub(crate) entries: Vec<LexEntry>,
    pub(crate) by_first: HashMap<String, Vec<usize>>,
    /// Tokens that license attributing an adjacent color word to the object:
    /// size and shape lexemes plus the word "object".
    pub(crate) object_context: HashSet<String>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    attributes: Vec<Attribute>,
}

impl PartialEq for AttributeSchema {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes
    }
}

impl AttributeSchema {
    /// The default six-attribute scene space: floor/wall/object color (seven
    /// shared color words), four shapes, three sizes, three positions.
    pub fn a3ds() -> Self {
        let colors = [
            "red", "orange", "yellow", "green", "blue", "purple", "pink",
        ];
        Self::from_attributes(vec![
            Attribute::new("floor_color", &colors),
            Attribute::new("wall_color", &colors),
            Attribute::new("object_color", &colors),
            Attribute::new("shape", &["block", "ball", "pill", "cylinder"]),
            Attribute::new("size", &["small", "medium", "big"]),
            Attribute::new("position", &["left corner", "middle", "right corner"]),
        ])
        .expect("default schema is valid")
    }

    pub fn from_attributes(attributes: Vec<Attribute>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::InvalidSchema("no attributes".into()));
        }
        let mut names = HashSet::new();
        for attr in &attributes {
            if !names.insert(attr.name.clone()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate attribute name {:?}",
                    attr.name
                )));
            }
            if attr.values.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "attribute {:?} has no values",
                    attr.name
                )));
            }
            if attr.values.len() > u8::MAX as usize {
                return Err(Error::InvalidSchema(format!(
                    "attribute {:?} has too many values",
                    attr.name
                )));
            }
            let mut seen = HashSet::new();
            for value in &attr.values {
                if !seen.insert(value.to_lowercase()) {
                    return Err(Error::InvalidSchema(format!(
                        "attribute {:?} repeats value {:?}",
                        attr.name, value
                    )));
                }
            }
            for (alias, canon) in &attr.aliases {
                if !attr.values.iter().any(|v| v == canon) {
                    return Err(Error::InvalidSchema(format!(
                        "alias {:?} maps to unknown value {:?} of {:?}",
                        alias, canon, attr.name
                    )));
                }
            }
        }

        let find = |name: &str| attributes.iter().position(|a| a.name == name);
        let roles = Roles {
            floor: find("floor_color"),
            wall: find("wall_color"),
            object_color: find("object_color"),
            shape: find("shape"),
            size: find("size"),
            position: find("position"),
        };

        let mut entries = Vec::new();
        for (attr_idx, attr) in attributes.iter().enumerate() {
            for (value_idx, value) in attr.values.iter().enumerate() {
                entries.push(LexEntry {
                    tokens: tokenize(value),
                    attr: attr_idx,
                    value: value_idx as u8,
                });
            }
            for (alias, canon) in &attr.aliases {
                let value_idx = attr.values.iter().position(|v| v == canon).unwrap();
                entries.push(LexEntry {
                    tokens: tokenize(alias),
                    attr: attr_idx,
                    value: value_idx as u8,
                });
            }
        }

        // A surface form shared across attributes is only resolvable by
        // context for the three color roles.
        let color_roles: HashSet<usize> = [roles.floor, roles.wall, roles.object_color]
            .into_iter()
            .flatten()
            .collect();
        let mut owners: HashMap<String, HashSet<usize>> = HashMap::new();
        for entry in &entries {
            owners
                .entry(entry.tokens.join(" "))
                .or_default()
                .insert(entry.attr);
        }
        for (surface, attrs) in &owners {
            if attrs.len() > 1 && !attrs.iter().all(|a| color_roles.contains(a)) {
                return Err(Error::InvalidSchema(format!(
                    "surface form {:?} is ambiguous across non-color attributes",
                    surface
                )));
            }
        }

        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, entry) in entries.iter().enumerate() {
            by_first
                .entry(entry.tokens[0].clone())
                .or_default()
                .push(idx);
        }
        // Longest surface forms first so "left corner" wins over a
        // hypothetical "left".
        for bucket in by_first.values_mut() {
            bucket.sort_by_key(|&i| std::cmp::Reverse(entries[i].tokens.len()));
        }

        let mut object_context: HashSet<String> = HashSet::new();
        object_context.insert("object".to_string());
        for role in [roles.size, roles.shape].into_iter().flatten() {
            for entry in entries.iter().filter(|e| e.attr == role) {
                for token in &entry.tokens {
                    object_context.insert(token.clone());
                }
            }
        }

        Ok(AttributeSchema {
            attributes,
            roles,
            entries,
            by_first,
            object_context,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SchemaDoc = serde_json::from_str(text)?;
        Self::from_attributes(doc.attributes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SchemaDoc {
            attributes: self.attributes.clone(),
        })
        .expect("schema serializes")
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn value_count(&self, attr: usize) -> usize {
        self.attributes[attr].values.len()
    }

    pub fn lexeme(&self, attr: usize, value: u8) -> &str {
        &self.attributes[attr].values[value as usize]
    }

    /// Total number of distinct states (product of lexicon sizes).
    pub fn state_count(&self) -> usize {
        self.attributes.iter().map(|a| a.values.len()).product()
    }
}

/// A complete scene: one value index per schema attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SceneState {
    pub(crate) values: Vec<u8>,
}

impl SceneState {
    pub fn from_indices(schema: &AttributeSchema, values: Vec<u8>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::InvalidSchema(format!(
                "state has {} values, schema has {} attributes",
                values.len(),
                schema.len()
            )));
        }
        for (attr, &v) in values.iter().enumerate() {
            if v as usize >= schema.value_count(attr) {
                return Err(Error::InvalidSchema(format!(
                    "value index {} out of range for attribute {:?}",
                    v,
                    schema.attributes[attr].name
                )));
            }
        }
        Ok(SceneState { values })
    }

    pub fn from_assignment(
        schema: &AttributeSchema,
        assignment: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(schema.len());
        for attr in schema.attributes() {
            let value = assignment.get(&attr.name).ok_or_else(|| {
                Error::InvalidSchema(format!("assignment is missing attribute {:?}", attr.name))
            })?;
            let idx = attr
                .values
                .iter()
                .position(|v| v.eq_ignore_ascii_case(value))
                .ok_or_else(|| {
                    Error::InvalidSchema(format!(
                        "value {:?} is not in the lexicon of {:?}",
                        value, attr.name
                    ))
                })?;
            values.push(idx as u8);
        }
        Ok(SceneState { values })
    }

    pub fn value_index(&self, attr: usize) -> u8 {
        self.values[attr]
    }

    pub fn lexeme<'a>(&self, schema: &'a AttributeSchema, attr: usize) -> &'a str {
        schema.lexeme(attr, self.values[attr])
    }

    pub fn assignment(&self, schema: &AttributeSchema) -> BTreeMap<String, String> {
        schema
            .attributes()
            .iter()
            .enumerate()
            .map(|(i, a)| (a.name.clone(), a.values[self.values[i] as usize].clone()))
            .collect()
    }
}

/// A partial attribute assignment: the semantic content of an utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    slots: Vec<Option<u8>>,
}

impl FeatureSet {
    pub fn empty(schema: &AttributeSchema) -> Self {
        FeatureSet {
            slots: vec![None; schema.len()],
        }
    }

    pub fn from_pairs(schema: &AttributeSchema, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut features = Self::empty(schema);
        for (name, value) in pairs {
            let attr = schema
                .attr_index(name)
                .ok_or_else(|| Error::InvalidSchema(format!("unknown attribute {:?}", name)))?;
            let idx = schema.attributes()[attr]
                .values
                .iter()
                .position(|v| v.eq_ignore_ascii_case(value))
                .ok_or_else(|| {
                    Error::InvalidSchema(format!("value {:?} not in lexicon of {:?}", value, name))
                })?;
            features.slots[attr] = Some(idx as u8);
        }
        Ok(features)
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    /// Number of mentioned attributes.
    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn get(&self, attr: usize) -> Option<u8> {
        self.slots.get(attr).copied().flatten()
    }

    /// Insert a mention; `Err` carries the existing conflicting value index.
    pub(crate) fn try_set(&mut self, attr: usize, value: u8) -> std::result::Result<(), u8> {
        match self.slots[attr] {
            None => {
                self.slots[attr] = Some(value);
                Ok(())
            }
            Some(existing) if existing == value => Ok(()),
            Some(existing) => Err(existing),
        }
    }

    pub fn with(&self, attr: usize, value: u8) -> FeatureSet {
        let mut next = self.clone();
        next.slots[attr] = Some(value);
        next
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|v| (i, v)))
    }

    pub fn is_subset_of(&self, other: &FeatureSet) -> bool {
        self.iter().all(|(a, v)| other.get(a) == Some(v))
    }

    pub fn to_map(&self, schema: &AttributeSchema) -> BTreeMap<String, String> {
        self.iter()
            .map(|(a, v)| {
                (
                    schema.attributes()[a].name.clone(),
                    schema.lexeme(a, v).to_string(),
                )
            })
            .collect()
    }

    /// The full feature set of a state.
    pub fn of_state(state: &SceneState) -> FeatureSet {
        FeatureSet {
            slots: state.values.iter().map(|&v| Some(v)).collect(),
        }
    }

    /// Interpret a full feature set as a state; `None` if any attribute is
    /// unmentioned.
    pub fn as_state(&self) -> Option<SceneState> {
        let values: Option<Vec<u8>> = self.slots.iter().copied().collect();
        values.map(|values| SceneState { values })
    }
}

/// Literal (subset) truth: every mentioned attribute matches the state.
pub fn literal_truth(features: &FeatureSet, state: &SceneState) -> bool {
    features
        .iter()
        .all(|(attr, value)| state.values[attr] == value)
}

/// Yields every state of the schema exactly once, in odometer order.
pub fn enumerate_states(schema: &AttributeSchema) -> impl Iterator<Item = SceneState> + '_ {
    let n = schema.len();
    let mut current: Option<Vec<u8>> = Some(vec![0; n]);
    std::iter::from_fn(move || {
        let state = current.clone()?;
        // Advance the odometer, most significant attribute first.
        let mut next = state.clone();
        let mut pos = n;
        loop {
            if pos == 0 {
                current = None;
                break;
            }
            pos -= 1;
            if (next[pos] as usize) + 1 < schema.value_count(pos) {
                next[pos] += 1;
                for slot in next.iter_mut().skip(pos + 1) {
                    *slot = 0;
                }
                current = Some(next);
                break;
            }
        }
        Some(SceneState { values: state })
    })
}

/// Generated text together with its parsed semantic content; `parsed` is
/// `None` when the parse found conflicting mentions for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub text: String,
    pub parsed: Option<FeatureSet>,
}

impl Utterance {
    pub fn new(schema: &AttributeSchema, text: impl Into<String>) -> Self {
        let text = text.into();
        let parsed = parse_utterance(schema, &text).ok();
        Utterance { text, parsed }
    }
}
