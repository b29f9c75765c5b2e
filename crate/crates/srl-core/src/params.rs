//! Named parameter storage shared by the model, the optimizer and the
//! checkpoint format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::tensor::{Array, Tape, Var};

/// Persistent name-keyed parameter arrays. Ordering is the BTreeMap key
/// order, which keeps optimizer traversal and serialization deterministic.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamSet {
    entries: BTreeMap<String, Array>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        let name = name.into();
        debug_assert!(
            !self.entries.contains_key(&name),
            "duplicate parameter {name}"
        );
        self.entries.insert(name, value);
    }

    pub fn get(&self, name: &str) -> &Array {
        self.entries
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array {
        self.entries
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.entries.values().map(Array::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Lease every parameter onto a tape as a gradient-tracked leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        let map = self
            .entries
            .iter()
            .map(|(name, value)| (name.clone(), tape.param(value.clone())))
            .collect();
        Bound { map }
    }
}

/// Per-pass view of a [`ParamSet`]: parameter name to tape variable.
pub struct Bound {
    map: BTreeMap<String, Var>,
}

impl Bound {
    /// Assemble a binding from externally created leaves (the gradient
    /// checker probes parameters it owns).
    pub fn from_vars<'a>(names: impl IntoIterator<Item = &'a String>, vars: &[Var]) -> Self {
        let map: BTreeMap<String, Var> = names
            .into_iter()
            .cloned()
            .zip(vars.iter().copied())
            .collect();
        assert_eq!(map.len(), vars.len(), "names and vars must align");
        Self { map }
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.map.iter()
    }
}
