//! Name → factory tables for runtime-selected strategies.
//!
//! Each family (reward channels, judges, rating estimators, policy
//! initializers) exposes a `Registry` pre-populated with its built-in
//! variants. Callers may register more before looking one up.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub type Factory<T, P> = Box<dyn Fn(&P) -> Result<T> + Send + Sync>;

pub struct Registry<T, P> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T, P>>,
}

impl<T, P> Registry<T, P> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: impl Into<String>, factory: F) -> &mut Self
    where
        F: Fn(&P) -> Result<T> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Box::new(factory));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, params: &P) -> Result<T> {
        match self.factories.get(name) {
            Some(f) => f(params),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}
