//! Job specifications shared by the CLI and the service.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use molenum::chem::check_feasible;
use molenum::{
    parse_smiles, Constraints, DedupMode, ElementTable, Enumerator, Error, MolecularFormula,
    SearchBudget,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dedup {
    #[default]
    Exact,
    Off,
}

impl From<Dedup> for DedupMode {
    fn from(d: Dedup) -> Self {
        match d {
            Dedup::Exact => DedupMode::Exact,
            Dedup::Off => DedupMode::Off,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobSpec {
    pub formula: String,
    /// SMILES strings.
    pub fragments: Vec<String>,
    pub forbidden_bond_orders: Vec<u8>,
    pub max_models: Option<u64>,
    pub dedup: Dedup,
    pub timeout_seconds: Option<f64>,
}

/// Budgets applied when a spec leaves them unset.
#[derive(Debug, Clone, Copy, Default)]
pub struct Defaults {
    pub max_models: Option<u64>,
    pub timeout: Option<Duration>,
}

/// Per-field problems with a spec.
pub type FieldErrors = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    /// The formula parses but admits no molecular graph.
    #[error("{0}")]
    Infeasible(String),
    #[error("invalid job spec: {}", summary(.0))]
    Invalid(FieldErrors),
}

impl SpecError {
    /// Field-level view; infeasibility is reported against `formula`.
    pub fn fields(&self) -> FieldErrors {
        match self {
            SpecError::Infeasible(m) => FieldErrors::from([("formula".to_string(), m.clone())]),
            SpecError::Invalid(f) => f.clone(),
        }
    }
}

fn summary(fields: &FieldErrors) -> String {
    fields
        .iter()
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join("; ")
}

const MASS_FIELDS: [&str; 4] = ["mass", "molecular_mass", "mass_spectrum", "spectrum"];
const KNOWN_FIELDS: [&str; 6] = [
    "formula",
    "fragments",
    "forbidden_bond_orders",
    "max_models",
    "dedup",
    "timeout_seconds",
];

impl JobSpec {
    /// Decodes a JSON request body, reporting unknown and unsupported
    /// fields individually.
    pub fn from_json(body: &[u8]) -> Result<Self, SpecError> {
        let invalid = |k: &str, m: &str| {
            SpecError::Invalid(FieldErrors::from([(k.to_string(), m.to_string())]))
        };
        let value: Value =
            serde_json::from_slice(body).map_err(|e| invalid("body", &format!("malformed JSON: {e}")))?;
        let Value::Object(map) = &value else {
            return Err(invalid("body", "expected a JSON object"));
        };
        let mut errors = FieldErrors::new();
        for key in map.keys() {
            if MASS_FIELDS.contains(&key.as_str()) {
                errors.insert(key.clone(), "mass input is not supported".into());
            } else if !KNOWN_FIELDS.contains(&key.as_str()) {
                errors.insert(key.clone(), "unknown field".into());
            }
        }
        for key in KNOWN_FIELDS {
            if let Some(v) = map.get(key) {
                if let Err(e) = check_field(key, v) {
                    errors.insert(key.to_string(), e);
                }
            }
        }
        if !errors.is_empty() {
            return Err(SpecError::Invalid(errors));
        }
        serde_json::from_value(value).map_err(|e| invalid("body", &e.to_string()))
    }

    /// Validates the spec and builds the enumerator it describes.
    pub fn prepare(&self, table: &ElementTable, defaults: Defaults) -> Result<Enumerator, SpecError> {
        let mut errors = FieldErrors::new();
        let formula = match MolecularFormula::parse(&self.formula, table) {
            Ok(f) => Some(f),
            Err(e) => {
                errors.insert("formula".into(), e.to_string());
                None
            }
        };
        let mut fragments = Vec::new();
        for (i, text) in self.fragments.iter().enumerate() {
            match parse_smiles(text, table) {
                Ok(g) => fragments.push(g),
                Err(e) => {
                    errors.insert(format!("fragments[{i}]"), e.to_string());
                }
            }
        }
        for &b in &self.forbidden_bond_orders {
            if !(2..=3).contains(&b) {
                errors.insert(
                    "forbidden_bond_orders".into(),
                    format!("only bond orders 2 and 3 can be forbidden, got {b}"),
                );
            }
        }
        if self.max_models == Some(0) {
            errors.insert("max_models".into(), "must be at least 1".into());
        }
        let timeout = match self.timeout_seconds {
            Some(t) if !(t.is_finite() && t > 0.0) => {
                errors.insert("timeout_seconds".into(), "must be a positive number".into());
                None
            }
            Some(t) => Some(Duration::from_secs_f64(t)),
            None => defaults.timeout,
        };
        let formula = match formula {
            Some(f) if errors.is_empty() => f,
            _ => return Err(SpecError::Invalid(errors)),
        };
        match check_feasible(&formula, table) {
            Ok(_) => {}
            Err(e @ Error::InfeasibleFormula(_)) => return Err(SpecError::Infeasible(e.to_string())),
            Err(e) => {
                errors.insert("formula".into(), e.to_string());
                return Err(SpecError::Invalid(errors));
            }
        }
        let constraints = Constraints {
            fragments,
            forbidden_bond_orders: self.forbidden_bond_orders.iter().copied().collect::<BTreeSet<_>>(),
        };
        let budget = SearchBudget {
            max_models: self.max_models.or(defaults.max_models),
            wall_time_limit: timeout,
            dedup_mode: self.dedup.into(),
        };
        Ok(Enumerator::new(formula, table.clone())
            .constraints(constraints)
            .budget(budget))
    }
}

fn check_field(key: &str, v: &Value) -> Result<(), String> {
    let ok = match key {
        "formula" => v.is_string(),
        "fragments" => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
        "forbidden_bond_orders" => v.as_array().is_some_and(|a| a.iter().all(|x| x.as_u64().is_some_and(|n| n <= 255))),
        "max_models" => v.is_null() || v.as_u64().is_some(),
        "dedup" => matches!(v.as_str(), Some("exact" | "off")),
        "timeout_seconds" => v.is_null() || v.is_number(),
        _ => true,
    };
    if ok {
        return Ok(());
    }
    Err(match key {
        "formula" => "expected a string",
        "fragments" => "expected a list of SMILES strings",
        "forbidden_bond_orders" => "expected a list of bond orders",
        "max_models" => "expected a non-negative integer",
        "dedup" => "expected \"exact\" or \"off\"",
        _ => "expected a number",
    }
    .to_string())
}
