use std::collections::BTreeSet;
use std::time::Duration;

use engine::oracle::{are_isomorphic, count_classes, naive_enumerate};
use engine::{
    canonical_representation, parse_smiles, write_smiles, Constraints, DedupMode, ElementTable,
    Enumerator, MolecularFormula, SearchBudget,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn build(
    formula: &str,
    fragments: &[String],
    forbidden_bond_orders: Vec<u8>,
    max_models: Option<u64>,
    dedup: &str,
    timeout: Option<f64>,
) -> PyResult<Enumerator> {
    let table = ElementTable::builtin();
    let formula = MolecularFormula::parse(formula, &table).map_err(value_error)?;
    let fragments = fragments
        .iter()
        .map(|s| parse_smiles(s, &table))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_error)?;
    let dedup_mode = match dedup {
        "exact" => DedupMode::Exact,
        "off" => DedupMode::Off,
        other => return Err(value_error(format!("dedup must be \"exact\" or \"off\", got {other:?}"))),
    };
    let wall_time_limit = match timeout {
        Some(t) if !(t.is_finite() && t > 0.0) => return Err(value_error("timeout must be positive")),
        t => t.map(Duration::from_secs_f64),
    };
    Ok(Enumerator::new(formula, table)
        .constraints(Constraints {
            fragments,
            forbidden_bond_orders: forbidden_bond_orders.into_iter().collect::<BTreeSet<_>>(),
        })
        .budget(SearchBudget {
            max_models,
            wall_time_limit,
            dedup_mode,
        }))
}

/// SMILES of every structure of `formula`, in deterministic order.
#[pyfunction]
#[pyo3(signature = (formula, fragments = Vec::new(), forbidden_bond_orders = Vec::new(), max_models = None, dedup = "exact", timeout = None))]
fn enumerate(
    py: Python<'_>,
    formula: &str,
    fragments: Vec<String>,
    forbidden_bond_orders: Vec<u8>,
    max_models: Option<u64>,
    dedup: &str,
    timeout: Option<f64>,
) -> PyResult<Vec<String>> {
    let search = build(formula, &fragments, forbidden_bond_orders, max_models, dedup, timeout)?;
    let (reps, _) = py.detach(|| search.collect()).map_err(value_error)?;
    Ok(reps.iter().map(write_smiles).collect())
}

/// Number of structures of `formula`.
#[pyfunction]
#[pyo3(signature = (formula, fragments = Vec::new(), dedup = "exact"))]
fn count(py: Python<'_>, formula: &str, fragments: Vec<String>, dedup: &str) -> PyResult<usize> {
    let search = build(formula, &fragments, Vec::new(), None, dedup, None)?;
    let mut n = 0;
    py.detach(|| {
        search.run(|_| {
            n += 1;
            std::ops::ControlFlow::Continue(())
        })
    })
    .map_err(value_error)?;
    Ok(n)
}

/// Canonical SMILES; equal for isomorphic inputs.
#[pyfunction]
fn canonical_smiles(smiles: &str) -> PyResult<String> {
    let table = ElementTable::builtin();
    let g = parse_smiles(smiles, &table).map_err(value_error)?;
    let rep = canonical_representation(&g, &table).map_err(value_error)?;
    Ok(write_smiles(&rep))
}

#[pyfunction]
fn is_isomorphic(a: &str, b: &str) -> PyResult<bool> {
    let table = ElementTable::builtin();
    let g = parse_smiles(a, &table).map_err(value_error)?;
    let h = parse_smiles(b, &table).map_err(value_error)?;
    Ok(are_isomorphic(&g, &h))
}

/// Class count from brute-force enumeration; small formulas only.
#[pyfunction]
#[pyo3(signature = (formula, cap = 8))]
fn oracle_count(py: Python<'_>, formula: &str, cap: usize) -> PyResult<usize> {
    let table = ElementTable::builtin();
    let f = MolecularFormula::parse(formula, &table).map_err(value_error)?;
    let graphs = py.detach(|| naive_enumerate(&f, &table, cap)).map_err(value_error)?;
    Ok(count_classes(&graphs))
}

#[pyfunction]
fn min_main_chain_len(n: usize, max_valence: u32) -> PyResult<usize> {
    if n == 0 {
        return Err(value_error("n must be at least 1"));
    }
    Ok(engine::min_main_chain_len(n, max_valence))
}

#[pymodule]
fn molenum(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_smiles, m)?)?;
    m.add_function(wrap_pyfunction!(is_isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_count, m)?)?;
    m.add_function(wrap_pyfunction!(min_main_chain_len, m)?)?;
    Ok(())
}
