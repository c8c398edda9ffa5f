//! Top matrix correlators, the generating matrix series B, and the master
//! equation `∇B ∧ ∇B = 0`.
//!
//! Matrices are indexed `[row][col]`; `B^c_b` sits in row `c`, column `b`, so
//! that `(X∘Y)^c = X(B^c_b) Y^b` in flat coordinates.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fmanifold::FStructure;
use crate::geometry::{EndField, HiggsField, Offense, SeriesTensor};
use crate::linalg::{self, Matrix};
use crate::series::{
    format_rational, monomials_of_degree, parse_rational, primitive_of_closed_family,
};
use crate::{ExponentVector, Rational, TruncatedSeries};

/// Sorted index tuple `a1 <= a2 <= …` labelling a symmetric correlator.
pub type Multiset = Vec<usize>;

fn multiset_of(e: &ExponentVector) -> Multiset {
    e.as_slice()
        .iter()
        .enumerate()
        .flat_map(|(axis, &k)| std::iter::repeat_n(axis, k as usize))
        .collect()
}

fn exponent_of(n: usize, m: &[usize]) -> ExponentVector {
    let mut e = vec![0u32; n];
    for &a in m {
        e[a] += 1;
    }
    ExponentVector::new(e)
}

/// Correlators `Δ(a1..ak)` for all multisets of size `1..=cap`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelatorFamily {
    dim: usize,
    cap: u32,
    entries: BTreeMap<Multiset, Matrix>,
}

impl CorrelatorFamily {
    pub fn new(dim: usize, cap: u32) -> Self {
        CorrelatorFamily {
            dim,
            cap,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Inserts under the sorted key; later inserts overwrite.
    pub fn insert(&mut self, mut key: Multiset, value: Matrix) -> Result<()> {
        if key.is_empty() || key.len() > self.cap as usize {
            return Err(Error::Format(format!(
                "correlator key {key:?} outside sizes 1..={}",
                self.cap
            )));
        }
        if let Some(&a) = key.iter().find(|&&a| a >= self.dim) {
            return Err(Error::AxisOutOfRange {
                axis: a,
                num_vars: self.dim,
            });
        }
        if value.len() != self.dim || value.iter().any(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                left: value.len(),
                right: self.dim,
            });
        }
        key.sort_unstable();
        self.entries.insert(key, value);
        Ok(())
    }

    /// Looks up an entry, sorting the key first.
    pub fn get(&self, key: &[usize]) -> Option<&Matrix> {
        let mut k = key.to_vec();
        k.sort_unstable();
        self.entries.get(&k)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Multiset, &Matrix)> {
        self.entries.iter()
    }

    /// Every multiset of size `1..=cap`, in canonical order.
    pub fn keys(dim: usize, cap: u32) -> Vec<Multiset> {
        let mut keys: Vec<Multiset> = (1..=cap)
            .flat_map(|d| monomials_of_degree(dim, d))
            .map(|e| multiset_of(&e))
            .collect();
        keys.sort();
        keys
    }

    /// Entries keyed `"0,1,1"`, matrices row-major with rational strings.
    pub fn to_json(&self) -> Value {
        let mut entries = Map::new();
        for (k, m) in &self.entries {
            let key = k
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let rows: Vec<Value> = m
                .iter()
                .map(|r| {
                    Value::Array(
                        r.iter()
                            .map(|x| Value::String(format_rational(x)))
                            .collect(),
                    )
                })
                .collect();
            entries.insert(key, Value::Array(rows));
        }
        json!({ "dimension": self.dim, "cap": self.cap, "entries": entries })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |name: &str| {
            v.get(name)
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::Format(format!("correlator file needs integer {name:?}")))
        };
        let dim = field("dimension")? as usize;
        let cap = field("cap")? as u32;
        let mut family = CorrelatorFamily::new(dim, cap);
        let entries = v
            .get("entries")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Format("correlator file needs an \"entries\" object".into()))?;
        for (key, rows) in entries {
            let k = key
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad key {key:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = rows
                .as_array()
                .ok_or_else(|| Error::Format(format!("entry {key:?} is not a matrix")))?
                .iter()
                .map(|r| {
                    r.as_array()
                        .ok_or_else(|| Error::Format(format!("entry {key:?} has a non-array row")))?
                        .iter()
                        .map(|x| {
                            x.as_str().and_then(parse_rational).ok_or_else(|| {
                                Error::Format(format!("entry {key:?}: bad rational {x}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Matrix>>()?;
            family.insert(k, m)?;
        }
        Ok(family)
    }
}

/// `B ∈ m ⊗ End T`: a matrix of series vanishing at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BMatrix(EndField);

impl BMatrix {
    pub fn new(b: EndField) -> Result<Self> {
        if b.at_origin().iter().flatten().any(|x| !x.is_zero()) {
            return Err(Error::Precondition("B must vanish at the origin".into()));
        }
        Ok(BMatrix(b))
    }

    pub fn field(&self) -> &EndField {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn valid_to(&self) -> u32 {
        self.0.valid_to()
    }

    pub fn agrees_with(&self, other: &BMatrix) -> bool {
        self.dim() == other.dim()
            && self
                .0
                .entries()
                .iter()
                .zip(other.0.entries())
                .all(|(a, b)| a.agrees_with(b))
    }
}

/// `B = Σ x^α / α! · Δ(α)` over all multisets up to the family cap.
pub fn b_from_correlators(family: &CorrelatorFamily) -> Result<BMatrix> {
    let n = family.dim;
    let keys = CorrelatorFamily::keys(n, family.cap);
    let mut terms: Vec<Vec<(ExponentVector, Rational)>> = vec![Vec::new(); n * n];
    for key in &keys {
        let m = family
            .get(key)
            .ok_or_else(|| Error::IncompleteFamily(format!("{key:?}")))?;
        let e = exponent_of(n, key);
        let fact = Rational::from_integer(e.factorial());
        for (row, r) in m.iter().enumerate() {
            for (col, x) in r.iter().enumerate() {
                if !x.is_zero() {
                    terms[row * n + col].push((e.clone(), x / &fact));
                }
            }
        }
    }
    let b = EndField::from_fn(n, |row, col| {
        TruncatedSeries::from_terms(n, family.cap, std::mem::take(&mut terms[row * n + col]))
    });
    BMatrix::new(b)
}

/// `[∂_a B, ∂_b B]` for `a < b`, as a rank-4 tensor `(a, b, row, col)`; the
/// components with `a >= b` are zero.
pub fn master_equation_residual(b: &BMatrix) -> Result<SeriesTensor> {
    let n = b.dim();
    let derivs = (0..n)
        .map(|a| b.0.derivative(a))
        .collect::<Result<Vec<_>>>()?;
    let valid = derivs
        .iter()
        .map(|d| d.valid_to())
        .min()
        .unwrap_or(b.valid_to());
    let cap = b.0.entries().first().map_or(0, |s| s.cap());
    SeriesTensor::try_from_fn(n, 4, |idx| {
        let (a, bb, row, col) = (idx[0], idx[1], idx[2], idx[3]);
        if a >= bb {
            return Ok(TruncatedSeries::zero(n, cap).with_valid_to(valid));
        }
        Ok(derivs[a].commutator(&derivs[bb])?.get(row, col).clone())
    })
}

/// Result of correlator extraction; `forced` marks output produced although
/// the master equation fails.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub family: CorrelatorFamily,
    pub forced: bool,
    pub violation: Option<Offense>,
}

/// `Δ(α) = ∂^α B(0)` for every multiset up to the validity degree of `B`.
///
/// Refuses with `HypothesisViolation` when the master equation fails, unless
/// `force` is set, in which case the result is flagged.
pub fn correlators_from_b(b: &BMatrix, force: bool) -> Result<Extraction> {
    let violation = master_equation_residual(b)?.first_offense();
    if let Some(off) = &violation {
        if !force {
            return Err(Error::HypothesisViolation(off.to_string()));
        }
    }
    let n = b.dim();
    let cap = b.valid_to();
    let mut family = CorrelatorFamily::new(n, cap);
    for key in CorrelatorFamily::keys(n, cap) {
        let e = exponent_of(n, &key);
        let m: Matrix = (0..n)
            .map(|row| {
                (0..n)
                    .map(|col| b.0.get(row, col).taylor_coefficient(&e))
                    .collect()
            })
            .collect();
        family.insert(key, m)?;
    }
    Ok(Extraction {
        family,
        forced: violation.is_some(),
        violation,
    })
}

/// `C_ab^c = ∂_a B^c_b`.
pub fn structure_from_b(b: &BMatrix) -> Result<FStructure> {
    let n = b.dim();
    let derivs = (0..n)
        .map(|a| b.0.derivative(a))
        .collect::<Result<Vec<_>>>()?;
    let higgs = HiggsField::from_fn(n, |a, bb, c| derivs[a].get(c, bb).clone());
    Ok(FStructure::new(higgs, None)?.with_found_identity())
}

/// Solves `∂_a B^c_b = C_ab^c` with `B(0) = 0`; needs flat coordinates and a
/// structure coming from a potential.
pub fn b_from_structure(f: &FStructure) -> Result<BMatrix> {
    let n = f.dim();
    let a = f.structure();
    let mut entries = Vec::with_capacity(n * n);
    for c in 0..n {
        for bb in 0..n {
            let family: Vec<TruncatedSeries> = (0..n).map(|x| a.get(x, bb, c).clone()).collect();
            entries.push(primitive_of_closed_family(&family).map_err(|e| match e {
                Error::NotClosed { pair, exponent } => Error::NotPotential(format!(
                    "column {bb}, row {c}: pair ({}, {}) at monomial {exponent}",
                    pair.0, pair.1
                )),
                other => other,
            })?);
        }
    }
    BMatrix::new(EndField::from_fn(n, |row, col| {
        entries[row * n + col].clone()
    }))
}

/// Multiplication by `∂_a` at the origin, the expected value of `Δ(a)`.
pub fn multiplication_at_origin(f: &FStructure, a: usize) -> Matrix {
    f.structure().slice(a).at_origin()
}

/// Whether two matrices commute exactly.
pub fn commute(x: &Matrix, y: &Matrix) -> bool {
    linalg::mat_mul(x, y) == linalg::mat_mul(y, x)
}
