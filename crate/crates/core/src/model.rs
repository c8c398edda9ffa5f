//! Model files: JSON documents describing a structure together with optional
//! identity, Euler field, twist field and pencil shift.
//!
//! Series are given either as expressions (see [`crate::expr`]) or as
//! canonical coefficient tables, one `"e0,e1:num/den"` string per monomial.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{default_names, parse_constant, parse_expression};
use crate::fmanifold::{FStructure, VectorPotential};
use crate::geometry::{HiggsField, VectorField};
use crate::{Rational, TruncatedSeries};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MU_ORDER: usize = 4;

fn default_mu_order() -> usize {
    DEFAULT_MU_ORDER
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(untagged)]
pub enum SeriesSpec {
    Expression(String),
    Table(Vec<String>),
}

impl SeriesSpec {
    pub fn table(s: &TruncatedSeries) -> Self {
        SeriesSpec::Table(s.canonical_lines())
    }

    pub fn to_series(&self, names: &[String], cap: u32, label: &str) -> Result<TruncatedSeries> {
        match self {
            SeriesSpec::Expression(text) => {
                parse_expression(text, names, cap).map_err(|e| match e {
                    Error::Parse { offset, message } => Error::Parse {
                        offset,
                        message: format!("{label}: {message}"),
                    },
                    other => other,
                })
            }
            SeriesSpec::Table(lines) => {
                TruncatedSeries::from_canonical_lines(names.len(), cap, lines)
                    .map_err(|e| Error::Format(format!("{label}: {e}")))
            }
        }
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
pub struct EulerSpec {
    pub field: Vec<SeriesSpec>,
    pub weight: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Eq)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub dimension: usize,
    /// Degree cap of the structure tensor.
    pub order: u32,
    #[serde(default = "default_mu_order")]
    pub mu_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<String>>,
    /// Vector potential components `C^c`, expanded two degrees beyond `order`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<SeriesSpec>>,
    /// Structure constants keyed `"a,b,c"`; missing keys are zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<BTreeMap<String, SeriesSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<Vec<SeriesSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<EulerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<SeriesSpec>>,
    /// Pencil member `lambda` whose flatness hypotheses are tested for the twist.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist_lambda: Option<String>,
    /// Flat section tested for primitivity; defaults to the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<Vec<SeriesSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<String>,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schemaVersion {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.dimension == 0 {
            return Err(Error::Format("dimension must be positive".into()));
        }
        match (&doc.potential, &doc.structure) {
            (Some(_), Some(_)) => {
                return Err(Error::Format(
                    "give either \"potential\" or \"structure\", not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Format(
                    "model needs \"potential\" or \"structure\"".into(),
                ))
            }
            _ => {}
        }
        if let Some(names) = &doc.coordinates {
            if names.len() != doc.dimension {
                return Err(Error::DimensionMismatch {
                    left: names.len(),
                    right: doc.dimension,
                });
            }
        }
        Ok(doc)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn names(&self) -> Vec<String> {
        self.coordinates
            .clone()
            .unwrap_or_else(|| default_names(self.dimension))
    }
}

/// Command-line overrides applied on top of the document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub order: Option<u32>,
    pub mu_order: Option<usize>,
    pub lambda0: Option<Rational>,
}

/// A parsed model ready for the check suite.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub names: Vec<String>,
    pub order: u32,
    pub mu_order: usize,
    pub lambda0: Rational,
    pub potential: Option<VectorPotential>,
    pub structure: FStructure,
    pub declared_identity: Option<VectorField>,
    pub euler: Option<(VectorField, Rational)>,
    pub epsilon: Option<VectorField>,
    pub twist_lambda: Rational,
    pub primitive: Option<VectorField>,
}

fn field_of(specs: &[SeriesSpec], names: &[String], cap: u32, label: &str) -> Result<VectorField> {
    if specs.len() != names.len() {
        return Err(Error::DimensionMismatch {
            left: specs.len(),
            right: names.len(),
        });
    }
    let comps = specs
        .iter()
        .enumerate()
        .map(|(c, s)| s.to_series(names, cap, &format!("{label}[{c}]")))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

fn parse_index_key(key: &str, n: usize) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = key
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("structure key {key:?} is not \"a,b,c\"")))?;
    match *parts.as_slice() {
        [a, b, c] if a < n && b < n && c < n => Ok((a, b, c)),
        [_, _, _] => Err(Error::Format(format!("structure key {key:?} out of range"))),
        _ => Err(Error::Format(format!(
            "structure key {key:?} is not \"a,b,c\""
        ))),
    }
}

impl Model {
    pub fn build(doc: &ModelDocument, overrides: &Overrides) -> Result<Self> {
        let names = doc.names();
        let n = doc.dimension;
        let order = overrides.order.unwrap_or(doc.order);
        let mu_order = overrides.mu_order.unwrap_or(doc.mu_order);
        let constant = |text: &Option<String>, default: Rational, label: &str| match text {
            Some(t) => parse_constant(t).map_err(|e| Error::Format(format!("{label}: {e}"))),
            None => Ok(default),
        };
        let lambda0 = match &overrides.lambda0 {
            Some(l) => l.clone(),
            None => constant(&doc.lambda0, Rational::from_integer(0.into()), "lambda0")?,
        };
        let twist_lambda = constant(
            &doc.twist_lambda,
            Rational::from_integer(1.into()),
            "twistLambda",
        )?;

        let (potential, structure) = if let Some(specs) = &doc.potential {
            let pot = VectorPotential::new(field_of(specs, &names, order + 2, "potential")?);
            let f = pot.to_structure()?;
            (Some(pot), f)
        } else {
            let table = doc.structure.as_ref().expect("validated");
            let mut entries = BTreeMap::new();
            for (key, spec) in table {
                let idx = parse_index_key(key, n)?;
                entries.insert(
                    idx,
                    spec.to_series(&names, order, &format!("structure[{key}]"))?,
                );
            }
            let higgs = HiggsField::from_fn(n, |a, b, c| {
                entries
                    .get(&(a, b, c))
                    .cloned()
                    .unwrap_or_else(|| TruncatedSeries::zero(n, order))
            });
            (None, FStructure::new(higgs, None)?)
        };
        let declared_identity = doc
            .identity
            .as_ref()
            .map(|s| field_of(s, &names, order, "identity"))
            .transpose()?;
        let structure = match &declared_identity {
            Some(e) => structure.with_identity(e.clone())?,
            None => structure.with_found_identity(),
        };
        let euler = doc
            .euler
            .as_ref()
            .map(|e| {
                let w = parse_constant(&e.weight)
                    .map_err(|err| Error::Format(format!("euler weight: {err}")))?;
                Ok::<_, Error>((field_of(&e.field, &names, order, "euler")?, w))
            })
            .transpose()?;
        let epsilon = doc
            .epsilon
            .as_ref()
            .map(|s| field_of(s, &names, order, "epsilon"))
            .transpose()?;
        let primitive = doc
            .primitive
            .as_ref()
            .map(|s| field_of(s, &names, order, "primitive"))
            .transpose()?;
        Ok(Model {
            name: doc.name.clone(),
            names,
            order,
            mu_order,
            lambda0,
            potential,
            structure,
            declared_identity,
            euler,
            epsilon,
            twist_lambda,
            primitive,
        })
    }

    pub fn load(text: &str, overrides: &Overrides) -> Result<Self> {
        Model::build(&ModelDocument::from_json(text)?, overrides)
    }

    /// Parses a vector field given as `;`-separated component expressions.
    pub fn parse_field(&self, text: &str) -> Result<VectorField> {
        let specs: Vec<SeriesSpec> = text
            .split(';')
            .map(|t| SeriesSpec::Expression(t.trim().to_string()))
            .collect();
        field_of(&specs, &self.names, self.order, "field")
    }
}

/// Canonical document for a structure given by tables, as written by `dualize`.
pub fn structure_document(
    name: &str,
    names: &[String],
    order: u32,
    mu_order: usize,
    f: &FStructure,
) -> ModelDocument {
    let n = f.dim();
    let mut table = BTreeMap::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let s = f.structure().get(a, b, c);
                if !s.is_empty() {
                    table.insert(format!("{a},{b},{c}"), SeriesSpec::table(s));
                }
            }
        }
    }
    ModelDocument {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        description: None,
        dimension: n,
        order,
        mu_order,
        coordinates: Some(names.to_vec()),
        potential: None,
        structure: Some(table),
        identity: f
            .identity()
            .map(|e| e.comps().iter().map(SeriesSpec::table).collect()),
        euler: None,
        epsilon: None,
        twist_lambda: None,
        primitive: None,
        lambda0: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q;

    const QC: &str = r#"{
        "schemaVersion": 1, "name": "qc", "dimension": 2, "order": 5,
        "potential": ["x0^2/2 + exp(x1)", "x0*x1"],
        "euler": {"field": ["x0", "2"], "weight": "1"}
    }"#;

    #[test]
    fn loads_potential_model() {
        let m = Model::load(QC, &Overrides::default()).unwrap();
        assert_eq!(m.order, 5);
        assert_eq!(m.mu_order, DEFAULT_MU_ORDER);
        assert_eq!(m.structure.order(), 5);
        let e = m.structure.identity().unwrap();
        assert!(e.agrees_with(&m.structure.basis(0)));
        assert_eq!(m.euler.as_ref().unwrap().1, q(1, 1));
        let o = Overrides {
            order: Some(3),
            lambda0: Some(q(1, 2)),
            ..Default::default()
        };
        let m = Model::load(QC, &o).unwrap();
        assert_eq!((m.structure.order(), m.lambda0), (3, q(1, 2)));
    }

    #[test]
    fn rejects_malformed_documents() {
        let bad_version = QC.replace("\"schemaVersion\": 1", "\"schemaVersion\": 2");
        assert!(matches!(
            ModelDocument::from_json(&bad_version),
            Err(Error::Format(_))
        ));
        let both = QC.replace("\"euler\"", "\"structure\": {}, \"euler\"");
        assert!(ModelDocument::from_json(&both).is_err());
        let unknown = QC.replace("\"euler\"", "\"colour\": 1, \"euler\"");
        assert!(ModelDocument::from_json(&unknown).is_err());
        let bad_expr = QC.replace("x0*x1", "x0*");
        match Model::load(&bad_expr, &Overrides::default()) {
            Err(Error::Parse { offset: 3, message }) => {
                assert!(message.starts_with("potential[1]"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structure_tables_roundtrip() {
        let m = Model::load(QC, &Overrides::default()).unwrap();
        let doc = structure_document("qc-tables", &m.names, m.order, m.mu_order, &m.structure);
        let text = doc.to_json();
        let back = Model::load(&text, &Overrides::default()).unwrap();
        let diff = back
            .structure
            .structure()
            .tensor()
            .sub(m.structure.structure().tensor())
            .unwrap();
        assert!(diff.vanishes());
        assert_eq!(ModelDocument::from_json(&text).unwrap().to_json(), text);
    }

    #[test]
    fn fields_from_text() {
        let m = Model::load(QC, &Overrides::default()).unwrap();
        let v = m.parse_field("exp(-x1); 0").unwrap();
        assert_eq!(
            v.component(0).to_expression(),
            "1 - x1 + 1/2*x1^2 - 1/6*x1^3 + 1/24*x1^4 - 1/120*x1^5"
        );
        assert!(m.parse_field("x0").is_err());
    }
}
