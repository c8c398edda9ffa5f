//! The residual check suite run by `flatcirc check`.
//!
//! Every check yields one record; failures never abort the suite. Checks run
//! in parallel and are reported in catalogue order.

#![allow(clippy::result_large_err)]

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::correlators::{
    b_from_correlators, b_from_structure, correlators_from_b, master_equation_residual,
    structure_from_b,
};
use crate::duality::{
    dual_structure, duality_verify, flat_section_solve, primitive_section, TwistHypothesis,
};
use crate::error::{Error, Result};
use crate::euler::{
    e_equation_residual, euler_residual, flat_compat_residual, flatness_residual_potential,
    full_flatness_residual, h_from_e, MuResidual, MuSeriesVF,
};
use crate::fmanifold::{
    classify_self_derivative, structure_to_potential, IdentitySearch, SelfDerivative,
};
use crate::geometry::{Connection, SeriesTensor, VectorField};
use crate::model::{Model, SCHEMA_VERSION};
use crate::series::format_rational;
use crate::Rational;

/// Check ids with a short description of the identity each one verifies.
pub const CATALOGUE: &[(&str, &str)] = &[
    ("pencil.torsion", "torsion of the base connection"),
    ("pencil.r1", "pencil curvature, part linear in lambda"),
    ("pencil.r2", "pencil curvature, quadratic part [A_a, A_b]"),
    ("hm-identity", "F-identity P_{XoY} = X o P_Y + Y o P_X"),
    ("identity-field", "identity field e o X = X"),
    (
        "potential-roundtrip",
        "structure -> vector potential -> structure",
    ),
    ("d-symmetry", "total symmetry of D(X,Y,Z)"),
    (
        "l-sheaf.membership",
        "nabla_Y eps = Y o nabla_e eps for e, flat fields, nabla_e e, nabla_e^2 e",
    ),
    ("l-sheaf.derivation", "ad e is a derivation: P_e = 0"),
    ("nabla-e-e", "nabla_e e = c e"),
    ("euler.weight", "Euler equation P_E(X,Y) = d0 X o Y"),
    ("euler.flat-compat", "E preserves flat fields"),
    (
        "extended.e-equation",
        "(e + mu e1) o nabla_w E - e1 o E = e",
    ),
    ("extended.flatness", "flatness of the extended connection"),
    ("extended.functional-eq", "H(X) determined by H(e)"),
    ("extended.e-identity", "[e, H(e)] + H(e) o e1 - H(e1) = e"),
    ("extended.h-of-e", "H(e) = E"),
    (
        "extended.potential-form",
        "P_E in terms of the potential C - mu E",
    ),
    (
        "duality.primitive-section",
        "closedness of the potential map B u",
    ),
    (
        "duality.twist",
        "X * Y = eps^-1 o X o Y is an F-manifold with identity eps",
    ),
    (
        "duality.old-identity-bracket",
        "[eps, e] under the twist flatness hypothesis",
    ),
    (
        "duality.euler-weight",
        "e is an Euler field of the twisted product",
    ),
    ("master-equation", "nabla B ^ nabla B = 0"),
    (
        "correlators.roundtrip",
        "B -> top correlators -> B, and structure from B",
    ),
];

#[derive(Serialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Serialize, Clone, Debug, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct CheckRecord {
    pub id: String,
    pub anchor: String,
    pub status: Status,
    /// Total x-degree up to which vanishing is proven.
    pub x_degree: Option<u32>,
    /// Highest power of mu covered.
    pub mu_degree: Option<usize>,
    pub first_offense: Option<String>,
    pub detail: Option<String>,
}

impl CheckRecord {
    fn new(id: &str) -> Self {
        let anchor = CATALOGUE
            .iter()
            .find(|(i, _)| *i == id)
            .map(|(_, a)| a.to_string())
            .unwrap_or_default();
        CheckRecord {
            id: id.to_string(),
            anchor,
            status: Status::Pass,
            x_degree: None,
            mu_degree: None,
            first_offense: None,
            detail: None,
        }
    }

    fn skipped(id: &str, why: impl Into<String>) -> Self {
        CheckRecord {
            status: Status::Skipped,
            detail: Some(why.into()),
            ..CheckRecord::new(id)
        }
    }

    fn error(id: &str, err: &Error) -> Self {
        CheckRecord {
            status: Status::Fail,
            detail: Some(err.to_string()),
            ..CheckRecord::new(id)
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    fn degree(mut self, x: u32) -> Self {
        self.x_degree = Some(self.x_degree.map_or(x, |d| d.min(x)));
        self
    }

    /// Records the first nonzero residual; later offenders are ignored.
    fn offend(mut self, what: impl Into<String>) -> Self {
        if self.first_offense.is_none() {
            self.status = Status::Fail;
            self.first_offense = Some(what.into());
        }
        self
    }

    fn tensor(self, label: &str, t: &SeriesTensor) -> Self {
        let rec = self.degree(t.valid_to());
        match t.first_offense() {
            Some(o) if label.is_empty() => rec.offend(o.to_string()),
            Some(o) => rec.offend(format!("{label}: {o}")),
            None => rec,
        }
    }

    fn mu_series(mut self, label: &str, s: &MuSeriesVF) -> Self {
        self.mu_degree = Some(self.mu_degree.map_or(s.mu_cap(), |d| d.min(s.mu_cap())));
        let rec = self.degree(s.valid_to());
        match s.first_offense() {
            Some(o) => rec.offend(format!("{label}{o}")),
            None => rec,
        }
    }

    fn mu_residual(mut self, r: &MuResidual) -> Self {
        self.mu_degree = Some(r.mu_cap());
        let rec = self.degree(r.valid_to());
        match r.first_offense() {
            Some((idx, o)) => rec.offend(format!("frame {idx:?} {o}")),
            None => rec,
        }
    }
}

#[derive(Serialize, Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Serialize, Clone, Debug, PartialEq, Eq)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema_version: u32,
    pub model: String,
    pub order: u32,
    pub mu_order: usize,
    pub lambda0: String,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    /// True when no selected check failed.
    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn record(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "model {} (order {}, mu-order {}, lambda0 {})",
            self.model, self.order, self.mu_order, self.lambda0
        );
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            let mut line = format!("{status:<5} {:<29}", c.id);
            if let Some(x) = c.x_degree {
                let _ = write!(line, " x<={x}");
            }
            if let Some(m) = c.mu_degree {
                let _ = write!(line, " mu<={m}");
            }
            if let Some(o) = &c.first_offense {
                let _ = write!(line, "  first offense: {o}");
            }
            if let Some(d) = &c.detail {
                let _ = write!(line, "  ({d})");
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        let _ = writeln!(
            out,
            "summary: {} pass, {} fail, {} skipped",
            self.summary.pass, self.summary.fail, self.summary.skipped
        );
        out
    }
}

struct Ctx<'a> {
    model: &'a Model,
    flat: Connection,
    /// The flat frame shifted by `lambda0`.
    base: Result<Connection>,
}

impl Ctx<'_> {
    fn base(&self, id: &str) -> std::result::Result<&Connection, CheckRecord> {
        self.base.as_ref().map_err(|e| CheckRecord::error(id, e))
    }

    fn identity(&self, id: &str) -> std::result::Result<VectorField, CheckRecord> {
        self.model
            .structure
            .identity()
            .cloned()
            .ok_or_else(|| CheckRecord::skipped(id, "structure has no identity"))
    }
}

macro_rules! attempt {
    ($id:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return CheckRecord::error($id, &err),
        }
    };
}

macro_rules! require {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(rec) => return rec,
        }
    };
}

fn pencil_torsion(ctx: &Ctx) -> CheckRecord {
    let id = "pencil.torsion";
    let base = require!(ctx.base(id));
    CheckRecord::new(id).tensor("", &base.torsion())
}

fn pencil_r(ctx: &Ctx, id: &str, second: bool) -> CheckRecord {
    let base = require!(ctx.base(id));
    let (r1, r2) = attempt!(id, ctx.model.structure.pencil_split(base));
    CheckRecord::new(id).tensor("", if second { &r2 } else { &r1 })
}

fn hm_identity(ctx: &Ctx) -> CheckRecord {
    let id = "hm-identity";
    CheckRecord::new(id).tensor(
        "",
        &attempt!(id, ctx.model.structure.hm_identity_residual()),
    )
}

fn identity_field(ctx: &Ctx) -> CheckRecord {
    let id = "identity-field";
    let f = &ctx.model.structure;
    let Some(e) = f.identity() else {
        let why = match f.find_identity() {
            IdentitySearch::Absent { degree } => {
                format!("no identity: linear system fails at degree {degree}")
            }
            IdentitySearch::Found(_) => "no identity".to_string(),
        };
        return CheckRecord::new(id).offend(why);
    };
    let rec = CheckRecord::new(id).tensor("", &attempt!(id, f.identity_residual(e)));
    let source = if ctx.model.declared_identity.is_some() {
        "declared"
    } else {
        "solved"
    };
    rec.detail(format!("{source} e = {}", e.truncate(2)))
}

fn potential_roundtrip(ctx: &Ctx) -> CheckRecord {
    let id = "potential-roundtrip";
    let f = &ctx.model.structure;
    let pot = attempt!(id, structure_to_potential(f));
    let back = attempt!(id, pot.to_structure());
    let mut rec = CheckRecord::new(id).tensor(
        "structure",
        &attempt!(id, back.structure().tensor().sub(f.structure().tensor())),
    );
    if let Some(given) = &ctx.model.potential {
        let agrees = given
            .field()
            .truncate(pot.valid_to())
            .agrees_with(&pot.field().truncate(given.valid_to()));
        if !agrees {
            rec =
                rec.offend("recovered potential differs from the declared one in the origin gauge");
        }
    }
    rec
}

fn d_symmetry(ctx: &Ctx) -> CheckRecord {
    let id = "d-symmetry";
    let base = require!(ctx.base(id));
    let f = &ctx.model.structure;
    let n = f.dim();
    let d = |a: usize, b: usize, c: usize| f.d_tensor(base, &f.basis(a), &f.basis(b), &f.basis(c));
    let swap12 = attempt!(
        id,
        SeriesTensor::from_fields(n, 3, |i| d(i[0], i[1], i[2])?.sub(&d(i[1], i[0], i[2])?))
    );
    let swap23 = attempt!(
        id,
        SeriesTensor::from_fields(n, 3, |i| d(i[0], i[1], i[2])?.sub(&d(i[0], i[2], i[1])?))
    );
    CheckRecord::new(id)
        .tensor("D(a,b,c) - D(b,a,c)", &swap12)
        .tensor("D(a,b,c) - D(a,c,b)", &swap23)
}

fn l_fields(ctx: &Ctx, base: &Connection, e: &VectorField) -> Result<Vec<(String, VectorField)>> {
    let f = &ctx.model.structure;
    let n = f.dim();
    let mut fields = vec![("e".to_string(), e.clone())];
    for k in 0..n {
        let v0: Vec<Rational> = (0..n)
            .map(|i| Rational::from_integer(((i == k) as i64).into()))
            .collect();
        fields.push((
            format!("flat[{k}]"),
            flat_section_solve(f, &ctx.flat, &ctx.model.lambda0, &v0)?,
        ));
    }
    let e1 = base.covariant_derivative(e, e)?;
    let e2 = base.covariant_derivative(e, &e1)?;
    fields.push(("nabla_e e".to_string(), e1));
    fields.push(("nabla_e^2 e".to_string(), e2));
    Ok(fields)
}

fn l_membership(ctx: &Ctx) -> CheckRecord {
    let id = "l-sheaf.membership";
    let base = require!(ctx.base(id));
    let e = require!(ctx.identity(id));
    let fields = attempt!(id, l_fields(ctx, base, &e));
    let mut rec = CheckRecord::new(id);
    for (name, v) in &fields {
        let r = attempt!(id, ctx.model.structure.l_membership(base, v));
        rec = rec
            .tensor(&format!("{name} membership"), &r.membership)
            .tensor(&format!("{name} ad"), &r.ad)
            .tensor(&format!("{name} P"), &r.p);
    }
    let names: Vec<&str> = fields.iter().map(|(n, _)| n.as_str()).collect();
    rec.detail(format!("fields: {}", names.join(", ")))
}

fn l_derivation(ctx: &Ctx) -> CheckRecord {
    let id = "l-sheaf.derivation";
    let base = require!(ctx.base(id));
    let e = require!(ctx.identity(id));
    let r = attempt!(id, ctx.model.structure.l_membership(base, &e));
    CheckRecord::new(id).tensor("", &r.derivation)
}

fn nabla_e_e(ctx: &Ctx) -> CheckRecord {
    let id = "nabla-e-e";
    let base = require!(ctx.base(id));
    let e = require!(ctx.identity(id));
    let rec = CheckRecord::new(id).degree(e.valid_to().saturating_sub(1));
    match attempt!(id, classify_self_derivative(base, &e)) {
        SelfDerivative::Flat => rec.detail("nabla_e e = 0"),
        SelfDerivative::Eigen(c) => rec.detail(format!("nabla_e e = {} e", format_rational(&c))),
        SelfDerivative::Other => rec.offend("nabla_e e is not a constant multiple of e"),
    }
}

fn euler_of<'a>(
    ctx: &'a Ctx,
    id: &str,
) -> std::result::Result<&'a (VectorField, Rational), CheckRecord> {
    ctx.model
        .euler
        .as_ref()
        .ok_or_else(|| CheckRecord::skipped(id, "no Euler field declared"))
}

fn euler_weight(ctx: &Ctx) -> CheckRecord {
    let id = "euler.weight";
    let (field, w) = require!(euler_of(ctx, id));
    CheckRecord::new(id)
        .tensor(
            "",
            &attempt!(id, euler_residual(&ctx.model.structure, field, w)),
        )
        .detail(format!("weight {}", format_rational(w)))
}

fn euler_flat_compat(ctx: &Ctx) -> CheckRecord {
    let id = "euler.flat-compat";
    let (field, _) = require!(euler_of(ctx, id));
    CheckRecord::new(id).tensor("", &attempt!(id, flat_compat_residual(field)))
}

struct Extended {
    e: VectorField,
    e1: VectorField,
    big_e: MuSeriesVF,
}

fn extended_setup<'a>(
    ctx: &'a Ctx,
    id: &str,
) -> std::result::Result<(Extended, &'a Connection), CheckRecord> {
    let (field, _) = euler_of(ctx, id)?;
    let base = ctx.base(id)?;
    let e = ctx.identity(id)?;
    let e1 = base
        .covariant_derivative(&e, &e)
        .map_err(|err| CheckRecord::error(id, &err))?;
    let big_e = MuSeriesVF::constant(field, ctx.model.mu_order);
    Ok((Extended { e, e1, big_e }, base))
}

fn extended_e_equation(ctx: &Ctx) -> CheckRecord {
    let id = "extended.e-equation";
    let (x, base) = require!(extended_setup(ctx, id));
    let r = attempt!(
        id,
        e_equation_residual(&ctx.model.structure, base, &x.big_e, &x.e1)
    );
    CheckRecord::new(id).mu_series("", &r)
}

fn extended_flatness(ctx: &Ctx, id: &str) -> CheckRecord {
    let (x, base) = require!(extended_setup(ctx, id));
    let f = &ctx.model.structure;
    let h = attempt!(id, h_from_e(f, base, &x.big_e, &x.e1));
    let rep = attempt!(id, full_flatness_residual(f, base, &h));
    let rec = CheckRecord::new(id);
    match id {
        "extended.flatness" => rec.mu_residual(&rep.flatness),
        "extended.functional-eq" => rec.mu_residual(&rep.functional),
        _ => rec.mu_series("", &rep.e_identity),
    }
}

fn extended_h_of_e(ctx: &Ctx) -> CheckRecord {
    let id = "extended.h-of-e";
    let (x, base) = require!(extended_setup(ctx, id));
    let f = &ctx.model.structure;
    let h = attempt!(id, h_from_e(f, base, &x.big_e, &x.e1));
    let he = attempt!(id, h.apply_field(&x.e));
    CheckRecord::new(id).mu_series("", &attempt!(id, he.sub(&x.big_e)))
}

fn extended_potential_form(ctx: &Ctx) -> CheckRecord {
    let id = "extended.potential-form";
    let (x, base) = require!(extended_setup(ctx, id));
    let Some(pot) = &ctx.model.potential else {
        return CheckRecord::skipped(id, "model is given by structure tables, not a potential");
    };
    match flatness_residual_potential(&ctx.model.structure, pot, base, &x.big_e) {
        Ok(r) => CheckRecord::new(id).mu_residual(&r),
        Err(Error::Precondition(why)) => CheckRecord::skipped(id, why),
        Err(err) => CheckRecord::error(id, &err),
    }
}

fn primitive_check(ctx: &Ctx) -> CheckRecord {
    let id = "duality.primitive-section";
    let f = &ctx.model.structure;
    let u = match (&ctx.model.primitive, f.identity()) {
        (Some(u), _) => u.clone(),
        (None, Some(e)) => e.clone(),
        (None, None) => return CheckRecord::skipped(id, "no section to test"),
    };
    if !u.is_constant() {
        return CheckRecord::skipped(id, "section is not constant in flat coordinates");
    }
    let rep = attempt!(id, primitive_section(f, &ctx.flat, &u));
    let verdict = if rep.primitive {
        "primitive".to_string()
    } else {
        "not primitive: Jacobian of B u is singular at the origin".to_string()
    };
    CheckRecord::new(id)
        .tensor("", &rep.closedness)
        .detail(format!(
            "u = {}; B u = {}; {verdict}",
            u.truncate(0),
            rep.image.truncate(2)
        ))
}

fn epsilon_of<'a>(ctx: &'a Ctx, id: &str) -> std::result::Result<&'a VectorField, CheckRecord> {
    ctx.model
        .epsilon
        .as_ref()
        .ok_or_else(|| CheckRecord::skipped(id, "no twist field declared"))
}

fn duality_twist(ctx: &Ctx) -> CheckRecord {
    let id = "duality.twist";
    let eps = require!(epsilon_of(ctx, id));
    let pair = attempt!(id, dual_structure(&ctx.model.structure, eps));
    CheckRecord::new(id)
        .tensor(
            "twisted associativity",
            &attempt!(id, pair.dual.associator()),
        )
        .tensor(
            "twisted F-identity",
            &attempt!(id, pair.dual.hm_identity_residual()),
        )
        .tensor("eps * X - X", &attempt!(id, pair.identity_residual()))
        .tensor("double twist", &attempt!(id, pair.double_twist_residual()))
}

fn duality_hypotheses(ctx: &Ctx, id: &str) -> CheckRecord {
    let eps = require!(epsilon_of(ctx, id));
    let base = require!(ctx.base(id));
    let f = &ctx.model.structure;
    let nabla = attempt!(id, f.shift_base(base, &ctx.model.twist_lambda));
    let v = attempt!(id, duality_verify(f, base, &nabla, eps));
    let lambda = format_rational(&ctx.model.twist_lambda);
    let Some(h) = v.hypotheses.iter().find(|h| h.holds) else {
        return CheckRecord::skipped(
            id,
            format!("neither eps nor eps^-1 is flat for the pencil member lambda = {lambda}"),
        );
    };
    let label = h.hypothesis.label();
    let rec = CheckRecord::new(id).degree(h.hypothesis_residual.valid_to());
    let expected = match h.hypothesis {
        TwistHypothesis::FlatTwist => Some(Rational::from_integer(1.into())),
        TwistHypothesis::FlatInverse => None,
    };
    let (value, what) = if id == "duality.old-identity-bracket" {
        (&h.bracket_sign, "[eps, e] = s eps")
    } else {
        (&h.weight, "P*_e = w X * Y")
    };
    let note = if expected.is_none() {
        "; sign reversed relative to the flat-twist reading"
    } else {
        ""
    };
    match value {
        None => rec.offend(format!("{label}: no constant satisfies {what}")),
        Some(s) if expected.as_ref().is_some_and(|x| x != s) => {
            rec.offend(format!("{label}: {what} with {}", format_rational(s)))
        }
        Some(s) => rec.detail(format!(
            "{label} (lambda = {lambda}): {what} with {}{note}; {}",
            format_rational(s),
            v.convention
        )),
    }
}

fn master_equation(ctx: &Ctx) -> CheckRecord {
    let id = "master-equation";
    let b = attempt!(id, b_from_structure(&ctx.model.structure));
    CheckRecord::new(id).tensor("", &attempt!(id, master_equation_residual(&b)))
}

fn correlator_roundtrip(ctx: &Ctx) -> CheckRecord {
    let id = "correlators.roundtrip";
    let f = &ctx.model.structure;
    let b = attempt!(id, b_from_structure(f));
    let ex = attempt!(id, correlators_from_b(&b, false));
    let back = attempt!(id, b_from_correlators(&ex.family));
    let mut rec = CheckRecord::new(id).degree(b.valid_to());
    if !back.agrees_with(&b) {
        rec = rec.offend("B rebuilt from its correlators differs");
    }
    let g = attempt!(id, structure_from_b(&b));
    let diff = attempt!(id, g.structure().tensor().sub(f.structure().tensor()));
    rec.tensor("structure from B", &diff).detail(format!(
        "{} correlators up to size {}",
        ex.family.entries().count(),
        ex.family.cap()
    ))
}

type CheckFn = fn(&Ctx) -> CheckRecord;

fn runner(id: &str) -> CheckFn {
    match id {
        "pencil.torsion" => pencil_torsion,
        "pencil.r1" => |c| pencil_r(c, "pencil.r1", false),
        "pencil.r2" => |c| pencil_r(c, "pencil.r2", true),
        "hm-identity" => hm_identity,
        "identity-field" => identity_field,
        "potential-roundtrip" => potential_roundtrip,
        "d-symmetry" => d_symmetry,
        "l-sheaf.membership" => l_membership,
        "l-sheaf.derivation" => l_derivation,
        "nabla-e-e" => nabla_e_e,
        "euler.weight" => euler_weight,
        "euler.flat-compat" => euler_flat_compat,
        "extended.e-equation" => extended_e_equation,
        "extended.flatness" => |c| extended_flatness(c, "extended.flatness"),
        "extended.functional-eq" => |c| extended_flatness(c, "extended.functional-eq"),
        "extended.e-identity" => |c| extended_flatness(c, "extended.e-identity"),
        "extended.h-of-e" => extended_h_of_e,
        "extended.potential-form" => extended_potential_form,
        "duality.primitive-section" => primitive_check,
        "duality.twist" => duality_twist,
        "duality.old-identity-bracket" => |c| duality_hypotheses(c, "duality.old-identity-bracket"),
        "duality.euler-weight" => |c| duality_hypotheses(c, "duality.euler-weight"),
        "master-equation" => master_equation,
        "correlators.roundtrip" => correlator_roundtrip,
        other => unreachable!("check {other} missing from the runner table"),
    }
}

/// True when `id` is picked by a selection entry: exact match or a dotted prefix.
pub fn selected(id: &str, selection: Option<&[String]>) -> bool {
    match selection {
        None => true,
        Some(sel) => sel.iter().any(|s| {
            id == s
                || id
                    .strip_prefix(s.as_str())
                    .is_some_and(|r| r.starts_with('.'))
        }),
    }
}

/// Runs the selected checks (all when `selection` is `None`).
pub fn run_check_suite(model: &Model, selection: Option<&[String]>) -> Result<Report> {
    if let Some(sel) = selection {
        if let Some(bad) = sel.iter().find(|s| {
            !CATALOGUE
                .iter()
                .any(|(id, _)| selected(id, Some(std::slice::from_ref(s))))
        }) {
            return Err(Error::Format(format!("unknown check {bad:?}")));
        }
    }
    let n = model.structure.dim();
    let flat = Connection::flat_frame(n, model.structure.order());
    let base = model.structure.shift_base(&flat, &model.lambda0);
    let ctx = Ctx { model, flat, base };
    let ids: Vec<&str> = CATALOGUE
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| selected(id, selection))
        .collect();
    let checks: Vec<CheckRecord> = ids.par_iter().map(|id| runner(id)(&ctx)).collect();
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let summary = Summary {
        pass: count(Status::Pass),
        fail: count(Status::Fail),
        skipped: count(Status::Skipped),
    };
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        model: model.name.clone(),
        order: model.order,
        mu_order: model.mu_order,
        lambda0: format_rational(&model.lambda0),
        checks,
        summary,
    })
}
