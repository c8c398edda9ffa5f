//! Primitive sections, virtual identities and the duality twist
//! `X * Y = eps^{-1} o X o Y`.

use num_traits::Zero;

use crate::correlators::b_from_structure;
use crate::error::{Error, Result};
use crate::fmanifold::FStructure;
use crate::geometry::{lie_bracket, Connection, EndField, HiggsField, SeriesTensor, VectorField};
use crate::linalg::{self, Matrix};
use crate::series::{primitive_of_closed_family, TruncatedSeries};
use crate::Rational;

/// Bracket convention used by every residual in this module.
pub const BRACKET_CONVENTION: &str = "[X,Y]^c = X(Y^c) - Y(X^c)";

/// The endomorphism `Y -> v o Y`.
pub fn multiplication_by(f: &FStructure, v: &VectorField) -> Result<EndField> {
    let n = f.dim();
    let columns = (0..n)
        .map(|b| f.product(v, &f.basis(b)))
        .collect::<Result<Vec<_>>>()?;
    EndField::from_columns(&columns)
}

/// Solves `v o w = e` degree by degree.
pub fn circ_inverse(f: &FStructure, v: &VectorField) -> Result<VectorField> {
    let e = f.require_identity()?;
    let m = multiplication_by(f, v)?;
    m.solve(e).map_err(|err| match err {
        Error::NotInvertible(_) => {
            Error::NotInvertible("multiplication by the field is singular at the origin".into())
        }
        other => other,
    })
}

/// Result of [`primitive_section`].
#[derive(Clone, Debug)]
pub struct PrimitiveSectionReport {
    /// `B` with `d_a B^c_b = C_ab^c` and `B(0) = 0`.
    pub b: EndField,
    /// Components of `B u`.
    pub image: VectorField,
    /// `d_a (B u)^c` at the origin, rows `c`, columns `a`.
    pub jacobian_at_0: Matrix,
    pub primitive: bool,
    /// `d_a B^c_b - d_b B^c_a`, indexed `(a, b, c)`: the exterior derivative of
    /// `omega^c = sum_a B^c_a dx^a`.
    pub closedness: SeriesTensor,
}

/// Integrates the structure tensor to `B` and tests whether `x -> B(x) u` is a
/// local isomorphism. Needs the flat frame connection and a constant `u`.
pub fn primitive_section(
    f: &FStructure,
    conn: &Connection,
    u: &VectorField,
) -> Result<PrimitiveSectionReport> {
    if !conn.is_flat_frame() {
        return Err(Error::Precondition(
            "primitive sections are computed in the flat frame".into(),
        ));
    }
    if !u.is_constant() {
        return Err(Error::Precondition("u is not flat".into()));
    }
    let n = f.dim();
    let c = f.structure();
    let b = b_from_structure(f)?.field().clone();
    let u = u.map(|s| s.exact_to(b.entries()[0].cap()));
    let image = b.apply(&u)?;
    let jacobian_at_0: Matrix = (0..n)
        .map(|cc| {
            (0..n)
                .map(|a| {
                    (0..n).fold(Rational::zero(), |acc, bb| {
                        acc + c.get(a, bb, cc).constant_term() * u.component(bb).constant_term()
                    })
                })
                .collect()
        })
        .collect();
    let primitive = !linalg::determinant(&jacobian_at_0).is_zero();
    let closedness = SeriesTensor::try_from_fn(n, 3, |i| {
        let (a, bb, cc) = (i[0], i[1], i[2]);
        Ok(&b.get(cc, bb).derivative(a)? - &b.get(cc, a).derivative(bb)?)
    })?;
    Ok(PrimitiveSectionReport {
        b,
        image,
        jacobian_at_0,
        primitive,
        closedness,
    })
}

/// Solves `(conn + lambda0 C) w = 0` with `w(0) = v0`, one degree at a time.
pub fn flat_section_solve(
    f: &FStructure,
    conn: &Connection,
    lambda0: &Rational,
    v0: &[Rational],
) -> Result<VectorField> {
    let n = f.dim();
    if v0.len() != n {
        return Err(Error::DimensionMismatch {
            left: v0.len(),
            right: n,
        });
    }
    let g = f.shift_base(conn, lambda0)?;
    let valid = g.tensor().valid_to();
    let cap = f.order();
    let top = (valid + 1).min(cap);
    let mut w = VectorField::constant(cap, v0);
    for d in 0..top {
        // d_a w^c = -sum_b w^b G_ab^c; the degree-d part fixes degree d + 1 of w.
        let mut family: Vec<Vec<TruncatedSeries>> = vec![Vec::with_capacity(n); n];
        for a in 0..n {
            let mut col = vec![TruncatedSeries::zero(n, cap); n];
            for bb in 0..n {
                for (c, slot) in col.iter_mut().enumerate() {
                    let gabc = g.get(a, bb, c);
                    if gabc.is_empty() || w.component(bb).is_empty() {
                        continue;
                    }
                    *slot = &*slot - &(w.component(bb) * gabc);
                }
            }
            for (c, s) in col.into_iter().enumerate() {
                let homogeneous = TruncatedSeries::from_terms(
                    n,
                    cap,
                    s.terms()
                        .filter(|(e, _)| e.degree() == d)
                        .map(|(e, q)| (e.clone(), q.clone())),
                );
                family[c].push(homogeneous);
            }
        }
        let mut comps = w.comps().to_vec();
        for (c, fam) in family.iter().enumerate() {
            let g = primitive_of_closed_family(fam).map_err(|err| match err {
                Error::NotClosed { pair, exponent } => Error::NotIntegrable {
                    degree: d + 1,
                    detail: format!(
                        "component {c}: mixed derivatives along {} and {} differ at monomial [{exponent}]",
                        pair.0, pair.1
                    ),
                },
                other => other,
            })?;
            comps[c] = &comps[c] + &g.truncate(cap);
        }
        w = VectorField::new(comps)?;
    }
    Ok(w.with_valid_to(top))
}

/// The `lambda` for which `(conn + lambda C) v = 0`, if any.
pub fn flat_parameter(
    f: &FStructure,
    conn: &Connection,
    v: &VectorField,
) -> Result<Option<Rational>> {
    let e = f.require_identity()?;
    let nv = conn.covariant_derivative(e, v)?;
    // (conn + lambda C)_e v = nabla_e v + lambda v
    let lambda = if nv.vanishes() {
        Rational::zero()
    } else {
        let pivot = v.comps().iter().enumerate().find_map(|(i, s)| {
            s.first_nonzero_to(nv.valid_to())
                .map(|(e, c)| (i, e.clone(), c.clone()))
        });
        let Some((i, exp, coeff)) = pivot else {
            return Ok(None);
        };
        -(nv.component(i).coeff(&exp) / coeff)
    };
    let shifted = f.shift_base(conn, &lambda)?;
    for a in 0..f.dim() {
        if !shifted.along(a, v)?.vanishes() {
            return Ok(None);
        }
    }
    Ok(Some(lambda))
}

/// `(original, eps, dual, eps^{-1})` with `X * Y = eps^{-1} o X o Y`.
#[derive(Clone, Debug)]
pub struct DualityPair {
    pub original: FStructure,
    pub twist: VectorField,
    pub dual: FStructure,
    pub inverse_used: VectorField,
}

pub fn dual_structure(f: &FStructure, eps: &VectorField) -> Result<DualityPair> {
    let inv = circ_inverse(f, eps)?;
    let n = f.dim();
    let mut tensor = SeriesTensor::zero(n, 3, f.order());
    for a in 0..n {
        for b in 0..n {
            let p = f.product(&inv, &f.product(&f.basis(a), &f.basis(b))?)?;
            for c in 0..n {
                tensor.set(&[a, b, c], p.component(c).clone());
            }
        }
    }
    let dual = FStructure::new(HiggsField::new(tensor)?, Some(eps.clone()))?;
    Ok(DualityPair {
        original: f.clone(),
        twist: eps.clone(),
        dual,
        inverse_used: inv,
    })
}

impl DualityPair {
    /// `X * Y`.
    pub fn star(&self, x: &VectorField, y: &VectorField) -> Result<VectorField> {
        self.dual.product(x, y)
    }

    /// Christoffel symbols of `nabla*_X Y = eps o nabla_X (eps^{-1} o Y)`.
    pub fn dual_connection(&self, conn: &Connection) -> Result<Connection> {
        let n = self.dual.dim();
        let f = &self.original;
        let tensor = SeriesTensor::from_fields(n, 2, |i| {
            let inner = f.product(&self.inverse_used, &f.basis(i[1]))?;
            f.product(&self.twist, &conn.along(i[0], &inner)?)
        })?;
        Connection::new(tensor)
    }

    /// `eps * X - X` on the frame, indexed `(a, c)`.
    pub fn identity_residual(&self) -> Result<SeriesTensor> {
        self.dual.identity_residual(&self.twist)
    }

    /// `e^{*-1} * (d_a * d_b) - d_a o d_b` with `e^{*-1} = eps o eps`, indexed `(a, b, c)`.
    pub fn double_twist_residual(&self) -> Result<SeriesTensor> {
        let f = &self.original;
        let v = f.product(&self.twist, &self.twist)?;
        SeriesTensor::from_fields(f.dim(), 2, |i| {
            let (a, b) = (f.basis(i[0]), f.basis(i[1]));
            self.star(&v, &self.star(&a, &b)?)?.sub(&f.product(&a, &b)?)
        })
    }
}

/// Which field the hypothesis asks to be flat for `nabla = nabla0 + C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistHypothesis {
    /// `nabla eps = 0`.
    FlatTwist,
    /// `nabla (eps^{-1}) = 0`.
    FlatInverse,
}

impl TwistHypothesis {
    pub fn label(self) -> &'static str {
        match self {
            TwistHypothesis::FlatTwist => "nabla eps = 0",
            TwistHypothesis::FlatInverse => "nabla eps^{-1} = 0",
        }
    }
}

/// Per-hypothesis outcome of the Euler property of the old identity.
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub hypothesis: TwistHypothesis,
    /// Residual of the hypothesis itself, indexed `(a, c)`.
    pub hypothesis_residual: SeriesTensor,
    pub holds: bool,
    /// `s` with `[eps, e] = s eps`, when the bracket is proportional.
    pub bracket_sign: Option<Rational>,
    /// `w` with `P*_e(X, Y) = w X * Y` on the frame, when such a constant exists.
    pub weight: Option<Rational>,
}

/// Checks of the Euler property of `e` for the twisted structure.
#[derive(Clone, Debug)]
pub struct DualityVerification {
    pub convention: &'static str,
    /// `nabla != nabla0`.
    pub connections_differ: bool,
    pub hypotheses: Vec<HypothesisReport>,
    /// `(nabla0 - C)(eps^{-1})`, indexed `(a, c)`.
    pub bridging: SeriesTensor,
    /// `[eps, e] - eps`.
    pub bracket: VectorField,
    /// `P*_e(d_a, d_b) - d_a * d_b`, indexed `(a, b, c)`.
    pub euler: SeriesTensor,
    /// `[e, eps o d_a] + eps o d_a`, indexed `(a, c)`.
    pub kernel_bracket: SeriesTensor,
    /// `nabla*0_{d_b} [e, eps o d_a]`, indexed `(a, b, c)`.
    pub kernel_flatness: SeriesTensor,
}

/// `P*_X(Y, Z) = [X, Y * Z] - [X, Y] * Z - Y * [X, Z]`.
fn p_star(
    pair: &DualityPair,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
) -> Result<VectorField> {
    pair.dual.p_tensor(x, y, z)
}

/// Verifies that the flat identity `e` of the original structure is an Euler
/// field of weight one for the twisted structure, with `nabla = nabla0 + C`.
///
/// Both readings of the hypothesis are evaluated and reported side by side;
/// none of them is fatal.
pub fn duality_verify(
    f: &FStructure,
    nabla0: &Connection,
    nabla: &Connection,
    eps: &VectorField,
) -> Result<DualityVerification> {
    let n = f.dim();
    let e = f.require_identity()?.clone();
    let pair = dual_structure(f, eps)?;
    let inv = pair.inverse_used.clone();
    let connections_differ = nabla
        .tensor()
        .sub(nabla0.tensor())?
        .first_offense()
        .is_some();
    let minus = f.shift_base(nabla0, &Rational::from_integer((-1).into()))?;

    let flat_residual = |conn: &Connection, v: &VectorField| {
        SeriesTensor::from_fields(n, 1, |i| conn.along(i[0], v))
    };
    let proportional = |lhs: &VectorField, rhs: &VectorField| -> Result<Option<Rational>> {
        let pivot = rhs.comps().iter().enumerate().find_map(|(i, s)| {
            s.first_nonzero_to(lhs.valid_to())
                .map(|(ex, c)| (i, ex.clone(), c.clone()))
        });
        let Some((i, ex, c)) = pivot else {
            return Ok(None);
        };
        let s = lhs.component(i).coeff(&ex) / c;
        Ok(lhs.sub(&rhs.scale(&s))?.vanishes().then_some(s))
    };

    let bracket_value = lie_bracket(eps, &e)?;
    let bracket_sign = proportional(&bracket_value, eps)?;
    // weight: compare P*_e(d_a, d_b) with d_a * d_b on every frame pair
    let mut weight: Option<Option<Rational>> = None;
    for a in 0..n {
        for b in 0..n {
            let (da, db) = (f.basis(a), f.basis(b));
            let lhs = p_star(&pair, &e, &da, &db)?;
            let rhs = pair.star(&da, &db)?;
            if rhs.vanishes() {
                continue;
            }
            let w = proportional(&lhs, &rhs)?;
            weight = Some(match weight {
                None => w,
                Some(prev) if prev == w => prev,
                Some(_) => None,
            });
        }
    }
    let weight = weight.flatten();

    let hypotheses = [
        (TwistHypothesis::FlatTwist, flat_residual(nabla, eps)?),
        (TwistHypothesis::FlatInverse, flat_residual(nabla, &inv)?),
    ]
    .into_iter()
    .map(|(hypothesis, residual)| {
        let holds = connections_differ && residual.vanishes();
        HypothesisReport {
            hypothesis,
            holds,
            hypothesis_residual: residual,
            bracket_sign: if holds { bracket_sign.clone() } else { None },
            weight: if holds { weight.clone() } else { None },
        }
    })
    .collect();

    let bridging = flat_residual(&minus, &inv)?;
    let bracket = bracket_value.sub(eps)?;
    let euler = SeriesTensor::from_fields(n, 2, |i| {
        let (da, db) = (f.basis(i[0]), f.basis(i[1]));
        p_star(&pair, &e, &da, &db)?.sub(&pair.star(&da, &db)?)
    })?;
    let kernel_bracket = SeriesTensor::from_fields(n, 1, |i| {
        let v = f.product(eps, &f.basis(i[0]))?;
        lie_bracket(&e, &v)?.add(&v)
    })?;
    let dual_base = pair.dual_connection(nabla0)?;
    let kernel_flatness = SeriesTensor::from_fields(n, 2, |i| {
        let v = f.product(eps, &f.basis(i[0]))?;
        dual_base.along(i[1], &lie_bracket(&e, &v)?)
    })?;
    Ok(DualityVerification {
        convention: BRACKET_CONVENTION,
        connections_differ,
        hypotheses,
        bridging,
        bracket,
        euler,
        kernel_bracket,
        kernel_flatness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmanifold::VectorPotential;
    use crate::q;

    fn x(n: usize, cap: u32, i: usize) -> TruncatedSeries {
        TruncatedSeries::var(n, cap, i).unwrap()
    }

    fn field(cs: Vec<TruncatedSeries>) -> VectorField {
        VectorField::new(cs).unwrap()
    }

    fn structure(comps: Vec<TruncatedSeries>) -> FStructure {
        VectorPotential::new(field(comps))
            .to_structure()
            .unwrap()
            .with_found_identity()
    }

    fn one_dim(cap: u32) -> FStructure {
        structure(vec![(&x(1, cap, 0) * &x(1, cap, 0)).scale(&q(1, 2))])
    }

    fn qc_p1(cap: u32) -> FStructure {
        let n = 2;
        structure(vec![
            &(&x(n, cap, 0) * &x(n, cap, 0)).scale(&q(1, 2)) + &x(n, cap, 1).exp().unwrap(),
            &x(n, cap, 0) * &x(n, cap, 1),
        ])
    }

    fn nilpotent(cap: u32) -> FStructure {
        let n = 2;
        structure(vec![
            (&x(n, cap, 0) * &x(n, cap, 0)).scale(&q(1, 2)),
            &x(n, cap, 0) * &x(n, cap, 1),
        ])
    }

    #[test]
    fn inverses() {
        let f = qc_p1(7);
        let e = f.identity().unwrap().clone();
        assert!(circ_inverse(&f, &e).unwrap().agrees_with(&e));
        let cap = f.order();
        let inv = circ_inverse(&f, &f.basis(1)).unwrap();
        let expected = field(vec![
            TruncatedSeries::zero(2, cap),
            x(2, cap, 1).neg().exp().unwrap(),
        ]);
        assert!(inv.agrees_with(&expected));
        assert!(f.product(&inv, &f.basis(1)).unwrap().agrees_with(&e));

        let nil = nilpotent(6);
        assert!(matches!(
            circ_inverse(&nil, &nil.basis(1)),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn primitive_sections() {
        let f = qc_p1(7);
        let cap = f.order();
        let flat = Connection::flat_frame(2, cap);
        let rep = primitive_section(&f, &flat, &f.basis(0)).unwrap();
        assert!(rep.primitive);
        assert!(rep.image.agrees_with(&VectorField::radial(2, cap)));
        assert!(rep.closedness.vanishes());

        let rep = primitive_section(&f, &flat, &f.basis(1)).unwrap();
        let ex = &x(2, cap, 1).exp().unwrap() - &TruncatedSeries::one(2, cap);
        assert!(rep.image.agrees_with(&field(vec![ex, x(2, cap, 0)])));
        assert_eq!(
            rep.jacobian_at_0,
            vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(0, 1)]]
        );
        assert!(rep.primitive);

        let nil = nilpotent(6);
        let rep = primitive_section(&nil, &Connection::flat_frame(2, nil.order()), &nil.basis(1))
            .unwrap();
        assert!(!rep.primitive);
        assert!(rep.closedness.vanishes());

        let moving = field(vec![x(2, cap, 0), TruncatedSeries::zero(2, cap)]);
        assert!(matches!(
            primitive_section(&f, &flat, &moving),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn flat_sections() {
        let f = one_dim(8);
        let cap = f.order();
        let flat = Connection::flat_frame(1, cap);
        let w = flat_section_solve(&f, &flat, &q(0, 1), &[q(3, 1)]).unwrap();
        assert!(w.agrees_with(&VectorField::constant(cap, &[q(3, 1)])));
        let w = flat_section_solve(&f, &flat, &q(1, 1), &[q(1, 1)]).unwrap();
        let expected = field(vec![x(1, cap, 0).neg().exp().unwrap()]);
        assert!(w.agrees_with(&expected));
        assert_eq!(w.valid_to(), cap);

        let f = qc_p1(7);
        let flat = Connection::flat_frame(2, f.order());
        let w = flat_section_solve(&f, &flat, &q(1, 1), &[q(1, 1), q(0, 1)]).unwrap();
        let shifted = f.shift_base(&flat, &q(1, 1)).unwrap();
        for a in 0..2 {
            assert!(shifted.along(a, &w).unwrap().vanishes());
        }
        assert_eq!(flat_parameter(&f, &flat, &w).unwrap(), Some(q(1, 1)));
    }

    #[test]
    fn dual_of_qc_p1() {
        let f = qc_p1(8);
        let cap = f.order();
        let eps = field(vec![
            TruncatedSeries::zero(2, cap),
            x(2, cap, 1).neg().exp().unwrap(),
        ]);
        let pair = dual_structure(&f, &eps).unwrap();
        assert!(pair.inverse_used.agrees_with(&f.basis(1)));
        let d0 = f.basis(0);
        let d1 = f.basis(1);
        assert!(pair.star(&d0, &d0).unwrap().agrees_with(&d1));
        let ex = field(vec![
            TruncatedSeries::zero(2, cap),
            x(2, cap, 1).exp().unwrap(),
        ]);
        assert!(pair.star(&d1, &d1).unwrap().agrees_with(&ex));
        assert!(pair.identity_residual().unwrap().vanishes());
        assert!(pair.double_twist_residual().unwrap().vanishes());
        assert!(pair.dual.associator().unwrap().vanishes());

        // The twisted product fails the F-identity already at
        // the constant term: P_{d1}(d0, d1) = [d1, exp(x1) d0] = exp(x1) d0,
        // while 2 d0 * P_{d0}(d0, d1) = 0.
        let hm = pair.dual.hm_identity_residual().unwrap();
        let off = hm.first_offense().unwrap();
        assert_eq!(
            (off.index.as_slice(), off.exponent.as_slice()),
            (&[0, 0, 0, 1, 0][..], &[0, 0][..])
        );
        let generic = pair.dual.hm_residual_at(&d0, &d0, &d0, &d1).unwrap();
        assert!(generic.agrees_with(&field(vec![
            x(2, cap, 1).exp().unwrap(),
            TruncatedSeries::zero(2, cap)
        ])));

        let base = pair
            .dual_connection(&Connection::flat_frame(2, cap))
            .unwrap();
        assert!(base.torsion().vanishes());
        assert!(base.curvature().unwrap().vanishes());
        let (r1, r2) = pair.dual.pencil_split(&base).unwrap();
        assert!(r2.vanishes());
        assert!(!r1.vanishes());

        // Twisting by the Euler field does give an F-manifold.
        let euler = field(vec![
            x(2, cap, 0),
            TruncatedSeries::constant(2, cap, q(2, 1)),
        ]);
        let by_euler = dual_structure(&f, &euler).unwrap();
        assert!(by_euler.dual.hm_identity_residual().unwrap().vanishes());
        assert!(by_euler.identity_residual().unwrap().vanishes());

        let same = dual_structure(&f, f.identity().unwrap()).unwrap();
        assert_eq!(
            same.dual
                .structure()
                .tensor()
                .sub(f.structure().tensor())
                .unwrap()
                .first_offense(),
            None
        );
    }

    #[test]
    fn twist_hypotheses_on_one_dim() {
        let f = one_dim(8);
        let cap = f.order();
        let flat = Connection::flat_frame(1, cap);
        let nabla = f.shift_base(&flat, &q(1, 1)).unwrap();

        let eps = flat_section_solve(&f, &flat, &q(1, 1), &[q(1, 1)]).unwrap();
        let v = duality_verify(&f, &flat, &nabla, &eps).unwrap();
        assert!(v.connections_differ);
        let p = &v.hypotheses[0];
        assert!(p.holds);
        assert_eq!(p.bracket_sign, Some(q(1, 1)));
        assert_eq!(p.weight, Some(q(1, 1)));
        assert!(v.bracket.vanishes() && v.euler.vanishes());
        assert!(v.bridging.vanishes());
        assert!(v.kernel_bracket.vanishes() && v.kernel_flatness.vanishes());
        assert!(!v.hypotheses[1].holds);

        let eps_tilde = field(vec![x(1, cap, 0).exp().unwrap()]);
        let v = duality_verify(&f, &flat, &nabla, &eps_tilde).unwrap();
        let d = &v.hypotheses[1];
        assert!(d.holds);
        assert_eq!(d.bracket_sign, Some(q(-1, 1)));
        assert_eq!(d.weight, Some(q(-1, 1)));
        assert!(!v.hypotheses[0].holds);
        assert!(!v.bracket.vanishes());

        let e = f.identity().unwrap().clone();
        let v = duality_verify(&f, &flat, &flat, &e).unwrap();
        assert!(!v.connections_differ);
        assert!(v.hypotheses.iter().all(|h| !h.holds));
        assert_eq!(v.convention, BRACKET_CONVENTION);
    }
}
