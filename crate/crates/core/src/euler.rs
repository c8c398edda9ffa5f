//! Euler fields and the extended connection along the pencil parameter.
//!
//! Everything depending on the pencil parameter is written in `mu = 1/lambda`
//! as a polynomial truncated above a fixed power `mu_cap`, independent of the
//! degree cap in the coordinates.

use crate::error::{Error, Result};
use crate::fmanifold::{FStructure, VectorPotential};
use crate::geometry::{lie_bracket, Connection, EndField, Offense, SeriesTensor, VectorField};
use crate::Rational;

/// `sum_i mu^i X_i` for `i <= mu_cap`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuSeriesVF {
    coeffs: Vec<VectorField>,
}

impl MuSeriesVF {
    pub fn new(coeffs: Vec<VectorField>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Precondition(
                "a mu-series needs at least one coefficient".into(),
            ));
        };
        let n = first.dim();
        for c in &coeffs {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    left: c.dim(),
                    right: n,
                });
            }
        }
        Ok(MuSeriesVF { coeffs })
    }

    /// A parameter-independent field.
    pub fn constant(v: &VectorField, mu_cap: usize) -> Self {
        let zero = VectorField::zero(v.dim(), v.cap()).with_valid_to(v.valid_to());
        let mut coeffs = vec![zero; mu_cap + 1];
        coeffs[0] = v.clone();
        MuSeriesVF { coeffs }
    }

    pub fn zero(n: usize, cap: u32, mu_cap: usize) -> Self {
        MuSeriesVF {
            coeffs: vec![VectorField::zero(n, cap); mu_cap + 1],
        }
    }

    pub fn mu_cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    pub fn coeff(&self, i: usize) -> &VectorField {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[VectorField] {
        &self.coeffs
    }

    pub fn valid_to(&self) -> u32 {
        self.coeffs.iter().map(|c| c.valid_to()).min().unwrap_or(0)
    }

    fn zip(
        &self,
        other: &MuSeriesVF,
        f: impl Fn(&VectorField, &VectorField) -> Result<VectorField>,
    ) -> Result<MuSeriesVF> {
        let m = self.mu_cap().min(other.mu_cap());
        let coeffs = (0..=m)
            .map(|i| f(&self.coeffs[i], &other.coeffs[i]))
            .collect::<Result<_>>()?;
        Ok(MuSeriesVF { coeffs })
    }

    pub fn add(&self, other: &MuSeriesVF) -> Result<MuSeriesVF> {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &MuSeriesVF) -> Result<MuSeriesVF> {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, factor: &Rational) -> MuSeriesVF {
        MuSeriesVF {
            coeffs: self.coeffs.iter().map(|c| c.scale(factor)).collect(),
        }
    }

    pub fn neg(&self) -> MuSeriesVF {
        MuSeriesVF {
            coeffs: self.coeffs.iter().map(|c| c.neg()).collect(),
        }
    }

    /// Multiplication by `mu`; the top coefficient falls off.
    pub fn times_mu(&self) -> MuSeriesVF {
        let n = self.dim();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        coeffs.push(VectorField::zero(n, self.coeffs[0].cap()).with_valid_to(self.valid_to()));
        coeffs.extend(self.coeffs[..self.mu_cap()].iter().cloned());
        MuSeriesVF { coeffs }
    }

    /// Cauchy product for a bilinear operation, truncated at the smaller `mu_cap`.
    pub fn convolve(
        &self,
        other: &MuSeriesVF,
        f: impl Fn(&VectorField, &VectorField) -> Result<VectorField>,
    ) -> Result<MuSeriesVF> {
        let m = self.mu_cap().min(other.mu_cap());
        let mut coeffs = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let mut acc: Option<VectorField> = None;
            for i in 0..=k {
                let t = f(&self.coeffs[i], &other.coeffs[k - i])?;
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t)?,
                });
            }
            coeffs.push(acc.expect("k >= 0"));
        }
        Ok(MuSeriesVF { coeffs })
    }

    /// Lowest `mu` power carrying a nonzero coefficient on its proven range.
    pub fn first_offense(&self) -> Option<MuOffense> {
        self.coeffs.iter().enumerate().find_map(|(i, c)| {
            c.to_tensor().first_offense().map(|offense| MuOffense {
                mu_power: i,
                offense,
            })
        })
    }

    pub fn vanishes(&self) -> bool {
        self.first_offense().is_none()
    }

    pub fn agrees_with(&self, other: &MuSeriesVF) -> bool {
        self.sub(other).map(|d| d.vanishes()).unwrap_or(false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuOffense {
    pub mu_power: usize,
    pub offense: Offense,
}

impl std::fmt::Display for MuOffense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "mu^{}: {}", self.mu_power, self.offense)
    }
}

/// `sum_i mu^i H_i` with endomorphism coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuSeriesEnd {
    coeffs: Vec<EndField>,
}

impl MuSeriesEnd {
    /// Assembles `H` from its values `H(d_b)` on the frame.
    pub fn from_columns(columns: &[MuSeriesVF]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Precondition("no columns".into()));
        }
        let m = columns.iter().map(|c| c.mu_cap()).min().unwrap_or(0);
        let coeffs = (0..=m)
            .map(|i| {
                let cols: Vec<VectorField> = columns.iter().map(|c| c.coeff(i).clone()).collect();
                EndField::from_columns(&cols)
            })
            .collect::<Result<_>>()?;
        Ok(MuSeriesEnd { coeffs })
    }

    pub fn mu_cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, i: usize) -> &EndField {
        &self.coeffs[i]
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    /// `H(Y)`, linear over functions and over `mu`.
    pub fn apply(&self, y: &MuSeriesVF) -> Result<MuSeriesVF> {
        let m = self.mu_cap().min(y.mu_cap());
        let mut coeffs = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let mut acc = self.coeffs[0].apply(y.coeff(k))?;
            for i in 1..=k {
                acc = acc.add(&self.coeffs[i].apply(y.coeff(k - i))?)?;
            }
            coeffs.push(acc);
        }
        MuSeriesVF::new(coeffs)
    }

    pub fn apply_field(&self, y: &VectorField) -> Result<MuSeriesVF> {
        self.apply(&MuSeriesVF::constant(y, self.mu_cap()))
    }
}

/// Residual family indexed by frame arguments (row-major), each a `mu`-series.
#[derive(Clone, Debug)]
pub struct MuResidual {
    pub rank: usize,
    pub entries: Vec<(Vec<usize>, MuSeriesVF)>,
}

impl MuResidual {
    pub fn first_offense(&self) -> Option<(Vec<usize>, MuOffense)> {
        self.entries
            .iter()
            .find_map(|(idx, s)| s.first_offense().map(|o| (idx.clone(), o)))
    }

    pub fn vanishes(&self) -> bool {
        self.first_offense().is_none()
    }

    pub fn valid_to(&self) -> u32 {
        self.entries
            .iter()
            .map(|(_, s)| s.valid_to())
            .min()
            .unwrap_or(0)
    }

    pub fn mu_cap(&self) -> usize {
        self.entries
            .iter()
            .map(|(_, s)| s.mu_cap())
            .min()
            .unwrap_or(0)
    }
}

fn circ(f: &FStructure, x: &MuSeriesVF, y: &MuSeriesVF) -> Result<MuSeriesVF> {
    x.convolve(y, |a, b| f.product(a, b))
}

fn nabla(conn: &Connection, x: &MuSeriesVF, y: &MuSeriesVF) -> Result<MuSeriesVF> {
    x.convolve(y, |a, b| conn.covariant_derivative(a, b))
}

fn bracket(x: &MuSeriesVF, y: &MuSeriesVF) -> Result<MuSeriesVF> {
    x.convolve(y, lie_bracket)
}

/// `P_E(d_a, d_b) - d0 d_a o d_b`, indexed `(a, b, c)`.
pub fn euler_residual(
    f: &FStructure,
    field: &VectorField,
    weight: &Rational,
) -> Result<SeriesTensor> {
    SeriesTensor::from_fields(f.dim(), 2, |i| {
        let (da, db) = (f.basis(i[0]), f.basis(i[1]));
        f.p_tensor(field, &da, &db)?
            .sub(&f.product(&da, &db)?.scale(weight))
    })
}

/// `d_a E^c` minus its value at the origin, indexed `(a, c)`. In the flat
/// frame `[E, d_a] = -d_a E` is flat iff every entry vanishes.
pub fn flat_compat_residual(field: &VectorField) -> Result<SeriesTensor> {
    let n = field.dim();
    SeriesTensor::try_from_fn(n, 2, |i| {
        let d = field.component(i[1]).derivative(i[0])?;
        let c0 = crate::TruncatedSeries::constant(n, d.cap(), d.constant_term());
        Ok(&d - &c0)
    })
}

/// True iff `[E, Ker nabla] ⊂ Ker nabla` for the flat frame connection, i.e.
/// every component of `E` has degree at most one on the proven range.
pub fn flat_compat(field: &VectorField) -> Result<bool> {
    Ok(flat_compat_residual(field)?.vanishes())
}

/// An Euler field whose weight has been checked against a structure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerField {
    field: VectorField,
    weight: Rational,
    compatible: bool,
}

impl EulerField {
    /// Checks the Euler equation and records flat compatibility.
    pub fn certify(f: &FStructure, field: VectorField, weight: Rational) -> Result<Self> {
        let res = euler_residual(f, &field, &weight)?;
        if let Some(off) = res.first_offense() {
            return Err(Error::Certification(format!(
                "not an Euler field of weight {}: {off}",
                crate::series::format_rational(&weight)
            )));
        }
        let compatible = flat_compat(&field)?;
        Ok(EulerField {
            field,
            weight,
            compatible,
        })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn weight(&self) -> &Rational {
        &self.weight
    }

    pub fn is_compatible(&self) -> bool {
        self.compatible
    }
}

/// `E + s e`, recertified with the same weight. `e` must be a flat identity.
pub fn euler_family(f: &FStructure, euler: &EulerField, s: &Rational) -> Result<EulerField> {
    let e = f.require_identity()?;
    if !e.is_constant() {
        return Err(Error::Precondition("the identity is not flat".into()));
    }
    let field = euler.field.add(&e.scale(s))?;
    let certified = EulerField::certify(f, field, euler.weight.clone())?;
    if euler.compatible && !certified.compatible {
        return Err(Error::Certification(
            "family member lost flat compatibility".into(),
        ));
    }
    Ok(certified)
}

/// `(e + mu e1)^{-1} = sum_i (-1)^i e1^{o i} mu^i`, with the zeroth power read as `e`.
pub fn geometric_inverse(f: &FStructure, e1: &VectorField, mu_cap: usize) -> Result<MuSeriesVF> {
    let e = f.require_identity()?.clone();
    let mut coeffs = Vec::with_capacity(mu_cap + 1);
    let mut power = e;
    for i in 0..=mu_cap {
        if i > 0 {
            power = f.product(&power, e1)?;
        }
        coeffs.push(if i % 2 == 0 {
            power.clone()
        } else {
            power.neg()
        });
    }
    MuSeriesVF::new(coeffs)
}

/// The operator `H` reconstructed from `E`:
/// `H(X) = X o E + mu (nabla_{w o X} E - w o X) + (w o X - X) o E` with
/// `w = (e + mu e1)^{-1}`.
pub fn h_from_e(
    f: &FStructure,
    conn: &Connection,
    e_field: &MuSeriesVF,
    e1: &VectorField,
) -> Result<MuSeriesEnd> {
    let mu_cap = e_field.mu_cap();
    let w = geometric_inverse(f, e1, mu_cap)?;
    let columns = (0..f.dim())
        .map(|b| {
            let x = MuSeriesVF::constant(&f.basis(b), mu_cap);
            let wx = circ(f, &w, &x)?;
            let first = circ(f, &x, e_field)?;
            let second = nabla(conn, &wx, e_field)?.sub(&wx)?.times_mu();
            let third = circ(f, &wx.sub(&x)?, e_field)?;
            first.add(&second)?.add(&third)
        })
        .collect::<Result<Vec<_>>>()?;
    MuSeriesEnd::from_columns(&columns)
}

/// `H` from the iteration `H(X) = A(X) + mu B(X) + mu H(C(X))` with
/// `A(X) = X o E`, `B(X) = nabla_X E - X`, `C(X) = -X o e1`, unrolled up to `mu_cap`.
pub fn h_by_iteration(
    f: &FStructure,
    conn: &Connection,
    e_field: &MuSeriesVF,
    e1: &VectorField,
) -> Result<MuSeriesEnd> {
    let mu_cap = e_field.mu_cap();
    let e1s = MuSeriesVF::constant(e1, mu_cap);
    let op_a = |x: &MuSeriesVF| circ(f, x, e_field);
    let op_b = |x: &MuSeriesVF| nabla(conn, x, e_field)?.sub(x);
    let op_c = |x: &MuSeriesVF| Ok::<_, Error>(circ(f, x, &e1s)?.neg());
    let columns = (0..f.dim())
        .map(|b| {
            let x = MuSeriesVF::constant(&f.basis(b), mu_cap);
            let mut total = op_a(&x)?;
            // c_prev = C^{k-1}(X)
            let mut c_prev = x.clone();
            let mu_k = |s: MuSeriesVF, k: usize| {
                let mut s = s;
                for _ in 0..k {
                    s = s.times_mu();
                }
                s
            };
            for k in 1..=mu_cap {
                let c_next = op_c(&c_prev)?;
                let term = op_b(&c_prev)?.add(&op_a(&c_next)?)?;
                total = total.add(&mu_k(term, k))?;
                c_prev = c_next;
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()?;
    MuSeriesEnd::from_columns(&columns)
}

/// `H(X) = X o E + mu (nabla_X E - X)` for a parameter-independent `E`.
pub fn h_simple(
    f: &FStructure,
    conn: &Connection,
    e_field: &VectorField,
    mu_cap: usize,
) -> Result<MuSeriesEnd> {
    let n = f.dim();
    let zero = VectorField::zero(n, f.order());
    h_from_e(f, conn, &MuSeriesVF::constant(e_field, mu_cap), &zero)
}

/// `(e + mu e1) o nabla_w E - e1 o E - e`.
pub fn e_equation_residual(
    f: &FStructure,
    conn: &Connection,
    e_field: &MuSeriesVF,
    e1: &VectorField,
) -> Result<MuSeriesVF> {
    let mu_cap = e_field.mu_cap();
    let e = MuSeriesVF::constant(f.require_identity()?, mu_cap);
    let e1s = MuSeriesVF::constant(e1, mu_cap);
    let w = geometric_inverse(f, e1, mu_cap)?;
    let shifted = e.add(&e1s.times_mu())?;
    circ(f, &shifted, &nabla(conn, &w, e_field)?)?
        .sub(&circ(f, &e1s, e_field)?)?
        .sub(&e)
}

/// Residuals of the flatness of the extended connection.
#[derive(Clone, Debug)]
pub struct FlatnessReport {
    /// `H(X o Y) - X o H(Y) - mu (nabla_X H(Y) - X o Y - H(nabla_X Y))` on frame pairs.
    pub flatness: MuResidual,
    /// `H(X) - X o H(e) - mu (nabla_X H(e) - X - H(X o e1))` on the frame.
    pub functional: MuResidual,
    /// `[e, H(e)] + H(e) o e1 - H(e1) - e`.
    pub e_identity: MuSeriesVF,
}

pub fn full_flatness_residual(
    f: &FStructure,
    conn: &Connection,
    h: &MuSeriesEnd,
) -> Result<FlatnessReport> {
    let n = f.dim();
    let m = h.mu_cap();
    let e = f.require_identity()?.clone();
    let e1 = conn.covariant_derivative(&e, &e)?;
    let es = MuSeriesVF::constant(&e, m);
    let e1s = MuSeriesVF::constant(&e1, m);
    let he = h.apply(&es)?;
    let mut flatness = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let (da, db) = (f.basis(a), f.basis(b));
            let xs = MuSeriesVF::constant(&da, m);
            let xy = MuSeriesVF::constant(&f.product(&da, &db)?, m);
            let hy = h.apply_field(&db)?;
            let nxy = MuSeriesVF::constant(&conn.covariant_derivative(&da, &db)?, m);
            let inner = nabla(conn, &xs, &hy)?.sub(&xy)?.sub(&h.apply(&nxy)?)?;
            let r = h
                .apply(&xy)?
                .sub(&circ(f, &xs, &hy)?)?
                .sub(&inner.times_mu())?;
            flatness.push((vec![a, b], r));
        }
    }
    let mut functional = Vec::new();
    for a in 0..n {
        let da = f.basis(a);
        let xs = MuSeriesVF::constant(&da, m);
        let inner = nabla(conn, &xs, &he)?
            .sub(&xs)?
            .sub(&h.apply(&circ(f, &xs, &e1s)?)?)?;
        let r = h
            .apply(&xs)?
            .sub(&circ(f, &xs, &he)?)?
            .sub(&inner.times_mu())?;
        functional.push((vec![a], r));
    }
    let e_identity = bracket(&es, &he)?
        .add(&circ(f, &he, &e1s)?)?
        .sub(&h.apply(&e1s)?)?
        .sub(&es)?;
    Ok(FlatnessReport {
        flatness: MuResidual {
            rank: 2,
            entries: flatness,
        },
        functional: MuResidual {
            rank: 1,
            entries: functional,
        },
        e_identity,
    })
}

/// Flatness of the extended connection rewritten through the potential:
/// `P_E(X, Y) - [X, [Y, C - mu E]] - X o H(Y o e1) - mu [X, H(Y o e1)]` on frame
/// pairs, with `H = h_from_e(E)`.
///
/// The connection must be the flat frame, and `E` must solve the equation of
/// [`e_equation_residual`]; otherwise the residual of that equation is
/// reported as a precondition failure.
pub fn flatness_residual_potential(
    f: &FStructure,
    potential: &VectorPotential,
    conn: &Connection,
    e_field: &MuSeriesVF,
) -> Result<MuResidual> {
    if !conn.is_flat_frame() {
        return Err(Error::Precondition(
            "the potential form needs the flat frame connection".into(),
        ));
    }
    let n = f.dim();
    let m = e_field.mu_cap();
    let e = f.require_identity()?.clone();
    let e1 = conn.covariant_derivative(&e, &e)?;
    let eq = e_equation_residual(f, conn, e_field, &e1)?;
    if let Some(off) = eq.first_offense() {
        return Err(Error::Precondition(format!(
            "E does not solve (e + mu e1) o nabla_w E - e1 o E = e: {off}"
        )));
    }
    let h = h_from_e(f, conn, e_field, &e1)?;
    let c = MuSeriesVF::constant(potential.field(), m);
    let c_minus = c.sub(&e_field.times_mu())?;
    let mut entries = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let (da, db) = (f.basis(a), f.basis(b));
            let pe = MuSeriesVF::new(
                e_field
                    .coeffs()
                    .iter()
                    .map(|ei| f.p_tensor(ei, &da, &db))
                    .collect::<Result<_>>()?,
            )?;
            // [d_a, [d_b, V]] = d_a d_b V in the flat frame
            let dd = MuSeriesVF::new(
                c_minus
                    .coeffs()
                    .iter()
                    .map(|v| v.derivative(b)?.derivative(a))
                    .collect::<Result<_>>()?,
            )?;
            let h_ye1 = h.apply_field(&f.product(&db, &e1)?)?;
            let xs = MuSeriesVF::constant(&da, m);
            let r = pe
                .sub(&dd)?
                .sub(&circ(f, &xs, &h_ye1)?)?
                .sub(&bracket(&xs, &h_ye1)?.times_mu())?;
            entries.push((vec![a, b], r));
        }
    }
    Ok(MuResidual { rank: 2, entries })
}

/// Coefficient-wise check that a residual is zero up to the given `mu` power.
pub fn mu_vanishes_to(s: &MuSeriesVF, mu_power: usize) -> bool {
    s.coeffs()
        .iter()
        .take(mu_power + 1)
        .all(|c| c.to_tensor().first_offense().is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmanifold::VectorPotential;
    use crate::{q, TruncatedSeries};

    fn x(n: usize, cap: u32, i: usize) -> TruncatedSeries {
        TruncatedSeries::var(n, cap, i).unwrap()
    }

    fn one_dim(cap: u32) -> (VectorPotential, FStructure) {
        let p = VectorPotential::new(
            VectorField::new(vec![(&x(1, cap, 0) * &x(1, cap, 0)).scale(&q(1, 2))]).unwrap(),
        );
        let f = p.to_structure().unwrap().with_found_identity();
        (p, f)
    }

    fn qc_p1(cap: u32) -> (VectorPotential, FStructure) {
        let n = 2;
        let c0 = &(&x(n, cap, 0) * &x(n, cap, 0)).scale(&q(1, 2)) + &x(n, cap, 1).exp().unwrap();
        let c1 = &x(n, cap, 0) * &x(n, cap, 1);
        let p = VectorPotential::new(VectorField::new(vec![c0, c1]).unwrap());
        let f = p.to_structure().unwrap().with_found_identity();
        (p, f)
    }

    fn field(cs: Vec<TruncatedSeries>) -> VectorField {
        VectorField::new(cs).unwrap()
    }

    fn qc_euler(cap: u32) -> VectorField {
        field(vec![
            x(2, cap, 0),
            TruncatedSeries::constant(2, cap, q(2, 1)),
        ])
    }

    #[test]
    fn euler_weight_checks() {
        let (_, f) = qc_p1(7);
        let cap = f.order();
        let e_field = qc_euler(cap);
        assert!(euler_residual(&f, &e_field, &q(1, 1)).unwrap().vanishes());
        assert!(!euler_residual(&f, &e_field, &q(2, 1)).unwrap().vanishes());
        let e = f.identity().unwrap().clone();
        assert!(euler_residual(&f, &e, &q(0, 1)).unwrap().vanishes());

        let cert = EulerField::certify(&f, e_field.clone(), q(1, 1)).unwrap();
        assert!(cert.is_compatible());
        let id = EulerField::certify(&f, e.clone(), q(0, 1)).unwrap();
        let comm = lie_bracket(cert.field(), id.field()).unwrap();
        assert!(euler_residual(&f, &comm, &q(0, 1)).unwrap().vanishes());
        let sum = cert.field().add(id.field()).unwrap();
        assert!(euler_residual(&f, &sum, &q(1, 1)).unwrap().vanishes());

        let bad = field(vec![
            &x(2, cap, 0) * &x(2, cap, 0),
            TruncatedSeries::zero(2, cap),
        ]);
        assert!(matches!(
            EulerField::certify(&f, bad, q(1, 1)),
            Err(Error::Certification(_))
        ));
    }

    #[test]
    fn flat_compatibility() {
        let cap = 4;
        assert!(flat_compat(&qc_euler(cap)).unwrap());
        let sq = field(vec![
            &x(2, cap, 0) * &x(2, cap, 0),
            TruncatedSeries::zero(2, cap),
        ]);
        assert!(!flat_compat(&sq).unwrap());
        assert!(flat_compat(&VectorField::constant(cap, &[q(1, 1), q(-3, 2)])).unwrap());
    }

    #[test]
    fn euler_line() {
        let (_, f) = qc_p1(6);
        let cert = EulerField::certify(&f, qc_euler(f.order()), q(1, 1)).unwrap();
        let same = euler_family(&f, &cert, &q(0, 1)).unwrap();
        assert_eq!(same, cert);
        let shifted = euler_family(&f, &cert, &q(1, 1)).unwrap();
        assert!(shifted
            .field()
            .component(0)
            .agrees_with(&(&x(2, f.order(), 0) + &TruncatedSeries::one(2, f.order()))));
        let back = euler_family(&f, &shifted, &q(-1, 1)).unwrap();
        assert!(back.field().agrees_with(cert.field()));
    }

    #[test]
    fn geometric_inverse_cases() {
        let (_, f) = one_dim(6);
        let e = f.identity().unwrap().clone();
        let zero = VectorField::zero(1, f.order());
        let w = geometric_inverse(&f, &zero, 3).unwrap();
        assert!(w.agrees_with(&MuSeriesVF::constant(&e, 3)));

        let c = q(2, 3);
        let e1 = e.scale(&c);
        let w = geometric_inverse(&f, &e1, 4).unwrap();
        for i in 0..=4 {
            let expected = e.scale(&(-&c).pow(i as i32));
            assert!(w.coeff(i).agrees_with(&expected));
        }
        // (e + mu e1) o w = e
        let m = MuSeriesVF::constant(&e, 4)
            .add(&MuSeriesVF::constant(&e1, 4).times_mu())
            .unwrap();
        let prod = circ(&f, &m, &w).unwrap();
        assert!(prod.agrees_with(&MuSeriesVF::constant(&e, 4)));
    }

    #[test]
    fn h_closed_form_matches_iteration() {
        let (_, f) = qc_p1(6);
        let cap = f.order();
        let flat = Connection::flat_frame(2, cap);
        let lambda0 = q(1, 2);
        let conn = f.shift_base(&flat, &lambda0).unwrap();
        let e = f.identity().unwrap().clone();
        let e1 = conn.covariant_derivative(&e, &e).unwrap();
        let e_mu = MuSeriesVF::new(vec![
            qc_euler(cap),
            field(vec![TruncatedSeries::zero(2, cap), x(2, cap, 1)]),
            VectorField::zero(2, cap),
            VectorField::zero(2, cap),
        ])
        .unwrap();
        let closed = h_from_e(&f, &conn, &e_mu, &e1).unwrap();
        let iterated = h_by_iteration(&f, &conn, &e_mu, &e1).unwrap();
        for b in 0..2 {
            let l = closed.apply_field(&f.basis(b)).unwrap();
            let r = iterated.apply_field(&f.basis(b)).unwrap();
            assert!(l.agrees_with(&r));
        }
    }

    #[test]
    fn simple_h_on_one_dim() {
        let (_, f) = one_dim(6);
        let cap = f.order();
        let conn = Connection::flat_frame(1, cap);
        let e_field = field(vec![x(1, cap, 0)]);
        let h = h_simple(&f, &conn, &e_field, 3).unwrap();
        let hd0 = h.apply_field(&f.basis(0)).unwrap();
        assert!(hd0.agrees_with(&MuSeriesVF::constant(&e_field, 3)));
        let rep = full_flatness_residual(&f, &conn, &h).unwrap();
        assert!(rep.flatness.vanishes() && rep.functional.vanishes() && rep.e_identity.vanishes());
    }

    #[test]
    fn e_equation_examples() {
        let (_, f) = one_dim(6);
        let cap = f.order();
        let conn = Connection::flat_frame(1, cap);
        let zero = VectorField::zero(1, cap);
        let e_mu = MuSeriesVF::constant(&field(vec![x(1, cap, 0)]), 3);
        assert!(e_equation_residual(&f, &conn, &e_mu, &zero)
            .unwrap()
            .vanishes());
        let r = e_equation_residual(&f, &conn, &MuSeriesVF::zero(1, cap, 3), &zero).unwrap();
        assert!(r.agrees_with(&MuSeriesVF::constant(&f.basis(0).neg(), 3)));

        let (_, f) = qc_p1(6);
        let conn = Connection::flat_frame(2, f.order());
        let zero = VectorField::zero(2, f.order());
        let e_mu = MuSeriesVF::constant(&qc_euler(f.order()), 3);
        assert!(e_equation_residual(&f, &conn, &e_mu, &zero)
            .unwrap()
            .vanishes());
    }

    #[test]
    fn extended_flatness_both_directions() {
        let (_, f) = qc_p1(7);
        let cap = f.order();
        let conn = Connection::flat_frame(2, cap);
        let h = h_simple(&f, &conn, &qc_euler(cap), 3).unwrap();
        let rep = full_flatness_residual(&f, &conn, &h).unwrap();
        assert!(rep.flatness.vanishes());
        assert_eq!(rep.flatness.mu_cap(), 3);

        let non_euler = field(vec![
            &x(2, cap, 0) * &x(2, cap, 0),
            TruncatedSeries::zero(2, cap),
        ]);
        let h = h_simple(&f, &conn, &non_euler, 3).unwrap();
        assert!(!full_flatness_residual(&f, &conn, &h)
            .unwrap()
            .flatness
            .vanishes());
    }

    #[test]
    fn potential_form_residual() {
        let (p, f) = qc_p1(7);
        let cap = f.order();
        let conn = Connection::flat_frame(2, cap);
        let good = MuSeriesVF::constant(&qc_euler(cap), 3);
        assert!(flatness_residual_potential(&f, &p, &conn, &good)
            .unwrap()
            .vanishes());

        // violates the E-equation: refused
        let bad = field(vec![
            &x(2, cap, 0) * &x(2, cap, 0),
            TruncatedSeries::constant(2, cap, q(2, 1)),
        ]);
        let bad = MuSeriesVF::constant(&bad, 3);
        assert!(matches!(
            flatness_residual_potential(&f, &p, &conn, &bad),
            Err(Error::Precondition(_))
        ));

        // Solves it but is neither Euler nor flat-compatible: the mu-linear
        // coefficient is d_a d_b E and the constant one is the weight-1 Euler residual.
        let two_plus =
            &TruncatedSeries::constant(2, cap, q(2, 1)) + &(&x(2, cap, 1) * &x(2, cap, 1));
        let plain = field(vec![x(2, cap, 0), two_plus]);
        let e_field = MuSeriesVF::constant(&plain, 3);
        let r = flatness_residual_potential(&f, &p, &conn, &e_field).unwrap();
        let euler = euler_residual(&f, &plain, &q(1, 1)).unwrap();
        for (idx, entry) in &r.entries {
            let (a, b) = (idx[0], idx[1]);
            for c in 0..2 {
                assert!(entry
                    .coeff(0)
                    .component(c)
                    .agrees_with(euler.get(&[a, b, c])));
                let dd = plain
                    .component(c)
                    .derivative(b)
                    .unwrap()
                    .derivative(a)
                    .unwrap();
                assert!(entry.coeff(1).component(c).agrees_with(&dd));
            }
            assert!(entry.coeff(2).vanishes());
        }
        let expected = field(vec![
            TruncatedSeries::zero(2, cap),
            TruncatedSeries::constant(2, cap, q(2, 1)),
        ]);
        assert!(r.entries[3].1.coeff(1).agrees_with(&expected));
    }

    #[test]
    fn vanishing_helpers() {
        let s = MuSeriesVF::zero(1, 2, 2);
        assert!(mu_vanishes_to(&s, 2));
    }
}
