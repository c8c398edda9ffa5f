use flatcirc_core::fmanifold::VectorPotential;
use flatcirc_core::geometry::{Connection, VectorField};
use flatcirc_core::model::{Model, Overrides};
use flatcirc_core::series::{monomials_of_degree, ExponentVector};
use flatcirc_core::{q, TruncatedSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: u32 = 6;

fn random_poly(
    rng: &mut ChaCha8Rng,
    n: usize,
    axes: &[usize],
    lo: u32,
    hi: u32,
) -> TruncatedSeries {
    let mut terms = Vec::new();
    for d in lo..=hi {
        for e in monomials_of_degree(n, d) {
            let outside = (0..n).any(|i| e.get(i) > 0 && !axes.contains(&i));
            if outside || rng.gen_bool(0.5) {
                continue;
            }
            terms.push((e, q(rng.gen_range(-3..=3), rng.gen_range(1..=2))));
        }
    }
    TruncatedSeries::from_terms(n, CAP, terms)
}

fn var(n: usize, i: usize) -> TruncatedSeries {
    TruncatedSeries::var(n, CAP, i).unwrap()
}

fn half_square(n: usize) -> TruncatedSeries {
    (&var(n, 0) * &var(n, 0)).scale(&q(1, 2))
}

/// Potentials whose product is associative by construction: `d0` is the
/// identity and the remaining frame fields multiply diagonally.
fn associative_potential(rng: &mut ChaCha8Rng, n: usize) -> Vec<TruncatedSeries> {
    let mut comps = vec![half_square(n)];
    for i in 1..n {
        let own = random_poly(rng, n, &[i], 3, 4);
        comps.push(&(&var(n, 0) * &var(n, i)) + &own);
    }
    if n == 2 {
        comps[0] = &comps[0] + &random_poly(rng, n, &[1], 2, 4);
        comps[1] = &var(n, 0) * &var(n, 1);
    }
    comps
}

fn generic_potential(rng: &mut ChaCha8Rng, n: usize) -> Vec<TruncatedSeries> {
    let all: Vec<usize> = (0..n).collect();
    (0..n).map(|_| random_poly(rng, n, &all, 2, 4)).collect()
}

#[test]
fn pencil_flatness_matches_f_identity_on_random_potentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut flat, mut curved) = (0, 0);
    for k in 0..20 {
        let n = 2 + k % 2;
        let comps = if k % 4 < 2 {
            associative_potential(&mut rng, n)
        } else {
            generic_potential(&mut rng, n)
        };
        let f = VectorPotential::new(VectorField::new(comps).unwrap())
            .to_structure()
            .unwrap();
        let base = Connection::flat_frame(n, f.order());
        let (r1, r2) = f.pencil_split(&base).unwrap();
        let hm = f.hm_identity_residual().unwrap();
        let pencil_flat = r1.vanishes() && r2.vanishes();
        assert_eq!(
            hm.vanishes(),
            pencil_flat,
            "instance {k}: hm {:?}, r1 {:?}, r2 {:?}",
            hm.first_offense(),
            r1.first_offense(),
            r2.first_offense()
        );
        if pencil_flat {
            flat += 1;
        } else {
            curved += 1;
        }
    }
    assert!(flat >= 5 && curved >= 5, "flat {flat}, curved {curved}");
}

fn qc_p1() -> Model {
    Model::load(
        include_str!("../../../models/qc-p1.json"),
        &Overrides::default(),
    )
    .unwrap()
}

#[test]
fn d_tensor_is_totally_symmetric_on_random_fields() {
    let model = qc_p1();
    let f = &model.structure;
    let n = f.dim();
    let cap = f.order();
    let conn = Connection::flat_frame(n, cap);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut field = || {
        let comps = (0..n)
            .map(|_| {
                let p = random_poly(&mut rng, n, &[0, 1], 0, 2);
                p.with_cap(cap)
            })
            .collect();
        VectorField::new(comps).unwrap()
    };
    for _ in 0..10 {
        let (x, y, z) = (field(), field(), field());
        let d = f.d_tensor(&conn, &x, &y, &z).unwrap();
        for other in [
            f.d_tensor(&conn, &y, &x, &z).unwrap(),
            f.d_tensor(&conn, &x, &z, &y).unwrap(),
            f.d_tensor(&conn, &z, &y, &x).unwrap(),
        ] {
            let diff = d.sub(&other).unwrap();
            assert!(
                diff.vanishes(),
                "{}",
                diff.to_tensor().first_offense().unwrap()
            );
        }
    }
}

#[test]
fn qc_p1_residuals_vanish_to_the_proven_degree() {
    let model = qc_p1();
    let f = &model.structure;
    let base = Connection::flat_frame(2, f.order());
    assert!(base.torsion().vanishes_to(6));
    let (r1, r2) = f.pencil_split(&base).unwrap();
    assert!(r1.valid_to() >= 6 && r1.vanishes());
    assert!(r2.valid_to() >= 6 && r2.vanishes());
    let hm = f.hm_identity_residual().unwrap();
    assert!(hm.valid_to() >= 5 && hm.vanishes());
    // Degree bookkeeping: the structure is exact to the model order.
    assert_eq!(f.order(), 8);
    let c110 = f.structure().get(1, 1, 0);
    assert_eq!(c110.coeff(&ExponentVector::new(vec![0, 3])), q(1, 6));
}
