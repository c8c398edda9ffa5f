use flatcirc_core::correlators::{
    b_from_correlators, b_from_structure, correlators_from_b, master_equation_residual,
    multiplication_at_origin, structure_from_b, BMatrix, CorrelatorFamily,
};
use flatcirc_core::model::{Model, Overrides};
use flatcirc_core::{q, Error, Rational};
use proptest::prelude::*;

fn load(text: &str, order: Option<u32>) -> Model {
    let overrides = Overrides {
        order,
        ..Overrides::default()
    };
    Model::load(text, &overrides).unwrap()
}

fn qc_p1_b(cap: u32) -> BMatrix {
    let model = load(include_str!("../../../models/qc-p1.json"), Some(cap));
    let b = b_from_structure(&model.structure).unwrap();
    BMatrix::new(b.field().truncate(cap)).unwrap()
}

fn int(k: i64) -> Rational {
    Rational::from_integer(k.into())
}

#[test]
fn qc_p1_roundtrip_at_cap_six() {
    let b = qc_p1_b(6);
    assert_eq!(b.valid_to(), 6);
    let residual = master_equation_residual(&b).unwrap();
    assert!(residual.valid_to() >= 5);
    assert!(residual.vanishes());

    let ex = correlators_from_b(&b, false).unwrap();
    assert!(!ex.forced);
    assert_eq!(ex.family.cap(), 6);
    let rebuilt = b_from_correlators(&ex.family).unwrap();
    assert!(rebuilt.agrees_with(&b));
    assert_eq!(
        correlators_from_b(&rebuilt, false).unwrap().family,
        ex.family
    );

    let json = ex.family.to_json();
    assert_eq!(CorrelatorFamily::from_json(&json).unwrap(), ex.family);

    let model = load(include_str!("../../../models/qc-p1.json"), Some(6));
    let f = structure_from_b(&b).unwrap();
    assert!(f
        .structure()
        .tensor()
        .sub(model.structure.structure().tensor())
        .unwrap()
        .vanishes());
    assert!(f.identity().unwrap().agrees_with(&f.basis(0)));
}

#[test]
fn qc_p1_correlators_by_hand() {
    // B = [[x0, exp(x1) - 1], [x1, x0]], so each derivative is read off directly.
    let fam = correlators_from_b(&qc_p1_b(6), false).unwrap().family;
    let (zero, one) = (int(0), int(1));
    assert_eq!(
        fam.get(&[0]).unwrap(),
        &vec![
            vec![one.clone(), zero.clone()],
            vec![zero.clone(), one.clone()]
        ]
    );
    assert_eq!(
        fam.get(&[1]).unwrap(),
        &vec![
            vec![zero.clone(), one.clone()],
            vec![one.clone(), zero.clone()]
        ]
    );
    for k in 2..=6 {
        let key = vec![1; k];
        let expected = vec![
            vec![zero.clone(), one.clone()],
            vec![zero.clone(), zero.clone()],
        ];
        assert_eq!(fam.get(&key).unwrap(), &expected, "k = {k}");
    }
    for (key, m) in fam.entries() {
        if key.len() >= 2 && key.contains(&0) {
            assert!(m.iter().flatten().all(|x| *x == zero), "{key:?}");
        }
    }
    let model = load(include_str!("../../../models/qc-p1.json"), Some(6));
    for a in 0..2 {
        assert_eq!(
            fam.get(&[a]).unwrap(),
            &multiplication_at_origin(&model.structure, a)
        );
    }
}

#[test]
fn non_associative_b_is_refused() {
    let model = load(include_str!("../../../models/broken-assoc.json"), None);
    let b = b_from_structure(&model.structure).unwrap();
    assert!(matches!(
        correlators_from_b(&b, false),
        Err(Error::HypothesisViolation(_))
    ));
    let forced = correlators_from_b(&b, true).unwrap();
    assert!(forced.forced);
    assert!(forced.violation.is_some());
}

#[test]
fn incomplete_family_is_rejected() {
    let mut fam = CorrelatorFamily::new(2, 2);
    fam.insert(
        vec![0],
        vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]],
    )
    .unwrap();
    assert!(matches!(
        b_from_correlators(&fam),
        Err(Error::IncompleteFamily(_))
    ));
}

fn family(dim: usize, cap: u32) -> impl Strategy<Value = CorrelatorFamily> {
    let keys = CorrelatorFamily::keys(dim, cap);
    let count = keys.len() * dim * dim;
    prop::collection::vec(-3i64..=3, count).prop_map(move |xs| {
        let mut fam = CorrelatorFamily::new(dim, cap);
        let mut it = xs.into_iter();
        for key in &keys {
            let m = (0..dim)
                .map(|_| (0..dim).map(|_| int(it.next().unwrap())).collect())
                .collect();
            fam.insert(key.clone(), m).unwrap();
        }
        fam
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_families_roundtrip_through_b(fam in (1usize..=2, 1u32..=3).prop_flat_map(|(d, c)| family(d, c))) {
        let b = b_from_correlators(&fam).unwrap();
        let ex = correlators_from_b(&b, true).unwrap();
        prop_assert_eq!(&ex.family, &fam);
        prop_assert_eq!(ex.forced, ex.violation.is_some());
        prop_assert_eq!(ex.forced, !master_equation_residual(&b).unwrap().vanishes());
    }
}
