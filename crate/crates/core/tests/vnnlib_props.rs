use proptest::prelude::*;
use vnnarena::vnnlib::{
    atom_sexpr, evaluate_assignment, parse_counterexample, parse_script, parse_vnnlib,
    write_counterexample, write_vnnlib, Assignment, Clause, LinearConstraint, Property, Relation,
    VarKind,
};

const NX: usize = 3;
const NY: usize = 2;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 500,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![(-8i32..=8).prop_map(|k| f64::from(k) / 4.0), -10.0f64..10.0]
}

fn atom() -> impl Strategy<Value = LinearConstraint> {
    (
        prop_oneof![Just(VarKind::Input), Just(VarKind::Output)],
        prop::collection::vec((0usize..NX, value()), 1..4),
        prop_oneof![Just(Relation::LessEq), Just(Relation::GreaterEq)],
        value(),
    )
        .prop_filter_map("constant atom", |(kind, mut terms, rel, rhs)| {
            let n = if kind == VarKind::Input { NX } else { NY };
            for t in &mut terms {
                t.0 %= n;
            }
            LinearConstraint::new(kind, terms, rel, rhs).ok()
        })
}

/// Bounds on every input, which each clause needs.
fn input_box() -> impl Strategy<Value = Vec<LinearConstraint>> {
    prop::collection::vec((value(), 0u8..16), NX).prop_map(|b| {
        b.iter()
            .enumerate()
            .flat_map(|(i, &(lo, w))| {
                [
                    LinearConstraint::lower(VarKind::Input, i, lo),
                    LinearConstraint::upper(VarKind::Input, i, lo + f64::from(w) / 4.0),
                ]
            })
            .collect()
    })
}

fn property() -> impl Strategy<Value = Property> {
    prop::collection::vec((input_box(), prop::collection::vec(atom(), 1..5)), 1..5).prop_map(
        |clauses| {
            let clauses = clauses
                .into_iter()
                .map(|(mut b, atoms)| {
                    b.extend(atoms);
                    Clause::from_constraints(b)
                })
                .collect();
            Property::new(NX, NY, clauses).unwrap()
        },
    )
}

/// A formula tree rendered as VNN-LIB.
fn formula() -> impl Strategy<Value = String> {
    atom()
        .prop_map(|a| atom_sexpr(&a))
        .prop_recursive(3, 16, 3, |inner| {
            (prop::bool::ANY, prop::collection::vec(inner, 1..4)).prop_map(|(and, parts)| {
                format!("({} {})", if and { "and" } else { "or" }, parts.join(" "))
            })
        })
}

fn header() -> String {
    let mut s = String::new();
    for i in 0..NX {
        s += &format!("(declare-const X_{i} Real)\n");
    }
    for j in 0..NY {
        s += &format!("(declare-const Y_{j} Real)\n");
    }
    s
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(value(), n)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn written_properties_parse_back(p in property()) {
        let text = write_vnnlib(&p);
        prop_assert_eq!(parse_vnnlib(&text).unwrap(), p);
    }

    #[test]
    fn dnf_agrees_with_formula(
        asserts in prop::collection::vec(formula(), 1..4),
        bounds in input_box(),
        x in point(NX),
        y in point(NY),
        tol in prop_oneof![Just(0.0), 0.0f64..0.5],
    ) {
        let text = header()
            + &bounds.iter().map(|b| format!("(assert {})\n", atom_sexpr(b))).collect::<String>()
            + &asserts.iter().map(|a| format!("(assert {a})\n")).collect::<String>();
        let script = parse_script(&text).unwrap();
        let p = script.expand().unwrap();
        prop_assert_eq!(script.holds(&x, &y, tol), evaluate_assignment(&p, &x, &y, tol).is_some(), "{}", text);
    }

    #[test]
    fn tolerance_is_monotone(p in property(), x in point(NX), y in point(NY), t in 0.0f64..1.0, extra in 0.0f64..1.0) {
        if evaluate_assignment(&p, &x, &y, t).is_some() {
            prop_assert!(evaluate_assignment(&p, &x, &y, t + extra).is_some());
        }
    }

    #[test]
    fn counterexamples_round_trip(x in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), NX),
                                  y in prop::option::of(point(NY))) {
        let a = Assignment::new(x, y);
        let back = parse_counterexample(&write_counterexample(&a), NX, NY).unwrap();
        prop_assert_eq!(back, a);
    }
}
