mod common;

use std::collections::BTreeSet;

use common::models;

#[test]
fn random_models_match_brute_force() {
    let mut rng = models::seeded(2024);
    for i in 0..500 {
        let m = models::random(&mut rng);
        let mut s = common::session();
        let got: BTreeSet<String> = common::all_solutions(&mut s, &models::script(&m)).into_iter().collect();
        assert_eq!(got, models::brute_force(&m), "model {i}: {m:?}");
    }
}

#[test]
fn solutions_come_out_once() {
    let mut rng = models::seeded(7);
    for _ in 0..100 {
        let m = models::random(&mut rng);
        let mut s = common::session();
        let got = common::all_solutions(&mut s, &models::script(&m));
        let set: BTreeSet<&String> = got.iter().collect();
        assert_eq!(set.len(), got.len(), "{m:?}");
    }
}

#[test]
fn fractions_solutions_are_exactly_the_brute_force_set() {
    let mut s = common::session();
    let e = common::entry("constraints/fractions");
    let body = e.source.split("{Browse").next().unwrap();
    s.eval(body).unwrap();
    let sols = common::all_solutions(&mut s, "Fractions");
    let got: BTreeSet<[i64; 9]> = sols.iter().map(|x| common::fraction_digits(x)).collect();
    assert_eq!(got, common::fractions_oracle());
}
