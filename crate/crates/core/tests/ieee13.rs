//! Compares certificate coefficients of an externally converted IEEE-13 feeder
//! (with `Λ = diag(w)`) to published values. Skipped unless `ZBUSCERT_IEEE13`
//! points at a feeder file, since the feeder data is not redistributed here.

use std::path::PathBuf;

use zbuscert::certificate::certify;
use zbuscert::feeder::parse_feeder;
use zbuscert::solver::LambdaChoice;

#[test]
fn ieee13_coefficients_when_available() {
    let Some(path) = std::env::var_os("ZBUSCERT_IEEE13").map(PathBuf::from) else {
        eprintln!("ZBUSCERT_IEEE13 not set; skipping");
        return;
    };
    let (net, loads) = parse_feeder(&path).unwrap();
    let k = certify(&net, &loads, &LambdaChoice::DiagW, 10)
        .unwrap()
        .coefficients;
    let expected = [
        ("a1", k.a1, 1.043),
        ("a2", k.a2, 1.203),
        ("A_Y", k.a_y, 0.127),
        ("A_D", k.a_d, 0.041),
        ("B_Y", k.b_y, 0.032),
        ("B_D", k.b_d, 0.01),
        ("C_Y", k.c_y, 0.127),
        ("C_D", k.c_d, 0.024),
        ("D_Y", k.d_y, 0.032),
        ("D_D", k.d_d, 0.006),
    ];
    for (name, got, want) in expected {
        assert!((got - want).abs() <= 0.005, "{name}: {got} vs {want}");
    }
}
