use windcheck_core::gcl::{compose_and_build, parse_model, BuildError, BuildOptions, GclError};
use windcheck_core::{check, parse_formula};

fn build(src: &str) -> Result<windcheck_core::Dtmc, BuildError> {
    compose_and_build(&parse_model(src).unwrap(), &BuildOptions::default())
}

#[test]
fn minimal_model() {
    let m =
        parse_model("dtmc module m s : [0..1] init 0; [] s=0 -> 1.0:(s'=1); endmodule").unwrap();
    assert_eq!(m.module_names().collect::<Vec<_>>(), vec!["m"]);
    assert_eq!(m.n_commands(), 1);
}

#[test]
fn short_distribution_is_rejected() {
    let src = "module m s : [0..2]; [] s=0 -> 0.3:(s'=1) + 0.6:(s'=2); endmodule";
    let err = match parse_model(src) {
        Err(e) => e.to_string(),
        Ok(m) => compose_and_build(&m, &BuildOptions::default())
            .unwrap_err()
            .to_string(),
    };
    assert!(err.contains("probabilities sum to 0.9"), "{err}");
    let ok = "module m s : [0..2]; [] s=0 -> 0.3:(s'=1) + 0.7:(s'=2); [] s>0 -> true; endmodule";
    assert!(build(ok).is_ok());
}

#[test]
fn undeclared_variable_is_rejected() {
    let err = parse_model("module m s : [0..1]; [] t=0 -> (s'=1); endmodule").unwrap_err();
    assert!(matches!(err, GclError::Undeclared { .. }), "{err}");
}

#[test]
fn three_module_sync_and_interleaving() {
    let src = "module a x : [0..1]; [go] x=0 -> 0.5:(x'=1) + 0.5:(x'=0); [] x=1 -> true; endmodule
               module b y : [0..1]; [go] y=0 -> 0.2:(y'=1) + 0.8:(y'=0); [] y=1 -> true; endmodule
               label \"both\" = x=1 & y=1;";
    let d = build(src).unwrap();
    let p = check(&d, &parse_formula("P=? [ X \"both\" ]").unwrap()).unwrap();
    assert!((p.value - 0.1).abs() < 1e-15);
}

#[test]
fn rebuilds_are_identical() {
    let src = "const double p = 0.3;
               module m s : [0..4] init 0; [a] s<4 -> p:(s'=s+1) + (1-p):(s'=0); [] s=4 -> true; endmodule
               rewards \"steps\" [a] true : 1; endrewards";
    let a = build(src).unwrap();
    let b = build(src).unwrap();
    assert_eq!(a, b);
}
