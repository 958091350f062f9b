mod common;

use jobprov::options::{
    emit_canonical, merge, parse_options, text_to_value, value_to_text, OptionValue, OptionsSet, ParseErrorKind,
    ValueError,
};
use proptest::prelude::*;

use common::{finite_f64, options_set, value};

/// Significant digits in a decimal literal such as `-1.25e-7`.
fn significant_digits(literal: &str) -> usize {
    let mantissa = literal.trim_start_matches('-').split(['e', 'E']).next().unwrap();
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trimmed = digits.trim_start_matches('0').trim_end_matches('0');
    trimmed.len().max(1)
}

/// Fewest significant digits that still round-trip, found by brute force
/// through the standard library's fixed-precision formatter.
fn shortest_round_trip_digits(x: f64) -> usize {
    (0..17).find(|&p| format!("{x:.p$e}").parse::<f64>().unwrap().to_bits() == x.to_bits()).map_or(17, |p| p + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_inverts_emit(set in options_set(50)) {
        let text = emit_canonical(&set);
        prop_assert_eq!(parse_options(&text).unwrap(), set);
    }

    #[test]
    fn emit_is_a_fixed_point(set in options_set(50)) {
        let once = emit_canonical(&set);
        let twice = emit_canonical(&parse_options(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn value_codec_round_trips(v in value()) {
        let text = value_to_text(&v).unwrap();
        prop_assert_eq!(text_to_value(&text).unwrap(), v);
    }

    #[test]
    fn float_text_is_shortest(x in finite_f64()) {
        let text = value_to_text(&OptionValue::Float(x)).unwrap();
        let back = text_to_value(&text).unwrap();
        prop_assert_eq!(back.as_float().unwrap().to_bits(), x.to_bits());
        prop_assert_eq!(significant_digits(&text), shortest_round_trip_digits(x), "{}", text);
        prop_assert!(text.contains(['.', 'e']), "float text must not read as an integer: {}", text);
    }

    #[test]
    fn merge_is_associative_on_disjoint_keys(a in options_set(12), b in options_set(12), c in options_set(12)) {
        let disjoint = |x: &OptionsSet, y: &OptionsSet| x.keys().all(|k| !y.contains_key(k.as_str()));
        prop_assume!(disjoint(&a, &b) && disjoint(&b, &c) && disjoint(&a, &c));
        prop_assert_eq!(merge(&merge(&a, &b), &c), merge(&a, &merge(&b, &c)));
    }

    #[test]
    fn merge_prefers_overlay(a in options_set(12), b in options_set(12)) {
        let m = merge(&a, &b);
        for (k, v) in &b {
            prop_assert_eq!(m.get(k.as_str()), Some(v));
        }
        for (k, v) in &a {
            if !b.contains_key(k.as_str()) {
                prop_assert_eq!(m.get(k.as_str()), Some(v));
            }
        }
        prop_assert_eq!(m.len(), a.len() + b.keys().filter(|k| !a.contains_key(k.as_str())).count());
    }

    #[test]
    fn equality_ignores_insertion_order(set in options_set(20)) {
        let mut reversed = OptionsSet::new();
        for (k, v) in set.iter().rev() {
            reversed.insert(k.clone(), v.clone()).unwrap();
        }
        prop_assert_eq!(&reversed, &set);
        prop_assert_eq!(emit_canonical(&reversed), emit_canonical(&set));
    }
}

#[test]
fn thousand_doubles_round_trip_bit_exactly() {
    let failures: Vec<f64> = common::sample(finite_f64(), 1000)
        .into_iter()
        .filter(|&x| {
            let text = value_to_text(&OptionValue::Float(x)).unwrap();
            text_to_value(&text).unwrap().as_float().map(f64::to_bits) != Some(x.to_bits())
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn documented_examples() {
    let set = parse_options("ApplicationMgr.OutputLevel = 3\n").unwrap();
    assert_eq!(set.get("ApplicationMgr.OutputLevel"), Some(&OptionValue::Integer(3)));

    let set = parse_options("A.X = 1\nA.X = 2").unwrap();
    assert_eq!(set.get("A.X"), Some(&OptionValue::Integer(2)));

    let set = parse_options("Filter.Thresholds = [0.5, 1.5]\n").unwrap();
    assert_eq!(set.get("Filter.Thresholds"), Some(&OptionValue::List(vec![0.5.into(), 1.5.into()])));

    let mut s = OptionsSet::new();
    s.set("B.Y", true).set("A.X", 1);
    assert_eq!(emit_canonical(&s), "A.X = 1\nB.Y = true\n");
    assert_eq!(emit_canonical(&OptionsSet::new()), "");
    let mut f = OptionsSet::new();
    f.set("A.F", 0.5);
    assert_eq!(emit_canonical(&f), "A.F = 0.5\n");

    assert_eq!(value_to_text(&OptionValue::Boolean(false)).unwrap(), "false");
    assert_eq!(value_to_text(&OptionValue::text(r#"he said "hi""#)).unwrap(), r#""he said \"hi\"""#);

    let mut base = OptionsSet::new();
    base.set("A.X", 1);
    let mut overlay = OptionsSet::new();
    overlay.set("A.X", 2).set("B.Y", true);
    let merged = merge(&base, &overlay);
    assert_eq!(merged, overlay);
    assert_eq!(merge(&OptionsSet::new(), &base), base);
    assert_eq!(merge(&base, &OptionsSet::new()), base);
}

#[test]
fn grammar_errors_carry_positions() {
    let err = parse_options("A.X = 1\nA.Y = [1, 2.0]\n").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(matches!(err.kind, ParseErrorKind::Value(ValueError::HeterogeneousList { .. })));

    let err = parse_options("A.X = 1\n\n  Bad = 3\n").unwrap_err();
    assert_eq!(err.line, 3);
    assert!(matches!(err.kind, ParseErrorKind::MalformedKey(_)));

    for text in ["A.X = nan", "A.X = inf", "A.X = 1e999", "A.X = [[1]]", "A.X = 01", "A.X = 1,", "A.X ="] {
        assert!(parse_options(text).is_err(), "{text} should be rejected");
    }
    assert!(value_to_text(&OptionValue::Float(f64::NAN)).is_err());
}
