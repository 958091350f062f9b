#![allow(dead_code)]

use std::path::Path;

use jobprov::options::{OptionKey, OptionValue, OptionsSet};
use jobprov::services::LogSink;
use jobprov::JobEnvironment;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

pub fn quiet_env(dir: &Path) -> JobEnvironment {
    JobEnvironment::in_dir(dir).with_log(LogSink::Discard)
}

/// Draws `n` values from a strategy with a fixed-seed runner.
pub fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| strategy.new_tree(&mut runner).expect("strategy").current()).collect()
}

pub fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,7}"
}

pub fn key() -> impl Strategy<Value = OptionKey> {
    let segment = prop_oneof![3 => ident(), 1 => "[0-9]{1,3}"];
    (ident(), prop::collection::vec(segment, 1..=3))
        .prop_map(|(first, rest)| OptionKey::parse(&format!("{first}.{}", rest.join("."))).expect("generated key"))
}

/// Finite doubles across the whole bit space plus awkward fixed points.
pub fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |f| f.is_finite()),
        2 => (-4000i32..4000).prop_map(|i| f64::from(i) / 16.0),
        1 => prop::sample::select(vec![
            0.0,
            -0.0,
            1.0,
            0.1,
            0.5,
            1e300,
            -1e-300,
            f64::MAX,
            f64::MIN,
            f64::MIN_POSITIVE,
            f64::EPSILON,
            5e-324,
            9007199254740993.0,
            123456789012345680.0,
        ]),
    ]
}

pub fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::collection::vec(any::<char>(), 0..12).prop_map(String::from_iter),
        "[ -~]{0,12}",
        prop::sample::select(vec!["", "\"", "\\", "\\u0041", "#", "a = b", "[1, 2]"]).prop_map(str::to_owned),
    ]
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Integer,
    Float,
    Boolean,
    Text,
}

fn scalar(kind: Kind) -> BoxedStrategy<OptionValue> {
    match kind {
        Kind::Integer => any::<i64>().prop_map(OptionValue::Integer).boxed(),
        Kind::Float => finite_f64().prop_map(OptionValue::Float).boxed(),
        Kind::Boolean => any::<bool>().prop_map(OptionValue::Boolean).boxed(),
        Kind::Text => text().prop_map(OptionValue::Text).boxed(),
    }
}

pub fn value() -> impl Strategy<Value = OptionValue> {
    let kind = prop::sample::select(vec![Kind::Integer, Kind::Float, Kind::Boolean, Kind::Text]);
    (kind, any::<bool>()).prop_flat_map(|(kind, is_list)| {
        if is_list {
            prop::collection::vec(scalar(kind), 0..6).prop_map(OptionValue::List).boxed()
        } else {
            scalar(kind)
        }
    })
}

/// Random option sets of up to `max_keys` assignments.
pub fn options_set(max_keys: usize) -> impl Strategy<Value = OptionsSet> {
    prop::collection::vec((key(), value()), 0..=max_keys).prop_map(|pairs| {
        let mut set = OptionsSet::new();
        for (k, v) in pairs {
            set.insert(k, v).expect("generated value is valid");
        }
        set
    })
}

/// Input container name used by generated `FileEventSource` configs. It
/// must hold two fields, `f0` and `f1`.
pub const DEMO_INPUT: &str = "input.pdc";

/// Writes [`DEMO_INPUT`] into `dir`.
pub fn write_demo_input(dir: &Path) {
    let mut c = OptionsSet::new();
    c.set("ApplicationMgr.TopAlg", OptionValue::text_list(["RandomEventSource"]))
        .set("ApplicationMgr.OutputFile", DEMO_INPUT)
        .set("RandomEventSource.FieldCount", 2)
        .set("RandomEventSource.NumEvents", 40)
        .set("RandomEventSource.Seed", 99);
    jobprov::run_job(&c, &jobprov::Catalogue::demo(), quiet_env(dir)).expect("demo input job");
}

/// Valid configurations over the demo catalogue with MetaDataSvc enabled.
/// `OutputFile` is left for the caller.
pub fn demo_config() -> impl Strategy<Value = OptionsSet> {
    let source = prop::sample::select(vec![None, Some("RandomEventSource"), Some("FileEventSource")]);
    let downstream = prop::sample::subsequence(vec!["ThresholdFilter", "Accumulator"], 0..=2).prop_shuffle();
    let services = prop::sample::subsequence(
        vec!["MessageSvc", "JobOptionsSvc", "ToolSvc", "EventDataSvc", "ContainerWriterSvc"],
        0..=5,
    );
    let props = (
        prop::option::of(any::<i64>()),
        prop::option::of(0i64..60),
        prop::option::of(1i64..=4),
        prop::option::of(0usize..8),
        prop::option::of(0usize..8),
        prop::option::of(-0.5f64..1.5),
        prop::option::of(0i64..=4),
        prop::option::of(finite_f64()),
        prop::option::of("[A-Za-z0-9 ._-]{0,10}"),
        prop::option::of("v[0-9]{1,2}r[0-9]"),
    );
    (source, downstream, services, any::<usize>(), props).prop_map(|(source, downstream, services, pos, props)| {
        let (seed, num, fields, filter_field, acc_field, min, level, gain, app, version) = props;
        let mut top: Vec<&str> = source.into_iter().collect();
        top.extend(downstream.iter().copied());
        let mut svc = services.clone();
        svc.insert(pos % (svc.len() + 1), "MetaDataSvc");

        let field_count = match source {
            Some("RandomEventSource") => fields.unwrap_or(1),
            Some(_) => 2,
            None => 1,
        };
        let pick = |i: usize| format!("f{}", i as i64 % field_count);

        let mut c = OptionsSet::new();
        c.set("ApplicationMgr.TopAlg", OptionValue::text_list(top.iter().copied()));
        c.set("ApplicationMgr.Services", OptionValue::text_list(svc.iter().copied()));
        if let Some(a) = app {
            c.set("ApplicationMgr.AppName", a);
        }
        if let Some(v) = version {
            c.set("ApplicationMgr.AppVersion", v);
        }
        match source {
            Some("RandomEventSource") => {
                if let Some(s) = seed {
                    c.set("RandomEventSource.Seed", s);
                }
                if let Some(n) = num {
                    c.set("RandomEventSource.NumEvents", n);
                }
                if let Some(f) = fields {
                    c.set("RandomEventSource.FieldCount", f);
                }
            }
            Some(_) => {
                c.set("FileEventSource.Input", DEMO_INPUT);
            }
            None => {}
        }
        if top.contains(&"ThresholdFilter") {
            if let Some(i) = filter_field {
                c.set("ThresholdFilter.Field", pick(i));
            }
            if let Some(m) = min {
                c.set("ThresholdFilter.Min", m);
            }
        }
        if top.contains(&"Accumulator") {
            if let Some(i) = acc_field {
                c.set("Accumulator.Field", pick(i));
            }
        }
        if let Some(l) = level {
            c.set("MessageSvc.OutputLevel", l);
        }
        if let Some(g) = gain {
            c.set("DemoTool.Gain", g);
        }
        c.set("MetaDataSvc.Enabled", true);
        c
    })
}

/// SplitMix64 + threshold written out longhand, sharing no code with the
/// framework: counts uniform draws `>= min`.
pub fn straight_line_pass_count(seed: u64, n: usize, min: f64) -> u64 {
    let mut state = seed;
    let mut passed = 0;
    for _ in 0..n {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        let u = (z >> 11) as f64 / 9_007_199_254_740_992.0;
        if u >= min {
            passed += 1;
        }
    }
    passed
}
