//! Spec model laws: product traces, serialization round trips, completion.

use anyhow::Result;
use proptest::prelude::*;

use otsynth_core::bundled::{load_completed, load_spec};
use otsynth_core::specfile::{parse_spec_json, serialize_spec_json};
use otsynth_core::{
    parse_spec, serialize_spec, CompletionPolicy, InputVal, OutputVal, SpecAutomaton, Valuation,
};

fn all_traces(a: &SpecAutomaton, len: usize) -> Vec<Vec<Valuation>> {
    let alphabet = a.alphabet();
    let letters: Vec<Valuation> = alphabet
        .all_inputs()
        .flat_map(|i| alphabet.all_outputs().map(move |o| Valuation::new(i, o)))
        .collect();
    let mut traces = vec![Vec::new()];
    for _ in 0..len {
        traces = traces
            .into_iter()
            .flat_map(|t| {
                letters.iter().map(move |&v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    traces
}

/// Projects a product valuation onto a component alphabet by proposition name.
fn project(product: &SpecAutomaton, component: &SpecAutomaton, v: Valuation) -> Valuation {
    let pa = product.alphabet();
    let ca = component.alphabet();
    let mut input = 0;
    for (k, name) in ca.inputs().iter().enumerate() {
        if pa.lookup(v, name) == Some(true) {
            input |= 1 << k;
        }
    }
    let mut output = 0;
    for (k, name) in ca.outputs().iter().enumerate() {
        if pa.lookup(v, name) == Some(true) {
            output |= 1 << k;
        }
    }
    Valuation::new(InputVal(input), OutputVal(output))
}

fn check_trace_law(left: &SpecAutomaton, right: &SpecAutomaton, max_len: usize) -> Result<usize> {
    let product = left.product(right)?.automaton;
    let mut checked = 0;
    for len in 0..=max_len {
        for trace in all_traces(&product, len) {
            let (_, fails) = product.run_trace(&trace)?;
            let l: Vec<Valuation> = trace.iter().map(|&v| project(&product, left, v)).collect();
            let r: Vec<Valuation> = trace.iter().map(|&v| project(&product, right, v)).collect();
            let (_, fl) = left.run_trace(&l)?;
            let (_, fr) = right.run_trace(&r)?;
            assert_eq!(
                fails,
                fl || fr,
                "trace {:?}",
                product.alphabet().format_trace(&trace)
            );
            checked += 1;
        }
    }
    Ok(checked)
}

#[test]
fn product_trace_law_fig1_fig6() -> Result<()> {
    let fig1 = load_completed("fig1", CompletionPolicy::ToError)?.automaton;
    let fig6 = load_completed("fig6", CompletionPolicy::ToError)?.automaton;
    assert!(check_trace_law(&fig1, &fig6, 4)? > 4000);
    Ok(())
}

#[test]
fn product_trace_law_carriage_with_disjoint_requirement() -> Result<()> {
    let carriage = load_completed("carriage", CompletionPolicy::ToError)?.automaton;
    let never_back = parse_spec(
        "inputs: cargo\noutputs: movebwd\nstates:\n  ok in initial\n  bad in error\n  ok_x out\n  bad_x out\n\
         transitions:\n  ok -> ok_x [true]\n  ok_x -> ok [!movebwd]\n  ok_x -> bad [movebwd]\n  bad -> bad_x [true]\n  bad_x -> bad [true]\n",
    )?
    .automaton;
    assert!(check_trace_law(&carriage, &never_back, 2)? > 1000);
    Ok(())
}

#[test]
fn product_with_universal_automaton_preserves_traces() -> Result<()> {
    let fig1 = load_completed("fig1", CompletionPolicy::ToError)?.automaton;
    let universal = parse_spec("inputs: a b\noutputs: one\nstates:\n  u in initial\n  v out\ntransitions:\n  u -> v [true]\n  v -> u [true]\n")?
        .automaton;
    let product = fig1.product(&universal)?;
    for len in 0..=3 {
        for trace in all_traces(&fig1, len) {
            let (end, fails) = fig1.run_trace(&trace)?;
            let (pend, pfails) = product.automaton.run_trace(&trace)?;
            assert_eq!(fails, pfails);
            assert_eq!(product.pairs[pend].0, end);
        }
    }
    Ok(())
}

#[test]
fn product_error_set_is_absorbing() -> Result<()> {
    let fig1 = load_completed("fig1", CompletionPolicy::ToError)?.automaton;
    let carriage = load_completed("carriage", CompletionPolicy::ToError)?.automaton;
    let product = fig1.product(&carriage)?.automaton;
    assert!(product.validate().errors_absorbing);
    Ok(())
}

#[test]
fn bundled_specs_round_trip_through_both_formats() -> Result<()> {
    for name in [
        "fig1",
        "fig5",
        "carriage",
        "i1",
        "fig6",
        "passageway",
        "passageway:4",
    ] {
        let spec = load_spec(name)?;
        let text = serialize_spec(&spec);
        assert_eq!(parse_spec(&text)?, spec, "{name} text");
        let json = serialize_spec_json(&spec);
        assert_eq!(parse_spec_json(&json)?, spec, "{name} json");
    }
    Ok(())
}

#[test]
fn completion_policies() -> Result<()> {
    let raw = load_spec("fig1")?.automaton;
    assert!(!raw.validate().complete);
    for policy in [CompletionPolicy::ToError, CompletionPolicy::SelfLoop] {
        let done = raw.complete(policy)?;
        let report = done.validate();
        assert!(report.ok(), "{policy:?}: {report:?}");
        // Completion only adds behaviour where the raw automaton had none.
        for trace in all_traces(&raw, 2) {
            if let Ok(expected) = raw.run_trace(&trace) {
                assert_eq!(done.run_trace(&trace)?, expected);
            }
        }
    }
    Ok(())
}

fn random_spec(states: usize, picks: &[(u8, u8, bool)]) -> String {
    let lit = |name: &str, v: bool| {
        if v {
            name.to_string()
        } else {
            format!("!{name}")
        }
    };
    let mut text = String::from("inputs: p q\noutputs: r\nstates:\n");
    for s in 0..states {
        let initial = if s == 0 { " initial" } else { "" };
        text += &format!("  s{s} in{initial}\n  s{s}_t out\n  s{s}_f out\n");
    }
    text += "transitions:\n";
    for s in 0..states {
        let (a, b, both) = picks[s % picks.len()];
        let guard = if both {
            "p | q".to_string()
        } else {
            lit("p", a % 2 == 0)
        };
        text += &format!("  s{s} -> s{s}_t [{guard}]\n  s{s} -> s{s}_f [!({guard})]\n");
        text += &format!(
            "  s{s}_t -> s{} [{}]\n",
            a as usize % states,
            lit("r", true)
        );
        text += &format!("  s{s}_t -> s{} [!r]\n", b as usize % states);
        text += &format!(
            "  s{s}_f -> s{} [true]\n",
            (a as usize + b as usize) % states
        );
    }
    text += "objectives:\n  goal = s0\n";
    text
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn serializer_round_trip(states in 1usize..12, picks in prop::collection::vec((any::<u8>(), any::<u8>(), any::<bool>()), 1..12)) {
        let spec = parse_spec(&random_spec(states, &picks)).unwrap();
        prop_assert!(spec.automaton.validate().ok());
        let again = parse_spec(&serialize_spec(&spec)).unwrap();
        prop_assert_eq!(&again, &spec);
        let json = serialize_spec_json(&spec);
        prop_assert_eq!(parse_spec_json(&json).unwrap(), spec);
    }
}
