//! Search-tree bookkeeping and run verdicts against replayed traces.

use std::collections::BTreeMap;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use otsynth_core::bundled::load_completed;
use otsynth_core::sut::{Sut, SutSource};
use otsynth_core::testers::{
    run_attempt, run_once, Algorithm, Mcts, Policy, TestContext, TesterConfig, Verdict,
};
use otsynth_core::{CompletionPolicy, InputVal, Valuation};

fn context(spec: &str, objective: &str) -> Result<TestContext> {
    let spec = load_completed(spec, CompletionPolicy::ToError)?;
    Ok(TestContext::new(
        &spec.automaton,
        spec.objective(objective)?,
    )?)
}

fn sut(uri: &str) -> Result<Box<dyn Sut>> {
    Ok(SutSource::parse(uri)?.open_builtin()?)
}

fn mcts_config(algorithm: Algorithm, k: usize, c: f64, m: u64) -> TesterConfig {
    TesterConfig {
        algorithm,
        k,
        c,
        m,
        ..TesterConfig::default()
    }
}

/// Number of tree nodes once every allowed input sequence of length at most
/// `k` has been expanded, found by replaying each sequence on a fresh run.
fn saturated_size(ctx: &TestContext, sut: &mut dyn Sut, k: usize) -> Result<usize> {
    fn walk(
        ctx: &TestContext,
        sut: &mut dyn Sut,
        prefix: &mut Vec<InputVal>,
        k: usize,
    ) -> Result<usize> {
        sut.reset()?;
        let mut s = ctx.machine.initial();
        for &i in prefix.iter() {
            s = ctx.advance(s, Valuation::new(i, sut.step(i)?));
        }
        if ctx.classify(s) != Verdict::Active || prefix.len() == k {
            return Ok(1);
        }
        let mut total = 1;
        for &i in ctx.coreach.allowed(s) {
            prefix.push(i);
            total += walk(ctx, sut, prefix, k)?;
            prefix.pop();
        }
        Ok(total)
    }
    walk(ctx, sut, &mut Vec::new(), k)
}

#[test]
fn edge_means_are_running_averages_of_propagated_rewards() -> Result<()> {
    let ctx = context("fig1", "o")?;
    let mut s = sut("builtin:i1")?;
    let cfg = mcts_config(Algorithm::Mcts, 6, -1.0, 0);
    let mut mcts = Mcts::new(&ctx, &cfg, false);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen: BTreeMap<(usize, InputVal), Vec<f64>> = BTreeMap::new();
    for _ in 0..500 {
        let out = mcts.iterate(&mut s, &mut rng)?;
        assert!((0.0..=1.0).contains(&out.reward), "reward {}", out.reward);
        for &edge in &out.path {
            seen.entry(edge).or_default().push(out.reward);
        }
    }
    for (node, n) in mcts.tree.nodes.iter().enumerate() {
        for e in &n.edges {
            let rewards = seen
                .get(&(node, e.input))
                .map(Vec::as_slice)
                .unwrap_or_default();
            assert_eq!(e.visits as usize, rewards.len());
            let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
            assert!(
                (e.mean - mean).abs() < 1e-12,
                "node {node}: {} vs {mean}",
                e.mean
            );
        }
    }
    Ok(())
}

#[test]
fn tree_saturates_to_every_allowed_sequence() -> Result<()> {
    const K: usize = 2;
    let ctx = context("fig1", "o")?;
    let mut s = sut("builtin:i1")?;
    let expected = saturated_size(&ctx, s.as_mut(), K)?;
    assert_eq!(expected, 21);
    let cfg = mcts_config(Algorithm::Mcts, K, -1.0, 0);
    let mut mcts = Mcts::new(&ctx, &cfg, false);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        mcts.iterate(&mut s, &mut rng)?;
    }
    assert_eq!(mcts.tree.nodes.len(), expected);
    assert_eq!(mcts.tree.max_depth(), K);
    for n in &mcts.tree.nodes {
        if !n.is_terminal() && n.depth < K {
            let inputs: Vec<InputVal> = n.edges.iter().map(|e| e.input).collect();
            assert_eq!(inputs, ctx.coreach.allowed(n.state));
        }
    }
    Ok(())
}

#[test]
fn greedy_restriction_lifts_after_m_visits() -> Result<()> {
    const M: u64 = 7;
    let ctx = context("passageway:3", "room3")?;
    let mut s = sut("builtin:passageway:3")?;
    let cfg = mcts_config(Algorithm::GreedyMcts, 30, -1.0, M);
    let mut mcts = Mcts::new(&ctx, &cfg, true);
    let root = ctx.machine.initial();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert_ne!(ctx.greedy.pool(root), ctx.coreach.allowed(root));
    for _ in 0..M {
        assert_eq!(mcts.candidates(0), ctx.greedy.pool(root));
        mcts.iterate(&mut s, &mut rng)?;
    }
    assert!(mcts.tree.nodes[0]
        .edges
        .iter()
        .all(|e| ctx.greedy.pool(root).contains(&e.input)));
    assert_eq!(mcts.candidates(0), ctx.coreach.allowed(root));

    let plain = Mcts::new(&ctx, &mcts_config(Algorithm::GreedyMcts, 30, -1.0, 0), true);
    assert_eq!(plain.candidates(0), ctx.coreach.allowed(root));
    Ok(())
}

#[test]
fn run_verdict_matches_replayed_trace() -> Result<()> {
    const K: usize = 40;
    let ctx = context("carriage", "s2")?;
    let mut s = sut("builtin:carriage-bug")?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut verdicts = std::collections::HashMap::new();
    for policy in [Policy::Uniform, Policy::Greedy, Policy::EpsGreedy(0.25)] {
        for _ in 0..500 {
            let out = run_once(&ctx, &mut s, policy, K, &mut rng)?;
            assert!(out.trace.len() <= K);
            let end = out
                .trace
                .iter()
                .fold(ctx.machine.initial(), |st, &v| ctx.advance(st, v));
            assert_eq!(end, out.end);
            assert_eq!(ctx.classify(end), out.verdict);
            if out.trace.len() < K {
                assert_ne!(out.verdict, Verdict::Active);
            }
            *verdicts.entry(out.verdict).or_insert(0) += 1;
        }
    }
    assert!(verdicts.contains_key(&Verdict::Error), "{verdicts:?}");
    Ok(())
}

#[test]
fn conforming_carriage_never_fails() -> Result<()> {
    let ctx = context("carriage", "s2")?;
    let mut s = sut("builtin:carriage")?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..2000 {
        let out = run_once(&ctx, &mut s, Policy::Uniform, 50, &mut rng)?;
        assert!(
            !out.verdict.fails(),
            "{:?}",
            ctx.automaton.alphabet().format_trace(&out.trace)
        );
    }
    Ok(())
}

/// Leaving the backward limit at `s0` violates the requirement whatever the
/// output, so the game counts those inputs as forcing `err` and the greedy
/// pool offers them while uniform testing does not.
#[test]
fn greedy_pool_includes_inputs_forcing_err() -> Result<()> {
    let ctx = context("carriage", "s2")?;
    let alphabet = ctx.automaton.alphabet();
    let s0 = ctx.machine.initial();
    let no_bwd: Vec<InputVal> = alphabet
        .all_inputs()
        .filter(|&i| {
            alphabet.lookup(Valuation::new(i, otsynth_core::OutputVal(0)), "bwdlimit")
                == Some(false)
        })
        .collect();
    assert_eq!(no_bwd.len(), 4);
    for i in &no_bwd {
        assert!(!ctx.coreach.is_allowed(s0, *i));
        assert!(ctx.greedy.pool(s0).contains(i));
    }
    Ok(())
}

#[test]
fn buggy_carriage_attempt_reports_error_traces() -> Result<()> {
    let ctx = context("carriage", "s2")?;
    let source = SutSource::parse("builtin:carriage-bug")?;
    let cfg = TesterConfig {
        algorithm: Algorithm::GreedyMcts,
        k: 40,
        runs: 500,
        continue_after_error: true,
        ..TesterConfig::default()
    };
    let report = run_attempt(&ctx, &source, &cfg, 0, false);
    assert!(report.transport_error.is_none());
    assert!(!report.error_traces.is_empty());
    assert!(report
        .error_traces
        .iter()
        .all(|t| !t.is_empty() && t.len() <= cfg.k));
    Ok(())
}
