//! Property tests for invariants that cut across modules. Solver-backed
//! properties run fewer cases.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use adcl_core::accel::{accelerate, AccelFailure};
use adcl_core::engine::{run, EngineConfig, Verdict};
use adcl_core::formula::{CmpOp, Subst};
use adcl_core::implicants::ActiveStream;
use adcl_core::nonterm::{find_certificate, refine, verify_certificate, DEFAULT_MAX_ITERS};
use adcl_core::parser::{parse, parse_formula, print};
use adcl_core::proof::ProofDocument;
use adcl_core::smt::SmtResult;
use adcl_core::ts::{chain, chain_seq, for_each_model_in_box, Provenance};
use adcl_core::{Formula, Location, Model, Solver, SolverConfig, Term, Transition, VarId};
use num_bigint::BigInt;
use proptest::prelude::*;

fn solver() -> Solver {
    Solver::new(SolverConfig::default()).unwrap()
}

fn names(d: usize) -> Vec<String> {
    ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect()
}

fn op(i: usize) -> CmpOp {
    [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge][i]
}

fn linear(coeffs: &[i64], c: i64, var: fn(usize) -> Term) -> Term {
    coeffs
        .iter()
        .enumerate()
        .fold(Term::constant(c), |acc, (i, a)| &acc + &var(i).scale(&BigInt::from(*a)))
}

/// Literal over pre-state variables `0..d`.
fn arb_guard(d: usize) -> impl Strategy<Value = Formula> {
    (proptest::collection::vec(-2i64..=2, d), -3i64..=3, 0usize..6)
        .prop_map(|(cs, c, o)| Formula::cmp(linear(&cs, c, Term::pre), op(o), Term::zero()))
}

/// Arbitrary NNF formula over pre-state variables `0..3`.
fn arb_formula() -> impl Strategy<Value = Formula> {
    arb_guard(3).prop_recursive(3, 8, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..4).prop_map(Formula::and),
            proptest::collection::vec(inner, 1..4).prop_map(Formula::or),
        ]
    })
}

/// Per variable `x_i' = x_j + c`, optionally widened to `[.., .. + 1]`.
fn arb_step(d: usize) -> impl Strategy<Value = Formula> {
    proptest::collection::vec((0..d, -1i64..=1, any::<bool>()), d).prop_map(move |us| {
        Formula::and(us.into_iter().enumerate().map(|(i, (j, c, wide))| {
            let lo = &Term::pre(j) + &Term::constant(c);
            if wide {
                let hi = &lo + &Term::constant(1);
                Formula::and([Formula::le(lo, Term::post(i)), Formula::le(Term::post(i), hi)])
            } else {
                Formula::eq(Term::post(i), lo)
            }
        }))
    })
}

fn arb_transition(d: usize) -> impl Strategy<Value = Formula> {
    (proptest::option::of(arb_guard(d)), arb_step(d), proptest::option::of(arb_step(d))).prop_map(|(g, a, b)| {
        let step = match b {
            Some(b) => Formula::or([a, b]),
            None => a,
        };
        Formula::and(g.into_iter().chain([step]))
    })
}

fn trans(src: &str, dst: &str, cond: Formula) -> Transition {
    Transition::new(Location::new(src), Location::new(dst), cond, Provenance::Chained).unwrap()
}

/// `{(s, t)}` in `[-2, 2]^d` related by `f`, with parameters in `[-8, 8]`.
fn relation(f: &Formula, d: usize) -> BTreeSet<(Vec<i64>, Vec<i64>)> {
    let mut out = BTreeSet::new();
    let mut free: Vec<VarId> = (0..d).map(VarId::Post).collect();
    free.extend(f.params());
    let mut starts = vec![vec![]];
    for _ in 0..d {
        starts = starts
            .into_iter()
            .flat_map(|p: Vec<i64>| (-2..=2).map(move |v| [p.clone(), vec![v]].concat()))
            .collect();
    }
    for s in starts {
        let fixed: Model = s.iter().enumerate().map(|(i, v)| (VarId::Pre(i), BigInt::from(*v))).collect();
        for_each_model_in_box(f, &fixed, &free, -8, 8, &mut |m| {
            let t: Vec<i64> = (0..d).map(|i| i64::try_from(&m[&VarId::Post(i)]).unwrap()).collect();
            if t.iter().all(|v| (-2..=2).contains(v)) {
                out.insert((s.clone(), t));
            }
        });
    }
    out
}

fn equivalent(s: &mut Solver, a: &Formula, b: &Formula) -> bool {
    s.entails(a, b).unwrap().is_yes() && s.entails(b, a).unwrap().is_yes()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Each step moves a value by at most 2, so from [-2, 2] every
    // intermediate stays within the [-8, 8] parameter box.
    #[test]
    fn chaining_is_associative(
        (d, a, b, c) in (1usize..=2).prop_flat_map(|d| (Just(d), arb_transition(d), arb_transition(d), arb_transition(d))),
    ) {
        let (a, b, c) = (Arc::new(trans("p", "q", a)), Arc::new(trans("q", "r", b)), Arc::new(trans("r", "s", c)));
        let left = chain_seq(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let right = chain(&a, &chain(&b, &c));
        prop_assert_eq!(relation(&left.cond, d), relation(&right.cond, d));
    }

    #[test]
    fn printed_formulas_parse_back(f in arb_formula()) {
        let text = f.display(&names(3)).to_string();
        let back = parse_formula(&text, &names(3), false).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_answers_agree_with_a_grid(f in arb_formula()) {
        let mut s = solver();
        match s.check_sat(&f).unwrap() {
            SmtResult::Sat(m) => prop_assert_eq!(f.evaluate(&m), Ok(true)),
            SmtResult::Unsat => {
                for a in -3..=3i64 {
                    for b in -3..=3i64 {
                        for c in -3..=3i64 {
                            let m: Model = [(0, a), (1, b), (2, c)]
                                .into_iter()
                                .map(|(i, v)| (VarId::Pre(i), BigInt::from(v)))
                                .collect();
                            prop_assert_eq!(f.evaluate(&m), Ok(false));
                        }
                    }
                }
            }
            SmtResult::Unknown(r) => prop_assert!(false, "unknown on linear input: {}", r),
        }
    }

    /// Every yielded implicant entails its base, there are at most
    /// 2^|literals| of them, and together they cover the base.
    #[test]
    fn implicant_streams_project_and_cover(g in arb_formula(), step in arb_step(3)) {
        let cond = Formula::and([g, step]);
        let base = Arc::new(trans("init", "l", cond.clone()));
        let mut s = solver();
        let mut stream = ActiveStream::new(None, vec![base.clone()]);
        let mut yielded = Vec::new();
        while let Some(imp) = stream.next(&mut s, &mut |_, _| Ok(false)).unwrap() {
            let t = imp.transition();
            prop_assert!(s.entails(&t.cond, &cond).unwrap().is_yes());
            yielded.push(t.cond.clone());
            prop_assert!(yielded.len() <= 1 << cond.literals().len());
        }
        prop_assert_eq!(stream.unknowns(), 0);
        prop_assert!(s.entails(&cond, &Formula::or(yielded)).unwrap().is_yes());
    }

    /// Blocked implicants are skipped and never yielded.
    #[test]
    fn blocked_implicants_are_not_yielded(g in arb_formula(), step in arb_step(3)) {
        let base = Arc::new(trans("init", "l", Formula::and([g, step])));
        let mut s = solver();
        let all: Vec<Formula> = {
            let mut stream = ActiveStream::new(None, vec![base.clone()]);
            std::iter::from_fn(|| stream.next(&mut s, &mut |_, _| Ok(false)).unwrap())
                .map(|i| i.transition().cond.clone())
                .collect()
        };
        let blocked: Vec<Formula> = all.iter().step_by(2).cloned().collect();
        let mut stream = ActiveStream::new(None, vec![base.clone()]);
        let mut rest = Vec::new();
        while let Some(imp) = stream
            .next(&mut s, &mut |t, _| Ok(blocked.contains(&t.cond)))
            .unwrap()
        {
            let cond = imp.transition().cond.clone();
            prop_assert!(!blocked.contains(&cond));
            rest.push(cond);
        }
        // Which implicants show up depends on the order models arrive in,
        // but blocked and yielded ones together still cover the base.
        let cover = Formula::or(blocked.iter().chain(&rest).cloned());
        prop_assert!(s.entails(&base.cond, &cover).unwrap().is_yes());
    }

    /// `cond(t+)[n := 1]` is `cond(t)`.
    #[test]
    fn acceleration_at_one_iteration_is_the_loop(
        guards in proptest::collection::vec(arb_guard(3), 0..3),
        incs in proptest::collection::vec(-3i64..=3, 3),
        reset in proptest::option::of(-2i64..=2),
    ) {
        let mut parts = guards;
        for (i, c) in incs.iter().enumerate() {
            let rhs = match reset {
                Some(k) if i == 2 => Term::constant(k),
                _ => &Term::pre(i) + &Term::constant(*c),
            };
            parts.push(Formula::eq(Term::post(i), rhs));
        }
        let t = trans("l", "l", Formula::and(parts));
        match accelerate(&t, 3) {
            Ok(acc) => {
                let mut one = Subst::new();
                one.insert(acc.counter.clone(), Term::constant(1));
                let mut s = solver();
                prop_assert!(equivalent(&mut s, &acc.transition.cond.substitute(&one), &t.cond));
            }
            // Updates are constant increments or resets, so only a guard
            // whose drift is not constant can be rejected.
            Err(e) => prop_assert!(matches!(e, AccelFailure::GuardNotMonotone(_)), "{:?} on {}", e, t.cond),
        }
    }

    /// Found certificates verify and strengthen the guard.
    #[test]
    fn found_certificates_verify(
        guards in proptest::collection::vec(arb_guard(2), 1..3),
        a in proptest::collection::vec(-1i64..=1, 2),
        b in proptest::collection::vec(-1i64..=1, 2),
        ca in -2i64..=2,
        cb in -2i64..=2,
    ) {
        let cond = Formula::and(guards.into_iter().chain([
            Formula::eq(Term::post(0), linear(&a, ca, Term::pre)),
            Formula::eq(Term::post(1), linear(&b, cb, Term::pre)),
        ]));
        let t = trans("l", "l", cond);
        let mut s = solver();
        if let Some(c) = find_certificate(&mut s, &t, 2, DEFAULT_MAX_ITERS).unwrap() {
            verify_certificate(&SolverConfig::default(), &c, 2).unwrap();
            let (_, _, guard) = refine(&t, 2).unwrap();
            prop_assert!(s.entails(&c.psi, &guard).unwrap().is_yes());
        }
    }
}

/// Small systems over `x, y` in `.its` syntax.
fn arb_system() -> impl Strategy<Value = String> {
    let init = prop_oneof![
        Just("x' >= 0"),
        Just("x' = 0 && y' >= 1"),
        Just("x' <= y'"),
        Just("true"),
    ];
    let guard = prop_oneof![
        Just("x > 0"),
        Just("x < y"),
        Just("y >= 0"),
        Just("x != y"),
        Just("x + y <= 5"),
        Just("x > 0 && y > 0"),
        Just("true"),
    ];
    let update = prop_oneof![
        Just("x++ && y=="),
        Just("x-- && y++"),
        Just("x' = y && y' = x"),
        Just("x' = x + y && y=="),
        Just("x' < x && y=="),
        Just("x== && y' = 0"),
        Just("(x++ || x--) && y=="),
    ];
    (
        init,
        guard.clone(),
        update.clone(),
        proptest::option::of((guard.clone(), update.clone())),
        proptest::option::of((guard, update)),
    )
        .prop_map(|(init, g1, u1, extra, exit)| {
            let mut text = format!("vars x y\nrule init -> l1 :: {init}\nrule l1 -> l1 :: {g1} && {u1}\n");
            if let Some((g, u)) = extra {
                text.push_str(&format!("rule l1 -> l1 :: {g} && {u}\n"));
            }
            if let Some((g, u)) = exit {
                text.push_str(&format!("rule l1 -> l2 :: {g} && x== && y==\nrule l2 -> l2 :: {g} && {u}\n"));
            }
            text
        })
}

fn small_config() -> EngineConfig {
    let mut config = EngineConfig::default();
    config.budgets.wall = Duration::from_secs(30);
    config.budgets.max_depth = 10;
    config.budgets.max_learned = 16;
    config.log_derivation = true;
    config
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Debug builds assert well-formedness, progress, and blocking after
    /// every rule; here the search must also be reproducible and every NO
    /// must replay.
    #[test]
    fn searches_are_sound_and_reproducible(text in arb_system()) {
        let ts = parse(&text).unwrap();
        let first = run(&ts, small_config()).unwrap();
        let second = run(&ts, small_config()).unwrap();
        if first.stats.wall < Duration::from_secs(20) && second.stats.wall < Duration::from_secs(20) {
            prop_assert_eq!(&first.derivation, &second.derivation);
        }
        if let Verdict::NonTerminating(w) = &first.verdict {
            let doc = ProofDocument::from_witness(&text, &ts, w, &first.derivation);
            let parsed = ProofDocument::parse(&doc.render()).unwrap();
            prop_assert!(parsed.replay(&text, &SolverConfig::default()).is_ok(), "{}", doc.render());
        }
    }
}

#[test]
fn corpus_survives_print_and_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "its") {
            continue;
        }
        let ts = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse(&print(&ts)).unwrap();
        assert_eq!(again.names(), ts.names(), "{}", path.display());
        let conds = |t: &adcl_core::TransitionSystem| {
            t.transitions()
                .iter()
                .map(|t| (t.src.clone(), t.dst.clone(), t.cond.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(conds(&again), conds(&ts), "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 10);
}
