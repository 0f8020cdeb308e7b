//! The acceptance gate: twelve end-to-end criteria, one PASS/FAIL line each.
//! Runs without the libtest harness; the process fails if any criterion does.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{One, Zero};

use ssg_core::brtdp::solve_brtdp_seeds;
use ssg_core::builtins::{fig1, fig2_collapsed, fig2_mdp, fig3, fig6, skewed, vi_trap, VI_TRAP_DEFAULT};
use ssg_core::graph::EndComponent;
use ssg_core::oracle::{
    brute_force_msecs, certify_sec, enumerate_end_components, exact_action_value, find_msec_exact, solve_exact,
    ExactValueVector, DEFAULT_BUDGET,
};
use ssg_core::rng::SplitMix64;
use ssg_core::solve::{collapse_sec, deflate, solve_bvi_observed, solve_naive_bvi_observed, ViOptions};
use ssg_core::{
    random_game, ratio, solve_bvi, solve_naive_bvi, solve_vi_classic, BrtdpOptions, BviOptions, Execution,
    GeneratorParams, Player, StochasticGame, ValueVector,
};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn exact(g: &StochasticGame) -> ExactValueVector {
    solve_exact(g, DEFAULT_BUDGET).expect("within the oracle budget")
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Float bounds are compared against exact values up to this absolute slack:
/// binary64 probabilities and sums are rounded, so a bound that equals `V`
/// in exact arithmetic may land an ulp on the wrong side.
const ROUNDING: f64 = 1e-12;

/// How far `x` lies below `v` (positive when it does), in exact arithmetic.
fn shortfall(x: f64, v: &BigRational) -> f64 {
    f(&(v - q(x)))
}

fn fig3_default() -> StochasticGame {
    fig3(ratio(3, 10), ratio(6, 10))
}

fn small_game(seed: u64, max_states: usize) -> StochasticGame {
    let n = 1 + (seed as usize) % (max_states - 2);
    random_game(&GeneratorParams::default().with_seed(seed).with_states(n))
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["ssg"];
    argv.extend_from_slice(args);
    let code = ssg_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err))
}

fn scratch_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("ssg-acceptance-{}-{name}", std::process::id()))
}

fn golden_iterates() -> Verdict {
    let g = fig2_collapsed();
    let s = g.initial();
    let want = [(ratio(1, 3), ratio(2, 3)), (ratio(4, 9), ratio(5, 9)), (ratio(13, 27), ratio(14, 27))];

    let mut lo: Vec<BigRational> = g.states().map(|x| if x == g.target() { One::one() } else { Zero::zero() }).collect();
    let mut up: Vec<BigRational> = g.states().map(|x| if x == g.sink() { Zero::zero() } else { One::one() }).collect();
    let step = |v: &[BigRational]| -> Vec<BigRational> {
        g.states()
            .map(|x| {
                let vals = (0..g.actions(x).len()).map(|a| exact_action_value(&g, v, x, a));
                match g.owner(x) {
                    Player::Max => vals.max(),
                    Player::Min => vals.min(),
                }
                .expect("every state has an action")
            })
            .collect()
    };
    for (i, (l, u)) in want.iter().enumerate() {
        lo = step(&lo);
        up = step(&up);
        ensure!(&lo[s] == l && &up[s] == u, "exact iterate {}: ({}, {})", i + 1, lo[s], up[s]);
    }

    let mut float = Vec::new();
    solve_bvi_observed(&g, &BviOptions::default().with_max_iters(3).with_epsilon(1e-300), |i, b| {
        if (1..=3).contains(&i) {
            float.push((b.lower[s], b.upper[s]));
        }
    });
    ensure!(float.len() == 3, "observed {} iterates", float.len());
    let mut worst: f64 = 0.0;
    for ((l, u), (wl, wu)) in float.iter().zip(&want) {
        worst = worst.max((l - f(wl)).abs()).max((u - f(wu)).abs());
    }
    ensure!(worst <= 1e-12, "float iterates off by {worst:e}");
    Ok(format!("exact match; float error {worst:.1e}"))
}

fn f(x: &BigRational) -> f64 {
    num_traits::ToPrimitive::to_f64(x).expect("representable")
}

fn naive_non_convergence() -> Verdict {
    let g = fig2_mdp();
    let r = solve_naive_bvi(&g, &BviOptions::default().with_max_iters(1000));
    let (s, t) = (g.state_id("s").unwrap(), g.state_id("t").unwrap());
    ensure!(r.iterations == 1000 && !r.converged, "stopped after {} iterations", r.iterations);
    ensure!(r.bounds.upper[s] == 1.0 && r.bounds.upper[t] == 1.0, "U(s)={} U(t)={}", r.bounds.upper[s], r.bounds.upper[t]);
    ensure!(r.gap() >= 0.5, "gap {}", r.gap());
    let (code, _) = cli(&["solve", "fig2-mdp", "--method", "bvi-naive", "--max-iters", "1000"]);
    ensure!(code == 2, "cli exit code {code}");
    Ok(format!("U(s)=U(t)=1, gap {}, exit 2", r.gap()))
}

fn deflating_convergence() -> Verdict {
    let r = solve_bvi(&fig2_mdp(), &BviOptions::default().with_epsilon(1e-6));
    ensure!(r.converged, "did not converge");
    ensure!(r.lower() <= 0.5 && 0.5 <= r.upper(), "[{}, {}]", r.lower(), r.upper());
    ensure!(r.gap() < 1e-6 && r.iterations <= 200, "gap {} after {} iterations", r.gap(), r.iterations);
    Ok(format!("{} iterations, gap {:.1e}", r.iterations, r.gap()))
}

fn bec_stall_vs_deflation() -> Verdict {
    let g = fig3_default();
    let p = g.state_id("p").unwrap();
    let mut stuck = true;
    let naive = solve_naive_bvi_observed(&g, &BviOptions::default().with_max_iters(10_000), |_, b| {
        stuck &= b.upper[p] == 1.0;
    });
    ensure!(stuck && !naive.converged, "naive U(p) moved below 1");
    let r = solve_bvi(&g, &BviOptions::default());
    ensure!(r.converged, "deflating BVI did not converge");
    ensure!((r.lower() - 0.3).abs() <= 1e-6 && (r.upper() - 0.3).abs() <= 1e-6, "[{}, {}]", r.lower(), r.upper());
    let (code, out) = cli(&["solve", "fig3", "--oracle-check"]);
    ensure!(code == 0 && out.contains("bounds verified"), "oracle check: exit {code}\n{out}");
    Ok(format!("naive U(p)=1 for 10000 iterations; deflating: {} iterations", r.iterations))
}

fn converging_ec_control() -> Verdict {
    let g = fig6();
    let v = exact(&g).to_f64();
    let r = solve_naive_bvi(&g, &BviOptions { all_states: true, ..BviOptions::default() });
    ensure!(r.converged, "naive BVI hit the iteration limit");
    for s in g.states() {
        let (l, u) = (r.bounds.lower[s], r.bounds.upper[s]);
        ensure!((l - v[s]).abs() <= 1e-6 && (u - v[s]).abs() <= 1e-6, "{}: [{l}, {u}] vs {}", g.name(s), v[s]);
    }
    Ok(format!("{} iterations, V(A) = {}", r.iterations, exact(&g)[g.initial()]))
}

fn oracle_equivalence() -> Verdict {
    let seeds: Vec<u64> = (0..200).collect();
    let results = Execution::best_available().map(&seeds, |&seed| -> Result<(f64, f64), String> {
        let g = small_game(seed, 7);
        let v = exact(&g);
        let mut bad = None;
        let mut slack: f64 = 0.0;
        let r = solve_bvi_observed(&g, &BviOptions::default().with_epsilon(1e-8), |i, b| {
            for s in g.states() {
                let over = (-shortfall(b.lower[s], &v[s])).max(shortfall(b.upper[s], &v[s]));
                slack = slack.max(over);
                if over > ROUNDING && bad.is_none() {
                    bad = Some(format!("seed {seed}, iteration {i}, {}: [{}, {}] vs {}", g.name(s), b.lower[s], b.upper[s], v[s]));
                }
            }
        });
        if let Some(msg) = bad {
            return Err(msg);
        }
        if !r.converged {
            return Err(format!("seed {seed}: not converged"));
        }
        Ok(((r.estimate() - f(&v[g.initial()])).abs(), slack))
    });
    let (mut worst, mut slack) = (0.0f64, 0.0f64);
    for res in results {
        let (e, s) = res?;
        worst = worst.max(e);
        slack = slack.max(s);
    }
    ensure!(worst <= 1e-6, "midpoint error {worst:e}");
    Ok(format!("200 games, max midpoint error {worst:.1e}, largest bracket overshoot {slack:.1e}"))
}

fn states_of(ecs: &[EndComponent]) -> Vec<Vec<usize>> {
    let mut v: Vec<Vec<usize>> = ecs.iter().map(|t| t.states.clone()).collect();
    v.sort();
    v
}

fn find_msec_correctness() -> Verdict {
    let seeds: Vec<u64> = (0..100).collect();
    let results = Execution::best_available().map(&seeds, |&seed| {
        let g = small_game(seed, 6);
        let v = exact(&g);
        let found: Vec<EndComponent> =
            find_msec_exact(&g, &v).into_iter().filter(|t| !t.is_singleton(g.target())).collect();
        let brute = brute_force_msecs(&g, &v);
        (states_of(&found) == states_of(&brute), brute.len())
    });
    let mut total = 0;
    for (seed, (same, n)) in results.into_iter().enumerate() {
        ensure!(same, "seed {seed}: candidate components differ from enumeration");
        total += n;
    }
    Ok(format!("100 games, {total} maximal simple end components matched"))
}

fn deflate_soundness() -> Verdict {
    let mut rng = SplitMix64::new(0xdef1a7e);
    let mut triples = 0;
    let mut seed = 0;
    let mut tight = 0;
    let mut slack: f64 = 0.0;
    while triples < 1000 {
        let g = small_game(seed, 6);
        seed += 1;
        let v = exact(&g);
        let vf = v.to_f64();
        let ecs: Vec<EndComponent> =
            enumerate_end_components(&g).into_iter().filter(|t| !t.contains(g.target())).collect();
        for _ in 0..5 {
            if ecs.is_empty() || triples >= 1000 {
                break;
            }
            let t = &ecs[rng.below(ecs.len())];
            let exact_start = rng.chance(0.25);
            tight += exact_start as usize;
            let start: Vec<f64> = g
                .states()
                .map(|s| {
                    let up = if q(vf[s]) < v[s] { vf[s].next_up() } else { vf[s] };
                    if exact_start { up } else { up + (1.0 - up) * rng.unit() }
                })
                .collect();
            let d = deflate(&g, t, &ValueVector::new(start));
            for s in g.states() {
                let below = shortfall(d[s], &v[s]);
                slack = slack.max(below);
                ensure!(below <= ROUNDING, "seed {}: {} deflated to {} below {}", seed - 1, g.name(s), d[s], v[s]);
            }
            triples += 1;
        }
    }
    Ok(format!("1000 triples from {seed} games ({tight} starting at V), largest shortfall {slack:.1e}"))
}

fn collapse_equivalence() -> Verdict {
    let g = fig2_mdp();
    let ec = enumerate_end_components(&g)
        .into_iter()
        .find(|t| t.states == vec![g.state_id("s").unwrap(), g.state_id("t").unwrap()])
        .ok_or("no end component {s,t}")?;
    let collapsed = collapse_sec(&g, &ec, true).map_err(|e| e.to_string())?;
    ensure!(collapsed == fig2_collapsed(), "collapsed fig2 differs:\n{collapsed:?}");

    let mut checked = 0;
    let mut seed = 0;
    while checked < 50 {
        let g = small_game(seed, 7);
        seed += 1;
        let v = exact(&g);
        let Some(t) = enumerate_end_components(&g)
            .into_iter()
            .find(|t| !t.contains(g.target()) && !t.contains(g.sink()) && certify_sec(&g, t, &v))
        else {
            continue;
        };
        let c = collapse_sec(&g, &t, true).map_err(|e| e.to_string())?;
        let w = exact(&c);
        for s in g.states().filter(|&s| !t.contains(s)) {
            let id = c.state_id(g.name(s)).ok_or("surviving state lost")?;
            ensure!(w[id] == v[s], "seed {}: {} changed from {} to {}", seed - 1, g.name(s), v[s], w[id]);
        }
        ensure!(w[t.states[0]] == v[t.states[0]], "seed {}: merged state value changed", seed - 1);
        checked += 1;
    }
    Ok(format!("fig2 structurally equal; 50 certified collapses from {seed} games"))
}

fn brtdp_partial_exploration() -> Verdict {
    let eps = 1e-6;
    let seeds: Vec<u64> = (0..20).collect();
    let opts = BrtdpOptions::default().with_epsilon(eps);
    let g = skewed(100_000);
    let runs = solve_brtdp_seeds(&g, &opts, &seeds, Execution::best_available());
    let mut explored: Vec<f64> = runs.iter().map(|r| r.explored_states as f64 / g.len() as f64).collect();
    explored.sort_by(f64::total_cmp);
    let median = 0.5 * (explored[9] + explored[10]);
    let converged = runs.iter().filter(|r| r.converged).count();
    ensure!(converged >= 11, "only {converged}/20 skewed runs converged");
    ensure!(median < 0.05, "median explored fraction {median}");
    for (name, g) in [("fig1", fig1()), ("fig3", fig3_default())] {
        let v = f(&exact(&g)[g.initial()]);
        for r in solve_brtdp_seeds(&g, &opts, &seeds, Execution::best_available()) {
            ensure!(r.converged, "{name}: a run did not converge");
            ensure!(r.lower() <= v && v <= r.upper() && r.gap() < eps, "{name}: [{}, {}] vs {v}", r.lower(), r.upper());
        }
    }
    Ok(format!("skewed: {converged}/20 converged, median explored {:.4}% of {} states; fig1, fig3: 20/20", median * 100.0, g.len()))
}

fn classic_vi_failure() -> Verdict {
    let g = vi_trap(VI_TRAP_DEFAULT);
    let v = f(&exact(&g)[g.initial()]);
    let vi = solve_vi_classic(&g, &ViOptions { delta: 1e-6, ..ViOptions::default() });
    let err = (vi.lower() - v).abs();
    ensure!(err > 0.01, "classic VI error only {err}");
    let r = solve_bvi(&g, &BviOptions::default().with_epsilon(1e-6));
    ensure!(r.converged && r.lower() <= v && v <= r.upper() && r.gap() < 1e-6, "BVI: [{}, {}] vs {v}", r.lower(), r.upper());
    Ok(format!(
        "n={VI_TRAP_DEFAULT}: VI stops after {} iterations with error {err:.4}; BVI certifies in {}",
        vi.iterations, r.iterations
    ))
}

fn strip_time(out: &str) -> String {
    out.lines()
        .map(|l| l.split(' ').filter(|w| !w.starts_with("time_ms=")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Verdict {
    let mut runs = 0;
    for model in ["fig3", "fig6", "skewed:1000"] {
        for method in ["vi", "bvi-naive", "bvi", "brtdp"] {
            let mut seen = Vec::new();
            for rep in 0..2 {
                let trace = scratch_path(&format!("{}-{method}-{rep}.csv", model.replace(':', "_")));
                let path = trace.to_string_lossy().into_owned();
                let (code, out) =
                    cli(&["solve", model, "--method", method, "--seed", "7", "--max-iters", "5000", "--trace", &path]);
                let csv = std::fs::read(&trace).map_err(|e| format!("{model}/{method}: {e}"))?;
                let _ = std::fs::remove_file(&trace);
                seen.push((code, strip_time(&out), csv));
            }
            ensure!(seen[0] == seen[1], "{model}/{method}: runs differ");
            runs += 1;
        }
    }
    Ok(format!("{runs} model/method pairs identical across two runs"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("golden iterates on the collapsed example", golden_iterates),
        ("naive bounded iteration stalls", naive_non_convergence),
        ("deflating bounded iteration converges", deflating_convergence),
        ("bloated component stall vs deflation", bec_stall_vs_deflation),
        ("converging end component control", converging_ec_control),
        ("oracle equivalence on random games", oracle_equivalence),
        ("candidate components equal enumeration", find_msec_correctness),
        ("deflation soundness", deflate_soundness),
        ("collapse equivalence", collapse_equivalence),
        ("partial exploration", brtdp_partial_exploration),
        ("classic value iteration failure", classic_vi_failure),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {:>2}. {name} [{secs:.2}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {name} [{secs:.2}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
