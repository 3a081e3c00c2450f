//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::time::Instant;

use common::{ref_lp, ref_ted, to_set, total_variation, RefNode};
use num_complex::Complex64;
use rand::Rng;
use serde_json::{json, Value};
use tree_trace::channel::{
    delete, delete_string, normalized_spider_labels, sample_deletions, sample_string_traces, sample_traces,
    ChannelConfig, DeletionModel, DeletionSet,
};
use tree_trace::harness::counts::{findpaths_accuracy, lp_route_rate};
use tree_trace::harness::report::two_proportion_z;
use tree_trace::harness::{
    run_experiment, run_experiment_with, verify_bounds, BoundsGrid, Calibration, ExperimentConfig,
};
use tree_trace::rng::rng_from_seed;
use tree_trace::spider_recon::{
    empirical_mean, expected_trace_mean, factored_generating_function, first_nonzero, generating_function,
    reconstruct_spider_large_depth, MeanOperator,
};
use tree_trace::string_recon::ExhaustiveStringReconstructor;
use tree_trace::ted_recon::stability_parameter;
use tree_trace::trace_analysis::Route;
use tree_trace::trees::{canonical_g, canonical_h, index_sets, LabeledOrderedTree, SpiderShape, Vertex};
use tree_trace::{Execution, NodeIndex, TreeShape};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Experiment configs run by the criteria, with their CSV bodies, for the
/// determinism rerun.
#[derive(Default)]
struct Runs {
    done: Vec<(ExperimentConfig, String)>,
}

impl Runs {
    fn rate(&mut self, v: Value) -> (f64, usize, usize) {
        let mut v = v;
        v["record_timing"] = json!(false);
        let cfg = ExperimentConfig::from_json(&v.to_string()).expect("valid config");
        let report = run_experiment(&cfg).expect("experiment runs");
        let agg = report.aggregates[0].clone();
        self.done.push((cfg, report.to_csv().unwrap()));
        (agg.rate, agg.successes, agg.trials)
    }
}

fn random_bits(n: usize, rng: &mut impl Rng) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

fn channel_oracle(_: &mut Runs) -> Outcome {
    let mut shapes = Vec::new();
    for k in 1..=3 {
        for d in 1..=3 {
            let s = TreeShape::kary(k, d).unwrap();
            if s.n() <= 12 {
                shapes.push(s);
            }
        }
    }
    for n in 1..=8 {
        for d in (1..=n).filter(|d| n % d == 0) {
            shapes.push(TreeShape::spider(n, d).unwrap());
        }
    }
    let mut rng = rng_from_seed(1);
    let mut checked = 0usize;
    for shape in &shapes {
        let n = shape.n();
        for labels in [(0..n).map(|i| i % 2 == 0).collect::<Vec<_>>(), random_bits(n, &mut rng)] {
            let tree = shape.build(&labels).unwrap();
            let reference = RefNode::from_tree(&tree);
            for mask in 0u64..1 << n {
                let del = DeletionSet::from_mask(n, mask);
                let set = to_set(&del);
                let ted = RefNode::from_tree(&delete(DeletionModel::Ted, &tree, &del).unwrap());
                let lp = RefNode::from_tree(&delete(DeletionModel::LeftPropagation, &tree, &del).unwrap());
                if ted != ref_ted(&reference, &set) || lp != ref_lp(&reference, &set) {
                    return outcome(false, format!("{shape} mask {mask:b} differs from the reference"));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{} shapes, {checked} deletion sets", shapes.len()))
}

fn is_path_or_star(y: &LabeledOrderedTree, star: bool) -> bool {
    (0..y.len()).all(|v| if star { y.depth(v) <= 1 } else { y.children(v).len() <= 1 })
}

fn path_star(_: &mut Runs) -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut checked = 0usize;
    for n in 1..=10 {
        for (shape, star) in [(TreeShape::kary(1, n).unwrap(), false), (TreeShape::kary(n, 1).unwrap(), true)] {
            let labels = random_bits(n, &mut rng);
            let tree = shape.build(&labels).unwrap();
            for mask in 0u64..1 << n {
                let del = DeletionSet::from_mask(n, mask);
                let ted = delete(DeletionModel::Ted, &tree, &del).unwrap();
                let lp = delete(DeletionModel::LeftPropagation, &tree, &del).unwrap();
                let string = delete_string(&labels, &del);
                let ok = ted.same_labeled_shape(&lp)
                    && ted.preorder_labels() == string
                    && lp.preorder_labels() == string
                    && is_path_or_star(&ted, star);
                if !ok {
                    return outcome(false, format!("{shape} mask {mask:b}"));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} deletion sets"))
}

fn expected_mean(_: &mut Runs) -> Outcome {
    let shape = TreeShape::spider(6, 2).unwrap();
    let s = shape.as_spider().unwrap();
    let q = 0.3;
    let labels = vec![true, true, false, true, false, true];
    let cfg = ChannelConfig::new(DeletionModel::Ted, q, 3).unwrap();
    let traces = sample_traces(&shape.build(&labels).unwrap(), &cfg, 200_000);
    let normalized: Vec<Vec<bool>> = traces.iter().map(|y| normalized_spider_labels(y, &s).unwrap()).collect();
    let emp = empirical_mean(&normalized, s.n);
    let exact = expected_trace_mean(&labels.iter().map(|&b| b as u8 as f64).collect::<Vec<_>>(), &shape, q).unwrap();
    let worst = emp.iter().zip(exact.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(worst <= 0.01, format!("max deviation {worst:.4}"))
}

fn generating_functions(_: &mut Runs) -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=6);
        let n = d * rng.random_range(1..=24 / d);
        let s = SpiderShape { n, d };
        let q = rng.random_range(0.05..0.7);
        let mut labels: Vec<f64> = random_bits(n, &mut rng).into_iter().map(|b| b as u8 as f64).collect();
        if first_nonzero(&labels).is_none() {
            labels[0] = 1.0;
        }
        let mean = MeanOperator::spider(&s, q).unwrap().apply(&labels);
        let shift = first_nonzero(&labels).unwrap() / d;
        let qd = q.powi(d as i32);
        for _ in 0..20 {
            let w = Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
            let a = generating_function(&labels, &s, q, w);
            let series: Complex64 = mean.as_slice().iter().enumerate().map(|(j, &e)| e * w.powi(j as i32)).sum();
            let factored = (qd + (1.0 - qd) * w.powi(d as i32)).powi(shift as i32)
                * factored_generating_function(&labels, &s, q, w).unwrap();
            let scale = a.norm().max(f64::MIN_POSITIVE);
            worst = worst.max((a - series).norm() / scale).max((a - factored).norm() / scale);
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e}"))
}

fn spider_meanbased(runs: &mut Runs) -> Outcome {
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "spider", "n": 9, "d": 3},
        "algo": "spider_meanbased",
        "q": 0.2,
        "trace_counts": [5000],
        "trials": 20,
        "master_seed": 5,
        "label_mode": "random",
    }));
    outcome(rate >= 0.95, format!("{ok}/{trials} at T = 5000"))
}

fn slots(trace: &LabeledOrderedTree, ids: &[usize]) -> Vec<Vertex> {
    ids.iter().map(|&id| trace.slot(id).map_or(Vertex::Root, Vertex::Node)).collect()
}

fn ted_small(runs: &mut Runs) -> Outcome {
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "kary", "k": 2, "d": 3},
        "algo": "ted_small",
        "q": 0.1,
        "trace_counts": ["theorem"],
        "trials": 50,
        "master_seed": 6,
        "constants": {"C": 10.0},
        "label_mode": "random",
    }));

    let (k, d, q) = (2usize, 3usize, 0.1f64);
    let shape = TreeShape::kary(k, d).unwrap();
    let tree = shape.build(&vec![false; shape.n()]).unwrap();
    let st = stability_parameter(k, d, q);
    let mut rng = rng_from_seed(66);
    let traces: Vec<LabeledOrderedTree> = (0..20_000)
        .map(|_| delete(DeletionModel::Ted, &tree, &sample_deletions(&tree, q, &mut rng)).unwrap())
        .collect();
    let mut worst = (f64::INFINITY, 0.0);
    for i in index_sets(&shape).unwrap().i {
        let route = Route::new(&shape, i).unwrap();
        let expect = canonical_g(&shape, i).unwrap();
        let stable: Vec<&LabeledOrderedTree> = traces.iter().filter(|y| route.is_s_stable(y, st)).collect();
        let exact = stable.iter().filter(|y| slots(y, &route.g(y).unwrap()) == expect).count();
        let freq = exact as f64 / stable.len() as f64;
        let floor = 2.0 / 3.0 - 3.0 * (2.0 / 9.0 / stable.len() as f64).sqrt();
        if freq - floor < worst.0 - worst.1 {
            worst = (freq, floor);
        }
    }
    outcome(
        rate >= 0.9 && worst.0 >= worst.1,
        format!("{ok}/{trials} at theorem T; stable G exact {:.3} (floor {:.3})", worst.0, worst.1),
    )
}

fn ted_large(runs: &mut Runs) -> Outcome {
    let accuracy = findpaths_accuracy(Execution::default(), 8, 2, 0.05, 10_000, 7).unwrap();
    let t = 2 * Calibration::bundled().string_budget(8, 0.05, 1).unwrap();
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "kary", "k": 8, "d": 2},
        "algo": "ted_large",
        "q": 0.05,
        "trace_counts": [t],
        "trials": 20,
        "master_seed": 7,
        "label_mode": "random",
    }));
    outcome(
        accuracy >= 0.99 && rate >= 0.9,
        format!("FindPaths correct on {:.2}% of traces; {ok}/{trials} at T = {t}", 100.0 * accuracy),
    )
}

fn lp_large(runs: &mut Runs) -> Outcome {
    let (k, q) = (8usize, 0.1f64);
    let t = Calibration::bundled().string_budget(k + 1, q, 1).unwrap();
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "kary", "k": k, "d": 2},
        "model": "lp",
        "algo": "lp_large",
        "q": q,
        "trace_counts": [t],
        "trials": 20,
        "master_seed": 8,
        "label_mode": "random",
    }));
    let fit = &Calibration::bundled().fitted.lp_route_defined[0];
    let samples = 10_000;
    let fresh = lp_route_rate(Execution::default(), k, 2, q, samples, 88).unwrap();
    let floor = 1.0 - (-fit.constant * k as f64).exp();
    let sigma = (floor * (1.0 - floor) / samples as f64).sqrt().max(1.0 / samples as f64);
    outcome(
        rate >= 0.9 && fresh >= floor - 3.0 * sigma,
        format!("{ok}/{trials} at T = {t}; route-defined rate {fresh:.4} vs fitted floor {floor:.4}"),
    )
}

fn lp_small(runs: &mut Runs) -> Outcome {
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "kary", "k": 2, "d": 4},
        "model": "lp",
        "algo": "lp_small",
        "q": 0.1,
        "trace_counts": ["theorem"],
        "trials": 50,
        "master_seed": 9,
        "constants": {"C": 10.0, "c_prime": 2.0},
        "label_mode": "random",
    }));
    let mut counterexamples = 0usize;
    let mut defined = 0usize;
    for d in 2..=3 {
        let shape = TreeShape::kary(2, d).unwrap();
        let n = shape.n();
        let tree = shape.build(&vec![false; n]).unwrap();
        let routes: Vec<(Route, Vec<NodeIndex>)> = index_sets(&shape)
            .unwrap()
            .i
            .into_iter()
            .map(|i| (Route::new(&shape, i).unwrap(), canonical_h(&shape, i).unwrap()))
            .collect();
        for mask in 0u64..1 << n {
            let y = delete(DeletionModel::LeftPropagation, &tree, &DeletionSet::from_mask(n, mask)).unwrap();
            for (route, truth) in &routes {
                if let Some(h) = route.h(&y) {
                    defined += 1;
                    let origins: Vec<NodeIndex> = h.iter().map(|&v| y.origin(v).unwrap()).collect();
                    counterexamples += (&origins != truth) as usize;
                }
            }
        }
    }
    outcome(
        rate >= 0.9 && counterexamples == 0,
        format!("{ok}/{trials} at theorem T; {counterexamples} counterexamples in {defined} defined caterpillars"),
    )
}

fn spider_large_depth(runs: &mut Runs) -> Outcome {
    let (n, d, q) = (16usize, 8usize, 0.5f64);
    let shape = TreeShape::spider(n, d).unwrap();
    let mut rng = rng_from_seed(10);
    let labels = random_bits(n, &mut rng);
    let samples = 20_000;
    let traces =
        sample_traces(&shape.build(&labels).unwrap(), &ChannelConfig::new(DeletionModel::Ted, q, 10).unwrap(), samples);
    let keep = reconstruct_spider_large_depth(&traces, &shape, q, &ExhaustiveStringReconstructor::default())
        .unwrap()
        .keep_rate;
    let p = (1.0 - q.powi(d as i32)).powi((n / d) as i32);
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    let t = 2 * Calibration::bundled().string_budget(d, q, 1).unwrap();
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "spider", "n": n, "d": d},
        "algo": "spider_large_depth",
        "q": q,
        "trace_counts": [t],
        "trials": 20,
        "master_seed": 10,
        "label_mode": "random",
    }));
    outcome(
        (keep - p).abs() <= 3.0 * sigma && rate >= 0.9,
        format!("keep rate {keep:.4} vs {p:.4} (3 sigma {:.4}); {ok}/{trials} at T = {t}", 3.0 * sigma),
    )
}

fn spider_rows(runs: &mut Runs) -> Outcome {
    let q_row = 1.0 - 0.8f64.powi(2);
    let t = Calibration::bundled().string_budget(6, q_row, 0).unwrap();
    let (rate, ok, trials) = runs.rate(json!({
        "shape": {"kind": "spider", "n": 12, "d": 2},
        "algo": "spider_rows",
        "q": 0.2,
        "trace_counts": [t],
        "trials": 20,
        "master_seed": 11,
        "label_mode": "random",
    }));
    outcome(rate >= 0.9, format!("{ok}/{trials} at T = {t}"))
}

fn censoring(runs: &mut Runs) -> Outcome {
    let (x, q, gamma, samples) = (vec![true, false, true, true], 0.3f64, 0.5f64, 1_000_000usize);
    let mut law = HashMap::new();
    for mask in 0u64..1 << x.len() {
        let del = DeletionSet::from_mask(x.len(), mask);
        let p = q.powi(del.len() as i32) * (1.0 - q).powi((x.len() - del.len()) as i32);
        *law.entry(delete_string(&x, &del)).or_insert(0.0) += p;
    }
    let mut counts = HashMap::new();
    let mut kept = 0usize;
    for trace in sample_string_traces(Execution::default(), &x, q, gamma, 12, samples).into_iter().flatten() {
        *counts.entry(trace).or_insert(0usize) += 1;
        kept += 1;
    }
    let tv = total_variation(&counts, &law, kept);

    let base = 40usize;
    let arm = |gamma: f64, t: usize| {
        json!({
            "shape": {"kind": "kary", "k": 1, "d": 8},
            "algo": "string",
            "q": 0.2,
            "gamma": gamma,
            "trace_counts": [t],
            "trials": 200,
            "master_seed": 12,
            "label_mode": "random",
        })
    };
    let (rate_a, ok_a, n_a) = runs.rate(arm(0.0, base));
    let (rate_b, ok_b, n_b) = runs.rate(arm(gamma, 2 * base));
    let z = two_proportion_z(ok_a, n_a, ok_b, n_b);
    outcome(
        tv < 0.01 && z.abs() < 1.959964,
        format!("TV {tv:.4} over {kept} kept traces; uncensored {rate_a:.3} vs censored {rate_b:.3}, z = {z:.2}"),
    )
}

fn bounds(_: &mut Runs) -> Outcome {
    let report = verify_bounds(&BoundsGrid::default()).unwrap();
    let parts: Vec<String> =
        report.results.iter().map(|r| format!("{}: {}/{}", r.id, r.points - r.violations, r.points)).collect();
    let violations: usize = report.results.iter().filter(|r| ('a'..='e').contains(&r.id)).map(|r| r.violations).sum();
    outcome(violations == 0, parts.join(", "))
}

fn determinism(runs: &mut Runs) -> Outcome {
    let mut mismatched = Vec::new();
    for (cfg, csv) in &runs.done {
        let again = run_experiment_with(Execution::Sequential, cfg).unwrap().to_csv().unwrap();
        if &again != csv {
            mismatched.push(format!("{} {}", cfg.algo, cfg.shape));
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{} experiments rerun sequentially, identical CSV", runs.done.len())
    } else {
        format!("differs: {}", mismatched.join(", "))
    };
    outcome(mismatched.is_empty(), detail)
}

type Criterion = (&'static str, fn(&mut Runs) -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("channel oracle equivalence", channel_oracle),
        ("path/star degeneration", path_star),
        ("expected-mean correctness", expected_mean),
        ("generating-function identities", generating_functions),
        ("spider mean-based reconstruction", spider_meanbased),
        ("TED arbitrary k", ted_small),
        ("TED large k", ted_large),
        ("LP large", lp_large),
        ("LP small", lp_small),
        ("large-depth spider", spider_large_depth),
        ("row reduction", spider_rows),
        ("censoring", censoring),
        ("verify-bounds", bounds),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut runs = Runs::default();
    let mut failed = 0;
    for (idx, (name, check)) in criteria.iter().enumerate() {
        let number = idx + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == number.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = check(&mut runs);
        let secs = start.elapsed().as_secs_f64();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} {number:>2} {name}: {} [{secs:.1}s]", result.detail);
        failed += (!result.pass) as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
