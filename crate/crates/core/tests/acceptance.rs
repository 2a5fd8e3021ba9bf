//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use srbrcnn::depgraph::{path_between, DependencyTree, Token};
use srbrcnn::harness::metrics::ConfusionMatrix;
use srbrcnn::harness::synth::{synth_generate, synth_schema, SynthSpec};
use srbrcnn::harness::train::write_metrics_log;
use srbrcnn::harness::{evaluate, macro_f1, train, ExperimentConfig, LabelSchema, ModelBundle};
use srbrcnn::model::{Brcnn, LstmVariant, Mode, ModelConfig, RelationLabel, Vocab};
use srbrcnn::numcore::gradcheck::{all_coordinates, check_gradients};
use srbrcnn::structreg::{cut_and_line, extract_sr_sdp, regularize, CutRule, SR_LINK};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// A sentence whose preposition cuts leave a three-unit path between
/// `kids` and `park` that runs through a link edge.
fn linked_tree() -> DependencyTree {
    DependencyTree::new(vec![
        Token::new(1, "kids", "NOUN", 2, "nsubj"),
        Token::new(2, "played", "VERB", 0, "root"),
        Token::new(3, "in", "ADP", 2, "prep"),
        Token::new(4, "the", "DET", 5, "det"),
        Token::new(5, "park", "NOUN", 3, "pobj"),
        Token::new(6, "near", "ADP", 5, "prep"),
        Token::new(7, "trees", "NOUN", 6, "pobj"),
    ])
    .unwrap()
}

fn gradient_fidelity() -> Verdict {
    let tree = linked_tree();
    let rule = CutRule::preposition_with(["ADP"]).unwrap();
    let rt = regularize(&tree, &rule);
    let path = extract_sr_sdp(&rt, 1, 5);
    if path.edges.len() != 3 || !path.edges.iter().any(|e| e.deprel == SR_LINK) {
        return verdict(false, format!("fixture path is not a 3-unit linked path: {path}"));
    }
    let mut checked = 0;
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for variant in [LstmVariant::Standard, LstmVariant::PaperLiteral] {
        let config = ModelConfig {
            word_dim: 5,
            rel_dim: 3,
            conv_dim: 6,
            num_relations: 3,
            lambda: 1e-3,
            keep_prob: 0.5,
            lstm_variant: variant,
            ..ModelConfig::default()
        };
        let vocab = Vocab::build([&tree], 1);
        let mut m = Brcnn::new(config.clone(), vocab, 41).unwrap();
        let ex = m.example(
            &path,
            &tree,
            RelationLabel::Directed {
                kind: 2,
                reversed: true,
            },
        );
        let mode = Mode::Train { seed: 5 };
        let obj = m.objective(&ex, mode).unwrap();
        let store = m.store_mut();
        store.zero_grads();
        store.accumulate(&obj.grads);
        m.accumulate_penalty_grad();
        let analytic = m.store().clone();
        let (cfg, vocab, mut store) = m.into_parts();
        let coords = all_coordinates(&store);
        let report = check_gradients(
            &mut store,
            &coords,
            1e-5,
            1e-6,
            |id, j| analytic.grad(id).data()[j],
            |s| {
                Brcnn::from_parts(cfg.clone(), vocab.clone(), s.clone())
                    .unwrap()
                    .objective(&ex, mode)
                    .unwrap()
                    .total()
            },
        );
        checked += report.checks.len();
        failed += report.failures(1e-4).len();
        worst = worst.max(report.max_rel_err());
    }
    verdict(
        failed == 0,
        format!("{checked} coordinates, {failed} above 1e-4, max rel err {worst:.2e}"),
    )
}

fn path_oracle() -> Verdict {
    let mut rng = StdRng::seed_from_u64(20);
    let (mut pairs, mut mismatches) = (0usize, 0usize);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=20);
        let tree = random_tree(&mut rng, n);
        let cuts = if rng.gen_bool(0.5) {
            random_cut_set(&mut rng, &tree)
        } else {
            regularize(&tree, &random_rule(&mut rng)).cut_nodes().clone()
        };
        let rt = cut_and_line(&tree, &cuts).unwrap();
        let (plain, lined) = (tree_edges(&tree), lined_edges(&rt));
        for a in 1..=n {
            for b in 1..=n {
                pairs += 1;
                let ok_plain =
                    bfs_path(n, &plain, a, b).is_some_and(|o| same_as_oracle(&path_between(&tree, a, b), &o));
                let ok_lined =
                    bfs_path(n, &lined, a, b).is_some_and(|o| same_as_oracle(&extract_sr_sdp(&rt, a, b), &o));
                mismatches += usize::from(!ok_plain) + usize::from(!ok_lined);
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("1000 trees, {pairs} endpoint pairs, {mismatches} mismatches"),
    )
}

fn structural_invariants() -> Verdict {
    let mut rng = StdRng::seed_from_u64(30);
    let mut violations = Vec::new();
    let mut cut_total = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=20);
        let tree = random_tree(&mut rng, n);
        let rt = regularize(&tree, &random_rule(&mut rng));
        cut_total += rt.cut_nodes().len();
        violations.extend(structural_violations(&rt));
    }
    let first = violations.first().cloned().unwrap_or_default();
    verdict(
        violations.is_empty(),
        format!(
            "1000 draws, {cut_total} cuts, {} violations{}",
            violations.len(),
            if first.is_empty() {
                String::new()
            } else {
                format!(" ({first})")
            }
        ),
    )
}

fn identity_regularization() -> Verdict {
    let spec = SynthSpec {
        size: 500,
        seed: 40,
        ..SynthSpec::default()
    };
    let data = synth_generate(&spec);
    let config = ModelConfig {
        word_dim: 8,
        rel_dim: 4,
        conv_dim: 8,
        num_relations: spec.k,
        ..ModelConfig::default()
    };
    let vocab = Vocab::build(data.iter().map(|i| &i.tree), 1);
    let model = Brcnn::new(config, vocab, 4).unwrap();
    let (mut path_diffs, mut loss_diffs) = (0, 0);
    for (i, inst) in data.iter().enumerate() {
        let (h1, h2) = inst.entity_heads();
        let sdp = path_between(&inst.tree, h1, h2);
        let sr = extract_sr_sdp(&regularize(&inst.tree, &CutRule::None), h1, h2);
        path_diffs += usize::from(sdp != sr);
        let mode = Mode::Train { seed: i as u64 };
        let plain = model
            .objective(&model.example(&sdp, &inst.tree, inst.label), mode)
            .unwrap();
        let reg = model
            .objective(&model.example(&sr, &inst.tree, inst.label), mode)
            .unwrap();
        loss_diffs += usize::from(plain.total().to_bits() != reg.total().to_bits());
    }
    verdict(
        path_diffs == 0 && loss_diffs == 0,
        format!("500 sentences, {path_diffs} path differences, {loss_diffs} loss bit differences"),
    )
}

fn memorization() -> Verdict {
    let spec = SynthSpec {
        size: 8,
        seed: 3,
        ..SynthSpec::default()
    };
    let schema = synth_schema(spec.k);
    let data = synth_generate(&spec);
    let mut parts = Vec::new();
    let mut pass = true;
    for variant in [LstmVariant::Standard, LstmVariant::PaperLiteral] {
        let config = ExperimentConfig {
            model: ModelConfig {
                lstm_variant: variant,
                ..ModelConfig::default()
            },
            epochs: 200,
            target_loss: Some(0.05),
            seed: 1,
            ..ExperimentConfig::default()
        };
        let out = train(&config, &schema, &data, None).unwrap();
        let last = out.log.last().unwrap();
        let ev = evaluate(&out.model, &schema, &data, &config.cut, out.model.config().alpha).unwrap();
        let correct = ev.predictions.iter().zip(&data).filter(|(p, i)| **p == i.label).count();
        pass &= last.loss < 0.05 && correct == data.len();
        parts.push(format!(
            "{variant:?}: loss {:.4} after {} epochs, {correct}/8 decoded",
            last.loss,
            out.log.len()
        ));
    }
    verdict(pass, parts.join("; "))
}

const SEEDS: [u64; 3] = [1, 2, 3];

fn synth_corpus(
    seed: u64,
) -> (
    SynthSpec,
    Vec<srbrcnn::harness::LabeledInstance>,
    Vec<srbrcnn::harness::LabeledInstance>,
) {
    let spec = SynthSpec {
        size: 2000,
        k: 4,
        seed,
        prep_density: 0.6,
        max_chain: 5,
        decoy_rate: 0.9,
        ..SynthSpec::default()
    };
    let train = synth_generate(&spec);
    let test = synth_generate(&SynthSpec {
        size: 500,
        seed: seed + 1000,
        ..spec.clone()
    });
    (spec, train, test)
}

fn relative_improvement() -> Verdict {
    let mut means = [0.0; 2];
    let mut runs = Vec::new();
    for seed in SEEDS {
        let (spec, train_set, test_set) = synth_corpus(seed);
        let schema = synth_schema(spec.k);
        for (slot, rule) in [CutRule::None, CutRule::preposition()].into_iter().enumerate() {
            let config = ExperimentConfig {
                model: ModelConfig {
                    word_dim: 16,
                    rel_dim: 8,
                    conv_dim: 16,
                    ..ModelConfig::default()
                },
                cut: rule.clone(),
                seed,
                epochs: 2,
                validation_size: 200,
                ..ExperimentConfig::default()
            };
            let out = train(&config, &schema, &train_set, None).unwrap();
            let f1 = evaluate(&out.model, &schema, &test_set, &rule, 0.5)
                .unwrap()
                .metrics
                .macro_f1;
            means[slot] += f1 / SEEDS.len() as f64;
            runs.push(format!(
                "{}={f1:.4}/loss {:.3}",
                rule.name(),
                out.log.last().unwrap().loss
            ));
        }
    }
    verdict(
        means[1] >= means[0],
        format!(
            "mean macro-F1 prep {:.4} vs none {:.4} (seed runs: {})",
            means[1],
            means[0],
            runs.join(", ")
        ),
    )
}

fn path_shortening() -> Verdict {
    let (mut sdp, mut sr, mut count) = (0usize, 0usize, 0usize);
    for seed in SEEDS {
        let (_, train_set, test_set) = synth_corpus(seed);
        for inst in train_set.iter().chain(&test_set) {
            let (h1, h2) = inst.entity_heads();
            sdp += path_between(&inst.tree, h1, h2).len();
            sr += extract_sr_sdp(&regularize(&inst.tree, &CutRule::preposition()), h1, h2).len();
            count += 1;
        }
    }
    let (sdp, sr) = (sdp as f64 / count as f64, sr as f64 / count as f64);
    verdict(
        sr < sdp,
        format!("mean nodes SR-SDP {sr:.3} vs SDP {sdp:.3} over {count} instances"),
    )
}

/// Per-type scores read straight off the count table.
fn oracle_from_counts(k: usize, c: &[Vec<u64>]) -> f64 {
    let classes = 2 * k + 1;
    let mut f1s = Vec::new();
    for t in 0..k {
        let own = [2 * t, 2 * t + 1];
        let tp: u64 = own.iter().map(|&i| c[i][i]).sum();
        let predicted: u64 = (0..classes)
            .flat_map(|g| own.iter().map(move |&p| (g, p)))
            .map(|(g, p)| c[g][p])
            .sum();
        let gold: u64 = own.iter().map(|&g| c[g].iter().sum::<u64>()).sum();
        if predicted + gold == 0 {
            continue;
        }
        let p = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let r = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        f1s.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }
    if f1s.is_empty() {
        0.0
    } else {
        f1s.iter().sum::<f64>() / f1s.len() as f64
    }
}

fn metric_correctness() -> Verdict {
    let mut rng = StdRng::seed_from_u64(80);
    let (mut mismatches, mut residual_moves) = (0, 0);
    for _ in 0..1000 {
        let k = rng.gen_range(1..=10);
        let classes = 2 * k + 1;
        let sparsity = rng.gen_range(0.0..1.0);
        let mut counts: Vec<Vec<u64>> = (0..classes)
            .map(|_| {
                (0..classes)
                    .map(|_| {
                        if rng.gen_bool(sparsity) {
                            0
                        } else {
                            rng.gen_range(0..30)
                        }
                    })
                    .collect()
            })
            .collect();
        let m = ConfusionMatrix::from_counts(k, counts.clone());
        mismatches += usize::from(macro_f1(&m) != oracle_from_counts(k, &counts));
        counts[2 * k][2 * k] += rng.gen_range(1..100);
        let bumped = ConfusionMatrix::from_counts(k, counts);
        residual_moves += usize::from(macro_f1(&bumped) != macro_f1(&m));
    }
    verdict(
        mismatches == 0 && residual_moves == 0,
        format!("1000 matrices, {mismatches} mismatches, {residual_moves} changed by residual-only counts"),
    )
}

fn class_counts() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for schema in [LabelSchema::semeval(), LabelSchema::sanwen()] {
        let tree = linked_tree();
        let config = ModelConfig {
            word_dim: 4,
            rel_dim: 2,
            conv_dim: 4,
            num_relations: schema.k(),
            ..ModelConfig::default()
        };
        let model = Brcnn::new(config, Vocab::build([&tree], 1), 1).unwrap();
        let path = path_between(&tree, 1, 5);
        let pred = model
            .predict(&model.example(&path, &tree, RelationLabel::Residual))
            .unwrap();
        let dims = (pred.y_fwd.len(), pred.y_bwd.len(), pred.y_coarse.len());
        pass &= dims == (19, 19, 10) && schema.fine_classes() == 19 && schema.coarse_classes() == 10;
        parts.push(format!(
            "{:?}: fine {}/{} coarse {}",
            schema.name, dims.0, dims.1, dims.2
        ));
    }
    verdict(pass, parts.join("; "))
}

fn run_artifacts(dir: &std::path::Path, tag: &str) -> (Vec<u8>, Vec<u8>) {
    let spec = SynthSpec {
        size: 300,
        seed: 100,
        ..SynthSpec::default()
    };
    let schema = synth_schema(spec.k);
    let data = synth_generate(&spec);
    let config = ExperimentConfig {
        model: ModelConfig {
            word_dim: 16,
            rel_dim: 8,
            conv_dim: 16,
            ..ModelConfig::default()
        },
        cut: CutRule::random(0.3, 9).unwrap(),
        seed: 77,
        epochs: 3,
        validation_size: 50,
        batch_size: 4,
        ..ExperimentConfig::default()
    };
    let out = train(&config, &schema, &data, None).unwrap();
    let ckpt = dir.join(format!("{tag}.json"));
    ModelBundle::new(&out.model, &schema, &config.cut).save(&ckpt).unwrap();
    let log_path = dir.join(format!("{tag}.jsonl"));
    write_metrics_log(std::fs::File::create(&log_path).unwrap(), &out.log).unwrap();
    (std::fs::read(ckpt).unwrap(), std::fs::read(log_path).unwrap())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let a = run_artifacts(dir.path(), "a");
    let b = run_artifacts(dir.path(), "b");
    verdict(
        a == b,
        format!(
            "checkpoint {} bytes equal: {}; metrics log {} bytes equal: {}",
            a.0.len(),
            a.0 == b.0,
            a.1.len(),
            a.1 == b.1
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);
    let criteria: [Criterion; 10] = [
        ("gradient fidelity", gradient_fidelity, Some(Duration::from_secs(60))),
        ("path oracle", path_oracle, Some(Duration::from_secs(60))),
        ("structural invariants", structural_invariants, None),
        ("identity regularization", identity_regularization, None),
        ("memorization", memorization, Some(Duration::from_secs(120))),
        (
            "synthetic relative improvement",
            relative_improvement,
            Some(Duration::from_secs(1800)),
        ),
        ("path shortening", path_shortening, None),
        ("metric correctness", metric_correctness, None),
        ("class-count contract", class_counts, None),
        ("determinism", determinism, None),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut v = run();
        let took = start.elapsed();
        if let Some(limit) = budget {
            if took > limit {
                v.pass = false;
                v.detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
            }
        }
        failures += usize::from(!v.pass);
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            took.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
