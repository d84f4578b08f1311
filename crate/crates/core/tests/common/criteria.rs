//! Checks shared by the acceptance runner and the per-area test files.
//! Each returns a one-line summary on success and a reason on failure.

use std::collections::BTreeMap;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqrec_core::corpus::{
    filter_corpus, Corpus, FilterOptions, InteractionRecord, RepoRecord, Repository, TrainingRecord, WindowMode,
};
use seqrec_core::eval::{
    self, chronological_split, evaluate, hit_rate, ndcg, rank_of, reciprocal_rank, sparsify, Averaging,
    PopRecommender, Recommender, SparsityLevel, SparsitySpec, SplitPart, SplitSpec,
};
use seqrec_core::graph::{build_graph, TopicVector};
use seqrec_core::gru::{self, FeatureTable, GruModel, GruRecommender, TrainConfig};
use seqrec_core::pipeline::{repository_features, topic_graph};
use seqrec_core::sdne::{self, SdneConfig, SdneModel};
use seqrec_core::synthetic::{self, planted_cliques, random_corpus, transition_corpus, TransitionSpec};

use super::gradcheck;
use super::oracle;

pub type Check = Result<String, String>;

pub const CASES: u32 = 100;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-3)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

pub fn sdne_gradients() -> Check {
    let out = gradcheck::sdne_instances(25, 11);
    ensure(out.worst <= gradcheck::TOLERANCE, || format!("worst relative error {:.3e}", out.worst))?;
    Ok(format!("{} instances, <= {} params, worst rel. error {:.2e}", out.instances, out.max_params, out.worst))
}

pub fn gru_gradients() -> Check {
    let out = gradcheck::gru_instances(25, 12);
    ensure(out.worst <= gradcheck::TOLERANCE, || format!("worst relative error {:.3e}", out.worst))?;
    Ok(format!("{} instances, <= {} params, worst rel. error {:.2e}", out.instances, out.max_params, out.worst))
}

// ----------------------------------------------------------------- formulas

pub fn graph_matches_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut edges = 0;
    for case in 0..50 {
        let n = rng.random_range(2..=8);
        let topics = rng.random_range(1..=6);
        let corpus = random_corpus(&mut rng, n, 3, 4, topics);
        let eps = rng.random_range(0.05..0.95);
        let g = topic_graph(&corpus, eps).map_err(|e| e.to_string())?;
        let topics: Vec<_> = corpus.repos().iter().map(|r| r.explicit_topics.clone()).collect();
        let want = oracle::graph_brute(&topics, eps);
        for p in 0..n {
            for q in 0..n {
                let got = g.weight(p, q);
                ensure((got - want[p][q]).abs() <= 1e-12, || {
                    format!("corpus {case}: s[{p}][{q}] = {got}, brute force {}", want[p][q])
                })?;
                if p < q && got > 0.0 {
                    edges += 1;
                }
            }
        }
    }
    Ok(format!("50 corpora (n <= 8), {edges} edges agree"))
}

fn random_sdne(rng: &mut ChaCha8Rng) -> (seqrec_core::graph::SimilarityGraph, SdneModel) {
    let n = rng.random_range(3..=8);
    let graph = gradcheck::random_graph(rng, n);
    let sizes = if rng.random_bool(0.5) {
        vec![n, rng.random_range(2..=6), rng.random_range(1..=3)]
    } else {
        vec![n, rng.random_range(3..=6), rng.random_range(2..=4), rng.random_range(1..=2)]
    };
    let mut model = SdneModel::init(&sizes, rng);
    for l in model.encoder.iter_mut().chain(model.decoder.iter_mut()) {
        l.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    (graph, model)
}

pub fn sdne_forward_and_loss() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for case in 0..30 {
        let (graph, model) = random_sdne(&mut rng);
        let n = graph.num_vertices();
        let dense: Vec<Vec<f64>> = (0..n).map(|r| graph.row_dense(r)).collect();
        for row in &dense {
            let (acts, recon) = oracle::sdne_forward(&model, row);
            let got = sdne::encode(&model, row).map_err(|e| e.to_string())?;
            for (a, b) in got.iter().flatten().zip(acts.iter().flatten()) {
                ensure(close(*a, *b), || format!("case {case}: encoder activation {a} vs {b}"))?;
            }
            let code: Vec<f64> = got.last().unwrap().to_vec();
            let dec = sdne::decode(&model, &code).map_err(|e| e.to_string())?;
            for (a, b) in dec.iter().zip(&recon) {
                ensure(close(*a, *b), || format!("case {case}: reconstruction {a} vs {b}"))?;
            }
        }
        let alpha = rng.random_range(0.1..3.0);
        let beta = rng.random_range(1.5..10.0);
        let got = sdne::loss_total(&graph, &model, alpha, beta).map_err(|e| e.to_string())?;
        let want = oracle::sdne_loss(&dense, &model, alpha, beta);
        ensure(close(got, want), || format!("case {case}: loss {got} vs {want}"))?;

        let emb = sdne::embed_all(&model, &graph);
        let rows = Array2::from_shape_fn((n, n), |(i, j)| dense[i][j]);
        let recon = Array2::from_shape_fn((n, n), |(i, j)| oracle::sdne_forward(&model, &dense[i]).1[j]);
        let split = sdne::loss_first_order(&graph, &emb)
            + alpha * sdne::loss_second_order(&rows, &recon, beta).map_err(|e| e.to_string())?;
        ensure(close(split, want), || format!("case {case}: component losses {split} vs {want}"))?;
    }
    Ok("30 models: activations, reconstructions and losses agree to 1e-9".into())
}

pub fn gru_forward_and_loss() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..30 {
        let d_in = rng.random_range(2..=6);
        let d_u = rng.random_range(1..=5);
        let repos = 12;
        let features = gradcheck::random_features(&mut rng, repos, d_in);
        let model = GruModel::init(d_in, d_u, &mut rng);
        let rows = |ids: &[usize]| -> Vec<Vec<f64>> { ids.iter().map(|&r| features.row(r).to_vec()).collect() };
        let records = gradcheck::random_records(&mut rng, repos, 5, 4);
        let mut ce = 0.0;
        for rec in &records {
            let win = rows(&rec.window);
            let want_u = oracle::gru_forward(&model, &win);
            let views: Vec<_> = rec.window.iter().map(|&r| features.row(r)).collect();
            let u = gru::user_representation(&model, &views).map_err(|e| e.to_string())?;
            for (a, b) in u.iter().zip(&want_u) {
                ensure(close(*a, *b), || format!("case {case}: hidden {a} vs {b}"))?;
            }
            let cand_ids: Vec<usize> = std::iter::once(rec.label).chain(rec.negatives.iter().copied()).collect();
            let cands = rows(&cand_ids);
            let want_logits = oracle::gru_logits(&model, &want_u, &cands);
            let cviews: Vec<_> = cand_ids.iter().map(|&r| features.row(r)).collect();
            let logits = gru::candidate_logits(&model, u.view(), &cviews);
            for (a, b) in logits.iter().zip(&want_logits) {
                ensure(close(*a, *b), || format!("case {case}: logit {a} vs {b}"))?;
            }
            let probs = gru::score_candidates(&model, u.view(), &cviews).map_err(|e| e.to_string())?;
            let z: f64 = want_logits.iter().map(|l| l.exp()).sum();
            for (p, l) in probs.iter().zip(&want_logits) {
                ensure(close(*p, l.exp() / z), || format!("case {case}: probability {p}"))?;
            }
            ce += oracle::cross_entropy_first(&want_logits);
        }
        let lambda = rng.random_range(0.0..0.1);
        let want = ce + lambda * oracle::squared_norm(&model.params());
        let got = gru::training_loss(&model, &features, &records, lambda).map_err(|e| e.to_string())?;
        ensure(close(got, want), || format!("case {case}: loss {got} vs {want}"))?;
    }
    Ok("30 models: hidden states, logits, probabilities and losses agree to 1e-9".into())
}

// ------------------------------------------------------------------ metrics

/// Ranks the label at `rank` by giving every item the same score: ties go to
/// the lower index, so item `rank - 1` lands at position `rank`.
struct TieRanker {
    items: usize,
}

impl Recommender for TieRanker {
    fn num_items(&self) -> usize {
        self.items
    }
    fn scores(&self, _: &TrainingRecord) -> Vec<f64> {
        vec![0.0; self.items]
    }
}

pub fn metric_fixture() -> Check {
    let ranks = [1, 1, 2, 3, 4, 5, 10, 10, 11, 12, 20, 50, 7, 1, 3, 9, 100, 2, 6, 15];
    let records: Vec<TrainingRecord> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| TrainingRecord { user: i, window: vec![0], label: r - 1, step: i })
        .collect();
    let report = evaluate(&TieRanker { items: 200 }, &records, &[5, 10, 20], Averaging::Micro)
        .map_err(|e| e.to_string())?;
    let l = |r: f64| 1.0 / (r + 1.0).log2();
    // hits at 5: ranks 1,1,2,3,4,5,1,3,2
    let at5 = (
        9.0 / 20.0,
        (3.0 + 2.0 / 2.0 + 2.0 / 3.0 + 1.0 / 4.0 + 1.0 / 5.0) / 20.0,
        (3.0 * l(1.0) + 2.0 * l(2.0) + 2.0 * l(3.0) + l(4.0) + l(5.0)) / 20.0,
    );
    // plus 10, 10, 7, 9, 6 at 10 (boundary rank = N included)
    let at10 = (
        14.0 / 20.0,
        (3.0 + 2.0 / 2.0 + 2.0 / 3.0 + 1.0 / 4.0 + 1.0 / 5.0 + 2.0 / 10.0 + 1.0 / 7.0 + 1.0 / 9.0 + 1.0 / 6.0)
            / 20.0,
        (3.0 * l(1.0) + 2.0 * l(2.0) + 2.0 * l(3.0) + l(4.0) + l(5.0) + 2.0 * l(10.0) + l(7.0) + l(9.0) + l(6.0))
            / 20.0,
    );
    // plus 11, 12, 20, 15 at 20
    let at20 = (
        18.0 / 20.0,
        (at10.1 * 20.0 + 1.0 / 11.0 + 1.0 / 12.0 + 1.0 / 20.0 + 1.0 / 15.0) / 20.0,
        (at10.2 * 20.0 + l(11.0) + l(12.0) + l(20.0) + l(15.0)) / 20.0,
    );
    for (n, (hr, mrr, nd)) in [(5, at5), (10, at10), (20, at20)] {
        let m = report.at(n).ok_or("missing cut-off")?;
        for (name, got, want) in [("HR", m.hr, hr * 100.0), ("MRR", m.mrr, mrr * 100.0), ("NDCG", m.ndcg, nd * 100.0)] {
            ensure((got - want).abs() < 1e-9, || format!("{name}@{n}: {got} vs hand value {want}"))?;
        }
    }
    ensure(hit_rate(Some(10), 10) == 1.0 && hit_rate(Some(11), 10) == 0.0, || "boundary".into())?;
    ensure(reciprocal_rank(Some(4), 10) == 0.25 && ndcg(Some(3), 10) == 0.5, || "per-record values".into())?;
    let m = report.at(10).unwrap();
    Ok(format!("20 records: HR@10 {:.3} MRR@10 {:.3} NDCG@10 {:.3}", m.hr, m.mrr, m.ndcg))
}

struct RandomScorer {
    items: usize,
    seed: u64,
}

impl Recommender for RandomScorer {
    fn num_items(&self) -> usize {
        self.items
    }
    fn scores(&self, r: &TrainingRecord) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (r.step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        (0..self.items).map(|_| rng.random::<f64>()).collect()
    }
}

pub fn random_scorer_hit_rate() -> Check {
    let (items, n_records) = (1000, 10_000);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let records: Vec<TrainingRecord> = (0..n_records)
        .map(|i| TrainingRecord { user: i, window: vec![0], label: rng.random_range(0..items), step: i })
        .collect();
    let report = evaluate(&RandomScorer { items, seed: 32 }, &records, &[10], Averaging::Micro)
        .map_err(|e| e.to_string())?;
    let hr = report.at(10).unwrap().hr / 100.0;
    let p = 10.0 / items as f64;
    let sigma = (p * (1.0 - p) / n_records as f64).sqrt();
    ensure((hr - p).abs() <= 3.0 * sigma, || format!("HR@10 {hr} outside {p} +- 3 * {sigma:.5}"))?;
    Ok(format!("HR@10 {hr:.4}, expected {p} +- {:.4}", 3.0 * sigma))
}

pub fn baselines_match_hand_values() -> Check {
    // users x repos, binary
    let matrix: Vec<Vec<u8>> = vec![vec![1, 1, 0, 0], vec![1, 0, 1, 0], vec![0, 1, 1, 1], vec![1, 1, 0, 1]];
    let mut inter = Vec::new();
    for (u, row) in matrix.iter().enumerate() {
        for (r, &x) in row.iter().enumerate() {
            if x == 1 {
                inter.push((u, r));
            }
        }
    }
    let corpus = corpus_from_pairs(4, 4, &inter);
    let knn = eval::ItemKnnRecommender::fit(&corpus);
    for u in 0..4 {
        let rec = TrainingRecord { user: u, window: vec![0], label: 0, step: 0 };
        let got = knn.scores(&rec);
        let want = oracle::itemknn_brute(&matrix, u);
        for (a, b) in got.iter().zip(&want) {
            ensure((a - b).abs() < 1e-12, || format!("user {u}: knn score {a} vs {b}"))?;
        }
    }
    let pop = PopRecommender::fit(&corpus);
    // column sums: 3, 3, 2, 2
    ensure(pop.counts() == [3.0, 3.0, 2.0, 2.0], || format!("pop counts {:?}", pop.counts()))?;
    ensure(pop.ranking() == [0, 1, 2, 3], || format!("pop ranking {:?}", pop.ranking()))?;
    Ok("item-knn 4x4 brute force and popularity tally agree".into())
}

fn corpus_from_pairs(users: usize, repos: usize, pairs: &[(usize, usize)]) -> Corpus {
    let repo_list = (0..repos).map(|r| Repository::from_record(plain_repo(&synthetic::repo_id(r)))).collect();
    let inter = pairs
        .iter()
        .enumerate()
        .map(|(t, &(u, r))| InteractionRecord {
            user_id: synthetic::user_id(u),
            repo_id: synthetic::repo_id(r),
            timestamp: t as i64,
        })
        .collect();
    Corpus::from_parts(repo_list, (0..users).map(synthetic::user_id).collect(), inter).unwrap()
}

pub fn plain_repo(id: &str) -> RepoRecord {
    RepoRecord {
        id: id.to_string(),
        topics: vec![],
        description: String::new(),
        readme: String::new(),
        language: None,
        watches: 0,
        stars: 0,
        forks: 0,
    }
}

/// Corpus from repository-index sequences.
pub fn corpus_from_sequences(repos: usize, seqs: &[Vec<usize>]) -> Corpus {
    let repo_list = (0..repos).map(|r| Repository::from_record(plain_repo(&synthetic::repo_id(r)))).collect();
    let inter = seqs
        .iter()
        .enumerate()
        .flat_map(|(u, s)| {
            s.iter().enumerate().map(move |(t, &r)| InteractionRecord {
                user_id: synthetic::user_id(u),
                repo_id: synthetic::repo_id(r),
                timestamp: t as i64,
            })
        })
        .collect();
    Corpus::from_parts(repo_list, (0..seqs.len()).map(synthetic::user_id).collect(), inter).unwrap()
}

// ------------------------------------------------------- embedding quality

pub fn clique_config() -> SdneConfig {
    SdneConfig {
        layer_sizes: vec![20, 16, 4],
        alpha: 1.0,
        beta: 5.0,
        learning_rate: 0.5,
        epochs: 500,
        batch_size: 10,
        seed: 41,
        weight_decay: 0.0,
    }
}

pub fn nearest_neighbour_purity(emb: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = emb.nrows();
    let same = (0..n)
        .filter(|&i| {
            let nn = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let da = (&emb.row(i) - &emb.row(a)).mapv(|x| x * x).sum();
                    let db = (&emb.row(i) - &emb.row(b)).mapv(|x| x * x).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            labels[nn] == labels[i]
        })
        .count();
    same as f64 / n as f64
}

pub fn planted_clique_purity() -> Check {
    let (graph, labels) = planted_cliques(10);
    let (_, emb, _) = sdne::train(&graph, &clique_config()).map_err(|e| e.to_string())?;
    let purity = nearest_neighbour_purity(&emb, &labels);
    ensure(purity >= 0.9, || format!("purity {purity}"))?;
    Ok(format!("nearest-neighbour purity {purity:.2}"))
}

// ------------------------------------------------------------ learnability

pub fn learnability_sdne() -> SdneConfig {
    SdneConfig {
        layer_sizes: vec![20, 64, 16],
        alpha: 1.0,
        beta: 5.0,
        learning_rate: 0.5,
        epochs: 2000,
        batch_size: 20,
        seed: 51,
        weight_decay: 0.0,
    }
}

pub fn learnability_gru() -> TrainConfig {
    TrainConfig {
        window: 4,
        window_mode: WindowMode::Clamped,
        learning_rate: 4.0,
        max_epochs: 30,
        batch_size: 32,
        hidden: 32,
        seed: 52,
        ..TrainConfig::default()
    }
}

pub struct Learnability {
    pub held_out: usize,
    pub hr1: f64,
    pub pop_hr1: f64,
    pub hr1_all_test: f64,
}

pub fn run_learnability() -> Result<Learnability, String> {
    let e = |e: seqrec_core::Error| e.to_string();
    let tc = transition_corpus(&TransitionSpec::default());
    let c = &tc.corpus;
    let graph = topic_graph(c, 0.3).map_err(e)?;
    let (_, emb, _) = sdne::train(&graph, &learnability_sdne()).map_err(e)?;
    let split = chronological_split(c, &SplitSpec::default()).map_err(e)?;
    let features = repository_features(c, &emb, split.repos_in(c, SplitPart::Train)).map_err(e)?;
    let cfg = learnability_gru();
    let train = split.records(c, SplitPart::Train, cfg.window, cfg.window_mode);
    let (model, _) = gru::train(&features, &train, &cfg, |_, _| Ok(())).map_err(e)?;

    let test = split.records(c, SplitPart::Test, cfg.window, WindowMode::Clamped);
    let held: Vec<TrainingRecord> =
        test.iter().filter(|r| tc.table[*r.window.last().unwrap()] == r.label).cloned().collect();
    let rec = GruRecommender::new(&model, &features).map_err(e)?;
    let hr1 = evaluate(&rec, &held, &[1], Averaging::Micro).map_err(e)?.at(1).unwrap().hr / 100.0;
    let all = evaluate(&rec, &test, &[1], Averaging::Micro).map_err(e)?.at(1).unwrap().hr / 100.0;
    let pop = PopRecommender::fit(&split.part_corpus(c, SplitPart::Train));
    let pop_hr1 = evaluate(&pop, &held, &[1], Averaging::Micro).map_err(e)?.at(1).unwrap().hr / 100.0;
    Ok(Learnability { held_out: held.len(), hr1, pop_hr1, hr1_all_test: all })
}

pub fn learnability() -> Check {
    let l = run_learnability()?;
    let summary = format!(
        "HR@1 {:.4} on {} held-out transitions, Pop {:.4}; all test records {:.4}",
        l.hr1, l.held_out, l.pop_hr1, l.hr1_all_test
    );
    ensure(l.hr1 >= 0.95, || format!("HR@1 below 0.95: {summary}"))?;
    ensure(l.hr1 >= l.pop_hr1 + 0.3, || format!("margin over Pop below 0.3: {summary}"))?;
    Ok(summary)
}

// --------------------------------------------------------------- invariants

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn graph_invariants() -> Result<(), String> {
    let strategy = (prop::collection::vec(0u8..64, 2..12), 0.05f64..0.95);
    run(strategy, |(masks, eps)| {
        let vectors: Vec<TopicVector> = masks
            .iter()
            .enumerate()
            .map(|(i, m)| TopicVector::from_positions(i, 6, (0..6).filter(|b| m & (1 << b) != 0)))
            .collect();
        let g = build_graph(&vectors, eps).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let n = masks.len();
        for p in 0..n {
            prop_assert_eq!(g.weight(p, p), 0.0);
            for q in 0..n {
                let w = g.weight(p, q);
                prop_assert_eq!(w, g.weight(q, p));
                prop_assert!(w == 0.0 || (w >= eps && w <= 1.0 + 1e-12), "weight {} with eps {}", w, eps);
            }
        }
        Ok(())
    })
}

pub fn hidden_state_bounded() -> Result<(), String> {
    let strategy = (any::<u64>(), 1usize..6, 1usize..6, prop::collection::vec(-20.0f64..20.0, 1..40));
    run(strategy, |(seed, d_in, d_u, values)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = GruModel::init(d_in, d_u, &mut rng);
        for a in model.params_mut() {
            a.mapv_inplace(|w| w * 5.0);
        }
        let mut h = ndarray::Array1::zeros(d_u);
        for chunk in values.chunks(d_in) {
            let mut x = ndarray::Array1::zeros(d_in);
            for (k, v) in chunk.iter().enumerate() {
                x[k] = *v;
            }
            h = gru::gru_step(&model, h.view(), x.view()).map_err(|e| TestCaseError::fail(e.to_string()))?.hidden;
            prop_assert!(h.iter().all(|v| v.abs() <= 1.0), "hidden state {:?}", h);
        }
        Ok(())
    })
}

/// Logit gaps above ~36.7 round the top probability to exactly 1.0 in f64.
pub fn softmax_normalized() -> Result<(), String> {
    run(prop::collection::vec(-18.0f64..18.0, 2..30), |logits| {
        let p = gru::softmax(&logits);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {}", sum);
        prop_assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        Ok(())
    })
}

pub fn ranking_shift_invariant() -> Result<(), String> {
    run((prop::collection::vec(-50i32..50, 1..60), -1000i32..1000), |(scores, shift)| {
        let base: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
        let moved: Vec<f64> = base.iter().map(|s| s + shift as f64).collect();
        for i in 0..base.len() {
            prop_assert_eq!(rank_of(&base, i), rank_of(&moved, i));
        }
        let mut ranks: Vec<usize> = (0..base.len()).map(|i| rank_of(&base, i)).collect();
        ranks.sort_unstable();
        prop_assert_eq!(ranks, (1..=base.len()).collect::<Vec<_>>());
        Ok(())
    })
}

pub fn split_partitions_exactly() -> Result<(), String> {
    let strategy = prop::collection::vec(prop::collection::vec(0usize..8, 3..60), 1..6);
    run(strategy, |seqs| {
        let corpus = corpus_from_sequences(8, &seqs);
        let split = chronological_split(&corpus, &SplitSpec::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(split.excluded.is_empty());
        let parts = [SplitPart::Train, SplitPart::Valid, SplitPart::Test];
        for us in &split.users {
            let n = corpus.users()[us.user].interactions.len();
            let train = ((0.8 * n as f64) + 1e-9).floor().max(1.0) as usize;
            let valid = ((0.1 * n as f64) - 1e-9).ceil() as usize;
            prop_assert_eq!(us.range(SplitPart::Train), 0..train);
            prop_assert_eq!(us.range(SplitPart::Valid), train..train + valid);
            prop_assert_eq!(us.range(SplitPart::Test), train + valid..n);
        }
        let mut rebuilt: Vec<Vec<(usize, i64)>> = vec![Vec::new(); corpus.num_users()];
        for part in parts {
            let pc = split.part_corpus(&corpus, part);
            for (u, user) in pc.users().iter().enumerate() {
                rebuilt[u].extend(user.interactions.iter().map(|i| (i.repo, i.timestamp)));
            }
        }
        for (u, user) in corpus.users().iter().enumerate() {
            let orig: Vec<(usize, i64)> = user.interactions.iter().map(|i| (i.repo, i.timestamp)).collect();
            prop_assert_eq!(&rebuilt[u], &orig);
        }
        Ok(())
    })
}

pub fn sparsify_preserves_constraints() -> Result<(), String> {
    let strategy = (
        prop::collection::vec(prop::collection::vec(0usize..6, 3..10), 1..8),
        prop_oneof![Just(SparsityLevel::None), Just(SparsityLevel::Half), Just(SparsityLevel::All)],
        any::<u64>(),
    );
    run(strategy, |(seqs, level, seed)| {
        let used: std::collections::BTreeSet<usize> = seqs.iter().flatten().copied().collect();
        let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        let seqs: Vec<Vec<usize>> = seqs.iter().map(|s| s.iter().map(|r| remap[r]).collect()).collect();
        let corpus = corpus_from_sequences(used.len(), &seqs);
        let spec = SparsitySpec { level, seed, ..SparsitySpec::default() };
        let out = sparsify(&corpus, &spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let c = &out.corpus;
        prop_assert!(c.users().iter().all(|u| u.interactions.len() >= 3));
        let mut users_of = vec![0usize; c.num_repos()];
        for u in c.users() {
            let mut seen: Vec<usize> = u.interactions.iter().map(|i| i.repo).collect();
            seen.sort_unstable();
            seen.dedup();
            for r in seen {
                users_of[r] += 1;
            }
        }
        prop_assert!(users_of.iter().all(|&k| k >= 1), "{:?}", users_of);
        prop_assert_eq!(corpus.num_interactions() - c.num_interactions(), out.deleted);
        prop_assert!(out.deleted <= out.target);
        Ok(())
    })
}

pub fn metrics_monotone_in_n() -> Result<(), String> {
    run((prop::option::of(1usize..200), 1usize..100, 0usize..100), |(rank, n, extra)| {
        let m = n + extra;
        prop_assert!(hit_rate(rank, n) <= hit_rate(rank, m));
        prop_assert!(reciprocal_rank(rank, n) <= reciprocal_rank(rank, m));
        prop_assert!(ndcg(rank, n) <= ndcg(rank, m));
        prop_assert!(reciprocal_rank(rank, n) <= hit_rate(rank, n));
        prop_assert!(ndcg(rank, n) <= hit_rate(rank, n));
        Ok(())
    })
}

pub fn filter_is_idempotent_fixed_point() -> Result<(), String> {
    let strategy = (prop::collection::vec(prop::collection::vec(0usize..10, 0..12), 1..12), 1usize..5, 1usize..4);
    run(strategy, |(seqs, min_user, min_repo)| {
        let corpus = corpus_from_sequences(10, &seqs);
        let opts = FilterOptions { min_user_repos: min_user, min_repo_users: min_repo, single_pass: false };
        let named: BTreeMap<String, Vec<String>> = seqs
            .iter()
            .enumerate()
            .map(|(u, s)| (synthetic::user_id(u), s.iter().map(|&r| synthetic::repo_id(r)).collect()))
            .collect();
        let want = oracle::filter_fixed_point(&named, min_user, min_repo);
        match filter_corpus(&corpus, &opts) {
            Err(seqrec_core::Error::FilterTooAggressive) => prop_assert!(want.is_empty()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(f) => {
                let got: BTreeMap<String, Vec<String>> = f
                    .users()
                    .iter()
                    .map(|u| (u.id.clone(), u.interactions.iter().map(|i| f.repo(i.repo).id.clone()).collect()))
                    .collect();
                prop_assert_eq!(&got, &want);
                let again = filter_corpus(&f, &opts).map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert_eq!(again, f);
            }
        }
        Ok(())
    })
}

pub fn window_order_matters() -> Result<(), String> {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = FeatureTable { vectors: Array2::from_shape_simple_fn((4, 5), || rng.random_range(-1.0..1.0)) };
        let model = GruModel::init(5, 4, &mut rng);
        let fwd: Vec<_> = (0..4).map(|r| features.row(r)).collect();
        let rev: Vec<_> = (0..4).rev().map(|r| features.row(r)).collect();
        let a = gru::user_representation(&model, &fwd).map_err(|e| e.to_string())?;
        let b = gru::user_representation(&model, &rev).map_err(|e| e.to_string())?;
        let diff = (&a - &b).mapv(f64::abs).fold(0.0f64, |m, &x| m.max(x));
        ensure(diff > 1e-6, || format!("seed {seed}: reversing the window changed u by only {diff}"))?;
    }
    Ok(())
}

pub type Invariant = (&'static str, fn() -> Result<(), String>);

pub const INVARIANTS: [Invariant; 10] = [
    ("graph symmetry, zero diagonal, threshold bounds", graph_invariants),
    ("hidden state bounded by 1", hidden_state_bounded),
    ("softmax normalization", softmax_normalized),
    ("ranking shift invariance", ranking_shift_invariant),
    ("split partition exactness", split_partitions_exactly),
    ("sparsify constraint preservation", sparsify_preserves_constraints),
    ("metric monotonicity in N", metrics_monotone_in_n),
    ("filter fixed point and idempotence", filter_is_idempotent_fixed_point),
    ("window order sensitivity", window_order_matters),
    ("sparsify exhaustive on toy corpora", super::exhaustive::sparsify_exhaustive),
];

pub fn invariants() -> Check {
    let mut failed = Vec::new();
    for (name, f) in INVARIANTS {
        if let Err(e) = f() {
            failed.push(format!("{name}: {e}"));
        }
    }
    if failed.is_empty() {
        Ok(format!("{} suites, {CASES} cases each where randomized", INVARIANTS.len()))
    } else {
        Err(failed.join("; "))
    }
}

// ------------------------------------------------------------- determinism

pub fn determinism() -> Check {
    let e = |e: seqrec_core::Error| e.to_string();
    let once = || -> Result<_, String> {
        let tc = transition_corpus(&TransitionSpec { users: 40, seed: 3, ..TransitionSpec::default() });
        let c = tc.corpus;
        let graph = topic_graph(&c, 0.3).map_err(e)?;
        let sdne_cfg = SdneConfig { epochs: 30, ..learnability_sdne() };
        let (sdne_model, emb, _) = sdne::train(&graph, &sdne_cfg).map_err(e)?;
        let split = chronological_split(&c, &SplitSpec::default()).map_err(e)?;
        let features = repository_features(&c, &emb, split.repos_in(&c, SplitPart::Train)).map_err(e)?;
        let cfg = TrainConfig { max_epochs: 3, ..learnability_gru() };
        let train = split.records(&c, SplitPart::Train, cfg.window, cfg.window_mode);
        let (model, log) = gru::train(&features, &train, &cfg, |_, _| Ok(())).map_err(e)?;
        let test = split.records(&c, SplitPart::Test, 4, WindowMode::Clamped);
        let report = evaluate(&GruRecommender::new(&model, &features).map_err(e)?, &test, &[5, 10], Averaging::Micro)
            .map_err(e)?;
        let sparse = sparsify(&c, &SparsitySpec { level: SparsityLevel::Half, seed: 9, ..Default::default() })
            .map_err(e)?;
        let ck = seqrec_core::checkpoint::gru_checkpoint(&model).to_text()
            + &seqrec_core::checkpoint::sdne_checkpoint(&sdne_model).to_text();
        Ok((graph.edges().collect::<Vec<_>>(), emb, log.epoch_losses, report, sparse.corpus, ck))
    };
    let a = once()?;
    let b = once()?;
    ensure(a.0 == b.0, || "graph differs".into())?;
    ensure(a.1 == b.1, || "embeddings differ".into())?;
    ensure(a.2 == b.2, || "training losses differ".into())?;
    ensure(a.3 == b.3, || "metrics differ".into())?;
    ensure(a.4 == b.4, || "sparsified corpus differs".into())?;
    ensure(a.5 == b.5, || "checkpoints differ".into())?;

    // gradient reduction must not depend on the worker count
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let features = gradcheck::random_features(&mut rng, 30, 6);
    let model = GruModel::init(6, 5, &mut rng);
    let records = gradcheck::random_records(&mut rng, 30, 100, 10);
    let grads = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| gru::loss_gradients(&model, &features, &records, 1e-3).unwrap())
    };
    ensure(grads(1) == grads(4), || "gradients depend on the thread count".into())?;
    Ok("graph, embeddings, GRU training, metrics, sparsify and checkpoints are bit-identical".into())
}
