//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always
//! printed; exits non-zero if any criterion fails.

use std::time::Instant;

use anticipation_cli::checkpoint;
use anticipation_core::dataset::{make_examples, Batch};
use anticipation_core::diagnostics::{
    divergence, divergence_trace, enforcement_rate, oracle_constrained_distribution, ratio_report, DivergenceKind,
    MarkovChain,
};
use anticipation_core::encoding::{decode_notes, encode_notes, parse_corpus, Letter, Pitch};
use anticipation_core::numerics::{finite_difference_check, AdamConfig, ParameterStore};
use anticipation_core::sampler::{generate, generate_with_rng};
use anticipation_core::trainer::{evaluate_nll, train, TrainConfig, TrainReport};
use anticipation_core::{
    Checkpoint, ConstraintSet, Corpus, EnforceMode, MaskPolicy, ModelConfig, ModelParams, Vocabulary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Suite {
    failures: usize,
    total: usize,
}

impl Suite {
    fn report(&mut self, name: &str, ok: bool, detail: String) {
        self.total += 1;
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn gradient_check(suite: &mut Suite) {
    let started = Instant::now();
    let vocab = Vocabulary::from_corpus(&parse_corpus("C4 __", "v").unwrap());
    assert_eq!(vocab.len(), 5);
    let cfg = ModelConfig::new(5).with_hidden(16).with_dropout(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let params = ModelParams::init(cfg, &mut rng).unwrap();
    let (c4, hold) = (vocab.lookup("C4").unwrap(), vocab.hold());
    // Three full windows and one short one, so END and padding are covered.
    let seqs: Vec<Vec<usize>> = [6, 6, 6, 4]
        .iter()
        .map(|&n| {
            let mut s = vec![c4];
            s.extend((1..n).map(|_| if rng.gen_bool(0.5) { c4 } else { hold }));
            s
        })
        .collect();
    let examples = make_examples(&seqs, &vocab, 6, MaskPolicy::Uniform, &mut rng).unwrap();
    let batch = Batch::new(examples).unwrap();
    let mut store = params.store().clone();
    let loss = |s: &mut ParameterStore| {
        let mut model = ModelParams::from_store(cfg, s.clone())?;
        let stats = model.loss_and_grad(&batch, false, None)?;
        *s = model.into_store();
        Ok(stats.mean_nll)
    };
    let check = finite_difference_check(&mut store, loss, 1e-5, 100, &mut rng).unwrap();
    let secs = started.elapsed().as_secs_f64();
    suite.report(
        "gradient correctness",
        check.checked == 100 && check.max_relative_error <= 1e-4 && secs < 60.0,
        format!(
            "max relative error {:.2e} over {} scalars (<= 1e-4), V=5 N=6 H=16, {secs:.1}s (< 60s)",
            check.max_relative_error, check.checked
        ),
    );
}

fn random_pitch(rng: &mut ChaCha8Rng) -> Pitch {
    loop {
        let letter = Letter::from_step(rng.gen_range(0..7));
        if let Ok(p) = Pitch::new(letter, rng.gen_range(-2..=2), rng.gen_range(0..=8)) {
            return p;
        }
    }
}

fn encoding_fidelity(suite: &mut Suite) {
    let line = "D4 __ E4 __ A4 __ __ __ G4 __ F#4 __ E4 __ __ __";
    let corpus = parse_corpus(line, "ref").unwrap();
    let events = decode_notes(&corpus.sequences[0]);
    let p = |s: &str| s.parse::<Pitch>().unwrap();
    let expected = vec![(p("D4"), 2), (p("E4"), 2), (p("A4"), 4), (p("G4"), 2), (p("F#4"), 2), (p("E4"), 4)];
    let reencoded = encode_notes(&events).unwrap();
    let line_ok = events == expected && reencoded.to_line() == line && corpus.to_text() == format!("{line}\n");

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut passed = 0;
    for _ in 0..1000 {
        let events: Vec<(Pitch, u32)> =
            (0..rng.gen_range(1..12)).map(|_| (random_pitch(&mut rng), rng.gen_range(1..9))).collect();
        let seq = encode_notes(&events).unwrap();
        let text = Corpus::new("r", vec![seq.clone()]).to_text();
        let back = parse_corpus(&text, "r").unwrap();
        if back.sequences == vec![seq] && decode_notes(&back.sequences[0]) == events && back.to_text() == text {
            passed += 1;
        }
    }
    suite.report(
        "encoding fidelity",
        line_ok && passed == 1000,
        format!(
            "reference melody -> {} events, byte-identical re-encoding: {line_ok}; {passed}/1000 random round trips",
            events.len()
        ),
    );
}

fn kl_direct(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            s += p[i] * (p[i] / q[i].max(1e-30)).ln();
        }
    }
    s
}

fn random_dist(rng: &mut ChaCha8Rng, v: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..v)
        .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return random_dist(rng, v);
    }
    w.iter().map(|x| x / s).collect()
}

fn divergence_oracle(suite: &mut Suite) {
    use DivergenceKind::*;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst, mut sym, mut zero) = (0.0f64, 0.0f64, 0.0f64);
    let mut jeffreys_exact = true;
    for _ in 0..1000 {
        let v = rng.gen_range(1..=20);
        let p = random_dist(&mut rng, v);
        // Keep q's support covering p's so the reference needs no floor.
        let q: Vec<f64> = {
            let raw = random_dist(&mut rng, v);
            let mixed: Vec<f64> = raw.iter().zip(&p).map(|(a, b)| if *b > 0.0 && *a == 0.0 { 0.1 } else { *a }).collect();
            let s: f64 = mixed.iter().sum();
            mixed.iter().map(|x| x / s).collect()
        };
        let d = |k, a: &[f64], b: &[f64]| divergence(k, a, b).unwrap().value;
        let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let refs = [
            (KullbackLeibler, kl_direct(&p, &q)),
            (ReversedKullbackLeibler, kl_direct(&q, &p)),
            (Jeffreys, kl_direct(&p, &q) + kl_direct(&q, &p)),
            (JensenShannon, 0.5 * kl_direct(&p, &m) + 0.5 * kl_direct(&q, &m)),
        ];
        for (k, r) in refs {
            worst = worst.max((d(k, &p, &q) - r.max(0.0)).abs());
            zero = zero.max(d(k, &p, &p).abs()).max(d(k, &q, &q).abs());
        }
        jeffreys_exact &= d(Jeffreys, &p, &q) == d(KullbackLeibler, &p, &q) + d(ReversedKullbackLeibler, &p, &q);
        sym = sym.max((d(JensenShannon, &p, &q) - d(JensenShannon, &q, &p)).abs());
    }
    suite.report(
        "divergence oracle",
        worst <= 1e-9 && jeffreys_exact && sym <= 1e-12 && zero <= 1e-12,
        format!(
            "1000 pairs: max |err| {worst:.1e} (<= 1e-9), Jeffreys exact: {jeffreys_exact}, JS asymmetry {sym:.1e} (<= 1e-12), max D(p,p) {zero:.1e} (<= 1e-12)"
        ),
    );
}

fn cell_accounting(suite: &mut Suite) {
    let vocab = Vocabulary::from_corpus(&parse_corpus("C4 D4 E4 F4 G4 __", "v").unwrap());
    let cfg = ModelConfig::new(vocab.len()).with_hidden(16);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cp = Checkpoint::new(vocab.clone(), ModelParams::init(cfg, &mut rng).unwrap()).unwrap();
    let alphabet = vocab.alphabet();
    let mut ok = 0;
    let runs = 60;
    for i in 0..runs {
        let n = if i == 0 { 1 } else if i == 1 { 128 } else { rng.gen_range(1..=128) };
        let k = rng.gen_range(0..=n.min(4));
        let mut pos: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_iter().map(|p| p + 1).collect();
        pos.sort_unstable();
        let pairs = pos.into_iter().map(|p| (p, alphabet[rng.gen_range(0..alphabet.len())])).collect();
        let cs = ConstraintSet::new(n, pairs, &vocab).unwrap();
        let mode = if i % 2 == 0 { EnforceMode::Learned } else { EnforceMode::Clamped };
        let rec = generate(&cp, &cs, 1.0, i as u64, mode).unwrap();
        if rec.constraint_calls == n && rec.token_calls == n && rec.sequence.len() == n {
            ok += 1;
        }
    }
    suite.report(
        "2N cell accounting",
        ok == runs,
        format!("{ok}/{runs} generations with N in [1, 128] used exactly N constraint and N token cell steps"),
    );
}

/// Shared training setup for the synthetic replication.
fn synthetic_config(window: usize) -> (ModelConfig, TrainConfig) {
    let model = ModelConfig::new(0).with_hidden(64);
    let train = TrainConfig {
        epochs: 30,
        batch_size: 16,
        window,
        mask_policy: MaskPolicy::Uniform,
        adam: AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
        seed: 1,
        ..TrainConfig::default()
    };
    (model, train)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
        .0
}

fn synthetic(suite: &mut Suite) -> (Checkpoint, Corpus) {
    let chain = MarkovChain::five_note();
    let corpus = chain.sample_corpus(2000, 16, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (model, cfg) = synthetic_config(16);
    let started = Instant::now();
    let (cp, report) = train(&corpus, model, &cfg, &mut ()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let v = &cp.vocabulary;

    // (a) Fresh sequences from the same chain are the held-out set.
    let held = chain.sample_corpus(500, 16, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
    let floor = chain.entropy_per_token(16).unwrap();
    let nll = evaluate_nll(&cp, &held, 16, MaskPolicy::None, 0).unwrap();
    let rel = (nll - floor).abs() / floor;
    suite.report(
        "synthetic (a) unconstrained NLL",
        rel <= 0.05 && report.epochs.len() <= 30,
        format!(
            "held-out NLL {nll:.4} vs entropy rate {floor:.4} nats/token: {:.2}% off (<= 5%); {} epochs, best {}, {secs:.0}s",
            100.0 * rel,
            report.epochs.len(),
            report.best_epoch.unwrap()
        ),
    );
    let all = evaluate_nll(&cp, &held, 16, MaskPolicy::All, 0).unwrap();
    suite.report(
        "trainer all-mask NLL <= no-mask NLL",
        all <= nll,
        format!("all {all:.4} <= none {nll:.4}"),
    );

    let sets: Vec<ConstraintSet> = ["6:G4,12:D4", "5:E4,11:C4", "4:F4,13:G4"]
        .iter()
        .map(|t| ConstraintSet::parse(t, 16, v).unwrap())
        .collect();

    // (b)
    let rates: Vec<f64> = sets
        .iter()
        .map(|cs| enforcement_rate(&cp, cs, 1000, 5, EnforceMode::Learned).unwrap())
        .collect();
    suite.report(
        "synthetic (b) enforcement",
        rates.iter().all(|&r| r >= 0.99),
        format!(
            "learned-mode satisfaction over 1000 samples: {} (>= 0.99)",
            sets.iter().zip(&rates).map(|(cs, r)| format!("{{{}}} {r:.3}", cs.to_text(v))).collect::<Vec<_>>().join(", ")
        ),
    );

    // (c)
    let fits: Vec<_> = sets.iter().map(|cs| ratio_report(&cp, cs, 2000, 6).unwrap()).collect();
    let empty = ratio_report(&cp, &ConstraintSet::empty(16), 2000, 6).unwrap();
    let identity = (empty.slope - 1.0).abs() <= 1e-9 && empty.intercept.abs() <= 1e-9;
    suite.report(
        "synthetic (c) proportionality",
        fits.iter().all(|r| (0.9..=1.1).contains(&r.slope)) && identity,
        format!(
            "slopes over 2000 samples: {} (in [0.9, 1.1]); empty set slope {:.12} intercept {:.1e}",
            sets.iter().zip(&fits).map(|(cs, r)| format!("{{{}}} {:.3}", cs.to_text(v), r.slope)).collect::<Vec<_>>().join(", "),
            empty.slope,
            empty.intercept
        ),
    );

    oracle_equivalence(suite);

    // (e)
    let mut at_constraint = 0;
    let mut total = 0;
    let mut free_max = 0.0f64;
    for cs in &sets {
        for seed in 0..5 {
            let rec = generate(&cp, cs, 1.0, seed, EnforceMode::Learned).unwrap();
            let trace = divergence_trace(&cp, cs, &rec.sequence, DivergenceKind::ReversedKullbackLeibler).unwrap();
            let t = argmax(&trace) + 1;
            total += 1;
            if cs.pairs().iter().any(|&(p, _)| p == t) {
                at_constraint += 1;
            }
            let free = divergence_trace(&cp, &ConstraintSet::empty(16), &rec.sequence, DivergenceKind::ReversedKullbackLeibler)
                .unwrap();
            free_max = free.iter().fold(free_max, |m, x| m.max(x.abs()));
        }
    }
    suite.report(
        "synthetic (e) divergence trace",
        at_constraint == total && free_max <= 1e-12,
        format!("reversed-KL maximum at a constrained index in {at_constraint}/{total} traces; all-NC trace max {free_max:.1e} (<= 1e-12)"),
    );
    (cp, held)
}

fn oracle_equivalence(suite: &mut Suite) {
    let chain = MarkovChain::three_symbol();
    let corpus = chain.sample_corpus(2000, 6, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let (model, cfg) = synthetic_config(6);
    let (cp, _) = train(&corpus, model, &cfg, &mut ()).unwrap();
    let v = &cp.vocabulary;
    let alphabet = v.alphabet();
    let cs = ConstraintSet::parse("3:G4,6:C4", 6, v).unwrap();
    let oracle = oracle_constrained_distribution(&cp, &cs, &alphabet).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Vec<usize>> = (0..100_000)
        .map(|_| generate_with_rng(&cp, &cs, 1.0, EnforceMode::Learned, &mut rng).unwrap().sequence)
        .collect();
    let tv = oracle.total_variation(samples.iter().map(Vec::as_slice)).unwrap();
    let mut identity = 0.0f64;
    let mut zero_outside = true;
    for ((s, &pc), &pu) in oracle.sequences.iter().zip(&oracle.constrained).zip(&oracle.unconstrained) {
        if cs.is_satisfied_by(s) {
            identity = identity.max((pc * oracle.alpha - pu).abs());
        } else {
            zero_outside &= pc == 0.0;
        }
    }
    let mass: f64 = oracle.constrained.iter().sum();
    let ratio = ratio_report(&cp, &cs, 2000, 7).unwrap();
    suite.report(
        "synthetic (d) oracle equivalence",
        tv <= 0.1 && identity <= 1e-10 && zero_outside && (mass - 1.0).abs() <= 1e-10,
        format!(
            "{} sequences of length 6 over 3 symbols, alpha {:.4}: TV to 1e5 learned samples {tv:.4} (<= 0.1); max |p_con*alpha - p_unc| {identity:.1e} (<= 1e-10); intercept {:.3} vs -ln alpha {:.3} (reported only)",
            oracle.sequences.len(),
            oracle.alpha,
            ratio.intercept,
            -oracle.alpha.ln()
        ),
    );
}

fn determinism(suite: &mut Suite, trained: &Checkpoint, held: &Corpus) {
    let corpus = MarkovChain::three_symbol().sample_corpus(200, 8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 16,
        window: 8,
        seed: 77,
        ..TrainConfig::default()
    };
    let model = ModelConfig::new(0).with_hidden(16);
    let run = || -> (Checkpoint, TrainReport) { train(&corpus, model, &cfg, &mut ()).unwrap() };
    let (a, ra) = run();
    let (b, rb) = run();
    let reports = ra.same_trajectory(&rb) && a == b;

    let cs = ConstraintSet::parse("2:D4,9:G4", 16, &trained.vocabulary).unwrap();
    let generations = (0..20).all(|seed| {
        let x = generate(trained, &cs, 0.9, seed, EnforceMode::Learned).unwrap();
        let y = generate(trained, &cs, 0.9, seed, EnforceMode::Learned).unwrap();
        x.sequence == y.sequence
    });

    let dir = std::env::temp_dir().join(format!("anticipation-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.json");
    checkpoint::save(trained, &path).unwrap();
    let loaded = checkpoint::load(&path).unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    let mut bits = true;
    for policy in [MaskPolicy::None, MaskPolicy::Uniform, MaskPolicy::All] {
        let x = evaluate_nll(trained, held, 16, policy, 11).unwrap();
        let y = evaluate_nll(&loaded, held, 16, policy, 11).unwrap();
        bits &= x.to_bits() == y.to_bits();
    }
    suite.report(
        "determinism",
        reports && generations && bits,
        format!(
            "repeat training report and parameters bit-identical: {reports}; 20 seeded generations token-identical: {generations}; evaluate_nll after save/load bit-identical: {bits}"
        ),
    );
}

fn main() {
    let started = Instant::now();
    let mut suite = Suite { failures: 0, total: 0 };
    gradient_check(&mut suite);
    encoding_fidelity(&mut suite);
    divergence_oracle(&mut suite);
    cell_accounting(&mut suite);
    let (cp, held) = synthetic(&mut suite);
    determinism(&mut suite, &cp, &held);
    println!(
        "acceptance: {}/{} passed in {:.0}s",
        suite.total - suite.failures,
        suite.total,
        started.elapsed().as_secs_f64()
    );
    if suite.failures > 0 {
        std::process::exit(1);
    }
}
