mod common;

use anticipation_cli::checkpoint::{from_json, load, save, to_json};
use anticipation_core::diagnostics::MarkovChain;
use anticipation_core::trainer::{evaluate_nll, train, TrainConfig};
use anticipation_core::{MaskPolicy, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn reload_is_bit_identical() {
    let corpus = MarkovChain::three_symbol()
        .sample_corpus(30, 8, &mut ChaCha8Rng::seed_from_u64(1))
        .unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        window: 8,
        ..TrainConfig::default()
    };
    let (cp, _) = train(&corpus, ModelConfig::new(0).with_hidden(10), &cfg, &mut ()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save(&cp, &path).unwrap();
    let back = load(&path).unwrap();
    assert_eq!(back, cp);
    for (a, b) in cp.params.store().iter().zip(back.params.store().iter()) {
        assert_eq!(a.0, b.0);
        assert!(a.1.data().iter().zip(b.1.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    for policy in [MaskPolicy::None, MaskPolicy::Uniform] {
        let x = evaluate_nll(&cp, &corpus, 8, policy, 3).unwrap();
        let y = evaluate_nll(&back, &corpus, 8, policy, 3).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
    }
    assert_eq!(to_json(&back), to_json(&cp));
}

#[test]
fn rejects_damaged_files() {
    let cp = common::random_checkpoint(common::TOY, 2);
    let text = to_json(&cp);
    assert!(from_json(&text.replace("\"format_version\":1", "\"format_version\":9")).is_err());
    assert!(from_json(&text.replace("output.w", "output.x")).is_err());
    assert!(from_json(&text[..text.len() / 2]).is_err());
    assert!(from_json(&text.replace("\"C4\"", "\"Q4\"")).is_err());
}
