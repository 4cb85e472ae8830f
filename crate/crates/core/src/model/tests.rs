use super::*;
use crate::data::{Conversation, Turn};
use crate::nn::{check_gradients, gradcheck, Graph, Head, Precision};

fn turn(i: usize, u: &str, r: &str) -> Turn {
    let mut t = Turn::new(i, u, r);
    t.asr_confidences = Some(vec![0.9, 0.6 + 0.01 * i as f64]);
    t.system_latency_s = Some(0.4 + 0.1 * i as f64);
    t.user_latency_s = Some(1.0 + 0.2 * i as f64);
    t.topic = Some(if i % 3 == 0 { "movies" } else { "music" }.to_string());
    t
}

fn fixture(n: usize) -> Conversation {
    let texts = [
        ("play some music", "here is a song you might like"),
        ("yes that's great", "glad you like it"),
        ("no stop that", "okay stopping"),
        ("tell me about movies", "i love movies what genre"),
        ("comedy please", "here is a comedy pick"),
    ];
    let mut c = Conversation::new(
        "fixture",
        (0..n).map(|k| {
            let (u, r) = texts[k % texts.len()];
            turn(k + 1, u, r)
        })
        .collect(),
    );
    c.name_provided = Some(true);
    c.returning_user = Some(false);
    c.final_rating = Some(4.0);
    c
}

fn small_config(head: Head) -> ModelConfig {
    ModelConfig {
        word_emb_dim: 6,
        char_emb_dim: 4,
        word_hidden: 5,
        char_hidden: 3,
        turn_hidden: 4,
        head,
        ..ModelConfig::default()
    }
}

fn model(config: ModelConfig) -> ConvSatModel {
    let conv = fixture(6);
    let vocab = Vocab::build(&[conv], 1).unwrap();
    ConvSatModel::new(config, vocab, 42).unwrap()
}

#[test]
fn representation_width_matches_config() {
    let conv = fixture(4);
    for (chars, feats) in [(true, true), (true, false), (false, true), (false, false)] {
        let mut c = small_config(Head::Sigmoid1);
        c.use_chars = chars;
        c.use_features = feats;
        let m = model(c.clone());
        let rep = m.encode_turn(&conv, 3).unwrap();
        assert_eq!(rep.len(), c.representation_dim());
        assert_eq!(
            c.representation_dim(),
            4 * 5 + if chars { 4 * 3 } else { 0 } + if feats { c.schema.enabled_len() } else { 0 }
        );
    }
}

#[test]
fn turn_encoding_reads_only_the_prefix() {
    let m = model(small_config(Head::Sigmoid1));
    let full = fixture(6);
    let short = fixture(3);
    assert_eq!(m.encode_turn(&full, 3).unwrap(), m.encode_turn(&short, 3).unwrap());
}

#[test]
fn online_outputs_are_causal_and_offline_matches_last() {
    let m = model(small_config(Head::Softmax3));
    let conv = fixture(6);
    let full = m.forward_conversation(&conv, OutputMode::Online).unwrap();
    assert_eq!(full.len(), 6);
    for k in 1..=6 {
        let prefix = m.forward_conversation(&conv.prefix(k), OutputMode::Online).unwrap();
        assert_eq!(prefix[..], full[..k]);
    }
    let offline = m.forward_conversation(&conv, OutputMode::Offline).unwrap();
    assert_eq!(offline, vec![full[5].clone()]);
    for d in &full {
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn incremental_steps_equal_batch() {
    let m = model(small_config(Head::Sigmoid1));
    let conv = fixture(10);
    let batch = m.forward_conversation(&conv, OutputMode::Online).unwrap();
    let steps = predict_online(&m, &conv).unwrap();
    assert_eq!(steps.len(), 10);
    for (s, b) in steps.iter().zip(&batch) {
        assert_eq!(&s.distribution, b);
        assert!(s.probability > 0.0 && s.probability < 1.0);
    }
}

#[test]
fn decide_rules() {
    use crate::data::{BreakdownLabel, SatLabel};
    assert_eq!(decide(&[0.2, 0.3, 0.5], Head::Softmax3).unwrap(), Label::Breakdown(BreakdownLabel::B));
    let third = 1.0 / 3.0;
    assert_eq!(decide(&[third; 3], Head::Softmax3).unwrap(), Label::Breakdown(BreakdownLabel::B));
    assert_eq!(decide(&[0.4, 0.4, 0.2], Head::Softmax3).unwrap(), Label::Breakdown(BreakdownLabel::PB));
    assert_eq!(decide(&[0.5], Head::Sigmoid1).unwrap(), Label::Sat(SatLabel::Dsat));
    assert_eq!(decide(&[0.5000001], Head::Sigmoid1).unwrap(), Label::Sat(SatLabel::Sat));
    assert!(decide(&[0.5, 0.5], Head::Sigmoid1).is_err());
}

#[test]
fn bundle_round_trip_is_exact() {
    let m = model(small_config(Head::Sigmoid1));
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let back = ConvSatModel::load(dir.path()).unwrap();
    assert_eq!(back.store.to_bytes(), {
        let mut s = m.store.clone();
        s.config_hash = m.config.hash();
        s.to_bytes()
    });
    let conv = fixture(5);
    assert_eq!(
        back.forward_conversation(&conv, OutputMode::Online).unwrap(),
        m.forward_conversation(&conv, OutputMode::Online).unwrap()
    );
    let mut other = m.config.clone();
    other.turn_hidden = 7;
    other.save(&dir.path().join(CONFIG_FILE)).unwrap();
    assert!(ConvSatModel::load(dir.path()).is_err());
}

#[test]
fn layout_mismatch_is_rejected() {
    let m = model(small_config(Head::Sigmoid1));
    let mut c = m.config.clone();
    c.use_chars = false;
    assert!(ConvSatModel::from_parts(c, m.vocab.clone(), m.store.clone()).is_err());
}

#[test]
fn pretrained_embeddings_replace_matching_rows() {
    let mut m = model(small_config(Head::Sigmoid1));
    let mut emb = std::collections::HashMap::new();
    emb.insert("music".to_string(), vec![0.5; 6]);
    emb.insert("absent".to_string(), vec![0.5; 6]);
    assert_eq!(m.apply_embeddings(&emb).unwrap(), 1);
    let id = m.vocab.word_id("music");
    assert_eq!(m.store.get("word_emb").unwrap().data[id * 6..(id + 1) * 6], [0.5; 6]);
    emb.insert("music".to_string(), vec![0.5; 3]);
    assert!(m.apply_embeddings(&emb).is_err());
}

#[test]
fn assembled_model_passes_gradient_check() {
    for head in [Head::Softmax3, Head::Sigmoid1] {
        let mut config = small_config(head);
        config.precision = Precision::Double;
        config.window = 2;
        let conv = fixture(2);
        let vocab = Vocab::build(std::slice::from_ref(&conv), 1).unwrap();
        let m = ConvSatModel::new(config.clone(), vocab, 3).unwrap();
        let prepared = m.prepare(&conv).unwrap();
        let targets = [(0, 1), (1, 0)];
        let mut store = m.store.clone();
        let report = check_gradients(
            &mut store,
            |g: &mut Graph| build_loss(&config, g, &prepared, &targets, None),
            gradcheck::DEFAULT_EPS,
            gradcheck::DEFAULT_FLOOR,
            Some(24),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
