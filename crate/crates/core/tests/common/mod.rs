//! Synthetic conversations shared by the integration tests.

#![allow(dead_code)]

use convsat::data::{BreakdownLabel, Conversation, SatLabel, SpecialState, Turn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOPICS: [&str; 4] = ["movies", "music", "sports", "weather"];
const FILLER: [&str; 8] = ["tell", "me", "about", "the", "what", "is", "it", "now"];
const SAT_WORDS: [&str; 4] = ["great", "love", "thanks", "wonderful"];
const DSAT_WORDS: [&str; 4] = ["boring", "wrong", "terrible", "awful"];
const RESPONSES: [&str; 6] = ["sure here is", "i think", "let me tell you", "did you know", "okay", "sorry"];

/// One turn whose utterance carries a word that determines its label.
pub fn labeled_turn(rng: &mut ChaCha8Rng, index: usize, label: SatLabel) -> Turn {
    let mut words: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| *FILLER.choose(rng).unwrap()).collect();
    let cue = match label {
        SatLabel::Sat => SAT_WORDS.choose(rng).unwrap(),
        SatLabel::Dsat => DSAT_WORDS.choose(rng).unwrap(),
    };
    words.insert(rng.gen_range(0..=words.len()), cue);
    let topic = *TOPICS.choose(rng).unwrap();
    let response = format!("{} {}", RESPONSES.choose(rng).unwrap(), topic);
    let mut t = Turn::new(index, words.join(" "), response);
    t.topic = Some(topic.to_string());
    if rng.gen_bool(0.1) {
        t.special_state = Some(*SpecialState::ALL.choose(rng).unwrap());
    }
    t.asr_confidences = Some((0..words.len()).map(|_| rng.gen_range(0.3..1.0)).collect());
    t.system_latency_s = Some(rng.gen_range(0.2..2.0));
    t.user_latency_s = Some(rng.gen_range(0.5..5.0));
    t.gold_sat = Some(label);
    t.gold_breakdown = Some(match label {
        SatLabel::Sat => BreakdownLabel::NB,
        SatLabel::Dsat if rng.gen_bool(0.5) => BreakdownLabel::PB,
        SatLabel::Dsat => BreakdownLabel::B,
    });
    t
}

/// Conversation with random per-turn labels and every input field filled.
pub fn conversation(rng: &mut ChaCha8Rng, id: &str, turns: usize) -> Conversation {
    let turns: Vec<Turn> = (1..=turns)
        .map(|i| {
            let label = if rng.gen_bool(0.5) { SatLabel::Sat } else { SatLabel::Dsat };
            labeled_turn(rng, i, label)
        })
        .collect();
    let sat = turns.iter().filter(|t| t.gold_sat == Some(SatLabel::Sat)).count();
    let mut c = Conversation::new(id, turns);
    c.name_provided = Some(rng.gen_bool(0.5));
    c.returning_user = Some(rng.gen_bool(0.5));
    c.final_rating = Some(if 2 * sat > c.len() { 4.5 } else { 2.0 });
    c
}

pub fn corpus(n: usize, min_turns: usize, max_turns: usize, seed: u64) -> Vec<Conversation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let len = rng.gen_range(min_turns..=max_turns);
            conversation(&mut rng, &format!("syn-{k:03}"), len)
        })
        .collect()
}
