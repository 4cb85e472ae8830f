//! Tokenization and the lexical scorers behind the sentiment, intent and
//! overlap features.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase and split on anything that is not alphanumeric or an
/// in-word apostrophe. Punctuation never becomes a token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Size of the intersection of the two unique-token sets.
pub fn token_overlap(a: &str, b: &str) -> usize {
    let left: HashSet<String> = tokenize(a).into_iter().collect();
    tokenize(b)
        .into_iter()
        .collect::<HashSet<_>>()
        .intersection(&left)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    positive_terms: BTreeMap<String, f64>,
    negative_terms: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new(positive: BTreeMap<String, f64>, negative: BTreeMap<String, f64>) -> Result<Self> {
        if positive.is_empty() && negative.is_empty() {
            return Err(Error::InvalidArgument("sentiment lexicon is empty".into()));
        }
        if let Some((t, w)) = positive.iter().chain(&negative).find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("lexicon weight for `{t}` must be positive, got {w}")));
        }
        if let Some(t) = positive.keys().find(|t| negative.contains_key(*t)) {
            return Err(Error::InvalidArgument(format!("term `{t}` is both positive and negative")));
        }
        Ok(Self {
            positive_terms: positive,
            negative_terms: negative,
        })
    }

    /// Unit-weight lexicon from two word lists.
    pub fn from_terms(positive: &[&str], negative: &[&str]) -> Result<Self> {
        let unit = |terms: &[&str]| terms.iter().map(|t| (t.to_lowercase(), 1.0)).collect();
        Self::new(unit(positive), unit(negative))
    }

    pub fn positive_terms(&self) -> &BTreeMap<String, f64> {
        &self.positive_terms
    }

    pub fn negative_terms(&self) -> &BTreeMap<String, f64> {
        &self.negative_terms
    }
}

impl Default for SentimentLexicon {
    fn default() -> Self {
        let weighted = |strong: &[&str], mild: &[&str]| {
            strong
                .iter()
                .map(|t| (t.to_string(), 2.0))
                .chain(mild.iter().map(|t| (t.to_string(), 1.0)))
                .collect()
        };
        Self::new(
            weighted(POSITIVE_STRONG, POSITIVE_MILD),
            weighted(NEGATIVE_STRONG, NEGATIVE_MILD),
        )
        .expect("bundled lexicon is valid")
    }
}

/// Summed weights of positive and negative lexicon hits, one hit per token occurrence.
pub fn score_sentiment(text: &str, lexicon: &SentimentLexicon) -> (f64, f64) {
    let (mut pos, mut neg) = (0.0, 0.0);
    for tok in tokenize(text) {
        if let Some(w) = lexicon.positive_terms.get(&tok) {
            pos += w;
        } else if let Some(w) = lexicon.negative_terms.get(&tok) {
            neg += w;
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intent {
    Affirmation,
    Negation,
    Other,
}

/// Keyword rules for affirmation and negation. Entries may be multi-word
/// phrases; a phrase matches a contiguous run of tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentRuleSet {
    affirmation_terms: BTreeSet<String>,
    negation_terms: BTreeSet<String>,
}

impl IntentRuleSet {
    pub fn new<S: AsRef<str>>(affirmation: &[S], negation: &[S]) -> Result<Self> {
        let norm = |terms: &[S]| -> BTreeSet<String> {
            terms
                .iter()
                .map(|t| tokenize(t.as_ref()).join(" "))
                .filter(|t| !t.is_empty())
                .collect()
        };
        let (affirmation_terms, negation_terms) = (norm(affirmation), norm(negation));
        if let Some(t) = affirmation_terms.intersection(&negation_terms).next() {
            return Err(Error::InvalidArgument(format!("intent term `{t}` is in both rule sets")));
        }
        Ok(Self {
            affirmation_terms,
            negation_terms,
        })
    }
}

impl Default for IntentRuleSet {
    fn default() -> Self {
        Self::new(AFFIRMATION_TERMS, NEGATION_TERMS).expect("bundled intent rules are valid")
    }
}

fn matches_any(tokens: &[String], phrases: &BTreeSet<String>) -> bool {
    phrases.iter().any(|phrase| {
        let words: Vec<&str> = phrase.split(' ').collect();
        tokens
            .windows(words.len())
            .any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
    })
}

/// Affirmation or negation when exactly one rule set matches, otherwise `Other`.
pub fn classify_intent(utterance: &str, rules: &IntentRuleSet) -> Intent {
    let tokens = tokenize(utterance);
    match (
        matches_any(&tokens, &rules.affirmation_terms),
        matches_any(&tokens, &rules.negation_terms),
    ) {
        (true, false) => Intent::Affirmation,
        (false, true) => Intent::Negation,
        _ => Intent::Other,
    }
}

const AFFIRMATION_TERMS: &[&str] = &[
    "yes", "yeah", "yep", "yup", "sure", "okay", "ok", "alright", "all right", "of course",
    "definitely", "absolutely", "certainly", "sounds good", "let's do it", "go ahead", "why not",
    "please do", "i agree", "uh huh",
];

const NEGATION_TERMS: &[&str] = &[
    "no", "nope", "nah", "stop", "don't", "never", "not really", "no thanks", "not interested",
    "i don't want", "cancel", "quit", "enough", "shut up", "something else", "change the subject",
];

const POSITIVE_STRONG: &[&str] = &[
    "love", "loved", "loving", "awesome", "amazing", "excellent", "fantastic", "wonderful",
    "perfect", "brilliant", "outstanding", "superb", "incredible", "adore", "thrilled",
    "delighted", "ecstatic", "magnificent", "marvelous", "spectacular", "phenomenal", "best",
    "favorite", "favourite", "terrific", "fabulous",
];

const POSITIVE_MILD: &[&str] = &[
    "good", "great", "nice", "like", "liked", "likes", "enjoy", "enjoyed", "enjoying", "fun",
    "funny", "cool", "happy", "glad", "pleased", "interesting", "fine", "thanks", "thank",
    "helpful", "beautiful", "pretty", "lovely", "sweet", "smart", "clever", "kind", "friendly",
    "positive", "agree", "right", "correct", "true", "exciting", "excited", "fascinating",
    "impressive", "impressed", "appreciate", "appreciated", "well", "better", "win", "winning",
    "won", "success", "successful", "hope", "hopeful", "cheerful", "calm", "relaxed", "comfortable",
    "peaceful", "safe", "strong", "healthy", "lucky", "popular", "useful", "valuable", "worth",
    "wow", "yay", "haha", "lol", "hilarious", "cute", "charming", "elegant", "fresh", "clean",
    "easy", "free", "gorgeous", "grateful", "honest", "humor", "joy", "joyful", "laugh",
    "laughing", "loyal", "neat", "okay", "proud", "ready", "recommend", "reliable", "respect",
    "satisfied", "solid", "special", "super", "support", "supportive", "talented", "tasty",
    "delicious", "welcome", "wise", "yummy", "engaging", "entertaining", "informative",
    "polite", "promising", "refreshing", "rich", "secure", "sensible", "smooth", "splendid",
    "stunning", "stellar", "thoughtful", "trust", "warm", "wholesome", "worthy", "adorable",
    "admire", "attractive", "benefit", "bliss", "bright", "care", "caring", "celebrate",
    "champion", "charm", "classic", "confident", "cozy", "creative", "curious", "dear",
    "eager", "effective", "efficient", "encourage", "energetic", "fair", "faithful", "fancy",
    "fond", "generous", "gentle", "genuine", "glory", "grace", "graceful", "handy", "harmony",
    "heaven", "heroic", "inspiring", "inspired", "intelligent", "jolly", "keen", "magic",
    "merry", "miracle", "motivated", "optimistic", "paradise", "passion", "passionate",
    "pleasant", "pleasure", "precious", "prosper", "quality", "radiant", "remarkable",
    "rewarding", "romantic", "sharp", "sincere", "skilled", "sparkling", "stable", "surprise",
    "thankful", "thriving", "tidy", "treasure", "triumph", "upbeat", "vibrant", "victory",
    "vivid", "wealthy", "winner",
];

const NEGATIVE_STRONG: &[&str] = &[
    "hate", "hated", "hating", "terrible", "horrible", "awful", "worst", "disgusting", "stupid",
    "idiot", "dumb", "useless", "pathetic", "garbage", "trash", "sucks", "suck", "furious",
    "miserable", "ridiculous", "nonsense", "shut", "damn", "crap", "disgusted", "dreadful",
];

const NEGATIVE_MILD: &[&str] = &[
    "bad", "boring", "bored", "sad", "angry", "annoying", "annoyed", "wrong", "confused",
    "confusing", "dislike", "disliked", "poor", "weird", "strange", "tired", "upset", "unhappy",
    "disappointed", "disappointing", "fail", "failed", "failure", "broken", "lame", "mad",
    "worse", "problem", "problems", "sorry", "unfortunately", "slow", "difficult", "hard",
    "hurt", "pain", "painful", "sick", "scared", "afraid", "fear", "worried", "worry",
    "lonely", "alone", "lost", "lose", "losing", "loser", "mess", "messy", "nasty", "negative",
    "rude", "sucky", "silly", "ugly", "unfair", "unpleasant", "waste", "wasted", "weak",
    "cry", "crying", "depressed", "depressing", "frustrated", "frustrating", "irritating",
    "irritated", "gross", "dull", "meaningless", "pointless", "repetitive", "repeat",
    "repeating", "nothing", "nobody", "crazy", "creepy", "cruel", "dead", "death", "die",
    "dirty", "disaster", "doubt", "evil", "fake", "false", "fault", "harsh", "hostile",
    "ignore", "ignored", "ill", "inferior", "insane", "insult", "jealous", "lazy", "liar",
    "lie", "lies", "lying", "mean", "mistake", "mistakes", "misunderstand", "misunderstood",
    "miss", "missed", "naughty", "nervous", "noisy", "offended", "offensive", "outrage",
    "panic", "poorly", "regret", "reject", "rejected", "revenge", "risk", "ruin", "ruined",
    "scary", "selfish", "shame", "shock", "shocked", "sorrow", "stress", "stressed",
    "stuck", "suffer", "suffering", "terrified", "threat", "tragic", "trouble", "unable",
    "uncomfortable", "unclear", "unknown", "unlucky", "unsafe", "unwanted", "upsetting",
    "violent", "vulnerable", "warning", "weary", "wicked", "woe", "worthless", "wrecked",
    "yuck", "ugh", "argh", "meh", "hopeless", "helpless", "horrid", "gloomy", "grim",
    "grumpy", "guilty", "heartbroken", "hostility", "impatient", "incompetent", "inadequate",
    "irrelevant", "mediocre", "nonsensical", "obnoxious", "overwhelmed", "pessimistic",
    "stale", "tedious", "tiresome", "unreliable",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_drops_punctuation() {
        assert_eq!(tokenize("Hello, World!  don't-stop"), ["hello", "world", "don't", "stop"]);
        assert!(tokenize("?! ... ").is_empty());
        assert_eq!(tokenize("'quoted'"), ["quoted"]);
    }

    #[test]
    fn overlap_uses_sets() {
        assert_eq!(token_overlap("yes yes", "yes"), 1);
        assert_eq!(token_overlap("", "anything"), 0);
        assert_eq!(token_overlap("i like movies", "movies are great movies"), 1);
        assert_eq!(token_overlap("A b C", "c B a"), 3);
    }

    #[test]
    fn sentiment_scores() {
        let lex = SentimentLexicon::from_terms(&["great", "awesome"], &["bad"]).unwrap();
        assert_eq!(score_sentiment("", &lex), (0.0, 0.0));
        assert_eq!(score_sentiment("great awesome", &lex), (2.0, 0.0));
        assert_eq!(score_sentiment("Great, bad... GREAT", &lex), (2.0, 1.0));
    }

    #[test]
    fn sentiment_matches_term_count_oracle() {
        let lex = SentimentLexicon::default();
        let text = "I love this, it is great but the ending was boring and a bit sad. love!";
        let toks = tokenize(text);
        let pos: f64 = toks.iter().filter_map(|t| lex.positive_terms().get(t)).sum();
        let neg: f64 = toks.iter().filter_map(|t| lex.negative_terms().get(t)).sum();
        // love (2) twice, great (1); boring, sad (1 each)
        assert_eq!((pos, neg), (5.0, 2.0));
        assert_eq!(score_sentiment(text, &lex), (pos, neg));
    }

    #[test]
    fn lexicon_validation() {
        assert!(SentimentLexicon::from_terms(&[], &[]).is_err());
        assert!(SentimentLexicon::from_terms(&["good"], &["good"]).is_err());
        let bad = BTreeMap::from([("x".to_string(), 0.0)]);
        assert!(SentimentLexicon::new(bad, BTreeMap::new()).is_err());
    }

    #[test]
    fn bundled_lexicon_size() {
        let lex = SentimentLexicon::default();
        assert!(lex.positive_terms().len() >= 150);
        assert!(lex.negative_terms().len() >= 150);
    }

    #[test]
    fn intents() {
        let rules = IntentRuleSet::default();
        assert_eq!(classify_intent("yes sure", &rules), Intent::Affirmation);
        assert_eq!(classify_intent("no stop it", &rules), Intent::Negation);
        assert_eq!(classify_intent("yes and no", &rules), Intent::Other);
        assert_eq!(classify_intent("tell me about movies", &rules), Intent::Other);
        assert_eq!(classify_intent("Of course!", &rules), Intent::Affirmation);
        assert_eq!(classify_intent("not really", &rules), Intent::Negation);
        assert!(IntentRuleSet::new(&["yes"], &["Yes"]).is_err());
    }
}
