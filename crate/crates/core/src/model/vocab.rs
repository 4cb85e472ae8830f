//! Token and character inventories and context-window expansion.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Conversation, Turn};
use crate::error::{Error, Result};
use crate::features::tokenize;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const U_END_ID: usize = 2;
pub const R_END_ID: usize = 3;
pub const NUM_RESERVED: usize = 4;

const RESERVED: [&str; NUM_RESERVED] = ["<PAD>", "<UNK>", "<U-END>", "<R-END>"];

/// Character ids share the reserved layout of the word vocabulary; printable
/// ASCII follows.
pub const CHAR_VOCAB_SIZE: usize = NUM_RESERVED + (0x7F - 0x20);

/// An element of an expanded utterance or response sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Word(String),
    UEnd,
    REnd,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::UEnd => f.write_str(RESERVED[U_END_ID]),
            Token::REnd => f.write_str(RESERVED[R_END_ID]),
        }
    }
}

/// Utterances and responses of turns `max(1, i-W+1)..=i`, each followed by
/// its boundary marker, left-truncated to at most `cap` tokens per side.
/// `i` is 1-based; only `turns[..i]` is read.
pub fn expand_context(turns: &[Turn], i: usize, window: usize, cap: usize) -> Result<(Vec<Token>, Vec<Token>)> {
    if i == 0 || i > turns.len() {
        return Err(Error::OutOfRange(format!("turn {i} outside 1..={}", turns.len())));
    }
    if window == 0 || cap == 0 {
        return Err(Error::InvalidArgument("window and token cap must be positive".into()));
    }
    let start = i.saturating_sub(window);
    let mut utterance = Vec::new();
    let mut response = Vec::new();
    for turn in &turns[start..i] {
        utterance.extend(tokenize(&turn.utterance).into_iter().map(Token::Word));
        utterance.push(Token::UEnd);
        response.extend(tokenize(&turn.response).into_iter().map(Token::Word));
        response.push(Token::REnd);
    }
    Ok((left_truncate(utterance, cap), left_truncate(response, cap)))
}

fn left_truncate(mut tokens: Vec<Token>, cap: usize) -> Vec<Token> {
    if tokens.len() > cap {
        tokens.drain(..tokens.len() - cap);
    }
    tokens
}

/// Character id of one character: printable ASCII or the unknown id.
pub fn char_id(c: char) -> usize {
    match c {
        ' '..='~' => c as usize - 0x20 + NUM_RESERVED,
        _ => UNK_ID,
    }
}

/// Flattened character ids of a token sequence. Boundary markers map to a
/// single reserved id each.
pub fn chars_of(tokens: &[Token]) -> Vec<usize> {
    let mut out = Vec::new();
    for t in tokens {
        match t {
            Token::Word(w) => out.extend(w.chars().map(char_id)),
            Token::UEnd => out.push(U_END_ID),
            Token::REnd => out.push(R_END_ID),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabFile {
    min_count: usize,
    tokens: Vec<String>,
}

/// Word vocabulary. Ids `0..4` are reserved for padding, unknown words and
/// the two boundary markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocab {
    min_count: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<VocabFile> for Vocab {
    type Error = Error;

    fn try_from(file: VocabFile) -> Result<Self> {
        if file.tokens.len() < NUM_RESERVED || file.tokens[..NUM_RESERVED] != RESERVED {
            return Err(Error::Validation("vocabulary does not start with the reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(file.tokens.len());
        for (id, t) in file.tokens.iter().enumerate().skip(NUM_RESERVED) {
            if index.insert(t.clone(), id).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        Ok(Self {
            min_count: file.min_count,
            tokens: file.tokens,
            index,
        })
    }
}

impl From<Vocab> for VocabFile {
    fn from(v: Vocab) -> Self {
        Self {
            min_count: v.min_count,
            tokens: v.tokens,
        }
    }
}

impl Vocab {
    /// Words of every utterance and response with frequency at least
    /// `min_count`, ordered by descending frequency then lexicographically.
    pub fn build(conversations: &[Conversation], min_count: usize) -> Result<Self> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut turns = 0;
        for conv in conversations {
            for turn in &conv.turns {
                turns += 1;
                for w in tokenize(&turn.utterance).into_iter().chain(tokenize(&turn.response)) {
                    *counts.entry(w).or_default() += 1;
                }
            }
        }
        if turns == 0 {
            return Err(Error::InvalidArgument("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().filter(|(_, n)| *n >= min_count).collect();
        // The map iterates lexicographically and the sort is stable.
        ranked.sort_by_key(|(_, n)| std::cmp::Reverse(*n));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(w, _)| w))
            .collect();
        Self::try_from(VocabFile { min_count, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == NUM_RESERVED
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn id_of(&self, token: &Token) -> usize {
        match token {
            Token::Word(w) => self.word_id(w),
            Token::UEnd => U_END_ID,
            Token::REnd => R_END_ID,
        }
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Read a whitespace-separated embedding file (`token v1 … vd` per line).
/// Every line must carry the same number of values.
pub fn read_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    let mut dim = None;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let parse_err = |message: String| Error::Parse {
            file: path.display().to_string(),
            line: n + 1,
            column: 1,
            message,
        };
        let values = parts
            .map(|v| v.parse::<f64>().map_err(|e| parse_err(format!("bad value `{v}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_err(format!("expected {d} values, found {}", values.len())));
            }
            _ => {}
        }
        out.insert(token.to_string(), values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turns(texts: &[(&str, &str)]) -> Vec<Turn> {
        texts.iter().enumerate().map(|(k, (u, r))| Turn::new(k + 1, *u, *r)).collect()
    }

    fn words(tokens: &[Token]) -> Vec<String> {
        tokens.iter().map(Token::to_string).collect()
    }

    #[test]
    fn first_turn_has_no_history() {
        let t = turns(&[("hi there", "hello"), ("b", "c")]);
        let (u, r) = expand_context(&t, 1, 3, 128).unwrap();
        assert_eq!(words(&u), ["hi", "there", "<U-END>"]);
        assert_eq!(words(&r), ["hello", "<R-END>"]);
    }

    #[test]
    fn window_covers_last_three_turns() {
        let t = turns(&[("u1", "r1"), ("u2", "r2"), ("u3", "r3"), ("u4", "r4"), ("u5", "r5")]);
        let (u, r) = expand_context(&t, 5, 3, 128).unwrap();
        assert_eq!(words(&u), ["u3", "<U-END>", "u4", "<U-END>", "u5", "<U-END>"]);
        assert_eq!(words(&r), ["r3", "<R-END>", "r4", "<R-END>", "r5", "<R-END>"]);
    }

    #[test]
    fn left_truncation_keeps_recent_tokens() {
        let t = turns(&[("a b c d", "x"), ("e f", "y")]);
        let (u, _) = expand_context(&t, 2, 3, 4).unwrap();
        assert_eq!(words(&u), ["<U-END>", "e", "f", "<U-END>"]);
        assert!(expand_context(&t, 3, 3, 4).is_err());
        assert!(expand_context(&t, 0, 3, 4).is_err());
    }

    #[test]
    fn vocab_ordering_and_min_count() {
        let mut c = Conversation::new("c", turns(&[("b a a", "c b a")]));
        c.turns.push(Turn::new(2, "d", ""));
        let v = Vocab::build(std::slice::from_ref(&c), 1).unwrap();
        let got: Vec<&str> = (0..v.len()).map(|i| v.token(i).unwrap()).collect();
        assert_eq!(got, ["<PAD>", "<UNK>", "<U-END>", "<R-END>", "a", "b", "c", "d"]);
        assert_eq!(v.word_id("zzz"), UNK_ID);
        let only_reserved = Vocab::build(std::slice::from_ref(&c), 100).unwrap();
        assert_eq!(only_reserved.len(), NUM_RESERVED);
        assert_eq!(Vocab::build(std::slice::from_ref(&c), 1).unwrap(), v);
        assert!(Vocab::build(&[], 1).is_err());
    }

    #[test]
    fn vocab_json_round_trip() {
        let c = Conversation::new("c", turns(&[("hello world", "hi")]));
        let v = Vocab::build(&[c], 1).unwrap();
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vocab>(r#"{"min_count":1,"tokens":["a"]}"#).is_err());
    }

    #[test]
    fn chars_of_flattens_words_and_markers() {
        let hi = chars_of(&[Token::Word("hi".into())]);
        assert_eq!(hi, vec![char_id('h'), char_id('i')]);
        assert_eq!(chars_of(&[Token::UEnd]), vec![U_END_ID]);
        assert_eq!(chars_of(&[Token::REnd]), vec![R_END_ID]);
        assert_eq!(char_id('é'), UNK_ID);
        assert_eq!(char_id('~'), CHAR_VOCAB_SIZE - 1);
        assert_eq!(char_id(' '), NUM_RESERVED);
    }

    #[test]
    fn embedding_reader_checks_widths() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.txt");
        std::fs::write(&good, "the 0.1 0.2\ncat -1 2.5\n\n").unwrap();
        let emb = read_embeddings(&good).unwrap();
        assert_eq!(emb["cat"], vec![-1.0, 2.5]);
        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "the 0.1 0.2\ncat -1\n").unwrap();
        assert!(matches!(read_embeddings(&bad), Err(Error::Parse { line: 2, .. })));
    }
}
