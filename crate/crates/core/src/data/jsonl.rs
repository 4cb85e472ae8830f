//! Canonical JSONL conversation format, one conversation object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::types::Conversation;
use crate::error::{Error, Result};

pub fn parse_jsonl(path: &Path) -> Result<Vec<Conversation>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_jsonl(reader: impl Read) -> Result<Vec<Conversation>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, n + 1)?);
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<Conversation> {
    let mut de = serde_json::Deserializer::from_str(line);
    let conv: Conversation = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        Error::Schema {
            line: line_no,
            field: if field == "." { "<root>".into() } else { field },
            message: e.into_inner().to_string(),
        }
    })?;
    conv.check().map_err(|(field, message)| Error::Schema {
        line: line_no,
        field,
        message,
    })?;
    Ok(conv)
}

pub fn write_jsonl(path: &Path, conversations: &[Conversation]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_jsonl_to(&mut w, conversations)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl_to(w: &mut impl Write, conversations: &[Conversation]) -> Result<()> {
    for conv in conversations {
        serde_json::to_writer(&mut *w, conv)?;
        w.write_all(b"\n").map_err(|e| Error::io("<jsonl stream>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"id":"a","rating":4.0,"name_provided":true,"returning_user":null,"turns":[{"index":1,"utterance":"hi","response":"hello","asr_confidences":[0.5,0.9],"system_latency_s":1.2,"user_latency_s":null,"topic":"movies","special_state":null,"gold_breakdown":null,"gold_sat":"SAT"}]}"#;

    #[test]
    fn preserves_file_order() {
        let text = format!(
            "{}\n{}\n\n{}\n",
            LINE,
            LINE.replace("\"a\"", "\"b\""),
            LINE.replace("\"a\"", "\"c\"")
        );
        let convs = read_jsonl(text.as_bytes()).unwrap();
        let ids: Vec<_> = convs.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn round_trip() {
        let convs = read_jsonl(LINE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_jsonl_to(&mut buf, &convs).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), convs);
    }

    #[test]
    fn rating_out_of_range_names_the_field() {
        let bad = format!("{LINE}\n{}", LINE.replace("4.0", "6.0"));
        match read_jsonl(bad.as_bytes()) {
            Err(Error::Schema { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "rating");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn type_errors_carry_a_field_path() {
        let bad = LINE.replace("\"index\":1", "\"index\":\"one\"");
        match read_jsonl(bad.as_bytes()) {
            Err(Error::Schema { line, field, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(field, "turns[0].index");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn turn_invariants_are_enforced() {
        let bad = LINE.replace("[0.5,0.9]", "[0.5,1.9]");
        let err = read_jsonl(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "turns[0].asr_confidences[1]"));
        let bad = LINE.replace("\"index\":1", "\"index\":2");
        assert!(read_jsonl(bad.as_bytes()).is_err());
        let bad = LINE.replace("1.2", "-1.0");
        assert!(read_jsonl(bad.as_bytes()).is_err());
    }
}
