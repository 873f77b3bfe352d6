//! Scored-sample JSONL: one JSON object per line.
//!
//! ```text
//! {"id":"s0","text":"a!=b","tokens":[1,6,2],"logprob":{"target":-3.2,"other":null},"provenance":"target"}
//! ```
//!
//! * `id` (string, unique within a file) and `text` are required.
//! * `tokens` defaults to `[]`; `provenance` may be absent.
//! * `logprob` maps a model name to a natural-log probability ≤ 0. A `null`
//!   value is −∞ (the model assigns the text zero mass). A `null` or missing
//!   map means no model scored the sample.
//! * Any other fields are kept and written back out.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::multiset::Multiset;
use crate::oracle::TableEval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<u32>,
    #[serde(default, with = "logprob_map")]
    pub logprob: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ScoredSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            tokens: Vec::new(),
            logprob: BTreeMap::new(),
            provenance: None,
            extra: BTreeMap::new(),
        }
    }
}

mod logprob_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, &v)| (k, if v.is_finite() { Some(v) } else { None })))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw: Option<BTreeMap<String, Option<f64>>> = Option::deserialize(d)?;
        Ok(raw
            .unwrap_or_default()
            .into_iter()
            .map(|(k, v)| (k, v.unwrap_or(f64::NEG_INFINITY)))
            .collect())
    }
}

pub fn read_scored<R: BufRead>(reader: R) -> Result<Vec<ScoredSample>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let s: ScoredSample = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if let Some((model, v)) = s.logprob.iter().find(|(_, v)| **v > 0.0) {
            return Err(err(format!("logprob {v} for `{model}` is positive")));
        }
        if !seen.insert(s.id.clone()) {
            return Err(Error::DuplicateId(s.id));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_scored<W: Write>(mut writer: W, samples: &[ScoredSample]) -> Result<()> {
    for s in samples {
        if let Some((model, v)) = s.logprob.iter().find(|(_, v)| v.is_nan() || **v > 0.0) {
            return Err(Error::InvalidParameter(format!("sample {}: logprob {v} for `{model}`", s.id)));
        }
        serde_json::to_writer(&mut writer, s).map_err(|e| Error::Io(e.into()))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredSample>> {
    read_scored(BufReader::new(File::open(path)?))
}

pub fn save_scored(path: impl AsRef<Path>, samples: &[ScoredSample]) -> Result<()> {
    write_scored(BufWriter::new(File::create(path)?), samples)
}

/// The texts as a multiset.
pub fn texts(samples: &[ScoredSample]) -> Multiset {
    samples.iter().map(|s| s.text.as_str()).collect()
}

/// EVAL lookup from each sample's log-probability under `model`. Samples
/// without a score for `model` are left out and so evaluate to zero.
pub fn table_eval<'a, I>(samples: I, model: &str) -> TableEval
where
    I: IntoIterator<Item = &'a ScoredSample>,
{
    let mut t = TableEval::new();
    for s in samples {
        if let Some(&lp) = s.logprob.get(model) {
            t.insert_logprob(&s.text, lp);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::EvalOracle;

    #[test]
    fn round_trip_keeps_unknown_fields() {
        let src = concat!(
            r#"{"id":"a","text":"x y","tokens":[1,2],"logprob":{"m":-1.5,"n":null},"provenance":"target","note":{"k":1}}"#,
            "\n\n",
            r#"{"id":"b","text":"","logprob":null}"#,
            "\n"
        );
        let got = read_scored(src.as_bytes()).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].logprob["n"], f64::NEG_INFINITY);
        assert_eq!(got[0].extra["note"], serde_json::json!({"k": 1}));
        assert!(got[1].logprob.is_empty());
        assert!(got[1].tokens.is_empty());
        let mut buf = Vec::new();
        write_scored(&mut buf, &got).unwrap();
        assert_eq!(read_scored(buf.as_slice()).unwrap(), got);
        assert!(String::from_utf8(buf).unwrap().contains(r#""n":null"#));
    }

    #[test]
    fn read_errors_carry_line_numbers() {
        let dup = "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n";
        assert!(matches!(read_scored(dup.as_bytes()), Err(Error::DuplicateId(id)) if id == "a"));
        let bad = "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n";
        assert!(matches!(read_scored(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let pos = "{\"id\":\"a\",\"text\":\"x\",\"logprob\":{\"m\":0.5}}\n";
        assert!(matches!(read_scored(pos.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let missing = "{\"id\":\"a\"}\n";
        assert!(matches!(read_scored(missing.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn table_eval_uses_named_model() {
        let mut a = ScoredSample::new("1", "x");
        a.logprob.insert("m".into(), 0.5f64.ln());
        let b = ScoredSample::new("2", "y");
        let e = table_eval([&a, &b], "m");
        assert!((e.eval("x") - 0.5).abs() < 1e-15);
        assert_eq!(e.eval("y"), 0.0);
        assert_eq!(texts(&[a, b]).len(), 2);
    }
}
