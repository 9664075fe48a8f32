use std::collections::HashMap;

use serde::Serialize;
use serde_json::Value;
use unicode_normalization::UnicodeNormalization;

use super::EntryRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryScore {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub score: f64,
    pub matched: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched gold entries, in gold order.
    pub per_entry: Vec<EntryScore>,
    /// Set when the prediction is not JSON of an accepted shape.
    pub parse_error: Option<String>,
}

fn normalize(s: &str) -> String {
    s.nfc().collect::<String>().trim().to_string()
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(normalize(s)),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Strips one surrounding Markdown code fence, if any.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let body = rest.split_once('\n').map_or("", |(_, b)| b);
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Accepts an array of records, an object wrapping exactly one array, or a single record.
fn records(text: &str) -> Result<Vec<Value>, String> {
    let body = unfence(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    match v {
        Value::Array(items) => Ok(items),
        Value::Object(map) if map.contains_key("name") => Ok(vec![Value::Object(map)]),
        Value::Object(map) => {
            let mut arrays = map.into_iter().filter_map(|(_, v)| match v {
                Value::Array(a) => Some(a),
                _ => None,
            });
            match (arrays.next(), arrays.next()) {
                (Some(a), None) => Ok(a),
                _ => Err("object holds no single record array".to_string()),
            }
        }
        other => Err(format!("expected an array or object, found {}", kind(&other))),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Name-anchored soft IoU.
///
/// Each matched entry scores `(1 + c) / (1 + m)` with `m` required fields of
/// which `c` match exactly after NFC + trim. The total is the sum over matched
/// entries divided by `matched + false positives + false negatives`, and 1.0
/// when both sides are empty. When several predictions share a gold name the
/// best one is matched and the others are false positives, which keeps the
/// score independent of prediction order.
pub fn score(prediction_text: &str, gold: &[EntryRecord]) -> ScoreReport {
    let predicted = match records(prediction_text) {
        Ok(p) => p,
        Err(e) => {
            return ScoreReport {
                score: 0.0,
                matched: 0,
                false_positives: 0,
                false_negatives: gold.len(),
                per_entry: Vec::new(),
                parse_error: Some(e),
            }
        }
    };

    let gold_index: HashMap<String, usize> =
        gold.iter().enumerate().rev().map(|(i, g)| (normalize(&g.name), i)).collect();
    let mut best: Vec<Option<usize>> = vec![None; gold.len()];
    let mut candidates = 0usize;
    let mut false_positives = 0usize;
    for p in &predicted {
        let gi = p.get("name").and_then(value_text).and_then(|n| gold_index.get(&n).copied());
        match gi {
            Some(gi) => {
                candidates += 1;
                let c = correct_fields(p, &gold[gi]);
                if best[gi].is_none_or(|b| c > b) {
                    best[gi] = Some(c);
                }
            }
            None => false_positives += 1,
        }
    }

    let mut per_entry = Vec::new();
    let mut total = 0.0;
    for (g, b) in gold.iter().zip(&best) {
        if let Some(c) = *b {
            let m = g.fields.len();
            let s = (1 + c) as f64 / (1 + m) as f64;
            total += s;
            per_entry.push(EntryScore { name: g.name.clone(), score: s });
        }
    }
    let matched = per_entry.len();
    false_positives += candidates - matched;
    let false_negatives = gold.len() - matched;
    let denom = matched + false_positives + false_negatives;
    ScoreReport {
        score: if denom == 0 { 1.0 } else { total / denom as f64 },
        matched,
        false_positives,
        false_negatives,
        per_entry,
        parse_error: None,
    }
}

fn correct_fields(pred: &Value, gold: &EntryRecord) -> usize {
    gold.fields
        .iter()
        .filter(|(k, v)| pred.get(k.as_str()).and_then(value_text).is_some_and(|p| p == normalize(v)))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gold() -> Vec<EntryRecord> {
        vec![
            EntryRecord::new("Ann Lee", &[("specialization", "Urologist"), ("city", "Graz")]),
            EntryRecord::new("Bo Tan", &[("specialization", "Allergist"), ("city", "Split")]),
        ]
    }

    fn as_json(rs: &[EntryRecord]) -> String {
        serde_json::to_string(rs).unwrap()
    }

    #[test]
    fn perfect_and_empty() {
        assert_eq!(score(&as_json(&gold()), &gold()).score, 1.0);
        let five: Vec<EntryRecord> =
            (0..5).map(|i| EntryRecord::new(format!("n{i}"), &[("a", "1"), ("b", "2")])).collect();
        let r = score("", &five);
        assert_eq!((r.score, r.false_negatives, r.parse_error.is_none()), (0.0, 5, true));
        assert_eq!(score("[]", &[]).score, 1.0);
    }

    #[test]
    fn partial_credit() {
        let pred = r#"[{"name":"Ann Lee","specialization":"Urologist","city":"Graz"},
                       {"name":"Bo Tan","specialization":"Dentist","city":"Oslo"}]"#;
        let r = score(pred, &gold());
        assert!((r.score - (1.0 + 1.0 / 3.0) / 2.0).abs() < 1e-12);
        assert!((r.score - 0.6667).abs() < 1e-4);
        assert_eq!(r.per_entry[1].score, 1.0 / 3.0);
    }

    #[test]
    fn normalization_is_nfc_and_trim_only() {
        let g = vec![EntryRecord::new("Zoë", &[("city", "Malmö"), ("year", "1999")])];
        let decomposed = "[{\"name\":\"  Zoe\u{0308} \",\"city\":\"Malmo\u{0308}\",\"year\":1999}]";
        assert_eq!(score(decomposed, &g).score, 1.0);
        let cased = r#"[{"name":"Zoë","city":"malmö","year":"1999"}]"#;
        assert!((score(cased, &g).score - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn shapes() {
        let wrapped = format!("{{\"doctors\": {}}}", as_json(&gold()));
        assert_eq!(score(&wrapped, &gold()).score, 1.0);
        let fenced = format!("```json\n{}\n```", as_json(&gold()));
        assert_eq!(score(&fenced, &gold()).score, 1.0);
        let single = serde_json::to_string(&gold()[0]).unwrap();
        assert_eq!(score(&single, &gold()).score, 0.5);
        for bad in ["{not json", "42", r#"{"a":[1],"b":[2]}"#] {
            let r = score(bad, &gold());
            assert_eq!(r.score, 0.0);
            assert!(r.parse_error.is_some(), "{bad}");
            assert_eq!(r.false_negatives, 2);
        }
    }

    #[test]
    fn duplicates_and_spurious() {
        let g = gold();
        let mut pred: Vec<Value> = g.iter().map(|r| serde_json::to_value(r).unwrap()).collect();
        pred.push(serde_json::json!({"name": "Ann Lee", "city": "nowhere"}));
        pred.push(serde_json::json!({"name": "Nobody"}));
        pred.push(serde_json::json!(17));
        let r = score(&Value::Array(pred).to_string(), &g);
        assert_eq!((r.matched, r.false_positives, r.false_negatives), (2, 3, 0));
        assert!((r.score - 2.0 / 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn order_invariant(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let g = gold();
            let pool = vec![
                serde_json::json!({"name": "Ann Lee", "specialization": "Urologist", "city": "Graz"}),
                serde_json::json!({"name": "Ann Lee", "city": "Graz"}),
                serde_json::json!({"name": "Bo Tan", "city": "Split"}),
                serde_json::json!({"name": "Bo Tan", "specialization": "Allergist", "city": "Split"}),
                serde_json::json!({"name": "Cy"}),
                serde_json::json!({"city": "Graz"}),
            ];
            let base = score(&Value::Array(pool.clone()).to_string(), &g);
            let shuffled: Vec<Value> = perm.iter().map(|&i| pool[i].clone()).collect();
            prop_assert_eq!(score(&Value::Array(shuffled).to_string(), &g), base);
        }
    }
}
