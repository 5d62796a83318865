use std::collections::HashMap;

use crate::error::{Error, Result};

/// Index reserved for values never seen while building the vocabulary.
pub const OOV: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSchema {
    pub name: String,
    pub index: usize,
    /// Vocabulary size including the out-of-vocabulary slot.
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FieldVocab {
    name: String,
    lookup: HashMap<String, usize>,
    /// `values[i - 1]` is the raw value of index `i`.
    values: Vec<String>,
}

/// Per-field value → index maps; index 0 is the OOV slot of every field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    fields: Vec<FieldVocab>,
}

impl Vocabulary {
    /// Assigns indices 1.. to values in order of first appearance.
    pub fn build(field_names: &[String], rows: &[Vec<String>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let f = field_names.len();
        let mut fields: Vec<FieldVocab> = field_names
            .iter()
            .map(|n| FieldVocab {
                name: n.clone(),
                lookup: HashMap::new(),
                values: Vec::new(),
            })
            .collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != f {
                return Err(Error::RaggedRow {
                    row: r + 1,
                    expected: f,
                    found: row.len(),
                });
            }
            for (fv, v) in fields.iter_mut().zip(row) {
                if !fv.lookup.contains_key(v) {
                    fv.values.push(v.clone());
                    fv.lookup.insert(v.clone(), fv.values.len());
                }
            }
        }
        Ok(Self { fields })
    }

    /// Rebuilds a vocabulary from `(field, value, index)` entries, as read
    /// back from a vocabulary file. Fields appear in order of first mention.
    pub fn from_entries(entries: &[(String, String, usize)]) -> Result<Self> {
        let mut fields: Vec<FieldVocab> = Vec::new();
        for (field, value, index) in entries {
            let pos = match fields.iter().position(|fv| &fv.name == field) {
                Some(p) => p,
                None => {
                    fields.push(FieldVocab {
                        name: field.clone(),
                        lookup: HashMap::new(),
                        values: Vec::new(),
                    });
                    fields.len() - 1
                }
            };
            let fv = &mut fields[pos];
            if *index != fv.values.len() + 1 || fv.lookup.contains_key(value) {
                return Err(Error::Data(format!(
                    "vocabulary entry {field}/{value:?}: index {index} out of sequence"
                )));
            }
            fv.values.push(value.clone());
            fv.lookup.insert(value.clone(), *index);
        }
        if fields.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { fields })
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn schema(&self) -> Vec<FieldSchema> {
        self.fields
            .iter()
            .enumerate()
            .map(|(i, fv)| FieldSchema {
                name: fv.name.clone(),
                index: i,
                cardinality: fv.values.len() + 1,
            })
            .collect()
    }

    pub fn field_names(&self) -> Vec<String> {
        self.fields.iter().map(|f| f.name.clone()).collect()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.fields.iter().map(|f| f.values.len() + 1).collect()
    }

    /// Index of `value` in `field`; unseen values map to [`OOV`].
    pub fn encode_value(&self, field: usize, value: &str) -> usize {
        self.fields[field].lookup.get(value).copied().unwrap_or(OOV)
    }

    pub fn encode_row(&self, row: &[String]) -> Result<Vec<usize>> {
        if row.len() != self.fields.len() {
            return Err(Error::Data(format!(
                "expected {} fields, got {}",
                self.fields.len(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(i, v)| self.encode_value(i, v))
            .collect())
    }

    pub fn decode(&self, field: usize, index: usize) -> Option<&str> {
        if index == OOV {
            return None;
        }
        self.fields
            .get(field)?
            .values
            .get(index - 1)
            .map(String::as_str)
    }

    /// `(field, value, index)` in field order then index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, usize)> {
        self.fields.iter().flat_map(|fv| {
            fv.values
                .iter()
                .enumerate()
                .map(move |(i, v)| (fv.name.as_str(), v.as_str(), i + 1))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn indices_start_at_one() {
        let rows = vec![s(&["A"]), s(&["B"]), s(&["A"])];
        let v = Vocabulary::build(&s(&["brand"]), &rows).unwrap();
        assert_eq!(v.encode_value(0, "A"), 1);
        assert_eq!(v.encode_value(0, "B"), 2);
        assert_eq!(v.schema()[0].cardinality, 3);
        assert_eq!(v.encode_value(0, "C"), OOV);
    }

    #[test]
    fn single_row_cardinality_two() {
        let v = Vocabulary::build(&s(&["a", "b"]), &[s(&["x", "y"])]).unwrap();
        assert_eq!(v.cardinalities(), vec![2, 2]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            Vocabulary::build(&s(&["a"]), &[]).unwrap_err().to_string(),
            "empty dataset"
        );
        let err = Vocabulary::build(&s(&["a", "b"]), &[s(&["x", "y"]), s(&["z"])]).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(values in prop::collection::vec("[a-e]{0,3}", 1..50)) {
            let rows: Vec<Vec<String>> = values.iter().map(|v| vec![v.clone()]).collect();
            let v = Vocabulary::build(&s(&["f"]), &rows).unwrap();
            for raw in &values {
                let idx = v.encode_value(0, raw);
                prop_assert!(idx >= 1);
                prop_assert_eq!(v.decode(0, idx), Some(raw.as_str()));
            }
            let entries: Vec<(String, String, usize)> = v
                .entries()
                .map(|(a, b, i)| (a.to_string(), b.to_string(), i))
                .collect();
            prop_assert_eq!(Vocabulary::from_entries(&entries).unwrap(), v);
        }
    }
}
