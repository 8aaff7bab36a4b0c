use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::markdown;

/// Heading to body, in document order. Serialized as a JSON object whose key
/// order is the document order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectionMap(pub Vec<(String, String)>);

impl SectionMap {
    pub fn from_markdown(text: &str) -> Self {
        SectionMap(markdown::sections(text, 2).into_iter().map(|s| (s.heading, s.body)).collect())
    }

    pub fn get(&self, heading: &str) -> Option<&str> {
        self.0.iter().find(|(h, _)| h == heading).map(|(_, b)| b.as_str())
    }

    pub fn headings(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(h, _)| h.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (h, b) in &self.0 {
            out.push_str("## ");
            out.push_str(h);
            out.push('\n');
            out.push_str(b);
            out.push_str("\n\n");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

impl Serialize for SectionMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SectionMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = SectionMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of section headings to text")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<SectionMap, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                Ok(SectionMap(out))
            }
        }
        d.deserialize_map(V)
    }
}
