use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
const RESERVED: u32 = 3;

/// Character vocabulary. Ids are dense and assigned in first-seen order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    chars: Vec<char>,
    char_to_id: HashMap<char, u32>,
}

impl Vocabulary {
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut v = Self::default();
        for t in texts {
            for c in t.chars() {
                v.insert(c);
            }
        }
        v
    }

    fn insert(&mut self, c: char) {
        if !self.char_to_id.contains_key(&c) {
            let id = RESERVED + self.chars.len() as u32;
            self.chars.push(c);
            self.char_to_id.insert(c, id);
        }
    }

    /// Number of ids including the reserved ones.
    pub fn len(&self) -> usize {
        RESERVED as usize + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn id(&self, c: char) -> u32 {
        self.char_to_id.get(&c).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, s: &str) -> Vec<u32> {
        s.chars().map(|c| self.id(c)).collect()
    }

    /// All non-reserved characters in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = Self::default();
        for c in chars {
            v.insert(c);
        }
        v
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.chars.iter().collect::<String>())
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Self::from_chars(s.chars()))
    }
}
