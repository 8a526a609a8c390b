//! The Universal Dependencies part-of-speech inventory and compact tag sets.

use std::fmt;
use std::str::FromStr;

use super::CorpusError;

/// One of the 17 Universal Dependencies POS tags.
///
/// Open classes come first, then closed classes, then the three "other"
/// classes. The declaration order is also the `Ord` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosTag {
    Adj,
    Adv,
    Intj,
    Noun,
    Propn,
    Verb,
    Adp,
    Aux,
    Cconj,
    Det,
    Num,
    Part,
    Pron,
    Sconj,
    Punct,
    Sym,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 17] = [
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Intj,
        PosTag::Noun,
        PosTag::Propn,
        PosTag::Verb,
        PosTag::Adp,
        PosTag::Aux,
        PosTag::Cconj,
        PosTag::Det,
        PosTag::Num,
        PosTag::Part,
        PosTag::Pron,
        PosTag::Sconj,
        PosTag::Punct,
        PosTag::Sym,
        PosTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Intj => "INTJ",
            PosTag::Noun => "NOUN",
            PosTag::Propn => "PROPN",
            PosTag::Verb => "VERB",
            PosTag::Adp => "ADP",
            PosTag::Aux => "AUX",
            PosTag::Cconj => "CCONJ",
            PosTag::Det => "DET",
            PosTag::Num => "NUM",
            PosTag::Part => "PART",
            PosTag::Pron => "PRON",
            PosTag::Sconj => "SCONJ",
            PosTag::Punct => "PUNCT",
            PosTag::Sym => "SYM",
            PosTag::X => "X",
        }
    }

    /// Whether the tag belongs to the six open word classes.
    pub fn is_open_class(self) -> bool {
        (self as u8) < 6
    }

    fn bit(self) -> u32 {
        1 << (self as u32)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownTag(s.to_string()))
    }
}

/// A set of POS tags, stored as a bitmask.
///
/// Iteration yields tags in `PosTag` declaration order. The textual form is
/// a comma-separated tag list, e.g. `NOUN,PROPN`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TagSet(u32);

impl TagSet {
    pub const fn empty() -> Self {
        TagSet(0)
    }

    pub fn all() -> Self {
        PosTag::ALL.iter().copied().collect()
    }

    pub fn insert(&mut self, tag: PosTag) {
        self.0 |= tag.bit();
    }

    pub fn contains(&self, tag: PosTag) -> bool {
        self.0 & tag.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(&self, other: &TagSet) -> TagSet {
        TagSet(self.0 | other.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = PosTag> + '_ {
        PosTag::ALL.iter().copied().filter(move |t| self.contains(*t))
    }
}

impl FromIterator<PosTag> for TagSet {
    fn from_iter<I: IntoIterator<Item = PosTag>>(iter: I) -> Self {
        let mut set = TagSet::empty();
        for tag in iter {
            set.insert(tag);
        }
        set
    }
}

impl<const N: usize> From<[PosTag; N]> for TagSet {
    fn from(tags: [PosTag; N]) -> Self {
        tags.into_iter().collect()
    }
}

impl fmt::Display for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(PosTag::as_str).collect();
        f.write_str(&names.join(","))
    }
}

impl fmt::Debug for TagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagSet({self})")
    }
}

impl FromStr for TagSet {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(PosTag::from_str)
            .collect()
    }
}
