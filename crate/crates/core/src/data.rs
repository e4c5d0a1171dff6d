//! Observed cell counts for groups combining bilateral and unilateral subjects.

use crate::error::{Error, Result};

/// Per-group observed counts.
///
/// `m0`, `m1`, `m2` count bilateral subjects with 0/1/2 responses; `n0`, `n1`
/// count unilateral subjects with 0/1 responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupCounts {
    pub m0: u64,
    pub m1: u64,
    pub m2: u64,
    pub n0: u64,
    pub n1: u64,
}

impl GroupCounts {
    pub fn new(m0: u64, m1: u64, m2: u64, n0: u64, n1: u64) -> Self {
        Self { m0, m1, m2, n0, n1 }
    }

    /// Builds from possibly-negative raw values, rejecting negatives.
    ///
    /// `group` is the caller's group index, used only for error reporting.
    pub fn from_raw(group: usize, raw: [i64; 5]) -> Result<Self> {
        const FIELDS: [&str; 5] = ["m0", "m1", "m2", "n0", "n1"];
        for (field, &value) in FIELDS.iter().zip(raw.iter()) {
            if value < 0 {
                return Err(Error::NegativeCount {
                    group,
                    field,
                    value,
                });
            }
        }
        Ok(Self::new(
            raw[0] as u64,
            raw[1] as u64,
            raw[2] as u64,
            raw[3] as u64,
            raw[4] as u64,
        ))
    }

    /// Number of bilateral subjects in the group.
    pub fn m(&self) -> u64 {
        self.m0 + self.m1 + self.m2
    }

    /// Number of unilateral subjects in the group.
    pub fn n(&self) -> u64 {
        self.n0 + self.n1
    }

    pub(crate) fn as_array(&self) -> [f64; 5] {
        [
            self.m0 as f64,
            self.m1 as f64,
            self.m2 as f64,
            self.n0 as f64,
            self.n1 as f64,
        ]
    }
}

/// A validated study: an ordered collection of groups plus cached totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyData {
    groups: Vec<GroupCounts>,
    s0: u64,
    s1: u64,
    s2: u64,
    n0: u64,
    n1: u64,
}

impl StudyData {
    /// Validates the groups and caches the column totals.
    ///
    /// Fails with [`Error::EmptyStudy`] when no groups are given and
    /// [`Error::EmptyGroup`] when any group has no subjects at all.
    pub fn new(groups: Vec<GroupCounts>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptyStudy);
        }
        for (i, g) in groups.iter().enumerate() {
            if g.m() == 0 && g.n() == 0 {
                return Err(Error::EmptyGroup(i));
            }
        }
        let mut s = Self {
            groups,
            s0: 0,
            s1: 0,
            s2: 0,
            n0: 0,
            n1: 0,
        };
        for g in &s.groups {
            s.s0 += g.m0;
            s.s1 += g.m1;
            s.s2 += g.m2;
            s.n0 += g.n0;
            s.n1 += g.n1;
        }
        Ok(s)
    }

    pub fn groups(&self) -> &[GroupCounts] {
        &self.groups
    }

    /// Number of groups.
    pub fn g(&self) -> usize {
        self.groups.len()
    }

    /// Study-wide count of bilateral subjects with `t` responses, t = 0, 1, 2.
    pub fn s(&self, t: usize) -> u64 {
        match t {
            0 => self.s0,
            1 => self.s1,
            2 => self.s2,
            _ => panic!("bilateral response count index must be 0, 1, or 2"),
        }
    }

    /// Study-wide count of unilateral subjects with `t` responses, t = 0, 1.
    pub fn n_t(&self, t: usize) -> u64 {
        match t {
            0 => self.n0,
            1 => self.n1,
            _ => panic!("unilateral response count index must be 0 or 1"),
        }
    }

    /// Total bilateral subjects across groups.
    pub fn m_total(&self) -> u64 {
        self.s0 + self.s1 + self.s2
    }

    /// Total unilateral subjects across groups.
    pub fn n_total(&self) -> u64 {
        self.n0 + self.n1
    }

    /// Column sums over all groups, as a single pooled pseudo-group.
    pub fn pooled(&self) -> GroupCounts {
        GroupCounts::new(self.s0, self.s1, self.s2, self.n0, self.n1)
    }
}
