//! Rule coalitions as bit masks.
//!
//! Rule indices are 1-based throughout (rule 1 is bit 0). The empty
//! coalition is valid: it is the no-rule baseline.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Hard cap on enumerable rule sets; 2^N models per sweep gets impractical
/// well before this.
pub const MAX_RULES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coalition {
    mask: u64,
    n: usize,
}

impl Coalition {
    pub fn empty(n: usize) -> Self {
        Self { mask: 0, n }
    }

    pub fn full(n: usize) -> Self {
        Self {
            mask: (1u64 << n) - 1,
            n,
        }
    }

    pub fn from_mask(mask: u64, n: usize) -> Result<Self> {
        if n > MAX_RULES {
            return Err(Error::TooManyRules { n, max: MAX_RULES });
        }
        if mask >> n != 0 {
            return Err(Error::RuleIndexOutOfRange {
                index: 64 - mask.leading_zeros() as usize,
                n_rules: n,
            });
        }
        Ok(Self { mask, n })
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn n_rules(&self) -> usize {
        self.n
    }

    /// Number of active rules.
    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, rule: usize) -> bool {
        rule >= 1 && rule <= self.n && self.mask & (1 << (rule - 1)) != 0
    }

    #[must_use]
    pub fn with(&self, rule: usize) -> Self {
        Self {
            mask: self.mask | (1 << (rule - 1)),
            n: self.n,
        }
    }

    #[must_use]
    pub fn without(&self, rule: usize) -> Self {
        Self {
            mask: self.mask & !(1 << (rule - 1)),
            n: self.n,
        }
    }

    /// Active rule indices, ascending, 1-based.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&i| self.contains(i))
    }
}

impl std::fmt::Display for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let ids: Vec<String> = self.members().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

fn check_rule_index(i: usize, n: usize) -> Result<()> {
    if n > MAX_RULES {
        return Err(Error::TooManyRules { n, max: MAX_RULES });
    }
    if i == 0 || i > n {
        return Err(Error::RuleIndexOutOfRange {
            index: i,
            n_rules: n,
        });
    }
    Ok(())
}

/// All 2^N coalitions in ascending mask order.
pub fn enumerate_coalitions(n: usize) -> Result<Vec<Coalition>> {
    if n > MAX_RULES {
        return Err(Error::TooManyRules { n, max: MAX_RULES });
    }
    Ok((0..1u64 << n).map(|mask| Coalition { mask, n }).collect())
}

/// The 2^(N-1) coalitions containing rule `i`, ascending.
pub fn coalitions_containing(i: usize, n: usize) -> Result<Vec<Coalition>> {
    check_rule_index(i, n)?;
    Ok((0..1u64 << n)
        .map(|mask| Coalition { mask, n })
        .filter(|c| c.contains(i))
        .collect())
}

/// Coalitions containing rule `i` plus exactly `r` other rules; there are
/// C(N-1, r) of them.
pub fn relying_groups(i: usize, n: usize, r: usize) -> Result<Vec<Coalition>> {
    check_rule_index(i, n)?;
    if r > n - 1 {
        return Err(Error::RelyingCountOutOfRange { r, n_rules: n });
    }
    Ok(coalitions_containing(i, n)?
        .into_iter()
        .filter(|c| c.size() == r + 1)
        .collect())
}

/// Binomial coefficient, small arguments only.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for j in 0..k {
        acc = acc * (n - j) as u64 / (j + 1) as u64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_coalitions(1).unwrap().len(), 2);
        assert_eq!(enumerate_coalitions(3).unwrap().len(), 8);
        assert_eq!(enumerate_coalitions(7).unwrap().len(), 128);
        assert!(enumerate_coalitions(21).is_err());
    }

    #[test]
    fn enumeration_is_ascending_and_distinct() {
        let all = enumerate_coalitions(4).unwrap();
        for w in all.windows(2) {
            assert!(w[0].mask() < w[1].mask());
        }
    }

    #[test]
    fn containing_counts() {
        assert_eq!(coalitions_containing(2, 5).unwrap().len(), 16);
        assert_eq!(coalitions_containing(1, 7).unwrap().len(), 64);
        assert!(coalitions_containing(0, 5).is_err());
        assert!(coalitions_containing(6, 5).is_err());
    }

    #[test]
    fn relying_group_counts() {
        // N=5, i=1, r=0: only the singleton {1}.
        let groups = relying_groups(1, 5, 0).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].mask(), 0b1);
        // N=7, i=1, r=5: C(6,5) = 6 coalitions.
        assert_eq!(relying_groups(1, 7, 5).unwrap().len(), 6);
        assert!(relying_groups(1, 5, 5).is_err());
    }

    #[test]
    fn relying_groups_partition_containing() {
        let n = 6;
        let i = 3;
        let mut seen = std::collections::BTreeSet::new();
        let mut total = 0;
        for r in 0..n {
            let g = relying_groups(i, n, r).unwrap();
            assert_eq!(g.len() as u64, binomial(n - 1, r));
            total += g.len();
            for c in g {
                assert!(seen.insert(c.mask()), "duplicate coalition across r");
            }
        }
        assert_eq!(total, 1 << (n - 1));
        let containing: std::collections::BTreeSet<u64> = coalitions_containing(i, n)
            .unwrap()
            .iter()
            .map(|c| c.mask())
            .collect();
        assert_eq!(seen, containing);
    }

    #[test]
    fn membership_ops() {
        let c = Coalition::from_mask(0b101, 3).unwrap();
        assert!(c.contains(1) && !c.contains(2) && c.contains(3));
        assert_eq!(c.without(3).mask(), 0b001);
        assert_eq!(c.with(2).mask(), 0b111);
        assert_eq!(c.size(), 2);
        assert_eq!(format!("{c}"), "{1,3}");
        assert!(Coalition::from_mask(0b1000, 3).is_err());
    }
}
