//! Bitset view of a feature matrix, used to search for small rules that
//! cover a given set of pairs.

use std::collections::{BTreeSet, HashMap};

use crate::features::{FeatureMatrix, FeaturePayload};
use crate::model::{AclPolicy, Rule, Sra};
use crate::tvl::TruthValue;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn is_subset(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }

    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

/// For each positive feature of a (subject type, resource type), the pairs
/// where it is exactly `T`.
pub(crate) struct Grid {
    entries: Vec<FeaturePayload>,
    true_on: Vec<Bits>,
    subject_index: HashMap<String, usize>,
    resource_index: HashMap<String, usize>,
    width: usize,
    len: usize,
}

/// Most features a generalized rule may combine.
const MAX_ATOMICS: usize = 3;
/// Above this many candidate features only pairs of features are tried.
const TRIPLE_CANDIDATE_LIMIT: usize = 24;

impl Grid {
    pub(crate) fn new(m: FeatureMatrix) -> Self {
        let len = m.pairs.len();
        let mut subject_index = HashMap::new();
        let mut resource_index = HashMap::new();
        for (s, r) in &m.pairs {
            let n = subject_index.len();
            subject_index.entry(s.clone()).or_insert(n);
            let n = resource_index.len();
            resource_index.entry(r.clone()).or_insert(n);
        }
        let width = resource_index.len();
        let true_on = (0..m.table.len())
            .map(|f| {
                let mut b = Bits::zeros(len);
                for (i, row) in m.rows.iter().enumerate() {
                    if row.0[f] == TruthValue::T {
                        b.set(i);
                    }
                }
                b
            })
            .collect();
        Grid { entries: m.table.entries, true_on, subject_index, resource_index, width, len }
    }

    fn index(&self, s: &str, r: &str) -> Option<usize> {
        Some(self.subject_index.get(s)? * self.width + self.resource_index.get(r)?)
    }

    fn bits_of<'a>(&self, pairs: impl IntoIterator<Item = &'a (String, String)>) -> Bits {
        let mut b = Bits::zeros(self.len);
        for (s, r) in pairs {
            if let Some(i) = self.index(s, r) {
                b.set(i);
            }
        }
        b
    }

    /// Pairs for which every action of `rule` is authorized.
    fn allowed(&self, acl: &AclPolicy, rule: &Rule) -> Bits {
        let mut b = Bits::zeros(self.len);
        for (s, &si) in &self.subject_index {
            for (r, &ri) in &self.resource_index {
                if rule.actions.iter().all(|a| acl.au.contains(&Sra::new(s, r, a))) {
                    b.set(si * self.width + ri);
                }
            }
        }
        b
    }

    /// The cheapest conjunction of at most [`MAX_ATOMICS`] features that is
    /// `T` on all of `covered` and nowhere outside the allowed pairs, with
    /// larger coverage breaking WSC ties. `None` if no such conjunction is
    /// cheaper than `bound`, or equally cheap and covering more.
    pub(crate) fn cheapest_cover(
        &self,
        acl: &AclPolicy,
        rule: &Rule,
        covered: &BTreeSet<(String, String)>,
        bound: (usize, u32),
    ) -> Option<Vec<FeaturePayload>> {
        let need = self.bits_of(covered);
        let allowed = self.allowed(acl, rule);
        let candidates: Vec<usize> = (0..self.entries.len()).filter(|&f| need.is_subset(&self.true_on[f])).collect();
        let wsc = |fs: &[usize]| fs.iter().map(|&f| self.entries[f].wsc()).sum::<usize>() + rule.actions.len();
        // (wsc, -coverage) ordering; smaller is better.
        let mut best: Option<(usize, i64, Vec<usize>)> = None;
        let mut consider = |fs: Vec<usize>, bits: &Bits| {
            if !bits.is_subset(&allowed) {
                return;
            }
            let key = (wsc(&fs), -i64::from(bits.count()));
            let beats_bound = key.0 < bound.0 || (key.0 == bound.0 && -key.1 > i64::from(bound.1));
            if beats_bound && best.as_ref().is_none_or(|(w, c, _)| key < (*w, *c)) {
                best = Some((key.0, key.1, fs));
            }
        };
        consider(vec![], &self.bits_of_all());
        for (i, &a) in candidates.iter().enumerate() {
            let ba = &self.true_on[a];
            consider(vec![a], ba);
            for (j, &b) in candidates.iter().enumerate().skip(i + 1) {
                let bab = ba.and(&self.true_on[b]);
                consider(vec![a, b], &bab);
                if MAX_ATOMICS >= 3 && candidates.len() <= TRIPLE_CANDIDATE_LIMIT {
                    for &c in &candidates[j + 1..] {
                        consider(vec![a, b, c], &bab.and(&self.true_on[c]));
                    }
                }
            }
        }
        best.map(|(_, _, fs)| fs.into_iter().map(|f| self.entries[f].clone()).collect())
    }

    fn bits_of_all(&self) -> Bits {
        let mut b = Bits::zeros(self.len);
        for i in 0..self.len {
            b.set(i);
        }
        b
    }
}
