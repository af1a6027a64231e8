use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Underestimation statistics for one join count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEntry {
    /// Proportion of heuristic estimates that undershoot.
    pub p: f64,
    /// Mean Q-error among the undershooting estimates.
    pub m: f64,
}

/// Running counts behind the online estimate of a [`BiasEntry`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OnlineBias {
    pub observed: u64,
    pub under: u64,
    pub under_qerror_sum: f64,
}

impl OnlineBias {
    pub fn entry(&self) -> BiasEntry {
        let p = if self.observed == 0 {
            0.0
        } else {
            self.under as f64 / self.observed as f64
        };
        let m = if self.under == 0 {
            1.0
        } else {
            self.under_qerror_sum / self.under as f64
        };
        BiasEntry { p, m }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasSource {
    Configured,
    Online,
}

/// Join-count-conditioned correction for heuristic underestimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub configured: BTreeMap<usize, BiasEntry>,
    #[serde(default)]
    pub online: BTreeMap<usize, OnlineBias>,
    /// Observations needed at a join count before online stats take over;
    /// `None` disables online updates.
    pub online_after: Option<u64>,
}

impl Default for BiasTable {
    fn default() -> Self {
        let rows = [(1, 0.57, 1.57), (2, 0.83, 20.20), (3, 0.93, 1361.38), (4, 0.98, 68655.97)];
        BiasTable {
            configured: rows
                .into_iter()
                .map(|(n, p, m)| (n, BiasEntry { p, m }))
                .collect(),
            online: BTreeMap::new(),
            online_after: Some(50),
        }
    }
}

impl BiasTable {
    /// A table with no correction at all.
    pub fn disabled() -> Self {
        BiasTable {
            configured: BTreeMap::new(),
            online: BTreeMap::new(),
            online_after: None,
        }
    }

    /// The entry in force for `n_join`, if any.
    pub fn lookup(&self, n_join: usize) -> Option<(BiasEntry, BiasSource)> {
        if let (Some(min), Some(o)) = (self.online_after, self.online.get(&n_join)) {
            if o.observed >= min {
                return Some((o.entry(), BiasSource::Online));
            }
        }
        self.configured
            .range(..=n_join)
            .next_back()
            .map(|(_, e)| (*e, BiasSource::Configured))
    }

    /// Records one (heuristic, truth) pair.
    pub fn record(&mut self, n_join: usize, heuristic: u64, truth: u64) {
        if self.online_after.is_none() {
            return;
        }
        let o = self.online.entry(n_join).or_default();
        o.observed += 1;
        let (h, t) = (heuristic.max(1), truth.max(1));
        if h < t {
            o.under += 1;
            o.under_qerror_sum += t as f64 / h as f64;
        }
    }
}

/// Multiplies `raw` by `m_n` when `u < p_n`.
pub fn bias_adjust(raw: f64, n_join: usize, bias: &BiasTable, u: f64) -> f64 {
    match bias.lookup(n_join) {
        Some((e, _)) if n_join > 0 && u < e.p => raw * e.m,
        _ => raw,
    }
}
