use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

/// Which estimate a [`BoundReport`] measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimateId {
    E1,
    Cet,
    Fk,
    M1,
    M2,
    M3,
    M5,
    M6,
    LpEnergy,
    /// Coarse-flow trajectory difference.
    TrajDiff,
}

impl EstimateId {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateId::E1 => "E1",
            EstimateId::Cet => "CET",
            EstimateId::Fk => "FK",
            EstimateId::M1 => "M1",
            EstimateId::M2 => "M2",
            EstimateId::M3 => "M3",
            EstimateId::M5 => "M5",
            EstimateId::M6 => "M6",
            EstimateId::LpEnergy => "LP-ENERGY",
            EstimateId::TrajDiff => "TRAJ-DIFF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let all = [
            EstimateId::E1,
            EstimateId::Cet,
            EstimateId::Fk,
            EstimateId::M1,
            EstimateId::M2,
            EstimateId::M3,
            EstimateId::M5,
            EstimateId::M6,
            EstimateId::LpEnergy,
            EstimateId::TrajDiff,
        ];
        all.into_iter().find(|e| e.name().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub alpha: f64,
    pub delta: f64,
    pub nu: f64,
    pub a: f64,
    pub m: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub k: i32,
    pub t: f64,
    pub lhs: f64,
    /// Right-hand side with the unspecified constant set to 1.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub id: EstimateId,
    pub params: BoundParams,
    pub rows: Vec<BoundRow>,
    /// Named scalar diagnostics (thresholds, norms, blow-up factors).
    pub notes: Vec<(String, f64)>,
}

impl BoundReport {
    pub fn new(id: EstimateId, params: BoundParams) -> Self {
        BoundReport { id, params, rows: Vec::new(), notes: Vec::new() }
    }

    /// Append a row; `0/0` counts as ratio 0.
    pub fn push(&mut self, k: i32, t: f64, lhs: f64, rhs: f64) {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        self.rows.push(BoundRow { k, t, lhs, rhs, ratio });
    }

    pub fn note(&mut self, key: &str, value: f64) {
        self.notes.push((key.into(), value));
    }

    pub fn note_value(&self, key: &str) -> Option<f64> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    /// Largest ratio for each `k`, in increasing `k`.
    pub fn per_k_max(&self) -> Vec<(i32, f64)> {
        let mut m: BTreeMap<i32, f64> = BTreeMap::new();
        for r in &self.rows {
            let e = m.entry(r.k).or_insert(0.0);
            *e = e.max(r.ratio);
        }
        m.into_iter().collect()
    }

    /// `ln(max/min)` of the positive per-`k` maxima; 0 with fewer than two.
    pub fn k_log_range(&self) -> f64 {
        let v: Vec<f64> = self.per_k_max().into_iter().map(|(_, r)| r).filter(|r| *r > 0.0).collect();
        if v.len() < 2 {
            return 0.0;
        }
        let hi = v.iter().cloned().fold(f64::MIN, f64::max);
        let lo = v.iter().cloned().fold(f64::MAX, f64::min);
        libm::log(hi / lo)
    }
}

/// `max/min` of the summary ratios of comparable reports (e.g. a ν sweep).
pub fn ratio_spread(reports: &[&BoundReport]) -> f64 {
    let v: Vec<f64> = reports.iter().map(|r| r.max_ratio()).collect();
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    if v.is_empty() || lo <= 0.0 {
        return f64::INFINITY;
    }
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summaries() {
        let p = BoundParams { alpha: 0.3, delta: 0.1, nu: 1e-3, a: 1.0, m: 0 };
        let mut r = BoundReport::new(EstimateId::Fk, p);
        r.push(3, 0.1, 2.0, 4.0);
        r.push(3, 0.2, 3.0, 4.0);
        r.push(4, 0.1, 0.0, 0.0);
        r.push(5, 0.1, 1.0, 10.0);
        assert_eq!(r.max_ratio(), 0.75);
        assert_eq!(r.per_k_max(), alloc::vec![(3, 0.75), (4, 0.0), (5, 0.1)]);
        assert!((r.k_log_range() - libm::log(7.5)).abs() < 1e-14);
        let mut q = r.clone();
        q.rows[1].ratio = 1.5;
        assert_eq!(ratio_spread(&[&r, &q]), 2.0);
        assert_eq!(EstimateId::parse("lp-energy"), Some(EstimateId::LpEnergy));
    }
}
