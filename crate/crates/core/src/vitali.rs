//! Lᵖ convergence on lattices: the Vitali criterion (tail tightness plus
//! uniform absolute continuity) checked against the direct norm oracle, and
//! the norm-convergence-implies-convergence check.
//!
//! Everything works on finite sequence prefixes. A condition "passes" when
//! the prefix shows no sign of violating it; verdicts are empirical.

use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of nonzero cells for which the atom supremum of
/// condition (b) is computed exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub cell: u64,
    pub measure: f64,
    pub value: f64,
}

/// Finitely supported function on a lattice of cells; value 0 elsewhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatticeFunction {
    entries: Vec<Entry>,
}

impl LatticeFunction {
    /// Entries are sorted by cell id; ids must be unique, measures positive
    /// and values finite.
    pub fn new(mut entries: Vec<Entry>) -> Result<Self> {
        entries.sort_by_key(|e| e.cell);
        for w in entries.windows(2) {
            if w[0].cell == w[1].cell {
                return Err(Error::InvalidArgument(format!("duplicate cell {}", w[0].cell)));
            }
        }
        for e in &entries {
            if !(e.measure > 0.0 && e.measure.is_finite()) {
                return Err(Error::InvalidArgument(format!("cell {} has measure {}", e.cell, e.measure)));
            }
            if !e.value.is_finite() {
                return Err(Error::InvalidArgument(format!("cell {} has value {}", e.cell, e.value)));
            }
        }
        Ok(LatticeFunction { entries })
    }

    pub fn zero() -> Self {
        LatticeFunction::default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn value(&self, cell: u64) -> f64 {
        self.entries
            .binary_search_by_key(&cell, |e| e.cell)
            .map_or(0.0, |i| self.entries[i].value)
    }

    pub fn scale(&self, c: f64) -> LatticeFunction {
        LatticeFunction {
            entries: self.entries.iter().map(|e| Entry { value: c * e.value, ..*e }).collect(),
        }
    }

    /// `self - other`; shared cells must carry the same measure.
    pub fn sub(&self, other: &LatticeFunction) -> Result<LatticeFunction> {
        let mut map: BTreeMap<u64, Entry> = self.entries.iter().map(|e| (e.cell, *e)).collect();
        for e in &other.entries {
            match map.get_mut(&e.cell) {
                Some(x) => {
                    if x.measure != e.measure {
                        return Err(Error::InvalidArgument(format!(
                            "cell {} has measures {} and {}",
                            e.cell, x.measure, e.measure
                        )));
                    }
                    x.value -= e.value;
                }
                None => {
                    map.insert(e.cell, Entry { value: -e.value, ..*e });
                }
            }
        }
        Ok(LatticeFunction { entries: map.into_values().collect() })
    }

    /// `μ(cell) |value|^p` per entry.
    fn masses(&self, p: f64) -> Vec<(u64, f64, f64)> {
        self.entries.iter().map(|e| (e.cell, e.measure, e.measure * e.value.abs().powf(p))).collect()
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("L^p exponent {p} < 1")));
    }
    Ok(())
}

/// `(Σ μ_i |v_i|^p)^{1/p}`.
pub fn lp_norm(f: &LatticeFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(f.masses(p).iter().map(|m| m.2).sum::<f64>().powf(1.0 / p))
}

/// Smallest set of cells (by count, largest masses first) outside of which
/// `f` has `∫|f|^p < eps`.
fn tight_cells(f: &LatticeFunction, p: f64, eps: f64) -> Vec<(u64, f64)> {
    let mut masses = f.masses(p);
    masses.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut remaining: f64 = masses.iter().map(|m| m.2).sum();
    let mut out = Vec::new();
    for (cell, measure, mass) in masses {
        if remaining < eps {
            break;
        }
        out.push((cell, measure));
        remaining -= mass;
    }
    out
}

fn witness(seq: &[LatticeFunction], p: f64, eps: f64) -> BTreeMap<u64, f64> {
    seq.iter().flat_map(|f| tight_cells(f, p, eps)).collect()
}

fn outside_mass(f: &LatticeFunction, a: &BTreeMap<u64, f64>, p: f64) -> f64 {
    f.masses(p).iter().filter(|m| !a.contains_key(&m.0)).map(|m| m.2).sum()
}

/// Relative growth of `μ(A)` allowed when the prefix doubles.
pub const WITNESS_GROWTH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionA {
    pub passed: bool,
    /// Cells of the witness `A_ε` for the whole prefix.
    pub witness: Vec<u64>,
    pub witness_measure: f64,
    /// `μ(A_ε)` built from the first half of the prefix.
    pub half_prefix_measure: f64,
    /// Largest `∫_{X∖A} |f_m|^p` over the second half, with `A` built from the first half.
    pub worst_tail: f64,
}

/// Condition (a): a set of finite measure capturing all but `eps` of the
/// Lᵖ mass of every member. The witness is the union of each member's
/// tightest cell set; the prefix passes if the witness built from the first
/// half already captures the second half, or its measure stops growing.
pub fn check_condition_a(seq: &[LatticeFunction], p: f64, eps: f64) -> Result<ConditionA> {
    check_p(p)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} must be positive")));
    }
    let full = witness(seq, p, eps);
    let half = witness(&seq[..seq.len().div_ceil(2)], p, eps);
    let worst_tail = seq[seq.len().div_ceil(2)..]
        .iter()
        .map(|f| outside_mass(f, &half, p))
        .fold(0.0, f64::max);
    let witness_measure: f64 = full.values().sum();
    let half_prefix_measure: f64 = half.values().sum();
    let passed = worst_tail < eps || witness_measure <= (1.0 + WITNESS_GROWTH_TOLERANCE) * half_prefix_measure;
    Ok(ConditionA {
        passed,
        witness: full.into_keys().collect(),
        witness_measure,
        half_prefix_measure,
        worst_tail,
    })
}

/// `sup {∫_Y |f|^p : μ(Y) <= threshold}` with divisible cells: whole cells
/// by decreasing `|f|^p`, then a fraction of the next one.
pub fn greedy_supremum(f: &LatticeFunction, p: f64, threshold: f64) -> f64 {
    let mut cells: Vec<(f64, f64)> = f
        .entries
        .iter()
        .filter(|e| e.value != 0.0)
        .map(|e| (e.value.abs().powf(p), e.measure))
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut room = threshold;
    let mut acc = 0.0;
    for (density, measure) in cells {
        if room <= 0.0 {
            break;
        }
        let take = measure.min(room);
        acc += density * take;
        room -= take;
    }
    acc
}

/// Same supremum with cells as atoms. Exact by exhaustion up to
/// [`EXHAUSTIVE_LIMIT`] nonzero cells, otherwise a greedy lower bound; the
/// flag tells which.
pub fn atom_supremum(f: &LatticeFunction, p: f64, threshold: f64) -> (f64, bool) {
    let cells: Vec<(f64, f64)> = f
        .entries
        .iter()
        .filter(|e| e.value != 0.0)
        .map(|e| (e.measure * e.value.abs().powf(p), e.measure))
        .collect();
    if cells.len() <= EXHAUSTIVE_LIMIT {
        let mut best = 0.0f64;
        for mask in 0u32..(1 << cells.len()) {
            let (mut mass, mut measure) = (0.0, 0.0);
            for (i, c) in cells.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    mass += c.0;
                    measure += c.1;
                }
            }
            if measure <= threshold {
                best = best.max(mass);
            }
        }
        return (best, true);
    }
    let mut sorted = cells;
    sorted.sort_by(|a, b| (b.0 / b.1).total_cmp(&(a.0 / a.1)));
    let (mut mass, mut room) = (0.0, threshold);
    for (m, mu) in sorted {
        if mu <= room {
            mass += m;
            room -= mu;
        }
    }
    (mass, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionB {
    pub passed: bool,
    /// Largest divisible-cell supremum over the prefix.
    pub supremum: f64,
    /// Member attaining it.
    pub worst_member: usize,
    /// Largest atom supremum and whether every member's value is exact.
    pub atom_supremum: f64,
    pub atom_exact: bool,
}

/// Condition (b) at one threshold: every member's supremum must stay below `bound`.
pub fn check_condition_b(seq: &[LatticeFunction], p: f64, threshold: f64, bound: f64) -> Result<ConditionB> {
    check_p(p)?;
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("measure threshold {threshold} must be positive")));
    }
    let sups: Vec<(f64, (f64, bool))> = seq
        .par_iter()
        .map(|f| (greedy_supremum(f, p, threshold), atom_supremum(f, p, threshold)))
        .collect();
    let (worst_member, supremum) = sups
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.0))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(ConditionB {
        passed: supremum < bound,
        supremum,
        worst_member,
        atom_supremum: sups.iter().map(|s| s.1 .0).fold(0.0, f64::max),
        atom_exact: sups.iter().all(|s| s.1 .1),
    })
}

/// Absolute level below which a distance counts as zero.
pub const ZERO_TOLERANCE: f64 = 1e-6;

/// Whether a nonnegative series trends to zero on the prefix: its final
/// value is negligible, or it is nonincreasing over the second half and has
/// dropped by a quarter since the midpoint.
pub fn trends_to_zero(series: &[f64]) -> bool {
    let Some(&last) = series.last() else {
        return false;
    };
    if last < ZERO_TOLERANCE {
        return true;
    }
    let mid = series.len() / 2;
    let tail = &series[mid..];
    tail.windows(2).all(|w| w[1] <= w[0]) && last <= 0.75 * series[mid]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VitaliReport {
    pub condition_a: Vec<ConditionA>,
    pub condition_b: Vec<ConditionB>,
    pub a_passed: bool,
    pub b_passed: bool,
    /// `||f_m - f||_p` for each member.
    pub distances: Vec<f64>,
    pub oracle_converges: bool,
    /// First index from which the distances decrease strictly, if any.
    pub decreasing_from: Option<usize>,
    /// The criterion predicts convergence iff the oracle observes it.
    pub consistent: bool,
}

fn check_pointwise(seq: &[LatticeFunction], limit: &LatticeFunction, tol: f64) -> Result<()> {
    let last = seq.last().expect("nonempty");
    let mut cells: Vec<u64> = seq[..seq.len().div_ceil(2)]
        .iter()
        .flat_map(|f| f.entries.iter().map(|e| e.cell))
        .collect();
    cells.sort_unstable();
    cells.dedup();
    for cell in cells {
        let deviation = (last.value(cell) - limit.value(cell)).abs();
        if deviation > tol {
            return Err(Error::PointwiseConvergence { cell, deviation });
        }
    }
    Ok(())
}

/// Conditions (a) at every `eps_k` and (b) at every `(threshold_k, eps_k)`
/// pair, compared with the oracle `||f_m - f||_p`.
pub fn vitali_verdict(
    seq: &[LatticeFunction],
    limit: &LatticeFunction,
    p: f64,
    eps_schedule: &[f64],
    threshold_schedule: &[f64],
) -> Result<VitaliReport> {
    check_p(p)?;
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("Vitali verdict needs at least two members".into()));
    }
    if eps_schedule.is_empty() || eps_schedule.len() != threshold_schedule.len() {
        return Err(Error::InvalidArgument("epsilon and threshold schedules must pair up".into()));
    }
    check_pointwise(seq, limit, ZERO_TOLERANCE)?;
    let condition_a = eps_schedule.iter().map(|&e| check_condition_a(seq, p, e)).collect::<Result<Vec<_>>>()?;
    let condition_b = threshold_schedule
        .iter()
        .zip(eps_schedule)
        .map(|(&t, &e)| check_condition_b(seq, p, t, e))
        .collect::<Result<Vec<_>>>()?;
    let distances = seq
        .par_iter()
        .map(|f| lp_norm(&f.sub(limit)?, p))
        .collect::<Result<Vec<_>>>()?;
    let oracle_converges = trends_to_zero(&distances);
    let a_passed = condition_a.iter().all(|c| c.passed);
    let b_passed = condition_b.iter().all(|c| c.passed);
    let decreasing_from = (0..distances.len() - 1)
        .find(|&i| distances[i..].windows(2).all(|w| w[1] < w[0]));
    Ok(VitaliReport {
        consistent: (a_passed && b_passed) == oracle_converges,
        condition_a,
        condition_b,
        a_passed,
        b_passed,
        distances,
        oracle_converges,
        decreasing_from,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadonRieszReport {
    /// `| ||f_m||_p - ||f||_p |`.
    pub norm_gaps: Vec<f64>,
    /// `||f_m - f||_p`.
    pub distances: Vec<f64>,
    pub hypothesis_met: bool,
    pub conclusion_holds: bool,
    /// Pearson correlation of norm gaps and distances; `None` when either
    /// series is constant.
    pub correlation: Option<f64>,
    /// Vacuous when the hypothesis fails.
    pub passed: bool,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// On a pointwise convergent prefix, convergence of the norms should force
/// convergence in Lᵖ.
pub fn radon_riesz_check(seq: &[LatticeFunction], limit: &LatticeFunction, p: f64) -> Result<RadonRieszReport> {
    check_p(p)?;
    if seq.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let target = lp_norm(limit, p)?;
    let norm_gaps = seq.iter().map(|f| Ok((lp_norm(f, p)? - target).abs())).collect::<Result<Vec<_>>>()?;
    let distances = seq.iter().map(|f| lp_norm(&f.sub(limit)?, p)).collect::<Result<Vec<_>>>()?;
    let hypothesis_met = trends_to_zero(&norm_gaps);
    let conclusion_holds = trends_to_zero(&distances);
    Ok(RadonRieszReport {
        correlation: pearson(&norm_gaps, &distances),
        passed: !hypothesis_met || conclusion_holds,
        norm_gaps,
        distances,
        hypothesis_met,
        conclusion_holds,
    })
}

/// A sequence prefix with its pointwise limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub members: Vec<LatticeFunction>,
    pub limit: LatticeFunction,
}

fn single(cell: u64, measure: f64, value: f64) -> LatticeFunction {
    LatticeFunction::new(vec![Entry { cell, measure, value }]).expect("valid entry")
}

/// `f(k) = 2^{-k}` on unit cells `1..=cells`, `f_m = f 1_{k <= m}`.
pub fn truncation_family(len: usize, cells: u64) -> Family {
    let entry = |k: u64| Entry { cell: k, measure: 1.0, value: 0.5f64.powi(k as i32) };
    let limit = LatticeFunction::new((1..=cells).map(entry).collect()).expect("valid entries");
    let members = (1..=len as u64)
        .map(|m| LatticeFunction::new((1..=m.min(cells)).map(entry).collect()).expect("valid entries"))
        .collect();
    Family { name: "truncation".into(), members, limit }
}

/// `f_m = 1` on unit cell `m`, limit 0.
pub fn escaping_bump_family(len: usize) -> Family {
    let members = (1..=len as u64).map(|m| single(m, 1.0, 1.0)).collect();
    Family { name: "escaping_bump".into(), members, limit: LatticeFunction::zero() }
}

/// `f_m = m^{1/p}` on a cell of measure `1/m`, limit 0.
pub fn concentrating_spike_family(len: usize, p: f64) -> Family {
    let members = (1..=len as u64)
        .map(|m| single(m, 1.0 / m as f64, (m as f64).powf(1.0 / p)))
        .collect();
    Family { name: "concentrating_spike".into(), members, limit: LatticeFunction::zero() }
}

/// The three bundled families at prefix length `len`.
pub fn bundled_families(len: usize, p: f64) -> Vec<Family> {
    vec![truncation_family(len, 2 * len as u64), escaping_bump_family(len), concentrating_spike_family(len, p)]
}

/// Reads `cell,measure,value,member` rows (with header). `member` is a
/// nonnegative index or the word `limit`.
pub fn load_family_csv<R: BufRead>(input: R, name: &str) -> Result<Family> {
    let mut members: BTreeMap<usize, Vec<Entry>> = BTreeMap::new();
    let mut limit = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if n == 0 || line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::Format(format!("line {}: expected 4 columns", n + 1)));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", n + 1)));
        let cell = cols[0].parse::<u64>().map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
        let entry = Entry { cell, measure: parse(cols[1])?, value: parse(cols[2])? };
        if cols[3] == "limit" {
            limit.push(entry);
        } else {
            let m = cols[3].parse::<usize>().map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            members.entry(m).or_default().push(entry);
        }
    }
    let count = members.keys().next_back().map_or(0, |m| m + 1);
    let members = (0..count)
        .map(|m| LatticeFunction::new(members.remove(&m).unwrap_or_default()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Family { name: name.into(), members, limit: LatticeFunction::new(limit)? })
}
