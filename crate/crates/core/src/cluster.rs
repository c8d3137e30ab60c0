//! Cluster expansion of the polymer gas.
//!
//! `log W(sigma') = sum_p 1/p! sum_{(N_1..N_p)} C(N_1..N_p) prod w_{N_i}`, with the
//! Ursell coefficient `C` vanishing unless the overlap graph of the tuple is
//! connected. Tuples are grouped into connected sets of distinct polymers with
//! multiplicities; an ordered tuple with multiplicities `m_i` occurs
//! `p!/prod m_i!` times, so each group carries the coefficient `C/prod m_i!`.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::esu::{for_each_connected, EsuLimits, VertexGraph};
use crate::exact::RenormalizedInteraction;
use crate::interaction::{mask_spin_product, Interaction};
use crate::kernel::Kernel;
use crate::lattice::{Blocking, SiteSet};
use crate::polymer::{
    decorated_weights, enumerate_polymers, DecoratedPolymer, Polymer, PolymerCaps,
};
use crate::ursell::{edge_index, UrsellCache};
use crate::walsh::{deposit_bits, fourier_coefficients};

/// Largest cluster length accepted anywhere.
pub const MAX_ORDER: usize = 6;

/// Most image sites a single local Fourier transform may span.
pub const MAX_LOCAL_IMAGE_SITES: usize = 24;

fn check_order(p: usize) -> Result<()> {
    if p == 0 {
        return domain("cluster order must be at least 1");
    }
    if p > MAX_ORDER {
        return Err(Error::CapExceeded {
            what: "cluster order",
            limit: MAX_ORDER,
            actual: p,
        });
    }
    Ok(())
}

/// Ursell coefficient of a tuple of polymer supports; two entries overlap when
/// they share an image site (every support overlaps itself).
pub fn ursell(supports: &[SiteSet]) -> Result<i64> {
    check_order(supports.len())?;
    let p = supports.len();
    let mut allowed = 0u32;
    for i in 0..p {
        for k in i + 1..p {
            if supports[i].intersects(&supports[k]) {
                allowed |= 1 << edge_index(i, k, p);
            }
        }
    }
    Ok(crate::ursell::ursell_direct(p, allowed))
}

/// One connected group of distinct polymers with multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTerm {
    /// `(polymer index, multiplicity)`, indices increasing.
    members: Vec<(usize, usize)>,
    order: usize,
    ursell: i64,
    coefficient: f64,
    support: u64,
}

impl ClusterTerm {
    pub fn members(&self) -> &[(usize, usize)] {
        &self.members
    }

    /// Cluster length `p = sum of multiplicities`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ursell(&self) -> i64 {
        self.ursell
    }

    /// `C / prod m_i!`.
    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn support_mask(&self) -> u64 {
        self.support
    }

    pub fn support(&self) -> SiteSet {
        SiteSet::from_mask(self.support)
    }

    #[inline]
    pub fn value(&self, polymers: &[Polymer], block_spins: u64) -> f64 {
        self.members.iter().fold(self.coefficient, |acc, &(i, m)| {
            acc * polymers[i].weight_at(block_spins).powi(m as i32)
        })
    }

    /// `sup_{sigma'} |value|` majorized factor by factor.
    pub fn sup_abs(&self, polymers: &[Polymer]) -> f64 {
        self.members
            .iter()
            .fold(self.coefficient.abs(), |acc, &(i, m)| {
                acc * polymers[i].sup_abs().powi(m as i32)
            })
    }

    fn max_member_support(&self, polymers: &[Polymer]) -> usize {
        self.members
            .iter()
            .map(|&(i, _)| polymers[i].support().len())
            .max()
            .unwrap_or(0)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Every multiplicity vector with entries `>= 1` and total `<= p_max`.
fn for_each_composition(k: usize, p_max: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(m: &mut Vec<usize>, k: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
        if m.len() == k {
            visit(m);
            return;
        }
        let still = k - m.len() - 1;
        for v in 1..=left - still {
            m.push(v);
            rec(m, k, left - v, visit);
            m.pop();
        }
    }
    if k <= p_max {
        rec(&mut Vec::with_capacity(k), k, p_max, visit);
    }
}

/// Truncated cluster expansion over a fixed polymer list.
#[derive(Clone, Debug)]
pub struct ClusterExpansion {
    polymers: Vec<Polymer>,
    terms: Vec<ClusterTerm>,
    p_max: usize,
}

impl ClusterExpansion {
    /// All clusters of length at most `p_max`.
    pub fn new(polymers: Vec<Polymer>, p_max: usize) -> Result<Self> {
        check_order(p_max)?;
        let masks: Vec<u64> = polymers.iter().map(Polymer::mask).collect();
        let n = masks.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for k in i + 1..n {
                if masks[i] & masks[k] != 0 {
                    adj[i].push(k);
                    adj[k].push(i);
                }
            }
        }
        let graph = VertexGraph {
            adjacency: &adj,
            masks: &masks,
        };
        let limits = EsuLimits {
            max_size: p_max,
            max_support: 64,
        };
        let cache = UrsellCache::default();
        let per_root: Vec<Vec<ClusterTerm>> = (0..n)
            .into_par_iter()
            .map(|root| {
                let mut out = Vec::new();
                let _ = for_each_connected(&graph, root, &limits, |subset, support| {
                    let mut sorted = subset.to_vec();
                    sorted.sort_unstable();
                    for_each_composition(sorted.len(), p_max, &mut |mult| {
                        let mut vertices = Vec::with_capacity(p_max);
                        for (&i, &m) in sorted.iter().zip(mult) {
                            vertices.extend(std::iter::repeat_n(i, m));
                        }
                        let p = vertices.len();
                        let mut allowed = 0u32;
                        for a in 0..p {
                            for b in a + 1..p {
                                if masks[vertices[a]] & masks[vertices[b]] != 0 {
                                    allowed |= 1 << edge_index(a, b, p);
                                }
                            }
                        }
                        let c = cache.get(p, allowed);
                        if c != 0 {
                            let denom: f64 = mult.iter().map(|&m| factorial(m)).product();
                            out.push(ClusterTerm {
                                members: sorted.iter().copied().zip(mult.iter().copied()).collect(),
                                order: p,
                                ursell: c,
                                coefficient: c as f64 / denom,
                                support,
                            });
                        }
                    });
                    ControlFlow::Continue(())
                });
                out.sort_by(|a, b| a.members.cmp(&b.members));
                out
            })
            .collect();
        Ok(Self {
            polymers,
            terms: per_root.into_iter().flatten().collect(),
            p_max,
        })
    }

    /// Expansion over the polymers of a model.
    pub fn for_model(
        j: &Interaction,
        kernel: &Kernel,
        blocking: &Blocking,
        caps: PolymerCaps,
        p_max: usize,
    ) -> Result<Self> {
        Self::new(enumerate_polymers(j, kernel, blocking, caps)?, p_max)
    }

    pub fn polymers(&self) -> &[Polymer] {
        &self.polymers
    }

    pub fn terms(&self) -> &[ClusterTerm] {
        &self.terms
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    /// Number of clusters of each length, index `p - 1`.
    pub fn term_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.p_max];
        for t in &self.terms {
            counts[t.order - 1] += 1;
        }
        counts
    }

    /// Truncated `log W(sigma')`.
    pub fn log_w(&self, block_spins: u64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.value(&self.polymers, block_spins))
            .sum()
    }

    /// Contribution of each cluster length to `log W(sigma')`, index `p - 1`.
    pub fn log_w_by_order(&self, block_spins: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.p_max];
        for t in &self.terms {
            out[t.order - 1] += t.value(&self.polymers, block_spins);
        }
        out
    }

    /// `J'(Z)` from local Fourier transforms over each cluster support.
    pub fn couplings(&self) -> Result<RenormalizedInteraction> {
        let mut by_support: BTreeMap<u64, Vec<&ClusterTerm>> = BTreeMap::new();
        for t in &self.terms {
            by_support.entry(t.support).or_default().push(t);
        }
        let mut entries: BTreeMap<SiteSet, f64> = BTreeMap::new();
        for (mask, terms) in by_support {
            let u = SiteSet::from_mask(mask);
            if u.len() > MAX_LOCAL_IMAGE_SITES {
                return Err(Error::CapExceeded {
                    what: "image sites under one cluster",
                    limit: MAX_LOCAL_IMAGE_SITES,
                    actual: u.len(),
                });
            }
            let table: Vec<f64> = (0..1usize << u.len())
                .map(|local| {
                    let global = deposit_bits(local, u.as_slice());
                    terms.iter().map(|t| t.value(&self.polymers, global)).sum()
                })
                .collect();
            for (local_z, c) in fourier_coefficients(&table).into_iter().enumerate() {
                if c != 0.0 {
                    let z = SiteSet::new(
                        u.iter()
                            .enumerate()
                            .filter(|(i, _)| local_z >> i & 1 == 1)
                            .map(|(_, y)| y),
                    );
                    *entries.entry(z).or_insert(0.0) += c;
                }
            }
        }
        Ok(RenormalizedInteraction::new(entries))
    }

    /// A cluster support containing `z`, if any was enumerated.
    pub fn support_witness(&self, z: &SiteSet) -> Option<SiteSet> {
        let zm = z.mask()?;
        self.terms
            .iter()
            .find(|t| t.support & zm == zm)
            .map(ClusterTerm::support)
    }

    /// `sum of clusters whose support meets the image mask `region`.
    pub fn touching(&self, region: u64, block_spins: u64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.support & region != 0)
            .map(|t| t.value(&self.polymers, block_spins))
            .sum()
    }

    /// Ratio of the polymer partition function restricted to polymers avoiding
    /// `region` to the unrestricted one.
    pub fn avoidance_ratio(&self, region: u64, block_spins: u64) -> f64 {
        (-self.touching(region, block_spins)).exp()
    }

    /// Avoidance exponent with polymers of support larger than `q` dropped and
    /// clusters longer than `kc` dropped.
    pub fn truncated_exponent(
        &self,
        region: u64,
        block_spins: u64,
        q: usize,
        kc: usize,
    ) -> Result<f64> {
        if q == 0 || kc == 0 {
            return domain("truncation parameters must be positive");
        }
        Ok(self
            .terms
            .iter()
            .filter(|t| {
                t.support & region != 0
                    && t.order <= kc
                    && t.max_member_support(&self.polymers) <= q
            })
            .map(|t| t.value(&self.polymers, block_spins))
            .sum())
    }

    /// `F(Q, Kc) = exp(-truncated exponent)`.
    pub fn truncated_f(&self, region: u64, block_spins: u64, q: usize, kc: usize) -> Result<f64> {
        Ok((-self.truncated_exponent(region, block_spins, q, kc)?).exp())
    }

    /// Majorant of `sum |cluster|` over clusters touching `region` whose
    /// support has more than `p` image sites.
    pub fn pinning_tail(&self, region: u64, p: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.support & region != 0 && t.support.count_ones() as usize > p)
            .map(|t| t.sup_abs(&self.polymers))
            .sum()
    }

    /// Image sites every evaluation of `touching(region, .)` may read.
    fn touching_reach(&self, region: u64) -> u64 {
        self.terms
            .iter()
            .filter(|t| t.support & region != 0)
            .fold(0, |m, t| m | t.support)
    }
}

/// Per-site Kotecky-Preiss sum.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KpSite {
    pub site: usize,
    pub sum: f64,
    pub passed: bool,
}

/// General-form check for one set `N`:
/// `sum_{N' overlapping N} sup|w_{N'}| M^{|N'|} <= |N| log M`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KpSpot {
    pub set: SiteSet,
    pub sum: f64,
    pub limit: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KpReport {
    pub weight_base: f64,
    pub limit: f64,
    pub sites: Vec<KpSite>,
    pub spots: Vec<KpSpot>,
    pub passed: bool,
}

fn check_base(m: f64) -> Result<()> {
    if !(m > 1.0) || !m.is_finite() {
        return domain(format!("weight base M must exceed 1, got {m}"));
    }
    Ok(())
}

/// Per-site sufficient form `sum_{N containing y} sup|w_N| M^{|N|} <= log M`, and
/// the general form on the supplied sets.
pub fn kp_check(
    polymers: &[Polymer],
    weight_base: f64,
    num_blocks: usize,
    spots: &[SiteSet],
) -> Result<KpReport> {
    check_base(weight_base)?;
    let limit = weight_base.ln();
    let mass: Vec<f64> = polymers
        .iter()
        .map(|p| p.sup_abs() * weight_base.powi(p.support().len() as i32))
        .collect();
    let sites: Vec<KpSite> = (0..num_blocks)
        .map(|y| {
            let sum: f64 = polymers
                .iter()
                .zip(&mass)
                .filter(|(p, _)| p.support().contains(y))
                .map(|(_, m)| m)
                .sum();
            KpSite {
                site: y,
                sum,
                passed: sum <= limit,
            }
        })
        .collect();
    let spots: Vec<KpSpot> = spots
        .iter()
        .map(|n| {
            let sum: f64 = polymers
                .iter()
                .zip(&mass)
                .filter(|(p, _)| p.support().intersects(n))
                .map(|(_, m)| m)
                .sum();
            let lim = n.len() as f64 * limit;
            KpSpot {
                set: n.clone(),
                sum,
                limit: lim,
                passed: sum <= lim,
            }
        })
        .collect();
    let passed = sites.iter().all(|s| s.passed) && spots.iter().all(|s| s.passed);
    Ok(KpReport {
        weight_base,
        limit,
        sites,
        spots,
        passed,
    })
}

/// `M^{|W|} (1 + log M)^{|W|}`.
pub fn jacobian_global_bound(weight_base: f64, w_len: usize) -> f64 {
    (weight_base * (1.0 + weight_base.ln())).powi(w_len as i32)
}

/// Expansion value of `dJ'(Z)/dJ(W)` with its split by the size of the
/// decoration support `R`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct JacobianEstimate {
    pub z: SiteSet,
    pub w: SiteSet,
    pub value: f64,
    pub bound: f64,
    /// Contributions with `|R| <= split`.
    pub case_small: f64,
    /// Contributions with `|R| > split`.
    pub case_large: f64,
    pub split: usize,
}

/// Polymers, clusters and the model needed to evaluate Jacobians by expansion.
pub struct ExpansionModel<'a> {
    j: &'a Interaction,
    kernel: &'a Kernel,
    blocking: &'a Blocking,
    caps: PolymerCaps,
    weight_base: f64,
    expansion: ClusterExpansion,
}

struct DecoratedTerm {
    decorated: DecoratedPolymer,
    /// Image sites the avoidance factor reads.
    reach: SiteSet,
    /// `w~_R(sigma') * exp(-touching)` over the local configurations on `reach`.
    table: Vec<f64>,
}

impl<'a> ExpansionModel<'a> {
    pub fn new(
        j: &'a Interaction,
        kernel: &'a Kernel,
        blocking: &'a Blocking,
        caps: PolymerCaps,
        p_max: usize,
        weight_base: f64,
    ) -> Result<Self> {
        check_base(weight_base)?;
        let expansion = ClusterExpansion::for_model(j, kernel, blocking, caps, p_max)?;
        Ok(Self {
            j,
            kernel,
            blocking,
            caps,
            weight_base,
            expansion,
        })
    }

    pub fn expansion(&self) -> &ClusterExpansion {
        &self.expansion
    }

    fn decorated_terms(&self, w: &SiteSet) -> Result<Vec<DecoratedTerm>> {
        let decorated = decorated_weights(self.j, self.kernel, self.blocking, w, self.caps)?;
        decorated
            .into_iter()
            .map(|d| {
                let domain_mask = d.domain_mask();
                let reach =
                    SiteSet::from_mask(domain_mask | self.expansion.touching_reach(domain_mask));
                if reach.len() > MAX_LOCAL_IMAGE_SITES {
                    return Err(Error::CapExceeded {
                        what: "image sites under one decorated term",
                        limit: MAX_LOCAL_IMAGE_SITES,
                        actual: reach.len(),
                    });
                }
                let table = (0..1usize << reach.len())
                    .map(|local| {
                        let global = deposit_bits(local, reach.as_slice());
                        d.weight_at(global) * self.expansion.avoidance_ratio(domain_mask, global)
                    })
                    .collect();
                Ok(DecoratedTerm {
                    decorated: d,
                    reach,
                    table,
                })
            })
            .collect()
    }

    /// `dJ'(Z)/dJ(W)` for every `Z` in `zs`; the split is `|W| P`.
    pub fn jacobians(
        &self,
        w: &SiteSet,
        zs: &[SiteSet],
        split: usize,
    ) -> Result<Vec<JacobianEstimate>> {
        let terms = self.decorated_terms(w)?;
        let bound = jacobian_global_bound(self.weight_base, w.len());
        zs.iter()
            .map(|z| {
                let zm = z
                    .mask()
                    .ok_or_else(|| Error::Domain(format!("image set {z} beyond 64 sites")))?;
                if z.iter().any(|y| y >= self.blocking.num_blocks()) {
                    return domain(format!("image set {z} outside the image window"));
                }
                let mut small = 0.0;
                let mut large = 0.0;
                for t in &terms {
                    let reach = t.reach.mask().expect("image index below 64");
                    if zm & !reach != 0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for (local, v) in t.table.iter().enumerate() {
                        acc += v * mask_spin_product(deposit_bits(local, t.reach.as_slice()), zm);
                    }
                    let c = acc / t.table.len() as f64;
                    if t.decorated.r().len() <= split {
                        small += c;
                    } else {
                        large += c;
                    }
                }
                Ok(JacobianEstimate {
                    z: z.clone(),
                    w: w.clone(),
                    value: small + large,
                    bound,
                    case_small: small,
                    case_large: large,
                    split,
                })
            })
            .collect()
    }

    pub fn jacobian(&self, z: &SiteSet, w: &SiteSet, split: usize) -> Result<JacobianEstimate> {
        Ok(self.jacobians(w, std::slice::from_ref(z), split)?.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ExactCaps, ExactEngine};
    use crate::lattice::Lattice;
    use crate::polymer::polymer_partition;

    fn set(v: &[usize]) -> SiteSet {
        SiteSet::new(v.iter().copied())
    }

    fn chain(n: usize, k: f64) -> (Interaction, Blocking) {
        let l = Lattice::new(vec![n]).unwrap();
        let j = Interaction::from_couplings(l.clone(), (0..n - 1).map(|i| (set(&[i, i + 1]), k)))
            .unwrap();
        (j, Blocking::new(l, vec![2]).unwrap())
    }

    fn saturated() -> PolymerCaps {
        PolymerCaps {
            max_links: 64,
            max_support: 64,
            guard: 10_000_000,
        }
    }

    /// Ordered tuples with repetition and the `1/p!` factor, as the formula is written.
    fn ordered_tuple_log_w(polymers: &[Polymer], p_max: usize, sp: u64) -> f64 {
        fn rec(polymers: &[Polymer], tuple: &mut Vec<usize>, p: usize, sp: u64, acc: &mut f64) {
            if tuple.len() == p {
                let supports: Vec<SiteSet> = tuple
                    .iter()
                    .map(|&i| polymers[i].support().clone())
                    .collect();
                let c = ursell(&supports).unwrap();
                if c != 0 {
                    let prod: f64 = tuple.iter().map(|&i| polymers[i].weight_at(sp)).product();
                    *acc += c as f64 * prod / factorial(p);
                }
                return;
            }
            for i in 0..polymers.len() {
                tuple.push(i);
                rec(polymers, tuple, p, sp, acc);
                tuple.pop();
            }
        }
        let mut total = 0.0;
        for p in 1..=p_max {
            rec(polymers, &mut Vec::new(), p, sp, &mut total);
        }
        total
    }

    #[test]
    fn ursell_examples() {
        assert_eq!(ursell(&[set(&[0])]).unwrap(), 1);
        assert_eq!(ursell(&[set(&[0]), set(&[0, 1])]).unwrap(), -1);
        assert_eq!(ursell(&[set(&[0]), set(&[1])]).unwrap(), 0);
        assert_eq!(ursell(&[set(&[0]), set(&[0]), set(&[0])]).unwrap(), 2);
        assert!(ursell(&vec![set(&[0]); 7]).is_err());
        assert!(ursell(&[]).is_err());
    }

    #[test]
    fn single_polymer_series() {
        let (j, b) = chain(2, 0.2);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let w = 0.2f64.cosh() - 1.0;
        for p_max in 1..=MAX_ORDER {
            let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), p_max).unwrap();
            let series: f64 = (1..=p_max)
                .map(|p| (-1f64).powi(p as i32 + 1) * w.powi(p as i32) / p as f64)
                .sum();
            assert!((e.log_w(0) - series).abs() < 1e-15);
        }
        let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), 6).unwrap();
        assert!((e.log_w(1) - 0.2f64.cosh().ln()).abs() < 1e-11);
    }

    #[test]
    fn grouped_terms_match_ordered_tuples() {
        let l = Lattice::new(vec![6]).unwrap();
        let b = Blocking::new(l.clone(), vec![2]).unwrap();
        let mut j =
            Interaction::from_couplings(l.clone(), (0..5).map(|i| (set(&[i, i + 1]), 0.15)))
                .unwrap();
        j.set(set(&[2]), 0.1).unwrap();
        let k = Kernel::decimation(&[2], &[1]).unwrap();
        let polymers = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        for p_max in 1..=3 {
            let e = ClusterExpansion::new(polymers.clone(), p_max).unwrap();
            for sp in 0..8 {
                let oracle = ordered_tuple_log_w(&polymers, p_max, sp);
                assert!(
                    (e.log_w(sp) - oracle).abs() < 1e-14,
                    "p_max {p_max} sp {sp}"
                );
            }
        }
    }

    #[test]
    fn four_site_chain_against_exact() {
        let (j, b) = chain(4, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let engine = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let logs = engine.log_partition_table().unwrap();
        let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), 4).unwrap();
        for (sp, lw) in logs.iter().enumerate() {
            assert!((e.log_w(sp as u64) - lw).abs() < 1e-6);
        }
        let jp = e.couplings().unwrap();
        assert!((jp.get(&set(&[0, 1])) - 0.5 * 0.2f64.cosh().ln()).abs() < 1e-6);
        for (z, v) in jp.iter() {
            if v.abs() > 0.0 {
                assert!(e.support_witness(z).is_some());
            }
        }
    }

    #[test]
    fn avoidance_against_packing_sums() {
        let (j, b) = chain(4, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), 6).unwrap();
        for y in [0b01u64, 0b10, 0b11] {
            for sp in 0..4 {
                let exact =
                    polymer_partition(e.polymers(), sp, y) / polymer_partition(e.polymers(), sp, 0);
                assert!((e.avoidance_ratio(y, sp) - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kp_examples() {
        let (j, b) = chain(2, 0.2);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        let r = kp_check(&ps, 2.0, 1, &[]).unwrap();
        assert!(r.passed);
        // one polymer on a single image site: |N| = 1
        assert!((r.sites[0].sum - (0.2f64.cosh() - 1.0) * 2.0).abs() < 1e-15);
        // 2 (cosh 0.6 - 1) < log 2 still passes; 2 (cosh 1 - 1) does not
        let (j, b) = chain(2, 0.6);
        let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        assert!(kp_check(&ps, 2.0, 1, &[]).unwrap().passed);
        let (j, b) = chain(2, 1.0);
        let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        assert!(!kp_check(&ps, 2.0, 1, &[]).unwrap().passed);
        assert!(kp_check(&[], 2.0, 3, &[set(&[0])]).unwrap().passed);
    }

    #[test]
    fn jacobian_against_exact() {
        let (j, b) = chain(4, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let engine = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let model = ExpansionModel::new(&j, &k, &b, saturated(), 6, 2.0).unwrap();
        let zs = [set(&[]), set(&[0]), set(&[1]), set(&[0, 1])];
        for w in [
            set(&[0]),
            set(&[1]),
            set(&[0, 1]),
            set(&[1, 2]),
            set(&[0, 3]),
        ] {
            for est in model.jacobians(&w, &zs, 2).unwrap() {
                let exact = engine.jacobian_exact(&est.z, &w).unwrap();
                assert!(
                    (est.value - exact).abs() < 1e-5,
                    "{} {}: {} vs {}",
                    est.z,
                    w,
                    est.value,
                    exact
                );
                assert!(est.value.abs() <= est.bound);
            }
        }
    }

    #[test]
    fn jacobian_free_decimation_pattern() {
        let (_, b) = chain(4, 0.0);
        let zero = Interaction::zero(b.lattice().clone());
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let model = ExpansionModel::new(&zero, &k, &b, saturated(), 4, 2.0).unwrap();
        assert_eq!(
            model.jacobian(&set(&[1]), &set(&[2]), 1).unwrap().value,
            1.0
        );
        assert_eq!(
            model.jacobian(&set(&[0]), &set(&[2]), 1).unwrap().value,
            0.0
        );
        assert_eq!(
            model.jacobian(&set(&[1]), &set(&[3]), 1).unwrap().value,
            0.0
        );
    }

    #[test]
    fn truncation_limits() {
        let (j, b) = chain(8, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), 6).unwrap();
        let region = 0b0001;
        let smallest = e
            .polymers()
            .iter()
            .map(|p| p.support().len())
            .min()
            .unwrap();
        if smallest > 1 {
            assert_eq!(e.truncated_f(region, 0, smallest - 1, 6).unwrap(), 1.0);
        }
        for sp in 0..16 {
            let full = e.truncated_f(region, sp, 64, 6).unwrap();
            assert!((full - e.avoidance_ratio(region, sp)).abs() < 1e-15);
            // orders 2 and 3 carry opposite signs, so the gap only shrinks from Kc = 2 on
            let mut prev = f64::INFINITY;
            for kc in 2..=6 {
                let gap = (full - e.truncated_f(region, sp, 64, kc).unwrap()).abs();
                assert!(gap <= prev + 1e-18, "sp {sp} kc {kc}: {gap} after {prev}");
                prev = gap;
            }
        }
    }

    #[test]
    fn compositions_count() {
        let mut n = 0;
        for_each_composition(3, 6, &mut |m| {
            assert!(m.iter().sum::<usize>() <= 6);
            n += 1;
        });
        // multisets of size <= 6 over 3 labels using each label: C(6,3)
        assert_eq!(n, 20);
    }
}
