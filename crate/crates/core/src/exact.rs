//! Ground truth by exhaustive enumeration of the original spins.
//!
//! `W(sigma') = 2^{-|L|} sum_sigma prod_y T(sigma_y, sigma'_y) exp(sum_X J(X) sigma_X)`
//! is computed for every block-spin configuration at once; the renormalized
//! couplings are its logarithm's Fourier coefficients, and the Jacobian is the
//! Fourier transform of the constrained averages of `sigma_W`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use crate::error::{domain, Error, Result};
use crate::interaction::{mask_spin_product, Direction, Interaction};
use crate::kernel::Kernel;
use crate::lattice::{Blocking, SiteSet};
use crate::reduce::{add_into, tree_reduce};
use crate::walsh::{extract_bits, fourier_coefficients};

/// Size limits for brute-force enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactCaps {
    /// Largest original window that is enumerated.
    pub max_sites: usize,
    /// Largest image window for the full Fourier transform.
    pub max_image_sites: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        Self {
            max_sites: 24,
            max_image_sites: 20,
        }
    }
}

/// `J'(Z)` for image subsets `Z`, including the constant `J'(empty)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RenormalizedInteraction {
    entries: BTreeMap<SiteSet, f64>,
}

impl RenormalizedInteraction {
    pub fn new(entries: BTreeMap<SiteSet, f64>) -> Self {
        Self { entries }
    }

    /// Dense coefficients indexed by the bit encoding of `Z`.
    pub fn from_dense(coefficients: &[f64]) -> Self {
        Self {
            entries: coefficients
                .iter()
                .enumerate()
                .map(|(z, &v)| (SiteSet::from_mask(z as u64), v))
                .collect(),
        }
    }

    pub fn get(&self, z: &SiteSet) -> f64 {
        self.entries.get(z).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, z: &SiteSet) -> bool {
        self.entries.contains_key(z)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SiteSet, f64)> {
        self.entries.iter().map(|(z, &v)| (z, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum_Z J'(Z) sigma'_Z` at a bit-encoded block-spin configuration.
    pub fn log_weight(&self, block_spins: u64) -> f64 {
        self.entries
            .iter()
            .map(|(z, v)| {
                v * mask_spin_product(block_spins, z.mask().expect("image index below 64"))
            })
            .sum()
    }
}

/// Sparse table of `dJ'(Z)/dJ(W)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JacobianTable {
    entries: BTreeMap<(SiteSet, SiteSet), f64>,
    w_supports: BTreeSet<SiteSet>,
}

impl JacobianTable {
    pub fn insert(&mut self, z: SiteSet, w: SiteSet, value: f64) {
        self.w_supports.insert(w.clone());
        self.entries.insert((z, w), value);
    }

    pub fn get(&self, z: &SiteSet, w: &SiteSet) -> Option<f64> {
        self.entries.get(&(z.clone(), w.clone())).copied()
    }

    /// Rows `(Z, W, value)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&SiteSet, &SiteSet, f64)> {
        self.entries.iter().map(|((z, w), &v)| (z, w, v))
    }

    pub fn w_supports(&self) -> &BTreeSet<SiteSet> {
        &self.w_supports
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Brute-force engine bound to one model.
pub struct ExactEngine<'a> {
    blocking: &'a Blocking,
    kernel: &'a Kernel,
    links: Vec<(u64, f64)>,
    block_masks: Vec<Vec<usize>>,
    n_sites: usize,
    n_blocks: usize,
}

impl<'a> ExactEngine<'a> {
    pub fn new(
        j: &Interaction,
        kernel: &'a Kernel,
        blocking: &'a Blocking,
        caps: ExactCaps,
    ) -> Result<Self> {
        check_model(j, kernel, blocking)?;
        let n_sites = blocking.lattice().num_sites();
        let n_blocks = blocking.num_blocks();
        if n_sites > caps.max_sites.min(62) {
            return Err(Error::CapExceeded {
                what: "sites in the enumerated window",
                limit: caps.max_sites.min(62),
                actual: n_sites,
            });
        }
        if n_blocks > caps.max_image_sites.min(30) {
            return Err(Error::CapExceeded {
                what: "sites in the image window",
                limit: caps.max_image_sites.min(30),
                actual: n_blocks,
            });
        }
        let links = j
            .iter()
            .map(|(x, v)| (x.mask().expect("window below 64 sites"), v))
            .collect();
        let block_masks = (0..n_blocks)
            .map(|y| blocking.block_sites(y).to_vec())
            .collect();
        Ok(Self {
            blocking,
            kernel,
            links,
            block_masks,
            n_sites,
            n_blocks,
        })
    }

    pub fn blocking(&self) -> &Blocking {
        self.blocking
    }

    /// Unnormalized sums over `sigma in range`: slot 0 holds the partition
    /// weights, slot `1 + k` the weights times `sigma_{W_k}`; each slot has
    /// one entry per block-spin configuration.
    fn accumulate_range(&self, range: Range<u64>, insertions: &[u64]) -> Vec<f64> {
        let nb = 1usize << self.n_blocks;
        let mut acc = vec![0.0; nb * (1 + insertions.len())];
        let mut rows = vec![[0.0f64; 2]; self.n_blocks];
        let mut stack: Vec<(usize, u64, f64)> = Vec::with_capacity(2 * self.n_blocks + 2);
        for sigma in range {
            let energy: f64 = self
                .links
                .iter()
                .map(|&(m, v)| v * mask_spin_product(sigma, m))
                .sum();
            let boltzmann = energy.exp();
            for (y, sites) in self.block_masks.iter().enumerate() {
                rows[y] = self.kernel.row(extract_bits(sigma, sites));
            }
            // expand prod_y T(sigma_y, sigma'_y) over block spins, skipping zeros
            stack.clear();
            stack.push((0, 0, boltzmann));
            while let Some((y, prime, weight)) = stack.pop() {
                if y == self.n_blocks {
                    let p = prime as usize;
                    acc[p] += weight;
                    for (k, &w) in insertions.iter().enumerate() {
                        acc[(k + 1) * nb + p] += weight * mask_spin_product(sigma, w);
                    }
                    continue;
                }
                let [up, down] = rows[y];
                if down != 0.0 {
                    stack.push((y + 1, prime | 1 << y, weight * down));
                }
                if up != 0.0 {
                    stack.push((y + 1, prime, weight * up));
                }
            }
        }
        acc
    }

    fn accumulate(&self, insertions: &[u64]) -> Vec<f64> {
        let total = 1u64 << self.n_sites;
        let mut acc = tree_reduce(
            0..total,
            &|r| self.accumulate_range(r, insertions),
            &add_into,
        );
        let scale = (total as f64).recip();
        for v in &mut acc {
            *v *= scale;
        }
        acc
    }

    fn check_positive(table: &[f64]) -> Result<()> {
        for (p, &v) in table.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositivePartition {
                    block_spins: p as u64,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// `W(sigma')` for every bit-encoded block-spin configuration.
    pub fn frozen_partition_table(&self) -> Result<Vec<f64>> {
        let table = self.accumulate(&[]);
        Self::check_positive(&table)?;
        Ok(table)
    }

    pub fn frozen_partition(&self, block_spins: u64) -> Result<f64> {
        if block_spins >> self.n_blocks != 0 {
            return domain(format!(
                "block-spin configuration {block_spins:#b} leaves the image window"
            ));
        }
        Ok(self.frozen_partition_table()?[block_spins as usize])
    }

    pub fn log_partition_table(&self) -> Result<Vec<f64>> {
        Ok(self
            .frozen_partition_table()?
            .into_iter()
            .map(f64::ln)
            .collect())
    }

    /// All `2^{|L'|}` coefficients `J'(Z)`.
    pub fn renormalized_couplings(&self) -> Result<RenormalizedInteraction> {
        Ok(RenormalizedInteraction::from_dense(&fourier_coefficients(
            &self.log_partition_table()?,
        )))
    }

    fn check_w(&self, w: &SiteSet) -> Result<u64> {
        if !self.blocking.lattice().contains_all(w) {
            return domain(format!("insertion set {w} leaves the window"));
        }
        Ok(w.mask().expect("window below 64 sites"))
    }

    fn check_z(&self, z: &SiteSet) -> Result<u64> {
        if !self.blocking.image().contains_all(z) {
            return domain(format!("image set {z} leaves the image window"));
        }
        Ok(z.mask().expect("image below 64 sites"))
    }

    /// Constrained averages `<sigma_W>_{sigma'}` for each insertion set, one
    /// table per set, each indexed by the block-spin configuration.
    pub fn constrained_averages(&self, ws: &[SiteSet]) -> Result<Vec<Vec<f64>>> {
        let masks = ws
            .iter()
            .map(|w| self.check_w(w))
            .collect::<Result<Vec<_>>>()?;
        let acc = self.accumulate(&masks);
        let nb = 1usize << self.n_blocks;
        let (partition, numerators) = acc.split_at(nb);
        Self::check_positive(partition)?;
        Ok(numerators
            .chunks_exact(nb)
            .map(|num| num.iter().zip(partition).map(|(n, d)| n / d).collect())
            .collect())
    }

    /// `dJ'(Z)/dJ(W) = sum_{sigma'} sigma'_Z <sigma_W>_{sigma'}` (normalized sum).
    pub fn jacobian_exact(&self, z: &SiteSet, w: &SiteSet) -> Result<f64> {
        let zm = self.check_z(z)?;
        let ratio = self
            .constrained_averages(std::slice::from_ref(w))?
            .remove(0);
        Ok(crate::walsh::fourier_coefficient(&ratio, zm))
    }

    /// Jacobian entries for every `W` in `ws` and every image set `Z` with
    /// `|Z| <= max_z_len`.
    pub fn jacobian_table(&self, ws: &[SiteSet], max_z_len: usize) -> Result<JacobianTable> {
        let averages = self.constrained_averages(ws)?;
        let mut table = JacobianTable::default();
        for (w, ratio) in ws.iter().zip(averages) {
            let coeffs = fourier_coefficients(&ratio);
            for (zm, v) in coeffs.into_iter().enumerate() {
                if (zm as u64).count_ones() as usize <= max_z_len {
                    table.insert(SiteSet::from_mask(zm as u64), w.clone(), v);
                }
            }
        }
        Ok(table)
    }
}

pub(crate) fn check_model(j: &Interaction, kernel: &Kernel, blocking: &Blocking) -> Result<()> {
    if j.lattice() != blocking.lattice() {
        return domain("interaction and blocking live on different windows");
    }
    if kernel.block_size() != blocking.block_size() {
        return domain(format!(
            "kernel block cardinality {} differs from blocking cardinality {}",
            kernel.block_size(),
            blocking.block_size()
        ));
    }
    Ok(())
}

/// Central difference `[J'_{J + h d_W}(Z) - J'_{J - h d_W}(Z)] / 2h`.
pub fn jacobian_fd(
    j: &Interaction,
    kernel: &Kernel,
    blocking: &Blocking,
    z: &SiteSet,
    w: &SiteSet,
    step: f64,
    caps: ExactCaps,
) -> Result<f64> {
    if !(step > 0.0) {
        return domain(format!(
            "finite-difference step must be positive, got {step}"
        ));
    }
    if !blocking.image().contains_all(z) {
        return domain(format!("image set {z} leaves the image window"));
    }
    let zm = z.mask().expect("image below 64 sites");
    let shifted = |h: f64| -> Result<f64> {
        let mut jj = j.clone();
        jj.add(w.clone(), h)?;
        let logw = ExactEngine::new(&jj, kernel, blocking, caps)?.log_partition_table()?;
        Ok(crate::walsh::fourier_coefficient(&logw, zm))
    };
    Ok((shifted(step)? - shifted(-step)?) / (2.0 * step))
}

/// `L(J)K(Z) = sum_W dJ'(Z)/dJ(W) K(W)`.
pub fn apply_linearization(
    jacobian: &JacobianTable,
    direction: &Direction,
    z: &SiteSet,
) -> Result<f64> {
    let mut total = 0.0;
    for (w, k) in direction.iter() {
        let entry = jacobian.get(z, w).ok_or_else(|| Error::MissingJacobian {
            z: z.as_slice().to_vec(),
            w: w.as_slice().to_vec(),
        })?;
        total += entry * k;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn set(v: &[usize]) -> SiteSet {
        SiteSet::new(v.iter().copied())
    }

    fn chain_model(n: usize, k: f64) -> (Interaction, Blocking) {
        let l = Lattice::new(vec![n]).unwrap();
        let j = Interaction::from_couplings(l.clone(), (0..n - 1).map(|i| (set(&[i, i + 1]), k)))
            .unwrap();
        (j, Blocking::new(l, vec![2]).unwrap())
    }

    #[test]
    fn zero_interaction_gives_unit_partition() {
        let (_, b) = chain_model(6, 0.0);
        let j = Interaction::zero(b.lattice().clone());
        for k in [
            Kernel::decimation(&[2], &[1]).unwrap(),
            Kernel::constant(2).unwrap(),
        ] {
            let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
            assert!(e
                .frozen_partition_table()
                .unwrap()
                .iter()
                .all(|&w| w == 1.0));
            assert!(e
                .renormalized_couplings()
                .unwrap()
                .iter()
                .all(|(_, v)| v == 0.0));
        }
    }

    #[test]
    fn single_block_bond() {
        // brute force over the 4 configurations of one block: W = cosh K
        let (j, b) = chain_model(2, 0.2);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let brute = |sp: f64| -> f64 {
            let mut s = 0.0;
            for s0 in [1.0, -1.0] {
                for s1 in [1.0, -1.0] {
                    s += (1.0 + sp * s0) * (0.2 * s0 * s1).exp();
                }
            }
            s / 4.0
        };
        let w = e.frozen_partition_table().unwrap();
        assert!((w[0] - brute(1.0)).abs() < 1e-15);
        assert!((w[1] - brute(-1.0)).abs() < 1e-15);
        assert!((w[0] - 0.2f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn four_site_chain_closed_form() {
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        for kk in [0.05, 0.1, 0.2, 0.4] {
            let (j, b) = chain_model(4, kk);
            let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
            let w = e.frozen_partition_table().unwrap();
            for p in 0..4u64 {
                let (s1, s2) = (1.0 - 2.0 * (p & 1) as f64, 1.0 - 2.0 * (p >> 1 & 1) as f64);
                let expected = kk.cosh() * (kk * (s1 + s2)).cosh();
                assert!((w[p as usize] - expected).abs() < 1e-14);
            }
        }
        let (j, b) = chain_model(4, 0.2);
        let jp = ExactEngine::new(&j, &k, &b, ExactCaps::default())
            .unwrap()
            .renormalized_couplings()
            .unwrap();
        // 1/2 log cosh 0.4 and log cosh 0.2 + 1/2 log cosh 0.4
        assert!((jp.get(&set(&[0, 1])) - 0.038_976_742_693_916).abs() < 1e-13);
        assert!((jp.get(&SiteSet::empty()) - 0.058_844_814_533_924).abs() < 1e-13);
        assert!(jp.get(&set(&[0])).abs() < 1e-15);
        assert!(jp.get(&set(&[1])).abs() < 1e-15);
    }

    #[test]
    fn fourier_inversion() {
        let (mut j, b) = chain_model(6, 0.15);
        j.set(set(&[2]), 0.07).unwrap();
        let k = Kernel::decimation(&[2], &[1]).unwrap();
        let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let logw = e.log_partition_table().unwrap();
        let jp = e.renormalized_couplings().unwrap();
        for (p, lw) in logw.iter().enumerate() {
            assert!((jp.log_weight(p as u64) - lw).abs() < 1e-12);
        }
    }

    #[test]
    fn caps_refuse() {
        let (j, b) = chain_model(8, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let caps = ExactCaps {
            max_sites: 6,
            max_image_sites: 20,
        };
        assert!(matches!(
            ExactEngine::new(&j, &k, &b, caps),
            Err(Error::CapExceeded { .. })
        ));
        let caps = ExactCaps {
            max_sites: 24,
            max_image_sites: 3,
        };
        assert!(matches!(
            ExactEngine::new(&j, &k, &b, caps),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn mismatched_kernel_rejected() {
        let (j, b) = chain_model(6, 0.1);
        let k = Kernel::majority(3).unwrap();
        assert!(ExactEngine::new(&j, &k, &b, ExactCaps::default()).is_err());
    }

    #[test]
    fn infinite_temperature_jacobian() {
        // decimation: unit response at the distinguished site, zero elsewhere
        let (_, b) = chain_model(6, 0.0);
        let j = Interaction::zero(b.lattice().clone());
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        for y in 0..3 {
            assert!((e.jacobian_exact(&set(&[y]), &set(&[2 * y])).unwrap() - 1.0).abs() < 1e-15);
            assert!(
                e.jacobian_exact(&set(&[y]), &set(&[2 * y + 1]))
                    .unwrap()
                    .abs()
                    < 1e-15
            );
        }
        // majority on blocks of 3: response 1/2 to every site of the block
        let l = Lattice::new(vec![6]).unwrap();
        let b3 = Blocking::new(l.clone(), vec![3]).unwrap();
        let k3 = Kernel::majority(3).unwrap();
        let j = Interaction::zero(l);
        let e = ExactEngine::new(&j, &k3, &b3, ExactCaps::default()).unwrap();
        for x in 0..6 {
            let v = e.jacobian_exact(&set(&[x / 3]), &set(&[x])).unwrap();
            assert!((v - 0.5).abs() < 1e-15, "{x}: {v}");
        }
    }

    #[test]
    fn linearization_is_linear() {
        let (j, b) = chain_model(6, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let e = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let ws: Vec<SiteSet> = (0..6)
            .map(|i| set(&[i]))
            .chain((0..5).map(|i| set(&[i, i + 1])))
            .collect();
        let jac = e.jacobian_table(&ws, 2).unwrap();
        let l = b.lattice().clone();
        let k1 = Direction(
            Interaction::from_couplings(l.clone(), [(set(&[0]), 1.0), (set(&[2, 3]), 0.5)])
                .unwrap(),
        );
        assert_eq!(
            apply_linearization(&jac, &Direction(Interaction::zero(l.clone())), &set(&[0]))
                .unwrap(),
            0.0
        );
        let v = apply_linearization(&jac, &k1, &set(&[0])).unwrap();
        assert!(v.is_finite());
        let missing = Direction(Interaction::from_couplings(l, [(set(&[0, 5]), 1.0)]).unwrap());
        assert!(matches!(
            apply_linearization(&jac, &missing, &set(&[0])),
            Err(Error::MissingJacobian { .. })
        ));
    }
}
