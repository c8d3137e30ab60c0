//! Sparse interactions `J: X -> J(X)`, the weighted norm and Hamiltonian
//! evaluation.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::lattice::{diameter, Lattice, SiteSet};

/// Couplings with magnitude below this are not stored.
pub const COUPLING_FLOOR: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    lattice: Lattice,
    couplings: BTreeMap<SiteSet, f64>,
}

impl Interaction {
    /// The zero interaction on `lattice`.
    pub fn zero(lattice: Lattice) -> Self {
        Self {
            lattice,
            couplings: BTreeMap::new(),
        }
    }

    pub fn from_couplings(
        lattice: Lattice,
        couplings: impl IntoIterator<Item = (SiteSet, f64)>,
    ) -> Result<Self> {
        let mut j = Self::zero(lattice);
        for (x, v) in couplings {
            j.add(x, v)?;
        }
        Ok(j)
    }

    fn check_support(&self, x: &SiteSet) -> Result<()> {
        if x.is_empty() {
            return domain("the empty set carries no coupling");
        }
        if !self.lattice.contains_all(x) {
            return domain(format!("coupling support {x} leaves the window"));
        }
        Ok(())
    }

    /// Sets `J(x) = value`, removing the entry when the value is negligible.
    pub fn set(&mut self, x: SiteSet, value: f64) -> Result<()> {
        self.check_support(&x)?;
        if !value.is_finite() {
            return domain(format!("coupling on {x} is not finite"));
        }
        if value.abs() < COUPLING_FLOOR {
            self.couplings.remove(&x);
        } else {
            self.couplings.insert(x, value);
        }
        Ok(())
    }

    /// Adds `value` to `J(x)`.
    pub fn add(&mut self, x: SiteSet, value: f64) -> Result<()> {
        let current = self.get(&x);
        self.set(x, current + value)
    }

    pub fn get(&self, x: &SiteSet) -> f64 {
        self.couplings.get(x).copied().unwrap_or(0.0)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    /// Stored supports and couplings in canonical link order.
    pub fn iter(&self) -> impl Iterator<Item = (&SiteSet, f64)> {
        self.couplings.iter().map(|(x, &v)| (x, v))
    }

    pub fn supports(&self) -> impl Iterator<Item = &SiteSet> {
        self.couplings.keys()
    }

    /// Range `S`: largest diameter of a stored support (0 when empty).
    pub fn range(&self) -> usize {
        self.couplings
            .keys()
            .map(|x| diameter(&self.lattice, x).expect("stored supports are nonempty"))
            .max()
            .unwrap_or(0)
    }

    /// Body bound `D`: largest stored support cardinality (0 when empty).
    pub fn body_bound(&self) -> usize {
        self.couplings.keys().map(SiteSet::len).max().unwrap_or(0)
    }

    /// `sup_x sum_{X contains x} |J(X)| e^{r|X|}`.
    pub fn norm_r(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return domain(format!("norm parameter r must be positive, got {r}"));
        }
        let mut per_site = vec![0.0; self.lattice.num_sites()];
        for (x, v) in self.iter() {
            let term = v.abs() * (r * x.len() as f64).exp();
            for s in x.iter() {
                per_site[s] += term;
            }
        }
        Ok(per_site.into_iter().fold(0.0, f64::max))
    }

    /// `max |J(X)|`.
    pub fn sup_norm(&self) -> f64 {
        self.couplings.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_X J(X) sigma_X` for a full spin configuration.
    pub fn exponent(&self, spins: &[i8]) -> f64 {
        self.iter()
            .map(|(x, v)| v * f64::from(spin_product(spins, x)))
            .sum()
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &Interaction, b: f64) -> Result<Interaction> {
        if self.lattice != other.lattice {
            return domain("interactions live on different lattices");
        }
        let mut out = Interaction::zero(self.lattice.clone());
        for (x, v) in self.iter() {
            out.add(x.clone(), a * v)?;
        }
        for (x, v) in other.iter() {
            out.add(x.clone(), b * v)?;
        }
        Ok(out)
    }
}

/// A perturbation direction `K` for the linearization.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(pub Interaction);

impl Deref for Direction {
    type Target = Interaction;

    fn deref(&self) -> &Interaction {
        &self.0
    }
}

/// `prod_{x in X} sigma_x`, +1 for the empty set.
pub fn spin_product(spins: &[i8], x: &SiteSet) -> i8 {
    x.iter().map(|s| spins[s]).product()
}

/// Spin product for bit-encoded configurations (bit set means spin -1).
#[inline]
pub fn mask_spin_product(config: u64, support: u64) -> f64 {
    if (config & support).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Spin configuration from its bit encoding.
pub fn spins_from_mask(config: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|i| if config >> i & 1 == 1 { -1 } else { 1 })
        .collect()
}

/// `D = (S + 1)^d`: the largest cardinality of a sup-metric set of diameter `S`.
pub fn finite_body_constant(range: usize, dimension: usize) -> usize {
    (range + 1).pow(dimension as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Free,
    Periodic,
}

/// A translation-invariant coupling template: a shape of relative offsets and
/// its coupling value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub offsets: Vec<Vec<i64>>,
    pub value: f64,
}

impl Generator {
    pub fn new(offsets: Vec<Vec<i64>>, value: f64) -> Self {
        Self { offsets, value }
    }

    /// Sup-metric diameter of the offset shape.
    pub fn range(&self) -> usize {
        let mut d = 0;
        for (i, a) in self.offsets.iter().enumerate() {
            for b in &self.offsets[i + 1..] {
                for (p, q) in a.iter().zip(b) {
                    d = d.max(p.abs_diff(*q) as usize);
                }
            }
        }
        d
    }
}

/// Places every generator at every admissible translate of the window.
///
/// With a free boundary only translates lying fully inside the window are
/// used; with a periodic boundary offsets wrap around and coinciding
/// translates accumulate.
pub fn generate_translation_invariant(
    lattice: &Lattice,
    generators: &[Generator],
    boundary: Boundary,
    max_range: usize,
) -> Result<Interaction> {
    let d = lattice.dimension();
    let mut j = Interaction::zero(lattice.clone());
    for g in generators {
        if g.offsets.is_empty() {
            return config("generator with an empty shape");
        }
        if g.offsets.iter().any(|o| o.len() != d) {
            return config(format!("generator offsets must have dimension {d}"));
        }
        if g.range() > max_range {
            return config(format!(
                "generator {:?} has range {} above the cap {max_range}",
                g.offsets,
                g.range()
            ));
        }
        let mut shifted = vec![0i64; d];
        for t in 0..lattice.num_sites() {
            let tc = lattice.coords(t);
            let mut sites = Vec::with_capacity(g.offsets.len());
            let mut inside = true;
            for o in &g.offsets {
                for axis in 0..d {
                    let raw = tc[axis] as i64 + o[axis];
                    shifted[axis] = match boundary {
                        Boundary::Free => raw,
                        Boundary::Periodic => raw.rem_euclid(lattice.extents()[axis] as i64),
                    };
                }
                match lattice.index_signed(&shifted) {
                    Some(s) => sites.push(s),
                    None => {
                        inside = false;
                        break;
                    }
                }
            }
            if inside {
                j.add(SiteSet::new(sites), g.value)?;
            }
        }
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Lattice {
        Lattice::new(vec![n]).unwrap()
    }

    fn set(v: &[usize]) -> SiteSet {
        SiteSet::new(v.iter().copied())
    }

    #[test]
    fn norm_examples() {
        let l = chain(4);
        assert_eq!(Interaction::zero(l.clone()).norm_r(1.0).unwrap(), 0.0);
        let j = Interaction::from_couplings(l.clone(), [(set(&[0, 1]), 0.1)]).unwrap();
        // direct evaluation: 0.1 * e^2
        assert!((j.norm_r(1.0).unwrap() - 0.738_905_609_893_065).abs() < 1e-12);
        let nn = generate_translation_invariant(
            &l,
            &[Generator::new(vec![vec![0], vec![1]], 0.1)],
            Boundary::Free,
            1,
        )
        .unwrap();
        assert!((nn.norm_r(1.0).unwrap() - 1.477_811_219_786_13).abs() < 1e-12);
        assert!(j.norm_r(0.0).is_err());
    }

    #[test]
    fn ingestion_rules() {
        let mut j = Interaction::zero(chain(4));
        assert!(j.set(SiteSet::empty(), 1.0).is_err());
        assert!(j.set(set(&[4]), 1.0).is_err());
        j.set(set(&[1]), 1e-16).unwrap();
        assert!(j.is_empty());
        j.set(set(&[1]), 0.5).unwrap();
        j.add(set(&[1]), -0.5).unwrap();
        assert!(j.is_empty());
    }

    #[test]
    fn spin_product_examples() {
        assert_eq!(spin_product(&[1, -1], &SiteSet::empty()), 1);
        assert_eq!(spin_product(&[1, 1, 1], &set(&[0, 2])), 1);
        assert_eq!(spin_product(&[1, -1], &set(&[0, 1])), -1);
        assert_eq!(mask_spin_product(0b10, 0b11), -1.0);
    }

    #[test]
    fn exponent_examples() {
        let l = chain(2);
        assert_eq!(Interaction::zero(l.clone()).exponent(&[1, -1]), 0.0);
        let j = Interaction::from_couplings(l, [(set(&[0, 1]), 0.3)]).unwrap();
        assert_eq!(j.exponent(&[1, 1]), 0.3);
        assert_eq!(j.exponent(&[1, -1]), -0.3);
    }

    #[test]
    fn generator_examples() {
        let nn = Generator::new(vec![vec![0], vec![1]], 0.1);
        let j =
            generate_translation_invariant(&chain(4), std::slice::from_ref(&nn), Boundary::Free, 1)
                .unwrap();
        let supports: Vec<_> = j.supports().cloned().collect();
        assert_eq!(supports, vec![set(&[0, 1]), set(&[1, 2]), set(&[2, 3])]);
        assert!(
            generate_translation_invariant(&chain(4), &[], Boundary::Free, 1)
                .unwrap()
                .is_empty()
        );
        let l2 = Lattice::new(vec![2, 2]).unwrap();
        let plaquette = Generator::new(vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], 0.2);
        assert_eq!(
            generate_translation_invariant(&l2, &[plaquette], Boundary::Free, 1)
                .unwrap()
                .len(),
            1
        );
        assert!(generate_translation_invariant(
            &chain(4),
            std::slice::from_ref(&nn),
            Boundary::Free,
            0
        )
        .is_err());
        let periodic =
            generate_translation_invariant(&chain(4), &[nn], Boundary::Periodic, 1).unwrap();
        assert_eq!(periodic.len(), 4);
        assert_eq!(periodic.get(&set(&[0, 3])), 0.1);
    }

    #[test]
    fn finite_body_examples() {
        assert_eq!(finite_body_constant(0, 1), 1);
        assert_eq!(finite_body_constant(1, 1), 2);
        assert_eq!(finite_body_constant(1, 2), 4);
    }

    #[test]
    fn finite_body_matches_box_enumeration() {
        // largest subset of a (S+1)^d box is the box itself; check by enumerating
        // all subsets of a 3x3 window with diameter <= 1
        let l = Lattice::new(vec![3, 3]).unwrap();
        let mut best = 0;
        for m in 1u64..(1 << 9) {
            let x = SiteSet::from_mask(m);
            if diameter(&l, &x).unwrap() <= 1 {
                best = best.max(x.len());
            }
        }
        assert_eq!(best, finite_body_constant(1, 2));
    }
}
