//! Finite lattice windows, blockings, site subsets and hypergraphs.
//!
//! Sites of a window are addressed by their row-major linear index, so the
//! numeric order of indices is the lexicographic order of coordinates (axis 0
//! most significant). Both the original and the image lattice carry the
//! sup-metric on integer coordinates; the image metric acts on block
//! coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// A rectangular window `[0, L_0) x ... x [0, L_{d-1})` of the integer lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    extents: Vec<usize>,
}

impl Lattice {
    pub fn new(extents: Vec<usize>) -> Result<Self> {
        if extents.is_empty() {
            return config("lattice dimension must be positive");
        }
        if extents.contains(&0) {
            return config(format!("lattice extents must be positive, got {extents:?}"));
        }
        Ok(Self { extents })
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn num_sites(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        let mut c = vec![0; self.extents.len()];
        let mut rem = index;
        for (axis, &e) in self.extents.iter().enumerate().rev() {
            c[axis] = rem % e;
            rem /= e;
        }
        c
    }

    /// Linear index of a coordinate tuple, or `None` when it lies outside.
    pub fn index(&self, coords: &[usize]) -> Option<usize> {
        if coords.len() != self.extents.len() {
            return None;
        }
        let mut idx = 0;
        for (&c, &e) in coords.iter().zip(&self.extents) {
            if c >= e {
                return None;
            }
            idx = idx * e + c;
        }
        Some(idx)
    }

    /// Index of a signed coordinate tuple, or `None` outside the window.
    pub fn index_signed(&self, coords: &[i64]) -> Option<usize> {
        if coords.len() != self.extents.len() {
            return None;
        }
        let mut idx = 0;
        for (&c, &e) in coords.iter().zip(&self.extents) {
            if c < 0 || c as usize >= e {
                return None;
            }
            idx = idx * e + c as usize;
        }
        Some(idx)
    }

    /// Sup-metric distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let mut ra = a;
        let mut rb = b;
        let mut dist = 0;
        for &e in self.extents.iter().rev() {
            dist = dist.max((ra % e).abs_diff(rb % e));
            ra /= e;
            rb /= e;
        }
        dist
    }

    pub fn contains_all(&self, set: &SiteSet) -> bool {
        set.last().is_none_or(|m| m < self.num_sites())
    }
}

/// Canonically ordered, duplicate-free set of site indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteSet(Vec<usize>);

impl SiteSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(sites: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = sites.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn singleton(site: usize) -> Self {
        Self(vec![site])
    }

    /// Set of the indices whose bits are set in `mask`.
    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|i| mask >> i & 1 == 1).collect())
    }

    /// Bitmask encoding, available when every index is below 64.
    pub fn mask(&self) -> Option<u64> {
        if self.0.iter().any(|&i| i >= 64) {
            return None;
        }
        Some(self.0.iter().fold(0u64, |m, &i| m | (1 << i)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        SiteSet(out)
    }

    pub fn intersects(&self, other: &SiteSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.0.iter().all(|&s| other.contains(s))
    }

    /// Position of `site` inside the set.
    pub fn position(&self, site: usize) -> Option<usize> {
        self.0.binary_search(&site).ok()
    }
}

impl FromIterator<usize> for SiteSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        SiteSet::new(iter)
    }
}

impl fmt::Display for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// A set of distinct links in canonical (lexicographic) order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Hypergraph {
    links: Vec<SiteSet>,
}

impl Hypergraph {
    pub fn new(links: impl IntoIterator<Item = SiteSet>) -> Self {
        let mut links: Vec<SiteSet> = links.into_iter().collect();
        links.sort();
        links.dedup();
        Self { links }
    }

    pub fn links(&self) -> &[SiteSet] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Union of all links.
    pub fn support(&self) -> SiteSet {
        SiteSet::new(self.links.iter().flat_map(|l| l.iter()))
    }
}

/// Partition of a window into congruent rectangular blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Blocking {
    lattice: Lattice,
    image: Lattice,
    block_extents: Vec<usize>,
    site_to_block: Vec<usize>,
    block_sites: Vec<Vec<usize>>,
}

impl Blocking {
    pub fn new(lattice: Lattice, block_extents: Vec<usize>) -> Result<Self> {
        if block_extents.len() != lattice.dimension() {
            return config(format!(
                "block extents {block_extents:?} do not match lattice dimension {}",
                lattice.dimension()
            ));
        }
        let mut image_extents = Vec::with_capacity(block_extents.len());
        for (&l, &b) in lattice.extents().iter().zip(&block_extents) {
            if b == 0 || l % b != 0 {
                return config(format!(
                    "block extents {block_extents:?} must divide window extents {:?}",
                    lattice.extents()
                ));
            }
            image_extents.push(l / b);
        }
        let image = Lattice::new(image_extents)?;
        let block_shape = Lattice::new(block_extents.clone())?;

        let mut site_to_block = vec![0; lattice.num_sites()];
        let mut block_sites = Vec::with_capacity(image.num_sites());
        for y in 0..image.num_sites() {
            let yc = image.coords(y);
            let mut sites = Vec::with_capacity(block_shape.num_sites());
            for o in 0..block_shape.num_sites() {
                let oc = block_shape.coords(o);
                let c: Vec<usize> = yc
                    .iter()
                    .zip(&oc)
                    .zip(&block_extents)
                    .map(|((&y, &o), &b)| y * b + o)
                    .collect();
                let x = lattice.index(&c).expect("block site inside window");
                site_to_block[x] = y;
                sites.push(x);
            }
            block_sites.push(sites);
        }
        Ok(Self {
            lattice,
            image,
            block_extents,
            site_to_block,
            block_sites,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn image(&self) -> &Lattice {
        &self.image
    }

    pub fn block_extents(&self) -> &[usize] {
        &self.block_extents
    }

    /// Common block cardinality `s`.
    pub fn block_size(&self) -> usize {
        self.block_extents.iter().product()
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sites.len()
    }

    pub fn block_of(&self, site: usize) -> usize {
        self.site_to_block[site]
    }

    /// Sites of block `y`, in lexicographic order.
    pub fn block_sites(&self, y: usize) -> &[usize] {
        &self.block_sites[y]
    }

    fn check_window(&self, x: &SiteSet) -> Result<()> {
        if !self.lattice.contains_all(x) {
            return domain(format!("site set {x} leaves the window"));
        }
        Ok(())
    }

    /// Blocks that intersect `x`.
    pub fn image_support(&self, x: &SiteSet) -> Result<SiteSet> {
        self.check_window(x)?;
        Ok(SiteSet::new(x.iter().map(|s| self.site_to_block[s])))
    }

    /// Bitmask of [`Blocking::image_support`]; requires at most 64 blocks.
    pub(crate) fn image_mask(&self, x: &SiteSet) -> u64 {
        x.iter().fold(0u64, |m, s| m | 1 << self.site_to_block[s])
    }

    pub fn block_connected(&self, a: &SiteSet, b: &SiteSet) -> Result<bool> {
        Ok(self.image_support(a)?.intersects(&self.image_support(b)?))
    }

    /// Maximal block-connected classes of the links of `g`, ordered by their
    /// least link.
    pub fn block_components(&self, g: &Hypergraph) -> Result<Vec<Hypergraph>> {
        let images = g
            .links()
            .iter()
            .map(|l| self.image_support(l))
            .collect::<Result<Vec<_>>>()?;
        let n = images.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        // a link joins the class of the first link seen on each of its blocks
        let mut owner = vec![usize::MAX; self.num_blocks()];
        for (i, img) in images.iter().enumerate() {
            for y in img.iter() {
                if owner[y] == usize::MAX {
                    owner[y] = i;
                } else {
                    let (a, b) = (find(&mut parent, owner[y]), find(&mut parent, i));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut classes: Vec<Vec<SiteSet>> = Vec::new();
        let mut class_of_root = vec![usize::MAX; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if class_of_root[r] == usize::MAX {
                class_of_root[r] = classes.len();
                classes.push(Vec::new());
            }
            classes[class_of_root[r]].push(g.links()[i].clone());
        }
        Ok(classes.into_iter().map(Hypergraph::new).collect())
    }

    /// Image-lattice distance between `w` (original sites) and `z` (blocks).
    pub fn image_distance(&self, w: &SiteSet, z: &SiteSet) -> Result<usize> {
        if w.is_empty() || z.is_empty() {
            return domain("image distance of an empty set");
        }
        if !self.image.contains_all(z) {
            return domain(format!("image set {z} leaves the image window"));
        }
        let wi = self.image_support(w)?;
        Ok(wi
            .iter()
            .flat_map(|a| z.iter().map(move |b| (a, b)))
            .map(|(a, b)| self.image.distance(a, b))
            .min()
            .expect("nonempty"))
    }
}

/// Largest sup-metric distance between two members of `x`.
pub fn diameter(lattice: &Lattice, x: &SiteSet) -> Result<usize> {
    if x.is_empty() {
        return domain("diameter of the empty set");
    }
    if !lattice.contains_all(x) {
        return domain(format!("site set {x} leaves the window"));
    }
    let s = x.as_slice();
    let mut d = 0;
    for (i, &a) in s.iter().enumerate() {
        for &b in &s[i + 1..] {
            d = d.max(lattice.distance(a, b));
        }
    }
    Ok(d)
}
