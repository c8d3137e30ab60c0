//! Polymer representation of the frozen-block-spin partition function.
//!
//! Expanding `exp(J(X) sigma_X) = 1 + (exp(J(X) sigma_X) - 1)` turns `W(sigma')`
//! into a sum over hypergraphs of links. Grouping hypergraphs by their
//! block-connected parts gives a hard-core gas of polymers: a polymer is an
//! image support `N` with weight
//! `w_N(sigma'_N) = sum_{block-connected G, G* = N} alpha(N, G, sigma'_N)`,
//! and `W(sigma') = sum over families of disjoint supports of prod w_N`.

use std::collections::{BTreeMap, HashMap};
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::esu::{for_each_connected, EsuLimits, VertexGraph};
use crate::exact::check_model;
use crate::interaction::Interaction;
use crate::kernel::Kernel;
use crate::lattice::{Blocking, Hypergraph, SiteSet};
use crate::walsh::extract_bits;

/// Most original spins summed explicitly for one polymer support.
pub const MAX_LOCAL_SPINS: usize = 24;

/// Truncation caps for hypergraph enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolymerCaps {
    /// Largest number of links in a hypergraph.
    pub max_links: usize,
    /// Largest image support of a polymer.
    pub max_support: usize,
    /// Abort when more hypergraphs than this would be visited.
    pub guard: usize,
}

impl Default for PolymerCaps {
    fn default() -> Self {
        Self {
            max_links: 6,
            max_support: 8,
            guard: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polymer {
    support: SiteSet,
    mask: u64,
    /// `w_N` indexed by the bit encoding of the block spins on `support`.
    weights: Vec<f64>,
    /// `link_histogram[k]`: hypergraphs with `k` links that contributed.
    link_histogram: Vec<usize>,
}

impl Polymer {
    pub fn support(&self) -> &SiteSet {
        &self.support
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn link_histogram(&self) -> &[usize] {
        &self.link_histogram
    }

    /// `w_N` at a global bit-encoded block-spin configuration.
    #[inline]
    pub fn weight_at(&self, block_spins: u64) -> f64 {
        self.weights[extract_bits(block_spins, self.support.as_slice())]
    }

    /// `sup_{sigma'} |w_N(sigma')|`.
    pub fn sup_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Polymer with a given weight table; used to build abstract polymer gases.
    pub fn from_table(support: SiteSet, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return domain("polymer support must be nonempty");
        }
        let mask = support
            .mask()
            .ok_or_else(|| Error::Domain("polymer support beyond 64 image sites".into()))?;
        if weights.len() != 1 << support.len() {
            return domain("weight table size does not match the support");
        }
        Ok(Self {
            support,
            mask,
            weights,
            link_histogram: Vec::new(),
        })
    }
}

/// Weight of the component attached to an insertion `sigma_W`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoratedPolymer {
    /// Image support `R` of the attached links (empty for the bare insertion).
    r: SiteSet,
    /// `R` together with the image of `W`; the weight table lives here.
    domain: SiteSet,
    weights: Vec<f64>,
    link_histogram: Vec<usize>,
}

impl DecoratedPolymer {
    pub fn r(&self) -> &SiteSet {
        &self.r
    }

    pub fn domain(&self) -> &SiteSet {
        &self.domain
    }

    pub fn domain_mask(&self) -> u64 {
        self.domain.mask().expect("image index below 64")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn link_histogram(&self) -> &[usize] {
        &self.link_histogram
    }

    #[inline]
    pub fn weight_at(&self, block_spins: u64) -> f64 {
        self.weights[extract_bits(block_spins, self.domain.as_slice())]
    }
}

struct Link {
    support: SiteSet,
    coupling: f64,
    image_mask: u64,
}

/// Links of an interaction prepared for enumeration.
struct LinkSet {
    links: Vec<Link>,
}

impl LinkSet {
    fn new(j: &Interaction, blocking: &Blocking) -> Result<Self> {
        if j.lattice() != blocking.lattice() {
            return domain("interaction and blocking live on different windows");
        }
        if blocking.num_blocks() > 64 {
            return Err(Error::CapExceeded {
                what: "image sites for polymer enumeration",
                limit: 64,
                actual: blocking.num_blocks(),
            });
        }
        let links = j
            .iter()
            .map(|(x, v)| Link {
                support: x.clone(),
                coupling: v,
                image_mask: blocking.image_mask(x),
            })
            .collect();
        Ok(Self { links })
    }

    /// Adjacency under block connectivity, optionally with an extra vertex 0
    /// standing for an insertion set with image `extra`.
    fn graph(&self, extra: Option<u64>) -> (Vec<Vec<usize>>, Vec<u64>) {
        let mut masks: Vec<u64> = extra.into_iter().collect();
        masks.extend(self.links.iter().map(|l| l.image_mask));
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
        (adj, masks)
    }
}

/// Spin layout over the blocks of an image domain: block `i` of the domain
/// occupies bits `i*s .. (i+1)*s`.
struct LocalLayout<'a> {
    blocking: &'a Blocking,
    blocks: SiteSet,
    s: usize,
}

impl<'a> LocalLayout<'a> {
    fn new(blocking: &'a Blocking, domain_mask: u64) -> Result<Self> {
        let blocks = SiteSet::from_mask(domain_mask);
        let s = blocking.block_size();
        if s * blocks.len() > MAX_LOCAL_SPINS {
            return Err(Error::CapExceeded {
                what: "original spins under one polymer",
                limit: MAX_LOCAL_SPINS,
                actual: s * blocks.len(),
            });
        }
        Ok(Self {
            blocking,
            blocks,
            s,
        })
    }

    fn bits(&self) -> usize {
        self.s * self.blocks.len()
    }

    fn local_mask(&self, sites: &SiteSet) -> u64 {
        sites.iter().fold(0u64, |m, x| {
            let y = self.blocking.block_of(x);
            let i = self.blocks.position(y).expect("site inside the domain");
            let k = self
                .blocking
                .block_sites(y)
                .iter()
                .position(|&u| u == x)
                .expect("site inside its block");
            m | 1 << (i * self.s + k)
        })
    }

    /// Spreads tables kept over hypergraph sites onto the full domain.
    fn lift(&self, tables: &BTreeMap<SiteSet, Vec<f64>>) -> Vec<f64> {
        let mut f = vec![0.0; 1 << self.bits()];
        for (sites, g) in tables {
            let positions: Vec<usize> = sites
                .iter()
                .map(|x| self.local_mask(&SiteSet::singleton(x)).trailing_zeros() as usize)
                .collect();
            for (sigma, slot) in f.iter_mut().enumerate() {
                *slot += g[extract_bits(sigma as u64, &positions)];
            }
        }
        f
    }

    /// Normalized contraction of every block with the kernel:
    /// `w(sigma') = 2^{-s n} sum_sigma f(sigma) prod_i T(sigma_i, sigma'_i)`.
    fn contract(&self, mut f: Vec<f64>, kernel: &Kernel) -> Vec<f64> {
        let s = self.s;
        let n = self.blocks.len();
        let scale = (1u64 << s) as f64;
        for i in 0..n {
            // layout: i output bits low, then (n - i) blocks of s bits
            let high_count = 1usize << (s * (n - i - 1));
            let low_count = 1usize << i;
            let mut next = vec![0.0; low_count * 2 * high_count];
            for h in 0..high_count {
                for l in 0..low_count {
                    let mut up = 0.0;
                    let mut down = 0.0;
                    for c in 0..1usize << s {
                        let v = f[l | c << i | h << (i + s)];
                        let [tu, td] = kernel.row(c);
                        up += v * tu;
                        down += v * td;
                    }
                    next[l | h << (i + 1)] = up / scale;
                    next[l | 1 << i | h << (i + 1)] = down / scale;
                }
            }
            f = next;
        }
        f
    }
}

#[derive(Default)]
struct Accumulator {
    /// Keyed by the original sites the hypergraphs touch.
    tables: BTreeMap<SiteSet, Vec<f64>>,
    histogram: Vec<usize>,
}

impl Accumulator {
    /// Adds `sigma_W prod_X (exp(J(X) sigma_X) - 1)` over the spins of the
    /// touched sites only.
    fn add(&mut self, links: &[Link], chosen: &[usize], insertion: Option<&SiteSet>) {
        let sites = chosen.iter().fold(
            insertion.cloned().unwrap_or_else(SiteSet::empty),
            |s, &k| s.union(&links[k].support),
        );
        let local = |x: &SiteSet| {
            x.iter().fold(0u64, |m, u| {
                m | 1 << sites.position(u).expect("site in the union")
            })
        };
        let factors: Vec<(u64, f64, f64)> = chosen
            .iter()
            .map(|&k| {
                let l = &links[k];
                (
                    local(&l.support),
                    l.coupling.exp_m1(),
                    (-l.coupling).exp_m1(),
                )
            })
            .collect();
        let sign = insertion.map_or(0, local);
        let len = 1usize << sites.len();
        let table = self.tables.entry(sites).or_insert_with(|| vec![0.0; len]);
        for (sigma, slot) in table.iter_mut().enumerate() {
            let sigma = sigma as u64;
            let mut prod = if (sigma & sign).count_ones() & 1 == 1 {
                -1.0
            } else {
                1.0
            };
            for &(m, plus, minus) in &factors {
                prod *= if (sigma & m).count_ones() & 1 == 1 {
                    minus
                } else {
                    plus
                };
            }
            *slot += prod;
        }
        if self.histogram.len() <= chosen.len() {
            self.histogram.resize(chosen.len() + 1, 0);
        }
        self.histogram[chosen.len()] += 1;
    }
}

fn check_local(blocking: &Blocking, domain_mask: u64) -> Result<()> {
    let bits = blocking.block_size() * domain_mask.count_ones() as usize;
    if bits > MAX_LOCAL_SPINS {
        return Err(Error::CapExceeded {
            what: "original spins under one polymer",
            limit: MAX_LOCAL_SPINS,
            actual: bits,
        });
    }
    Ok(())
}

fn merge_accumulators(into: &mut BTreeMap<u64, Accumulator>, from: BTreeMap<u64, Accumulator>) {
    for (key, acc) in from {
        match into.get_mut(&key) {
            Some(existing) => {
                for (sites, table) in acc.tables {
                    match existing.tables.get_mut(&sites) {
                        Some(t) => t.iter_mut().zip(&table).for_each(|(a, b)| *a += b),
                        None => {
                            existing.tables.insert(sites, table);
                        }
                    }
                }
                if existing.histogram.len() < acc.histogram.len() {
                    existing.histogram.resize(acc.histogram.len(), 0);
                }
                for (a, b) in existing.histogram.iter_mut().zip(&acc.histogram) {
                    *a += b;
                }
            }
            None => {
                into.insert(key, acc);
            }
        }
    }
}

struct Guard {
    limit: usize,
    count: AtomicUsize,
    tripped: AtomicBool,
}

impl Guard {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            count: AtomicUsize::new(0),
            tripped: AtomicBool::new(false),
        }
    }

    fn tick(&self) -> ControlFlow<()> {
        if self.count.fetch_add(1, Ordering::Relaxed) >= self.limit
            || self.tripped.load(Ordering::Relaxed)
        {
            self.tripped.store(true, Ordering::Relaxed);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }

    fn check(&self) -> Result<()> {
        if self.tripped.load(Ordering::Relaxed) {
            return Err(Error::CapExceeded {
                what: "hypergraphs enumerated",
                limit: self.limit,
                actual: self.count.load(Ordering::Relaxed),
            });
        }
        Ok(())
    }
}

/// Contribution `alpha(N, G, sigma'_N)` of one block-connected hypergraph
/// whose image support is exactly `N`; `block_spins` is the bit encoding of
/// the block spins on `N`.
pub fn alpha(
    n: &SiteSet,
    gamma: &Hypergraph,
    block_spins: usize,
    j: &Interaction,
    kernel: &Kernel,
    blocking: &Blocking,
) -> Result<f64> {
    check_model(j, kernel, blocking)?;
    if gamma.is_empty() || blocking.block_components(gamma)?.len() != 1 {
        return domain("hypergraph is not block-connected");
    }
    let image = blocking.image_support(&gamma.support())?;
    if &image != n {
        return domain(format!(
            "hypergraph image {image} differs from the support {n}"
        ));
    }
    if block_spins >> n.len() != 0 {
        return domain("block-spin assignment has more bits than the support");
    }
    let mask = n
        .mask()
        .ok_or_else(|| Error::Domain("support beyond 64 image sites".into()))?;
    let layout = LocalLayout::new(blocking, mask)?;
    let links: Vec<Link> = gamma
        .links()
        .iter()
        .map(|x| Link {
            support: x.clone(),
            coupling: j.get(x),
            image_mask: blocking.image_mask(x),
        })
        .collect();
    let mut acc = Accumulator::default();
    acc.add(&links, &(0..links.len()).collect::<Vec<_>>(), None);
    Ok(layout.contract(layout.lift(&acc.tables), kernel)[block_spins])
}

/// All polymers reachable within the caps, ordered by support.
pub fn enumerate_polymers(
    j: &Interaction,
    kernel: &Kernel,
    blocking: &Blocking,
    caps: PolymerCaps,
) -> Result<Vec<Polymer>> {
    check_model(j, kernel, blocking)?;
    let links = LinkSet::new(j, blocking)?;
    let (adj, masks) = links.graph(None);
    let graph = VertexGraph {
        adjacency: &adj,
        masks: &masks,
    };
    let limits = EsuLimits {
        max_size: caps.max_links,
        max_support: caps.max_support.min(64) as u32,
    };
    let guard = Guard::new(caps.guard);

    let per_root: Vec<Result<BTreeMap<u64, Accumulator>>> = (0..links.links.len())
        .into_par_iter()
        .map(|root| {
            let mut local: BTreeMap<u64, Accumulator> = BTreeMap::new();
            let mut failure = None;
            let _ = for_each_connected(&graph, root, &limits, |subset, mask| {
                guard.tick()?;
                if let Err(e) = check_local(blocking, mask) {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
                local
                    .entry(mask)
                    .or_default()
                    .add(&links.links, subset, None);
                ControlFlow::Continue(())
            });
            match failure {
                Some(e) => Err(e),
                None => Ok(local),
            }
        })
        .collect();
    guard.check()?;
    let mut merged = BTreeMap::new();
    for part in per_root {
        merge_accumulators(&mut merged, part?);
    }

    let mut polymers: Vec<Polymer> = merged
        .into_iter()
        .map(|(mask, acc)| {
            let layout = LocalLayout::new(blocking, mask)?;
            let weights = layout.contract(layout.lift(&acc.tables), kernel);
            Ok(Polymer {
                support: SiteSet::from_mask(mask),
                mask,
                weights,
                link_histogram: acc.histogram,
            })
        })
        .collect::<Result<_>>()?;
    polymers.sort_by(|a, b| a.support.cmp(&b.support));
    Ok(polymers)
}

/// Weights `w~_R` of the insertion `sigma_W` dressed by the links attached to
/// it: all hypergraphs `D` (including the empty one) such that `W` together
/// with `D` is block-connected, grouped by the image support `R` of `D`.
/// Ordered by `R`.
pub fn decorated_weights(
    j: &Interaction,
    kernel: &Kernel,
    blocking: &Blocking,
    w: &SiteSet,
    caps: PolymerCaps,
) -> Result<Vec<DecoratedPolymer>> {
    check_model(j, kernel, blocking)?;
    if w.is_empty() {
        return domain("insertion set must be nonempty");
    }
    let w_image = blocking.image_support(w)?;
    let links = LinkSet::new(j, blocking)?;
    let w_mask = blocking.image_mask(w);
    let (adj, masks) = links.graph(Some(w_mask));
    let graph = VertexGraph {
        adjacency: &adj,
        masks: &masks,
    };
    let limits = EsuLimits {
        max_size: caps.max_links + 1,
        max_support: caps.max_support.max(w_image.len()).min(64) as u32,
    };
    let guard = Guard::new(caps.guard);

    // keyed by R; the domain R u W' follows from R
    let mut acc: BTreeMap<u64, Accumulator> = BTreeMap::new();
    let mut failure = None;
    let _ = for_each_connected(&graph, 0, &limits, |subset, union| {
        guard.tick()?;
        if let Err(e) = check_local(blocking, union) {
            failure = Some(e);
            return ControlFlow::Break(());
        }
        let chosen: Vec<usize> = subset[1..].iter().map(|&v| v - 1).collect();
        let r_mask = chosen
            .iter()
            .fold(0u64, |m, &k| m | links.links[k].image_mask);
        acc.entry(r_mask)
            .or_default()
            .add(&links.links, &chosen, Some(w));
        ControlFlow::Continue(())
    });
    if let Some(e) = failure {
        return Err(e);
    }
    guard.check()?;

    let mut out: Vec<DecoratedPolymer> = acc
        .into_iter()
        .map(|(r_mask, a)| {
            let domain_mask = r_mask | w_mask;
            let layout = LocalLayout::new(blocking, domain_mask)?;
            Ok(DecoratedPolymer {
                r: SiteSet::from_mask(r_mask),
                domain: SiteSet::from_mask(domain_mask),
                weights: layout.contract(layout.lift(&a.tables), kernel),
                link_histogram: a.histogram,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.r.cmp(&b.r));
    Ok(out)
}

/// `a_n(y)`: sums over block-connected hypergraphs with exactly `n` links
/// whose support meets block `y` of `prod_X 2|J(X)| M^{|X|}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedSums {
    /// `values[y][n - 1]`.
    values: Vec<Vec<f64>>,
}

impl RootedSums {
    pub fn get(&self, y: usize, n: usize) -> f64 {
        self.values[y][n - 1]
    }

    pub fn max_links(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn num_blocks(&self) -> usize {
        self.values.len()
    }

    /// `sup_y a_n(y)`.
    pub fn sup(&self, n: usize) -> f64 {
        self.values.iter().map(|v| v[n - 1]).fold(0.0, f64::max)
    }
}

pub fn rooted_contributions(
    j: &Interaction,
    blocking: &Blocking,
    weight_base: f64,
    max_links: usize,
    guard_limit: usize,
) -> Result<RootedSums> {
    if !(weight_base > 1.0) {
        return domain(format!("weight base M must exceed 1, got {weight_base}"));
    }
    if max_links == 0 {
        return domain("need at least one link");
    }
    let links = LinkSet::new(j, blocking)?;
    let (adj, masks) = links.graph(None);
    let graph = VertexGraph {
        adjacency: &adj,
        masks: &masks,
    };
    let limits = EsuLimits {
        max_size: max_links,
        max_support: 64,
    };
    let link_weight: Vec<f64> = links
        .links
        .iter()
        .map(|l| 2.0 * l.coupling.abs() * weight_base.powi(l.support.len() as i32))
        .collect();
    let nb = blocking.num_blocks();
    let guard = Guard::new(guard_limit);
    let per_root: Vec<Vec<f64>> = (0..links.links.len())
        .into_par_iter()
        .map(|root| {
            let mut local = vec![0.0; nb * max_links];
            let _ = for_each_connected(&graph, root, &limits, |subset, mask| {
                guard.tick()?;
                let w: f64 = subset.iter().map(|&k| link_weight[k]).product();
                let n = subset.len();
                let mut m = mask;
                while m != 0 {
                    let y = m.trailing_zeros() as usize;
                    m &= m - 1;
                    local[y * max_links + n - 1] += w;
                }
                ControlFlow::Continue(())
            });
            local
        })
        .collect();
    guard.check()?;
    let mut total = vec![0.0; nb * max_links];
    for part in per_root {
        for (a, b) in total.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok(RootedSums {
        values: total.chunks_exact(max_links).map(<[f64]>::to_vec).collect(),
    })
}

/// Single entry of [`rooted_contributions`].
pub fn rooted_contribution(
    j: &Interaction,
    blocking: &Blocking,
    y: usize,
    n: usize,
    weight_base: f64,
) -> Result<f64> {
    if y >= blocking.num_blocks() {
        return domain(format!("block {y} outside the image window"));
    }
    Ok(rooted_contributions(j, blocking, weight_base, n, usize::MAX)?.get(y, n))
}

/// `sum over families of pairwise disjoint polymers avoiding `excluded` of
/// prod w_N(sigma')`, summed exactly.
pub fn polymer_partition(polymers: &[Polymer], block_spins: u64, excluded: u64) -> f64 {
    let weights: Vec<(u64, f64)> = polymers
        .iter()
        .filter(|p| p.mask & excluded == 0)
        .map(|p| (p.mask, p.weight_at(block_spins)))
        .collect();
    let available = weights.iter().fold(0u64, |m, p| m | p.0);
    let mut memo = HashMap::new();
    packing_sum(&weights, available, &mut memo)
}

/// Families covering the least free site either leave it uncovered or cover it
/// by exactly one polymer inside the free set.
fn packing_sum(polymers: &[(u64, f64)], free: u64, memo: &mut HashMap<u64, f64>) -> f64 {
    if free == 0 {
        return 1.0;
    }
    if let Some(&v) = memo.get(&free) {
        return v;
    }
    let low = free & free.wrapping_neg();
    let mut total = packing_sum(polymers, free & !low, memo);
    for &(m, w) in polymers {
        if m & low != 0 && m & !free == 0 {
            total += w * packing_sum(polymers, free & !m, memo);
        }
    }
    memo.insert(free, total);
    total
}
