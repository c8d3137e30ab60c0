use proptest::prelude::*;

use rgcluster::bounds::{count_supports, BoundsContext};
use rgcluster::cluster::{jacobian_global_bound, kp_check, ClusterExpansion, ExpansionModel};
use rgcluster::polymer::rooted_contributions;
use rgcluster::{
    apply_linearization, enumerate_polymers, polymer_partition, Blocking, Direction, ExactCaps,
    ExactEngine, Interaction, Kernel, Lattice, PolymerCaps, SiteSet,
};

fn set(v: &[usize]) -> SiteSet {
    SiteSet::new(v.iter().copied())
}

fn saturated() -> PolymerCaps {
    PolymerCaps {
        max_links: 64,
        max_support: 64,
        guard: 10_000_000,
    }
}

fn chain(n: usize, k: f64) -> (Interaction, Blocking) {
    let l = Lattice::new(vec![n]).unwrap();
    let j =
        Interaction::from_couplings(l.clone(), (0..n - 1).map(|i| (set(&[i, i + 1]), k))).unwrap();
    (j, Blocking::new(l, vec![2]).unwrap())
}

/// Nearest-neighbour square lattice with free boundary.
fn square(n: usize, k: f64) -> (Interaction, Blocking) {
    let l = Lattice::new(vec![n, n]).unwrap();
    let mut bonds = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let s = l.index(&[a, b]).unwrap();
            if a + 1 < n {
                bonds.push((set(&[s, l.index(&[a + 1, b]).unwrap()]), k));
            }
            if b + 1 < n {
                bonds.push((set(&[s, l.index(&[a, b + 1]).unwrap()]), k));
            }
        }
    }
    let j = Interaction::from_couplings(l.clone(), bonds).unwrap();
    (j, Blocking::new(l, vec![2, 2]).unwrap())
}

fn context(j: &Interaction, s: usize) -> BoundsContext {
    BoundsContext::new(
        1.0,
        2.0,
        s,
        j.norm_r(1.0).unwrap(),
        j.body_bound().max(1),
        j.range().max(1),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Sum over disjoint polymer families reproduces the frozen partition function.
    #[test]
    fn partition_identity_random_chain(
        bonds in prop::collection::vec(-0.4f64..0.4, 5),
        fields in prop::collection::vec(-0.3f64..0.3, 6),
        triple in -0.2f64..0.2,
        offset in 0usize..2,
    ) {
        let l = Lattice::new(vec![6]).unwrap();
        let mut j = Interaction::zero(l.clone());
        for (i, v) in bonds.iter().enumerate() {
            j.set(set(&[i, i + 1]), *v).unwrap();
        }
        for (i, v) in fields.iter().enumerate() {
            j.set(set(&[i]), *v).unwrap();
        }
        j.set(set(&[1, 2, 3]), triple).unwrap();
        let b = Blocking::new(l, vec![2]).unwrap();
        let k = Kernel::decimation(&[2], &[offset]).unwrap();
        let w = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap().frozen_partition_table().unwrap();
        let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        for (sp, v) in w.iter().enumerate() {
            prop_assert!((polymer_partition(&ps, sp as u64, 0) - v).abs() < 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn partition_identity_majority(
        bonds in prop::collection::vec(-0.5f64..0.5, 5),
        field in -0.3f64..0.3,
    ) {
        let l = Lattice::new(vec![6]).unwrap();
        let mut j = Interaction::from_couplings(l.clone(), bonds.iter().enumerate().map(|(i, v)| (set(&[i, i + 1]), *v))).unwrap();
        j.set(set(&[4]), field).unwrap();
        let b = Blocking::new(l, vec![3]).unwrap();
        let k = Kernel::majority(3).unwrap();
        let w = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap().frozen_partition_table().unwrap();
        let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
        for (sp, v) in w.iter().enumerate() {
            prop_assert!((polymer_partition(&ps, sp as u64, 0) - v).abs() < 1e-10 * v.abs().max(1.0));
        }
    }

    /// L(J) is linear in the direction.
    #[test]
    fn linearization_is_linear(
        a in -2.0f64..2.0,
        c in -2.0f64..2.0,
        k1 in prop::collection::vec(-1.0f64..1.0, 4),
        k2 in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let (j, b) = chain(6, 0.1);
        let k = Kernel::decimation(&[2], &[0]).unwrap();
        let engine = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
        let ws = [set(&[0, 1]), set(&[2]), set(&[3, 4]), set(&[5])];
        let table = engine.jacobian_table(&ws, 2).unwrap();
        let l = b.lattice().clone();
        let d1 = Interaction::from_couplings(l.clone(), ws.iter().cloned().zip(k1.iter().copied())).unwrap();
        let d2 = Interaction::from_couplings(l.clone(), ws.iter().cloned().zip(k2.iter().copied())).unwrap();
        let mix = d1.linear_combination(a, &d2, c).unwrap();
        for z in [set(&[]), set(&[0]), set(&[1, 2]), set(&[0, 2])] {
            let lhs = apply_linearization(&table, &Direction(mix.clone()), &z).unwrap();
            let rhs = a * apply_linearization(&table, &Direction(d1.clone()), &z).unwrap()
                + c * apply_linearization(&table, &Direction(d2.clone()), &z).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-14 * (1.0 + lhs.abs()));
        }
    }

    /// Recursion values never exceed the closed bound c rho^n.
    #[test]
    fn a_bar_below_closed_form(m in 1.05f64..2.6, frac in 0.0f64..1.0, s in 1usize..6) {
        let probe = BoundsContext::new(1.0, m, s, 0.0, 2, 1).unwrap();
        let ctx = BoundsContext::new(1.0, m, s, frac * probe.threshold(), 2, 1).unwrap();
        prop_assert!(ctx.rho() < 1.0);
        let table = ctx.a_bar_table(20);
        for (i, v) in table.iter().enumerate() {
            let closed = ctx.c() * ctx.rho().powi(i as i32 + 1);
            prop_assert!(*v <= closed * (1.0 + 1e-12), "n = {}: {} > {}", i + 1, v, closed);
        }
        prop_assert!(ctx.rooted_series_bound() <= m.ln() * (1.0 + 1e-12));
    }
}

#[test]
fn expansion_residual_decreases_with_order() {
    let (j, b) = chain(8, 0.1);
    let k = Kernel::decimation(&[2], &[0]).unwrap();
    let exact = ExactEngine::new(&j, &k, &b, ExactCaps::default())
        .unwrap()
        .log_partition_table()
        .unwrap();
    let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
    let mut prev = f64::INFINITY;
    for p_max in 1..=6 {
        let e = ClusterExpansion::new(ps.clone(), p_max).unwrap();
        let residual = exact
            .iter()
            .enumerate()
            .map(|(sp, v)| (e.log_w(sp as u64) - v).abs())
            .fold(0.0, f64::max);
        assert!(residual < prev, "p_max {p_max}: {residual} after {prev}");
        prev = residual;
    }
    assert!(prev < 1e-9);
}

#[test]
fn band_mechanism_on_couplings() {
    let (j, b) = chain(8, 0.1);
    let k = Kernel::decimation(&[2], &[1]).unwrap();
    let e = ClusterExpansion::for_model(&j, &k, &b, saturated(), 4).unwrap();
    let jp = e.couplings().unwrap();
    assert!(!jp.is_empty());
    for (z, v) in jp.iter() {
        if v != 0.0 {
            let witness = e
                .support_witness(z)
                .expect("nonzero coupling without a covering cluster");
            assert!(z.is_subset(&witness));
        }
    }
    let exact = ExactEngine::new(&j, &k, &b, ExactCaps::default())
        .unwrap()
        .renormalized_couplings()
        .unwrap();
    for (z, v) in exact.iter() {
        assert!((jp.get(z) - v).abs() < 1e-6, "{z}");
    }
}

#[test]
fn square_lattice_expansion() {
    let (j, b) = square(4, 0.05);
    let k = Kernel::decimation(&[2, 2], &[0, 0]).unwrap();
    let engine = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
    let w = engine.frozen_partition_table().unwrap();
    let caps = PolymerCaps {
        max_links: 5,
        ..saturated()
    };
    let model = ExpansionModel::new(&j, &k, &b, caps, 4, 2.0).unwrap();
    let logs = engine.log_partition_table().unwrap();
    for sp in 0..16u64 {
        assert!((model.expansion().log_w(sp) - logs[sp as usize]).abs() < 1e-5);
        let _ = w[sp as usize];
    }
    for (z, wset) in [
        (set(&[0]), set(&[0])),
        (set(&[0, 1]), set(&[1, 2])),
        (set(&[3]), set(&[5, 6])),
    ] {
        let est = model.jacobian(&z, &wset, 2).unwrap();
        let exact = engine.jacobian_exact(&z, &wset).unwrap();
        assert!(
            (est.value - exact).abs() < 1e-4,
            "{z} {wset}: {} vs {exact}",
            est.value
        );
    }
}

/// threshold pass => rho < 1 => sum a_bar <= log M => per-site KP sum <= log M,
/// and every enumerated quantity below its analytic majorant.
#[test]
fn threshold_chain_on_chain_instance() {
    let (j, b) = chain(8, 3e-4);
    let k = Kernel::decimation(&[2], &[0]).unwrap();
    let ctx = context(&j, 2);
    assert!(ctx.passes_threshold());
    assert!(ctx.rho() < 1.0);
    let a_bar = ctx.a_bar_table(12);
    assert!(a_bar.iter().sum::<f64>() <= 2f64.ln());

    let rooted = rooted_contributions(&j, &b, 2.0, 7, 10_000_000).unwrap();
    for n in 1..=7 {
        for y in 0..rooted.num_blocks() {
            assert!(rooted.get(y, n) <= a_bar[n - 1], "a_{n}({y})");
        }
    }

    let ps = enumerate_polymers(&j, &k, &b, saturated()).unwrap();
    let report = kp_check(&ps, 2.0, b.num_blocks(), &[set(&[0, 1]), set(&[0, 3])]).unwrap();
    assert!(report.passed);

    // eps(P) dominance
    for p in [2usize, 4, 6, 8] {
        let eps = ctx.eps_tail(p as f64).unwrap();
        for y in 0..b.num_blocks() {
            let mass: f64 = ps
                .iter()
                .filter(|q| q.support().contains(y) && q.support().len() > p)
                .map(|q| q.sup_abs() * 2f64.powi(q.support().len() as i32))
                .sum();
            assert!(mass <= eps);
        }
    }

    // avoidance and pinning
    let e = ClusterExpansion::new(ps, 6).unwrap();
    for y_mask in 1u64..16 {
        let y_len = y_mask.count_ones() as i32;
        for sp in 0..16 {
            assert!(e.avoidance_ratio(y_mask, sp).abs() <= 2f64.powi(y_len));
        }
        for p in [1usize, 2, 3] {
            assert!(e.pinning_tail(y_mask, p) <= y_len as f64 * ctx.eps_tail(p as f64).unwrap());
        }
    }

    // Jacobian global bound
    let engine = ExactEngine::new(&j, &k, &b, ExactCaps::default()).unwrap();
    for w in [set(&[0]), set(&[3, 4]), set(&[7]), set(&[1, 2])] {
        let avg = engine.jacobian_table(std::slice::from_ref(&w), 4).unwrap();
        for (_, _, v) in avg.iter() {
            assert!(v.abs() <= jacobian_global_bound(2.0, w.len()));
        }
    }
}

#[test]
fn support_count_zero_distance() {
    let (j, b) = chain(16, 0.1);
    // bonds inside block 3 plus the two crossing its boundary
    assert_eq!(count_supports(&b, &set(&[3]), 0, j.supports()).unwrap(), 3);
}
