//! Subcommand bodies. Each returns its output files in memory; [`write_run`]
//! puts them on disk next to a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use rgcluster::bounds::{
    count_supports, decay_constant, decreasing_from, domination_constant, fit_power_law,
    linearization_bound, linearization_series, shell_constant,
};
use rgcluster::cluster::{jacobian_global_bound, kp_check};
use rgcluster::kernel::{validate_table, KernelKind};
use rgcluster::{
    apply_linearization, enumerate_polymers, BoundsContext, ClusterExpansion, Direction, Error,
    ExactEngine, ExpansionModel, JacobianTable, SiteSet,
};

use crate::config::{read_kernel_table, Experiment, KernelKindSpec};
use crate::error::{CliError, CliResult};
use crate::table::{self, num, sha256_hex, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    ValidateKernel,
    Exact,
    Expand,
    KpCheck,
    Bounds,
    BandProfile,
    Linearize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ValidateKernel => "validate-kernel",
            Command::Exact => "exact",
            Command::Expand => "expand",
            Command::KpCheck => "kp-check",
            Command::Bounds => "bounds",
            Command::BandProfile => "band-profile",
            Command::Linearize => "linearize",
        }
    }
}

/// Files produced by one run, plus a validation failure that still wrote a report.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<(String, String)>,
    pub failure: Option<String>,
}

impl Report {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.add(name, text);
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }
}

pub fn run(command: Command, exp: &Experiment, direction: Option<&Path>) -> CliResult<Report> {
    match command {
        Command::ValidateKernel => validate_kernel(exp),
        Command::Exact => exact(exp),
        Command::Expand => expand(exp),
        Command::KpCheck => kp(exp),
        Command::Bounds => bounds(exp),
        Command::BandProfile => band_profile(exp),
        Command::Linearize => linearize(exp, direction),
    }
}

/// Writes every output file and `manifest.json` into `out`.
pub fn write_run(out: &Path, command: Command, exp: &Experiment, report: &Report) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let mut outputs = Vec::new();
    for (name, contents) in &report.files {
        table::write_file(&out.join(name), contents)?;
        outputs.push(json!({ "file": name, "sha256": sha256_hex(contents.as_bytes()) }));
    }
    let c = &exp.config.caps;
    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(&exp.config).expect("config serializes"),
        "caps": {
            "n_max": c.n_max,
            "q_cap": c.q_cap,
            "p_max": c.p_max,
            "hypergraph_guard": c.hypergraph_guard,
            "max_sites": c.max_sites,
            "max_image_sites": c.max_image_sites,
            "max_range": c.max_range,
            "max_cluster_order": rgcluster::cluster::MAX_ORDER,
        },
        "status": match &report.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        },
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("json values serialize");
    text.push('\n');
    table::write_file(&out.join("manifest.json"), &text)
}

/// All subsets of `0..n` with `min <= |X| <= max`, by size then lexicographically.
pub fn subsets(n: usize, min: usize, max: usize) -> Vec<SiteSet> {
    fn extend(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<SiteSet>) {
        if cur.len() == k {
            out.push(SiteSet::new(cur.iter().copied()));
            return;
        }
        for i in start..n {
            cur.push(i);
            extend(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in min..=max.min(n) {
        extend(n, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

fn bool_str(b: bool) -> String {
    if b { "pass" } else { "fail" }.into()
}

fn context(exp: &Experiment) -> CliResult<BoundsContext> {
    let (norm, d, range) = exp.norm_d_range()?;
    Ok(BoundsContext::new(
        exp.config.r,
        exp.config.m,
        exp.blocking.block_size(),
        norm,
        d,
        range,
    )?)
}

fn validate_kernel(exp: &Experiment) -> CliResult<Report> {
    let s = exp.blocking.block_size();
    let report = if exp.config.kernel.kind == KernelKindSpec::Custom {
        let (ks, tbl) = read_kernel_table(&exp.config.kernel, &exp.base_dir)?;
        if ks != s {
            return Err(Error::Config(format!(
                "kernel table is for blocks of {ks} sites, blocking has {s}"
            ))
            .into());
        }
        validate_table(ks, &tbl, KernelKind::Custom)
    } else {
        exp.kernel()?.validate()
    };
    let mut t = Table::new(&[
        "kernel",
        "block_size",
        "exact_arithmetic",
        "axiom",
        "result",
        "worst_violation",
        "failing_config",
    ]);
    for c in &report.checks {
        t.push(vec![
            report.kind.to_string(),
            report.block_size.to_string(),
            report.exact_arithmetic.to_string(),
            c.axiom.clone(),
            bool_str(c.passed),
            num(c.worst_violation),
            c.failing_config
                // same bit order as kernel table files: character i is spin i
                .map(|cfg| {
                    (0..report.block_size)
                        .map(|i| if cfg >> i & 1 == 1 { '1' } else { '0' })
                        .collect()
                })
                .unwrap_or_else(|| "-".into()),
        ]);
    }
    let mut out = Report::default();
    out.add("kernel_report.tsv", t.render());
    if !report.passed {
        out.failure = Some(format!("kernel axioms violated: {report}"));
    }
    Ok(out)
}

fn exact(exp: &Experiment) -> CliResult<Report> {
    let kernel = exp.kernel()?;
    let a = &exp.config.analysis;
    let engine = ExactEngine::new(&exp.j, &kernel, &exp.blocking, exp.config.caps.exact())?;
    let w = engine.frozen_partition_table()?;
    let logw = engine.log_partition_table()?;
    let jp = engine.renormalized_couplings()?;
    let image = exp.blocking.image();

    let mut couplings = Table::new(&["Z", "J_prime"]);
    for (z, v) in jp.iter().filter(|(z, _)| z.len() <= a.z_max) {
        couplings.push(vec![table::image_set(image, z), num(v)]);
    }

    let all = SiteSet::new(0..exp.blocking.num_blocks());
    let mut partition = Table::new(&[
        "block_spins",
        "W",
        "log_W",
        "log_W_from_J_prime",
        "residual",
    ]);
    for (sp, (wv, lv)) in w.iter().zip(&logw).enumerate() {
        let rec = jp.log_weight(sp as u64);
        partition.push(vec![
            table::spins(sp as u64, &all),
            num(*wv),
            num(*lv),
            num(rec),
            num((rec - lv).abs()),
        ]);
    }

    let ws = subsets(exp.lattice.num_sites(), 1, a.w_max);
    let jac = engine.jacobian_table(&ws, a.z_max)?;
    let mut report = Report::default();
    report.add("couplings.tsv", couplings.render());
    report.add("partition.tsv", partition.render());
    report.add("jacobian.tsv", jacobian_rows(exp, &jac).render());
    Ok(report)
}

fn jacobian_rows(exp: &Experiment, jac: &JacobianTable) -> Table {
    let mut t = Table::new(&["Z", "W", "dJ_prime_dJ"]);
    for (z, w, v) in jac.iter() {
        t.push(vec![
            table::image_set(exp.blocking.image(), z),
            table::set(&exp.lattice, w),
            num(v),
        ]);
    }
    t
}

/// Exact log W when the window is small enough; `None` on a cap refusal.
fn exact_log_w(
    exp: &Experiment,
    kernel: &rgcluster::Kernel,
) -> CliResult<Option<(Vec<f64>, rgcluster::RenormalizedInteraction)>> {
    let attempt = ExactEngine::new(&exp.j, kernel, &exp.blocking, exp.config.caps.exact())
        .and_then(|e| Ok((e.log_partition_table()?, e.renormalized_couplings()?)));
    match attempt {
        Ok(v) => Ok(Some(v)),
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn expand(exp: &Experiment) -> CliResult<Report> {
    let kernel = exp.kernel()?;
    let caps = exp.config.caps;
    let image = exp.blocking.image();
    let polymers = enumerate_polymers(&exp.j, &kernel, &exp.blocking, caps.polymer())?;
    let expansion = ClusterExpansion::new(polymers, caps.p_max)?;
    let exact = exact_log_w(exp, &kernel)?;

    let mut pt = Table::new(&["support", "size", "links", "sup_abs_weight"]);
    let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
    for p in expansion.polymers() {
        *by_size.entry(p.support().len()).or_default() += 1;
        let hist = p
            .link_histogram()
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        pt.push(vec![
            table::image_set(image, p.support()),
            p.support().len().to_string(),
            hist,
            num(p.sup_abs()),
        ]);
    }

    let configs = 1u64 << exp.blocking.num_blocks();
    let mut residual = vec![0.0f64; caps.p_max];
    if let Some((logw, _)) = &exact {
        for sp in 0..configs {
            let mut acc = 0.0;
            for (p, v) in expansion.log_w_by_order(sp).into_iter().enumerate() {
                acc += v;
                residual[p] = residual[p].max((acc - logw[sp as usize]).abs());
            }
        }
    }
    let counts = expansion.term_counts();
    let mut et = Table::new(&["p_max", "clusters", "max_residual"]);
    for p in 0..caps.p_max {
        et.push(vec![
            (p + 1).to_string(),
            counts[..=p].iter().sum::<usize>().to_string(),
            if exact.is_some() {
                num(residual[p])
            } else {
                "NA".into()
            },
        ]);
    }

    let jp = expansion.couplings()?;
    let mut ct = Table::new(&["Z", "J_prime_expansion", "J_prime_exact", "witness"]);
    for (z, v) in jp
        .iter()
        .filter(|(z, _)| z.len() <= exp.config.analysis.z_max)
    {
        ct.push(vec![
            table::image_set(image, z),
            num(v),
            exact
                .as_ref()
                .map(|(_, e)| num(e.get(z)))
                .unwrap_or_else(|| "NA".into()),
            expansion
                .support_witness(z)
                .map(|s| table::image_set(image, &s))
                .unwrap_or_else(|| "-".into()),
        ]);
    }

    let summary = json!({
        "polymers": expansion.polymers().len(),
        "polymers_by_support_size": by_size,
        "clusters_by_order": counts,
        "exact_available": exact.is_some(),
        "max_residual": exact.as_ref().map(|_| residual.last().copied().unwrap_or(0.0)),
    });
    let mut report = Report::default();
    report.add("polymers.tsv", pt.render());
    report.add("expansion.tsv", et.render());
    report.add("expansion_couplings.tsv", ct.render());
    report.add_json("expansion_summary.json", &summary);
    Ok(report)
}

/// Polymer supports plus `samples` seeded random image sets.
fn kp_spots(exp: &Experiment, supports: &[SiteSet]) -> Vec<SiteSet> {
    let mut spots: Vec<SiteSet> = supports.to_vec();
    let n = exp.blocking.num_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(exp.config.seed);
    for _ in 0..exp.config.analysis.spot_samples {
        let k = rng.random_range(1..=n.min(4));
        spots.push(SiteSet::new(sample(&mut rng, n, k)));
    }
    spots.sort();
    spots.dedup();
    spots
}

fn kp(exp: &Experiment) -> CliResult<Report> {
    let kernel = exp.kernel()?;
    let m = exp.config.m;
    let image = exp.blocking.image();
    let polymers = enumerate_polymers(&exp.j, &kernel, &exp.blocking, exp.config.caps.polymer())?;
    let supports: Vec<SiteSet> = polymers.iter().map(|p| p.support().clone()).collect();
    let spots = kp_spots(exp, &supports);
    let kp = kp_check(&polymers, m, exp.blocking.num_blocks(), &spots)?;

    let mut st = Table::new(&["site", "sum", "limit", "result"]);
    for s in &kp.sites {
        st.push(vec![
            format!("y{}", table::site(image, s.site)),
            num(s.sum),
            num(kp.limit),
            bool_str(s.passed),
        ]);
    }
    let mut spt = Table::new(&["set", "sum", "limit", "result"]);
    for s in &kp.spots {
        spt.push(vec![
            table::image_set(image, &s.set),
            num(s.sum),
            num(s.limit),
            bool_str(s.passed),
        ]);
    }

    let ctx = context(exp)?;
    let failing_sites: Vec<String> = kp
        .sites
        .iter()
        .filter(|s| !s.passed)
        .map(|s| format!("y{}", table::site(image, s.site)))
        .collect();
    let certificate = json!({
        "passed": kp.passed,
        "weight_base": m,
        "limit": kp.limit,
        "polymers": polymers.len(),
        "max_site_sum": kp.sites.iter().map(|s| s.sum).fold(0.0, f64::max),
        "spots_checked": kp.spots.len(),
        "failing_sites": failing_sites,
        "failing_spots": kp.spots.iter().filter(|s| !s.passed).count(),
        "threshold": {
            "norm": ctx.norm,
            "body_bound": ctx.d,
            "range": ctx.range,
            "threshold": ctx.threshold(),
            "passes": ctx.passes_threshold(),
            "rho": ctx.rho(),
        },
    });
    let mut report = Report::default();
    report.add("kp_sites.tsv", st.render());
    report.add("kp_spots.tsv", spt.render());
    report.add_json("kp_certificate.json", &certificate);
    if !kp.passed {
        report.failure = Some("Kotecky-Preiss condition fails".into());
    }
    Ok(report)
}

fn bounds(exp: &Experiment) -> CliResult<Report> {
    let ctx = context(exp)?;
    let a = &exp.config.analysis;
    let n_max = exp.config.caps.n_max;

    let a_bar: Vec<_> = (1..=n_max)
        .map(|n| ctx.a_bar(n))
        .collect::<Result<_, _>>()?;
    let below = ctx.rho() < 1.0;
    let eps: Vec<Value> = if below {
        (0..=n_max)
            .map(|p| Ok(json!({ "p": p, "eps": ctx.eps_tail(p as f64)? })))
            .collect::<Result<_, Error>>()?
    } else {
        Vec::new()
    };
    let w_len = a.w_max.max(1);
    let band = if below {
        Some(ctx.band_bound(w_len, a.band_p, a.band_q, a.band_kc)?)
    } else {
        None
    };
    let scale = 2.0 * ctx.s as f64 * ctx.norm;
    let z = if scale > 0.0 {
        0.5 * ctx.c() * ctx.c() / scale
    } else {
        1.0
    };
    let generating = ctx.generating_check(z, n_max)?;
    let series = linearization_series(a.alpha, exp.lattice.dimension(), a.series_tolerance)?;

    // n(E) around the image origin
    let origin = SiteSet::singleton(0);
    let mut n_e = Vec::new();
    for e in 0..=a.e_max {
        n_e.push((
            e,
            count_supports(&exp.blocking, &origin, e, exp.j.supports())?,
        ));
    }
    let points: Vec<(f64, f64)> = n_e
        .iter()
        .map(|&(e, n)| ((e + 1) as f64, n as f64))
        .collect();
    let fit = fit_power_law(&points).ok();

    let mut report = Report::default();
    let mut profile_json = Value::Null;
    if below {
        let profile = ctx.subexp_profile(w_len, a.alpha, a.beta, &a.l_values)?;
        let mut pt = Table::new(&[
            "l",
            "W_len",
            "P",
            "Q",
            "K",
            "bound",
            "ln_bound",
            "activation",
        ]);
        for row in &profile {
            pt.push(vec![
                num(row.distance.unwrap_or(f64::NAN)),
                row.w_len.to_string(),
                num(row.p),
                num(row.q),
                num(row.kc),
                num(row.value),
                num(row.ln_value),
                num(row.activation),
            ]);
        }
        report.add("subexp_profile.tsv", pt.render());
        profile_json = json!({
            "domination_constant": domination_constant(&profile, a.alpha),
            "decreasing_from": decreasing_from(&profile),
        });
    }

    let mut sweep = Table::new(&["s", "M", "eps", "c", "threshold"]);
    for s in 1..=4usize {
        for i in 1..=8 {
            let m = 1.0 + (exp.config.r.exp() - 1.0) * i as f64 / 9.0;
            let c = BoundsContext::new(exp.config.r, m, s, 0.0, ctx.d, ctx.range)?;
            sweep.push(vec![
                s.to_string(),
                num(m),
                num(c.eps()),
                num(c.c()),
                num(c.threshold()),
            ]);
        }
    }
    report.add("threshold_sweep.tsv", sweep.render());

    let doc = json!({
        "context": ctx,
        "eps": ctx.eps(),
        "c": ctx.c(),
        "rho": ctx.rho(),
        "threshold": ctx.threshold(),
        "passes_threshold": ctx.passes_threshold(),
        "rooted_series_bound": if below { Some(ctx.rooted_series_bound()) } else { None },
        "a_bar": a_bar,
        "eps_tail": eps,
        "band_bound": band,
        "generating_check": generating,
        "global_jacobian_bound": jacobian_global_bound(ctx.m, w_len),
        "linearization_series": series,
        "support_counts": n_e.iter().map(|&(e, n)| json!({ "e": e, "count": n })).collect::<Vec<_>>(),
        "support_count_fit": fit.map(|(c, k)| json!({ "constant": c, "exponent": k })),
        "subexp_profile": profile_json,
    });
    report.add_json("bounds.json", &doc);
    Ok(report)
}

struct Entry {
    w: SiteSet,
    z: SiteSet,
    l: usize,
    value: f64,
}

fn jacobian_entries(exp: &Experiment, ws: &[SiteSet], zs: &[SiteSet]) -> CliResult<Vec<Entry>> {
    let kernel = exp.kernel()?;
    let a = &exp.config.analysis;
    let z_max = zs.iter().map(SiteSet::len).max().unwrap_or(0);
    let mut values: Vec<(SiteSet, SiteSet, f64)> = Vec::new();
    if a.expansion {
        let model = ExpansionModel::new(
            &exp.j,
            &kernel,
            &exp.blocking,
            exp.config.caps.polymer(),
            exp.config.caps.p_max,
            exp.config.m,
        )?;
        for w in ws {
            let split = (w.len() as f64 * a.band_p).floor() as usize;
            for est in model.jacobians(w, zs, split)? {
                values.push((w.clone(), est.z, est.value));
            }
        }
    } else {
        let engine = ExactEngine::new(&exp.j, &kernel, &exp.blocking, exp.config.caps.exact())?;
        let table = engine.jacobian_table(ws, z_max)?;
        for (z, w, v) in table.iter() {
            if zs.binary_search_by(|x| cmp_sets(x, z)).is_ok() {
                values.push((w.clone(), z.clone(), v));
            }
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (w, z, value) in values {
        let l = exp.blocking.image_distance(&w, &z)?;
        out.push(Entry { w, z, l, value });
    }
    out.sort_by(|x, y| cmp_sets(&x.w, &y.w).then_with(|| cmp_sets(&x.z, &y.z)));
    Ok(out)
}

/// Size first, then lexicographic; the order [`subsets`] produces.
fn cmp_sets(a: &SiteSet, b: &SiteSet) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

fn band_profile(exp: &Experiment) -> CliResult<Report> {
    let ctx = context(exp)?;
    let a = &exp.config.analysis;
    let ws = subsets(exp.lattice.num_sites(), 1, a.w_max);
    let zs = subsets(exp.blocking.num_blocks(), 1, a.z_max);
    let entries = jacobian_entries(exp, &ws, &zs)?;
    let image = exp.blocking.image();

    let mut bands = BTreeMap::new();
    for w_len in 1..=a.w_max {
        let b = if ctx.rho() < 1.0 {
            Some(ctx.band_bound(w_len, a.band_p, a.band_q, a.band_kc)?)
        } else {
            None
        };
        bands.insert(w_len, b);
    }

    let mut et = Table::new(&[
        "W",
        "Z",
        "l",
        "value",
        "global_bound",
        "band_bound",
        "activated",
    ]);
    // (|W|, l) -> (max |value|, count)
    let mut profile: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for e in &entries {
        let band = bands[&e.w.len()];
        let activated = band.map(|b| e.l as f64 > b.activation).unwrap_or(false);
        et.push(vec![
            table::set(&exp.lattice, &e.w),
            table::image_set(image, &e.z),
            e.l.to_string(),
            num(e.value),
            num(jacobian_global_bound(ctx.m, e.w.len())),
            band.map(|b| num(b.value)).unwrap_or_else(|| "NA".into()),
            activated.to_string(),
        ]);
        let slot = profile.entry((e.w.len(), e.l)).or_insert((0.0, 0));
        slot.0 = slot.0.max(e.value.abs());
        slot.1 += 1;
    }

    let mut pt = Table::new(&[
        "W_len",
        "l",
        "max_abs",
        "count",
        "global_bound",
        "band_bound",
        "activation",
        "activated",
    ]);
    for (&(w_len, l), &(max_abs, count)) in &profile {
        let band = bands[&w_len];
        pt.push(vec![
            w_len.to_string(),
            l.to_string(),
            num(max_abs),
            count.to_string(),
            num(jacobian_global_bound(ctx.m, w_len)),
            band.map(|b| num(b.value)).unwrap_or_else(|| "NA".into()),
            band.map(|b| num(b.activation))
                .unwrap_or_else(|| "NA".into()),
            band.map(|b| l as f64 > b.activation)
                .unwrap_or(false)
                .to_string(),
        ]);
    }
    let mut report = Report::default();
    report.add("band_profile.tsv", pt.render());
    report.add("band_entries.tsv", et.render());
    Ok(report)
}

fn linearize(exp: &Experiment, direction: Option<&Path>) -> CliResult<Report> {
    let a = &exp.config.analysis;
    let path = direction
        .map(Path::to_path_buf)
        .or_else(|| a.direction.as_ref().map(|p| exp.resolve(p)))
        .ok_or_else(|| {
            CliError::Usage(
                "linearize needs a direction file (--direction or analysis.direction)".into(),
            )
        })?;
    let k = exp.read_direction(&path)?;
    let ws: Vec<SiteSet> = k
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(w, _)| w.clone())
        .collect();
    let zs = subsets(exp.blocking.num_blocks(), 1, a.z_max);
    let sup = k.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let image = exp.blocking.image();

    let kernel = exp.kernel()?;
    let engine = ExactEngine::new(&exp.j, &kernel, &exp.blocking, exp.config.caps.exact())?;
    let jac = engine.jacobian_table(&ws, a.z_max)?;
    let active = Direction(rgcluster::Interaction::from_couplings(
        exp.lattice.clone(),
        k.iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(w, v)| (w.clone(), v)),
    )?);

    // calibration from the measured entries
    let mut decay = Vec::new();
    let mut shell = 0.0f64;
    for z in &zs {
        let mut counts: Vec<usize> = Vec::new();
        for w in &ws {
            let l = exp.blocking.image_distance(w, z)?;
            if counts.len() <= l {
                counts.resize(l + 1, 0);
            }
            counts[l] += 1;
            decay.push((l, jac.get(z, w).unwrap_or(0.0)));
        }
        shell = shell.max(shell_constant(&counts, exp.lattice.dimension()));
    }
    let c_decay = decay_constant(&decay, a.alpha);
    let series = linearization_series(a.alpha, exp.lattice.dimension(), a.series_tolerance)?;
    let bound = linearization_bound(sup, c_decay * shell, series)?;

    let mut t = Table::new(&["Z", "LK", "bound"]);
    let mut max_value = 0.0f64;
    for z in &zs {
        let v = apply_linearization(&jac, &active, z)?;
        max_value = max_value.max(v.abs());
        t.push(vec![table::image_set(image, z), num(v), num(bound.value)]);
    }
    let summary = json!({
        "direction_sup": sup,
        "direction_terms": ws.len(),
        "decay_constant": c_decay,
        "shell_constant": shell,
        "bound": bound,
        "max_abs_value": max_value,
        "dominated": max_value <= bound.value,
    });
    let mut report = Report::default();
    report.add("linearization.tsv", t.render());
    report.add_json("linearization_summary.json", &summary);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_ordered_by_size() {
        let s = subsets(4, 1, 2);
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], SiteSet::singleton(0));
        assert_eq!(s[4], SiteSet::new([0, 1]));
        assert!(s.windows(2).all(|p| cmp_sets(&p[0], &p[1]).is_lt()));
        assert_eq!(subsets(3, 0, 0), vec![SiteSet::empty()]);
    }
}
