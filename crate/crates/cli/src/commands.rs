use crate::config::{rational_list, usize_list, ExperimentConfig};
use crate::output::{write_instance, InstanceStatus, Output, Table};
use crate::CliError;
use iet_core::aiet::cf::{continued_fraction_rational, golden, trusted_prefix, CFExpansion};
use iet_core::aiet::circle::{dynamical_partition, rotation_number, Arc, PLCircleMap};
use iet_core::aiet::measure::{dimension_trace, first_level_below, measure_from_orbit};
use iet_core::aiet::realize_along_path;
use iet_core::analysis::{check_criterion_over_iet, generic_condition_scan, CriterionOptions, CriterionReport, Schedule};
use iet_core::combinat::{canonical_rotation_perm, rauzy_class, RvType, DEFAULT_CLASS_CAP};
use iet_core::iet::{build_iet, Iet};
use iet_core::num::{format_rational, parse_rational, random_simplex_point, rat, sample_rng, BigReal, Rational};
use iet_core::renorm::{is_infinity_complete, orbit, win_counts};
use iet_core::spectral::{log_slope_membership, lyapunov_top, rotation_stable_spaces, Membership, Normalization};
use num_bigint::BigInt;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn rationals(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn eps_name(e: RvType) -> &'static str {
    match e {
        RvType::Top => "top",
        RvType::Bottom => "bottom",
    }
}

fn fib_pair(m: usize) -> (BigInt, BigInt) {
    let (mut a, mut b) = (BigInt::one(), BigInt::one());
    for _ in 0..m {
        let c = &a + &b;
        a = b;
        b = c;
    }
    (a, b)
}

/// IET from `--lengths` (or random lengths from `--seed`) on `--perm`/`--d`.
fn iet_from_config(cfg: &ExperimentConfig, blocks: usize) -> Result<Iet, CliError> {
    let perm = cfg.perm()?;
    let lambda = match cfg.lengths.as_deref() {
        Some("golden") => {
            if perm.d() != 2 {
                return Err(bad("golden lengths need d = 2"));
            }
            // F_m / F_{m+1} shares its first m quotients with the golden mean
            let (a, b) = fib_pair(2 * blocks + 20);
            let g = Rational::new(a, b);
            vec![&g * &g, g]
        }
        Some(s) => rational_list(s)?,
        None => {
            let mut rng = sample_rng(cfg.seed()?, 0);
            random_simplex_point(&mut rng, perm.d(), cfg.bits.unwrap_or(64 + 8 * blocks as u64))
        }
    };
    Ok(build_iet(lambda, perm)?)
}

fn real(s: &str, p: usize) -> Result<BigReal, CliError> {
    if s == "golden" {
        return Ok(golden(p));
    }
    match parse_rational(s) {
        Ok(r) if s.contains('/') => Ok(BigReal::from_rational(&r, p)),
        _ => Ok(BigReal::parse(s, p)?),
    }
}

/// Rigid rotation by `--alpha`, or the two-break map from `--break-point`,
/// `--s1` and `--shift`.
fn circle_map(cfg: &ExperimentConfig) -> Result<PLCircleMap, CliError> {
    let p = cfg.precision();
    match (&cfg.break_point, &cfg.alpha) {
        (Some(c), _) => {
            let s1 = cfg.s1.as_deref().ok_or_else(|| bad("a two-break map needs --s1"))?;
            let shift = cfg.shift.as_deref().unwrap_or("0");
            Ok(PLCircleMap::two_break(&real(c, p)?, &real(s1, p)?, &real(shift, p)?, p)?)
        }
        (None, Some(a)) => Ok(PLCircleMap::rotation(&real(a, p)?, p)),
        (None, None) => Err(bad("give --alpha or --break-point/--s1")),
    }
}

pub fn rauzy_class_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let pi = cfg.perm()?;
    let cap = cfg.max_iter.map_or(DEFAULT_CLASS_CAP, |x| x as usize);
    let class = rauzy_class(&pi, cap)?;
    let mut succ = vec![[0usize; 2]; class.len()];
    for &(a, e, b) in &class.arcs {
        succ[a][e.index() as usize] = b;
    }
    let mut table = Table::new(&["index", "perm", "rotation_type", "top_successor", "bottom_successor"]);
    for (i, p) in class.perms.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            p.to_string(),
            p.is_rotation_type().to_string(),
            succ[i][RvType::Top.index() as usize].to_string(),
            succ[i][RvType::Bottom.index() as usize].to_string(),
        ]);
    }
    let mut json = class.to_json();
    json["size"] = json!(class.len());
    json["start"] = json!(pi.to_string());
    json["rotation_type"] =
        json!(class.perms.iter().enumerate().filter(|(_, p)| p.is_rotation_type()).map(|(i, _)| i).collect::<Vec<_>>());
    Ok(Output::single(json, Some(table)))
}

pub fn orbit_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let blocks = cfg.blocks(20);
    let t = iet_from_config(cfg, blocks)?;
    let rec = orbit(&t, blocks)?;
    let mut table = Table::new(&[
        "n", "z", "eps", "winner", "loser", "perm", "lambda", "heights", "log10_max_height_f64", "tiling",
    ]);
    let mut levels = Vec::new();
    for n in 0..=rec.n_blocks() {
        let lam = rec.lambda(n);
        let (z, eps, w, l) = match n.checked_sub(1).map(|k| &rec.blocks[k]) {
            Some(b) => (b.z.to_string(), eps_name(b.eps).to_string(), b.perm_before.symbol(b.winner).to_string(), b.perm_before.symbol(b.first_loser).to_string()),
            None => Default::default(),
        };
        let perm = &rec.perms[n];
        let heights: Vec<String> = rec.heights[n].iter().map(|h| h.to_string()).collect();
        let tiling = format_rational(&rec.tiling_sum(n));
        table.push(vec![
            n.to_string(),
            z,
            eps,
            w,
            l,
            perm.to_string(),
            join(&rationals(&lam)),
            join(&heights),
            format!("{:.17e}", rec.log10_max_height(n)),
            tiling.clone(),
        ]);
        levels.push(json!({"n": n, "perm": perm, "lambda": rationals(&lam), "heights": heights, "tiling": tiling}));
    }
    let last: Vec<Vec<String>> =
        rec.cumulative[rec.n_blocks()].rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
    let json = json!({
        "perm": t.perm(),
        "lambda": rationals(t.lambda()),
        "z": rec.z_sequence(),
        "levels": levels,
        "cumulative": last,
    });
    Ok(Output::single(json, Some(table)))
}

pub fn path_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let blocks = cfg.blocks(20);
    let t = iet_from_config(cfg, blocks)?;
    let rec = orbit(&t, blocks)?;
    let path = rec.path();
    let mut table = Table::new(&["run", "perm", "eps", "z"]);
    for (i, r) in path.iter().enumerate() {
        table.push(vec![i.to_string(), r.perm.to_string(), eps_name(r.eps).to_string(), r.z.to_string()]);
    }
    let window = cfg.max_iter.unwrap_or(u64::MAX);
    let wins = win_counts(&path, window);
    let json = json!({
        "perm": t.perm(),
        "runs": path.iter().map(|r| json!({"perm": r.perm, "eps": r.eps, "z": r.z})).collect::<Vec<_>>(),
        "wins": t.perm().alphabet().iter().zip(&wins).map(|(a, w)| json!({"letter": a, "wins": w})).collect::<Vec<_>>(),
        "infinity_complete": is_infinity_complete(&path, window),
    });
    Ok(Output::single(json, Some(table)))
}

pub fn lyapunov_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let pi = cfg.perm()?;
    let norm = match cfg.normalization.as_deref().unwrap_or("per-zorich-block") {
        "per-zorich-block" => Normalization::PerZorichBlock,
        "per-rv-step" => Normalization::PerRvStep,
        other => return Err(bad(format!("unknown normalization {other:?}"))),
    };
    let est = lyapunov_top(&pi, cfg.blocks(400), cfg.samples(100), cfg.seed()?, norm)?;
    let mut table = Table::new(&["sample", "per_block_f64", "per_rv_step_f64"]);
    for s in &est.per_sample {
        table.push(vec![s.index.to_string(), format!("{:.17e}", s.per_block), format!("{:.17e}", s.per_rv_step)]);
    }
    let ok: std::collections::HashSet<usize> = est.per_sample.iter().map(|s| s.index).collect();
    let instances = (0..est.samples)
        .map(|i| {
            if ok.contains(&i) {
                InstanceStatus::ok(i)
            } else {
                InstanceStatus { index: i, status: "domain_error".into(), detail: Some("did not renormalize".into()) }
            }
        })
        .collect();
    let mut json = serde_json::to_value(&est)?;
    json["perm"] = json!(pi);
    Ok(Output { json, table: Some(table), instances })
}

fn rotation_sample(seed: u64, i: usize, d: usize, bits: u64) -> Result<Iet, iet_core::Error> {
    let mut rng = sample_rng(seed, i as u64);
    build_iet(random_simplex_point(&mut rng, d, bits), canonical_rotation_perm(d)?)
}

/// Runs `f` over sample indices in parallel, writing each instance record,
/// and returns results in index order.
fn per_instance<T: Send>(
    cfg: &ExperimentConfig,
    command: &str,
    samples: usize,
    f: impl Fn(usize) -> Result<(T, Value), iet_core::Error> + Sync,
) -> Result<Vec<(InstanceStatus, Option<T>, Value)>, CliError> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let (st, val, v) = match f(i) {
                Ok((x, v)) => (InstanceStatus::ok(i), Some(x), v),
                Err(e) => {
                    let st = InstanceStatus::from_error(i, &e);
                    let v = json!({"index": i, "status": st.status, "detail": st.detail});
                    (st, None, v)
                }
            };
            write_instance(cfg, command, i, &v)?;
            Ok((st, val, v))
        })
        .collect()
}

pub fn scan_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let d = cfg.dim()?;
    let c0 = cfg.c0("1/64")?;
    let sched = Schedule::parse(cfg.schedule.as_deref().unwrap_or("log2"))?;
    let blocks = cfg.blocks(2000);
    let samples = cfg.samples(100);
    let seed = cfg.seed()?;
    let bits = cfg.bits.unwrap_or(64 + 8 * blocks as u64);
    let runs = per_instance(cfg, "scan", samples, |i| {
        let t = rotation_sample(seed, i, d, bits)?;
        let rep = generic_condition_scan(&t, &c0, &sched, blocks)?;
        let v = json!({"index": i, "lambda": rationals(t.lambda()), "report": rep});
        Ok((rep, v))
    })?;
    let mut table =
        Table::new(&["sample", "n", "rv_steps", "c", "min_length_ratio_f64", "min_lambda_f64", "min_height_ratio_f64"]);
    let mut with_hit = 0;
    for (st, rep, _) in &runs {
        let Some(rep) = rep else { continue };
        with_hit += usize::from(!rep.hits.is_empty());
        for h in &rep.hits {
            table.push(vec![
                st.index.to_string(),
                h.n.to_string(),
                h.rv_steps.to_string(),
                h.c.to_string(),
                format!("{:.17e}", h.min_length_ratio),
                format!("{:.17e}", h.min_lambda),
                format!("{:.17e}", h.min_height_ratio),
            ]);
        }
    }
    let json = json!({
        "d": d,
        "c0": format_rational(&c0),
        "schedule": sched.name(),
        "blocks": blocks,
        "samples": samples,
        "samples_with_hit": with_hit,
        "fraction_with_hit": with_hit as f64 / samples as f64,
        "runs": runs.iter().map(|r| r.2.clone()).collect::<Vec<_>>(),
    });
    Ok(Output { json, table: Some(table), instances: runs.into_iter().map(|r| r.0).collect() })
}

/// `a e_1 + b e_2` over a basis of `E_cs`, or a multiple of the `E_s`
/// generator, with `a, b` uniform in `[-1, 1]` on a grid of 1/1000.
fn sample_omega(t: &Iet, rng: &mut impl Rng, stable: bool) -> Result<Vec<Rational>, iet_core::Error> {
    let (es, ecs) = rotation_stable_spaces(t)?;
    let mut coef = || rat(rng.gen_range(-1000..=1000), 1000);
    let omega: Vec<Rational> = if stable {
        let c = coef();
        es.basis[0].iter().map(|x| x * &c).collect()
    } else {
        let (a, b) = (coef(), coef());
        ecs.basis[0].iter().zip(&ecs.basis[1]).map(|(x, y)| x * &a + y * &b).collect()
    };
    let want = if stable { Membership::InEs } else { Membership::InEcsNotEs };
    if log_slope_membership(&omega, t)? != want {
        return Err(iet_core::Error::Invalid("sampled log-slope fell in a smaller subspace".into()));
    }
    Ok(omega)
}

/// Either the single instance given by `--lengths`/`--omega`, or sample `i`.
fn slope_instance(cfg: &ExperimentConfig, i: usize, d: usize, bits: u64, salt: u64) -> Result<(Iet, Vec<Rational>), CliError> {
    if cfg.lengths.is_some() {
        let t = iet_from_config(cfg, 0)?;
        let omega = match &cfg.omega {
            Some(s) => rational_list(s)?,
            None => sample_omega(&t, &mut sample_rng(cfg.seed()?, salt), cfg.stable)?,
        };
        return Ok((t, omega));
    }
    let mut rng = sample_rng(cfg.seed()?.wrapping_add(salt), i as u64);
    let t = build_iet(random_simplex_point(&mut rng, d, bits), canonical_rotation_perm(d)?)?;
    let omega = match &cfg.omega {
        Some(s) => rational_list(s)?,
        None => sample_omega(&t, &mut rng, cfg.stable)?,
    };
    Ok((t, omega))
}

fn core_err(e: CliError) -> iet_core::Error {
    match e {
        CliError::Core(e) => e,
        other => iet_core::Error::Invalid(other.to_string()),
    }
}

pub fn criterion_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let d = cfg.dim()?;
    let c0 = cfg.c0("1/64")?;
    let sched = Schedule::parse(cfg.schedule.as_deref().unwrap_or("log2"))?;
    let blocks = cfg.blocks(2000);
    let samples = if cfg.lengths.is_some() { 1 } else { cfg.samples(10) };
    let bits = cfg.bits.unwrap_or(64 + 8 * blocks as u64);
    let fixed_levels = cfg.levels.as_deref().map(usize_list).transpose()?;
    let mut opts = CriterionOptions { measure_floor: &c0 * &c0, m_target: Some(sched.clone()), ..CriterionOptions::default() };
    if let Some(m) = cfg.m_cap {
        opts.m_cap = m;
    }
    if let Some(f) = cfg.floor_cap {
        opts.floor_cap = f;
    }
    cfg.seed()?;
    let runs = per_instance(cfg, "criterion", samples, |i| {
        let (t, omega) = slope_instance(cfg, i, d, bits, 0).map_err(core_err)?;
        let levels = match &fixed_levels {
            Some(l) => l.clone(),
            None => generic_condition_scan(&t, &c0, &sched, blocks)?.hits.iter().map(|h| h.n as usize).collect(),
        };
        let rep: Option<CriterionReport> =
            if levels.is_empty() { None } else { Some(check_criterion_over_iet(&t, &omega, &levels, &opts)?) };
        let v = json!({
            "index": i,
            "lambda": rationals(t.lambda()),
            "omega": rationals(&omega),
            "levels": levels,
            "report": rep,
        });
        Ok((rep, v))
    })?;
    let mut table = Table::new(&["sample", "n", "letter", "designated", "m", "log_h_f64", "ratio_f64"]);
    for (st, rep, _) in &runs {
        let Some(Some(rep)) = rep else { continue };
        for (row, e) in rep.csv_rows().into_iter().zip(&rep.entries) {
            let [n, letter, m, lh, r] = row;
            table.push(vec![st.index.to_string(), n, letter, e.designated.to_string(), m, lh, r]);
        }
    }
    let json = json!({
        "c0": format_rational(&c0),
        "schedule": sched.name(),
        "samples": samples,
        "runs": runs.iter().map(|r| r.2.clone()).collect::<Vec<_>>(),
    });
    Ok(Output { json, table: Some(table), instances: runs.into_iter().map(|r| r.0).collect() })
}

pub fn dimension_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let d = cfg.dim()?;
    let blocks = cfg.blocks(160);
    let samples = if cfg.lengths.is_some() { 1 } else { cfg.samples(20) };
    let bits = cfg.bits.unwrap_or(64 + 12 * blocks as u64);
    let p = cfg.precision_or(2048);
    cfg.seed()?;
    let runs = per_instance(cfg, "dimension", samples, |i| {
        let (t, omega) = slope_instance(cfg, i, d, bits, 90).map_err(core_err)?;
        let real = realize_along_path(&t, &omega, blocks, p)?;
        // the last block's extent depends on what follows it
        if real.verified_blocks + 1 < blocks {
            return Err(iet_core::Error::PrecisionExhausted(format!(
                "forward run follows {} of {blocks} blocks at {p} bits{}",
                real.verified_blocks,
                real.forward_halt.as_deref().map(|h| format!(" ({h})")).unwrap_or_default()
            )));
        }
        let w = measure_from_orbit(&real.iet_orbit);
        let trace = dimension_trace(&real.trace, &w);
        let level = first_level_below(&trace, -30.0);
        let v = json!({
            "index": i,
            "lambda": rationals(t.lambda()),
            "omega": rationals(&omega),
            "level_below_1e-30": level,
            "estimate": level.map(|n| trace[n].weighted),
        });
        Ok((trace, v))
    })?;
    let mut table = Table::new(&["sample", "n", "log10_max_len_f64", "weighted_f64"]);
    for (st, run, _) in &runs {
        let Some(trace) = run else { continue };
        for l in trace {
            table.push(vec![st.index.to_string(), l.n.to_string(), format!("{:.17e}", l.log10_max_len), format!("{:.17e}", l.weighted)]);
        }
    }
    let json = json!({
        "blocks": blocks,
        "precision_bits": p,
        "subspace": if cfg.stable { "E_s" } else { "E_cs \\ E_s" },
        "runs": runs.iter().map(|r| r.2.clone()).collect::<Vec<_>>(),
    });
    Ok(Output { json, table: Some(table), instances: runs.into_iter().map(|r| r.0).collect() })
}

fn arc_rows(table: &mut Table, kind: &str, arcs: &[Arc]) -> Vec<Value> {
    arcs.iter()
        .map(|a| {
            let (l, len) = (a.left.to_decimal_string(), a.length.to_decimal_string());
            table.push(vec![kind.into(), a.index.to_string(), a.start.to_string(), a.end.to_string(), l.clone(), len.clone()]);
            json!({"index": a.index, "start": a.start, "end": a.end, "left": l, "length": len})
        })
        .collect()
}

pub fn partition_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let f = circle_map(cfg)?;
    let p = cfg.precision();
    let x0 = real(cfg.x0.as_deref().unwrap_or("0"), p)?;
    let n = cfg.n.unwrap_or(3);
    let part = dynamical_partition(&f, &x0, n)?;
    let mut table = Table::new(&["kind", "index", "start", "end", "left", "length"]);
    let long = arc_rows(&mut table, "long", &part.long_arcs);
    let short = arc_rows(&mut table, "short", &part.short_arcs);
    let (nl, ns) = part.counts();
    let json = json!({
        "n": n,
        "precision_bits": p,
        "quotients": part.quotients,
        "q": part.q,
        "counts": [nl, ns],
        "partition_check": part.check_partition().err(),
        "long_arcs": long,
        "short_arcs": short,
    });
    Ok(Output::single(json, Some(table)))
}

pub fn rotation_number_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let f = circle_map(cfg)?;
    let iters = cfg.max_iter.unwrap_or(10_000);
    let (est, bound) = rotation_number(&f, iters)?;
    let json = json!({
        "estimate": est.to_decimal_string(),
        "error_bound": bound.to_decimal_string(),
        "iterations": iters,
        "precision_bits": cfg.precision(),
    });
    let mut table = Table::new(&["estimate", "error_bound", "iterations", "precision_bits"]);
    table.push(vec![est.to_decimal_string(), bound.to_decimal_string(), iters.to_string(), cfg.precision().to_string()]);
    Ok(Output::single(json, Some(table)))
}

pub fn cf_cmd(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let a = cfg.alpha.as_deref().ok_or_else(|| bad("cf needs --alpha"))?;
    let terms = cfg.terms.unwrap_or(20);
    let p = cfg.precision();
    let (cf, exact): (CFExpansion, bool) = match parse_rational(a) {
        Ok(r) if a != "golden" => (continued_fraction_rational(&r, terms)?, true),
        _ => {
            let x = real(a, p)?;
            let cf = trusted_prefix(&x, terms)?;
            if cf.len() < terms {
                return Err(iet_core::Error::PrecisionExhausted(format!(
                    "only {} quotients trusted at {p} bits: [{}]",
                    cf.len(),
                    join(&cf.quotients)
                ))
                .into());
            }
            (cf, false)
        }
    };
    let mut table = Table::new(&["k", "a_k", "p_k", "q_k"]);
    for k in 0..cf.len() {
        table.push(vec![(k + 1).to_string(), cf.quotients[k].to_string(), cf.p[k + 1].to_string(), cf.q[k + 1].to_string()]);
    }
    let json = json!({
        "alpha": a,
        "exact": exact,
        "precision_bits": if exact { None } else { Some(p) },
        "quotients": cf.quotients.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "terminated": cf.terminated,
        "convergents": (1..=cf.len()).map(|k| format!("{}/{}", cf.p[k], cf.q[k])).collect::<Vec<_>>(),
    });
    Ok(Output::single(json, Some(table)))
}
