use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use mmspace::euclid::{sample_body, theorem1_pipeline, ConvexBody, EuclideanSpace};
use mmspace::heisenberg::{
    av_matrix, cc_distance, endpoint_map, invert_endpoint, lambda_map, sample_haar_box, GeodesicParam, HeisPoint,
    HeisenbergSpace, DEFAULT_TOL,
};
use mmspace::mcpcheck::{mcp_verify, ray_coverage, sc_frequency, strong_mcp_verify, MCPProfile, McpConfig};
use mmspace::measure::{pushforward, MeasureRecord, Point};
use mmspace::plans::{
    check_eps_isometry, extend_local_plan, hz_defect, push_plan, rescale_plan, verify_plan, BuildContext,
    BuilderRegistry, EpsIsometry, EpsIsometrySpec, InversionPlan, MapRegistry, PlanDiagnostics, PlanRecord,
    VerifyConfig,
};
use mmspace::space::space_for;
use mmspace::transport::{interpolate, solve_w2};
use mmspace::{DiscreteMeasure, MetricSpace, SpaceTag};
use rand::Rng;
use serde_json::{json, Value};

use crate::config::{
    read_typed, CliError, ExperimentConfig, HeisSuiteParams, McpParams, Params, PlanParams, StabilityParams,
    Theorem1Params, TransportParams,
};
use crate::density::Density;
use crate::fixtures::{load_measure, random_atoms, reference_measure, stream_rng, theorem1_cloud, unit_square};
use crate::output::{num, to_value, Outcome, Table};

// Generator streams under the master seed.
const STREAM_CLOUD: u64 = 0;
const STREAM_SECOND: u64 = 1;
const STREAM_SCAN: u64 = 2;

pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let seed = config.seed;
    match &config.params {
        Params::Theorem1(p) => theorem1(p, seed),
        Params::Mcp(p) => mcp(p, seed),
        Params::Plan(p) => plan(p, seed),
        Params::Transport(p) => transport(p, seed),
        Params::Stability(p) => stability(p, seed),
        Params::HeisSuite(p) => heis_suite(p, seed),
    }
}

fn parse_tag(name: &str, theta: Option<f64>) -> Result<SpaceTag, CliError> {
    SpaceTag::parse(name, theta).map_err(|e| CliError::Usage(e.to_string()))
}

fn theorem1(p: &Theorem1Params, seed: u64) -> Result<Outcome, CliError> {
    let cloud = match &p.input {
        Some(path) => load_measure(path)?,
        None => theorem1_cloud(&p.fixture, p.particles, &mut stream_rng(seed, STREAM_CLOUD))?,
    };
    let mut cfg = p.pipeline.clone();
    cfg.seed = seed;
    let report = theorem1_pipeline(&cloud, &cfg)?;
    let pass = report.pass();
    let mut table = Table::new("singularity_scores", &["cell_size", "score"]);
    for &(cell, score) in &report.singularity_scores {
        table.push(vec![num(cell), num(score)]);
    }
    let witness = (!pass).then(|| {
        let mut failed = Vec::new();
        if !report.convex {
            failed.push("convexity");
        }
        if !report.nondegenerate {
            failed.push("nondegeneracy");
        }
        if !report.absolutely_continuous {
            failed.push("absolute_continuity");
        }
        json!({
            "failed": failed,
            "nondegeneracy": report.witness,
            "convexity_defect": report.convexity_defect,
            "convexity_eps": report.convexity_eps,
            "singularity_scores": report.singularity_scores,
        })
    });
    Ok(Outcome { pass, result: to_value(&report), witness, tables: vec![table], artifacts: Vec::new() })
}

/// Exponent of the sharp profile `(1−t)^N` for the model spaces.
fn natural_exponent(tag: SpaceTag) -> f64 {
    match tag {
        SpaceTag::Euclid(d) => d as f64,
        SpaceTag::Heisenberg(n) => (2 * n + 3) as f64,
        SpaceTag::Sphere2 | SpaceTag::Cone { .. } => 2.0,
    }
}

fn mcp(p: &McpParams, seed: u64) -> Result<Outcome, CliError> {
    let tag = parse_tag(&p.space, p.theta)?;
    let space = space_for(&tag)?;
    let measure = reference_measure(tag, &p.measure, p.particles, p.half_width, &mut stream_rng(seed, STREAM_CLOUD))?;
    let profile = MCPProfile { k: p.k, n: p.n.unwrap_or_else(|| natural_exponent(tag)), table: p.table.clone() };
    profile.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = McpConfig {
        trials: p.trials,
        eps: p.eps,
        fd_step: p.fd_step,
        slack: p.slack,
        t_grid: p.t_grid.clone(),
        seed,
        estimator: p.estimator.clone(),
    };
    let report = if p.strong {
        strong_mcp_verify(&measure, space.as_ref(), &profile, &cfg)?
    } else {
        mcp_verify(&measure, space.as_ref(), &profile, &cfg)?
    };
    let mut table = Table::new("per_t", &["t", "worst_ratio", "bound"]);
    for row in &report.per_t {
        table.push(vec![num(row.t), num(row.worst_ratio), num(row.bound)]);
    }
    let witness = (!report.pass).then(|| {
        json!({
            "check": if p.strong { "strong" } else { "forward" },
            "estimator": report.estimator,
            "fd_step": p.fd_step,
            "profile": report.profile,
            "slack": report.slack,
            "worst": report.worst,
            "confirmed_failures": report.confirmed_failures,
        })
    });
    Ok(Outcome { pass: report.pass, result: to_value(&report), witness, tables: vec![table], artifacts: Vec::new() })
}

/// Coarse cell side giving about `per_cell` reference particles per fine cell (half the side).
fn auto_cell_size(mu: &DiscreteMeasure, space: &dyn MetricSpace, per_cell: f64) -> f64 {
    let coords: Vec<Vec<f64>> = mu.particles().iter().map(|q| space.cell_coords(&q.point.coords)).collect();
    let dim = coords.first().map_or(1, Vec::len);
    let mut volume = 1.0;
    for i in 0..dim {
        let (lo, hi) = coords.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), c| (l.min(c[i]), h.max(c[i])));
        volume *= (hi - lo).max(f64::EPSILON);
    }
    2.0 * (volume * per_cell / mu.len().max(1) as f64).powf(1.0 / dim as f64)
}

fn plan_body(p: &PlanParams) -> Result<ConvexBody, CliError> {
    match (&p.body, &p.body_file) {
        (Some(b), _) => Ok(b.clone()),
        (None, Some(path)) => read_typed(path, "body"),
        (None, None) => Ok(unit_square()),
    }
}

fn plan_space(p: &PlanParams, body: &ConvexBody) -> Result<SpaceTag, CliError> {
    Ok(match p.build.as_str() {
        "convex" => SpaceTag::Euclid(body.dim()),
        "heisenberg" => SpaceTag::Heisenberg(p.center.as_ref().map_or(1, |c| c.len().max(3) / 2)),
        "sphere" => SpaceTag::Sphere2,
        "cone-apex" => parse_tag("cone", Some(p.theta))?,
        other => {
            let names: Vec<_> = BuilderRegistry::builtin().names().collect();
            return Err(CliError::Usage(format!("unknown builder `{other}` ({})", names.join(", "))));
        }
    })
}

fn default_center(tag: SpaceTag, body: &ConvexBody) -> Vec<f64> {
    match tag {
        SpaceTag::Euclid(_) => body.interior_point().to_vec(),
        SpaceTag::Sphere2 => vec![0.0, 0.0, 1.0],
        other => vec![0.0; other.ambient_dim()],
    }
}

fn verify_config(p: &PlanParams, mu: &DiscreteMeasure, space: &dyn MetricSpace) -> VerifyConfig {
    VerifyConfig {
        hz_tol: p.hz_tol,
        ac_tol: p.ac_tol,
        cell_size: p.cell_size.unwrap_or_else(|| auto_cell_size(mu, space, p.particles_per_cell)),
        density_cap: p.density_cap,
        marginal_tol: p.marginal_tol,
    }
}

fn plan_witness(plan: &InversionPlan, d: &PlanDiagnostics) -> Value {
    let worst = d.hz_worst_pair.map(|k| {
        let pair = plan.coupling.pairs()[k];
        json!({
            "pair": k,
            "x": plan.source().coords(pair.source),
            "y": plan.coupling.targets()[pair.target].coords,
            "weight": pair.weight,
        })
    });
    json!({
        "center": plan.center.coords,
        "marginal_ok": d.marginal_ok,
        "hz_ok": d.hz_ok,
        "ac_ok": d.ac_ok,
        "hz_defect": d.hz_defect,
        "hz_worst": worst,
        "ac_scores": d.ac_scores,
    })
}

fn plan(p: &PlanParams, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome { pass: true, ..Outcome::default() };
    let mut result = serde_json::Map::new();
    let mut body = None;
    let mut plan = match &p.plan_file {
        Some(path) => InversionPlan::try_from(read_typed::<PlanRecord>(path, "plan")?)?,
        None => {
            let b = plan_body(p)?;
            let tag = plan_space(p, &b)?;
            let mu = Arc::new(reference_measure(tag, &p.measure, p.particles, p.half_width, &mut stream_rng(seed, STREAM_CLOUD))?);
            let center = Point::new(tag, p.center.clone().unwrap_or_else(|| default_center(tag, &b)))?;
            let ctx = BuildContext { body: Some(b.clone()), exclusion: p.exclusion.clone() };
            let built = match p.extend {
                Some(r) => {
                    if p.build != "convex" {
                        return Err(CliError::Usage("--extend needs the convex builder".into()));
                    }
                    let zc = center.coords.clone();
                    let inner = |q: &Point| q.coords.iter().zip(&zc).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() < r;
                    let local_mu = Arc::new(mu.restrict(inner));
                    let local = BuilderRegistry::builtin().get("convex")?.build(&center, local_mu, &ctx)?;
                    result.insert("local_pairs".into(), json!(local.coupling.pairs().len()));
                    extend_local_plan(&b, &center, &local, &mu, r, p.annuli)?
                }
                None => BuilderRegistry::builtin().get(&p.build)?.build(&center, mu, &ctx)?,
            };
            body = Some(b);
            built
        }
    };
    result.insert("particles".into(), json!(plan.source().len()));
    result.insert("excluded_mass".into(), json!(plan.excluded_mass));
    if let Some(expr) = &p.rescale {
        let f = Density::parse(expr)?;
        for q in plan.source().particles() {
            f.eval(&q.point.coords)?;
        }
        let (rescaled, rep) = rescale_plan(&plan, |q| f.eval(&q.coords).unwrap_or(f64::NAN))?;
        result.insert("rescale".into(), json!({ "density": expr, "zero_set_mass": rep.zero_set_mass }));
        plan = rescaled;
    }
    let mu = plan.source().clone();
    let space = space_for(&mu.space())?;
    if p.verify {
        let cfg = verify_config(p, &mu, space.as_ref());
        let d = verify_plan(&plan, &mu, space.as_ref(), &cfg)?;
        let mut table = Table::new("ac_scores", &["cell_size", "score"]);
        for (k, s) in d.ac_scores.iter().enumerate() {
            table.push(vec![num(cfg.cell_size / (1u32 << k) as f64), num(*s)]);
        }
        out.tables.push(table);
        if !d.pass {
            out.pass = false;
            out.witness = Some(plan_witness(&plan, &d));
        }
        result.insert("cell_size".into(), json!(cfg.cell_size));
        result.insert("diagnostics".into(), to_value(&d));
        plan.diagnostics = Some(d);
    }
    if let Some(path) = &p.push {
        let spec: EpsIsometrySpec = read_typed(path, "map")?;
        let f = EpsIsometry::from_spec(spec, &MapRegistry::builtin())?;
        let cell = p.cell_size.unwrap_or_else(|| auto_cell_size(&mu, space.as_ref(), p.particles_per_cell));
        let pushed = push_plan(&plan, &f, space.as_ref(), space.as_ref(), cell)?;
        result.insert("push".into(), push_summary(&pushed));
        if !pushed.bound_holds {
            out.pass = false;
            out.witness.get_or_insert_with(|| json!({ "push": push_summary(&pushed) }));
        }
    }
    if let Some(b) = body {
        result.insert("body".into(), to_value(&b));
    }
    out.result = Value::Object(result);
    out.artifacts.push(("plan.json".into(), to_value(&PlanRecord::from(&plan))));
    Ok(out)
}

fn push_summary(r: &mmspace::plans::PushReport) -> Value {
    json!({
        "hz_defect": r.hz_defect,
        "original_hz_defect": r.original_hz_defect,
        "hz_bound": r.hz_bound,
        "bound_holds": r.bound_holds,
        "uniformity_constant": r.uniformity_constant,
        "original_uniformity_constant": r.original_uniformity_constant,
    })
}

fn transport(p: &TransportParams, seed: u64) -> Result<Outcome, CliError> {
    let tag = parse_tag(&p.space, None)?;
    let space = space_for(&tag)?;
    let (mu0, mu1) = match (&p.mu0, &p.mu1) {
        (Some(a), Some(b)) => (load_measure(a)?, load_measure(b)?),
        (None, None) => match p.fixture.as_str() {
            "random" => (
                random_atoms(tag, p.atoms, &mut stream_rng(seed, STREAM_CLOUD))?,
                random_atoms(tag, p.atoms, &mut stream_rng(seed, STREAM_SECOND))?,
            ),
            "two-pair" => {
                if tag != SpaceTag::Euclid(2) {
                    return Err(CliError::Usage("the two-pair fixture lives on euclid2".into()));
                }
                let side = |x: f64| {
                    DiscreteMeasure::from_weighted(tag, vec![(vec![x, 0.0], 0.5), (vec![x, 1.0], 0.5)], None)
                };
                (side(0.0)?, side(1.0)?)
            }
            other => return Err(CliError::Usage(format!("unknown transport fixture `{other}` (random, two-pair)"))),
        },
        _ => return Err(CliError::Usage("give both --mu0 and --mu1".into())),
    };
    let sol = solve_w2(&mu0, &mu1, space.as_ref())?;
    let w = sol.w2();
    let mut table = Table::new("interpolation", &["t", "w2_to_t", "t_times_w2", "defect"]);
    let mut rows = Vec::new();
    let mut worst: Option<(f64, usize)> = None;
    for (k, &t) in p.t_grid.iter().enumerate() {
        let mid = interpolate(&sol, t, space.as_ref())?;
        let wt = solve_w2(&mu0, &mid.measure, space.as_ref())?.w2();
        let defect = (wt - t * w).abs();
        if worst.is_none_or(|(d, _)| defect > d) {
            worst = Some((defect, k));
        }
        table.push(vec![num(t), num(wt), num(t * w), num(defect)]);
        rows.push(json!({ "t": t, "w2_to_t": wt, "defect": defect, "non_unique_pairs": mid.non_unique_pairs }));
    }
    let mut coupling = Table::new("coupling", &["source", "target", "weight"]);
    for q in sol.coupling.pairs() {
        coupling.push(vec![q.source.to_string(), q.target.to_string(), num(q.weight)]);
    }
    let pass = worst.is_none_or(|(d, _)| d < p.tol);
    let witness = (!pass).then(|| {
        let (defect, k) = worst.expect("grid is nonempty");
        json!({
            "t": p.t_grid[k],
            "defect": defect,
            "mu0": MeasureRecord::from(&mu0),
            "mu1": MeasureRecord::from(&mu1),
        })
    });
    let result = json!({
        "w2_squared": sol.cost,
        "w2": w,
        "pairs": sol.coupling.pairs().len(),
        "interpolation": rows,
    });
    Ok(Outcome { pass, result, witness, tables: vec![table, coupling], artifacts: Vec::new() })
}

/// ε a map of the registry is guaranteed to achieve on a ball of radius `radius` in ℝᵈ.
fn nominal_eps(spec: &str, dim: usize, radius: f64) -> Option<f64> {
    let (name, param) = spec.split_once(':').map_or((spec, None), |(n, q)| (n, q.trim().parse::<f64>().ok()));
    match (name, param) {
        ("identity", None) | ("rotate", Some(_)) => Some(1e-12),
        ("snap", Some(h)) => Some(h * (dim as f64).sqrt()),
        ("scale", Some(c)) => Some((1.0 - c).abs() * 2.0 * radius),
        _ => None,
    }
}

fn stability(p: &StabilityParams, seed: u64) -> Result<Outcome, CliError> {
    let body = unit_square();
    let mu = Arc::new(sample_body(&body, p.particles, &mut stream_rng(seed, STREAM_CLOUD))?);
    let space = EuclideanSpace::new(2);
    let center = Point::new(SpaceTag::Euclid(2), p.center.clone())?;
    let plan = mmspace::plans::build_plan_convex_body(&body, &center, mu.clone())?;
    let f = match &p.push {
        Some(path) => EpsIsometry::from_spec(read_typed(path, "map")?, &MapRegistry::builtin())?,
        None => {
            let map = MapRegistry::builtin().parse(&p.map).map_err(|e| CliError::Usage(e.to_string()))?;
            let eps = match p.eps.or_else(|| nominal_eps(&p.map, 2, p.radius)) {
                Some(e) => e,
                None => return Err(CliError::Usage(format!("map `{}` has no nominal ε; give --eps", p.map))),
            };
            EpsIsometry::new(Arc::from(map), eps, p.radius, p.center.clone())?
        }
    };
    let image = pushforward(&mu, |q| Point { space: q.space, coords: f.map.apply(&q.coords).unwrap_or_else(|_| q.coords.clone()) })?;
    let iso = check_eps_isometry(&f, &mu, &image, &space, &space, p.isometry_points)?;
    let pushed = push_plan(&plan, &f, &space, &space, p.cell_size)?;
    let uniformity_bound = p.uniformity_factor * pushed.original_uniformity_constant;
    let uniformity_ok = pushed.uniformity_constant <= uniformity_bound;
    let pass = iso.pass && pushed.bound_holds && uniformity_ok;
    let mut table = Table::new("stability", &["quantity", "value", "bound"]);
    table.push(vec!["distortion".into(), num(iso.distortion), num(f.eps)]);
    table.push(vec!["surjectivity_defect".into(), num(iso.surjectivity_defect), num(f.eps)]);
    table.push(vec!["hz_defect".into(), num(pushed.hz_defect), num(pushed.hz_bound)]);
    table.push(vec!["uniformity_constant".into(), num(pushed.uniformity_constant), num(uniformity_bound)]);
    let (_, worst_pair) = hz_defect(&pushed.pushed.coupling, &pushed.pushed.center.coords, &space);
    let witness = (!pass).then(|| {
        json!({
            "isometry_pass": iso.pass,
            "bound_holds": pushed.bound_holds,
            "uniformity_ok": uniformity_ok,
            "hz_worst_pair": worst_pair,
            "push": push_summary(&pushed),
        })
    });
    let result = json!({
        "isometry": iso,
        "push": push_summary(&pushed),
        "uniformity_bound": uniformity_bound,
        "uniformity_ok": uniformity_ok,
    });
    Ok(Outcome { pass, result, witness, tables: vec![table], artifacts: Vec::new() })
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
    worst: Value,
}

fn heis_suite(p: &HeisSuiteParams, seed: u64) -> Result<Outcome, CliError> {
    let mut rng = stream_rng(seed, STREAM_SCAN);
    let mut checks = Vec::new();

    // endpoint chart round trip on D = {|v| < 2π, r > 0}
    let mut worst = (0.0f64, Value::Null);
    for _ in 0..p.samples {
        let a = TAU * rng.random::<f64>();
        let v = loop {
            let v = TAU * (2.0 * rng.random::<f64>() - 1.0);
            if v != 0.0 {
                break v;
            }
        };
        let r = p.r_max * (1.0 - rng.random::<f64>());
        let param = GeodesicParam::new(vec![a.cos(), a.sin()], v, r)?;
        let back = invert_endpoint(&endpoint_map(&param), DEFAULT_TOL)?;
        let err = param.dir.iter().zip(&back.dir).map(|(x, y)| (x - y).abs()).fold((param.v - back.v).abs().max((param.r - back.r).abs()), f64::max);
        if err > worst.0 || worst.1.is_null() {
            worst = (err, json!({ "param": param, "recovered": back }));
        }
    }
    checks.push(Check { name: "round_trip", value: worst.0, bound: p.round_trip_tol, pass: worst.0 < p.round_trip_tol, worst: worst.1 });

    let mut worst = (0.0f64, Value::Null);
    for _ in 0..p.av_samples {
        let v = loop {
            let v = TAU * (2.0 * rng.random::<f64>() - 1.0);
            if v != 0.0 {
                break v;
            }
        };
        let a = av_matrix(v)?;
        let mut err = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let g = a[i][0] * a[j][0] + a[i][1] * a[j][1];
                err = err.max((g - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        if err > worst.0 || worst.1.is_null() {
            worst = (err, json!({ "v": v }));
        }
    }
    checks.push(Check { name: "av_orthogonality", value: worst.0, bound: p.av_tol, pass: worst.0 < p.av_tol, worst: worst.1 });

    let origin = HeisPoint::origin(1);
    let mut worst = (0.0f64, Value::Null);
    let mut tested = 0;
    while tested < p.samples {
        let x = HeisPoint::from_coords(&[2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0]);
        if x.zeta_norm() < p.tube || x.t.abs() < p.tube {
            continue;
        }
        tested += 1;
        let y = lambda_map(&x)?;
        let err = (cc_distance(&x, &y) - cc_distance(&x, &origin) - cc_distance(&origin, &y)).abs();
        if err > worst.0 || worst.1.is_null() {
            worst = (err, json!({ "x": x.to_coords(), "image": y.to_coords() }));
        }
    }
    checks.push(Check { name: "inversion_collinearity", value: worst.0, bound: p.hz_tol, pass: worst.0 < p.hz_tol, worst: worst.1 });

    let x = endpoint_map(&GeodesicParam::new(vec![1.0, 0.0], PI, 1.0)?);
    let y = lambda_map(&x)?;
    let dists = [cc_distance(&origin, &x), cc_distance(&origin, &y), cc_distance(&x, &y)];
    let err = dists.iter().zip([1.0, 0.5, 1.5]).map(|(d, e)| (d - e).abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "worked_instance",
        value: err,
        bound: p.hz_tol,
        pass: err < p.hz_tol,
        worst: json!({ "x": x.to_coords(), "image": y.to_coords(), "distances": dists }),
    });

    let space = HeisenbergSpace::new(1);
    let cloud = sample_haar_box(p.particles, &[-1.0; 3], &[1.0; 3], &mut stream_rng(seed, STREAM_CLOUD))?;
    let sc = sc_frequency(&cloud, &space, p.pairs, &mut rng)?;
    checks.push(Check { name: "cut_locus_frequency", value: sc.frequency, bound: 0.0, pass: sc.hits == 0, worst: to_value(&sc) });
    let cov = ray_coverage(&cloud, &space, &[0.0; 3], cloud.len(), &mut rng)?;
    checks.push(Check { name: "ray_coverage", value: cov.fraction, bound: 1.0, pass: cov.fraction == 1.0, worst: to_value(&cov) });

    let mut table = Table::new("checks", &["check", "value", "bound", "pass"]);
    for c in &checks {
        table.push(vec![c.name.into(), num(c.value), num(c.bound), c.pass.to_string()]);
    }
    let pass = checks.iter().all(|c| c.pass);
    let witness = checks.iter().find(|c| !c.pass).map(|c| json!({ "check": c.name, "value": c.value, "bound": c.bound, "sample": c.worst }));
    let result = Value::Array(
        checks
            .iter()
            .map(|c| json!({ "check": c.name, "value": c.value, "bound": c.bound, "pass": c.pass, "worst": c.worst }))
            .collect(),
    );
    Ok(Outcome { pass, result, witness, tables: vec![table], artifacts: Vec::new() })
}
