//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use bionet::analysis::{connected_components, wasserstein_distance, Axis, Snapshot};
use bionet::cli_io::{
    cmd_run, compare_rotated, parse_config_str, read_energy, RunConfig, DomainKind, ENERGY_FILE,
};
use bionet::fem::{
    assemble_boundary_load, assemble_load, remove_mean, solve_neumann_zero_mean, unit_mass, unit_stiffness,
    CoefficientSampling, FeSpace, Sample,
};
use bionet::flow::{run, EntropyGenerator, SimParams, Simulator};
use bionet::geometry::{classify_nodes, LevelSet, Point};
use bionet::quadrature::{integrate_polygon, BiPolynomial, EdgeRule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Seven-point degree-5 triangle rule (barycentric coordinates, weights sum to 1).
fn triangle_rule() -> Vec<([f64; 3], f64)> {
    let s = 15.0f64.sqrt();
    let (a1, b1) = ((6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0);
    let (a2, b2) = ((6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0);
    let (w1, w2) = ((155.0 - s) / 1200.0, (155.0 + s) / 1200.0);
    let t = 1.0 / 3.0;
    vec![
        ([t, t, t], 9.0 / 40.0),
        ([b1, a1, a1], w1),
        ([a1, b1, a1], w1),
        ([a1, a1, b1], w1),
        ([b2, a2, a2], w2),
        ([a2, b2, a2], w2),
        ([a2, a2, b2], w2),
    ]
}

fn triangulation_oracle(vertices: &[Point], f: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = triangle_rule();
    let o = vertices[0];
    let mut total = 0.0;
    for k in 1..vertices.len() - 1 {
        let (p, q) = (vertices[k], vertices[k + 1]);
        let area = 0.5 * ((p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]));
        let s: f64 = rule
            .iter()
            .map(|(l, w)| w * f(l[0] * o[0] + l[1] * p[0] + l[2] * q[0], l[0] * o[1] + l[1] * p[1] + l[2] * q[1]))
            .sum();
        total += area * s;
    }
    total
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rule = EdgeRule::three_point();
    let mut worst = 0.0f64;
    let mut polygons = 0;
    while polygons < 100 {
        let ls = LevelSet::Circle {
            center: [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)],
            radius: rng.gen_range(0.12..0.3),
        };
        let n = rng.gen_range(6..48);
        let Ok(topo) = classify_nodes(&ls, n, 1.0, 2.0) else { continue };
        let Ok(cells) = topo.cut_cells() else { continue };
        let cut: Vec<_> = cells.into_iter().filter(|c| c.cut.is_some()).collect();
        let Some(poly) = cut.choose(&mut rng) else { continue };
        polygons += 1;
        // Cut cells are integrated in reference-cell coordinates.
        let verts = poly.reference_vertices();
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let got = integrate_polygon(&BiPolynomial::monomial(a, b, 1.0), &verts, &rule);
                let want = triangulation_oracle(&verts, |x, y| x.powi(a as i32) * y.powi(b as i32));
                worst = worst.max((got - want).abs() / want.abs());
            }
        }
    }
    check(worst <= 1e-13, format!("100 cut polygons, a+b<=4: max relative error {worst:.2e} (tol 1e-13)"))
}

fn circle_space(n: usize) -> FeSpace {
    FeSpace::new(
        classify_nodes(&LevelSet::standard_circle(), n, 1.0, 2.0).unwrap(),
        CoefficientSampling::Centroid,
    )
    .unwrap()
}

/// Lumped L² error of the Neumann problem with u* = cos(πx)cos(πy).
fn manufactured_error(n: usize) -> f64 {
    let space = circle_space(n);
    let exact = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos();
    let mut b = assemble_load(&space, |c| Sample::Uniform(2.0 * PI * PI * exact(c.centroid[0], c.centroid[1]))).unwrap();
    let flux = assemble_boundary_load(&space, |x, nrm| {
        let g = [
            -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        ];
        g[0] * nrm[0] + g[1] * nrm[1]
    });
    for (bi, fi) in b.iter_mut().zip(&flux) {
        *bi += fi;
    }
    let u = solve_neumann_zero_mean(&unit_stiffness(&space), &b, &space, 1e-12).unwrap();
    let mut ex = space.interpolate(exact);
    remove_mean(&mut ex, space.lumped_mass());
    u.iter()
        .zip(&ex)
        .zip(space.lumped_mass())
        .map(|((a, b), m)| m * (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn criterion_2() -> Outcome {
    let ns = [16usize, 32, 64, 128];
    let errs: Vec<f64> = ns.iter().map(|&n| manufactured_error(n)).collect();
    let pairwise: Vec<String> = errs.windows(2).map(|w| format!("{:.3}", (w[0] / w[1]).log2())).collect();
    // Least-squares slope of log e against log h.
    let xs: Vec<f64> = ns.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    check(
        slope >= 1.8,
        format!("errors {}, pairwise orders {}, fitted order {slope:.3} (need >= 1.8)",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "),
            pairwise.join(" ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut detail = String::new();
    let mut ok = true;
    for n in [16usize, 32, 64, 100, 128] {
        let space = circle_space(n);
        let total: f64 = unit_mass(&space).values().iter().sum();
        let area: f64 = space.cells().iter().map(|c| c.polygon.area()).sum();
        worst_sum = worst_sum.max((total - area).abs());
        let h = 1.0 / n as f64;
        let gap = (area - PI * 0.45 * 0.45).abs();
        ok &= gap <= 2.0 * h * h;
        detail += &format!(" N={n}: |area-pi r^2|={gap:.2e} (2h^2={:.2e});", 2.0 * h * h);
    }
    ok &= worst_sum <= 1e-12;
    check(ok, format!("max |sum M - sum area| = {worst_sum:.2e} (tol 1e-12);{detail}"))
}

fn criterion_4() -> Outcome {
    let mut prm = SimParams::reference(LevelSet::standard_circle()).with_resolution(32);
    prm.d_tilde = 0.0;
    prm.source_strength = 0.0;
    prm.c0 = 0.8;
    let (dt, nu, eps, g) = (prm.dt, prm.nu_tilde, prm.epsilon, prm.gamma);
    let mut sim = Simulator::new(prm).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let before = sim.state().c[0].clone();
        sim.step().map_err(|e| e.to_string())?;
        for (c0, c1) in before.iter().zip(&sim.state().c[0]) {
            let want = c0 / (1.0 + dt * nu * (c0 + eps).powf(g - 2.0));
            worst = worst.max((c1 - want).abs() / want.abs());
        }
    }
    check(
        worst <= 1e-13,
        format!("100 steps, gamma={g}, eps={eps}: max relative deviation {worst:.2e} (tol 1e-13)"),
    )
}

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = format!("domain = leaf\nN = 100\nT = 10\nsnapshot_every = 0\nout_dir = {}\n", dir.path().display());
    let cfg = parse_config_str(&text, "criterion 5").map_err(|e| e.to_string())?;
    let manifest = cmd_run(&cfg).map_err(|e| e.to_string())?;
    let energy = read_energy(&dir.path().join(ENERGY_FILE)).map_err(|e| e.to_string())?;
    let mut violations = 0;
    for w in energy.windows(2).skip(1) {
        if w[1].energy > w[0].energy * (1.0 + 1e-10) {
            violations += 1;
        }
    }
    let (first, last) = (energy[0].energy, energy.last().unwrap().energy);
    check(
        violations == 0 && manifest.termination != "error" && energy.len() > 1,
        format!(
            "{} energy rows ({}), E {first:.6e} -> {last:.6e}, {violations} increases beyond 1e-10",
            energy.len(),
            manifest.termination
        ),
    )
}

fn symmetric_run(nu: f64, eps: f64, per_step: bool) -> Result<f64, String> {
    // Setting of the symmetry-loss experiment: Fisher generator, D̃ = 2.5e-5.
    let mut prm = SimParams::reference(LevelSet::standard_circle()).with_resolution(100);
    prm.entropy = EntropyGenerator::Fisher;
    prm.d_tilde = 2.5e-5;
    prm.nu_tilde = nu;
    prm.epsilon = eps;
    prm.t_final = 5.0;
    // Run the full horizon even when the update stalls.
    prm.steady_tol = 0.0;
    let mut sim = Simulator::new(prm).map_err(|e| e.to_string())?;
    let residual = |s: &Simulator| -> bionet::Result<f64> {
        let mut r = 0.0f64;
        for axis in [Axis::CENTER_X, Axis::CENTER_Y, Axis::Diagonal] {
            r = r.max(s.symmetry_residual(axis)?);
        }
        Ok(r)
    };
    let mut worst = 0.0f64;
    sim.run_with(|s| {
        if per_step {
            worst = worst.max(residual(s)?);
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    if (sim.state().time - 5.0).abs() > 1e-9 {
        return Err(format!("run stopped at t = {}", sim.state().time));
    }
    Ok(worst.max(residual(&sim).map_err(|e| e.to_string())?))
}

fn criterion_6() -> Outcome {
    let a = symmetric_run(0.0, 1e-4, true)?;
    let big = symmetric_run(0.1, 1e-1, false)?;
    let small = symmetric_run(0.1, 1e-4, false)?;
    check(
        a < 1e-8 && big <= small,
        format!("(a) nu=0 max residual {a:.2e} (< 1e-8); (b) nu=0.1 residual at t=5: eps=1e-1 {big:.3e} <= eps=1e-4 {small:.3e}"),
    )
}

fn final_snapshot(cfg: &RunConfig) -> Result<Snapshot, String> {
    let mut prm = cfg.params.clone();
    prm.snapshot_every = 0;
    let traj = run(prm).map_err(|e| e.to_string())?;
    Ok(traj.snapshots.last().cloned().unwrap())
}

fn leaf_config(n: usize, t: f64) -> RunConfig {
    let mut cfg = RunConfig::defaults(DomainKind::Leaf).at_resolution(n);
    cfg.params.t_final = t;
    cfg.params.entropy = EntropyGenerator::Quartic;
    cfg
}

/// Leaf at N = 200, T = 10 with reference parameters; shared by the rotation
/// and branch criteria.
fn leaf_200() -> Result<Snapshot, String> {
    static CELL: OnceLock<Result<Snapshot, String>> = OnceLock::new();
    CELL.get_or_init(|| final_snapshot(&leaf_config(200, 10.0))).clone()
}

fn criterion_7() -> Outcome {
    let theta = PI / 4.0;
    let mut dists = Vec::new();
    for n in [100usize, 200] {
        let base = leaf_config(n, 10.0);
        let mut rot = base.clone();
        rot.theta = theta;
        let rot = rot.on_domain(DomainKind::RotatedLeaf);
        let leaf = if n == 200 { leaf_200()? } else { final_snapshot(&base)? };
        let rotated = final_snapshot(&rot)?;
        dists.push(compare_rotated(&leaf, &rotated, theta, 1.0).map_err(|e| e.to_string())?);
    }
    check(
        dists[1] < dists[0],
        format!("W1(leaf, rotated leaf) at T=10: N=100 {:.4e}, N=200 {:.4e}", dists[0], dists[1]),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = [0.0f64; 5];
    for _ in 0..200 {
        let len = rng.gen_range(1..60);
        let mut sample = || -> Vec<f64> { (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect() };
        let (u, v, w) = (sample(), sample(), sample());
        for p in [1.0, 2.0] {
            let d = |a: &[f64], b: &[f64]| wasserstein_distance(a, b, p).unwrap();
            worst[0] = worst[0].max(d(&u, &u));
            worst[1] = worst[1].max((d(&u, &v) - d(&v, &u)).abs());
            worst[2] = worst[2].max(d(&u, &w) - d(&u, &v) - d(&v, &w));
            let mut shuffled = u.clone();
            shuffled.shuffle(&mut rng);
            worst[3] = worst[3].max((d(&shuffled, &v) - d(&u, &v)).abs());
        }
        let c = rng.gen_range(-10.0..10.0);
        let shift = |a: &[f64]| a.iter().map(|x| x + c).collect::<Vec<_>>();
        let d1 = |a: &[f64], b: &[f64]| wasserstein_distance(a, b, 1.0).unwrap();
        worst[4] = worst[4].max((d1(&shift(&u), &shift(&v)) - d1(&u, &v)).abs());
        if d1(&u, &v) == 0.0 && u != v {
            let mut su = u.clone();
            let mut sv = v.clone();
            su.sort_by(f64::total_cmp);
            sv.sort_by(f64::total_cmp);
            if su != sv {
                return Err("distinct distributions at distance 0".into());
            }
        }
    }
    check(
        worst.iter().all(|&x| x <= 1e-12),
        format!(
            "200 random triples: d(u,u) {:.1e}, symmetry {:.1e}, triangle excess {:.1e}, permutation {:.1e}, translation {:.1e} (tol 1e-12)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut compared = 0;
    for (domain, extra) in [("leaf", "tensor_mode = true\n"), ("circle", "entropy = mixed\ncoeff_sampling = nodal-q5\n")] {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        for d in &dirs {
            let text = format!(
                "domain = {domain}\nN = 40\nT = 0.5\nsnapshot_every = 5\nout_dir = {}\n{extra}",
                d.path().display()
            );
            cmd_run(&parse_config_str(&text, "criterion 9").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        }
        let mut names: Vec<_> = fs::read_dir(dirs[0].path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        for name in &names {
            let a = fs::read(dirs[0].path().join(name)).unwrap();
            let b = fs::read(dirs[1].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
            if a != b {
                return Err(format!("{domain}: {name} differs between runs"));
            }
            compared += 1;
        }
    }
    check(compared > 4, format!("{compared} snapshot/energy files byte-identical across reruns"))
}

fn criterion_10() -> Outcome {
    let mut cfg = leaf_config(200, 10.0);
    cfg.params.r = 1e-3;
    let fine = final_snapshot(&cfg)?;
    let coarse = leaf_200()?;
    let count = |s: &Snapshot, r: f64| -> Result<usize, String> {
        let norm = s.conductivity_norm().map_err(|e| e.to_string())?;
        connected_components(s, &norm, r).map_err(|e| e.to_string())
    };
    let (k_small, k_large) = (count(&fine, 1e-3)?, count(&coarse, 5e-3)?);
    check(
        k_small >= k_large,
        format!("components of {{|C| > r}} at N=200, T=10: r=1e-3 -> {k_small}, r=5e-3 -> {k_large}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("quadrature exactness", criterion_1),
        ("elliptic convergence", criterion_2),
        ("mass consistency", criterion_3),
        ("closed-form metabolic step", criterion_4),
        ("energy decay", criterion_5),
        ("symmetry preservation and loss", criterion_6),
        ("rotation agreement", criterion_7),
        ("Wasserstein metric suite", criterion_8),
        ("determinism", criterion_9),
        ("branch diagnostics", criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id:>2} PASS  {name} [{secs:.1} s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} [{secs:.1} s]: {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
