//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any of them fails.

use itertools::Itertools;
use matchkit::{run, Experiment, ExperimentConfig, RateTable, RunOutput, SamplerConfig};
use matchkit_core::domain::{
    grid_to_spectral, heat_kernel_images, heat_kernel_in, heat_kernel_spectral, heat_trace,
    Geometry, Grid, Parity, SpectralField, TorusPoint,
};
use matchkit_core::elliptic::{field_gradient, gradient, solve_divform, solve_poisson};
use matchkit_core::sampling::{rng_from_seed, Contraction, DensitySpec};
use matchkit_core::smoothing::{heat_smooth, Schedule};
use matchkit_core::transport::{
    flow_particles, flow_transport, solve_discrete_ot, solve_discrete_ot_simplex, DiscreteMeasure,
};
use rand::Rng;
use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = (usize, &'static str, f64, fn() -> Outcome);

fn timed(limit: f64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let secs = start.elapsed().as_secs_f64();
    if secs > limit {
        o.passed = false;
    }
    o.detail = if limit.is_finite() {
        format!("{} [{secs:.1}s / {limit:.0}s]", o.detail)
    } else {
        format!("{} [{secs:.1}s]", o.detail)
    };
    o
}

fn experiment(exp: Experiment, edit: impl FnOnce(&mut ExperimentConfig)) -> RunOutput {
    let mut cfg = ExperimentConfig {
        experiment: exp,
        ..Default::default()
    };
    edit(&mut cfg);
    cfg.validate().expect("valid config");
    let out = run(&cfg, None).expect("experiment runs");
    assert!(out.failures.is_empty(), "failed trials: {:?}", out.failures);
    out
}

fn mean_se(table: &RateTable, n: usize, key: &str) -> (f64, f64) {
    let s = table
        .summary(n, key)
        .unwrap_or_else(|| panic!("{key} missing at n = {n}"));
    (s.mean, s.se)
}

const NS: [usize; 3] = [256, 1024, 4096];

/// Strictly decreasing means with the 1-SE bands of the end points apart.
fn decreasing(table: &RateTable, key: &str) -> (bool, String) {
    let m: Vec<(f64, f64)> = NS.iter().map(|&n| mean_se(table, n, key)).collect();
    let monotone = m.windows(2).all(|w| w[1].0 < w[0].0);
    let separated = m[2].0 + m[2].1 < m[0].0 - m[0].1;
    let text = m
        .iter()
        .map(|(a, b)| format!("{a:.4e}±{b:.1e}"))
        .join(" > ");
    (monotone && separated, text)
}

/// Positive trial means within a factor three of each other.
fn banded(table: &RateTable, key: &str) -> (bool, String) {
    let m: Vec<f64> = NS.iter().map(|&n| mean_se(table, n, key).0).collect();
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        lo > 0.0 && hi <= 3.0 * lo,
        format!("{key} {}", m.iter().map(|v| format!("{v:.4}")).join("/")),
    )
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / n as f64
}

fn random_composition(rng: &mut impl Rng, total: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, total - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain([total]) {
        out.push(c - prev);
        prev = c;
    }
    out
}

fn criterion_ot() -> Outcome {
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let uniform_sizes = [
        (1, 1),
        (2, 2),
        (3, 3),
        (4, 4),
        (5, 5),
        (6, 6),
        (7, 7),
        (8, 8),
        (2, 4),
        (4, 8),
        (2, 6),
        (3, 6),
        (1, 7),
        (2, 8),
    ];
    for k in 0..200 {
        let geometry = if k % 4 == 3 {
            Geometry::Square
        } else {
            Geometry::Torus
        };
        // weights are multiples of 1/units so the optimum is an assignment between unit atoms
        let (units, a, b) = if k % 2 == 0 {
            let (n, m) = uniform_sizes[k / 2 % uniform_sizes.len()];
            let units = n * m / gcd(n, m);
            (units, vec![units / n; n], vec![units / m; m])
        } else {
            let units = rng.gen_range(2..=8);
            let n = rng.gen_range(1..=units);
            let m = rng.gen_range(1..=units);
            (
                units,
                random_composition(&mut rng, units, n),
                random_composition(&mut rng, units, m),
            )
        };
        let x = random_points(&mut rng, geometry, a.len());
        let y = random_points(&mut rng, geometry, b.len());
        let wx: Vec<f64> = a.iter().map(|&c| c as f64 / units as f64).collect();
        let wy: Vec<f64> = b.iter().map(|&c| c as f64 / units as f64).collect();
        let ex: Vec<usize> = a
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        let ey: Vec<usize> = b
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
            .collect();
        let cost: Vec<Vec<f64>> = ex
            .iter()
            .map(|&i| {
                ey.iter()
                    .map(|&j| geometry.distance_sq(&x[i], &y[j]))
                    .collect()
            })
            .collect();
        let oracle = brute_force(&cost);
        let mu = DiscreteMeasure::new(geometry, x, wx).unwrap();
        let nu = DiscreteMeasure::new(geometry, y, wy).unwrap();
        for sol in [
            solve_discrete_ot_simplex(&mu, &nu).unwrap(),
            solve_discrete_ot(&mu, &nu).unwrap(),
        ] {
            worst = worst.max((sol.cost - oracle).abs() / oracle.max(f64::MIN_POSITIVE));
            worst_gap = worst_gap.max(sol.duality_gap().abs() / sol.cost.max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        worst <= 1e-12 && worst_gap <= 1e-9,
        format!("max relative deviation {worst:.1e}, max gap/cost {worst_gap:.1e}"),
    )
}

fn random_points(rng: &mut impl Rng, geometry: Geometry, len: usize) -> Vec<TorusPoint<f64>> {
    (0..len)
        .map(|_| geometry.point(rng.gen(), rng.gen()))
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// h = cos 2pi(x1 + 2 x2) + 0.3 sin 2pi(3 x2) - 0.2 sin 2pi(2 x1 - x2): value, gradient, laplacian
fn manufactured(x: &TorusPoint<f64>) -> (f64, [f64; 2], f64) {
    let p1 = TAU * (x.x1 + 2.0 * x.x2);
    let p2 = TAU * 3.0 * x.x2;
    let p3 = TAU * (2.0 * x.x1 - x.x2);
    let h = p1.cos() + 0.3 * p2.sin() - 0.2 * p3.sin();
    let g1 = -TAU * p1.sin() - 0.4 * TAU * p3.cos();
    let g2 = -2.0 * TAU * p1.sin() + 0.9 * TAU * p2.cos() + 0.2 * TAU * p3.cos();
    let lap = -5.0 * TAU * TAU * p1.cos() - 2.7 * TAU * TAU * p2.sin() + TAU * TAU * p3.sin();
    (h, [g1, g2], lap)
}

fn criterion_pde() -> Outcome {
    let mut poisson: f64 = 0.0;
    for g in [Geometry::Torus, Geometry::Square] {
        let k = 6;
        for mode in SpectralField::<f64>::zeros(g, k)
            .modes()
            .into_iter()
            .skip(1)
        {
            if g == Geometry::Torus && mode.k == [0, 0] {
                continue;
            }
            let f = SpectralField::single_mode(g, k, mode.k, mode.parity).unwrap();
            let sol = solve_poisson(&f).unwrap();
            let expect = f.scale(1.0 / mode.eigenvalue);
            poisson = poisson.max(sol.field.max_abs_diff(&expect).unwrap());
        }
    }

    let a = 0.5;
    let (k, res) = (8, 32);
    let grid = Grid::torus(res);
    let nodes = grid.nodes::<f64>();
    let rho_vals: Vec<f64> = nodes.iter().map(|x| 1.0 + a * (TAU * x.x1).sin()).collect();
    let rho = heat_smooth(&grid_to_spectral(&rho_vals, &grid, k).unwrap(), 0.0, &grid).unwrap();
    let rhs_vals: Vec<f64> = nodes
        .iter()
        .map(|x| {
            let (_, g, lap) = manufactured(x);
            -(1.0 + a * (TAU * x.x1).sin()) * lap - a * TAU * (TAU * x.x1).cos() * g[0]
        })
        .collect();
    let rhs = grid_to_spectral(&rhs_vals, &grid, k)
        .unwrap()
        .into_mean_zero();
    let sol = solve_divform(&rho, &rhs, 1e-13).unwrap();
    let g = gradient(&sol, &grid);
    let h1 = (nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (_, e, _) = manufactured(x);
            (g[0][i] - e[0]).powi(2) + (g[1][i] - e[1]).powi(2)
        })
        .sum::<f64>()
        / grid.len() as f64)
        .sqrt();

    let sizes = [16usize, 32, 64, 128];
    let errs: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let grid = Grid::torus(n);
            let vals: Vec<f64> = grid
                .nodes::<f64>()
                .iter()
                .map(|x| manufactured(x).0)
                .collect();
            let g = field_gradient(&grid_to_spectral(&vals, &grid, 3).unwrap(), &grid);
            let h = 1.0 / n as f64;
            (0..n * n)
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    let fd =
                        (vals[((i + 1) % n) * n + j] - vals[((i + n - 1) % n) * n + j]) / (2.0 * h);
                    (fd - g[0][idx]).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let order = -matchkit::stats::log_log_slope(&sizes.map(|n| n as f64), &errs);
    outcome(
        poisson <= 1e-12 && h1 <= 1e-8 && order >= 1.9,
        format!("poisson {poisson:.1e}, manufactured H1 {h1:.1e}, difference order {order:.3}"),
    )
}

fn criterion_heat() -> Outcome {
    let t = 1.0 / (4.0 * PI * PI);
    let mut rng = rng_from_seed(303);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let g = if k % 2 == 0 {
            Geometry::Torus
        } else {
            Geometry::Square
        };
        let x = g.point(rng.gen(), rng.gen());
        let y = g.point(rng.gen(), rng.gen());
        worst = worst
            .max((heat_kernel_spectral(g, t, &x, &y) - heat_kernel_images(g, t, &x, &y)).abs());
    }
    // trace identity: sum exp(-t lambda) = integral of the diagonal
    let mut trace: f64 = 0.0;
    for s in [1e-3, 1e-2, t, 0.1, 1.0] {
        let axis: f64 = (-60..=60i32)
            .map(|m| (-(m * m) as f64 / (4.0 * s)).exp())
            .sum::<f64>()
            / (4.0 * PI * s).sqrt();
        let tr = heat_trace(Geometry::Torus, s).unwrap();
        trace = trace.max((tr - axis * axis).abs() / tr);
        let grid = Grid::new(Geometry::Square, 256);
        let diag: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|x| heat_kernel_in(Geometry::Square, s, x, x).unwrap())
            .collect();
        let sq = heat_trace(Geometry::Square, s).unwrap();
        trace = trace.max((grid.integrate(&diag) - sq).abs() / sq);
    }
    outcome(
        worst <= 1e-10 && trace <= 1e-8,
        format!("max kernel gap {worst:.1e}, trace identity {trace:.1e}"),
    )
}

fn criterion_cost() -> Outcome {
    let out = experiment(Experiment::Cost, |_| {});
    let (r0, s0) = mean_se(&out.table, 256, "ratio");
    let (r2, s2) = mean_se(&out.table, 4096, "ratio");
    let (r1, _) = mean_se(&out.table, 1024, "ratio");
    outcome(
        (0.10..=0.30).contains(&r2) && r2 + s2 < r0 - s0,
        format!("r = {r0:.4}±{s0:.4} / {r1:.4} / {r2:.4}±{s2:.4}"),
    )
}

fn criterion_contractivity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for density in [DensitySpec::Uniform, DensitySpec::Sine { amplitude: 0.5 }] {
        let label = density.label();
        let out = experiment(Experiment::Contractivity, |c| c.density = density);
        let (band, text) = banded(&out.table, "ratio");
        let (w, _) = mean_se(&out.table, 4096, "w2_over_t");
        ok &= band && w < 0.2;
        parts.push(format!("{label}: {text}, W2/t at 4096 {w:.4}"));
    }
    outcome(ok, parts.join("; "))
}

fn ifs_sampler() -> SamplerConfig {
    SamplerConfig::Ifs {
        map: Contraction::Sine {
            center: [0.5, 0.5],
            lipschitz: 0.5,
        },
        noise: DensitySpec::Bump {
            concentration: 0.5,
            center: [0.0, 0.0],
        },
        burn_in: 1000,
    }
}

fn lq_schedule() -> Schedule {
    Schedule {
        kappa2: 0.0,
        ..Schedule::default()
    }
}

fn criterion_lq() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sampler) in [("iid", SamplerConfig::Iid), ("ifs", ifs_sampler())] {
        let out = experiment(Experiment::Lq, |c| {
            c.sampler = sampler;
            c.schedule = lq_schedule();
        });
        for key in ["ratio_q2", "ratio_q4"] {
            let (band, text) = banded(&out.table, key);
            ok &= band;
            parts.push(format!("{name} {text}"));
        }
    }
    outcome(ok, parts.join("; "))
}

fn criterion_map() -> Outcome {
    let out = experiment(Experiment::Map, |_| {});
    let (ok, text) = decreasing(&out.table, "relative_error");
    outcome(ok, format!("relative error {text}"))
}

fn criterion_plan(out: &RunOutput) -> Outcome {
    let (ok, text) = decreasing(&out.table, "relative_error");
    let recorded = out
        .records
        .iter()
        .all(|r| r.get("coarsening_level").is_some());
    let levels = NS
        .iter()
        .map(|&n| format!("{:.0}", mean_se(&out.table, n, "coarsening_level").0))
        .join("/");
    outcome(
        ok && recorded,
        format!("relative error {text}, coarsening level {levels}"),
    )
}

fn criterion_fluctuation() -> Outcome {
    let out = experiment(Experiment::Fluctuation, |_| {});
    let f: Vec<f64> = NS
        .iter()
        .map(|&n| mean_se(&out.table, n, "event_ab").0)
        .collect();
    let ok = f.windows(2).all(|w| w[1] >= w[0]) && f[2] >= 0.9;
    outcome(
        ok,
        format!(
            "freq(A and B) {}",
            f.iter().map(|v| format!("{v:.3}")).join(" / ")
        ),
    )
}

fn criterion_energy(runs: &[&RunOutput]) -> Outcome {
    let mut total = 0;
    let mut violations = 0;
    for run in runs {
        for r in &run.records {
            total += 1;
            if r.flags.get("energy_ok") != Some(&true) {
                violations += 1;
            }
        }
    }
    outcome(
        total > 0 && violations == 0,
        format!("{violations} violations in {total} instances"),
    )
}

fn criterion_flow() -> Outcome {
    let (k, n) = (4, 64);
    let a = 0.3;
    let grid = Grid::torus(n);
    let one = SpectralField::constant(Geometry::Torus, k, 1.0);
    // 1 + a cos(2 pi x1) in the normalized basis
    let mode = SpectralField::single_mode(Geometry::Torus, k, [1, 0], Parity::Cos).unwrap();
    let mu = heat_smooth(&one.add(&mode.scale(a / 2f64.sqrt())).unwrap(), 0.0, &grid).unwrap();
    let nu = heat_smooth(&one, 0.0, &grid).unwrap();
    let rhs = nu.field.sub(&mu.field).unwrap().into_mean_zero();
    let h = solve_divform(&nu, &rhs, 1e-14).unwrap();
    let floor = flow_transport(&mu, &nu, &h, &one, 1024, true)
        .unwrap()
        .w2_sq
        .unwrap();
    let at64 = flow_transport(&mu, &nu, &h, &one, 64, true)
        .unwrap()
        .w2_sq
        .unwrap();

    let reference = flow_particles(&mu.field, &nu.field, &h, &one, &grid, 1024)
        .unwrap()
        .0;
    let steps = [4usize, 8, 16, 32];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&s| {
            let p = flow_particles(&mu.field, &nu.field, &h, &one, &grid, s)
                .unwrap()
                .0;
            p.iter()
                .zip(&reference)
                .map(|(x, y)| Geometry::Torus.distance(x, y))
                .fold(0.0, f64::max)
        })
        .collect();
    let order = -matchkit::stats::log_log_slope(&steps.map(|s| s as f64), &errs);
    outcome(
        at64 <= 4.0 * floor && order >= 3.5,
        format!("W2^2 at 64 steps {at64:.3e} vs floor {floor:.3e}, RK order {order:.2}"),
    )
}

fn quick_suite(dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_matchkit"))
        .args(["--quick", "--seed", "7", "--out"])
        .arg(dir)
        .args(["rates", "all"])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    status
        .success()
        .then_some(())
        .ok_or_else(|| format!("exit status {status}"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if let Err(e) = quick_suite(&a).and_then(|_| quick_suite(&b)) {
        return outcome(false, format!("quick suite failed: {e}"));
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        fa.len() == fb.len() && fa.len() >= 7 && differing.is_empty(),
        format!(
            "{} csv files, {} differ {:?}",
            fa.len(),
            differing.len(),
            differing
        ),
    )
}

/// Criterion ids given on the command line restrict the run; none means all.
fn selection() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if picked.is_empty() {
        (1..=12).collect()
    } else {
        picked
    }
}

fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let selected = selection();
    let wants = |id: usize| selected.contains(&id);
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &str, o: Outcome| {
        println!(
            "criterion {id:>2} {} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, o));
    };

    let simple: [Criterion; 7] = [
        (1, "exact discrete transport", 10.0, criterion_ot),
        (2, "elliptic solvers", 10.0, criterion_pde),
        (3, "heat kernel", 10.0, criterion_heat),
        (4, "cost asymptotics", 600.0, criterion_cost),
        (5, "contractivity", 300.0, criterion_contractivity),
        (6, "gradient Lq bound", 300.0, criterion_lq),
        (7, "map approximation", 600.0, criterion_map),
    ];
    for (id, name, limit, f) in simple {
        if wants(id) {
            report(id, name, timed(limit, f));
        }
    }

    if wants(8) || wants(10) {
        let start = Instant::now();
        let plan = experiment(Experiment::Plan, |_| {});
        let secs = start.elapsed().as_secs_f64();
        if wants(8) {
            let mut o = criterion_plan(&plan);
            o.passed &= secs <= 600.0;
            o.detail = format!("{} [{secs:.1}s / 600s]", o.detail);
            report(8, "plan approximation", o);
        }
        if wants(10) {
            let sine = experiment(Experiment::Plan, |c| {
                c.density = DensitySpec::Sine { amplitude: 0.5 };
                c.trials = 8;
            });
            report(
                10,
                "regularization energy",
                criterion_energy(&[&plan, &sine]),
            );
        }
    }
    if wants(9) {
        report(9, "fluctuation events", timed(180.0, criterion_fluctuation));
    }
    if wants(11) {
        report(11, "flow coupling", timed(30.0, criterion_flow));
    }
    if wants(12) {
        report(
            12,
            "determinism",
            timed(f64::INFINITY, criterion_determinism),
        );
    }

    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results
        .iter()
        .filter(|r| !r.1.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "{} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
