//! Acceptance suite: one test per criterion, each printing a single
//! `criterion NN: PASS|FAIL ...` line to stderr (not captured by the harness).

use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use concentra::diagnostics::{
    concentration_gradient_test, concentration_series, pucci_serrin_residual, ConcentrationSeries,
    VectorField,
};
use concentra::fields::{
    gamma_value_gradient, Classification, ConstantDiffusion, ConstantPotential, DiagonalQuadratic,
    GaussianWell, GaussianWells, QuadraticWell,
};
use concentra::frozen::{frozen_functional, frozen_sigma_numeric};
use concentra::grid::{build_grid, DiscreteFunctional, GridDomain, GridFunction, Mode};
use concentra::penalty::PenaltyConfig;
use concentra::problem::ProblemSpec;
use concentra::profile::{
    scaled_profile, sigma_closed_form, solve_radial_ground_state, RadialProfile,
};
use concentra::reduction::{ReducedProblem, ReductionOptions};
use concentra::region::BoxRegion;
use concentra::solvers::{
    concentration_grid, concentration_seed, mountain_pass_level, multi_start, negative_endpoint,
    nehari_minimize, newton_refine, SolverOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const P: f64 = 3.0;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n:02}: {verdict} {detail}");
}

fn profile(dim: usize) -> Arc<RadialProfile> {
    static P1: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    static P2: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    let cell = match dim {
        1 => &P1,
        2 => &P2,
        _ => unreachable!(),
    };
    cell.get_or_init(|| Arc::new(solve_radial_ground_state(dim, P, 1e-13).unwrap()))
        .clone()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn with_lambda(spec: ProblemSpec, lo: Vec<f64>, hi: Vec<f64>) -> ProblemSpec {
    let v_min = 1.0;
    let cfg =
        PenaltyConfig::with_defaults(BoxRegion::new(lo, hi).unwrap(), spec.p, 0.5 * v_min).unwrap();
    spec.with_penalty(cfg)
}

/// `V = 1 + |z - (0.3, -0.2)|^2` on `Lambda = [-3, 3]^2`.
fn concentration_spec(anisotropic: bool) -> ProblemSpec {
    let v = Arc::new(QuadraticWell::new(1.0, vec![0.3, -0.2]));
    let spec = if anisotropic {
        let j = DiagonalQuadratic {
            base: vec![1.0, 1.0],
            quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
        };
        ProblemSpec::new(2, P, v, Arc::new(j)).unwrap()
    } else {
        ProblemSpec::new(2, P, v, Arc::new(ConstantDiffusion::identity(2))).unwrap()
    };
    with_lambda(spec, vec![-3.0, -3.0], vec![3.0, 3.0])
}

fn series(anisotropic: bool) -> &'static ConcentrationSeries {
    static ISO: OnceLock<ConcentrationSeries> = OnceLock::new();
    static ANISO: OnceLock<ConcentrationSeries> = OnceLock::new();
    let cell = if anisotropic { &ANISO } else { &ISO };
    cell.get_or_init(|| {
        let spec = concentration_spec(anisotropic);
        concentration_series(&spec, &profile(2), 0.5, 4, None, &SolverOptions::default()).unwrap()
    })
}

#[test]
fn criterion_01_one_dimensional_oracle() {
    let start = Instant::now();
    let prof = solve_radial_ground_state(1, 3.0, 1e-13).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let e_u0 = (prof.u0 / 2f64.sqrt() - 1.0).abs();
    let e_c0 = (prof.c0 / (16.0 / 3.0) - 1.0).abs();
    let pass = e_u0 < 1e-5 && e_c0 < 1e-5 && secs < 1.0;
    report(
        1,
        pass,
        &format!("U(0) rel err {e_u0:.2e}, C0 rel err {e_c0:.2e}, {secs:.3} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_sigma_matches_c1_gamma() {
    let start = Instant::now();
    let v = Arc::new(QuadraticWell {
        base: 1.0,
        curvature: 0.5,
        center: vec![0.0, 0.0],
    });
    let j = Arc::new(DiagonalQuadratic {
        base: vec![1.0, 1.0],
        quad: vec![vec![0.25, 0.0], vec![0.0, 0.5]],
    });
    let spec = ProblemSpec::new(2, P, v, j).unwrap();
    let prof = profile(2);
    let grid = build_grid(2, 15.0, 257).unwrap();
    let points = [[0.0, 0.0], [0.5, 0.0], [0.0, -0.8], [1.0, 1.0], [-0.7, 0.4]];
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for z in points {
        let state = frozen_sigma_numeric(&z, &grid, &spec, &prof, &opts).unwrap();
        let sigma = sigma_closed_form(&z, &prof, spec.v(), spec.j()).unwrap();
        let err = (state.energy / sigma - 1.0).abs();
        worst = worst.max(err);
        parts.push(format!("{err:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 0.02 && secs < 120.0;
    report(
        2,
        pass,
        &format!(
            "|Sigma_num/(C1 Gamma)-1| = [{}], {secs:.1} s",
            parts.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_mountain_pass_equals_nehari() {
    let start = Instant::now();
    let v = Arc::new(QuadraticWell::new(0.5, vec![0.0, 0.0]));
    let j = Arc::new(DiagonalQuadratic {
        base: vec![1.0, 1.0],
        quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
    });
    let spec = ProblemSpec::new(2, P, v, j).unwrap();
    let z = [0.6, -0.4];
    let grid = build_grid(2, 12.0, 97).unwrap();
    let f = frozen_functional(&z, &grid, &spec).unwrap();
    let sp = scaled_profile(&z, 1.0, profile(2), spec.v(), spec.j())
        .unwrap()
        .centered_at(&[0.0, 0.0]);
    let bump = grid.sample(|x| sp.value(x));
    let opts = SolverOptions::default();
    let desc = nehari_minimize(&f, &bump, opts.descent_tol, &opts).unwrap();
    let nehari = newton_refine(&f, &desc.solution, opts.newton_tol, &opts).unwrap();
    let end = negative_endpoint(&f, &bump.values).unwrap();
    let end = GridFunction::new(grid.clone(), end).unwrap();
    let mp = mountain_pass_level(&f, &end, opts.mp_nodes, &opts).unwrap();
    let rel = (mp.level / nehari.energy - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    let pass = nehari.converged && mp.converged && rel < 1e-3 && secs < 300.0;
    report(
        3,
        pass,
        &format!(
            "MP level {:.8e}, Nehari {:.8e}, rel diff {rel:.2e}, {} sweeps, stabilised={}, {secs:.1} s",
            mp.level, nehari.energy, mp.sweeps, mp.converged
        ),
    );
    assert!(pass);
}

fn concentration_check(s: &ConcentrationSeries) -> (bool, String) {
    let sum = s.summary();
    let complete = s.records.len() == 4 && s.truncated.is_none();
    let unique = s.records.iter().all(|r| r.unique_max);
    let pass = complete
        && unique
        && sum.distance_nonincreasing
        && sum.finest_within_3h
        && sum.gamma_gap_decreasing;
    let h = s.records.last().map(|r| r.h).unwrap_or(f64::NAN);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|d| format!("{d:.2e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    (
        pass,
        format!(
            "levels={} unique_max={unique} |x-z0|=[{}] (3h={:.2e}) Gamma gap=[{}]",
            s.records.len(),
            fmt(&sum.distances),
            3.0 * h,
            fmt(&sum.gamma_gaps)
        ),
    )
}

#[test]
fn criterion_04_concentration() {
    let start = Instant::now();
    let (iso_ok, iso) = concentration_check(series(false));
    let (an_ok, an) = concentration_check(series(true));
    let secs = start.elapsed().as_secs_f64();
    let pass = iso_ok && an_ok && secs < 600.0;
    report(
        4,
        pass,
        &format!("J=I: {iso}; J=diag(1+z1^2/4,1): {an}; {secs:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_energy_scaling() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, aniso) in [("J=I", false), ("J aniso", true)] {
        let s = series(aniso);
        let sum = s.summary();
        let ok = s.records.len() == 4 && sum.energy_within_5pct;
        pass &= ok;
        parts.push(format!(
            "{name}: eps^-N E / Sigma(z0) - 1 = {:.3e}",
            sum.energy_errors.last().copied().unwrap_or(f64::NAN)
        ));
    }
    report(5, pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn criterion_06_exterior_bound() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, aniso) in [("J=I", false), ("J aniso", true)] {
        let s = series(aniso);
        let n = s.records.len();
        let ok = n == 4 && s.summary().exterior_two_finest;
        pass &= ok;
        let ell = concentration_spec(aniso).penalty.unwrap().ell;
        let ext: Vec<String> = s.records[n.saturating_sub(2)..]
            .iter()
            .map(|r| format!("{:.3e}", r.max_exterior / ell))
            .collect();
        parts.push(format!("{name}: max exterior / ell = [{}]", ext.join(", ")));
    }
    report(6, pass, &parts.join("; "));
    assert!(pass);
}

/// Non-constant `V` and `J` for the reduction criteria.
fn reduction_problem() -> ReducedProblem {
    reduction_problem_on(ReductionOptions::default().nodes)
}

/// Same problem on a reduction grid with `nodes` per axis.
fn reduction_problem_on(nodes: usize) -> ReducedProblem {
    let v = Arc::new(QuadraticWell {
        base: 1.0,
        curvature: 0.5,
        center: vec![0.5, 0.2],
    });
    let j = Arc::new(DiagonalQuadratic {
        base: vec![1.0, 1.0],
        quad: vec![vec![0.25, 0.0], vec![0.0, 0.0]],
    });
    let spec = ProblemSpec::new(2, P, v, j).unwrap();
    let opts = ReductionOptions {
        nodes,
        ..ReductionOptions::default()
    };
    ReducedProblem::new(spec, profile(2), opts).unwrap()
}

#[test]
fn criterion_07_reduction_expansion() {
    let start = Instant::now();
    // h = 1/16: the O(h^2) energy floor would otherwise mask the eps-scaling
    let rp = reduction_problem_on(385);
    let c1 = rp.profile.c1();
    let eps_list = [0.4, 0.2, 0.1, 0.05];
    let xis = [[2.0, 0.0], [0.0, 3.0], [-2.0, 1.5]];
    let mut pass = true;
    let mut parts = Vec::new();
    for xi in xis {
        let mut gaps = Vec::new();
        let mut rems = Vec::new();
        for &eps in &eps_list {
            let z: Vec<f64> = xi.iter().map(|x| eps * x).collect();
            let (gamma, dgamma) = gamma_value_gradient(&z, rp.spec.v(), rp.spec.j(), P).unwrap();
            let s = rp.reduced_energy(&xi, eps, true).unwrap();
            gaps.push((s.phi - c1 * gamma).abs());
            let g = s.grad.unwrap();
            let rem = g
                .iter()
                .zip(&dgamma)
                .map(|(a, b)| (a - c1 * eps * b).powi(2))
                .sum::<f64>()
                .sqrt();
            rems.push(rem);
        }
        let ratios: Vec<f64> = gaps.windows(2).map(|w| w[1] / w[0]).collect();
        let slope = loglog_slope(&eps_list, &rems);
        let ok = ratios.iter().all(|r| (r - 0.5).abs() <= 0.2) && slope >= 1.8;
        pass &= ok;
        parts.push(format!(
            "xi={xi:?}: gap ratios [{}], remainder slope {slope:.2}",
            ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    report(7, pass, &format!("{}; {secs:.1} s", parts.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_08_correction_bound() {
    let rp = reduction_problem();
    let xi = [2.0, -1.0];
    let eps_list = [0.4, 0.2, 0.1, 0.05, 0.025];
    let norms: Vec<f64> = eps_list
        .iter()
        .map(|&eps| rp.reduced_energy(&xi, eps, false).unwrap().wnorm)
        .collect();
    let slope = loglog_slope(&eps_list, &norms);
    let pass = slope >= 0.8;
    report(
        8,
        pass,
        &format!(
            "||w|| = [{}], log-log slope {slope:.3}",
            norms
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_hessian_signs() {
    let rp = reduction_problem();
    let eps = 0.1;
    let xi = [2.0, -1.0];
    let frame = rp.frame(&xi, eps).unwrap();
    let hess = frame.hessian();
    let quad = |v: &[f64]| -> f64 {
        let hv = hess.apply_vec(v);
        frame.grid.cell_volume() * v.iter().zip(&hv).map(|(a, b)| a * b).sum::<f64>()
    };
    let zq = quad(&frame.z.values);
    // H1-orthogonal complement of span{z, tangents} by Gram-Schmidt.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for b in std::iter::once(frame.z.values.clone()).chain(frame.tangents.iter().cloned()) {
        let mut b = b;
        for e in &basis {
            let c = frame.h1_dot(&b, e);
            b.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        let n = frame.h1_norm(&b);
        b.iter_mut().for_each(|x| *x /= n);
        basis.push(b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut min_ratio = f64::INFINITY;
    let mut positive = 0;
    let center = frame.grid.center.clone();
    for _ in 0..20 {
        let bumps: Vec<(Vec<f64>, f64, f64)> = (0..6)
            .map(|_| {
                let c: Vec<f64> = center
                    .iter()
                    .map(|x| x + rng.gen_range(-3.0..3.0))
                    .collect();
                (c, rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let mut v = frame
            .grid
            .sample(|x| {
                bumps
                    .iter()
                    .map(|(c, w, a)| a * (-dist(x, c).powi(2) / (w * w)).exp())
                    .sum()
            })
            .values;
        for e in &basis {
            let c = frame.h1_dot(&v, e);
            v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
        }
        let q = quad(&v) / frame.h1_dot(&v, &v);
        min_ratio = min_ratio.min(q);
        if q > 0.0 {
            positive += 1;
        }
    }
    let pass = zq < 0.0 && positive == 20;
    report(
        9,
        pass,
        &format!(
            "<D2f z,z> = {zq:.4e}; {positive}/20 positive, min <D2f v,v>/||v||^2 = {min_ratio:.4e}"
        ),
    );
    assert!(pass);
}

fn one_dimensional_spec() -> ProblemSpec {
    ProblemSpec::new(
        1,
        P,
        Arc::new(ConstantPotential { value: 1.0 }),
        Arc::new(ConstantDiffusion::identity(1)),
    )
    .unwrap()
}

#[test]
fn criterion_10_pucci_serrin_residual() {
    let spec = one_dimensional_spec();
    let field = VectorField::Dilation {
        center: vec![0.0],
        r_in: 15.0,
        r_out: 18.0,
    };
    let nodes = [201, 401, 801, 1601, 3201];
    let grids: Vec<GridDomain> = nodes
        .iter()
        .map(|&n| build_grid(1, 20.0, n).unwrap())
        .collect();
    let exact: Vec<f64> = grids
        .iter()
        .map(|g| {
            let u = g.sample(|x| 2f64.sqrt() / x[0].cosh());
            let r = pucci_serrin_residual(&u, 1.0, &spec, &field).unwrap();
            assert!(r.support_ok);
            r.residual
        })
        .collect();
    let orders: Vec<f64> = exact.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut control_orders = Vec::new();
    for _ in 0..5 {
        let bumps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.2..2.0),
                )
            })
            .collect();
        let res: Vec<f64> = grids
            .iter()
            .map(|g| {
                let u = g.sample(|x| {
                    bumps
                        .iter()
                        .map(|(c, w, a)| a * (-((x[0] - c) / w).powi(2)).exp())
                        .sum()
                });
                pucci_serrin_residual(&u, 1.0, &spec, &field)
                    .unwrap()
                    .residual
            })
            .collect();
        control_orders.push((res[0] / res[res.len() - 1]).log2() / (res.len() - 1) as f64);
    }
    let pass = orders.iter().all(|o| *o >= 1.8) && control_orders.iter().all(|o| o.abs() < 0.2);
    report(
        10,
        pass,
        &format!(
            "exact residuals [{}], orders [{}]; non-solution orders [{}]",
            exact
                .iter()
                .map(|v| format!("{v:.2e}"))
                .collect::<Vec<_>>()
                .join(", "),
            orders
                .iter()
                .map(|v| format!("{v:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
            control_orders
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_necessary_condition() {
    let spec = concentration_spec(true);
    let s = series(true);
    assert_eq!(s.records.len(), 4, "series truncated: {:?}", s.truncated);
    let comps: Vec<Vec<f64>> = s
        .records
        .iter()
        .map(|r| concentration_gradient_test(&r.solution, r.eps, &s.z0, &spec).unwrap())
        .collect();
    // A component that vanishes identically stays at round-off; it has nothing left to decrease.
    let scale = comps[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-9 * scale;
    let decreasing = comps.windows(2).all(|w| {
        w[0].iter()
            .zip(&w[1])
            .all(|(a, b)| b.abs() <= floor || b.abs() <= 0.6 * a.abs())
    });

    // Negative control: an unconverged profile pinned at a non-critical point.
    let pin = [1.2, 0.8];
    let eps = 0.125;
    let cfg = spec.penalty.clone().unwrap();
    let opts = SolverOptions::default();
    let dom = concentration_grid(eps, &cfg, &opts).unwrap();
    let f = DiscreteFunctional::new(&dom, &spec, eps, &Mode::Penalized).unwrap();
    let seed = concentration_seed(eps, &spec, &profile(2), &pin, &f).unwrap();
    let control = concentration_gradient_test(&seed, eps, &pin, &spec).unwrap();
    let (_, dgamma) = gamma_value_gradient(&pin, spec.v(), spec.j(), P).unwrap();
    let signs_agree = control.iter().zip(&dgamma).all(|(c, g)| c * (-g) > 0.0);
    let pass = decreasing && signs_agree;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        11,
        pass,
        &format!(
            "components per eps: {}; control at {pin:?}: [{}] vs -grad Gamma [{}]",
            comps
                .iter()
                .map(|c| format!("[{}]", fmt(c)))
                .collect::<Vec<_>>()
                .join(" "),
            fmt(&control),
            fmt(&dgamma.iter().map(|g| -g).collect::<Vec<_>>())
        ),
    );
    assert!(pass);
}

/// `V = 2 - sum exp(-|z -+ e1|^2 / 0.25)` on `Lambda = [-2, 2] x [-1, 1]`.
fn double_well_spec() -> ProblemSpec {
    let well = |c: f64| GaussianWell {
        center: vec![c, 0.0],
        depth: 1.0,
        width: 0.5,
    };
    let v = Arc::new(GaussianWells {
        base: 2.0,
        wells: vec![well(1.0), well(-1.0)],
    });
    let spec = ProblemSpec::new(2, P, v, Arc::new(ConstantDiffusion::identity(2))).unwrap();
    with_lambda(spec, vec![-2.0, -1.0], vec![2.0, 1.0])
}

#[test]
fn criterion_12_multiplicity() {
    let start = Instant::now();
    let spec = double_well_spec();
    let cfg = spec.penalty.clone().unwrap();
    let region = cfg.region.clone();
    let crit =
        concentra::fields::find_gamma_critical_points(&region, 41, 1e-12, spec.v(), spec.j(), P)
            .unwrap();
    let minima: Vec<Vec<f64>> = crit
        .iter()
        .filter(|c| c.classification == Classification::Min)
        .map(|c| c.point.clone())
        .collect();
    assert_eq!(minima.len(), 2, "Gamma should have two minima in Lambda");

    let eps = 0.125;
    let opts = SolverOptions::default();
    let dom = concentration_grid(eps, &cfg, &opts).unwrap();
    let seeds: Vec<Vec<f64>> = [1.0, -1.0]
        .iter()
        .flat_map(|s| [vec![s * 1.0, 0.0], vec![s * 0.9, 0.1], vec![s * 1.1, -0.1]])
        .collect();
    let sols = multi_start(&seeds, eps, &spec, &profile(2), &dom, &opts).unwrap();
    let five_h = 5.0 * dom.h;
    let matched = |pts: &[Vec<f64>], tol: f64| {
        minima
            .iter()
            .all(|m| pts.iter().filter(|b| dist(b, m) < tol).count() == 1)
    };
    let bary: Vec<Vec<f64>> = sols.iter().map(|s| s.barycenter.clone()).collect();
    let ms_ok = sols.len() == 2 && matched(&bary, five_h);

    let rp = ReducedProblem::new(spec.clone(), profile(2), ReductionOptions::default()).unwrap();
    let found = rp
        .reduced_critical_points(&region.scaled(1.0 / eps), eps, 41, &opts)
        .unwrap();
    let reduced_min: Vec<Vec<f64>> = found
        .iter()
        .filter(|c| c.classification == Classification::Min)
        .map(|c| c.z.clone())
        .collect();
    let rc_ok = reduced_min.len() == 2 && matched(&reduced_min, five_h);
    let secs = start.elapsed().as_secs_f64();
    let pass = ms_ok && rc_ok && secs < 900.0;
    let fmt = |pts: &[Vec<f64>]| {
        pts.iter()
            .map(|p| format!("({:.4}, {:.4})", p[0], p[1]))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        12,
        pass,
        &format!(
            "Gamma minima {}; multi_start: {} solutions at {}; reduced minima {}; 5h={five_h:.3e}; {secs:.1} s",
            fmt(&minima),
            sols.len(),
            fmt(&bary),
            fmt(&reduced_min)
        ),
    );
    assert!(pass);
}

const DETERMINISM_CONFIG: &str = r#"
[problem]
dim = 2
nodes = 65
half_width = 13.0
lambda = [-2.0, 2.0, -2.0, 2.0]

[problem.potential]
family = "quadratic_well"
curvature = 1.0
center = [0.1, 0.0]

[problem.diffusion]
family = "diagonal_quadratic"
base = [1.0, 1.0]
quad = [[0.25, 0.0], [0.0, 0.0]]

[reduction]
nodes = 97

[run]
eps = 0.2
eps0 = 0.35
levels = 3
z_points = [[0.0, 0.0], [0.5, -0.5]]
seed_points = [[0.1, 0.0], [0.2, 0.1]]
xi_box = [-1.0, 1.0, -1.0, 1.0]
landscape_nodes = 2
"#;

/// Every data file of several subcommands, produced twice from scratch.
#[test]
fn criterion_13_determinism() {
    use concentra::config::ExperimentConfig;
    use concentra::experiment::{run, Subcommand};
    let cfg = ExperimentConfig::from_toml_str(DETERMINISM_CONFIG, &[]).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let cmds = [
        Subcommand::LimitProfile,
        Subcommand::GammaMap,
        Subcommand::FrozenSigma,
        Subcommand::Concentrate,
        Subcommand::Reduce,
        Subcommand::Multiplicity,
    ];
    let mut files = Vec::new();
    for dir in &dirs {
        let mut written = Vec::new();
        for cmd in cmds {
            written.extend(run(cmd, &cfg, &dir.path().join(cmd.name())).unwrap());
        }
        files.push(written);
    }
    let mut differing = Vec::new();
    let mut bytes = 0;
    for (a, b) in files[0].iter().zip(&files[1]) {
        let x = std::fs::read(a).unwrap();
        let y = std::fs::read(b).unwrap();
        bytes += x.len();
        if x != y || x.is_empty() {
            differing.push(a.file_name().unwrap().to_string_lossy().to_string());
        }
    }
    let pass = files[0].len() == files[1].len() && files[0].len() >= 9 && differing.is_empty();
    report(
        13,
        pass,
        &format!(
            "{} files ({bytes} bytes) from {} subcommands; differing: {differing:?}",
            files[0].len(),
            cmds.len()
        ),
    );
    assert!(pass);
}
