//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line on
//! the real stderr (bypassing the harness capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;
use std::sync::OnceLock;
use std::time::Instant;

use leadvar::cv::Grid;
use leadvar::evaluate::{adjusted_rand_index, paired_ttest_onesided};
use leadvar::experiment::{run_sweep, seed_data, tune_and_fit, CellResult, SweepConfig};
use leadvar::mcvar::hadamard_kronecker_design;
use leadvar::model::gamma_from_structure;
use leadvar::scvar::fit_scvar_gram;
use leadvar::simulate::{companion_spectral_radius, simulate_var, ScenarioId, SimulationConfig};
use leadvar::solvers::{
    group_lasso_bcd, group_lasso_kkt_violation, lasso_cd, lasso_kkt_violation, project_simplex, Quadratic,
};
use leadvar::structure::{block_products, stack_blocks, structured_loss, vec_columns};
use leadvar::{
    build_lag_design, cluster_assignments, fit_mcvar_gram, FitOptions, FitState, McvarInit, MethodRegistry,
    TimeSeriesPanel, VarModel,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {verdict}  {detail}");
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn simplex_point(rng: &mut ChaCha8Rng, len: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x * total / s).collect()
}

struct Sweep {
    cells: Vec<CellResult>,
    seconds: f64,
}

impl Sweep {
    fn run(cfg: SweepConfig) -> Sweep {
        let start = Instant::now();
        let res = run_sweep(&cfg, &MethodRegistry::builtin()).expect("sweep runs");
        Sweep { cells: res.cells, seconds: start.elapsed().as_secs_f64() }
    }

    fn mean(&self, method: &str, size: usize, f: impl Fn(&CellResult) -> Option<f64>) -> f64 {
        let v: Vec<f64> =
            self.cells.iter().filter(|c| c.method == method && c.size == size).filter_map(f).collect();
        assert!(!v.is_empty(), "no cells for {method} at {size}");
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn rel(&self, method: &str, size: usize) -> f64 {
        self.mean(method, size, |c| Some(c.relative_mse))
    }

    fn acc(&self, method: &str, size: usize) -> f64 {
        self.mean(method, size, |c| c.granger_accuracy)
    }
}

fn sweep_a() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| {
        let mut cfg = SweepConfig::new(ScenarioId::A);
        cfg.methods = ["scvar", "mcvar", "lg", "glg"].map(String::from).to_vec();
        Sweep::run(cfg)
    })
}

fn sweep_c() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| {
        let mut cfg = SweepConfig::new(ScenarioId::C);
        cfg.methods = ["scvar", "ar", "lg", "glg"].map(String::from).to_vec();
        Sweep::run(cfg)
    })
}

struct ClusterRun {
    ari: f64,
    objective: Vec<f64>,
    feasibility: Vec<f64>,
}

fn scenario_b() -> &'static Vec<ClusterRun> {
    static S: OnceLock<Vec<ClusterRun>> = OnceLock::new();
    S.get_or_init(|| {
        let reg = MethodRegistry::builtin();
        (1..=5u64)
            .map(|seed| {
                let data = seed_data(ScenarioId::B, seed, 500, 10).unwrap();
                let design = build_lag_design(&data.train_full, data.scenario.spec.p).unwrap();
                let mut grid = Grid::standard(data.scenario.spec.k);
                grid.r_values = Some(vec![2]);
                let fit = tune_and_fit(&reg, "mcvar", &design, &grid, 5, &FitOptions::default()).unwrap();
                let FitState::Mcvar(s) = &fit.state else { panic!("mcvar fit expected") };
                let ari = adjusted_rand_index(&cluster_assignments(&s.g), &data.scenario.spec.cluster_labels()).unwrap();
                ClusterRun { ari, objective: s.objective_trace.clone(), feasibility: s.feasibility_trace.clone() }
            })
            .collect()
    })
}

#[test]
fn criterion_1_scenario_a_ordering() {
    let s = sweep_a();
    let mut ok = true;
    let mut detail = String::new();
    for size in [30, 50] {
        let structured = s.rel("scvar", size).max(s.rel("mcvar", size));
        let lasso = s.rel("lg", size).min(s.rel("glg", size));
        ok &= structured < lasso;
        detail += &format!("T={size}: max(scvar,mcvar)={structured:.4} min(lg,glg)={lasso:.4}; ");
    }
    let at500 = s.rel("scvar", 500);
    ok &= at500 <= 1.10;
    ok &= s.seconds < 600.0;
    detail += &format!("scvar@500={at500:.4} (<=1.10); sweep {:.0}s (<600s)", s.seconds);
    report(1, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_2_scenario_c_robustness() {
    let s = sweep_c();
    let mut ok = true;
    let mut detail = String::new();
    for size in SweepConfig::new(ScenarioId::C).sizes {
        let (sc, ar, lg, glg) = (s.rel("scvar", size), s.rel("ar", size), s.rel("lg", size), s.rel("glg", size));
        let fine = (sc / ar - 1.0).abs() <= 0.08 && sc <= 1.02 * lg && sc <= 1.02 * glg;
        ok &= fine;
        detail += &format!("T={size}: scvar/ar={:.3} scvar/lg={:.3} scvar/glg={:.3}; ", sc / ar, sc / lg, sc / glg);
    }
    report(2, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_3_granger_recovery() {
    let s = sweep_a();
    let (sc, mc) = (s.acc("scvar", 500), s.acc("mcvar", 500));
    let (lg50, sc50, mc50) = (s.acc("lg", 50), s.acc("scvar", 50), s.acc("mcvar", 50));
    let ok = sc >= 0.95 && mc >= 0.95 && lg50 < sc50 && lg50 < mc50;
    let detail = format!("T=500 scvar={sc:.3} mcvar={mc:.3} (>=0.95); T=50 lg={lg50:.3} vs scvar={sc50:.3} mcvar={mc50:.3}");
    report(3, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_4_cluster_recovery() {
    let mut aris: Vec<f64> = scenario_b().iter().map(|r| r.ari).collect();
    aris.sort_by(f64::total_cmp);
    let median = aris[aris.len() / 2];
    let ok = median >= 0.9;
    let detail = format!("median ARI {median:.3} (>=0.9) over {aris:.3?}");
    report(4, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_5_rank_one_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    let mut same_length = true;
    for case in 0..10u64 {
        let k = rng.random_range(2..=5);
        let p = rng.random_range(1..=2);
        let t = rng.random_range(40..=100);
        let mut w = normal_matrix(&mut rng, k * p, k) * 0.2;
        let names: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
        while companion_spectral_radius(&VarModel::new(w.clone(), p, names.clone()).unwrap()) >= 0.95 {
            w *= 0.5;
        }
        let model = VarModel::new(w, p, names).unwrap();
        let panel = simulate_var(&model, &SimulationConfig::new(t, case)).unwrap();
        let gram = build_lag_design(&panel, p).unwrap().gram();
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
        let kappa = 10f64.powf(rng.random_range(-1.0..0.5));
        let opts = FitOptions { record_history: true, ..FitOptions::default() };

        let sc = fit_scvar_gram(&gram, lambda, kappa, &opts).unwrap();
        let mc = fit_mcvar_gram(&gram, lambda, kappa, 1, &opts, &McvarInit::Uniform).unwrap();
        same_length &= sc.history.len() == mc.history.len() && !sc.history.is_empty();
        for (a, b) in sc.history.iter().zip(&mc.history) {
            worst = worst.max((a - b).amax());
        }
    }
    let ok = same_length && worst <= 1e-6;
    let detail = format!("max per-iteration |W_scvar - W_mcvar(r=1)| = {worst:.2e} (<=1e-6), equal iteration counts: {same_length}");
    report(5, ok, &detail);
    assert!(ok, "{detail}");
}

/// Exact Euclidean projection by enumerating supports: on support `S` the
/// KKT conditions give `x_S = v_S - (sum v_S - kappa)/|S|`.
fn brute_force_projection(v: &[f64], kappa: f64) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - kappa) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = v[i] - shift;
        }
        if x.iter().any(|&xi| xi < -1e-12) {
            continue;
        }
        let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, x));
        }
    }
    best.expect("some support is feasible").1
}

fn groups_of(k: usize, p: usize) -> Vec<Range<usize>> {
    (0..k).map(|b| b * p..(b + 1) * p).collect()
}

#[test]
fn criterion_6_solver_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);

    let mut simplex_err = 0.0f64;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let kappa = rng.random_range(0.05..3.0);
        let fast = project_simplex(&v, kappa).unwrap();
        let slow = brute_force_projection(&v, kappa);
        simplex_err = simplex_err.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }

    let mut grad_err = 0.0f64;
    for _ in 0..20 {
        let h = normal_matrix(&mut rng, 30, 6);
        let r = DVector::from_fn(30, |_, _| rng.sample(StandardNormal));
        let quad = Quadratic::from_least_squares(&h, &r);
        let x = DVector::from_fn(6, |_, _| rng.sample(StandardNormal));
        let analytic = quad.gradient(&x);
        let eps = 1e-5;
        let fd = DVector::from_fn(6, |i, _| {
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += eps;
            down[i] -= eps;
            (quad.value(&up) - quad.value(&down)) / (2.0 * eps)
        });
        grad_err = grad_err.max((&analytic - &fd).norm() / analytic.norm());
    }

    let mut lasso_kkt = 0.0f64;
    let mut group_kkt = 0.0f64;
    for case in 0..10 {
        let (n, k, p) = (40 + 5 * case, 4, 3);
        let x = normal_matrix(&mut rng, n, k * p);
        let truth = DVector::from_fn(k * p, |i, _| if i < p { 1.0 } else { 0.0 });
        let y = &x * truth + DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let lambda = rng.random_range(0.5..20.0);
        let w = lasso_cd(&x, &y, lambda).unwrap();
        lasso_kkt = lasso_kkt.max(lasso_kkt_violation(&x, &y, &w, lambda));
        let groups = groups_of(k, p);
        let wg = group_lasso_bcd(&x, &y, lambda, &groups).unwrap();
        group_kkt = group_kkt.max(group_lasso_kkt_violation(&x, &y, &wg, lambda, &groups));
    }

    let mut hk_err = 0.0f64;
    for _ in 0..10 {
        let (k, p, r, t) = (rng.random_range(2..=4), rng.random_range(1..=2), rng.random_range(1..=3), 25);
        let panel = TimeSeriesPanel::from_values(normal_matrix(&mut rng, t, k)).unwrap();
        let design = build_lag_design(&panel, p).unwrap();
        let n = design.n_rows();
        let v = normal_matrix(&mut rng, k * p, k);
        let kappa = rng.random_range(0.2..2.0);
        let mut d = DMatrix::zeros(k, r);
        for j in 0..r {
            d.set_column(j, &DVector::from_vec(simplex_point(&mut rng, k, kappa)));
        }
        let mut g = DMatrix::zeros(r, k);
        for c in 0..k {
            g.set_column(c, &DVector::from_vec(simplex_point(&mut rng, r, 1.0)));
        }
        let (hs, resid) = block_products(&design, &v);

        let m = hadamard_kronecker_design(&g, &stack_blocks(&hs), n);
        let vec_d = DVector::from_column_slice(d.as_slice());
        let matrix_form = (vec_columns(&resid) - m * vec_d).norm_squared();

        let a = &d * &g;
        let mut loop_sum = 0.0;
        for kk in 0..k {
            for row in 0..n {
                let pred: f64 = (0..k).filter(|&b| b != kk).map(|b| hs[kk][(row, b)] * a[(b, kk)]).sum();
                loop_sum += (resid[(row, kk)] - pred).powi(2);
            }
        }
        let direct = structured_loss(&design, &gamma_from_structure(&a), &v).unwrap();
        hk_err = hk_err.max((matrix_form - loop_sum).abs() / loop_sum).max((direct - loop_sum).abs() / loop_sum);
    }

    let ok = simplex_err <= 1e-6 && grad_err <= 1e-5 && lasso_kkt <= 1e-6 && group_kkt <= 1e-6 && hk_err <= 1e-10;
    let detail = format!(
        "simplex vs QP {simplex_err:.1e}; PGD grad vs FD rel {grad_err:.1e}; lasso KKT {lasso_kkt:.1e}; \
         group KKT {group_kkt:.1e}; Hadamard-Kronecker vs loop rel {hk_err:.1e}"
    );
    report(6, ok, &detail);
    assert!(ok, "{detail}");
}

/// Worst relative increase and worst feasibility violation over traces.
fn trace_check<'a>(traces: impl Iterator<Item = (&'a [f64], &'a [f64])>) -> (f64, f64, usize) {
    let (mut rise, mut infeasible, mut count) = (0.0f64, 0.0f64, 0);
    for (obj, feas) in traces {
        count += 1;
        for w in obj.windows(2) {
            rise = rise.max((w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE));
        }
        infeasible = feas.iter().copied().fold(infeasible, f64::max);
        assert!(!obj.is_empty() && obj.len() == feas.len());
    }
    (rise, infeasible, count)
}

#[test]
fn criterion_7_monotone_and_feasible() {
    let structured = |s: &'static Sweep| {
        s.cells
            .iter()
            .filter(|c| c.method == "scvar" || c.method == "mcvar")
            .map(|c| (c.objective_trace.as_slice(), c.feasibility_trace.as_slice()))
    };
    let b = scenario_b().iter().map(|r| (r.objective.as_slice(), r.feasibility.as_slice()));
    let (rise, infeasible, count) = trace_check(structured(sweep_a()).chain(structured(sweep_c())).chain(b));
    let ok = rise <= 1e-8 && infeasible <= 1e-8;
    let detail = format!("{count} fits; worst relative rise {rise:.1e} (<=1e-8); worst simplex violation {infeasible:.1e} (<=1e-8)");
    report(7, ok, &detail);
    assert!(ok, "{detail}");
}

/// Batch-means estimate and standard error of `mean_t f(t)`.
fn batch_mean(n: usize, batches: usize, f: impl Fn(usize) -> f64) -> (f64, f64) {
    let len = n / batches;
    let means: Vec<f64> = (0..batches).map(|b| (b * len..(b + 1) * len).map(&f).sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

#[test]
fn criterion_8_simulator() {
    // y_t = A y_{t-1} + e_t; W holds A transposed.
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.3, 0.4]);
    let model = VarModel::new(a.transpose(), 1, vec!["a".into(), "b".into()]).unwrap();
    let n = 50_000;
    let y = simulate_var(&model, &SimulationConfig::new(n + 1, 8)).unwrap().values().clone();

    // Lyapunov: vec(G0) = (I - A (x) A)^-1 vec(I); G1 = E[y_t y_{t-1}'] = A G0.
    let lhs = DMatrix::identity(4, 4) - a.kronecker(&a);
    let g0 = lhs.lu().solve(&DVector::from_column_slice(DMatrix::<f64>::identity(2, 2).as_slice())).unwrap();
    let g0 = DMatrix::from_column_slice(2, 2, g0.as_slice());
    let g1 = &a * &g0;

    let mut worst_z = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let (m0, se0) = batch_mean(n, 50, |t| y[(t + 1, i)] * y[(t + 1, j)]);
            let (m1, se1) = batch_mean(n, 50, |t| y[(t + 1, i)] * y[(t, j)]);
            worst_z = worst_z.max((m0 - g0[(i, j)]).abs() / se0).max((m1 - g1[(i, j)]).abs() / se1);
        }
    }

    let ar = VarModel::new(DMatrix::from_element(1, 1, 0.9), 1, vec!["x".into()]).unwrap();
    let x = simulate_var(&ar, &SimulationConfig::new(n, 9)).unwrap().values().column(0).into_owned();
    let mean = x.mean();
    let c = x.add_scalar(-mean);
    let rho = (0..n - 1).map(|t| c[t] * c[t + 1]).sum::<f64>() / c.norm_squared();

    let ok = worst_z <= 3.0 && (rho - 0.9).abs() <= 0.02;
    let detail = format!("K=2 autocovariances worst |z| {worst_z:.2} (<=3 MC SE); AR(1) lag-1 autocorrelation {rho:.4} (0.9 +/- 0.02)");
    report(8, ok, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_9_t_critical_values() {
    let table: BTreeMap<usize, f64> = [(2, 2.919986), (10, 1.812461), (100, 1.660234)].into_iter().collect();
    let mut worst = 0.0f64;
    for (&df, &crit) in &table {
        let n = df + 1;
        // Differences with sample sd 1 and mean crit/sqrt(n), so t = crit.
        let centered: Vec<f64> = (0..n).map(|i| i as f64 - (n - 1) as f64 / 2.0).collect();
        let sd = (centered.iter().map(|x| x * x).sum::<f64>() / df as f64).sqrt();
        let errors_a = vec![5.0; n];
        let errors_b: Vec<f64> = centered.iter().map(|e| 5.0 + crit / (n as f64).sqrt() + e / sd).collect();
        let test = paired_ttest_onesided(&errors_a, &errors_b, 0.05).unwrap();
        assert!((test.t - crit).abs() < 1e-9, "t statistic {}", test.t);
        worst = worst.max((test.p_better - 0.05).abs()).max((test.p_worse - 0.95).abs());
    }
    let ok = worst <= 1e-3;
    let detail = format!("df 2/10/100: worst |p - 0.05| at tabulated critical values {worst:.1e} (<=1e-3)");
    report(9, ok, &detail);
    assert!(ok, "{detail}");
}
