//! Acceptance gate: eight numbered criteria covering gradient correctness,
//! integrator verification, the soil law, surrogate accuracy, speedup and
//! determinism. Each criterion is one test that prints a single
//!
//! ```text
//! ACCEPTANCE <n> <name>: PASS|FAIL (<measurements>)
//! ```
//!
//! line (visible with `cargo test --test acceptance -- --nocapture`) and
//! asserts the same condition, so a red criterion fails the build. Criteria
//! 4-7 share one full-size pipeline run at the default configuration, built
//! once in a scratch directory; the rest are self-contained and fast. Every
//! tolerance is written next to the check it guards.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use monorom_core::config::RunConfig;
use monorom_core::evaluate::{
    aggregate_nmse, nmse_per_channel, read_report, EvalReport, Timing,
};
use monorom_core::forcing::read_dataset;
use monorom_core::integrator::{
    DynamicSystem, IntegratorConfig, SimulationResult, Stepper, TrajectoryState,
};
use monorom_core::neural::gradcheck::{fd_gradient, max_rel_err};
use monorom_core::neural::{
    bptt, mse, mse_grad, params_to_vec, set_params, Activation, DenseLayer, LstmCell,
    LstmNetwork, Mlp,
};
use monorom_core::pipeline::{
    ae_log_path, ae_weights_path, cmd_bench, cmd_evaluate, cmd_generate, cmd_predict,
    cmd_train, cmd_train_ae, cmd_train_rom, dataset_path, manifest_path, prediction_path,
    report_path, rom_log_path, rom_weights_path, sha256_hex,
};
use monorom_core::rom::AutoencoderParams;
use monorom_core::soil::SoilProfile;
use monorom_core::structure::{assemble, static_solve, ModelConfig, SpringLaw};

/// Print the criterion's one-line verdict and enforce it.
fn verdict(n: usize, name: &str, pass: bool, details: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n} {name}: {tag} ({details})");
    assert!(pass, "acceptance criterion {n} ({name}) failed: {details}");
}

// ---------------------------------------------------------------------------
// Criterion 1: every analytic gradient matches central finite differences.
// ---------------------------------------------------------------------------

/// Compare an analytic gradient against central differences of `loss`,
/// relative error with a floor that ignores entries below FD resolution.
fn gradcheck<F: FnMut(&[f64]) -> f64>(analytic: &[f64], loss: F, at: &[f64]) -> f64 {
    let fd = fd_gradient(loss, at, 1e-4);
    max_rel_err(analytic, &fd, 1e-6)
}

fn random_mlp(rng: &mut ChaCha8Rng) -> (Mlp, usize, usize) {
    let d_in = rng.random_range(2..=5);
    let d_hidden = rng.random_range(2..=6);
    let d_out = rng.random_range(1..=4);
    let last = if rng.random_bool(0.5) {
        Activation::Linear
    } else {
        Activation::Tanh
    };
    let mlp = Mlp {
        layers: vec![
            DenseLayer::glorot(d_hidden, d_in, Activation::Tanh, rng),
            DenseLayer::glorot(d_out, d_hidden, last, rng),
        ],
    };
    (mlp, d_in, d_out)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn acceptance_1_gradient_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4752_4144);
    let mut instances = 0usize;
    let mut worst = 0.0f64;

    // Dense stacks: loss = MSE of a two-layer net on a random batch.
    for _ in 0..8 {
        let (mlp, d_in, d_out) = random_mlp(&mut rng);
        let x = random_matrix(d_in, 3, &mut rng);
        let target = random_matrix(d_out, 3, &mut rng);

        let acts = mlp.forward_batch_cached(&x);
        let dy = mse_grad(acts.last().unwrap(), &target);
        let (_, grads) = mlp.backward_batch(&acts, &dy);
        let analytic: Vec<f64> = grads.iter().flat_map(params_to_vec).collect();

        let err = gradcheck(
            &analytic,
            |p| {
                let mut m = mlp.clone();
                set_params(&mut m, p);
                mse(&m.forward_batch(&x), &target)
            },
            &params_to_vec(&mlp),
        );
        worst = worst.max(err);
        instances += 1;
    }

    // LSTM + readout through the full backward chain (truncation >= T).
    for _ in 0..8 {
        let d_in = rng.random_range(2..=4);
        let hidden = rng.random_range(3..=6);
        let d_out = rng.random_range(1..=3);
        let steps = rng.random_range(5..=8);
        let net = LstmNetwork {
            cell: LstmCell::glorot(d_in, hidden, &mut rng),
            head: DenseLayer::glorot(d_out, hidden, Activation::Linear, &mut rng),
        };
        let inputs = random_matrix(d_in, steps, &mut rng);
        let targets = random_matrix(d_out, steps, &mut rng);

        let (_, grad) = bptt(&net, &inputs, &targets, steps, None);
        let err = gradcheck(
            &params_to_vec(&grad),
            |p| {
                let mut m = net.clone();
                set_params(&mut m, p);
                bptt(&m, &inputs, &targets, steps, None).0
            },
            &params_to_vec(&net),
        );
        worst = worst.max(err);
        instances += 1;
    }

    // Truncated chains: FD-check both windows of a cut sequence (the
    // carried-in state is a constant, so each window is FD-differentiable),
    // then confirm the cut full-sequence gradient is their mean.
    for _ in 0..4 {
        let d_in = rng.random_range(2..=3);
        let hidden = rng.random_range(3..=4);
        let d_out = rng.random_range(1..=2);
        let net = LstmNetwork {
            cell: LstmCell::glorot(d_in, hidden, &mut rng),
            head: DenseLayer::glorot(d_out, hidden, Activation::Linear, &mut rng),
        };
        let inputs = random_matrix(d_in, 6, &mut rng);
        let targets = random_matrix(d_out, 6, &mut rng);
        let first = inputs.columns(0, 3).into_owned();
        let second = inputs.columns(3, 3).into_owned();
        let t_first = targets.columns(0, 3).into_owned();
        let t_second = targets.columns(3, 3).into_owned();

        // State carried into the second window, frozen at the checkpoint.
        let mut h = DVector::zeros(hidden);
        let mut c = DVector::zeros(hidden);
        for t in 0..3 {
            let x = DVector::from_column_slice(inputs.column(t).as_slice());
            let (h2, c2) = net.cell.step(&x, &h, &c);
            h = h2;
            c = c2;
        }

        let (l1, g1) = bptt(&net, &first, &t_first, 3, None);
        let (l2, g2) = bptt(&net, &second, &t_second, 3, Some((&h, &c)));
        for (window, analytic) in [(1, &g1), (2, &g2)] {
            let err = gradcheck(
                &params_to_vec(analytic),
                |p| {
                    let mut m = net.clone();
                    set_params(&mut m, p);
                    if window == 1 {
                        bptt(&m, &first, &t_first, 3, None).0
                    } else {
                        bptt(&m, &second, &t_second, 3, Some((&h, &c))).0
                    }
                },
                &params_to_vec(&net),
            );
            worst = worst.max(err);
            instances += 1;
        }

        // The full sequence cut at t = 3 must average the window gradients.
        let (lf, gf) = bptt(&net, &inputs, &targets, 3, None);
        assert!(
            (lf - 0.5 * (l1 + l2)).abs() <= 1e-12 * lf.abs().max(1.0),
            "cut-sequence loss does not decompose over windows"
        );
        let full = params_to_vec(&gf);
        let merged: Vec<f64> = params_to_vec(&g1)
            .iter()
            .zip(params_to_vec(&g2))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let decomp = max_rel_err(&full, &merged, 1e-12);
        assert!(
            decomp < 1e-10,
            "cut-sequence gradient does not decompose over windows: {decomp:.2e}"
        );
    }

    // Loss gradient on its own.
    for _ in 0..4 {
        let rows = rng.random_range(1..=4);
        let cols = rng.random_range(1..=5);
        let y = random_matrix(rows, cols, &mut rng);
        let target = random_matrix(rows, cols, &mut rng);
        let analytic = mse_grad(&y, &target).as_slice().to_vec();
        let err = gradcheck(
            &analytic,
            |p| {
                let m = DMatrix::from_column_slice(rows, cols, p);
                mse(&m, &target)
            },
            y.as_slice(),
        );
        worst = worst.max(err);
        instances += 1;
    }

    verdict(
        1,
        "gradient correctness",
        instances >= 20 && worst < 1e-5,
        format!("{instances} randomized instances, worst relative error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: integrator verification against independent references.
// ---------------------------------------------------------------------------

/// Hermite-cubic beam stiffness assembled from the textbook element matrix,
/// written out here so the static reference shares no assembly code with
/// the model under test.
fn local_beam_stiffness(ei: f64, l: f64, n_el: usize) -> DMatrix<f64> {
    let n = 2 * (n_el + 1);
    let mut k = DMatrix::zeros(n, n);
    let s = ei / (l * l * l);
    let ke = [
        [12.0 * s, 6.0 * l * s, -12.0 * s, 6.0 * l * s],
        [6.0 * l * s, 4.0 * l * l * s, -6.0 * l * s, 2.0 * l * l * s],
        [-12.0 * s, -6.0 * l * s, 12.0 * s, -6.0 * l * s],
        [6.0 * l * s, 2.0 * l * l * s, -6.0 * l * s, 4.0 * l * l * s],
    ];
    for e in 0..n_el {
        for i in 0..4 {
            for j in 0..4 {
                k[(2 * e + i, 2 * e + j)] += ke[i][j];
            }
        }
    }
    k
}

/// ln(cosh(x)) without overflow: |x| + ln(1 + exp(-2|x|)) - ln 2.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// One lumped spring as the energy oracle sees it.
struct OracleSpring {
    dof: usize,
    /// Saturation force of the concentrated spring (N).
    cap: f64,
    /// Origin stiffness of the concentrated spring (N/m).
    kz: f64,
}

impl OracleSpring {
    /// Stored energy: cap^2/kz * ln cosh(kz y / cap).
    fn energy(&self, y: f64) -> f64 {
        if self.cap == 0.0 {
            return 0.0;
        }
        self.cap * self.cap / self.kz * ln_cosh(self.kz * y / self.cap)
    }

    fn force(&self, y: f64) -> f64 {
        if self.cap == 0.0 {
            return 0.0;
        }
        self.cap * (self.kz * y / self.cap).tanh()
    }
}

/// Minimize Pi(u) = 1/2 u'Ku + sum_i E_i(u) - f'u by nonlinear conjugate
/// gradients with a bisected exact line search. Shares no code with the
/// Newton path it cross-checks.
fn minimize_total_potential(
    k: &DMatrix<f64>,
    springs: &[OracleSpring],
    f: &DVector<f64>,
) -> DVector<f64> {
    let grad = |u: &DVector<f64>| -> DVector<f64> {
        let mut g = k * u - f;
        for s in springs {
            g[s.dof] += s.force(u[s.dof]);
        }
        g
    };
    let energy = |u: &DVector<f64>| -> f64 {
        let mut e = 0.5 * u.dot(&(k * u)) - f.dot(u);
        for s in springs {
            e += s.energy(u[s.dof]);
        }
        e
    };

    let tol = 1e-10 * f.norm();
    let mut u = DVector::zeros(k.nrows());
    let mut g = grad(&u);
    let mut d = -&g;
    for _ in 0..20_000 {
        if g.norm() <= tol {
            break;
        }
        if d.dot(&g) >= 0.0 {
            d = -&g; // restart when the direction stops descending
        }
        // phi'(alpha) = g(u + alpha d) . d is increasing in alpha (convex
        // energy): expand to bracket the root, then bisect it down.
        let slope = |alpha: f64| grad(&(&u + &d * alpha)).dot(&d);
        let mut hi = 1.0;
        let mut grow = 0;
        while slope(hi) < 0.0 && grow < 200 {
            hi *= 4.0;
            grow += 1;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha = 0.5 * (lo + hi);
        let u_next = &u + &d * alpha;
        // Guard against a stalled search direction.
        if energy(&u_next) >= energy(&u) && g.norm() > tol {
            u = &u - &g * (alpha * 1e-3);
            g = grad(&u);
            d = -&g;
            continue;
        }
        u = u_next;
        let g_next = grad(&u);
        // Polak-Ribiere with automatic reset.
        let beta = (g_next.dot(&(&g_next - &g)) / g.dot(&g)).max(0.0);
        d = -&g_next + &d * beta;
        g = g_next;
    }
    u
}

struct TestSdof {
    m: DMatrix<f64>,
    c: DMatrix<f64>,
    k: f64,
}

impl DynamicSystem for TestSdof {
    fn ndof(&self) -> usize {
        1
    }
    fn mass(&self) -> &DMatrix<f64> {
        &self.m
    }
    fn damping(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn restoring(&self, u: &DVector<f64>) -> DVector<f64> {
        u * self.k
    }
    fn tangent(&self, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.k)
    }
}

#[test]
fn acceptance_2_integrator_verification() {
    // (a) Nonlinear static head load on a 4-element pile, cross-checked
    // against an independent minimizer of the total potential energy.
    let cfg = ModelConfig {
        n_elements: 4,
        ..ModelConfig::default()
    };
    let model = assemble(&cfg).unwrap();
    let plane = &model.plane_x;

    // A mudline shear exerts no moment about the mudline, so the springs
    // must balance it as a couple; that caps the supportable load well
    // below the plain sum of spring capacities. 2.5e5 N sits inside that
    // limit while still driving the shallow springs off the linear branch.
    let mut f = DVector::zeros(plane.ndof());
    f[0] = 2.5e5;

    let u_newton = static_solve(plane, &f, 1e-9, 200).unwrap();

    // The case only verifies the nonlinear path if the springs saturate
    // appreciably: the deepest-loaded spring must leave the linear range.
    let nonlinearity = plane
        .springs
        .iter()
        .enumerate()
        .map(|(node, s)| {
            let cap = plane.soil.loading_factor
                * plane.soil.ultimate_resistance(s.depth).unwrap();
            if cap == 0.0 {
                0.0
            } else {
                (plane.soil.initial_modulus * s.depth * u_newton[2 * node] / cap).abs()
            }
        })
        .fold(0.0f64, f64::max);
    assert!(
        nonlinearity > 0.3,
        "springs stayed nearly linear (max tanh argument {nonlinearity:.3})"
    );

    let ei = cfg.section.youngs_modulus * cfg.section.second_moment();
    let k_local = local_beam_stiffness(ei, cfg.element_length, cfg.n_elements);
    let springs: Vec<OracleSpring> = plane
        .springs
        .iter()
        .enumerate()
        .map(|(node, s)| OracleSpring {
            dof: 2 * node,
            cap: s.tributary_length
                * plane.soil.loading_factor
                * plane.soil.ultimate_resistance(s.depth).unwrap(),
            kz: s.tributary_length * plane.soil.initial_modulus * s.depth,
        })
        .collect();
    let u_energy = minimize_total_potential(&k_local, &springs, &f);

    let static_rel = (&u_energy - &u_newton).norm() / u_newton.norm();
    let head_rel = (u_energy[0] - u_newton[0]).abs() / u_newton[0].abs();
    // Tolerance 0.1% displacement.
    let static_ok = static_rel < 1e-3 && head_rel < 1e-3;

    // (b) Free SDOF vibration: m = 1 kg, k = 4 pi^2 N/m gives T = 1 s
    // exactly; march 10 periods at dt = T/100 and read the period off the
    // downward zero crossings.
    let sys = TestSdof {
        m: DMatrix::from_element(1, 1, 1.0),
        c: DMatrix::from_element(1, 1, 0.0),
        k: 4.0 * std::f64::consts::PI.powi(2),
    };
    let icfg = IntegratorConfig {
        dt: 0.01,
        ..IntegratorConfig::default()
    };
    let stepper = Stepper::new(&sys, icfg).unwrap();
    let mut state = TrajectoryState {
        t: 0.0,
        u: DVector::from_element(1, 1.0),
        v: DVector::zeros(1),
        a: DVector::from_element(1, -sys.k),
    };
    let zero1 = DVector::zeros(1);
    let mut crossings = Vec::new();
    let mut prev = state.u[0];
    for i in 1..=1000 {
        state = stepper.step(&state, &zero1).unwrap().0;
        let cur = state.u[0];
        if prev > 0.0 && cur <= 0.0 {
            let t_prev = (i - 1) as f64 * 0.01;
            crossings.push(t_prev + 0.01 * prev / (prev - cur));
        }
        prev = cur;
    }
    let period = (crossings.last().unwrap() - crossings[0]) / (crossings.len() as f64 - 1.0);
    let period_err = (period - 1.0).abs();
    // Tolerance 0.5% of the 1 s analytical period.
    let period_ok = crossings.len() >= 9 && period_err < 5e-3;

    // (c) Undamped, linearized 500 s free vibration must conserve the total
    // mechanical energy. Released from the static deflection of a head load.
    let cfg_lin = ModelConfig {
        damping_ratio: 0.0,
        ..ModelConfig::default()
    };
    let mut lin_model = assemble(&cfg_lin).unwrap();
    lin_model.plane_x.spring_law = SpringLaw::LinearizedAtOrigin;
    let plane_lin = &lin_model.plane_x;
    let k_lin = plane_lin.linearized_stiffness();

    let mut f_lin = DVector::zeros(plane_lin.ndof());
    f_lin[0] = 1.0e6;
    let u0 = k_lin.clone().lu().solve(&f_lin).unwrap();
    let a0 = plane_lin
        .mass()
        .clone()
        .cholesky()
        .unwrap()
        .solve(&(-(&k_lin * &u0)));
    let mut st = TrajectoryState {
        t: 0.0,
        u: u0,
        v: DVector::zeros(plane_lin.ndof()),
        a: a0,
    };
    let stepper_lin = Stepper::new(plane_lin, IntegratorConfig::default()).unwrap();
    let zero = DVector::zeros(plane_lin.ndof());
    let energy = |s: &TrajectoryState| {
        0.5 * (s.v.dot(&(plane_lin.mass() * &s.v)) + s.u.dot(&(&k_lin * &s.u)))
    };
    let e0 = energy(&st);
    let mut drift = 0.0f64;
    for _ in 0..25_000 {
        st = stepper_lin.step(&st, &zero).unwrap().0;
        drift = drift.max(((energy(&st) - e0) / e0).abs());
    }
    // Tolerance 0.1% of the initial energy over the full 500 s.
    let energy_ok = drift < 1e-3;

    verdict(
        2,
        "integrator verification",
        static_ok && period_ok && energy_ok,
        format!(
            "static vs energy minimizer {:.2e} rel, period error {:.2e}, \
             500 s energy drift {:.2e}",
            static_rel, period_err, drift
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: soil reaction properties on a depth x deflection grid.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_soil_reaction_properties() {
    let soil = SoilProfile::reference();
    let depths = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 15.0, 22.0, 30.0];
    // Deflections in units of the saturation scale cap/(k z); past ~5 the
    // curve is flat to machine precision and has its own saturation check.
    let scaled = [1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 3.5, 5.0];

    let mut points = 0usize;
    let mut worst_fd = 0.0f64;
    let mut worst_slope = 0.0f64;
    for &z in &depths {
        let cap = soil.loading_factor * soil.ultimate_resistance(z).unwrap();
        let kz = soil.initial_modulus * z;
        assert!(cap > 0.0 && kz > 0.0);
        let scale = cap / kz;

        // Initial slope: dp/dy at the origin is k z. Tolerance 0.1%.
        let slope_err = (soil.reaction_tangent(z, 0.0) - kz).abs() / kz;
        worst_slope = worst_slope.max(slope_err);

        for &s in &scaled {
            let y = s * scale;

            // Oddness is exact: tanh is sign-symmetric in IEEE arithmetic.
            assert_eq!(
                soil.reaction(z, -y),
                -soil.reaction(z, y),
                "reaction not odd at z = {z}, y = {y}"
            );

            // Saturation bound |p| <= A_f p_u.
            assert!(
                soil.reaction(z, y).abs() <= cap * (1.0 + 1e-12),
                "reaction exceeds capacity at z = {z}, y = {y}"
            );

            // Tangent against a central difference. Tolerance 1e-5 relative.
            let h = 1e-5 * scale;
            let fd = (soil.reaction(z, y + h) - soil.reaction(z, y - h)) / (2.0 * h);
            let tangent = soil.reaction_tangent(z, y);
            let err = (fd - tangent).abs() / tangent.abs();
            worst_fd = worst_fd.max(err);
            points += 1;
        }

        // Deep saturation reaches the capacity itself.
        let deep = soil.reaction(z, 1e3 * scale);
        assert!(
            (deep - cap).abs() <= 1e-9 * cap,
            "saturated reaction misses the capacity at z = {z}"
        );
    }

    // The mudline spring stays inert for any deflection.
    for y in [-1.0, -1e-3, 1e-3, 1.0] {
        assert_eq!(soil.reaction(0.0, y), 0.0);
        assert_eq!(soil.reaction_tangent(0.0, y), 0.0);
    }

    verdict(
        3,
        "soil reaction properties",
        worst_fd < 1e-5 && worst_slope < 1e-3,
        format!(
            "{points} grid points, worst tangent-vs-FD {worst_fd:.2e}, \
             worst origin slope error {worst_slope:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criteria 4-7 share one pipeline run at the default configuration.
// ---------------------------------------------------------------------------

struct PipelineFixture {
    /// Accuracy report of the stored prediction (no timing block).
    report: EvalReport,
    /// Fresh walltime comparison from the bench stage.
    timing: Timing,
    /// Snapshot reconstruction NMSE (%) on the held-out steady window.
    ae_recon_nmse: f64,
    ae_train_seconds: f64,
    ae_epochs: usize,
}

static FIXTURE: OnceLock<PipelineFixture> = OnceLock::new();

/// Build the full-size pipeline once: generate, train both stages, predict,
/// evaluate and bench, all at the default configuration.
fn fixture() -> &'static PipelineFixture {
    FIXTURE.get_or_init(|| {
        // Statics never drop, so a TempDir held here would strand a fresh
        // ~0.5 GB copy in /tmp on every run.  A fixed path under the cargo
        // scratch dir keeps disk use bounded and `cargo clean` removes it.
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_pipeline");
        std::fs::remove_dir_all(&dir).ok();
        std::fs::create_dir_all(&dir).expect("scratch dir");
        let mut cfg = RunConfig::parse("").expect("default config");
        cfg.output_dir = dir.clone();

        cmd_generate(&cfg, 1).expect("generate");

        let t0 = Instant::now();
        let ae = cmd_train_ae(&cfg).expect("train-ae");
        let ae_train_seconds = t0.elapsed().as_secs_f64();
        cmd_train_rom(&cfg).expect("train-rom");

        cmd_predict(&cfg).expect("predict");
        // The default 5% gate applies here: a threshold trip fails loudly.
        cmd_evaluate(&cfg).expect("evaluate");
        let report = read_report(&report_path(&dir)).expect("report");
        let bench = cmd_bench(&cfg).expect("bench");

        // Reconstruction error of the compressor alone on the held-out
        // record: decode(encode(truth)) against truth over the steady window.
        let ae_model = AutoencoderParams::load(&ae_weights_path(&dir)).unwrap();
        let truth = read_dataset(&dataset_path(&dir, 11)).unwrap().response;
        let recon_channels = ae_model.decode_batch(&ae_model.encode_batch(&truth.data.transpose()));
        let recon = SimulationResult {
            dt: truth.dt,
            data: recon_channels.transpose(),
            wall_seconds: 0.0,
            newton_retries: 0,
        };
        let per_channel =
            nmse_per_channel(&truth, &recon, cfg.evaluate.steady_start, f64::INFINITY).unwrap();

        PipelineFixture {
            report,
            timing: bench.timing,
            ae_recon_nmse: aggregate_nmse(&per_channel),
            ae_train_seconds,
            ae_epochs: ae.epochs_run,
        }
    })
}

#[test]
fn acceptance_4_autoencoder_fidelity() {
    let fx = fixture();
    // Tolerance: < 2% reconstruction NMSE on held-out steady snapshots,
    // trained single-threaded within 30 minutes.
    let pass = fx.ae_recon_nmse < 2.0 && fx.ae_train_seconds <= 1800.0;
    verdict(
        4,
        "autoencoder fidelity",
        pass,
        format!(
            "steady reconstruction NMSE {:.4}%, trained in {:.0} s / {} epochs",
            fx.ae_recon_nmse, fx.ae_train_seconds, fx.ae_epochs
        ),
    );
}

#[test]
fn acceptance_5_rom_fidelity() {
    let fx = fixture();
    let rom = fx.report.aggregate_nmse;
    // Tolerance: < 5% free-running steady NMSE on the held-out record
    // (first 100 s ignored); the compressor floor may only be undercut by
    // the 0.1 percentage-point measurement slack.
    let bound_ok = rom >= fx.ae_recon_nmse - 0.1;
    let pass = rom < 5.0 && bound_ok;
    let stretch = if rom <= 2.0 {
        "stretch <= 2% met"
    } else {
        "stretch <= 2% missed"
    };
    verdict(
        5,
        "rom fidelity",
        pass,
        format!(
            "steady NMSE {rom:.4}% vs compressor floor {:.4}% ({stretch})",
            fx.ae_recon_nmse
        ),
    );
}

#[test]
fn acceptance_6_transient_degradation() {
    let fx = fixture();
    // The free-running surrogate starts from a cold latent state, so the
    // 0-50 s window must be strictly worse than the steady window.
    let pass = fx.report.transient_aggregate_nmse > fx.report.aggregate_nmse;
    verdict(
        6,
        "transient degradation",
        pass,
        format!(
            "transient NMSE {:.4}% vs steady {:.4}%",
            fx.report.transient_aggregate_nmse, fx.report.aggregate_nmse
        ),
    );
}

#[test]
fn acceptance_7_speedup() {
    let fx = fixture();
    // Tolerance: > 10x on the same 500 s record; the ratio is the target,
    // not the absolute seconds.
    let pass = fx.timing.speedup > 10.0;
    verdict(
        7,
        "surrogate speedup",
        pass,
        format!(
            "integrator {:.2} s vs surrogate {:.3} s: {:.1}x",
            fx.timing.fom_seconds, fx.timing.rom_seconds, fx.timing.speedup
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: the whole pipeline is byte-deterministic in its seed.
// ---------------------------------------------------------------------------

/// Reduced setup: determinism cares about control flow, not model quality,
/// so a short record and small networks keep the double run cheap.
fn reduced_config(dir: &Path) -> RunConfig {
    let text = "\
[run]
master_seed = 7

[structure]
n_elements = 6

[forcing]
duration = 60
n_components = 8

[autoencoder]
latent_dim = 2
epochs = 15
patience = 10

[dynamics]
hidden_size = 12
epochs = 10
truncation = 30
batch_size = 8
batches_per_epoch = 8
patience = 15

[evaluate]
steady_start = 20
transient_end = 10
spectrum_segment = 256
nmse_threshold = 1e9
";
    let mut cfg = RunConfig::parse(text).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

/// Run every stage into `dir` and fingerprint each artifact.
fn pipeline_fingerprint(dir: &Path) -> Vec<(String, String)> {
    let cfg = reduced_config(dir);
    cmd_generate(&cfg, 1).unwrap();
    cmd_train(&cfg).unwrap();
    cmd_predict(&cfg).unwrap();
    cmd_evaluate(&cfg).unwrap();

    let mut files: Vec<PathBuf> = (0..12).map(|id| dataset_path(dir, id)).collect();
    files.push(manifest_path(dir));
    files.push(ae_weights_path(dir));
    files.push(rom_weights_path(dir));
    files.push(ae_log_path(dir));
    files.push(rom_log_path(dir));
    files.push(prediction_path(dir, 11));
    files.push(report_path(dir));
    files
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap().display().to_string();
            let hash = sha256_hex(&p).unwrap_or_else(|e| panic!("missing {rel}: {e}"));
            (rel, hash)
        })
        .collect()
}

#[test]
fn acceptance_8_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fp_a = pipeline_fingerprint(a.path());
    let fp_b = pipeline_fingerprint(b.path());

    assert_eq!(fp_a.len(), fp_b.len());
    let mut mismatched = Vec::new();
    for ((name_a, hash_a), (name_b, hash_b)) in fp_a.iter().zip(&fp_b) {
        assert_eq!(name_a, name_b);
        if hash_a != hash_b {
            mismatched.push(name_a.clone());
        }
    }
    verdict(
        8,
        "pipeline determinism",
        mismatched.is_empty(),
        format!(
            "{} artifacts byte-identical across independent reruns{}",
            fp_a.len(),
            if mismatched.is_empty() {
                String::new()
            } else {
                format!("; diverged: {mismatched:?}")
            }
        ),
    );
}
