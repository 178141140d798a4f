//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! lines always show up in `cargo test` output.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use telesim::cli::{parse_config, run, CsvReport, Experiment};
use telesim::elementary::EsArena;
use telesim::engine::EngineKind;
use telesim::experiments::{
    compute_rho, rotation_scan, run_fig3, run_swap, run_teleport_ideal, scan_dip, PhysicsConfig,
    Runner, SwapStats,
};
use telesim::optics::bs_pair;
use telesim::qcore::{bell_decompose_12, bell_state, BellKind, PhotonId, Qubit, Spin, C64};

const QM: EngineKind = EngineKind::StandardQm;
const ES: EngineKind = EngineKind::ElementaryState;

type Outcome = Result<String, String>;

/// Id, name, check and runtime limit in seconds.
type Criterion = (u8, &'static str, fn() -> Outcome, Option<u64>);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_4sigma(a: f64, b: f64, sigma: f64) -> bool {
    (a - b).abs() <= 4.0 * sigma + 1e-12
}

fn busy() -> PhysicsConfig {
    PhysicsConfig {
        p_pair: 0.5,
        ..PhysicsConfig::ideal()
    }
}

fn random_qubit(rng: &mut ChaCha8Rng) -> Qubit {
    let t = rng.random::<f64>() * std::f64::consts::PI;
    let (s, c) = (t / 2.0).sin_cos();
    let a = C64::from_polar(c, rng.random::<f64>() * std::f64::consts::TAU);
    let b = C64::from_polar(s, rng.random::<f64>() * std::f64::consts::TAU);
    Qubit::new(a, b).unwrap()
}

/// Residual of photon 3 in each Bell branch of `(a|+> + b|->)_1 Psi-_23`,
/// including the factor 1/2.
fn residual_oracle(kind: BellKind, a: C64, b: C64) -> [C64; 2] {
    let h = 0.5;
    match kind {
        BellKind::PsiMinus => [-a * h, -b * h],
        BellKind::PsiPlus => [-a * h, b * h],
        BellKind::PhiMinus => [b * h, a * h],
        BellKind::PhiPlus => [-b * h, a * h],
    }
}

fn c1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let pair = bell_state(BellKind::PsiMinus, PhotonId(2), PhotonId(3));
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let q = random_qubit(&mut rng);
        for br in bell_decompose_12(&q, &pair).map_err(|e| e.to_string())? {
            ensure((br.coefficient.norm_sqr() - 0.25).abs() < 1e-12, || {
                format!("{:?} weight {}", br.kind, br.coefficient.norm_sqr())
            })?;
            let want = residual_oracle(br.kind, q.alpha(), q.beta());
            let got = [
                br.coefficient * br.residual.alpha(),
                br.coefficient * br.residual.beta(),
            ];
            let err = (got[0] - want[0]).norm().max((got[1] - want[1]).norm());
            worst = worst.max(err);
        }
    }
    ensure(worst < 1e-12, || format!("residual error {worst:e}"))?;

    let q = random_qubit(&mut rng);
    let n = 100_000u64;
    let st = run_teleport_ideal(q.alpha(), q.beta(), n, QM, &Runner::new(102))
        .map_err(|e| e.to_string())?;
    let sigma = (0.25 * 0.75 / n as f64).sqrt();
    for k in BellKind::ALL {
        ensure(within_4sigma(st.frequency(k), 0.25, sigma), || {
            format!("{k:?} frequency {}", st.frequency(k))
        })?;
    }
    Ok(format!(
        "weights 1/4, residual error {worst:.1e}, MC frequencies within 4 sigma at N = 1e5"
    ))
}

fn c2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let (p1, p2) = (PhotonId(1), PhotonId(2));
    let n = 10_000;
    for kind in BellKind::ALL {
        let want_split = kind == BellKind::PsiMinus;
        let s = bell_state(kind, p1, p2);
        let mut qm_ok = 0;
        let mut es_ok = 0;
        for _ in 0..n {
            let o = bs_pair(&s, true, 1.0, &mut rng).map_err(|e| e.to_string())?;
            qm_ok += usize::from(o.same_side != want_split);
            let mut arena = EsArena::new();
            let (a, b) = arena.prepare_bell_pair(kind);
            let (o, _) = arena
                .route_pair((p1, a), (p2, b), true, 1.0, 0.0, &mut rng)
                .map_err(|e| e.to_string())?;
            es_ok += usize::from(o.same_side != want_split);
        }
        ensure(qm_ok == n && es_ok == n, || {
            format!("{kind:?}: quantum {qm_ok}/{n}, elementary {es_ok}/{n}")
        })?;
    }
    Ok("psi- splits, psi+/phi-/phi+ bunch, 1e4/1e4 each, both engines".into())
}

fn c3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let q = random_qubit(&mut rng);
        let st = run_teleport_ideal(q.alpha(), q.beta(), 500, QM, &Runner::new(300 + i))
            .map_err(|e| e.to_string())?;
        worst = worst
            .max((1.0 - st.min_fidelity).abs())
            .max((1.0 - st.post_correction_fidelity()).abs());
    }
    ensure(worst <= 1e-12, || format!("fidelity off by {worst:e}"))?;
    Ok(format!("100 random inputs, worst |1 - F| = {worst:.1e}"))
}

fn c4() -> Outcome {
    let cfg = busy();
    let st =
        run_fig3(90.0, 0.0, QM, &cfg, 100_000, &Runner::new(401)).map_err(|e| e.to_string())?;
    ensure(st.n_gates >= 1000, || format!("only {} gates", st.n_gates))?;
    ensure(st.n_minus == 0, || {
        format!("n_minus = {} at zero delay", st.n_minus)
    })?;
    // v = 0: mirror displaced far outside the coherence time.
    let far = 10.0 * cfg.coherence_time;
    let off =
        run_fig3(90.0, far, QM, &cfg, 100_000, &Runner::new(402)).map_err(|e| e.to_string())?;
    ensure(off.visibility < 1e-20, || {
        format!("visibility {}", off.visibility)
    })?;
    let (m, p) = (off.n_minus as f64, off.n_plus as f64);
    ensure(m > 0.0 && p > 0.0, || "empty arm at v = 0".into())?;
    let ratio = m / p;
    let sigma = ratio * (1.0 / m + 1.0 / p).sqrt();
    ensure(within_4sigma(ratio, 1.0, sigma), || {
        format!("v = 0 ratio {ratio} +- {sigma}")
    })?;
    Ok(format!(
        "n_minus = 0 over {} gates; v = 0 ratio {ratio:.3} +- {sigma:.3}",
        st.n_gates
    ))
}

fn c5() -> Outcome {
    let cfg = PhysicsConfig::default();
    let tau = cfg.coherence_time;
    let delays: Vec<f64> = (-5..=5).map(|k| k as f64 * tau).collect();
    let pts =
        scan_dip(90.0, &delays, QM, &cfg, 100_000, &Runner::new(501)).map_err(|e| e.to_string())?;
    let rate = |i: usize| pts[i].n_minus as f64 / pts[i].pulses.total as f64;
    let centre = rate(5);
    let mut worst = 0.0f64;
    for edge in [0, 10] {
        ensure(rate(edge) > 0.0, || {
            format!("no D-3 coincidences at delay {}", delays[edge])
        })?;
        worst = worst.max(centre / rate(edge));
    }
    ensure(worst <= 0.1, || format!("depth ratio {worst}"))?;
    Ok(format!(
        "rate(0)/rate(5 tau) = {worst:.3}, 11 points x 1e5 pulses"
    ))
}

fn rho_for(engine: EngineKind, epsilon: f64, seed: u64) -> Result<(f64, f64, u64), String> {
    let cfg = PhysicsConfig { epsilon, ..busy() };
    let delta = cfg.coherence_time;
    let runner = Runner::new(seed);
    let n = 400_000;
    let s45 =
        run_fig3(45.0, delta, engine, &cfg, n, &runner.child(0)).map_err(|e| e.to_string())?;
    let s90 =
        run_fig3(90.0, delta, engine, &cfg, n, &runner.child(1)).map_err(|e| e.to_string())?;
    let r = compute_rho(&s45, &s90).map_err(|e| e.to_string())?;
    let (rho, se) = r.rho.zip(r.standard_error).ok_or("rho undefined")?;
    Ok((rho, se, s45.n_gates.min(s90.n_gates)))
}

fn c6() -> Outcome {
    let (q, qse, qn) = rho_for(QM, 0.0, 601)?;
    ensure(qn >= 1000, || format!("quantum arm has {qn} gates"))?;
    ensure(within_4sigma(q, 1.0, qse), || {
        format!("quantum rho {q} +- {qse}")
    })?;
    let (e, ese, en) = rho_for(ES, 0.1, 602)?;
    ensure(en >= 1000, || format!("elementary arm has {en} gates"))?;
    ensure(e - 1.0 > 4.0 * ese, || {
        format!("elementary rho {e} +- {ese}")
    })?;
    Ok(format!(
        "quantum rho {q:.3} +- {qse:.3}; elementary (eps 0.1) rho {e:.3} +- {ese:.3}"
    ))
}

fn cell_freq(s: &SwapStats, a: Spin, b: Spin) -> (f64, f64) {
    let n = s.fourfold() as f64;
    let p = s.cell(a, b) as f64 / n;
    (p, p * (1.0 - p) / n)
}

const CELLS: [(Spin, Spin); 4] = [
    (Spin::Plus, Spin::Plus),
    (Spin::Plus, Spin::Minus),
    (Spin::Minus, Spin::Plus),
    (Spin::Minus, Spin::Minus),
];

fn c7() -> Outcome {
    let cfg = busy();
    let n = 100_000;
    let mut seed = 700;
    let mut next = || {
        seed += 1;
        Runner::new(seed)
    };
    for (t0, t3, zero) in [
        (
            0.0,
            0.0,
            [(Spin::Plus, Spin::Plus), (Spin::Minus, Spin::Minus)],
        ),
        (
            30.0,
            30.0,
            [(Spin::Plus, Spin::Plus), (Spin::Minus, Spin::Minus)],
        ),
        (
            0.0,
            90.0,
            [(Spin::Plus, Spin::Minus), (Spin::Minus, Spin::Plus)],
        ),
        (
            30.0,
            120.0,
            [(Spin::Plus, Spin::Minus), (Spin::Minus, Spin::Plus)],
        ),
    ] {
        let s = run_swap(t0, t3, QM, &cfg, n, &next()).map_err(|e| e.to_string())?;
        ensure(s.n_gates >= 1000, || {
            format!("({t0}, {t3}): {} gates", s.n_gates)
        })?;
        for (a, b) in zero {
            ensure(s.cell(a, b) == 0, || {
                format!("({t0}, {t3}) cell {a:?}{b:?} = {}", s.cell(a, b))
            })?;
        }
        for (a, b) in CELLS.iter().filter(|c| !zero.contains(c)) {
            ensure(s.cell(*a, *b) > 0, || {
                format!("({t0}, {t3}) cell {a:?}{b:?} empty")
            })?;
        }
    }
    let angles: Vec<f64> = (0..=6).map(|k| k as f64 * 15.0).chain([37.0]).collect();
    for (t0, t3) in [(0.0, 0.0), (0.0, 30.0)] {
        let rows =
            rotation_scan(&angles, t0, t3, QM, &cfg, n, &next()).map_err(|e| e.to_string())?;
        for r in &rows[1..] {
            for (a, b) in CELLS {
                let (p0, v0) = cell_freq(&rows[0].stats, a, b);
                let (p, v) = cell_freq(&r.stats, a, b);
                ensure(within_4sigma(p, p0, (v0 + v).sqrt()), || {
                    format!(
                        "offset {} rotation {}: cell {a:?}{b:?} {p} vs {p0}",
                        t3 - t0,
                        r.angle
                    )
                })?;
            }
        }
    }
    Ok(
        "aligned and orthogonal zero cells hold over >= 1e3 gates; joint rotation preserves cells"
            .into(),
    )
}

fn c8() -> Outcome {
    let angles: Vec<f64> = (0..=6).map(|k| k as f64 * 15.0).collect();
    let es_cfg = PhysicsConfig {
        epsilon: 0.1,
        ..busy()
    };
    let es = rotation_scan(&angles, 0.0, 0.0, ES, &es_cfg, 200_000, &Runner::new(801))
        .map_err(|e| e.to_string())?;
    let at = |rows: &[telesim::experiments::RotationRow], a: f64| {
        rows.iter().find(|r| r.angle == a).unwrap().stats
    };
    let (e0, e45) = (at(&es, 0.0), at(&es, 45.0));
    let sigma = (e0.contrast_se().powi(2) + e45.contrast_se().powi(2)).sqrt();
    let drop = e0.contrast() - e45.contrast();
    ensure(drop > 4.0 * sigma, || {
        format!(
            "elementary contrast 0: {}, 45: {}",
            e0.contrast(),
            e45.contrast()
        )
    })?;

    let qm = rotation_scan(&angles, 0.0, 0.0, QM, &busy(), 200_000, &Runner::new(802))
        .map_err(|e| e.to_string())?;
    let q0 = &qm[0].stats;
    for r in &qm {
        let sigma = (q0.contrast_se().powi(2) + r.stats.contrast_se().powi(2)).sqrt();
        ensure(
            within_4sigma(r.stats.contrast(), q0.contrast(), sigma),
            || {
                format!(
                    "quantum contrast {} at {} vs {}",
                    r.stats.contrast(),
                    r.angle,
                    q0.contrast()
                )
            },
        )?;
    }
    Ok(format!(
        "elementary contrast {:.3} at 0 vs {:.3} at 45 (drop {:.1} sigma); quantum flat",
        e0.contrast(),
        e45.contrast(),
        drop / sigma
    ))
}

fn report(
    experiment: Experiment,
    engine: &str,
    extra: &[(&str, String)],
) -> Result<CsvReport, String> {
    let mut kv: Vec<(String, String)> = vec![
        ("engine".into(), engine.into()),
        ("seed".into(), "901".into()),
        ("n".into(), "100000".into()),
        ("epsilon".into(), "0".into()),
    ];
    kv.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    let cfg = parse_config(experiment, None, &kv).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())
}

/// Compares one statistic between engines with a per-column error model.
fn compare_column(name: &str, a: &[String], b: &[String], header: &[String]) -> Result<(), String> {
    let col = |row: &[String], n: &str| -> Option<f64> {
        header
            .iter()
            .position(|h| h == n)
            .and_then(|i| row[i].parse().ok())
    };
    let i = header.iter().position(|h| h == name).unwrap();
    let (sa, sb) = (&a[i], &b[i]);
    let (Ok(x), Ok(y)) = (sa.parse::<f64>(), sb.parse::<f64>()) else {
        return ensure(sa == sb, || format!("{name}: {sa} vs {sb}"));
    };
    if name.ends_with("_se") {
        // Error bars of other columns, not statistics in their own right.
        return Ok(());
    }
    let trials = col(a, "pulses")
        .or_else(|| col(a, "n_trials"))
        .unwrap_or(f64::NAN);
    let sigma = if let Some(arm) = name.strip_suffix("_rate") {
        // Pooled two-proportion test; the per-run error bar vanishes at 0 counts.
        let k = |r: &[String]| col(r, &format!("n_{arm}")).unwrap();
        let g = |r: &[String]| col(r, "n_gates").unwrap();
        let p = (k(a) + k(b)) / (g(a) + g(b));
        (p * (1.0 - p) * (1.0 / g(a) + 1.0 / g(b))).sqrt()
    } else if let (Some(ea), Some(eb)) =
        (col(a, &format!("{name}_se")), col(b, &format!("{name}_se")))
    {
        (ea * ea + eb * eb).sqrt()
    } else if name.starts_with("freq_") {
        (x * (1.0 - x) / trials + y * (1.0 - y) / trials).sqrt()
    } else if name == "scale_90" {
        let t = |r: &[String], s: &str| col(r, &format!("n_gates_{s}")).unwrap();
        let rel = |r: &[String]| (1.0 / t(r, "45") + 1.0 / t(r, "90")).sqrt();
        (x * x * rel(a).powi(2) + y * y * rel(b).powi(2)).sqrt()
    } else if name.starts_with("n_")
        || name.starts_with("count_")
        || name.ends_with("_cell")
        || ["accepted", "rejected", "no_emission"].contains(&name)
    {
        let n = if trials.is_nan() {
            f64::INFINITY
        } else {
            trials
        };
        (x * (1.0 - x / n) + y * (1.0 - y / n)).sqrt()
    } else {
        // Parameters and exact quantities.
        0.0
    };
    ensure(within_4sigma(x, y, sigma), || {
        format!("{name}: {x} vs {y} (sigma {sigma})")
    })
}

fn c9() -> Outcome {
    let busy = [("p_pair", "0.5".to_string()), ("jitter", "0".to_string())];
    let (s, c) = 30f64.to_radians().sin_cos();
    let runs: Vec<(Experiment, Vec<(&str, String)>)> = vec![
        (
            Experiment::Teleport,
            vec![("alpha", format!("{c:.17}")), ("beta", format!("{s:.17}"))],
        ),
        (
            Experiment::Fig3,
            vec![
                ("coder_angle", "45".into()),
                ("mirror_delay", "0.005".into()),
            ],
        ),
        (Experiment::Fig3, busy.to_vec()),
        (Experiment::Dip, busy.to_vec()),
        (Experiment::Dip, vec![("coder_angle", "45".into())]),
        (Experiment::Rho, busy.to_vec()),
        (
            Experiment::Swap,
            [
                busy.to_vec(),
                vec![("theta0", "10".into()), ("theta3", "55".into())],
            ]
            .concat(),
        ),
        (Experiment::Swap, vec![]),
        (Experiment::RotationScan, busy.to_vec()),
        (
            Experiment::RotationScan,
            [busy.to_vec(), vec![("theta3", "90".into())]].concat(),
        ),
    ];
    let mut checked = 0;
    for (exp, extra) in runs {
        let qm = report(exp, "qm", &extra)?;
        let es = report(exp, "es", &extra)?;
        ensure(
            qm.header == es.header && qm.rows.len() == es.rows.len(),
            || format!("{exp:?}: shape differs"),
        )?;
        let stats_end = qm.column("experiment").unwrap();
        for (ra, rb) in qm.rows.iter().zip(&es.rows) {
            for name in &qm.header[..stats_end] {
                compare_column(name, ra, rb, &qm.header).map_err(|e| format!("{exp:?}: {e}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} statistics agree within 4 sigma at N = 1e5"
    ))
}

fn c10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_telesim");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for exp in ["teleport", "fig3", "dip", "rho", "swap", "rotation-scan"] {
        for engine in ["qm", "es"] {
            let mut outputs = Vec::new();
            for workers in ["1", "1", "2", "5"] {
                let path = dir
                    .path()
                    .join(format!("{exp}-{engine}-{workers}-{}.csv", outputs.len()));
                let status = Command::new(bin)
                    .args([
                        exp,
                        "--seed",
                        "1234",
                        "--n",
                        "20000",
                        "--engine",
                        engine,
                        "--workers",
                        workers,
                    ])
                    .args(["--set", "p_pair=0.3", "--set", "epsilon=0.05", "--out"])
                    .arg(&path)
                    .status()
                    .map_err(|e| e.to_string())?;
                ensure(status.success(), || {
                    format!("{exp} {engine} exited with {status}")
                })?;
                outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
            }
            ensure(
                outputs.iter().all(|o| o == &outputs[0] && !o.is_empty()),
                || format!("{exp} {engine}: outputs differ"),
            )?;
            compared += outputs.len();
        }
    }
    Ok(format!(
        "{compared} CLI runs over 1, 2 and 5 workers are byte-identical"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "bell decomposition", c1, Some(5)),
        (2, "beam-splitter table", c2, Some(2)),
        (3, "teleportation fidelity", c3, Some(5)),
        (4, "zero coincidences at 90 degrees", c4, None),
        (5, "dip depth", c5, Some(30)),
        (6, "rho discriminator", c6, None),
        (7, "swap anticorrelation", c7, None),
        (8, "rotation asymmetry", c8, None),
        (9, "engine equivalence", c9, None),
        (10, "determinism", c10, None),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let mut result = check();
        let took = start.elapsed();
        if let (Ok(_), Some(secs)) = (&result, limit) {
            if took > Duration::from_secs(secs) {
                result = Err(format!("took {:.2}s, limit {secs}s", took.as_secs_f64()));
            }
        }
        match result {
            Ok(msg) => println!(
                "criterion {id:>2} PASS {name}: {msg} [{:.2}s]",
                took.as_secs_f64()
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "criterion {id:>2} FAIL {name}: {msg} [{:.2}s]",
                    took.as_secs_f64()
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
