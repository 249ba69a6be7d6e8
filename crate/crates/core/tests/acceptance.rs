//! Acceptance run: one PASS/FAIL line per criterion. Built with
//! `harness = false` so the lines are always printed.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use sliprelax::cli::main_with_args;
use sliprelax::energy::{ElasticMode, EnergyParams};
use sliprelax::fields::{curl_norm, Boundary, CurlMode, Grid3, PatchFrame, ScalarField3, VectorField3};
use sliprelax::lamination::{AnalyticSlip, ConvergenceTable, Displacement, LaminateStudy, Profile, Quadrature};
use sliprelax::linalg;
use sliprelax::slipsys::{check_rsc, check_ssc, RelaxedState, SlipPatch, SlipSystem};
use sliprelax::smoothing::{smooth_pipeline, PatchGeometry, SmoothParams};
use sliprelax::verify::{random_field, random_system, run_verify, VerifyParams, VerifyReport};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn system() -> SlipSystem {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    SlipSystem::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, r, r]).unwrap()
}

fn gaussian_study(params: EnergyParams) -> LaminateStudy {
    let w = [0.25, 0.12, 0.12];
    let slip = AnalyticSlip::new(
        PatchFrame::identity(),
        Profile::Gaussian {
            amplitude: 1.0,
            center: [0.5; 3],
            widths: w,
        },
        Profile::Gaussian {
            amplitude: 0.6,
            center: [0.5, 0.45, 0.55],
            widths: w,
        },
    )
    .unwrap();
    LaminateStudy {
        slip,
        system: system(),
        displacement: Displacement::SlipAligned { kappa: 1.0 },
        params,
        quadrature: Quadrature::new(Grid3::unit(64).unwrap(), 4).unwrap(),
    }
}

fn rate_summary(t: &ConvergenceTable) -> (bool, String) {
    let ratios: Vec<f64> = t.rows.iter().filter_map(|r| r.gap_ratio).collect();
    let in_window = ratios.iter().all(|r| (0.35..=0.65).contains(r));
    let ok = t.monotone && t.final_relative_gap <= 0.05 && in_window;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    (
        ok,
        format!(
            "monotone={} gap(6)/E_rel={:.4} ratios=[{}]",
            t.monotone,
            t.final_relative_gap,
            shown.join(", ")
        ),
    )
}

fn bounds(v: &VerifyReport) -> Outcome {
    let f = &v.factors;
    let ok = v.bounds.passed
        && v.bounds.trials >= 200
        && (f.orthogonal - 1.0).abs() <= 1e-12
        && (f.diagonal - std::f64::consts::SQRT_2).abs() <= 1e-12;
    check(
        ok,
        format!(
            "{} fixtures, {} failures, worst slack {:.3e}, factors {} / {}",
            v.bounds.trials, v.bounds.failures, v.bounds.worst_slack, f.orthogonal, f.diagonal
        ),
    )
}

fn convexity(v: &VerifyReport) -> Outcome {
    let c = &v.convexity;
    check(
        c.passed && c.trials >= 500,
        format!("{} trials, {} failures, worst slack {:.3e}", c.trials, c.failures, c.worst_slack),
    )
}

fn monotonicity(v: &VerifyReport) -> Outcome {
    let (t, m) = (&v.truncation, &v.mollification);
    check(
        t.passed && m.passed && t.trials >= 100 && m.trials >= 100 && v.mollification_integral_drift <= 1e-12,
        format!(
            "truncation {}/{} ok, mollification {}/{} ok, integral drift {:.3e}",
            t.trials - t.failures,
            t.trials,
            m.trials - m.failures,
            m.trials,
            v.mollification_integral_drift
        ),
    )
}

fn smoothing() -> Outcome {
    let g = Grid3::new([1.0; 3], [8, 256, 256], [0.0; 3]).unwrap();
    let disc = |cy: f64, cz: f64, r: f64| {
        ScalarField3::from_fn(g.clone(), PatchFrame::identity(), move |p| {
            if (p[1] - cy).hypot(p[2] - cz) < r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    };
    let fixtures = [
        ("cylinder", disc(0.5, 0.5, 0.45), disc(0.5, 0.5, 0.3), [[true; 2], [false; 2], [false; 2]]),
        ("half-disc", disc(0.5, 0.0, 0.45), disc(0.5, 0.0, 0.3), [[true; 2], [false; 2], [true, false]]),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, patch, c1, contact) in fixtures {
        let geom = PatchGeometry::new(patch, contact).map_err(|e| e.to_string())?;
        let c2 = c1.map(|v| -0.5 * v).unwrap();
        let (out, report) = smooth_pipeline(&c1, &c2, &geom, &SmoothParams::default()).map_err(|e| e.to_string())?;
        for (j, c) in report.components.iter().enumerate() {
            let tv_out = curl_norm(&[&out[j]], CurlMode::SingleSum, Boundary::Replicate).unwrap();
            let margin = geom.support_margin(&out[j]).unwrap();
            let budget = 0.05 * c.tv_in;
            ok &= tv_out <= c.tv_in + budget && margin >= report.margin && c.l1_drift <= 0.02;
            details.push(format!(
                "{name} c{}: tv {:.4}->{:.4}, margin {:.4}>={:.4}, drift {:.2}%",
                j + 1,
                c.tv_in,
                tv_out,
                margin,
                report.margin,
                100.0 * c.l1_drift
            ));
        }
    }
    check(ok, details.join("; "))
}

fn lamination_rate() -> Outcome {
    let table = gaussian_study(EnergyParams::default())
        .run(&[2, 3, 4, 5, 6])
        .map_err(|e| e.to_string())?;
    let (ok, detail) = rate_summary(&table);
    check(ok, detail)
}

fn single_slip_validity() -> Outcome {
    let params = EnergyParams {
        ssc_tol: 1e-12,
        ..EnergyParams::default()
    };
    let study = gaussian_study(params);
    let grid = Grid3::unit(64).unwrap();
    let mut ssc_cells = 0;
    for n in 2..=6 {
        let lam = study.laminate(n).map_err(|e| e.to_string())?;
        let r = check_ssc(&lam.slice_cells(&grid, 0), &[system()], 1e-12).map_err(|e| e.to_string())?;
        let e = study.laminate_energy(n).map_err(|e| e.to_string())?;
        if !r.passed() || !e.side_condition.passed() {
            return Err(format!("n={n}: {} failing cells", r.failing_cells));
        }
        ssc_cells += r.cells_checked;
    }
    // Relaxed states assembled from random components on random systems.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Grid3::unit(16).unwrap();
    let states = 20;
    for _ in 0..states {
        let sys = random_system(&mut rng, 10f64.to_radians()).unwrap();
        let frame = sys.slip_frame();
        let pg = g.covering(&PatchFrame::identity(), &frame).unwrap();
        let c1 = random_field(&mut rng, &pg, frame.clone(), true).unwrap();
        let c2 = random_field(&mut rng, &pg, frame.clone(), false).unwrap();
        let patch = SlipPatch::new(0, ScalarField3::constant(pg, frame, 1.0), c1, c2).unwrap();
        let state = RelaxedState::new(VectorField3::zeros(g.clone(), PatchFrame::identity()), vec![sys], vec![patch], vec![])
            .map_err(|e| e.to_string())?;
        let r = check_rsc(&state, 1e-9).map_err(|e| e.to_string())?;
        if !r.passed() {
            return Err(format!("relaxed state fails with deviation {:.3e}", r.worst_relative));
        }
    }
    Ok(format!("{ssc_cells} laminate cells pass single slip; {states} relaxed states pass"))
}

fn run_cli(args: &[&str]) -> (i32, Value, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("sliprelax").chain(args.iter().copied()), &mut out, &mut err);
    let v = serde_json::from_slice(&out).unwrap_or(Value::Null);
    (code, v, out)
}

fn slab_config(side: &str) -> Value {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let d = linalg::normalize([0.0, 1.0 + r, r]).unwrap();
    json!({
        "schema": 1,
        "grid": {"extents": [1, 1, 1], "resolution": [16, 16, 16]},
        "systems": [{"m": [1, 0, 0], "b1": [0, 1, 0], "b2": [0, r, r]}],
        "patches": [{"system": 0, "region": {"type": "all"},
                     "slip": {"type": "shear", "gamma": 0.5, "direction": d}}],
        "displacement": {"type": "shear", "gamma": 0.5, "normal": [1, 0, 0], "direction": d},
        "energy": {"tau": 0.0, "side_condition": side}
    })
}

fn relaxed_shear() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for side in ["rsc", "ssc"] {
        let cfg = dir.path().join(format!("{side}.json"));
        std::fs::write(&cfg, slab_config(side).to_string()).unwrap();
        let out = dir.path().join(side);
        results.push(run_cli(&[
            "energy",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    let e_rel = results[0].1["report"]["total"].as_f64().unwrap_or(f64::NAN);
    let status = results[1].1["status"].as_str().unwrap_or("?").to_string();
    check(
        results[0].0 == 0 && e_rel.abs() <= 1e-9 && results[1].0 == 2 && status == "INFEASIBLE",
        format!("E_rel={e_rel:.3e} (exit {}); single slip: {status} (exit {})", results[0].0, results[1].0),
    )
}

fn nonlinear_cancellation() -> Outcome {
    let sys = system();
    let (a, b) = (0.3, -0.2);
    let s = sys.recompose(a, b);
    let params = EnergyParams {
        elastic: ElasticMode::Nonlinear { p: 2.0 },
        ..EnergyParams::default()
    };
    let compatible = LaminateStudy {
        slip: AnalyticSlip::new(PatchFrame::identity(), Profile::Constant(a), Profile::Constant(b)).unwrap(),
        system: sys,
        displacement: Displacement::Affine {
            matrix: linalg::outer(s, sys.m()),
            offset: [0.0; 3],
        },
        params,
        quadrature: Quadrature::new(Grid3::unit(16).unwrap(), 4).unwrap(),
    };
    let table = compatible.run(&[1, 2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    let worst = table.rows.iter().map(|r| r.laminate.elastic).fold(0.0, f64::max);
    let study = gaussian_study(params).run(&[2, 3, 4, 5, 6]).map_err(|e| e.to_string())?;
    let (rate_ok, detail) = rate_summary(&study);
    check(worst <= 1e-10 && rate_ok, format!("max elastic {worst:.3e}; p=2 study {detail}"))
}

fn dissipation() -> Outcome {
    let with_alpha = |alpha| {
        gaussian_study(EnergyParams {
            alpha,
            ..EnergyParams::default()
        })
    };
    let zero = with_alpha(0.5).relaxed_energy(64).map_err(|e| e.to_string())?.dissipation;
    let mut ok = zero == 0.0;
    let mut details = vec![format!("alpha=0.5 relaxed {zero}")];
    for alpha in [1.0, 1.5] {
        let s = with_alpha(alpha);
        let limit = s.relaxed_energy(128).map_err(|e| e.to_string())?.dissipation;
        let lam = s.laminate_energy(6).map_err(|e| e.to_string())?.terms.dissipation;
        let rel = (lam - limit).abs() / limit;
        ok &= rel <= 0.02;
        details.push(format!("alpha={alpha} {lam:.6} vs {limit:.6} ({:.3}%)", 100.0 * rel));
    }
    check(ok, details.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("verify.json");
    std::fs::write(&cfg, json!({"schema": 1, "grid": {"extents": [1, 1, 1], "resolution": [4, 4, 4]}}).to_string())
        .unwrap();
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let (code, _, stdout) = run_cli(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42",
            "--deterministic",
        ]);
        let file = std::fs::read(out.join("verify_report.json")).map_err(|e| e.to_string())?;
        reports.push((code, stdout, file));
    }
    let same = reports[0].1 == reports[1].1 && reports[0].2 == reports[1].2;
    check(
        same && reports[0].0 == 0,
        format!("exit {}, {} report bytes, identical={same}", reports[0].0, reports[0].2.len()),
    )
}

fn main() {
    let start = Instant::now();
    let verify = run_verify(&VerifyParams::default(), 42).expect("verify suites run");
    let shared = start.elapsed().as_secs_f64();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("curl inequalities", Box::new(|| bounds(&verify))),
        ("convexity", Box::new(|| convexity(&verify))),
        ("truncation and mollification", Box::new(|| monotonicity(&verify))),
        ("smoothing pipeline", Box::new(smoothing)),
        ("lamination convergence", Box::new(lamination_rate)),
        ("single-slip validity", Box::new(single_slip_validity)),
        ("zero-energy relaxed shear", Box::new(relaxed_shear)),
        ("nonlinear cancellation", Box::new(nonlinear_cancellation)),
        ("dissipation exponents", Box::new(dissipation)),
        ("determinism", Box::new(determinism)),
    ];
    println!("verify suites (seed 42) ran in {shared:.1}s");
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} [{name}, {:.1}s] {detail}", i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
