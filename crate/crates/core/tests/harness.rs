use nalgebra::{DMatrix, DVector};
use pwabs::abstraction::{abstract_model, refine_abstraction, RefineConfig};
use pwabs::dynamics::{generate_dataset, ModelSimulator, PwaMode, PwaModel};
use pwabs::geometry::{sample_uniform, Polytope, Region};
use pwabs::harness::*;
use pwabs::identify::{init_identify, refine_identify, IdentConfig};
use pwabs::logic::{parse_ltl, to_dba};
use pwabs::seeds;
use sha2::{Digest, Sha256};

fn contraction() -> PwaModel {
    let domain = Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    PwaModel::new(
        vec![PwaMode {
            a: DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.6]),
            b: DVector::from_vec(vec![0.2, 0.3]),
            region: domain.clone(),
        }],
        domain,
        0.0,
    )
    .unwrap()
}

fn small(seed: u64) -> PipelineConfig {
    PipelineConfig {
        grid: vec![4, 4],
        refinement_cap: 3,
        benchmark_passes: 3,
        initial_sample_count: 100,
        active_sample_budget: 6,
        batch_size: 3,
        seed,
        ..Default::default()
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn degenerate_pipeline_is_certified_within_a_cell() {
    let truth = contraction();
    let cfg = PipelineConfig {
        formula: "G true".into(),
        atoms: vec![],
        ..small(1)
    };
    let bench = benchmark_abstraction(&truth, &cfg).unwrap();
    let mut bb = ModelSimulator::new(truth.clone(), 2);
    let out = run_pipeline(&mut bb, &cfg, Some(&bench)).unwrap();
    assert_eq!(out.model.mode_count(), 1);
    let cert = out.certificate.unwrap();
    let cell = (2.0f64 * 0.25 * 0.25).sqrt();
    assert!(cert.holds);
    assert!(cert.sigma <= cell, "{}", cert.sigma);
    assert_eq!(out.dataset.len(), 106);
    assert_eq!(out.rounds.len(), 3);
}

#[test]
fn zero_budget_is_identify_then_abstract() {
    let truth = PwaModel::case_study(0.1);
    let cfg = PipelineConfig {
        active_sample_budget: 0,
        ..small(4)
    };
    let out = run_pipeline(&mut ModelSimulator::new(truth.clone(), 8), &cfg, None).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert_eq!(out.dataset.len(), cfg.initial_sample_count);

    // the same stages by hand
    let xs = sample_uniform(
        &Region::from_polytope(truth.domain().clone()),
        cfg.initial_sample_count,
        seeds::derive(cfg.seed, &[1]),
    )
    .unwrap();
    let data = generate_dataset(&mut ModelSimulator::new(truth.clone(), 8), &xs).unwrap();
    assert_eq!(data, out.dataset);
    let icfg = IdentConfig {
        seed: seeds::derive(cfg.seed, &[2]),
        ..cfg.ident.clone()
    };
    let init = init_identify(&data, truth.domain(), &icfg).unwrap();
    let b = to_dba(&parse_ltl(&cfg.formula, &cfg.atoms).unwrap()).unwrap();
    let rcfg = RefineConfig {
        eta: cfg.eta,
        max_passes: cfg.refinement_cap,
        sliver_floor: cfg.sliver_floor,
        volume_samples: cfg.volume_samples,
        seed: seeds::derive(cfg.seed, &[3]),
    };
    let abstract_of = |m: &PwaModel| {
        let abs = abstract_model(m, &cfg.atoms, &b, &cfg.grid, &rcfg).unwrap();
        refine_abstraction(m, &cfg.atoms, &b, abs, &rcfg).unwrap().0
    };
    let guide = abstract_of(&init.model);
    let ident = refine_identify(&data, &init, Some(&guide.ts), &icfg).unwrap();
    assert_eq!(ident.model, out.model);
    assert_eq!(abstract_of(&ident.model).ts, out.abstraction.ts);
}

#[test]
fn same_seed_same_outcome() {
    let truth = PwaModel::case_study(0.1);
    let cfg = small(5);
    let bench = benchmark_abstraction(&truth, &cfg).unwrap();
    let run = || {
        let out = run_pipeline(&mut ModelSimulator::new(truth.clone(), 1), &cfg, Some(&bench)).unwrap();
        (serde_json::to_string(&out).unwrap(), out)
    };
    let (a, out) = run();
    let (b, _) = run();
    assert_eq!(a, b);
    let cert = out.certificate.unwrap();
    assert!(cert.holds);
    // the identified noise level enters the bound
    let delta = cert.delta_bound.unwrap();
    assert!(out.model.noise_sigma() > 0.0 && (0.0..=1.0).contains(&delta));
}

#[test]
fn golden_case_study_run() {
    let truth = PwaModel::case_study(0.0);
    let cfg = PipelineConfig {
        seed: 7,
        ..Default::default()
    };
    let bench = benchmark_abstraction(&truth, &cfg).unwrap();
    let mut bb = ModelSimulator::new(truth.with_noise(0.1).unwrap(), seeds::derive(cfg.seed, &[0]));
    let out = run_pipeline(&mut bb, &cfg, Some(&bench)).unwrap();
    let model = digest(serde_json::to_string(&out.model).unwrap().as_bytes());
    let ts = digest(out.abstraction.ts.to_json().unwrap().as_bytes());
    let cert = out.certificate.unwrap();
    // frozen from a reference run
    assert_eq!(out.model.mode_count(), GOLDEN_MODES, "{model} {ts} {}", cert.sigma);
    assert_eq!(model, GOLDEN_MODEL);
    assert_eq!(ts, GOLDEN_TS);
    assert!((cert.sigma - GOLDEN_SIGMA).abs() < 1e-12);
}

const GOLDEN_MODES: usize = 1;
const GOLDEN_MODEL: &str = "ae3ac8c265a080277f919fe6ef6c06d81c5e2b3b1d0eef7a387aee669df793db";
const GOLDEN_TS: &str = "119fd19044dd2a45f2436580570cf29c39cca55ef145601ae4ede7cfcaccf816";
const GOLDEN_SIGMA: f64 = 0.315;

#[test]
fn metrics_of_exact_and_offset_estimates() {
    let truth = PwaModel::case_study(0.0);
    let cfg = small(0);
    let bench = benchmark_abstraction(&truth, &cfg).unwrap();
    let m = compute_metrics(&truth, &truth, &bench.ts, &bench.ts, 0.005, 50, 3).unwrap();
    assert_eq!(m.param_error, 0.0);
    assert!(m.region_error <= 0.05, "{}", m.region_error);
    assert_eq!(m.sigma, Some(0.0));
    assert!(!m.mode_count_mismatch);

    let mut modes = truth.modes().to_vec();
    modes[0].b += DVector::from_vec(vec![0.1, 0.0]);
    let est = PwaModel::new(modes, truth.domain().clone(), 0.0).unwrap();
    let m = compute_metrics(&truth, &est, &bench.ts, &bench.ts, 0.005, 50, 3).unwrap();
    assert!((m.param_error - 0.1).abs() < 1e-12);

    let single = PwaModel::new(vec![truth.modes()[1].clone()], truth.domain().clone(), 0.0).unwrap();
    let m = compute_metrics(&truth, &single, &bench.ts, &bench.ts, 0.005, 50, 3).unwrap();
    assert!(m.mode_count_mismatch);
    let penalty = truth.modes()[0].a.norm() + truth.modes()[0].b.norm();
    assert!((m.param_error - penalty).abs() < 1e-12);
}

#[test]
fn single_trial_tables_are_reproducible() {
    let cfg = TablesConfig {
        pipeline: PipelineConfig {
            trials: 1,
            ..small(3)
        },
        sample_sweep: vec![3, 6],
        fixed_steps: 2,
        step_sweep: vec![1, 2],
        fixed_samples: 3,
        ..Default::default()
    };
    let truth = PwaModel::case_study(0.0);
    let a = run_tables(&truth, &cfg).unwrap();
    let b = run_tables(&truth, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.rows_of("samples").map(|r| r.active_samples).collect::<Vec<_>>(), vec![3, 6]);
    assert_eq!(a.to_csv().lines().count(), 5);
    assert!(a.to_markdown().contains("mean σ̄"));
    // trial seeds are shared across columns
    let seeds: Vec<u64> = a.rows.iter().map(|r| r.trials[0].seed).collect();
    assert!(seeds.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn halton_points_fill_the_domain() {
    let domain = Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let pts = halton_points(&domain, 200).unwrap();
    assert_eq!(pts.len(), 200);
    // every cell of a 5x5 grid is hit
    let mut hit = [false; 25];
    for p in &pts {
        hit[(p[0] * 5.0) as usize * 5 + (p[1] * 5.0) as usize] = true;
    }
    assert!(hit.iter().all(|h| *h));
}
