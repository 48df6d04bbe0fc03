use super::*;
use crate::ht::testing::rng;
use rand::Rng;

fn quick(problem: Problem, d_x: usize, n: usize, dir: &Path) -> RunConfig {
    RunConfig { problem, d_x, d_v: d_x, n, eps_base: 1e-6, t_final: 1.0, output_dir: dir.to_path_buf(), ..RunConfig::default() }
}

#[test]
fn json_defaults_follow_the_problem() {
    let cfg = RunConfig::from_json(r#"{"problem": "two-stream", "d_x": 3, "d_v": 3}"#).unwrap();
    assert_eq!((cfg.alpha(), cfg.k(), cfg.v_max(), cfg.v0), (0.001, 0.2, 8.0, 2.4));
    assert_eq!(cfg.leaf_rank_min(), 3);
    assert_eq!(cfg.tree_strategy(), TreeStrategy::PairedUnbalanced);
    let cfg = RunConfig::from_json("{}").unwrap();
    assert_eq!((cfg.alpha(), cfg.k(), cfg.v_max(), cfg.cfl, cfg.gamma), (0.01, 0.5, 2.0 * PI, 5.0, 0.1));
    assert_eq!(cfg.tree_strategy(), TreeStrategy::Balanced);
    assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    assert!(RunConfig::from_json(r#"{"d_x": 3, "d_v": 3, "alpha": 0.34}"#).is_err());
    assert!(RunConfig::from_json(r#"{"d_x": 3, "d_v": 3, "alpha": 0.3333333333333333}"#).is_ok());
    assert!(RunConfig::from_json(r#"{"d_x": 2, "d_v": 1}"#).is_err());
    assert!(RunConfig::from_json(r#"{"v_max": -1.0}"#).is_err());
}

#[test]
fn maxwellian_is_rank_one() {
    let cfg = RunConfig { alpha: Some(0.0), n: 8, ..RunConfig::default() };
    let f = build_initial_condition(&cfg).unwrap();
    assert!(f.ranks().iter().all(|&r| r == 1), "{:?}", f.ranks());
}

#[test]
fn landau_matches_formula() {
    for ordering in [ModeOrdering::Grouped, ModeOrdering::Interleaved] {
        let cfg = RunConfig { alpha: Some(0.5), n: 12, ordering, ..RunConfig::default() };
        let sim = Simulation::new(cfg).unwrap();
        let f = sim.initial_condition().unwrap();
        let (grid, layout) = (sim.system().grid(), sim.system().layout());
        let mut r = rng(1);
        for _ in 0..1000 {
            let idx: Vec<usize> = (0..4).map(|_| r.random_range(0..12)).collect();
            let p = grid.point(&idx);
            let s: f64 = layout.spatial.iter().map(|&m| (0.5 * p[m]).cos()).sum();
            let v2: f64 = layout.velocity.iter().map(|&m| p[m] * p[m]).sum();
            let exact = (1.0 + 0.5 * s) * (-v2 / 2.0).exp() / (2.0 * PI);
            assert!((f.entry(&idx).unwrap() - exact).abs() <= 1e-13, "{idx:?}");
        }
        let x_nodes = sim.system().tree().nodes().iter().filter(|n| n.modes.clone().all(|m| layout.velocity.contains(&m)));
        for node in x_nodes {
            let id = sim.system().tree().nodes().iter().position(|m| m == node).unwrap();
            assert_eq!(f.rank(id), 1);
        }
        assert!(f.max_rank() <= 3);
    }
}

#[test]
fn two_stream_velocity_frames_hold_both_beams() {
    let cfg = RunConfig { problem: Problem::TwoStream, d_x: 3, d_v: 3, n: 6, alpha: Some(0.2), ..RunConfig::default() };
    let sim = Simulation::new(cfg).unwrap();
    let f = sim.initial_condition().unwrap();
    let (grid, layout) = (sim.system().grid(), sim.system().layout());
    let g = |v: f64| (-v * v / 2.0).exp();
    for &m in &layout.velocity {
        let u = f.frame(f.tree().leaf_of_mode(m));
        assert_eq!(u.ncols(), 2);
        for (i, &v) in grid.axis(m).centers().iter().enumerate() {
            assert_eq!(u[(i, 0)], g(v - 2.4));
            assert_eq!(u[(i, 1)], g(v + 2.4));
        }
    }
    let norm = 1.0 / (8.0 * (2.0 * PI).powf(1.5));
    let dense = f.full().unwrap();
    for (lin, &value) in dense.data.iter().enumerate() {
        let p = grid.point(&crate::index::delinearize(&dense.shape, lin).unwrap());
        let s: f64 = layout.spatial.iter().map(|&m| (0.2 * p[m]).cos()).sum();
        let v: f64 = layout.velocity.iter().map(|&m| g(p[m] - 2.4) + g(p[m] + 2.4)).product();
        assert!((value - norm * (1.0 + 0.2 * s) * v).abs() <= 1e-14);
    }
}

#[test]
fn zero_final_time_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { t_final: 0.0, ..quick(Problem::Landau, 1, 16, dir.path()) };
    let out = run(&cfg, None).unwrap();
    let text = fs::read_to_string(&out.csv_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "step,time,dt,electric_energy,mass,momentum_1,total_energy,compression_ratio,max_rank,accessor_evals,min_entry");
    assert!(lines[1].starts_with("0,0e0,0e0,"));
    assert!(out.checkpoint.exists());
}

#[test]
fn reruns_and_resumes_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = RunConfig { checkpoint_interval: 2, cfl: 1.0, ..quick(Problem::Landau, 1, 16, &dir.path().join("a")) };
    let b = RunConfig { output_dir: dir.path().join("b"), ..a.clone() };
    let out_a = run(&a, None).unwrap();
    run(&b, None).unwrap();
    let csv_a = fs::read(&out_a.csv_path).unwrap();
    assert_eq!(csv_a, fs::read(dir.path().join("b").join(CSV_NAME)).unwrap());
    assert!(out_a.step >= 4, "only {} steps", out_a.step);
    let times: Vec<f64> = out_a.records.iter().map(|r| r.time).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(*times.last().unwrap(), 1.0);

    // resume into an existing CSV, and into a fresh directory
    run(&b, Some(&dir.path().join("b").join(checkpoint_name(2)))).unwrap();
    assert_eq!(csv_a, fs::read(dir.path().join("b").join(CSV_NAME)).unwrap());
    let c = RunConfig { output_dir: dir.path().join("c"), ..a.clone() };
    run(&c, Some(&dir.path().join("a").join(checkpoint_name(2)))).unwrap();
    let text_a = String::from_utf8(csv_a).unwrap();
    let text_c = fs::read_to_string(dir.path().join("c").join(CSV_NAME)).unwrap();
    let tail: Vec<&str> = text_a.lines().skip(3).collect();
    assert_eq!(text_c.lines().skip(1).collect::<Vec<_>>(), tail);
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick(Problem::TwoStream, 1, 16, dir.path());
    let f = build_initial_condition(&cfg).unwrap();
    let meta = CheckpointMeta { step: 3, time: 0.1 + 0.2, dt: 1.0 / 3.0, accessor_evals: 17, config: cfg };
    let path = dir.path().join("x.slar");
    save_checkpoint(&path, &f, &meta).unwrap();
    let (g, back) = load_checkpoint(&path).unwrap();
    assert_eq!(g.frames(), f.frames());
    assert_eq!((back.step, back.time, back.dt, back.accessor_evals), (3, 0.1 + 0.2, 1.0 / 3.0, 17));
    assert_eq!(back.config, meta.config);
}

#[test]
fn snapping_rules() {
    let axis = Axis::truncated(0.0, 4.0, 4).unwrap();
    assert_eq!(snap(&axis, 1.4), 1);
    assert_eq!(snap(&axis, 1.6), 1);
    assert_eq!(snap(&axis, 2.0), 1);
    assert_eq!(snap(&axis, 2.01), 2);
    assert_eq!(snap(&axis, -3.0), 0);
    assert_eq!(snap(&axis, 9.0), 3);
    let ring = Axis::periodic(0.0, 4.0, 4).unwrap();
    assert_eq!(snap(&ring, 3.9), 3);
    assert_eq!(snap(&ring, 0.0), 0);
    assert_eq!(snap(&ring, 4.0 + 1.5), 1);
}

#[test]
fn slices_of_separable_and_general_tensors() {
    let cfg = RunConfig { alpha: Some(0.0), n: 8, ..RunConfig::default() };
    let sim = Simulation::new(cfg).unwrap();
    let f = sim.initial_condition().unwrap();
    let grid = sim.system().grid();
    let names = mode_names(sim.system().layout());
    let s = extract_slice(&f, grid, (0, 1), &[0.0, 0.0], &names).unwrap();
    assert_eq!(s.names, ("x1".to_string(), "v1".to_string()));
    let col: Vec<f64> = (0..8).map(|i| s.values[(i, 0)]).collect();
    let row: Vec<f64> = (0..8).map(|j| s.values[(0, j)]).collect();
    for i in 0..8 {
        for j in 0..8 {
            assert!((s.values[(i, j)] * s.values[(0, 0)] - col[i] * row[j]).abs() < 1e-15);
        }
    }

    let mut r = rng(4);
    let tree = DimensionTree::balanced(4);
    let g: HtTensor<f64> = crate::ht::testing::random_ht(&tree, &[8; 4], 3, &mut r);
    let dense = g.full().unwrap();
    let fixed = [grid.axis(1).center(5) + 0.1, grid.axis(3).center(2)];
    let s = extract_slice(&g, grid, (2, 0), &fixed, &names).unwrap();
    assert_eq!(s.fixed.iter().map(|t| (t.0, t.1)).collect::<Vec<_>>(), vec![(1, 5), (3, 2)]);
    for i in 0..8 {
        for j in 0..8 {
            assert!((s.values[(i, j)] - dense.get(&[j, 5, i, 2])).abs() <= 1e-12 * dense.max_abs());
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    s.write_csv(&path).unwrap();
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 65);
    assert!(text.starts_with("x2,x1,f\n"));
}

#[test]
fn order_fit_recovers_power_laws() {
    let h = [0.1, 0.05, 0.025];
    let e: Vec<f64> = h.iter().map(|x| 7.0 * x * x * x).collect();
    assert!((fitted_order(&h, &e) - 3.0).abs() < 1e-12);
    assert!(convergence_study(&RunConfig::default(), 2).is_err());
}

#[test]
fn reversibility_of_a_short_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { alpha: Some(0.1), t_final: 0.5, eps_base: 1e-8, ..quick(Problem::Landau, 1, 32, dir.path()) };
    let coarse = reversibility_error(&RunConfig { n: 16, ..cfg.clone() }).unwrap();
    let fine = reversibility_error(&cfg).unwrap();
    assert!(fine.error < coarse.error / 4.0, "{coarse:?} {fine:?}");
}
