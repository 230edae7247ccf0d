use nalgebra::{DMatrix, DVector};
use netar::estimate::*;
use netar::model::{InnovationSpec, NarSpec, ProcessScenario, ProcessSpec, SigmaSpec, SimOptions};
use netar::netdyn::{AdjacencySeries, NeighborhoodFn, NetworkModel};
use netar::presets;
use netar::rng::{seeded, Purpose};
use rand::Rng;

fn ones(d: usize) -> DMatrix<f64> {
    DMatrix::from_element(d, d, 1.0)
}

/// Textbook OLS with intercept: rows of `z` are `(1, X_{t-1}, ..., X_{t-p})`.
fn var_ols(x: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (d, n) = x.shape();
    let m = n - p;
    let z = DMatrix::from_fn(m, 1 + d * p, |c, k| {
        if k == 0 {
            1.0
        } else {
            let (j, i) = ((k - 1) / d + 1, (k - 1) % d);
            x[(i, p + c - j)]
        }
    });
    let mut coef = DMatrix::zeros(d, d * p);
    let mut mu = DVector::zeros(d);
    let svd = z.clone().svd(true, true);
    for r in 0..d {
        let target = x.row(r).columns(p, m).transpose();
        let b = svd.solve(&target, 1e-14).unwrap();
        mu[r] = b[0];
        for k in 0..d * p {
            coef[(r, k)] = b[k + 1];
        }
    }
    (coef, mu)
}

#[test]
fn literal_normal_equations_match_centred_solve() {
    let mut rng = seeded(31, Purpose::Auxiliary);
    for _ in 0..100 {
        let k = rng.random_range(1..5);
        let m = rng.random_range(k + 3..k + 30);
        let y = DMatrix::from_fn(k, m, |_, _| rng.random_range(-2.0..2.0));
        let x = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
        let idx = IndexSet {
            r: 0,
            members: (0..k).collect(),
        };
        let fit = fit_component_ls(&y, &x, &idx).unwrap();

        // [ 0      S_YY - S_Y S_Y^T / m ] [mu]   [ S_XY - S_Y S_X / m ]
        // [ m      S_Y^T                ] [w ] = [ S_X                ]
        let mf = m as f64;
        let sy = y.column_sum();
        let sx = x.sum();
        let mut lhs = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        let syy = &y * y.transpose() - &sy * sy.transpose() / mf;
        let sxy = &y * &x - &sy * sx / mf;
        lhs.view_mut((0, 1), (k, k)).copy_from(&syy);
        rhs.rows_mut(0, k).copy_from(&sxy);
        lhs[(k, 0)] = mf;
        for i in 0..k {
            lhs[(k, i + 1)] = sy[i];
        }
        rhs[k] = sx;
        let sol = lhs.lu().solve(&rhs).unwrap();
        assert!((sol[0] - fit.mu).abs() < 1e-10);
        for i in 0..k {
            assert!((sol[i + 1] - fit.w[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn noiseless_data_is_interpolated() {
    let mut rng = seeded(32, Purpose::Auxiliary);
    let y = DMatrix::from_fn(3, 40, |_, _| rng.random_range(-1.0..1.0));
    let w = DVector::from_vec(vec![0.3, -1.2, 2.0]);
    let x = y.tr_mul(&w).add_scalar(4.5);
    let fit = fit_component_ls(
        &y,
        &x,
        &IndexSet {
            r: 2,
            members: vec![0, 1, 2],
        },
    )
    .unwrap();
    assert!((&fit.w - &w).amax() < 1e-10);
    assert!((fit.mu - 4.5).abs() < 1e-10);
    assert!(fit.rss < 1e-18);
    assert_eq!(fit.r, 2);
    assert!(fit_component_ls(
        &y.columns(0, 4).into_owned(),
        &x.rows(0, 4).into_owned(),
        &IndexSet {
            r: 0,
            members: vec![0, 1, 2]
        }
    )
    .is_err());
}

#[test]
fn collinear_regressors_get_flagged_ridge() {
    let mut rng = seeded(33, Purpose::Auxiliary);
    let a = DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
    let mut y = DMatrix::zeros(2, 50);
    y.set_row(0, &a.transpose());
    y.set_row(1, &(a.transpose() * 2.0));
    let x = a.clone() * 3.0;
    let fit = fit_component_ls(
        &y,
        &x,
        &IndexSet {
            r: 0,
            members: vec![0, 1],
        },
    )
    .unwrap();
    assert!(fit.ridge.is_some());
    assert!((fit.w[0] + 2.0 * fit.w[1] - 3.0).abs() < 1e-6);
    let zero = DMatrix::zeros(1, 20);
    assert!(fit_component_ls(
        &zero,
        &DVector::zeros(20),
        &IndexSet {
            r: 0,
            members: vec![0]
        }
    )
    .is_err());
}

fn static_var_scenario() -> (ProcessScenario, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(3, 3, &[0.4, 0.1, 0.0, -0.2, 0.3, 0.1, 0.0, 0.2, -0.3]);
    let spec = NarSpec::with_common_g(vec![a.clone()], NeighborhoodFn::Transpose).unwrap();
    let innov = InnovationSpec::new(
        DVector::from_vec(vec![1.0, 0.0, -1.0]),
        SigmaSpec::identity(3),
    )
    .unwrap();
    let scen =
        ProcessScenario::new(ProcessSpec::Nar(spec), NetworkModel::Static(ones(3)), innov).unwrap();
    (scen, a)
}

#[test]
fn static_complete_network_nar_equals_var_ols() {
    let (scen, _) = static_var_scenario();
    let path = scen
        .simulate_path(300, &SimOptions::burn_in(100), 3, 0)
        .unwrap();
    for p in 1..=2 {
        let (coef, mu) = var_ols(&path.x, p);
        let nar = fit_nar(&path.x, path.ads.mats(), &[NeighborhoodFn::Transpose], p).unwrap();
        let var = fit_var(&path.x, p, None).unwrap();
        for fit in [&nar, &var] {
            let w = fit.slot_coefficients().unwrap();
            assert!((&w - &coef).amax() < 1e-10, "p={p}");
            assert!((fit.mu().unwrap() - &mu).amax() < 1e-10);
        }
    }
}

#[test]
fn var_fit_matches_textbook_ols_and_masks() {
    let (scen, _) = static_var_scenario();
    let x = scen
        .simulate_path(500, &SimOptions::burn_in(100), 4, 0)
        .unwrap()
        .x;
    let (coef, _) = var_ols(&x, 1);
    let full = fit_var(&x, 1, Some(&ones(3))).unwrap();
    assert!((full.slot_coefficients().unwrap() - coef).amax() < 1e-10);

    let empty = fit_var(&x, 2, Some(&DMatrix::zeros(3, 6))).unwrap();
    assert!(empty.components.iter().all(|c| c.w.is_empty()));
    let tail = x.columns(2, 498).column_mean();
    assert!((empty.mu().unwrap() - tail).amax() < 1e-12);

    let mut mask = ones(3);
    mask[(0, 2)] = 0.0;
    let masked = fit_var(&x, 1, Some(&mask)).unwrap();
    assert_eq!(masked.slot_coefficients().unwrap()[(0, 2)], 0.0);
    assert_eq!(masked.components[0].index_set, vec![0, 1]);
}

#[test]
fn index_sets() {
    let zero = AdjacencySeries::constant(&DMatrix::zeros(3, 3), 0, 20).unwrap();
    let idx = build_index_set(zero.mats(), &[NeighborhoodFn::Transpose], 2, 1, 21).unwrap();
    assert!(idx.is_empty());
    let full = AdjacencySeries::constant(&ones(3), 0, 20).unwrap();
    let idx = build_index_set(full.mats(), &[NeighborhoodFn::Transpose], 1, 1, 21).unwrap();
    assert_eq!(idx.members, vec![0, 1, 2]);

    let scen = presets::example1();
    let n = 500;
    let ads = scen
        .network
        .simulate(n, 1, &mut seeded(34, Purpose::Network));
    for p in 1..=2 {
        for r in 0..4 {
            let idx = build_index_set(ads.mats(), &[NeighborhoodFn::Identity], p, r, n).unwrap();
            let mut brute = Vec::new();
            for j in 1..=p {
                for i in 0..4 {
                    if (p..n).any(|t| ads.at(t - j)[(r, i)] != 0.0) {
                        brute.push(i + (j - 1) * 4);
                    }
                }
            }
            assert_eq!(idx.members, brute);
        }
    }
}

#[test]
fn regressors_by_hand() {
    // 3 vertices, edges 1->3 and 2->3 at time 0, 1->2 at time 1.
    let mut a0 = DMatrix::zeros(3, 3);
    a0[(0, 2)] = 1.0;
    a0[(1, 2)] = 1.0;
    let mut a1 = DMatrix::zeros(3, 3);
    a1[(0, 1)] = 1.0;
    let ads = vec![a0, a1];
    let x = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 2.0, 3.0, 10.0, 20.0, 30.0, 100.0, 200.0, 300.0],
    );

    let nar = Design::nar(&[NeighborhoodFn::Transpose], 1).unwrap();
    let idx = design_index_set(&x, &ads, &nar, 2).unwrap();
    assert_eq!(idx.members, vec![0, 1]);
    let y = build_regressors(&x, &ads, &nar, &idx).unwrap();
    // t = 1: G(Ad_0) = Ad_0^T, row 3 = (1, 1, 0), so Y = (X_{0;1}, X_{0;2}); t = 2: row 3 of Ad_1^T is 0.
    assert_eq!(y, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 10.0, 0.0]));

    let lnar = Design::lnar(&[NeighborhoodFn::RowNormalizedTranspose], 1).unwrap();
    let idx = design_index_set(&x, &ads, &lnar, 2).unwrap();
    assert_eq!(idx.members, vec![0, 1]);
    let y = build_regressors(&x, &ads, &lnar, &idx).unwrap();
    // second entry: in-neighbor average of X_{t-1} at vertex 3
    assert_eq!(y, DMatrix::from_row_slice(2, 2, &[100.0, 200.0, 5.5, 0.0]));

    let idx = design_index_set(&x, &ads, &lnar, 0).unwrap();
    assert_eq!(idx.members, vec![0], "vertex 1 never has in-neighbors");
}

/// Coefficients on slots the network ever switches on; the rest are not
/// identified and fitted as zero.
fn example1_truth_slots() -> DMatrix<f64> {
    let pi = presets::example1_network().stationary_probs();
    let g = presets::example1_g().apply(&pi).unwrap();
    presets::example1_alpha().zip_map(&g, |a, p| if p > 0.0 { a } else { 0.0 })
}

#[test]
fn example1_recovers_coefficients() {
    let scen = presets::example1();
    let alpha = example1_truth_slots();
    let reps = 200;
    let mut close_2000 = 0;
    let mut close_500 = 0;
    for i in 0..reps {
        let path = scen
            .simulate_path(2000, &SimOptions::default(), 35, i)
            .unwrap();
        let fit = fit_nar(&path.x, path.ads.mats(), &[presets::example1_g()], 1).unwrap();
        let w = fit.slot_coefficients().unwrap();
        let worst = (0..16)
            .filter(|&k| alpha.as_slice()[k] != 0.0)
            .map(|k| (w.as_slice()[k] - alpha.as_slice()[k]).abs())
            .fold(0.0, f64::max);
        if worst < 0.05 {
            close_2000 += 1;
        }

        let x500 = path.x.columns(0, 500).into_owned();
        let fit = fit_nar(&x500, path.ads.mats(), &[presets::example1_g()], 1).unwrap();
        let w = fit.slot_coefficients().unwrap();
        for c in &fit.components {
            for s in 0..4 {
                if !c.index_set.contains(&s) {
                    assert_eq!(w[(c.r, s)], 0.0);
                }
            }
        }
        let worst = (0..16)
            .filter(|&k| alpha.as_slice()[k] != 0.0)
            .map(|k| (w.as_slice()[k] - alpha.as_slice()[k]).abs())
            .fold(0.0, f64::max);
        if worst < 0.1 {
            close_500 += 1;
        }
    }
    assert!(
        close_2000 as f64 >= 0.95 * reps as f64,
        "{close_2000}/{reps} at n=2000"
    );
    assert!(
        close_500 as f64 >= 0.90 * reps as f64,
        "{close_500}/{reps} at n=500"
    );
}

#[test]
fn plug_in_variance_matches_replicate_spread() {
    let scen = presets::example1();
    let alpha = example1_truth_slots();
    let (reps, n) = (500, 2000);
    let fits: Vec<ModelFit> = (0..reps)
        .map(|i| {
            let path = scen
                .simulate_path(n, &SimOptions::default(), 36, i)
                .unwrap();
            fit_nar(&path.x, path.ads.mats(), &[presets::example1_g()], 1).unwrap()
        })
        .collect();
    let mut checked = 0;
    let mut within = 0;
    for r in 0..4 {
        let members = &fits[0].components[r].index_set;
        for (k, &s) in members.iter().enumerate() {
            let same: Vec<&ModelFit> = fits
                .iter()
                .filter(|f| &f.components[r].index_set == members)
                .collect();
            let m = same[0].components[r].n_obs as f64;
            let draws: Vec<f64> = same
                .iter()
                .map(|f| m.sqrt() * (f.components[r].w[k] - alpha[(r, s)]))
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let emp =
                draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let plug = same
                .iter()
                .map(|f| f.components[r].asymp_cov[(k, k)])
                .sum::<f64>()
                / same.len() as f64;
            checked += 1;
            if (emp / plug - 1.0).abs() <= 0.25 {
                within += 1;
            }
        }
    }
    assert!(within as f64 >= 0.8 * checked as f64, "{within}/{checked}");
}

#[test]
fn lnar_recovers_alpha_at_d33() {
    let d = 33;
    let scen = presets::example2(d).unwrap();
    let truth = presets::example2_spec(d);
    let reps = 40;
    let mut ok = 0;
    for i in 0..reps {
        let path = scen
            .simulate_path(500, &SimOptions::default(), 37, i)
            .unwrap();
        let fit = fit_lnar(
            &path.x,
            path.ads.mats(),
            &[NeighborhoodFn::RowNormalizedTranspose],
            1,
        )
        .unwrap();
        let (alpha, _) = fit.alpha_beta().unwrap();
        if (alpha - &truth.alpha).amax() < 0.1 {
            ok += 1;
        }
    }
    assert!(ok as f64 >= 0.9 * reps as f64, "{ok}/{reps}");
}

#[test]
fn bic_selects_true_order() {
    let scen = presets::example1();
    let reps = 100;
    let mut hits = 0;
    for i in 0..reps {
        let path = scen
            .simulate_path(500, &SimOptions::default(), 38, i)
            .unwrap();
        let sel = select_order_bic(
            &path.x,
            path.ads.mats(),
            &[presets::example1_g()],
            3,
            Family::Nar,
        )
        .unwrap();
        assert_eq!(sel.window_start, 3);
        assert_eq!(sel.fit.start, sel.p);
        if sel.p == 1 {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.9 * reps as f64, "{hits}/{reps}");
}

#[test]
fn bic_increases_with_order_on_white_noise() {
    let reps = 100;
    let mut monotone = 0;
    for i in 0..reps {
        let x = InnovationSpec::standard(2)
            .draw_matrix(&mut netar::rng::stream(39, i, Purpose::Innovations), 2000);
        let sel = select_order_bic(&x, &[], &[], 3, Family::Var).unwrap();
        let b: Vec<f64> = sel.table.iter().map(|r| r.bic).collect();
        if b[0] < b[1] && b[1] < b[2] {
            monotone += 1;
        }
        assert_eq!(sel.p, 1);
    }
    assert!(monotone as f64 >= 0.9 * reps as f64, "{monotone}/{reps}");
}

#[test]
fn bic_uses_a_common_window() {
    let scen = presets::example1();
    let path = scen
        .simulate_path(200, &SimOptions::default(), 40, 0)
        .unwrap();
    let sel = select_order_bic(
        &path.x,
        path.ads.mats(),
        &[presets::example1_g()],
        3,
        Family::Nar,
    )
    .unwrap();
    for p in 1..=3 {
        let design = Design::nar(&[presets::example1_g()], p).unwrap();
        let fit = fit_window(&path.x, path.ads.mats(), &design, 3).unwrap();
        assert!(fit.components.iter().all(|c| c.n_obs == 197));
        assert_eq!(bic(&fit), sel.table[p - 1].bic);
    }
}

#[test]
fn predict_reproduces_fitted_values() {
    let scen = presets::example2(8).unwrap();
    let path = scen
        .simulate_path(300, &SimOptions::default(), 41, 0)
        .unwrap();
    let fit = fit_lnar(
        &path.x,
        path.ads.mats(),
        &[NeighborhoodFn::RowNormalizedTranspose],
        2,
    )
    .unwrap();
    let cols: Vec<DVector<f64>> = path.x.column_iter().map(|c| c.into_owned()).collect();
    let mut rss = DVector::zeros(8);
    for t in 2..300 {
        let xs = [&cols[t - 1], &cols[t - 2]];
        let ads = [Some(path.ads.at(t - 1)), Some(path.ads.at(t - 2))];
        let pred = fit.predict(&xs, &ads).unwrap();
        rss += (&cols[t] - pred).map(|v| v * v);
    }
    for c in &fit.components {
        assert!((rss[c.r] - c.rss).abs() < 1e-8 * c.rss);
    }
}

#[test]
fn model_fit_json_round_trip() {
    let scen = presets::example1();
    let path = scen
        .simulate_path(200, &SimOptions::default(), 42, 0)
        .unwrap();
    let fit = fit_nar(&path.x, path.ads.mats(), &[presets::example1_g()], 1).unwrap();
    let s = fit.to_json();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    let c0 = &v["components"][0];
    for key in ["r", "index_set", "w", "mu", "resid_var", "asymp_cov"] {
        assert!(!c0[key].is_null(), "{key}");
    }
    assert_eq!(c0["r"], 1);
    let back = ModelFit::from_json(&s).unwrap();
    assert_eq!(back.components.len(), fit.components.len());
    for (a, b) in back.components.iter().zip(&fit.components) {
        assert_eq!(a.index_set, b.index_set);
        assert!((&a.w - &b.w).amax() < 1e-12);
    }
    assert_eq!(back.design, fit.design);
}

#[test]
fn network_mask_support() {
    let mut a = DMatrix::zeros(3, 3);
    a[(0, 2)] = 1.0;
    let ads = vec![a.clone(), DMatrix::zeros(3, 3)];
    let m = network_mask(&ads, &NeighborhoodFn::Transpose, 2).unwrap();
    assert_eq!(m.shape(), (3, 6));
    assert_eq!(m.sum(), 2.0);
    assert_eq!((m[(2, 0)], m[(2, 3)]), (1.0, 1.0));
}

#[test]
fn error_bound_formula() {
    let k = BoundConstants {
        c_lambda: 0.9,
        c_a: 1.0,
        c_delta_y: c_delta_y(1.5, 1.0, 0.9, 0.5).unwrap(),
        rho_gamma_inv: 2.0,
        mu_y_norm: 1.0,
        eps_norm: 1.0,
        mu_r: -3.0,
        c_q: 1.0,
        c_q_prime: 1.0,
    };
    match eval_theorem2_bound(0.0, 4.0, 1, &k, 500).unwrap() {
        BoundOutcome::Feasible {
            w_bound, mu_bound, ..
        } => assert_eq!((w_bound, mu_bound), (0.0, 0.0)),
        other => panic!("{other:?}"),
    }
    let y = 1e-5;
    let prob = |n| match eval_theorem2_bound(y, 4.0, 1, &k, n).unwrap() {
        BoundOutcome::Feasible { prob_lower, .. } => prob_lower,
        _ => panic!("infeasible"),
    };
    assert!(prob(200_000_000_000) > prob(100_000_000_000));
    assert!(prob(100_000_000_000) > 0.0);
    let mut last = 0.0;
    let mut feasible = 0;
    for i in 1..200 {
        match eval_theorem2_bound(i as f64 * 1e-6, 4.0, 1, &k, 500).unwrap() {
            BoundOutcome::Feasible { w_bound, .. } => {
                assert!(w_bound > last);
                last = w_bound;
                feasible += 1;
            }
            BoundOutcome::Infeasible { denominator } => assert!(denominator <= 0.0),
        }
    }
    assert!(feasible > 10);
    assert!(matches!(
        eval_theorem2_bound(1.0, 4.0, 1, &k, 500).unwrap(),
        BoundOutcome::Infeasible { .. }
    ));
    assert!(eval_theorem2_bound(-1.0, 4.0, 1, &k, 500).is_err());
}
