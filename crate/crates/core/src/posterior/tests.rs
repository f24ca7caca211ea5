use super::*;
use crate::graph::{generate_with, GraphFamily};
use crate::reward::RewardKind;
use crate::SimRng;
use rand::SeedableRng;

const KINDS: [RewardKind; 9] = [
    RewardKind::LinearInMeans,
    RewardKind::LinearInMeansShared,
    RewardKind::CountBasedShared { d_max: 3 },
    RewardKind::CountBasedPerNode { d_max: 2 },
    RewardKind::PairwiseNia,
    RewardKind::AdditivePairs,
    RewardKind::SaturationSpecA,
    RewardKind::InteractionSpecB,
    RewardKind::PairedIndicator,
];

fn random_history(spec: &RewardSpec, rounds: usize, rng: &mut SimRng) -> History {
    let n = spec.n();
    let mut h = History::new(n);
    for _ in 0..rounds {
        let z: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        h.push(z, r).unwrap();
    }
    h
}

fn random_theta(spec: &RewardSpec, rng: &mut SimRng) -> Vec<f64> {
    (0..spec.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn empty_history_returns_prior() {
    let spec = RewardSpec::new(RewardKind::PairwiseNia, 4).unwrap();
    let prior = Prior::isotropic(spec.dimension(), 0.3, 10.0, 0.25, 0.3).unwrap();
    let (m, c) = theta_posterior(&History::new(4), &Adjacency::empty(4), &spec, &prior).unwrap();
    assert!(m.iter().all(|&v| v == 0.3));
    assert_eq!(c, prior.cov_matrix());
}

#[test]
fn scalar_conjugate_update() {
    // paired indicator on two isolated nodes: only mu is informed
    let spec = RewardSpec::new(RewardKind::PairedIndicator, 2).unwrap();
    let prior = Prior::isotropic(2, 0.0, 10.0, 1.0, 0.3).unwrap();
    let mut h = History::new(2);
    h.push(vec![true, false], vec![2.0, 0.0]).unwrap();
    let (m, c) = theta_posterior(&h, &Adjacency::empty(2), &spec, &prior).unwrap();
    assert!((c[(0, 0)] - 1.0 / 1.1).abs() < 1e-12);
    assert!((m[0] - 2.0 / 1.1).abs() < 1e-12);
    assert!((c[(1, 1)] - 10.0).abs() < 1e-12);
}

#[test]
fn flat_prior_approaches_least_squares() {
    let mut rng = SimRng::seed_from_u64(1);
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 6).unwrap();
    let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.6 }, 6, &mut rng).unwrap();
    let h = random_history(&spec, 40, &mut rng);
    let prior = Prior::isotropic(3, 0.0, 1e6, 1.0, 0.3).unwrap();
    let (m, _) = theta_posterior(&h, &adj, &spec, &prior).unwrap();
    let mut x = DMatrix::<f64>::zeros(40 * 6, 3);
    let mut y = DVector::<f64>::zeros(40 * 6);
    for (s, round) in h.rounds().iter().enumerate() {
        for i in 0..6 {
            let row = spec.design_row(&round.z, &adj, i).unwrap();
            for c in 0..3 {
                x[(s * 6 + i, c)] = row[c];
            }
            y[s * 6 + i] = round.r[i];
        }
    }
    let ols = x.svd(true, true).solve(&y, 1e-12).unwrap();
    for c in 0..3 {
        assert!((m[c] - ols[c]).abs() <= 1e-4 * ols[c].abs().max(1e-3), "{} vs {}", m[c], ols[c]);
    }
}

#[test]
fn non_pd_dense_prior_is_rejected() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(Prior::dense(vec![0.0; 2], cov, 1.0, 0.3).is_err());
    assert!(Prior::isotropic(2, 0.0, 1.0, 1.0, 1.0).is_err());
    assert!(Prior::isotropic(2, 0.0, 1.0, 0.0, 0.5).is_err());
}

#[test]
fn conjugate_updates_compose() {
    let mut rng = SimRng::seed_from_u64(2);
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 3 }, 5).unwrap();
    let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.5 }, 5, &mut rng).unwrap();
    let full = random_history(&spec, 30, &mut rng);
    let h1 = full.prefix(12);
    let mut h2 = History::new(5);
    for r in &full.rounds()[12..] {
        h2.push(r.z.clone(), r.r.clone()).unwrap();
    }
    let prior = Prior::isotropic(4, 0.5, 3.0, 0.7, 0.3).unwrap();
    let (m1, c1) = theta_posterior(&h1, &adj, &spec, &prior).unwrap();
    let mid = Prior::dense(m1.iter().copied().collect(), c1, 0.7, 0.3).unwrap();
    let (m2, c2) = theta_posterior(&h2, &adj, &spec, &mid).unwrap();
    let (mf, cf) = theta_posterior(&full, &adj, &spec, &prior).unwrap();
    assert!((&m2 - &mf).amax() <= 1e-8 * mf.amax());
    assert!((&c2 - &cf).amax() <= 1e-8 * cf.amax());
}

#[test]
fn sample_theta_moments() {
    let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, -0.3, 0.1, -0.3, 0.5]);
    let mean = [1.0, -1.0, 0.5];
    let mut rng = SimRng::seed_from_u64(3);
    let draws = 100_000;
    let mut s1 = DVector::<f64>::zeros(3);
    let mut s2 = DMatrix::<f64>::zeros(3, 3);
    for _ in 0..draws {
        let x = DVector::from_vec(sample_theta(&mean, &cov, &mut rng).unwrap());
        s1 += &x;
        s2 += &x * x.transpose();
    }
    let m = s1 / draws as f64;
    let emp = s2 / draws as f64 - &m * m.transpose();
    assert!((emp - &cov).norm() / cov.norm() < 0.05);
    let a = sample_theta(&mean, &cov, &mut SimRng::seed_from_u64(4)).unwrap();
    let b = sample_theta(&mean, &cov, &mut SimRng::seed_from_u64(4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_covariance_draw_is_the_mean() {
    let mean = [0.5, -2.0];
    let x = sample_theta(&mean, &DMatrix::zeros(2, 2), &mut SimRng::seed_from_u64(5));
    // the jitter floor for an all-zero matrix is 1e-9 times unit scale
    let x = x.unwrap();
    assert!((x[0] - 0.5).abs() < 1e-3 && (x[1] + 2.0).abs() < 1e-3);
}

#[test]
fn edge_logit_prior_recovery() {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 3).unwrap();
    let prior = Prior::isotropic(3, 0.0, 10.0, 1.0, 0.3).unwrap();
    let l = edge_logit(0, 1, &Adjacency::empty(3), &[1.0, 1.0, 1.0], &History::new(3), &spec, &prior).unwrap();
    assert!((l - (0.3f64 / 0.7).ln()).abs() < 1e-15);
    assert!((l + 0.8473).abs() < 1e-4);
    assert!(edge_logit(1, 1, &Adjacency::empty(3), &[0.0; 3], &History::new(3), &spec, &prior).is_err());
}

#[test]
fn edge_logit_untreated_endpoints_cancel() {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 4).unwrap();
    let prior = Prior::isotropic(3, 0.0, 10.0, 0.5, 0.2).unwrap();
    let mut h = History::new(4);
    let mut rng = SimRng::seed_from_u64(6);
    for _ in 0..20 {
        let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        h.push(vec![false, false, true, rng.random_bool(0.5)], r).unwrap();
    }
    let adj = Adjacency::from_edges(4, &[(0, 2), (1, 3)]).unwrap();
    let l = edge_logit(0, 1, &adj, &[1.0, 0.5, 0.7], &h, &spec, &prior).unwrap();
    assert_eq!(l, prior.log_odds());
}

#[test]
fn edge_logit_hand_summed_quadratics() {
    // b = 1 predicts both endpoint streams exactly; b = 0 misses each by delta
    let spec = RewardSpec::new(RewardKind::PairedIndicator, 2).unwrap();
    let (mu, gamma, sigma2, rounds) = (0.0, 0.7, 0.25, 9);
    let prior = Prior::isotropic(2, 0.0, 10.0, sigma2, 0.3).unwrap();
    let mut h = History::new(2);
    for s in 0..rounds {
        let z = if s % 2 == 0 { vec![true, false] } else { vec![false, true] };
        // untreated endpoint sees exactly one treated neighbour under b = 1
        let r = if s % 2 == 0 { vec![mu, gamma] } else { vec![gamma, mu] };
        h.push(z, r).unwrap();
    }
    let l = edge_logit(0, 1, &Adjacency::empty(2), &[mu, gamma], &h, &spec, &prior).unwrap();
    let by_hand = prior.log_odds() + (rounds as f64) * gamma * gamma / (2.0 * sigma2);
    assert!((l - by_hand).abs() < 1e-12);
}

#[test]
fn edge_logit_is_endpoint_local() {
    let mut rng = SimRng::seed_from_u64(7);
    for kind in KINDS {
        let spec = RewardSpec::new(kind, 5).unwrap();
        let prior = Prior::isotropic(spec.dimension(), 0.0, 10.0, 0.5, 0.3).unwrap();
        let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.5 }, 5, &mut rng).unwrap();
        let theta = random_theta(&spec, &mut rng);
        let h = random_history(&spec, 15, &mut rng);
        let mut h2 = History::new(5);
        for round in h.rounds() {
            let mut r = round.r.clone();
            for v in &mut r[2..] {
                *v += rng.random_range(-5.0..5.0);
            }
            h2.push(round.z.clone(), r).unwrap();
        }
        let a = edge_logit(0, 1, &adj, &theta, &h, &spec, &prior).unwrap();
        let b = edge_logit(0, 1, &adj, &theta, &h2, &spec, &prior).unwrap();
        assert!((a - b).abs() < 1e-9, "{kind:?}");
    }
}

fn state_with(spec: RewardSpec, prior: Prior, adj: Adjacency, theta: Vec<f64>) -> PosteriorState {
    let mut s = PosteriorState::build(spec, prior, adj, 1, true);
    s.theta = theta;
    s
}

#[test]
fn compressed_logits_match_the_reference() {
    let mut rng = SimRng::seed_from_u64(8);
    for kind in KINDS {
        for _ in 0..5 {
            let spec = RewardSpec::new(kind, 6).unwrap();
            let prior = Prior::isotropic(spec.dimension(), 0.0, 10.0, 0.4, 0.3).unwrap();
            let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.4 }, 6, &mut rng).unwrap();
            let theta = random_theta(&spec, &mut rng);
            let h = random_history(&spec, 25, &mut rng);
            let mut state = state_with(spec, prior.clone(), adj, theta.clone());
            state.observe(&h).unwrap();
            // flip a few edges through the sampler so incremental aggregates move
            for _ in 0..3 {
                state.edge_pass(&mut rng);
            }
            let more = random_history(&spec, 10, &mut rng);
            let mut all = h.clone();
            for r in more.rounds() {
                all.push(r.z.clone(), r.r.clone()).unwrap();
            }
            state.observe(&all).unwrap();
            state.edge_pass(&mut rng);
            let adj_now = state.adj().clone();
            for i in 0..6 {
                for j in (i + 1)..6 {
                    let fast = state.edge_logit(i, j);
                    let slow = edge_logit(i, j, &adj_now, &theta, &all, &spec, &prior).unwrap();
                    assert!((fast - slow).abs() <= 1e-8 * slow.abs().max(1.0), "{kind:?} ({i},{j}): {fast} vs {slow}");
                }
            }
            assert_eq!(state.adj(), &adj_now);
        }
    }
}

#[test]
fn compressed_theta_draws_match_conjugate_moments() {
    let mut rng = SimRng::seed_from_u64(9);
    for kind in KINDS {
        let spec = RewardSpec::new(kind, 4).unwrap();
        let prior = Prior::isotropic(spec.dimension(), 0.2, 2.0, 0.5, 0.3).unwrap();
        let adj = generate_with(&GraphFamily::ErdosRenyi { p: 0.6 }, 4, &mut rng).unwrap();
        let h = random_history(&spec, 30, &mut rng);
        let (mean, cov) = theta_posterior(&h, &adj, &spec, &prior).unwrap();
        let mut state = PosteriorState::with_fixed_graph(spec, prior, adj).unwrap();
        state.observe(&h).unwrap();
        let draws = 6000;
        let d = spec.dimension();
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d];
        for _ in 0..draws {
            state.draw_theta(&mut rng).unwrap();
            for c in 0..d {
                s1[c] += state.theta()[c];
                s2[c] += state.theta()[c] * state.theta()[c];
            }
        }
        for c in 0..d {
            let m = s1[c] / draws as f64;
            let v = s2[c] / draws as f64 - m * m;
            let se = (cov[(c, c)] / draws as f64).sqrt();
            assert!((m - mean[c]).abs() < 5.0 * se, "{kind:?} mean[{c}]");
            assert!((v / cov[(c, c)] - 1.0).abs() < 0.12, "{kind:?} var[{c}]");
        }
    }
}

#[test]
fn dense_prior_draws_match_conjugate_moments() {
    let mut rng = SimRng::seed_from_u64(10);
    for kind in [RewardKind::CountBasedShared { d_max: 2 }, RewardKind::LinearInMeans] {
        let spec = RewardSpec::new(kind, 3).unwrap();
        let d = spec.dimension();
        let mut cov0 = DMatrix::<f64>::identity(d, d) * 2.0;
        for c in 1..d {
            cov0[(c, c - 1)] = 0.5;
            cov0[(c - 1, c)] = 0.5;
        }
        let prior = Prior::dense(vec![0.1; d], cov0, 0.5, 0.3).unwrap();
        let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let h = random_history(&spec, 20, &mut rng);
        let (mean, cov) = theta_posterior(&h, &adj, &spec, &prior).unwrap();
        let mut state = PosteriorState::with_fixed_graph(spec, prior, adj).unwrap();
        state.observe(&h).unwrap();
        let draws = 6000;
        let mut s1 = vec![0.0; d];
        for _ in 0..draws {
            state.draw_theta(&mut rng).unwrap();
            for c in 0..d {
                s1[c] += state.theta()[c];
            }
        }
        for c in 0..d {
            let se = (cov[(c, c)] / draws as f64).sqrt();
            assert!((s1[c] / draws as f64 - mean[c]).abs() < 5.0 * se, "{kind:?}");
        }
    }
}

#[test]
fn zero_variance_coordinates_stay_pinned() {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 4).unwrap();
    let truth = vec![1.0, 0.4, 0.9];
    let prior = Prior::diagonal(truth.clone(), vec![0.0; 3], 0.5, 0.3).unwrap();
    let mut rng = SimRng::seed_from_u64(11);
    let h = random_history(&spec, 10, &mut rng);
    let mut state = PosteriorState::with_fixed_graph(spec, prior, Adjacency::complete(4)).unwrap();
    state.step(&h, &mut rng).unwrap();
    assert_eq!(state.theta(), &truth[..]);
}

#[test]
fn empty_history_chain_samples_the_prior() {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 4).unwrap();
    let prior = Prior::isotropic(3, 1.0, 4.0, 0.5, 0.3).unwrap();
    let mut rng = SimRng::seed_from_u64(12);
    let mut state = PosteriorState::new(spec, prior, 1, &mut rng).unwrap();
    let h = History::new(4);
    let sweeps = 10_000;
    let marg = state.edge_marginals(&h, sweeps, &mut rng).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            assert!((marg[(i, j)] - 0.3).abs() < 0.02);
        }
    }
    let mut s = 0.0;
    for _ in 0..sweeps {
        state.step(&h, &mut rng).unwrap();
        s += state.theta()[0];
    }
    assert!((s / sweeps as f64 - 1.0).abs() < 0.1);
}

#[test]
fn zero_sweeps_leave_the_state_unchanged() {
    let spec = RewardSpec::new(RewardKind::PairwiseNia, 4).unwrap();
    let prior = Prior::isotropic(spec.dimension(), 0.0, 10.0, 0.25, 0.3).unwrap();
    let mut rng = SimRng::seed_from_u64(13);
    let mut state = PosteriorState::new(spec, prior, 0, &mut rng).unwrap();
    let (theta, adj) = (state.theta().to_vec(), state.adj().clone());
    let h = random_history(&spec, 5, &mut rng);
    gibbs_sweep(&mut state, &h, &mut rng).unwrap();
    assert_eq!(state.theta(), &theta[..]);
    assert_eq!(state.adj(), &adj);
}

#[test]
fn sweeps_keep_the_graph_valid_and_are_deterministic() {
    let spec = RewardSpec::new(RewardKind::PairwiseNia, 5).unwrap();
    let prior = Prior::isotropic(spec.dimension(), 0.0, 10.0, 0.25, 0.3).unwrap();
    let h = random_history(&spec, 20, &mut SimRng::seed_from_u64(14));
    let run = |order| {
        let mut rng = SimRng::seed_from_u64(15);
        let mut state = PosteriorState::new(spec, prior.clone(), 3, &mut rng).unwrap();
        state.set_edge_order(order);
        state.step(&h, &mut rng).unwrap();
        assert!(state.adj().is_valid());
        (state.theta().to_vec(), state.adj().clone())
    };
    assert_eq!(run(EdgeOrder::Lexicographic), run(EdgeOrder::Lexicographic));
    assert_eq!(run(EdgeOrder::RandomScan), run(EdgeOrder::RandomScan));
}

#[test]
fn oracle_prior_and_normalisation() {
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 4).unwrap();
    let prior = Prior::isotropic(3, 0.0, 10.0, 0.25, 0.3).unwrap();
    let m = exact_edge_marginals(&History::new(4), &spec, &prior).unwrap();
    for i in 0..4 {
        for j in (i + 1)..4 {
            assert!((m[(i, j)] - 0.3).abs() < 1e-12);
        }
    }
    let h = random_history(&spec, 8, &mut SimRng::seed_from_u64(16));
    let total: f64 = graph_posterior(&h, &spec, &prior).unwrap().iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-10);
    let big = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 7).unwrap();
    assert!(exact_edge_marginals(&History::new(7), &big, &prior).is_err());
}

#[test]
fn oracle_detects_a_sharp_edge() {
    let spec = RewardSpec::new(RewardKind::PairedIndicator, 2).unwrap();
    let prior = Prior::isotropic(2, 0.0, 10.0, 1e-4, 0.3).unwrap();
    let mut h = History::new(2);
    h.push(vec![true, false], vec![0.0, 1.0]).unwrap();
    let m = exact_edge_marginals(&h, &spec, &prior).unwrap();
    assert!(m[(0, 1)] > 0.999);
    // two-node case by hand, at a noise level where both weights are representable:
    // A = 0 explains r_1 = 1 as pure noise, A = 1 as gamma plus noise
    let s2 = 0.2;
    let prior = Prior::isotropic(2, 0.0, 10.0, s2, 0.3).unwrap();
    let post = graph_posterior(&h, &spec, &prior).unwrap();
    let ratio = (post[1].1 / post[0].1).ln();
    let by_hand = (0.3f64 / 0.7).ln() + 0.5 * (1.0 / s2 - 1.0 / (10.0 + s2)) - 0.5 * ((10.0 + s2) / s2).ln();
    assert!((ratio - by_hand).abs() < 1e-6 * by_hand.abs());
}

#[test]
fn chain_matches_the_oracle_on_a_small_instance() {
    let mut rng = SimRng::seed_from_u64(17);
    let spec = RewardSpec::new(RewardKind::CountBasedShared { d_max: 2 }, 3).unwrap();
    let truth = Adjacency::from_edges(3, &[(0, 1)]).unwrap();
    let theta = [1.0, 0.8, 1.2];
    let mut h = History::new(3);
    for _ in 0..6 {
        let z: Vec<bool> = (0..3).map(|_| rng.random_bool(0.5)).collect();
        let mut r = spec.expected_rewards(&theta, &truth, &z).unwrap();
        for v in &mut r {
            *v += 0.8 * rng.random_range(-1.0..1.0);
        }
        h.push(z, r).unwrap();
    }
    let prior = Prior::isotropic(3, 0.0, 10.0, 0.25, 0.3).unwrap();
    let exact = exact_edge_marginals(&h, &spec, &prior).unwrap();
    let mut state = PosteriorState::new(spec, prior, 1, &mut rng).unwrap();
    for _ in 0..300 {
        state.step(&h, &mut rng).unwrap();
    }
    let mc = state.edge_marginals(&h, 8000, &mut rng).unwrap();
    assert!((exact - mc).amax() < 0.05);
}
