//! The simulator checked against a brute-force Monte Carlo written
//! separately: its own RNG, Box–Muller normals and straight-line pooling.

use metaparadox::simulate::{simulate_replicate, simulate_scenario, sweep_grid, SimulationScenario};
use metaparadox::{Classification, ModelKind, Probability};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const Z975: f64 = 1.959_963_984_540_054;

struct Oracle {
    accepted: u64,
    paradoxes: u64,
}

fn box_muller(rng: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn brute_force(mu: f64, tau2: f64, v: &[f64], random_effects: bool, want: u64, seed: u64) -> Oracle {
    let mut rng = StdRng::seed_from_u64(seed);
    let k = v.len();
    let mut y = vec![0.0; k];
    let (mut accepted, mut paradoxes) = (0u64, 0u64);
    while accepted < want {
        for i in 0..k {
            let theta = mu + tau2.sqrt() * box_muller(&mut rng);
            y[i] = theta + v[i].sqrt() * box_muller(&mut rng);
        }
        let all_pos = (0..k).all(|i| y[i] - Z975 * v[i].sqrt() > 0.0);
        let all_neg = (0..k).all(|i| y[i] + Z975 * v[i].sqrt() < 0.0);
        if !(all_pos || all_neg) {
            continue;
        }
        accepted += 1;
        let mut sw = 0.0;
        let mut swy = 0.0;
        let mut sw2 = 0.0;
        for i in 0..k {
            sw += 1.0 / v[i];
            swy += y[i] / v[i];
            sw2 += 1.0 / (v[i] * v[i]);
        }
        let fe = swy / sw;
        let mut q = 0.0;
        for i in 0..k {
            q += (y[i] - fe) * (y[i] - fe) / v[i];
        }
        let mut t2 = 0.0;
        if random_effects && q > (k - 1) as f64 {
            t2 = (q - (k - 1) as f64) / (sw - sw2 / sw);
        }
        let mut rw = 0.0;
        let mut rwy = 0.0;
        for i in 0..k {
            rw += 1.0 / (v[i] + t2);
            rwy += y[i] / (v[i] + t2);
        }
        let est = rwy / rw;
        let se = 1.0 / rw.sqrt();
        if est - Z975 * se <= 0.0 && est + Z975 * se >= 0.0 {
            paradoxes += 1;
        }
    }
    Oracle { accepted, paradoxes }
}

fn scenario(k: usize, mu: f64, tau2: f64, v: Vec<f64>, model: ModelKind, n: u64) -> SimulationScenario {
    SimulationScenario {
        k,
        mu,
        tau2,
        variances: v,
        alpha: Probability::new(0.05).unwrap(),
        model,
        n_target: n,
        max_draws: 100_000_000,
        seed: 7,
    }
}

#[test]
fn matches_brute_force_on_fitted_two_study_scenario() {
    let v = vec![0.0176, 0.0891];
    let oracle = brute_force(1.1, 0.8, &v, true, 1_000_000, 99);
    let p_oracle = oracle.paradoxes as f64 / oracle.accepted as f64;
    assert!(p_oracle > 0.0);

    let r = simulate_scenario(&scenario(2, 1.1, 0.8, v, ModelKind::RandomEffects, 100_000)).unwrap();
    assert!(r.p_hat.get() > 0.0);
    let sd = (p_oracle * (1.0 - p_oracle) / r.accepted as f64).sqrt();
    assert!(
        (r.p_hat.get() - p_oracle).abs() < 5.0 * sd,
        "simulator {} vs oracle {p_oracle}",
        r.p_hat.get()
    );
    assert!(r.wilson_ci.lo <= p_oracle && p_oracle <= r.wilson_ci.hi || (r.p_hat.get() - p_oracle).abs() < 5.0 * sd);
}

#[test]
fn ten_studies_paradox_rarer_than_two() {
    let two = simulate_scenario(&scenario(2, 1.1, 0.8, vec![0.0176, 0.0891], ModelKind::RandomEffects, 20_000)).unwrap();
    let ten = simulate_scenario(&scenario(10, 1.1, 0.8, vec![0.05; 10], ModelKind::RandomEffects, 20_000)).unwrap();
    assert!(ten.p_hat.get() < two.p_hat.get());
    assert!(ten.wilson_ci.hi < two.wilson_ci.lo);

    let oracle = brute_force(1.1, 0.8, &[0.05; 10], true, 20_000, 5);
    let p = oracle.paradoxes as f64 / oracle.accepted as f64;
    assert!(p < two.p_hat.get());
}

#[test]
fn fixed_effect_scenarios_have_zero_paradoxes() {
    let r = simulate_scenario(&scenario(2, 1.0, 0.0, vec![0.01, 0.01], ModelKind::FixedEffect, 20_000)).unwrap();
    assert_eq!(r.paradoxes, 0);
    let r = simulate_scenario(&scenario(3, 0.5, 4.0, vec![0.05, 0.2, 1.0], ModelKind::FixedEffect, 20_000)).unwrap();
    assert_eq!(r.paradoxes, 0);
    assert_eq!(brute_force(0.5, 4.0, &[0.05, 0.2, 1.0], false, 20_000, 3).paradoxes, 0);
}

#[test]
fn accepted_replicates_are_unanimous() {
    let s = scenario(3, 0.8, 1.0, vec![0.05, 0.1, 0.2], ModelKind::RandomEffects, 1);
    let mut seen = 0;
    for i in 0..3000 {
        if let Some(v) = simulate_replicate(&s, i).unwrap() {
            seen += 1;
            assert_ne!(v.classification, Classification::NotUnanimous);
            let first = v.study_directions[0];
            assert!(first.is_significant());
            assert!(v.study_directions.iter().all(|d| *d == first));
        }
    }
    assert!(seen > 100);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = scenario(3, 1.0, 1.0, vec![0.05, 0.05, 0.05], ModelKind::RandomEffects, 30_000);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_scenario(&s).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
    assert_eq!(one, simulate_scenario(&s).unwrap());
}

#[test]
fn sweep_shape_and_fixed_effect_column() {
    let base = scenario(2, 1.0, 0.0, vec![0.05], ModelKind::FixedEffect, 500);
    let base = SimulationScenario { variances: vec![0.05], k: 1, ..base };
    let ks = [2usize, 3, 5, 10];
    let taus = [0.0, 0.25, 1.0, 4.0];
    let t = sweep_grid(&base, &ks, &taus).unwrap();
    assert_eq!(t.cells.len(), 16);
    for (i, c) in t.cells.iter().enumerate() {
        assert_eq!((c.k, c.tau2), (ks[i / 4], taus[i % 4]));
        let r = c.result.as_ref().expect("cell ran");
        assert_eq!(r.paradoxes, 0);
        assert!(r.wilson_ci.lo >= 0.0 && r.wilson_ci.hi <= 1.0);
    }
    let csv = t.to_csv();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("k,tau2,accepted,paradoxes,p_hat,wilson_lo,wilson_hi,draws_used"));
}
