use isingpf::solvers::solve_exhaustive;
use isingpf::{solve_sa, SaConfig, SpinPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_quartic(rng: &mut ChaCha8Rng, n: usize) -> SpinPolynomial {
    let mut p = SpinPolynomial::zero(n);
    for _ in 0..4 * n {
        let degree = rng.gen_range(1..=4);
        let vars: Vec<usize> = (0..degree).map(|_| rng.gen_range(0..n)).collect();
        p.add_term(vars, rng.gen_range(-1.0..1.0));
    }
    p
}

#[test]
fn annealer_finds_ground_state_almost_always() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut hits = 0;
    for seed in 0..100 {
        let p = random_quartic(&mut rng, 10);
        let exact = solve_exhaustive(&p).unwrap().energy;
        let sa = solve_sa(
            &p,
            &SaConfig {
                seed,
                ..SaConfig::default()
            },
        )
        .unwrap()
        .energy;
        assert!(sa >= exact - 1e-12);
        if (sa - exact).abs() <= 1e-12 * (1.0 + exact.abs()) {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits}/100");
}
