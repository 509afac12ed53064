mod common;

use common::*;
use proptest::prelude::*;
use sslib::{hinf_norm, linalg};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hinf_submultiplicative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g1 = random_stable(&mut rng, 3, 2, 2, 0.1);
        let g2 = random_stable(&mut rng, 2, 2, 2, 0.1);
        let n12 = hinf_norm(&g1.mul(&g2).unwrap(), 1e-8).unwrap();
        let n1 = hinf_norm(&g1, 1e-8).unwrap();
        let n2 = hinf_norm(&g2, 1e-8).unwrap();
        prop_assert!(n12 <= n1 * n2 * (1.0 + 1e-6));
    }

    #[test]
    fn hinf_bounds_grid(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_stable(&mut rng, 4, 2, 2, 0.1);
        let h = hinf_norm(&g, 1e-8).unwrap();
        prop_assert!(grid_norm(&g) <= h * (1.0 + 1e-6));
    }

    #[test]
    fn lyapunov_gramian_psd(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_stable(&mut rng, 5, 2, 2, 0.1);
        let p = linalg::lyapunov(&g.a, &(&g.b * g.b.transpose())).unwrap();
        prop_assert!(linalg::min_sym_eig(&p) >= -1e-9 * (1.0 + p.norm()));
    }

    #[test]
    fn coprime_factors_stable(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut p = random_stable(&mut rng, 4, 2, 2, 0.1);
        p.a[(0, 0)] += 2.0;
        let f = sslib::left_coprime_factorize(&p).unwrap();
        prop_assert!(f.m.spectral_abscissa().unwrap() < -1e-9);
        prop_assert!(f.n.spectral_abscissa().unwrap() < -1e-9);
    }
}
