use phi4lab::grid::{apply_q, heat_step, helmholtz_solve};
use phi4lab::lp::{besov_norm, interpolation_sides};
use phi4lab::para::{para_ge, para_gt, para_lt, para_res, spatial_slices, Localizer, SpaceTimeLocalizer};
use phi4lab::solvers::step_parabolic;
use phi4lab::stochastic::{prolong, sample_x_elliptic, wick_powers, Cutoff, NoiseSpec};
use phi4lab::{DyadicPartition, Field, TorusGrid, Weight};
use proptest::prelude::*;

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().sup_norm() / b.sup_norm().max(1e-300)
}

/// A grid in d = 2 or 3 with N = 8 or 16 (the smallest that carries a partition), and values on it.
fn field() -> impl Strategy<Value = Field> {
    (2usize..=3, prop_oneof![Just(8usize), Just(16)], 0.5f64..10.0).prop_flat_map(|(d, n, m)| {
        let g = TorusGrid::new(d, m, n).unwrap();
        prop::collection::vec(-10.0f64..10.0, g.len()).prop_map(move |v| Field::from_vec(&g, v).unwrap())
    })
}

fn pair() -> impl Strategy<Value = (Field, Field)> {
    field().prop_flat_map(|f| {
        let g = f.grid().clone();
        let n = g.len();
        (Just(f), prop::collection::vec(-10.0f64..10.0, n).prop_map(move |v| Field::from_vec(&g, v).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_round_trip(f in field()) {
        prop_assert!(rel(&f.fft().ifft(), &f) < 1e-12);
        prop_assert!(f.fft().hermitian_defect() < 1e-12);
    }

    #[test]
    fn parseval(f in field()) {
        let g = f.grid();
        let lhs = g.cell_volume() * f.values().iter().map(|v| v * v).sum::<f64>();
        let rhs = f.fft().coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() / g.volume();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
    }

    #[test]
    fn blocks_resolve_identity(f in field()) {
        let p = DyadicPartition::new(f.grid()).unwrap();
        let sum = p.decompose(&f).unwrap().into_iter().fold(Field::zeros(f.grid()), |a, b| a.add(&b).unwrap());
        prop_assert!(rel(&sum, &f) < 1e-11);
    }

    #[test]
    fn paraproducts_split_product((f, g) in pair()) {
        let p = DyadicPartition::new(f.grid()).unwrap();
        let split = para_lt(&p, &f, &g).unwrap().add(&para_res(&p, &f, &g).unwrap()).unwrap().add(&para_gt(&p, &f, &g).unwrap()).unwrap();
        prop_assert!(rel(&split, &f.mul(&g).unwrap()) < 1e-11);
        let ge = para_ge(&p, &f, &g).unwrap();
        let lt_res = para_gt(&p, &f, &g).unwrap().add(&para_res(&p, &f, &g).unwrap()).unwrap();
        prop_assert!(rel(&ge, &lt_res) < 1e-11);
    }

    #[test]
    fn localizers_split_identity(f in field(), base in 0.0f64..6.0, nu in 0.0f64..3.0, t in 0.0f64..1.0) {
        let p = DyadicPartition::new(f.grid()).unwrap();
        let w = Weight::PolySpace(nu);
        let loc = Localizer::new(&p, &w, base).unwrap();
        prop_assert!(rel(&loc.above(&f).unwrap().add(&loc.below(&f).unwrap()).unwrap(), &f) < 1e-11);
        let st = SpaceTimeLocalizer::new(&p, &w, 1.0, base).unwrap();
        prop_assert!(rel(&st.above_at(&f, t).unwrap().add(&st.below_at(&f, t).unwrap()).unwrap(), &f) < 1e-11);
    }

    #[test]
    fn interpolation_constant_is_one(f in field(), alpha in 0.01f64..2.0, kappa in 0.01f64..1.0, nu in 0.0f64..2.0) {
        let (l, r) = interpolation_sides(&f, &Weight::PolySpace(nu), alpha, kappa);
        prop_assert!(l <= r * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn heat_is_a_contracting_semigroup(f in field(), s in 0.0f64..0.5, t in 0.0f64..0.5, mu in 0.1f64..3.0) {
        let two = heat_step(&heat_step(&f, s, mu).unwrap(), t, mu).unwrap();
        let one = heat_step(&f, s + t, mu).unwrap();
        prop_assert!(rel(&two, &one) < 1e-11);
        // Contraction holds in L^2 for every input; the sup norm needs a positive kernel.
        prop_assert!(one.ell2() <= f.ell2() * (1.0 + 1e-12));
    }

    #[test]
    fn helmholtz_inverts_q(f in field(), mu in 0.1f64..5.0) {
        prop_assert!(rel(&helmholtz_solve(&apply_q(&f, mu), mu).unwrap(), &f) < 1e-10);
    }

    #[test]
    fn weighted_norm_is_monotone_in_alpha(f in field(), a in -2.0f64..2.0, gap in 0.0f64..1.0) {
        let p = DyadicPartition::new(f.grid()).unwrap();
        let w = Weight::PolySpace(1.0);
        let lo = besov_norm(&p, &f, a, &w, 0.0).unwrap();
        let hi = besov_norm(&p, &f, a + gap, &w, 0.0).unwrap();
        // Level -1 carries the weight 2^{-alpha}, so the comparison starts at 2^{-gap}.
        prop_assert!(lo * f64::powf(2.0, -gap) <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn exponential_euler_is_exact_for_constants(c0 in -5.0f64..5.0, c in -5.0f64..5.0, dt in 1e-4f64..0.5, mu in 0.1f64..3.0) {
        let g = TorusGrid::new(2, 1.0, 4).unwrap();
        let y = step_parabolic(&Field::constant(&g, c0), &Field::constant(&g, c), dt, mu).unwrap();
        let e = (-mu * dt).exp();
        let exact = e * c0 + (1.0 - e) * c / mu;
        prop_assert!((y.values()[0] - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }

    #[test]
    fn raw_wick_powers_are_powers(f in field()) {
        let (x2, x3) = wick_powers(&f, 0.0);
        prop_assert!(rel(&x2, &f.mul(&f).unwrap()) < 1e-15);
        prop_assert!(rel(&x3, &f.mul(&f).unwrap().mul(&f).unwrap()) < 1e-15);
    }

    #[test]
    fn coupled_fields_agree_after_prolongation(seed in 0u64..1000) {
        let coarse = TorusGrid::new(2, 5.0, 8).unwrap();
        let fine = TorusGrid::new(2, 5.0, 16).unwrap();
        let xc = sample_x_elliptic(&NoiseSpec::spatial(seed, &coarse), 1.0, Cutoff::ball(&coarse)).unwrap();
        let xf = sample_x_elliptic(&NoiseSpec::spatial(seed, &fine), 1.0, Cutoff::ball(&fine)).unwrap();
        let low = xf.fft().multiply(&Cutoff::ball(&coarse).mask(&fine)).ifft();
        prop_assert!(rel(&prolong(&xc, &fine).unwrap(), &low) < 1e-12);
    }
}

#[test]
fn spatial_slices_partition_unity() {
    for (d, n) in [(2, 32), (3, 16)] {
        let g = TorusGrid::new(d, 20.0, n).unwrap();
        let s = spatial_slices(&g);
        let sum = s.iter().fold(Field::zeros(&g), |a, b| a.add(b).unwrap());
        assert!(rel(&sum, &Field::constant(&g, 1.0)) < 1e-14);
        assert!(s.iter().all(|w| w.values().iter().all(|&v| v >= -1e-15)));
    }
}

#[test]
fn localizer_with_constant_weight_is_a_frequency_cut() {
    let g = TorusGrid::new(2, 6.0, 32).unwrap();
    let p = DyadicPartition::new(&g).unwrap();
    let f = sample_x_elliptic(&NoiseSpec::spatial(4, &g), 0.5, Cutoff::full()).unwrap();
    for base in [0.0, 1.0, 3.0] {
        let loc = Localizer::new(&p, &Weight::Constant, base).unwrap();
        // Slices peak just below 1 on the lattice, so every threshold rounds down to the base.
        assert!(loc.offsets().iter().all(|&c| (0.0..1.0).contains(&c)));
        assert!(rel(&loc.above(&f).unwrap(), &p.above(&f, base).unwrap()) < 1e-12);
    }
}
