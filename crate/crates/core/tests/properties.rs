use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wipt::beamformer::{g_eh, joint_beamform, steer, JointParams, Variant};
use wipt::channel::{isotropic_unit, rayleigh_matrix};
use wipt::harness::{ResultRow, ResultTable};
use wipt::metrics::sinr_all;
use wipt::numerics::{angle, gram, hermitian_eig, inner, row, row_dot};
use wipt::scheduler::{sus_select, zf_beamformers};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn energy_splits_over_ellipsoid_axes(seed: u64, m in 2usize..7, k in 1usize..9) {
        let mut r = rng(seed);
        let g = rayleigh_matrix(&mut r, k, m);
        let w = isotropic_unit(&mut r, m);
        let eig = hermitian_eig(&gram(&g)).unwrap();
        let by_axes: f64 = (0..eig.dim())
            .map(|i| eig.eigenvalues[i] * inner(&eig.axis(i), &w).norm_sqr())
            .sum();
        let direct = g_eh(&g, &w);
        prop_assert!((by_axes - direct).abs() <= 1e-10 * (1.0 + direct));
        prop_assert!(direct <= eig.lambda_max() * (1.0 + 1e-12));
    }

    #[test]
    fn steering_stays_on_unit_sphere(seed: u64, m in 2usize..7, theta in 0.0f64..3.2) {
        let mut r = rng(seed);
        let base = isotropic_unit(&mut r, m);
        let target = isotropic_unit(&mut r, m);
        let out = steer(&base, &target, theta);
        let cap = angle(&base, &target);
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
        prop_assert!((angle(&base, &out) - theta.min(cap)).abs() <= 1e-7);
    }

    #[test]
    fn selected_users_are_semi_orthogonal(seed: u64, k_id in 1usize..60, eps in 0.05f64..0.95) {
        let mut r = rng(seed);
        let h = rayleigh_matrix(&mut r, k_id, 4);
        let sel = sus_select(&h, eps, 4);
        prop_assert!(!sel.is_empty() && sel.len() <= 4);
        for (a, &i) in sel.indices.iter().enumerate() {
            for &j in &sel.indices[a + 1..] {
                let (hi, hj) = (row(&h, i), row(&h, j));
                prop_assert!(inner(&hi, &hj).norm() / (hi.norm() * hj.norm()) <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn joint_beams_meet_targets(seed: u64, s in 1usize..5, k_eh in 1usize..12, mu in 0.05f64..1.0, rho in 0.1f64..100.0) {
        let mut r = rng(seed);
        let h_s = rayleigh_matrix(&mut r, s, 4);
        let g = rayleigh_matrix(&mut r, k_eh, 4);
        let params = JointParams { rho, mu, delta_d: 2f64.to_radians(), variant: Variant::Full };
        let jb = joint_beamform(&h_s, &g, &params).unwrap();
        let zf = zf_beamformers(&h_s, rho).unwrap();
        let sinr = sinr_all(&h_s, &jb.w, rho);
        for (i, (&got, &target)) in sinr.iter().zip(&jb.gamma).enumerate() {
            prop_assert!((jb.beam(i).norm() - 1.0).abs() <= 1e-9);
            prop_assert!(got >= target * (1.0 - 1e-9));
            for j in 0..s {
                if i != j {
                    prop_assert!(row_dot(&row(&h_s, i), &zf.w.column(j).into_owned()).norm() <= 1e-9 * row(&h_s, i).norm());
                }
            }
        }
        prop_assert!(jb.eh_trace.windows(2).all(|p| p[1] >= p[0] - 1e-9));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(
        ("[a-z0-9_]{1,12}", "[a-z_]{1,6}", -1e6f64..1e6, 0usize..100_000, "[a-z_,\" ]{1,16}", any::<f64>(), 0.0f64..1e3),
        0..20,
    )) {
        let table = ResultTable {
            rows: rows
                .into_iter()
                .map(|(scenario, sweep_name, sweep_value, trials, metric, mean, stderr)| ResultRow {
                    scenario,
                    sweep_name,
                    sweep_value,
                    trials,
                    metric,
                    mean: if mean.is_nan() { 0.0 } else { mean },
                    stderr,
                })
                .collect(),
        };
        let parsed = ResultTable::parse_csv(&table.to_csv_string()).unwrap();
        prop_assert_eq!(parsed, table.rounded());
    }
}
