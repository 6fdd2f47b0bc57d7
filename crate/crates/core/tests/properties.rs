mod common;

use common::*;
use dstab_core::blockmat::{
    block_permutation, schur_complement, submatrix, BlockPermutation, BlockScaling,
    OrderedIndexSet, PartitionedMatrix,
};
use dstab_core::dstab::{self, VerdictStatus};
use dstab_core::lyap::{self, NormKind};
use dstab_core::scalingseq::{decompose, verify_reconstruction, ScalingFamily};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let r = gaussian(rng, n, n);
    &r * r.transpose() + DMatrix::identity(n, n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn lyapunov_residual_small(seed in any::<u64>(), n in 1usize..=8, margin in 0.05f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = hurwitz(&mut rng, n, margin);
        let q = spd(&mut rng, n);
        let sol = lyap::solve_lyapunov(&a, &q).unwrap();
        prop_assert!(sol.residual_norm <= 1e-8 * q.norm());
        prop_assert!((&sol.p - sol.p.transpose()).amax() == 0.0);
        prop_assert!(lyap::lambda_min_sym(&sol.p) > 0.0);
    }

    #[test]
    fn schur_determinant_identity(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_partition(&mut rng, n);
        prop_assume!(p.n_blocks() >= 2);
        let m = gaussian(&mut rng, n, n) + DMatrix::identity(n, n) * 3.0;
        let a = partitioned(m.clone(), p.clone());
        let k = rng.random_range(1..p.n_blocks());
        let mut blocks: Vec<usize> = (0..p.n_blocks()).collect();
        blocks.shuffle(&mut rng);
        let alpha = OrderedIndexSet::new(blocks[..k].to_vec(), p.n_blocks()).unwrap();
        let aa = submatrix(&a, &alpha, &alpha).unwrap();
        prop_assume!(dstab_core::blockmat::condition_estimate(aa.data()) < 1e8);
        let s = schur_complement(&a, &alpha).unwrap();
        let lhs = m.determinant();
        let rhs = aa.data().determinant() * s.data().determinant();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn product_norm_is_scale_invariant(seed in any::<u64>(), n in 2usize..=6, c in -6f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_partition(&mut rng, n);
        let a = partitioned(symmetric_part_negative(&mut rng, n), p.clone());
        let d: Vec<f64> = (0..p.n_blocks()).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let d = BlockScaling::new(d).unwrap();
        let q = DMatrix::identity(n, n);
        for norm in [NormKind::Spectral, NormKind::One] {
            let base = lyap::scaled_product_norm(&a, &d, &q, norm, 1e-9).unwrap();
            let scaled = lyap::scaled_product_norm(&a, &d.scaled(10f64.powf(c)).unwrap(), &q, norm, 1e-9).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-10 * base.max(1.0) * 10.0, "{} vs {}", base, scaled);
        }
    }

    #[test]
    fn sampling_verdict_is_permutation_invariant(seed in any::<u64>(), nb in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = nb;
        let m = hurwitz(&mut rng, n, 0.2);
        let a = PartitionedMatrix::scalar_blocks(m).unwrap();
        let mut order: Vec<usize> = (0..nb).collect();
        order.shuffle(&mut rng);
        let perm = BlockPermutation::new(order).unwrap();
        let s = block_permutation(a.partition(), &perm).unwrap();
        let b = a.with_data(&s * a.data() * s.transpose()).unwrap();
        let va = dstab::sample_dstability(&a, 300, 5, 1e-9);
        let vb = dstab::sample_dstability(&b, 300, 5, 1e-9);
        // a witness for one labeling is a witness for the other after relabeling
        if let Some(w) = &va.witness {
            let wp = w.permuted(&perm);
            prop_assert!(!lyap::is_hurwitz_scaled(&b, &wp, 1e-9).unwrap());
        }
        if let Some(w) = &vb.witness {
            let wp = w.permuted(&perm.inverse());
            prop_assert!(!lyap::is_hurwitz_scaled(&a, &wp, 1e-9).unwrap());
        }
        for d in dstab::sample_set(nb, 60, 3) {
            prop_assert_eq!(
                lyap::is_hurwitz_scaled(&a, &d, 1e-9).unwrap(),
                lyap::is_hurwitz_scaled(&b, &d.permuted(&perm), 1e-9).unwrap()
            );
        }
    }

    #[test]
    fn sufficient_conditions_are_sound(seed in any::<u64>(), n in 1usize..=5, kind in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = match kind {
            0 => symmetric_part_negative(&mut rng, n),
            1 => {
                let off = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.0..1.0) });
                let a = lyap::spectral_abscissa(&off).unwrap().abscissa;
                off - DMatrix::identity(n, n) * (a + 0.1)
            }
            _ => {
                let mut g = gaussian(&mut rng, n, n);
                for i in 0..n {
                    let row: f64 = (0..n).filter(|&j| j != i).map(|j| g[(i, j)].abs()).sum();
                    g[(i, i)] = -(row + rng.random_range(0.01..1.0));
                }
                g
            }
        };
        let a = PartitionedMatrix::scalar_blocks(m).unwrap();
        prop_assert!(!dstab::sufficient_conditions(&a).is_empty());
        let (v, _) = dstab::analyze(&a, 400, seed, 1e-9).unwrap();
        prop_assert_eq!(v.status, VerdictStatus::CertifiedSufficient);
    }

    #[test]
    fn reconstruction_under_relabeling(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2i32..=2) as f64).collect();
        let f = ScalingFamily::new(a, b).unwrap();
        let sizes: Vec<usize> = (0..n).map(|_| rng.random_range(1..=3)).collect();
        let part = dstab_core::blockmat::Partition::new(sizes).unwrap();
        let dec = decompose(&f);
        prop_assert!(verify_reconstruction(&f, &dec, &[1.0, 10.0, 1000.0, 1e6], &part).unwrap() <= 1e-12);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let perm = BlockPermutation::new(order).unwrap();
        let g = f.relabeled(&perm);
        let dg = decompose(&g);
        prop_assert!(verify_reconstruction(&g, &dg, &[1.0, 10.0, 1000.0], &part).unwrap() <= 1e-12);
        // groups map through the relabeling as sets
        prop_assert_eq!(dec.n_groups(), dg.n_groups());
        let inv = perm.inverse();
        for (ga, gb) in dec.groups().iter().zip(dg.groups()) {
            let mut mapped: Vec<usize> = ga.iter().map(|&i| inv.as_slice()[i]).collect();
            mapped.sort();
            let mut gb = gb.clone();
            gb.sort();
            prop_assert_eq!(mapped, gb);
        }
    }
}

#[test]
fn inheritance_on_symmetric_part_negative_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let probe = dstab::ProbeConfig {
        directions: 4,
        steps: 20,
        sample_budget: 150,
        ..Default::default()
    };
    for _ in 0..25 {
        let n = rng.random_range(2..=5);
        let p = random_partition(&mut rng, n);
        if p.n_blocks() < 2 {
            continue;
        }
        let a = partitioned(symmetric_part_negative(&mut rng, n), p.clone());
        let k = rng.random_range(1..p.n_blocks());
        let mut blocks: Vec<usize> = (0..p.n_blocks()).collect();
        blocks.shuffle(&mut rng);
        let alpha = OrderedIndexSet::new(blocks[..k].to_vec(), p.n_blocks()).unwrap();
        let r = dstab::inheritance_check(&a, &alpha, 150, 1, &probe).unwrap();
        assert!(!r.principal.falsified());
        assert!(!r.schur.unwrap().falsified());
    }
}
