//! Randomized properties of the public API.

use proptest::prelude::*;
use sketchgrad::bitpack::{bits_for, pack, unpack};
use sketchgrad::casq::{cas_compress, cas_decompress, cas_merge, CasConfig, CasWindow};
use sketchgrad::sparse::topk_delta_check;
use sketchgrad::{BlockPartition, GradientVector};

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    len.prop_flat_map(|n| prop::collection::vec(-100.0f64..100.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_unpack_round_trips(values in prop::collection::vec(0u32..1000, 0..200), extra in 0u32..5) {
        let width = bits_for(1000) + extra;
        let bytes = pack(&values, width).unwrap();
        prop_assert_eq!(unpack(&bytes, width, values.len()).unwrap(), values);
    }

    #[test]
    fn topk_keeps_at_least_its_share(v in vector(8..200), b in 1usize..8, k_frac in 0.0f64..1.0) {
        let b = b.min(v.len());
        prop_assume!(BlockPartition::new(v.len(), b).is_ok());
        let k = 1 + ((b - 1) as f64 * k_frac) as usize;
        let g = GradientVector::new(v).unwrap();
        prop_assume!(g.l2_norm_sq() > 0.0);
        let e = topk_delta_check(&g, b, k).unwrap();
        prop_assert!(e.holds());
        prop_assert!(e.ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn casq_compression_never_adds_energy(v in vector(16..300), seed in any::<u64>()) {
        let g = GradientVector::new(v).unwrap();
        let window = CasWindow::build(&CasConfig::new(4, 8, seed), 0, &g).unwrap();
        let est = cas_decompress(&cas_compress(&g, &window, &window.assign(&g)).unwrap()).unwrap();
        prop_assert!(est.l2_norm_sq() <= g.l2_norm_sq() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn casq_merge_is_order_free(a in vector(40..41), b in vector(40..41), c in vector(40..41)) {
        let gs: Vec<GradientVector> = [a, b, c].into_iter().map(|v| GradientVector::new(v).unwrap()).collect();
        let window = CasWindow::build(&CasConfig::new(2, 8, 1), 0, &gs[0]).unwrap();
        let ps: Vec<_> = gs.iter().map(|g| cas_compress(g, &window, &window.assign(g)).unwrap()).collect();
        let fwd = cas_decompress(&cas_merge(&ps).unwrap()).unwrap();
        let rev: Vec<_> = ps.iter().rev().cloned().collect();
        let back = cas_decompress(&cas_merge(&rev).unwrap()).unwrap();
        for (x, y) in fwd.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
