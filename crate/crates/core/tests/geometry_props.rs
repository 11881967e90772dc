use poresim::geometry::{
    build_sparse_grid, filter_thin_features, indicator_to_mask, mask_to_indicator,
    smooth_diffusion_coefficient, DiffusionProfile, PhaseBand, VoxelMask,
};
use poresim::grid::channels;
use poresim::{DenseField, GridGeometry};
use proptest::prelude::*;

fn random_mask() -> impl Strategy<Value = VoxelMask> {
    let size = prop_oneof![
        prop::collection::vec(1usize..14, 2),
        prop::collection::vec(1usize..8, 3)
    ];
    (size, 0.05f64..0.95).prop_flat_map(|(size, p)| {
        let n = size.iter().product::<usize>();
        let voxel = vec![1.0; size.len()];
        prop::collection::vec(prop::bool::weighted(p), n)
            .prop_map(move |bits| VoxelMask::new(&size, &voxel, bits).unwrap())
    })
}

fn random_field() -> impl Strategy<Value = DenseField<f64>> {
    let size = prop_oneof![
        prop::collection::vec(1usize..20, 2),
        prop::collection::vec(1usize..10, 3)
    ];
    size.prop_flat_map(|size| {
        let n = size.iter().product::<usize>();
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| {
            DenseField::from_vec(GridGeometry::uniform(&size, 1.0).unwrap(), v).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn built_grid_matches_band_exactly(field in random_field(), low in -2.0f64..1.0, width in 0.1f64..4.0) {
        let band = PhaseBand::new(low, low + width).unwrap();
        let Ok(grid) = build_sparse_grid(&field, band, &channels::STANDARD) else {
            // empty phase is an error; then no dense node may be inside
            prop_assert!(field.data().iter().all(|&p| !band.contains(p)));
            return Ok(());
        };
        let mut active = 0;
        grid.for_each_active_node(|idx, _| {
            active += 1;
            let p = grid.get(idx, channels::PHI).unwrap().unwrap();
            assert!(low < p && p < low + width, "phi {p} outside ({low}, {})", low + width);
        });
        let inside = field.geometry().indices().filter(|&i| band.contains(field.get(i))).count();
        prop_assert_eq!(active, inside);
    }

    #[test]
    fn diffusion_profile_is_bounded_and_monotone(
        d_min in 0.0f64..2.0,
        d_max in 0.01f64..5.0,
        gamma1 in -5.0f64..5.0,
        gamma2 in 0.01f64..3.0,
    ) {
        let profile = DiffusionProfile::new(d_min, d_max, gamma1, gamma2).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=64 {
            let phi = -8.0 + 0.25 * k as f64;
            let d = smooth_diffusion_coefficient(phi, &profile);
            prop_assert!(d_min < d && d < d_min + d_max, "D({phi}) = {d}");
            prop_assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn thin_feature_filter_is_idempotent(mask in random_mask(), thickness in 2usize..4) {
        let ind = mask_to_indicator::<f64>(&mask).unwrap();
        let once = filter_thin_features(&ind, thickness);
        let twice = filter_thin_features(&once, thickness);
        prop_assert_eq!(once.data(), twice.data());
    }

    #[test]
    fn indicator_round_trip_recovers_mask(mask in random_mask()) {
        let back = indicator_to_mask(&mask_to_indicator::<f32>(&mask).unwrap()).unwrap();
        prop_assert_eq!(back.bits(), mask.bits());
        prop_assert_eq!(back.size(), mask.size());
    }
}
