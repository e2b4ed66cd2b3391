use proptest::prelude::*;

use srm::kms::SpectrumSpec;
use srm::scalar_channel::Prior;
use srm::synth::{read_instance, sample_instance, write_instance, BlockLayout, InstanceSpec};

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..0.95f64, 0.05..1.0f64), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_sizes_track_weights(atoms in atoms(), p in 1usize..500) {
        let spectrum = SpectrumSpec::discrete(atoms.clone()).unwrap();
        let layout = BlockLayout::new(&spectrum, p, 32).unwrap();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut next = 0;
        for (r, (&l, a)) in layout.blocks().iter().zip(layout.block_lambdas().iter().zip(&atoms)) {
            prop_assert_eq!(r.start, next);
            next = r.end;
            prop_assert_eq!(l, a.0);
            prop_assert!((r.len() as f64 / p as f64 - a.1 / total).abs() <= 1.0 / p as f64 + 1e-12);
            for j in r.clone() {
                prop_assert_eq!(layout.column_lambdas()[j], l);
            }
        }
        prop_assert_eq!(next, p);
    }

    #[test]
    fn instances_are_deterministic_and_round_trip(seed in any::<u64>(), n in 1usize..20, p in 1usize..20) {
        let spectrum: SpectrumSpec<f64> = "0.7:0.4,0.2:0.6".parse().unwrap();
        let spec = InstanceSpec::new(n, p, spectrum, Prior::Rademacher, 0.3, seed).unwrap();
        let a = sample_instance(&spec).unwrap();
        prop_assert_eq!(&a, &sample_instance(&spec).unwrap());
        prop_assert!(a.beta0().iter().all(|b| b.abs() == 1.0));

        let mut bytes = Vec::new();
        write_instance(&a, &mut bytes).unwrap();
        prop_assert_eq!(&read_instance(&mut bytes.as_slice()).unwrap(), &a);

        let other = sample_instance(&spec.with_seed(seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(a.phi(), other.phi());
    }
}

#[test]
fn truncated_files_are_rejected() {
    let spec = InstanceSpec::new(
        4,
        3,
        SpectrumSpec::single(0.5).unwrap(),
        Prior::Rademacher,
        0.1,
        1,
    )
    .unwrap();
    let mut bytes = Vec::new();
    write_instance(&sample_instance(&spec).unwrap(), &mut bytes).unwrap();
    for cut in [0, 3, 10, bytes.len() - 1] {
        assert!(read_instance(&mut &bytes[..cut]).is_err(), "cut at {cut}");
    }
    bytes[0] = b'X';
    assert!(read_instance(&mut bytes.as_slice()).is_err());
}

#[test]
fn continuous_spectra_use_quantile_columns() {
    let spectrum: SpectrumSpec<f64> = "uniform(0.1,0.9)".parse().unwrap();
    let layout = BlockLayout::new(&spectrum, 400, 8).unwrap();
    let cols = layout.column_lambdas();
    assert!(cols.windows(2).all(|w| w[0] <= w[1]));
    assert!((cols[0] - (0.1 + 0.8 * 0.5 / 400.0)).abs() < 1e-12);
    assert_eq!(layout.blocks().len(), 8);
    for r in layout.blocks() {
        assert_eq!(r.len(), 50);
    }
}
