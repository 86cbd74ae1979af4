use proptest::prelude::*;
use sqhardnet::distributions::{sample, sign_flip, DistributionSpec};
use sqhardnet::stats::RunningMoments;

const DIM: usize = 5;
const ROWS: usize = 20_000;

fn kinds() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::standard_gaussian(DIM).unwrap(),
        DistributionSpec::rademacher(DIM).unwrap(),
        DistributionSpec::default_mixture(DIM).unwrap(),
    ]
}

/// Per-coordinate moments of `x` and `x²`.
fn moments(rows: impl Iterator<Item = Vec<f64>>) -> Vec<(RunningMoments, RunningMoments)> {
    let mut acc = vec![(RunningMoments::new(), RunningMoments::new()); DIM];
    for row in rows {
        for (m, v) in acc.iter_mut().zip(row) {
            m.0.push(v);
            m.1.push(v * v);
        }
    }
    acc
}

fn agree(a: &RunningMoments, b: &RunningMoments) -> bool {
    let (a, b) = (a.estimate(), b.estimate());
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    (a.value - b.value).abs() <= 5.0 * se + 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flipped_samples_have_the_same_moments(
        z in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], DIM),
        seed in 0u64..1000,
    ) {
        for dist in kinds() {
            let plain = sample(&dist, ROWS, seed).unwrap();
            let other = sample(&dist, ROWS, seed + 1_000_000).unwrap();
            let flipped = other.rows().into_iter().map(|r| sign_flip(r.as_slice().unwrap(), &z).unwrap());
            let a = moments(plain.rows().into_iter().map(|r| r.to_vec()));
            let b = moments(flipped);
            for (i, (ma, mb)) in a.iter().zip(&b).enumerate() {
                prop_assert!(agree(&ma.0, &mb.0), "{} coordinate {i}: first moment", dist.name());
                prop_assert!(agree(&ma.1, &mb.1), "{} coordinate {i}: second moment", dist.name());
            }
        }
    }

    #[test]
    fn sampling_is_bit_reproducible(count in 1usize..300, seed in any::<u64>()) {
        for dist in kinds() {
            let a = sample(&dist, count, seed).unwrap();
            let b = sample(&dist, count, seed).unwrap();
            prop_assert_eq!(a.shape(), &[count, DIM]);
            let same = a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn sign_flip_is_an_involution(
        x in proptest::collection::vec(-4.0f64..4.0, DIM),
        z in proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], DIM),
    ) {
        let back = sign_flip(&sign_flip(&x, &z).unwrap(), &z).unwrap();
        prop_assert_eq!(back, x);
    }
}

#[test]
fn coordinate_variances() {
    // The default mixture has scales 0.5 and 1.5 with equal weights.
    for (dist, expected) in kinds().into_iter().zip([1.0, 1.0, 1.25]) {
        let xs = sample(&dist, 100_000, 7).unwrap();
        for col in xs.columns() {
            let var = col.mapv(|v| v * v).mean().unwrap();
            assert!((var - expected).abs() < 0.03, "{}: {var}", dist.name());
        }
    }
}

#[test]
fn mismatched_flip_length_is_rejected() {
    assert!(sign_flip(&[1.0, 2.0], &[1]).is_err());
}
