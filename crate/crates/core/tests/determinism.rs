use calib_core::fixtures::{
    gap_pa_pair, gen_dbeta, gen_gauss_gap, induce_gamma, GaussGapConfig, SyntheticConfig,
};
use calib_core::interval::{sintce_hat, IntervalEstimatorConfig};
use calib_core::kernel::{kce_estimate, KernelEstimatorConfig, KernelKind, KernelMode};
use calib_core::SeededRng;

fn run(seed: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cfg = SyntheticConfig {
        beta: 0.5,
        n: 300,
        rng: SeededRng::new(seed),
    };
    let dist = gen_dbeta(&mut cfg).unwrap();
    out.extend(dist.samples().iter().map(|s| s.v.to_bits()));

    let mut g = GaussGapConfig {
        eps: 0.05,
        n: 50,
        rng: SeededRng::new(seed),
    };
    out.extend(
        gen_gauss_gap(&mut g)
            .unwrap()
            .samples()
            .iter()
            .map(|s| s.v.to_bits() ^ u64::from(s.y)),
    );

    let (d1, _) = gap_pa_pair(0.2).unwrap();
    let sampled = induce_gamma(&d1, 100, &mut SeededRng::new(seed)).unwrap();
    out.extend(
        sampled
            .samples()
            .iter()
            .map(|s| s.v.to_bits() ^ u64::from(s.y)),
    );

    let icfg = IntervalEstimatorConfig::new(0.05, seed).unwrap();
    out.push(sintce_hat(&dist, &icfg).unwrap().value.to_bits());

    for mode in [
        KernelMode::Subsample,
        KernelMode::Fourier,
        KernelMode::Binning,
    ] {
        let mut kcfg = KernelEstimatorConfig::new(mode, seed);
        kcfg.reps_r = 2000;
        out.push(
            kce_estimate(&dist, KernelKind::Laplace, &kcfg)
                .unwrap()
                .squared
                .to_bits(),
        );
    }
    out
}

#[test]
fn equal_seeds_are_bit_identical() {
    assert_eq!(run(42), run(42));
    assert_ne!(run(42), run(43));
}
