mod common;

use common::random_batch;
use dyntomo::nn::{default_conv_blocks, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use proptest::prelude::*;

/// `floor((in + 2 pad - kernel) / stride) + 1`, applied block by block.
fn expected_trace(input: [usize; 3]) -> Vec<[usize; 3]> {
    let mut dims = input;
    default_conv_blocks()
        .iter()
        .map(|b| {
            for a in 0..3 {
                dims[a] = (dims[a] + 2 - b.kernel[a]) / b.stride[a] + 1;
            }
            dims
        })
        .collect()
}

#[test]
fn critic_block_trace_for_8x64x64() {
    let trace = DiscriminatorConfig::new([8, 64, 64]).block_trace().unwrap();
    let spatial: Vec<usize> = trace.iter().map(|(_, d)| d[1]).collect();
    let temporal: Vec<usize> = trace.iter().map(|(_, d)| d[0]).collect();
    assert_eq!(spatial, [32, 16, 8, 4, 2, 1]);
    assert_eq!(temporal, [8, 8, 4, 4, 2, 2]);
    assert_eq!(trace.iter().map(|(_, d)| *d).collect::<Vec<_>>(), expected_trace([8, 64, 64]));
    let channels: Vec<usize> = trace.iter().map(|(c, _)| *c).collect();
    assert_eq!(channels, [4, 8, 16, 32, 64, 128]);
    assert_eq!(DiscriminatorConfig::new([8, 64, 64]).dense_widths().unwrap(), [256, 192, 144, 108, 81]);
}

#[test]
fn critic_rejects_underflowing_inputs() {
    assert!(DiscriminatorConfig::new([4, 16, 16]).block_trace().is_err());
    assert!(DiscriminatorConfig::new([4, 16, 16]).with_blocks(4).block_trace().is_ok());
}

#[test]
fn critic_score_is_a_probability() {
    let (d, store) = Discriminator::new(DiscriminatorConfig::new([8, 64, 64]), 3).unwrap();
    let p = store.materialize::<f64>();
    for x in random_batch(2, 8 * 64 * 64, 4) {
        let s = d.forward::<f64>(&p, &x).0;
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
}

#[test]
fn initialization_is_seeded() {
    let cfg = GeneratorConfig::new([8, 32, 32]);
    assert_eq!(Generator::new(cfg.clone(), 9).unwrap().1, Generator::new(cfg.clone(), 9).unwrap().1);
    assert_ne!(Generator::new(cfg.clone(), 9).unwrap().1, Generator::new(cfg, 10).unwrap().1);
    let dc = DiscriminatorConfig::new([8, 64, 64]);
    assert_eq!(Discriminator::new(dc.clone(), 1).unwrap().1, Discriminator::new(dc, 1).unwrap().1);
}

#[test]
fn fresh_generator_is_the_identity() {
    let (g, store) = Generator::new(GeneratorConfig::new([8, 64, 64]), 2).unwrap();
    let x = random_batch(1, 8 * 64 * 64, 5).remove(0);
    assert_eq!(g.forward_with::<f64>(&store, &x).unwrap(), x);
    let [w, b] = Generator::output_param_names();
    assert!(store.get(w).unwrap().data.iter().all(|&v| v == 0.0));
    assert!(store.get(b).unwrap().data.iter().all(|&v| v == 0.0));
}

#[test]
fn generator_rejects_indivisible_shapes() {
    assert!(Generator::new(GeneratorConfig::new([8, 40, 40]), 0).is_err());
    assert!(Generator::new(GeneratorConfig::new([1, 64, 64]), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generator_preserves_shape(t in prop::sample::select(vec![4usize, 8]), hw in prop::sample::select(vec![16usize, 32, 64]), seed in 0u64..1000) {
        let (g, mut store) = Generator::new(GeneratorConfig::new([t, hw, hw]), seed).unwrap();
        // Nonzero head so the output is not just the input.
        for v in &mut store.get_mut(Generator::output_param_names()[0]).unwrap().data {
            *v = 0.1;
        }
        let x = random_batch(1, t * hw * hw, seed).remove(0);
        let a = g.forward_with::<f32>(&store, &x).unwrap();
        prop_assert_eq!(a.len(), x.len());
        prop_assert!(a.iter().all(|v| v.is_finite()));
        prop_assert!(a != x);
        prop_assert_eq!(a, g.forward_with::<f32>(&store, &x).unwrap());
    }
}
