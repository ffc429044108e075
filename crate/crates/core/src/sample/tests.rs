use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::testutil::{bits, probs};
use crate::ModelKind;

fn index_of(s: &[u8]) -> usize {
    s.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
}

/// Pearson test, pooling outcomes with expected count below 5.
fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e < 5.0 {
            pool_obs += c as f64;
            pool_exp += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp.max(1e-300);
        bins += 1;
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn chain_rule_and_cache_soundness() {
    for kind in [ModelKind::Ttn, ModelKind::Mps] {
        let mut m = BornModel::<f64>::random(kind, 8, 4, 3).unwrap();
        m.canonicalize(5).unwrap();
        let sampler = Sampler::new(&m).unwrap();
        for i in 0..100 {
            let t = sampler.sample_traced(&mut stream(9, i)).unwrap();
            assert_eq!(t.order, (0..8).collect::<Vec<_>>());
            assert!((t.log_prob() - m.log_prob(&t.sample).unwrap()).abs() < 1e-10);
            let mut fixed = Vec::new();
            for (k, &p) in t.order.iter().enumerate() {
                let naive = m.marginal(&fixed, p).unwrap();
                assert!((naive[t.sample[p] as usize] - t.conditionals[k]).abs() < 1e-12);
                fixed.push((p, t.sample[p]));
            }
        }
    }
}

#[test]
fn stored_pattern_is_always_returned() {
    let pat = vec![vec![1, 0, 0, 1, 1, 1, 0, 1]];
    let m = BornModel::<f64>::from_patterns(ModelKind::Ttn, &pat).unwrap();
    for s in sample_batch(&m, 50, 4).unwrap() {
        assert_eq!(s, pat[0]);
    }
}

#[test]
fn uniform_model_is_uniform() {
    let m = BornModel::<f64>::uniform(ModelKind::Ttn, 4).unwrap();
    let mut counts = vec![0u64; 16];
    for s in sample_batch(&m, 100_000, 1).unwrap() {
        counts[index_of(&s)] += 1;
    }
    assert!(chi_square_p(&counts, &[1.0 / 16.0; 16]) > 0.01);
}

#[test]
fn random_model_frequencies_match_enumeration() {
    for kind in [ModelKind::Ttn, ModelKind::Mps] {
        let m = BornModel::<f64>::random(kind, 8, 4, 17).unwrap();
        let p = probs(&m);
        let mut counts = vec![0u64; 256];
        for s in sample_batch(&m, 100_000, 2).unwrap() {
            counts[index_of(&s)] += 1;
        }
        assert!(chi_square_p(&counts, &p) > 0.01);
    }
}

#[test]
fn reversed_order_gives_same_distribution() {
    let m = BornModel::<f64>::random(ModelKind::Ttn, 8, 3, 23).unwrap();
    let p = probs(&m);
    let order: Vec<usize> = (0..8).rev().collect();
    let mut counts = vec![0u64; 256];
    for i in 0..20_000 {
        let t = sample_in_order(&m, &order, &mut stream(5, i)).unwrap();
        assert!((t.log_prob() - p[index_of(&t.sample)].ln()).abs() < 1e-10);
        counts[index_of(&t.sample)] += 1;
    }
    assert!(chi_square_p(&counts, &p) > 0.01);
    assert!(sample_in_order(&m, &[0, 1, 2], &mut stream(0, 0)).is_err());
    assert!(sample_in_order(&m, &[0, 0, 1, 2, 3, 4, 5, 6], &mut stream(0, 0)).is_err());
}

#[test]
fn memorized_patterns_sampled_uniformly() {
    let pats: Vec<Vec<u8>> = (0..10).map(|i| bits(i * 613 + 77, 16)).collect();
    let m = BornModel::<f64>::from_patterns(ModelKind::Ttn, &pats).unwrap();
    let mut counts = vec![0u64; 10];
    for s in sample_batch(&m, 10_000, 8).unwrap() {
        let k = pats.iter().position(|p| *p == s).expect("sample is a stored pattern");
        counts[k] += 1;
    }
    assert!(chi_square_p(&counts, &[0.1; 10]) > 0.01);
}

#[test]
fn deterministic_streams() {
    let m = BornModel::<f64>::random(ModelKind::Mps, 12, 4, 2).unwrap();
    let a = sample_batch(&m, 40, 77).unwrap();
    assert_eq!(a[0], sample_one(&m, 77, 0).unwrap());
    assert_eq!(a[13], sample_one(&m, 77, 13).unwrap());
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| sample_batch(&m, 40, 77).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, sample_batch(&m, 40, 78).unwrap());
    assert!(sample_batch(&m, 0, 1).is_err());
}

#[test]
fn long_chain_samples_have_exact_log_prob() {
    let m = BornModel::<f64>::random(ModelKind::Mps, 512, 6, 2).unwrap();
    let t = Sampler::new(&m).unwrap().sample_traced(&mut stream(1, 1)).unwrap();
    assert!((t.log_prob() - m.log_prob(&t.sample).unwrap()).abs() < 1e-8);
}
