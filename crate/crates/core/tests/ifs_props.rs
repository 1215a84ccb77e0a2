mod common;

use std::collections::HashSet;

use kakeya_core::fixtures;
use kakeya_core::ifs::{cylinder, enumerate_level, fold_level, stopping_set, IfsSystem, Word};
use kakeya_core::mat2::Vec2;
use kakeya_core::pressure::log_phi;
use proptest::prelude::*;

fn positive_system(k: usize) -> impl Strategy<Value = IfsSystem> {
    common::positive_system(k, 0.45)
}

fn word(k: usize, len: usize) -> impl Strategy<Value = Word> {
    common::word(k, len..len + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stopping_set_is_an_antichain_that_covers(sys in common::positive_system(2, 0.3), t in 0.5..1.8f64, r in 0.02..0.3f64) {
        let z = stopping_set(&sys, t, r, 1 << 20).unwrap();
        let words: HashSet<Vec<usize>> = z.iter().map(|c| c.word.0.clone()).collect();
        let max_len = words.iter().map(|w| w.len()).max().unwrap();
        for a in &z {
            for b in &z {
                if a.word != b.word {
                    prop_assert!(!a.word.is_prefix_of(&b.word));
                }
            }
            let s = &a.singular;
            prop_assert!(log_phi(s.log_alpha1, s.log_alpha2, t) <= r.ln() + 1e-12);
        }
        // Every word of the maximal length has exactly one prefix in Z(r).
        let mut count = 0u64;
        enumerate_level(&sys, max_len, 1 << 20, |c| {
            let hits = (0..=max_len).filter(|&n| words.contains(&c.word.0[..n].to_vec())).count();
            assert_eq!(hits, 1, "{}", c.word);
            count += 1;
        }).unwrap();
        prop_assert_eq!(count, 1u64 << max_len);
    }

    #[test]
    fn coding_map_is_lipschitz(sys in positive_system(3), a in word(3, 40), b in word(3, 40)) {
        let p = sys.fixed_point(0);
        let x = cylinder(&sys, &a).unwrap().apply(p);
        let y = cylinder(&sys, &b).unwrap().apply(p);
        let n = a.common_prefix(&b).len() as i32;
        prop_assert!((x - y).norm() <= sys.pi_lipschitz() * sys.alpha_bar.powi(n) + 1e-12);
    }

    #[test]
    fn cylinder_is_composition(sys in positive_system(3), w in word(3, 12), x in (-1.0..1.0f64, -1.0..1.0f64)) {
        let x = Vec2::new(x.0, x.1);
        let mut direct = x;
        for &s in w.0.iter().rev() {
            direct = sys.map(s).apply(direct);
        }
        let c = cylinder(&sys, &w).unwrap();
        prop_assert!((c.apply(x) - direct).norm() < 1e-12);
    }
}

#[test]
fn level_counts() {
    for (sys, n) in [(fixtures::edgar(0.4, 0.1), 12), (fixtures::family65(5), 6), (fixtures::four_corners(0.5), 7)] {
        let mut count = 0u64;
        enumerate_level(&sys, n, 1 << 26, |_| count += 1).unwrap();
        assert_eq!(count, (sys.kappa() as u64).pow(n as u32));
    }
}

#[test]
fn fold_is_thread_count_independent() {
    let sys = fixtures::edgar(0.4, 0.1);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            fold_level(&sys, 14, 1 << 26, || (0.0f64, 0u64), |acc, _, p, o| {
                acc.0 += p.log_alpha1() + o.x;
                acc.1 += 1;
            })
            .unwrap()
        })
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0.to_bits(), y.0.to_bits());
        assert_eq!(x.1, y.1);
    }
}
