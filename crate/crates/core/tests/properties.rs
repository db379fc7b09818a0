mod common;

use common::*;
use ctxim::env::{Context, SimRng};
use ctxim::ledger::ActivationLedger;
use ctxim::linalg::DesignMatrix;
use ctxim::policy::glm::GlmGtUcb;
use ctxim::policy::{Policy, PolicyConfig, PolicyKind, RoundView};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn design_inverse_matches_nalgebra(d in 1usize..8, reg in 0.1f64..4.0,
                                       ys in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 8), 1..30)) {
        let mut m = DesignMatrix::new(d, reg).unwrap();
        let mut direct = DMatrix::<f64>::identity(d, d) * reg;
        for y in &ys {
            m.update(&y[..d]).unwrap();
            let v = DVector::from_column_slice(&y[..d]);
            direct += &v * v.transpose();
        }
        let inv = direct.try_inverse().unwrap();
        for i in 0..d {
            for j in 0..d {
                prop_assert!((m.inv()[i * d + j] - inv[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn hapax_matches_brute_force(seed in any::<u64>(), k in 1usize..5, rounds in 1u32..25) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut ledger = ActivationLedger::new();
        let mut brute = BruteLedger::default();
        for t in 1..=rounds {
            let chosen = random_selection(&mut rng, k, 1 + (t as usize % k));
            let fb = random_feedback(&mut rng, t, &chosen, 30, 5);
            let out = ledger.record(&fb).unwrap();
            let before = brute.distinct();
            brute.push(fb);
            prop_assert_eq!(out.reward as usize, brute.distinct() - before);
        }
        for s in 1..=rounds {
            for a in 0..k {
                prop_assert_eq!(ledger.hapax_count(s, a), brute.hapax(s, a));
            }
        }
    }

    #[test]
    fn glm_parts_are_sane(seed in any::<u64>(), d in 1usize..4, gamma in 0.0f64..2.0) {
        let (k, l) = (4, 2);
        let mut cfg = PolicyConfig::new(k, l, d);
        cfg.gamma_expl = gamma;
        let mut glm = GlmGtUcb::new(cfg).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        let mut seen = ActivationLedger::new();
        for t in 1..=12 {
            let ctx = Context::new((0..d).map(|i| ((seed >> i) % 7) as f64 / 7.0).collect());
            let view = RoundView::new(t, &ctx);
            let chosen = glm.select(&view);
            prop_assert_eq!(chosen.len(), l);
            let fb = random_feedback(&mut rng, t, &chosen, 50, 6);
            let r = seen.record(&fb).unwrap().reward as f64 / l as f64;
            glm.update(&view, &chosen, &fb, &[r; 2]).unwrap();
            for a in 0..k {
                if glm.states()[a].n > 0 {
                    let p = glm.index_parts(a, &ctx.vector).unwrap();
                    prop_assert!(p.beta >= 0.0 && p.g >= 0.0 && p.alpha > 0.0);
                    prop_assert!(p.index.is_finite());
                }
            }
        }
    }

    #[test]
    fn every_policy_picks_l_distinct_arms(seed in any::<u64>(), k in 2usize..7, d in 1usize..4) {
        let l = 1 + (seed as usize % (k - 1));
        let cfg = PolicyConfig::new(k, l, d);
        let mut rng = SimRng::seed_from_u64(seed);
        for kind in PolicyKind::ALL {
            let mut p = kind.build(&cfg, seed).unwrap();
            let mut seen = ActivationLedger::new();
            for t in 1..=8 {
                let ctx = Context::zeros(d);
                let view = RoundView::new(t, &ctx);
                let mut chosen = p.select(&view);
                let n = chosen.len();
                chosen.sort_unstable();
                chosen.dedup();
                prop_assert_eq!(chosen.len(), n);
                prop_assert_eq!(n, l);
                prop_assert!(chosen.iter().all(|&a| a < k));
                let fb = random_feedback(&mut rng, t, &chosen, 40, 4);
                let r = seen.record(&fb).unwrap().reward as f64 / l as f64;
                p.update(&view, &chosen, &fb, &vec![r; l]).unwrap();
            }
        }
    }
}
