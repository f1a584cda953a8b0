use nalgebra::DMatrix;
use proptest::prelude::*;

use maxent_recon::numerics::{determinant, real_simple_roots, ROOT_TOL};
use maxent_recon::oracle::{reference_moments, ReferenceLaw};
use maxent_recon::support::{chebyshev_window, delta0_polynomial, extend_one, initial_window, SupportConfig};
use maxent_recon::{moments_of, validate_moments, FiniteDistribution, MomentSequence, SupportWindow};

fn law_strategy() -> impl Strategy<Value = ReferenceLaw> {
    prop_oneof![
        (0.2f64..12.0).prop_map(|rate| ReferenceLaw::Poisson { rate }),
        (1u64..30, 0.05f64..0.95).prop_map(|(trials, p)| ReferenceLaw::Binomial { trials, p }),
    ]
}

fn law_moments(law: &ReferenceLaw, order: usize) -> MomentSequence {
    reference_moments(law, SupportWindow::new(0, 120).unwrap(), order).unwrap()
}

fn bordered(mu: &MomentSequence, k: usize, w: f64) -> f64 {
    let m = DMatrix::from_fn(k + 1, k + 1, |r, c| if r < k { mu.get(r + c) } else { w.powi(c as i32) });
    determinant(&m)
}

proptest! {
    #[test]
    fn delta0_matches_numeric_determinant(law in law_strategy(), half in 1usize..=2, w in 0.0f64..25.0) {
        let mu = law_moments(&law, 2 * half);
        let poly = delta0_polynomial(&mu).unwrap();
        let det = bordered(&mu, half, w);
        prop_assert!((poly.eval(w) - det).abs() <= 1e-9 * poly.magnitude_at(w));
    }

    #[test]
    fn initial_window_contains_mean(law in law_strategy(), order in 1usize..=5) {
        let mu = law_moments(&law, order);
        let w = initial_window(&mu, &SupportConfig::default());
        let mean = mu.get(1);
        prop_assert!(w.contains(mean.floor() as u64) || w.contains(mean.ceil() as u64), "{w} mean {mean}");
    }

    #[test]
    fn initial_window_of_random_laws(weights in prop::collection::vec(0.01f64..1.0, 1..12), left in 0u64..20, order in 1usize..=5) {
        let d = SupportWindow::new(left, left + weights.len() as u64 - 1).unwrap();
        let mu = moments_of(&FiniteDistribution::normalized(d, weights).unwrap(), order);
        let w = initial_window(&mu, &SupportConfig::default());
        let mean = mu.get(1);
        prop_assert!(w.contains(mean.floor() as u64) || w.contains(mean.ceil() as u64), "{w} mean {mean}");
    }

    #[test]
    fn extend_one_adds_one_state(left in 0u64..50, width in 0u64..50, step in 0usize..10) {
        let w = SupportWindow::new(left, left + width).unwrap();
        let next = extend_one(w, step);
        if step % 2 == 0 && left == 0 {
            prop_assert_eq!(next, w);
        } else {
            prop_assert_eq!(next.len(), w.len() + 1);
        }
        if left >= 1 {
            let twice = extend_one(next, step + 1);
            prop_assert_eq!(twice.left(), left - 1);
            prop_assert_eq!(twice.right(), left + width + 1);
        }
    }
}

#[test]
fn delta0_roots_are_support_points() {
    // One point: M = 2.
    for x in [0.0, 3.0, 17.0] {
        let mu = validate_moments(&[1.0, x, x * x]).unwrap();
        let roots = real_simple_roots(&delta0_polynomial(&mu).unwrap(), ROOT_TOL).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].value - x).abs() <= 1e-9 * x.max(1.0));
    }
    // Two points with dyadic weights, so the moments are exact.
    for (a, b, wa) in [(0.0, 2.0, 0.5), (1.0, 5.0, 0.25), (3.0, 4.0, 0.75)] {
        let wb = 1.0 - wa;
        let mu: Vec<f64> = (0..=4).map(|k| wa * f64::powi(a, k) + wb * f64::powi(b, k)).collect();
        let mu = validate_moments(&mu).unwrap();
        let roots = real_simple_roots(&delta0_polynomial(&mu).unwrap(), ROOT_TOL).unwrap();
        let v: Vec<f64> = roots.iter().map(|r| r.value).collect();
        assert_eq!(v.len(), 2);
        assert!((v[0] - a).abs() <= 1e-9 && (v[1] - b).abs() <= 1e-9, "{v:?}");
    }
}

#[test]
fn chebyshev_window_holds_most_mass() {
    let cfg = SupportConfig::default();
    let laws = [
        ReferenceLaw::Poisson { rate: 0.5 },
        ReferenceLaw::Poisson { rate: 5.0 },
        ReferenceLaw::Poisson { rate: 20.0 },
        ReferenceLaw::Binomial { trials: 20, p: 0.3 },
        ReferenceLaw::Binomial { trials: 50, p: 0.9 },
    ];
    for law in laws {
        let big = SupportWindow::new(0, 400).unwrap();
        let mu = reference_moments(&law, big, 2).unwrap();
        let w = chebyshev_window(&mu, &cfg).unwrap();
        let q = law.truncated(big).unwrap();
        let mass: f64 = w.states().map(|x| q.prob(x)).sum();
        assert!(mass >= 0.9, "{law:?}: {mass} on {w}");
    }
}
