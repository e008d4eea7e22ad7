use approx::assert_relative_eq;
use netdiff_core::gains::*;
use netdiff_core::kernel::{spow, Coupling};
use netdiff_core::{Error, Graph};

fn opts() -> SearchOptions {
    SearchOptions { starts: 12, candidates: 512, ..Default::default() }
}

/// `sup Π̂/Γ` on the scalar unit sphere `|x0|^{1/2} + |x1| = 1` by a dense grid.
fn scalar_ratio_grid(k1: f64, beta: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let n = 200_000;
    for k in 0..=n {
        let a = k as f64 / n as f64;
        for (s0, s1) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let x0 = s0 * a * a;
            let x1 = s1 * (1.0 - a);
            let gamma = (spow(x0, 0.5) - x1).powi(2);
            if gamma < 1e-6 {
                continue;
            }
            let w = (1.0 + beta) * spow(x1, 2.0) - x0;
            let pi = -w * spow(x0, 0.0) + w.abs() / k1;
            best = best.max(pi / gamma);
        }
    }
    best
}

#[test]
fn scalar_k0_bound_matches_grid() {
    let cp = Coupling::scalar();
    for k1 in [1.1, 2.0, 5.0] {
        let b = k0_lower_bound(&cp, k1, 7.0, &opts()).unwrap();
        let grid = scalar_ratio_grid(k1, 7.0);
        assert_relative_eq!(b.ratio, grid, max_relative = 1e-3);
        assert_relative_eq!(b.k0_lower, (8.0 * (k1 + 1.0)).sqrt(), max_relative = 1e-3);
        assert!(b.negative_near_manifold);
    }
}

#[test]
fn ring_k1_bound_matches_spectrum() {
    let g = Graph::ring(5).unwrap();
    let lambda = g.algebraic_connectivity().unwrap();
    assert_relative_eq!(k1_lower_bound(&g).unwrap(), 1.0 / lambda.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(k1_lower_bound(&g).unwrap(), 0.850650808, max_relative = 1e-6);
    assert!(k1_lower_bound(&Graph::structural(3, vec![(0, 1)]).unwrap()).is_err());
}

#[test]
fn margin_positive_above_bound_and_rejected_below() {
    let cp = Coupling::scalar();
    let k0_lower = (8.0f64 * 3.0).sqrt();
    let ok = GainSet::new(1.2 * k0_lower, 2.0, 0.0, 1.0, 7.0).unwrap();
    assert!(margin_c(&cp, &ok, &opts()).unwrap().value > 0.0);
    let bad = GainSet::new(0.8 * k0_lower, 2.0, 0.0, 1.0, 7.0).unwrap();
    assert!(matches!(margin_c(&cp, &bad, &opts()), Err(Error::NotCertified { .. })));
}

#[test]
fn certified_constants_are_consistent() {
    let cp = Coupling::scalar();
    let gains = GainSet::new(6.0, 2.0, 0.0, 1.0, 7.0).unwrap();
    let c = certify(&cp, &gains, &opts()).unwrap();
    assert!(c.c > 0.0 && c.v_lower > 0.0 && c.c_psi >= 0.0);
    assert!(c.sigma_max > 0.0 && c.sigma_max <= 0.25);
    assert_relative_eq!(c.settling_scale, 3.0 / (c.c * c.v_lower), max_relative = 1e-12);
    assert!(c.c1 > 0.0 && c.c0 > 0.0);
    // Witnesses lie on the unit sphere.
    for w in [&c.c_witness, &c.v_lower_witness, &c.c_psi_witness] {
        assert_relative_eq!(w.state().homogeneous_norm(), 1.0, max_relative = 1e-6);
    }
}

#[test]
fn sigma_and_settling_formulas() {
    assert_relative_eq!(sigma_max(1.0, 1.0, 3.0).unwrap(), 0.05, max_relative = 1e-12);
    assert_eq!(sigma_max(1.0, 1.0, 0.0).unwrap(), 0.25);
    assert!(sigma_max(0.0, 1.0, 1.0).is_err());
    assert_relative_eq!(settling_bound(8.0, 0.5, 2.0), 6.0, max_relative = 1e-12);
}
