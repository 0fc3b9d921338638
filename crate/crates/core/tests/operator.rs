use std::f64::consts::PI;

use approx::assert_relative_eq;
use dbarlab::operator::Orientation;
use dbarlab::weights::TabulatedWeight;
use dbarlab::{
    assemble_D, assemble_Dbar, assemble_H, assemble_schrodinger, build_grid, dense_smallest, dz_forward, quadratic_form,
    Complex64 as C, FieldC, Grid2D, Shape, Support, WeightModel,
};
use proptest::prelude::*;

fn zero_weight(r: f64) -> WeightModel {
    // zeros on [−(r+1), r+1]², spacing 0.25
    let (d, n) = (0.25, (8.0 * (r + 1.0)) as usize + 1);
    let x0 = -(r + 1.0);
    WeightModel::tabulated(TabulatedWeight::new(x0, x0, d, d, n, n, vec![0.0; n * n]).unwrap())
}

fn h_norm_sqr(h: f64, v: &[C]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>() * h * h
}

#[test]
fn zero_weight_forward_block_is_dz_forward() {
    let g = build_grid(2.0, 0.25, Shape::Square).unwrap();
    let d = assemble_D(&g, &zero_weight(2.0)).unwrap();
    let ff = d.block(Orientation::ForwardForward);
    let dz = dz_forward(&g);
    for p in 0..g.n() {
        for q in 0..g.n() {
            assert_eq!(ff.get(p, q) * 2.0, -dz.get(p, q), "entry ({p}, {q})");
        }
    }
}

#[test]
fn zero_weight_adjoint_blocks_are_backward_dzbar() {
    // adjoint of the forward block is −½ the backward ∂_z̄ on interior rows
    let g = build_grid(2.0, 0.25, Shape::Square).unwrap();
    let d = assemble_D(&g, &zero_weight(2.0)).unwrap();
    let ff_adj = d.block(Orientation::ForwardForward).adjoint();
    let dz_adj = dz_forward(&g).adjoint();
    for p in 0..g.n() {
        for q in 0..g.n() {
            assert_eq!(ff_adj.get(p, q) * 2.0, -dz_adj.get(p, q));
        }
    }
}

/// ¼ of the Dirichlet 5-point Laplacian −Δ_h.
fn quarter_laplacian_entry(g: &Grid2D, p: usize, q: usize) -> f64 {
    let h2 = g.h() * g.h();
    let (a, b) = (g.lattice(p), g.lattice(q));
    let dist = (a.0 - b.0).abs() + (a.1 - b.1).abs();
    match dist {
        0 => 1.0 / h2,
        1 => -0.25 / h2,
        _ => 0.0,
    }
}

#[test]
fn zero_field_operators_are_quarter_laplacian() {
    let g = build_grid(1.0, 0.5, Shape::Square).unwrap();
    let w = zero_weight(1.0);
    let h = g.h();
    // 3×3 Dirichlet Laplacian: λ_min = 2·(2 − √2)/h², a quarter of it here
    let oracle = 0.25 * 2.0 * (2.0 - 2f64.sqrt()) / (h * h);
    for op in [assemble_H(&g, &w).unwrap(), assemble_schrodinger(&g, &w).unwrap()] {
        for p in 0..g.n() {
            for q in 0..g.n() {
                let e = op.matrix().get(p, q);
                assert!((e - C::new(quarter_laplacian_entry(&g, p, q), 0.0)).norm() < 1e-14);
            }
        }
        let dense = dense_smallest(op.matrix(), 1, 1e-10).unwrap();
        assert_relative_eq!(dense.lambdas[0], oracle, max_relative = 1e-12);
    }
}

#[test]
fn lowest_landau_state_norm_ratio() {
    // D(z̄e^{−|z|²}) = 2z̄²e^{−|z|²}: ‖Du‖² = π, ‖u‖² = π/4
    let g = build_grid(4.0, 0.05, Shape::Square).unwrap();
    let d = assemble_D(&g, &WeightModel::fock()).unwrap();
    let u = FieldC::from_fn(&g, Support::Interior, |z| z.conj() * (-z.norm_sqr()).exp());
    let du = d.apply(&u).unwrap();
    let num = h_norm_sqr(g.h(), &du);
    let den = h_norm_sqr(g.h(), u.values());
    assert_relative_eq!(den, PI / 4.0, max_relative = 1e-3);
    assert_relative_eq!((num / den).sqrt(), 2.0, max_relative = 0.03);
}

#[test]
fn dbar_annihilates_holomorphic_times_gaussian() {
    // D̄(p e^{−|z|²}) = 0; lift a closure field by ½ copies into each block
    let ratio = |h: f64| {
        let g = build_grid(4.0, h, Shape::Square).unwrap();
        let d = assemble_D(&g, &WeightModel::fock()).unwrap();
        let m = g.len(Support::Closure);
        let v: Vec<C> = (0..m)
            .map(|k| {
                let z = g.point(k);
                (C::new(1.0, 0.0) + z * 0.5 - z * z * 0.25) * (-z.norm_sqr()).exp()
            })
            .collect();
        let lifted: Vec<C> = (0..4 * m).map(|i| 0.5 * v[i % m]).collect();
        let out = assemble_Dbar(&d).mul_vec(&lifted);
        (h_norm_sqr(h, &out) / h_norm_sqr(h, &v)).sqrt()
    };
    let (coarse, fine) = (ratio(0.1), ratio(0.05));
    assert!(fine < 0.1, "‖D̄_h v‖/‖v‖ = {fine}");
    assert!(coarse / fine >= 1.5, "decay {coarse} -> {fine}");
}

#[test]
fn schrodinger_diagonal_carries_laplacian() {
    for w in [WeightModel::fock(), WeightModel::monomial(3.0).unwrap(), WeightModel::monomial(4.0).unwrap()] {
        let g = build_grid(2.0, 0.1, Shape::Square).unwrap();
        let op = assemble_schrodinger(&g, &w).unwrap();
        let h = g.h();
        for k in (0..g.n()).step_by(7) {
            let z = g.point(k);
            let (a1, a2) = w.vector_potential(z).unwrap();
            let cx = C::new(-1.0 / h, -a1);
            let cy = C::new(-1.0 / h, -a2);
            let kinetic = 0.25 * (cx.norm_sqr() + cy.norm_sqr() + 2.0 / (h * h));
            let b = 4.0 * (op.matrix().get(k, k).re - kinetic);
            let lap = w.laplacian(z).unwrap();
            assert!((b - lap).abs() <= 1e-9 * (1.0 + lap), "at {z}: {b} vs {lap}");
        }
    }
}

#[test]
fn cross_assembly_defect_decays() {
    let bump = |z: C| {
        let r2 = (z - C::new(0.3, 0.0)).norm_sqr();
        if r2 >= 1.0 {
            C::new(0.0, 0.0)
        } else {
            C::new((-1.0 / (1.0 - r2)).exp(), 0.0)
        }
    };
    let defect = |h: f64| {
        let g = build_grid(2.0, h, Shape::Square).unwrap();
        let w = WeightModel::fock();
        let u = FieldC::from_fn(&g, Support::Interior, bump);
        let a = assemble_H(&g, &w).unwrap().apply(&u).unwrap();
        let b = assemble_schrodinger(&g, &w).unwrap().apply(&u).unwrap();
        let diff: Vec<C> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        (h_norm_sqr(h, &diff) / h_norm_sqr(h, u.values())).sqrt()
    };
    let (d1, d2) = (defect(0.05), defect(0.025));
    assert!(d1 / d2 >= 1.5, "{d1} -> {d2}");
}

#[test]
fn hermitian_exactly() {
    let g = build_grid(3.0, 0.1, Shape::Disk).unwrap();
    for w in [WeightModel::fock(), WeightModel::monomial(4.0).unwrap(), zero_weight(3.0)] {
        assert!(assemble_H(&g, &w).unwrap().matrix().is_exactly_hermitian());
        assert!(assemble_schrodinger(&g, &w).unwrap().matrix().is_exactly_hermitian());
    }
}

fn grid() -> Grid2D {
    build_grid(2.0, 0.2, Shape::Square).unwrap()
}

fn field(g: &Grid2D, re: &[f64], im: &[f64]) -> FieldC {
    FieldC::from_values(g, Support::Interior, re.iter().zip(im).map(|(a, b)| C::new(*a, *b)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn form_is_psd_hermitian_and_factored(
        m in 2.0f64..5.0,
        a in prop::collection::vec(-1.0f64..1.0, 361),
        b in prop::collection::vec(-1.0f64..1.0, 361),
        c in prop::collection::vec(-1.0f64..1.0, 361),
        d in prop::collection::vec(-1.0f64..1.0, 361),
    ) {
        let g = grid();
        let w = WeightModel::monomial(m).unwrap();
        let op = assemble_H(&g, &w).unwrap();
        let (u, v) = (field(&g, &a, &b), field(&g, &c, &d));
        let uu = quadratic_form(&g, &op, &u, &u).unwrap();
        prop_assert!(uu.re >= 0.0);
        let uv = quadratic_form(&g, &op, &u, &v).unwrap();
        let vu = quadratic_form(&g, &op, &v, &u).unwrap();
        prop_assert!((uv - vu.conj()).norm() <= 1e-12 * (1.0 + uv.norm()));
        let du = op.factor().unwrap().apply(&u).unwrap();
        let dn = h_norm_sqr(g.h(), &du);
        prop_assert!((uu.re - dn).abs() <= 1e-12 * dn);
    }

    #[test]
    fn real_rayleigh_quotients_nonnegative(m in 2.0f64..5.0, a in prop::collection::vec(-1.0f64..1.0, 361)) {
        let g = grid();
        let op = assemble_schrodinger(&g, &WeightModel::monomial(m).unwrap()).unwrap();
        let u = field(&g, &a, &vec![0.0; 361]);
        prop_assert!(quadratic_form(&g, &op, &u, &u).unwrap().re >= 0.0);
    }
}
