use approx::assert_relative_eq;
use proptest::prelude::*;

use covcalc::calculus::{h_inner, symmetric_integral, wiener_integral, Integrand};
use covcalc::covmeasure::refine_scan;
use covcalc::simulate::sample_paths;
use covcalc::{Grid, Kernel, Measure, Step};

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.05..0.95f64).prop_map(|h| Kernel::fbm(h, 1.0).unwrap()),
        (0.1..0.95f64, 0.1..1.0f64).prop_map(|(h, k)| Kernel::bifbm(h, k, 1.0).unwrap()),
        (0.55..0.95f64).prop_map(|h| Kernel::mixed_fbm(h, 1.0).unwrap()),
        Just(Kernel::bm(1.0).unwrap()),
        Just(Kernel::parse("martingale:lambda=square", 1.0).unwrap()),
    ]
}

fn step_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn masses_are_symmetric_and_telescope(k in kernel_strategy(), n in 2usize..40) {
        let m = Measure::build(&k, &Grid::new(n, 1.0).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(m.mass(i, j), m.mass(j, i));
            }
        }
        let r = k.eval_covariance(1.0, 1.0).unwrap();
        prop_assert!((m.total() - r).abs() <= 1e-10, "total {} vs R(T,T) {}", m.total(), r);
    }

    #[test]
    fn h_norm_is_nonnegative(k in kernel_strategy(), v in step_values(24)) {
        let g = Grid::new(24, 1.0).unwrap();
        let m = Measure::build(&k, &g).unwrap();
        let phi = Step::new(g, v).unwrap();
        let scale = m.planar_variation() * phi.values().iter().map(|x| x * x).sum::<f64>();
        prop_assert!(h_inner(&m, &phi, &phi).unwrap() >= -1e-12 * scale.max(1.0));
    }

    #[test]
    fn h_inner_is_bilinear(k in kernel_strategy(), a in step_values(16), b in step_values(16), c in step_values(16), s in -3.0..3.0f64) {
        let g = Grid::new(16, 1.0).unwrap();
        let m = Measure::build(&k, &g).unwrap();
        let (a, b, c) = (Step::new(g, a).unwrap(), Step::new(g, b).unwrap(), Step::new(g, c).unwrap());
        let lhs = h_inner(&m, &a.scale(s).add(&b).unwrap(), &c).unwrap();
        let rhs = s * h_inner(&m, &a, &c).unwrap() + h_inner(&m, &b, &c).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        prop_assert!((h_inner(&m, &a, &b).unwrap() - h_inner(&m, &b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn jordan_parts_reassemble(k in kernel_strategy(), n in 2usize..32) {
        let m = Measure::build(&k, &Grid::new(n, 1.0).unwrap()).unwrap();
        let j = m.jordan_decompose();
        for i in 0..n {
            for l in 0..n {
                prop_assert!(j.pos.mass(i, l) >= 0.0 && j.neg.mass(i, l) >= 0.0);
                prop_assert!(j.pos.mass(i, l) * j.neg.mass(i, l) == 0.0);
                prop_assert_eq!(j.pos.mass(i, l) - j.neg.mass(i, l), m.mass(i, l));
            }
        }
        prop_assert!((j.pos.total() + j.neg.total() - m.planar_variation()).abs() <= 1e-12 * m.planar_variation().max(1.0));
    }

    #[test]
    fn gamma_splits_into_energy_and_triangle(k in kernel_strategy(), n in 2usize..64) {
        let g = Grid::new(n, 1.0).unwrap();
        let m = Measure::build(&k, &g).unwrap();
        let (e, tri) = (m.energy_curve(), m.triangle_curve());
        for (i, t) in g.points().into_iter().enumerate() {
            let gap = k.variance_curve(t).unwrap() - e[i] - 2.0 * tri[i];
            prop_assert!(gap.abs() <= 1e-10, "t = {}: gap {}", t, gap);
        }
    }
}

#[test]
fn wiener_integral_is_linear_per_path() {
    let g = Grid::new(32, 1.0).unwrap();
    let k = Kernel::fbm(0.3, 1.0).unwrap();
    let x = sample_paths(&k, &g, 20, 3).unwrap();
    let a = Step::from_fn(g, |t| t.sin());
    let b = Step::indicator(g, 0.25, 0.75).unwrap();
    let sum = wiener_integral(&x, &a.scale(2.0).add(&b).unwrap(), 1.0).unwrap();
    let ia = wiener_integral(&x, &a, 1.0).unwrap();
    let ib = wiener_integral(&x, &b, 1.0).unwrap();
    for m in 0..x.len() {
        assert_relative_eq!(sum[m], 2.0 * ia[m] + ib[m], epsilon = 1e-12);
    }
    // indicators integrate to increments
    for (m, path) in x.paths().enumerate() {
        assert_relative_eq!(ib[m], path[24] - path[8], epsilon = 1e-12);
    }
}

#[test]
fn symmetric_integral_of_the_path_is_half_its_square() {
    let g = Grid::new(64, 1.0).unwrap();
    let k = Kernel::parse("bifbm:H=0.6,K=0.7", 1.0).unwrap();
    let x = sample_paths(&k, &g, 50, 4).unwrap();
    let id = |v: f64| v;
    let s = symmetric_integral(Integrand::OfPath(&id), &x, g.step(), 1.0).unwrap();
    for (v, path) in s.iter().zip(x.paths()) {
        assert_relative_eq!(*v, 0.5 * path[64] * path[64], epsilon = 1e-12);
    }
}

#[test]
fn refinement_separates_rough_and_smooth_fbm() {
    let cells = [16, 64, 256];
    let rough = refine_scan(&Kernel::fbm(0.3, 1.0).unwrap(), &cells).unwrap();
    let smooth = refine_scan(&Kernel::fbm(0.7, 1.0).unwrap(), &cells).unwrap();
    assert!(rough.growing);
    assert!(!smooth.growing);
    for row in &smooth.rows {
        assert_relative_eq!(row.planar_variation, 1.0, epsilon = 1e-10);
        // E_n(1) = n^{1-2H}
        assert_relative_eq!(row.energy, (row.cells as f64).powf(-0.4), max_relative = 1e-9);
    }
}
