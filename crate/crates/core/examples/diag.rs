// scratch diagnostic
use levystat::*;
fn main() {
    let coeffs = CoefficientSet::linear_drift(1, -1.0).with_constant_diffusion(2f64.sqrt());
    let h = TestFunction::bump(1, vec![0.0], 2.0, 1.0);
    let quad = QuadratureSpec { inner_cutoff: 1e-4, outer_cutoff: 1e4, nodes_per_decade: 32, angular_nodes: 32 };
    for y in [0.0, 0.5] {
        let rep = generator::generator_consistency_check(&h, &[y], &coeffs, &[0.4, 0.2, 0.1, 0.05, 0.025], 2_000_000, &quad, 7).unwrap();
        println!("y={y} gen={:.6} intercept={:.6}±{:.2e} slope={:?} ok={}", rep.generator.value, rep.intercept, rep.intercept_stderr, rep.slope, rep.intercept_consistent);
        for p in &rep.per_dt {
            println!("  dt={:.3} q={:.6} se={:.2e} |q-L|={:.3e}", p.dt, p.quotient, p.stderr, (p.quotient-rep.generator.value).abs());
        }
    }
}
