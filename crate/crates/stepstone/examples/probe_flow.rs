use stepstone::duality::{brownian_flow_reference, merge_law_quadrature, BrownianFlowParams};

fn main() {
    let (sigma2, gamma, t_end) = (0.5079365079365079f64, 0.569620253164557f64, 2.0f64);
    let probes = [0.5, 1.0, 1.5, 2.0];
    for &dt_b in &[2e-4f64, 1e-4, 5e-5, 2.5e-5] {
        let params = BrownianFlowParams {
            sigma2, gamma, x1: 0.0, x2: 0.0, t_end, dt_b, replicates: 40_000,
        };
        let r = brownian_flow_reference(&params, 11).unwrap();
        print!("dt={dt_b:.1e} eps={:.4}", r.epsilon);
        for &t in &probes {
            let exact = merge_law_quadrature(gamma, sigma2, t).unwrap();
            print!("  bias@{t}={:+.4}", r.cdf_at(t) - exact);
        }
        println!("  refine_delta={:+.4} se={:.4}", r.refinement_delta, r.refinement_se);
    }
}
