//! Scratch: certificate behavior of the historic schedule under rate scaling.

use saddle_core::gap::saddle_oracle;
use saddle_core::linalg;
use saddle_core::problem::{
    build_problem, ComponentKind, ComponentSpec, PartitionSpec, ProblemSpec, ProxFriendly,
    SaddleProblem,
};
use saddle_core::schedule::{
    certify_schedule, make_schedule, CertifySource, Regime, SamplingPlan, SolverKind,
};
use saddle_core::solver::stochastic::run_stochastic;

fn affine_toy(n: usize, d: usize, blocks: usize) -> SaddleProblem {
    let comps: Vec<ComponentSpec> = (0..n)
        .map(|j| {
            let w: Vec<f64> = (0..d)
                .map(|i| 0.3 + 0.7 * (((j * d + i * i + 3) % 7) as f64) / 7.0)
                .collect();
            let g = linalg::dot(&w, &w).sqrt();
            ComponentSpec::with_constants(
                ComponentKind::Affine { w, b: 0.1 * (j as f64) - 0.2 },
                g,
                0.0,
            )
        })
        .collect();
    let mut spec = ProblemSpec::new(d, comps);
    spec.partition = PartitionSpec::Uniform(blocks);
    spec.phi = ProxFriendly::SquaredNorm { strength: 1.0 };
    spec.psi = ProxFriendly::SquaredNorm { strength: 1.0 };
    build_problem(spec).unwrap()
}

fn main() {
    let problem = affine_toy(4, 2, 2);
    let kind = SolverKind::StochasticHistoric;
    let regime = Regime::for_problem(&problem, kind);
    let plan = SamplingPlan::uniform(&problem.partition).unwrap();
    let source = CertifySource::Plan(&plan);
    let comparator = saddle_oracle(&problem, None).unwrap();
    let (x0, y0) = (vec![0.4, -0.3], vec![0.2, 0.1, -0.1, 0.3]);
    let t = 300usize;
    let seeds = 200usize;

    let base = make_schedule(kind, &regime, &source, None, t).unwrap();
    let alpha0 = base.alpha();
    println!("emitted alpha = {alpha0:.6e}  binding = {}", base.alpha_binding());
    let report = certify_schedule(&base, &regime, &source, t).unwrap();
    println!(
        "certify: checked {} violations {} max {:.3e}",
        report.checked, report.violations, report.max_violation
    );

    let t_long = 2000usize;
    let long = make_schedule(kind, &regime, &source, None, t_long).unwrap();
    let a_vec: Vec<f64> = (0..=long.max_index()).map(|k| long.a(k)).collect();
    let mk = |w: f64, avec: &[f64]| {
        saddle_core::schedule::Schedule::from_sequences(
            kind,
            problem.num_blocks(),
            alpha0,
            avec.to_vec(),
            vec![w; avec.len()],
            vec![w; avec.len()],
        )
        .unwrap()
    };

    // Saturation: anchored and plain lhs over a long horizon.
    for (label, w) in [("w=0.5", 0.5f64), ("w=0.1", 0.1), ("w=0.02", 0.02), ("w=0", 0.0)] {
        let schedule = mk(w, &a_vec);
        let mut lhs_at = [0.0f64; 4];
        let checkpoints = [100usize, 300, 1000, 2000];
        let mut rhs = 0.0;
        for seed in 0..seeds {
            for (i, &tc) in checkpoints.iter().enumerate() {
                let (state, _) = run_stochastic(
                    &problem, &regime, &schedule, &plan, &x0, &y0, tc, seed as u64,
                    Some(&comparator),
                )
                .unwrap();
                let diag = state.diagnostics().unwrap();
                let (lhs, r) = diag.certificate(&regime, &schedule);
                lhs_at[i] += lhs / seeds as f64;
                rhs = r;
            }
        }
        println!(
            "{label:>7}: lhs@100 {:.4}  @300 {:.4}  @1000 {:.4}  @2000 {:.4}  rhs {rhs:.4}",
            lhs_at[0], lhs_at[1], lhs_at[2], lhs_at[3]
        );
    }
}
