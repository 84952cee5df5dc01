use sgdm_lab::continuous::{ode_integrate, ode_rate_check, OdeParams};
use sgdm_lab::problems::{synthetic_blobs, Objective};

const PAIRS: [(f64, f64); 5] = [(1.0, 1.5), (1.0, 2.0), (2.0, 1.0), (2.0, 1.5), (3.0, 0.5)];

fn sweep(obj: &Objective, x0: &[f64]) {
    let v0 = vec![0.0; obj.dim()];
    for (p, alpha) in PAIRS {
        let params = OdeParams {
            p,
            alpha,
            t0: 1.0,
            t_end: 50.0,
            dt: 1e-3,
        };
        let sol = ode_integrate(obj, &params, x0, &v0).unwrap();
        let rep = ode_rate_check(&sol, 1e-8).unwrap();
        assert!(rep.passed(), "{} (p, alpha) = ({p}, {alpha}): {rep:?}", obj.name());
    }
}

#[test]
fn energy_and_rate_hold_on_quadratic() {
    let obj = Objective::random_quadratic(10, 4, 0.1, 1.0).unwrap();
    sweep(&obj, &[1.0; 10]);
}

#[test]
fn energy_and_rate_hold_on_logistic() {
    let d = synthetic_blobs(100, 5, 2.0, 1).unwrap();
    let obj = Objective::logistic(d.features, d.labels)
        .unwrap()
        .refined(1e-10)
        .unwrap();
    sweep(&obj, &[2.0, -1.0, 0.5, 0.0, 1.0]);
}
