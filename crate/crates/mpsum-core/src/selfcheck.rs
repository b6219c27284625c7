//! Invariant suites runnable from the CLI. Each suite prints one line;
//! any failure flips the process exit code. A debug fault hook exists so
//! the harness itself can be shown to catch a planted bug.

use crate::classifier::{onecycle_lr, OneCycleSchedule};
use crate::compression::poincare_distance;
use crate::encoder::{
    discretize, selective_scan_parallel, selective_scan_seq, DELTA_TAYLOR_THRESHOLD,
};
use crate::error::Result;
use crate::numerics::{artanh, jacobi_eigh, rng_derive, DenseMatrix};
use crate::rouge::{lcs_len, rouge_l, rouge_n};

/// Deliberately planted faults for exercising the selfcheck harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the discretized input term.
    DiscretizationSign,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, outcome: std::result::Result<String, String>) -> SuiteResult {
    match outcome {
        Ok(detail) => SuiteResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn check(cond: bool, msg: &str) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

type DiscretizeFn = Box<dyn Fn(f64, f64, f64) -> Result<(f64, f64)>>;

fn discretize_fn(fault: Option<Fault>) -> DiscretizeFn {
    match fault {
        Some(Fault::DiscretizationSign) => Box::new(|delta, a, b| {
            let (a_bar, b_bar) = discretize(delta, a, b)?;
            Ok((a_bar, -b_bar))
        }),
        None => Box::new(discretize),
    }
}

fn scan_equivalence_suite() -> std::result::Result<String, String> {
    let mut rng = rng_derive(1000, "selfcheck/scan");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let steps = 128;
        let n_state = 16;
        let len = steps * n_state;
        let a: Vec<f64> = (0..len).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        let c: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        let seq = selective_scan_seq(&a, &b, &c, n_state).map_err(|e| e.to_string())?;
        let par = selective_scan_parallel(&a, &b, &c, n_state).map_err(|e| e.to_string())?;
        for (s, p) in seq.iter().zip(&par) {
            worst = worst.max((s - p).abs());
        }
    }
    check(worst <= 1e-10, &format!("max sequential/parallel gap {worst:e}"))?;
    Ok(format!("max gap {worst:.2e} over 20 cases"))
}

fn discretization_suite(f: &DiscretizeFn) -> std::result::Result<String, String> {
    let (a_bar, b_bar) = f(0.1, -1.0, 1.0).map_err(|e| e.to_string())?;
    check(
        (a_bar - 0.9048374).abs() <= 1e-7,
        &format!("a_bar {a_bar} != 0.9048374"),
    )?;
    check(
        (b_bar - 0.0951626).abs() <= 1e-7,
        &format!("b_bar {b_bar} != 0.0951626"),
    )?;
    // Taylor and exact branches agree at the crossover.
    let delta = DELTA_TAYLOR_THRESHOLD;
    let exact = crate::encoder::discretize_with_threshold(delta, -1.0, 1.0, 0.0)
        .map_err(|e| e.to_string())?;
    let taylor = crate::encoder::discretize_with_threshold(delta, -1.0, 1.0, 1.0)
        .map_err(|e| e.to_string())?;
    check(
        (exact.1 - taylor.1).abs() <= 1e-12,
        "taylor/exact branch mismatch at the threshold",
    )?;
    Ok("frozen scalar case and branch crossover agree".into())
}

fn gradient_suite() -> std::result::Result<String, String> {
    // Head-path probe: batchnorm -> linear against finite differences.
    use crate::classifier::{bce_loss, linear_forward, BatchNormState, LinearHead};
    let mut rng = rng_derive(1001, "selfcheck/grad");
    let batch: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| rng.normal()).collect())
        .collect();
    let labels: Vec<f64> = (0..6).map(|i| f64::from(i % 2 == 0)).collect();
    let head = LinearHead {
        w: (0..3).map(|_| rng.normal()).collect(),
        b: 0.1,
    };

    let loss_of = |w: &[f64]| -> f64 {
        let mut bn = BatchNormState::new(3);
        let (out, _) = bn.forward_train(&batch).unwrap();
        let h = LinearHead {
            w: w.to_vec(),
            b: head.b,
        };
        let logits: Vec<f64> = out.iter().map(|row| linear_forward(row, &h).unwrap()).collect();
        bce_loss(&logits, &labels).unwrap().0
    };

    let mut bn = BatchNormState::new(3);
    let (out, _) = bn.forward_train(&batch).unwrap();
    let logits: Vec<f64> = out
        .iter()
        .map(|row| linear_forward(row, &head).unwrap())
        .collect();
    let (_, g_logits) = bce_loss(&logits, &labels).unwrap();
    let mut g_w = vec![0.0; 3];
    for (i, g) in g_logits.iter().enumerate() {
        for f in 0..3 {
            g_w[f] += g * out[i][f];
        }
    }
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for f in 0..3 {
        let mut wp = head.w.clone();
        wp[f] += eps;
        let mut wm = head.w.clone();
        wm[f] -= eps;
        let fd = (loss_of(&wp) - loss_of(&wm)) / (2.0 * eps);
        let denom = fd.abs().max(g_w[f].abs()).max(1e-6);
        worst = worst.max((fd - g_w[f]).abs() / denom);
    }
    check(worst <= 1e-4, &format!("head gradient error {worst:e}"))?;
    Ok(format!("max relative gradient error {worst:.2e}"))
}

fn poincare_suite() -> std::result::Result<String, String> {
    let mut rng = rng_derive(1002, "selfcheck/ball");
    let mut point = |dim: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = rng.uniform() * 0.99;
        raw.iter().map(|x| x / n * target).collect()
    };
    for _ in 0..200 {
        let a = point(4);
        let b = point(4);
        let c = point(4);
        let dab = poincare_distance(&a, &b).map_err(|e| e.to_string())?;
        let dba = poincare_distance(&b, &a).map_err(|e| e.to_string())?;
        let dac = poincare_distance(&a, &c).map_err(|e| e.to_string())?;
        let dbc = poincare_distance(&b, &c).map_err(|e| e.to_string())?;
        check(dab >= 0.0, "negative distance")?;
        check(dab == dba, "asymmetric distance")?;
        check(dac <= dab + dbc + 1e-9, "triangle inequality violated")?;
        check(
            poincare_distance(&a, &a).map_err(|e| e.to_string())? == 0.0,
            "d(a, a) != 0",
        )?;
    }
    // closed form at the origin
    let b = vec![0.6, 0.0, 0.0, 0.0];
    let d = poincare_distance(&[0.0; 4], &b).map_err(|e| e.to_string())?;
    let expected = 2.0 * artanh(0.6).map_err(|e| e.to_string())?;
    check((d - expected).abs() <= 1e-9, "origin closed form mismatch")?;
    Ok("metric axioms hold on 200 triples".into())
}

fn eigensolver_suite() -> std::result::Result<String, String> {
    let mut rng = rng_derive(1003, "selfcheck/eigen");
    let n = 30;
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.normal();
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    let eig = jacobi_eigh(&m).map_err(|e| e.to_string())?;
    let mq = m.matmul(&eig.eigenvectors).map_err(|e| e.to_string())?;
    let mut resid = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let d = mq.get(i, j) - eig.eigenvectors.get(i, j) * eig.eigenvalues[j];
            resid += d * d;
        }
    }
    let resid = resid.sqrt();
    let bound = 1e-8 * m.frobenius_norm();
    check(resid <= bound, &format!("residual {resid:e} > {bound:e}"))?;
    let trace_gap = (eig.eigenvalues.iter().sum::<f64>() - m.trace()).abs();
    check(trace_gap <= 1e-8, &format!("trace gap {trace_gap:e}"))?;
    Ok(format!("reconstruction residual {resid:.2e}"))
}

fn rouge_suite() -> std::result::Result<String, String> {
    let cand: Vec<String> = ["the", "cat"].iter().map(|s| s.to_string()).collect();
    let refr: Vec<String> = ["the", "cat", "sat"].iter().map(|s| s.to_string()).collect();
    check(
        (rouge_n(&cand, &refr, 1).f1 - 0.8).abs() <= 1e-12,
        "R1 hand case",
    )?;
    check(
        (rouge_n(&cand, &refr, 2).f1 - 2.0 / 3.0).abs() <= 1e-12,
        "R2 hand case",
    )?;
    check((rouge_l(&cand, &refr).f1 - 0.8).abs() <= 1e-12, "RL hand case")?;
    check(lcs_len(&cand, &refr) == 2, "LCS hand case")?;
    Ok("hand-computed cases match".into())
}

fn schedule_suite() -> std::result::Result<String, String> {
    let sched = OneCycleSchedule::new(2e-5, 1000);
    let at = |s: usize| onecycle_lr(s, &sched).unwrap();
    check((at(0) - 8e-7).abs() <= 1e-12, "start lr")?;
    check((at(300) - 2e-5).abs() <= 1e-12, "peak lr")?;
    check((at(1000) - 8e-11).abs() <= 1e-12, "final lr")?;
    Ok("one-cycle endpoints exact".into())
}

/// Run every invariant suite; `fault` plants a bug to prove the harness
/// catches one.
pub fn run_selfcheck(fault: Option<Fault>) -> Vec<SuiteResult> {
    let discretize = discretize_fn(fault);
    vec![
        suite("scan-equivalence", scan_equivalence_suite()),
        suite("discretization", discretization_suite(&discretize)),
        suite("gradient-checks", gradient_suite()),
        suite("poincare-metric", poincare_suite()),
        suite("eigensolver", eigensolver_suite()),
        suite("rouge-hand-cases", rouge_suite()),
        suite("schedule-endpoints", schedule_suite()),
    ]
}
