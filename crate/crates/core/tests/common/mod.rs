//! Central finite-difference check of the joint-loss gradients.

use posespace::geometry::WindowMode;
use posespace::nets::{Architecture, JointModel, Sample};
use posespace::GestureClass;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
/// Denominator floor for parameters whose gradient is essentially zero.
const FLOOR: f64 = 1e-6;
/// A leaky-relu or max-pool kink inside the stencil shows up as finite
/// differences that change with the step. Such parameters are compared at
/// the finer step instead; the analytic gradient plays no part in choosing.
const STEP_AGREEMENT: f64 = 5e-5;

#[derive(Debug, Default)]
pub struct Outcome {
    pub worst: f64,
    pub worst_at_kinks: f64,
    pub checked: usize,
    pub kinks: usize,
}

pub fn toy(rng: &mut ChaCha8Rng, seed: u64) -> JointModel {
    let mode = if rng.random_bool(0.5) { WindowMode::Concat } else { WindowMode::PointSet };
    let arch = Architecture {
        mode,
        frames: [1, 2, 8][rng.random_range(0..3)],
        pose_dim: rng.random_range(3..=6),
        encoder_hidden: vec![4, 4],
        classifier_hidden: vec![4, 4],
        leaky_alpha: 0.01,
    };
    JointModel::new(&arch, seed)
}

fn loss(model: &JointModel, windows: &[Vec<f64>], labels: &[GestureClass], lambda: f64) -> f64 {
    let batch: Vec<Sample<'_>> = windows.iter().zip(labels).map(|(w, l)| Sample { window: w, label: *l }).collect();
    model.joint_loss(&batch, lambda).unwrap().loss
}

/// Max relative error over every parameter of one model. Parameters whose
/// stencil straddles a kink are counted separately.
pub fn check(model: &JointModel, windows: &[Vec<f64>], labels: &[GestureClass], lambda: f64) -> Outcome {
    let batch: Vec<Sample<'_>> = windows.iter().zip(labels).map(|(w, l)| Sample { window: w, label: *l }).collect();
    let report = model.joint_loss(&batch, lambda).unwrap();
    let analytic: Vec<Vec<f64>> = report.gradients.tensors().iter().map(|t| t.to_vec()).collect();
    let mut out = Outcome::default();
    let mut probe = model.clone();
    for (t, grads) in analytic.iter().enumerate() {
        for (i, g) in grads.iter().enumerate() {
            let mut central = |h: f64| {
                let original = probe.parameters()[t][i];
                probe.parameters_mut()[t][i] = original + h;
                let plus = loss(&probe, windows, labels, lambda);
                probe.parameters_mut()[t][i] = original - h;
                let minus = loss(&probe, windows, labels, lambda);
                probe.parameters_mut()[t][i] = original;
                (plus - minus) / (2.0 * h)
            };
            let numeric = central(H);
            // Two estimates agree up to a relative tolerance plus the
            // roundoff of the finer one.
            let scale = report.loss.abs().max(1.0);
            let agree = |a: f64, b: f64, h_fine: f64| {
                (a - b).abs() <= STEP_AGREEMENT * a.abs().max(b.abs()) + 8.0 * f64::EPSILON * scale / h_fine
            };
            let mut fine = central(H / 10.0);
            if !agree(numeric, fine, H / 10.0) {
                // Shrink the step until two successive estimates agree.
                let mut h = H / 10.0;
                let mut previous = fine;
                while h > 1e-9 {
                    h /= 10.0;
                    fine = central(h);
                    if agree(previous, fine, h) {
                        break;
                    }
                    previous = fine;
                }
                let rel = (g - fine).abs() / g.abs().max(fine.abs()).max(FLOOR);
                out.worst_at_kinks = out.worst_at_kinks.max(rel);
                out.kinks += 1;
                continue;
            }
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(FLOOR);
            out.worst = out.worst.max(rel);
            out.checked += 1;
        }
    }
    out
}

/// Run the check on `models` random toy models; returns the combined
/// outcome or a description of the first failure.
pub fn run(models: u64, seed: u64) -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = Outcome::default();
    let mut modes = [0usize; 2];
    for m in 0..models {
        let model = toy(&mut rng, m);
        modes[(model.mode() == WindowMode::PointSet) as usize] += 1;
        let windows: Vec<Vec<f64>> =
            (0..3).map(|_| (0..model.window_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<GestureClass> =
            (0..3).map(|_| GestureClass::from_index(rng.random_range(0..6)).unwrap()).collect();
        let lambda = rng.random_range(0.0..2.0);
        let out = check(&model, &windows, &labels, lambda);
        if out.checked + out.kinks != model.parameter_count() {
            return Err(format!(
                "model {m}: {} of {} parameters checked",
                out.checked + out.kinks,
                model.parameter_count()
            ));
        }
        if out.worst >= 1e-4 || out.worst_at_kinks >= 1e-4 {
            return Err(format!(
                "model {m} ({:?}, N={}): relative error {:e}, {:e} with a refined step",
                model.mode(),
                model.frames(),
                out.worst,
                out.worst_at_kinks
            ));
        }
        total.worst = total.worst.max(out.worst);
        total.worst_at_kinks = total.worst_at_kinks.max(out.worst_at_kinks);
        total.checked += out.checked;
        total.kinks += out.kinks;
    }
    if modes.contains(&0) {
        return Err(format!("only one window mode drawn: {modes:?}"));
    }
    if total.kinks as f64 >= 0.01 * (total.checked + total.kinks) as f64 {
        return Err(format!("{} kinks of {} parameters", total.kinks, total.checked + total.kinks));
    }
    Ok(total)
}
