use super::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over all parameter entries of `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
    /// Every compared entry, in parameter order.
    pub entries: Vec<GradEntry>,
}

/// One parameter entry compared by [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub param: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradEntry {
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(1e-8)
    }

    pub fn absolute_error(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    /// Larger of the two gradient magnitudes.
    pub fn magnitude(&self) -> f64 {
        self.analytic.abs().max(self.numeric.abs())
    }
}

/// Compares the tape gradient of a scalar expression against central differences.
///
/// `expr` receives a fresh tape and the bound parameter leaves and must return
/// a `1 x 1` node. Parameter values in `store` are restored afterwards.
pub fn gradient_check<F>(store: &mut ParamStore, step: f64, mut expr: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::config(format!("step {step} outside (0, 1e-3]")));
    }
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape)?;
    let out = expr(&mut tape, &vars)?;
    if tape.value(out).len() != 1 {
        return Err(Error::Usage("gradient_check expression must be scalar".into()));
    }
    let grads = tape.backward_scalar(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(store.iter())
        .map(|(v, p)| match grads.get(*v) {
            Some(g) => g.as_slice().to_vec(),
            None => vec![0.0; p.value.len()],
        })
        .collect();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let vs = store.bind(&mut t)?;
        let o = expr(&mut t, &vs)?;
        Ok(t.scalar(o))
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
        entries: Vec::new(),
    };
    for (pi, analytic) in analytic.iter().enumerate() {
        let id = ParamId(pi);
        for (ei, &a) in analytic.iter().enumerate() {
            let original = store.get(id).value.as_slice()[ei];
            store.get_mut(id).value.as_mut_slice()[ei] = original + step;
            let plus = eval(store);
            store.get_mut(id).value.as_mut_slice()[ei] = original - step;
            let minus = eval(store);
            store.get_mut(id).value.as_mut_slice()[ei] = original;
            let numeric = (plus? - minus?) / (2.0 * step);

            let entry = GradEntry {
                param: pi,
                index: ei,
                analytic: a,
                numeric,
            };
            let rel = entry.relative_error();
            report.entries.push(entry);
            report.entries_checked += 1;
            if report.entries_checked == 1 || rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = ei;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
