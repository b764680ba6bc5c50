//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop once every vertex is within this distance (max-norm) of the best.
    pub x_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            max_evals: 400,
            x_tol: 1e-6,
        }
    }
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of the given
/// per-coordinate steps. Returns the best point and value seen; ties keep the
/// earlier point.
pub fn minimize<const N: usize, F>(f: F, x0: [f64; N], steps: [f64; N], cfg: &NelderMeadConfig) -> ([f64; N], f64)
where
    F: Fn(&[f64; N]) -> f64,
{
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: &[f64; N]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let f0 = eval(&x0);
    simplex.push((x0, f0));
    for i in 0..N {
        let mut x = x0;
        x[i] += steps[i];
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    let lerp = |a: &[f64; N], b: &[f64; N], t: f64| -> [f64; N] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };
    loop {
        // stable sort keeps earlier (incumbent) points first among ties
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].0;
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if evals.get() >= cfg.max_evals || spread < cfg.x_tol {
            break;
        }
        let centroid: [f64; N] =
            std::array::from_fn(|i| simplex[..N].iter().map(|(x, _)| x[i]).sum::<f64>() / N as f64);
        let (worst, f_worst) = simplex[N];
        let f_best = simplex[0].1;
        let f_second = simplex[N - 1].1;
        let reflected = lerp(&centroid, &worst, -1.0);
        let f_r = eval(&reflected);
        if f_r < f_best {
            let expanded = lerp(&centroid, &worst, -2.0);
            let f_e = eval(&expanded);
            simplex[N] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < f_second {
            simplex[N] = (reflected, f_r);
        } else {
            let (target, f_target) = if f_r < f_worst {
                (reflected, f_r)
            } else {
                (worst, f_worst)
            };
            let contracted = lerp(&centroid, &target, 0.5);
            let f_c = eval(&contracted);
            if f_c < f_target {
                simplex[N] = (contracted, f_c);
            } else {
                for vertex in simplex.iter_mut().skip(1) {
                    let x = lerp(&best, &vertex.0, 0.5);
                    let fx = eval(&x);
                    *vertex = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}
