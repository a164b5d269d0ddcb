//! Robot force planning against a human who learns from the robot's forces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::human::{gradient_update, human_action, HumanKind, HumanModel};
use super::linalg::Vec2;
use super::riccati::{best_response_forces, coupled_gains, nash_rollout, LqSystem};
use super::LqParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seed of the perturbed starting points when none is configured.
pub const PLANNER_SEED: u64 = 0x7472_7573_7470_6c6e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerOptions<T> {
    /// Descent iterations per starting point.
    pub max_iters: usize,
    /// Forces are clamped to `[-force_limit, force_limit]`.
    pub force_limit: T,
    /// Random perturbations of the Nash forces used as extra starts.
    pub perturbations: usize,
    pub perturbation_sd: T,
    pub seed: u64,
    /// Restrict forces to these values and search by coordinate moves.
    pub grid: Option<Vec<T>>,
}

impl<T: Scalar> Default for PlannerOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 200,
            force_limit: T::lit(20.0),
            perturbations: 3,
            perturbation_sd: T::one(),
            seed: PLANNER_SEED,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustPlan<T> {
    pub forces: Vec<T>,
    /// Robot cost predicted under the assumed human.
    pub cost: T,
    /// No start improved on the Nash forces, which are returned instead.
    pub warning: bool,
}

/// Robot cost of open-loop `forces` when the human learns with rate `eta`.
struct Objective<'a, T> {
    sys: &'a LqSystem<T>,
    x0: Vec2<T>,
    theta_r: T,
    human: HumanModel<T>,
}

impl<T: Scalar> Objective<'_, T> {
    fn cost(&self, forces: &[T]) -> Result<T> {
        let mut x = self.x0;
        let mut human = self.human;
        let mut effort = T::zero();
        for (t, &u_r) in forces.iter().enumerate() {
            let u_h = human_action(&human, x, t, self.sys, T::zero())?;
            effort += u_r * u_r;
            human.estimate = gradient_update(&human, u_r, x, t, self.sys)?;
            x = self.sys.step(x, u_r, u_h);
        }
        Ok(x.norm_sq() + self.theta_r * self.sys.dt * effort)
    }

    /// Central-difference gradient.
    fn gradient(&self, forces: &[T]) -> Result<Vec<T>> {
        let mut probe = forces.to_vec();
        let mut g = Vec::with_capacity(forces.len());
        for i in 0..forces.len() {
            let h = T::lit(1e-5) * T::one().max(forces[i].abs());
            probe[i] = forces[i] + h;
            let up = self.cost(&probe)?;
            probe[i] = forces[i] - h;
            let down = self.cost(&probe)?;
            probe[i] = forces[i];
            g.push((up - down) / (h + h));
        }
        Ok(g)
    }
}

fn project<T: Scalar>(forces: &mut [T], limit: T) {
    for u in forces.iter_mut() {
        *u = u.max(-limit).min(limit);
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking.
fn descend<T: Scalar>(obj: &Objective<'_, T>, start: Vec<T>, opts: &PlannerOptions<T>) -> Result<(Vec<T>, T)> {
    let mut x = start;
    project(&mut x, opts.force_limit);
    let mut f = obj.cost(&x)?;
    let mut g = obj.gradient(&x)?;
    let gnorm = dot(&g, &g).sqrt();
    let mut alpha = if gnorm > T::zero() { T::one() / gnorm } else { T::one() };
    let mut stalled = 0;
    for _ in 0..opts.max_iters {
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<T> = x.iter().zip(&g).map(|(&xi, &gi)| xi - alpha * gi).collect();
            project(&mut trial, opts.force_limit);
            let step: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let decrease = dot(&g, &step);
            if dot(&step, &step) == T::zero() {
                break;
            }
            let ft = obj.cost(&trial)?;
            if ft <= f + T::lit(1e-4) * decrease {
                accepted = Some((trial, ft, step));
                break;
            }
            alpha *= T::lit(0.5);
        }
        let Some((next, fn_, s)) = accepted else { break };
        let gn = obj.gradient(&next)?;
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > T::zero() { dot(&s, &s) / sy } else { alpha * T::lit(2.0) };
        alpha = alpha.max(T::lit(1e-10)).min(T::lit(1e6));
        let improvement = f - fn_;
        x = next;
        f = fn_;
        g = gn;
        if improvement <= T::lit(1e-12) * (T::one() + f.abs()) {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok((x, f))
}

/// Coordinate search over grid-valued forces: single and pairwise moves until
/// no move improves.
fn grid_search<T: Scalar>(obj: &Objective<'_, T>, start: &[T], levels: &[T]) -> Result<(Vec<T>, T)> {
    let snap = |u: T| {
        *levels
            .iter()
            .min_by(|a, b| (**a - u).abs().partial_cmp(&(**b - u).abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("grid is nonempty")
    };
    let mut x: Vec<T> = start.iter().map(|&u| snap(u)).collect();
    let mut f = obj.cost(&x)?;
    let n = x.len();
    loop {
        let mut improved = false;
        for i in 0..n {
            for j in i..n {
                let (ki, kj) = (levels.len(), if j == i { 1 } else { levels.len() });
                let mut best: Option<(T, T, T)> = None;
                for a in 0..ki {
                    for b in 0..kj {
                        let mut trial = x.clone();
                        trial[i] = levels[a];
                        if j != i {
                            trial[j] = levels[b];
                        }
                        let ft = obj.cost(&trial)?;
                        if ft < f && best.is_none_or(|(bf, _, _)| ft < bf) {
                            best = Some((ft, trial[i], trial[j]));
                        }
                    }
                }
                if let Some((ft, ui, uj)) = best {
                    x[i] = ui;
                    x[j] = uj;
                    f = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok((x, f));
        }
    }
}

/// Open-loop robot forces minimizing the robot's true cost when the human
/// starts from `estimate0` and learns with rate `eta_assumed`.
///
/// Descent runs from the Nash forces, from zero and from perturbed Nash
/// forces; the best result wins. With a force grid configured, the search is
/// over grid values instead.
pub fn plan_trust_robot<T: Scalar>(
    params: &LqParams<T>,
    theta_r: T,
    theta_h: T,
    estimate0: T,
    eta_assumed: T,
    opts: &PlannerOptions<T>,
) -> Result<TrustPlan<T>> {
    HumanKind::Learn { eta: eta_assumed }.validate()?;
    if !(opts.force_limit > T::zero()) {
        return Err(Error::Config("force limit must be positive".into()));
    }
    let sys = LqSystem::from_params(params)?;
    let obj = Objective {
        sys: &sys,
        x0: params.x0(),
        theta_r,
        human: HumanModel::new(HumanKind::Learn { eta: eta_assumed }, estimate0, theta_h),
    };
    let gains = coupled_gains(&sys, theta_r, theta_h)?;
    let (_, mut nash, _) = nash_rollout(&sys, &gains, params.x0());
    project(&mut nash, opts.force_limit);
    let nash_cost = obj.cost(&nash)?;

    let mut starts = vec![nash.clone(), vec![T::zero(); sys.steps]];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, opts.perturbation_sd.as_f64()).map_err(|e| Error::Config(e.to_string()))?;
    for _ in 0..opts.perturbations {
        starts.push(nash.iter().map(|&u| u + T::lit(noise.sample(&mut rng))).collect());
    }

    let mut best: Option<(Vec<T>, T)> = None;
    for start in starts {
        let (x, f) = match &opts.grid {
            None => descend(&obj, start, opts)?,
            Some(levels) if levels.is_empty() => return Err(Error::Config("force grid is empty".into())),
            Some(levels) => grid_search(&obj, &start, levels)?,
        };
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    let (forces, cost) = best.expect("at least two starts");
    if opts.grid.is_none() && !(cost < nash_cost) {
        return Ok(TrustPlan { forces: nash, cost: nash_cost, warning: true });
    }
    Ok(TrustPlan { forces, cost, warning: false })
}

/// Optimistic robot: for each candidate `theta_tilde` the human plays its
/// Nash forces for `(theta_tilde, theta_h)` and the robot best-responds under
/// its true `theta_r`. Returns the candidate with the lowest robot cost
/// (smaller candidate on ties) and the robot's forces.
pub fn optimistic_plan<T: Scalar>(params: &LqParams<T>, theta_r: T, theta_h: T, grid: &[T]) -> Result<(T, Vec<T>)> {
    if grid.is_empty() {
        return Err(Error::Contract("optimistic search needs a nonempty grid".into()));
    }
    let sys = LqSystem::from_params(params)?;
    let mut best: Option<(T, T, Vec<T>)> = None;
    for &theta_tilde in grid {
        let gains = coupled_gains(&sys, theta_tilde, theta_h)?;
        let (_, _, human) = nash_rollout(&sys, &gains, params.x0());
        let robot = best_response_forces(sys.a, sys.b_r, sys.b_h, params.x0(), &human, theta_r * sys.dt)?;
        let mut x = params.x0();
        let mut effort = T::zero();
        for (&r, &h) in robot.iter().zip(&human) {
            x = sys.step(x, r, h);
            effort += r * r;
        }
        let cost = x.norm_sq() + theta_r * sys.dt * effort;
        let better = match &best {
            None => true,
            Some((bt, bc, _)) => cost < *bc || (cost == *bc && theta_tilde < *bt),
        };
        if better {
            best = Some((theta_tilde, cost, robot));
        }
    }
    let (theta_tilde, _, forces) = best.expect("grid is nonempty");
    Ok((theta_tilde, forces))
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn logspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| if n == 1 { lo } else { (a + (b - a) * T::from_count(i) / T::from_count(n - 1)).exp() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1e-2f64, 1e2, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[49] - 1e2).abs() < 1e-12);
    }

    #[test]
    fn objective_of_zero_forces() {
        let p = LqParams::<f64>::standard();
        let sys = LqSystem::from_params(&p).unwrap();
        let obj = Objective { sys: &sys, x0: p.x0(), theta_r: 5.0, human: HumanModel::new(HumanKind::Fixed, 0.1, 1.0) };
        // Only the human pushes; cost is the final squared distance.
        let c = obj.cost(&[0.0; 20]).unwrap();
        assert!(c > 0.0 && c < 1.0);
    }
}
