//! Evolution-strategies trainer with antithetic sampling and centred ranks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::envs::EnvKind;
use crate::error::{invalid, Result};
use crate::par;
use crate::policy::{PolicyShape, PortablePolicy};
use crate::rng::{derive_seed, SplitMix64};
use crate::runtime::{episode_seed, run_episode};
use crate::envs::Termination;

const INIT_STREAM: u64 = 0x1;
const NOISE_STREAM: u64 = 0x2;
const EPISODE_STREAM: u64 = 0x3;
const EVAL_STREAM: u64 = 0x4;

#[derive(Debug, Clone, PartialEq)]
pub struct EsConfig {
    /// Candidates per generation; must be even.
    pub population: usize,
    pub sigma: f64,
    pub step_size: f64,
    pub generations: u64,
    /// Episodes averaged into one candidate's fitness.
    pub episodes_per_eval: usize,
    /// Episodes behind the metrics attached to each checkpoint.
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self { population: 32, sigma: 0.1, step_size: 0.05, generations: 300, episodes_per_eval: 2, eval_episodes: 20, seed: 0 }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(invalid(alloc::format!("population must be even and >= 2, got {}", self.population)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid("sigma and step_size must be positive and finite"));
        }
        if self.episodes_per_eval == 0 || self.eval_episodes == 0 {
            return Err(invalid("episode counts must be positive"));
        }
        Ok(())
    }

    /// Seed of the fixed evaluation episodes used for checkpoint metrics.
    pub fn eval_seed(&self) -> u64 {
        derive_seed(self.seed, EVAL_STREAM)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub mean_return: f64,
    pub mean_steps: f64,
    /// Car only.
    pub success_rate: Option<f64>,
    /// Car only.
    pub out_of_road_rate: Option<f64>,
    /// Ant only: mean forward velocity over all steps.
    pub mean_vx: Option<f64>,
}

impl EvalMetrics {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("mean_return".to_string(), self.mean_return);
        m.insert("mean_steps".to_string(), self.mean_steps);
        for (k, v) in [("success_rate", self.success_rate), ("out_of_road_rate", self.out_of_road_rate), ("mean_vx", self.mean_vx)] {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        }
        m
    }
}

/// Runs `episodes` unstimulated episodes with seeds `seed, seed+1, ...`.
pub fn evaluate(policy: &PortablePolicy, kind: EnvKind, episodes: usize, seed: u64) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Err(invalid("evaluate needs at least one episode"));
    }
    let outcomes = par::map_indexed(episodes, |i| run_episode(policy, kind, episode_seed(seed, i as u64), kind.timeout() as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = episodes as f64;
    let rate = |t: Termination| outcomes.iter().filter(|o| o.termination == Some(t)).count() as f64 / n;
    let car = kind == EnvKind::PointCar;
    Ok(EvalMetrics {
        mean_return: outcomes.iter().map(|o| o.total_reward).sum::<f64>() / n,
        mean_steps: outcomes.iter().map(|o| o.steps as f64).sum::<f64>() / n,
        success_rate: car.then(|| rate(Termination::Goal)),
        out_of_road_rate: car.then(|| rate(Termination::OutOfRoad)),
        mean_vx: (!car).then(|| outcomes.iter().map(|o| o.first_channel_sum / o.steps as f64).sum::<f64>() / n),
    })
}

/// Centred ranks in `[-0.5, 0.5]`; equal values rank by index.
pub fn centered_ranks(fitness: &[f64]) -> Vec<f64> {
    let n = fitness.len();
    if n < 2 {
        return alloc::vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    let mut ranks = alloc::vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as f64 / (n - 1) as f64 - 0.5;
    }
    ranks
}

/// Update direction from antithetic fitness: candidate `2j` is `theta + sigma*eps_j`,
/// candidate `2j+1` is `theta - sigma*eps_j`.
pub fn es_gradient(noise: &[Vec<f64>], fitness: &[f64], sigma: f64) -> Vec<f64> {
    let n = fitness.len();
    let ranks = centered_ranks(fitness);
    let dim = noise.first().map_or(0, Vec::len);
    let mut g = alloc::vec![0.0; dim];
    for (j, eps) in noise.iter().enumerate() {
        let w = ranks[2 * j] - ranks[2 * j + 1];
        for (gi, e) in g.iter_mut().zip(eps) {
            *gi += w * e;
        }
    }
    let scale = 1.0 / (n as f64 * sigma);
    g.iter_mut().for_each(|x| *x *= scale);
    g
}

/// Replaces non-finite fitness with the worst finite value (0 if none).
fn sanitize(fitness: &mut [f64]) {
    let worst = fitness.iter().copied().filter(|f| f.is_finite()).fold(f64::INFINITY, f64::min);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    for f in fitness.iter_mut().filter(|f| !f.is_finite()) {
        log::warn!("non-finite fitness replaced by {worst}");
        *f = worst;
    }
}

pub fn noise_vector(seed: u64, generation: u64, pair: usize, dim: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(derive_seed(derive_seed(derive_seed(seed, NOISE_STREAM), generation), pair as u64));
    (0..dim).map(|_| rng.normal()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub generation: u64,
    pub policy: PortablePolicy,
    pub metrics: EvalMetrics,
}

/// Trains a fresh policy. `on_checkpoint` sees generation 0 (the initial
/// parameters) and every generation after its update.
pub fn train<F>(kind: EnvKind, shape: &PolicyShape, cfg: &EsConfig, mut on_checkpoint: F) -> Result<PortablePolicy>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    cfg.validate()?;
    if shape.obs_dim != kind.obs_dim() || shape.act_dim != kind.act_dim() {
        return Err(invalid(alloc::format!("shape {}->{} does not fit {kind}", shape.obs_dim, shape.act_dim)));
    }
    let mut policy = shape.init(derive_seed(cfg.seed, INIT_STREAM))?;
    let mut theta = policy.to_flat();
    let dim = theta.len();
    let pairs = cfg.population / 2;
    let eval_seed = cfg.eval_seed();

    let metrics = evaluate(&policy, kind, cfg.eval_episodes, eval_seed)?;
    on_checkpoint(&Checkpoint { generation: 0, policy: policy.clone(), metrics })?;

    for g in 0..cfg.generations {
        let noise: Vec<Vec<f64>> = (0..pairs).map(|j| noise_vector(cfg.seed, g, j, dim)).collect();
        let ep_base = derive_seed(derive_seed(cfg.seed, EPISODE_STREAM), g);
        let fitness = par::map_indexed(cfg.population, |c| -> Result<f64> {
            let sign = if c % 2 == 0 { cfg.sigma } else { -cfg.sigma };
            let params: Vec<f64> = theta.iter().zip(&noise[c / 2]).map(|(t, e)| t + sign * e).collect();
            let candidate = shape.from_flat(&params)?;
            let mut total = 0.0;
            for e in 0..cfg.episodes_per_eval {
                total += run_episode(&candidate, kind, episode_seed(ep_base, e as u64), kind.timeout() as u64)?.total_reward;
            }
            Ok(total / cfg.episodes_per_eval as f64)
        });
        let mut fitness = fitness.into_iter().collect::<Result<Vec<_>>>()?;
        sanitize(&mut fitness);
        let grad = es_gradient(&noise, &fitness, cfg.sigma);
        for (t, d) in theta.iter_mut().zip(&grad) {
            *t += cfg.step_size * d;
        }
        policy = shape.from_flat(&theta)?;
        let metrics = evaluate(&policy, kind, cfg.eval_episodes, eval_seed)?;
        log::debug!("generation {} mean_return {:.3}", g + 1, metrics.mean_return);
        on_checkpoint(&Checkpoint { generation: g + 1, policy: policy.clone(), metrics })?;
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ranks_span_half_interval() {
        let r = centered_ranks(&[3.0, -1.0, 10.0, 0.0]);
        let want = [1.0 / 6.0, -0.5, 0.5, -1.0 / 6.0];
        for (a, b) in r.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ranks_break_ties_by_index() {
        let r = centered_ranks(&[1.0, 1.0, 1.0]);
        assert_eq!(r, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn gradient_invariant_to_monotone_transform() {
        let noise: Vec<Vec<f64>> = (0..4).map(|j| noise_vector(7, 0, j, 5)).collect();
        let f: Vec<f64> = (0..8).map(|i| libm::sin(i as f64 * 1.3)).collect();
        let h: Vec<f64> = f.iter().map(|x| libm::exp(3.0 * x) + 2.0).collect();
        assert_eq!(es_gradient(&noise, &f, 0.1), es_gradient(&noise, &h, 0.1));
    }

    #[test]
    fn gradient_points_uphill_on_linear_fitness() {
        // fitness = <c, theta + delta>; the update must correlate positively with c.
        let c = [1.0, -2.0, 0.5];
        let noise: Vec<Vec<f64>> = (0..16).map(|j| noise_vector(3, 0, j, 3)).collect();
        let f: Vec<f64> = (0..32)
            .map(|i| {
                let s = if i % 2 == 0 { 0.1 } else { -0.1 };
                noise[i / 2].iter().zip(&c).map(|(e, ci)| s * e * ci).sum()
            })
            .collect();
        let g = es_gradient(&noise, &f, 0.1);
        assert!(g.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() > 0.0);
    }

    #[test]
    fn sanitize_replaces_nan_with_worst() {
        let mut f = vec![1.0, f64::NAN, -3.0, f64::INFINITY];
        sanitize(&mut f);
        assert_eq!(f, vec![1.0, -3.0, -3.0, -3.0]);
    }

    #[test]
    fn config_rejects_odd_population() {
        assert!(EsConfig { population: 5, ..EsConfig::default() }.validate().is_err());
    }

    #[test]
    fn short_training_is_deterministic() {
        let cfg = EsConfig { population: 4, generations: 2, episodes_per_eval: 1, eval_episodes: 1, seed: 9, ..EsConfig::default() };
        let shape = PolicyShape { hidden: vec![4], ..PolicyShape::desk(5, 2) };
        let mut seen = Vec::new();
        let a = train(EnvKind::PointCar, &shape, &cfg, |c| {
            seen.push(c.generation);
            Ok(())
        })
        .unwrap();
        let b = train(EnvKind::PointCar, &shape, &cfg, |_| Ok(())).unwrap();
        assert_eq!(a, b);
        assert_eq!(seen, vec![0, 1, 2]);
    }
}
