//! Elitist evolutionary search over candidate signatures.
//!
//! Each iteration mutates every member once (one randomly chosen band gets a
//! draw from a two-component zero-mean Gaussian mixture), pools parents and
//! children, and keeps the best `n_pop`. The best objective can therefore
//! never decrease.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::background::BackgroundModel;
use crate::bags::{BagSet, Spectrum};
use crate::error::{Error, Result};
use crate::objective::{Objective, ObjectiveConfig};

/// Mixture `w_n N(0, sigma_n) + (1 - w_n) N(0, sigma_w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationParams {
    pub w_n: f64,
    pub sigma_n: f64,
    pub sigma_w: f64,
}

impl MutationParams {
    pub fn new(w_n: f64, sigma_n: f64, sigma_w: f64) -> Result<Self> {
        let p = MutationParams {
            w_n,
            sigma_n,
            sigma_w,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_n) {
            return Err(Error::InvalidParameter(alloc::format!(
                "w_n must lie in [0, 1], got {}",
                self.w_n
            )));
        }
        if !(self.sigma_n > 0.0 && self.sigma_n.is_finite() && self.sigma_w.is_finite()) {
            return Err(Error::InvalidParameter(
                "mutation scales must be positive and finite".into(),
            ));
        }
        if !(self.sigma_n < self.sigma_w) {
            return Err(Error::InvalidParameter(alloc::format!(
                "sigma_n ({}) must be smaller than sigma_w ({})",
                self.sigma_n,
                self.sigma_w
            )));
        }
        Ok(())
    }

    /// Variance of a single perturbation.
    pub fn variance(&self) -> f64 {
        self.w_n * self.sigma_n * self.sigma_n + (1.0 - self.w_n) * self.sigma_w * self.sigma_w
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let narrow = rng.random::<f64>() < self.w_n;
        let z: f64 = rng.sample(StandardNormal);
        if narrow {
            z * self.sigma_n
        } else {
            z * self.sigma_w
        }
    }
}

/// How mutation scales are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MutationSetting {
    /// Per band: `sigma_n = narrow_fraction * std`, `sigma_w = wide_ratio * sigma_n`,
    /// where `std` is the sample standard deviation of positive-bag pixels.
    Auto {
        w_n: f64,
        narrow_fraction: f64,
        wide_ratio: f64,
    },
    /// The same mixture for every band.
    Fixed(MutationParams),
}

impl Default for MutationSetting {
    fn default() -> Self {
        MutationSetting::Auto {
            w_n: 0.8,
            narrow_fraction: 0.01,
            wide_ratio: 10.0,
        }
    }
}

/// Mutation mixture for each band.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationPlan {
    per_band: Vec<MutationParams>,
}

impl MutationPlan {
    pub fn uniform(params: MutationParams, bands: usize) -> Result<Self> {
        params.check()?;
        Ok(MutationPlan {
            per_band: alloc::vec![params; bands],
        })
    }

    pub fn resolve(setting: &MutationSetting, bags: &BagSet) -> Result<Self> {
        let bands = bags.bands().ok_or(Error::Empty("bag set"))?;
        match *setting {
            MutationSetting::Fixed(p) => MutationPlan::uniform(p, bands),
            MutationSetting::Auto {
                w_n,
                narrow_fraction,
                wide_ratio,
            } => {
                let std = band_std(bags.positive_spectra(), bands);
                let positive: Vec<f64> = std.iter().copied().filter(|s| *s > 0.0).collect();
                let fallback = if positive.is_empty() {
                    1.0
                } else {
                    positive.iter().sum::<f64>() / positive.len() as f64
                };
                let per_band = std
                    .into_iter()
                    .map(|s| {
                        let s = if s > 0.0 { s } else { fallback };
                        let sigma_n = narrow_fraction * s;
                        MutationParams::new(w_n, sigma_n, wide_ratio * sigma_n)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MutationPlan { per_band })
            }
        }
    }

    pub fn bands(&self) -> &[MutationParams] {
        &self.per_band
    }
}

fn band_std<'a>(spectra: impl Iterator<Item = &'a Spectrum>, bands: usize) -> Vec<f64> {
    let mut n = 0usize;
    let mut mean = alloc::vec![0.0; bands];
    let mut m2 = alloc::vec![0.0; bands];
    for s in spectra {
        n += 1;
        for k in 0..bands {
            let delta = s[k] - mean[k];
            mean[k] += delta / n as f64;
            m2[k] += delta * (s[k] - mean[k]);
        }
    }
    if n < 2 {
        return alloc::vec![0.0; bands];
    }
    m2.into_iter()
        .map(|v| libm::sqrt(v / (n - 1) as f64))
        .collect()
}

fn perturb<R: Rng + ?Sized>(
    parent: &Spectrum,
    rng: &mut R,
    params: impl Fn(usize) -> MutationParams,
) -> Spectrum {
    let mut child = parent.clone().into_vec();
    let k = rng.random_range(0..child.len());
    child[k] += params(k).draw(rng);
    Spectrum::from_vec_unchecked(child)
}

/// Adds one mixture draw to a single uniformly chosen band of `parent`.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Spectrum,
    params: &MutationParams,
    rng: &mut R,
) -> Spectrum {
    perturb(parent, rng, |_| *params)
}

/// [`mutate`] with band-specific mixtures.
pub fn mutate_with_plan<R: Rng + ?Sized>(
    parent: &Spectrum,
    plan: &MutationPlan,
    rng: &mut R,
) -> Spectrum {
    perturb(parent, rng, |k| plan.per_band[k])
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Best positive-bag pixel plus pixels drawn uniformly (with replacement)
    /// from the positive bags.
    BestPlusRandom,
    /// Given spectra, truncated or padded with random positive-bag pixels.
    Custom(Vec<Spectrum>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EAConfig {
    pub n_pop: usize,
    pub n_iter: usize,
    pub mutation: MutationSetting,
    pub seed: u64,
    pub init: InitMode,
    /// Stop after this many iterations without an improvement above 1e-12.
    pub plateau_stop: Option<usize>,
}

impl Default for EAConfig {
    fn default() -> Self {
        EAConfig {
            n_pop: 50,
            n_iter: 500,
            mutation: MutationSetting::default(),
            seed: 0,
            init: InitMode::BestPlusRandom,
            plateau_stop: None,
        }
    }
}

impl EAConfig {
    pub fn check(&self) -> Result<()> {
        if self.n_pop < 2 {
            return Err(Error::InvalidParameter("n_pop must be at least 2".into()));
        }
        if self.n_iter < 1 {
            return Err(Error::InvalidParameter("n_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub signature: Spectrum,
    pub objective: f64,
}

/// Candidates sorted by descending objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    members: Vec<Member>,
}

impl Population {
    /// Stable-sorts `members` by descending objective.
    pub fn from_members(mut members: Vec<Member>) -> Self {
        members.sort_by(|a, b| b.objective.total_cmp(&a.objective));
        Population { members }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> &Member {
        &self.members[0]
    }
}

/// Location of a pixel inside a bag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BagPixel {
    pub bag: usize,
    pub pixel: usize,
}

/// The positive-bag pixel with the largest objective; ties go to the lowest
/// (bag, pixel) index. Also returns every positive pixel's fitness in order.
pub fn best_positive_pixel(
    objective: &Objective<'_>,
    bags: &BagSet,
) -> Result<(BagPixel, Member, Vec<f64>)> {
    let mut scores = Vec::new();
    let mut best: Option<(BagPixel, f64)> = None;
    for (b, bag) in bags.positive.iter().enumerate() {
        for (p, px) in bag.pixels.iter().enumerate() {
            let v = objective.fitness(&px.spectrum)?;
            scores.push(v);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((BagPixel { bag: b, pixel: p }, v));
            }
        }
    }
    match best {
        None => Err(Error::Empty("positive bags")),
        Some((_, v)) if v == f64::NEG_INFINITY => Err(Error::DegenerateInitialization),
        Some((at, v)) => Ok((
            at,
            Member {
                signature: bags.positive[at.bag].pixels[at.pixel].spectrum.clone(),
                objective: v,
            },
            scores,
        )),
    }
}

/// Builds the starting population. Returns it with the number of objective
/// evaluations spent.
pub fn init_population<R: Rng + ?Sized>(
    objective: &Objective<'_>,
    bags: &BagSet,
    cfg: &EAConfig,
    rng: &mut R,
) -> Result<(Population, usize)> {
    cfg.check()?;
    let positive: Vec<&Spectrum> = bags.positive_spectra().collect();
    if positive.is_empty() {
        return Err(Error::Empty("positive bags"));
    }
    let mut members = Vec::with_capacity(cfg.n_pop);
    let mut evaluations = 0;
    match &cfg.init {
        InitMode::BestPlusRandom => {
            let (_, best, scores) = best_positive_pixel(objective, bags)?;
            evaluations += scores.len();
            members.push(best);
            while members.len() < cfg.n_pop {
                let i = rng.random_range(0..positive.len());
                members.push(Member {
                    signature: positive[i].clone(),
                    objective: scores[i],
                });
            }
        }
        InitMode::Custom(seeds) => {
            let bands = objective.model().bands();
            for s in seeds.iter().take(cfg.n_pop) {
                if s.bands() != bands {
                    return Err(Error::DimensionMismatch {
                        expected: bands,
                        actual: s.bands(),
                    });
                }
                members.push(Member {
                    signature: s.clone(),
                    objective: objective.fitness(s)?,
                });
                evaluations += 1;
            }
            while members.len() < cfg.n_pop {
                let s = positive[rng.random_range(0..positive.len())];
                members.push(Member {
                    signature: s.clone(),
                    objective: objective.fitness(s)?,
                });
                evaluations += 1;
            }
        }
    }
    Ok((Population::from_members(members), evaluations))
}

/// One generation: every member yields one child, then the best `n_pop` of
/// parents followed by children survive (stable, so ties favour parents).
pub fn step<R: Rng + ?Sized>(
    population: &Population,
    objective: &Objective<'_>,
    plan: &MutationPlan,
    rng: &mut R,
) -> Result<Population> {
    let children: Vec<Spectrum> = population
        .members
        .iter()
        .map(|m| mutate_with_plan(&m.signature, plan, rng))
        .collect();
    let mut pool = population.members.clone();
    pool.reserve(children.len());
    for c in children {
        let v = objective.fitness(&c)?;
        pool.push(Member {
            signature: c,
            objective: v,
        });
    }
    let mut next = Population::from_members(pool);
    next.members.truncate(population.len());
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub best_signature: Spectrum,
    pub best_objective: f64,
    /// Best objective after initialization and after each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Runs the full search, seeded from `cfg.seed`.
pub fn run(
    model: &BackgroundModel,
    bags: &BagSet,
    cfg: &EAConfig,
    obj_cfg: &ObjectiveConfig,
) -> Result<EstimationResult> {
    let objective = Objective::new(model, bags, obj_cfg)?;
    run_with(&objective, bags, cfg)
}

/// [`run`] against a prepared objective.
pub fn run_with(
    objective: &Objective<'_>,
    bags: &BagSet,
    cfg: &EAConfig,
) -> Result<EstimationResult> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let plan = MutationPlan::resolve(&cfg.mutation, bags)?;
    let (mut population, mut evaluations) = init_population(objective, bags, cfg, &mut rng)?;
    let mut trace = Vec::with_capacity(cfg.n_iter + 1);
    trace.push(population.best().objective);
    let mut stale = 0;
    for _ in 0..cfg.n_iter {
        let before = population.best().objective;
        population = step(&population, objective, &plan, &mut rng)?;
        evaluations += population.len();
        let after = population.best().objective;
        trace.push(after);
        if let Some(limit) = cfg.plateau_stop {
            stale = if after - before > 1e-12 { 0 } else { stale + 1 };
            if stale >= limit {
                break;
            }
        }
    }
    let best = population.best().clone();
    Ok(EstimationResult {
        best_signature: best.signature,
        best_objective: best.objective,
        trace,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::Regularization;
    use crate::bags::{Bag, Label};
    use crate::linalg::Matrix;
    use alloc::vec;

    fn s(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    fn identity_model(d: usize) -> BackgroundModel {
        BackgroundModel::from_parts(
            Spectrum::zeros(d),
            Matrix::identity(d),
            Regularization::Absolute(0.0),
        )
        .unwrap()
    }

    fn toy_bags() -> BagSet {
        BagSet::new(
            vec![Bag::from_spectra(
                "p",
                Label::Positive,
                vec![s(&[1.0, 1.0]), s(&[2.0, 0.0])],
            )],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn init_picks_best_positive_pixel() {
        let m = identity_model(2);
        let bags = toy_bags();
        let obj = Objective::new(&m, &bags, &ObjectiveConfig::default()).unwrap();
        let cfg = EAConfig {
            n_pop: 2,
            ..EAConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (pop, evals) = init_population(&obj, &bags, &cfg, &mut rng).unwrap();
        assert_eq!(pop.best().signature, s(&[2.0, 0.0]));
        assert_eq!(pop.len(), 2);
        assert_eq!(evals, 2);
    }

    #[test]
    fn custom_init_is_padded_and_truncated() {
        let m = identity_model(2);
        let bags = toy_bags();
        let obj = Objective::new(&m, &bags, &ObjectiveConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = EAConfig {
            n_pop: 3,
            init: InitMode::Custom(vec![s(&[1.0, 7.0])]),
            ..EAConfig::default()
        };
        let (pop, _) = init_population(&obj, &bags, &cfg, &mut rng).unwrap();
        assert_eq!(pop.len(), 3);
        assert!(pop.members().iter().any(|m| m.signature == s(&[1.0, 7.0])));
        let pixels = [s(&[1.0, 1.0]), s(&[2.0, 0.0])];
        let padded = pop
            .members()
            .iter()
            .filter(|m| pixels.contains(&m.signature))
            .count();
        assert_eq!(padded, 2);

        let cfg = EAConfig {
            n_pop: 2,
            init: InitMode::Custom(vec![s(&[1.0, 7.0]), s(&[3.0, 3.0]), s(&[0.0, 1.0])]),
            ..EAConfig::default()
        };
        let (pop, evals) = init_population(&obj, &bags, &cfg, &mut rng).unwrap();
        assert_eq!(pop.len(), 2);
        assert_eq!(evals, 2);
    }

    #[test]
    fn degenerate_positive_pixels_fail_init() {
        let m = identity_model(2);
        let bags = BagSet::new(
            vec![Bag::from_spectra(
                "p",
                Label::Positive,
                vec![s(&[0.0, 0.0])],
            )],
            vec![],
        )
        .unwrap();
        let obj = Objective::new(&m, &bags, &ObjectiveConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            init_population(&obj, &bags, &EAConfig::default(), &mut rng).unwrap_err(),
            Error::DegenerateInitialization
        );
    }

    #[test]
    fn mutation_touches_one_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = MutationParams::new(1.0, 1e-9, 1.0).unwrap();
        let parent = s(&[1.0, 2.0, 3.0, 4.0]);
        for _ in 0..200 {
            let child = mutate(&parent, &params, &mut rng);
            let changed: Vec<usize> = (0..4).filter(|&k| child[k] != parent[k]).collect();
            assert!(changed.len() <= 1);
            for k in changed {
                assert!((child[k] - parent[k]).abs() < 1e-7);
            }
        }
        let one = s(&[5.0]);
        let child = mutate(&one, &MutationParams::new(0.5, 0.1, 1.0).unwrap(), &mut rng);
        assert_ne!(child[0], 5.0);
    }

    #[test]
    fn mutation_params_validated() {
        assert!(MutationParams::new(1.2, 0.1, 1.0).is_err());
        assert!(MutationParams::new(0.5, 1.0, 0.1).is_err());
        assert!(MutationParams::new(0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn auto_plan_scales_with_band_spread() {
        let bags = BagSet::new(
            vec![Bag::from_spectra(
                "p",
                Label::Positive,
                vec![s(&[0.0, 10.0]), s(&[2.0, 10.0]), s(&[4.0, 10.0])],
            )],
            vec![],
        )
        .unwrap();
        let plan = MutationPlan::resolve(&MutationSetting::default(), &bags).unwrap();
        let b = plan.bands();
        assert!((b[0].sigma_n - 0.02).abs() < 1e-15);
        assert!((b[0].sigma_w - 0.2).abs() < 1e-15);
        // Zero-spread band falls back to the mean of the others.
        assert!((b[1].sigma_n - 0.02).abs() < 1e-15);
        assert_eq!(b[0].w_n, 0.8);
    }

    #[test]
    fn elitism_at_global_maximum() {
        // Every member already scores the maximum, 1.0 for any signature
        // pointing along +x with a single unit pixel.
        let m = identity_model(1);
        let bags = BagSet::new(
            vec![Bag::from_spectra("p", Label::Positive, vec![s(&[1.0])])],
            vec![],
        )
        .unwrap();
        let obj = Objective::new(&m, &bags, &ObjectiveConfig::default()).unwrap();
        let pop = Population::from_members(vec![
            Member {
                signature: s(&[1.0]),
                objective: 1.0,
            },
            Member {
                signature: s(&[2.0]),
                objective: 1.0,
            },
        ]);
        let plan = MutationPlan::uniform(MutationParams::new(0.5, 0.01, 0.1).unwrap(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let next = step(&pop, &obj, &plan, &mut rng).unwrap();
        assert_eq!(next, pop);
    }

    #[test]
    fn improved_child_replaces_worse_parent() {
        // 1-D: objective is +1 for positive signatures, -1 for negative ones.
        let m = identity_model(1);
        let bags = BagSet::new(
            vec![Bag::from_spectra("p", Label::Positive, vec![s(&[1.0])])],
            vec![],
        )
        .unwrap();
        let obj = Objective::new(&m, &bags, &ObjectiveConfig::default()).unwrap();
        let pop = Population::from_members(vec![
            Member {
                signature: s(&[5.0]),
                objective: 1.0,
            },
            Member {
                signature: s(&[-0.001]),
                objective: -1.0,
            },
        ]);
        let plan = MutationPlan::uniform(MutationParams::new(0.0, 1e-6, 10.0).unwrap(), 1).unwrap();
        let mut found = false;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let next = step(&pop, &obj, &plan, &mut rng).unwrap();
            assert_eq!(next.len(), 2);
            assert_eq!(next.best().objective, 1.0);
            if next.members()[1].objective == 1.0 {
                found = true;
                assert_eq!(next.members()[0].signature, s(&[5.0]));
            }
        }
        assert!(found);
    }

    #[test]
    fn tiny_run_contract() {
        let m = identity_model(1);
        let bags = BagSet::new(
            vec![Bag::from_spectra(
                "p",
                Label::Positive,
                vec![s(&[1.0]), s(&[-1.0])],
            )],
            vec![Bag::from_spectra("n", Label::Negative, vec![s(&[-2.0])])],
        )
        .unwrap();
        let cfg = EAConfig {
            n_pop: 2,
            n_iter: 1,
            ..EAConfig::default()
        };
        let r = run(&m, &bags, &cfg, &ObjectiveConfig::default()).unwrap();
        assert_eq!(r.trace.len(), 2);
        assert!(r.trace[1] >= r.trace[0]);
        assert_eq!(r.best_objective, *r.trace.last().unwrap());
        assert_eq!(
            r,
            run(&m, &bags, &cfg, &ObjectiveConfig::default()).unwrap()
        );
    }

    #[test]
    fn plateau_stop_shortens_trace() {
        let m = identity_model(1);
        let bags = BagSet::new(
            vec![Bag::from_spectra("p", Label::Positive, vec![s(&[1.0])])],
            vec![],
        )
        .unwrap();
        let cfg = EAConfig {
            n_pop: 2,
            n_iter: 100,
            plateau_stop: Some(5),
            ..EAConfig::default()
        };
        let r = run(&m, &bags, &cfg, &ObjectiveConfig::default()).unwrap();
        assert_eq!(r.trace.len(), 6);
    }
}
