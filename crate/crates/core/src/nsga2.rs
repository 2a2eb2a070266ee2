//! Binary-encoded NSGA-II minimising (life-cycle cost, risk).
//!
//! Random draws come from ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! Every decision consumes whole 64-bit words: a uniform real is the top
//! 53 bits scaled by 2⁻⁵³, and an index below `n` is the high word of the
//! 128-bit product `u64 × n`. Trajectories are therefore fixed by the seed.

use std::cmp::Ordering;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::genome::Genome;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub lcc: f64,
    pub risk: f64,
}

impl Objectives {
    pub fn new(lcc: f64, risk: f64) -> Self {
        Self { lcc, risk }
    }

    fn get(&self, k: usize) -> f64 {
        if k == 0 {
            self.lcc
        } else {
            self.risk
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Objectives,
    /// Per-return-period damages for composite runs; empty otherwise.
    pub per_period: Vec<f64>,
    /// Set when the evaluation failed and worst-case objectives were assigned.
    pub failed: bool,
}

impl Evaluation {
    pub fn new(lcc: f64, risk: f64) -> Self {
        Self {
            objectives: Objectives::new(lcc, risk),
            per_period: Vec::new(),
            failed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: Genome,
    pub eval: Evaluation,
    pub rank: usize,
    pub crowding: f64,
}

/// Scores a batch of genomes; results must follow input order.
pub trait Evaluator: Sync {
    fn evaluate(&self, genomes: &[Genome]) -> Result<Vec<Evaluation>>;
}

/// Sequential evaluator over a closure.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&Genome) -> Result<Evaluation> + Sync,
{
    fn evaluate(&self, genomes: &[Genome]) -> Result<Vec<Evaluation>> {
        genomes.iter().map(&self.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene flip probability; `None` means `1 / n_zones`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: None,
            seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "population {} must be even and at least 4",
                self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::Config("crossover_rate must lie in [0,1]".into()));
        }
        if let Some(m) = self.mutation_rate {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::Config("mutation_rate must lie in [0,1]".into()));
            }
        }
        Ok(())
    }

    pub fn mutation_rate_for(&self, n_zones: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / n_zones.max(1) as f64)
    }
}

/// Seed-stable random stream for the evolutionary operators.
pub struct GaRng(ChaCha8Rng);

impl GaRng {
    pub fn new(seed: u64) -> Self {
        GaRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Baseline first, maximum intervention last, `P − 2` uniform genomes between.
pub fn initialize_population(cfg: &GaConfig, n_zones: usize, rng: &mut GaRng) -> Vec<Genome> {
    let mut pop = Vec::with_capacity(cfg.population);
    pop.push(Genome::zeros(n_zones));
    for _ in 0..cfg.population.saturating_sub(2) {
        pop.push(Genome::from_bits((0..n_zones).map(|_| rng.chance(0.5)).collect()));
    }
    pop.push(Genome::ones(n_zones));
    pop
}

/// Pareto dominance for minimisation.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.lcc <= b.lcc && a.risk <= b.risk && (a.lcc < b.lcc || a.risk < b.risk)
}

/// Fronts of mutually non-dominated indices, best first.
pub fn fast_nondominated_sort(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    let mut fronts = vec![Vec::new()];
    for p in 0..n {
        for q in 0..n {
            if dominates(&objs[p], &objs[q]) {
                dominated_by_me[p].push(q);
            } else if dominates(&objs[q], &objs[p]) {
                counts[p] += 1;
            }
        }
        if counts[p] == 0 {
            fronts[0].push(p);
        }
    }
    let mut k = 0;
    while !fronts[k].is_empty() {
        let mut next = Vec::new();
        for &p in &fronts[k] {
            for &q in &dominated_by_me[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(next);
        k += 1;
    }
    fronts.pop();
    fronts
}

/// Crowding distance of each member of one front.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..2 {
        order.sort_by(|&a, &b| front[a].get(k).total_cmp(&front[b].get(k)).then(a.cmp(&b)));
        let lo = front[order[0]].get(k);
        let hi = front[order[n - 1]].get(k);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 || !range.is_finite() {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]].get(k) - front[order[w - 1]].get(k);
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Sets `rank` and `crowding` for every individual; returns the fronts.
pub fn rank_population(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objs: Vec<Objectives> = pop.iter().map(|i| i.eval.objectives).collect();
    let fronts = fast_nondominated_sort(&objs);
    for (r, front) in fronts.iter().enumerate() {
        let fo: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&fo)) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
    fronts
}

fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then(b.crowding.total_cmp(&a.crowding))
}

fn tournament(pop: &[Individual], rng: &mut GaRng) -> usize {
    let i = rng.below(pop.len());
    let j = rng.below(pop.len());
    if crowded_cmp(&pop[j], &pop[i]) == Ordering::Less {
        j
    } else {
        i
    }
}

/// Tournament selection, uniform crossover and bit-flip mutation.
pub fn make_offspring(parents: &[Individual], cfg: &GaConfig, rng: &mut GaRng) -> Vec<Genome> {
    let n = parents.first().map_or(0, |p| p.genome.len());
    let pm = cfg.mutation_rate_for(n);
    let mut out = Vec::with_capacity(cfg.population);
    while out.len() < cfg.population {
        let a = parents[tournament(parents, rng)].genome.clone();
        let b = parents[tournament(parents, rng)].genome.clone();
        let (mut c1, mut c2) = (a, b);
        if rng.chance(cfg.crossover_rate) {
            for j in 0..n {
                if rng.chance(0.5) {
                    let (x, y) = (c1.get(j), c2.get(j));
                    c1.set(j, y);
                    c2.set(j, x);
                }
            }
        }
        for c in [&mut c1, &mut c2] {
            for j in 0..n {
                if rng.chance(pm) {
                    c.flip(j);
                }
            }
        }
        out.push(c1);
        out.push(c2);
    }
    out.truncate(cfg.population);
    out
}

fn evaluate_all(genomes: Vec<Genome>, evaluator: &dyn Evaluator, generation: usize) -> Result<Vec<Individual>> {
    let evals = evaluator.evaluate(&genomes).map_err(|e| Error::Evaluation {
        generation,
        source: Box::new(e),
    })?;
    if evals.len() != genomes.len() {
        return Err(Error::Evaluation {
            generation,
            source: Box::new(Error::Input("evaluator returned the wrong number of results".into())),
        });
    }
    Ok(genomes
        .into_iter()
        .zip(evals)
        .map(|(genome, eval)| Individual {
            genome,
            eval,
            rank: 0,
            crowding: 0.0,
        })
        .collect())
}

/// Elitist truncation of `combined` to `size` by rank then crowding.
pub fn select_survivors(mut combined: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = rank_population(&mut combined);
    let mut keep = Vec::with_capacity(size);
    for front in fronts {
        if keep.len() + front.len() <= size {
            keep.extend(front);
        } else {
            let mut last = front;
            last.sort_by(|&a, &b| combined[b].crowding.total_cmp(&combined[a].crowding).then(a.cmp(&b)));
            last.truncate(size - keep.len());
            keep.extend(last);
        }
        if keep.len() == size {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().unwrap()).collect();
    rank_population(&mut next);
    next
}

/// One generation: breed `P` offspring, evaluate, and keep the best `P` of parents ∪ offspring.
pub fn evolve(
    parents: &[Individual],
    cfg: &GaConfig,
    rng: &mut GaRng,
    evaluator: &dyn Evaluator,
    generation: usize,
) -> Result<Vec<Individual>> {
    let offspring = evaluate_all(make_offspring(parents, cfg, rng), evaluator, generation)?;
    let mut combined = parents.to_vec();
    combined.extend(offspring);
    Ok(select_survivors(combined, cfg.population))
}

/// Final non-dominated solutions sorted by cost.
#[derive(Debug, Clone)]
pub struct ParetoFront {
    pub solutions: Vec<Individual>,
}

impl ParetoFront {
    /// Rank-0 members of `pop` with duplicate genomes removed, sorted by (lcc, risk).
    pub fn from_population(pop: &[Individual]) -> Self {
        let objs: Vec<Objectives> = pop.iter().map(|i| i.eval.objectives).collect();
        let first = fast_nondominated_sort(&objs).into_iter().next().unwrap_or_default();
        let mut sols: Vec<Individual> = first.into_iter().map(|i| pop[i].clone()).collect();
        sols.sort_by(|a, b| {
            a.eval
                .objectives
                .lcc
                .total_cmp(&b.eval.objectives.lcc)
                .then(a.eval.objectives.risk.total_cmp(&b.eval.objectives.risk))
                .then(a.genome.cmp(&b.genome))
        });
        sols.dedup_by(|a, b| a.genome == b.genome);
        ParetoFront { solutions: sols }
    }
}

/// Runs the full optimisation, calling `observer(generation, population)`
/// after the initial evaluation and after every generation.
pub fn run_with_observer(
    cfg: &GaConfig,
    n_zones: usize,
    evaluator: &dyn Evaluator,
    mut observer: impl FnMut(usize, &[Individual]),
) -> Result<ParetoFront> {
    cfg.validate()?;
    let mut rng = GaRng::new(cfg.seed);
    let mut pop = evaluate_all(initialize_population(cfg, n_zones, &mut rng), evaluator, 0)?;
    rank_population(&mut pop);
    observer(0, &pop);
    for g in 1..=cfg.generations {
        pop = evolve(&pop, cfg, &mut rng, evaluator, g)?;
        log::debug!("generation {g}: front size {}", pop.iter().filter(|i| i.rank == 0).count());
        observer(g, &pop);
    }
    Ok(ParetoFront::from_population(&pop))
}

pub fn run(cfg: &GaConfig, n_zones: usize, evaluator: &dyn Evaluator) -> Result<ParetoFront> {
    run_with_observer(cfg, n_zones, evaluator, |_, _| {})
}
