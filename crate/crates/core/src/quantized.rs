//! Discrete phase-only search: firefly algorithm and serial coordinate search.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::check_len;
use crate::openloop::ConstraintSet;
use crate::weights::{PhaseAlphabet, QuantizedWeights, WeightVector};

/// Probability that a warm-start copy redraws a coordinate.
pub const WARM_MUTATION: f64 = 0.02;

pub fn cost(w: &WeightVector, constraints: &ConstraintSet) -> Result<f64> {
    constraints.cost(w.values())
}

/// Firefly brightness; infinite for an exact solution.
pub fn intensity(cost: f64) -> f64 {
    1.0 / cost
}

pub fn hamming_distance(a: &QuantizedWeights, b: &QuantizedWeights) -> Result<usize> {
    if a.alphabet() != b.alphabet() {
        return Err(Error::AlphabetMismatch { left: a.alphabet().levels(), right: b.alphabet().levels() });
    }
    check_len(a.len(), b.len())?;
    Ok(hamming(a.indices(), b.indices()))
}

fn hamming(a: &[u16], b: &[u16]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Residual bookkeeping for index vectors against a constraint set.
pub(crate) struct Residuals {
    k: usize,
    cols: Vec<Complex64>,
    targets: Vec<Complex64>,
    values: Vec<Complex64>,
}

impl Residuals {
    pub(crate) fn new(constraints: &ConstraintSet, alphabet: &PhaseAlphabet) -> Self {
        Self {
            k: constraints.len(),
            cols: constraints.columns(),
            targets: constraints.targets().to_vec(),
            values: alphabet.values().to_vec(),
        }
    }

    pub(crate) fn full(&self, idx: &[u16]) -> Vec<Complex64> {
        let mut r: Vec<Complex64> = self.targets.iter().map(|t| -t).collect();
        for (n, &i) in idx.iter().enumerate() {
            let v = self.values[i as usize];
            for (rk, a) in r.iter_mut().zip(&self.cols[n * self.k..(n + 1) * self.k]) {
                *rk += a * v;
            }
        }
        r
    }

    /// Cost after moving element `n` from `from` to `to`, without committing.
    pub(crate) fn trial(&self, r: &[Complex64], n: usize, from: u16, to: u16) -> f64 {
        let d = self.values[to as usize] - self.values[from as usize];
        r.iter()
            .zip(&self.cols[n * self.k..(n + 1) * self.k])
            .map(|(rk, a)| (rk + a * d).norm_sqr())
            .sum()
    }

    pub(crate) fn commit(&self, r: &mut [Complex64], n: usize, from: u16, to: u16) {
        let d = self.values[to as usize] - self.values[from as usize];
        for (rk, a) in r.iter_mut().zip(&self.cols[n * self.k..(n + 1) * self.k]) {
            *rk += a * d;
        }
    }
}

fn norm2(r: &[Complex64]) -> f64 {
    r.iter().map(|x| x.norm_sqr()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum FireflyInit {
    Random,
    /// Previous solution plus mutated copies of it.
    Provided(QuantizedWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FireflySettings {
    pub population: usize,
    pub movements: usize,
    /// Attractiveness decay; `None` uses 1/N.
    pub absorption_gamma: Option<f64>,
    /// Single-coordinate attempts the brightest firefly makes per movement;
    /// `None` uses the population size.
    pub brightest_trials: Option<usize>,
    pub seed: u64,
    pub init: FireflyInit,
}

impl Default for FireflySettings {
    fn default() -> Self {
        Self {
            population: 50,
            movements: 600,
            absorption_gamma: None,
            brightest_trials: None,
            seed: 0,
            init: FireflyInit::Random,
        }
    }
}

impl FireflySettings {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidArgument("firefly population must be at least 2".into()));
        }
        if self.movements < 1 {
            return Err(Error::InvalidArgument("firefly movements must be at least 1".into()));
        }
        if let Some(g) = self.absorption_gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument("absorption_gamma must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FireflyOutcome {
    pub weights: QuantizedWeights,
    /// Best cost seen after each movement.
    pub best_cost_trace: Vec<f64>,
}

pub fn firefly_search(
    constraints: &ConstraintSet,
    alphabet: &PhaseAlphabet,
    settings: &FireflySettings,
) -> Result<FireflyOutcome> {
    settings.validate()?;
    let n = constraints.n_elements();
    let m = alphabet.levels();
    let pop = settings.population;
    let gamma = settings.absorption_gamma.unwrap_or(1.0 / n as f64);
    let trials = settings.brightest_trials.unwrap_or(pop);
    let res = Residuals::new(constraints, alphabet);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut flies: Vec<Vec<u16>> = match &settings.init {
        FireflyInit::Random => {
            (0..pop).map(|_| (0..n).map(|_| alphabet.random_index(&mut rng)).collect()).collect()
        }
        FireflyInit::Provided(w) => {
            if w.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch { left: w.alphabet().levels(), right: m });
            }
            check_len(n, w.len())?;
            let mut v = vec![w.indices().to_vec()];
            for _ in 1..pop {
                let mut c = w.indices().to_vec();
                for x in c.iter_mut() {
                    if rng.random::<f64>() < WARM_MUTATION {
                        *x = alphabet.random_index(&mut rng);
                    }
                }
                v.push(c);
            }
            v
        }
    };

    let mut costs: Vec<f64> = flies.iter().map(|f| norm2(&res.full(f))).collect();
    let first = argmin(&costs);
    let mut best = (costs[first], flies[first].clone());
    let mut trace = Vec::with_capacity(settings.movements);

    for _ in 0..settings.movements {
        // dimmest first; stable on firefly index
        let mut order: Vec<usize> = (0..pop).collect();
        order.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]));
        for &i in &order {
            for &j in &order {
                if costs[j] >= costs[i] {
                    continue;
                }
                let (fi, fj) = pair_mut(&mut flies, i, j);
                let d = hamming(fi, fj);
                if d == 0 {
                    continue;
                }
                let beta = 1.0 / (1.0 + gamma * d as f64);
                for (a, &b) in fi.iter_mut().zip(fj.iter()) {
                    if *a != b && rng.random::<f64>() < beta {
                        *a = b;
                    }
                }
            }
        }
        let top = *order.last().expect("population is non-empty");
        let fly = &mut flies[top];
        let mut r = res.full(fly);
        let mut c = norm2(&r);
        for _ in 0..trials {
            let k = rng.random_range(0..n);
            let from = fly[k];
            let to = ((from as usize + rng.random_range(1..m)) % m) as u16;
            let t = res.trial(&r, k, from, to);
            if t < c {
                res.commit(&mut r, k, from, to);
                fly[k] = to;
                c = t;
            }
        }
        for (cst, f) in costs.iter_mut().zip(&flies) {
            *cst = norm2(&res.full(f));
        }
        let b = argmin(&costs);
        if costs[b] < best.0 {
            best = (costs[b], flies[b].clone());
        }
        trace.push(best.0);
    }
    Ok(FireflyOutcome {
        weights: QuantizedWeights::new(alphabet.clone(), best.1)?,
        best_cost_trace: trace,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[b] {
            b = i;
        }
    }
    b
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &T) {
    assert_ne!(i, j);
    if i < j {
        let (a, b) = v.split_at_mut(j);
        (&mut a[i], &b[0])
    } else {
        let (a, b) = v.split_at_mut(i);
        (&mut b[0], &a[j])
    }
}

/// Coordinate descent from the quiescent (all unity) weights, visiting
/// elements in a seeded order; at most 10 passes.
pub fn serial_search(
    constraints: &ConstraintSet,
    alphabet: &PhaseAlphabet,
    order_seed: u64,
) -> Result<QuantizedWeights> {
    let n = constraints.n_elements();
    let m = alphabet.levels() as u16;
    let res = Residuals::new(constraints, alphabet);
    let mut idx = vec![alphabet.unity_index(); n];
    let mut r = res.full(&idx);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
    for _ in 0..10 {
        let mut changed = false;
        for &k in &order {
            let cur = idx[k];
            let mut best = (norm2(&r), cur);
            for to in 0..m {
                if to == cur {
                    continue;
                }
                let c = res.trial(&r, k, cur, to);
                if c < best.0 {
                    best = (c, to);
                }
            }
            if best.1 != cur {
                res.commit(&mut r, k, cur, best.1);
                idx[k] = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    QuantizedWeights::new(alphabet.clone(), idx)
}

/// Operation count movements * (P(P+1)/2 + P log2 P).
pub fn complexity_estimate(settings: &FireflySettings) -> f64 {
    let p = settings.population as f64;
    settings.movements as f64 * (p * (p + 1.0) / 2.0 + p * p.log2())
}

/// Pattern residual of quantized weights, recomputed directly.
pub fn quantized_cost(w: &QuantizedWeights, constraints: &ConstraintSet) -> Result<f64> {
    constraints.cost(&w.values())
}
