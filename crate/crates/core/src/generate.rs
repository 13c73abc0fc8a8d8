//! Seeded random instances for tests, benchmarks and the `gen` subcommand.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use num_traits::Zero;

use crate::format::{ArcRecord, Instance};
use crate::gain::GainSpec;
use crate::market::{feasibility_margin, MarketInstance};

/// Size limits of a generated family. All data are integers in `[-data, data]`
/// (demands) or `[1, data]` (penalties, gain numerators and denominators).
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_arcs: usize,
    pub data: i64,
}

impl Limits {
    pub const LINEAR: Limits = Limits {
        max_nodes: 8,
        max_arcs: 20,
        data: 8,
    };
    pub const CONCAVE: Limits = Limits {
        max_nodes: 5,
        max_arcs: 8,
        data: 6,
    };
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn skeleton(rng: &mut ChaCha8Rng, lim: Limits, min_demand: i64) -> (Instance, Vec<(usize, usize)>) {
    let n = rng.gen_range(2..=lim.max_nodes);
    let m = rng.gen_range(1..=lim.max_arcs);
    let mut inst = Instance::new(n);
    for i in 0..n {
        inst.demand[i] = int(rng.gen_range(min_demand..=lim.data));
        inst.penalty[i] = int(rng.gen_range(1..=lim.data));
    }
    let ends = (0..m)
        .map(|_| {
            let t = rng.gen_range(0..n);
            let mut h = rng.gen_range(0..n - 1);
            if h >= t {
                h += 1;
            }
            (t, h)
        })
        .collect();
    (inst, ends)
}

/// Symmetric instance with linear gains `p/q`, `1 <= p, q <= data`.
pub fn linear_instance(seed: u64, lim: Limits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inst, ends) = skeleton(&mut rng, lim, -lim.data);
    for (k, (t, h)) in ends.into_iter().enumerate() {
        let lower = rng.gen_range(0..=lim.data / 4);
        let upper = rng.gen_range(lower..=lim.data);
        let gain = BigRational::new(
            BigInt::from(rng.gen_range(1..=lim.data)),
            BigInt::from(rng.gen_range(1..=lim.data)),
        );
        inst.arcs.push(ArcRecord {
            tail: t,
            head: h,
            lower: int(lower),
            upper: int(upper),
            gain: GainSpec::Linear(gain),
            line: k + 1,
        });
    }
    inst
}

fn concave_gain(rng: &mut ChaCha8Rng, upper: i64) -> (GainSpec, i64) {
    let small = |rng: &mut ChaCha8Rng| int(rng.gen_range(1..=3));
    match rng.gen_range(0..4) {
        0 => (GainSpec::Linear(BigRational::new(BigInt::from(rng.gen_range(1..=4)), BigInt::from(rng.gen_range(1..=4)))), 0),
        1 => {
            // log arcs either start at 0 (immense) or at 1
            let lower = *[0, 1].choose(rng).unwrap();
            (GainSpec::Log(small(rng)), lower)
        }
        2 => {
            let p = *[(1, 3), (1, 2), (2, 3)].choose(rng).unwrap();
            (GainSpec::Pow(small(rng), BigRational::new(BigInt::from(p.0), BigInt::from(p.1))), 0)
        }
        _ => {
            let x1 = rng.gen_range(1..upper.max(2));
            let s1 = rng.gen_range(2..=4);
            let s2 = rng.gen_range(0..s1);
            let y1 = s1 * x1;
            let y2 = y1 + s2 * (upper.max(2) - x1);
            let pts = vec![(int(0), int(0)), (int(x1), int(y1)), (int(upper.max(2)), int(y2))];
            (GainSpec::Piecewise(pts), 0)
        }
    }
}

/// Symmetric instance mixing linear, log, power and piecewise-linear gains.
/// Demands lean positive (`[-data/2, data]`) so that most instances have a
/// nonzero optimum.
pub fn concave_instance(seed: u64, lim: Limits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inst, ends) = skeleton(&mut rng, lim, -lim.data / 2);
    for (k, (t, h)) in ends.into_iter().enumerate() {
        let upper = rng.gen_range(2..=lim.data);
        let (gain, lower) = concave_gain(&mut rng, upper);
        let upper = match &gain {
            GainSpec::Piecewise(pts) => pts.last().unwrap().0.clone(),
            _ => int(upper),
        };
        inst.arcs.push(ArcRecord {
            tail: t,
            head: h,
            lower: int(lower),
            upper,
            gain,
            line: k + 1,
        });
    }
    inst
}

/// Size limits of a generated market.
#[derive(Debug, Clone, Copy)]
pub struct MarketLimits {
    pub max_buyers: usize,
    pub max_goods: usize,
    pub u_max: i64,
    pub r_max: i64,
    /// Draw disagreement utilities (ADNB) instead of zeros (Fisher).
    pub adnb: bool,
}

impl MarketLimits {
    pub const FISHER: MarketLimits = MarketLimits {
        max_buyers: 4,
        max_goods: 4,
        u_max: 5,
        r_max: 4,
        adnb: false,
    };
    pub const ADNB: MarketLimits = MarketLimits {
        adnb: true,
        ..Self::FISHER
    };
}

/// Random linear market. Every buyer and good gets at least one positive
/// utility. In ADNB mode about one instance in five has a disagreement
/// point above what the goods can deliver; instances whose feasible region
/// has empty interior are resampled.
pub fn market_instance(seed: u64, lim: MarketLimits) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nb = rng.gen_range(1..=lim.max_buyers);
        let ng = rng.gen_range(1..=lim.max_goods);
        let mut util = vec![vec![0i64; ng]; nb];
        for row in util.iter_mut() {
            for u in row.iter_mut() {
                if rng.gen_bool(0.6) {
                    *u = rng.gen_range(1..=lim.u_max);
                }
            }
        }
        for i in 0..nb {
            if util[i].iter().all(|&u| u == 0) {
                util[i][rng.gen_range(0..ng)] = rng.gen_range(1..=lim.u_max);
            }
        }
        for j in 0..ng {
            if util.iter().all(|row| row[j] == 0) {
                util[rng.gen_range(0..nb)][j] = rng.gen_range(1..=lim.u_max);
            }
        }
        let budgets = (0..nb).map(|_| rng.gen_range(1..=lim.r_max)).collect();
        let disagreement = if lim.adnb {
            let greedy = rng.gen_bool(0.2);
            (0..nb)
                .map(|i| {
                    let best: i64 = util[i].iter().sum();
                    let cap = if greedy { best } else { (best / nb as i64).max(1) - 1 };
                    rng.gen_range(0..=cap.max(0))
                })
                .collect()
        } else {
            vec![0; nb]
        };
        let triples: Vec<(usize, usize, i64)> = (0..nb)
            .flat_map(|i| (0..ng).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, util[i][j]))
            .collect();
        let market = MarketInstance::linear(budgets, disagreement, ng, &triples).expect("generator keeps markets connected");
        if lim.adnb && feasibility_margin(&market).expect("feasibility LP").is_zero() {
            continue;
        }
        return market;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_valid() {
        for seed in 0..50 {
            let a = linear_instance(seed, Limits::LINEAR);
            assert_eq!(a, linear_instance(seed, Limits::LINEAR));
            a.to_linear().unwrap();
            let c = concave_instance(seed, Limits::CONCAVE);
            assert_eq!(c, concave_instance(seed, Limits::CONCAVE));
            c.to_concave().unwrap().normalize().unwrap();
            let m = market_instance(seed, MarketLimits::ADNB);
            assert_eq!(m, market_instance(seed, MarketLimits::ADNB));
        }
    }

    #[test]
    fn adnb_corpus_mixes_feasible_and_infeasible() {
        let margins: Vec<_> = (0..40)
            .map(|s| feasibility_margin(&market_instance(s, MarketLimits::ADNB)).unwrap())
            .collect();
        assert!(margins.iter().all(|s| !s.is_zero()));
        let infeasible = margins.iter().filter(|s| s < &&BigRational::zero()).count();
        assert!(infeasible > 0 && infeasible < 20, "{infeasible}");
    }
}
