//! Small allocation instances and grid-search oracles.

use goodwill::allocator::{self, Constraints, MomentModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn model(m_q: Vec<f64>, sigma_qq: Vec<Vec<f64>>, sigma_cq: Vec<f64>, sigma_cc: f64, omega: f64, weeks: usize) -> MomentModel {
    let k = m_q.len() / weeks;
    MomentModel {
        channels: (0..k).map(|i| format!("c{i}")).collect(),
        weeks,
        m_c: 0.0,
        m_q,
        sigma_cc,
        sigma_cq,
        sigma_qq,
        omega,
        draws: 100,
    }
}

pub fn closed_form() -> MomentModel {
    model(vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0, 1.0, 1)
}

pub fn box_constraints(budget: f64, lo: Vec<f64>, hi: Vec<f64>) -> Constraints {
    Constraints {
        budgets: vec![budget],
        lower: lo,
        upper: hi,
        equality: false,
    }
}

/// Best grid point for the capped problem.
pub fn grid_capped(mm: &MomentModel, cons: &Constraints, cap: f64, res: usize) -> f64 {
    super::grid::points(&cons.lower, &cons.upper, cons.budgets[0], res, cons.equality)
        .into_iter()
        .filter(|u| mm.variance(u) <= cap)
        .map(|u| mm.mean(&u))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn grid_penalized(mm: &MomentModel, cons: &Constraints, lambda: f64, res: usize) -> f64 {
    super::grid::points(&cons.lower, &cons.upper, cons.budgets[0], res, cons.equality)
        .into_iter()
        .map(|u| mm.mean(&u) - lambda * mm.variance(&u).sqrt())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn rel_gap(solver: f64, grid: f64) -> f64 {
    (grid - solver) / grid.abs().max(1e-12)
}

/// Two- and three-channel instances with correlated uncertainty.
pub fn instances() -> Vec<(MomentModel, Constraints, f64)> {
    vec![
        (closed_form(), box_constraints(10.0, vec![0.0; 2], vec![1.0; 2]), 1.25),
        (
            model(vec![1.0, 1.5], vec![vec![0.5, 0.2], vec![0.2, 0.8]], vec![0.05, -0.1], 0.3, 0.5, 1),
            box_constraints(1.5, vec![0.1, 0.0], vec![1.0, 1.2]),
            1.2,
        ),
        (
            model(
                vec![0.8, 1.2, 1.0],
                vec![vec![0.4, 0.1, 0.0], vec![0.1, 0.9, 0.3], vec![0.0, 0.3, 0.6]],
                vec![0.0, 0.1, -0.05],
                0.2,
                1.0,
                1,
            ),
            box_constraints(2.0, vec![0.0; 3], vec![1.0; 3]),
            2.0,
        ),
        (
            model(
                vec![0.8, 1.2, 1.0],
                vec![vec![0.4, 0.1, 0.0], vec![0.1, 0.9, 0.3], vec![0.0, 0.3, 0.6]],
                vec![0.0, 0.1, -0.05],
                0.2,
                1.0,
                1,
            ),
            Constraints {
                equality: true,
                ..box_constraints(1.5, vec![0.0; 3], vec![1.0; 3])
            },
            2.5,
        ),
    ]
}

/// Best expected sales over a grid that is re-centred and halved `rounds` times,
/// for week-major spend vectors with per-week budgets.
pub fn refined_grid_capped(mm: &MomentModel, cons: &Constraints, cap: f64, res: usize, rounds: usize) -> f64 {
    let d = mm.dim();
    let k = d / mm.weeks;
    let feasible = |u: &[f64]| {
        u.iter().enumerate().all(|(i, &x)| x >= cons.lower[i] && x <= cons.upper[i])
            && (0..mm.weeks).all(|w| u[w * k..(w + 1) * k].iter().sum::<f64>() <= cons.budgets[w] + 1e-12)
            && mm.variance(u) <= cap
    };
    let mut best = f64::NEG_INFINITY;
    let mut centre: Vec<f64> = (0..d).map(|i| 0.5 * (cons.lower[i] + cons.upper[i])).collect();
    let mut half: Vec<f64> = (0..d).map(|i| 0.5 * (cons.upper[i] - cons.lower[i])).collect();
    for _ in 0..rounds {
        let mut round_best = (f64::NEG_INFINITY, centre.clone());
        let mut idx = vec![0usize; d];
        'grid: loop {
            let u: Vec<f64> =
                (0..d).map(|i| centre[i] - half[i] + 2.0 * half[i] * idx[i] as f64 / (res - 1) as f64).collect();
            if feasible(&u) && mm.mean(&u) > round_best.0 {
                round_best = (mm.mean(&u), u);
            }
            for i in 0..d {
                idx[i] += 1;
                if idx[i] < res {
                    continue 'grid;
                }
                idx[i] = 0;
            }
            break;
        }
        if round_best.0 > best {
            best = round_best.0;
            centre = round_best.1;
        }
        half.iter_mut().for_each(|h| *h *= 0.5);
    }
    best
}

/// Two channels over two weeks with uncertain carryover, drawn from a handcrafted
/// posterior, and a variance cap halfway between the extremes.
pub fn two_week_instance() -> (MomentModel, Constraints, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = (0..60)
        .map(|_| {
            let q = [0.8 + 0.3 * rng.random::<f64>(), 0.4 + 0.9 * rng.random::<f64>()];
            super::goodwill_draw(0.3 + 0.4 * rng.random::<f64>(), &q, 1.0, 0.5, 0.05)
        })
        .collect();
    let m = super::handcrafted(&["a", "b"], draws, vec![0.0, 0.0]);
    let mm = allocator::reduce(&m, &[], 2).unwrap();
    let cons = Constraints {
        budgets: vec![1.0, 1.0],
        lower: vec![0.0; 4],
        upper: vec![1.0; 4],
        equality: false,
    };
    let uncapped = mm.variance(&allocator::maximize_expected(&mm, &cons, None).unwrap().spend);
    let cap = 0.5 * (uncapped + mm.variance(&[0.0; 4]));
    (mm, cons, cap)
}
