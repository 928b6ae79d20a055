//! Assemble a compressed objective from raw Gram terms instead of the
//! stock builders.
//!
//! The three builders cover the common objectives, but the solver engine
//! itself only sees a list of factored Gram terms, each contributing
//! numerator and denominator pieces to the updates. This example wires a
//! custom blend — sketch residuals from *both* sides plus a mild ridge —
//! drives `mu_step` / `pgd_step` by hand, and inspects the per-term
//! objective decomposition.
//!
//! Certification is the caller's responsibility on this path: the stock
//! builders prove their σ shifts make every update denominator
//! nonnegative, while a hand-assembled term list carries whatever
//! validity you declare. Here both sketches are entrywise nonnegative
//! data against nonnegative factors with a ridge, so the certificate
//! genuinely holds and we say so.
//!
//! Run with: cargo run --example custom_problem

use cnmf::datagen::{synthetic_lognormal, SyntheticSpec};
use cnmf::objectives::FactorPair;
use cnmf::sketching::{rangefinder_sketch, shift_sigma, Side};
use cnmf::solvers::{
    init_factors, mu_step, pgd_step, GramTerm, ProblemValidity, SketchedMUProblem,
};

const ROWS: usize = 60;
const COLS: usize = 45;
const RANK: usize = 3;
const SKETCH_K: usize = 7;
const RIDGE: f64 = 0.02;
const SEED: u64 = 4_242;
const STEPS: usize = 200;
/// MU denominator guard, relative to the mean denominator entry.
const GUARD: f64 = 1e-12;

fn main() -> cnmf::Result<()> {
    let (x, _) = synthetic_lognormal(&SyntheticSpec {
        m: ROWS,
        n: COLS,
        r: RANK,
        seed: SEED,
        distribution: Default::default(),
    })?;

    // Sketch the data from both sides with data-adapted operators. The
    // rangefinder rows are orthonormal, so their Grams are projectors and
    // the minimal certified shifts come out small.
    let a_left = rangefinder_sketch(&x, SKETCH_K, SEED + 1, Side::Left)?;
    let a_right = rangefinder_sketch(&x, SKETCH_K, SEED + 2, Side::Right)?;
    let y_left = a_left.matrix.mul(&x)?;
    let y_right = x.mul(&a_right.matrix)?;
    let sigma_left = shift_sigma(&a_left).value;
    let sigma_right = shift_sigma(&a_right).value;

    let terms = vec![
        GramTerm::explicit_sketch(&a_left.matrix, &y_left, Side::Left, 1.0)?,
        GramTerm::rank_one_shift(sigma_left, &x.ones_t_mul(), Side::Left)?,
        GramTerm::explicit_sketch(&a_right.matrix, &y_right, Side::Right, 1.0)?,
        GramTerm::rank_one_shift(sigma_right, &x.mul_ones(), Side::Right)?,
        GramTerm::scaled_identity(RIDGE, Side::Left)?,
    ];
    // Every Gram here is a projector plus its certified shift, and all
    // targets are sketches of nonnegative data — the MU preconditions
    // hold, so declare the problem certified.
    let problem =
        SketchedMUProblem::new(ROWS, COLS, RANK, terms, ProblemValidity::certified())?;
    println!("assembled terms: {:?}", problem.term_names());

    let mean_entry = x.data().iter().sum::<f64>() / (ROWS * COLS) as f64;
    let scale = (mean_entry / RANK as f64).sqrt();
    let mut f: FactorPair = init_factors(ROWS, COLS, RANK, SEED + 3, scale)?;

    println!("driving mu_step by hand:");
    for step in 0..STEPS {
        f = mu_step(&problem, &f, GUARD)?;
        if step % 50 == 0 || step + 1 == STEPS {
            let terms = problem.objective_terms(&f)?;
            let total: f64 = terms.iter().sum();
            let pretty: Vec<String> = terms.iter().map(|t| format!("{t:.3e}")).collect();
            println!("  step {step:>4}: objective {total:.6e}, terms {pretty:?}");
        }
    }

    // One projected-gradient step from the same point, for contrast.
    let g = pgd_step(&problem, &f, 1e-3)?;
    println!(
        "one pgd step moves the objective {:.6e} -> {:.6e}",
        problem.objective(&f)?,
        problem.objective(&g)?
    );
    Ok(())
}
