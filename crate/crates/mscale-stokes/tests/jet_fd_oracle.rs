//! Random expression trees evaluated two ways: once through the forward-mode
//! jets and once as plain f64 with Richardson-extrapolated central
//! differences. The reference is only trusted where it can vouch for
//! itself: each stencil reports the disagreement between its two step
//! sizes, and cases whose disagreement is large (wild high derivatives,
//! near-guard denominators) are redrawn instead of asserted.

use mscale_stokes::autodiff::{jet_seed, Jet2, JetOrder};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Debug)]
enum Expr {
    X,
    Y,
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Neg(Box<Expr>),
    Scale(Box<Expr>, f64),
    Shift(Box<Expr>, f64),
}

const MAX_VALUE: f64 = 1e2;
const MIN_DENOM: f64 = 0.5;
const MAX_EXP_ARG: f64 = 4.0;

impl Expr {
    fn random(rng: &mut impl Rng, depth: usize) -> Expr {
        if depth == 0 {
            return match rng.gen_range(0..3) {
                0 => Expr::X,
                1 => Expr::Y,
                _ => Expr::Const(rng.gen_range(-2.0..2.0)),
            };
        }
        let sub = |rng: &mut _| Box::new(Expr::random(rng, depth - 1));
        match rng.gen_range(0..10) {
            0 => Expr::Add(sub(rng), sub(rng)),
            1 => Expr::Sub(sub(rng), sub(rng)),
            2 => Expr::Mul(sub(rng), sub(rng)),
            3 => Expr::Div(sub(rng), sub(rng)),
            4 => Expr::Sin(sub(rng)),
            5 => Expr::Cos(sub(rng)),
            6 => Expr::Exp(sub(rng)),
            7 => Expr::Neg(sub(rng)),
            8 => Expr::Scale(sub(rng), rng.gen_range(-3.0..3.0)),
            _ => Expr::Shift(sub(rng), rng.gen_range(-2.0..2.0)),
        }
    }

    /// Plain evaluation; None when any intermediate violates the guards.
    fn eval(&self, x: f64, y: f64) -> Option<f64> {
        let v = match self {
            Expr::X => x,
            Expr::Y => y,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(x, y)? + b.eval(x, y)?,
            Expr::Sub(a, b) => a.eval(x, y)? - b.eval(x, y)?,
            Expr::Mul(a, b) => a.eval(x, y)? * b.eval(x, y)?,
            Expr::Div(a, b) => {
                let d = b.eval(x, y)?;
                if d.abs() < MIN_DENOM {
                    return None;
                }
                a.eval(x, y)? / d
            }
            Expr::Sin(a) => a.eval(x, y)?.sin(),
            Expr::Cos(a) => a.eval(x, y)?.cos(),
            Expr::Exp(a) => {
                let v = a.eval(x, y)?;
                if v.abs() > MAX_EXP_ARG {
                    return None;
                }
                v.exp()
            }
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Scale(a, s) => a.eval(x, y)? * s,
            Expr::Shift(a, s) => a.eval(x, y)? + s,
        };
        (v.abs() <= MAX_VALUE).then_some(v)
    }

    fn eval_jet(&self, j: &[Jet2; 2], order: JetOrder) -> Jet2 {
        match self {
            Expr::X => j[0],
            Expr::Y => j[1],
            Expr::Const(c) => Jet2::constant(*c, order),
            Expr::Add(a, b) => a.eval_jet(j, order) + b.eval_jet(j, order),
            Expr::Sub(a, b) => a.eval_jet(j, order) - b.eval_jet(j, order),
            Expr::Mul(a, b) => a.eval_jet(j, order) * b.eval_jet(j, order),
            Expr::Div(a, b) => a.eval_jet(j, order) / b.eval_jet(j, order),
            Expr::Sin(a) => a.eval_jet(j, order).sin(),
            Expr::Cos(a) => a.eval_jet(j, order).cos(),
            Expr::Exp(a) => a.eval_jet(j, order).exp(),
            Expr::Neg(a) => -a.eval_jet(j, order),
            Expr::Scale(a, s) => a.eval_jet(j, order).scale(*s),
            Expr::Shift(a, s) => a.eval_jet(j, order) + *s,
        }
    }
}

const H: f64 = 1e-2;

/// Richardson value plus the disagreement between the two step sizes. The
/// disagreement measures the h^2 truncation term and serves as the
/// trust gate.
struct Stencil {
    value: f64,
    noise: f64,
}

fn richardson(d: impl Fn(f64) -> Option<f64>) -> Option<Stencil> {
    let d1 = d(H)?;
    let d2 = d(H / 2.0)?;
    Some(Stencil { value: (4.0 * d2 - d1) / 3.0, noise: (d2 - d1).abs() })
}

fn fd_first(f: &impl Fn(f64, f64) -> Option<f64>, x: f64, y: f64, axis: usize) -> Option<Stencil> {
    richardson(|h| {
        let (a, b) = if axis == 0 {
            (f(x + h, y)?, f(x - h, y)?)
        } else {
            (f(x, y + h)?, f(x, y - h)?)
        };
        Some((a - b) / (2.0 * h))
    })
}

fn fd_pure_second(
    f: &impl Fn(f64, f64) -> Option<f64>,
    x: f64,
    y: f64,
    axis: usize,
) -> Option<Stencil> {
    richardson(|h| {
        let (a, c) = if axis == 0 {
            (f(x + h, y)?, f(x - h, y)?)
        } else {
            (f(x, y + h)?, f(x, y - h)?)
        };
        Some((a - 2.0 * f(x, y)? + c) / (h * h))
    })
}

fn fd_cross(f: &impl Fn(f64, f64) -> Option<f64>, x: f64, y: f64) -> Option<Stencil> {
    richardson(|h| {
        Some((f(x + h, y + h)? - f(x + h, y - h)? - f(x - h, y + h)? + f(x - h, y - h)?)
            / (4.0 * h * h))
    })
}

fn scale_of(jet: f64, fd: f64) -> f64 {
    jet.abs().max(fd.abs()).max(1.0)
}

#[test]
fn jets_match_finite_differences_on_random_expressions() {
    let mut rng = StdRng::seed_from_u64(0x6A65_7432);
    let mut accepted = 0;
    let mut drawn = 0;
    while accepted < 200 {
        drawn += 1;
        assert!(drawn < 100_000, "rejection rate too high, only {accepted} cases");
        let depth = rng.gen_range(2..=5);
        let expr = Expr::random(&mut rng, depth);
        let x = rng.gen_range(-1.5..1.5);
        let y = rng.gen_range(-1.5..1.5);
        let f = |px: f64, py: f64| expr.eval(px, py);

        let Some(plain) = f(x, y) else { continue };
        let stencils = (
            fd_first(&f, x, y, 0),
            fd_first(&f, x, y, 1),
            fd_pure_second(&f, x, y, 0),
            fd_pure_second(&f, x, y, 1),
            fd_cross(&f, x, y),
        );
        let (Some(gx), Some(gy), Some(hxx), Some(hyy), Some(hxy)) = stencils else {
            continue;
        };
        // Trust gates: the h^2 term must be small relative to the result,
        // or the h^4 remainder cannot be bounded by the tolerances below.
        let calm = |s: &Stencil, gate: f64| s.noise <= gate * s.value.abs().max(1.0);
        if !(calm(&gx, 1e-4)
            && calm(&gy, 1e-4)
            && calm(&hxx, 1e-3)
            && calm(&hyy, 1e-3)
            && calm(&hxy, 1e-3))
        {
            continue;
        }

        // Jet division multiplies by a shared reciprocal, so values can
        // drift an ulp per division from plain f64 arithmetic.
        let jet = expr.eval_jet(&jet_seed([x, y], JetOrder::Second), JetOrder::Second);
        assert!(
            (jet.val - plain).abs() <= 1e-13 * plain.abs().max(1.0),
            "value: jet {} vs plain {plain}",
            jet.val
        );

        let first_close = |j: f64, s: &Stencil, what: &str| {
            assert!(
                (j - s.value).abs() <= 1e-7 * scale_of(j, s.value),
                "{what}: jet {j} vs fd {} for {expr:?}",
                s.value
            );
        };
        first_close(jet.gx, &gx, "gx");
        first_close(jet.gy, &gy, "gy");
        let second_close = |j: f64, s: &Stencil, what: &str| {
            assert!(
                (j - s.value).abs() <= 1e-5 * scale_of(j, s.value),
                "{what}: jet {j} vs fd {} for {expr:?}",
                s.value
            );
        };
        second_close(jet.hxx(), &hxx, "hxx");
        second_close(jet.hyy(), &hyy, "hyy");
        second_close(jet.hxy(), &hxy, "hxy");

        // First-order jets run the same value and gradient arithmetic.
        let first = expr.eval_jet(&jet_seed([x, y], JetOrder::First), JetOrder::First);
        assert_eq!(first.val, jet.val);
        assert_eq!(first.gx, jet.gx);
        assert_eq!(first.gy, jet.gy);
        assert!(first.hess.is_none());

        accepted += 1;
    }
}
