//! The fixed programs: the counting loop, the trivial amplifier by R, the
//! warm-up program E, and the factorial amplifier F.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::ir::{splice, CounterId, Fragment, Program};
use crate::macros::{add_const, add_var_plus_one, loop_at_most, loop_block, seq, steps, sub_var};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GadgetError {
    #[error("ratio must be positive")]
    ZeroRatio,
    #[error("ratio {0} needs more than {1} lines")]
    TooLarge(u64, u64),
}

/// Line budget for expanding constants into increments.
pub const LINE_BUDGET: u64 = 1_000_000;

/// Symbolic amplification ratio.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RatioExpr {
    Const(u64),
    /// The simulation bound `B` of a program whose ratio depends on it.
    Bound,
    Factorial(Box<RatioExpr>),
    /// `base` with factorial applied `iterations` times.
    IterFactorial { base: u64, iterations: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RatioError {
    #[error("ratio depends on the bound, which was not given")]
    MissingBound,
    #[error("value has more than {0} decimal digits")]
    TooManyDigits(u64),
}

/// Default cap on decimal digits when expanding a ratio.
pub const DIGIT_GUARD: u64 = 100_000;

impl RatioExpr {
    /// `e!`, folding iterated factorials.
    pub fn factorial(e: RatioExpr) -> RatioExpr {
        match e {
            RatioExpr::Const(b) => RatioExpr::IterFactorial {
                base: b,
                iterations: 1,
            },
            RatioExpr::IterFactorial { base, iterations } => RatioExpr::IterFactorial {
                base,
                iterations: iterations + 1,
            },
            other => RatioExpr::Factorial(Box::new(other)),
        }
    }

    /// Replaces [`RatioExpr::Bound`] by `b`.
    pub fn substitute(&self, b: &RatioExpr) -> RatioExpr {
        match self {
            RatioExpr::Bound => b.clone(),
            RatioExpr::Factorial(e) => RatioExpr::factorial(e.substitute(b)),
            other => other.clone(),
        }
    }

    pub fn depends_on_bound(&self) -> bool {
        match self {
            RatioExpr::Bound => true,
            RatioExpr::Factorial(e) => e.depends_on_bound(),
            _ => false,
        }
    }

    pub fn eval(&self, bound: Option<u64>) -> Result<BigUint, RatioError> {
        self.eval_guarded(bound, DIGIT_GUARD)
    }

    pub fn eval_guarded(&self, bound: Option<u64>, max_digits: u64) -> Result<BigUint, RatioError> {
        match self {
            RatioExpr::Const(v) => Ok(BigUint::from(*v)),
            RatioExpr::Bound => bound.map(BigUint::from).ok_or(RatioError::MissingBound),
            RatioExpr::Factorial(e) => factorial_guarded(&e.eval_guarded(bound, max_digits)?, max_digits),
            RatioExpr::IterFactorial { base, iterations } => {
                let mut v = BigUint::from(*base);
                for _ in 0..*iterations {
                    v = factorial_guarded(&v, max_digits)?;
                }
                Ok(v)
            }
        }
    }

    /// Value as `u64` when it fits.
    pub fn eval_u64(&self, bound: Option<u64>) -> Option<u64> {
        let v = self.eval_guarded(bound, 40).ok()?;
        u64::try_from(v).ok()
    }
}

/// `n!`, refusing when the result would exceed `max_digits` decimal digits.
pub fn factorial_guarded(n: &BigUint, max_digits: u64) -> Result<BigUint, RatioError> {
    let n = u64::try_from(n.clone()).map_err(|_| RatioError::TooManyDigits(max_digits))?;
    let mut log10 = 0f64;
    for k in 2..=n {
        log10 += (k as f64).log10();
        if log10 > max_digits as f64 {
            return Err(RatioError::TooManyDigits(max_digits));
        }
    }
    let mut acc = BigUint::one();
    for k in 2..=n {
        acc *= k;
    }
    Ok(acc)
}

impl fmt::Display for RatioExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioExpr::Const(v) => write!(f, "{v}"),
            RatioExpr::Bound => f.write_str("B"),
            RatioExpr::Factorial(e) => match **e {
                RatioExpr::Const(_) | RatioExpr::Bound => write!(f, "{e}!"),
                _ => write!(f, "({e})!"),
            },
            RatioExpr::IterFactorial { base, iterations } => match iterations {
                0 => write!(f, "{base}"),
                1 => write!(f, "{base}!"),
                n => write!(f, "{base}!^{n}"),
            },
        }
    }
}

/// Which bound the tested counters of an amplifier need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundNote {
    /// No tested counters: every bound works.
    Any,
    /// The ratio is a function of the simulation bound.
    Param,
}

impl fmt::Display for BoundNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundNote::Any => f.write_str("any B"),
            BoundNote::Param => f.write_str("B is the ratio parameter"),
        }
    }
}

/// A program with designated output counters whose computed relation in
/// `(out_b, out_c, out_d)` is `{(R, c, c*R) : c > 0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Amplifier {
    pub program: Program,
    pub out_b: CounterId,
    pub out_c: CounterId,
    pub out_d: CounterId,
    pub ratio: RatioExpr,
    pub bound_note: BoundNote,
}

impl Amplifier {
    pub fn outs(&self) -> [CounterId; 3] {
        [self.out_b.clone(), self.out_c.clone(), self.out_d.clone()]
    }

    /// Concrete ratio at simulation bound `bound`.
    pub fn ratio_at(&self, bound: u64) -> Result<BigUint, RatioError> {
        self.ratio.eval(Some(bound))
    }
}

fn c(s: &str) -> CounterId {
    CounterId::new(s)
}

fn anchored(name: &str, f: Fragment) -> Fragment {
    let mut a = Fragment::new();
    a.anchor_here(name);
    a.then(f)
}

/// `add x' C; loop { inc x; dec x'; add y 2 }; halt x'`. Its relation in
/// `(x, y)` is `{(C, 2C)}`.
pub fn counting_loop(c_: u64) -> Result<Program, GadgetError> {
    if c_ + 7 > LINE_BUDGET {
        return Err(GadgetError::TooLarge(c_, LINE_BUDGET));
    }
    let (x, x1, y) = (c("x"), c("x'"), c("y"));
    Ok(splice(vec![
        add_const(&x1, c_),
        anchored("loop", loop_block(steps(&[(&x, 1), (&x1, -1), (&y, 1), (&y, 1)]))),
        Fragment::from_commands(vec![crate::ir::FragmentCommand::Halt(vec![x1])]),
    ])
    .expect("static layout"))
}

/// `add b R; inc c; add d R; loop { inc c; add d R }; halt`.
pub fn trivial_amplifier(r: u64) -> Result<Amplifier, GadgetError> {
    if r == 0 {
        return Err(GadgetError::ZeroRatio);
    }
    if 3 * r + 5 > LINE_BUDGET {
        return Err(GadgetError::TooLarge(r, LINE_BUDGET));
    }
    let (b, cc, d) = (c("b"), c("c"), c("d"));
    let step = || {
        let mut f = Fragment::new();
        f.inc(&cc);
        f.then(add_const(&d, r))
    };
    let program = splice(vec![
        add_const(&b, r),
        step(),
        anchored("amp_loop", loop_block(step())),
    ])
    .expect("static layout");
    Ok(Amplifier {
        program,
        out_b: b,
        out_c: cc,
        out_d: d,
        ratio: RatioExpr::Const(r),
        bound_note: BoundNote::Any,
    })
}

/// The warm-up program E: multiplies `x` by `(i+1)/i` for `i = 1 .. B-1`
/// and halts only if the product came out exact.
pub fn program_e() -> Program {
    let (i, i1, x, x1, y) = (c("i"), c("i'"), c("x"), c("x'"), c("y"));
    let inner = loop_block(seq([sub_var(&x, &i, &i1), add_var_plus_one(&x1, &i, &i1)]));
    let back = loop_block(steps(&[(&x1, -1), (&x, 1)]));
    let main_body = seq([inner, back, steps(&[(&i, 1)])]);
    let final_loop = loop_block(seq([sub_var(&x, &i, &i1), steps(&[(&y, -1)])]));
    let mut tail = Fragment::new();
    tail.anchor_here("after_main_loop");
    tail.push(crate::ir::FragmentCommand::TestMax(i.clone()));
    splice(vec![
        steps(&[(&i, 1), (&x, 1), (&y, 1)]),
        anchored("init_loop", loop_block(steps(&[(&x, 1), (&y, 1)]))),
        anchored("main_loop", loop_block(main_body)),
        tail,
        anchored("final_loop", final_loop),
        Fragment::from_commands(vec![crate::ir::FragmentCommand::Halt(vec![y])]),
    ])
    .expect("static layout")
}

/// The factorial amplifier F: for every bound `k` its `k`-computed relation
/// in `(b, c, d)` is `{(k!, c, c*k!) : c > 0}`.
///
/// Landmarks: `init_loop`, `main_loop` (header), `iter_start` (first body
/// line), `upper_loop`, `bu_loop`, `iter_mid` (first line after `bu_loop`),
/// `lower_loop`, `iter_end` (the `inc i`), `end_main` (the `tm i`),
/// `final_loop`.
pub fn factorial_amplifier() -> Amplifier {
    let names = ["i", "i'", "b", "b'", "c", "c'", "d", "d'", "x", "y"];
    let [i, i1, b, b1, cc, c1, d, d1, x, y] = names.map(c);

    let upper_inner = seq([sub_var(&d, &i, &i1), sub_var(&x, &i, &i1), add_var_plus_one(&d1, &i, &i1)]);
    let upper = loop_block(seq([
        sub_var(&cc, &i, &i1),
        steps(&[(&c1, 1)]),
        loop_at_most(&b, &b1, upper_inner),
    ]));
    let bu = loop_block(seq([steps(&[(&b, -1)]), add_var_plus_one(&b1, &i, &i1)]));
    let bl = loop_block(steps(&[(&b1, -1), (&b, 1)]));
    let lower = loop_block(seq([
        steps(&[(&c1, -1), (&cc, 1)]),
        loop_at_most(&b, &b1, steps(&[(&d1, -1), (&d, 1), (&x, 1)])),
    ]));
    let mut body = Fragment::new();
    body.anchor_here("iter_start");
    let body = seq([
        body,
        anchored("upper_loop", upper),
        anchored("bu_loop", bu),
        anchored("iter_mid", Fragment::new()),
        bl,
        anchored("lower_loop", lower),
        anchored("iter_end", steps(&[(&i, 1)])),
    ]);
    let mut tm = Fragment::new();
    tm.anchor_here("end_main");
    tm.push(crate::ir::FragmentCommand::TestMax(i.clone()));
    let program = splice(vec![
        steps(&[(&i, 1), (&b, 1), (&cc, 1), (&d, 1), (&x, 1), (&y, 1)]),
        anchored(
            "init_loop",
            loop_block(steps(&[(&cc, 1), (&d, 1), (&x, 1), (&y, 1)])),
        ),
        anchored("main_loop", loop_block(body)),
        tm,
        anchored(
            "final_loop",
            loop_block(seq([sub_var(&x, &i, &i1), steps(&[(&y, -1)])])),
        ),
        Fragment::from_commands(vec![crate::ir::FragmentCommand::Halt(vec![y])]),
    ])
    .expect("static layout");
    Amplifier {
        program,
        out_b: b,
        out_c: cc,
        out_d: d,
        ratio: RatioExpr::factorial(RatioExpr::Bound),
        bound_note: BoundNote::Param,
    }
}
