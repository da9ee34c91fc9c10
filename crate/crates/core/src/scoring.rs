//! Proper scoring rules for binary outcomes, their bilinear extension
//! `s(p, x) = p·s(1, x) + (1 − p)·s(0, x)`, Bregman divergences and column
//! penalties.
//!
//! Brier scores are exact rationals. Logarithmic scores are kept symbolically
//! as `−ln r` for rational `r`, so sums of them stay exact (as products) and
//! only mixed or scaled values fall back to [`HighPrecision`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::coherence::Assessment;
use crate::error::{Error, Result};
use crate::event_algebra::AtomMask;
use crate::precision::HighPrecision;
use crate::rational::in_unit_interval;

/// Default cap on the number of grid points `refute_by_grid` will visit.
pub const DEFAULT_GRID_CAP: u128 = 20_000_000;

/// Denominator of the grid on which properness is checked at registration.
pub const PROPERNESS_GRID: i64 = 20;

/// A non-negative score, possibly infinite.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    Exact(BigRational),
    /// `−ln r` for a positive rational `r`.
    NegLn(BigRational),
    Approx(HighPrecision),
    Infinite,
}

impl Score {
    pub fn zero() -> Score {
        Score::Exact(BigRational::zero())
    }

    fn neg_ln(r: BigRational) -> Score {
        if r.is_one() {
            Score::zero()
        } else {
            Score::NegLn(r)
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Score::Infinite)
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Score::Exact(x) => Some(x),
            _ => None,
        }
    }

    /// Finite value rounded into high precision.
    pub fn to_hp(&self) -> Option<HighPrecision> {
        match self {
            Score::Exact(x) => Some(HighPrecision::from_rational(x)),
            Score::NegLn(r) => Some(-HighPrecision::from_rational(r).ln()),
            Score::Approx(x) => Some(x.clone()),
            Score::Infinite => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.to_hp().map_or(f64::INFINITY, |x| x.to_f64())
    }

    pub fn add(&self, other: &Score) -> Score {
        match (self, other) {
            (Score::Infinite, _) | (_, Score::Infinite) => Score::Infinite,
            (Score::Exact(a), Score::Exact(b)) => Score::Exact(a + b),
            (Score::Exact(a), x) | (x, Score::Exact(a)) if a.is_zero() => x.clone(),
            (Score::NegLn(a), Score::NegLn(b)) => Score::neg_ln(a * b),
            (a, b) => Score::Approx(a.to_hp().expect("finite") + b.to_hp().expect("finite")),
        }
    }

    /// Difference of two finite scores.
    pub fn sub(&self, other: &Score) -> Score {
        match (self, other) {
            (Score::Infinite, _) | (_, Score::Infinite) => panic!("difference of infinite scores"),
            (Score::Exact(a), Score::Exact(b)) => Score::Exact(a - b),
            (x, Score::Exact(b)) if b.is_zero() => x.clone(),
            (Score::NegLn(a), Score::NegLn(b)) => Score::neg_ln(a / b),
            (a, b) => Score::Approx(a.to_hp().expect("finite") - b.to_hp().expect("finite")),
        }
    }

    /// `p · self` for `p ≥ 0`, with `0 · ∞ = 0`.
    pub fn scale(&self, p: &BigRational) -> Score {
        if p.is_zero() {
            return Score::zero();
        }
        if p.is_one() {
            return self.clone();
        }
        match self {
            Score::Infinite => Score::Infinite,
            Score::Exact(a) => Score::Exact(a * p),
            Score::NegLn(r) if p.is_integer() => {
                let k = p.to_integer().to_u32().expect("small integer scale");
                Score::neg_ln(num_traits::pow(r.clone(), k as usize))
            }
            other => Score::Approx(other.to_hp().expect("finite") * HighPrecision::from_rational(p)),
        }
    }

    /// Total order on extended values. Symbolic forms are compared exactly;
    /// mixed forms through their high-precision values.
    pub fn compare(&self, other: &Score) -> Ordering {
        match (self, other) {
            (Score::Infinite, Score::Infinite) => Ordering::Equal,
            (Score::Infinite, _) => Ordering::Greater,
            (_, Score::Infinite) => Ordering::Less,
            (Score::Exact(a), Score::Exact(b)) => a.cmp(b),
            (Score::NegLn(a), Score::NegLn(b)) => b.cmp(a),
            (Score::Exact(z), Score::NegLn(r)) if z.is_zero() => r.cmp(&BigRational::one()),
            (Score::NegLn(r), Score::Exact(z)) if z.is_zero() => BigRational::one().cmp(r),
            (a, b) => a.to_hp().expect("finite").cmp(&b.to_hp().expect("finite")),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Exact(x) => write!(f, "{x}"),
            Score::NegLn(r) => write!(f, "-ln({r})"),
            Score::Approx(x) => write!(f, "{x}"),
            Score::Infinite => f.write_str("inf"),
        }
    }
}

/// Specialized integer kernels for grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKernel {
    Quadratic,
    Logarithmic,
    Generic,
}

/// A scoring rule for a binary event: `score(true, x)` is the loss of
/// forecast `x` when the event occurs, `score(false, x)` when it does not.
pub trait ScoringRule: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    fn is_bounded(&self) -> bool;

    fn score(&self, outcome: bool, forecast: &BigRational) -> Score;

    /// The score at a high-precision forecast, `None` where it is infinite.
    fn score_hp(&self, outcome: bool, forecast: &HighPrecision) -> Option<HighPrecision>;

    fn grid_kernel(&self) -> GridKernel {
        GridKernel::Generic
    }
}

/// `s(i, x) = (i − x)²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Brier;

impl ScoringRule for Brier {
    fn name(&self) -> &str {
        "brier"
    }

    fn is_bounded(&self) -> bool {
        true
    }

    fn score(&self, outcome: bool, forecast: &BigRational) -> Score {
        let d = indicator(outcome) - forecast;
        Score::Exact(&d * &d)
    }

    fn score_hp(&self, outcome: bool, forecast: &HighPrecision) -> Option<HighPrecision> {
        let d = &HighPrecision::from_int(outcome as i64) - forecast;
        Some(&d * &d)
    }

    fn grid_kernel(&self) -> GridKernel {
        GridKernel::Quadratic
    }
}

/// `s(i, x) = −ln |1 − i − x|`, infinite at `(1, 0)` and `(0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logarithmic;

impl ScoringRule for Logarithmic {
    fn name(&self) -> &str {
        "log"
    }

    fn is_bounded(&self) -> bool {
        false
    }

    fn score(&self, outcome: bool, forecast: &BigRational) -> Score {
        let r = if outcome {
            forecast.clone()
        } else {
            BigRational::one() - forecast
        };
        if r.is_zero() {
            Score::Infinite
        } else {
            Score::neg_ln(r)
        }
    }

    fn score_hp(&self, outcome: bool, forecast: &HighPrecision) -> Option<HighPrecision> {
        let r = if outcome {
            forecast.clone()
        } else {
            &HighPrecision::one() - forecast
        };
        r.is_positive().then(|| -r.ln())
    }

    fn grid_kernel(&self) -> GridKernel {
        GridKernel::Logarithmic
    }
}

/// `s(1, x) = 1 − x/‖(x, 1−x)‖`, `s(0, x) = 1 − (1−x)/‖(x, 1−x)‖`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Spherical;

impl ScoringRule for Spherical {
    fn name(&self) -> &str {
        "spherical"
    }

    fn is_bounded(&self) -> bool {
        true
    }

    fn score(&self, outcome: bool, forecast: &BigRational) -> Score {
        if forecast.is_zero() || forecast.is_one() {
            let hit = forecast.is_one() == outcome;
            return Score::Exact(if hit { BigRational::zero() } else { BigRational::one() });
        }
        Score::Approx(
            self.score_hp(outcome, &HighPrecision::from_rational(forecast))
                .expect("bounded"),
        )
    }

    fn score_hp(&self, outcome: bool, forecast: &HighPrecision) -> Option<HighPrecision> {
        let other = &HighPrecision::one() - forecast;
        let norm = (&(forecast * forecast) + &(&other * &other)).sqrt();
        let p = if outcome { forecast } else { &other };
        Some(&HighPrecision::one() - &p.div(&norm))
    }
}

type Curve = Arc<dyn Fn(&BigRational) -> Option<BigRational> + Send + Sync>;

/// A user rule given by two rational score curves; `None` means `+∞`.
#[derive(Clone)]
pub struct CustomRule {
    name: String,
    bounded: bool,
    on_one: Curve,
    on_zero: Curve,
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule")
            .field("name", &self.name)
            .field("bounded", &self.bounded)
            .finish_non_exhaustive()
    }
}

impl CustomRule {
    /// Builds the rule and validates properness on the registration grid.
    pub fn new<F1, F0>(name: &str, bounded: bool, on_one: F1, on_zero: F0) -> Result<CustomRule>
    where
        F1: Fn(&BigRational) -> Option<BigRational> + Send + Sync + 'static,
        F0: Fn(&BigRational) -> Option<BigRational> + Send + Sync + 'static,
    {
        let rule = CustomRule {
            name: name.to_string(),
            bounded,
            on_one: Arc::new(on_one),
            on_zero: Arc::new(on_zero),
        };
        check_properness(&rule)?;
        Ok(rule)
    }
}

impl ScoringRule for CustomRule {
    fn name(&self) -> &str {
        &self.name
    }

    fn is_bounded(&self) -> bool {
        self.bounded
    }

    fn score(&self, outcome: bool, forecast: &BigRational) -> Score {
        let curve = if outcome { &self.on_one } else { &self.on_zero };
        curve(forecast).map_or(Score::Infinite, Score::Exact)
    }

    fn score_hp(&self, outcome: bool, forecast: &HighPrecision) -> Option<HighPrecision> {
        let curve = if outcome { &self.on_one } else { &self.on_zero };
        curve(&forecast.to_rational()).map(|v| HighPrecision::from_rational(&v))
    }
}

fn indicator(outcome: bool) -> BigRational {
    if outcome {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

/// `s(p, x) = p·s(1, x) + (1 − p)·s(0, x)`.
pub fn extend_rule(rule: &dyn ScoringRule, p: &BigRational, x: &BigRational) -> Score {
    let q = BigRational::one() - p;
    rule.score(true, x).scale(p).add(&rule.score(false, x).scale(&q))
}

/// The bilinear extension at high-precision arguments, `None` if infinite.
pub fn extend_rule_hp(rule: &dyn ScoringRule, p: &HighPrecision, x: &HighPrecision) -> Option<HighPrecision> {
    let q = &HighPrecision::one() - p;
    let part = |w: &HighPrecision, outcome: bool| -> Option<HighPrecision> {
        if w.is_zero() {
            Some(HighPrecision::zero())
        } else {
            rule.score_hp(outcome, x).map(|s| w * &s)
        }
    };
    Some(part(p, true)? + part(&q, false)?)
}

/// `s(1, x) − s(0, x)`: the gradient of `u ↦ d_s(u, v)` is `Δ(vᵢ) − Δ(uᵢ)`.
pub fn score_gap_hp(rule: &dyn ScoringRule, x: &HighPrecision) -> Option<HighPrecision> {
    Some(rule.score_hp(true, x)? - rule.score_hp(false, x)?)
}

/// Checks on the grid `{0, 1/20, …, 1}` that `x ↦ s(p, x)` is minimized only
/// at `x = p`, and that scores are non-negative.
pub fn check_properness(rule: &dyn ScoringRule) -> Result<()> {
    let grid: Vec<BigRational> = (0..=PROPERNESS_GRID)
        .map(|k| BigRational::new(k.into(), PROPERNESS_GRID.into()))
        .collect();
    let improper = |detail: String| Error::ImproperRule {
        name: rule.name().to_string(),
        detail,
    };
    for x in &grid {
        for outcome in [false, true] {
            let s = rule.score(outcome, x);
            if s.compare(&Score::zero()) == Ordering::Less {
                return Err(improper(format!(
                    "negative score at outcome {}, forecast {x}",
                    outcome as u8
                )));
            }
        }
    }
    for p in &grid {
        let at_p = extend_rule(rule, p, p);
        for x in grid.iter().filter(|x| *x != p) {
            if extend_rule(rule, p, x).compare(&at_p) != Ordering::Greater {
                return Err(improper(format!("expected score at p = {p} is not beaten by x = {x}")));
            }
        }
    }
    Ok(())
}

/// Named rules, each validated on registration.
#[derive(Debug, Clone)]
pub struct RuleRegistry {
    rules: BTreeMap<String, Arc<dyn ScoringRule>>,
}

impl Default for RuleRegistry {
    fn default() -> Self {
        let mut registry = RuleRegistry { rules: BTreeMap::new() };
        for rule in [
            Arc::new(Brier) as Arc<dyn ScoringRule>,
            Arc::new(Logarithmic),
            Arc::new(Spherical),
        ] {
            registry.rules.insert(rule.name().to_string(), rule);
        }
        registry
    }
}

impl RuleRegistry {
    pub fn register(&mut self, rule: Arc<dyn ScoringRule>) -> Result<()> {
        check_properness(rule.as_ref())?;
        self.rules.insert(rule.name().to_string(), rule);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ScoringRule>> {
        self.rules
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownRule(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }
}

fn check_vector(v: &[BigRational]) -> Result<()> {
    match v.iter().position(|x| !in_unit_interval(x)) {
        Some(index) => Err(Error::ValueOutOfRange {
            index,
            value: v[index].clone(),
        }),
        None => Ok(()),
    }
}

/// `d_s(u, v) = Σ s(uᵢ, vᵢ) − Σ s(uᵢ, uᵢ)` for a bounded rule.
pub fn bregman_divergence(rule: &dyn ScoringRule, u: &[BigRational], v: &[BigRational]) -> Result<Score> {
    if !rule.is_bounded() {
        return Err(Error::UnboundedRule(rule.name().to_string()));
    }
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    check_vector(u)?;
    check_vector(v)?;
    let mut total = Score::zero();
    for (a, b) in u.iter().zip(v) {
        total = total.add(&extend_rule(rule, a, b).sub(&extend_rule(rule, a, a)));
    }
    Ok(total)
}

/// `d_s(u, v)` at high-precision arguments; the rule must be bounded.
pub fn bregman_divergence_hp(rule: &dyn ScoringRule, u: &[HighPrecision], v: &[HighPrecision]) -> HighPrecision {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            extend_rule_hp(rule, a, b).expect("bounded rule") - extend_rule_hp(rule, a, a).expect("bounded rule")
        })
        .sum()
}

/// Total score `L(B) = Σᵢ s([B ⊆ Eᵢ], vᵢ)` for each column `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyProfile {
    pub entries: Vec<(AtomMask, Score)>,
}

impl PenaltyProfile {
    pub fn get(&self, column: AtomMask) -> Option<&Score> {
        self.entries.iter().find(|(c, _)| *c == column).map(|(_, s)| s)
    }

    /// True iff every column of `self` scores strictly below `other`'s.
    pub fn strictly_dominates(&self, other: &PenaltyProfile) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((_, a), (_, b))| a.compare(b) == Ordering::Less)
    }
}

fn column_penalty(rule: &dyn ScoringRule, rows: &[AtomMask], values: &[BigRational], column: AtomMask) -> Score {
    rows.iter().zip(values).fold(Score::zero(), |acc, (&e, v)| {
        acc.add(&rule.score(column.is_subset_of(e), v))
    })
}

/// Penalties of the assessment's values on the given columns.
pub fn penalty_profile(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    columns: &[AtomMask],
) -> Result<PenaltyProfile> {
    profile_for(assessment, assessment.values(), rule, columns)
}

/// Penalties of alternative values on the assessment's events.
pub fn profile_for(
    assessment: &Assessment,
    values: &[BigRational],
    rule: &dyn ScoringRule,
    columns: &[AtomMask],
) -> Result<PenaltyProfile> {
    if columns.is_empty() || columns.iter().any(|c| c.is_empty()) {
        return Err(Error::EmptyEvent);
    }
    if values.len() != assessment.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} events",
            values.len(),
            assessment.len()
        )));
    }
    let atoms = assessment.atoms()?;
    let rows = atoms.generator_masks();
    Ok(PenaltyProfile {
        entries: columns
            .iter()
            .map(|&c| (c, column_penalty(rule, rows, values, c)))
            .collect(),
    })
}

type PointTest = Box<dyn Fn(&[i64]) -> bool>;

/// Searches `{0, step, …, 1}ⁿ` in lexicographic order for values whose
/// penalty is strictly lower than the assessment's on every column.
///
/// `step` must be `1/q` for a positive integer `q`. Returns the first
/// dominating point.
pub fn refute_by_grid(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    columns: &[AtomMask],
    step: &BigRational,
    cap: u128,
) -> Result<Option<Vec<BigRational>>> {
    if !step.is_positive() || !step.numer().is_one() {
        return Err(Error::InvalidStep(step.clone()));
    }
    let q = step.denom().to_i64().ok_or_else(|| Error::InvalidStep(step.clone()))?;
    let n = assessment.len();
    let points = (q as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if points > cap {
        return Err(Error::GridTooLarge { points, cap });
    }
    let baseline = penalty_profile(assessment, rule, columns)?;
    let atoms = assessment.atoms()?;
    let rows = atoms.generator_masks();
    let hits: Vec<Vec<bool>> = columns
        .iter()
        .map(|&c| rows.iter().map(|&e| c.is_subset_of(e)).collect())
        .collect();
    let to_values =
        |k: &[i64]| -> Vec<BigRational> { k.iter().map(|&k| BigRational::new(k.into(), q.into())).collect() };

    // Each test takes the grid point's numerators k and says whether it is
    // strictly better than the baseline on every column.
    let kernel = rule.grid_kernel();
    let dominated: PointTest = match kernel {
        GridKernel::Quadratic => {
            // q²·L(k/q) = Σ (q·hit − k)², an integer; strict inequality
            // against the rational baseline becomes ≤ ⌈q²·L(v)⌉ − 1.
            let q2 = BigRational::from_integer(BigInt::from(q * q));
            let limits: Vec<i128> = baseline
                .entries
                .iter()
                .map(|(_, s)| {
                    let scaled = s.as_exact().expect("exact quadratic score") * &q2;
                    (scaled.ceil().to_integer() - BigInt::one()).to_i128().expect("small")
                })
                .collect();
            let hits = hits.clone();
            Box::new(move |k: &[i64]| {
                hits.iter().zip(&limits).all(|(h, &limit)| {
                    let total: i128 = h
                        .iter()
                        .zip(k)
                        .map(|(&hit, &k)| {
                            let d = (if hit { q } else { 0 } - k) as i128;
                            d * d
                        })
                        .sum();
                    total <= limit
                })
            })
        }
        GridKernel::Logarithmic => {
            // L = −ln Π fᵢ with fᵢ = k/q or (q − k)/q, so L(k/q) < L(v) iff
            // Π (q·fᵢ) > qⁿ·Π fᵢ(v), i.e. ≥ ⌊qⁿ·Π fᵢ(v)⌋ + 1.
            let qn = BigRational::from_integer(num_traits::pow(BigInt::from(q), n));
            let values = assessment.values();
            let limits: Vec<BigInt> = hits
                .iter()
                .map(|h| {
                    let product: BigRational = h
                        .iter()
                        .zip(values)
                        .map(|(&hit, v)| if hit { v.clone() } else { BigRational::one() - v })
                        .product();
                    (product * &qn).floor().to_integer() + 1
                })
                .collect();
            let small: Option<Vec<i128>> = limits.iter().map(|l| l.to_i128()).collect();
            let fits = n <= 3 || (q as f64).powi(n as i32) < 1e36;
            let hits = hits.clone();
            match (small, fits) {
                (Some(limits), true) => Box::new(move |k: &[i64]| {
                    hits.iter().zip(&limits).all(|(h, &limit)| {
                        let product: i128 = h
                            .iter()
                            .zip(k)
                            .map(|(&hit, &k)| if hit { k as i128 } else { (q - k) as i128 })
                            .product();
                        product >= limit
                    })
                }),
                _ => Box::new(move |k: &[i64]| {
                    hits.iter().zip(&limits).all(|(h, limit)| {
                        let product: BigInt = h
                            .iter()
                            .zip(k)
                            .map(|(&hit, &k)| BigInt::from(if hit { k } else { q - k }))
                            .product();
                        &product >= limit
                    })
                }),
            }
        }
        GridKernel::Generic => {
            let scores: Vec<[Score; 2]> = (0..=q)
                .map(|k| {
                    let x = BigRational::new(k.into(), q.into());
                    [rule.score(false, &x), rule.score(true, &x)]
                })
                .collect();
            let baseline = baseline.clone();
            let hits = hits.clone();
            Box::new(move |k: &[i64]| {
                hits.iter().zip(&baseline.entries).all(|(h, (_, base))| {
                    let total = h.iter().zip(k).fold(Score::zero(), |acc, (&hit, &k)| {
                        acc.add(&scores[k as usize][hit as usize])
                    });
                    total.compare(base) == Ordering::Less
                })
            })
        }
    };

    let mut k = vec![0i64; n];
    loop {
        if dominated(&k) {
            return Ok(Some(to_values(&k)));
        }
        // Odometer with the first coordinate most significant.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            if k[i] < q {
                k[i] += 1;
                break;
            }
            k[i] = 0;
        }
    }
}
