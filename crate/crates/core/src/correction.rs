//! Correction of incoherent assessments by Bregman projection.
//!
//! Each column `B` of the mode's family has a vertex `e_B = ([B ⊆ Eᵢ])ᵢ`. The
//! corrected vector is the projection `argmin_{u ∈ conv(e_B)} d_s(u, v)` of
//! the assessed values `v`; for necessity the projection is taken onto every
//! chain's hull and the best chain wins.
//!
//! Under the Brier rule the projection is the Euclidean nearest point and is
//! computed exactly. Other bounded rules are handled approximately by
//! pairwise Frank-Wolfe in [`HighPrecision`] arithmetic.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::coherence::{check, indicator_column, require_kind, system_for, Assessment, Kind};
use crate::error::{Error, Result};
use crate::event_algebra::{enumerate_chains, enumerate_nonempty_events, AtomMask, AtomSet, Chain, Limits};
use crate::exact_lp::{lexmin_solution, optimize, LpOutcome, Sense};
use crate::mobius::MassFunction;
use crate::precision::HighPrecision;
use crate::scoring::{bregman_divergence, bregman_divergence_hp, score_gap_hp, GridKernel, ScoringRule};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Bisection steps of the Frank-Wolfe line search.
const LINE_SEARCH_STEPS: usize = 96;

#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    pub limits: Limits,
    /// Duality-gap stopping tolerance of the approximate solver.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        CorrectionOptions {
            limits: Limits::default(),
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectedValues {
    Exact {
        corrected: Vec<BigRational>,
        divergence: BigRational,
        weights: MassFunction,
    },
    Approx {
        corrected: Vec<HighPrecision>,
        divergence: HighPrecision,
        weights: Vec<(AtomMask, HighPrecision)>,
        /// Frank-Wolfe duality gap at the stopping point.
        gap: HighPrecision,
    },
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub kind: Kind,
    pub rule: String,
    pub atoms: AtomSet,
    /// Columns spanning the hull the values were projected onto.
    pub columns: Vec<AtomMask>,
    pub chain: Option<Chain>,
    /// Set when more than one weight vector realizes the corrected values.
    pub weight_degeneracy: bool,
    pub values: CorrectedValues,
}

impl CorrectionResult {
    pub fn is_exact(&self) -> bool {
        matches!(self.values, CorrectedValues::Exact { .. })
    }

    pub fn corrected_exact(&self) -> Option<&[BigRational]> {
        match &self.values {
            CorrectedValues::Exact { corrected, .. } => Some(corrected),
            CorrectedValues::Approx { .. } => None,
        }
    }

    pub fn divergence_exact(&self) -> Option<&BigRational> {
        match &self.values {
            CorrectedValues::Exact { divergence, .. } => Some(divergence),
            CorrectedValues::Approx { .. } => None,
        }
    }

    pub fn weights_exact(&self) -> Option<&MassFunction> {
        match &self.values {
            CorrectedValues::Exact { weights, .. } => Some(weights),
            CorrectedValues::Approx { .. } => None,
        }
    }

    pub fn corrected_hp(&self) -> Vec<HighPrecision> {
        match &self.values {
            CorrectedValues::Exact { corrected, .. } => corrected.iter().map(HighPrecision::from_rational).collect(),
            CorrectedValues::Approx { corrected, .. } => corrected.clone(),
        }
    }

    pub fn divergence_hp(&self) -> HighPrecision {
        match &self.values {
            CorrectedValues::Exact { divergence, .. } => HighPrecision::from_rational(divergence),
            CorrectedValues::Approx { divergence, .. } => divergence.clone(),
        }
    }

    /// Column weights, positive entries only, in canonical column order.
    pub fn weights_hp(&self) -> Vec<(AtomMask, HighPrecision)> {
        match &self.values {
            CorrectedValues::Exact { weights, .. } => weights
                .focal()
                .map(|(m, w)| (m, HighPrecision::from_rational(w)))
                .collect(),
            CorrectedValues::Approx { weights, .. } => weights.clone(),
        }
    }

    /// The original assessment with its values replaced by the exact
    /// corrected ones.
    pub fn corrected_assessment(&self, original: &Assessment) -> Option<Result<Assessment>> {
        self.corrected_exact().map(|c| original.with_values(c.to_vec()))
    }

    /// Smallest `d_s(e, v) − d_s(e, d*) − d_s(d*, v)` over the hull's
    /// vertices `e`; non-negative at an exact projection. Exact for the
    /// Brier rule on exact results.
    pub fn pythagorean_slack(&self, original: &[BigRational], rule: &dyn ScoringRule) -> Result<BigRational> {
        let rows = self.atoms.generator_masks();
        let vertices: Vec<Vec<BigRational>> = self
            .columns
            .iter()
            .map(|&c| indicator_column(rows, c).into_iter().map(unit).collect())
            .collect();
        let exact = match (&self.values, rule.grid_kernel()) {
            (CorrectedValues::Exact { corrected, .. }, GridKernel::Quadratic) => Some(corrected),
            _ => None,
        };
        if let Some(corrected) = exact {
            let div = |a: &[BigRational], b: &[BigRational]| -> Result<BigRational> {
                Ok(bregman_divergence(rule, a, b)?
                    .as_exact()
                    .expect("quadratic rule")
                    .clone())
            };
            let projection = div(corrected, original)?;
            let mut slack: Option<BigRational> = None;
            for e in &vertices {
                let s = div(e, original)? - div(e, corrected)? - &projection;
                slack = Some(slack.map_or(s.clone(), |m: BigRational| m.min(s)));
            }
            return Ok(slack.unwrap_or_else(BigRational::zero));
        }
        if !rule.is_bounded() {
            return Err(Error::UnboundedRule(rule.name().to_string()));
        }
        let v: Vec<HighPrecision> = original.iter().map(HighPrecision::from_rational).collect();
        let d = self.corrected_hp();
        let projection = bregman_divergence_hp(rule, &d, &v);
        let slack = vertices
            .iter()
            .map(|e| {
                let e: Vec<HighPrecision> = e.iter().map(HighPrecision::from_rational).collect();
                bregman_divergence_hp(rule, &e, &v) - bregman_divergence_hp(rule, &e, &d) - projection.clone()
            })
            .min()
            .unwrap_or_else(HighPrecision::zero);
        Ok(slack.to_rational())
    }
}

fn unit(b: bool) -> BigRational {
    if b {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a square system by Gaussian elimination; `None` if singular.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &p;
            for c in col..n {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &f * &b[col];
            b[r] -= delta;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Minimum-norm point of `conv(points)` by Wolfe's algorithm in exact
/// arithmetic. Returns the point and convex weights on the corral.
pub(crate) fn nearest_point(points: &[Vec<BigRational>]) -> (Vec<BigRational>, Vec<(usize, BigRational)>) {
    assert!(!points.is_empty(), "empty point set");
    let norms: Vec<BigRational> = points.iter().map(|p| dot(p, p)).collect();
    let first = (0..points.len())
        .min_by(|&a, &b| norms[a].cmp(&norms[b]))
        .expect("non-empty");
    let mut corral = vec![first];
    let mut lambda = vec![BigRational::one()];
    let mut x = points[first].clone();
    let combine = |corral: &[usize], weights: &[BigRational]| -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); points[0].len()];
        for (&j, w) in corral.iter().zip(weights) {
            if w.is_zero() {
                continue;
            }
            for (o, p) in out.iter_mut().zip(&points[j]) {
                *o += w * p;
            }
        }
        out
    };
    loop {
        let xx = dot(&x, &x);
        if xx.is_zero() {
            break;
        }
        let (j, xp) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.cmp(&b.1))
            .expect("non-empty");
        if xp >= xx || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(BigRational::zero());
        loop {
            // Affine minimizer: [G 1; 1ᵀ 0] [α; μ] = [0; 1] with G the Gram matrix.
            let k = corral.len();
            let mut a = vec![vec![BigRational::zero(); k + 1]; k + 1];
            for r in 0..k {
                for c in 0..k {
                    a[r][c] = dot(&points[corral[r]], &points[corral[c]]);
                }
                a[r][k] = BigRational::one();
                a[k][r] = BigRational::one();
            }
            let mut rhs = vec![BigRational::zero(); k + 1];
            rhs[k] = BigRational::one();
            let mut alpha = solve_linear(a, rhs).expect("corral is affinely independent");
            alpha.truncate(k);
            if alpha.iter().all(|a| !a.is_negative()) {
                lambda = alpha;
                x = combine(&corral, &lambda);
                prune(&mut corral, &mut lambda);
                break;
            }
            let theta = lambda
                .iter()
                .zip(&alpha)
                .filter(|(_, a)| a.is_negative())
                .map(|(l, a)| l / (l - a))
                .min()
                .expect("some coefficient is negative");
            lambda = lambda
                .iter()
                .zip(&alpha)
                .map(|(l, a)| (BigRational::one() - &theta) * l + &theta * a)
                .collect();
            // The coefficient that fixed θ is now exactly zero.
            prune(&mut corral, &mut lambda);
        }
    }
    (x, corral.into_iter().zip(lambda).collect())
}

fn prune(corral: &mut Vec<usize>, lambda: &mut Vec<BigRational>) {
    let keep: Vec<bool> = lambda.iter().map(|l| !l.is_zero()).collect();
    let mut i = 0;
    corral.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    lambda.retain(|l| !l.is_zero());
}

/// Distinct vertices of the column family, each with the columns mapping to it.
fn distinct_vertices(rows: &[AtomMask], columns: &[AtomMask]) -> Vec<(Vec<bool>, Vec<usize>)> {
    let mut index: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    let mut out: Vec<(Vec<bool>, Vec<usize>)> = Vec::new();
    for (j, &c) in columns.iter().enumerate() {
        let v = indicator_column(rows, c);
        match index.get(&v) {
            Some(&k) => out[k].1.push(j),
            None => {
                index.insert(v.clone(), out.len());
                out.push((v, vec![j]));
            }
        }
    }
    out
}

/// Exact Euclidean projection onto the hull of the columns' vertices.
fn project_exact(rows: &[AtomMask], values: &[BigRational], columns: &[AtomMask]) -> (Vec<BigRational>, BigRational) {
    let vertices = distinct_vertices(rows, columns);
    let shifted: Vec<Vec<BigRational>> = vertices
        .iter()
        .map(|(v, _)| v.iter().zip(values).map(|(&b, d)| unit(b) - d).collect())
        .collect();
    let (x, _) = nearest_point(&shifted);
    let divergence = dot(&x, &x);
    let corrected = values.iter().zip(&x).map(|(d, t)| d + t).collect();
    (corrected, divergence)
}

/// Lexicographically smallest weights over `columns` reproducing `target`,
/// and whether other weight vectors reproduce it too.
fn exact_weights(atoms: &AtomSet, target: &[BigRational], columns: &[AtomMask]) -> Result<(MassFunction, bool)> {
    let rows = atoms.generator_masks();
    let problem = system_for(rows, target, columns);
    let x = lexmin_solution(&problem).expect("target lies in the hull");
    // A basic solution is the only one on its support, so another solution
    // exists iff some column outside the support can carry weight.
    let objective: Vec<BigRational> = x.iter().map(|v| unit(v.is_zero())).collect();
    let degenerate = match optimize(&problem, &objective, Sense::Maximize)? {
        LpOutcome::Optimal { value, .. } => value.is_positive(),
        _ => unreachable!("the system is feasible and bounded"),
    };
    let mass = MassFunction::new(atoms.len(), columns.iter().copied().zip(x))?;
    Ok((mass, degenerate))
}

struct Projection {
    values: CorrectedValues,
    degenerate: bool,
}

fn exact_projection(atoms: &AtomSet, values: &[BigRational], columns: &[AtomMask]) -> Result<Projection> {
    let (corrected, divergence) = project_exact(atoms.generator_masks(), values, columns);
    let (weights, degenerate) = exact_weights(atoms, &corrected, columns)?;
    Ok(Projection {
        values: CorrectedValues::Exact {
            corrected,
            divergence,
            weights,
        },
        degenerate,
    })
}

/// Pairwise Frank-Wolfe for `min_{u ∈ conv(V)} d_s(u, v)`.
fn project_approx(
    rule: &dyn ScoringRule,
    rows: &[AtomMask],
    values: &[BigRational],
    columns: &[AtomMask],
    options: &CorrectionOptions,
) -> Projection {
    let vertices = distinct_vertices(rows, columns);
    let n = values.len();
    let hp = |b: bool| if b { HighPrecision::one() } else { HighPrecision::zero() };
    let target: Vec<HighPrecision> = values.iter().map(HighPrecision::from_rational).collect();
    let target_gap: Vec<HighPrecision> = target
        .iter()
        .map(|t| score_gap_hp(rule, t).expect("bounded rule"))
        .collect();
    let vertex_hp: Vec<Vec<HighPrecision>> = vertices
        .iter()
        .map(|(v, _)| v.iter().map(|&b| hp(b)).collect())
        .collect();
    let start = (0..vertices.len())
        .min_by(|&a, &b| {
            bregman_divergence_hp(rule, &vertex_hp[a], &target).cmp(&bregman_divergence_hp(
                rule,
                &vertex_hp[b],
                &target,
            ))
        })
        .expect("non-empty column family");
    let mut weights = vec![HighPrecision::zero(); vertices.len()];
    weights[start] = HighPrecision::one();
    let mut u = vertex_hp[start].clone();
    let gradient = |u: &[HighPrecision]| -> Vec<HighPrecision> {
        u.iter()
            .zip(&target_gap)
            .map(|(x, t)| t - &score_gap_hp(rule, x).expect("bounded rule"))
            .collect()
    };
    let along = |g: &[HighPrecision], v: &[bool]| -> HighPrecision {
        g.iter().zip(v).filter(|(_, &b)| b).map(|(x, _)| x.clone()).sum()
    };
    let tolerance = HighPrecision::from_f64(options.tolerance);
    let mut gap = HighPrecision::zero();
    for _ in 0..options.max_iterations {
        let g = gradient(&u);
        let g_u: HighPrecision = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        let scores: Vec<HighPrecision> = vertices.iter().map(|(v, _)| along(&g, v)).collect();
        let toward = (0..vertices.len())
            .min_by(|&a, &b| scores[a].cmp(&scores[b]))
            .expect("non-empty");
        gap = &g_u - &scores[toward];
        if gap <= tolerance {
            break;
        }
        let away = (0..vertices.len())
            .filter(|&k| weights[k].is_positive())
            .max_by(|&a, &b| scores[a].cmp(&scores[b]).then(b.cmp(&a)))
            .expect("some vertex carries weight");
        if away == toward {
            break;
        }
        let direction: Vec<i8> = (0..n)
            .map(|i| vertices[toward].0[i] as i8 - vertices[away].0[i] as i8)
            .collect();
        let slope = |gamma: &HighPrecision| -> HighPrecision {
            let mut total = HighPrecision::zero();
            for i in 0..n {
                let x = match direction[i] {
                    1 => &u[i] + gamma,
                    -1 => &u[i] - gamma,
                    _ => continue,
                };
                let gi = &target_gap[i] - &score_gap_hp(rule, &x).expect("bounded rule");
                if direction[i] == 1 {
                    total += &gi;
                } else {
                    total -= &gi;
                }
            }
            total
        };
        let max_step = weights[away].clone();
        let step = if !slope(&max_step).is_positive() {
            max_step
        } else {
            let (mut lo, mut hi) = (HighPrecision::zero(), max_step);
            for _ in 0..LINE_SEARCH_STEPS {
                let mid = (&lo + &hi).div(&HighPrecision::from_int(2));
                if slope(&mid).is_positive() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        };
        if step.is_zero() {
            break;
        }
        weights[toward] += &step;
        weights[away] -= &step;
        for i in 0..n {
            match direction[i] {
                1 => u[i] += &step,
                -1 => u[i] -= &step,
                _ => {}
            }
        }
    }
    let divergence = bregman_divergence_hp(rule, &u, &target);
    let active: Vec<usize> = (0..vertices.len()).filter(|&k| weights[k].is_positive()).collect();
    let shared = active.iter().any(|&k| vertices[k].1.len() > 1);
    let degenerate = shared || !affinely_independent(active.iter().map(|&k| &vertices[k].0));
    let mut column_weights: Vec<(AtomMask, HighPrecision)> = active
        .iter()
        .map(|&k| {
            let last = *vertices[k].1.last().expect("at least one column");
            (columns[last], weights[k].clone())
        })
        .collect();
    column_weights.sort_by_key(|w| w.0);
    Projection {
        values: CorrectedValues::Approx {
            corrected: u,
            divergence,
            weights: column_weights,
            gap,
        },
        degenerate,
    }
}

/// Whether the 0/1 vectors are affinely independent, by exact rank.
#[allow(clippy::needless_range_loop)]
fn affinely_independent<'a>(vectors: impl Iterator<Item = &'a Vec<bool>>) -> bool {
    let vectors: Vec<&Vec<bool>> = vectors.collect();
    let Some(first) = vectors.first() else {
        return true;
    };
    let mut rows: Vec<Vec<BigRational>> = vectors[1..]
        .iter()
        .map(|v| v.iter().zip(first.iter()).map(|(&a, &b)| unit(a) - unit(b)).collect())
        .collect();
    let mut rank = 0;
    let width = first.len();
    for col in 0..width {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = &rows[r][col] / &rows[rank][col];
                for c in col..width {
                    let delta = &f * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank == rows.len()
}

fn ensure_bounded(rule: &dyn ScoringRule) -> Result<()> {
    if rule.is_bounded() {
        Ok(())
    } else {
        Err(Error::UnboundedRule(rule.name().to_string()))
    }
}

fn is_quadratic(rule: &dyn ScoringRule) -> bool {
    rule.grid_kernel() == GridKernel::Quadratic
}

fn project(
    rule: &dyn ScoringRule,
    atoms: &AtomSet,
    values: &[BigRational],
    columns: &[AtomMask],
    coherent: bool,
    options: &CorrectionOptions,
) -> Result<Projection> {
    if is_quadratic(rule) {
        return exact_projection(atoms, values, columns);
    }
    if coherent {
        let (weights, degenerate) = exact_weights(atoms, values, columns)?;
        return Ok(Projection {
            values: CorrectedValues::Exact {
                corrected: values.to_vec(),
                divergence: BigRational::zero(),
                weights,
            },
            degenerate,
        });
    }
    Ok(project_approx(rule, atoms.generator_masks(), values, columns, options))
}

fn correct_over_family(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    kind: Kind,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    ensure_bounded(rule)?;
    let atoms = assessment.atoms()?;
    let columns = match kind {
        Kind::Belief => enumerate_nonempty_events(&atoms, options.limits.atom_limit)?,
        _ => crate::coherence::column_family(&atoms, kind, &options.limits)?,
    };
    let coherent = !is_quadratic(rule) && check(assessment, &options.limits)?.is_coherent();
    let projection = project(rule, &atoms, assessment.values(), &columns, coherent, options)?;
    Ok(CorrectionResult {
        kind,
        rule: rule.name().to_string(),
        atoms,
        columns,
        chain: None,
        weight_degeneracy: projection.degenerate,
        values: projection.values,
    })
}

/// Projection onto the hull of all non-empty events of the generated algebra.
pub fn correct_belief(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    require_kind(assessment, Kind::Belief)?;
    correct_over_family(assessment, rule, Kind::Belief, options)
}

/// Projection onto the hull of the atoms' vertices.
pub fn correct_probability(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    require_kind(assessment, Kind::Probability)?;
    correct_over_family(assessment, rule, Kind::Probability, options)
}

/// Projection onto every chain's hull; the smallest divergence wins, ties
/// going to the chain with the smaller permutation index.
pub fn correct_necessity(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    require_kind(assessment, Kind::Necessity)?;
    ensure_bounded(rule)?;
    let atoms = assessment.atoms()?;
    let values = assessment.values();
    let rows = atoms.generator_masks();
    let chains = enumerate_chains(&atoms, options.limits.chain_limit)?;

    if is_quadratic(rule) {
        let mut best: Option<(BigRational, Chain, Vec<BigRational>)> = None;
        for chain in chains {
            let (corrected, divergence) = project_exact(rows, values, chain.elements());
            let better = best.as_ref().is_none_or(|(d, _, _)| divergence < *d);
            if better {
                let done = divergence.is_zero();
                best = Some((divergence, chain, corrected));
                if done {
                    break;
                }
            }
        }
        let (divergence, chain, corrected) = best.expect("at least one chain");
        let (weights, degenerate) = exact_weights(&atoms, &corrected, chain.elements())?;
        return Ok(CorrectionResult {
            kind: Kind::Necessity,
            rule: rule.name().to_string(),
            columns: chain.elements().to_vec(),
            atoms,
            chain: Some(chain),
            weight_degeneracy: degenerate,
            values: CorrectedValues::Exact {
                corrected,
                divergence,
                weights,
            },
        });
    }

    let verdict = check(assessment, &options.limits)?;
    if let Some(chain) = verdict.witness_chain() {
        let projection = project(rule, &atoms, values, chain.elements(), true, options)?;
        return Ok(CorrectionResult {
            kind: Kind::Necessity,
            rule: rule.name().to_string(),
            columns: chain.elements().to_vec(),
            atoms,
            chain: Some(chain.clone()),
            weight_degeneracy: projection.degenerate,
            values: projection.values,
        });
    }
    let mut best: Option<(HighPrecision, Chain, Projection)> = None;
    for chain in chains {
        let projection = project_approx(rule, rows, values, chain.elements(), options);
        let divergence = match &projection.values {
            CorrectedValues::Approx { divergence, .. } => divergence.clone(),
            CorrectedValues::Exact { .. } => unreachable!("approximate path"),
        };
        if best
            .as_ref()
            .is_none_or(|(d, _, _)| divergence.cmp(d) == Ordering::Less)
        {
            best = Some((divergence, chain, projection));
        }
    }
    let (_, chain, projection) = best.expect("at least one chain");
    Ok(CorrectionResult {
        kind: Kind::Necessity,
        rule: rule.name().to_string(),
        columns: chain.elements().to_vec(),
        atoms,
        chain: Some(chain),
        weight_degeneracy: projection.degenerate,
        values: projection.values,
    })
}

/// Dispatches on the assessment's kind.
pub fn correct(
    assessment: &Assessment,
    rule: &dyn ScoringRule,
    options: &CorrectionOptions,
) -> Result<CorrectionResult> {
    match assessment.kind() {
        Kind::Belief => correct_belief(assessment, rule, options),
        Kind::Probability => correct_probability(assessment, rule, options),
        Kind::Necessity => correct_necessity(assessment, rule, options),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::{check_belief, check_necessity, check_probability};
    use crate::event_algebra::{Event, Universe};
    use crate::mobius::{belief_from_mass, is_consonant_mass, is_probability_mass};
    use crate::rational::{int, ratio};
    use crate::scoring::{Brier, Logarithmic, Spherical};
    use proptest::prelude::*;

    fn example(values: [BigRational; 3], kind: Kind) -> Assessment {
        let u = Universe::new(["w1", "w2", "w3"]).unwrap();
        let ev = |l: &[&str]| Event::from_labels(&u, l).unwrap();
        Assessment::new(
            &u,
            vec![
                (ev(&["w1", "w2"]), values[0].clone()),
                (ev(&["w2", "w3"]), values[1].clone()),
                (ev(&["w2"]), values[2].clone()),
            ],
            kind,
        )
        .unwrap()
    }

    fn example_values() -> [BigRational; 3] {
        [ratio(1, 4), int(1), ratio(1, 2)]
    }

    fn d_star() -> Vec<BigRational> {
        vec![ratio(3, 8), int(1), ratio(3, 8)]
    }

    fn opts() -> CorrectionOptions {
        CorrectionOptions::default()
    }

    #[test]
    fn nearest_point_small_cases() {
        let p = |v: &[i64]| v.iter().map(|&x| int(x)).collect::<Vec<_>>();
        let (x, w) = nearest_point(&[p(&[1, 0]), p(&[0, 1])]);
        assert_eq!(x, vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(w.len(), 2);
        let (x, _) = nearest_point(&[p(&[2, 1]), p(&[2, -1]), p(&[3, 0])]);
        assert_eq!(x, p(&[2, 0]));
        let (x, _) = nearest_point(&[p(&[1, 1]), p(&[-1, -1]), p(&[1, -1]), p(&[-1, 1])]);
        assert_eq!(x, p(&[0, 0]));
        let (x, w) = nearest_point(&[p(&[3, 4])]);
        assert_eq!((x, w), (p(&[3, 4]), vec![(0, int(1))]));
    }

    #[test]
    fn belief_example() {
        let r = correct_belief(&example(example_values(), Kind::Belief), &Brier, &opts()).unwrap();
        assert_eq!(r.corrected_exact().unwrap(), d_star().as_slice());
        assert_eq!(r.divergence_exact().unwrap(), &ratio(1, 32));
        assert!(r.weight_degeneracy);
        let w = r.weights_exact().unwrap();
        let focal: Vec<(AtomMask, BigRational)> = w.focal().map(|(m, x)| (m, x.clone())).collect();
        assert_eq!(
            focal,
            vec![(AtomMask(0b010), ratio(3, 8)), (AtomMask(0b110), ratio(5, 8))]
        );
        assert!(r.pythagorean_slack(&example_values(), &Brier).unwrap() >= int(0));
    }

    #[test]
    fn probability_example() {
        let r = correct_probability(&example(example_values(), Kind::Probability), &Brier, &opts()).unwrap();
        assert_eq!(r.corrected_exact().unwrap(), d_star().as_slice());
        let w = r.weights_exact().unwrap();
        assert!(is_probability_mass(w));
        let atoms: Vec<BigRational> = (0..3).map(|a| w.weight(AtomMask::singleton(a))).collect();
        assert_eq!(atoms, vec![int(0), ratio(3, 8), ratio(5, 8)]);
        assert!(!r.weight_degeneracy);
    }

    #[test]
    fn necessity_example() {
        let r = correct_necessity(&example(example_values(), Kind::Necessity), &Brier, &opts()).unwrap();
        let chain = r.chain.as_ref().unwrap();
        assert_eq!(chain.elements(), &[AtomMask(0b010), AtomMask(0b110), AtomMask(0b111)]);
        assert_eq!(r.corrected_exact().unwrap(), d_star().as_slice());
        assert_eq!(r.divergence_exact().unwrap(), &ratio(1, 32));
        let w = r.weights_exact().unwrap();
        assert!(is_consonant_mass(w));
        let along: Vec<BigRational> = chain.elements().iter().map(|&e| w.weight(e)).collect();
        assert_eq!(along, vec![ratio(3, 8), ratio(5, 8), int(0)]);
    }

    #[test]
    fn coherent_inputs_are_fixed_points() {
        for kind in [Kind::Belief, Kind::Probability, Kind::Necessity] {
            let a = example([ratio(3, 8), int(1), ratio(3, 8)], kind);
            for rule in [&Brier as &dyn ScoringRule, &Spherical] {
                let r = correct(&a, rule, &opts()).unwrap();
                assert_eq!(r.corrected_exact().unwrap(), a.values(), "{kind} {}", rule.name());
                assert!(r.divergence_exact().unwrap().is_zero());
            }
        }
        let nec = example([ratio(3, 8), int(1), ratio(3, 8)], Kind::Necessity);
        let witness = check_necessity(&nec, &Limits::default()).unwrap();
        let r = correct(&nec, &Brier, &opts()).unwrap();
        assert_eq!(r.chain.as_ref(), witness.witness_chain());
    }

    #[test]
    fn single_event_split_by_atoms_is_free() {
        let u = Universe::new(["a", "b"]).unwrap();
        let a = Assessment::new(
            &u,
            vec![(Event::from_labels(&u, ["a"]).unwrap(), ratio(2, 7))],
            Kind::Probability,
        )
        .unwrap();
        let r = correct(&a, &Brier, &opts()).unwrap();
        assert!(r.divergence_exact().unwrap().is_zero());
        assert_eq!(r.corrected_exact().unwrap(), &[ratio(2, 7)]);
    }

    #[test]
    fn unbounded_rule_rejected() {
        for kind in [Kind::Belief, Kind::Probability, Kind::Necessity] {
            assert!(matches!(
                correct(&example(example_values(), kind), &Logarithmic, &opts()),
                Err(Error::UnboundedRule(_))
            ));
        }
    }

    #[test]
    fn all_ones_matches_grid_oracle() {
        // Values (1,1,1) sit on vertex e2 = ({ω2}) itself.
        let a = example([int(1), int(1), int(1)], Kind::Belief);
        let r = correct(&a, &Brier, &opts()).unwrap();
        assert!(r.divergence_exact().unwrap().is_zero());
        // Push a coordinate the hull cannot reach: (1, 0, 1) needs ω2 in A∩B but outside B.
        let a = example([int(1), int(0), int(1)], Kind::Belief);
        let r = correct(&a, &Brier, &opts()).unwrap();
        let exact = r.divergence_exact().unwrap().clone();
        let oracle = grid_oracle(&a, 64);
        assert!(exact <= oracle);
        assert!(&oracle - &exact <= ratio(3 * 2, 64));
    }

    /// Brute-force minimum of |u − v|² over weight vectors on the 7 vertices
    /// of the example, parameterized on a 1/q simplex grid over the four
    /// distinct vertices.
    fn grid_oracle(a: &Assessment, q: i64) -> BigRational {
        let atoms = a.atoms().unwrap();
        let rows = atoms.generator_masks();
        let columns = enumerate_nonempty_events(&atoms, 20).unwrap();
        let vertices: Vec<Vec<BigRational>> = distinct_vertices(rows, &columns)
            .into_iter()
            .map(|(v, _)| v.into_iter().map(unit).collect())
            .collect();
        assert_eq!(vertices.len(), 4);
        let mut best: Option<BigRational> = None;
        for i in 0..=q {
            for j in 0..=q - i {
                for k in 0..=q - i - j {
                    let l = q - i - j - k;
                    let w = [i, j, k, l];
                    let u: Vec<BigRational> = (0..3)
                        .map(|r| (0..4).map(|v| &vertices[v][r] * ratio(w[v], q)).sum())
                        .collect();
                    let d: BigRational = u.iter().zip(a.values()).map(|(x, y)| (x - y) * (x - y)).sum();
                    best = Some(best.map_or(d.clone(), |b: BigRational| b.min(d)));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn spherical_correction_close_to_projection() {
        let a = example(example_values(), Kind::Belief);
        let r = correct(&a, &Spherical, &opts()).unwrap();
        assert!(!r.is_exact());
        let slack = r.pythagorean_slack(&example_values(), &Spherical).unwrap();
        assert!(slack >= ratio(-1, 100_000_000), "{slack}");
        assert!(r.divergence_hp().is_positive());
        let total: HighPrecision = r.weights_hp().into_iter().map(|(_, w)| w).sum();
        assert!((total - HighPrecision::one()).abs().to_f64() < 1e-30);
        // Weighted vertices reproduce the corrected point.
        let rows = r.atoms.generator_masks();
        let mut u = vec![HighPrecision::zero(); 3];
        for (c, w) in r.weights_hp() {
            for (i, hit) in indicator_column(rows, c).into_iter().enumerate() {
                if hit {
                    u[i] += &w;
                }
            }
        }
        for (a, b) in u.iter().zip(r.corrected_hp()) {
            assert!((a - &b).abs().to_f64() < 1e-30);
        }
    }

    #[test]
    fn correct_requires_matching_kind() {
        let a = example(example_values(), Kind::Belief);
        assert!(matches!(
            correct_probability(&a, &Brier, &opts()),
            Err(Error::WrongKind { .. })
        ));
    }

    fn random_assessment() -> impl Strategy<Value = (usize, Vec<(u8, u32)>)> {
        (1usize..5).prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec((1u8..(1 << n) as u8, 0u32..=12), 1..4),
            )
        })
    }

    fn build(n: usize, rows: &[(u8, u32)], kind: Kind) -> Assessment {
        let u = Universe::numbered(n).unwrap();
        let rows = rows
            .iter()
            .map(|&(bits, v)| {
                let e = Event::from_indices(&u, (0..n).filter(|w| bits >> w & 1 == 1)).unwrap();
                (e, ratio(v as i64, 12))
            })
            .collect();
        Assessment::new(&u, rows, kind).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn brier_corrections_are_coherent_projections((n, rows) in random_assessment()) {
            let limits = Limits::default();
            let mut divs = Vec::new();
            for kind in [Kind::Belief, Kind::Probability, Kind::Necessity] {
                let a = build(n, &rows, kind);
                let r = correct(&a, &Brier, &opts()).unwrap();
                let corrected = r.corrected_assessment(&a).unwrap().unwrap();
                let verdict = check(&corrected, &limits).unwrap();
                prop_assert!(verdict.is_coherent());
                if kind == Kind::Necessity {
                    let w = r.weights_exact().unwrap();
                    prop_assert!(is_consonant_mass(w));
                }
                // Weights reproduce the corrected values exactly.
                let bel = belief_from_mass(r.weights_exact().unwrap());
                for (&row, v) in r.atoms.generator_masks().iter().zip(r.corrected_exact().unwrap()) {
                    prop_assert_eq!(&bel.value(row), v);
                }
                prop_assert!(r.pythagorean_slack(a.values(), &Brier).unwrap() >= int(0));
                let again = correct(&corrected, &Brier, &opts()).unwrap();
                prop_assert!(again.divergence_exact().unwrap().is_zero());
                prop_assert_eq!(again.corrected_exact().unwrap(), r.corrected_exact().unwrap());
                prop_assert_eq!(r.divergence_exact().unwrap().is_zero(), check(&a, &limits).unwrap().is_coherent());
                divs.push(r.divergence_exact().unwrap().clone());
            }
            prop_assert!(divs[0] <= divs[1]);
            prop_assert!(divs[0] <= divs[2]);
        }

        #[test]
        fn projection_ignores_vertex_order((n, rows) in random_assessment(), seed in any::<u64>()) {
            let a = build(n, &rows, Kind::Belief);
            let atoms = a.atoms().unwrap();
            let mut columns = enumerate_nonempty_events(&atoms, 20).unwrap();
            let (forward, _) = project_exact(atoms.generator_masks(), a.values(), &columns);
            let k = columns.len();
            columns.rotate_left((seed as usize) % k);
            columns.reverse();
            let (backward, _) = project_exact(atoms.generator_masks(), a.values(), &columns);
            prop_assert_eq!(forward, backward);
        }
    }

    #[test]
    fn coherent_check_agrees_after_probability_and_belief_projection() {
        let a = example(example_values(), Kind::Belief);
        let r = correct(&a, &Brier, &opts()).unwrap();
        let fixed = r.corrected_assessment(&a).unwrap().unwrap();
        assert!(check_belief(&fixed, &Limits::default()).unwrap().is_coherent());
        let p = example(example_values(), Kind::Probability);
        let r = correct(&p, &Brier, &opts()).unwrap();
        let fixed = r.corrected_assessment(&p).unwrap().unwrap();
        assert!(check_probability(&fixed, &Limits::default()).unwrap().is_coherent());
    }
}
