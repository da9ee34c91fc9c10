//! Coherence of belief, probability and necessity assessments.
//!
//! For a finite family `E₁…Eₙ` with assessed values `v`, coherence is the
//! solvability of `Σ_B [B ⊆ Eᵢ] x_B = vᵢ, Σ_B x_B = 1, x ≥ 0`, where `B` ranges
//! over a column family: every non-empty event of the generated algebra
//! (belief), the atoms (probability), or the elements of some maximal chain
//! (necessity). A solution is a witness mass; a Farkas certificate of the
//! system is a Dutch book.

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::event_algebra::{
    compute_atoms, enumerate_chains, enumerate_nonempty_events, generalized_indicator, AtomMask, AtomSet, Chain, Event,
    EventFamily, Limits, Universe,
};
use crate::exact_lp::{optimize, solve_feasibility, FeasibilityOutcome, FeasibilityProblem, LpOutcome, Sense};
use crate::mobius::MassFunction;
use crate::rational::in_unit_interval;

/// Necessity refutations carry one certificate per chain up to this many atoms.
pub const PER_CHAIN_CERTIFICATE_ATOMS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Belief,
    Probability,
    Necessity,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Belief => "belief",
            Kind::Probability => "probability",
            Kind::Necessity => "necessity",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Kind, String> {
        match s {
            "belief" => Ok(Kind::Belief),
            "probability" => Ok(Kind::Probability),
            "necessity" => Ok(Kind::Necessity),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

/// Values in `[0, 1]` assessed on an ordered list of events.
#[derive(Debug, Clone)]
pub struct Assessment {
    universe: Arc<Universe>,
    events: Vec<Event>,
    values: Vec<BigRational>,
    kind: Kind,
}

impl Assessment {
    pub fn new(universe: &Arc<Universe>, rows: Vec<(Event, BigRational)>, kind: Kind) -> Result<Assessment> {
        let (events, values): (Vec<Event>, Vec<BigRational>) = rows.into_iter().unzip();
        EventFamily::new(universe, events.clone())?;
        if let Some(index) = values.iter().position(|v| !in_unit_interval(v)) {
            return Err(Error::ValueOutOfRange {
                index,
                value: values[index].clone(),
            });
        }
        Ok(Assessment {
            universe: Arc::clone(universe),
            events,
            values,
            kind,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn family(&self) -> EventFamily {
        EventFamily::new(&self.universe, self.events.clone()).expect("validated at construction")
    }

    pub fn atoms(&self) -> Result<AtomSet> {
        compute_atoms(&self.family())
    }

    pub fn with_kind(&self, kind: Kind) -> Assessment {
        Assessment { kind, ..self.clone() }
    }

    pub fn with_values(&self, values: Vec<BigRational>) -> Result<Assessment> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} events",
                values.len(),
                self.len()
            )));
        }
        Assessment::new(
            &self.universe,
            self.events.iter().cloned().zip(values).collect(),
            self.kind,
        )
    }

    /// The sub-assessment on the listed rows.
    pub fn restrict(&self, rows: &[usize]) -> Assessment {
        Assessment {
            universe: Arc::clone(&self.universe),
            events: rows.iter().map(|&i| self.events[i].clone()).collect(),
            values: rows.iter().map(|&i| self.values[i].clone()).collect(),
            kind: self.kind,
        }
    }

    /// A copy with one more assessed row.
    pub fn extended(&self, event: Event, value: BigRational) -> Result<Assessment> {
        let mut rows: Vec<(Event, BigRational)> =
            self.events.iter().cloned().zip(self.values.iter().cloned()).collect();
        rows.push((event, value));
        Assessment::new(&self.universe, rows, self.kind)
    }
}

/// Stakes whose combined gain is at most `gain_bound < 0` on every column of
/// the refuted family.
#[derive(Debug, Clone, PartialEq)]
pub struct DutchBook {
    pub stakes: Vec<BigRational>,
    pub gain_bound: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRefutation {
    pub chain: Chain,
    pub dutch_book: DutchBook,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Refutation {
    /// One stake vector losing on every column. For necessity assessments it
    /// loses on every chain at once, since chains are subfamilies of U_F.
    Stakes(DutchBook),
    /// Necessity only: a separate Dutch book for every chain, plus the
    /// belief-mode book when one exists.
    PerChain {
        chains: Vec<ChainRefutation>,
        uniform: Option<DutchBook>,
    },
    /// Necessity only, above [`PER_CHAIN_CERTIFICATE_ATOMS`]: every chain was
    /// found infeasible (`pruned` of them by the cumulative-sum test).
    AllChainsInfeasible {
        chains: u64,
        pruned: u64,
        uniform: Option<DutchBook>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Witness { mass: MassFunction, chain: Option<Chain> },
    Refuted(Refutation),
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub kind: Kind,
    pub atoms: AtomSet,
    pub certificate: Certificate,
}

impl Verdict {
    pub fn is_coherent(&self) -> bool {
        matches!(self.certificate, Certificate::Witness { .. })
    }

    pub fn witness(&self) -> Option<&MassFunction> {
        match &self.certificate {
            Certificate::Witness { mass, .. } => Some(mass),
            Certificate::Refuted(_) => None,
        }
    }

    pub fn witness_chain(&self) -> Option<&Chain> {
        match &self.certificate {
            Certificate::Witness { chain, .. } => chain.as_ref(),
            Certificate::Refuted(_) => None,
        }
    }

    pub fn refutation(&self) -> Option<&Refutation> {
        match &self.certificate {
            Certificate::Refuted(r) => Some(r),
            Certificate::Witness { .. } => None,
        }
    }

    /// The single stake vector refuting the assessment, if there is one.
    pub fn dutch_book(&self) -> Option<&DutchBook> {
        match self.refutation()? {
            Refutation::Stakes(book) => Some(book),
            Refutation::PerChain { uniform, .. } | Refutation::AllChainsInfeasible { uniform, .. } => uniform.as_ref(),
        }
    }
}

/// `[column ⊆ Eᵢ]` for every assessed row.
pub fn indicator_column(rows: &[AtomMask], column: AtomMask) -> Vec<bool> {
    rows.iter().map(|&e| column.is_subset_of(e)).collect()
}

pub(crate) fn system_for(rows: &[AtomMask], values: &[BigRational], columns: &[AtomMask]) -> FeasibilityProblem {
    let n = rows.len();
    let sparse = columns
        .iter()
        .map(|&c| {
            let mut col: Vec<(usize, BigRational)> = indicator_column(rows, c)
                .into_iter()
                .enumerate()
                .filter(|(_, hit)| *hit)
                .map(|(i, _)| (i, BigRational::one()))
                .collect();
            col.push((n, BigRational::one()));
            col
        })
        .collect();
    let mut rhs = values.to_vec();
    rhs.push(BigRational::one());
    FeasibilityProblem::from_sparse_columns(sparse, rhs).expect("indices are in range")
}

/// The linear system of the assessment over the given columns: one row per
/// assessed event with entries `[column ⊆ Eᵢ]`, then the normalization row.
pub fn build_system(assessment: &Assessment, columns: &[Event]) -> Result<FeasibilityProblem> {
    let atoms = assessment.atoms()?;
    let masks = columns
        .iter()
        .map(|c| {
            if c.is_empty() {
                Err(Error::EmptyEvent)
            } else {
                atoms.mask_of(c)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(system_for(atoms.generator_masks(), assessment.values(), &masks))
}

/// Column family for belief (`U_F`) or probability (atoms) checks.
pub fn column_family(atoms: &AtomSet, kind: Kind, limits: &Limits) -> Result<Vec<AtomMask>> {
    match kind {
        Kind::Belief => enumerate_nonempty_events(atoms, limits.atom_limit),
        Kind::Probability => {
            if atoms.len() > limits.atom_limit {
                return Err(Error::AtomLimit {
                    atoms: atoms.len(),
                    limit: limits.atom_limit,
                    events: 1u128.checked_shl(atoms.len() as u32).unwrap_or(u128::MAX),
                });
            }
            Ok((0..atoms.len()).map(AtomMask::singleton).collect())
        }
        Kind::Necessity => Err(Error::WrongKind {
            expected: Kind::Belief,
            found: Kind::Necessity,
        }),
    }
}

fn dutch_book_from(y: Vec<BigRational>, problem: &FeasibilityProblem, n: usize) -> DutchBook {
    let yb: BigRational = y.iter().zip(problem.rhs()).map(|(a, b)| a * b).sum();
    let mut stakes = y;
    stakes.truncate(n);
    DutchBook {
        stakes,
        gain_bound: -yb,
    }
}

pub(crate) fn require_kind(assessment: &Assessment, expected: Kind) -> Result<()> {
    if assessment.kind() != expected {
        return Err(Error::WrongKind {
            expected,
            found: assessment.kind(),
        });
    }
    Ok(())
}

fn check_over_columns(assessment: &Assessment, kind: Kind, limits: &Limits) -> Result<Verdict> {
    let atoms = assessment.atoms()?;
    let columns = column_family(&atoms, kind, limits)?;
    let problem = system_for(atoms.generator_masks(), assessment.values(), &columns);
    let certificate = match solve_feasibility(&problem) {
        FeasibilityOutcome::Feasible(x) => Certificate::Witness {
            mass: MassFunction::new(atoms.len(), columns.iter().copied().zip(x))?,
            chain: None,
        },
        FeasibilityOutcome::Infeasible(y) => {
            Certificate::Refuted(Refutation::Stakes(dutch_book_from(y, &problem, assessment.len())))
        }
    };
    Ok(Verdict {
        kind,
        atoms,
        certificate,
    })
}

/// Belief coherence: the system over every non-empty event of the generated
/// algebra.
pub fn check_belief(assessment: &Assessment, limits: &Limits) -> Result<Verdict> {
    require_kind(assessment, Kind::Belief)?;
    check_over_columns(assessment, Kind::Belief, limits)
}

/// Probability coherence: the system over the atoms only.
pub fn check_probability(assessment: &Assessment, limits: &Limits) -> Result<Verdict> {
    require_kind(assessment, Kind::Probability)?;
    check_over_columns(assessment, Kind::Probability, limits)
}

/// Cheap exact test of whether a chain can carry the assessment.
///
/// Along a chain `D₁ ⊂ … ⊂ D_m`, a consonant mass gives every event `E` the
/// cumulative weight of the chain elements inside `E`, so values must be a
/// non-decreasing function of that depth, 0 at depth 0 and 1 at depth m.
pub(crate) fn chain_admissible(chain: &Chain, rows: &[AtomMask], values: &[BigRational]) -> bool {
    let m = chain.len();
    let mut points: Vec<(usize, &BigRational)> = rows.iter().map(|&e| chain.depth_inside(e)).zip(values).collect();
    let zero = BigRational::zero();
    let one = BigRational::one();
    points.push((0, &zero));
    points.push((m, &one));
    points.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    points.windows(2).all(|w| {
        let ((k0, v0), (k1, v1)) = (w[0], w[1]);
        if k0 == k1 {
            v0 == v1
        } else {
            v0 <= v1
        }
    })
}

/// First chain carrying the values with its weights, and the number of
/// chains pruned on the way.
pub(crate) type ChainSearch = (Option<(Chain, Vec<BigRational>)>, u64);

/// First chain (lexicographic permutation order) whose system is feasible.
pub(crate) fn find_chain(atoms: &AtomSet, values: &[BigRational], limits: &Limits, prune: bool) -> Result<ChainSearch> {
    let rows = atoms.generator_masks();
    let mut pruned = 0u64;
    for chain in enumerate_chains(atoms, limits.chain_limit)? {
        if prune && !chain_admissible(&chain, rows, values) {
            pruned += 1;
            continue;
        }
        let problem = system_for(rows, values, chain.elements());
        if let FeasibilityOutcome::Feasible(x) = solve_feasibility(&problem) {
            return Ok((Some((chain, x)), pruned));
        }
    }
    Ok((None, pruned))
}

/// Necessity coherence: some chain of the generated algebra carries a
/// feasible system. The first such chain is the witness.
pub fn check_necessity(assessment: &Assessment, limits: &Limits) -> Result<Verdict> {
    require_kind(assessment, Kind::Necessity)?;
    let atoms = assessment.atoms()?;
    let values = assessment.values();
    let (found, pruned) = find_chain(&atoms, values, limits, true)?;
    if let Some((chain, x)) = found {
        let mass = MassFunction::new(atoms.len(), chain.elements().iter().copied().zip(x))?;
        return Ok(Verdict {
            kind: Kind::Necessity,
            atoms,
            certificate: Certificate::Witness {
                mass,
                chain: Some(chain),
            },
        });
    }
    let uniform = if atoms.len() <= limits.atom_limit {
        match check_over_columns(assessment, Kind::Belief, limits)?.certificate {
            Certificate::Refuted(Refutation::Stakes(book)) => Some(book),
            _ => None,
        }
    } else {
        None
    };
    let rows = atoms.generator_masks();
    let refutation = if atoms.len() <= PER_CHAIN_CERTIFICATE_ATOMS {
        let mut chains = Vec::new();
        for chain in enumerate_chains(&atoms, limits.chain_limit)? {
            let problem = system_for(rows, values, chain.elements());
            match solve_feasibility(&problem) {
                FeasibilityOutcome::Infeasible(y) => chains.push(ChainRefutation {
                    chain,
                    dutch_book: dutch_book_from(y, &problem, assessment.len()),
                }),
                FeasibilityOutcome::Feasible(_) => unreachable!("pruning only discards infeasible chains"),
            }
        }
        Refutation::PerChain { chains, uniform }
    } else {
        Refutation::AllChainsInfeasible {
            chains: enumerate_chains(&atoms, limits.chain_limit)?.len() as u64,
            pruned,
            uniform,
        }
    };
    Ok(Verdict {
        kind: Kind::Necessity,
        atoms,
        certificate: Certificate::Refuted(refutation),
    })
}

/// Dispatches on the assessment's kind.
pub fn check(assessment: &Assessment, limits: &Limits) -> Result<Verdict> {
    match assessment.kind() {
        Kind::Belief => check_belief(assessment, limits),
        Kind::Probability => check_probability(assessment, limits),
        Kind::Necessity => check_necessity(assessment, limits),
    }
}

/// Range of values a new event can take while keeping the assessment
/// coherent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionInterval {
    pub lo: BigRational,
    pub hi: BigRational,
    /// Disjoint closed intervals whose union is the set of coherent values.
    /// A single piece for belief and probability; for necessity the union of
    /// per-chain intervals, which need not be convex.
    pub pieces: Vec<(BigRational, BigRational)>,
}

fn lp_range(problem: &FeasibilityProblem, objective: &[BigRational]) -> Result<Option<(BigRational, BigRational)>> {
    let lo = match optimize(problem, objective, Sense::Minimize)? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Infeasible(_) => return Ok(None),
        LpOutcome::Unbounded => unreachable!("normalized systems are bounded"),
    };
    let hi = match optimize(problem, objective, Sense::Maximize)? {
        LpOutcome::Optimal { value, .. } => value,
        _ => unreachable!("feasible normalized systems are bounded"),
    };
    Ok(Some((lo, hi)))
}

/// Lowest and highest coherent value for `target` given a coherent
/// assessment (in its own kind).
pub fn extension_interval(assessment: &Assessment, target: &Event, limits: &Limits) -> Result<ExtensionInterval> {
    if !check(assessment, limits)?.is_coherent() {
        return Err(Error::Incoherent(assessment.kind()));
    }
    let mut events = assessment.events().to_vec();
    events.push(target.clone());
    let atoms = compute_atoms(&EventFamily::new(assessment.universe(), events)?)?;
    let all_rows = atoms.generator_masks();
    let (rows, target_mask) = all_rows.split_at(assessment.len());
    let target_mask = target_mask[0];
    let values = assessment.values();
    let objective_for = |cols: &[AtomMask]| -> Vec<BigRational> {
        cols.iter()
            .map(|c| {
                if c.is_subset_of(target_mask) {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect()
    };
    let mut pieces: Vec<(BigRational, BigRational)> = Vec::new();
    match assessment.kind() {
        Kind::Belief | Kind::Probability => {
            let columns = column_family(&atoms, assessment.kind(), limits)?;
            let problem = system_for(rows, values, &columns);
            let range = lp_range(&problem, &objective_for(&columns))?
                .expect("coherence is preserved under refinement of the algebra");
            pieces.push(range);
        }
        Kind::Necessity => {
            for chain in enumerate_chains(&atoms, limits.chain_limit)? {
                if !chain_admissible(&chain, rows, values) {
                    continue;
                }
                let problem = system_for(rows, values, chain.elements());
                if let Some(range) = lp_range(&problem, &objective_for(chain.elements()))? {
                    pieces.push(range);
                }
            }
            pieces.sort();
            let mut merged: Vec<(BigRational, BigRational)> = Vec::new();
            for (lo, hi) in pieces {
                match merged.last_mut() {
                    Some(last) if lo <= last.1 => {
                        if hi > last.1 {
                            last.1 = hi;
                        }
                    }
                    _ => merged.push((lo, hi)),
                }
            }
            pieces = merged;
        }
    }
    let lo = pieces
        .first()
        .map(|p| p.0.clone())
        .expect("coherent assessments have a witness");
    let hi = pieces.iter().map(|p| p.1.clone()).max().expect("non-empty");
    Ok(ExtensionInterval { lo, hi, pieces })
}

/// Combined gain Σ λᵢ ([observed ⊆ Eᵢ] − vᵢ) of bets at the assessed prices.
pub fn evaluate_gain(assessment: &Assessment, stakes: &[BigRational], observed: &Event) -> Result<BigRational> {
    if stakes.len() != assessment.len() {
        return Err(Error::StakesLength {
            expected: assessment.len(),
            found: stakes.len(),
        });
    }
    let mut gain = BigRational::zero();
    for ((event, value), stake) in assessment.events().iter().zip(assessment.values()).zip(stakes) {
        let hit = BigRational::from_integer(generalized_indicator(event, observed)?.into());
        gain += stake * (hit - value);
    }
    Ok(gain)
}

/// Gain of the stakes on every non-empty event of the generated algebra, in
/// canonical order.
pub fn gain_sweep(
    assessment: &Assessment,
    stakes: &[BigRational],
    limits: &Limits,
) -> Result<Vec<(Event, BigRational)>> {
    let atoms = assessment.atoms()?;
    enumerate_nonempty_events(&atoms, limits.atom_limit)?
        .into_iter()
        .map(|m| {
            let event = atoms.event_of(m);
            let gain = evaluate_gain(assessment, stakes, &event)?;
            Ok((event, gain))
        })
        .collect()
}

/// True iff the stakes lose strictly on every listed column.
pub fn is_uniform_loss(
    rows: &[AtomMask],
    values: &[BigRational],
    stakes: &[BigRational],
    columns: &[AtomMask],
) -> bool {
    columns.iter().all(|&c| {
        let gain: BigRational = indicator_column(rows, c)
            .into_iter()
            .zip(values)
            .zip(stakes)
            .map(|((hit, v), s)| {
                let hit = if hit { BigRational::one() } else { BigRational::zero() };
                s * (hit - v)
            })
            .sum();
        gain.is_negative()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobius::{belief_from_mass, is_consonant_mass, is_probability_mass};
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn omega3() -> Arc<Universe> {
        Universe::new(["w1", "w2", "w3"]).unwrap()
    }

    fn ev(u: &Arc<Universe>, labels: &[&str]) -> Event {
        Event::from_labels(u, labels).unwrap()
    }

    fn example(values: [BigRational; 3], kind: Kind) -> Assessment {
        let u = omega3();
        Assessment::new(
            &u,
            vec![
                (ev(&u, &["w1", "w2"]), values[0].clone()),
                (ev(&u, &["w2", "w3"]), values[1].clone()),
                (ev(&u, &["w2"]), values[2].clone()),
            ],
            kind,
        )
        .unwrap()
    }

    fn example_values() -> [BigRational; 3] {
        [ratio(1, 4), int(1), ratio(1, 2)]
    }

    fn limits() -> Limits {
        Limits::default()
    }

    #[test]
    fn example_system_matches_indicator_table() {
        let a = example(example_values(), Kind::Belief);
        let atoms = a.atoms().unwrap();
        let columns: Vec<Event> = enumerate_nonempty_events(&atoms, 20)
            .unwrap()
            .into_iter()
            .map(|m| atoms.event_of(m))
            .collect();
        let p = build_system(&a, &columns).unwrap();
        let table: Vec<Vec<BigRational>> = [
            [1, 1, 0, 1, 0, 0, 0],
            [0, 1, 1, 0, 0, 1, 0],
            [0, 1, 0, 0, 0, 0, 0],
            [1, 1, 1, 1, 1, 1, 1],
        ]
        .iter()
        .map(|r| r.iter().map(|&v| int(v)).collect())
        .collect();
        assert_eq!(p.dense_rows(), table);
        assert_eq!(p.rhs(), &[ratio(1, 4), int(1), ratio(1, 2), int(1)]);
    }

    #[test]
    fn omega_only_system() {
        let u = omega3();
        let a = Assessment::new(&u, vec![(Event::full(&u), int(1))], Kind::Belief).unwrap();
        let p = build_system(&a, &[Event::full(&u)]).unwrap();
        assert_eq!(p.dense_rows(), vec![vec![int(1)], vec![int(1)]]);
        assert_eq!(p.rhs(), &[int(1), int(1)]);
        assert!(solve_feasibility(&p).is_feasible());
        assert!(matches!(
            build_system(&a, &[ev(&u, &["w1"])]),
            Err(Error::NotAtomUnion(_))
        ));
    }

    #[test]
    fn atom_columns_give_probability_system() {
        let a = example(example_values(), Kind::Probability);
        let atoms = a.atoms().unwrap();
        let cols: Vec<Event> = atoms.atoms().to_vec();
        let p = build_system(&a, &cols).unwrap();
        assert_eq!(
            p.dense_rows()[..3],
            [
                vec![int(1), int(1), int(0)],
                vec![int(0), int(1), int(1)],
                vec![int(0), int(1), int(0)]
            ]
        );
    }

    #[test]
    fn example_is_incoherent_in_every_mode() {
        for kind in [Kind::Belief, Kind::Probability, Kind::Necessity] {
            let v = check(&example(example_values(), kind), &limits()).unwrap();
            assert!(!v.is_coherent(), "{kind}");
        }
    }

    #[test]
    fn example_dutch_book_bounds_every_gain() {
        let a = example(example_values(), Kind::Belief);
        let v = check_belief(&a, &limits()).unwrap();
        let book = v.dutch_book().unwrap();
        assert!(book.gain_bound.is_negative());
        for (_, g) in gain_sweep(&a, &book.stakes, &limits()).unwrap() {
            assert!(g <= book.gain_bound);
        }
    }

    #[test]
    fn coherent_values_with_exhibited_witness() {
        let a = example([ratio(3, 10), ratio(6, 10), ratio(2, 10)], Kind::Belief);
        let v = check_belief(&a, &limits()).unwrap();
        assert!(v.is_coherent());
        let atoms = &v.atoms;
        // The exhibited mass {ω2}↦1/5, A↦1/10, {ω3}↦2/5, Ω↦3/10 also reproduces the values.
        let exhibited = MassFunction::new(
            3,
            [
                (AtomMask(0b010), ratio(1, 5)),
                (AtomMask(0b011), ratio(1, 10)),
                (AtomMask(0b100), ratio(2, 5)),
                (AtomMask(0b111), ratio(3, 10)),
            ],
        )
        .unwrap();
        for mass in [v.witness().unwrap(), &exhibited] {
            let bel = belief_from_mass(mass);
            for (&row, value) in atoms.generator_masks().iter().zip(a.values()) {
                assert_eq!(&bel.value(row), value);
            }
        }
    }

    #[test]
    fn probability_examples() {
        let v = check_probability(
            &example([ratio(3, 8), int(1), ratio(3, 8)], Kind::Probability),
            &limits(),
        )
        .unwrap();
        let w = v.witness().unwrap();
        assert!(is_probability_mass(w));
        let weights: Vec<BigRational> = (0..3).map(|a| w.weight(AtomMask::singleton(a))).collect();
        assert_eq!(weights, vec![int(0), ratio(3, 8), ratio(5, 8)]);

        let u = omega3();
        let omega = Assessment::new(&u, vec![(Event::full(&u), int(1))], Kind::Probability).unwrap();
        assert!(check_probability(&omega, &limits()).unwrap().is_coherent());
    }

    #[test]
    fn necessity_examples() {
        let v = check_necessity(&example([ratio(3, 8), int(1), ratio(3, 8)], Kind::Necessity), &limits()).unwrap();
        assert!(v.is_coherent());
        let chain = v.witness_chain().unwrap();
        assert_eq!(chain.permutation(), &[1, 2, 0]);
        let w = v.witness().unwrap();
        assert!(is_consonant_mass(w));
        assert_eq!(w.weight(AtomMask(0b010)), ratio(3, 8));
        assert_eq!(w.weight(AtomMask(0b110)), ratio(5, 8));

        let u = omega3();
        let omega = Assessment::new(&u, vec![(Event::full(&u), int(1))], Kind::Necessity).unwrap();
        assert!(check_necessity(&omega, &limits()).unwrap().is_coherent());

        let bad = check_necessity(&example(example_values(), Kind::Necessity), &limits()).unwrap();
        match bad.refutation().unwrap() {
            Refutation::PerChain { chains, uniform } => {
                assert_eq!(chains.len(), 6);
                assert!(uniform.is_some());
                let rows = bad.atoms.generator_masks();
                for c in chains {
                    assert!(c.dutch_book.gain_bound.is_negative());
                    assert!(is_uniform_loss(
                        rows,
                        &example_values(),
                        &c.dutch_book.stakes,
                        c.chain.elements()
                    ));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn necessity_only_incoherence_has_no_uniform_book() {
        // Two disjoint events with positive necessity: fine as a belief, impossible along a chain.
        let u = omega3();
        let a = Assessment::new(
            &u,
            vec![(ev(&u, &["w1"]), ratio(1, 2)), (ev(&u, &["w2"]), ratio(1, 2))],
            Kind::Necessity,
        )
        .unwrap();
        assert!(check_belief(&a.with_kind(Kind::Belief), &limits())
            .unwrap()
            .is_coherent());
        let v = check_necessity(&a, &limits()).unwrap();
        assert!(!v.is_coherent());
        assert!(v.dutch_book().is_none());
        assert!(matches!(
            v.refutation(),
            Some(Refutation::PerChain { uniform: None, .. })
        ));
    }

    #[test]
    fn wrong_kind_and_value_range() {
        let a = example(example_values(), Kind::Belief);
        assert!(matches!(check_probability(&a, &limits()), Err(Error::WrongKind { .. })));
        let u = omega3();
        assert!(matches!(
            Assessment::new(&u, vec![(Event::full(&u), ratio(3, 2))], Kind::Belief),
            Err(Error::ValueOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn empty_and_duplicate_events_become_rows() {
        let u = omega3();
        let nonzero_empty = Assessment::new(&u, vec![(Event::empty(&u), ratio(1, 3))], Kind::Belief).unwrap();
        let v = check_belief(&nonzero_empty, &limits()).unwrap();
        assert!(!v.is_coherent());
        let zero_empty = Assessment::new(&u, vec![(Event::empty(&u), int(0))], Kind::Belief).unwrap();
        assert!(check_belief(&zero_empty, &limits()).unwrap().is_coherent());
        let a = ev(&u, &["w1"]);
        let dup = Assessment::new(
            &u,
            vec![(a.clone(), ratio(1, 3)), (a.clone(), ratio(1, 2))],
            Kind::Belief,
        )
        .unwrap();
        assert!(!check_belief(&dup, &limits()).unwrap().is_coherent());
        let same = Assessment::new(&u, vec![(a.clone(), ratio(1, 3)), (a, ratio(1, 3))], Kind::Belief).unwrap();
        assert!(check_belief(&same, &limits()).unwrap().is_coherent());
    }

    #[test]
    fn gain_examples() {
        let a = example(example_values(), Kind::Belief);
        let stakes = [int(-1), int(0), int(1)];
        let u = a.universe().clone();
        assert_eq!(evaluate_gain(&a, &stakes, &ev(&u, &["w2"])).unwrap(), ratio(-1, 4));
        assert_eq!(evaluate_gain(&a, &stakes, &ev(&u, &["w1"])).unwrap(), ratio(-5, 4));
        assert_eq!(evaluate_gain(&a, &stakes, &ev(&u, &["w3"])).unwrap(), ratio(-1, 4));
        let sweep = gain_sweep(&a, &stakes, &limits()).unwrap();
        assert_eq!(sweep.len(), 7);
        assert!(sweep.iter().all(|(_, g)| g.is_negative()));
        assert_eq!(sweep.iter().map(|(_, g)| g.clone()).max().unwrap(), ratio(-1, 4));
        let zero = [int(0), int(0), int(0)];
        assert!(gain_sweep(&a, &zero, &limits())
            .unwrap()
            .iter()
            .all(|(_, g)| g.is_zero()));
        assert_eq!(
            evaluate_gain(&a, &stakes, &Event::empty(&u)),
            Err(Error::EmptyObservedEvent)
        );
        assert!(matches!(
            evaluate_gain(&a, &stakes[..2], &ev(&u, &["w1"])),
            Err(Error::StakesLength { .. })
        ));
    }

    #[test]
    fn extension_examples() {
        let u = omega3();
        // Empty assessment: any event in (∅, Ω) ranges over [0, 1].
        let empty = Assessment::new(&u, vec![], Kind::Belief).unwrap();
        let r = extension_interval(&empty, &ev(&u, &["w1"]), &limits()).unwrap();
        assert_eq!((r.lo, r.hi), (int(0), int(1)));
        // Bel(B) = 1 leaves Bel(A) free in [0, 1]: u_B gives 0, u_{ω2} gives 1.
        let b = Assessment::new(&u, vec![(ev(&u, &["w2", "w3"]), int(1))], Kind::Belief).unwrap();
        let r = extension_interval(&b, &ev(&u, &["w1", "w2"]), &limits()).unwrap();
        assert_eq!((r.lo, r.hi), (int(0), int(1)));
        // Already assessed target.
        let a = example([ratio(3, 8), int(1), ratio(3, 8)], Kind::Belief);
        let r = extension_interval(&a, &ev(&u, &["w1", "w2"]), &limits()).unwrap();
        assert_eq!((r.lo, r.hi), (ratio(3, 8), ratio(3, 8)));
        assert!(matches!(
            extension_interval(&example(example_values(), Kind::Belief), &ev(&u, &["w1"]), &limits()),
            Err(Error::Incoherent(Kind::Belief))
        ));
    }

    #[test]
    fn pruned_and_unpruned_chain_search_agree_on_example() {
        for values in [example_values(), [ratio(3, 8), int(1), ratio(3, 8)]] {
            let a = example(values, Kind::Necessity);
            let atoms = a.atoms().unwrap();
            let (p, _) = find_chain(&atoms, a.values(), &limits(), true).unwrap();
            let (q, pruned) = find_chain(&atoms, a.values(), &limits(), false).unwrap();
            assert_eq!(pruned, 0);
            assert_eq!(p, q);
        }
    }

    fn small_assessment() -> impl Strategy<Value = (usize, Vec<(u8, u32)>)> {
        (1usize..6).prop_flat_map(|n| (Just(n), proptest::collection::vec((0u8..(1 << n) as u8, 0u32..9), 0..5)))
    }

    fn build(n: usize, rows: &[(u8, u32)], kind: Kind) -> Assessment {
        let u = Universe::numbered(n).unwrap();
        let rows = rows
            .iter()
            .map(|&(bits, v)| {
                let e = Event::from_indices(&u, (0..n).filter(|w| bits >> w & 1 == 1)).unwrap();
                (e, ratio(v as i64, 8))
            })
            .collect();
        Assessment::new(&u, rows, kind).unwrap()
    }

    proptest! {
        #[test]
        fn pruning_matches_unpruned_search((n, rows) in small_assessment()) {
            let a = build(n, &rows, Kind::Necessity);
            let atoms = a.atoms().unwrap();
            prop_assume!(atoms.len() <= 5);
            let (p, _) = find_chain(&atoms, a.values(), &limits(), true).unwrap();
            let (q, _) = find_chain(&atoms, a.values(), &limits(), false).unwrap();
            prop_assert_eq!(p.map(|c| c.0), q.map(|c| c.0));
        }

        #[test]
        fn restriction_and_hierarchy((n, rows) in small_assessment(), drop in 0usize..5) {
            let a = build(n, &rows, Kind::Belief);
            let bel = check(&a, &limits()).unwrap().is_coherent();
            let prob = check(&a.with_kind(Kind::Probability), &limits()).unwrap().is_coherent();
            let nec = check(&a.with_kind(Kind::Necessity), &limits()).unwrap().is_coherent();
            prop_assert!(!prob || bel);
            prop_assert!(!nec || bel);
            if bel && !a.is_empty() {
                let keep: Vec<usize> = (0..a.len()).filter(|&i| i != drop % a.len()).collect();
                prop_assert!(check(&a.restrict(&keep), &limits()).unwrap().is_coherent());
            }
            // Monotonicity is necessary in every mode.
            for i in 0..a.len() {
                for j in 0..a.len() {
                    if a.events()[i].is_subset(&a.events()[j]).unwrap() && a.values()[i] > a.values()[j] {
                        prop_assert!(!bel && !prob && !nec);
                    }
                }
            }
        }

        #[test]
        fn extension_endpoints_are_attained((n, rows) in small_assessment(), target in 0u8..32, kind_ix in 0usize..3) {
            let kind = [Kind::Belief, Kind::Probability, Kind::Necessity][kind_ix];
            let a = build(n, &rows, kind);
            prop_assume!(check(&a, &limits()).unwrap().is_coherent());
            let u = a.universe().clone();
            let t = Event::from_indices(&u, (0..n).filter(|w| target >> w & 1 == 1)).unwrap();
            let r = extension_interval(&a, &t, &limits()).unwrap();
            prop_assert!(r.lo <= r.hi);
            for (lo, hi) in &r.pieces {
                prop_assert!(check(&a.extended(t.clone(), lo.clone()).unwrap(), &limits()).unwrap().is_coherent());
                prop_assert!(check(&a.extended(t.clone(), hi.clone()).unwrap(), &limits()).unwrap().is_coherent());
            }
            let eps = ratio(1, 1000);
            let below = &r.lo - &eps;
            if !below.is_negative() {
                prop_assert!(!check(&a.extended(t.clone(), below).unwrap(), &limits()).unwrap().is_coherent());
            }
            let above = &r.hi + &eps;
            if above <= int(1) {
                prop_assert!(!check(&a.extended(t.clone(), above).unwrap(), &limits()).unwrap().is_coherent());
            }
            if kind != Kind::Necessity {
                let mid = (&r.lo + &r.hi) / int(2);
                prop_assert!(check(&a.extended(t, mid).unwrap(), &limits()).unwrap().is_coherent());
            }
        }
    }
}
