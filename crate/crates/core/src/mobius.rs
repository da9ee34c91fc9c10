//! Mass functions (Möbius inverses) and the belief functions they induce.
//!
//! Everything here is exact. The alternating sums of the Möbius inverse cancel
//! heavily, so floating point is never used.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::event_algebra::{AtomMask, AtomSet, Event};

/// Above this many atoms the Möbius inverse uses the `m·2^m` fast transform
/// instead of direct subset sums.
pub const FAST_MOBIUS_THRESHOLD: usize = 12;

/// Largest algebra for which a set function table is materialized.
pub const MAX_TABLE_ATOMS: usize = 24;

/// Non-negative weights on non-empty unions of atoms, summing to one.
///
/// Zero weights are dropped, so the keys are exactly the focal elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassFunction {
    n_atoms: usize,
    weights: BTreeMap<AtomMask, BigRational>,
}

impl MassFunction {
    pub fn new<I>(n_atoms: usize, weights: I) -> Result<MassFunction>
    where
        I: IntoIterator<Item = (AtomMask, BigRational)>,
    {
        let full = AtomMask::full(n_atoms);
        let mut map: BTreeMap<AtomMask, BigRational> = BTreeMap::new();
        for (mask, w) in weights {
            if mask.is_empty() {
                if w.is_zero() {
                    continue;
                }
                return Err(Error::InvalidMass("weight on the empty event".into()));
            }
            if !mask.is_subset_of(full) {
                return Err(Error::InvalidMass(format!(
                    "{mask:?} is not an event of a {n_atoms}-atom algebra"
                )));
            }
            if w.is_negative() {
                return Err(Error::InvalidMass(format!("negative weight {w} on {mask:?}")));
            }
            *map.entry(mask).or_insert_with(BigRational::zero) += w;
        }
        map.retain(|_, w| !w.is_zero());
        let total: BigRational = map.values().sum();
        if !total.is_one() {
            return Err(Error::InvalidMass(format!("weights sum to {total}, not 1")));
        }
        Ok(MassFunction { n_atoms, weights: map })
    }

    /// All mass on a single event.
    pub fn point(n_atoms: usize, on: AtomMask) -> Result<MassFunction> {
        MassFunction::new(n_atoms, [(on, BigRational::one())])
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn weight(&self, mask: AtomMask) -> BigRational {
        self.weights.get(&mask).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Focal elements with their weights, in canonical event order.
    pub fn focal(&self) -> impl Iterator<Item = (AtomMask, &BigRational)> {
        self.weights.iter().map(|(&m, w)| (m, w))
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = AtomMask> + '_ {
        self.weights.keys().copied()
    }

    /// Belief of `event` directly from the weights: Σ of m(B) over B ⊆ event.
    pub fn belief_of(&self, event: AtomMask) -> BigRational {
        self.weights
            .iter()
            .filter(|(b, _)| b.is_subset_of(event))
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Table(Vec<BigRational>),
    Mass(MassFunction),
    Vacuous(AtomMask),
}

/// A set function on the full finite algebra of an atom set, addressed by
/// [`AtomMask`]. Values are computed on demand unless built from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct SetFunction {
    n_atoms: usize,
    repr: Repr,
}

impl SetFunction {
    /// Builds a set function from its values on all `2^m` events, indexed by
    /// raw mask bits.
    pub fn from_table(n_atoms: usize, values: Vec<BigRational>) -> Result<SetFunction> {
        if n_atoms > MAX_TABLE_ATOMS || values.len() != 1usize << n_atoms {
            return Err(Error::DimensionMismatch(format!(
                "table of {} values for {n_atoms} atoms",
                values.len()
            )));
        }
        Ok(SetFunction {
            n_atoms,
            repr: Repr::Table(values),
        })
    }

    /// Tabulates `f` over all `2^m` events.
    pub fn from_fn<F>(n_atoms: usize, f: F) -> Result<SetFunction>
    where
        F: FnMut(AtomMask) -> BigRational,
    {
        if n_atoms > MAX_TABLE_ATOMS {
            return Err(Error::DimensionMismatch(format!(
                "{n_atoms} atoms is too many to tabulate"
            )));
        }
        let values = (0..1u64 << n_atoms).map(AtomMask).map(f).collect();
        SetFunction::from_table(n_atoms, values)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn value(&self, event: AtomMask) -> BigRational {
        match &self.repr {
            Repr::Table(t) => t[event.bits() as usize].clone(),
            Repr::Mass(m) => m.belief_of(event),
            Repr::Vacuous(b) => {
                if b.is_subset_of(event) {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }
        }
    }

    /// Values on all `2^m` events indexed by raw mask bits.
    pub fn table(&self) -> Result<Vec<BigRational>> {
        match &self.repr {
            Repr::Table(t) => Ok(t.clone()),
            Repr::Mass(m) => {
                if self.n_atoms > MAX_TABLE_ATOMS {
                    return Err(Error::DimensionMismatch(format!(
                        "{} atoms is too many to tabulate",
                        self.n_atoms
                    )));
                }
                // Zeta transform: t[A] = Σ_{B ⊆ A} m(B).
                let mut t = vec![BigRational::zero(); 1 << self.n_atoms];
                for (b, w) in m.focal() {
                    t[b.bits() as usize] = w.clone();
                }
                for i in 0..self.n_atoms {
                    let bit = 1usize << i;
                    for a in 0..t.len() {
                        if a & bit != 0 {
                            let lower = t[a ^ bit].clone();
                            t[a] += lower;
                        }
                    }
                }
                Ok(t)
            }
            Repr::Vacuous(_) => Ok((0..1u64 << self.n_atoms).map(|a| self.value(AtomMask(a))).collect()),
        }
    }
}

/// Bel(A) = Σ_{B ⊆ A} m(B) on the finite algebra.
pub fn belief_from_mass(mass: &MassFunction) -> SetFunction {
    SetFunction {
        n_atoms: mass.n_atoms,
        repr: Repr::Mass(mass.clone()),
    }
}

/// The unanimity game u_B: 1 on every event containing `on`, 0 elsewhere.
pub fn vacuous_belief(atoms: &AtomSet, on: &Event) -> Result<SetFunction> {
    if on.is_empty() {
        return Err(Error::EmptyEvent);
    }
    let mask = atoms.mask_of(on)?;
    Ok(SetFunction {
        n_atoms: atoms.len(),
        repr: Repr::Vacuous(mask),
    })
}

/// Recovers the mass function of a belief function.
///
/// Fails with [`Error::NotCompletelyMonotone`] on the first (canonical order)
/// event receiving a negative weight.
pub fn mobius_inverse(bel: &SetFunction) -> Result<MassFunction> {
    let n = bel.n_atoms;
    if !bel.value(AtomMask::EMPTY).is_zero() {
        return Err(Error::NotNormalized(format!(
            "value on the empty event is {}",
            bel.value(AtomMask::EMPTY)
        )));
    }
    if !bel.value(AtomMask::full(n)).is_one() {
        return Err(Error::NotNormalized(format!(
            "value on Ω is {}",
            bel.value(AtomMask::full(n))
        )));
    }
    let table = bel.table()?;
    let weights = if n > FAST_MOBIUS_THRESHOLD {
        mobius_fast(n, table)
    } else {
        mobius_direct(n, &table)
    };
    let mut negative: Option<(AtomMask, BigRational)> = None;
    for (a, w) in weights.iter().enumerate().skip(1) {
        if w.is_negative() {
            let mask = AtomMask(a as u64);
            if negative.as_ref().is_none_or(|(m, _)| mask < *m) {
                negative = Some((mask, w.clone()));
            }
        }
    }
    if let Some((mask, weight)) = negative {
        return Err(Error::NotCompletelyMonotone {
            event: format!("{mask:?}"),
            weight,
        });
    }
    MassFunction::new(
        n,
        weights
            .into_iter()
            .enumerate()
            .skip(1)
            .map(|(a, w)| (AtomMask(a as u64), w)),
    )
}

/// m(A) = Σ_{B ⊆ A} (−1)^{|A \ B|} Bel(B), enumerating submasks directly.
pub(crate) fn mobius_direct(n_atoms: usize, table: &[BigRational]) -> Vec<BigRational> {
    let size = 1usize << n_atoms;
    let mut out = Vec::with_capacity(size);
    for a in 0..size {
        let mut acc = BigRational::zero();
        let mut b = a;
        loop {
            if (a ^ b).count_ones() % 2 == 0 {
                acc += &table[b];
            } else {
                acc -= &table[b];
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & a;
        }
        out.push(acc);
    }
    out
}

/// In-place inverse zeta transform over subsets.
pub(crate) fn mobius_fast(n_atoms: usize, mut table: Vec<BigRational>) -> Vec<BigRational> {
    for i in 0..n_atoms {
        let bit = 1usize << i;
        for a in 0..table.len() {
            if a & bit != 0 {
                let lower = table[a ^ bit].clone();
                table[a] -= lower;
            }
        }
    }
    table
}

/// True iff every focal element is a single atom.
pub fn is_probability_mass(mass: &MassFunction) -> bool {
    mass.focal_elements().all(|b| b.count() == 1)
}

/// True iff the focal elements are totally ordered by inclusion.
pub fn is_consonant_mass(mass: &MassFunction) -> bool {
    let mut focal: Vec<AtomMask> = mass.focal_elements().collect();
    focal.sort_by_key(|b| b.count());
    focal.windows(2).all(|w| w[0].is_subset_of(w[1]))
}

/// True iff the probability with the given atom weights lies in the core of
/// `bel`, i.e. P(E) ≥ Bel(E) for every event of the algebra.
pub fn dominates(p_on_atoms: &[BigRational], bel: &SetFunction) -> bool {
    let n = bel.n_atoms();
    if p_on_atoms.len() != n || n > MAX_TABLE_ATOMS {
        return false;
    }
    (1..1u64 << n).map(AtomMask).all(|e| {
        let p: BigRational = e.atoms().map(|a| &p_on_atoms[a]).sum();
        p >= bel.value(e)
    })
}
