//! Finite universes, events, and the finite algebra generated by a family of
//! events.
//!
//! Events are bitsets over world indices. The generated algebra is never
//! materialized: we only compute its atoms (worlds grouped by their
//! membership signature across the generating family) and address every other
//! element as an [`AtomMask`], a union of atoms.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest number of atoms an [`AtomMask`] can address.
pub const MAX_ATOMS: usize = 64;
/// Default cap on `m` when enumerating the `2^m - 1` non-empty events.
pub const DEFAULT_ATOM_LIMIT: usize = 20;
/// Default cap on `m` when enumerating the `m!` chains.
pub const DEFAULT_CHAIN_LIMIT: usize = 9;

/// Size limits applied by every enumeration in the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub atom_limit: usize,
    pub chain_limit: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            atom_limit: DEFAULT_ATOM_LIMIT,
            chain_limit: DEFAULT_CHAIN_LIMIT,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct Universe {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Universe {
    pub fn new<I, S>(labels: I) -> Result<Arc<Universe>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateWorld(label.clone()));
            }
        }
        Ok(Arc::new(Universe { labels, index }))
    }

    /// Universe with worlds labelled `w1, …, wn`.
    pub fn numbered(n: usize) -> Result<Arc<Universe>> {
        Universe::new((1..=n).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, world: usize) -> &str {
        &self.labels[world]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// A subset of the worlds of a universe.
#[derive(Clone)]
pub struct Event {
    universe: Arc<Universe>,
    members: FixedBitSet,
}

impl Event {
    pub fn empty(universe: &Arc<Universe>) -> Event {
        Event {
            universe: Arc::clone(universe),
            members: FixedBitSet::with_capacity(universe.len()),
        }
    }

    pub fn full(universe: &Arc<Universe>) -> Event {
        let mut event = Event::empty(universe);
        event.members.insert_range(..);
        event
    }

    pub fn from_indices<I>(universe: &Arc<Universe>, worlds: I) -> Result<Event>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut event = Event::empty(universe);
        for w in worlds {
            if w >= universe.len() {
                return Err(Error::WorldOutOfRange {
                    index: w,
                    size: universe.len(),
                });
            }
            event.members.insert(w);
        }
        Ok(event)
    }

    pub fn from_labels<I, S>(universe: &Arc<Universe>, labels: I) -> Result<Event>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut event = Event::empty(universe);
        for label in labels {
            let label = label.as_ref();
            let w = universe
                .index_of(label)
                .ok_or_else(|| Error::UnknownWorld(label.to_string()))?;
            event.members.insert(w);
        }
        Ok(event)
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn contains(&self, world: usize) -> bool {
        self.members.contains(world)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_clear()
    }

    pub fn len(&self) -> usize {
        self.members.count_ones(..)
    }

    pub fn worlds(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.ones()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.worlds().map(|w| self.universe.label(w)).collect()
    }

    fn same_universe(&self, other: &Event) -> Result<()> {
        if Arc::ptr_eq(&self.universe, &other.universe) || self.universe == other.universe {
            Ok(())
        } else {
            Err(Error::UniverseMismatch)
        }
    }

    pub fn is_subset(&self, other: &Event) -> Result<bool> {
        self.same_universe(other)?;
        Ok(self.members.is_subset(&other.members))
    }

    pub fn intersection(&self, other: &Event) -> Result<Event> {
        self.same_universe(other)?;
        let mut members = self.members.clone();
        members.intersect_with(&other.members);
        Ok(Event {
            universe: Arc::clone(&self.universe),
            members,
        })
    }

    pub fn union(&self, other: &Event) -> Result<Event> {
        self.same_universe(other)?;
        let mut members = self.members.clone();
        members.union_with(&other.members);
        Ok(Event {
            universe: Arc::clone(&self.universe),
            members,
        })
    }

    pub fn complement(&self) -> Event {
        let mut members = self.members.clone();
        members.toggle_range(..);
        Event {
            universe: Arc::clone(&self.universe),
            members,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members && self.same_universe(other).is_ok()
    }
}

impl Eq for Event {}

impl Hash for Event {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.members.hash(state);
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.labels().join(","))
    }
}

/// An ordered list of events over one universe. Duplicates are kept.
#[derive(Debug, Clone)]
pub struct EventFamily {
    universe: Arc<Universe>,
    events: Vec<Event>,
}

impl EventFamily {
    pub fn new(universe: &Arc<Universe>, events: Vec<Event>) -> Result<EventFamily> {
        let probe = Event::empty(universe);
        for e in &events {
            probe.same_universe(e)?;
        }
        Ok(EventFamily {
            universe: Arc::clone(universe),
            events,
        })
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// A union of atoms of a generated algebra, as a bitmask over atom indices.
///
/// Ordering is the canonical enumeration order of the non-empty events: by
/// number of atoms, then lexicographically by the sorted atom indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AtomMask(pub u64);

impl AtomMask {
    pub const EMPTY: AtomMask = AtomMask(0);

    pub fn full(n_atoms: usize) -> AtomMask {
        if n_atoms >= 64 {
            AtomMask(u64::MAX)
        } else {
            AtomMask((1u64 << n_atoms) - 1)
        }
    }

    pub fn singleton(atom: usize) -> AtomMask {
        AtomMask(1u64 << atom)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains_atom(self, atom: usize) -> bool {
        self.0 >> atom & 1 == 1
    }

    pub fn is_subset_of(self, other: AtomMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: AtomMask) -> AtomMask {
        AtomMask(self.0 | other.0)
    }

    pub fn intersection(self, other: AtomMask) -> AtomMask {
        AtomMask(self.0 & other.0)
    }

    pub fn atoms(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |i| bits >> i & 1 == 1)
    }
}

impl Ord for AtomMask {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count().cmp(&other.count()).then_with(|| {
            let diff = self.0 ^ other.0;
            if diff == 0 {
                Ordering::Equal
            } else if self.0 >> diff.trailing_zeros() & 1 == 1 {
                // The lowest differing atom belongs to `self`, so its sorted
                // index list is lexicographically smaller.
                Ordering::Less
            } else {
                Ordering::Greater
            }
        })
    }
}

impl PartialOrd for AtomMask {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for AtomMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.atoms().join(","))
    }
}

/// The atoms of the algebra generated by a family of events.
#[derive(Debug, Clone)]
pub struct AtomSet {
    universe: Arc<Universe>,
    atoms: Vec<Event>,
    world_atom: Vec<usize>,
    generators: Vec<AtomMask>,
}

impl AtomSet {
    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Event] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Event {
        &self.atoms[i]
    }

    pub fn full_mask(&self) -> AtomMask {
        AtomMask::full(self.len())
    }

    /// Atom containing the given world.
    pub fn atom_of_world(&self, world: usize) -> usize {
        self.world_atom[world]
    }

    /// Masks of the generating events, in input order (duplicates and the
    /// empty event included).
    pub fn generator_masks(&self) -> &[AtomMask] {
        &self.generators
    }

    /// Expresses `event` as a union of atoms.
    pub fn mask_of(&self, event: &Event) -> Result<AtomMask> {
        Event::empty(&self.universe).same_universe(event)?;
        let mut mask = AtomMask::EMPTY;
        let mut touched = 0usize;
        for w in event.worlds() {
            mask = mask.union(AtomMask::singleton(self.world_atom[w]));
            touched += 1;
        }
        let covered: usize = mask.atoms().map(|a| self.atoms[a].len()).sum();
        if covered != touched {
            return Err(Error::NotAtomUnion(event.to_string()));
        }
        Ok(mask)
    }

    pub fn event_of(&self, mask: AtomMask) -> Event {
        let mut event = Event::empty(&self.universe);
        for a in mask.atoms() {
            event.members.union_with(&self.atoms[a].members);
        }
        event
    }
}

/// Atoms of the algebra generated by `family`.
///
/// Worlds sharing a membership pattern across every event fall in the same
/// atom; atoms are ordered by their first world. An empty family generates
/// the trivial algebra with the single atom Ω.
pub fn compute_atoms(family: &EventFamily) -> Result<AtomSet> {
    let universe = family.universe();
    if universe.is_empty() {
        return Err(Error::EmptyUniverse);
    }
    let mut signature_atom: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut world_atom = Vec::with_capacity(universe.len());
    let mut atoms: Vec<Event> = Vec::new();
    for w in 0..universe.len() {
        let signature: Vec<bool> = family.events().iter().map(|e| e.contains(w)).collect();
        let next = atoms.len();
        let atom = *signature_atom.entry(signature).or_insert(next);
        if atom == next {
            atoms.push(Event::empty(universe));
        }
        atoms[atom].members.insert(w);
        world_atom.push(atom);
    }
    if atoms.len() > MAX_ATOMS {
        return Err(Error::TooManyAtoms(atoms.len()));
    }
    let mut set = AtomSet {
        universe: Arc::clone(universe),
        atoms,
        world_atom,
        generators: Vec::new(),
    };
    set.generators = family.events().iter().map(|e| set.mask_of(e)).collect::<Result<_>>()?;
    Ok(set)
}

fn check_atom_limit(m: usize, limit: usize) -> Result<()> {
    if m > limit {
        let events = 1u128.checked_shl(m as u32).unwrap_or(u128::MAX);
        return Err(Error::AtomLimit {
            atoms: m,
            limit,
            events,
        });
    }
    Ok(())
}

/// All `2^m - 1` non-empty unions of atoms in canonical order: by size, then
/// lexicographically by atom indices.
pub fn enumerate_nonempty_events(atoms: &AtomSet, limit: usize) -> Result<Vec<AtomMask>> {
    let m = atoms.len();
    check_atom_limit(m, limit)?;
    let mut out = Vec::with_capacity((1usize << m) - 1);
    for k in 1..=m {
        for combo in (0..m).combinations(k) {
            out.push(AtomMask(combo.iter().fold(0u64, |acc, &a| acc | 1 << a)));
        }
    }
    Ok(out)
}

/// `1` iff `observed ⊆ event`: the pessimistic payoff when only `observed` is
/// learned about the true world.
pub fn generalized_indicator(event: &Event, observed: &Event) -> Result<u8> {
    if observed.is_empty() {
        return Err(Error::EmptyObservedEvent);
    }
    Ok(observed.is_subset(event)? as u8)
}

/// A maximal chain of the algebra: the cumulative unions of atoms taken in
/// the order of one permutation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chain {
    index: u64,
    permutation: Vec<usize>,
    elements: Vec<AtomMask>,
}

impl Chain {
    /// The chain at position `index` in lexicographic permutation order.
    pub fn from_permutation_index(n_atoms: usize, index: u64) -> Chain {
        let mut pool: Vec<usize> = (0..n_atoms).collect();
        let mut permutation = Vec::with_capacity(n_atoms);
        let mut rest = index;
        for k in (0..n_atoms).rev() {
            let f = factorial(k);
            let pick = (rest / f) as usize;
            rest %= f;
            permutation.push(pool.remove(pick));
        }
        Chain::from_permutation(index, permutation)
    }

    fn from_permutation(index: u64, permutation: Vec<usize>) -> Chain {
        let mut acc = AtomMask::EMPTY;
        let elements = permutation
            .iter()
            .map(|&a| {
                acc = acc.union(AtomMask::singleton(a));
                acc
            })
            .collect();
        Chain {
            index,
            permutation,
            elements,
        }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn elements(&self) -> &[AtomMask] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of leading chain elements contained in `event`.
    pub fn depth_inside(&self, event: AtomMask) -> usize {
        self.elements.iter().take_while(|d| d.is_subset_of(event)).count()
    }
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Iterator over the `m!` chains in lexicographic permutation order.
#[derive(Debug, Clone)]
pub struct Chains {
    n_atoms: usize,
    next: u64,
    end: u64,
}

impl Iterator for Chains {
    type Item = Chain;

    fn next(&mut self) -> Option<Chain> {
        if self.next >= self.end {
            return None;
        }
        let chain = Chain::from_permutation_index(self.n_atoms, self.next);
        self.next += 1;
        Some(chain)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }

    fn nth(&mut self, n: usize) -> Option<Chain> {
        self.next = self.next.saturating_add(n as u64);
        self.next()
    }
}

impl ExactSizeIterator for Chains {}

pub fn enumerate_chains(atoms: &AtomSet, limit: usize) -> Result<Chains> {
    let m = atoms.len();
    if m > limit || m > 20 {
        return Err(Error::ChainLimit { atoms: m, limit });
    }
    Ok(Chains {
        n_atoms: m,
        next: 0,
        end: factorial(m),
    })
}
