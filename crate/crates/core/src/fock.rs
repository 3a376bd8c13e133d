//! Sparse polarization Fock states and the lift of linear-optical mode maps.
//!
//! A state lives on a [`ModeRegistry`]: a sorted set of spatial modes, each of
//! which contributes two rails (H then V). Basis states are occupation vectors
//! in that canonical rail order, and a [`PureState`] is a sparse ordered map
//! from occupation vectors to complex amplitudes.
//!
//! A [`ModeLinearMap`] acts on creation operators,
//! `a†_i -> Σ_j U_ji b†_j`, so its matrix acts on single-photon amplitude
//! vectors as an ordinary matrix. Multi-photon terms are expanded rail by rail
//! with multinomial weights and `√(n!)` bookkeeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes below this magnitude are dropped from every public result.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Tolerance on `Σ|amplitude|² = 1`.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Tolerance on `U†U = 1` for maps flagged unitary.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_PHOTON_CAP: usize = 8;
pub const DEFAULT_RAIL_CAP: usize = 32;
pub const DEFAULT_MODE_INDEX_CAP: u16 = 64;

/// Spatial optical mode index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpatialMode(pub u16);

impl fmt::Display for SpatialMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for SpatialMode {
    fn from(v: u16) -> Self {
        SpatialMode(v)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    fn offset(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// One polarization rail of one spatial mode. Ordering is canonical:
/// spatial index first, H before V.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rail {
    pub spatial: SpatialMode,
    pub pol: Polarization,
}

impl Rail {
    pub fn new(spatial: impl Into<SpatialMode>, pol: Polarization) -> Self {
        Rail { spatial: spatial.into(), pol }
    }

    pub fn h(spatial: impl Into<SpatialMode>) -> Self {
        Rail::new(spatial, Polarization::H)
    }

    pub fn v(spatial: impl Into<SpatialMode>) -> Self {
        Rail::new(spatial, Polarization::V)
    }
}

impl fmt::Display for Rail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.pol {
            Polarization::H => 'H',
            Polarization::V => 'V',
        };
        write!(f, "{}{}", p, self.spatial)
    }
}

/// Engine size limits and numerical thresholds.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Limits {
    pub photon_cap: usize,
    pub rail_cap: usize,
    pub mode_index_cap: u16,
    pub prune: f64,
    pub norm_tolerance: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            photon_cap: DEFAULT_PHOTON_CAP,
            rail_cap: DEFAULT_RAIL_CAP,
            mode_index_cap: DEFAULT_MODE_INDEX_CAP,
            prune: PRUNE_THRESHOLD,
            norm_tolerance: NORM_TOLERANCE,
        }
    }
}

/// Sorted set of registered spatial modes. Equality compares modes only.
#[derive(Clone, Debug)]
pub struct ModeRegistry {
    modes: Vec<SpatialMode>,
    limits: Limits,
}

impl PartialEq for ModeRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
    }
}

impl ModeRegistry {
    pub fn new<I, M>(modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = M>,
        M: Into<SpatialMode>,
    {
        Self::with_limits(modes, Limits::default())
    }

    pub fn with_limits<I, M>(modes: I, limits: Limits) -> Result<Self>
    where
        I: IntoIterator<Item = M>,
        M: Into<SpatialMode>,
    {
        let mut sorted: Vec<SpatialMode> = modes.into_iter().map(Into::into).collect();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateMode(w[0]));
            }
        }
        let reg = ModeRegistry {
            modes: sorted,
            limits,
        };
        reg.check_limits()?;
        Ok(reg)
    }

    fn check_limits(&self) -> Result<()> {
        if let Some(&m) = self.modes.iter().find(|m| m.0 >= self.limits.mode_index_cap) {
            return Err(Error::ModeIndexOutOfRange {
                mode: m,
                cap: self.limits.mode_index_cap,
            });
        }
        if self.rail_count() > self.limits.rail_cap {
            return Err(Error::RailCapExceeded {
                rails: self.rail_count(),
                cap: self.limits.rail_cap,
            });
        }
        Ok(())
    }

    pub fn empty() -> Self {
        ModeRegistry {
            modes: Vec::new(),
            limits: Limits::default(),
        }
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn modes(&self) -> &[SpatialMode] {
        &self.modes
    }

    pub fn rail_count(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn contains(&self, mode: SpatialMode) -> bool {
        self.modes.binary_search(&mode).is_ok()
    }

    pub fn rails(&self) -> impl Iterator<Item = Rail> + '_ {
        self.modes
            .iter()
            .flat_map(|&m| [Rail::h(m), Rail::v(m)])
    }

    fn position(&self, mode: SpatialMode) -> Result<usize> {
        self.modes
            .binary_search(&mode)
            .map_err(|_| Error::UnknownMode(mode))
    }

    /// Index of `rail` in the canonical occupation vector.
    pub fn rail_index(&self, rail: Rail) -> Result<usize> {
        Ok(2 * self.position(rail.spatial)? + rail.pol.offset())
    }

    /// Basis state with one photon per listed rail (repeats stack).
    pub fn ket(&self, photons: &[Rail]) -> Result<OccupationBasisState> {
        let mut occ = vec![0u8; self.rail_count()];
        for &r in photons {
            occ[self.rail_index(r)?] += 1;
        }
        let total = photons.len();
        if total > self.limits.photon_cap {
            return Err(Error::PhotonCapExceeded {
                photons: total,
                cap: self.limits.photon_cap,
            });
        }
        Ok(OccupationBasisState(occ))
    }

    pub fn vacuum(&self) -> OccupationBasisState {
        OccupationBasisState(vec![0; self.rail_count()])
    }

    /// Union of two disjoint registries; limits come from `self`.
    pub fn union(&self, other: &ModeRegistry) -> Result<ModeRegistry> {
        if let Some(&m) = other.modes.iter().find(|m| self.contains(**m)) {
            return Err(Error::RegistryOverlap(m));
        }
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        ModeRegistry::with_limits(modes, self.limits)
    }

    pub fn without(&self, drop: &BTreeSet<SpatialMode>) -> ModeRegistry {
        ModeRegistry {
            modes: self
                .modes
                .iter()
                .copied()
                .filter(|m| !drop.contains(m))
                .collect(),
            limits: self.limits,
        }
    }

    /// Smallest mode index not yet registered.
    pub fn fresh_mode(&self) -> Result<SpatialMode> {
        (0..self.limits.mode_index_cap)
            .map(SpatialMode)
            .find(|m| !self.contains(*m))
            .ok_or(Error::ModeIndexOutOfRange {
                mode: SpatialMode(self.limits.mode_index_cap),
                cap: self.limits.mode_index_cap,
            })
    }
}

/// Photon counts per rail in canonical rail order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationBasisState(Vec<u8>);

impl OccupationBasisState {
    pub fn from_counts(counts: Vec<u8>) -> Self {
        OccupationBasisState(counts)
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    /// (total H photons, total V photons).
    pub fn polarization_totals(&self) -> (usize, usize) {
        self.0.iter().enumerate().fold((0, 0), |(h, v), (i, &n)| {
            if i % 2 == 0 {
                (h + n as usize, v)
            } else {
                (h, v + n as usize)
            }
        })
    }
}

pub(crate) type Terms = BTreeMap<OccupationBasisState, Complex64>;

/// Normalized sparse pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    registry: ModeRegistry,
    terms: Terms,
}

fn add_term(terms: &mut Terms, key: OccupationBasisState, amp: Complex64) {
    *terms.entry(key).or_insert(Complex64::new(0.0, 0.0)) += amp;
}

fn prune(terms: &mut Terms, threshold: f64) {
    terms.retain(|_, a| a.norm() >= threshold);
}

fn norm_sqr(terms: &Terms) -> f64 {
    terms.values().map(|a| a.norm_sqr()).sum()
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// Index bookkeeping for splitting a registry into a subset of modes and the rest.
pub(crate) struct Bipartition {
    part_idx: Vec<usize>,
    rest_idx: Vec<usize>,
    pub part: ModeRegistry,
    pub rest: ModeRegistry,
    len: usize,
}

impl Bipartition {
    pub fn new(registry: &ModeRegistry, part_modes: &[SpatialMode]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &m in part_modes {
            registry.position(m)?;
            if !set.insert(m) {
                return Err(Error::DuplicateMode(m));
            }
        }
        let part = ModeRegistry {
            modes: set.iter().copied().collect(),
            limits: registry.limits,
        };
        let rest = registry.without(&set);
        let mut part_idx = Vec::new();
        let mut rest_idx = Vec::new();
        for (p, m) in registry.modes.iter().enumerate() {
            let target = if set.contains(m) {
                &mut part_idx
            } else {
                &mut rest_idx
            };
            target.push(2 * p);
            target.push(2 * p + 1);
        }
        Ok(Bipartition {
            part_idx,
            rest_idx,
            part,
            rest,
            len: registry.rail_count(),
        })
    }

    pub fn split(&self, occ: &OccupationBasisState) -> (OccupationBasisState, OccupationBasisState) {
        let a = self.part_idx.iter().map(|&i| occ.0[i]).collect();
        let b = self.rest_idx.iter().map(|&i| occ.0[i]).collect();
        (OccupationBasisState(a), OccupationBasisState(b))
    }

    pub fn merge(
        &self,
        part: &OccupationBasisState,
        rest: &OccupationBasisState,
    ) -> OccupationBasisState {
        let mut out = vec![0u8; self.len];
        for (k, &i) in self.part_idx.iter().enumerate() {
            out[i] = part.0[k];
        }
        for (k, &i) in self.rest_idx.iter().enumerate() {
            out[i] = rest.0[k];
        }
        OccupationBasisState(out)
    }
}

/// Bipartition, row and column bases, and the amplitude matrix between them.
type CoefficientMatrix = (
    Bipartition,
    Vec<OccupationBasisState>,
    Vec<OccupationBasisState>,
    DMatrix<Complex64>,
);

impl PureState {
    /// Builds a normalized state from possibly unnormalized terms. Repeated
    /// basis states are summed; the result is scaled by one positive constant.
    pub fn new<I>(registry: &ModeRegistry, terms: I) -> Result<PureState>
    where
        I: IntoIterator<Item = (OccupationBasisState, Complex64)>,
    {
        let mut map = Terms::new();
        for (occ, amp) in terms {
            if occ.0.len() != registry.rail_count() {
                return Err(Error::RegistryMismatch);
            }
            if occ.total() > registry.limits.photon_cap {
                return Err(Error::PhotonCapExceeded {
                    photons: occ.total(),
                    cap: registry.limits.photon_cap,
                });
            }
            add_term(&mut map, occ, amp);
        }
        Self::normalized_from(registry.clone(), map)
    }

    pub(crate) fn normalized_from(registry: ModeRegistry, mut terms: Terms) -> Result<PureState> {
        prune(&mut terms, registry.limits.prune);
        let n = norm_sqr(&terms).sqrt();
        if terms.is_empty() || n == 0.0 {
            return Err(Error::EmptyState);
        }
        for a in terms.values_mut() {
            *a /= n;
        }
        prune(&mut terms, registry.limits.prune);
        Ok(PureState { registry, terms })
    }

    pub fn vacuum(registry: &ModeRegistry) -> PureState {
        let mut terms = Terms::new();
        terms.insert(registry.vacuum(), Complex64::new(1.0, 0.0));
        PureState {
            registry: registry.clone(),
            terms,
        }
    }

    /// The single basis state with one photon per listed rail.
    pub fn basis(registry: &ModeRegistry, photons: &[Rail]) -> Result<PureState> {
        let occ = registry.ket(photons)?;
        PureState::new(registry, [(occ, Complex64::new(1.0, 0.0))])
    }

    /// `alpha|H⟩ + beta|V⟩` on a single spatial mode.
    pub fn single_photon(
        mode: impl Into<SpatialMode>,
        alpha: Complex64,
        beta: Complex64,
    ) -> Result<PureState> {
        let mode = mode.into();
        let reg = ModeRegistry::new([mode])?;
        PureState::new(
            &reg,
            [
                (reg.ket(&[Rail::h(mode)])?, alpha),
                (reg.ket(&[Rail::v(mode)])?, beta),
            ],
        )
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub(crate) fn terms_map(&self) -> &Terms {
        &self.terms
    }

    pub fn terms(&self) -> impl Iterator<Item = (&OccupationBasisState, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, occ: &OccupationBasisState) -> Complex64 {
        self.terms
            .get(occ)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.terms)
    }

    /// Product state on the union of two disjoint registries.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let registry = self.registry.union(&other.registry)?;
        let split = Bipartition::new(&registry, &self.registry.modes)?;
        let mut terms = Terms::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let occ = split.merge(a, b);
                if occ.total() > registry.limits.photon_cap {
                    return Err(Error::PhotonCapExceeded {
                        photons: occ.total(),
                        cap: registry.limits.photon_cap,
                    });
                }
                add_term(&mut terms, occ, x * y);
            }
        }
        prune(&mut terms, registry.limits.prune);
        if terms.is_empty() {
            return Err(Error::EmptyState);
        }
        Ok(PureState { registry, terms })
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &PureState) -> Result<Complex64> {
        if self.registry != other.registry {
            return Err(Error::RegistryMismatch);
        }
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms, true)
        } else {
            (&other.terms, &self.terms, false)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in small {
            if let Some(b) = large.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// `|⟨self|other⟩|²`, clamped to [0, 1].
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Total photon number in a spatial mode for each basis state.
    fn mode_rails(&self, mode: SpatialMode) -> Result<(usize, usize)> {
        let h = self.registry.rail_index(Rail::h(mode))?;
        Ok((h, h + 1))
    }

    /// Distribution of the total photon number (H + V) found in `mode`.
    pub fn photon_count_distribution(&self, mode: SpatialMode) -> Result<BTreeMap<usize, f64>> {
        let (h, v) = self.mode_rails(mode)?;
        let mut dist = BTreeMap::new();
        for (occ, a) in &self.terms {
            let n = occ.0[h] as usize + occ.0[v] as usize;
            *dist.entry(n).or_insert(0.0) += a.norm_sqr();
        }
        Ok(dist)
    }

    /// Lifts a linear mode map to the state.
    pub fn apply_map(&self, map: &ModeLinearMap) -> Result<PureState> {
        let in_modes: BTreeSet<SpatialMode> = map.inputs.iter().map(|r| r.spatial).collect();
        let out_modes: BTreeSet<SpatialMode> = map.outputs.iter().map(|r| r.spatial).collect();
        for &m in &in_modes {
            if !self.registry.contains(m) {
                return Err(Error::UnknownMode(m));
            }
        }
        let registry = if map.is_in_place() {
            self.registry.clone()
        } else {
            let base = self.registry.without(&in_modes);
            let outs = ModeRegistry::with_limits(out_modes.iter().copied(), self.registry.limits)?;
            base.union(&outs)?
        };

        let k = map.inputs.len();
        let in_idx: Vec<usize> = map
            .inputs
            .iter()
            .map(|&r| self.registry.rail_index(r))
            .collect::<Result<_>>()?;
        let out_idx: Vec<usize> = map
            .outputs
            .iter()
            .map(|&r| registry.rail_index(r))
            .collect::<Result<_>>()?;
        let input_rails: BTreeSet<Rail> = map.inputs.iter().copied().collect();
        // rails untouched by the map keep their counts
        let carried: Vec<(usize, usize)> = self
            .registry
            .rails()
            .enumerate()
            .filter(|(_, r)| !input_rails.contains(r))
            .map(|(i, r)| registry.rail_index(r).map(|j| (i, j)))
            .collect::<Result<_>>()?;

        // nonzero output rails per input column
        let support: Vec<Vec<(usize, Complex64)>> = (0..k)
            .map(|i| {
                (0..k)
                    .filter_map(|j| {
                        let u = map.matrix[(j, i)];
                        (u != Complex64::new(0.0, 0.0)).then_some((j, u))
                    })
                    .collect()
            })
            .collect();

        let mut terms = Terms::new();
        for (occ, amp) in &self.terms {
            let mut base = vec![0u8; registry.rail_count()];
            for &(i, j) in &carried {
                base[j] = occ.0[i];
            }
            let mut partial: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            partial.insert(vec![0u8; k], Complex64::new(1.0, 0.0));
            let mut in_norm = 1.0;
            for (i, &idx) in in_idx.iter().enumerate() {
                let n = occ.0[idx];
                if n == 0 {
                    continue;
                }
                in_norm /= factorial(n).sqrt();
                let spread = expand_power(n, &support[i]);
                let mut next = BTreeMap::new();
                for (outs, c) in &partial {
                    for (add, w) in &spread {
                        let mut o = outs.clone();
                        for &(j, cnt) in add {
                            o[j] += cnt;
                        }
                        *next.entry(o).or_insert(Complex64::new(0.0, 0.0)) += c * w;
                    }
                }
                partial = next;
            }
            for (outs, c) in partial {
                let mut key = base.clone();
                let mut out_norm = 1.0;
                for (j, &cnt) in outs.iter().enumerate() {
                    key[out_idx[j]] += cnt;
                    out_norm *= factorial(cnt).sqrt();
                }
                add_term(
                    &mut terms,
                    OccupationBasisState(key),
                    amp * c * in_norm * out_norm,
                );
            }
        }
        prune(&mut terms, registry.limits.prune);
        if terms.is_empty() {
            return Err(Error::EmptyState);
        }
        Ok(PureState { registry, terms })
    }

    /// Moves everything in spatial mode `from` to the unregistered mode `to`.
    pub fn relabel_mode(&self, from: SpatialMode, to: SpatialMode) -> Result<PureState> {
        if from == to {
            return Ok(self.clone());
        }
        let map = ModeLinearMap::relabeling(
            vec![Rail::h(from), Rail::v(from)],
            vec![Rail::h(to), Rail::v(to)],
            DMatrix::identity(2, 2),
        )?;
        self.apply_map(&map)
    }

    /// Removes a mode that is empty in every term.
    pub fn drop_vacuum_mode(&self, mode: SpatialMode) -> Result<PureState> {
        let split = Bipartition::new(&self.registry, &[mode])?;
        let mut terms = Terms::new();
        for (occ, a) in &self.terms {
            let (m, rest) = split.split(occ);
            if m.total() != 0 {
                return Err(Error::Invariant(format!(
                    "mode {mode} is not vacuum in every term"
                )));
            }
            add_term(&mut terms, rest, *a);
        }
        Ok(PureState {
            registry: split.rest,
            terms,
        })
    }

    /// Partial inner product `⟨local|self⟩` over the modes of `local`.
    ///
    /// Returns the weight `‖⟨local|self⟩‖²` and the normalized conditional
    /// state on the remaining modes, or `None` if the weight is negligible.
    pub fn contract(&self, local: &PureState) -> Result<Option<(f64, PureState)>> {
        let split = Bipartition::new(&self.registry, &local.registry.modes)?;
        let mut terms = Terms::new();
        for (occ, a) in &self.terms {
            let (part, rest) = split.split(occ);
            if let Some(l) = local.terms.get(&part) {
                add_term(&mut terms, rest, l.conj() * a);
            }
        }
        prune(&mut terms, self.registry.limits.prune);
        let w = norm_sqr(&terms);
        if terms.is_empty() {
            return Ok(None);
        }
        Ok(Some((w, PureState::normalized_from(split.rest, terms)?)))
    }

    fn coefficient_matrix(
        &self,
        modes: &[SpatialMode],
    ) -> Result<CoefficientMatrix> {
        let split = Bipartition::new(&self.registry, modes)?;
        let mut rows = BTreeSet::new();
        let mut cols = BTreeSet::new();
        let pieces: Vec<_> = self
            .terms
            .iter()
            .map(|(occ, a)| {
                let (p, r) = split.split(occ);
                rows.insert(p.clone());
                cols.insert(r.clone());
                (p, r, *a)
            })
            .collect();
        let rows: Vec<_> = rows.into_iter().collect();
        let cols: Vec<_> = cols.into_iter().collect();
        let mut m = DMatrix::from_element(rows.len(), cols.len(), Complex64::new(0.0, 0.0));
        for (p, r, a) in pieces {
            let i = rows.binary_search(&p).expect("row present");
            let j = cols.binary_search(&r).expect("col present");
            m[(i, j)] = a;
        }
        Ok((split, rows, cols, m))
    }

    /// Schmidt coefficients across (`modes`, rest), largest first.
    pub fn schmidt_coefficients(&self, modes: &[SpatialMode]) -> Result<Vec<f64>> {
        let (_, _, _, m) = self.coefficient_matrix(modes)?;
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.retain(|&x| x > 1e-12);
        Ok(s)
    }

    /// Factors the state as `part ⊗ rest` when it has Schmidt rank one.
    pub fn split_product(&self, modes: &[SpatialMode]) -> Result<Option<(PureState, PureState)>> {
        let (split, rows, cols, m) = self.coefficient_matrix(modes)?;
        let (mut bi, mut bj, mut best) = (0, 0, 0.0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)].norm() > best {
                    (bi, bj, best) = (i, j, m[(i, j)].norm());
                }
            }
        }
        let pivot = m[(bi, bj)];
        let u: Vec<Complex64> = (0..m.nrows()).map(|i| m[(i, bj)]).collect();
        let v: Vec<Complex64> = (0..m.ncols()).map(|j| m[(bi, j)] / pivot).collect();
        let mut residual = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                residual += (m[(i, j)] - u[i] * v[j]).norm_sqr();
            }
        }
        if residual > 1e-20 {
            return Ok(None);
        }
        let part = PureState::normalized_from(
            split.part.clone(),
            rows.into_iter().zip(u).collect(),
        )?;
        let rest = PureState::normalized_from(split.rest.clone(), cols.into_iter().zip(v).collect())?;
        // phase lives on `part`; fix it so part ⊗ rest reproduces self
        let overlap = part.tensor(&rest)?.inner_product(self)?;
        let phase = overlap / overlap.norm();
        let part = PureState {
            registry: part.registry,
            terms: part.terms.into_iter().map(|(k, a)| (k, a * phase)).collect(),
        };
        Ok(Some((part, rest)))
    }
}

/// All ways of distributing `n` photons from one input rail over its
/// supported output rails, weighted by `n!/Π c_j! · Π U_j^c_j`.
fn expand_power(n: u8, support: &[(usize, Complex64)]) -> Vec<(Vec<(usize, u8)>, Complex64)> {
    fn rec(
        n: u8,
        support: &[(usize, Complex64)],
        acc: &mut Vec<(usize, u8)>,
        weight: Complex64,
        out: &mut Vec<(Vec<(usize, u8)>, Complex64)>,
    ) {
        match support {
            [] => {
                if n == 0 {
                    out.push((acc.clone(), weight));
                }
            }
            [(j, u)] => {
                acc.push((*j, n));
                out.push((acc.clone(), weight * u.powu(n as u32) / factorial(n)));
                acc.pop();
            }
            [(j, u), tail @ ..] => {
                for c in 0..=n {
                    acc.push((*j, c));
                    rec(n - c, tail, acc, weight * u.powu(c as u32) / factorial(c), out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(n, support, &mut Vec::new(), Complex64::new(factorial(n), 0.0), &mut out);
    out
}

impl fmt::Display for PureState {
    /// Deterministic rendering, e.g. `0.707|H1 V2⟩ + 0.707|V1 H2⟩`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rails: Vec<Rail> = self.registry.rails().collect();
        for (t, (occ, a)) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, " + ")?;
            }
            if a.im.abs() < 5e-4 {
                write!(f, "{:.3}", a.re)?;
            } else {
                write!(f, "({:.3}{:+.3}i)", a.re, a.im)?;
            }
            let kets: Vec<String> = occ
                .0
                .iter()
                .zip(&rails)
                .filter(|(n, _)| **n > 0)
                .map(|(&n, r)| {
                    if n == 1 {
                        r.to_string()
                    } else {
                        format!("{r}^{n}")
                    }
                })
                .collect();
            if kets.is_empty() {
                write!(f, "|vac⟩")?;
            } else {
                write!(f, "|{}⟩", kets.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Linear map on creation operators, `a†_in[i] -> Σ_j U[j][i] a†_out[j]`.
///
/// In-place maps use the same rail list for inputs and outputs. Relabeling
/// maps (e.g. a PBS whose output ports are new spatial modes) must cover every
/// rail of each spatial mode they consume or produce.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeLinearMap {
    inputs: Vec<Rail>,
    outputs: Vec<Rail>,
    matrix: DMatrix<Complex64>,
}

fn check_distinct(rails: &[Rail]) -> Result<()> {
    let set: BTreeSet<_> = rails.iter().collect();
    if set.len() != rails.len() {
        return Err(Error::MalformedMap("repeated rail".into()));
    }
    Ok(())
}

fn covers_whole_modes(rails: &[Rail]) -> bool {
    let set: BTreeSet<Rail> = rails.iter().copied().collect();
    rails
        .iter()
        .all(|r| set.contains(&Rail::h(r.spatial)) && set.contains(&Rail::v(r.spatial)))
}

impl ModeLinearMap {
    /// Unitary map acting in place on `rails`.
    pub fn new(rails: Vec<Rail>, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::relabeling(rails.clone(), rails, matrix)
    }

    /// Unitary map from `inputs` to `outputs`.
    pub fn relabeling(
        inputs: Vec<Rail>,
        outputs: Vec<Rail>,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self> {
        let k = inputs.len();
        if outputs.len() != k || matrix.nrows() != k || matrix.ncols() != k {
            return Err(Error::MalformedMap(format!(
                "{} inputs, {} outputs, {}x{} matrix",
                k,
                outputs.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_distinct(&inputs)?;
        check_distinct(&outputs)?;
        let map = ModeLinearMap {
            inputs,
            outputs,
            matrix,
        };
        if !map.is_in_place() && !(covers_whole_modes(&map.inputs) && covers_whole_modes(&map.outputs)) {
            return Err(Error::MalformedMap(
                "relabeling map must cover both rails of every mode".into(),
            ));
        }
        let deviation = map.unitarity_deviation();
        if deviation > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitaryMap { deviation });
        }
        Ok(map)
    }

    pub fn inputs(&self) -> &[Rail] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Rail] {
        &self.outputs
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_in_place(&self) -> bool {
        let a: BTreeSet<_> = self.inputs.iter().collect();
        let b: BTreeSet<_> = self.outputs.iter().collect();
        a == b
    }

    /// Largest entry of `|U†U - 1|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let k = self.matrix.nrows();
        let g = self.matrix.adjoint() * &self.matrix - DMatrix::<Complex64>::identity(k, k);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Inverse map (outputs back to inputs).
    pub fn inverse(&self) -> ModeLinearMap {
        ModeLinearMap {
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// `next ∘ self` for in-place maps on the same rail list.
    pub fn then(&self, next: &ModeLinearMap) -> Result<ModeLinearMap> {
        if !self.is_in_place() || self.inputs != self.outputs || next.inputs != self.outputs || next.outputs != next.inputs {
            return Err(Error::MalformedMap(
                "composition needs in-place maps on one rail list".into(),
            ));
        }
        ModeLinearMap::new(self.inputs.clone(), &next.matrix * &self.matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn make_state_normalizes() {
        let reg = ModeRegistry::new([1u16]).unwrap();
        let s = PureState::new(
            &reg,
            [
                (reg.ket(&[Rail::h(1)]).unwrap(), c(1.0)),
                (reg.ket(&[Rail::v(1)]).unwrap(), c(1.0)),
            ],
        )
        .unwrap();
        for (_, a) in s.terms() {
            assert!((a.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let one = PureState::new(&reg, [(reg.ket(&[Rail::h(1)]).unwrap(), c(1.0))]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.amplitude(&reg.ket(&[Rail::h(1)]).unwrap()), c(1.0));
    }

    #[test]
    fn make_state_keeps_normalized_input() {
        let (a, b) = (Complex64::new(0.36, 0.48), Complex64::new(0.0, 0.8));
        let s = PureState::single_photon(1, a, b).unwrap();
        let reg = s.registry().clone();
        assert!((s.amplitude(&reg.ket(&[Rail::h(1)]).unwrap()) - a).norm() < 1e-15);
        assert!((s.amplitude(&reg.ket(&[Rail::v(1)]).unwrap()) - b).norm() < 1e-15);
    }

    #[test]
    fn make_state_errors() {
        let reg = ModeRegistry::new([1u16]).unwrap();
        let h = reg.ket(&[Rail::h(1)]).unwrap();
        assert_eq!(PureState::new(&reg, [(h, c(1e-16))]), Err(Error::EmptyState));
        assert!(matches!(
            reg.ket(&[Rail::h(1); 9]),
            Err(Error::PhotonCapExceeded { photons: 9, cap: 8 })
        ));
        let big = OccupationBasisState::from_counts(vec![9, 0]);
        assert!(matches!(
            PureState::new(&reg, [(big, c(1.0))]),
            Err(Error::PhotonCapExceeded { .. })
        ));
    }

    #[test]
    fn registry_limits() {
        assert!(matches!(
            ModeRegistry::new(0u16..17),
            Err(Error::RailCapExceeded { rails: 34, cap: 32 })
        ));
        assert!(matches!(
            ModeRegistry::new([64u16]),
            Err(Error::ModeIndexOutOfRange { .. })
        ));
        assert_eq!(
            ModeRegistry::new([3u16, 3]),
            Err(Error::DuplicateMode(SpatialMode(3)))
        );
    }

    #[test]
    fn tensor_and_overlap() {
        let h1 = PureState::single_photon(1, c(1.0), c(0.0)).unwrap();
        let v2 = PureState::single_photon(2, c(0.0), c(1.0)).unwrap();
        let hv = h1.tensor(&v2).unwrap();
        assert_eq!(hv.len(), 1);
        assert_eq!(hv.to_string(), "1.000|H1 V2⟩");
        assert_eq!(h1.tensor(&h1), Err(Error::RegistryOverlap(SpatialMode(1))));

        let vac = PureState::vacuum(&ModeRegistry::new([5u16]).unwrap());
        let ext = h1.tensor(&vac).unwrap();
        assert_eq!(ext.registry().modes(), &[SpatialMode(1), SpatialMode(5)]);
        assert_eq!(ext.drop_vacuum_mode(SpatialMode(5)).unwrap(), h1);
    }

    #[test]
    fn inner_products() {
        let h = PureState::single_photon(1, c(1.0), c(0.0)).unwrap();
        let v = PureState::single_photon(1, c(0.0), c(1.0)).unwrap();
        let d = PureState::single_photon(1, c(1.0), c(1.0)).unwrap();
        assert_eq!(h.inner_product(&h).unwrap(), c(1.0));
        assert_eq!(h.inner_product(&v).unwrap(), c(0.0));
        assert!((h.fidelity(&d).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(h.fidelity(&v).unwrap(), 0.0);
        let other = PureState::single_photon(2, c(1.0), c(0.0)).unwrap();
        assert_eq!(h.inner_product(&other), Err(Error::RegistryMismatch));
    }

    #[test]
    fn photon_counts() {
        let h = PureState::single_photon(1, c(1.0), c(0.0)).unwrap();
        assert_eq!(
            h.photon_count_distribution(SpatialMode(1)).unwrap(),
            BTreeMap::from([(1, 1.0)])
        );
        let vac = PureState::vacuum(&ModeRegistry::new([4u16]).unwrap());
        assert_eq!(
            vac.photon_count_distribution(SpatialMode(4)).unwrap(),
            BTreeMap::from([(0, 1.0)])
        );
        assert_eq!(
            h.photon_count_distribution(SpatialMode(2)),
            Err(Error::UnknownMode(SpatialMode(2)))
        );
    }

    #[test]
    fn identity_map_is_noop() {
        let s = PureState::single_photon(1, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))
            .unwrap()
            .tensor(&PureState::single_photon(2, c(1.0), c(1.0)).unwrap())
            .unwrap();
        let rails: Vec<Rail> = s.registry().rails().collect();
        let id = ModeLinearMap::new(rails, DMatrix::identity(4, 4)).unwrap();
        assert_eq!(s.apply_map(&id).unwrap(), s);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            ModeLinearMap::new(vec![Rail::h(1), Rail::v(1)], m),
            Err(Error::NonUnitaryMap { .. })
        ));
    }

    #[test]
    fn partial_relabel_rejected() {
        assert!(matches!(
            ModeLinearMap::relabeling(vec![Rail::h(1)], vec![Rail::h(2)], DMatrix::identity(1, 1)),
            Err(Error::MalformedMap(_))
        ));
    }

    #[test]
    fn relabel_moves_mode() {
        let s = PureState::single_photon(1, c(0.6), c(0.8)).unwrap();
        let t = s.relabel_mode(SpatialMode(1), SpatialMode(9)).unwrap();
        assert_eq!(t, PureState::single_photon(9, c(0.6), c(0.8)).unwrap());
    }

    #[test]
    fn contract_and_split() {
        let a = PureState::single_photon(1, c(0.6), Complex64::new(0.0, 0.8)).unwrap();
        let b = PureState::single_photon(2, c(1.0), c(-1.0)).unwrap();
        let ab = a.tensor(&b).unwrap();
        let (w, rest) = ab.contract(&b).unwrap().unwrap();
        assert!((w - 1.0).abs() < 1e-14);
        assert!((rest.fidelity(&a).unwrap() - 1.0).abs() < 1e-14);

        let (p, r) = ab.split_product(&[SpatialMode(1)]).unwrap().unwrap();
        assert!((p.tensor(&r).unwrap().inner_product(&ab).unwrap() - c(1.0)).norm() < 1e-14);
        assert_eq!(ab.schmidt_coefficients(&[SpatialMode(1)]).unwrap().len(), 1);
    }

    #[test]
    fn entangled_state_does_not_split() {
        let reg = ModeRegistry::new([1u16, 2]).unwrap();
        let s = PureState::new(
            &reg,
            [
                (reg.ket(&[Rail::h(1), Rail::v(2)]).unwrap(), c(1.0)),
                (reg.ket(&[Rail::v(1), Rail::h(2)]).unwrap(), c(-1.0)),
            ],
        )
        .unwrap();
        assert!(s.split_product(&[SpatialMode(1)]).unwrap().is_none());
        let sc = s.schmidt_coefficients(&[SpatialMode(1)]).unwrap();
        assert_eq!(sc.len(), 2);
        for x in sc {
            assert!((x - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn expand_power_weights_sum_like_binomial() {
        // (u0 + u1)^3 with u0 = u1 = 1 gives total weight 8 with Fock-free weights n!/Πc!
        let support = [(0, c(1.0)), (1, c(1.0))];
        let total: f64 = expand_power(3, &support).iter().map(|(_, w)| w.re).sum();
        assert!((total - 8.0).abs() < 1e-12);
    }
}
