//! Product-state basis of photon number and per-atom levels, restricted to a
//! bounded number of excitations.

use std::collections::HashMap;

/// Internal level of one atom: ground `b`, excited `a`, metastable `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    B,
    A,
    C,
}

impl Level {
    fn digit(self) -> u32 {
        match self {
            Level::B => 0,
            Level::A => 1,
            Level::C => 2,
        }
    }
}

/// `|n⟩_photon ⊗ |s_1 … s_N⟩`, atom levels packed base 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductState {
    pub photons: u32,
    code: u32,
}

const POW3: [u32; 13] = [1, 3, 9, 27, 81, 243, 729, 2187, 6561, 19683, 59049, 177147, 531441];

impl ProductState {
    pub fn ground(photons: u32) -> Self {
        Self { photons, code: 0 }
    }

    pub fn level(&self, atom: usize) -> Level {
        match (self.code / POW3[atom]) % 3 {
            0 => Level::B,
            1 => Level::A,
            _ => Level::C,
        }
    }

    pub fn with_level(&self, atom: usize, level: Level) -> Self {
        let old = self.level(atom).digit();
        let code = self.code - old * POW3[atom] + level.digit() * POW3[atom];
        Self { photons: self.photons, code }
    }

    pub fn with_photons(&self, photons: u32) -> Self {
        Self { photons, code: self.code }
    }

    pub fn count(&self, atoms: usize, level: Level) -> usize {
        (0..atoms).filter(|&j| self.level(j) == level).count()
    }

    /// Photons plus atoms outside `b`.
    pub fn excitations(&self, atoms: usize) -> usize {
        self.photons as usize + atoms - self.count(atoms, Level::B)
    }
}

/// Number of states with at most `max_exc` excitations and at most
/// `max_photons` photons for `atoms` three-level atoms.
pub fn sector_dimension(atoms: usize, max_exc: usize, max_photons: usize) -> u128 {
    let binom = |n: usize, k: usize| -> u128 {
        if k > n {
            return 0;
        }
        (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
    };
    let mut dim = 0u128;
    for k in 0..=max_exc {
        for n in 0..=k.min(max_photons) {
            let flips = k - n;
            dim += binom(atoms, flips) << flips;
        }
    }
    dim
}

#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub atoms: usize,
    pub max_excitations: usize,
    pub max_photons: usize,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
}

impl SectorBasis {
    /// Enumerates by excitation number, then photon number, then atom pattern.
    pub fn new(atoms: usize, max_excitations: usize, max_photons: usize) -> Self {
        let mut states = Vec::new();
        for k in 0..=max_excitations {
            for n in 0..=k.min(max_photons) {
                let flips = k - n;
                let mut chosen = Vec::with_capacity(flips);
                push_patterns(atoms, flips, 0, &mut chosen, &mut |pattern| {
                    // every flipped atom is either a or c
                    for mask in 0..(1u32 << flips) {
                        let mut s = ProductState::ground(n as u32);
                        for (bit, &atom) in pattern.iter().enumerate() {
                            let level = if mask >> bit & 1 == 0 { Level::A } else { Level::C };
                            s = s.with_level(atom, level);
                        }
                        states.push(s);
                    }
                });
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self { atoms, max_excitations, max_photons, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn index_of(&self, state: &ProductState) -> Option<usize> {
        self.index.get(state).copied()
    }
}

fn push_patterns(atoms: usize, remaining: usize, start: usize, chosen: &mut Vec<usize>, emit: &mut impl FnMut(&[usize])) {
    if remaining == 0 {
        emit(chosen);
        return;
    }
    for j in start..atoms {
        if atoms - j < remaining {
            break;
        }
        chosen.push(j);
        push_patterns(atoms, remaining - 1, j + 1, chosen, emit);
        chosen.pop();
    }
}
