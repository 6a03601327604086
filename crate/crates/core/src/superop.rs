//! GKSL generator in superoperator form, built from nonzero entries so that
//! the two parity sectors can be assembled without the full n² × n² matrix.
//!
//! Vectorization is column stacking: ρ_{mn} sits at index m + n·N.

use nalgebra::DMatrix;

use crate::C64;

/// Sector of density-matrix entries ρ_{mn} with (m + n) of fixed parity.
///
/// H = H0 + pV preserves Fock parity and a ρ a† shifts both indices, so the
/// generator never mixes the sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub(crate) const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    fn contains(self, m: usize, n: usize) -> bool {
        ((m + n) % 2 == 0) == (self == Parity::Even)
    }
}

/// Nonzero generator entries (row, col, value) in column-stacked indexing.
pub(crate) fn generator_entries(h: &DMatrix<C64>, kappa: f64) -> Vec<(usize, usize, C64)> {
    let dim = h.nrows();
    let idx = |m: usize, n: usize| m + n * dim;
    let minus_i = C64::new(0.0, -1.0);
    let nonzero: Vec<Vec<(usize, C64)>> = (0..dim)
        .map(|m| {
            (0..dim)
                .filter(|&k| h[(m, k)] != C64::new(0.0, 0.0))
                .map(|k| (k, h[(m, k)]))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for n in 0..dim {
        for m in 0..dim {
            let row = idx(m, n);
            // -i H ρ
            for &(k, hmk) in &nonzero[m] {
                out.push((row, idx(k, n), minus_i * hmk));
            }
            // +i ρ H, with H_{kn} = conj(H_{nk})
            for &(k, hnk) in &nonzero[n] {
                out.push((row, idx(m, k), -minus_i * hnk.conj()));
            }
            if kappa != 0.0 {
                if m + 1 < dim && n + 1 < dim {
                    let gain = kappa * (((m + 1) * (n + 1)) as f64).sqrt();
                    out.push((row, idx(m + 1, n + 1), C64::new(gain, 0.0)));
                }
                let loss = -0.5 * kappa * (m + n) as f64;
                if loss != 0.0 {
                    out.push((row, row, C64::new(loss, 0.0)));
                }
            }
        }
    }
    out
}

/// Full n² × n² generator.
pub(crate) fn full_generator(h: &DMatrix<C64>, kappa: f64) -> DMatrix<C64> {
    let dim = h.nrows();
    let mut l = DMatrix::zeros(dim * dim, dim * dim);
    for (r, c, v) in generator_entries(h, kappa) {
        l[(r, c)] += v;
    }
    l
}

/// Column-stacked indices belonging to one parity sector, in ascending order.
pub(crate) fn sector_indices(dim: usize, parity: Parity) -> Vec<usize> {
    (0..dim * dim)
        .filter(|&i| parity.contains(i % dim, i / dim))
        .collect()
}

/// Generator restricted to one parity sector, together with its index map.
pub(crate) fn sector_generator(
    h: &DMatrix<C64>,
    kappa: f64,
    parity: Parity,
) -> (Vec<usize>, DMatrix<C64>) {
    let dim = h.nrows();
    let indices = sector_indices(dim, parity);
    let mut lookup = vec![usize::MAX; dim * dim];
    for (pos, &i) in indices.iter().enumerate() {
        lookup[i] = pos;
    }
    let mut g = DMatrix::zeros(indices.len(), indices.len());
    for (r, c, v) in generator_entries(h, kappa) {
        let (lr, lc) = (lookup[r], lookup[c]);
        if lr == usize::MAX {
            continue;
        }
        debug_assert!(lc != usize::MAX, "generator mixes parity sectors");
        g[(lr, lc)] += v;
    }
    (indices, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_hamiltonian, FockSpace, KpoParams};

    #[test]
    fn sectors_partition_the_full_generator() {
        let space = FockSpace::new(5).unwrap();
        let h = build_hamiltonian(space, &KpoParams::new(2.0, -1.5, 0.4)).into_entries();
        let full = full_generator(&h, 0.3);
        let mut covered = 0;
        for parity in Parity::BOTH {
            let (idx, g) = sector_generator(&h, 0.3, parity);
            covered += idx.len();
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    assert_eq!(g[(a, b)], full[(i, j)]);
                }
            }
        }
        assert_eq!(covered, 25);
        // no coupling between sectors
        let even = sector_indices(5, Parity::Even);
        let odd = sector_indices(5, Parity::Odd);
        for &i in &even {
            for &j in &odd {
                assert_eq!(full[(i, j)], C64::new(0.0, 0.0));
                assert_eq!(full[(j, i)], C64::new(0.0, 0.0));
            }
        }
    }
}
