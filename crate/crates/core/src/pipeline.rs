//! Convenience entry points chaining assembly, eigensolve and the symbol.

use rayon::prelude::*;

use crate::assembly::assemble_pair;
use crate::eigensolve::{solve_spectrum, DiscreteSpectrum};
use crate::reparam::Reparametrization;
use crate::symbol::SymbolEp;
use crate::Result;

/// Assembles and solves the pencil for `(p, n, φ)`; outliers are classified
/// against `e_p(π) / (min φ')²`.
pub fn spectrum_for(p: usize, n: usize, phi: &Reparametrization) -> Result<DiscreteSpectrum> {
    let (m, k) = assemble_pair(p, n, phi)?;
    let dmin = phi.min_deriv();
    let max_range = SymbolEp::new(p)?.max_value() / (dmin * dmin);
    solve_spectrum(&m, &k, p, n, max_range)
}

/// [`spectrum_for`] over several `n`, computed concurrently and returned in input order.
pub fn spectra_for_ladder(
    p: usize,
    n_values: &[usize],
    phi: &Reparametrization,
) -> Result<Vec<DiscreteSpectrum>> {
    n_values.par_iter().map(|&n| spectrum_for(p, n, phi)).collect()
}
