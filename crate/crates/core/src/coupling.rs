//! Static dipole-dipole couplings and the single-excitation Hamiltonian.
//!
//! The one-excitation block of `H_0 + sum_ij H_int,ij` is an N x N real
//! symmetric matrix: bare transition frequencies on the diagonal and pair
//! couplings off the diagonal. Its eigenvalues are the interaction-shifted
//! line centers.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, PeakLabel};
use crate::error::{Error, Result};
use crate::textio::{fmt_f64, Metadata};
use crate::units::{PLANCK_H, RAD_PER_GHZ, VACUUM_PERMITTIVITY};

/// Coupling between two point dipoles (C m vectors) separated by `r_ij`
/// (m), as an ordinary frequency in Hz.
pub fn dipole_coupling(mu_i: &Vector3<f64>, mu_j: &Vector3<f64>, r_ij: &Vector3<f64>, eps_r: f64) -> Result<f64> {
    if !(eps_r >= 1.0) {
        return Err(Error::invalid(format!("relative permittivity must be >= 1, got {eps_r}")));
    }
    let r = r_ij.norm();
    if !(r > 0.0) {
        return Err(Error::invalid("dipole separation must be non-zero"));
    }
    let r_hat = r_ij / r;
    let angular = mu_i.dot(mu_j) - 3.0 * mu_i.dot(&r_hat) * mu_j.dot(&r_hat);
    Ok(angular / (4.0 * PI * VACUUM_PERMITTIVITY * eps_r * PLANCK_H * r.powi(3)))
}

/// Real symmetric single-excitation Hamiltonian in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    matrix: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Wrap a dense matrix, rejecting any asymmetry.
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("coupling matrix must be square"));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Diagonal-only matrix: bare frequencies, interactions switched off.
    pub fn bare(ensemble: &Ensemble) -> Self {
        let diag: Vec<f64> = ensemble.emitters.iter().map(|e| e.bare_frequency.omega).collect();
        Self {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.matrix[(i, j)]
        }
    }

    pub fn dense(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Plain-text dense dump in GHz (ordinary frequency).
    pub fn to_text(&self, metadata: &Metadata) -> String {
        let mut out = String::new();
        let mut meta = Metadata::new()
            .with("format", "coupling-matrix")
            .with("units", "GHz")
            .with("size", self.size());
        meta.extend(metadata);
        meta.write_to(&mut out);
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|j| fmt_f64(self.matrix[(i, j)] / RAD_PER_GHZ))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Diagonal = bare angular frequencies, off-diagonal = `2 pi` times the
/// pair coupling. All pairs are coupled regardless of label.
pub fn build_coupling_matrix(ensemble: &Ensemble, eps_r: f64) -> Result<CouplingMatrix> {
    let emitters = &ensemble.emitters;
    let n = emitters.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ei = &emitters[i];
            let mu_i = ei.dipole_vector();
            ((i + 1)..n)
                .map(|j| {
                    let ej = &emitters[j];
                    let r = ej.position - ei.position;
                    let sep = r.norm();
                    if !(sep > 0.0) {
                        return Err(Error::CoincidentEmitters {
                            first: i,
                            second: j,
                            separation: sep,
                        });
                    }
                    Ok(2.0 * PI * dipole_coupling(&mu_i, &ej.dipole_vector(), &r, eps_r)?)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        m[(i, i)] = emitters[i].bare_frequency.omega;
        for (k, v) in row.into_iter().enumerate() {
            let j = i + 1 + k;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(CouplingMatrix { matrix: m })
}

/// How oscillator strength is redistributed over the eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// `sum_k |v_k|^2 b_k`: each eigenstate inherits the bare weights of
    /// the emitters it is built from.
    #[default]
    Incoherent,
    /// `|sum_k v_k sqrt(b_k)|^2`: projection onto the in-phase bright
    /// combination.
    BrightProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSpectrumLines {
    /// rad/s, ascending
    pub line_centers: Vec<f64>,
    pub line_weights: Vec<f64>,
    /// Emitter carrying the largest share of each eigenvector.
    pub dominant_emitter: Vec<usize>,
}

impl ShiftedSpectrumLines {
    /// Lines with no interaction: one per emitter at its bare frequency.
    pub fn bare(centers: &[f64], weights: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
        Self {
            line_centers: order.iter().map(|&i| centers[i]).collect(),
            line_weights: order.iter().map(|&i| weights[i]).collect(),
            dominant_emitter: order,
        }
    }

    pub fn len(&self) -> usize {
        self.line_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.line_centers.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.line_weights.iter().sum()
    }
}

/// Per-emitter emission weight: `(mu / mu_max)^2`, zero for pedestal
/// emitters when they are dark.
pub fn bare_weights(ensemble: &Ensemble, dark_pedestal: bool) -> Vec<f64> {
    let mu_max = ensemble
        .emitters
        .iter()
        .map(|e| e.dipole_moment)
        .fold(0.0, f64::max);
    ensemble
        .emitters
        .iter()
        .map(|e| {
            if (dark_pedestal && e.label == PeakLabel::Pedestal) || mu_max == 0.0 {
                0.0
            } else {
                (e.dipole_moment / mu_max).powi(2)
            }
        })
        .collect()
}

/// Eigen-decompose the single-excitation block. `weights` are the bare
/// per-emitter weights (non-negative, one per row).
pub fn diagonalize_single_excitation(
    matrix: &CouplingMatrix,
    weights: &[f64],
    rule: WeightRule,
) -> Result<ShiftedSpectrumLines> {
    let n = matrix.size();
    if weights.len() != n {
        return Err(Error::invalid(format!("{} weights for a {n}x{n} matrix", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("bare weights must be non-negative"));
    }
    // Re-validate: the matrix may have been built by hand.
    let matrix = CouplingMatrix::from_dense(matrix.matrix.clone())?;
    if n == 0 {
        return Ok(ShiftedSpectrumLines {
            line_centers: vec![],
            line_weights: vec![],
            dominant_emitter: vec![],
        });
    }
    // Remove the large common offset so the solver works on the couplings.
    let reference = matrix.matrix.diagonal().mean();
    let mut shifted = matrix.matrix;
    for i in 0..n {
        shifted[(i, i)] -= reference;
    }
    let eig = shifted.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let amplitudes: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut line_centers = Vec::with_capacity(n);
    let mut line_weights = Vec::with_capacity(n);
    let mut dominant_emitter = Vec::with_capacity(n);
    for &k in &order {
        let v = eig.eigenvectors.column(k);
        line_centers.push(eig.eigenvalues[k] + reference);
        let w = match rule {
            WeightRule::Incoherent => v.iter().zip(weights).map(|(c, b)| c * c * b).sum(),
            WeightRule::BrightProjection => v.iter().zip(&amplitudes).map(|(c, a)| c * a).sum::<f64>().powi(2),
        };
        line_weights.push(w);
        let (dom, _) = v
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, c)| if c.abs() > best.1 { (i, c.abs()) } else { best });
        dominant_emitter.push(dom);
    }
    Ok(ShiftedSpectrumLines {
        line_centers,
        line_weights,
        dominant_emitter,
    })
}

/// |J| (Hz) between every emitter and its nearest neighbour.
pub fn nearest_neighbor_couplings(ensemble: &Ensemble, eps_r: f64) -> Result<Vec<f64>> {
    let positions: Vec<_> = ensemble.emitters.iter().map(|e| e.position).collect();
    crate::ensemble::nearest_neighbors(&positions)
        .into_iter()
        .enumerate()
        .map(|(i, (j, _))| {
            let a = &ensemble.emitters[i];
            let b = &ensemble.emitters[j];
            dipole_coupling(&a.dipole_vector(), &b.dipole_vector(), &(b.position - a.position), eps_r).map(f64::abs)
        })
        .collect()
}
