//! Finitely supported probability measures and couplings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{GeodesicSpace, SpacePoint};

/// Coordinate tolerance under which two atoms are the same point.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub space: GeodesicSpace,
    pub atoms: Vec<SpacePoint>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(space: GeodesicSpace, atoms: Vec<SpacePoint>, weights: Vec<f64>) -> Result<Self> {
        let mu = Self { space, atoms, weights };
        mu.validate()?;
        Ok(mu)
    }

    pub fn uniform(space: GeodesicSpace, atoms: Vec<SpacePoint>) -> Result<Self> {
        let n = atoms.len();
        Self::new(space, atoms, vec![1.0 / n as f64; n])
    }

    pub fn dirac(space: GeodesicSpace, x: SpacePoint) -> Result<Self> {
        Self::new(space, vec![x], vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter("measure has no atoms".into()));
        }
        if self.atoms.len() != self.weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} atoms but {} weights",
                self.atoms.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative or non-finite weight {w}")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        self.atoms.iter().try_for_each(|a| self.space.check_point(a))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpacePoint, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Merge atoms whose coordinates agree within [`MERGE_TOL`]; zero-weight
    /// atoms are dropped unless every weight is zero.
    pub fn merged(&self) -> Self {
        let (atoms, weights) = merge_atoms(self.iter().map(|(a, w)| (a.clone(), w)));
        Self { space: self.space.clone(), atoms, weights }
    }

    /// Push the measure forward along `map`; coincident images are merged.
    pub fn pushforward<F>(&self, mut map: F) -> Result<Self>
    where
        F: FnMut(&SpacePoint) -> Result<SpacePoint>,
    {
        let mut images = Vec::with_capacity(self.len());
        for (a, w) in self.iter() {
            let img = map(a)?;
            self.space.check_point(&img)?;
            images.push((img, w));
        }
        let (atoms, weights) = merge_atoms(images);
        Ok(Self { space: self.space.clone(), atoms, weights })
    }

    /// The marginals of a measure on a product space.
    pub fn marginals(&self) -> Vec<DiscreteMeasure> {
        let factors = self.space.factors();
        let ranges = self.space.factor_ranges();
        factors
            .into_iter()
            .zip(ranges)
            .map(|(f, r)| {
                let (atoms, weights) = merge_atoms(
                    self.iter().map(|(a, w)| (SpacePoint::new(a.coords[r.clone()].to_vec()), w)),
                );
                DiscreteMeasure { space: f.clone(), atoms, weights }
            })
            .collect()
    }
}

fn merge_atoms<I>(items: I) -> (Vec<SpacePoint>, Vec<f64>)
where
    I: IntoIterator<Item = (SpacePoint, f64)>,
{
    let mut atoms: Vec<SpacePoint> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (p, w) in items {
        match atoms.iter().position(|a| a.chart_gap(&p) <= MERGE_TOL) {
            Some(i) => weights[i] += w,
            None => {
                atoms.push(p);
                weights.push(w);
            }
        }
    }
    if weights.iter().any(|w| *w > 0.0) {
        let keep: Vec<bool> = weights.iter().map(|w| *w > 0.0).collect();
        let mut k = keep.iter();
        atoms.retain(|_| *k.next().unwrap());
        weights.retain(|w| *w > 0.0);
    }
    (atoms, weights)
}

/// A joint measure on the product of two supports with given marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub rows: DiscreteMeasure,
    pub cols: DiscreteMeasure,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDiagnostics {
    pub valid: bool,
    pub worst_row: Option<(usize, f64)>,
    pub worst_col: Option<(usize, f64)>,
    pub min_entry: f64,
    pub message: String,
}

pub const COUPLING_TOL: f64 = 1e-10;

impl Coupling {
    pub fn product(rows: DiscreteMeasure, cols: DiscreteMeasure) -> Self {
        let matrix = rows
            .weights
            .iter()
            .map(|a| cols.weights.iter().map(|b| a * b).collect())
            .collect();
        Self { rows, cols, matrix }
    }

    /// Checks the marginal constraints and reports the worst violations.
    pub fn validate(&self) -> CouplingDiagnostics {
        let (m, n) = (self.rows.len(), self.cols.len());
        if self.matrix.len() != m || self.matrix.iter().any(|r| r.len() != n) {
            return CouplingDiagnostics {
                valid: false,
                worst_row: None,
                worst_col: None,
                min_entry: f64::NAN,
                message: format!("matrix shape does not match {m} x {n}"),
            };
        }
        let mut worst_row = (0, 0.0f64);
        for (i, row) in self.matrix.iter().enumerate() {
            let err = (row.iter().sum::<f64>() - self.rows.weights[i]).abs();
            if err > worst_row.1 || err.is_nan() {
                worst_row = (i, err);
            }
        }
        let mut worst_col = (0, 0.0f64);
        for j in 0..n {
            let s: f64 = self.matrix.iter().map(|r| r[j]).sum();
            let err = (s - self.cols.weights[j]).abs();
            if err > worst_col.1 || err.is_nan() {
                worst_col = (j, err);
            }
        }
        let min_entry = self.matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let valid = worst_row.1 <= COUPLING_TOL && worst_col.1 <= COUPLING_TOL && min_entry >= -COUPLING_TOL;
        let message = if valid {
            "marginals match".to_string()
        } else {
            format!(
                "worst row {} off by {:e}, worst column {} off by {:e}, min entry {:e}",
                worst_row.0, worst_row.1, worst_col.0, worst_col.1, min_entry
            )
        };
        CouplingDiagnostics {
            valid,
            worst_row: Some(worst_row),
            worst_col: Some(worst_col),
            min_entry,
            message,
        }
    }
}
