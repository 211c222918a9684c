//! Observed experimental data and its split into treatment arms.

use crate::{Error, Result};

/// Units of one treatment arm: outcomes and covariates stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    dy: usize,
    dz: usize,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl Group {
    pub fn new(dy: usize, dz: usize) -> Self {
        Self {
            dy,
            dz,
            y: Vec::new(),
            z: Vec::new(),
        }
    }

    pub fn with_capacity(dy: usize, dz: usize, len: usize) -> Self {
        Self {
            dy,
            dz,
            y: Vec::with_capacity(len * dy),
            z: Vec::with_capacity(len * dz),
        }
    }

    pub fn push(&mut self, y: &[f64], z: &[f64]) -> Result<()> {
        if y.len() != self.dy {
            return Err(Error::DimensionMismatch {
                what: "outcome",
                expected: self.dy,
                found: y.len(),
            });
        }
        if z.len() != self.dz {
            return Err(Error::DimensionMismatch {
                what: "covariate",
                expected: self.dz,
                found: z.len(),
            });
        }
        if y.iter().chain(z).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("sample row"));
        }
        self.y.extend_from_slice(y);
        self.z.extend_from_slice(z);
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.dy == 0 {
            0
        } else {
            self.y.len() / self.dy
        }
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn dz(&self) -> usize {
        self.dz
    }

    #[inline]
    pub fn y(&self, k: usize) -> &[f64] {
        &self.y[k * self.dy..(k + 1) * self.dy]
    }

    #[inline]
    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k * self.dz..(k + 1) * self.dz]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        (0..self.len()).map(|k| (self.y(k), self.z(k)))
    }

    pub(crate) fn z_mut(&mut self) -> &mut [f64] {
        &mut self.z
    }
}

/// Rows of `(w, y, z)` from a completely randomized experiment.
///
/// Invariants: both arms non-empty, constant outcome and covariate
/// dimensions (each at least 1), all values finite, `w ∈ {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    dy: usize,
    dz: usize,
    w: Vec<u8>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl ObservedSample {
    pub fn new(dy: usize, dz: usize) -> SampleBuilder {
        SampleBuilder {
            sample: ObservedSample {
                dy,
                dz,
                w: Vec::new(),
                y: Vec::new(),
                z: Vec::new(),
            },
        }
    }

    /// Builds a sample from `(w, y, z)` rows; dimensions come from the first row.
    pub fn from_rows<I, Y, Z>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u8, Y, Z)>,
        Y: AsRef<[f64]>,
        Z: AsRef<[f64]>,
    {
        let mut rows = rows.into_iter().peekable();
        let (dy, dz) = match rows.peek() {
            Some((_, y, z)) => (y.as_ref().len(), z.as_ref().len()),
            None => return Err(Error::EmptyGroup(0)),
        };
        let mut builder = Self::new(dy, dz);
        for (w, y, z) in rows {
            builder.push(w, y.as_ref(), z.as_ref())?;
        }
        builder.finish()
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn dy(&self) -> usize {
        self.dy
    }

    pub fn dz(&self) -> usize {
        self.dz
    }

    pub fn w(&self, i: usize) -> u8 {
        self.w[i]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.y[i * self.dy..(i + 1) * self.dy]
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.dz..(i + 1) * self.dz]
    }

    pub fn rows(&self) -> impl Iterator<Item = (u8, &[f64], &[f64])> {
        (0..self.len()).map(|i| (self.w[i], self.y(i), self.z(i)))
    }

    /// Control-arm size.
    pub fn n(&self) -> usize {
        self.w.iter().filter(|&&w| w == 0).count()
    }

    /// Treated-arm size.
    pub fn m(&self) -> usize {
        self.w.iter().filter(|&&w| w == 1).count()
    }

    /// Splits into (control, treated) arms, each in input order.
    pub fn split(&self) -> Result<(Group, Group)> {
        let mut g0 = Group::with_capacity(self.dy, self.dz, self.n());
        let mut g1 = Group::with_capacity(self.dy, self.dz, self.m());
        for (w, y, z) in self.rows() {
            if w == 0 {
                g0.push(y, z)?;
            } else {
                g1.push(y, z)?;
            }
        }
        if g0.is_empty() {
            return Err(Error::EmptyGroup(0));
        }
        if g1.is_empty() {
            return Err(Error::EmptyGroup(1));
        }
        Ok((g0, g1))
    }

    /// Returns a copy with every outcome transformed by `f`.
    pub fn map_outcomes(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

pub struct SampleBuilder {
    sample: ObservedSample,
}

impl SampleBuilder {
    pub fn push(&mut self, w: u8, y: &[f64], z: &[f64]) -> Result<&mut Self> {
        let s = &mut self.sample;
        if w > 1 {
            return Err(Error::InvalidConfig(format!(
                "treatment indicator must be 0 or 1, got {w}"
            )));
        }
        if y.len() != s.dy {
            return Err(Error::DimensionMismatch {
                what: "outcome",
                expected: s.dy,
                found: y.len(),
            });
        }
        if z.len() != s.dz {
            return Err(Error::DimensionMismatch {
                what: "covariate",
                expected: s.dz,
                found: z.len(),
            });
        }
        if y.iter().chain(z).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("sample row"));
        }
        s.w.push(w);
        s.y.extend_from_slice(y);
        s.z.extend_from_slice(z);
        Ok(self)
    }

    pub fn finish(self) -> Result<ObservedSample> {
        let s = self.sample;
        if s.dy == 0 {
            return Err(Error::DimensionMismatch {
                what: "outcome",
                expected: 1,
                found: 0,
            });
        }
        if s.dz == 0 {
            return Err(Error::DimensionMismatch {
                what: "covariate",
                expected: 1,
                found: 0,
            });
        }
        if !s.w.contains(&0) {
            return Err(Error::EmptyGroup(0));
        }
        if !s.w.contains(&1) {
            return Err(Error::EmptyGroup(1));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_missing_arm() {
        let rows = vec![(0u8, vec![1.0], vec![0.0]), (0, vec![2.0], vec![1.0])];
        assert!(matches!(ObservedSample::from_rows(rows), Err(Error::EmptyGroup(1))));
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows = vec![(0u8, vec![1.0], vec![0.0]), (1, vec![2.0, 3.0], vec![1.0])];
        assert!(matches!(
            ObservedSample::from_rows(rows),
            Err(Error::DimensionMismatch { what: "outcome", .. })
        ));
    }

    #[test]
    fn rejects_nan() {
        let rows = vec![(0u8, vec![f64::NAN], vec![0.0]), (1, vec![2.0], vec![1.0])];
        assert!(matches!(
            ObservedSample::from_rows(rows),
            Err(Error::NonFiniteInput(_))
        ));
    }
}
