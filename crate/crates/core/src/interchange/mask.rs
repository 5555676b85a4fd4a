use serde::{Deserialize, Serialize};

use super::{ImageDims, InterchangeError, Pixel};

/// A run of foreground pixels over the row-major flattened image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u64; 2]", into = "[u64; 2]")]
pub struct Run {
    pub start: u64,
    pub len: u64,
}

impl From<[u64; 2]> for Run {
    fn from([start, len]: [u64; 2]) -> Self {
        Run { start, len }
    }
}

impl From<Run> for [u64; 2] {
    fn from(r: Run) -> Self {
        [r.start, r.len]
    }
}

impl Run {
    fn end(&self) -> u64 {
        self.start + self.len
    }
}

/// Run-length encoded binary segmentation mask.
///
/// Runs are kept canonical: non-empty, sorted, and separated by at least one
/// background pixel, so encoding and decoding are exact inverses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegMask {
    #[serde(flatten)]
    dims: ImageDims,
    runs: Vec<Run>,
}

impl SegMask {
    pub fn empty(dims: ImageDims) -> Self {
        SegMask {
            dims,
            runs: Vec::new(),
        }
    }

    /// Builds a mask from raw runs, checking every run invariant.
    pub fn from_runs(dims: ImageDims, runs: Vec<Run>) -> Result<Self, InterchangeError> {
        let mask = SegMask { dims, runs };
        mask.validate()?;
        Ok(mask)
    }

    /// Encodes a row-major boolean bitmap of `dims.len()` entries.
    pub fn from_bitmap(dims: ImageDims, bitmap: &[bool]) -> Result<Self, InterchangeError> {
        if bitmap.len() != dims.len() {
            return Err(InterchangeError::DimensionMismatch(format!(
                "bitmap has {} entries, mask dims {}x{} need {}",
                bitmap.len(),
                dims.height,
                dims.width,
                dims.len()
            )));
        }
        let mut runs: Vec<Run> = Vec::new();
        for (i, &on) in bitmap.iter().enumerate() {
            if !on {
                continue;
            }
            let i = i as u64;
            match runs.last_mut() {
                Some(run) if run.end() == i => run.len += 1,
                _ => runs.push(Run { start: i, len: 1 }),
            }
        }
        Ok(SegMask { dims, runs })
    }

    /// Encodes an arbitrary set of pixels (duplicates and any order accepted).
    pub fn from_pixels<I>(dims: ImageDims, pixels: I) -> Result<Self, InterchangeError>
    where
        I: IntoIterator<Item = Pixel>,
    {
        let mut bitmap = vec![false; dims.len()];
        for p in pixels {
            if !dims.contains(p) {
                return Err(InterchangeError::MalformedMask(format!(
                    "pixel ({}, {}) outside {}x{}",
                    p.row, p.col, dims.height, dims.width
                )));
            }
            bitmap[dims.flat(p)] = true;
        }
        Self::from_bitmap(dims, &bitmap)
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs.iter().map(|r| r.len).sum()
    }

    pub fn validate(&self) -> Result<(), InterchangeError> {
        let total = self.dims.len() as u64;
        let mut prev_end: Option<u64> = None;
        for (k, run) in self.runs.iter().enumerate() {
            if run.len == 0 {
                return Err(InterchangeError::MalformedMask(format!("run {k} is empty")));
            }
            if run.end() > total {
                return Err(InterchangeError::MalformedMask(format!(
                    "run {k} [{}, {}) exceeds {} pixels",
                    run.start,
                    run.end(),
                    total
                )));
            }
            if let Some(end) = prev_end {
                if run.start <= end {
                    return Err(InterchangeError::MalformedMask(format!(
                        "run {k} starts at {} but previous run ends at {end}",
                        run.start
                    )));
                }
            }
            prev_end = Some(run.end());
        }
        Ok(())
    }

    /// Iterates the foreground pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let width = self.dims.width as u64;
        self.runs.iter().flat_map(move |run| {
            (run.start..run.end()).map(move |i| Pixel {
                row: (i / width) as u32,
                col: (i % width) as u32,
            })
        })
    }

    pub fn to_bitmap(&self) -> Vec<bool> {
        let mut bitmap = vec![false; self.dims.len()];
        for run in &self.runs {
            for i in run.start..run.end() {
                bitmap[i as usize] = true;
            }
        }
        bitmap
    }
}

/// Foreground pixels of `mask` as (row, col) pairs in row-major order.
pub fn mask_pixels(mask: &SegMask) -> Vec<Pixel> {
    mask.pixels().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(height: u32, width: u32) -> ImageDims {
        ImageDims { height, width }
    }

    #[test]
    fn empty_mask_has_no_pixels() {
        assert!(mask_pixels(&SegMask::empty(dims(4, 5))).is_empty());
    }

    #[test]
    fn full_two_by_two() {
        let m = SegMask::from_runs(dims(2, 2), vec![Run { start: 0, len: 4 }]).unwrap();
        let px: Vec<(u32, u32)> = mask_pixels(&m).iter().map(|p| (p.row, p.col)).collect();
        assert_eq!(px, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn rejects_bad_runs() {
        let d = dims(2, 3);
        assert!(SegMask::from_runs(d, vec![Run { start: 4, len: 3 }]).is_err());
        assert!(SegMask::from_runs(d, vec![Run { start: 0, len: 0 }]).is_err());
        let overlapping = vec![Run { start: 0, len: 3 }, Run { start: 2, len: 1 }];
        assert!(SegMask::from_runs(d, overlapping).is_err());
        let touching = vec![Run { start: 0, len: 2 }, Run { start: 2, len: 1 }];
        assert!(SegMask::from_runs(d, touching).is_err());
        let unsorted = vec![Run { start: 4, len: 1 }, Run { start: 0, len: 1 }];
        assert!(SegMask::from_runs(d, unsorted).is_err());
    }

    fn naive_decode(mask: &SegMask) -> Vec<Pixel> {
        let bitmap = mask.to_bitmap();
        let d = mask.dims();
        let mut out = Vec::new();
        for row in 0..d.height {
            for col in 0..d.width {
                if bitmap[(row * d.width + col) as usize] {
                    out.push(Pixel { row, col });
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn decode_matches_naive_and_roundtrips(
            h in 1u32..12, w in 1u32..12, seed in proptest::collection::vec(any::<bool>(), 144)
        ) {
            let d = dims(h, w);
            let bitmap: Vec<bool> = seed[..d.len()].to_vec();
            let mask = SegMask::from_bitmap(d, &bitmap).unwrap();
            mask.validate().unwrap();
            let k = bitmap.iter().filter(|b| **b).count();
            let px = mask_pixels(&mask);
            prop_assert_eq!(px.len(), k);
            prop_assert_eq!(mask.area() as usize, k);
            prop_assert_eq!(&px, &naive_decode(&mask));
            prop_assert_eq!(mask.to_bitmap(), bitmap);
            let again = SegMask::from_pixels(d, px.iter().copied()).unwrap();
            prop_assert_eq!(again, mask);
        }
    }
}
