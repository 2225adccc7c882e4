use alloc::vec;
use alloc::vec::Vec;

/// A dense row-major binary raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(
            bits.len(),
            width as usize * height as usize,
            "raster size mismatch"
        );
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for v in 0..height {
            for u in 0..width {
                bits.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> bool {
        self.bits[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        self.bits[v as usize * self.width as usize + u as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn union(&self, other: &Self) -> Self {
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| *a || *b)
            .collect();
        Self::from_bits(self.width, self.height, bits)
    }

    /// Square (Chebyshev) erosion of radius `r`; pixels beyond the border
    /// count as unset.
    pub fn eroded(&self, r: u32) -> Self {
        self.morph(r, true)
    }

    /// Square (Chebyshev) dilation of radius `r`.
    pub fn dilated(&self, r: u32) -> Self {
        self.morph(r, false)
    }

    // Separable: a square window is a row pass followed by a column pass.
    fn morph(&self, r: u32, erode: bool) -> Self {
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = r as usize;
        let window = |get: &dyn Fn(isize) -> bool, i: usize, len: usize| -> bool {
            let lo = i as isize - r as isize;
            let hi = i as isize + r as isize;
            if erode {
                (lo..=hi).all(|j| j >= 0 && (j as usize) < len && get(j))
            } else {
                (lo..=hi).any(|j| j >= 0 && (j as usize) < len && get(j))
            }
        };
        let mut rows = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            for x in 0..w {
                rows[y * w + x] = window(&|j| row[j as usize], x, w);
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            for y in 0..h {
                out[y * w + x] = window(&|j| rows[j as usize * w + x], y, h);
            }
        }
        Self::from_bits(self.width, self.height, out)
    }
}
