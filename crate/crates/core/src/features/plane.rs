/// A single-channel `f32` image with clamped sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_u8(width: usize, height: usize, px: &[u8]) -> Self {
        Plane {
            width,
            height,
            data: px.iter().map(|&p| p as f32).collect(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample with clamped borders.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let top = self.at(x0, y0) as f64 * (1.0 - fx) + self.at(x1, y0) as f64 * fx;
        let bot = self.at(x0, y1) as f64 * (1.0 - fx) + self.at(x1, y1) as f64 * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// 2×2 box downsample (odd trailing row/column is dropped).
    pub fn half(&self) -> Plane {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut out = Plane::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let s = self.at(2 * x, 2 * y) + self.at(2 * x + 1, 2 * y) + self.at(2 * x, 2 * y + 1) + self.at(2 * x + 1, 2 * y + 1);
                out.data[y * w + x] = 0.25 * s;
            }
        }
        out
    }

    /// Central-difference gradients `(gx, gy)` with replicated borders.
    pub fn gradients(&self) -> (Plane, Plane) {
        let mut gx = Plane::new(self.width, self.height);
        let mut gy = Plane::new(self.width, self.height);
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                let i = y as usize * self.width + x as usize;
                gx.data[i] = 0.5 * (self.clamped(x + 1, y) - self.clamped(x - 1, y));
                gy.data[i] = 0.5 * (self.clamped(x, y + 1) - self.clamped(x, y - 1));
            }
        }
        (gx, gy)
    }

    /// 3×3 median with replicated borders.
    pub fn median3(&self) -> Plane {
        let mut out = Plane::new(self.width, self.height);
        let mut win = [0f32; 9];
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                let mut k = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        win[k] = self.clamped(x + dx, y + dy);
                        k += 1;
                    }
                }
                win.sort_unstable_by(f32::total_cmp);
                out.data[y as usize * self.width + x as usize] = win[4];
            }
        }
        out
    }
}

/// Summed-area table over a `w × h` grid, `(w+1) × (h+1)` entries.
pub(crate) struct Integral {
    w1: usize,
    sums: Vec<f64>,
}

impl Integral {
    pub fn new(width: usize, height: usize, value: impl Fn(usize) -> f64) -> Self {
        let w1 = width + 1;
        let mut sums = vec![0f64; w1 * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += value(y * width + x);
                sums[(y + 1) * w1 + x + 1] = sums[y * w1 + x + 1] + row;
            }
        }
        Integral { w1, sums }
    }

    /// Sum over `[x0, x1) × [y0, y1)`.
    #[inline]
    pub fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        self.sums[y1 * self.w1 + x1] - self.sums[y0 * self.w1 + x1] - self.sums[y1 * self.w1 + x0] + self.sums[y0 * self.w1 + x0]
    }
}
