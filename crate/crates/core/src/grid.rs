//! Dense row-major 2D grids.
//!
//! Every raster in the engine (color, depth, flow, masks, alpha) is a
//! [`Grid`] over a different cell type. The type aliases give the domain
//! names used throughout the crate.

use std::fmt;

/// A dense, row-major `width × height` raster.
#[derive(Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Linear-light RGB, each channel in `[0, 1]`.
pub type Rgb = [f32; 3];

/// Color raster in linear light.
pub type ColorImage = Grid<Rgb>;
/// Positive depth, larger is farther. Renderer outputs use 0 for "uncovered".
pub type DepthMap = Grid<f32>;
/// Per-pixel `(u, v)` motion in pixels per frame step.
pub type FlowField = Grid<[f32; 2]>;
/// Binary mask.
pub type MaskImage = Grid<bool>;
/// Per-pixel coverage in `[0, 1]`.
pub type AlphaMap = Grid<f32>;

impl<T> Grid<T> {
    /// Wraps an existing buffer. Panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            width * height,
            "grid buffer length {} does not match {}x{}",
            data.len(),
            width,
            height
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        let w = self.width;
        &mut self.data[y * w + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        *self.get_mut(x, y) = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self::from_vec(width, height, vec![value; width * height])
    }
}

impl<T> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl MaskImage {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Chessboard dilation by `radius` pixels. Separable max filter.
    pub fn dilate(&self, radius: usize) -> MaskImage {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        let mut rows = Grid::filled(w, h, false);
        for y in 0..h {
            // running count over the window keeps this O(w) per row
            let mut count = 0usize;
            for x in 0..(radius.min(w)) {
                count += *self.get(x, y) as usize;
            }
            for x in 0..w {
                let enter = x + radius;
                if enter < w {
                    count += *self.get(enter, y) as usize;
                }
                if x > radius {
                    count -= *self.get(x - radius - 1, y) as usize;
                }
                rows.set(x, y, count > 0);
            }
        }
        let mut out = Grid::filled(w, h, false);
        for x in 0..w {
            let mut count = 0usize;
            for y in 0..(radius.min(h)) {
                count += *rows.get(x, y) as usize;
            }
            for y in 0..h {
                let enter = y + radius;
                if enter < h {
                    count += *rows.get(x, enter) as usize;
                }
                if y > radius {
                    count -= *rows.get(x, y - radius - 1) as usize;
                }
                out.set(x, y, count > 0);
            }
        }
        out
    }
}

/// 4-connected neighbors of `(x, y)` that lie inside a `w × h` grid.
#[inline]
pub(crate) fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let candidates = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    candidates.into_iter().filter(move |&(nx, ny)| nx < w && ny < h)
}
