use crate::sampler::SurfaceUVGrid;

/// One of the 8 layout symmetries of a grid: optional flips of the u and v
/// index, then an optional transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSymmetry {
    pub flip_u: bool,
    pub flip_v: bool,
    pub transpose: bool,
}

impl GridSymmetry {
    pub const IDENTITY: Self = Self { flip_u: false, flip_v: false, transpose: false };

    pub fn all() -> [Self; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (i, o) in out.iter_mut().enumerate() {
            *o = Self { flip_u: i & 1 != 0, flip_v: i & 2 != 0, transpose: i & 4 != 0 };
        }
        out
    }

    /// Output dimensions for an `m × n` input.
    pub fn dims(self, m: usize, n: usize) -> (usize, usize) {
        if self.transpose {
            (n, m)
        } else {
            (m, n)
        }
    }

    /// Input sample `(i, j)` that lands at output `(k, l)` of an `m × n` grid.
    pub fn source(self, m: usize, n: usize, k: usize, l: usize) -> (usize, usize) {
        let (a, b) = if self.transpose { (l, k) } else { (k, l) };
        (if self.flip_u { m - 1 - a } else { a }, if self.flip_v { n - 1 - b } else { b })
    }

    /// Flat source indices for every output sample, output-major.
    pub fn source_order(self, m: usize, n: usize) -> Vec<usize> {
        let (om, on) = self.dims(m, n);
        (0..om)
            .flat_map(|k| (0..on).map(move |l| (k, l)))
            .map(|(k, l)| {
                let (i, j) = self.source(m, n, k, l);
                i * n + j
            })
            .collect()
    }

    pub fn apply(self, grid: &SurfaceUVGrid) -> SurfaceUVGrid {
        let (m, n, c) = (grid.m(), grid.n(), grid.channels);
        let order = self.source_order(m, n);
        let data = order.iter().flat_map(|&s| grid.data[s * c..(s + 1) * c].iter().copied()).collect();
        let mut u = grid.u_params.clone();
        let mut v = grid.v_params.clone();
        if self.flip_u {
            u.reverse();
        }
        if self.flip_v {
            v.reverse();
        }
        if self.transpose {
            std::mem::swap(&mut u, &mut v);
        }
        let mut flagged: Vec<usize> =
            order.iter().enumerate().filter(|(_, s)| grid.flagged.contains(s)).map(|(dst, _)| dst).collect();
        flagged.sort_unstable();
        SurfaceUVGrid { u_params: u, v_params: v, channels: c, data, flagged }
    }
}

/// The 8 grids of the square-symmetry orbit, identity first.
pub fn grid_symmetry_orbit(grid: &SurfaceUVGrid) -> Vec<SurfaceUVGrid> {
    GridSymmetry::all().iter().map(|s| s.apply(grid)).collect()
}
